//! Constant-Beltrami paths on tori and the chain-model defect `A(t)`.
//!
//! The path `g^t` has Beltrami coefficient `t mu`. Its affine part is
//! `a (z + t mu conj(z))`, and the scalar `a` is fixed by a [`Gauge`]. The
//! marked torus `Y^t` is always normalised to the lattice `Z + tau_t Z`, so
//! `h(t) = ||g^t_# q||` does not depend on the gauge. Only the chart factors
//! entering the analytic derivative do.
//!
//! For a raw affine part `(a, b)` the transported differential is `x^2 dw^2`
//! with `x a - conj(x) conj(b) = sqrt(q)`, i.e. `x = (s conj(a) + conj(s) conj(b)) / J`,
//! `J = |a|^2 - |b|^2`, and
//!
//! ```text
//! h(t)  = |x|^2 J tau2
//! h'(t) = 2 Re[ mu / (1 - |t mu|^2) * (a / conj(a)) * x^2 ] * J tau2
//! ```

use num_complex::Complex;

use crate::cylinder::{chain_norm, cone_extremal, ChainMap, ConeDifferential, CylinderChain, Monotone};
use crate::error::{Error, Result};
use crate::flat::{parse_marked_map, MarkedTorusMap, Marking, TorusQuadDiff, UpperHalfPoint};
use crate::scalar::{tolerance, Real};
use crate::torus::{heights_map, qd_norm};

/// Largest finite-difference step accepted by [`h_prime`].
pub const MAX_STEP: f64 = 1e-3;

/// Smallest step the central difference is shrunk to near the path ends.
pub const MIN_STEP: f64 = 1e-6;

/// Tail mass, relative to the total, below which chain tails stop being summed.
pub const TAIL_TOL: f64 = 1e-15;

/// Cap on the number of tail terms summed for an infinite chain.
pub const MAX_TAIL_TERMS: usize = 1_000_000;

/// Normalisation of the affine part of `g^t`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Gauge {
    /// `g^t(1) = 1`.
    #[default]
    Fix1,
    /// `g^t(tau) = tau`.
    Fix1Tau,
    /// Area preserving, `a > 0`.
    Area,
}

impl Gauge {
    pub const ALL: [Gauge; 3] = [Gauge::Fix1, Gauge::Fix1Tau, Gauge::Area];

    pub fn as_str(&self) -> &'static str {
        match self {
            Gauge::Fix1 => "fix1",
            Gauge::Fix1Tau => "fix1tau",
            Gauge::Area => "area",
        }
    }

    /// Raw affine part `(a, b)` of `g^t` in this gauge.
    pub fn affine<T: Real>(&self, mu: Complex<T>, t: T, tau: UpperHalfPoint<T>) -> (Complex<T>, Complex<T>) {
        let one = Complex::new(T::one(), T::zero());
        let tm = mu * t;
        let a = match self {
            Gauge::Fix1 => one / (one + tm),
            Gauge::Fix1Tau => {
                let tc = tau.as_complex();
                tc / (tc + tm * tc.conj())
            }
            Gauge::Area => one / (T::one() - tm.norm_sqr()).sqrt(),
        };
        (a, tm * a)
    }
}

impl std::str::FromStr for Gauge {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fix1" => Ok(Gauge::Fix1),
            "fix1tau" => Ok(Gauge::Fix1Tau),
            "area" => Ok(Gauge::Area),
            other => Err(Error::Schema(format!(
                "unknown gauge {other:?}, expected fix1, fix1tau or area"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeltramiPath<T> {
    mu: Complex<T>,
    t: T,
    source_tau: UpperHalfPoint<T>,
}

impl<T: Real> BeltramiPath<T> {
    pub fn new(mu: Complex<T>, t: T, source_tau: UpperHalfPoint<T>) -> Result<Self> {
        if !(mu.norm() < T::one()) {
            return Err(Error::InvalidBeltrami(mu.norm().as_f64()));
        }
        if !(t >= T::zero() && t <= T::one()) {
            return Err(Error::StepOutsidePath {
                op: "BeltramiPath",
                t: t.as_f64(),
                step: 0.0,
            });
        }
        Ok(Self { mu, t, source_tau })
    }

    pub fn mu(&self) -> Complex<T> {
        self.mu
    }

    pub fn t(&self) -> T {
        self.t
    }

    pub fn source_tau(&self) -> UpperHalfPoint<T> {
        self.source_tau
    }

    pub fn at(&self, t: T) -> Result<Self> {
        Self::new(self.mu, t, self.source_tau)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathPoint<T> {
    pub tau_t: UpperHalfPoint<T>,
    pub g_t: MarkedTorusMap<T>,
}

/// `Y^t` and the map `g^t: z -> (z + t mu conj(z)) / (1 + t mu)` with identity marking.
pub fn path_point<T: Real>(path: &BeltramiPath<T>) -> Result<PathPoint<T>> {
    let (a, b) = Gauge::Fix1.affine(path.mu, path.t, path.source_tau);
    let tau = path.source_tau.as_complex();
    let tau_t = UpperHalfPoint::from_complex(a * tau + b * tau.conj())?;
    let g_t = parse_marked_map(Marking::IDENTITY, path.source_tau, tau_t)?;
    Ok(PathPoint { tau_t, g_t })
}

fn check_source<T: Real>(path: &BeltramiPath<T>, q: &TorusQuadDiff<T>) -> Result<()> {
    if !q.tau().approx_eq(&path.source_tau, tolerance(1e-12)) {
        return Err(Error::WrongSurface {
            op: "h_of_t",
            found: (q.tau().tau1().as_f64(), q.tau().tau2().as_f64()),
            expected: (path.source_tau.tau1().as_f64(), path.source_tau.tau2().as_f64()),
        });
    }
    Ok(())
}

/// `h(t) = ||g^t_# q||`, computed through the torus heights map.
pub fn h_of_t<T: Real>(path: &BeltramiPath<T>, q: &TorusQuadDiff<T>) -> Result<T> {
    check_source(path, q)?;
    if path.t == T::zero() {
        return Ok(qd_norm(q));
    }
    let point = path_point(path)?;
    Ok(qd_norm(&heights_map(&point.g_t, q)?))
}

struct Transport<T> {
    a: Complex<T>,
    x: Complex<T>,
    area: T,
}

fn transport<T: Real>(path: &BeltramiPath<T>, q: &TorusQuadDiff<T>, gauge: Gauge) -> Transport<T> {
    let (a, b) = gauge.affine(path.mu, path.t, path.source_tau);
    let jac = a.norm_sqr() - b.norm_sqr();
    let s = q.sqrt();
    let x = (s * a.conj() + s.conj() * b.conj()) / jac;
    Transport {
        a,
        x,
        area: jac * path.source_tau.area(),
    }
}

/// `h(t)` from the closed form in the given gauge.
pub fn h_closed_form<T: Real>(path: &BeltramiPath<T>, q: &TorusQuadDiff<T>, gauge: Gauge) -> Result<T> {
    check_source(path, q)?;
    let tr = transport(path, q, gauge);
    Ok(tr.x.norm_sqr() * tr.area)
}

/// The analytic variational formula for `h'(t)`.
pub fn h_prime_analytic<T: Real>(path: &BeltramiPath<T>, q: &TorusQuadDiff<T>, gauge: Gauge) -> Result<T> {
    check_source(path, q)?;
    let tr = transport(path, q, gauge);
    let tm = path.mu * path.t;
    let coeff = path.mu / (T::one() - tm.norm_sqr());
    let integrand = coeff * (tr.a / tr.a.conj()) * tr.x * tr.x;
    Ok(T::lit(2.0) * integrand.re * tr.area)
}

/// Central difference of [`h_of_t`] with step `step`.
pub fn h_prime_numeric<T: Real>(path: &BeltramiPath<T>, q: &TorusQuadDiff<T>, step: T) -> Result<T> {
    let t = path.t;
    if !(step > T::zero()) || t - step < T::zero() || t + step > T::one() {
        return Err(Error::StepOutsidePath {
            op: "h_prime",
            t: t.as_f64(),
            step: step.as_f64(),
        });
    }
    let hp = h_of_t(&path.at(t + step)?, q)?;
    let hm = h_of_t(&path.at(t - step)?, q)?;
    Ok((hp - hm) / (step + step))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HPrime<T> {
    pub analytic: T,
    pub numeric: T,
    pub discrepancy: T,
    /// Step actually used, shrunk near the path ends.
    pub step: T,
}

/// Analytic and numeric `h'(t)`; the numeric value is the reference.
pub fn h_prime<T: Real>(path: &BeltramiPath<T>, q: &TorusQuadDiff<T>, step: T, gauge: Gauge) -> Result<HPrime<T>> {
    let t = path.t;
    if !(step > T::zero()) || step > T::lit(MAX_STEP) {
        return Err(Error::StepOutsidePath {
            op: "h_prime",
            t: t.as_f64(),
            step: step.as_f64(),
        });
    }
    let step = step.min(t).min(T::one() - t);
    if step < T::lit(MIN_STEP) {
        return Err(Error::StepOutsidePath {
            op: "h_prime",
            t: t.as_f64(),
            step: step.as_f64(),
        });
    }
    let analytic = h_prime_analytic(path, q, gauge)?;
    let numeric = h_prime_numeric(path, q, step)?;
    Ok(HPrime {
        analytic,
        numeric,
        discrepancy: (analytic - numeric).abs(),
        step,
    })
}

/// `|d_s - d_{s/2}|` for the central differences at steps `s` and `s/2`.
pub fn richardson_gap<T: Real>(path: &BeltramiPath<T>, q: &TorusQuadDiff<T>, step: T) -> Result<T> {
    let d1 = h_prime_numeric(path, q, step)?;
    let d2 = h_prime_numeric(path, q, step / T::lit(2.0))?;
    Ok((d1 - d2).abs())
}

/// Chain data for the defect functional along `lambda_n(t) = lambda_n^t`.
#[derive(Clone, Debug)]
pub struct ChainPath<'a> {
    pub chain: &'a CylinderChain<f64>,
    pub map: &'a ChainMap<f64>,
    pub weights: &'a ConeDifferential<f64>,
    /// Truncation level `N`.
    pub n_max: u64,
}

/// Finite-level defect `A_N(t) = sum_{n>N} (sup_{m>N} lambda_m^t - lambda_n^t) w_n a_n b_n`.
///
/// This is the excess of the certified tail bound over the true tail of
/// `h(t) = sum lambda_n^t w_n a_n b_n`. It is nonnegative, vanishes at `t = 0`
/// and decreases to `0` as `N` grows.
pub fn a_value(cp: &ChainPath<'_>, t: f64) -> Result<f64> {
    let chain = cp.chain;
    let first = (cp.n_max + 1).max(chain.start());
    let last = match (chain.last_index(), cp.weights.support_len()) {
        (Some(l), _) => Some(l),
        (None, Some(s)) => Some(chain.start() + s as u64 - 1),
        (None, None) => None,
    };
    let total = match last {
        Some(_) => None,
        None => Some(chain_norm(chain, cp.weights)?),
    };
    let mut terms = Vec::new();
    let mut summed = 0.0;
    if let Some(total) = total {
        for k in 0..first - chain.start() {
            summed += cp.weights.weight_at(k as usize) * chain.cylinder(chain.start() + k)?.area();
        }
        let mut n = first;
        while total - summed > TAIL_TOL * total {
            if terms.len() >= MAX_TAIL_TERMS {
                return Err(Error::Divergent(format!(
                    "tail after N = {} still carries {:e} of the norm after {MAX_TAIL_TERMS} terms",
                    cp.n_max,
                    (total - summed) / total
                )));
            }
            let mass = cp.weights.weight_at((n - chain.start()) as usize) * chain.cylinder(n)?.area();
            summed += mass;
            terms.push((cp.map.lambda(n)?, mass));
            n += 1;
        }
    } else if let Some(last) = last {
        for n in first..=last {
            let mass = cp.weights.weight_at((n - chain.start()) as usize) * chain.cylinder(n)?.area();
            terms.push((cp.map.lambda(n)?, mass));
        }
    }
    if terms.is_empty() {
        return Ok(0.0);
    }
    let tail_finite = last.is_some();
    let computed_sup = terms.iter().map(|(l, _)| *l).fold(f64::MIN, f64::max);
    let sup = if cp.map.monotone() == Some(Monotone::Decreasing) {
        terms[0].0
    } else if tail_finite {
        computed_sup
    } else if let Some(v) = cp.map.sup().value {
        v.max(computed_sup)
    } else {
        return Err(Error::Metadata(
            "defect of an infinite tail needs a declared sup or a decreasing certificate".into(),
        ));
    };
    let sup_t = sup.powf(t);
    Ok(terms.iter().map(|(l, m)| (sup_t - l.powf(t)) * m).sum())
}

/// Right-hand side `||q|| [(1 + t k)/(1 - t k) - (1 - t k)/(1 + t k)]` with
/// `k = (K - 1)/(K + 1)` and `K = max(sup lambda, 1/inf lambda)`.
pub fn a_bound(norm: f64, k_dil: f64, t: f64) -> f64 {
    let k = (k_dil - 1.0) / (k_dil + 1.0);
    let tk = t * k;
    norm * ((1.0 + tk) / (1.0 - tk) - (1.0 - tk) / (1.0 + tk))
}

/// Torus path data for a [`PathReport`].
#[derive(Clone, Copy, Debug)]
pub struct TorusPath<T> {
    pub mu: Complex<T>,
    pub tau: UpperHalfPoint<T>,
    pub q: TorusQuadDiff<T>,
    pub step: T,
    pub gauge: Gauge,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathChecks {
    pub a_nonnegative: bool,
    pub a_zero_at_origin: bool,
    /// `A` nondecreasing along the sorted grid, so it decreases to `0` as `t -> 0`.
    pub a_monotone: bool,
    pub a_within_bound: bool,
    /// Largest `|analytic - numeric|` over interior grid points.
    pub max_discrepancy: Option<f64>,
}

impl PathChecks {
    pub fn a_properties_hold(&self) -> bool {
        self.a_nonnegative && self.a_zero_at_origin && self.a_within_bound
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathReport<T> {
    pub t_grid: Vec<T>,
    pub h: Vec<T>,
    pub h_prime_analytic: Vec<T>,
    /// `None` where the central difference does not fit inside `[0, 1]`.
    pub h_prime_numeric: Vec<Option<T>>,
    pub a_vals: Vec<f64>,
    pub bounds: Vec<f64>,
    pub dilatation: f64,
    pub chain_norm: f64,
    pub checks: PathChecks,
}

/// Evaluates the torus path and the chain defect on `t_grid`.
pub fn a_of_t<T: Real>(torus: &TorusPath<T>, chain: &ChainPath<'_>, t_grid: &[T]) -> Result<PathReport<T>> {
    if t_grid.is_empty() {
        return Err(Error::Schema("empty t grid".into()));
    }
    let extremal = cone_extremal(chain.chain, chain.map, chain.n_max)?;
    if !extremal.exact {
        return Err(Error::Metadata(
            "the defect bound needs a certified K = max(sup lambda, 1/inf lambda)".into(),
        ));
    }
    let k_dil = extremal.l;
    let norm = chain_norm(chain.chain, chain.weights)?;

    let mut report = PathReport {
        t_grid: t_grid.to_vec(),
        h: Vec::with_capacity(t_grid.len()),
        h_prime_analytic: Vec::with_capacity(t_grid.len()),
        h_prime_numeric: Vec::with_capacity(t_grid.len()),
        a_vals: Vec::with_capacity(t_grid.len()),
        bounds: Vec::with_capacity(t_grid.len()),
        dilatation: k_dil,
        chain_norm: norm,
        checks: PathChecks {
            a_nonnegative: true,
            a_zero_at_origin: true,
            a_monotone: true,
            a_within_bound: true,
            max_discrepancy: None,
        },
    };
    for &t in t_grid {
        let path = BeltramiPath::new(torus.mu, t, torus.tau)?;
        report.h.push(h_of_t(&path, &torus.q)?);
        report
            .h_prime_analytic
            .push(h_prime_analytic(&path, &torus.q, torus.gauge)?);
        let numeric = match h_prime(&path, &torus.q, torus.step, torus.gauge) {
            Ok(d) => {
                let m = report.checks.max_discrepancy.unwrap_or(0.0);
                report.checks.max_discrepancy = Some(m.max(d.discrepancy.as_f64()));
                Some(d.numeric)
            }
            Err(Error::StepOutsidePath { .. }) => None,
            Err(e) => return Err(e),
        };
        report.h_prime_numeric.push(numeric);
        let tf = t.as_f64();
        let a = a_value(chain, tf)?;
        let bound = a_bound(norm, k_dil, tf);
        let checks = &mut report.checks;
        checks.a_nonnegative &= a >= 0.0;
        if tf == 0.0 {
            checks.a_zero_at_origin &= a == 0.0;
        }
        checks.a_within_bound &= a <= bound + 1e-12 * norm;
        report.a_vals.push(a);
        report.bounds.push(bound);
    }
    let mut order: Vec<usize> = (0..t_grid.len()).collect();
    order.sort_by(|&i, &j| t_grid[i].partial_cmp(&t_grid[j]).expect("finite grid"));
    report.checks.a_monotone = order
        .windows(2)
        .all(|w| report.a_vals[w[1]] >= report.a_vals[w[0]] - 1e-15);
    Ok(report)
}
