//! Heights map, ratio functional and extremal maps on marked tori.
//!
//! For `phi = c dz^2` on `tau` and a marked map `f: tau -> tau'` with affine
//! part `A`, the heights map returns the unique `psi = x^2 dw^2` on `tau'`
//! whose horizontal foliation gives every curve class `B gamma` the height
//! that `phi` gives `gamma`. With `s = sqrt(c)` this is the real-linear
//! solve `Im(x A(1)) = Im(s)`, `Im(x A(tau)) = Im(s tau)`, so `s -> x` is a
//! real-linear *transfer map* `T`. Norm ratios on the unit circle
//! `c = e^{i theta}` are `|T s|^2 tau2' / tau2`, which gives the exact
//! singular-value route to the extremal ratio `L`.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::flat::{parse_marked_map, CurveClass, MarkedTorusMap, Marking, TorusQuadDiff, UpperHalfPoint};
use crate::scalar::{tolerance, Real};

/// Default number of grid samples over `theta in [0, 2 pi)`.
pub const DEFAULT_SAMPLES: usize = 720;

/// Agreement required between the grid optimizer and the singular-value route.
pub const OPTIMIZER_TOL: f64 = 1e-8;

/// `|c| tau2`.
pub fn qd_norm<T: Real>(phi: &TorusQuadDiff<T>) -> T {
    phi.norm()
}

/// Height `|Im(sqrt(c) (p + q tau))|` of the curve class `gamma`.
pub fn curve_height<T: Real>(phi: &TorusQuadDiff<T>, gamma: CurveClass) -> T {
    (phi.sqrt() * phi.tau().lattice_point(gamma.p, gamma.q)).im.abs()
}

/// Real 2x2 matrix acting on `(Re s, Im s)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransferMap<T> {
    pub m: [[T; 2]; 2],
}

impl<T: Real> TransferMap<T> {
    pub fn of(f: &MarkedTorusMap<T>) -> Result<Self> {
        let u = f.apply(Complex::new(T::one(), T::zero()));
        let v = f.apply(f.tau().as_complex());
        // rows: Im(x w) = Re x Im w + Im x Re w for w in {u, v}
        let (p, q, r, s) = (u.im, u.re, v.im, v.re);
        let det = p * s - q * r;
        let scale = u.norm() * v.norm();
        if !(det.abs() > T::epsilon() * scale) {
            return Err(Error::DegenerateAffine {
                a_abs: f.a().norm().as_f64(),
                b_abs: f.b().norm().as_f64(),
            });
        }
        // right-hand side (Im s, Im(s tau)) = R (Re s, Im s), R = [[0, 1], [tau2, tau1]]
        let (t1, t2) = (f.tau().tau1(), f.tau().tau2());
        let inv = [[s / det, -q / det], [-r / det, p / det]];
        let m = [
            [inv[0][1] * t2, inv[0][0] + inv[0][1] * t1],
            [inv[1][1] * t2, inv[1][0] + inv[1][1] * t1],
        ];
        Ok(Self { m })
    }

    pub fn apply(&self, s: Complex<T>) -> Complex<T> {
        let m = &self.m;
        Complex::new(m[0][0] * s.re + m[0][1] * s.im, m[1][0] * s.re + m[1][1] * s.im)
    }

    /// Singular values and right singular vectors, largest first.
    pub fn svd(&self) -> Svd2<T> {
        let m = &self.m;
        let two = T::lit(2.0);
        // Gram matrix M^T M
        let g11 = m[0][0] * m[0][0] + m[1][0] * m[1][0];
        let g22 = m[0][1] * m[0][1] + m[1][1] * m[1][1];
        let g12 = m[0][0] * m[0][1] + m[1][0] * m[1][1];
        let det = (m[0][0] * m[1][1] - m[0][1] * m[1][0]).abs();
        let half_tr = (g11 + g22) / two;
        let disc = (((g11 - g22) / two).powi(2) + g12 * g12).sqrt();
        let sigma_max = (half_tr + disc).sqrt();
        let sigma_min = det / sigma_max;
        let angle = (two * g12).atan2(g11 - g22) / two;
        Svd2 {
            sigma_max,
            sigma_min,
            v_max: Complex::new(angle.cos(), angle.sin()),
            v_min: Complex::new(-angle.sin(), angle.cos()),
        }
    }
}

/// Closed-form singular value decomposition of a transfer map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Svd2<T> {
    pub sigma_max: T,
    pub sigma_min: T,
    pub v_max: Complex<T>,
    pub v_min: Complex<T>,
}

fn check_source<T: Real>(op: &'static str, f: &MarkedTorusMap<T>, phi: &TorusQuadDiff<T>) -> Result<()> {
    if !phi.tau().approx_eq(&f.tau(), tolerance(1e-12)) {
        return Err(Error::WrongSurface {
            op,
            found: (phi.tau().tau1().as_f64(), phi.tau().tau2().as_f64()),
            expected: (f.tau().tau1().as_f64(), f.tau().tau2().as_f64()),
        });
    }
    Ok(())
}

/// The heights map `f#`: the differential on `tau'` with the same heights.
pub fn heights_map<T: Real>(f: &MarkedTorusMap<T>, phi: &TorusQuadDiff<T>) -> Result<TorusQuadDiff<T>> {
    check_source("heights_map", f, phi)?;
    let x = TransferMap::of(f)?.apply(phi.sqrt());
    TorusQuadDiff::new(x * x, f.tau_prime())
}

/// `||f# phi|| / ||phi||`.
pub fn ratio<T: Real>(f: &MarkedTorusMap<T>, phi: &TorusQuadDiff<T>) -> Result<T> {
    Ok(qd_norm(&heights_map(f, phi)?) / qd_norm(phi))
}

/// Which side of `max(ratio, 1/ratio)` realises `L`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    /// `||f# phi|| / ||phi||`
    Forward,
    /// `||phi|| / ||f# phi||`
    Inverse,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::Forward => "forward",
            Branch::Inverse => "inverse",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtremalReport<T> {
    pub l: T,
    /// Phase of the maximizing `c = e^{i theta}`; `None` for conformal classes,
    /// where every direction is a maximizer.
    pub theta_star: Option<T>,
    pub branch: Branch,
    /// `(sigma_max, sigma_min)` of the transfer map.
    pub sigma: (T, T),
    /// Always true: the parameter circle is compact.
    pub attained: bool,
    pub l_grid: T,
    pub l_svd: T,
}

impl<T: Real> ExtremalReport<T> {
    /// The maximizing differential, `dz^2` for conformal classes.
    pub fn phi_star(&self, tau: UpperHalfPoint<T>) -> TorusQuadDiff<T> {
        TorusQuadDiff::from_phase(self.theta_star.unwrap_or_else(T::zero), tau)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtremalOptions {
    pub samples: usize,
}

impl Default for ExtremalOptions {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SAMPLES,
        }
    }
}

pub fn extremal_ratio<T: Real>(f: &MarkedTorusMap<T>) -> Result<ExtremalReport<T>> {
    extremal_ratio_with(f, ExtremalOptions::default())
}

/// Computes `L = sup max(ratio, 1/ratio)` twice: by a grid sweep with
/// golden-section refinement and by the singular values of the transfer map.
pub fn extremal_ratio_with<T: Real>(
    f: &MarkedTorusMap<T>,
    opts: ExtremalOptions,
) -> Result<ExtremalReport<T>> {
    let transfer = TransferMap::of(f)?;
    let svd = transfer.svd();
    let area_ratio = f.tau_prime().tau2() / f.tau().tau2();
    let forward = svd.sigma_max * svd.sigma_max * area_ratio;
    let inverse = T::one() / (svd.sigma_min * svd.sigma_min * area_ratio);

    // the grid route goes through the heights map itself
    let on_circle = |theta: T| {
        ratio(f, &TorusQuadDiff::from_phase(theta, f.tau())).unwrap_or_else(|_| T::nan())
    };
    let grid_forward = sweep_max(&on_circle, opts.samples.max(DEFAULT_SAMPLES));
    let grid_inverse = sweep_max(&|th: T| T::one() / on_circle(th), opts.samples.max(DEFAULT_SAMPLES));
    let l_grid = grid_forward.1.max(grid_inverse.1);

    let tie: T = tolerance(1e-12);
    let branch = if inverse > forward * (T::one() + tie) {
        Branch::Inverse
    } else {
        Branch::Forward
    };
    let l_svd = forward.max(inverse);

    let disagreement = (l_grid - l_svd).abs() / l_svd;
    let bound: T = tolerance(OPTIMIZER_TOL);
    if !(disagreement <= bound) {
        return Err(Error::Tolerance {
            op: "extremal_ratio",
            invariant: "grid optimizer and transfer-map SVD agree on L",
            measured: disagreement.as_f64(),
            bound: bound.as_f64(),
        });
    }

    let conformal = (svd.sigma_max - svd.sigma_min) <= tie * svd.sigma_max;
    let theta_star = if conformal {
        None
    } else {
        let v = match branch {
            Branch::Forward => svd.v_max,
            Branch::Inverse => svd.v_min,
        };
        Some(normalize_angle(v.arg() * T::lit(2.0)))
    };

    Ok(ExtremalReport {
        l: l_svd,
        theta_star,
        branch,
        sigma: (svd.sigma_max, svd.sigma_min),
        attained: true,
        l_grid,
        l_svd,
    })
}

/// Angle reduced to `[0, 2 pi)`.
pub fn normalize_angle<T: Real>(theta: T) -> T {
    let two_pi = T::TAU();
    let r = theta % two_pi;
    let r = if r < T::zero() { r + two_pi } else { r };
    if r >= two_pi {
        T::zero()
    } else {
        r
    }
}

/// Maximum of a `2 pi`-periodic function: uniform grid, then golden-section
/// refinement around the best sample. Returns `(argmax, max)`.
fn sweep_max<T: Real>(func: &dyn Fn(T) -> T, samples: usize) -> (T, T) {
    let n = T::from_usize(samples).expect("sample count");
    let step = T::TAU() / n;
    let mut best = (T::zero(), func(T::zero()));
    for k in 1..samples {
        let theta = step * T::from_usize(k).expect("index");
        let value = func(theta);
        if value > best.1 {
            best = (theta, value);
        }
    }
    let (arg, value) = golden_max(func, best.0 - step, best.0 + step, 200);
    if value > best.1 {
        (normalize_angle(arg), value)
    } else {
        best
    }
}

fn golden_max<T: Real>(func: &dyn Fn(T) -> T, mut lo: T, mut hi: T, iters: usize) -> (T, T) {
    let inv_phi = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (func(x1), func(x2));
    for _ in 0..iters {
        if hi - lo <= T::epsilon() * T::lit(4.0) {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = func(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = func(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// One row of the theta sweep emitted by the CLI.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow<T> {
    pub theta: T,
    pub ratio: T,
    pub inv_ratio: T,
}

pub fn theta_sweep<T: Real>(f: &MarkedTorusMap<T>, samples: usize) -> Result<Vec<SweepRow<T>>> {
    let n = T::from_usize(samples.max(1)).expect("sample count");
    (0..samples)
        .map(|k| {
            let theta = T::TAU() * T::from_usize(k).expect("index") / n;
            let r = ratio(f, &TorusQuadDiff::from_phase(theta, f.tau()))?;
            Ok(SweepRow {
                theta,
                ratio: r,
                inv_ratio: T::one() / r,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConjugateRelation<T> {
    /// `c` with `f#(-phi*) = -c f#(phi*)`.
    pub c: T,
    /// `||f#(-phi*) + c f#(phi*)|| / ||f#(phi*)||`.
    pub residual: T,
    /// `1/L^2` on the forward branch, `L^2` on the inverse branch.
    pub expected_c: T,
}

impl<T: Real> ConjugateRelation<T> {
    pub fn c_error(&self) -> T {
        (self.c - self.expected_c).abs() / self.expected_c
    }
}

/// Evaluates the conjugate relation `f#(-phi*) = -c f#(phi*)` at a maximizer.
pub fn check_conjugate_relation<T: Real>(
    f: &MarkedTorusMap<T>,
    phi_star: &TorusQuadDiff<T>,
    l: T,
) -> Result<ConjugateRelation<T>> {
    let psi = heights_map(f, phi_star)?.coefficient();
    let psi_conj = heights_map(f, &-*phi_star)?.coefficient();
    let c = -(psi_conj * psi.conj()).re / psi.norm_sqr();
    let residual = (psi_conj + psi * c).norm() / psi.norm();
    let expected_c = if ratio(f, phi_star)? >= T::one() {
        T::one() / (l * l)
    } else {
        l * l
    };
    Ok(ConjugateRelation {
        c,
        residual,
        expected_c,
    })
}

/// Tolerance for the stretch map against the affine representative.
pub const RECONSTRUCTION_TOL: f64 = 1e-9;

/// Builds the horizontal stretch by `l` in the natural parameter of `phi_star`,
/// read back through the natural parameter of `f#(phi_star)`:
/// `G(z) = x^{-1} D_l(s z)` with `s = sqrt(phi_star)`, `x = T s` and
/// `D_l(u + iv) = l u + i v`. On the inverse branch the stretch runs along
/// `-phi_star`.
pub fn construct_teichmuller_map<T: Real>(
    f: &MarkedTorusMap<T>,
    phi_star: &TorusQuadDiff<T>,
    l: T,
) -> Result<MarkedTorusMap<T>> {
    check_source("construct_teichmuller_map", f, phi_star)?;
    let stretch_diff = if ratio(f, phi_star)? >= T::one() {
        *phi_star
    } else {
        -*phi_star
    };
    let s = stretch_diff.sqrt();
    let x = TransferMap::of(f)?.apply(s);
    let two = T::lit(2.0);
    // D_l(w) = (l+1)/2 w + (l-1)/2 conj(w)
    let a = s / x * ((l + T::one()) / two);
    let b = s.conj() / x * ((l - T::one()) / two);

    let scale = T::one().max(f.a().norm());
    let mismatch = ((a - f.a()).norm()).max((b - f.b()).norm()) / scale;
    let bound: T = tolerance(RECONSTRUCTION_TOL);
    if !(mismatch <= bound) {
        return Err(Error::Tolerance {
            op: "construct_teichmuller_map",
            invariant: "stretch map equals the affine representative",
            measured: mismatch.as_f64(),
            bound: bound.as_f64(),
        });
    }
    MarkedTorusMap::from_affine(a, b, f.tau(), f.tau_prime())
}

/// Expected Beltrami coefficient `k conj(phi)/|phi|` of a stretch along `phi`.
pub fn stretch_beltrami<T: Real>(phi: &TorusQuadDiff<T>, l: T) -> Complex<T> {
    let c = phi.coefficient();
    let k = (l - T::one()) / (l + T::one());
    c.conj() / c.norm() * k
}

/// The marked map (identity marking) obtained by stretching the natural
/// parameter of `phi` horizontally by `k`, normalised so that `1 -> 1`.
pub fn stretch_map<T: Real>(phi: &TorusQuadDiff<T>, k: T) -> Result<MarkedTorusMap<T>> {
    let s = phi.sqrt();
    let stretch = |z: Complex<T>| {
        let w = s * z;
        Complex::new(w.re * k, w.im) / s
    };
    let one = stretch(Complex::new(T::one(), T::zero()));
    let tau_prime = UpperHalfPoint::from_complex(stretch(phi.tau().as_complex()) / one)?;
    parse_marked_map(Marking::IDENTITY, phi.tau(), tau_prime)
}

/// Quasi-invariance `(1/K)||f# phi|| <= ||phi|| <= K ||f# phi||`
/// with relative slack `1e-12`.
pub fn quasi_invariance_check<T: Real>(f: &MarkedTorusMap<T>, phi: &TorusQuadDiff<T>) -> Result<bool> {
    let k = f.dilatation();
    let n = qd_norm(phi);
    let m = qd_norm(&heights_map(f, phi)?);
    let slack: T = tolerance(1e-12);
    let le = |lhs: T, rhs: T| lhs <= rhs + slack * lhs.abs().max(rhs.abs());
    Ok(le(m / k, n) && le(n, k * m))
}

/// Torus homotopy classes are determined by the action on first homology.
pub fn verify_homotopic<T: Real>(g: &MarkedTorusMap<T>, f: &MarkedTorusMap<T>) -> bool {
    g.marking() == f.marking()
}
