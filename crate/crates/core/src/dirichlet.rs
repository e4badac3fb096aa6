//! Discrete Dirichlet principle on a flat torus.
//!
//! A grid form on the `N x N` grid of the unit-square chart `z = x + tau y` is
//! stored as its periods `(h1, h2)` plus a periodic vertex potential `F`:
//!
//! ```text
//! P[i][j] = h1 + N (F[i+1][j] - F[i][j])
//! Q[i][j] = h2 + N (F[i][j+1] - F[i][j])
//! ```
//!
//! so every stored form is closed. Index `i` runs along `x`, `j` along `y`,
//! and cell `(i, j)` is stored at `j * N + i`. The energy of
//! `alpha = P dx + Q dy` is `sum (P, Q) G^-1 (P, Q)^T tau2 / N^2` with the
//! Gram matrix `G = [[1, tau1], [tau1, |tau|^2]]` of the chart.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::flat::{MarkedTorusMap, UpperHalfPoint};
use crate::scalar::{tolerance, Real};

/// Largest grid solved by the dense direct method.
pub const DIRECT_SOLVE_MAX_N: usize = 8;

/// Relative residual target of the conjugate-gradient solve.
pub const SOLVER_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct GridOneForm<T> {
    n: usize,
    tau: UpperHalfPoint<T>,
    periods: (T, T),
    potential: Vec<T>,
}

impl<T: Real> GridOneForm<T> {
    /// The constant form `h1 dx + h2 dy`.
    pub fn constant(periods: (T, T), tau: UpperHalfPoint<T>, n: usize) -> Result<Self> {
        Self::with_potential(periods, tau, n, vec![T::zero(); n * n])
    }

    pub fn with_potential(periods: (T, T), tau: UpperHalfPoint<T>, n: usize, potential: Vec<T>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidForm("grid resolution must be positive".into()));
        }
        if potential.len() != n * n {
            return Err(Error::InvalidForm(format!(
                "potential has {} values, expected {}",
                potential.len(),
                n * n
            )));
        }
        if !periods.0.is_finite() || !periods.1.is_finite() || potential.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidForm("non-finite form data".into()));
        }
        Ok(Self {
            n,
            tau,
            periods,
            potential,
        })
    }

    /// Rebuilds a form from per-cell coefficients, rejecting forms that are
    /// not closed or whose row/column sums disagree.
    pub fn from_cells(tau: UpperHalfPoint<T>, n: usize, p: &[T], q: &[T]) -> Result<Self> {
        if n == 0 || p.len() != n * n || q.len() != n * n {
            return Err(Error::InvalidForm(format!(
                "expected {} cells for N = {n}, got P: {}, Q: {}",
                n * n,
                p.len(),
                q.len()
            )));
        }
        let nt = T::from_usize(n).expect("grid size");
        let h1 = pairwise_sum(&p[..n]) / nt;
        let h2 = pairwise_sum(&(0..n).map(|j| q[j * n]).collect::<Vec<_>>()) / nt;
        let mut f = vec![T::zero(); n * n];
        for i in 0..n - 1 {
            f[i + 1] = f[i] + (p[i] - h1) / nt;
        }
        for j in 0..n - 1 {
            for i in 0..n {
                f[(j + 1) * n + i] = f[j * n + i] + (q[j * n + i] - h2) / nt;
            }
        }
        let form = Self::with_potential((h1, h2), tau, n, f)?;
        let (rp, rq) = form.cells();
        let scale = p
            .iter()
            .chain(q)
            .fold(T::one(), |m, v| m.max(v.abs()));
        let mismatch = rp
            .iter()
            .zip(p)
            .chain(rq.iter().zip(q))
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()));
        let tol = tolerance::<T>(1e-9);
        if mismatch > tol * scale {
            return Err(Error::InvalidForm(format!(
                "cell coefficients are not closed: curl residual {:e}",
                mismatch.as_f64()
            )));
        }
        Ok(form)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tau(&self) -> UpperHalfPoint<T> {
        self.tau
    }

    pub fn periods(&self) -> (T, T) {
        self.periods
    }

    pub fn potential(&self) -> &[T] {
        &self.potential
    }

    /// Per-cell `(P, Q)`.
    pub fn cells(&self) -> (Vec<T>, Vec<T>) {
        let (p, q) = differential(&self.potential, self.n);
        (
            p.into_iter().map(|v| v + self.periods.0).collect(),
            q.into_iter().map(|v| v + self.periods.1).collect(),
        )
    }

    /// The same periods with the potential removed.
    pub fn harmonic_part(&self) -> Self {
        Self::constant(self.periods, self.tau, self.n).expect("valid form")
    }

    /// Only the exact part `dF`, with zero periods.
    pub fn exact_part(&self) -> Self {
        Self {
            periods: (T::zero(), T::zero()),
            ..self.clone()
        }
    }

    pub fn scaled(&self, lambda: T) -> Self {
        Self {
            periods: (self.periods.0 * lambda, self.periods.1 * lambda),
            potential: self.potential.iter().map(|v| *v * lambda).collect(),
            ..self.clone()
        }
    }

    /// Pointwise sum; both forms must share the grid and torus.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.n != other.n || self.tau != other.tau {
            return Err(Error::InvalidForm("forms live on different grids".into()));
        }
        Ok(Self {
            periods: (self.periods.0 + other.periods.0, self.periods.1 + other.periods.1),
            potential: self
                .potential
                .iter()
                .zip(&other.potential)
                .map(|(a, b)| *a + *b)
                .collect(),
            ..self.clone()
        })
    }
}

/// Forward differences `N (F[i+1][j] - F[i][j])`, `N (F[i][j+1] - F[i][j])`.
fn differential<T: Real>(f: &[T], n: usize) -> (Vec<T>, Vec<T>) {
    let nt = T::from_usize(n).expect("grid size");
    let mut p = vec![T::zero(); n * n];
    let mut q = vec![T::zero(); n * n];
    for j in 0..n {
        for i in 0..n {
            let here = f[j * n + i];
            p[j * n + i] = nt * (f[j * n + (i + 1) % n] - here);
            q[j * n + i] = nt * (f[((j + 1) % n) * n + i] - here);
        }
    }
    (p, q)
}

/// Adjoint of [`differential`].
fn codifferential<T: Real>(u: &[T], w: &[T], n: usize) -> Vec<T> {
    let nt = T::from_usize(n).expect("grid size");
    let mut out = vec![T::zero(); n * n];
    for j in 0..n {
        for i in 0..n {
            let left = j * n + (i + n - 1) % n;
            let below = ((j + n - 1) % n) * n + i;
            out[j * n + i] = nt * (u[left] - u[j * n + i] + w[below] - w[j * n + i]);
        }
    }
    out
}

/// Pairwise summation; deterministic and accurate for long cell sums.
pub fn pairwise_sum<T: Real>(v: &[T]) -> T {
    if v.len() <= 8 {
        return v.iter().fold(T::zero(), |s, x| s + *x);
    }
    let (l, r) = v.split_at(v.len() / 2);
    pairwise_sum(l) + pairwise_sum(r)
}

/// Symmetric form `(P, Q) M (P, Q)^T` with `M = [[m11, m12], [m12, m22]]`.
#[derive(Clone, Copy, Debug)]
struct Metric<T> {
    m11: T,
    m12: T,
    m22: T,
}

impl<T: Real> Metric<T> {
    /// `G^-1 tau2 / N^2` for the chart of `tau`.
    fn of(tau: UpperHalfPoint<T>, n: usize) -> Self {
        let (t1, t2) = (tau.tau1(), tau.tau2());
        let det = t2 * t2;
        let cell = t2 / T::from_usize(n * n).expect("grid size");
        Self {
            m11: (t1 * t1 + t2 * t2) / det * cell,
            m12: -t1 / det * cell,
            m22: cell / det,
        }
    }

    fn apply(&self, p: T, q: T) -> (T, T) {
        (self.m11 * p + self.m12 * q, self.m12 * p + self.m22 * q)
    }

    fn eval(&self, p: T, q: T) -> T {
        let (u, w) = self.apply(p, q);
        p * u + q * w
    }
}

fn energy_of_cells<T: Real>(metric: Metric<T>, p: &[T], q: &[T]) -> T {
    let per_cell: Vec<T> = p.iter().zip(q).map(|(a, b)| metric.eval(*a, *b)).collect();
    pairwise_sum(&per_cell)
}

/// Dirichlet energy of the form on its torus.
pub fn grid_energy<T: Real>(form: &GridOneForm<T>) -> T {
    let (p, q) = form.cells();
    energy_of_cells(Metric::of(form.tau, form.n), &p, &q)
}

/// Closed-form norm `|x|^2 tau2` of the differential `x^2 dz^2` whose heights
/// are the periods: `Im x = h1`, `Im(x tau) = h2`.
pub fn realizing_norm<T: Real>(periods: (T, T), tau: UpperHalfPoint<T>) -> T {
    realizing_root(periods, tau).norm_sqr() * tau.area()
}

/// The `x` with `Im x = h1` and `Im(x tau) = h2`.
pub fn realizing_root<T: Real>(periods: (T, T), tau: UpperHalfPoint<T>) -> Complex<T> {
    let (h1, h2) = periods;
    // Im(x tau) = tau1 h1 + tau2 Re x
    let re = (h2 - tau.tau1() * h1) / tau.tau2();
    Complex::new(re, h1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Minimizer<T> {
    pub form: GridOneForm<T>,
    pub energy: T,
    pub iterations: usize,
    pub residual: T,
    pub direct: bool,
}

/// Minimizes the energy over all grid forms with the given periods.
pub fn harmonic_minimize<T: Real>(periods: (T, T), tau: UpperHalfPoint<T>, n: usize) -> Result<Minimizer<T>> {
    if periods.0 == T::zero() && periods.1 == T::zero() {
        return Err(Error::InvalidForm("periods must not both vanish".into()));
    }
    relax(&GridOneForm::constant(periods, tau, n)?)
}

/// Minimizes the energy over the exact corrections `form + dG`.
pub fn relax<T: Real>(form: &GridOneForm<T>) -> Result<Minimizer<T>> {
    let n = form.n;
    let metric = Metric::of(form.tau, n);
    // Gradient of the energy in F is 2 d^* M (h + dF); solve d^* M d G = -d^* M (h + dF).
    let (p, q) = form.cells();
    let (mp, mq): (Vec<T>, Vec<T>) = p.iter().zip(&q).map(|(a, b)| metric.apply(*a, *b)).unzip();
    let rhs: Vec<T> = codifferential(&mp, &mq, n).into_iter().map(|v| -v).collect();
    let op = |x: &[T]| {
        let (dp, dq) = differential(x, n);
        let (u, w): (Vec<T>, Vec<T>) = dp.iter().zip(&dq).map(|(a, b)| metric.apply(*a, *b)).unzip();
        codifferential(&u, &w, n)
    };
    let (correction, iterations, residual, direct) = if n <= DIRECT_SOLVE_MAX_N {
        let x = dense_solve(&op, &rhs, n * n)?;
        let r = residual_norm(&op, &x, &rhs);
        (x, 0, r, true)
    } else {
        let (x, it, r) = conjugate_gradient(&op, &rhs, tolerance(SOLVER_TOL), 20 * n * n)?;
        (x, it, r, false)
    };
    let potential: Vec<T> = form.potential.iter().zip(&correction).map(|(a, b)| *a + *b).collect();
    let relaxed = GridOneForm::with_potential(form.periods, form.tau, n, remove_mean(potential))?;
    Ok(Minimizer {
        energy: grid_energy(&relaxed),
        form: relaxed,
        iterations,
        residual,
        direct,
    })
}

fn remove_mean<T: Real>(mut v: Vec<T>) -> Vec<T> {
    let mean = pairwise_sum(&v) / T::from_usize(v.len()).expect("length");
    for x in &mut v {
        *x = *x - mean;
    }
    v
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let prod: Vec<T> = a.iter().zip(b).map(|(x, y)| *x * *y).collect();
    pairwise_sum(&prod)
}

fn residual_norm<T: Real>(op: &impl Fn(&[T]) -> Vec<T>, x: &[T], rhs: &[T]) -> T {
    let ax = op(x);
    let r: Vec<T> = rhs.iter().zip(&ax).map(|(b, a)| *b - *a).collect();
    dot(&r, &r).sqrt()
}

/// Conjugate gradient on the mean-zero subspace, where the operator is
/// positive definite. Returns the solution, iteration count and residual.
fn conjugate_gradient<T: Real>(
    op: &impl Fn(&[T]) -> Vec<T>,
    rhs: &[T],
    tol: T,
    max_iter: usize,
) -> Result<(Vec<T>, usize, T)> {
    let b = remove_mean(rhs.to_vec());
    let b_norm = dot(&b, &b).sqrt();
    let mut x = vec![T::zero(); b.len()];
    if b_norm == T::zero() {
        return Ok((x, 0, T::zero()));
    }
    let mut r = b.clone();
    let mut d = r.clone();
    let mut rr = dot(&r, &r);
    for it in 1..=max_iter {
        let ad = op(&d);
        let alpha = rr / dot(&d, &ad);
        for k in 0..x.len() {
            x[k] = x[k] + alpha * d[k];
            r[k] = r[k] - alpha * ad[k];
        }
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= tol * b_norm {
            let res = residual_norm(op, &x, &b);
            return Ok((x, it, res));
        }
        let beta = rr_new / rr;
        for k in 0..d.len() {
            d[k] = r[k] + beta * d[k];
        }
        rr = rr_new;
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: (rr.sqrt() / b_norm).as_f64(),
    })
}

/// Dense Cholesky solve with vertex 0 pinned to remove the constant kernel.
fn dense_solve<T: Real>(op: &impl Fn(&[T]) -> Vec<T>, rhs: &[T], dim: usize) -> Result<Vec<T>> {
    let m = dim - 1;
    let mut a = vec![T::zero(); m * m];
    let mut e = vec![T::zero(); dim];
    for c in 0..m {
        e[c + 1] = T::one();
        let col = op(&e);
        e[c + 1] = T::zero();
        for r in 0..m {
            a[r * m + c] = col[r + 1];
        }
    }
    // In-place lower Cholesky factor.
    for j in 0..m {
        let mut s = a[j * m + j];
        for k in 0..j {
            s = s - a[j * m + k] * a[j * m + k];
        }
        if !(s > T::zero()) {
            return Err(Error::NoConvergence {
                iterations: 0,
                residual: s.as_f64(),
            });
        }
        let d = s.sqrt();
        a[j * m + j] = d;
        for i in j + 1..m {
            let mut s = a[i * m + j];
            for k in 0..j {
                s = s - a[i * m + k] * a[j * m + k];
            }
            a[i * m + j] = s / d;
        }
    }
    let mut y: Vec<T> = rhs[1..].to_vec();
    for i in 0..m {
        for k in 0..i {
            y[i] = y[i] - a[i * m + k] * y[k];
        }
        y[i] = y[i] / a[i * m + i];
    }
    for i in (0..m).rev() {
        for k in i + 1..m {
            y[i] = y[i] - a[k * m + i] * y[k];
        }
        y[i] = y[i] / a[i * m + i];
    }
    let mut x = Vec::with_capacity(dim);
    x.push(T::zero());
    x.extend(y);
    Ok(x)
}

/// `grid_energy(form)` minus the minimum over forms with the same periods.
pub fn dirichlet_gap<T: Real>(form: &GridOneForm<T>) -> T {
    grid_energy(form) - grid_energy(&form.harmonic_part())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PushforwardEnergy<T> {
    pub energy: T,
    pub image_energy: T,
    pub dilatation: T,
}

impl<T: Real> PushforwardEnergy<T> {
    /// `image_energy <= K energy + 1e-10`.
    pub fn holds(&self) -> bool {
        self.image_energy <= self.dilatation * self.energy + tolerance::<T>(1e-10)
    }
}

/// Energy of the form pushed forward by the affine representative of `f`.
///
/// The chart coordinates transform by the marking, `(x', y') = B (x, y)`, so
/// the pushed coefficients are `(P, Q) B^-1` on cells of area `tau2' / N^2`.
pub fn pushforward_energy<T: Real>(form: &GridOneForm<T>, f: &MarkedTorusMap<T>) -> Result<PushforwardEnergy<T>> {
    if !form.tau.approx_eq(&f.tau(), tolerance(1e-12)) {
        return Err(Error::WrongSurface {
            op: "pushforward_energy_bound",
            found: (form.tau.tau1().as_f64(), form.tau.tau2().as_f64()),
            expected: (f.tau().tau1().as_f64(), f.tau().tau2().as_f64()),
        });
    }
    let inv = f.marking().inverse().0;
    let c = |v: i64| T::from_i64(v).expect("small integer");
    let (p, q) = form.cells();
    let (pp, qq): (Vec<T>, Vec<T>) = p
        .iter()
        .zip(&q)
        .map(|(a, b)| (*a * c(inv[0][0]) + *b * c(inv[1][0]), *a * c(inv[0][1]) + *b * c(inv[1][1])))
        .unzip();
    Ok(PushforwardEnergy {
        energy: grid_energy(form),
        image_energy: energy_of_cells(Metric::of(f.tau_prime(), form.n), &pp, &qq),
        dilatation: f.dilatation(),
    })
}

/// Whether the pushed-forward energy obeys the quasiconformal bound.
pub fn pushforward_energy_bound<T: Real>(form: &GridOneForm<T>, f: &MarkedTorusMap<T>) -> Result<bool> {
    Ok(pushforward_energy(form, f)?.holds())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flat::{parse_marked_map, Marking};

    fn tau(t1: f64, t2: f64) -> UpperHalfPoint<f64> {
        UpperHalfPoint::new(t1, t2).unwrap()
    }

    #[test]
    fn energy_examples() {
        let e = |h, t| grid_energy(&GridOneForm::constant(h, t, 4).unwrap());
        assert!((e((0.0, 1.0), tau(0.0, 1.0)) - 1.0).abs() < 1e-15);
        assert!((e((1.0, 0.0), tau(0.0, 1.0)) - 1.0).abs() < 1e-15);
        assert!((e((0.0, 1.0), tau(0.0, 2.0)) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn minimizer_examples() {
        for (h, expected) in [((0.0, 1.0), 1.0), ((1.0, 0.0), 1.0), ((1.0, 1.0), 2.0)] {
            let m = harmonic_minimize(h, tau(0.0, 1.0), 6).unwrap();
            assert!((m.energy - expected).abs() < 1e-12);
            assert!((realizing_norm(h, tau(0.0, 1.0)) - expected).abs() < 1e-15);
        }
        assert!(harmonic_minimize((0.0, 0.0), tau(0.0, 1.0), 4).is_err());
        assert!(harmonic_minimize((1.0, 0.0), tau(0.0, 1.0), 0).is_err());
    }

    #[test]
    fn realizing_norm_matches_energy_on_sheared_torus() {
        let t = tau(0.7, 1.3);
        let h = (0.4, -1.1);
        let e = grid_energy(&GridOneForm::constant(h, t, 5).unwrap());
        assert!((e - realizing_norm(h, t)).abs() < 1e-13);
    }

    fn bumpy(n: usize, t: UpperHalfPoint<f64>) -> GridOneForm<f64> {
        let f: Vec<f64> = (0..n * n).map(|k| ((k * 37 % 11) as f64 - 5.0) * 0.03).collect();
        GridOneForm::with_potential((0.3, 0.8), t, n, f).unwrap()
    }

    #[test]
    fn relax_recovers_constant_form_both_solvers() {
        let t = tau(-0.4, 0.9);
        for n in [4, 8, 12] {
            let form = bumpy(n, t);
            let m = relax(&form).unwrap();
            assert_eq!(m.direct, n <= DIRECT_SOLVE_MAX_N);
            let (p, q) = m.form.cells();
            for v in &p {
                assert!((v - 0.3).abs() < 1e-9);
            }
            for v in &q {
                assert!((v - 0.8).abs() < 1e-9);
            }
            assert!((m.energy - realizing_norm((0.3, 0.8), t)).abs() < 1e-10);
        }
    }

    #[test]
    fn gap_is_energy_of_exact_part() {
        let form = bumpy(7, tau(1.2, 0.6));
        let gap = dirichlet_gap(&form);
        assert!(gap > 0.0);
        assert!((gap - grid_energy(&form.exact_part())).abs() < 1e-12);
        assert_eq!(dirichlet_gap(&form.harmonic_part()), 0.0);
    }

    #[test]
    fn cells_round_trip() {
        let form = bumpy(5, tau(0.2, 1.5));
        let (p, q) = form.cells();
        let back = GridOneForm::from_cells(form.tau(), 5, &p, &q).unwrap();
        let (p2, q2) = back.cells();
        for (a, b) in p.iter().chain(&q).zip(p2.iter().chain(&q2)) {
            assert!((a - b).abs() < 1e-12);
        }
        let mut bad = p.clone();
        bad[3] += 0.5;
        assert!(GridOneForm::from_cells(form.tau(), 5, &bad, &q).is_err());
    }

    #[test]
    fn pushforward_examples() {
        let form = GridOneForm::constant((0.0, 1.0), tau(0.0, 1.0), 4).unwrap();
        let id = parse_marked_map(Marking::IDENTITY, tau(0.0, 1.0), tau(0.0, 1.0)).unwrap();
        let pe = pushforward_energy(&form, &id).unwrap();
        assert!((pe.energy - pe.image_energy).abs() < 1e-15);

        let f = parse_marked_map(Marking::IDENTITY, tau(0.0, 1.0), tau(0.0, 2.0)).unwrap();
        let pe = pushforward_energy(&form, &f).unwrap();
        assert!((pe.image_energy - 0.5).abs() < 1e-15);
        assert!(pe.holds());

        let twist = parse_marked_map(Marking([[2, 1], [1, 1]]), tau(0.0, 1.0), tau(0.0, 1.0)).unwrap();
        assert!(pushforward_energy_bound(&bumpy(6, tau(0.0, 1.0)), &twist).unwrap());
    }
}
