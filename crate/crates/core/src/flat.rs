//! Flat-torus domain types.
//!
//! A marked torus is `C / (Z + tau Z)` with `Im tau > 0`; the first lattice
//! generator is always `1`, so the flat area equals `tau2`. The chart used
//! everywhere is `z = x + tau y` with `(x, y)` in the unit square, and the
//! curve class `(p, q)` is the straight closed curve from `0` to `p + q tau`.

use std::ops::Neg;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{tolerance, Real};

/// Point of the upper half plane describing the lattice `Z + tau Z`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpperHalfPoint<T> {
    tau1: T,
    tau2: T,
}

impl<T: Real> UpperHalfPoint<T> {
    pub fn new(tau1: T, tau2: T) -> Result<Self> {
        if !tau1.is_finite() || !tau2.is_finite() || tau2 <= T::zero() {
            return Err(Error::InvalidTau {
                tau1: tau1.as_f64(),
                tau2: tau2.as_f64(),
            });
        }
        Ok(Self { tau1, tau2 })
    }

    pub fn from_complex(tau: Complex<T>) -> Result<Self> {
        Self::new(tau.re, tau.im)
    }

    /// The square torus `tau = i`.
    pub fn i() -> Self {
        Self {
            tau1: T::zero(),
            tau2: T::one(),
        }
    }

    pub fn tau1(&self) -> T {
        self.tau1
    }

    pub fn tau2(&self) -> T {
        self.tau2
    }

    pub fn as_complex(&self) -> Complex<T> {
        Complex::new(self.tau1, self.tau2)
    }

    /// Flat area of the torus in the chart `z = x + tau y`.
    pub fn area(&self) -> T {
        self.tau2
    }

    /// The lattice vector `p + q tau`.
    pub fn lattice_point(&self, p: i64, q: i64) -> Complex<T> {
        let p = T::from_i64(p).expect("i64 fits");
        let q = T::from_i64(q).expect("i64 fits");
        Complex::new(p, T::zero()) + self.as_complex() * q
    }

    pub fn approx_eq(&self, other: &Self, tol: T) -> bool {
        (self.tau1 - other.tau1).abs() <= tol * T::one().max(self.tau1.abs())
            && (self.tau2 - other.tau2).abs() <= tol * T::one().max(self.tau2.abs())
    }

    pub(crate) fn pair(&self) -> (f64, f64) {
        (self.tau1.as_f64(), self.tau2.as_f64())
    }
}

/// Homology class of a straight closed curve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CurveClass {
    pub p: i64,
    pub q: i64,
}

impl CurveClass {
    pub fn new(p: i64, q: i64) -> Result<Self> {
        if p == 0 && q == 0 {
            return Err(Error::TrivialCurve);
        }
        Ok(Self { p, q })
    }
}

/// Constant quadratic differential `c dz^2` on a marked torus.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TorusQuadDiff<T> {
    c: Complex<T>,
    tau: UpperHalfPoint<T>,
}

impl<T: Real> TorusQuadDiff<T> {
    pub fn new(c: Complex<T>, tau: UpperHalfPoint<T>) -> Result<Self> {
        if !c.re.is_finite() || !c.im.is_finite() || c.norm_sqr() == T::zero() {
            return Err(Error::ZeroDifferential);
        }
        Ok(Self { c, tau })
    }

    /// `e^{i theta} dz^2`, the unit-coefficient differential of phase `theta`.
    pub fn from_phase(theta: T, tau: UpperHalfPoint<T>) -> Self {
        Self {
            c: Complex::from_polar(T::one(), theta),
            tau,
        }
    }

    pub fn coefficient(&self) -> Complex<T> {
        self.c
    }

    pub fn tau(&self) -> UpperHalfPoint<T> {
        self.tau
    }

    /// L1 norm `|c| tau2`.
    pub fn norm(&self) -> T {
        self.c.norm() * self.tau.area()
    }

    /// Phase of `c` in `[0, 2 pi)`.
    pub fn phase(&self) -> T {
        let two_pi = T::TAU();
        let a = self.c.arg();
        if a < T::zero() {
            a + two_pi
        } else {
            a
        }
    }

    /// Canonical square root of the coefficient, see [`canonical_root`].
    pub fn sqrt(&self) -> Complex<T> {
        canonical_root(self.c.sqrt())
    }

    pub fn scale(&self, lambda: T) -> Result<Self> {
        Self::new(self.c * lambda, self.tau)
    }
}

impl<T: Real> Neg for TorusQuadDiff<T> {
    type Output = Self;

    fn neg(self) -> Self {
        Self {
            c: -self.c,
            tau: self.tau,
        }
    }
}

/// Picks the representative of `{x, -x}` with `Im x > 0`, or `x > 0` when real.
pub fn canonical_root<T: Real>(x: Complex<T>) -> Complex<T> {
    if x.im < T::zero() || (x.im == T::zero() && x.re < T::zero()) {
        -x
    } else {
        x
    }
}

/// Horizontal foliation of `x^2 dz^2`: leaves along `ker Im(x dz)`, transverse
/// measure `|Im(x dz)|`. `x` is stored in canonical form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFoliation<T> {
    x: Complex<T>,
    tau: UpperHalfPoint<T>,
}

impl<T: Real> LinearFoliation<T> {
    pub fn new(x: Complex<T>, tau: UpperHalfPoint<T>) -> Result<Self> {
        if !x.re.is_finite() || !x.im.is_finite() || x.norm_sqr() == T::zero() {
            return Err(Error::ZeroDifferential);
        }
        Ok(Self {
            x: canonical_root(x),
            tau,
        })
    }

    pub fn x(&self) -> Complex<T> {
        self.x
    }

    pub fn tau(&self) -> UpperHalfPoint<T> {
        self.tau
    }

    /// Transverse measure of the straight curve in class `gamma`.
    pub fn height(&self, gamma: CurveClass) -> T {
        (self.x * self.tau.lattice_point(gamma.p, gamma.q)).im.abs()
    }

    /// The differential `x^2 dz^2` whose horizontal foliation this is.
    pub fn differential(&self) -> TorusQuadDiff<T> {
        TorusQuadDiff {
            c: self.x * self.x,
            tau: self.tau,
        }
    }
}

/// Horizontal foliation of `phi` via the canonical square root of its coefficient.
pub fn foliation_of_diff<T: Real>(phi: &TorusQuadDiff<T>) -> LinearFoliation<T> {
    LinearFoliation {
        x: phi.sqrt(),
        tau: phi.tau,
    }
}

/// Integer action on curve classes, `(p, q) -> B (p, q)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Marking(pub [[i64; 2]; 2]);

impl Marking {
    pub const IDENTITY: Marking = Marking([[1, 0], [0, 1]]);

    pub fn det(&self) -> i64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    /// `self * rhs`, i.e. apply `rhs` first.
    pub fn mul(&self, rhs: &Marking) -> Marking {
        let (a, b) = (&self.0, &rhs.0);
        let mut out = [[0i64; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, entry) in row.iter_mut().enumerate() {
                *entry = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Marking(out)
    }

    /// Inverse of a determinant-one marking.
    pub fn inverse(&self) -> Marking {
        let m = &self.0;
        Marking([[m[1][1], -m[0][1]], [-m[1][0], m[0][0]]])
    }

    pub fn apply(&self, gamma: CurveClass) -> CurveClass {
        let m = &self.0;
        CurveClass {
            p: m[0][0] * gamma.p + m[0][1] * gamma.q,
            q: m[1][0] * gamma.p + m[1][1] * gamma.q,
        }
    }
}

/// Homotopy class of maps between marked tori, with its affine representative
/// `A(z) = a z + b conj(z)` (translation dropped).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarkedTorusMap<T> {
    marking: Marking,
    tau: UpperHalfPoint<T>,
    tau_prime: UpperHalfPoint<T>,
    a: Complex<T>,
    b: Complex<T>,
}

/// Builds the marked map for `B` and solves for the affine representative
/// with `A(1) = B11 + B21 tau'` and `A(tau) = B12 + B22 tau'`.
pub fn parse_marked_map<T: Real>(
    marking: Marking,
    tau: UpperHalfPoint<T>,
    tau_prime: UpperHalfPoint<T>,
) -> Result<MarkedTorusMap<T>> {
    let det = marking.det();
    if det != 1 {
        return Err(Error::NotOrientationPreserving { det });
    }
    let m = &marking.0;
    let u = tau_prime.lattice_point(m[0][0], m[1][0]);
    let v = tau_prime.lattice_point(m[0][1], m[1][1]);
    let (a, b) = affine_from_images(tau, u, v);
    MarkedTorusMap::checked(marking, tau, tau_prime, a, b)
}

/// The real-linear map with `1 -> u`, `tau -> v`, as `(a, b)`.
fn affine_from_images<T: Real>(
    tau: UpperHalfPoint<T>,
    u: Complex<T>,
    v: Complex<T>,
) -> (Complex<T>, Complex<T>) {
    // a + b = u, a tau + b conj(tau) = v
    let t = tau.as_complex();
    let two_i_tau2 = Complex::new(T::zero(), tau.tau2() + tau.tau2());
    let a = (v - u * t.conj()) / two_i_tau2;
    (a, u - a)
}

impl<T: Real> MarkedTorusMap<T> {
    fn checked(
        marking: Marking,
        tau: UpperHalfPoint<T>,
        tau_prime: UpperHalfPoint<T>,
        a: Complex<T>,
        b: Complex<T>,
    ) -> Result<Self> {
        let (na, nb) = (a.norm(), b.norm());
        if !(na > nb) || !na.is_finite() {
            return Err(Error::DegenerateAffine {
                a_abs: na.as_f64(),
                b_abs: nb.as_f64(),
            });
        }
        Ok(Self {
            marking,
            tau,
            tau_prime,
            a,
            b,
        })
    }

    /// Builds a map from an explicit affine part, recovering its marking by
    /// locating `A(1)` and `A(tau)` on the target lattice.
    pub fn from_affine(
        a: Complex<T>,
        b: Complex<T>,
        tau: UpperHalfPoint<T>,
        tau_prime: UpperHalfPoint<T>,
    ) -> Result<Self> {
        let image_one = a + b;
        let t = tau.as_complex();
        let image_tau = a * t + b * t.conj();
        let (m11, m21) = lattice_coords(tau_prime, image_one)?;
        let (m12, m22) = lattice_coords(tau_prime, image_tau)?;
        let marking = Marking([[m11, m12], [m21, m22]]);
        let det = marking.det();
        if det != 1 {
            return Err(Error::NotOrientationPreserving { det });
        }
        Self::checked(marking, tau, tau_prime, a, b)
    }

    pub fn marking(&self) -> Marking {
        self.marking
    }

    pub fn tau(&self) -> UpperHalfPoint<T> {
        self.tau
    }

    pub fn tau_prime(&self) -> UpperHalfPoint<T> {
        self.tau_prime
    }

    pub fn a(&self) -> Complex<T> {
        self.a
    }

    pub fn b(&self) -> Complex<T> {
        self.b
    }

    pub fn apply(&self, z: Complex<T>) -> Complex<T> {
        self.a * z + self.b * z.conj()
    }

    /// Beltrami coefficient `b / a`.
    pub fn beltrami(&self) -> Complex<T> {
        self.b / self.a
    }

    /// Quasiconformal dilatation `(|a| + |b|) / (|a| - |b|)`.
    pub fn dilatation(&self) -> T {
        let (na, nb) = (self.a.norm(), self.b.norm());
        (na + nb) / (na - nb)
    }

    /// Jacobian `|a|^2 - |b|^2`.
    pub fn jacobian(&self) -> T {
        self.a.norm_sqr() - self.b.norm_sqr()
    }

    /// The inverse class, from `tau'` back to `tau`.
    pub fn inverse(&self) -> Result<Self> {
        parse_marked_map(self.marking.inverse(), self.tau_prime, self.tau)
    }

    /// `self ∘ first`; `first` must end where `self` starts.
    pub fn compose(&self, first: &Self) -> Result<Self> {
        if !first.tau_prime.approx_eq(&self.tau, tolerance(1e-12)) {
            return Err(Error::WrongSurface {
                op: "compose",
                found: first.tau_prime.pair(),
                expected: self.tau.pair(),
            });
        }
        parse_marked_map(self.marking.mul(&first.marking), first.tau, self.tau_prime)
    }
}

/// Integer coordinates `(m, n)` with `w = m + n tau`, rejecting points off the lattice.
fn lattice_coords<T: Real>(tau: UpperHalfPoint<T>, w: Complex<T>) -> Result<(i64, i64)> {
    let n = w.im / tau.tau2();
    let m = w.re - n * tau.tau1();
    let (mr, nr) = (m.round(), n.round());
    let off = (m - mr).abs().max((n - nr).abs());
    let bound = T::lit(1e-6);
    if !(off <= bound) {
        return Err(Error::Tolerance {
            op: "from_affine",
            invariant: "image of a lattice generator lies on the target lattice",
            measured: off.as_f64(),
            bound: bound.as_f64(),
        });
    }
    Ok((
        mr.to_i64().expect("lattice coordinate fits i64"),
        nr.to_i64().expect("lattice coordinate fits i64"),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn tau(t1: f64, t2: f64) -> UpperHalfPoint<f64> {
        UpperHalfPoint::new(t1, t2).unwrap()
    }

    #[test]
    fn rejects_lower_half_plane() {
        assert!(UpperHalfPoint::new(0.0, 0.0).is_err());
        assert!(UpperHalfPoint::new(0.3, -1.0).is_err());
        assert!(UpperHalfPoint::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn identity_marking_is_identity() {
        let f = parse_marked_map(Marking::IDENTITY, tau(0.0, 1.0), tau(0.0, 1.0)).unwrap();
        assert!((f.a() - c(1.0, 0.0)).norm() < 1e-15);
        assert!(f.b().norm() < 1e-15);
        assert!((f.dilatation() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn vertical_stretch_by_two() {
        let f = parse_marked_map(Marking::IDENTITY, tau(0.0, 1.0), tau(0.0, 2.0)).unwrap();
        assert!((f.apply(c(1.0, 0.0)) - c(1.0, 0.0)).norm() < 1e-15);
        assert!((f.apply(c(0.0, 1.0)) - c(0.0, 2.0)).norm() < 1e-15);
        assert!((f.a() - c(1.5, 0.0)).norm() < 1e-15);
        assert!((f.b() - c(-0.5, 0.0)).norm() < 1e-15);
        assert!((f.dilatation() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn dehn_twist_dilatation_is_golden_square() {
        let f = parse_marked_map(Marking([[1, 1], [0, 1]]), tau(0.0, 1.0), tau(0.0, 1.0)).unwrap();
        assert!((f.a() - c(1.0, -0.5)).norm() < 1e-15);
        assert!((f.b() - c(0.0, 0.5)).norm() < 1e-15);
        let expected = (3.0 + 5f64.sqrt()) / 2.0;
        assert!((f.dilatation() - expected).abs() < 1e-12);
    }

    #[test]
    fn rejects_orientation_reversing_marking() {
        let err = parse_marked_map(Marking([[1, 0], [0, -1]]), tau(0.0, 1.0), tau(0.0, 1.0))
            .unwrap_err();
        assert_eq!(err, Error::NotOrientationPreserving { det: -1 });
        assert!(err.to_string().contains("not an orientation-preserving marking"));
        let err = parse_marked_map(Marking([[2, 0], [0, 1]]), tau(0.0, 1.0), tau(0.0, 1.0))
            .unwrap_err();
        assert_eq!(err, Error::NotOrientationPreserving { det: 2 });
    }

    #[test]
    fn lattice_images_land_exactly() {
        let (t, tp) = (tau(0.3, 1.7), tau(-1.2, 0.4));
        let m = Marking([[2, 3], [1, 2]]);
        let f = parse_marked_map(m, t, tp).unwrap();
        let u = tp.lattice_point(2, 1);
        let v = tp.lattice_point(3, 2);
        assert!((f.apply(c(1.0, 0.0)) - u).norm() < 1e-12);
        assert!((f.apply(t.as_complex()) - v).norm() < 1e-12);
    }

    #[test]
    fn from_affine_recovers_marking() {
        let m = Marking([[1, -2], [1, -1]]);
        let f = parse_marked_map(m, tau(0.5, 0.8), tau(0.1, 2.5)).unwrap();
        let g = MarkedTorusMap::from_affine(f.a(), f.b(), f.tau(), f.tau_prime()).unwrap();
        assert_eq!(g.marking(), m);
    }

    #[test]
    fn foliation_branches() {
        let t = tau(0.0, 1.0);
        let x = |re, im| foliation_of_diff(&TorusQuadDiff::new(c(re, im), t).unwrap()).x();
        assert_eq!(x(1.0, 0.0), c(1.0, 0.0));
        assert_eq!(x(-1.0, 0.0), c(0.0, 1.0));
        assert_eq!(x(-1.0, -0.0), c(0.0, 1.0));
        assert_eq!(x(0.0, 2.0), c(1.0, 1.0));
    }

    #[test]
    fn foliation_squares_back() {
        let t = tau(0.2, 0.9);
        for &(re, im) in &[(0.3, -2.0), (-4.0, 1e-3), (1e3, 7.0), (-1.0, -1.0)] {
            let phi = TorusQuadDiff::new(c(re, im), t).unwrap();
            let fol = foliation_of_diff(&phi);
            let back = fol.differential().coefficient();
            assert!((back - phi.coefficient()).norm() <= 1e-12 * phi.coefficient().norm());
            assert!(fol.x().im > 0.0 || (fol.x().im == 0.0 && fol.x().re > 0.0));
        }
    }

    #[test]
    fn marking_inverse_and_product() {
        let m = Marking([[2, 3], [1, 2]]);
        assert_eq!(m.mul(&m.inverse()), Marking::IDENTITY);
        assert_eq!(m.apply(CurveClass::new(1, 0).unwrap()), CurveClass { p: 2, q: 1 });
        assert!(CurveClass::new(0, 0).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let t = UpperHalfPoint::<f32>::new(0.0, 1.0).unwrap();
        let tp = UpperHalfPoint::<f32>::new(0.0, 2.0).unwrap();
        let f = parse_marked_map(Marking::IDENTITY, t, tp).unwrap();
        assert!((f.dilatation() - 2.0).abs() < 1e-5);
    }
}
