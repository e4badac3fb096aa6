//! Seeded samplers for property sweeps.
//!
//! All sampling goes through [`ChaCha8Rng`], so a seed fixes every draw on
//! every platform.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::flat::{parse_marked_map, MarkedTorusMap, Marking, TorusQuadDiff, UpperHalfPoint};
use crate::scalar::Real;

pub use rand_chacha::ChaCha8Rng as SweepRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `tau2` in `[0.2, 5]`, `tau1` in `[-2, 2]`.
pub fn tau<T: Real>(rng: &mut impl Rng) -> UpperHalfPoint<T> {
    let t1 = rng.gen_range(-2.0..=2.0);
    let t2 = rng.gen_range(0.2..=5.0);
    UpperHalfPoint::new(T::lit(t1), T::lit(t2)).expect("tau2 > 0")
}

/// Uniform over `SL(2, Z)` matrices with entries in `[-max_entry, max_entry]`.
pub fn sl2z(rng: &mut impl Rng, max_entry: i64) -> Marking {
    loop {
        let mut e = [0i64; 4];
        for v in &mut e {
            *v = rng.gen_range(-max_entry..=max_entry);
        }
        if e[0] * e[3] - e[1] * e[2] == 1 {
            return Marking([[e[0], e[1]], [e[2], e[3]]]);
        }
    }
}

/// Random `(tau, tau', B)` with `B` entries bounded by 5.
pub fn marked_map<T: Real>(rng: &mut impl Rng) -> MarkedTorusMap<T> {
    let source = tau(rng);
    marked_map_from(rng, source)
}

/// Random marked map out of `source`.
pub fn marked_map_from<T: Real>(rng: &mut impl Rng, source: UpperHalfPoint<T>) -> MarkedTorusMap<T> {
    loop {
        let target = tau(rng);
        if let Ok(f) = parse_marked_map(sl2z(rng, 5), source, target) {
            return f;
        }
    }
}

/// `c = r e^{i theta}` with `log10 r` uniform in `[-1, 1]`.
pub fn quad_diff<T: Real>(rng: &mut impl Rng, tau: UpperHalfPoint<T>) -> TorusQuadDiff<T> {
    let r = 10f64.powf(rng.gen_range(-1.0..=1.0));
    let theta = rng.gen_range(0.0..std::f64::consts::TAU);
    let c = Complex::from_polar(T::lit(r), T::lit(theta));
    TorusQuadDiff::new(c, tau).expect("nonzero coefficient")
}

/// Complex number uniform in the disk of radius `radius`.
pub fn in_disk<T: Real>(rng: &mut impl Rng, radius: f64) -> Complex<T> {
    let r = radius * rng.gen_range(0.0f64..1.0).sqrt();
    let theta = rng.gen_range(0.0..std::f64::consts::TAU);
    Complex::from_polar(T::lit(r), T::lit(theta))
}

/// `len` values uniform in `[-amp, amp]`.
pub fn uniform_vec<T: Real>(rng: &mut impl Rng, len: usize, amp: f64) -> Vec<T> {
    (0..len).map(|_| T::lit(rng.gen_range(-amp..=amp))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_reproducible() {
        let a: Vec<MarkedTorusMap<f64>> = {
            let mut r = rng(7);
            (0..5).map(|_| marked_map(&mut r)).collect()
        };
        let b: Vec<MarkedTorusMap<f64>> = {
            let mut r = rng(7);
            (0..5).map(|_| marked_map(&mut r)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn samples_respect_ranges() {
        let mut r = rng(1);
        for _ in 0..200 {
            let m = sl2z(&mut r, 5);
            assert_eq!(m.det(), 1);
            assert!(m.0.iter().flatten().all(|v| v.abs() <= 5));
            let t: UpperHalfPoint<f64> = tau(&mut r);
            assert!((0.2..=5.0).contains(&t.tau2()) && t.tau1().abs() <= 2.0);
            assert!(in_disk::<f64>(&mut r, 0.5).norm() < 0.5);
        }
    }
}
