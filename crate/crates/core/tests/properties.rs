use flatheights::cylinder::{chain_norm, chain_pushforward, cone_extremal, ChainMap, ConeDifferential, Cylinder, CylinderChain};
use flatheights::dirichlet::{dirichlet_gap, grid_energy, harmonic_minimize, GridOneForm};
use flatheights::torus::{extremal_ratio, heights_map, qd_norm, ratio, TransferMap};
use flatheights::{parse_marked_map, BigRational, Complex, CurveClass, MarkedTorusMap, Marking, TorusQuadDiff, UpperHalfPoint};
use nalgebra::Matrix2;
use num_bigint::BigInt;
use proptest::prelude::*;

fn tau_strategy() -> impl Strategy<Value = UpperHalfPoint<f64>> {
    (-2.0..2.0f64, 0.2..5.0f64).prop_map(|(a, b)| UpperHalfPoint::new(a, b).unwrap())
}

fn sl2z_strategy() -> impl Strategy<Value = Marking> {
    prop::array::uniform4(-5i64..=5)
        .prop_filter("det = 1", |e| e[0] * e[3] - e[1] * e[2] == 1)
        .prop_map(|e| Marking([[e[0], e[1]], [e[2], e[3]]]))
}

fn map_strategy() -> impl Strategy<Value = MarkedTorusMap<f64>> {
    (sl2z_strategy(), tau_strategy(), tau_strategy()).prop_map(|(b, t, tp)| parse_marked_map(b, t, tp).unwrap())
}

fn coeff_strategy() -> impl Strategy<Value = Complex<f64>> {
    (-1.0..1.0f64, 0.0..std::f64::consts::TAU).prop_map(|(lr, th)| Complex::from_polar(10f64.powf(lr), th))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn heights_are_preserved(f in map_strategy(), c in coeff_strategy(), p in -12i64..=12, q in -12i64..=12) {
        prop_assume!(p != 0 || q != 0);
        let phi = TorusQuadDiff::new(c, f.tau()).unwrap();
        let psi = heights_map(&f, &phi).unwrap();
        let gamma = CurveClass::new(p, q).unwrap();
        let h = (phi.sqrt() * f.tau().lattice_point(p, q)).im.abs();
        let image = f.marking().apply(gamma);
        let h_img = (psi.sqrt() * f.tau_prime().lattice_point(image.p, image.q)).im.abs();
        prop_assert!(close(h, h_img, 1e-10), "{h} vs {h_img}");
    }

    #[test]
    fn heights_map_is_bijective(f in map_strategy(), c in coeff_strategy()) {
        let phi = TorusQuadDiff::new(c, f.tau()).unwrap();
        let back = heights_map(&f.inverse().unwrap(), &heights_map(&f, &phi).unwrap()).unwrap();
        prop_assert!((back.coefficient() - c).norm() <= 1e-10 * c.norm());
    }

    #[test]
    fn heights_map_is_functorial(f in map_strategy(), b in sl2z_strategy(), t2 in tau_strategy(), c in coeff_strategy()) {
        let g = parse_marked_map(b, f.tau_prime(), t2).unwrap();
        let phi = TorusQuadDiff::new(c, f.tau()).unwrap();
        let direct = heights_map(&g.compose(&f).unwrap(), &phi).unwrap().coefficient();
        let stepwise = heights_map(&g, &heights_map(&f, &phi).unwrap()).unwrap().coefficient();
        prop_assert!((direct - stepwise).norm() <= 1e-10 * direct.norm());
    }

    #[test]
    fn inverse_has_the_same_dilatation(f in map_strategy()) {
        let inv = f.inverse().unwrap();
        prop_assert!(close(inv.dilatation(), f.dilatation(), 1e-10));
        let l = extremal_ratio(&f).unwrap().l;
        let l_inv = extremal_ratio(&inv).unwrap().l;
        prop_assert!(close(l, l_inv, 1e-9));
    }

    #[test]
    fn ratio_is_bounded_by_dilatation(f in map_strategy(), c in coeff_strategy()) {
        let phi = TorusQuadDiff::new(c, f.tau()).unwrap();
        let r = ratio(&f, &phi).unwrap();
        let k = f.dilatation();
        prop_assert!(r <= k * (1.0 + 1e-12) && 1.0 / r <= k * (1.0 + 1e-12));
        prop_assert!(close(qd_norm(&heights_map(&f, &phi).unwrap()), r * qd_norm(&phi), 1e-12));
    }

    #[test]
    fn svd_matches_nalgebra(f in map_strategy()) {
        let t = TransferMap::of(&f).unwrap();
        let ours = t.svd();
        let m = Matrix2::new(t.m[0][0], t.m[0][1], t.m[1][0], t.m[1][1]);
        let sv = m.singular_values();
        let (hi, lo) = (sv[0].max(sv[1]), sv[0].min(sv[1]));
        prop_assert!(close(ours.sigma_max, hi, 1e-10));
        prop_assert!((ours.sigma_min - lo).abs() <= 1e-10 * hi);
    }

    #[test]
    fn energy_is_quadratic(t in tau_strategy(), h1 in -2.0..2.0f64, h2 in -2.0..2.0f64, lambda in -3.0..3.0f64, seed in 0u64..1000) {
        let n = 5;
        let pot: Vec<f64> = (0..n * n).map(|k| (((k as u64 * 7919 + seed) % 97) as f64 / 97.0 - 0.5) * 0.3).collect();
        let form = GridOneForm::with_potential((h1, h2), t, n, pot).unwrap();
        let e = grid_energy(&form);
        prop_assert!(close(grid_energy(&form.scaled(lambda)), lambda * lambda * e, 1e-12));
        prop_assert!(dirichlet_gap(&form) >= 0.0);
        prop_assert!(grid_energy(&form.harmonic_part()) <= e);
    }

    #[test]
    fn minimizer_is_linear_in_periods(t in tau_strategy(), a in (-2.0..2.0f64, -2.0..2.0f64), b in (-2.0..2.0f64, -2.0..2.0f64)) {
        prop_assume!(a.0.abs() + a.1.abs() > 1e-3 && b.0.abs() + b.1.abs() > 1e-3);
        let sum = (a.0 + b.0, a.1 + b.1);
        prop_assume!(sum.0.abs() + sum.1.abs() > 1e-3);
        let ma = harmonic_minimize(a, t, 6).unwrap().form;
        let mb = harmonic_minimize(b, t, 6).unwrap().form;
        let ms = harmonic_minimize(sum, t, 6).unwrap().form;
        let (pa, qa) = ma.cells();
        let (pb, qb) = mb.cells();
        let (ps, qs) = ms.cells();
        for k in 0..36 {
            prop_assert!((pa[k] + pb[k] - ps[k]).abs() <= 1e-9);
            prop_assert!((qa[k] + qb[k] - qs[k]).abs() <= 1e-9);
        }
    }
}

fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn chain_strategy() -> impl Strategy<Value = (Vec<(i64, i64, i64, i64, i64, i64)>, Vec<(i64, i64)>)> {
    (1usize..=6).prop_flat_map(|len| {
        (
            prop::collection::vec((1i64..=9, 1i64..=4, 1i64..=9, 1i64..=4, 1i64..=12, 1i64..=6), len),
            prop::collection::vec((0i64..=5, 1i64..=3), len),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn norm_ratio_lies_between_scale_bounds((cyls, weights) in chain_strategy()) {
        prop_assume!(weights.iter().any(|w| w.0 > 0));
        let chain = CylinderChain::finite(
            cyls.iter().map(|c| Cylinder::new(rational(c.0, c.1), rational(c.2, c.3)).unwrap()).collect(),
        ).unwrap();
        let map = ChainMap::finite(cyls.iter().map(|c| rational(c.4, c.5)).collect()).unwrap();
        let w = ConeDifferential::finite(weights.iter().map(|w| rational(w.0, w.1)).collect()).unwrap();
        let r = chain_pushforward(&chain, &map, &w).unwrap().image_norm / chain_norm(&chain, &w).unwrap();
        let sup = map.sup().value.clone().unwrap();
        let inf = map.inf().value.clone().unwrap();
        prop_assert!(inf <= r && r <= sup);
        let l = cone_extremal(&chain, &map, cyls.len() as u64).unwrap().l;
        let one = rational(1, 1);
        prop_assert!(r <= l && one / r <= l);
    }
}

#[test]
fn single_precision_engines_agree_with_double() {
    let f64_map = parse_marked_map(Marking([[2, 1], [1, 1]]), UpperHalfPoint::new(0.3, 1.1).unwrap(), UpperHalfPoint::new(-0.2, 0.7).unwrap()).unwrap();
    let f32_map: MarkedTorusMap<f32> =
        parse_marked_map(Marking([[2, 1], [1, 1]]), UpperHalfPoint::new(0.3, 1.1).unwrap(), UpperHalfPoint::new(-0.2, 0.7).unwrap()).unwrap();
    let l64 = extremal_ratio(&f64_map).unwrap().l;
    let l32 = extremal_ratio(&f32_map).unwrap().l;
    assert!(((l32 as f64) - l64).abs() <= 1e-4 * l64);
    assert!(((f32_map.dilatation() as f64) - l64).abs() <= 1e-4 * l64);

    let t: UpperHalfPoint<f32> = UpperHalfPoint::new(0.5, 1.5).unwrap();
    let m = harmonic_minimize((1.0f32, -0.5), t, 12).unwrap();
    let expected = flatheights::dirichlet::realizing_norm((1.0f64, -0.5), UpperHalfPoint::new(0.5, 1.5).unwrap());
    assert!(((m.energy as f64) - expected).abs() <= 1e-5 * expected);
}
