//! The acceptance suite: eight criteria checked against closed-form or
//! brute-force oracles. Shared by the `acceptance` test target and the CLI
//! `selftest` command.

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use rand::Rng;

use crate::cylinder::{
    chain_norm, chain_pushforward, cone_extremal, truncate_and_double, Attainment, ChainMap, ConeDifferential,
    Cylinder, CylinderChain, Expr, Monotone, TailBound,
};
use crate::dirichlet::{dirichlet_gap, grid_energy, pushforward_energy, realizing_norm, relax, GridOneForm};
use crate::error::Result;
use crate::flat::{parse_marked_map, CurveClass, MarkedTorusMap, Marking, TorusQuadDiff, UpperHalfPoint};
use crate::random;
use crate::torus::{
    check_conjugate_relation, construct_teichmuller_map, curve_height, extremal_ratio, heights_map,
    quasi_invariance_check, ratio, stretch_beltrami, verify_homotopic,
};
use crate::variational::{
    a_of_t, h_prime, richardson_gap, BeltramiPath, ChainPath, Gauge, TorusPath,
};

pub const DEFAULT_SEED: u64 = 20240917;

#[derive(Clone, Debug, PartialEq)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{status}] {}. {}: {}", self.id, self.name, self.detail)
    }
}

pub const NAMES: [&str; 8] = [
    "torus criterion vs dilatation oracle",
    "conjugate relation",
    "stretch-map reconstruction",
    "quasi-invariance",
    "heights preservation and bijectivity",
    "Dirichlet principle",
    "cylinder dichotomy",
    "variational path",
];

pub fn run_all(seed: u64) -> Vec<CriterionResult> {
    (1..=8).map(|id| run(id, seed)).collect()
}

/// Runs criterion `id` (1 to 8).
pub fn run(id: u8, seed: u64) -> CriterionResult {
    let outcome = match id {
        1 => torus_oracle(seed),
        2 => conjugate(seed),
        3 => reconstruction(seed),
        4 => quasi_invariance(seed),
        5 => heights(seed),
        6 => dirichlet(seed),
        7 => cylinders(seed),
        8 => variational(),
        _ => panic!("no acceptance criterion {id}"),
    };
    let (passed, detail) = match outcome {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    CriterionResult {
        id,
        name: NAMES[id as usize - 1],
        passed,
        detail,
    }
}

type Outcome = Result<(bool, String)>;

const TORUS_CASES: usize = 200;

fn torus_cases(seed: u64) -> Vec<MarkedTorusMap<f64>> {
    let mut rng = random::rng(seed);
    (0..TORUS_CASES).map(|_| random::marked_map(&mut rng)).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn tau(t1: f64, t2: f64) -> UpperHalfPoint<f64> {
    UpperHalfPoint::new(t1, t2).expect("valid tau")
}

fn torus_oracle(seed: u64) -> Outcome {
    let (mut worst_k, mut worst_routes, mut failures) = (0.0f64, 0.0f64, 0);
    for f in torus_cases(seed) {
        let report = match extremal_ratio(&f) {
            Ok(r) => r,
            Err(_) => {
                failures += 1;
                continue;
            }
        };
        // classical dilatation of the affine representative
        let (na, nb) = (f.a().norm(), f.b().norm());
        let k = (na + nb) / (na - nb);
        let ek = (report.l - k).abs() / k;
        let er = rel(report.l_grid, report.l_svd);
        worst_k = worst_k.max(ek);
        worst_routes = worst_routes.max(er);
        if ek > 1e-8 || er > 1e-8 {
            failures += 1;
        }
    }
    Ok((
        failures == 0,
        format!(
            "{TORUS_CASES} cases, {failures} failures, max |L-K|/K = {worst_k:.2e}, max grid/SVD gap = {worst_routes:.2e}"
        ),
    ))
}

fn conjugate(seed: u64) -> Outcome {
    let (mut worst_res, mut worst_c, mut failures) = (0.0f64, 0.0f64, 0);
    for f in torus_cases(seed) {
        let report = extremal_ratio(&f)?;
        let rel_c = check_conjugate_relation(&f, &report.phi_star(f.tau()), report.l)?;
        worst_res = worst_res.max(rel_c.residual);
        worst_c = worst_c.max(rel_c.c_error());
        if rel_c.residual > 1e-9 || rel_c.c_error() > 1e-9 {
            failures += 1;
        }
    }
    let f = parse_marked_map(Marking::IDENTITY, UpperHalfPoint::i(), tau(0.0, 2.0))?;
    let report = extremal_ratio(&f)?;
    let worked = check_conjugate_relation(&f, &report.phi_star(f.tau()), report.l)?;
    let worked_ok = (report.l - 2.0).abs() <= 1e-12 && (worked.c - 0.25).abs() <= 1e-12;
    Ok((
        failures == 0 && worked_ok,
        format!(
            "{TORUS_CASES} cases, {failures} failures, max residual = {worst_res:.2e}, max c error = {worst_c:.2e}; \
             tau=i->2i: L = {}, c = {}",
            report.l, worked.c
        ),
    ))
}

fn reconstruction(seed: u64) -> Outcome {
    let (mut worst_a, mut worst_mu, mut failures) = (0.0f64, 0.0f64, 0);
    for f in torus_cases(seed) {
        let report = extremal_ratio(&f)?;
        let phi = report.phi_star(f.tau());
        let g = match construct_teichmuller_map(&f, &phi, report.l) {
            Ok(g) => g,
            Err(_) => {
                failures += 1;
                continue;
            }
        };
        let along = if ratio(&f, &phi)? >= 1.0 { phi } else { -phi };
        let scale = f.a().norm().max(1.0);
        let ea = (g.a() - f.a()).norm().max((g.b() - f.b()).norm()) / scale;
        let emu = (g.beltrami() - stretch_beltrami(&along, report.l)).norm();
        worst_a = worst_a.max(ea);
        worst_mu = worst_mu.max(emu);
        if ea > 1e-9 || emu > 1e-9 || !verify_homotopic(&g, &f) {
            failures += 1;
        }
    }
    Ok((
        failures == 0,
        format!(
            "{TORUS_CASES} cases, {failures} failures, max affine mismatch = {worst_a:.2e}, max Beltrami mismatch = {worst_mu:.2e}"
        ),
    ))
}

fn quasi_invariance(seed: u64) -> Outcome {
    const CASES: usize = 10_000;
    let mut rng = random::rng(seed ^ 0x4);
    let mut violations = 0;
    for _ in 0..CASES {
        let f: MarkedTorusMap<f64> = random::marked_map(&mut rng);
        let phi = random::quad_diff(&mut rng, f.tau());
        if !quasi_invariance_check(&f, &phi)? {
            violations += 1;
        }
    }
    Ok((violations == 0, format!("{CASES} cases, {violations} violations")))
}

fn coefficient_gap(a: &TorusQuadDiff<f64>, b: &TorusQuadDiff<f64>) -> f64 {
    (a.coefficient() - b.coefficient()).norm() / a.coefficient().norm()
}

fn heights(seed: u64) -> Outcome {
    let mut rng = random::rng(seed ^ 0x5);
    let (mut worst_h, mut worst_inv, mut worst_comp) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..20 {
        let f: MarkedTorusMap<f64> = random::marked_map(&mut rng);
        let phi = random::quad_diff(&mut rng, f.tau());
        let psi = heights_map(&f, &phi)?;
        for p in -20..=20 {
            for q in -20..=20 {
                if p == 0 && q == 0 {
                    continue;
                }
                let gamma = CurveClass::new(p, q)?;
                let h = curve_height(&phi, gamma);
                let h_img = curve_height(&psi, f.marking().apply(gamma));
                worst_h = worst_h.max((h - h_img).abs() / h.max(1.0));
            }
        }
        let back = heights_map(&f.inverse()?, &psi)?;
        worst_inv = worst_inv.max(coefficient_gap(&phi, &back));
    }
    for _ in 0..100 {
        let f: MarkedTorusMap<f64> = random::marked_map(&mut rng);
        let g = random::marked_map_from(&mut rng, f.tau_prime());
        let phi = random::quad_diff(&mut rng, f.tau());
        let direct = heights_map(&g.compose(&f)?, &phi)?;
        let stepwise = heights_map(&g, &heights_map(&f, &phi)?)?;
        worst_comp = worst_comp.max(coefficient_gap(&direct, &stepwise));
    }
    let ok = worst_h <= 1e-10 && worst_inv <= 1e-10 && worst_comp <= 1e-10;
    Ok((
        ok,
        format!(
            "max height error = {worst_h:.2e} (|p|,|q| <= 20), inverse round trip = {worst_inv:.2e}, \
             functoriality (100 compositions) = {worst_comp:.2e}"
        ),
    ))
}

fn dirichlet(seed: u64) -> Outcome {
    let mut rng = random::rng(seed ^ 0x6);
    let (mut worst_min, mut worst_const) = (0.0f64, 0.0f64);
    for n in (4..=64).step_by(4) {
        let t: UpperHalfPoint<f64> = random::tau(&mut rng);
        let periods = (rng.gen_range(-2.0..=2.0), rng.gen_range(-2.0..=2.0));
        let start = GridOneForm::with_potential(periods, t, n, random::uniform_vec(&mut rng, n * n, 0.2))?;
        let m = relax(&start)?;
        let exact = realizing_norm(periods, t);
        worst_min = worst_min.max((m.energy - exact).abs() / exact.max(1.0));
        let (p, q) = m.form.cells();
        let dev = p
            .iter()
            .map(|v| (v - periods.0).abs())
            .chain(q.iter().map(|v| (v - periods.1).abs()))
            .fold(0.0, f64::max);
        worst_const = worst_const.max(dev);
    }

    let mut nonpositive = 0;
    let mut worst_hodge = 0.0f64;
    for _ in 0..1000 {
        let n = rng.gen_range(4..=12);
        let t: UpperHalfPoint<f64> = random::tau(&mut rng);
        let periods = (rng.gen_range(-2.0..=2.0), rng.gen_range(-2.0..=2.0));
        let amp = 10f64.powf(rng.gen_range(-3.0..=0.0));
        let form = GridOneForm::with_potential(periods, t, n, random::uniform_vec(&mut rng, n * n, amp))?;
        let gap = dirichlet_gap(&form);
        if !(gap > 0.0) {
            nonpositive += 1;
        }
        let exact = grid_energy(&form.exact_part());
        worst_hodge = worst_hodge.max((gap - exact).abs() / grid_energy(&form).max(1.0));
    }

    let mut bound_failures = 0;
    for _ in 0..1000 {
        let f: MarkedTorusMap<f64> = random::marked_map(&mut rng);
        let n = rng.gen_range(2..=8);
        let periods = (rng.gen_range(-2.0..=2.0), rng.gen_range(-2.0..=2.0));
        let form = GridOneForm::with_potential(periods, f.tau(), n, random::uniform_vec(&mut rng, n * n, 0.5))?;
        if !pushforward_energy(&form, &f)?.holds() {
            bound_failures += 1;
        }
    }
    let ok = worst_min <= 1e-9 && worst_const <= 1e-9 && nonpositive == 0 && bound_failures == 0;
    Ok((
        ok,
        format!(
            "N = 4..64: max |E_min - ||psi|||/||psi|| = {worst_min:.2e}, max cell deviation = {worst_const:.2e}; \
             1000 perturbed forms: {nonpositive} nonpositive gaps, Hodge defect {worst_hodge:.2e}; \
             1000 pushforwards: {bound_failures} bound failures"
        ),
    ))
}

type Q = BigRational;

fn q(num: i64, den: i64) -> Q {
    Q::new(BigInt::from(num), BigInt::from(den))
}

/// Exhaustive oracle: the largest of `ratio` and `1/ratio` over every
/// nonempty 0/1 weight vector.
fn brute_force(chain: &CylinderChain<Q>, map: &ChainMap<Q>) -> Result<Q> {
    let cyls = chain.cylinders().expect("finite chain");
    let len = cyls.len();
    let mut best = Q::from_integer(BigInt::from(1));
    for mask in 1u32..(1 << len) {
        let (mut num, mut den) = (Q::from_integer(BigInt::from(0)), Q::from_integer(BigInt::from(0)));
        for (k, c) in cyls.iter().enumerate() {
            if mask & (1 << k) != 0 {
                let area = c.a.clone() * c.b.clone();
                num += map.lambda(k as u64)? * area.clone();
                den += area;
            }
        }
        let r = num / den;
        let inv = Q::from_integer(BigInt::from(1)) / r.clone();
        for v in [r, inv] {
            if v > best {
                best = v;
            }
        }
    }
    Ok(best)
}

fn cylinders(seed: u64) -> Outcome {
    let mut rng = random::rng(seed ^ 0x7);
    let mut mismatches = 0;
    let mut doubling_failures = 0;
    let mut ratio_failures = 0;
    let runs = 300;
    for _ in 0..runs {
        let len = rng.gen_range(1..=6);
        let mut cyls = Vec::with_capacity(len);
        let mut lambdas = Vec::with_capacity(len);
        for _ in 0..len {
            cyls.push(Cylinder::new(q(rng.gen_range(1..=9), rng.gen_range(1..=5)), q(rng.gen_range(1..=9), rng.gen_range(1..=5)))?);
            lambdas.push(q(rng.gen_range(1..=12), rng.gen_range(1..=6)));
        }
        let chain = CylinderChain::finite(cyls)?;
        let map = ChainMap::finite(lambdas)?;
        let extremal = cone_extremal(&chain, &map, len as u64)?;
        if extremal.l != brute_force(&chain, &map)? || extremal.attained != Attainment::Attained {
            mismatches += 1;
        }
        let weights = ConeDifferential::finite((0..len).map(|_| q(rng.gen_range(0..=4), rng.gen_range(1..=3))).collect())
            .unwrap_or_else(|_| ConeDifferential::ones());
        let norm = chain_norm(&chain, &weights)?;
        let image = chain_pushforward(&chain, &map, &weights)?.image_norm;
        let r = image / norm.clone();
        if r > map.sup().value.clone().expect("finite sup") || r < map.inf().value.clone().expect("finite inf") {
            ratio_failures += 1;
        }
        for count in 0..=len {
            let t = truncate_and_double(&chain, &weights, count)?;
            if t.doubled_norm != q(2, 1) * t.trunc_norm.clone() || (count == len && t.trunc_norm != norm) {
                doubling_failures += 1;
            }
        }
    }

    let creeping = CylinderChain::generated(Expr::parse("1")?, Expr::parse("2^-n")?, 0, Some(q(2, 1)))?;
    let map = ChainMap::generated(
        Expr::parse("2-1/(n+1)")?,
        TailBound::new(q(2, 1), Attainment::NotAttained),
        TailBound::unknown(),
        Some(Monotone::Increasing),
    )?;
    let e = cone_extremal(&creeping, &map, 100)?;
    let gaps_exact = e.gaps.len() == 101 && e.gaps.iter().all(|(n, g)| *g == q(1, *n as i64 + 1));
    let dichotomy = e.attained == Attainment::NotAttained && e.l == q(2, 1) && gaps_exact;
    let ones = ConeDifferential::ones();
    for count in [0usize, 1, 5, 50] {
        let t = truncate_and_double(&creeping, &ones, count)?;
        if t.doubled_norm != q(2, 1) * t.trunc_norm {
            doubling_failures += 1;
        }
    }

    let ok = mismatches == 0 && ratio_failures == 0 && doubling_failures == 0 && dichotomy;
    Ok((
        ok,
        format!(
            "{runs} finite chains: {mismatches} brute-force mismatches, {ratio_failures} ratio-bound failures; \
             lambda_n = 2-1/(n+1): attained = {}, gaps exact = {gaps_exact}; doubling failures = {doubling_failures}",
            e.attained.as_str()
        ),
    ))
}

fn variational() -> Outcome {
    let mus = [Complex::new(0.1, 0.0), Complex::new(0.0, 0.3), Complex::new(0.2, 0.2)];
    let scenarios = [
        (tau(0.0, 1.0), Complex::new(1.0, 0.0)),
        (tau(0.3, 1.2), Complex::from_polar(1.5, 0.7)),
    ];
    let step = 1e-3;
    let (mut worst_rich, mut worst_default) = (0.0f64, 0.0f64);
    let mut worst_gauge = [0.0f64; 3];
    for (t0, c) in scenarios {
        let qd = TorusQuadDiff::new(c, t0)?;
        for mu in mus {
            for k in 1..=9 {
                let path = BeltramiPath::new(mu, k as f64 / 10.0, t0)?;
                worst_rich = worst_rich.max(richardson_gap(&path, &qd, step)?);
                for (g, gauge) in Gauge::ALL.iter().enumerate() {
                    let d = h_prime(&path, &qd, step, *gauge)?;
                    worst_gauge[g] = worst_gauge[g].max(d.discrepancy);
                    if *gauge == Gauge::default() {
                        worst_default = worst_default.max(d.discrepancy);
                    }
                }
            }
        }
    }

    let grid: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    let mut a_failures = Vec::new();
    let geometric = CylinderChain::generated(Expr::parse("1")?, Expr::parse("2^-n")?, 1, Some(1.0))?;
    let creeping = ChainMap::generated(
        Expr::parse("2-1/(n+1)")?,
        TailBound::new(2.0, Attainment::NotAttained),
        TailBound::unknown(),
        Some(Monotone::Increasing),
    )?;
    let shrinking = ChainMap::generated(
        Expr::parse("1/2+1/(n+2)")?,
        TailBound::new(5.0 / 6.0, Attainment::Attained),
        TailBound::new(0.5, Attainment::NotAttained),
        Some(Monotone::Decreasing),
    )?;
    let doubling = ChainMap::constant(2.0)?;
    let finite = CylinderChain::finite(vec![Cylinder::new(1.0, 1.0)?, Cylinder::new(2.0, 0.5)?, Cylinder::new(0.5, 3.0)?])?;
    let finite_map = ChainMap::finite(vec![1.5, 0.8, 2.5])?;
    let ones = ConeDifferential::ones();
    let cases: [(&str, &CylinderChain<f64>, &ChainMap<f64>, u64); 6] = [
        ("creeping N=5", &geometric, &creeping, 5),
        ("creeping N=20", &geometric, &creeping, 20),
        ("shrinking N=3", &geometric, &shrinking, 3),
        ("constant 2 N=4", &geometric, &doubling, 4),
        ("finite N=0", &finite, &finite_map, 0),
        ("finite N=2", &finite, &finite_map, 2),
    ];
    let torus = TorusPath {
        mu: mus[2],
        tau: scenarios[1].0,
        q: TorusQuadDiff::new(scenarios[1].1, scenarios[1].0)?,
        step,
        gauge: Gauge::default(),
    };
    for (name, chain, map, n_max) in cases {
        let cp = ChainPath { chain, map, weights: &ones, n_max };
        let report = a_of_t(&torus, &cp, &grid)?;
        if !report.checks.a_properties_hold() {
            a_failures.push(name);
        }
    }

    let gauge_summary = Gauge::ALL
        .iter()
        .zip(worst_gauge)
        .map(|(g, w)| format!("{} {w:.1e}", g.as_str()))
        .collect::<Vec<_>>()
        .join(", ");
    let all_gauges_fail = worst_gauge.iter().all(|w| *w > 1e-5);
    let ok = worst_rich <= 1e-6 && worst_default <= 1e-5 && a_failures.is_empty();
    Ok((
        ok,
        format!(
            "max Richardson gap = {worst_rich:.2e}; max |analytic - numeric| by gauge: {gauge_summary}{}; \
             A(t) scenarios failing: {}",
            if all_gauges_fail { " (all gauges fail)" } else { "" },
            if a_failures.is_empty() { "none".to_string() } else { a_failures.join(", ") }
        ),
    ))
}
