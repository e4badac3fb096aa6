//! One runner per scenario kind. Each returns the summary and the files to write.

use flatheights::cylinder::{
    chain_norm, chain_pushforward, cone_extremal, exhaustion_diagnostics, truncate_and_double, Attainment,
};
use flatheights::dirichlet::{dirichlet_gap, realizing_norm, relax, pushforward_energy, GridOneForm};
use flatheights::io::{self, fmt_f64, write_form, write_table, ChainSpec, ExtremalSummary};
use flatheights::torus::{
    check_conjugate_relation, construct_teichmuller_map, extremal_ratio_with, stretch_beltrami, theta_sweep,
    verify_homotopic, ExtremalOptions,
};
use flatheights::variational::{a_of_t, ChainPath, Gauge, TorusPath};
use flatheights::{random, BigRational, ChainScalar, MarkedTorusMapF64, Marking};
use serde::Serialize;
use serde_json::{json, Value};

use crate::scenario::{DirichletPayload, Kind, ScenarioConfig, TorusPayload, VariationalPayload};
use crate::svg::{line_plot, Series};
use crate::CliError;

/// Relative tolerance for the torus self-checks.
const TORUS_TOL: f64 = 1e-8;
/// Bound on `|h'_analytic - h'_numeric|` along a variational path.
const DISCREPANCY_TOL: f64 = 1e-5;
/// Relative tolerance of the relaxed energy against the closed form.
const DIRICHLET_TOL: f64 = 1e-9;

#[derive(Debug)]
pub struct Report {
    pub summary: Value,
    /// `(file name, contents)` in write order.
    pub files: Vec<(String, String)>,
    /// A tolerance failure detected after the outputs were produced.
    pub failure: Option<CliError>,
}

impl Report {
    fn new(summary: Value) -> Self {
        Self {
            summary,
            files: Vec::new(),
            failure: None,
        }
    }

    fn file(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    fn fail(&mut self, msg: String) {
        if self.failure.is_none() {
            self.failure = Some(CliError::Tolerance(msg));
        }
    }
}

pub fn run(cfg: &ScenarioConfig, gauge: Option<Gauge>) -> Result<Report, CliError> {
    match cfg.kind {
        Kind::Torus => torus(cfg),
        Kind::Cylinder => cylinder(cfg),
        Kind::Exhaustion => exhaustion(cfg),
        Kind::Variational => variational(cfg, gauge),
        Kind::Dirichlet => dirichlet(cfg),
    }
}

fn table(header: &[&str], rows: &[Vec<String>]) -> Result<String, CliError> {
    let mut buf = Vec::new();
    write_table(&mut buf, header, rows)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

fn exact<S: ChainScalar>(v: &S) -> Value {
    match v.to_rational() {
        Some(r) => Value::String(r.to_string()),
        None => Value::Null,
    }
}

fn torus(cfg: &ScenarioConfig) -> Result<Report, CliError> {
    let p: TorusPayload = cfg.payload()?;
    if p.samples < 2 {
        return Err(CliError::Schema("torus payload: samples must be at least 2".into()));
    }
    let f: MarkedTorusMapF64 = p.spec().to_map()?;
    let report = extremal_ratio_with(&f, ExtremalOptions { samples: p.samples })?;
    let phi = report.phi_star(f.tau());
    let relation = check_conjugate_relation(&f, &phi, report.l)?;
    let g = construct_teichmuller_map(&f, &phi, report.l)?;
    let k = f.dilatation();

    let stretch_diff = if report.branch.as_str() == "forward" { phi } else { -phi };
    let summary = TorusSummary {
        extremal: ExtremalSummary::new(&report, &relation),
        dilatation: k,
        l_grid: report.l_grid,
        l_svd: report.l_svd,
        attained: report.attained,
        phi_star: io::complex_pair(phi.coefficient()),
        beltrami: io::complex_pair(g.beltrami()),
        expected_beltrami: io::complex_pair(stretch_beltrami(&stretch_diff, report.l)),
        homotopic: verify_homotopic(&g, &f),
        map: p.spec(),
    };
    let mut out = Report::new(serde_json::to_value(&summary).expect("serializable summary"));

    let rel_l = (report.l - k).abs() / k;
    if rel_l > TORUS_TOL {
        out.fail(format!("torus: extremal ratio equals dilatation violated: relative error {rel_l:e}"));
    }
    if relation.residual > TORUS_TOL || relation.c_error() > TORUS_TOL {
        out.fail(format!(
            "torus: conjugate relation violated: residual {:e}, c error {:e}",
            relation.residual,
            relation.c_error()
        ));
    }

    let sweep = theta_sweep(&f, p.samples)?;
    let rows: Vec<Vec<String>> = sweep
        .iter()
        .map(|r| vec![fmt_f64(r.theta), fmt_f64(r.ratio), fmt_f64(r.inv_ratio)])
        .collect();
    out.file("theta_sweep.csv", table(&["theta", "ratio", "inv_ratio"], &rows)?);
    if cfg.plot {
        let svg = line_plot(
            "height ratio on the unit circle",
            "theta",
            "ratio",
            &[
                Series { label: "ratio", points: sweep.iter().map(|r| (r.theta, r.ratio)).collect() },
                Series { label: "1/ratio", points: sweep.iter().map(|r| (r.theta, r.inv_ratio)).collect() },
            ],
        );
        out.file("theta_sweep.svg", svg);
    }
    Ok(out)
}

#[derive(Serialize)]
struct TorusSummary {
    #[serde(flatten)]
    extremal: ExtremalSummary,
    #[serde(rename = "K")]
    dilatation: f64,
    l_grid: f64,
    l_svd: f64,
    attained: bool,
    phi_star: [f64; 2],
    beltrami: [f64; 2],
    expected_beltrami: [f64; 2],
    homotopic: bool,
    map: io::TorusSpec,
}

fn chain_levels(spec: &ChainSpec, last: Option<u64>) -> Result<u64, CliError> {
    spec.n_max
        .or(last)
        .ok_or_else(|| CliError::Schema("chain payload: generated chains need \"nMax\"".into()))
}

fn attained_flag(a: Attainment) -> Value {
    match a {
        Attainment::Attained => Value::Bool(true),
        Attainment::NotAttained => Value::Bool(false),
        Attainment::Unknown => Value::Null,
    }
}

fn cylinder(cfg: &ScenarioConfig) -> Result<Report, CliError> {
    let spec: ChainSpec = cfg.payload()?;
    let model = spec.build::<BigRational>()?;
    let n_max = chain_levels(&spec, model.chain.last_index())?;
    let ext = cone_extremal(&model.chain, &model.map, n_max)?;
    let rows = exhaustion_diagnostics(&model.chain, &model.map, &model.weights, n_max)?;
    let norm = chain_norm(&model.chain, &model.weights).ok();
    let image_norm = chain_pushforward(&model.chain, &model.map, &model.weights)
        .ok()
        .map(|p| p.image_norm);

    let gaps: Vec<(u64, BigRational, BigRational)> = ext
        .prefix
        .iter()
        .map(|(n, l_n)| (*n, l_n.clone(), ext.l.clone() - l_n.clone()))
        .collect();
    let last_gap = gaps.last().map(|g| g.2.clone()).expect("nonempty prefix");
    let ratio = match (&norm, &image_norm) {
        (Some(n), Some(m)) => Some(m.clone() / n.clone()),
        _ => None,
    };
    let summary = json!({
        "L": ext.l.to_f64(),
        "L_exact": exact(&ext.l),
        "attained": attained_flag(ext.attained),
        "attainment": ext.attained.as_str(),
        "exact": ext.exact,
        "witness": ext.witness,
        "nMax": n_max,
        "gap_last": last_gap.to_f64(),
        "gap_last_exact": exact(&last_gap),
        "norm": norm.as_ref().map(|v| v.to_f64()),
        "norm_exact": norm.as_ref().map(exact),
        "image_norm": image_norm.as_ref().map(|v| v.to_f64()),
        "image_norm_exact": image_norm.as_ref().map(exact),
        "ratio": ratio.as_ref().map(|v| v.to_f64()),
    });
    let mut out = Report::new(summary);
    let csv_rows: Vec<Vec<String>> = gaps
        .iter()
        .zip(&rows)
        .map(|((n, l_n, gap), row)| {
            vec![n.to_string(), fmt_f64(l_n.to_f64()), fmt_f64(row.trunc_norm.to_f64()), fmt_f64(gap.to_f64())]
        })
        .collect();
    out.file("cylinder.csv", table(&["N", "L_N", "truncNorm", "gap"], &csv_rows)?);
    if cfg.plot {
        out.file("cylinder_gap.svg", gap_plot(&gaps));
    }
    Ok(out)
}

fn gap_plot(gaps: &[(u64, BigRational, BigRational)]) -> String {
    line_plot(
        "extremal gap L - L_N",
        "N",
        "gap",
        &[Series { label: "L - L_N", points: gaps.iter().map(|g| (g.0 as f64, g.2.to_f64())).collect() }],
    )
}

fn exhaustion(cfg: &ScenarioConfig) -> Result<Report, CliError> {
    let spec: ChainSpec = cfg.payload()?;
    let model = spec.build::<BigRational>()?;
    let n_max = chain_levels(&spec, model.chain.last_index())?;
    let ext = cone_extremal(&model.chain, &model.map, n_max)?;
    let rows = exhaustion_diagnostics(&model.chain, &model.map, &model.weights, n_max)?;
    let norm = chain_norm(&model.chain, &model.weights).ok();

    let mut csv_rows = Vec::with_capacity(rows.len());
    let mut gaps = Vec::with_capacity(rows.len());
    for (k, row) in rows.iter().enumerate() {
        let doubled = truncate_and_double(&model.chain, &model.weights, k + 1)?.doubled_norm;
        let gap = ext.l.clone() - row.l_n.clone();
        csv_rows.push(vec![
            row.n.to_string(),
            fmt_f64(row.l_n.to_f64()),
            fmt_f64(row.trunc_norm.to_f64()),
            fmt_f64(doubled.to_f64()),
            row.gap.as_ref().map(|g| fmt_f64(g.to_f64())).unwrap_or_default(),
            fmt_f64(gap.to_f64()),
        ]);
        gaps.push((row.n, row.l_n.clone(), gap));
    }
    let last = rows.last().expect("nonempty exhaustion");
    let summary = json!({
        "L": ext.l.to_f64(),
        "L_exact": exact(&ext.l),
        "attained": attained_flag(ext.attained),
        "attainment": ext.attained.as_str(),
        "nMax": n_max,
        "norm": norm.as_ref().map(|v| v.to_f64()),
        "norm_exact": norm.as_ref().map(exact),
        "trunc_norm_last": last.trunc_norm.to_f64(),
        "norm_gap_last": last.gap.as_ref().map(|g| g.to_f64()),
        "gap_last": gaps.last().map(|g| g.2.to_f64()),
    });
    let mut out = Report::new(summary);
    out.file(
        "exhaustion.csv",
        table(&["N", "L_N", "truncNorm", "doubledNorm", "normGap", "gap"], &csv_rows)?,
    );
    if cfg.plot {
        out.file("exhaustion_gap.svg", gap_plot(&gaps));
    }
    Ok(out)
}

fn variational(cfg: &ScenarioConfig, gauge: Option<Gauge>) -> Result<Report, CliError> {
    let p: VariationalPayload = cfg.payload()?;
    let gauge = match (gauge, &p.gauge) {
        (Some(g), _) => g,
        (None, Some(s)) => s.parse()?,
        (None, None) => Gauge::default(),
    };
    let tau = io::point::<f64>(p.tau)?;
    let q = io::quad_diff(p.q, tau)?;
    let model = p.chain.build::<f64>()?;
    let torus = TorusPath {
        mu: io::complex(p.mu),
        tau,
        q,
        step: p.step,
        gauge,
    };
    let chain = ChainPath {
        chain: &model.chain,
        map: &model.map,
        weights: &model.weights,
        n_max: p.chain.n_max.unwrap_or(0),
    };
    let r = a_of_t(&torus, &chain, &p.t_grid)?;
    let checks = &r.checks;
    let summary = json!({
        "gauge": gauge.as_str(),
        "K": r.dilatation,
        "chain_norm": r.chain_norm,
        "nMax": chain.n_max,
        "max_discrepancy": checks.max_discrepancy,
        "a_nonnegative": checks.a_nonnegative,
        "a_zero_at_origin": checks.a_zero_at_origin,
        "a_monotone": checks.a_monotone,
        "a_within_bound": checks.a_within_bound,
    });
    let mut out = Report::new(summary);
    if !checks.a_properties_hold() {
        out.fail(format!(
            "variational: defect properties violated: nonnegative {}, zero at origin {}, monotone {}, within bound {}",
            checks.a_nonnegative, checks.a_zero_at_origin, checks.a_monotone, checks.a_within_bound
        ));
    }
    if let Some(d) = checks.max_discrepancy {
        if d > DISCREPANCY_TOL {
            out.fail(format!(
                "variational: analytic derivative matches finite difference violated: discrepancy {d:e}, bound {DISCREPANCY_TOL:e}"
            ));
        }
    }

    let rows: Vec<Vec<String>> = (0..r.t_grid.len())
        .map(|i| {
            vec![
                fmt_f64(r.t_grid[i]),
                fmt_f64(r.h[i]),
                fmt_f64(r.h_prime_analytic[i]),
                r.h_prime_numeric[i].map(fmt_f64).unwrap_or_default(),
                fmt_f64(r.a_vals[i]),
                fmt_f64(r.bounds[i]),
            ]
        })
        .collect();
    out.file(
        "variational.csv",
        table(&["t", "h", "h_prime_analytic", "h_prime_numeric", "A", "bound"], &rows)?,
    );
    if cfg.plot {
        let pts = |v: &[f64]| r.t_grid.iter().copied().zip(v.iter().copied()).collect::<Vec<_>>();
        out.file(
            "variational_h.svg",
            line_plot("h(t)", "t", "h", &[Series { label: "h", points: pts(&r.h) }]),
        );
        out.file(
            "variational_a.svg",
            line_plot(
                "defect A(t)",
                "t",
                "A",
                &[
                    Series { label: "A", points: pts(&r.a_vals) },
                    Series { label: "bound", points: pts(&r.bounds) },
                ],
            ),
        );
    }
    Ok(out)
}

fn form_files(out: &mut Report, stem: &str, form: &GridOneForm<f64>) -> Result<(), CliError> {
    let mut buf = Vec::new();
    let header = write_form(form, &mut buf)?;
    out.file(&format!("{stem}.csv"), String::from_utf8(buf).expect("csv output is utf-8"));
    out.file(
        &format!("{stem}.json"),
        serde_json::to_string_pretty(&header).expect("serializable header") + "\n",
    );
    Ok(())
}

fn dirichlet(cfg: &ScenarioConfig) -> Result<Report, CliError> {
    let p: DirichletPayload = cfg.payload()?;
    if !(p.perturbation.is_finite() && p.perturbation >= 0.0) {
        return Err(CliError::Schema("dirichlet payload: perturbation must be finite and >= 0".into()));
    }
    let tau = io::point::<f64>(p.tau)?;
    let periods = (p.periods[0], p.periods[1]);
    let map = match &p.map {
        Some(m) => Some(flatheights::parse_marked_map(Marking(m.marking), tau, io::point(m.tau_prime)?)?),
        None => None,
    };
    let mut rng = random::rng(cfg.seed);
    let potential = random::uniform_vec::<f64>(&mut rng, p.n * p.n, p.perturbation);
    let initial = GridOneForm::with_potential(periods, tau, p.n, potential)?;
    let m = relax(&initial)?;
    let norm = realizing_norm(periods, tau);
    let push = map.as_ref().map(|f| pushforward_energy(&initial, f)).transpose()?;

    let summary = json!({
        "N": p.n,
        "energy_initial": flatheights::dirichlet::grid_energy(&initial),
        "energy_min": m.energy,
        "realizing_norm": norm,
        "gap_initial": dirichlet_gap(&initial),
        "gap_min": m.energy - norm,
        "iterations": m.iterations,
        "residual": m.residual,
        "solver": if m.direct { "cholesky" } else { "cg" },
        "pushforward": push.as_ref().map(|e| json!({
            "energy": e.energy,
            "image_energy": e.image_energy,
            "K": e.dilatation,
            "holds": e.holds(),
        })),
    });
    let mut out = Report::new(summary);
    let rel = (m.energy - norm).abs() / norm.max(1.0);
    if rel > DIRICHLET_TOL {
        out.fail(format!(
            "dirichlet: minimizer energy equals realizing norm violated: relative error {rel:e}, bound {DIRICHLET_TOL:e}"
        ));
    }
    if let Some(e) = &push {
        if !e.holds() {
            out.fail(format!(
                "dirichlet: pushforward energy at most K times energy violated: {:e} > {:e} * {:e}",
                e.image_energy, e.dilatation, e.energy
            ));
        }
    }
    form_files(&mut out, "initial", &initial)?;
    form_files(&mut out, "minimizer", &m.form)?;
    Ok(out)
}
