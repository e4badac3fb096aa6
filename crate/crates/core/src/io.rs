//! JSON and CSV encodings of the engine inputs and results.
//!
//! Complex numbers and upper half-plane points are `[re, im]` pairs. Floats in
//! CSV tables are written with 17 significant digits so that tables
//! round-trip bit for bit and identical runs produce identical files.

use std::io::{Read, Write};

use num_complex::Complex;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::cylinder::expr::parse_decimal;
use crate::cylinder::{Attainment, ChainMap, ConeDifferential, Cylinder, CylinderChain, Expr, Monotone, TailBound};
use crate::dirichlet::GridOneForm;
use crate::error::{Error, Result};
use crate::flat::{parse_marked_map, MarkedTorusMap, Marking, TorusQuadDiff, UpperHalfPoint};
use crate::scalar::{ChainScalar, Real};
use crate::torus::{ConjugateRelation, ExtremalReport};

/// `{"tau": [t1, t2], "tau_prime": [t1, t2], "B": [[.., ..], [.., ..]]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorusSpec {
    pub tau: [f64; 2],
    pub tau_prime: [f64; 2],
    #[serde(rename = "B")]
    pub marking: [[i64; 2]; 2],
}

impl TorusSpec {
    pub fn of<T: Real>(f: &MarkedTorusMap<T>) -> Self {
        Self {
            tau: point_pair(f.tau()),
            tau_prime: point_pair(f.tau_prime()),
            marking: f.marking().0,
        }
    }

    pub fn to_map<T: Real>(&self) -> Result<MarkedTorusMap<T>> {
        parse_marked_map(Marking(self.marking), point(self.tau)?, point(self.tau_prime)?)
    }
}

pub fn point<T: Real>(p: [f64; 2]) -> Result<UpperHalfPoint<T>> {
    UpperHalfPoint::new(T::lit(p[0]), T::lit(p[1]))
}

pub fn point_pair<T: Real>(p: UpperHalfPoint<T>) -> [f64; 2] {
    [p.tau1().as_f64(), p.tau2().as_f64()]
}

pub fn complex<T: Real>(c: [f64; 2]) -> Complex<T> {
    Complex::new(T::lit(c[0]), T::lit(c[1]))
}

pub fn complex_pair<T: Real>(c: Complex<T>) -> [f64; 2] {
    [c.re.as_f64(), c.im.as_f64()]
}

/// Summary of the torus criterion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremalSummary {
    #[serde(rename = "L")]
    pub l: f64,
    pub theta_star: Option<f64>,
    pub branch: String,
    pub sigma: [f64; 2],
    pub c_conjugate: f64,
    pub residual: f64,
}

impl ExtremalSummary {
    pub fn new<T: Real>(report: &ExtremalReport<T>, relation: &ConjugateRelation<T>) -> Self {
        Self {
            l: report.l.as_f64(),
            theta_star: report.theta_star.map(Real::as_f64),
            branch: report.branch.as_str().to_string(),
            sigma: [report.sigma.0.as_f64(), report.sigma.1.as_f64()],
            c_conjugate: relation.c.as_f64(),
            residual: relation.residual.as_f64(),
        }
    }
}

/// A chain number: a JSON number read as an exact decimal, or an expression string.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Quantity {
    Number(serde_json::Number),
    Text(String),
}

impl Quantity {
    pub fn to_rational(&self) -> Result<BigRational> {
        match self {
            Quantity::Number(n) => parse_decimal(&n.to_string()),
            Quantity::Text(s) => Expr::parse(s)?.eval(0),
        }
    }

    fn to_expr(&self) -> Result<Expr> {
        match self {
            Quantity::Number(n) => Expr::parse(&n.to_string()),
            Quantity::Text(s) => Expr::parse(s),
        }
    }

    fn scalar<S: ChainScalar>(&self) -> Result<S> {
        Ok(S::from_rational(&self.to_rational()?))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CylinderSpec {
    pub a: Quantity,
    pub b: Quantity,
    pub lambda: Quantity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MonotoneSpec {
    Increasing,
    Decreasing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub a: String,
    pub b: String,
    pub lambda: String,
    #[serde(default)]
    pub start: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sup: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sup_attained: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inf: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inf_attained: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monotone: Option<MonotoneSpec>,
    /// Declared `sum a_n b_n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm: Option<Quantity>,
}

/// Chain spec: explicit `cylinders` or a `generator`, plus optional weights
/// and truncation level.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cylinders: Option<Vec<CylinderSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
    /// Weights by position from the chain start; all ones when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<Quantity>>,
    #[serde(rename = "nMax", alias = "n_max", default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<u64>,
}

/// A chain, its map and a cone differential built from a [`ChainSpec`].
#[derive(Clone, Debug, PartialEq)]
pub struct ChainModel<S> {
    pub chain: CylinderChain<S>,
    pub map: ChainMap<S>,
    pub weights: ConeDifferential<S>,
}

fn bound<S: ChainScalar>(value: &Option<Quantity>, attained: Option<bool>) -> Result<TailBound<S>> {
    match value {
        None => Ok(TailBound::unknown()),
        Some(v) => Ok(TailBound::new(
            v.scalar()?,
            match attained {
                Some(true) => Attainment::Attained,
                Some(false) => Attainment::NotAttained,
                None => Attainment::Unknown,
            },
        )),
    }
}

impl ChainSpec {
    pub fn build<S: ChainScalar>(&self) -> Result<ChainModel<S>> {
        let (chain, map) = match (&self.cylinders, &self.generator) {
            (Some(cyls), None) => {
                let chain = CylinderChain::finite(
                    cyls.iter()
                        .map(|c| Cylinder::new(c.a.scalar()?, c.b.scalar()?))
                        .collect::<Result<Vec<_>>>()?,
                )?;
                let map = ChainMap::finite(cyls.iter().map(|c| c.lambda.scalar()).collect::<Result<Vec<_>>>()?)?;
                (chain, map)
            }
            (None, Some(g)) => {
                let norm = g.norm.as_ref().map(|n| n.scalar()).transpose()?;
                let chain = CylinderChain::generated(Expr::parse(&g.a)?, Expr::parse(&g.b)?, g.start, norm)?;
                let map = ChainMap::generated(
                    Quantity::Text(g.lambda.clone()).to_expr()?,
                    bound(&g.sup, g.sup_attained)?,
                    bound(&g.inf, g.inf_attained)?,
                    g.monotone.map(|m| match m {
                        MonotoneSpec::Increasing => Monotone::Increasing,
                        MonotoneSpec::Decreasing => Monotone::Decreasing,
                    }),
                )?;
                (chain, map)
            }
            _ => {
                return Err(Error::Schema(
                    "chain payload needs exactly one of \"cylinders\" or \"generator\"".into(),
                ))
            }
        };
        let weights = match &self.weights {
            None => ConeDifferential::ones(),
            Some(w) => ConeDifferential::finite(w.iter().map(|q| q.scalar()).collect::<Result<Vec<_>>>()?)?,
        };
        Ok(ChainModel { chain, map, weights })
    }
}

/// `{"N": .., "tau": [t1, t2], "periods": [h1, h2]}` header of a grid form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridHeader {
    #[serde(rename = "N")]
    pub n: usize,
    pub tau: [f64; 2],
    pub periods: [f64; 2],
}

/// Float formatting shared by every CSV table.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes a header row and rows of preformatted cells.
pub fn write_table<W: Write>(out: W, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(csv_error)?;
    for row in rows {
        w.write_record(row).map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::Schema(format!("csv write failed: {e}")))?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Schema(format!("csv: {e}"))
}

/// The header and the `i,j,P,Q` cell table of a grid form.
pub fn write_form<T: Real, W: Write>(form: &GridOneForm<T>, out: W) -> Result<GridHeader> {
    let n = form.n();
    let (p, q) = form.cells();
    let rows: Vec<Vec<String>> = (0..n * n)
        .map(|k| {
            vec![
                (k % n).to_string(),
                (k / n).to_string(),
                fmt_f64(p[k].as_f64()),
                fmt_f64(q[k].as_f64()),
            ]
        })
        .collect();
    write_table(out, &["i", "j", "P", "Q"], &rows)?;
    let periods = form.periods();
    Ok(GridHeader {
        n,
        tau: point_pair(form.tau()),
        periods: [periods.0.as_f64(), periods.1.as_f64()],
    })
}

/// Reads a cell table written by [`write_form`], checking it against the header.
pub fn read_form<T: Real, R: Read>(header: &GridHeader, input: R) -> Result<GridOneForm<T>> {
    let n = header.n;
    let mut p = vec![None; n * n];
    let mut q = vec![None; n * n];
    let mut reader = csv::Reader::from_reader(input);
    for record in reader.deserialize::<(usize, usize, f64, f64)>() {
        let (i, j, pv, qv) = record.map_err(csv_error)?;
        if i >= n || j >= n {
            return Err(Error::Schema(format!("cell ({i}, {j}) outside an N = {n} grid")));
        }
        p[j * n + i] = Some(T::lit(pv));
        q[j * n + i] = Some(T::lit(qv));
    }
    let collect = |v: Vec<Option<T>>| {
        v.into_iter()
            .collect::<Option<Vec<T>>>()
            .ok_or_else(|| Error::Schema("grid form table is missing cells".into()))
    };
    let form = GridOneForm::from_cells(point(header.tau)?, n, &collect(p)?, &collect(q)?)?;
    let (h1, h2) = form.periods();
    let tol = 1e-9 * header.periods[0].abs().max(header.periods[1].abs()).max(1.0);
    if (h1.as_f64() - header.periods[0]).abs() > tol || (h2.as_f64() - header.periods[1]).abs() > tol {
        return Err(Error::InvalidForm(format!(
            "row/column sums give periods ({}, {}), header says {:?}",
            h1.as_f64(),
            h2.as_f64(),
            header.periods
        )));
    }
    Ok(form)
}

/// A differential `c dz^2` given as `{"c": [re, im]}` on a known torus.
pub fn quad_diff<T: Real>(c: [f64; 2], tau: UpperHalfPoint<T>) -> Result<TorusQuadDiff<T>> {
    TorusQuadDiff::new(complex(c), tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cylinder::{cone_extremal, CylinderChain};
    use num_bigint::BigInt;

    #[test]
    fn torus_json_round_trip() {
        let text = r#"{"tau":[0,1],"tau_prime":[0,2],"B":[[1,0],[0,1]]}"#;
        let spec: TorusSpec = serde_json::from_str(text).unwrap();
        let f: MarkedTorusMap<f64> = spec.to_map().unwrap();
        assert_eq!(TorusSpec::of(&f), spec);
        let bad: TorusSpec = serde_json::from_str(r#"{"tau":[0,1],"tau_prime":[0,1],"B":[[2,0],[0,1]]}"#).unwrap();
        assert!(matches!(bad.to_map::<f64>(), Err(Error::NotOrientationPreserving { det: 2 })));
        assert!(serde_json::from_str::<TorusSpec>(r#"{"tau":[0,1]}"#).is_err());
    }

    #[test]
    fn chain_spec_generator() {
        let text = r#"{"generator":{"a":"1","b":"2^-n","lambda":"2-1/(n+1)","sup":2,"sup_attained":false,
                       "monotone":"increasing","norm":2},"nMax":100}"#;
        let spec: ChainSpec = serde_json::from_str(text).unwrap();
        let model = spec.build::<BigRational>().unwrap();
        let e = cone_extremal(&model.chain, &model.map, spec.n_max.unwrap()).unwrap();
        assert_eq!(e.attained, Attainment::NotAttained);
        assert_eq!(
            e.gaps.last().unwrap().1,
            BigRational::new(BigInt::from(1), BigInt::from(101))
        );
    }

    #[test]
    fn chain_spec_cylinders_are_exact() {
        let text = r#"{"cylinders":[{"a":0.1,"b":3,"lambda":"3/2"},{"a":2,"b":1,"lambda":0.5}]}"#;
        let spec: ChainSpec = serde_json::from_str(text).unwrap();
        let model = spec.build::<BigRational>().unwrap();
        let c: &CylinderChain<BigRational> = &model.chain;
        assert_eq!(c.cylinders().unwrap()[0].a, BigRational::new(BigInt::from(1), BigInt::from(10)));
        assert!(serde_json::from_str::<ChainSpec>(r#"{"cylinders":[],"extra":1}"#).is_err());
        assert!(ChainSpec::default().build::<f64>().is_err());
    }

    #[test]
    fn form_csv_round_trip() {
        let t = UpperHalfPoint::new(0.3, 1.4).unwrap();
        let pot: Vec<f64> = (0..16).map(|k| (k as f64 * 0.7).sin() * 0.1).collect();
        let form = GridOneForm::with_potential((0.5, -0.25), t, 4, pot).unwrap();
        let mut buf = Vec::new();
        let header = write_form(&form, &mut buf).unwrap();
        let back: GridOneForm<f64> = read_form(&header, buf.as_slice()).unwrap();
        let (p, q) = form.cells();
        let (p2, q2) = back.cells();
        for (a, b) in p.iter().chain(&q).zip(p2.iter().chain(&q2)) {
            assert!((a - b).abs() < 1e-14);
        }
        let wrong = GridHeader {
            periods: [1.0, 0.0],
            ..header
        };
        assert!(read_form::<f64, _>(&wrong, buf.as_slice()).is_err());
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-17, 12345.678] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }
}
