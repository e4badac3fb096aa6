//! Cylinder-chain model of the Jenkins–Strebel cone.
//!
//! A chain is a list of flat cylinders `(a_n, b_n)` (circumference, height),
//! either explicit or produced by generator formulas in the index `n`. A
//! chain map scales circumferences, `a_n' = lambda_n a_n`, and keeps
//! heights. Differentials in the cone are nonnegative weight sequences `w_n`
//! with norm `sum w_n a_n b_n`, so every norm ratio is a weighted mean of the
//! `lambda_n` and the extremal functional is `max(sup lambda, 1/inf lambda)`.
//!
//! Infinite generators cannot be summed or maximised from a prefix alone, so
//! they carry declared tail metadata (`sup`/`inf` with attainment flags, a
//! monotonicity certificate, the total norm). The engine checks the metadata
//! against every computed value and never reports attainment without a
//! witness in the prefix.

pub mod expr;

use num_rational::BigRational;

pub use expr::Expr;

use crate::error::{Error, Result};
use crate::scalar::ChainScalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Cylinder<S> {
    /// Circumference.
    pub a: S,
    /// Height.
    pub b: S,
}

impl<S: ChainScalar> Cylinder<S> {
    pub fn new(a: S, b: S) -> Result<Self> {
        if !(a > S::zero()) || !(b > S::zero()) {
            return Err(Error::InvalidChain(format!(
                "cylinder needs a > 0 and b > 0, got a = {}, b = {}",
                a, b
            )));
        }
        Ok(Self { a, b })
    }

    pub fn area(&self) -> S {
        self.a.clone() * self.b.clone()
    }
}

#[derive(Clone, Debug, PartialEq)]
enum ChainSource<S> {
    Finite(Vec<Cylinder<S>>),
    Generated {
        a: Expr,
        b: Expr,
        start: u64,
        total_area: Option<S>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CylinderChain<S> {
    source: ChainSource<S>,
}

impl<S: ChainScalar> CylinderChain<S> {
    pub fn finite(cylinders: Vec<Cylinder<S>>) -> Result<Self> {
        if cylinders.is_empty() {
            return Err(Error::InvalidChain("chain has no cylinders".into()));
        }
        Ok(Self {
            source: ChainSource::Finite(cylinders),
        })
    }

    /// Infinite chain `n -> (a(n), b(n))` for `n >= start`. `total_area` is the
    /// declared value of `sum a_n b_n`, required for uniform-weight norms.
    pub fn generated(a: Expr, b: Expr, start: u64, total_area: Option<S>) -> Result<Self> {
        let chain = Self {
            source: ChainSource::Generated {
                a,
                b,
                start,
                total_area,
            },
        };
        chain.cylinder(start)?;
        Ok(chain)
    }

    pub fn start(&self) -> u64 {
        match &self.source {
            ChainSource::Finite(_) => 0,
            ChainSource::Generated { start, .. } => *start,
        }
    }

    /// Number of cylinders, `None` for generators.
    pub fn len(&self) -> Option<usize> {
        match &self.source {
            ChainSource::Finite(c) => Some(c.len()),
            ChainSource::Generated { .. } => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.len().is_some()
    }

    /// Last natural index, `None` for generators.
    pub fn last_index(&self) -> Option<u64> {
        self.len().map(|l| l as u64 - 1)
    }

    pub fn declared_total_area(&self) -> Option<&S> {
        match &self.source {
            ChainSource::Finite(_) => None,
            ChainSource::Generated { total_area, .. } => total_area.as_ref(),
        }
    }

    /// Cylinder with natural index `n`.
    pub fn cylinder(&self, n: u64) -> Result<Cylinder<S>> {
        match &self.source {
            ChainSource::Finite(c) => c
                .get(n as usize)
                .cloned()
                .ok_or_else(|| Error::InvalidChain(format!("index {n} beyond chain of length {}", c.len()))),
            ChainSource::Generated { a, b, start, .. } => {
                if n < *start {
                    return Err(Error::InvalidChain(format!("index {n} below generator start {start}")));
                }
                Cylinder::new(S::from_rational(&a.eval(n)?), S::from_rational(&b.eval(n)?))
            }
        }
    }

    /// Natural indices `start..=min(n_max, last)`.
    pub fn indices_upto(&self, n_max: u64) -> std::ops::RangeInclusive<u64> {
        let end = match self.last_index() {
            Some(last) => last.min(n_max),
            None => n_max,
        };
        self.start()..=end
    }

    /// The first cylinders up to index `n_max`, as a finite chain.
    pub fn truncated(&self, n_max: u64) -> Result<Self> {
        let cyls = self
            .indices_upto(n_max)
            .map(|n| self.cylinder(n))
            .collect::<Result<Vec<_>>>()?;
        Self::finite(cyls)
    }

    pub fn cylinders(&self) -> Option<&[Cylinder<S>]> {
        match &self.source {
            ChainSource::Finite(c) => Some(c),
            ChainSource::Generated { .. } => None,
        }
    }

    pub(crate) fn generator_sources(&self) -> Option<(&Expr, &Expr)> {
        match &self.source {
            ChainSource::Finite(_) => None,
            ChainSource::Generated { a, b, .. } => Some((a, b)),
        }
    }
}

/// Whether a supremum/infimum is realised by some index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Attainment {
    Attained,
    NotAttained,
    Unknown,
}

impl Attainment {
    pub fn as_str(&self) -> &'static str {
        match self {
            Attainment::Attained => "attained",
            Attainment::NotAttained => "not-attained",
            Attainment::Unknown => "unknown",
        }
    }
}

/// Declared supremum or infimum of a generated scale sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct TailBound<S> {
    pub value: Option<S>,
    pub attained: Attainment,
}

impl<S> TailBound<S> {
    pub fn unknown() -> Self {
        Self {
            value: None,
            attained: Attainment::Unknown,
        }
    }

    pub fn new(value: S, attained: Attainment) -> Self {
        Self {
            value: Some(value),
            attained,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Monotone {
    Increasing,
    Decreasing,
}

#[derive(Clone, Debug, PartialEq)]
enum LambdaSource<S> {
    Finite(Vec<S>),
    Generated(Expr),
}

/// Per-cylinder circumference scaling `a_n -> lambda_n a_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainMap<S> {
    lambdas: LambdaSource<S>,
    sup: TailBound<S>,
    inf: TailBound<S>,
    monotone: Option<Monotone>,
}

impl<S: ChainScalar> ChainMap<S> {
    pub fn finite(lambdas: Vec<S>) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::InvalidChain("map has no scale factors".into()));
        }
        for l in &lambdas {
            if !(*l > S::zero()) {
                return Err(Error::InvalidChain(format!("scale factor {l} must be positive")));
            }
        }
        let (mut sup, mut inf) = (lambdas[0].clone(), lambdas[0].clone());
        for l in &lambdas[1..] {
            if *l > sup {
                sup = l.clone();
            }
            if *l < inf {
                inf = l.clone();
            }
        }
        Ok(Self {
            lambdas: LambdaSource::Finite(lambdas),
            sup: TailBound::new(sup, Attainment::Attained),
            inf: TailBound::new(inf, Attainment::Attained),
            monotone: None,
        })
    }

    pub fn generated(
        lambda: Expr,
        sup: TailBound<S>,
        inf: TailBound<S>,
        monotone: Option<Monotone>,
    ) -> Result<Self> {
        for v in [&sup.value, &inf.value].into_iter().flatten() {
            if !(*v > S::zero()) {
                return Err(Error::Metadata(format!("declared bound {v} must be positive")));
            }
        }
        Ok(Self {
            lambdas: LambdaSource::Generated(lambda),
            sup,
            inf,
            monotone,
        })
    }

    /// Uniform scaling by `lambda` on every cylinder.
    pub fn constant(lambda: S) -> Result<Self> {
        let expr = Expr::constant(to_rational(&lambda)?);
        Self::generated(
            expr,
            TailBound::new(lambda.clone(), Attainment::Attained),
            TailBound::new(lambda, Attainment::Attained),
            None,
        )
    }

    pub fn sup(&self) -> &TailBound<S> {
        &self.sup
    }

    pub fn inf(&self) -> &TailBound<S> {
        &self.inf
    }

    pub fn monotone(&self) -> Option<Monotone> {
        self.monotone
    }

    pub fn is_finite(&self) -> bool {
        matches!(self.lambdas, LambdaSource::Finite(_))
    }

    pub fn lambda(&self, n: u64) -> Result<S> {
        let value = match &self.lambdas {
            LambdaSource::Finite(v) => v
                .get(n as usize)
                .cloned()
                .ok_or_else(|| Error::InvalidChain(format!("no scale factor for index {n}")))?,
            LambdaSource::Generated(e) => S::from_rational(&e.eval(n)?),
        };
        if !(value > S::zero()) {
            return Err(Error::InvalidChain(format!("scale factor at {n} is {value}, must be positive")));
        }
        Ok(value)
    }

    pub fn truncated(&self, chain: &CylinderChain<S>, n_max: u64) -> Result<Self> {
        let lambdas = chain
            .indices_upto(n_max)
            .map(|n| self.lambda(n))
            .collect::<Result<Vec<_>>>()?;
        Self::finite(lambdas)
    }

    pub(crate) fn lambda_source(&self) -> Option<&Expr> {
        match &self.lambdas {
            LambdaSource::Finite(_) => None,
            LambdaSource::Generated(e) => Some(e),
        }
    }

    /// Checks declared bounds and monotonicity on computed values.
    fn check_prefix(&self, prefix: &[(u64, S)]) -> Result<()> {
        let slack = S::slack();
        for (n, l) in prefix {
            if let Some(sup) = &self.sup.value {
                if *l > sup.clone() + slack.clone() {
                    return Err(Error::Metadata(format!(
                        "lambda_{n} = {l} exceeds declared sup {sup}"
                    )));
                }
            }
            if let Some(inf) = &self.inf.value {
                if *l < inf.clone() - slack.clone() {
                    return Err(Error::Metadata(format!(
                        "lambda_{n} = {l} is below declared inf {inf}"
                    )));
                }
            }
        }
        if let Some(m) = self.monotone {
            for w in prefix.windows(2) {
                let ok = match m {
                    Monotone::Increasing => w[1].1 >= w[0].1,
                    Monotone::Decreasing => w[1].1 <= w[0].1,
                };
                if !ok {
                    return Err(Error::Metadata(format!(
                        "declared {m:?} sequence breaks between indices {} and {}",
                        w[0].0, w[1].0
                    )));
                }
            }
        }
        Ok(())
    }
}

fn to_rational<S: ChainScalar>(v: &S) -> Result<BigRational> {
    v.to_rational()
        .ok_or_else(|| Error::InvalidChain(format!("non-finite value {v}")))
}

#[derive(Clone, Debug, PartialEq)]
enum Weights<S> {
    Uniform(S),
    /// Weights by position from the chain start; zero afterwards.
    Finite(Vec<S>),
}

/// Nonnegative combination of the cylinder differentials.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeDifferential<S> {
    weights: Weights<S>,
}

impl<S: ChainScalar> ConeDifferential<S> {
    pub fn uniform(w: S) -> Result<Self> {
        if !(w > S::zero()) {
            return Err(Error::InvalidChain("uniform weight must be positive".into()));
        }
        Ok(Self {
            weights: Weights::Uniform(w),
        })
    }

    pub fn ones() -> Self {
        Self {
            weights: Weights::Uniform(S::one()),
        }
    }

    /// Weights for positions `0, 1, ...` from the chain start; zero beyond.
    pub fn finite(weights: Vec<S>) -> Result<Self> {
        if weights.iter().any(|w| *w < S::zero()) {
            return Err(Error::InvalidChain("weights must be nonnegative".into()));
        }
        if !weights.iter().any(|w| *w > S::zero()) {
            return Err(Error::InvalidChain("weights must not all vanish".into()));
        }
        Ok(Self {
            weights: Weights::Finite(weights),
        })
    }

    /// The basis differential supported on position `k`.
    pub fn basis(k: usize) -> Self {
        let mut w = vec![S::zero(); k + 1];
        w[k] = S::one();
        Self {
            weights: Weights::Finite(w),
        }
    }

    pub fn weight_at(&self, position: usize) -> S {
        match &self.weights {
            Weights::Uniform(w) => w.clone(),
            Weights::Finite(v) => v.get(position).cloned().unwrap_or_else(S::zero),
        }
    }

    /// Number of leading positions that can carry weight, `None` if unbounded.
    pub fn support_len(&self) -> Option<usize> {
        match &self.weights {
            Weights::Uniform(_) => None,
            Weights::Finite(v) => Some(v.len()),
        }
    }

    fn uniform_weight(&self) -> Option<&S> {
        match &self.weights {
            Weights::Uniform(w) => Some(w),
            Weights::Finite(_) => None,
        }
    }
}

/// Sum of `f(n) w_n a_n b_n` over the indices that can carry weight.
fn weighted_sum<S: ChainScalar>(
    chain: &CylinderChain<S>,
    w: &ConeDifferential<S>,
    op: &str,
    mut factor: impl FnMut(u64) -> Result<S>,
) -> Result<S> {
    let count = match (chain.len(), w.support_len()) {
        (Some(l), Some(s)) => l.min(s),
        (Some(l), None) => l,
        (None, Some(s)) => s,
        (None, None) => {
            return Err(Error::Divergent(format!(
                "{op}: uniform weights on an infinite generator need a declared total"
            )))
        }
    };
    let mut total = S::zero();
    for k in 0..count {
        let n = chain.start() + k as u64;
        let wk = w.weight_at(k);
        if wk == S::zero() {
            continue;
        }
        total = total + wk * chain.cylinder(n)?.area() * factor(n)?;
    }
    Ok(total)
}

/// `sum w_n a_n b_n`.
pub fn chain_norm<S: ChainScalar>(chain: &CylinderChain<S>, w: &ConeDifferential<S>) -> Result<S> {
    if !chain.is_finite() {
        if let Some(u) = w.uniform_weight() {
            let total = chain.declared_total_area().ok_or_else(|| {
                Error::Divergent("chain_norm: infinite generator without a declared total norm".into())
            })?;
            return Ok(u.clone() * total.clone());
        }
    }
    let norm = weighted_sum(chain, w, "chain_norm", |_| Ok(S::one()))?;
    if !(norm > S::zero()) {
        return Err(Error::InvalidChain("differential has zero norm on this chain".into()));
    }
    Ok(norm)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pushforward<S> {
    pub image: CylinderChain<S>,
    pub image_norm: S,
}

/// Image chain `(lambda_n a_n, b_n)` and its norm `sum w_n lambda_n a_n b_n`.
pub fn chain_pushforward<S: ChainScalar>(
    chain: &CylinderChain<S>,
    map: &ChainMap<S>,
    w: &ConeDifferential<S>,
) -> Result<Pushforward<S>> {
    let image = match chain.cylinders() {
        Some(cyls) => {
            let scaled = cyls
                .iter()
                .enumerate()
                .map(|(n, c)| Cylinder::new(map.lambda(n as u64)? * c.a.clone(), c.b.clone()))
                .collect::<Result<Vec<_>>>()?;
            CylinderChain::finite(scaled)?
        }
        None => {
            let (a, b) = chain.generator_sources().expect("generated chain");
            let lambda = map.lambda_source().ok_or_else(|| {
                Error::InvalidChain("an infinite chain needs a generated map".into())
            })?;
            CylinderChain::generated(Expr::product(lambda, a), b.clone(), chain.start(), None)?
        }
    };
    let image_norm = weighted_sum(chain, w, "chain_pushforward", |n| map.lambda(n))?;
    Ok(Pushforward { image, image_norm })
}

/// Result of the extremal functional over the weight cone.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeExtremal<S> {
    /// `max(sup lambda, 1/inf lambda)`; with `Unknown` attainment and missing
    /// metadata this is only the prefix lower bound.
    pub l: S,
    pub attained: Attainment,
    /// Whether `l` is the true value rather than a prefix lower bound.
    pub exact: bool,
    /// Natural index realising `l`, when attained.
    pub witness: Option<u64>,
    /// `(N, L_N)` with `L_N = max(max_{n<=N} lambda_n, 1/min_{n<=N} lambda_n)`.
    pub prefix: Vec<(u64, S)>,
    /// `(N, L - L_N)`; reported whenever attainment is not established.
    pub gaps: Vec<(u64, S)>,
}

struct Side<S> {
    value: S,
    known: bool,
    attained: Attainment,
    witness: Option<u64>,
}

/// Supremum (or, with `reciprocal`, the reciprocal infimum) of the scale
/// factors, combining the computed prefix with declared metadata.
fn resolve_side<S: ChainScalar>(
    chain: &CylinderChain<S>,
    map: &ChainMap<S>,
    prefix: &[(u64, S)],
    n_max: u64,
    upper: bool,
) -> Result<Side<S>> {
    let better = |x: &S, y: &S| if upper { x > y } else { x < y };
    let mut best = prefix[0].clone();
    for p in &prefix[1..] {
        if better(&p.1, &best.1) {
            best = p.clone();
        }
    }
    let whole_chain = chain.last_index().is_some_and(|last| n_max >= last);
    let (bound, mono_hit) = if upper {
        (&map.sup, map.monotone == Some(Monotone::Decreasing))
    } else {
        (&map.inf, map.monotone == Some(Monotone::Increasing))
    };
    let slack = S::slack();
    let equal = |x: &S, y: &S| {
        let d = if x > y { x.clone() - y.clone() } else { y.clone() - x.clone() };
        d <= slack
    };
    let attained_side = |value: S, witness: u64| Side {
        value,
        known: true,
        attained: Attainment::Attained,
        witness: Some(witness),
    };
    if whole_chain || mono_hit {
        let (n, v) = if mono_hit { prefix[0].clone() } else { best };
        return Ok(attained_side(v, n));
    }
    let Some(declared) = bound.value.clone() else {
        return Ok(Side {
            value: best.1,
            known: false,
            attained: Attainment::Unknown,
            witness: None,
        });
    };
    let hit = prefix.iter().find(|(_, l)| equal(l, &declared)).map(|(n, _)| *n);
    match bound.attained {
        Attainment::NotAttained => {
            if let Some(n) = hit {
                return Err(Error::Metadata(format!(
                    "declared not attained, but lambda_{n} equals the declared bound {declared}"
                )));
            }
            Ok(Side {
                value: declared,
                known: true,
                attained: Attainment::NotAttained,
                witness: None,
            })
        }
        Attainment::Attained | Attainment::Unknown => Ok(match hit {
            Some(n) => attained_side(declared, n),
            None => Side {
                value: declared,
                known: true,
                attained: Attainment::Unknown,
                witness: None,
            },
        }),
    }
}

/// The extremal functional `L` over the weight cone and whether it is attained.
pub fn cone_extremal<S: ChainScalar>(
    chain: &CylinderChain<S>,
    map: &ChainMap<S>,
    n_max: u64,
) -> Result<ConeExtremal<S>> {
    if n_max < chain.start() {
        return Err(Error::InvalidChain(format!(
            "n_max = {n_max} is below the chain start {}",
            chain.start()
        )));
    }
    let lambdas = chain
        .indices_upto(n_max)
        .map(|n| Ok((n, map.lambda(n)?)))
        .collect::<Result<Vec<_>>>()?;
    map.check_prefix(&lambdas)?;

    let sup = resolve_side(chain, map, &lambdas, n_max, true)?;
    let inf = resolve_side(chain, map, &lambdas, n_max, false)?;
    let inv_inf = S::one() / inf.value.clone();
    let (l, sides): (S, Vec<&Side<S>>) = if sup.value > inv_inf {
        (sup.value.clone(), vec![&sup])
    } else if inv_inf > sup.value {
        (inv_inf, vec![&inf])
    } else {
        (sup.value.clone(), vec![&sup, &inf])
    };

    let all_known = sup.known && inf.known;
    let winner = sides.iter().find(|s| s.attained == Attainment::Attained);
    let (attained, witness) = match winner {
        Some(s) if all_known => (Attainment::Attained, s.witness),
        _ if !all_known => (Attainment::Unknown, None),
        _ if sides.iter().any(|s| s.attained == Attainment::Unknown) => (Attainment::Unknown, None),
        _ => (Attainment::NotAttained, None),
    };

    let mut prefix = Vec::with_capacity(lambdas.len());
    let (mut hi, mut lo) = (lambdas[0].1.clone(), lambdas[0].1.clone());
    for (n, v) in &lambdas {
        if *v > hi {
            hi = v.clone();
        }
        if *v < lo {
            lo = v.clone();
        }
        let inv = S::one() / lo.clone();
        prefix.push((*n, if hi > inv { hi.clone() } else { inv }));
    }
    let gaps = if attained == Attainment::Attained {
        Vec::new()
    } else {
        prefix.iter().map(|(n, ln)| (*n, l.clone() - ln.clone())).collect()
    };
    if attained == Attainment::NotAttained {
        let last = &prefix.last().expect("nonempty prefix").1;
        if !(*last < l) {
            return Err(Error::Metadata(format!(
                "non-attainment claimed but the prefix already reaches {last}"
            )));
        }
    }
    Ok(ConeExtremal {
        l,
        attained,
        exact: all_known,
        witness,
        prefix,
        gaps,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Truncation<S> {
    pub trunc_norm: S,
    pub doubled_norm: S,
}

/// Norm of the first `count` cylinders and of its mirror double.
pub fn truncate_and_double<S: ChainScalar>(
    chain: &CylinderChain<S>,
    w: &ConeDifferential<S>,
    count: usize,
) -> Result<Truncation<S>> {
    if let Some(len) = chain.len() {
        if count > len {
            return Err(Error::InvalidChain(format!(
                "cannot truncate to {count} cylinders, chain has {len}"
            )));
        }
    }
    let mut cyls = Vec::with_capacity(count);
    let mut weights = Vec::with_capacity(count);
    for k in 0..count {
        cyls.push(chain.cylinder(chain.start() + k as u64)?);
        weights.push(w.weight_at(k));
    }
    let norm_of = |cyls: &[Cylinder<S>], weights: &[S]| {
        cyls.iter()
            .zip(weights)
            .fold(S::zero(), |acc, (c, wk)| acc + wk.clone() * c.area())
    };
    // The double glues each cylinder to its mirror image along the cut; the
    // symmetric differential carries the same weight on both copies.
    let mirrored: Vec<Cylinder<S>> = cyls.iter().chain(cyls.iter().rev()).cloned().collect();
    let mirrored_weights: Vec<S> = weights.iter().chain(weights.iter().rev()).cloned().collect();
    Ok(Truncation {
        trunc_norm: norm_of(&cyls, &weights),
        doubled_norm: norm_of(&mirrored, &mirrored_weights),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExhaustionRow<S> {
    pub n: u64,
    pub l_n: S,
    pub trunc_norm: S,
    /// `total - trunc_norm`, when the total norm is known.
    pub gap: Option<S>,
}

/// Per-level table of the exhaustion by truncations `n <= N`.
pub fn exhaustion_diagnostics<S: ChainScalar>(
    chain: &CylinderChain<S>,
    map: &ChainMap<S>,
    w: &ConeDifferential<S>,
    n_max: u64,
) -> Result<Vec<ExhaustionRow<S>>> {
    let extremal = cone_extremal(chain, map, n_max)?;
    let total = chain_norm(chain, w).ok();
    let mut rows = Vec::with_capacity(extremal.prefix.len());
    let mut trunc = S::zero();
    for (k, (n, l_n)) in extremal.prefix.into_iter().enumerate() {
        let wk = w.weight_at(k);
        if wk != S::zero() {
            trunc = trunc + wk * chain.cylinder(n)?.area();
        }
        let gap = total.clone().map(|t| t - trunc.clone());
        if let Some(g) = &gap {
            if *g < S::zero() - S::slack() {
                return Err(Error::Metadata(format!(
                    "truncated norm at N = {n} exceeds the declared total by {g}"
                )));
            }
        }
        rows.push(ExhaustionRow {
            n,
            l_n,
            trunc_norm: trunc.clone(),
            gap,
        });
    }
    Ok(rows)
}

impl Expr {
    /// The expression `(lhs) * (rhs)`.
    pub fn product(lhs: &Expr, rhs: &Expr) -> Expr {
        Expr::parse(&format!("({}) * ({})", lhs.source(), rhs.source())).expect("product of valid expressions")
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    type Q = BigRational;

    fn q(num: i64, den: i64) -> Q {
        Q::new(BigInt::from(num), BigInt::from(den))
    }

    fn qi(v: i64) -> Q {
        q(v, 1)
    }

    fn chain(cyls: &[(i64, i64)]) -> CylinderChain<Q> {
        CylinderChain::finite(cyls.iter().map(|&(a, b)| Cylinder::new(qi(a), qi(b)).unwrap()).collect())
            .unwrap()
    }

    fn geometric() -> CylinderChain<Q> {
        CylinderChain::generated(
            Expr::parse("1").unwrap(),
            Expr::parse("2^-n").unwrap(),
            1,
            Some(qi(1)),
        )
        .unwrap()
    }

    fn creeping_map() -> ChainMap<Q> {
        ChainMap::generated(
            Expr::parse("2-1/(n+1)").unwrap(),
            TailBound::new(qi(2), Attainment::NotAttained),
            TailBound::unknown(),
            Some(Monotone::Increasing),
        )
        .unwrap()
    }

    #[test]
    fn norms() {
        assert_eq!(chain_norm(&chain(&[(2, 3)]), &ConeDifferential::ones()).unwrap(), qi(6));
        let w = ConeDifferential::finite(vec![qi(1), qi(2)]).unwrap();
        assert_eq!(chain_norm(&chain(&[(1, 1), (2, 1)]), &w).unwrap(), qi(5));
        assert_eq!(chain_norm(&geometric(), &ConeDifferential::ones()).unwrap(), qi(1));
    }

    #[test]
    fn undeclared_infinite_norm_is_rejected() {
        let c = CylinderChain::<Q>::generated(Expr::parse("1").unwrap(), Expr::parse("1").unwrap(), 0, None)
            .unwrap();
        assert!(matches!(
            chain_norm(&c, &ConeDifferential::ones()),
            Err(Error::Divergent(_))
        ));
        let w = ConeDifferential::finite(vec![qi(1), qi(1), qi(1)]).unwrap();
        assert_eq!(chain_norm(&c, &w).unwrap(), qi(3));
    }

    #[test]
    fn pushforward_examples() {
        let c = chain(&[(2, 3)]);
        let one = ConeDifferential::ones();
        let p = chain_pushforward(&c, &ChainMap::finite(vec![qi(1)]).unwrap(), &one).unwrap();
        assert_eq!(p.image, c);
        let p = chain_pushforward(&c, &ChainMap::finite(vec![qi(3)]).unwrap(), &one).unwrap();
        assert_eq!(p.image_norm / chain_norm(&c, &one).unwrap(), qi(3));
        let c = chain(&[(1, 1), (1, 1)]);
        let p = chain_pushforward(&c, &ChainMap::finite(vec![q(3, 2), q(1, 2)]).unwrap(), &one).unwrap();
        assert_eq!(p.image_norm, qi(2));
        assert_eq!(p.image.cylinders().unwrap()[0].a, q(3, 2));
    }

    #[test]
    fn pushforward_of_generator_composes_expressions() {
        let p = chain_pushforward(
            &geometric(),
            &creeping_map(),
            &ConeDifferential::finite(vec![qi(1)]).unwrap(),
        )
        .unwrap();
        assert_eq!(p.image.cylinder(1).unwrap().a, q(3, 2));
        assert_eq!(p.image_norm, q(3, 4));
    }

    #[test]
    fn extremal_finite() {
        let c = chain(&[(1, 1)]);
        let e = cone_extremal(&c, &ChainMap::finite(vec![qi(3)]).unwrap(), 0).unwrap();
        assert_eq!((e.l, e.attained, e.witness), (qi(3), Attainment::Attained, Some(0)));

        let c = chain(&[(1, 1), (2, 1), (1, 3)]);
        let m = ChainMap::finite(vec![q(3, 2), q(5, 2), q(1, 2)]).unwrap();
        let e = cone_extremal(&c, &m, 10).unwrap();
        assert_eq!((e.l, e.attained, e.witness), (q(5, 2), Attainment::Attained, Some(1)));
    }

    #[test]
    fn extremal_inf_side() {
        let c = chain(&[(1, 1), (1, 1)]);
        let m = ChainMap::finite(vec![q(3, 2), q(1, 4)]).unwrap();
        let e = cone_extremal(&c, &m, 5).unwrap();
        assert_eq!((e.l, e.witness), (qi(4), Some(1)));
    }

    #[test]
    fn extremal_not_attained() {
        let c = CylinderChain::generated(Expr::parse("1").unwrap(), Expr::parse("2^-n").unwrap(), 0, Some(qi(2)))
            .unwrap();
        let e = cone_extremal(&c, &creeping_map(), 100).unwrap();
        assert_eq!(e.l, qi(2));
        assert_eq!(e.attained, Attainment::NotAttained);
        assert_eq!(e.gaps.len(), 101);
        for (n, g) in &e.gaps {
            assert_eq!(*g, q(1, *n as i64 + 1));
        }
    }

    #[test]
    fn missing_inf_metadata_is_unknown() {
        let c = geometric();
        let m = ChainMap::generated(
            Expr::parse("2-1/(n+1)").unwrap(),
            TailBound::new(qi(2), Attainment::NotAttained),
            TailBound::unknown(),
            None,
        )
        .unwrap();
        let e = cone_extremal(&c, &m, 20).unwrap();
        assert_eq!(e.attained, Attainment::Unknown);
    }

    #[test]
    fn declared_attained_without_witness_is_unknown() {
        let m = ChainMap::generated(
            Expr::parse("2-1/(n+1)").unwrap(),
            TailBound::new(qi(2), Attainment::Attained),
            TailBound::new(q(3, 2), Attainment::Attained),
            None,
        )
        .unwrap();
        let e = cone_extremal(&geometric(), &m, 30).unwrap();
        assert_eq!(e.attained, Attainment::Unknown);
    }

    #[test]
    fn inconsistent_metadata() {
        let m = ChainMap::generated(
            Expr::parse("3-1/(n+1)").unwrap(),
            TailBound::new(qi(2), Attainment::NotAttained),
            TailBound::unknown(),
            Some(Monotone::Increasing),
        )
        .unwrap();
        assert!(matches!(cone_extremal(&geometric(), &m, 10), Err(Error::Metadata(_))));
        let m = ChainMap::generated(
            Expr::parse("1/n").unwrap(),
            TailBound::unknown(),
            TailBound::unknown(),
            Some(Monotone::Increasing),
        )
        .unwrap();
        assert!(matches!(cone_extremal(&geometric(), &m, 10), Err(Error::Metadata(_))));
    }

    #[test]
    fn truncation_and_doubling() {
        let one = ConeDifferential::ones();
        let t = truncate_and_double(&geometric(), &one, 0).unwrap();
        assert_eq!((t.trunc_norm, t.doubled_norm), (qi(0), qi(0)));
        let t = truncate_and_double(&geometric(), &one, 3).unwrap();
        assert_eq!((t.trunc_norm, t.doubled_norm), (q(7, 8), q(7, 4)));
        assert!(truncate_and_double(&chain(&[(1, 1)]), &one, 2).is_err());
    }

    #[test]
    fn exhaustion_tables() {
        let one = ConeDifferential::ones();
        let c = chain(&[(1, 2), (3, 1), (1, 1)]);
        let rows = exhaustion_diagnostics(&c, &ChainMap::finite(vec![qi(1), qi(2), qi(1)]).unwrap(), &one, 10)
            .unwrap();
        assert_eq!(rows.last().unwrap().gap, Some(qi(0)));

        let m = ChainMap::generated(
            Expr::parse("2").unwrap(),
            TailBound::new(qi(2), Attainment::Attained),
            TailBound::new(qi(2), Attainment::Attained),
            None,
        )
        .unwrap();
        let rows = exhaustion_diagnostics(&geometric(), &m, &one, 12).unwrap();
        for r in &rows {
            assert_eq!(r.gap, Some(Q::new(BigInt::from(1), BigInt::from(2).pow(r.n as u32))));
        }

        let c = CylinderChain::generated(Expr::parse("1").unwrap(), Expr::parse("2^-n").unwrap(), 0, Some(qi(2)))
            .unwrap();
        let rows = exhaustion_diagnostics(&c, &creeping_map(), &one, 40).unwrap();
        for r in &rows {
            assert_eq!(r.l_n, qi(2) - q(1, r.n as i64 + 1));
        }
    }

    #[test]
    fn float_chains_agree_with_rational() {
        let cf = CylinderChain::<f64>::finite(vec![Cylinder::new(1.0, 1.0).unwrap(), Cylinder::new(2.0, 1.0).unwrap()])
            .unwrap();
        let w = ConeDifferential::finite(vec![1.0, 2.0]).unwrap();
        assert!((chain_norm(&cf, &w).unwrap() - 5.0).abs() < 1e-15);
        let mf = ChainMap::<f64>::constant(1.5).unwrap();
        let e = cone_extremal(&cf, &mf, 1).unwrap();
        assert!((e.l - 1.5).abs() < 1e-15);
    }
}
