//! Identification rules and the two proxy-selection searches.
//!
//! Rules R1 and R2 are rank constraints on cross-covariance submatrices; R3
//! is a pair of GIN conditions. The searches visit candidate proxy sets in
//! lexicographic order and commit to the first candidate whose rule passes
//! and whose estimator denominator is non-degenerate.

use std::time::{Duration, Instant};

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::data::{Covariance, Dataset};
use crate::error::{Error, Result};
use crate::estimators::{extended_proxy_estimate_cov, EffectEstimate, EstimatorKind};
use crate::gin::GinTester;
use crate::hsic::HsicConfig;
use crate::rank::{cca_rank_test_cov, numeric_rank};

/// Minimum sample size accepted by the GIN-based search.
pub const MIN_GIN_SAMPLES: usize = 200;

/// Decides `rank(Σ_{rows, cols}) <= r`.
pub trait RankOracle: Sync {
    fn rank_at_most(&self, rows: &[usize], cols: &[usize], r: usize) -> Result<bool>;
}

/// Canonical-correlation rank test on a sample covariance.
pub struct RankTest<'a> {
    pub cov: &'a Covariance,
    pub alpha: f64,
}

impl RankOracle for RankTest<'_> {
    fn rank_at_most(&self, rows: &[usize], cols: &[usize], r: usize) -> Result<bool> {
        cca_rank_test_cov(self.cov, rows, cols, r, self.alpha).map(|d| d.accepted)
    }
}

/// Exact rank on a population covariance.
pub struct ExactRank<'a> {
    pub cov: &'a Covariance,
    pub tol: f64,
}

impl RankOracle for ExactRank<'_> {
    fn rank_at_most(&self, rows: &[usize], cols: &[usize], r: usize) -> Result<bool> {
        Ok(numeric_rank(&self.cov.sub(rows, cols), self.tol)? <= r)
    }
}

/// Decides whether `(Z, Y)` satisfies the GIN condition.
pub trait GinOracle: Sync {
    fn gin(&self, zs: &[usize], ys: &[usize]) -> Result<bool>;
}

/// HSIC-based GIN decisions on a sample.
pub struct GinTest<'a> {
    pub tester: GinTester<'a>,
    pub alpha: f64,
}

impl GinOracle for GinTest<'_> {
    fn gin(&self, zs: &[usize], ys: &[usize]) -> Result<bool> {
        self.tester.test(zs, ys, self.alpha).map(|r| r.holds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rank,
    Gin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Found,
    #[serde(rename = "NA")]
    Na,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    R1,
    R2,
    R3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentReport {
    pub treatment: usize,
    pub name: String,
    pub status: Status,
    pub rule: Option<Rule>,
    pub nce: Vec<usize>,
    pub nco: Vec<usize>,
    pub nce_names: Vec<String>,
    pub nco_names: Vec<String>,
    /// The quadruple-disconnected variable used by R1.
    pub quad_nc: Option<usize>,
    pub effect: EffectEstimate,
    pub candidates_tested: usize,
    /// Wall time of this treatment's search; excluded from serialized output.
    #[serde(skip)]
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub method: Method,
    pub q: usize,
    pub alpha: f64,
    pub n: Option<usize>,
    pub names: Vec<String>,
    pub warnings: Vec<String>,
    pub treatments: Vec<TreatmentReport>,
}

impl SelectionReport {
    pub fn for_treatment(&self, name: &str) -> Option<&TreatmentReport> {
        self.treatments.iter().find(|t| t.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn require_q(q: usize) -> Result<()> {
    if q == 0 {
        return Err(Error::Precondition(
            "q must be ≥ 1 (at least one latent confounder)".into(),
        ));
    }
    Ok(())
}

fn check_disjoint(p: usize, k: usize, groups: &[&[usize]]) -> Result<()> {
    let mut seen = vec![false; p];
    for &i in std::iter::once(&k).chain(groups.iter().flat_map(|g| g.iter())) {
        if i >= p {
            return Err(Error::InvalidVarSet(format!("index {i} is not a treatment (p = {p})")));
        }
        if seen[i] {
            return Err(Error::InvalidVarSet(format!("index {i} appears twice")));
        }
        seen[i] = true;
    }
    Ok(())
}

fn chain(head: &[usize], tail: &[usize]) -> Vec<usize> {
    head.iter().chain(tail).copied().collect()
}

/// R1: `rank Σ_{{k,Q}∪A, {k,Y}∪B} <= q+1` and `rank Σ_{{k}∪A, {Q}∪B} <= q`.
pub fn rule_r1_with<O: RankOracle + ?Sized>(
    oracle: &O,
    p: usize,
    k: usize,
    a: &[usize],
    b: &[usize],
    quad: usize,
    q: usize,
) -> Result<bool> {
    require_q(q)?;
    if a.len() != q || b.len() != q {
        return Err(Error::Precondition(format!("R1 needs |A| = |B| = q = {q}")));
    }
    check_disjoint(p, k, &[a, b, &[quad]])?;
    let y = p;
    let first = oracle.rank_at_most(&chain(&[k, quad], a), &chain(&[k, y], b), q + 1)?;
    if !first {
        return Ok(false);
    }
    oracle.rank_at_most(&chain(&[k], a), &chain(&[quad], b), q)
}

/// R2: `rank Σ_{{k}∪A, {k,Y}∪B} <= q+1` and `rank Σ_{{k}∪A, B} <= q`.
pub fn rule_r2_with<O: RankOracle + ?Sized>(
    oracle: &O,
    p: usize,
    k: usize,
    a: &[usize],
    b: &[usize],
    q: usize,
) -> Result<bool> {
    require_q(q)?;
    if a.len() != q + 1 || b.len() != q + 1 {
        return Err(Error::Precondition(format!("R2 needs |A| = |B| = q + 1 = {}", q + 1)));
    }
    check_disjoint(p, k, &[a, b])?;
    let y = p;
    let rows = chain(&[k], a);
    let first = oracle.rank_at_most(&rows, &chain(&[k, y], b), q + 1)?;
    if !first {
        return Ok(false);
    }
    oracle.rank_at_most(&rows, b, q)
}

/// R3: `({k}∪A, {k,Y}∪B)` and `(B, {k}∪A)` both satisfy GIN.
pub fn rule_r3_with<O: GinOracle + ?Sized>(oracle: &O, p: usize, k: usize, a: &[usize], b: &[usize]) -> Result<bool> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::Precondition("R3 needs |A| = |B| = q ≥ 1".into()));
    }
    check_disjoint(p, k, &[a, b])?;
    let y = p;
    let xa = chain(&[k], a);
    if !oracle.gin(&xa, &chain(&[k, y], b))? {
        return Ok(false);
    }
    oracle.gin(b, &xa)
}

pub fn rule_r1(
    data: &Dataset,
    k: usize,
    a: &[usize],
    b: &[usize],
    quad: usize,
    q: usize,
    alpha: f64,
) -> Result<bool> {
    let cov = data.covariance();
    rule_r1_with(&RankTest { cov: &cov, alpha }, data.p(), k, a, b, quad, q)
}

pub fn rule_r2(data: &Dataset, k: usize, a: &[usize], b: &[usize], q: usize, alpha: f64) -> Result<bool> {
    let cov = data.covariance();
    rule_r2_with(&RankTest { cov: &cov, alpha }, data.p(), k, a, b, q)
}

pub fn rule_r3(data: &Dataset, k: usize, a: &[usize], b: &[usize], alpha: f64) -> Result<bool> {
    let oracle = GinTest {
        tester: GinTester::new(data, HsicConfig::default()),
        alpha,
    };
    rule_r3_with(&oracle, data.p(), k, a, b)
}

/// Evaluates a rule, treating degenerate inputs as a failed candidate.
fn passes(result: Result<bool>) -> Result<bool> {
    match result {
        Ok(v) => Ok(v),
        Err(Error::Degenerate(_)) => Ok(false),
        Err(e) => Err(e),
    }
}

struct Hit {
    rule: Rule,
    nce: Vec<usize>,
    nco: Vec<usize>,
    quad: Option<usize>,
    effect: EffectEstimate,
}

/// Tries the estimator on a passing candidate; `None` if its denominator is
/// degenerate, in which case the search moves on.
fn estimate(cov: &Covariance, k: usize, a: &[usize], b: &[usize]) -> Result<Option<EffectEstimate>> {
    let est = extended_proxy_estimate_cov(cov, k, a, b)?;
    Ok(if est.is_na() { None } else { Some(est) })
}

/// Sets of size `q + 1` make the determinant ratio singular (the outcome
/// proxies span only `q` directions), so an R2 hit is estimated from the
/// first pair of size-`q` subsets with a usable denominator. Subsets of
/// valid proxy sets are themselves valid.
fn estimate_subsets(cov: &Covariance, k: usize, a: &[usize], b: &[usize], q: usize) -> Result<Option<EffectEstimate>> {
    for za in a.iter().copied().combinations(q) {
        for wb in b.iter().copied().combinations(q) {
            if let Some(est) = estimate(cov, k, &za, &wb)? {
                return Ok(Some(est));
            }
        }
    }
    Ok(None)
}

fn search_rank<O: RankOracle + ?Sized>(
    oracle: &O,
    cov: &Covariance,
    k: usize,
    q: usize,
    tested: &mut usize,
) -> Result<Option<Hit>> {
    let p = cov.p();
    let others: Vec<usize> = (0..p).filter(|&i| i != k).collect();
    for a in others.iter().copied().combinations(q) {
        let rest: Vec<usize> = others.iter().copied().filter(|i| !a.contains(i)).collect();
        for b in rest.iter().copied().combinations(q) {
            for &quad in rest.iter().filter(|i| !b.contains(i)) {
                *tested += 1;
                if passes(rule_r1_with(oracle, p, k, &a, &b, quad, q))? {
                    if let Some(effect) = estimate(cov, k, &a, &b)? {
                        return Ok(Some(Hit { rule: Rule::R1, nce: a, nco: b, quad: Some(quad), effect }));
                    }
                }
            }
        }
    }
    for a in others.iter().copied().combinations(q + 1) {
        let rest: Vec<usize> = others.iter().copied().filter(|i| !a.contains(i)).collect();
        for b in rest.iter().copied().combinations(q + 1) {
            *tested += 1;
            if passes(rule_r2_with(oracle, p, k, &a, &b, q))? {
                if let Some(effect) = estimate_subsets(cov, k, &a, &b, q)? {
                    return Ok(Some(Hit { rule: Rule::R2, nce: a, nco: b, quad: None, effect }));
                }
            }
        }
    }
    Ok(None)
}

fn search_gin<O: GinOracle + ?Sized>(
    oracle: &O,
    cov: &Covariance,
    k: usize,
    q: usize,
    tested: &mut usize,
) -> Result<Option<Hit>> {
    let p = cov.p();
    let others: Vec<usize> = (0..p).filter(|&i| i != k).collect();
    for a in others.iter().copied().combinations(q) {
        let rest: Vec<usize> = others.iter().copied().filter(|i| !a.contains(i)).collect();
        for b in rest.iter().copied().combinations(q) {
            *tested += 1;
            if passes(rule_r3_with(oracle, p, k, &a, &b))? {
                if let Some(effect) = estimate(cov, k, &a, &b)? {
                    return Ok(Some(Hit { rule: Rule::R3, nce: a, nco: b, quad: None, effect }));
                }
            }
        }
    }
    Ok(None)
}

fn treatment_report(cov: &Covariance, k: usize, hit: Option<Hit>, tested: usize, elapsed: Duration) -> TreatmentReport {
    let names = cov.names();
    let lookup = |idx: &[usize]| idx.iter().map(|&i| names[i].clone()).collect::<Vec<_>>();
    match hit {
        Some(hit) => TreatmentReport {
            treatment: k,
            name: names[k].clone(),
            status: Status::Found,
            rule: Some(hit.rule),
            nce_names: lookup(&hit.nce),
            nco_names: lookup(&hit.nco),
            nce: hit.nce,
            nco: hit.nco,
            quad_nc: hit.quad,
            effect: hit.effect,
            candidates_tested: tested,
            elapsed,
        },
        None => TreatmentReport {
            treatment: k,
            name: names[k].clone(),
            status: Status::Na,
            rule: None,
            nce: Vec::new(),
            nco: Vec::new(),
            nce_names: Vec::new(),
            nco_names: Vec::new(),
            quad_nc: None,
            effect: EffectEstimate::na(EstimatorKind::Extended, "no valid proxies found"),
            candidates_tested: tested,
            elapsed,
        },
    }
}

fn all_na(cov: &Covariance, method: Method, q: usize, alpha: f64, reason: &str) -> SelectionReport {
    let names = cov.names();
    SelectionReport {
        method,
        q,
        alpha,
        n: cov.n(),
        names: names.to_vec(),
        warnings: vec![reason.to_string()],
        treatments: (0..cov.p())
            .map(|k| {
                let mut t = treatment_report(cov, k, None, 0, Duration::ZERO);
                t.effect = EffectEstimate::na(EstimatorKind::Extended, reason);
                t
            })
            .collect(),
    }
}

/// Rank-based search with any rank oracle; `cov` feeds the estimator.
pub fn proxy_rank_with<O: RankOracle + ?Sized>(
    oracle: &O,
    cov: &Covariance,
    q: usize,
    alpha: f64,
) -> Result<SelectionReport> {
    require_q(q)?;
    let p = cov.p();
    if p < 2 * q + 2 {
        return Ok(all_na(cov, Method::Rank, q, alpha, "insufficient treatments"));
    }
    let treatments = (0..p)
        .into_par_iter()
        .map(|k| {
            let start = Instant::now();
            let mut tested = 0;
            let hit = search_rank(oracle, cov, k, q, &mut tested)?;
            Ok(treatment_report(cov, k, hit, tested, start.elapsed()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SelectionReport {
        method: Method::Rank,
        q,
        alpha,
        n: cov.n(),
        names: cov.names().to_vec(),
        warnings: Vec::new(),
        treatments,
    })
}

/// Rank-based proxy selection and estimation for every treatment.
pub fn proxy_rank(data: &Dataset, q: usize, alpha: f64) -> Result<SelectionReport> {
    let cov = data.covariance();
    proxy_rank_with(&RankTest { cov: &cov, alpha }, &cov, q, alpha)
}

/// GIN-based search with any GIN oracle.
pub fn proxy_gin_with<O: GinOracle + ?Sized>(
    oracle: &O,
    cov: &Covariance,
    q: usize,
    alpha: f64,
) -> Result<SelectionReport> {
    require_q(q)?;
    let p = cov.p();
    if p < 2 * q + 1 {
        return Ok(all_na(cov, Method::Gin, q, alpha, "insufficient treatments"));
    }
    let treatments = (0..p)
        .into_par_iter()
        .map(|k| {
            let start = Instant::now();
            let mut tested = 0;
            let hit = search_gin(oracle, cov, k, q, &mut tested)?;
            Ok(treatment_report(cov, k, hit, tested, start.elapsed()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SelectionReport {
        method: Method::Gin,
        q,
        alpha,
        n: cov.n(),
        names: cov.names().to_vec(),
        warnings: Vec::new(),
        treatments,
    })
}

/// GIN-based proxy selection with a custom HSIC configuration.
pub fn proxy_gin_config(data: &Dataset, q: usize, alpha: f64, cfg: HsicConfig) -> Result<SelectionReport> {
    if data.n() < MIN_GIN_SAMPLES {
        return Err(Error::InsufficientSamples(format!(
            "n = {} < {MIN_GIN_SAMPLES} required by the GIN search",
            data.n()
        )));
    }
    let cov = data.covariance();
    let oracle = GinTest {
        tester: GinTester::new(data, cfg),
        alpha,
    };
    let mut report = proxy_gin_with(&oracle, &cov, q, alpha)?;
    if let Some(warning) = gaussianity_warning(data) {
        report.warnings.push(warning);
    }
    Ok(report)
}

/// GIN-based proxy selection and estimation for every treatment.
pub fn proxy_gin(data: &Dataset, q: usize, alpha: f64) -> Result<SelectionReport> {
    proxy_gin_config(data, q, alpha, HsicConfig::default())
}

/// Jarque–Bera screen: warns when some column is indistinguishable from
/// Gaussian at the 1% level.
pub fn gaussianity_warning(data: &Dataset) -> Option<String> {
    let n = data.n() as f64;
    let chi2 = ChiSquared::new(2.0).expect("dof");
    let gaussian_like: Vec<&str> = data
        .values()
        .column_iter()
        .zip(data.names())
        .filter(|(col, _)| {
            let m2 = col.iter().map(|v| v * v).sum::<f64>() / n;
            if m2 <= 0.0 {
                return false;
            }
            let m3 = col.iter().map(|v| v.powi(3)).sum::<f64>() / n;
            let m4 = col.iter().map(|v| v.powi(4)).sum::<f64>() / n;
            let skew = m3 / m2.powf(1.5);
            let kurt = m4 / (m2 * m2);
            let jb = n / 6.0 * (skew * skew + (kurt - 3.0).powi(2) / 4.0);
            chi2.sf(jb) > 0.01
        })
        .map(|(_, name)| name.as_str())
        .collect();
    if gaussian_like.is_empty() {
        None
    } else {
        Some(format!(
            "non-Gaussianity assumption may be violated (Gaussian-looking columns: {})",
            gaussian_like.join(", ")
        ))
    }
}
