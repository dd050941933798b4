//! Effect estimators given proxy sets.
//!
//! Every estimator reads from a [`Covariance`], so the same code serves
//! sample data and exact population covariances.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{Covariance, Dataset};
use crate::error::{Error, Result};
use crate::rank::{cca_rank_test_cov, numeric_rank};

/// Relative determinant threshold below which a denominator counts as zero.
pub const DEGENERATE_DET: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimatorKind {
    Standard,
    Extended,
    Naive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate {
    /// `None` is NA.
    pub value: Option<f64>,
    pub method: EstimatorKind,
    pub nce: Vec<usize>,
    pub nco: Vec<usize>,
    pub denominator_det: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reason: Option<String>,
}

impl EffectEstimate {
    pub fn na(method: EstimatorKind, reason: impl Into<String>) -> Self {
        Self {
            value: None,
            method,
            nce: Vec::new(),
            nco: Vec::new(),
            denominator_det: 0.0,
            reason: Some(reason.into()),
        }
    }

    pub fn is_na(&self) -> bool {
        self.value.is_none()
    }
}

fn row_norm_product(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.norm()).product()
}

fn is_degenerate(det: f64, m: &DMatrix<f64>) -> bool {
    !det.is_finite() || det.abs() < DEGENERATE_DET * row_norm_product(m)
}

fn check_treatments(cov: &Covariance, k: usize, groups: &[&[usize]]) -> Result<()> {
    let p = cov.p();
    let mut seen = vec![false; p];
    for &i in std::iter::once(&k).chain(groups.iter().flat_map(|g| g.iter())) {
        if i >= p {
            return Err(Error::InvalidVarSet(format!(
                "index {i} is not a treatment (p = {p})"
            )));
        }
        if seen[i] {
            return Err(Error::InvalidVarSet(format!(
                "treatment, exposure and outcome proxies must be disjoint (index {i} repeats)"
            )));
        }
        seen[i] = true;
    }
    Ok(())
}

/// Single-proxy estimator from pairwise covariances:
/// `(s_xy s_wz - s_xw s_yz) / (s_xx s_wz - s_xw s_xz)`.
pub fn standard_proxy_estimate_cov(cov: &Covariance, k: usize, z: usize, w: usize) -> Result<EffectEstimate> {
    check_treatments(cov, k, &[&[z], &[w]])?;
    let y = cov.outcome();
    let s = |a: usize, b: usize| cov.get(a, b);
    let numerator = s(k, y) * s(w, z) - s(k, w) * s(y, z);
    let denominator = s(k, k) * s(w, z) - s(k, w) * s(k, z);
    let den_matrix = DMatrix::from_row_slice(2, 2, &[s(k, k), s(k, w), s(z, k), s(z, w)]);
    let mut est = EffectEstimate {
        value: None,
        method: EstimatorKind::Standard,
        nce: vec![z],
        nco: vec![w],
        denominator_det: denominator,
        reason: None,
    };
    if is_degenerate(denominator, &den_matrix) {
        est.reason = Some("degenerate denominator".into());
    } else {
        est.value = Some(numerator / denominator);
    }
    Ok(est)
}

pub fn standard_proxy_estimate(data: &Dataset, k: usize, z: usize, w: usize) -> Result<EffectEstimate> {
    standard_proxy_estimate_cov(&data.covariance(), k, z, w)
}

/// Determinant-ratio estimator
/// `det Σ_{{X_k} ∪ Z, {Y} ∪ W} / det Σ_{{X_k} ∪ Z, {X_k} ∪ W}`.
pub fn extended_proxy_estimate_cov(
    cov: &Covariance,
    k: usize,
    zs: &[usize],
    ws: &[usize],
) -> Result<EffectEstimate> {
    if zs.len() != ws.len() {
        return Err(Error::Precondition(format!(
            "|Z| = {} differs from |W| = {}",
            zs.len(),
            ws.len()
        )));
    }
    if zs.is_empty() {
        return Err(Error::Precondition("proxy sets must be nonempty".into()));
    }
    check_treatments(cov, k, &[zs, ws])?;
    let (numerator_m, denominator_m) = proxy_matrices(cov, k, zs, ws);
    let denominator = denominator_m.determinant();
    let mut est = EffectEstimate {
        value: None,
        method: EstimatorKind::Extended,
        nce: zs.to_vec(),
        nco: ws.to_vec(),
        denominator_det: denominator,
        reason: None,
    };
    if is_degenerate(denominator, &denominator_m) {
        est.reason = Some("degenerate denominator".into());
    } else {
        est.value = Some(numerator_m.determinant() / denominator);
    }
    Ok(est)
}

pub fn extended_proxy_estimate(data: &Dataset, k: usize, zs: &[usize], ws: &[usize]) -> Result<EffectEstimate> {
    extended_proxy_estimate_cov(&data.covariance(), k, zs, ws)
}

/// The two matrices of the determinant ratio: rows `X_k, Z...`, columns
/// `Y, W...` and `X_k, W...` respectively.
fn proxy_matrices(cov: &Covariance, k: usize, zs: &[usize], ws: &[usize]) -> (DMatrix<f64>, DMatrix<f64>) {
    let rows: Vec<usize> = std::iter::once(k).chain(zs.iter().copied()).collect();
    let num_cols: Vec<usize> = std::iter::once(cov.outcome()).chain(ws.iter().copied()).collect();
    let den_cols: Vec<usize> = std::iter::once(k).chain(ws.iter().copied()).collect();
    (cov.sub(&rows, &num_cols), cov.sub(&rows, &den_cols))
}

/// Simple regression slope of `Y` on `X_k` alone.
pub fn naive_ols_cov(cov: &Covariance, k: usize) -> Result<EffectEstimate> {
    check_treatments(cov, k, &[])?;
    if let Some(n) = cov.n() {
        if n <= 2 {
            return Err(Error::Precondition(format!("naive regression needs n > 2, got {n}")));
        }
    }
    let var = cov.get(k, k);
    if !(var > 0.0) {
        return Err(Error::Degenerate(format!("treatment {k} has zero variance")));
    }
    Ok(EffectEstimate {
        value: Some(cov.get(k, cov.outcome()) / var),
        method: EstimatorKind::Naive,
        nce: Vec::new(),
        nco: Vec::new(),
        denominator_det: var,
        reason: None,
    })
}

pub fn naive_ols(data: &Dataset, k: usize) -> Result<EffectEstimate> {
    naive_ols_cov(&data.covariance(), k)
}

/// Both determinant-ratio matrices must have full rank `q + 1`.
///
/// On a sample covariance this means the rank test rejects `rank <= q` for
/// both; on an exact covariance the numeric rank is used.
pub fn check_full_rank_preconditions_cov(
    cov: &Covariance,
    k: usize,
    zs: &[usize],
    ws: &[usize],
    alpha: f64,
) -> Result<bool> {
    if zs.len() != ws.len() || zs.is_empty() {
        return Err(Error::Precondition("need |Z| = |W| ≥ 1".into()));
    }
    check_treatments(cov, k, &[zs, ws])?;
    let q = zs.len();
    let rows: Vec<usize> = std::iter::once(k).chain(zs.iter().copied()).collect();
    let num_cols: Vec<usize> = std::iter::once(cov.outcome()).chain(ws.iter().copied()).collect();
    let den_cols: Vec<usize> = std::iter::once(k).chain(ws.iter().copied()).collect();
    for cols in [&num_cols, &den_cols] {
        let full = match cov.n() {
            Some(_) => match cca_rank_test_cov(cov, &rows, cols, q, alpha) {
                Ok(d) => !d.accepted,
                // collinear inputs cannot be full rank
                Err(Error::Degenerate(_)) => false,
                Err(e) => return Err(e),
            },
            None => numeric_rank(&cov.sub(&rows, cols), 1e-8)? == q + 1,
        };
        if !full {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn check_full_rank_preconditions(
    data: &Dataset,
    k: usize,
    zs: &[usize],
    ws: &[usize],
    alpha: f64,
) -> Result<bool> {
    check_full_rank_preconditions_cov(&data.covariance(), k, zs, ws, alpha)
}
