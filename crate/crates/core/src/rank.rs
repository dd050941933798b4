//! Rank hypotheses on cross-covariance submatrices.
//!
//! The statistical test is Anderson's canonical-correlation rank test with
//! the Bartlett–Lawley correction. `numeric_rank` is the exact counterpart
//! used on population covariances.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::data::{Covariance, Dataset};
use crate::error::{Error, Result};

/// Largest canonical correlation admitted before taking `ln(1 - rho^2)`.
const RHO_CLAMP: f64 = 1.0 - 1e-12;

/// Outcome of testing `rank(Σ_{A,B}) <= r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankDecision {
    pub tested_rank: usize,
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// `true` when "rank <= r" is not rejected.
    pub accepted: bool,
}

/// Sample canonical correlations between the `a` and `b` columns, descending.
///
/// Sets may share variables; a shared variable contributes a canonical
/// correlation of one.
pub fn canonical_correlations(cov: &Covariance, a: &[usize], b: &[usize]) -> Result<Vec<f64>> {
    cov.check_indices(a)?;
    cov.check_indices(b)?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidVarSet("empty set".into()));
    }
    let saa = cov.sub(a, a);
    let sbb = cov.sub(b, b);
    let sab = cov.sub(a, b);
    let la = whitening_factor(saa, "row set")?;
    let lb = whitening_factor(sbb, "column set")?;
    // L_a^{-1} Σ_ab L_b^{-T}
    let left = la
        .solve_lower_triangular(&sab)
        .ok_or_else(|| Error::Degenerate("row set covariance is singular".into()))?;
    let whitened = lb
        .solve_lower_triangular(&left.transpose())
        .ok_or_else(|| Error::Degenerate("column set covariance is singular".into()))?
        .transpose();
    let mut rho: Vec<f64> = whitened.singular_values().iter().copied().collect();
    rho.sort_by(|x, y| y.total_cmp(x));
    Ok(rho)
}

fn whitening_factor(s: DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let max_diag = s.diagonal().max();
    if !(max_diag > 0.0) {
        return Err(Error::Degenerate(format!("{what} has zero variance")));
    }
    let chol = s
        .cholesky()
        .ok_or_else(|| Error::Degenerate(format!("{what} covariance is not positive definite")))?;
    let l = chol.unpack();
    let min_pivot = l.diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v * v));
    if min_pivot < 1e-12 * max_diag {
        return Err(Error::Degenerate(format!("{what} has collinear columns")));
    }
    Ok(l)
}

/// Tests `rank(Σ_{A,B}) <= r` on a sample covariance.
pub fn cca_rank_test_cov(
    cov: &Covariance,
    a: &[usize],
    b: &[usize],
    r: usize,
    alpha: f64,
) -> Result<RankDecision> {
    let n = cov
        .n()
        .ok_or_else(|| Error::Precondition("rank test needs a sample covariance".into()))?;
    let m = a.len().min(b.len());
    if r >= m {
        return Err(Error::RankOutOfRange { r, max: m });
    }
    if n <= a.len() + b.len() + 2 {
        return Err(Error::Precondition(format!(
            "rank test needs n > |A| + |B| + 2, got n = {n}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Precondition(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let rho = canonical_correlations(cov, a, b)?;
    let factor = n as f64 - (a.len() + b.len() + 3) as f64 / 2.0;
    let statistic = -factor
        * rho[r..]
            .iter()
            .map(|&x| {
                let x = x.clamp(0.0, RHO_CLAMP);
                (1.0 - x * x).ln()
            })
            .sum::<f64>();
    let dof = (a.len() - r) * (b.len() - r);
    let chi2 = ChiSquared::new(dof as f64).expect("positive dof");
    let p_value = chi2.sf(statistic.max(0.0)).clamp(0.0, 1.0);
    Ok(RankDecision {
        tested_rank: r,
        statistic,
        dof,
        p_value,
        accepted: p_value > alpha,
    })
}

/// Tests `rank(Σ_{A,B}) <= r` on the sample covariance of `data`.
pub fn cca_rank_test(
    data: &Dataset,
    a: &[usize],
    b: &[usize],
    r: usize,
    alpha: f64,
) -> Result<RankDecision> {
    cca_rank_test_cov(&data.covariance(), a, b, r, alpha)
}

/// Number of singular values above `tol` times the largest one.
pub fn numeric_rank(m: &DMatrix<f64>, tol: f64) -> Result<usize> {
    if m.is_empty() {
        return Err(Error::Precondition("empty matrix".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Precondition(format!("tol must be > 0, got {tol}")));
    }
    let sv = m.singular_values();
    let largest = sv.max();
    if largest == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > tol * largest).count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn numeric_rank_basics() {
        assert_eq!(numeric_rank(&DMatrix::identity(3, 3), 1e-8).unwrap(), 3);
        let u = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let v = DVector::from_vec(vec![3.0, 1.0, 4.0, -1.0]);
        assert_eq!(numeric_rank(&(&u * v.transpose()), 1e-8).unwrap(), 1);
        assert_eq!(numeric_rank(&DMatrix::zeros(2, 2), 1e-8).unwrap(), 0);
        assert!(numeric_rank(&DMatrix::<f64>::zeros(0, 0), 1e-8).is_err());
    }

    fn cov(m: DMatrix<f64>, n: usize) -> Covariance {
        let names = (0..m.nrows()).map(|i| format!("V{i}")).collect();
        Covariance::with_sample_size(m, names, n).unwrap()
    }

    #[test]
    fn independent_blocks_have_zero_correlation() {
        let c = cov(DMatrix::identity(4, 4), 100);
        let rho = canonical_correlations(&c, &[0, 1], &[2, 3]).unwrap();
        assert!(rho.iter().all(|r| r.abs() < 1e-12));
        let d = cca_rank_test_cov(&c, &[0, 1], &[2, 3], 0, 0.05).unwrap();
        assert!(d.accepted);
        assert_eq!(d.dof, 4);
        assert!((d.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shared_variable_gives_unit_correlation() {
        let mut m = DMatrix::identity(3, 3);
        m[(0, 1)] = 0.3;
        m[(1, 0)] = 0.3;
        let c = cov(m, 500);
        let rho = canonical_correlations(&c, &[0, 1], &[0, 2]).unwrap();
        assert!((rho[0] - 1.0).abs() < 1e-12);
        // The shared direction is absorbed by r = 1.
        let d = cca_rank_test_cov(&c, &[0, 1], &[0, 2], 1, 0.05).unwrap();
        assert!(d.accepted);
        // but not by r = 0
        let d0 = cca_rank_test_cov(&c, &[0, 1], &[0, 2], 0, 0.05).unwrap();
        assert!(!d0.accepted);
        assert!(d0.statistic.is_finite());
    }

    #[test]
    fn collinear_rows_are_degenerate() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.2, 1.0, 1.0, 0.2, 0.2, 0.2, 1.0]);
        let c = cov(m, 100);
        let err = cca_rank_test_cov(&c, &[0, 1], &[2], 0, 0.05).unwrap_err();
        assert!(err.to_string().contains("degenerate input"));
    }

    #[test]
    fn rank_and_sample_size_preconditions() {
        let c = cov(DMatrix::identity(4, 4), 100);
        assert!(matches!(
            cca_rank_test_cov(&c, &[0, 1], &[2, 3], 2, 0.05),
            Err(Error::RankOutOfRange { .. })
        ));
        let small = cov(DMatrix::identity(4, 4), 6);
        assert!(cca_rank_test_cov(&small, &[0, 1], &[2, 3], 0, 0.05).is_err());
        let population =
            Covariance::population(DMatrix::identity(4, 4), (0..4).map(|i| i.to_string()).collect()).unwrap();
        assert!(cca_rank_test_cov(&population, &[0], &[1], 0, 0.05).is_err());
    }
}
