//! GIN condition: `(Z, Y)` satisfies it when `omega' Y` is independent of
//! `Z` for the `omega` annihilating `E[Y Z']`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{Covariance, Dataset};
use crate::error::{Error, Result};
use crate::hsic::{hsic_from_kernels, CenteredKernel, HsicConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GinResult {
    pub omega: Vec<f64>,
    pub hsic_statistic: f64,
    pub p_value: f64,
    /// `true` when independence is not rejected.
    pub holds: bool,
}

/// Unit left null vector of `Σ_{Y,Z}` for `|Y| = |Z| + 1`, first nonzero
/// entry positive.
pub fn estimate_omega_cov(cov: &Covariance, ys: &[usize], zs: &[usize]) -> Result<DVector<f64>> {
    cov.check_indices(ys)?;
    cov.check_indices(zs)?;
    if zs.is_empty() || ys.len() != zs.len() + 1 {
        return Err(Error::Precondition(format!(
            "GIN needs |Y| = |Z| + 1, got |Y| = {}, |Z| = {}",
            ys.len(),
            zs.len()
        )));
    }
    let s = cov.sub(ys, zs);
    let sv = s.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    if !(smax > 0.0) || smin < 1e-10 * smax {
        return Err(Error::Degenerate(
            "cross-covariance null space has dimension > 1".into(),
        ));
    }
    // Pad to square so the SVD yields a full left basis.
    let m = ys.len();
    let mut padded = DMatrix::zeros(m, m);
    padded.view_mut((0, 0), (m, zs.len())).copy_from(&s);
    let svd = padded.svd(true, false);
    let u = svd.u.expect("requested U");
    let (col, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty");
    let mut omega: DVector<f64> = u.column(col).into_owned();
    omega /= omega.norm();
    if let Some(first) = omega.iter().find(|v| v.abs() > 1e-12) {
        if *first < 0.0 {
            omega = -omega;
        }
    }
    Ok(omega)
}

pub fn estimate_omega(data: &Dataset, ys: &[usize], zs: &[usize]) -> Result<DVector<f64>> {
    estimate_omega_cov(&data.covariance(), ys, zs)
}

/// Reusable GIN tester over one dataset.
///
/// Kernels depend only on the rows used and the conditioning columns, so
/// callers that test many pairs can share a `GinTester`.
pub struct GinTester<'a> {
    data: &'a Dataset,
    cov: Covariance,
    cfg: HsicConfig,
    rows: Vec<usize>,
}

impl<'a> GinTester<'a> {
    pub fn new(data: &'a Dataset, cfg: HsicConfig) -> Self {
        let rows = cfg.rows_for(data.n());
        Self {
            data,
            cov: data.covariance(),
            cfg,
            rows,
        }
    }

    pub fn config(&self) -> &HsicConfig {
        &self.cfg
    }

    /// Centered kernel over the `Z` columns.
    pub fn kernel(&self, zs: &[usize]) -> Result<CenteredKernel> {
        CenteredKernel::new(&self.data.columns(zs), &self.rows, &self.cfg)
    }

    pub fn test(&self, zs: &[usize], ys: &[usize], alpha: f64) -> Result<GinResult> {
        let kz = self.kernel(zs)?;
        self.test_with_kernel(&kz, zs, ys, alpha)
    }

    /// Same as [`test`](Self::test) with a precomputed kernel for `zs`.
    pub fn test_with_kernel(
        &self,
        kz: &CenteredKernel,
        zs: &[usize],
        ys: &[usize],
        alpha: f64,
    ) -> Result<GinResult> {
        let omega = estimate_omega_cov(&self.cov, ys, zs)?;
        let y = self.data.columns(ys);
        let residual = &y * &omega;
        let ku = CenteredKernel::new(&DMatrix::from_column_slice(residual.len(), 1, residual.as_slice()), &self.rows, &self.cfg)?;
        let out = hsic_from_kernels(&ku, kz, &self.cfg)?;
        Ok(GinResult {
            omega: omega.iter().copied().collect(),
            hsic_statistic: out.statistic,
            p_value: out.p_value,
            holds: out.p_value > alpha,
        })
    }
}

/// Tests whether `(Z, Y)` satisfies the GIN condition at level `alpha`.
pub fn gin_holds(data: &Dataset, zs: &[usize], ys: &[usize], alpha: f64) -> Result<GinResult> {
    GinTester::new(data, HsicConfig::default()).test(zs, ys, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_linear_relation() {
        // Y = 2 X exactly
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 2.0, 4.0, 0.0, 0.0, 0.0, 1.0]);
        let cov = Covariance::population(m, vec!["X".into(), "Y".into(), "V".into()]).unwrap();
        let omega = estimate_omega_cov(&cov, &[0, 1], &[0]).unwrap();
        let s5 = 5f64.sqrt();
        assert!((omega[0] - 2.0 / s5).abs() < 1e-12);
        assert!((omega[1] + 1.0 / s5).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let cov = Covariance::population(DMatrix::identity(3, 3), vec!["a".into(), "b".into(), "c".into()]).unwrap();
        assert!(matches!(
            estimate_omega_cov(&cov, &[0, 1, 2], &[0]),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn two_dimensional_null_space_is_degenerate() {
        // Σ_{Y,Z} = 0 column: every vector annihilates it
        let cov = Covariance::population(DMatrix::identity(3, 3), vec!["a".into(), "b".into(), "c".into()]).unwrap();
        assert!(matches!(
            estimate_omega_cov(&cov, &[0, 1], &[2]),
            Err(Error::Degenerate(_))
        ));
    }
}
