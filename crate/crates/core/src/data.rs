//! Observational data and the covariance views every test and estimator reads from.
//!
//! Column layout is fixed throughout the crate: treatments `X_1..X_p` occupy
//! columns `0..p`, and the outcome `Y` is column `p`.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Centered `n x (p+1)` observation matrix over treatments and outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: DMatrix<f64>,
    names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset, centering every column. The last column is the outcome.
    pub fn new(mut values: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        let (n, cols) = values.shape();
        if cols < 2 {
            return Err(Error::InvalidDataset("need ≥ 2 variables".into()));
        }
        if n < 2 {
            return Err(Error::InvalidDataset(format!("need n ≥ 2 rows, got {n}")));
        }
        if names.len() != cols {
            return Err(Error::InvalidDataset(format!(
                "{} names for {} columns",
                names.len(),
                cols
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            // column-major storage
            let (row, col) = (pos % n, pos / n);
            return Err(Error::InvalidDataset(format!(
                "non-finite value in row {} column {}",
                row + 1,
                names[col]
            )));
        }
        for mut col in values.column_iter_mut() {
            let mean = col.iter().sum::<f64>() / n as f64;
            col.iter_mut().for_each(|v| *v -= mean);
        }
        Ok(Self { values, names })
    }

    /// Default column labels `X1..Xp, Y`.
    pub fn default_names(p: usize) -> Vec<String> {
        (1..=p)
            .map(|i| format!("X{i}"))
            .chain(std::iter::once("Y".to_string()))
            .collect()
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// Number of treatments.
    pub fn p(&self) -> usize {
        self.values.ncols() - 1
    }

    /// Column index of the outcome.
    pub fn outcome(&self) -> usize {
        self.p()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Sample covariance with divisor `n`.
    pub fn covariance(&self) -> Covariance {
        let n = self.n() as f64;
        let mut matrix = self.values.tr_mul(&self.values) / n;
        matrix = (&matrix + matrix.transpose()) * 0.5;
        Covariance {
            matrix,
            names: self.names.clone(),
            n: Some(self.n()),
        }
    }

    /// Copies the listed columns into an `n x |cols|` matrix.
    pub fn columns(&self, cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(self.n(), cols.len(), |i, j| self.values[(i, cols[j])])
    }
}

/// A covariance matrix over `X_1..X_p, Y`, either estimated from a sample
/// (with its sample size) or exact (population oracle mode).
#[derive(Debug, Clone, PartialEq)]
pub struct Covariance {
    matrix: DMatrix<f64>,
    names: Vec<String>,
    n: Option<usize>,
}

impl Covariance {
    /// Exact covariance; statistical tests are unavailable on it.
    pub fn population(matrix: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        Self::checked(matrix, names, None)
    }

    /// A covariance treated as if estimated from `n` observations.
    pub fn with_sample_size(matrix: DMatrix<f64>, names: Vec<String>, n: usize) -> Result<Self> {
        Self::checked(matrix, names, Some(n))
    }

    fn checked(matrix: DMatrix<f64>, names: Vec<String>, n: Option<usize>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() < 2 {
            return Err(Error::InvalidDataset(
                "covariance must be square with at least 2 variables".into(),
            ));
        }
        if names.len() != matrix.nrows() {
            return Err(Error::InvalidDataset("name count does not match covariance".into()));
        }
        Ok(Self { matrix, names, n })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Sample size, or `None` for an exact covariance.
    pub fn n(&self) -> Option<usize> {
        self.n
    }

    pub fn p(&self) -> usize {
        self.matrix.nrows() - 1
    }

    pub fn outcome(&self) -> usize {
        self.p()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    /// Cross-covariance `Σ_{rows, cols}`. Indices may repeat or overlap.
    pub fn sub(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| self.matrix[(rows[i], cols[j])])
    }

    pub fn check_indices(&self, idx: &[usize]) -> Result<()> {
        let dim = self.matrix.nrows();
        match idx.iter().find(|&&i| i >= dim) {
            Some(i) => Err(Error::InvalidVarSet(format!(
                "index {i} out of range for {dim} variables"
            ))),
            None => Ok(()),
        }
    }
}

/// An ordered, duplicate-free list of column indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VarSet(Vec<usize>);

impl VarSet {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidVarSet("empty set".into()));
        }
        let mut sorted = indices.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidVarSet(format!("duplicate index in {indices:?}")));
        }
        Ok(Self(indices))
    }

    /// Validates against a variable count as well.
    pub fn within(indices: Vec<usize>, dim: usize) -> Result<Self> {
        let set = Self::new(indices)?;
        if let Some(i) = set.0.iter().find(|&&i| i >= dim) {
            return Err(Error::InvalidVarSet(format!(
                "index {i} out of range for {dim} variables"
            )));
        }
        Ok(set)
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.contains(&i)
    }

    pub fn is_disjoint(&self, other: &VarSet) -> bool {
        !self.0.iter().any(|i| other.contains(*i))
    }
}

impl std::ops::Deref for VarSet {
    type Target = [usize];

    fn deref(&self) -> &[usize] {
        &self.0
    }
}

impl fmt::Display for VarSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// `(1/n) Σ_rows A_i B_j` for the listed columns of a centered dataset.
pub fn cross_cov(data: &Dataset, a: &[usize], b: &[usize]) -> Result<DMatrix<f64>> {
    let dim = data.p() + 1;
    for &i in a.iter().chain(b) {
        if i >= dim {
            return Err(Error::InvalidVarSet(format!(
                "index {i} out of range for {dim} variables"
            )));
        }
    }
    let n = data.n() as f64;
    let v = data.values();
    Ok(DMatrix::from_fn(a.len(), b.len(), |i, j| {
        v.column(a[i]).dot(&v.column(b[j])) / n
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        let values = DMatrix::from_row_slice(4, 3, &[1.0, 2.0, 0.5, 2.0, 1.0, 1.5, 3.0, 5.0, 2.5, 6.0, 0.0, 3.5]);
        Dataset::new(values, Dataset::default_names(2)).unwrap()
    }

    #[test]
    fn columns_are_centered() {
        let d = toy();
        for col in d.values().column_iter() {
            assert!(col.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn two_rows_is_enough() {
        let values = DMatrix::from_row_slice(2, 2, &[1.0, 4.0, 3.0, -2.0]);
        let d = Dataset::new(values, Dataset::default_names(1)).unwrap();
        assert_eq!(d.n(), 2);
        assert!(d.values().column(0).sum().abs() < 1e-12);
        assert!(d.values().column(1).sum().abs() < 1e-12);
    }

    #[test]
    fn rejects_single_column_and_non_finite() {
        let one = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0]);
        let err = Dataset::new(one, vec!["Y".into()]).unwrap_err();
        assert!(err.to_string().contains("need ≥ 2 variables"));

        let bad = DMatrix::from_row_slice(2, 2, &[1.0, f64::NAN, 3.0, 4.0]);
        assert!(Dataset::new(bad, Dataset::default_names(1)).is_err());
    }

    #[test]
    fn cross_cov_diagonal_is_variance() {
        let d = toy();
        let m = cross_cov(&d, &[0], &[0]).unwrap();
        let col = d.values().column(0);
        let var = col.dot(&col) / d.n() as f64;
        assert!((m[(0, 0)] - var).abs() < 1e-15);
    }

    #[test]
    fn cross_cov_repeats_duplicated_rows() {
        let d = toy();
        let m = cross_cov(&d, &[1, 1, 0], &[2]).unwrap();
        assert_eq!(m[(0, 0)], m[(1, 0)]);
        let c = d.covariance();
        assert!((c.get(1, 2) - m[(0, 0)]).abs() < 1e-14);
        assert!((c.get(0, 2) - m[(2, 0)]).abs() < 1e-14);
    }

    #[test]
    fn varset_validation() {
        assert!(VarSet::new(vec![]).is_err());
        assert!(VarSet::new(vec![1, 1]).is_err());
        assert!(VarSet::within(vec![0, 5], 3).is_err());
        let s = VarSet::within(vec![2, 0], 3).unwrap();
        assert_eq!(s.indices(), &[2, 0]);
        assert!(s.is_disjoint(&VarSet::new(vec![1]).unwrap()));
    }
}
