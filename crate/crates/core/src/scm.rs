//! Linear acyclic causal models with latent confounders.
//!
//! The generating process is
//!
//! ```text
//! X = B X + C U + e_X
//! Y = beta' X + delta' U + e_Y
//! ```
//!
//! with `B` acyclic. Besides sampling, the model exposes its exact covariance
//! and total effects so that tests can compare estimates against ground truth.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Covariance, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Gaussian,
    Exponential,
    Uniform,
}

/// Distribution of one exogenous term. `scale` is the standard deviation for
/// Gaussian noise, the mean (`1/rate`) for exponential noise, and the
/// half-width for uniform noise. Draws are always centered.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub scale: f64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidModel(format!("noise scale must be > 0, got {scale}")));
        }
        Ok(Self { kind, scale })
    }

    pub fn standard(kind: NoiseKind) -> Self {
        Self { kind, scale: 1.0 }
    }

    pub fn variance(&self) -> f64 {
        match self.kind {
            NoiseKind::Gaussian | NoiseKind::Exponential => self.scale * self.scale,
            NoiseKind::Uniform => self.scale * self.scale / 3.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            NoiseKind::Gaussian => {
                let z: f64 = StandardNormal.sample(rng);
                self.scale * z
            }
            NoiseKind::Exponential => {
                let e: f64 = Exp::new(1.0).expect("unit rate").sample(rng);
                self.scale * (e - 1.0)
            }
            NoiseKind::Uniform => rng.random_range(-self.scale..=self.scale),
        }
    }
}

/// Raw parts of a model, validated by [`LinearScm::new`].
#[derive(Debug, Clone)]
pub struct ScmParts {
    /// `p x p`; entry `(i, j)` is the coefficient of `X_j -> X_i`.
    pub b: DMatrix<f64>,
    /// `p x q`; entry `(i, l)` is the coefficient of `U_l -> X_i`.
    pub c: DMatrix<f64>,
    pub beta: DVector<f64>,
    pub delta: DVector<f64>,
    pub noise_x: Vec<NoiseSpec>,
    pub noise_u: Vec<NoiseSpec>,
    pub noise_y: NoiseSpec,
    pub order: Vec<usize>,
    /// Treatment labels; defaults to `X1..Xp` when empty.
    pub names: Vec<String>,
    /// Permit zero entries in `C` and `delta`.
    pub relaxed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearScm {
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    beta: DVector<f64>,
    delta: DVector<f64>,
    noise_x: Vec<NoiseSpec>,
    noise_u: Vec<NoiseSpec>,
    noise_y: NoiseSpec,
    order: Vec<usize>,
    names: Vec<String>,
    relaxed: bool,
}

impl LinearScm {
    pub fn new(parts: ScmParts) -> Result<Self> {
        let ScmParts {
            b,
            c,
            beta,
            delta,
            noise_x,
            noise_u,
            noise_y,
            order,
            mut names,
            relaxed,
        } = parts;
        let p = b.nrows();
        let q = c.ncols();
        if p == 0 {
            return Err(Error::InvalidModel("need at least one treatment".into()));
        }
        if b.ncols() != p || c.nrows() != p || beta.len() != p || delta.len() != q {
            return Err(Error::InvalidModel("coefficient dimensions disagree".into()));
        }
        if noise_x.len() != p || noise_u.len() != q {
            return Err(Error::InvalidModel("noise spec count disagrees with p or q".into()));
        }
        for spec in noise_x.iter().chain(&noise_u).chain(std::iter::once(&noise_y)) {
            NoiseSpec::new(spec.kind, spec.scale)?;
        }
        let all = b.iter().chain(c.iter()).chain(beta.iter()).chain(delta.iter());
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("non-finite coefficient".into()));
        }
        let mut seen = vec![false; p];
        for &i in &order {
            if i >= p || seen[i] {
                return Err(Error::InvalidModel(format!("order {order:?} is not a permutation")));
            }
            seen[i] = true;
        }
        if order.len() != p {
            return Err(Error::InvalidModel(format!("order {order:?} is not a permutation")));
        }
        let mut position = vec![0; p];
        for (pos, &i) in order.iter().enumerate() {
            position[i] = pos;
        }
        for i in 0..p {
            for j in 0..p {
                if b[(i, j)] != 0.0 && position[j] >= position[i] {
                    return Err(Error::InvalidModel(format!(
                        "edge X{} -> X{} contradicts the topological order",
                        j + 1,
                        i + 1
                    )));
                }
            }
        }
        if !relaxed {
            if c.iter().any(|&v| v == 0.0) {
                return Err(Error::InvalidModel("all entries of C must be nonzero".into()));
            }
            if delta.iter().any(|&v| v == 0.0) {
                return Err(Error::InvalidModel("all entries of delta must be nonzero".into()));
            }
        }
        if names.is_empty() {
            names = (1..=p).map(|i| format!("X{i}")).collect();
        }
        if names.len() != p {
            return Err(Error::InvalidModel("treatment name count disagrees with p".into()));
        }
        Ok(Self {
            b,
            c,
            beta,
            delta,
            noise_x,
            noise_u,
            noise_y,
            order,
            names,
            relaxed,
        })
    }

    pub fn p(&self) -> usize {
        self.b.nrows()
    }

    pub fn q(&self) -> usize {
        self.c.ncols()
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn beta(&self) -> &DVector<f64> {
        &self.beta
    }

    pub fn delta(&self) -> &DVector<f64> {
        &self.delta
    }

    pub fn noise_x(&self) -> &[NoiseSpec] {
        &self.noise_x
    }

    pub fn noise_u(&self) -> &[NoiseSpec] {
        &self.noise_u
    }

    pub fn noise_y(&self) -> NoiseSpec {
        self.noise_y
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn is_relaxed(&self) -> bool {
        self.relaxed
    }

    pub fn treatment_names(&self) -> &[String] {
        &self.names
    }

    /// Column labels of sampled data: treatments then `Y`.
    pub fn column_names(&self) -> Vec<String> {
        let mut names = self.names.clone();
        names.push("Y".into());
        names
    }

    /// Draws `n` i.i.d. rows and centers them. Deterministic in `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        self.sample_with_latents(n, seed).map(|(data, _)| data)
    }

    /// Like [`sample`](Self::sample) but also returns the (uncentered) latent
    /// draws, `n x q`. Intended for oracle checks only.
    pub fn sample_with_latents(&self, n: usize, seed: u64) -> Result<(Dataset, DMatrix<f64>)> {
        if n < 2 {
            return Err(Error::InvalidDataset(format!("need n ≥ 2 rows, got {n}")));
        }
        let (p, q) = (self.p(), self.q());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = DMatrix::zeros(n, p + 1);
        let mut latents = DMatrix::zeros(n, q);
        let mut x = vec![0.0; p];
        let mut u = vec![0.0; q];
        for row in 0..n {
            for (l, spec) in self.noise_u.iter().enumerate() {
                u[l] = spec.sample(&mut rng);
                latents[(row, l)] = u[l];
            }
            for &i in &self.order {
                let mut v = self.noise_x[i].sample(&mut rng);
                for j in 0..p {
                    let coef = self.b[(i, j)];
                    if coef != 0.0 {
                        v += coef * x[j];
                    }
                }
                for l in 0..q {
                    v += self.c[(i, l)] * u[l];
                }
                if !v.is_finite() {
                    return Err(Error::NonFinite { variable: self.names[i].clone() });
                }
                x[i] = v;
            }
            let mut y = self.noise_y.sample(&mut rng);
            for i in 0..p {
                y += self.beta[i] * x[i];
            }
            for l in 0..q {
                y += self.delta[l] * u[l];
            }
            if !y.is_finite() {
                return Err(Error::NonFinite { variable: "Y".into() });
            }
            for i in 0..p {
                values[(row, i)] = x[i];
            }
            values[(row, p)] = y;
        }
        Ok((Dataset::new(values, self.column_names())?, latents))
    }

    /// Exact map from exogenous terms to observed variables.
    ///
    /// Rows are `X_1..X_p, Y`; columns are the exogenous terms in the order
    /// `U_1..U_q, e_X1..e_Xp, e_Y`. The second value holds their variances.
    pub fn mixing_matrix(&self) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let (p, q) = (self.p(), self.q());
        let i_minus_b = DMatrix::identity(p, p) - &self.b;
        let inv = i_minus_b.try_inverse().ok_or(Error::SingularModel)?;
        let mut m = DMatrix::zeros(p + 1, q + p + 1);
        let ac = &inv * &self.c;
        m.view_mut((0, 0), (p, q)).copy_from(&ac);
        m.view_mut((0, q), (p, p)).copy_from(&inv);
        let y_u = ac.tr_mul(&self.beta) + &self.delta;
        let y_x = inv.tr_mul(&self.beta);
        for l in 0..q {
            m[(p, l)] = y_u[l];
        }
        for i in 0..p {
            m[(p, q + i)] = y_x[i];
        }
        m[(p, q + p)] = 1.0;
        let vars = DVector::from_iterator(
            q + p + 1,
            self.noise_u
                .iter()
                .chain(&self.noise_x)
                .chain(std::iter::once(&self.noise_y))
                .map(NoiseSpec::variance),
        );
        Ok((m, vars))
    }

    /// Exact `(p+1) x (p+1)` covariance of `X_1..X_p, Y`.
    pub fn population_covariance(&self) -> Result<DMatrix<f64>> {
        let (m, vars) = self.mixing_matrix()?;
        let scaled = &m * DMatrix::from_diagonal(&vars);
        let sigma = scaled * m.transpose();
        Ok((&sigma + sigma.transpose()) * 0.5)
    }

    /// Population covariance wrapped for the oracle-mode entry points.
    pub fn covariance_oracle(&self) -> Result<Covariance> {
        Covariance::population(self.population_covariance()?, self.column_names())
    }

    /// Total causal effect of treatment `k` (0-based) on `Y`.
    pub fn total_effect(&self, k: usize) -> Result<f64> {
        let p = self.p();
        if k >= p {
            return Err(Error::InvalidModel(format!("treatment index {k} out of range for p = {p}")));
        }
        // effect[i] = beta_i + sum over children j of B[j,i] * effect[j]
        let mut effect = vec![0.0; p];
        for &i in self.order.iter().rev() {
            let mut e = self.beta[i];
            for j in 0..p {
                let coef = self.b[(j, i)];
                if coef != 0.0 {
                    e += coef * effect[j];
                }
            }
            effect[i] = e;
        }
        Ok(effect[k])
    }

    /// Total effects of all treatments.
    pub fn total_effects(&self) -> Vec<f64> {
        (0..self.p())
            .map(|k| self.total_effect(k).expect("index in range"))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ScmJson::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: ScmJson = serde_json::from_str(text)?;
        raw.try_into()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct NoiseJson {
    x: Vec<NoiseSpec>,
    u: Vec<NoiseSpec>,
    y: NoiseSpec,
}

/// On-disk form. Matrices are nested row-major arrays.
#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct ScmJson {
    p: usize,
    q: usize,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
    beta: Vec<f64>,
    delta: Vec<f64>,
    noise: NoiseJson,
    order: Vec<usize>,
    #[serde(default)]
    names: Vec<String>,
    #[serde(default)]
    relaxed: bool,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix_from_rows(rows: &[Vec<f64>], nrows: usize, ncols: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidModel(format!("{what} must be {nrows} x {ncols}")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

impl From<&LinearScm> for ScmJson {
    fn from(scm: &LinearScm) -> Self {
        Self {
            p: scm.p(),
            q: scm.q(),
            b: rows_of(&scm.b),
            c: rows_of(&scm.c),
            beta: scm.beta.iter().copied().collect(),
            delta: scm.delta.iter().copied().collect(),
            noise: NoiseJson {
                x: scm.noise_x.clone(),
                u: scm.noise_u.clone(),
                y: scm.noise_y,
            },
            order: scm.order.clone(),
            names: scm.names.clone(),
            relaxed: scm.relaxed,
        }
    }
}

impl TryFrom<ScmJson> for LinearScm {
    type Error = Error;

    fn try_from(raw: ScmJson) -> Result<Self> {
        let (p, q) = (raw.p, raw.q);
        LinearScm::new(ScmParts {
            b: matrix_from_rows(&raw.b, p, p, "B")?,
            c: matrix_from_rows(&raw.c, p, q, "C")?,
            beta: DVector::from_vec(raw.beta),
            delta: DVector::from_vec(raw.delta),
            noise_x: raw.noise.x,
            noise_u: raw.noise.u,
            noise_y: raw.noise.y,
            order: raw.order,
            names: raw.names,
            relaxed: raw.relaxed,
        })
    }
}

/// Incremental construction by named edges; the topological order is derived.
#[derive(Debug, Clone)]
pub struct ScmBuilder {
    names: Vec<String>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    beta: DVector<f64>,
    delta: DVector<f64>,
    noise_x: Vec<NoiseSpec>,
    noise_u: Vec<NoiseSpec>,
    noise_y: NoiseSpec,
    relaxed: bool,
}

impl ScmBuilder {
    pub fn new<S: AsRef<str>>(names: &[S], q: usize) -> Self {
        let p = names.len();
        Self {
            names: names.iter().map(|s| s.as_ref().to_string()).collect(),
            b: DMatrix::zeros(p, p),
            c: DMatrix::zeros(p, q),
            beta: DVector::zeros(p),
            delta: DVector::zeros(q),
            noise_x: vec![NoiseSpec::standard(NoiseKind::Gaussian); p],
            noise_u: vec![NoiseSpec::standard(NoiseKind::Gaussian); q],
            noise_y: NoiseSpec::standard(NoiseKind::Gaussian),
            relaxed: false,
        }
    }

    /// `X_from -> X_to`.
    pub fn edge(mut self, from: usize, to: usize, coef: f64) -> Self {
        self.b[(to, from)] = coef;
        self
    }

    /// `U_u -> X_x`.
    pub fn confounds(mut self, u: usize, x: usize, coef: f64) -> Self {
        self.c[(x, u)] = coef;
        self
    }

    /// `X_x -> Y`.
    pub fn effect(mut self, x: usize, coef: f64) -> Self {
        self.beta[x] = coef;
        self
    }

    /// `U_u -> Y`.
    pub fn outcome_confounder(mut self, u: usize, coef: f64) -> Self {
        self.delta[u] = coef;
        self
    }

    pub fn noise_x(mut self, x: usize, spec: NoiseSpec) -> Self {
        self.noise_x[x] = spec;
        self
    }

    pub fn noise_u(mut self, u: usize, spec: NoiseSpec) -> Self {
        self.noise_u[u] = spec;
        self
    }

    pub fn noise_y(mut self, spec: NoiseSpec) -> Self {
        self.noise_y = spec;
        self
    }

    /// Same noise family (unit scale) for every exogenous term.
    pub fn all_noise(mut self, kind: NoiseKind) -> Self {
        let spec = NoiseSpec::standard(kind);
        self.noise_x.iter_mut().for_each(|s| *s = spec);
        self.noise_u.iter_mut().for_each(|s| *s = spec);
        self.noise_y = spec;
        self
    }

    pub fn relaxed(mut self, relaxed: bool) -> Self {
        self.relaxed = relaxed;
        self
    }

    pub fn build(self) -> Result<LinearScm> {
        let order = topological_order(&self.b)?;
        LinearScm::new(ScmParts {
            b: self.b,
            c: self.c,
            beta: self.beta,
            delta: self.delta,
            noise_x: self.noise_x,
            noise_u: self.noise_u,
            noise_y: self.noise_y,
            order,
            names: self.names,
            relaxed: self.relaxed,
        })
    }
}

/// Kahn's algorithm, smallest index first among ready nodes.
fn topological_order(b: &DMatrix<f64>) -> Result<Vec<usize>> {
    let p = b.nrows();
    let mut indegree: Vec<usize> = (0..p)
        .map(|i| (0..p).filter(|&j| b[(i, j)] != 0.0).count())
        .collect();
    let mut done = vec![false; p];
    let mut order = Vec::with_capacity(p);
    while order.len() < p {
        let next = (0..p).find(|&i| !done[i] && indegree[i] == 0);
        let Some(i) = next else {
            return Err(Error::InvalidModel("treatment graph has a cycle".into()));
        };
        done[i] = true;
        order.push(i);
        for child in 0..p {
            if b[(child, i)] != 0.0 {
                indegree[child] -= 1;
            }
        }
    }
    Ok(order)
}

/// Draws edge coefficients from `Uniform[-1, 1]`, optionally redrawing any
/// value whose magnitude falls below `min_abs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientSampler {
    pub min_abs: Option<f64>,
}

impl Default for CoefficientSampler {
    fn default() -> Self {
        Self { min_abs: Some(0.3) }
    }
}

impl CoefficientSampler {
    /// Plain `Uniform[-1, 1]` with no rejection.
    pub fn unrestricted() -> Self {
        Self { min_abs: None }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let v: f64 = rng.random_range(-1.0..=1.0);
            match self.min_abs {
                Some(m) if v.abs() < m => continue,
                _ => return v,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simple(c: f64, beta: f64, delta: f64) -> LinearScm {
        ScmBuilder::new(&["X1"], 1)
            .confounds(0, 0, c)
            .effect(0, beta)
            .outcome_confounder(0, delta)
            .build()
            .unwrap()
    }

    #[test]
    fn single_confounder_correlation() {
        // cov(X,Y) = 1, var X = 2, var Y = 2
        let scm = simple(1.0, 0.0, 1.0);
        let cov = scm.population_covariance().unwrap();
        assert!((cov[(0, 1)] - 1.0).abs() < 1e-12);
        assert!((cov[(0, 0)] - 2.0).abs() < 1e-12);
        assert!((cov[(1, 1)] - 2.0).abs() < 1e-12);

        let data = scm.sample(1000, 11).unwrap();
        let s = data.covariance();
        let corr = s.get(0, 1) / (s.get(0, 0) * s.get(1, 1)).sqrt();
        assert!((corr - 0.5).abs() < 0.05, "corr = {corr}");
    }

    #[test]
    fn two_rows_are_centered() {
        let scm = simple(0.7, 0.4, -0.5);
        let data = scm.sample(2, 3).unwrap();
        assert_eq!(data.n(), 2);
        for col in data.values().column_iter() {
            assert!(col.sum().abs() < 1e-12);
        }
    }

    #[test]
    fn independent_model_has_diagonal_covariance() {
        let scm = ScmBuilder::new(&["X1", "X2"], 1)
            .relaxed(true)
            .noise_x(1, NoiseSpec::new(NoiseKind::Uniform, 3.0).unwrap())
            .noise_u(0, NoiseSpec::new(NoiseKind::Gaussian, 2.0).unwrap())
            .noise_y(NoiseSpec::new(NoiseKind::Exponential, 0.5).unwrap())
            .build()
            .unwrap();
        let cov = scm.population_covariance().unwrap();
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0, 0.25]));
        assert!((cov - expected).abs().max() < 1e-15);
    }

    #[test]
    fn unrelaxed_model_rejects_zero_confounding() {
        let err = ScmBuilder::new(&["X1", "X2"], 1)
            .confounds(0, 0, 1.0)
            .outcome_confounder(0, 1.0)
            .build()
            .unwrap_err();
        assert!(matches!(err, Error::InvalidModel(_)));
    }

    #[test]
    fn order_must_respect_edges() {
        let mut b = DMatrix::zeros(2, 2);
        b[(1, 0)] = 0.5;
        let parts = ScmParts {
            b,
            c: DMatrix::from_element(2, 1, 1.0),
            beta: DVector::zeros(2),
            delta: DVector::from_element(1, 1.0),
            noise_x: vec![NoiseSpec::standard(NoiseKind::Gaussian); 2],
            noise_u: vec![NoiseSpec::standard(NoiseKind::Gaussian)],
            noise_y: NoiseSpec::standard(NoiseKind::Gaussian),
            order: vec![1, 0],
            names: vec![],
            relaxed: false,
        };
        assert!(LinearScm::new(parts.clone()).is_err());
        let ok = LinearScm::new(ScmParts { order: vec![0, 1], ..parts }).unwrap();
        assert_eq!(ok.treatment_names(), &["X1".to_string(), "X2".to_string()]);
    }

    #[test]
    fn cycles_are_rejected() {
        let err = ScmBuilder::new(&["A", "B"], 1)
            .edge(0, 1, 0.5)
            .edge(1, 0, 0.5)
            .confounds(0, 0, 1.0)
            .confounds(0, 1, 1.0)
            .outcome_confounder(0, 1.0)
            .build()
            .unwrap_err();
        assert!(err.to_string().contains("cycle"));
    }

    #[test]
    fn exploding_coefficients_name_the_variable() {
        let big = 1e200;
        let scm = ScmBuilder::new(&["A", "B", "C"], 1)
            .edge(0, 1, big)
            .edge(1, 2, big)
            .confounds(0, 0, 1.0)
            .confounds(0, 1, 1.0)
            .confounds(0, 2, 1.0)
            .outcome_confounder(0, 1.0)
            .build()
            .unwrap();
        match scm.sample(10, 1).unwrap_err() {
            Error::NonFinite { variable } => assert_eq!(variable, "C"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn no_mediation_total_effect_is_direct() {
        let scm = ScmBuilder::new(&["X1", "X2"], 1)
            .confounds(0, 0, 0.5)
            .confounds(0, 1, -0.5)
            .effect(0, 0.3)
            .effect(1, -0.8)
            .outcome_confounder(0, 1.0)
            .build()
            .unwrap();
        assert_eq!(scm.total_effect(0).unwrap(), 0.3);
        assert_eq!(scm.total_effect(1).unwrap(), -0.8);
        assert!(scm.total_effect(2).is_err());
    }

    #[test]
    fn exponential_noise_is_centered() {
        let spec = NoiseSpec::new(NoiseKind::Exponential, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 200_000;
        let mean = (0..n).map(|_| spec.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.03, "mean = {mean}");
        assert_eq!(spec.variance(), 4.0);
    }

    #[test]
    fn sampler_respects_floor() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = CoefficientSampler::default();
        for _ in 0..1000 {
            let v = s.draw(&mut rng);
            assert!((0.3..=1.0).contains(&v.abs()));
        }
    }

    #[test]
    fn json_round_trip() {
        let scm = ScmBuilder::new(&["A", "B"], 1)
            .edge(0, 1, 0.4)
            .confounds(0, 0, 0.9)
            .confounds(0, 1, -0.6)
            .effect(1, 0.5)
            .outcome_confounder(0, 0.7)
            .all_noise(NoiseKind::Exponential)
            .build()
            .unwrap();
        let text = scm.to_json().unwrap();
        assert!(text.contains("\"B\""));
        let back = LinearScm::from_json(&text).unwrap();
        assert_eq!(back, scm);
    }
}
