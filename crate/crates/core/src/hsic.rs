//! HSIC independence test with Gaussian kernels.
//!
//! Bandwidths follow the median heuristic; the null distribution of the
//! biased statistic is approximated by a moment-matched gamma law, with an
//! optional permutation mode for audits.

use nalgebra::DMatrix;
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma};

use crate::error::{Error, Result};

/// Smallest sample for which the gamma approximation is used.
pub const MIN_HSIC_SAMPLES: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsicConfig {
    /// Rows beyond this count are subsampled (seeded) before building kernels.
    pub max_rows: usize,
    /// Rows used to compute the median-heuristic bandwidth.
    pub bandwidth_rows: usize,
    pub seed: u64,
    /// Use a permutation null with this many draws instead of the gamma law.
    pub permutations: Option<usize>,
}

impl Default for HsicConfig {
    fn default() -> Self {
        Self {
            max_rows: 3000,
            bandwidth_rows: 1000,
            seed: 0x5eed_4b1c,
            permutations: None,
        }
    }
}

impl HsicConfig {
    /// Row indices the test will use for a sample of size `n`, ascending.
    pub fn rows_for(&self, n: usize) -> Vec<usize> {
        if n <= self.max_rows {
            return (0..n).collect();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut rows = index::sample(&mut rng, n, self.max_rows).into_vec();
        rows.sort_unstable();
        rows
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsicOutcome {
    /// `n * HSIC_b`, the scale the gamma approximation is fitted on.
    pub statistic: f64,
    pub p_value: f64,
    pub rows_used: usize,
}

/// Doubly centered Gaussian kernel matrix over a fixed set of rows.
#[derive(Debug, Clone)]
pub struct CenteredKernel {
    n: usize,
    centered: Vec<f64>,
    /// Mean of the off-diagonal entries of the uncentered kernel.
    off_diag_mean: f64,
}

impl CenteredKernel {
    /// Builds the kernel on `rows` of `x` (each column standardized first).
    pub fn new(x: &DMatrix<f64>, rows: &[usize], cfg: &HsicConfig) -> Result<Self> {
        let n = rows.len();
        let d = x.ncols();
        if d == 0 {
            return Err(Error::Precondition("kernel input has no columns".into()));
        }
        // standardized copy, row-major
        let mut pts = vec![0.0; n * d];
        for j in 0..d {
            let mean = rows.iter().map(|&r| x[(r, j)]).sum::<f64>() / n as f64;
            let var = rows.iter().map(|&r| (x[(r, j)] - mean).powi(2)).sum::<f64>() / n as f64;
            let sd = var.sqrt();
            if !(sd > 1e-12 * (1.0 + mean.abs())) {
                return Err(Error::Degenerate(format!("constant column {j} in HSIC input")));
            }
            for (i, &r) in rows.iter().enumerate() {
                pts[i * d + j] = (x[(r, j)] - mean) / sd;
            }
        }
        let sq = |i: usize, k: usize| -> f64 {
            let (a, b) = (&pts[i * d..(i + 1) * d], &pts[k * d..(k + 1) * d]);
            a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
        };

        let width = median_bandwidth(n, cfg, &sq)?;
        let gamma = 1.0 / (2.0 * width * width);

        let mut k = vec![0.0; n * n];
        for i in 0..n {
            k[i * n + i] = 1.0;
            for j in (i + 1)..n {
                let v = (-gamma * sq(i, j)).exp();
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
        }
        let row_means: Vec<f64> = k.chunks_exact(n).map(|r| r.iter().sum::<f64>() / n as f64).collect();
        let grand = row_means.iter().sum::<f64>() / n as f64;
        let off_diag_mean = (grand * (n * n) as f64 - n as f64) / (n * (n - 1)) as f64;
        for i in 0..n {
            let ri = row_means[i];
            let row = &mut k[i * n..(i + 1) * n];
            for (j, v) in row.iter_mut().enumerate() {
                *v += grand - ri - row_means[j];
            }
        }
        Ok(Self {
            n,
            centered: k,
            off_diag_mean,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

fn median_bandwidth(n: usize, cfg: &HsicConfig, sq: &dyn Fn(usize, usize) -> f64) -> Result<f64> {
    let m = n.min(cfg.bandwidth_rows.max(2));
    let idx: Vec<usize> = if m < n {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xb4d_5eed);
        index::sample(&mut rng, n, m).into_vec()
    } else {
        (0..n).collect()
    };
    let mut dists = Vec::with_capacity(m * (m - 1) / 2);
    for a in 0..m {
        for b in (a + 1)..m {
            let v = sq(idx[a], idx[b]);
            if v > 0.0 {
                dists.push(v);
            }
        }
    }
    if dists.is_empty() {
        return Err(Error::Degenerate("all HSIC inputs coincide".into()));
    }
    let mid = dists.len() / 2;
    let (_, median, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    Ok((0.5 * *median).sqrt())
}

/// HSIC test between two kernels built on the same rows.
pub fn hsic_from_kernels(k: &CenteredKernel, l: &CenteredKernel, cfg: &HsicConfig) -> Result<HsicOutcome> {
    if k.n != l.n {
        return Err(Error::Precondition("kernels built on different rows".into()));
    }
    let n = k.n;
    if n < MIN_HSIC_SAMPLES {
        return Err(Error::InsufficientSamples(format!(
            "n = {n} < {MIN_HSIC_SAMPLES}"
        )));
    }
    let nf = n as f64;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut diag_sq = 0.0;
    for i in 0..n {
        let kr = &k.centered[i * n..(i + 1) * n];
        let lr = &l.centered[i * n..(i + 1) * n];
        for (a, b) in kr.iter().zip(lr) {
            let prod = a * b;
            sum += prod;
            sum_sq += prod * prod;
        }
        let dp = kr[i] * lr[i];
        diag_sq += dp * dp;
    }
    let statistic = sum / nf;

    let p_value = match cfg.permutations {
        Some(draws) => permutation_pvalue(k, l, statistic, draws, cfg.seed),
        None => {
            let mut var = (sum_sq - diag_sq) / 36.0 / nf / (nf - 1.0);
            var *= 72.0 * (nf - 4.0) * (nf - 5.0) / nf / (nf - 1.0) / (nf - 2.0) / (nf - 3.0);
            let (mx, my) = (k.off_diag_mean, l.off_diag_mean);
            let mean = (1.0 + mx * my - mx - my) / nf;
            if !(var > 0.0 && mean > 0.0) {
                return Err(Error::Degenerate("HSIC null moments are not positive".into()));
            }
            let shape = mean * mean / var;
            let scale = var * nf / mean;
            let gamma = Gamma::new(shape, 1.0 / scale)
                .map_err(|e| Error::Degenerate(format!("gamma approximation: {e}")))?;
            gamma.sf(statistic)
        }
    };
    Ok(HsicOutcome {
        statistic,
        p_value: p_value.clamp(0.0, 1.0),
        rows_used: n,
    })
}

fn permutation_pvalue(k: &CenteredKernel, l: &CenteredKernel, statistic: f64, draws: usize, seed: u64) -> f64 {
    let n = k.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut exceed = 0usize;
    for _ in 0..draws {
        perm.shuffle(&mut rng);
        let mut s = 0.0;
        for i in 0..n {
            let kr = &k.centered[i * n..(i + 1) * n];
            let lr = &l.centered[perm[i] * n..(perm[i] + 1) * n];
            for j in 0..n {
                s += kr[j] * lr[perm[j]];
            }
        }
        if s / n as f64 >= statistic {
            exceed += 1;
        }
    }
    (1 + exceed) as f64 / (draws + 1) as f64
}

/// HSIC test of `u` against the columns of `z`.
pub fn hsic_test(u: &[f64], z: &DMatrix<f64>, cfg: &HsicConfig) -> Result<HsicOutcome> {
    let n = u.len();
    if z.nrows() != n {
        return Err(Error::Precondition(format!(
            "u has {n} rows but Z has {}",
            z.nrows()
        )));
    }
    if n < MIN_HSIC_SAMPLES {
        return Err(Error::InsufficientSamples(format!(
            "n = {n} < {MIN_HSIC_SAMPLES}"
        )));
    }
    let rows = cfg.rows_for(n);
    let ucol = DMatrix::from_column_slice(n, 1, u);
    let ku = CenteredKernel::new(&ucol, &rows, cfg)?;
    let kz = CenteredKernel::new(z, &rows, cfg)?;
    hsic_from_kernels(&ku, &kz, cfg)
}

/// p-value of the gamma-approximated HSIC test with default settings.
pub fn hsic_pvalue(u: &[f64], z: &DMatrix<f64>) -> Result<f64> {
    hsic_test(u, z, &HsicConfig::default()).map(|o| o.p_value)
}
