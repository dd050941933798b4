//! Seeded Monte Carlo benchmark over the synthetic fixtures.
//!
//! Every replication draws fresh coefficients, samples one dataset per
//! sample size and records `estimate - total_effect` for each method and
//! target treatment. Output is a flat CSV summary plus a raw
//! per-replication CSV; both are byte-stable for a given configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimators::{extended_proxy_estimate, naive_ols, standard_proxy_estimate};
use crate::fixtures::{Fixture, KnownProxies};
use crate::scm::{CoefficientSampler, LinearScm};
use crate::selection::{proxy_gin, proxy_rank, MIN_GIN_SAMPLES};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Environment variable overriding the worker count.
pub const THREADS_ENV: &str = "PROXYSEL_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BenchMethod {
    ProxyRank,
    #[serde(rename = "ProxyGIN", alias = "ProxyGin")]
    ProxyGin,
    Naive,
    /// Single-proxy estimator on the fixture's known proxies.
    Standard,
    /// Determinant-ratio estimator on the fixture's known proxies.
    Extended,
}

impl BenchMethod {
    pub fn label(self) -> &'static str {
        match self {
            BenchMethod::ProxyRank => "ProxyRank",
            BenchMethod::ProxyGin => "ProxyGIN",
            BenchMethod::Naive => "Naive",
            BenchMethod::Standard => "Standard",
            BenchMethod::Extended => "Extended",
        }
    }
}

fn default_alpha() -> f64 {
    0.05
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    /// A fixture label such as `gaussian` or `appendixA(2)`, or `custom:<scm.json>`.
    pub fixture: String,
    pub sample_sizes: Vec<usize>,
    pub replications: usize,
    pub methods: Vec<BenchMethod>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    /// Redraw coefficients with magnitude below 0.3.
    #[serde(default = "default_true")]
    pub reject_small: bool,
    /// Latent dimension handed to the searches; defaults to the fixture's.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    /// Treatment names to report; defaults to the fixture's targets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub treatments: Option<Vec<String>>,
}

enum Source {
    Named(Fixture),
    Custom(LinearScm),
}

impl BenchConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be ≥ 1".into()));
        }
        if self.sample_sizes.is_empty() {
            return Err(Error::Config("sample_sizes must be nonempty".into()));
        }
        if let Some(&n) = self.sample_sizes.iter().find(|&&n| n < 2) {
            return Err(Error::Config(format!("sample size {n} is below 2")));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("methods must be nonempty".into()));
        }
        let mut methods = self.methods.clone();
        methods.sort();
        methods.dedup();
        if methods.len() != self.methods.len() {
            return Err(Error::Config("methods contains duplicates".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.q == Some(0) {
            return Err(Error::Config("q must be ≥ 1".into()));
        }
        if self.methods.contains(&BenchMethod::ProxyGin) {
            if let Some(&n) = self.sample_sizes.iter().find(|&&n| n < MIN_GIN_SAMPLES) {
                return Err(Error::Config(format!(
                    "ProxyGIN needs sample sizes ≥ {MIN_GIN_SAMPLES}, got {n}"
                )));
            }
        }
        Ok(())
    }

    fn source(&self) -> Result<Source> {
        match self.fixture.strip_prefix("custom:") {
            Some(path) => Ok(Source::Custom(LinearScm::from_json(&std::fs::read_to_string(path)?)?)),
            None => Ok(Source::Named(self.fixture.parse()?)),
        }
    }

    /// SHA-256 of the canonical JSON of every field except `output_path`.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_path = None;
        let json = serde_json::to_string(&canonical).expect("config serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .fold(String::with_capacity(64), |mut s, b| {
                let _ = write!(s, "{b:02x}");
                s
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub config_hash: String,
    pub version: String,
}

/// One cell of the method × treatment × sample-size grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: BenchMethod,
    pub treatment: String,
    pub n: usize,
    pub replications: usize,
    /// Mean of `estimate - truth` over non-NA replications.
    pub mean_bias: Option<f64>,
    pub sd_bias: Option<f64>,
    pub mean_abs_bias: Option<f64>,
    pub median_abs_bias: Option<f64>,
    pub na_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRow {
    pub method: BenchMethod,
    pub treatment: String,
    pub n: usize,
    pub replication: usize,
    pub estimate: Option<f64>,
    pub truth: f64,
}

impl RawRow {
    pub fn bias(&self) -> Option<f64> {
        self.estimate.map(|e| e - self.truth)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub rows: Vec<BenchRow>,
    pub raw: Vec<RawRow>,
    pub provenance: Provenance,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x}"))
}

impl BenchResult {
    pub fn row(&self, method: BenchMethod, treatment: &str, n: usize) -> Option<&BenchRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.treatment == treatment && r.n == n)
    }

    /// Summary grid as RFC 4180 CSV.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "method",
            "treatment",
            "n",
            "replications",
            "mean_bias",
            "sd_bias",
            "mean_abs_bias",
            "median_abs_bias",
            "na_rate",
            "seed",
            "config_hash",
            "version",
        ])?;
        let p = &self.provenance;
        for r in &self.rows {
            w.write_record([
                r.method.label().to_string(),
                r.treatment.clone(),
                r.n.to_string(),
                r.replications.to_string(),
                fmt_opt(r.mean_bias),
                fmt_opt(r.sd_bias),
                fmt_opt(r.mean_abs_bias),
                fmt_opt(r.median_abs_bias),
                format!("{}", r.na_rate),
                p.seed.to_string(),
                p.config_hash.clone(),
                p.version.clone(),
            ])?;
        }
        csv_string(w)
    }

    /// Per-replication estimates as RFC 4180 CSV.
    pub fn raw_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["method", "treatment", "n", "replication", "estimate", "truth", "bias"])?;
        for r in &self.raw {
            w.write_record([
                r.method.label().to_string(),
                r.treatment.clone(),
                r.n.to_string(),
                r.replication.to_string(),
                fmt_opt(r.estimate),
                format!("{}", r.truth),
                fmt_opt(r.bias()),
            ])?;
        }
        csv_string(w)
    }

    /// Writes the summary to `path` and the raw estimates next to it
    /// (`results.csv` → `results.raw.csv`).
    pub fn write(&self, path: impl AsRef<Path>) -> Result<PathBuf> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()?)?;
        let raw = raw_path(path);
        std::fs::write(&raw, self.raw_csv()?)?;
        Ok(raw)
    }
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn raw_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.raw.csv"))
}

/// SplitMix64 finalizer over a (seed, stream, index) triple.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const COEF_STREAM: u64 = 1;
const DATA_STREAM: u64 = 2;

/// Worker pool sized by `PROXYSEL_THREADS` when set.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(Error::Config(format!("{THREADS_ENV} must be ≥ 1")));
        }
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| Error::Config(e.to_string()))
}

pub fn run_benchmark(config: &BenchConfig) -> Result<BenchResult> {
    config.validate()?;
    let source = config.source()?;
    let sampler = if config.reject_small {
        CoefficientSampler::default()
    } else {
        CoefficientSampler::unrestricted()
    };
    let (q, known, names) = match &source {
        Source::Named(f) => (f.q(), f.known_proxies(), f.draw(&sampler, &mut ChaCha8Rng::seed_from_u64(0))?.column_names()),
        Source::Custom(m) => (m.q(), None, m.column_names()),
    };
    let q = config.q.unwrap_or(q);
    let uses_known = config
        .methods
        .iter()
        .any(|m| matches!(m, BenchMethod::Standard | BenchMethod::Extended));
    if uses_known && known.is_none() {
        return Err(Error::Config(
            "Standard and Extended need a fixture with known proxies (appendixA)".into(),
        ));
    }
    let targets: Vec<String> = match (&config.treatments, &source) {
        (Some(t), _) => t.clone(),
        (None, Source::Named(f)) => f.targets().iter().map(|s| s.to_string()).collect(),
        (None, Source::Custom(m)) => m.treatment_names().to_vec(),
    };
    let target_idx: Vec<usize> = targets
        .iter()
        .map(|t| {
            names[..names.len() - 1]
                .iter()
                .position(|n| n == t)
                .ok_or_else(|| Error::Config(format!("unknown treatment {t:?}")))
        })
        .collect::<Result<_>>()?;
    if let Some(kp) = &known {
        if uses_known && target_idx.iter().any(|&k| k != kp.treatment) {
            return Err(Error::Config(format!(
                "Standard and Extended only apply to treatment {}",
                names[kp.treatment]
            )));
        }
    }

    let ctx = RepContext {
        config,
        source: &source,
        sampler,
        q,
        known: known.as_ref(),
        targets: &targets,
        target_idx: &target_idx,
    };
    let pool = thread_pool()?;
    let per_rep: Vec<Vec<RawRow>> = pool.install(|| {
        (0..config.replications)
            .into_par_iter()
            .map(|rep| ctx.run(rep))
            .collect::<Result<_>>()
    })?;
    let mut raw: Vec<RawRow> = per_rep.into_iter().flatten().collect();
    let method_rank = |m: BenchMethod| config.methods.iter().position(|&x| x == m).unwrap_or(usize::MAX);
    let target_rank = |t: &str| targets.iter().position(|x| x == t).unwrap_or(usize::MAX);
    raw.sort_by(|a, b| {
        (method_rank(a.method), target_rank(&a.treatment), a.n, a.replication).cmp(&(
            method_rank(b.method),
            target_rank(&b.treatment),
            b.n,
            b.replication,
        ))
    });

    let mut rows = Vec::new();
    for &method in &config.methods {
        for t in &targets {
            for &n in &config.sample_sizes {
                let cell: Vec<&RawRow> = raw
                    .iter()
                    .filter(|r| r.method == method && &r.treatment == t && r.n == n)
                    .collect();
                rows.push(summarize(method, t, n, &cell));
            }
        }
    }
    Ok(BenchResult {
        rows,
        raw,
        provenance: Provenance {
            seed: config.seed,
            config_hash: config.hash(),
            version: VERSION.to_string(),
        },
    })
}

fn summarize(method: BenchMethod, treatment: &str, n: usize, cell: &[&RawRow]) -> BenchRow {
    let biases: Vec<f64> = cell.iter().filter_map(|r| r.bias()).collect();
    let m = biases.len();
    let total = cell.len();
    let mean = (m > 0).then(|| biases.iter().sum::<f64>() / m as f64);
    let sd = mean.map(|mu| {
        if m < 2 {
            0.0
        } else {
            (biases.iter().map(|b| (b - mu).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt()
        }
    });
    let mut abs: Vec<f64> = biases.iter().map(|b| b.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let mean_abs = (m > 0).then(|| abs.iter().sum::<f64>() / m as f64);
    let median_abs = (m > 0).then(|| {
        if m % 2 == 1 {
            abs[m / 2]
        } else {
            (abs[m / 2 - 1] + abs[m / 2]) / 2.0
        }
    });
    BenchRow {
        method,
        treatment: treatment.to_string(),
        n,
        replications: total,
        mean_bias: mean,
        sd_bias: sd,
        mean_abs_bias: mean_abs,
        median_abs_bias: median_abs,
        na_rate: if total == 0 { 1.0 } else { (total - m) as f64 / total as f64 },
    }
}

struct RepContext<'a> {
    config: &'a BenchConfig,
    source: &'a Source,
    sampler: CoefficientSampler,
    q: usize,
    known: Option<&'a KnownProxies>,
    targets: &'a [String],
    target_idx: &'a [usize],
}

impl RepContext<'_> {
    fn run(&self, rep: usize) -> Result<Vec<RawRow>> {
        let seed = self.config.seed;
        let owned;
        let model = match self.source {
            Source::Named(f) => {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, COEF_STREAM, rep as u64));
                owned = f.draw(&self.sampler, &mut rng)?;
                &owned
            }
            Source::Custom(m) => m,
        };
        let truths: Vec<f64> = self
            .target_idx
            .iter()
            .map(|&k| model.total_effect(k))
            .collect::<Result<_>>()?;
        let mut out = Vec::new();
        for (i, &n) in self.config.sample_sizes.iter().enumerate() {
            let stream = (rep as u64) << 16 | i as u64;
            let data = model.sample(n, derive_seed(seed, DATA_STREAM, stream))?;
            for &method in &self.config.methods {
                let estimates = self.estimate(method, &data)?;
                for (j, est) in estimates.into_iter().enumerate() {
                    out.push(RawRow {
                        method,
                        treatment: self.targets[j].clone(),
                        n,
                        replication: rep,
                        estimate: est,
                        truth: truths[j],
                    });
                }
            }
        }
        Ok(out)
    }

    fn estimate(&self, method: BenchMethod, data: &Dataset) -> Result<Vec<Option<f64>>> {
        let alpha = self.config.alpha;
        let searched = match method {
            BenchMethod::ProxyRank => Some(proxy_rank(data, self.q, alpha)?),
            BenchMethod::ProxyGin => Some(proxy_gin(data, self.q, alpha)?),
            _ => None,
        };
        self.target_idx
            .iter()
            .map(|&k| {
                let est = match (&searched, method) {
                    (Some(report), _) => return Ok(report.treatments[k].effect.value),
                    (None, BenchMethod::Naive) => naive_ols(data, k)?,
                    // with q > 1 the single-proxy estimator sees only the first pair
                    (None, BenchMethod::Standard) => {
                        let kp = self.known.expect("validated");
                        standard_proxy_estimate(data, k, kp.nce[0], kp.nco[0])?
                    }
                    (None, _) => {
                        let kp = self.known.expect("validated");
                        extended_proxy_estimate(data, k, &kp.nce, &kp.nco)?
                    }
                };
                Ok(est.value)
            })
            .collect()
    }
}
