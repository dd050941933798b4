//! Named benchmark graphs with freshly drawn coefficients.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scm::{CoefficientSampler, LinearScm, NoiseKind, NoiseSpec, ScmBuilder};

/// Benchmark graphs used by the simulator and the bench harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Fixture {
    /// Six-treatment, one-confounder graph with Gaussian noise.
    Gaussian,
    /// Same graph without `X3`, exponential noise.
    NonGaussian,
    /// Six-treatment graph, each noise term Gaussian or exponential at random.
    Mixture,
    /// One treatment, `q` confounders, `q` exposure and `q` outcome proxies.
    AppendixA(usize),
}

impl fmt::Display for Fixture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fixture::Gaussian => write!(f, "gaussian"),
            Fixture::NonGaussian => write!(f, "nongaussian"),
            Fixture::Mixture => write!(f, "mixture"),
            Fixture::AppendixA(q) => write!(f, "appendixA({q})"),
        }
    }
}

impl FromStr for Fixture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let label = s.trim();
        match label.to_ascii_lowercase().as_str() {
            "gaussian" => return Ok(Fixture::Gaussian),
            "nongaussian" | "non-gaussian" => return Ok(Fixture::NonGaussian),
            "mixture" => return Ok(Fixture::Mixture),
            _ => {}
        }
        let lower = label.to_ascii_lowercase();
        let q = lower
            .strip_prefix("appendixa(")
            .and_then(|rest| rest.strip_suffix(')'))
            .or_else(|| lower.strip_prefix("appendix-a:"))
            .or_else(|| lower.strip_prefix("appendixa:"))
            .and_then(|q| q.trim().parse::<usize>().ok());
        match q {
            Some(q) if (1..=4).contains(&q) => Ok(Fixture::AppendixA(q)),
            Some(q) => Err(Error::Config(format!("appendixA needs 1 ≤ q ≤ 4, got {q}"))),
            None => Err(Error::Config(format!("unknown fixture '{label}'"))),
        }
    }
}

impl Serialize for Fixture {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Fixture {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Proxies known to be valid by construction, used by the estimator comparison.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnownProxies {
    pub treatment: usize,
    pub nce: Vec<usize>,
    pub nco: Vec<usize>,
}

impl Fixture {
    /// Number of latent confounders in the graph.
    pub fn q(&self) -> usize {
        match self {
            Fixture::AppendixA(q) => *q,
            _ => 1,
        }
    }

    /// Treatments whose effects the experiments report.
    pub fn targets(&self) -> Vec<&'static str> {
        match self {
            Fixture::AppendixA(_) => vec!["Xk"],
            _ => vec!["X2", "X5", "X6"],
        }
    }

    pub fn known_proxies(&self) -> Option<KnownProxies> {
        match self {
            Fixture::AppendixA(q) => Some(KnownProxies {
                treatment: 0,
                nce: (1..=*q).collect(),
                nco: (q + 1..=2 * q).collect(),
            }),
            _ => None,
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, sampler: &CoefficientSampler, rng: &mut R) -> Result<LinearScm> {
        fixture_graph(*self, sampler, rng)
    }
}

/// Draws a named fixture. Coefficients come from `sampler`.
pub fn fixture_graph<R: Rng + ?Sized>(
    case: Fixture,
    sampler: &CoefficientSampler,
    rng: &mut R,
) -> Result<LinearScm> {
    match case {
        Fixture::Gaussian => model_example(true, false, NoisePolicy::All(NoiseKind::Gaussian), sampler, rng),
        Fixture::NonGaussian => {
            model_example(false, false, NoisePolicy::All(NoiseKind::Exponential), sampler, rng)
        }
        Fixture::Mixture => model_example(true, false, NoisePolicy::Mixed, sampler, rng),
        Fixture::AppendixA(q) => {
            if !(1..=4).contains(&q) {
                return Err(Error::Config(format!("appendixA needs 1 ≤ q ≤ 4, got {q}")));
            }
            multi_confounder_example(q, sampler, rng)
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum NoisePolicy {
    All(NoiseKind),
    /// Each exogenous term independently Gaussian or exponential.
    Mixed,
}

fn apply_noise<R: Rng + ?Sized>(mut builder: ScmBuilder, p: usize, policy: NoisePolicy, rng: &mut R) -> ScmBuilder {
    match policy {
        NoisePolicy::All(kind) => builder.all_noise(kind),
        NoisePolicy::Mixed => {
            let pick = |rng: &mut R| {
                let kind = if rng.random_bool(0.5) {
                    NoiseKind::Gaussian
                } else {
                    NoiseKind::Exponential
                };
                NoiseSpec::standard(kind)
            };
            for i in 0..p {
                builder = builder.noise_x(i, pick(rng));
            }
            builder = builder.noise_u(0, pick(rng));
            builder.noise_y(pick(rng))
        }
    }
}

/// The six-treatment example graph:
/// `U -> X1..X6, Y`; `X1 -> X2`, `X4 -> X5 -> X6`; `X2 -> Y`, `X6 -> Y`.
///
/// With `with_x3 = false` the variable `X3` is dropped (columns `X1, X2, X4,
/// X5, X6`). `x1_to_y` adds the extra edge `X1 -> Y` that invalidates `X1`
/// as an exposure proxy for `X2`.
fn model_example<R: Rng + ?Sized>(
    with_x3: bool,
    x1_to_y: bool,
    noise: NoisePolicy,
    sampler: &CoefficientSampler,
    rng: &mut R,
) -> Result<LinearScm> {
    let labels: Vec<&str> = if with_x3 {
        vec!["X1", "X2", "X3", "X4", "X5", "X6"]
    } else {
        vec!["X1", "X2", "X4", "X5", "X6"]
    };
    let idx = |name: &str| labels.iter().position(|l| *l == name).expect("label present");
    let p = labels.len();
    let mut builder = ScmBuilder::new(&labels, 1);
    for i in 0..p {
        builder = builder.confounds(0, i, sampler.draw(rng));
    }
    builder = builder
        .outcome_confounder(0, sampler.draw(rng))
        .edge(idx("X1"), idx("X2"), sampler.draw(rng))
        .edge(idx("X4"), idx("X5"), sampler.draw(rng))
        .edge(idx("X5"), idx("X6"), sampler.draw(rng))
        .effect(idx("X2"), sampler.draw(rng))
        .effect(idx("X6"), sampler.draw(rng));
    if x1_to_y {
        builder = builder.effect(idx("X1"), sampler.draw(rng));
    }
    apply_noise(builder, p, noise, rng).build()
}

/// Treatment `Xk` (column 0), exposure proxies `Z1..Zq`, outcome proxies
/// `W1..Wq`; every confounder affects every observed variable and `Xk -> Y`.
fn multi_confounder_example<R: Rng + ?Sized>(
    q: usize,
    sampler: &CoefficientSampler,
    rng: &mut R,
) -> Result<LinearScm> {
    let mut labels = vec!["Xk".to_string()];
    labels.extend((1..=q).map(|i| format!("Z{i}")));
    labels.extend((1..=q).map(|i| format!("W{i}")));
    let p = labels.len();
    let mut builder = ScmBuilder::new(&labels, q);
    for u in 0..q {
        for x in 0..p {
            builder = builder.confounds(u, x, sampler.draw(rng));
        }
        builder = builder.outcome_confounder(u, sampler.draw(rng));
    }
    builder.effect(0, sampler.draw(rng)).build()
}

/// The six-treatment graph with optional `X1 -> Y`, Gaussian noise.
pub fn rank_example<R: Rng + ?Sized>(
    x1_to_y: bool,
    sampler: &CoefficientSampler,
    rng: &mut R,
) -> Result<LinearScm> {
    model_example(true, x1_to_y, NoisePolicy::All(NoiseKind::Gaussian), sampler, rng)
}

/// Three small structures over `Z, W, Xk` (columns 0, 1, 2) that share their
/// rank constraints but differ in GIN constraints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GinStructure {
    /// `Z`, `W` valid proxies for `Xk -> Y`.
    Valid,
    /// Adds `Z -> Y`.
    ExposureAffectsOutcome,
    /// Adds `W -> Xk`.
    OutcomeProxyAffectsTreatment,
}

/// Coefficient labels: `a: U->Z`, `d: U->W`, `b: U->Xk`, `c: U->Y`,
/// `e: Z->Xk`, `beta: Xk->Y`, `f: W->Y`, plus `g` for the extra edge.
/// All noise is standard exponential.
pub fn gin_example<R: Rng + ?Sized>(
    structure: GinStructure,
    sampler: &CoefficientSampler,
    rng: &mut R,
) -> Result<LinearScm> {
    const Z: usize = 0;
    const W: usize = 1;
    const XK: usize = 2;
    let mut builder = ScmBuilder::new(&["Z", "W", "Xk"], 1)
        .confounds(0, Z, sampler.draw(rng))
        .confounds(0, W, sampler.draw(rng))
        .confounds(0, XK, sampler.draw(rng))
        .outcome_confounder(0, sampler.draw(rng))
        .edge(Z, XK, sampler.draw(rng))
        .effect(XK, sampler.draw(rng))
        .effect(W, sampler.draw(rng));
    builder = match structure {
        GinStructure::Valid => builder,
        GinStructure::ExposureAffectsOutcome => builder.effect(Z, sampler.draw(rng)),
        GinStructure::OutcomeProxyAffectsTreatment => builder.edge(W, XK, sampler.draw(rng)),
    };
    builder.all_noise(NoiseKind::Exponential).build()
}

/// Single-confounder proxy graph over `Z, Xk, W` (columns 0, 1, 2):
/// `U -> Z (a)`, `U -> Xk (b)`, `U -> W (d)`, `U -> Y (c)`, `Xk -> Y (beta)`.
pub fn single_proxy_example(a: f64, b: f64, c: f64, d: f64, beta: f64) -> Result<LinearScm> {
    ScmBuilder::new(&["Z", "Xk", "W"], 1)
        .confounds(0, 0, a)
        .confounds(0, 1, b)
        .confounds(0, 2, d)
        .outcome_confounder(0, c)
        .effect(1, beta)
        .build()
}
