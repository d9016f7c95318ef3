//! Synthetic designs for the simulation studies.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`) seeded with
//! `seed_from_u64(seed)` and switched to stream `stream` via `set_stream`, so
//! every replicate owns an independent, reproducible stream. Uniforms are
//! `(next_u64 >> 11) * 2^-53`; normals use the cosine branch of Box-Muller
//! with `u1 = 1 - uniform`. Both are spelled out here so the datasets can be
//! regenerated bit for bit in another language.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HierError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    G1,
    G2,
    G3,
    G4,
    /// Four active additive components among `p` uniform features.
    Simfs,
    /// Two active features driving a logistic link; `y` in `{0, 1}`.
    LogisticDemo,
}

impl Generator {
    pub fn is_univariate(&self) -> bool {
        matches!(self, Generator::G1 | Generator::G2 | Generator::G3 | Generator::G4)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Generator::G1 => "g1",
            Generator::G2 => "g2",
            Generator::G3 => "g3",
            Generator::G4 => "g4",
            Generator::Simfs => "simfs",
            Generator::LogisticDemo => "logistic_demo",
        }
    }

    fn min_p(&self) -> usize {
        match self {
            Generator::Simfs => 4,
            Generator::LogisticDemo => 2,
            _ => 1,
        }
    }
}

impl std::str::FromStr for Generator {
    type Err = HierError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "g1" => Ok(Generator::G1),
            "g2" => Ok(Generator::G2),
            "g3" => Ok(Generator::G3),
            "g4" => Ok(Generator::G4),
            "simfs" => Ok(Generator::Simfs),
            "logistic_demo" | "logistic" => Ok(Generator::LogisticDemo),
            other => Err(HierError::InvalidInput(format!("unknown generator '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Design {
    /// `x_i = i / n`, `i = 1..n`.
    Equispaced,
    Uniform,
}

impl std::str::FromStr for Design {
    type Err = HierError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "equispaced" | "fixed" => Ok(Design::Equispaced),
            "uniform" | "random" => Ok(Design::Uniform),
            other => Err(HierError::InvalidInput(format!("unknown design '{other}'"))),
        }
    }
}

/// Everything that determines a simulated dataset.
///
/// For `g1..g4` the first column follows `design` and any further columns are
/// independent uniform noise features. `simfs` and `logistic_demo` always use
/// i.i.d. uniform covariates; `logistic_demo` ignores `snr`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub generator: Generator,
    pub n: usize,
    pub p: usize,
    pub snr: f64,
    pub seed: u64,
    pub design: Design,
}

impl SimSpec {
    pub fn new(generator: Generator, n: usize, p: usize, snr: f64, seed: u64) -> Self {
        let design = if generator.is_univariate() { Design::Equispaced } else { Design::Uniform };
        SimSpec { generator, n, p, snr, seed, design }
    }

    pub fn with_design(mut self, design: Design) -> Self {
        self.design = design;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(HierError::InvalidInput(format!("n = {} must be at least 2", self.n)));
        }
        if self.p < self.generator.min_p() {
            return Err(HierError::InvalidInput(format!(
                "generator {} needs p >= {}, got {}",
                self.generator.name(),
                self.generator.min_p(),
                self.p
            )));
        }
        if !(self.snr > 0.0) {
            return Err(HierError::InvalidInput(format!("snr = {} must be positive", self.snr)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Vec<f64>,
    /// Noiseless signal `f0(x_i)`; success probabilities for `logistic_demo`.
    pub truth: Vec<f64>,
    /// Noise standard deviation (zero for `logistic_demo`).
    pub sigma: f64,
}

/// The documented random source: ChaCha8 with explicit uniform and normal maps.
#[derive(Debug, Clone)]
pub struct SimRng {
    inner: ChaCha8Rng,
}

impl SimRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        SimRng { inner }
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.inner
    }
}

pub fn g1(x: f64) -> f64 {
    -0.43 + 4.83 * x - 14.65 * x * x + 11.76 * x.powi(3)
}

pub fn g2(x: f64) -> f64 {
    0.23 - 8.44 * x + 45.20 * x * x - 81.41 * x.powi(3) + 46.59 * x.powi(4)
}

pub fn g3(x: f64) -> f64 {
    (-5.0 * x + 0.5).exp() - 0.4 * 2.5f64.sinh()
}

pub fn g4(x: f64) -> f64 {
    -(7.0 * x - 0.4).sin()
}

pub fn f1(x: f64) -> f64 {
    x
}

pub fn f2(x: f64) -> f64 {
    (2.0 * x - 1.0).powi(2)
}

pub fn f3(x: f64) -> f64 {
    let s = (2.0 * PI * x).sin();
    2.0 * s / (2.0 - s)
}

pub fn f4(x: f64) -> f64 {
    let (s, c) = (2.0 * PI * x).sin_cos();
    0.1 * s + 0.2 * c + 0.3 * s * s + 0.4 * c.powi(3) + 0.5 * s.powi(3)
}

/// Additive signal of the four-component design: `5 f1 + 3 f2 + 4 f3 + 6 f4`.
pub fn simfs_signal(row: &[f64]) -> f64 {
    5.0 * f1(row[0]) + 3.0 * f2(row[1]) + 4.0 * f3(row[2]) + 6.0 * f4(row[3])
}

/// Linear predictor of the logistic design.
pub fn logistic_demo_eta(row: &[f64]) -> f64 {
    6.0 * (row[0] - 0.5) + 8.0 * ((2.0 * row[1] - 1.0).powi(2) - 1.0 / 3.0)
}

/// Univariate truth for `g1..g4`.
pub fn univariate_truth(generator: Generator, x: f64) -> Option<f64> {
    match generator {
        Generator::G1 => Some(g1(x)),
        Generator::G2 => Some(g2(x)),
        Generator::G3 => Some(g3(x)),
        Generator::G4 => Some(g4(x)),
        _ => None,
    }
}

/// Noise level giving `(n-1)^-1 sum f0_i^2 / sigma^2 = snr`.
pub fn noise_sigma(truth: &[f64], snr: f64) -> f64 {
    let second = truth.iter().map(|f| f * f).sum::<f64>() / (truth.len() as f64 - 1.0);
    (second / snr).sqrt()
}

pub fn generate(spec: &SimSpec) -> Result<Dataset> {
    generate_stream(spec, 0)
}

/// Dataset drawn from stream `stream` of the spec's seed.
pub fn generate_stream(spec: &SimSpec, stream: u64) -> Result<Dataset> {
    spec.validate()?;
    let (n, p) = (spec.n, spec.p);
    let mut rng = SimRng::new(spec.seed, stream);
    let mut x = Array2::zeros((n, p));
    for i in 0..n {
        for j in 0..p {
            x[[i, j]] = if j == 0 && spec.generator.is_univariate() && spec.design == Design::Equispaced {
                (i + 1) as f64 / n as f64
            } else {
                rng.uniform()
            };
        }
    }
    let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    if spec.generator == Generator::LogisticDemo {
        let truth: Vec<f64> = rows.iter().map(|r| crate::logistic::sigmoid(logistic_demo_eta(r))).collect();
        let y = truth.iter().map(|&pr| if rng.uniform() < pr { 1.0 } else { 0.0 }).collect();
        return Ok(Dataset { x, y, truth, sigma: 0.0 });
    }
    let truth: Vec<f64> = rows
        .iter()
        .map(|r| match spec.generator {
            Generator::Simfs => simfs_signal(r),
            g => univariate_truth(g, r[0]).unwrap_or(0.0),
        })
        .collect();
    let sigma = noise_sigma(&truth, spec.snr);
    let y = truth.iter().map(|f| f + sigma * rng.normal()).collect();
    Ok(Dataset { x, y, truth, sigma })
}
