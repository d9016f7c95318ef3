//! Convergence-rate experiments: oracle-lambda MSE against sample size.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mse;
use super::sim::{generate_stream, Design, Generator, SimSpec};
use crate::basis::{default_truncation, BasisConfig, BasisFamily};
use crate::error::{HierError, Result};
use crate::univariate::UnivariateProblem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateConfig {
    pub m: f64,
    pub generator: Generator,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    pub snr: f64,
    pub design: Design,
    pub family: BasisFamily,
    /// Truncation level; `None` uses `ceil(sqrt(n))`.
    pub k: Option<usize>,
    pub n_lambda: usize,
    pub lambda_min_ratio: f64,
}

impl RateConfig {
    pub fn new(m: f64, generator: Generator, n_grid: Vec<usize>, reps: usize, seed: u64) -> Self {
        RateConfig {
            m,
            generator,
            n_grid,
            reps,
            seed,
            snr: 3.0,
            design: Design::Equispaced,
            family: BasisFamily::Polynomial,
            k: None,
            n_lambda: 100,
            lambda_min_ratio: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub n: usize,
    pub mean_mse: f64,
    pub se_mse: f64,
    pub mean_oracle_lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateResult {
    pub points: Vec<RatePoint>,
    /// Least-squares slope of `log(mean_mse)` on `log(n)`.
    pub slope: f64,
}

/// Smallest true-function MSE along the path and the lambda attaining it.
pub fn oracle_mse(
    x: &[f64],
    y: &[f64],
    truth: &[f64],
    basis: &BasisConfig,
    m: f64,
    n_lambda: usize,
    lambda_min_ratio: f64,
) -> Result<(f64, f64)> {
    let prob = UnivariateProblem::new(x, y, basis, m)?;
    let mut best = (f64::INFINITY, 0.0);
    for lam in prob.lambda_grid(n_lambda, lambda_min_ratio)? {
        let fit = prob.fit(lam)?;
        let err = mse(prob.fitted_values(&fit).as_slice().unwrap(), truth)?;
        if err < best.0 {
            best = (err, lam);
        }
    }
    Ok(best)
}

pub fn loglog_slope(ns: &[usize], values: &[f64]) -> f64 {
    let lx: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ly: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Replicate `r` at grid position `i` draws from stream `(i << 32) | r`.
pub fn rate_experiment(cfg: &RateConfig) -> Result<RateResult> {
    if !cfg.generator.is_univariate() {
        return Err(HierError::InvalidInput("rate experiments use the univariate generators".into()));
    }
    if cfg.n_grid.len() < 2 || cfg.reps < 1 {
        return Err(HierError::InvalidInput("need at least two sample sizes and one replicate".into()));
    }
    let mut points = Vec::with_capacity(cfg.n_grid.len());
    for (i, &n) in cfg.n_grid.iter().enumerate() {
        let spec = SimSpec::new(cfg.generator, n, 1, cfg.snr, cfg.seed).with_design(cfg.design);
        let k = cfg.k.unwrap_or_else(|| default_truncation(n)).min(n - 1);
        let basis = BasisConfig { family: cfg.family, k, standardize: true };
        let runs: Vec<(f64, f64)> = (0..cfg.reps)
            .into_par_iter()
            .map(|r| {
                let d = generate_stream(&spec, ((i as u64) << 32) | r as u64)?;
                let x = d.x.column(0).to_vec();
                oracle_mse(&x, &d.y, &d.truth, &basis, cfg.m, cfg.n_lambda, cfg.lambda_min_ratio)
            })
            .collect::<Result<_>>()?;
        let reps = runs.len() as f64;
        let mean = runs.iter().map(|r| r.0).sum::<f64>() / reps;
        let var = runs.iter().map(|r| (r.0 - mean).powi(2)).sum::<f64>() / (reps - 1.0).max(1.0);
        points.push(RatePoint {
            n,
            mean_mse: mean,
            se_mse: (var / reps).sqrt(),
            mean_oracle_lambda: runs.iter().map(|r| r.1).sum::<f64>() / reps,
        });
    }
    let ns: Vec<usize> = points.iter().map(|p| p.n).collect();
    let ms: Vec<f64> = points.iter().map(|p| p.mean_mse).collect();
    Ok(RateResult { slope: loglog_slope(&ns, &ms), points })
}
