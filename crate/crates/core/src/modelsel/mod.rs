//! Simulation designs, error metrics, cross-validation and rate experiments.

pub mod cv;
pub mod rate;
pub mod sim;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::additive::AdditiveFit;
use crate::error::{HierError, Result};
use crate::logistic::LogisticFit;

pub use cv::{kfold_cv, kfold_cv_on_grid, kfold_cv_with_folds, CvMetric, CvOptions, CvResult, FitFamily, Prepared};
pub use rate::{rate_experiment, RateConfig, RateResult};
pub use sim::{generate, Dataset, Design, Generator, SimSpec};

/// `||f - g||_n^2`, the mean squared difference.
pub fn mse(f_hat: &[f64], f_true: &[f64]) -> Result<f64> {
    if f_hat.len() != f_true.len() || f_hat.is_empty() {
        return Err(HierError::DimensionMismatch(format!(
            "mse of vectors with {} and {} entries",
            f_hat.len(),
            f_true.len()
        )));
    }
    Ok(f_hat.iter().zip(f_true).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / f_hat.len() as f64)
}

/// Fits with one component per feature.
pub trait ComponentModel {
    fn component_k0(&self) -> Vec<usize>;
}

impl ComponentModel for AdditiveFit {
    fn component_k0(&self) -> Vec<usize> {
        self.k0()
    }
}

impl ComponentModel for LogisticFit {
    fn component_k0(&self) -> Vec<usize> {
        self.k0()
    }
}

/// Share of components that are identically zero.
pub fn sparsity<F: ComponentModel>(fit: &F) -> f64 {
    let k0 = fit.component_k0();
    if k0.is_empty() {
        return 1.0;
    }
    k0.iter().filter(|&&k| k == 0).count() as f64 / k0.len() as f64
}

/// One row of a long-format result table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TidyRow {
    pub experiment: String,
    pub n: usize,
    pub p: usize,
    pub lambda: f64,
    pub metric: String,
    pub value: f64,
    pub seed: u64,
}

pub fn write_tidy_csv<W: Write>(rows: &[TidyRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    if rows.is_empty() {
        w.write_record(["experiment", "n", "p", "lambda", "metric", "value", "seed"])
            .map_err(|e| HierError::InvalidInput(e.to_string()))?;
    }
    for r in rows {
        w.serialize(r).map_err(|e| HierError::InvalidInput(e.to_string()))?;
    }
    w.flush().map_err(|e| HierError::InvalidInput(e.to_string()))?;
    Ok(())
}
