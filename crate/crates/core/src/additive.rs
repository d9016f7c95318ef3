//! Additive and sparse additive fits by block coordinate descent.
//!
//! Each feature `j` gets its own orthonormalized expansion `U_j`. With the
//! full residual `r`, the partial-residual projection is
//! `U_j^T r_{-j} / n = U_j^T r / n + beta_j`, so a block update is one prox
//! and one rank-K residual correction, `O(nK)` per block.
//!
//! The sparse variant adds `lambda^2 * ||Psi_j beta_j||_n` per feature, which
//! is the same as raising the first weight to `w_1 + lambda`.
//!
//! Sweeps follow the usual active-set scheme: one pass over every feature,
//! then passes over the nonzero blocks until they settle, then a full pass to
//! confirm. Every pass is an exact block minimization, so the objective never
//! increases.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{expand, orthonormalize, BasisConfig, BasisMap, OrthoBasis};
use crate::error::{check_finite, check_lambda, HierError, Result};
use crate::prox::{self, univariate_weights};
use crate::univariate::{log_grid, LAMBDA_MAX_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightPreset {
    /// `w_k = k^m - (k-1)^m`.
    HierBasis,
    /// `w = (1, 0, .., 0)`: one group per feature.
    Spam,
    /// `w = (1, 1, 0, .., 0)`: linear part separated from the rest.
    Splam,
}

impl WeightPreset {
    pub fn weights(&self, m: f64, k: usize) -> Vec<f64> {
        match self {
            WeightPreset::HierBasis => univariate_weights(m, k).w,
            WeightPreset::Spam => (0..k).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect(),
            WeightPreset::Splam => (0..k).map(|i| if i < 2 { 1.0 } else { 0.0 }).collect(),
        }
    }
}

impl std::str::FromStr for WeightPreset {
    type Err = HierError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hierbasis" => Ok(WeightPreset::HierBasis),
            "spam" => Ok(WeightPreset::Spam),
            "splam" => Ok(WeightPreset::Splam),
            other => Err(HierError::InvalidInput(format!("unknown weight preset '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditiveConfig {
    /// Expansion used for every feature.
    pub basis: BasisConfig,
    pub m: f64,
    /// Add the feature-level `lambda^2` term.
    pub sparse: bool,
    pub preset: WeightPreset,
    pub max_iter: usize,
    /// Stop when the largest block change `||U_j (new - old)||_n` falls below this.
    pub tol: f64,
    /// Shuffle the feature order of every full sweep with this seed.
    pub shuffle_seed: Option<u64>,
}

impl AdditiveConfig {
    pub fn new(basis: BasisConfig) -> Self {
        AdditiveConfig {
            basis,
            m: 3.0,
            sparse: true,
            preset: WeightPreset::HierBasis,
            max_iter: 1000,
            tol: 1e-7,
            shuffle_seed: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_iter < 1 {
            return Err(HierError::InvalidInput("max_iter must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(HierError::InvalidInput(format!("tol = {} must be positive", self.tol)));
        }
        if !(self.m > 0.0) {
            return Err(HierError::InvalidInput(format!("m = {} must be positive", self.m)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentFit {
    pub beta_t: Vec<f64>,
    pub beta: Vec<f64>,
    pub k0: usize,
    /// `None` for a feature dropped as degenerate.
    pub basis: Option<BasisMap>,
}

impl ComponentFit {
    pub fn is_active(&self) -> bool {
        self.k0 > 0
    }

    pub fn evaluate(&self, x: &[f64]) -> Array1<f64> {
        match &self.basis {
            Some(map) if self.is_active() => map.component(x, &self.beta),
            _ => Array1::zeros(x.len()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditiveFit {
    pub components: Vec<ComponentFit>,
    pub intercept: f64,
    pub lambda: f64,
    pub n_iters: usize,
    pub converged: bool,
    pub objective: f64,
    /// Objective after every sweep.
    pub objective_trace: Vec<f64>,
    /// Features dropped because their expansion was degenerate.
    pub dropped: Vec<usize>,
}

impl AdditiveFit {
    pub fn active_set(&self) -> Vec<usize> {
        (0..self.components.len()).filter(|&j| self.components[j].is_active()).collect()
    }

    pub fn k0(&self) -> Vec<usize> {
        self.components.iter().map(|c| c.k0).collect()
    }

    pub fn predict(&self, x_new: ArrayView2<f64>) -> Result<Array1<f64>> {
        predict_additive(self, x_new)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdditivePath {
    pub lambdas: Vec<f64>,
    pub fits: Vec<AdditiveFit>,
}

#[derive(Debug, Clone)]
pub(crate) struct Block {
    pub(crate) map: BasisMap,
    pub(crate) ortho: OrthoBasis,
    /// Transformed-coordinate weights without the sparse `lambda` term.
    pub(crate) weights: Vec<f64>,
}

/// Expands and orthonormalizes every column; degenerate features become `None`.
pub(crate) fn build_blocks(
    x: ArrayView2<f64>,
    basis: &BasisConfig,
    raw_weights: &[f64],
) -> Result<Vec<Option<Block>>> {
    let mut blocks = Vec::with_capacity(x.ncols());
    for col in x.columns() {
        let xj = col.to_vec();
        let block = match expand(&xj, basis) {
            Ok(e) => match orthonormalize(e.matrix.view()) {
                Ok(ortho) => {
                    let weights = ortho.transformed_weights(raw_weights);
                    Some(Block { map: e.map, ortho, weights })
                }
                Err(HierError::DegenerateCovariate(_)) => None,
                Err(e) => return Err(e),
            },
            Err(HierError::DegenerateCovariate(_)) => None,
            Err(e) => return Err(e),
        };
        blocks.push(block);
    }
    if blocks.iter().all(Option::is_none) {
        return Err(HierError::DegenerateCovariate("every feature is constant".into()));
    }
    Ok(blocks)
}

/// Block weights at `lambda`: the sparse term raises the first weight by `lambda`.
pub(crate) fn effective_weights(base: &[f64], lambda: f64, sparse: bool) -> Vec<f64> {
    let mut w = base.to_vec();
    if sparse {
        if let Some(first) = w.first_mut() {
            *first += lambda;
        }
    }
    w
}

/// A dataset prepared for additive fits: one orthonormal factor per feature.
#[derive(Debug, Clone)]
pub struct AdditiveProblem {
    blocks: Vec<Option<Block>>,
    y_centered: Array1<f64>,
    y_mean: f64,
    config: AdditiveConfig,
}

impl AdditiveProblem {
    pub fn new(x: ArrayView2<f64>, y: &[f64], config: &AdditiveConfig) -> Result<Self> {
        config.validate()?;
        let (n, p) = x.dim();
        if n < 2 || p < 1 {
            return Err(HierError::InvalidInput(format!("need n >= 2 and p >= 1, got {n} x {p}")));
        }
        if y.len() != n {
            return Err(HierError::DimensionMismatch(format!(
                "X has {n} rows, y has {} entries",
                y.len()
            )));
        }
        check_finite(y, "response")?;
        check_finite(x.iter(), "design")?;
        let raw_weights = config.preset.weights(config.m, config.basis.k);
        let blocks = build_blocks(x, &config.basis, &raw_weights)?;
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let y_centered = y.iter().map(|v| v - y_mean).collect();
        Ok(AdditiveProblem { blocks, y_centered, y_mean, config: config.clone() })
    }

    pub fn n(&self) -> usize {
        self.y_centered.len()
    }

    pub fn p(&self) -> usize {
        self.blocks.len()
    }

    pub fn config(&self) -> &AdditiveConfig {
        &self.config
    }

    pub fn dropped(&self) -> Vec<usize> {
        (0..self.p()).filter(|&j| self.blocks[j].is_none()).collect()
    }

    /// Orthonormal factor of feature `j`, if it was not dropped.
    pub fn ortho(&self, j: usize) -> Option<&OrthoBasis> {
        self.blocks.get(j).and_then(|b| b.as_ref()).map(|b| &b.ortho)
    }

    fn block_weights(&self, base: &[f64], lambda: f64) -> Vec<f64> {
        effective_weights(base, lambda, self.config.sparse)
    }

    /// Smallest `lambda` at which every block is zero.
    pub fn lambda_max(&self) -> Result<f64> {
        let mut best = 0.0_f64;
        for block in self.blocks.iter().flatten() {
            let c = block.ortho.project(self.y_centered.view()).to_vec();
            let lm = prox::lambda_max_with(&c, LAMBDA_MAX_TOL, |lam| {
                self.block_weights(&block.weights, lam)
            })?;
            best = best.max(lm);
        }
        Ok(best)
    }

    pub fn fit(&self, lambda: f64) -> Result<AdditiveFit> {
        self.fit_warm(lambda, None)
    }

    /// Fit starting from the transformed coefficients of `init`.
    pub fn fit_warm(&self, lambda: f64, init: Option<&AdditiveFit>) -> Result<AdditiveFit> {
        check_lambda(lambda)?;
        let mut state = BcdState::new(self, lambda, init)?;
        state.run()?;
        state.into_fit()
    }

    pub fn lambda_grid(&self, n_lambda: usize, lambda_min_ratio: f64) -> Result<Vec<f64>> {
        log_grid(self.lambda_max()?, n_lambda, lambda_min_ratio)
    }

    pub fn path(&self, n_lambda: usize, lambda_min_ratio: f64) -> Result<AdditivePath> {
        let lambdas = self.lambda_grid(n_lambda, lambda_min_ratio)?;
        self.path_on(&lambdas)
    }

    /// Warm-started fits along a decreasing grid.
    pub fn path_on(&self, lambdas: &[f64]) -> Result<AdditivePath> {
        let mut fits: Vec<AdditiveFit> = Vec::with_capacity(lambdas.len());
        for &lam in lambdas {
            let fit = self.fit_warm(lam, fits.last())?;
            fits.push(fit);
        }
        Ok(AdditivePath { lambdas: lambdas.to_vec(), fits })
    }

    /// Starts a solver state for step-by-step inspection.
    pub fn solver(&self, lambda: f64) -> Result<BcdState<'_>> {
        check_lambda(lambda)?;
        BcdState::new(self, lambda, None)
    }
}

/// Block coordinate descent iterate: transformed coefficients and the full
/// residual `y - ybar - sum_j U_j beta_j`.
#[derive(Debug, Clone)]
pub struct BcdState<'a> {
    problem: &'a AdditiveProblem,
    lambda: f64,
    betas: Vec<Vec<f64>>,
    weights: Vec<Vec<f64>>,
    residual: Array1<f64>,
    n_iters: usize,
    converged: bool,
    trace: Vec<f64>,
    order_rng: Option<ChaCha8Rng>,
    factors: Vec<f64>,
}

impl<'a> BcdState<'a> {
    fn new(problem: &'a AdditiveProblem, lambda: f64, init: Option<&AdditiveFit>) -> Result<Self> {
        let p = problem.p();
        let mut betas: Vec<Vec<f64>> = problem
            .blocks
            .iter()
            .map(|b| vec![0.0; b.as_ref().map_or(0, |b| b.ortho.rank())])
            .collect();
        if let Some(init) = init {
            if init.components.len() != p {
                return Err(HierError::DimensionMismatch(format!(
                    "warm start has {} components, problem has {p}",
                    init.components.len()
                )));
            }
            for (dst, src) in betas.iter_mut().zip(&init.components) {
                if dst.len() == src.beta_t.len() {
                    dst.copy_from_slice(&src.beta_t);
                }
            }
        }
        let weights = problem
            .blocks
            .iter()
            .map(|b| b.as_ref().map_or(Vec::new(), |b| problem.block_weights(&b.weights, lambda)))
            .collect();
        let mut residual = problem.y_centered.clone();
        for (block, beta) in problem.blocks.iter().zip(&betas) {
            if let Some(block) = block {
                if beta.iter().any(|&b| b != 0.0) {
                    residual -= &block.ortho.fitted(ArrayView1::from(&beta[..]));
                }
            }
        }
        let order_rng = problem.config.shuffle_seed.map(ChaCha8Rng::seed_from_u64);
        Ok(BcdState {
            problem,
            lambda,
            betas,
            weights,
            residual,
            n_iters: 0,
            converged: false,
            trace: Vec::new(),
            order_rng,
            factors: Vec::new(),
        })
    }

    /// Exact minimization over block `j`; returns `||U_j (new - old)||_n`.
    pub fn update_block(&mut self, j: usize) -> f64 {
        let Some(block) = &self.problem.blocks[j] else {
            return 0.0;
        };
        let beta = &mut self.betas[j];
        let residual = self.residual.as_slice_mut().expect("residual is contiguous");
        let mut new = vec![0.0; beta.len()];
        block.ortho.project_into(residual, &mut new);
        for (c, b) in new.iter_mut().zip(beta.iter()) {
            *c += b;
        }
        prox::prox_in_place(&mut new, self.lambda, &self.weights[j], &mut self.factors);
        let delta: Vec<f64> = new.iter().zip(beta.iter()).map(|(a, b)| a - b).collect();
        let change = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
        if change > 0.0 {
            block.ortho.add_fitted(&delta, -1.0, residual);
            beta.copy_from_slice(&new);
        }
        change
    }

    pub fn objective(&self) -> f64 {
        let n = self.residual.len() as f64;
        let loss = 0.5 * self.residual.dot(&self.residual) / n;
        let pen: f64 = self
            .betas
            .iter()
            .zip(&self.weights)
            .map(|(b, w)| prox::penalty_value(b, w))
            .sum();
        loss + self.lambda * pen
    }

    fn sweep(&mut self, order: &[usize]) -> f64 {
        let mut max_change = 0.0_f64;
        for &j in order {
            max_change = max_change.max(self.update_block(j));
        }
        self.n_iters += 1;
        let obj = self.objective();
        self.trace.push(obj);
        max_change
    }

    fn full_order(&mut self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.problem.p()).collect();
        if let Some(rng) = self.order_rng.as_mut() {
            order.shuffle(rng);
        }
        order
    }

    pub fn run(&mut self) -> Result<()> {
        let cfg = &self.problem.config;
        let (tol, max_iter) = (cfg.tol, cfg.max_iter);
        while self.n_iters < max_iter {
            let order = self.full_order();
            if self.sweep(&order) < tol {
                self.converged = true;
                break;
            }
            let active: Vec<usize> =
                order.into_iter().filter(|&j| self.betas[j].iter().any(|&b| b != 0.0)).collect();
            while self.n_iters < max_iter {
                if self.sweep(&active) < tol {
                    break;
                }
            }
        }
        Ok(())
    }

    pub fn into_fit(self) -> Result<AdditiveFit> {
        let objective = self.objective();
        let mut components = Vec::with_capacity(self.betas.len());
        for (block, beta_t) in self.problem.blocks.iter().zip(self.betas) {
            let comp = match block {
                Some(block) => {
                    let beta = block.ortho.back_transform(ArrayView1::from(&beta_t))?.to_vec();
                    ComponentFit {
                        k0: crate::support_len(&beta_t),
                        beta_t,
                        beta,
                        basis: Some(block.map.clone()),
                    }
                }
                None => ComponentFit { beta_t: Vec::new(), beta: Vec::new(), k0: 0, basis: None },
            };
            components.push(comp);
        }
        Ok(AdditiveFit {
            components,
            intercept: self.problem.y_mean,
            lambda: self.lambda,
            n_iters: self.n_iters,
            converged: self.converged,
            objective,
            objective_trace: self.trace,
            dropped: self.problem.dropped(),
        })
    }

    pub fn betas(&self) -> &[Vec<f64>] {
        &self.betas
    }
}

pub fn fit_additive(
    x: ArrayView2<f64>,
    y: &[f64],
    config: &AdditiveConfig,
    lambda: f64,
) -> Result<AdditiveFit> {
    AdditiveProblem::new(x, y, config)?.fit(lambda)
}

pub fn fit_additive_path(
    x: ArrayView2<f64>,
    y: &[f64],
    config: &AdditiveConfig,
    n_lambda: usize,
    lambda_min_ratio: f64,
) -> Result<AdditivePath> {
    AdditiveProblem::new(x, y, config)?.path(n_lambda, lambda_min_ratio)
}

pub fn predict_additive(fit: &AdditiveFit, x_new: ArrayView2<f64>) -> Result<Array1<f64>> {
    let p = fit.components.len();
    if x_new.ncols() != p {
        return Err(HierError::DimensionMismatch(format!(
            "model has {p} features, data has {}",
            x_new.ncols()
        )));
    }
    let mut out = Array1::from_elem(x_new.nrows(), fit.intercept);
    for (j, comp) in fit.components.iter().enumerate() {
        if comp.is_active() {
            out += &comp.evaluate(&x_new.column(j).to_vec());
        }
    }
    Ok(out)
}

/// Fitted component `f_j` on `grid`; zeros when the feature is inactive.
pub fn component_function(fit: &AdditiveFit, j: usize, grid: &[f64]) -> Result<Array1<f64>> {
    let comp = fit.components.get(j).ok_or_else(|| {
        HierError::InvalidInput(format!(
            "feature index {j} out of range for {} features",
            fit.components.len()
        ))
    })?;
    Ok(comp.evaluate(grid))
}

/// Column-stacks feature vectors into an `n x p` matrix.
pub fn design_from_columns(columns: &[Vec<f64>]) -> Result<Array2<f64>> {
    let p = columns.len();
    let n = columns.first().map_or(0, Vec::len);
    if columns.iter().any(|c| c.len() != n) {
        return Err(HierError::DimensionMismatch("columns have different lengths".into()));
    }
    Ok(Array2::from_shape_fn((n, p), |(i, j)| columns[j][i]))
}
