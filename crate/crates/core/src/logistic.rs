//! Binary classification with the hierarchical penalty.
//!
//! The loss is `L(b0, beta) = 1/(2n) sum log(1 + exp(-y_i eta_i))` with
//! `eta = b0 + sum_j U_j beta_j` and labels in `{-1, +1}`. The factor `1/2`
//! keeps `lambda` on the same scale as the squared-error fits.
//!
//! Fits use proximal gradient descent. Each iteration takes a gradient step on
//! the intercept and every block, applies the hierarchical prox to each block,
//! and backtracks (`t <- t/2` from `t = 1`) until the quadratic upper bound
//!
//! ```text
//! L(z+) <= L(z) + grad L(z) . (z+ - z) + ||z+ - z||^2 / (2t)
//! ```
//!
//! holds, so every accepted step decreases the penalized objective.

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::additive::{build_blocks, effective_weights, AdditiveConfig, Block, ComponentFit};
use crate::basis::BasisConfig;
use crate::error::{check_finite, check_lambda, HierError, Result};
use crate::prox::{self, univariate_weights};
use crate::univariate::{log_grid, LAMBDA_MAX_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticOptions {
    pub max_iter: usize,
    /// Relative objective change below which the iteration may stop.
    pub tol: f64,
    /// Bound on the gradient-mapping norm `||z+ - z|| / t`, checked together with `tol`.
    pub grad_tol: f64,
    pub initial_step: f64,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        LogisticOptions { max_iter: 5000, tol: 1e-8, grad_tol: 1e-7, initial_step: 1.0 }
    }
}

/// How the caller's labels map onto `{-1, +1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelCoding {
    pub negative: f64,
    pub positive: f64,
}

/// Maps `{0, 1}` or `{-1, +1}` labels to `{-1, +1}`; both classes must occur.
pub fn to_signed_labels(y: &[f64]) -> Result<(Vec<f64>, LabelCoding)> {
    check_finite(y, "labels")?;
    let has = |v: f64| y.contains(&v);
    let negative = match (has(0.0), has(-1.0)) {
        (true, true) => {
            return Err(HierError::InvalidLabels("labels mix 0 and -1".into()));
        }
        (true, false) => 0.0,
        (false, true) => -1.0,
        (false, false) => {
            return Err(HierError::InvalidLabels("only one class present".into()));
        }
    };
    if let Some(bad) = y.iter().find(|&&t| t != negative && t != 1.0) {
        return Err(HierError::InvalidLabels(format!(
            "label {bad} is not in {{{negative}, 1}}"
        )));
    }
    if !has(1.0) {
        return Err(HierError::InvalidLabels("only one class present".into()));
    }
    let signed = y.iter().map(|&t| if t == 1.0 { 1.0 } else { -1.0 }).collect();
    Ok((signed, LabelCoding { negative, positive: 1.0 }))
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Loss and derivative with respect to `eta`, both already scaled by `1/(2n)`.
fn loss_and_eta_grad(eta: &[f64], y: &[f64], g: &mut [f64]) -> f64 {
    let scale = 0.5 / eta.len() as f64;
    let mut loss = 0.0;
    for ((gi, &e), &yi) in g.iter_mut().zip(eta).zip(y) {
        loss += softplus(-yi * e);
        *gi = -scale * yi * sigmoid(-yi * e);
    }
    loss * scale
}

fn loss_only(eta: &[f64], y: &[f64]) -> f64 {
    let s: f64 = eta.iter().zip(y).map(|(&e, &yi)| softplus(-yi * e)).sum();
    0.5 * s / eta.len() as f64
}

/// Loss and gradient `(d/d b0, d/d beta_t)` for a single orthonormal block `u`.
pub fn logistic_loss_grad(
    beta0: f64,
    beta_t: &[f64],
    u: ArrayView2<f64>,
    y: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let n = u.nrows();
    if y.len() != n || beta_t.len() != u.ncols() {
        return Err(HierError::DimensionMismatch(format!(
            "U is {} x {}, y has {} entries, beta has {}",
            n,
            u.ncols(),
            y.len(),
            beta_t.len()
        )));
    }
    if let Some(bad) = y.iter().find(|&&t| t != 1.0 && t != -1.0) {
        return Err(HierError::InvalidLabels(format!("label {bad} is not in {{-1, +1}}")));
    }
    let eta = u.dot(&ArrayView1::from(beta_t)) + beta0;
    let mut g = vec![0.0; n];
    let loss = loss_and_eta_grad(eta.as_slice().unwrap(), y, &mut g);
    let gv = ArrayView1::from(&g[..]);
    let mut grad = Vec::with_capacity(beta_t.len() + 1);
    grad.push(gv.sum());
    grad.extend(u.t().dot(&gv).iter());
    Ok((loss, grad))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub intercept: f64,
    /// One component for a univariate fit, one per feature for an additive fit.
    pub components: Vec<ComponentFit>,
    pub lambda: f64,
    pub additive: bool,
    pub sparse: bool,
    pub n_iters: usize,
    pub converged: bool,
    pub final_loss: f64,
    pub objective: f64,
    /// Penalized objective after every accepted step, starting point first.
    pub objective_trace: Vec<f64>,
    pub coding: LabelCoding,
    pub dropped: Vec<usize>,
}

impl LogisticFit {
    pub fn k0(&self) -> Vec<usize> {
        self.components.iter().map(|c| c.k0).collect()
    }

    pub fn active_set(&self) -> Vec<usize> {
        (0..self.components.len()).filter(|&j| self.components[j].is_active()).collect()
    }

    /// Linear predictor `b0 + sum_j f_j(x_j)`.
    pub fn decision_function(&self, x_new: ArrayView2<f64>) -> Result<Array1<f64>> {
        let p = self.components.len();
        if x_new.ncols() != p {
            return Err(HierError::DimensionMismatch(format!(
                "model has {p} features, data has {}",
                x_new.ncols()
            )));
        }
        let mut out = Array1::from_elem(x_new.nrows(), self.intercept);
        for (j, comp) in self.components.iter().enumerate() {
            if comp.is_active() {
                out += &comp.evaluate(&x_new.column(j).to_vec());
            }
        }
        Ok(out)
    }

    /// Probability of the positive class.
    pub fn predict_proba(&self, x_new: ArrayView2<f64>) -> Result<Array1<f64>> {
        Ok(self.decision_function(x_new)?.mapv(sigmoid))
    }

    /// Predicted labels in the caller's coding.
    pub fn predict_class(&self, x_new: ArrayView2<f64>) -> Result<Array1<f64>> {
        let c = self.coding;
        Ok(self
            .decision_function(x_new)?
            .mapv(|e| if e >= 0.0 { c.positive } else { c.negative }))
    }
}

pub fn predict_proba(fit: &LogisticFit, x_new: ArrayView2<f64>) -> Result<Array1<f64>> {
    fit.predict_proba(x_new)
}

/// A labelled dataset prepared for logistic fits.
#[derive(Debug, Clone)]
pub struct LogisticProblem {
    blocks: Vec<Option<Block>>,
    y: Vec<f64>,
    coding: LabelCoding,
    sparse: bool,
    additive: bool,
}

struct Iterate {
    b0: f64,
    betas: Vec<Vec<f64>>,
}

impl LogisticProblem {
    /// Single covariate, weights `k^m - (k-1)^m`.
    pub fn univariate(x: &[f64], y: &[f64], config: &BasisConfig, m: f64) -> Result<Self> {
        if !(m > 0.0) {
            return Err(HierError::InvalidInput(format!("m = {m} must be positive")));
        }
        let x2 = Array1::from(x.to_vec()).insert_axis(ndarray::Axis(1));
        Self::build(x2.view(), y, config, &univariate_weights(m, config.k).w, false, false)
    }

    /// Additive model; `config.sparse` adds the feature-level `lambda^2` term.
    pub fn additive(x: ArrayView2<f64>, y: &[f64], config: &AdditiveConfig) -> Result<Self> {
        if !(config.m > 0.0) {
            return Err(HierError::InvalidInput(format!("m = {} must be positive", config.m)));
        }
        let w = config.preset.weights(config.m, config.basis.k);
        Self::build(x, y, &config.basis, &w, config.sparse, true)
    }

    fn build(
        x: ArrayView2<f64>,
        y: &[f64],
        basis: &BasisConfig,
        raw_weights: &[f64],
        sparse: bool,
        additive: bool,
    ) -> Result<Self> {
        let n = x.nrows();
        if n < 2 {
            return Err(HierError::InvalidInput(format!("need at least 2 observations, got {n}")));
        }
        if y.len() != n {
            return Err(HierError::DimensionMismatch(format!(
                "X has {n} rows, y has {} entries",
                y.len()
            )));
        }
        check_finite(x.iter(), "design")?;
        let (signed, coding) = to_signed_labels(y)?;
        let blocks = build_blocks(x, basis, raw_weights)?;
        Ok(LogisticProblem { blocks, y: signed, coding, sparse, additive })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.blocks.len()
    }

    /// Labels in `{-1, +1}`.
    pub fn signed_labels(&self) -> &[f64] {
        &self.y
    }

    /// `log(n+ / n-)`, the unpenalized intercept-only solution.
    pub fn null_intercept(&self) -> f64 {
        let pos = self.y.iter().filter(|&&t| t > 0.0).count() as f64;
        let neg = self.n() as f64 - pos;
        (pos / neg).ln()
    }

    fn weights_at(&self, lambda: f64) -> Vec<Vec<f64>> {
        self.blocks
            .iter()
            .map(|b| b.as_ref().map_or(Vec::new(), |b| effective_weights(&b.weights, lambda, self.sparse)))
            .collect()
    }

    fn eta(&self, it: &Iterate) -> Vec<f64> {
        let mut eta = Array1::from_elem(self.n(), it.b0);
        for (block, beta) in self.blocks.iter().zip(&it.betas) {
            if let Some(block) = block {
                if beta.iter().any(|&b| b != 0.0) {
                    eta += &block.ortho.fitted(ArrayView1::from(&beta[..]));
                }
            }
        }
        eta.to_vec()
    }

    /// Loss and gradient (`d/d b0`, per-block `d/d beta_j`) at an iterate.
    fn loss_grad(&self, it: &Iterate) -> (f64, f64, Vec<Vec<f64>>) {
        let eta = self.eta(it);
        let mut g = vec![0.0; eta.len()];
        let loss = loss_and_eta_grad(&eta, &self.y, &mut g);
        let gv = ArrayView1::from(&g[..]);
        let grads = self
            .blocks
            .iter()
            .map(|b| b.as_ref().map_or(Vec::new(), |b| b.ortho.u().t().dot(&gv).to_vec()))
            .collect();
        (loss, gv.sum(), grads)
    }

    fn zero_iterate(&self, b0: f64) -> Iterate {
        Iterate {
            b0,
            betas: self
                .blocks
                .iter()
                .map(|b| vec![0.0; b.as_ref().map_or(0, |b| b.ortho.rank())])
                .collect(),
        }
    }

    /// Block gradients at the intercept-only solution.
    fn null_gradients(&self) -> Vec<Vec<f64>> {
        self.loss_grad(&self.zero_iterate(self.null_intercept())).2
    }

    /// Smallest `lambda` at which every block is zero.
    pub fn lambda_max(&self) -> Result<f64> {
        let mut best = 0.0_f64;
        for (block, g) in self.blocks.iter().zip(self.null_gradients()) {
            if let Some(block) = block {
                let c: Vec<f64> = g.iter().map(|v| -v).collect();
                let lm = prox::lambda_max_with(&c, LAMBDA_MAX_TOL, |lam| {
                    effective_weights(&block.weights, lam, self.sparse)
                })?;
                best = best.max(lm);
            }
        }
        Ok(best)
    }

    pub fn lambda_grid(&self, n_lambda: usize, lambda_min_ratio: f64) -> Result<Vec<f64>> {
        log_grid(self.lambda_max()?, n_lambda, lambda_min_ratio)
    }

    fn penalty(&self, it: &Iterate, weights: &[Vec<f64>]) -> f64 {
        it.betas.iter().zip(weights).map(|(b, w)| prox::penalty_value(b, w)).sum()
    }

    pub fn fit(&self, lambda: f64, opts: &LogisticOptions) -> Result<LogisticFit> {
        self.fit_warm(lambda, opts, None)
    }

    pub fn fit_warm(
        &self,
        lambda: f64,
        opts: &LogisticOptions,
        init: Option<&LogisticFit>,
    ) -> Result<LogisticFit> {
        check_lambda(lambda)?;
        if opts.max_iter < 1 || !(opts.tol > 0.0) || !(opts.initial_step > 0.0) || opts.grad_tol < 0.0 {
            return Err(HierError::InvalidInput(format!("invalid logistic options {opts:?}")));
        }
        let weights = self.weights_at(lambda);

        // Zero is optimal exactly when the prox of every negative null gradient vanishes.
        let mut screened = true;
        for (g, w) in self.null_gradients().iter().zip(&weights) {
            if !g.is_empty() {
                let c: Vec<f64> = g.iter().map(|v| -v).collect();
                if prox::hier_prox(&c, lambda, w)?.iter().any(|&b| b != 0.0) {
                    screened = false;
                    break;
                }
            }
        }
        if screened {
            let it = self.zero_iterate(self.null_intercept());
            let loss = loss_only(&self.eta(&it), &self.y);
            return self.finish(it, lambda, 0, true, loss, vec![loss]);
        }

        let mut it = self.zero_iterate(self.null_intercept());
        if let Some(init) = init {
            if init.components.len() == self.p() {
                it.b0 = init.intercept;
                for (dst, src) in it.betas.iter_mut().zip(&init.components) {
                    if dst.len() == src.beta_t.len() {
                        dst.copy_from_slice(&src.beta_t);
                    }
                }
            }
        }

        let (mut loss, mut g0, mut grads) = self.loss_grad(&it);
        let mut obj = loss + lambda * self.penalty(&it, &weights);
        let mut trace = vec![obj];
        let mut converged = false;
        let mut n_iters = 0;
        let mut factors = Vec::new();
        while n_iters < opts.max_iter {
            n_iters += 1;
            let mut t = opts.initial_step;
            let (next, next_loss, step_sq) = loop {
                let mut next = Iterate { b0: it.b0 - t * g0, betas: Vec::with_capacity(self.p()) };
                let mut lin = g0 * (next.b0 - it.b0);
                let mut step_sq = (next.b0 - it.b0).powi(2);
                for ((beta, g), w) in it.betas.iter().zip(&grads).zip(&weights) {
                    let mut nb: Vec<f64> = beta.iter().zip(g).map(|(b, gi)| b - t * gi).collect();
                    prox::prox_in_place(&mut nb, t * lambda, w, &mut factors);
                    for ((a, b), gi) in nb.iter().zip(beta).zip(g) {
                        lin += gi * (a - b);
                        step_sq += (a - b) * (a - b);
                    }
                    next.betas.push(nb);
                }
                let next_loss = loss_only(&self.eta(&next), &self.y);
                let bound = loss + lin + step_sq / (2.0 * t);
                if next_loss <= bound + 1e-15 * loss.abs() || step_sq == 0.0 {
                    break (next, next_loss, step_sq);
                }
                t *= 0.5;
                if t < 1e-20 {
                    return Err(HierError::NoConvergence(
                        "line search failed to find a descent step".into(),
                    ));
                }
            };
            let next_obj = next_loss + lambda * self.penalty(&next, &weights);
            let rel = (obj - next_obj).abs() / next_obj.abs().max(f64::MIN_POSITIVE);
            let grad_map = step_sq.sqrt() / t;
            it = next;
            obj = next_obj;
            trace.push(obj);
            (loss, g0, grads) = self.loss_grad(&it);
            if step_sq == 0.0 || (rel < opts.tol && grad_map < opts.grad_tol) {
                converged = true;
                break;
            }
        }
        self.finish(it, lambda, n_iters, converged, loss, trace)
    }

    fn finish(
        &self,
        it: Iterate,
        lambda: f64,
        n_iters: usize,
        converged: bool,
        final_loss: f64,
        objective_trace: Vec<f64>,
    ) -> Result<LogisticFit> {
        let mut components = Vec::with_capacity(self.p());
        for (block, beta_t) in self.blocks.iter().zip(it.betas) {
            components.push(match block {
                Some(block) => ComponentFit {
                    beta: block.ortho.back_transform(ArrayView1::from(&beta_t))?.to_vec(),
                    k0: crate::support_len(&beta_t),
                    beta_t,
                    basis: Some(block.map.clone()),
                },
                None => ComponentFit { beta_t: Vec::new(), beta: Vec::new(), k0: 0, basis: None },
            });
        }
        let objective = *objective_trace.last().unwrap_or(&final_loss);
        Ok(LogisticFit {
            intercept: it.b0,
            components,
            lambda,
            additive: self.additive,
            sparse: self.sparse,
            n_iters,
            converged,
            final_loss,
            objective,
            objective_trace,
            coding: self.coding,
            dropped: (0..self.p()).filter(|&j| self.blocks[j].is_none()).collect(),
        })
    }

    /// Warm-started fits along a decreasing grid.
    pub fn path_on(&self, lambdas: &[f64], opts: &LogisticOptions) -> Result<Vec<LogisticFit>> {
        let mut fits: Vec<LogisticFit> = Vec::with_capacity(lambdas.len());
        for &lam in lambdas {
            let fit = self.fit_warm(lam, opts, fits.last())?;
            fits.push(fit);
        }
        Ok(fits)
    }

    /// Proximal-gradient fixed-point residual `||z - prox(z - grad L(z))||`,
    /// zero exactly at a minimizer.
    pub fn kkt_residual(&self, fit: &LogisticFit) -> f64 {
        let it = Iterate {
            b0: fit.intercept,
            betas: fit.components.iter().map(|c| c.beta_t.clone()).collect(),
        };
        let weights = self.weights_at(fit.lambda);
        let (_, g0, grads) = self.loss_grad(&it);
        let mut sq = g0 * g0;
        let mut factors = Vec::new();
        for ((beta, g), w) in it.betas.iter().zip(&grads).zip(&weights) {
            let mut nb: Vec<f64> = beta.iter().zip(g).map(|(b, gi)| b - gi).collect();
            prox::prox_in_place(&mut nb, fit.lambda, w, &mut factors);
            sq += nb.iter().zip(beta).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        sq.sqrt()
    }

    /// Probabilities implied by the fit on the training rows.
    pub fn training_proba(&self, fit: &LogisticFit) -> Vec<f64> {
        let it = Iterate {
            b0: fit.intercept,
            betas: fit.components.iter().map(|c| c.beta_t.clone()).collect(),
        };
        self.eta(&it).into_iter().map(sigmoid).collect()
    }
}

pub fn fit_logistic(
    x: &[f64],
    y: &[f64],
    config: &BasisConfig,
    m: f64,
    lambda: f64,
) -> Result<LogisticFit> {
    LogisticProblem::univariate(x, y, config, m)?.fit(lambda, &LogisticOptions::default())
}

pub fn fit_logistic_additive(
    x: ArrayView2<f64>,
    y: &[f64],
    config: &AdditiveConfig,
    lambda: f64,
) -> Result<LogisticFit> {
    LogisticProblem::additive(x, y, config)?.fit(lambda, &LogisticOptions::default())
}
