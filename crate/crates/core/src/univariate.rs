//! Univariate hierarchical basis fits.
//!
//! With `Psi = U V` and `c = U^T (y - ybar) / n`, the objective
//! `1/2 ||y - ybar - Psi beta||_n^2 + lambda * Omega(beta)` becomes
//! `1/2 ||c - beta_t||^2 + lambda * sum_k w_k ||beta_t_{k:}||` up to a constant,
//! so each fit is one proximal step. `c` is computed once per dataset and
//! shared by every point of a path.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::basis::{expand, orthonormalize, BasisConfig, BasisMap, OrthoBasis};
use crate::error::{check_finite, check_lambda, HierError, Result};
use crate::linalg;
use crate::prox::{self, univariate_weights};

/// Relative tolerance of the bisection that locates `lambda_max`.
pub const LAMBDA_MAX_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnivariateFit {
    /// Transformed coefficients, one per retained direction of the basis.
    pub beta_t: Vec<f64>,
    /// Coefficients of the centered basis columns.
    pub beta: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub m: f64,
    /// Induced truncation level: length of the nonzero prefix of `beta_t`.
    pub k0: usize,
    pub objective: f64,
    pub basis: BasisMap,
}

impl UnivariateFit {
    pub fn predict(&self, x_new: &[f64]) -> Array1<f64> {
        self.basis.component(x_new, &self.beta) + self.intercept
    }
}

/// A dataset prepared for repeated fits: expansion, orthonormal factor and
/// the projected response.
#[derive(Debug, Clone)]
pub struct UnivariateProblem {
    map: BasisMap,
    ortho: OrthoBasis,
    y_centered: Array1<f64>,
    y_mean: f64,
    c: Vec<f64>,
    m: f64,
    weights: Vec<f64>,
}

impl UnivariateProblem {
    pub fn new(x: &[f64], y: &[f64], config: &BasisConfig, m: f64) -> Result<Self> {
        if x.len() != y.len() {
            return Err(HierError::DimensionMismatch(format!(
                "x has {} entries, y has {}",
                x.len(),
                y.len()
            )));
        }
        check_finite(y, "response")?;
        let expansion = expand(x, config)?;
        let ortho = orthonormalize(expansion.matrix.view())?;
        Self::from_parts(expansion.map, ortho, y, univariate_weights(m, config.k).w, m)
    }

    /// Builds a problem from a precomputed factorization and raw-coordinate
    /// weights (one per basis column).
    pub(crate) fn from_parts(
        map: BasisMap,
        ortho: OrthoBasis,
        y: &[f64],
        raw_weights: Vec<f64>,
        m: f64,
    ) -> Result<Self> {
        if m <= 0.0 || !m.is_finite() {
            return Err(HierError::InvalidInput(format!("smoothness order m = {m} must be > 0")));
        }
        let n = y.len() as f64;
        let y_mean = y.iter().sum::<f64>() / n;
        let y_centered: Array1<f64> = y.iter().map(|v| v - y_mean).collect();
        let c = ortho.project(y_centered.view()).to_vec();
        let weights = ortho.transformed_weights(&raw_weights);
        Ok(UnivariateProblem { map, ortho, y_centered, y_mean, c, m, weights })
    }

    pub fn ortho(&self) -> &OrthoBasis {
        &self.ortho
    }

    pub fn map(&self) -> &BasisMap {
        &self.map
    }

    /// `U^T (y - ybar) / n`.
    pub fn projected_response(&self) -> &[f64] {
        &self.c
    }

    /// Penalty weights in transformed coordinates.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn y_mean(&self) -> f64 {
        self.y_mean
    }

    pub fn lambda_max(&self) -> Result<f64> {
        prox::lambda_max(&self.c, &self.weights, LAMBDA_MAX_TOL)
    }

    pub fn fit(&self, lambda: f64) -> Result<UnivariateFit> {
        check_lambda(lambda)?;
        let beta_t = prox::hier_prox(&self.c, lambda, &self.weights)?;
        self.assemble(beta_t, lambda)
    }

    fn assemble(&self, beta_t: Vec<f64>, lambda: f64) -> Result<UnivariateFit> {
        let beta = self.ortho.back_transform(ArrayView1::from(&beta_t))?.to_vec();
        let k0 = crate::support_len(&beta_t);
        let objective = self.objective(&beta_t, lambda);
        Ok(UnivariateFit {
            beta_t,
            beta,
            intercept: self.y_mean,
            lambda,
            m: self.m,
            k0,
            objective,
            basis: self.map.clone(),
        })
    }

    /// `1/2 ||y - ybar - U beta_t||_n^2 + lambda * Omega(beta_t)`, evaluated
    /// from the residual.
    pub fn objective(&self, beta_t: &[f64], lambda: f64) -> f64 {
        let fitted = self.ortho.fitted(ArrayView1::from(beta_t));
        let n = self.y_centered.len() as f64;
        let rss = (&self.y_centered - &fitted).mapv(|r| r * r).sum();
        0.5 * rss / n + lambda * prox::penalty_value(beta_t, &self.weights)
    }

    /// In-sample fitted values `ybar + U beta_t`.
    pub fn fitted_values(&self, fit: &UnivariateFit) -> Array1<f64> {
        self.ortho.fitted(ArrayView1::from(&fit.beta_t[..])) + self.y_mean
    }

    /// Log-linear grid from `lambda_max` down to `lambda_min_ratio * lambda_max`.
    pub fn lambda_grid(&self, n_lambda: usize, lambda_min_ratio: f64) -> Result<Vec<f64>> {
        log_grid(self.lambda_max()?, n_lambda, lambda_min_ratio)
    }

    pub fn path(&self, n_lambda: usize, lambda_min_ratio: f64) -> Result<PathResult> {
        let lambdas = self.lambda_grid(n_lambda, lambda_min_ratio)?;
        self.path_on(&lambdas)
    }

    pub fn path_on(&self, lambdas: &[f64]) -> Result<PathResult> {
        let fits = lambdas.iter().map(|&l| self.fit(l)).collect::<Result<Vec<_>>>()?;
        let df = fits.iter().map(|f| self.degrees_of_freedom(f)).collect::<Result<Vec<_>>>()?;
        Ok(PathResult { lambdas: lambdas.to_vec(), fits, df })
    }

    pub fn degrees_of_freedom(&self, fit: &UnivariateFit) -> Result<f64> {
        degrees_of_freedom_t(&self.ortho, &fit.beta_t, &self.weights, fit.lambda)
    }
}

/// `n_lambda` values from `lambda_max` down to `ratio * lambda_max`, evenly
/// spaced on the log scale. A zero `lambda_max` yields a constant zero grid.
pub fn log_grid(lambda_max: f64, n_lambda: usize, lambda_min_ratio: f64) -> Result<Vec<f64>> {
    if n_lambda < 2 {
        return Err(HierError::InvalidInput(format!("n_lambda = {n_lambda}, need at least 2")));
    }
    if !(lambda_min_ratio > 0.0 && lambda_min_ratio < 1.0) {
        return Err(HierError::InvalidInput(format!(
            "lambda_min_ratio = {lambda_min_ratio} must lie in (0, 1)"
        )));
    }
    let step = lambda_min_ratio.ln() / (n_lambda - 1) as f64;
    Ok((0..n_lambda)
        .map(|i| if i == 0 { lambda_max } else { lambda_max * (step * i as f64).exp() })
        .collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathResult {
    /// Decreasing grid; the first entry is `lambda_max`.
    pub lambdas: Vec<f64>,
    pub fits: Vec<UnivariateFit>,
    pub df: Vec<f64>,
}

pub fn fit(x: &[f64], y: &[f64], config: &BasisConfig, m: f64, lambda: f64) -> Result<UnivariateFit> {
    UnivariateProblem::new(x, y, config, m)?.fit(lambda)
}

pub fn fit_path(
    x: &[f64],
    y: &[f64],
    config: &BasisConfig,
    m: f64,
    n_lambda: usize,
    lambda_min_ratio: f64,
) -> Result<PathResult> {
    UnivariateProblem::new(x, y, config, m)?.path(n_lambda, lambda_min_ratio)
}

pub fn predict(fit: &UnivariateFit, x_new: &[f64]) -> Array1<f64> {
    fit.predict(x_new)
}

/// Unbiased degrees-of-freedom estimate of a fit on the data it came from.
///
/// `ortho` must be the factorization of that data's expansion; `y` is used to
/// check dimensions only, since the estimate depends on the data through the
/// solution.
pub fn degrees_of_freedom(fit: &UnivariateFit, ortho: &OrthoBasis, y: &[f64]) -> Result<f64> {
    if y.len() != ortho.n() {
        return Err(HierError::DimensionMismatch(format!(
            "response has {} entries, basis has {} rows",
            y.len(),
            ortho.n()
        )));
    }
    let weights = ortho.transformed_weights(&univariate_weights(fit.m, ortho.k()).w);
    degrees_of_freedom_t(ortho, &fit.beta_t, &weights, fit.lambda)
}

/// ```text
/// df = 1 + trace{ U0 M^{-1} U0^T / n (I - 11^T/n) },
/// M  = I + sum_{k <= K0} lambda w_k ( D_k / ||b_k|| - b_k b_k^T / ||b_k||^3 ),
/// ```
/// where `U0` holds the first `K0` columns of `U`, `b_k` is the solution with
/// entries before `k` zeroed and `D_k` the matching diagonal indicator.
/// The trace is evaluated as `trace(M^{-1} G)` with
/// `G = U0^T (I - 11^T/n) U0 / n`.
pub(crate) fn degrees_of_freedom_t(
    ortho: &OrthoBasis,
    beta_t: &[f64],
    weights: &[f64],
    lambda: f64,
) -> Result<f64> {
    let k0 = crate::support_len(beta_t);
    if k0 == 0 {
        return Ok(1.0);
    }
    let b = &beta_t[..k0];
    let mut m = Array2::<f64>::eye(k0);
    for k in 0..k0 {
        let lw = lambda * weights[k];
        if lw == 0.0 {
            continue;
        }
        let norm = linalg::norm2(&b[k..]);
        let norm3 = norm * norm * norm;
        for i in k..k0 {
            m[[i, i]] += lw / norm;
            for j in k..k0 {
                m[[i, j]] -= lw * b[i] * b[j] / norm3;
            }
        }
    }
    let n = ortho.n();
    let u0 = ortho.u().slice_move(ndarray::s![.., ..k0]).to_owned();
    let mut centered = u0.clone();
    for mut col in centered.columns_mut() {
        let mean = col.sum() / n as f64;
        col -= mean;
    }
    let g = u0.t().dot(&centered) / n as f64;
    let sol = linalg::solve(m.view(), g.view())?;
    Ok(1.0 + sol.diag().sum())
}
