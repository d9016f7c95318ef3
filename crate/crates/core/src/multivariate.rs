//! Non-additive multivariate fits over a degree-graded monomial basis.
//!
//! Columns are the monomials `x^nu` with `1 <= |nu| <= D`, ordered by total
//! degree. A weight `k^m - (k-1)^m` sits at the first column of each degree-`k`
//! block (position `C(k+p-1, p)`, 1-based) and every other weight is zero, so
//! the prox can only cut the expansion at whole interaction degrees.
//!
//! Within a degree block the columns are ordered reverse-lexicographically,
//! e.g. `(2,0), (1,1), (0,2)`. The ordering inside a block changes the
//! orthonormal factor, so a different convention gives a different, equally
//! valid fit.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::basis::{orthonormalize, OrthoBasis};
use crate::error::{check_finite, check_lambda, HierError, Result};
use crate::prox;
use crate::univariate::{degrees_of_freedom_t, log_grid, LAMBDA_MAX_TOL};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex {
    pub nu: Vec<u32>,
}

impl MultiIndex {
    pub fn total_degree(&self) -> u32 {
        self.nu.iter().sum()
    }
}

/// Binomial coefficient with overflow checking.
pub fn binomial(n: usize, k: usize) -> Result<usize> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = acc
            .checked_mul((n - i) as u128)
            .ok_or_else(|| HierError::InvalidInput(format!("C({n}, {k}) overflows")))?
            / (i as u128 + 1);
    }
    usize::try_from(acc).map_err(|_| HierError::InvalidInput(format!("C({n}, {k}) overflows")))
}

/// All exponent vectors of total degree `1..=max_degree`, degree-graded with
/// reverse-lexicographic order inside each degree.
pub fn enumerate_multi_indices(p: usize, max_degree: usize) -> Result<Vec<MultiIndex>> {
    if p < 1 || max_degree < 1 {
        return Err(HierError::InvalidInput(format!(
            "need p >= 1 and max_degree >= 1, got p = {p}, max_degree = {max_degree}"
        )));
    }
    let total = binomial(max_degree + p, p)? - 1;
    let mut out = Vec::with_capacity(total);
    let mut current = vec![0u32; p];
    for d in 1..=max_degree {
        compositions(d as u32, 0, &mut current, &mut out);
    }
    debug_assert_eq!(out.len(), total);
    Ok(out)
}

fn compositions(remaining: u32, pos: usize, current: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    let p = current.len();
    if pos == p - 1 {
        current[pos] = remaining;
        out.push(MultiIndex { nu: current.clone() });
        return;
    }
    for v in (0..=remaining).rev() {
        current[pos] = v;
        compositions(remaining - v, pos + 1, current, out);
    }
    current[pos] = 0;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultivariateWeights {
    pub p: usize,
    pub m: f64,
    pub k: usize,
    pub w: Vec<f64>,
}

/// Weight `k^m - (k-1)^m` at position `q_k = C(k+p-1, p)` (1-based), zero elsewhere.
pub fn multivariate_weights(p: usize, m: f64, k: usize) -> Result<MultivariateWeights> {
    if p < 1 {
        return Err(HierError::InvalidInput("p must be at least 1".into()));
    }
    let mut w = vec![0.0; k];
    for deg in 1.. {
        let q = binomial(deg + p - 1, p)?;
        if q > k {
            break;
        }
        let d = deg as f64;
        w[q - 1] = d.powf(m) - (d - 1.0).powf(m);
    }
    Ok(MultivariateWeights { p, m, k, w })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultivariateConfig {
    pub max_degree: usize,
    pub m: f64,
    /// Min-max rescale each covariate to `[0, 1]`. Off by default so the
    /// coefficients refer to raw monomials.
    pub standardize: bool,
}

impl MultivariateConfig {
    pub fn new(max_degree: usize) -> Self {
        MultivariateConfig { max_degree, m: 3.0, standardize: false }
    }
}

/// Maps raw rows to centered monomial columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonomialMap {
    pub indices: Vec<MultiIndex>,
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
    pub col_means: Vec<f64>,
}

impl MonomialMap {
    fn raw_row(&self, row: &[f64], out: &mut [f64]) {
        let z: Vec<f64> =
            row.iter().zip(&self.shift).zip(&self.scale).map(|((x, s), c)| (x - s) / c).collect();
        for (v, idx) in out.iter_mut().zip(&self.indices) {
            let mut prod = 1.0;
            for (zj, &e) in z.iter().zip(&idx.nu) {
                if e > 0 {
                    prod *= zj.powi(e as i32);
                }
            }
            *v = prod;
        }
    }

    pub fn p(&self) -> usize {
        self.shift.len()
    }

    /// Centered design at new rows.
    pub fn evaluate(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let k = self.indices.len();
        let mut out = Array2::zeros((x.nrows(), k));
        let mut buf = vec![0.0; k];
        for (i, row) in x.rows().into_iter().enumerate() {
            self.raw_row(&row.to_vec(), &mut buf);
            for j in 0..k {
                out[[i, j]] = buf[j] - self.col_means[j];
            }
        }
        out
    }

    /// `sum_k (x^nu_k - mean_k) beta_k` at one row.
    pub fn value(&self, row: &[f64], beta: &[f64], scratch: &mut Vec<f64>) -> f64 {
        scratch.resize(self.indices.len(), 0.0);
        self.raw_row(row, scratch);
        scratch.iter().zip(&self.col_means).zip(beta).map(|((v, m), b)| (v - m) * b).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultivariateFit {
    pub beta_t: Vec<f64>,
    /// Coefficients of the centered monomial columns, aligned with `map.indices`.
    pub beta: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub m: f64,
    pub k0: usize,
    /// Largest total degree with a nonzero coefficient.
    pub induced_degree: u32,
    pub objective: f64,
    pub map: MonomialMap,
}

impl MultivariateFit {
    pub fn predict(&self, x_new: ArrayView2<f64>) -> Result<Array1<f64>> {
        if x_new.ncols() != self.map.p() {
            return Err(HierError::DimensionMismatch(format!(
                "model has {} covariates, data has {}",
                self.map.p(),
                x_new.ncols()
            )));
        }
        let mut scratch = Vec::new();
        Ok(x_new
            .rows()
            .into_iter()
            .map(|r| self.intercept + self.map.value(&r.to_vec(), &self.beta, &mut scratch))
            .collect())
    }

    /// Coefficient of the monomial `x^nu`, if present in the basis.
    pub fn coefficient(&self, nu: &[u32]) -> Option<f64> {
        self.map.indices.iter().position(|i| i.nu == nu).map(|k| self.beta[k])
    }
}

#[derive(Debug, Clone)]
pub struct MultivariateProblem {
    map: MonomialMap,
    ortho: OrthoBasis,
    y_centered: Array1<f64>,
    y_mean: f64,
    c: Vec<f64>,
    weights: Vec<f64>,
    m: f64,
}

impl MultivariateProblem {
    pub fn new(x: ArrayView2<f64>, y: &[f64], config: &MultivariateConfig) -> Result<Self> {
        let (n, p) = x.dim();
        if n < 2 {
            return Err(HierError::InvalidInput(format!("need at least 2 observations, got {n}")));
        }
        if y.len() != n {
            return Err(HierError::DimensionMismatch(format!(
                "X has {n} rows, y has {} entries",
                y.len()
            )));
        }
        if !(config.m > 0.0) {
            return Err(HierError::InvalidInput(format!("m = {} must be positive", config.m)));
        }
        check_finite(x.iter(), "design")?;
        check_finite(y, "response")?;
        let k = binomial(config.max_degree + p, p)?.saturating_sub(1);
        if k > 10 * n {
            return Err(HierError::InvalidInput(format!(
                "monomial basis has {k} columns, more than 10 n = {}",
                10 * n
            )));
        }
        let indices = enumerate_multi_indices(p, config.max_degree)?;
        let (shift, scale): (Vec<f64>, Vec<f64>) = if config.standardize {
            x.columns()
                .into_iter()
                .map(|c| {
                    let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    (lo, if hi > lo { hi - lo } else { 1.0 })
                })
                .unzip()
        } else {
            (vec![0.0; p], vec![1.0; p])
        };
        let mut map = MonomialMap { indices, shift, scale, col_means: vec![0.0; k] };
        let mut psi = map.evaluate(x);
        check_finite(psi.iter(), "monomial expansion")?;
        for (j, mut col) in psi.columns_mut().into_iter().enumerate() {
            let mean = col.sum() / n as f64;
            col -= mean;
            map.col_means[j] = mean;
        }
        let ortho = orthonormalize(psi.view())?;
        let weights = ortho.transformed_weights(&multivariate_weights(p, config.m, k)?.w);
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let y_centered: Array1<f64> = y.iter().map(|v| v - y_mean).collect();
        let c = ortho.project(y_centered.view()).to_vec();
        Ok(MultivariateProblem { map, ortho, y_centered, y_mean, c, weights, m: config.m })
    }

    pub fn ortho(&self) -> &OrthoBasis {
        &self.ortho
    }

    pub fn map(&self) -> &MonomialMap {
        &self.map
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn lambda_max(&self) -> Result<f64> {
        prox::lambda_max(&self.c, &self.weights, LAMBDA_MAX_TOL)
    }

    pub fn lambda_grid(&self, n_lambda: usize, lambda_min_ratio: f64) -> Result<Vec<f64>> {
        log_grid(self.lambda_max()?, n_lambda, lambda_min_ratio)
    }

    pub fn fit(&self, lambda: f64) -> Result<MultivariateFit> {
        check_lambda(lambda)?;
        let beta_t = prox::hier_prox(&self.c, lambda, &self.weights)?;
        let beta = self.ortho.back_transform(ArrayView1::from(&beta_t))?.to_vec();
        let k0 = crate::support_len(&beta_t);
        let induced_degree = if k0 == 0 {
            0
        } else {
            self.map.indices[self.ortho.kept()[k0 - 1]].total_degree()
        };
        let fitted = self.ortho.fitted(ArrayView1::from(&beta_t));
        let n = self.y_centered.len() as f64;
        let rss = (&self.y_centered - &fitted).mapv(|r| r * r).sum();
        let objective = 0.5 * rss / n + lambda * prox::penalty_value(&beta_t, &self.weights);
        Ok(MultivariateFit {
            beta_t,
            beta,
            intercept: self.y_mean,
            lambda,
            m: self.m,
            k0,
            induced_degree,
            objective,
            map: self.map.clone(),
        })
    }

    pub fn degrees_of_freedom(&self, fit: &MultivariateFit) -> Result<f64> {
        degrees_of_freedom_t(&self.ortho, &fit.beta_t, &self.weights, fit.lambda)
    }

    pub fn fitted_values(&self, fit: &MultivariateFit) -> Array1<f64> {
        self.ortho.fitted(ArrayView1::from(&fit.beta_t[..])) + self.y_mean
    }
}

pub fn fit_multivariate(
    x: ArrayView2<f64>,
    y: &[f64],
    config: &MultivariateConfig,
    lambda: f64,
) -> Result<MultivariateFit> {
    MultivariateProblem::new(x, y, config)?.fit(lambda)
}
