//! Truncated basis expansions and their orthonormalization.
//!
//! A covariate `x` is mapped to `K` columns `psi_1(x), ..., psi_K(x)`, ordered
//! from least to most complex, then centered. There is never a constant column:
//! the intercept is handled by centering the response.
//!
//! [`orthonormalize`] factors the centered expansion as `Psi = U V` with
//! `U^T U / n = I` and `V` upper triangular, so every solver can work with the
//! transformed coefficients `beta_t = V beta`.

use ndarray::{ShapeBuilder, Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, HierError, Result};
use crate::linalg;

/// Relative tolerance below which a Gram-Schmidt residual counts as collinear.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisFamily {
    /// `psi_k(z) = z^k`.
    Polynomial,
    /// `psi_{2j-1}(z) = sin(2 pi j z)`, `psi_{2j}(z) = cos(2 pi j z)`.
    Trigonometric,
}

impl std::str::FromStr for BasisFamily {
    type Err = HierError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "polynomial" | "poly" => Ok(BasisFamily::Polynomial),
            "trigonometric" | "trig" => Ok(BasisFamily::Trigonometric),
            other => Err(HierError::InvalidInput(format!("unknown basis family '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisConfig {
    pub family: BasisFamily,
    /// Pre-truncation level.
    pub k: usize,
    /// Min-max rescale the covariate to `[0, 1]` before expanding. The
    /// trigonometric family always rescales.
    pub standardize: bool,
}

impl BasisConfig {
    pub fn polynomial(k: usize) -> Self {
        BasisConfig { family: BasisFamily::Polynomial, k, standardize: true }
    }

    pub fn trigonometric(k: usize) -> Self {
        BasisConfig { family: BasisFamily::Trigonometric, k, standardize: true }
    }

    pub fn with_standardize(mut self, standardize: bool) -> Self {
        self.standardize = standardize;
        self
    }
}

/// Conservative pre-truncation level `ceil(sqrt(n))`.
pub fn default_truncation(n: usize) -> usize {
    let mut r = (n as f64).sqrt().ceil() as usize;
    // correct for rounding in the floating-point square root
    while r * r < n {
        r += 1;
    }
    while r > 1 && (r - 1) * (r - 1) >= n {
        r -= 1;
    }
    r
}

/// Everything needed to map raw covariate values to the centered columns
/// used at fit time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisMap {
    pub family: BasisFamily,
    pub k: usize,
    /// `z = (x - shift) / scale`.
    pub shift: f64,
    pub scale: f64,
    pub col_means: Vec<f64>,
}

impl BasisMap {
    fn rescale(&self, x: f64) -> f64 {
        (x - self.shift) / self.scale
    }

    /// Fills `out` with the uncentered basis values at `x`.
    fn raw_row(&self, x: f64, out: &mut [f64]) {
        let z = self.rescale(x);
        raw_row(self.family, z, out);
    }

    /// Centered basis matrix at new points.
    pub fn evaluate(&self, x: &[f64]) -> Array2<f64> {
        let mut out = Array2::zeros((x.len(), self.k));
        let mut row = vec![0.0; self.k];
        for (i, &xi) in x.iter().enumerate() {
            self.raw_row(xi, &mut row);
            for (j, v) in row.iter().enumerate() {
                out[[i, j]] = v - self.col_means[j];
            }
        }
        out
    }

    /// `sum_k (psi_k(x) - mean_k) * beta_k`, the component value at one point.
    pub fn component_value(&self, x: f64, beta: &[f64], scratch: &mut Vec<f64>) -> f64 {
        scratch.resize(self.k, 0.0);
        self.raw_row(x, scratch);
        scratch
            .iter()
            .zip(&self.col_means)
            .zip(beta)
            .map(|((v, m), b)| (v - m) * b)
            .sum()
    }

    /// Component values over a vector of points.
    pub fn component(&self, x: &[f64], beta: &[f64]) -> Array1<f64> {
        let mut scratch = Vec::with_capacity(self.k);
        x.iter().map(|&xi| self.component_value(xi, beta, &mut scratch)).collect()
    }
}

fn raw_row(family: BasisFamily, z: f64, out: &mut [f64]) {
    match family {
        BasisFamily::Polynomial => {
            let mut p = 1.0;
            for v in out.iter_mut() {
                p *= z;
                *v = p;
            }
        }
        BasisFamily::Trigonometric => {
            for (idx, v) in out.iter_mut().enumerate() {
                let j = (idx / 2 + 1) as f64;
                let arg = 2.0 * std::f64::consts::PI * j * z;
                *v = if idx % 2 == 0 { arg.sin() } else { arg.cos() };
            }
        }
    }
}

/// Centered `n x K` design with the map that produced it.
#[derive(Debug, Clone)]
pub struct BasisExpansion {
    pub map: BasisMap,
    pub matrix: Array2<f64>,
}

pub fn expand(x: &[f64], config: &BasisConfig) -> Result<BasisExpansion> {
    let n = x.len();
    if n < 2 {
        return Err(HierError::InvalidInput(format!("need at least 2 observations, got {n}")));
    }
    if config.k < 1 {
        return Err(HierError::InvalidInput("truncation level K must be at least 1".into()));
    }
    if config.k > n {
        return Err(HierError::InvalidInput(format!(
            "truncation level K = {} exceeds sample size n = {n}",
            config.k
        )));
    }
    check_finite(x, "covariate")?;

    let rescale = config.standardize || config.family == BasisFamily::Trigonometric;
    let (shift, scale) = if rescale {
        let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo <= 0.0 {
            return Err(HierError::DegenerateCovariate("covariate is constant".into()));
        }
        (lo, hi - lo)
    } else {
        (0.0, 1.0)
    };

    let mut map = BasisMap {
        family: config.family,
        k: config.k,
        shift,
        scale,
        col_means: vec![0.0; config.k],
    };
    let mut matrix = Array2::zeros((n, config.k));
    let mut row = vec![0.0; config.k];
    for (i, &xi) in x.iter().enumerate() {
        map.raw_row(xi, &mut row);
        for (j, v) in row.iter().enumerate() {
            matrix[[i, j]] = *v;
        }
    }
    check_finite(matrix.iter(), "basis expansion")?;
    for (j, mut col) in matrix.columns_mut().into_iter().enumerate() {
        let mean = col.sum() / n as f64;
        col -= mean;
        map.col_means[j] = mean;
    }
    Ok(BasisExpansion { map, matrix })
}

/// Factorization `Psi = U V` with `U^T U / n = I_rank`.
///
/// `U` is `n x rank`, `V` is `rank x K`. Row `r` of `V` belongs to the kept
/// column `kept[r]`; the square block `V[:, kept]` is upper triangular and
/// invertible. Collinear columns are dropped in order, so the retained
/// directions keep their hierarchy.
#[derive(Debug, Clone)]
pub struct OrthoBasis {
    u: Array2<f64>,
    v: Array2<f64>,
    kept: Vec<usize>,
}

pub fn orthonormalize(psi: ArrayView2<f64>) -> Result<OrthoBasis> {
    let (n, k) = psi.dim();
    if n == 0 || k == 0 {
        return Err(HierError::InvalidInput("empty design matrix".into()));
    }
    check_finite(psi.iter(), "design matrix")?;
    let nf = n as f64;
    let col_norm = |c: &[f64]| (c.iter().map(|v| v * v).sum::<f64>() / nf).sqrt();

    let cols: Vec<Vec<f64>> = psi.columns().into_iter().map(|c| c.to_vec()).collect();
    let lead = cols.iter().map(|c| col_norm(c)).fold(0.0, f64::max);
    if lead == 0.0 {
        return Err(HierError::DegenerateCovariate("design matrix is all zero".into()));
    }

    let mut qs: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut kept = Vec::with_capacity(k);
    let mut coefs: Vec<Vec<f64>> = Vec::with_capacity(k);
    for (j, col) in cols.into_iter().enumerate() {
        let mut v = col;
        let mut c = vec![0.0; qs.len()];
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for (r, q) in qs.iter().enumerate() {
                let proj = q.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() / nf;
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= proj * qi;
                }
                c[r] += proj;
            }
        }
        let norm = col_norm(&v);
        if norm > RANK_TOL * lead {
            for vi in v.iter_mut() {
                *vi /= norm;
            }
            c.push(norm);
            qs.push(v);
            kept.push(j);
        }
        coefs.push(c);
    }

    let rank = kept.len();
    // column-major so every direction is one contiguous slice
    let mut u = Array2::zeros((n, rank).f());
    for (r, q) in qs.iter().enumerate() {
        for (i, &val) in q.iter().enumerate() {
            u[[i, r]] = val;
        }
    }
    let mut v = Array2::zeros((rank, k));
    for (j, c) in coefs.iter().enumerate() {
        for (r, &val) in c.iter().enumerate() {
            v[[r, j]] = val;
        }
    }
    Ok(OrthoBasis { u, v, kept })
}

impl OrthoBasis {
    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    /// Number of columns of the original expansion.
    pub fn k(&self) -> usize {
        self.v.ncols()
    }

    pub fn rank(&self) -> usize {
        self.kept.len()
    }

    pub fn u(&self) -> ArrayView2<'_, f64> {
        self.u.view()
    }

    pub fn v(&self) -> ArrayView2<'_, f64> {
        self.v.view()
    }

    /// Original column index of each transformed direction.
    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    fn direction(&self, r: usize) -> &[f64] {
        self.u.column(r).to_slice().expect("U is stored column-major")
    }

    /// `U^T r / n`.
    pub fn project(&self, r: ArrayView1<f64>) -> Array1<f64> {
        let mut out = Array1::zeros(self.rank());
        match r.as_slice() {
            Some(rs) => self.project_into(rs, out.as_slice_mut().unwrap()),
            None => self.project_into(&r.to_vec(), out.as_slice_mut().unwrap()),
        }
        out
    }

    pub(crate) fn project_into(&self, r: &[f64], out: &mut [f64]) {
        let nf = self.n() as f64;
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.direction(k).iter().zip(r).map(|(a, b)| a * b).sum::<f64>() / nf;
        }
    }

    /// `out += scale * U beta_t`, skipping zero coefficients.
    pub(crate) fn add_fitted(&self, beta_t: &[f64], scale: f64, out: &mut [f64]) {
        for (k, &b) in beta_t.iter().enumerate() {
            if b != 0.0 {
                let s = scale * b;
                for (o, u) in out.iter_mut().zip(self.direction(k)) {
                    *o += s * u;
                }
            }
        }
    }

    /// `U beta_t`.
    pub fn fitted(&self, beta_t: ArrayView1<f64>) -> Array1<f64> {
        let mut out = Array1::zeros(self.n());
        self.add_fitted(&beta_t.to_vec(), 1.0, out.as_slice_mut().unwrap());
        out
    }

    /// `V beta`; entries of `beta` at dropped columns must be zero for the
    /// result to represent the same function.
    pub fn forward_transform(&self, beta: ArrayView1<f64>) -> Array1<f64> {
        self.v.dot(&beta)
    }

    /// Solves `V beta = beta_t` with `beta` zero on dropped columns.
    ///
    /// `beta_t` may have length `rank`, or `K` with zeros beyond `rank`.
    pub fn back_transform(&self, beta_t: ArrayView1<f64>) -> Result<Array1<f64>> {
        let rank = self.rank();
        if beta_t.len() != rank && beta_t.len() != self.k() {
            return Err(HierError::DimensionMismatch(format!(
                "transformed coefficients have length {}, expected {rank} or {}",
                beta_t.len(),
                self.k()
            )));
        }
        if beta_t.iter().skip(rank).any(|&b| b != 0.0) {
            return Err(HierError::InvalidInput(
                "transformed coefficients beyond the rank must be zero".into(),
            ));
        }
        let square = self.v.select(ndarray::Axis(1), &self.kept);
        let sol = linalg::solve_upper(square.view(), beta_t.slice(ndarray::s![..rank]))?;
        let mut beta = Array1::zeros(self.k());
        for (r, &j) in self.kept.iter().enumerate() {
            beta[j] = sol[r];
        }
        Ok(beta)
    }

    /// Penalty weights in transformed coordinates.
    ///
    /// The tail group starting at original column `k` becomes the transformed
    /// tail starting at the first kept column `>= k`, so weights of dropped
    /// columns are added to the next kept direction. Groups past the last kept
    /// column are empty and vanish.
    pub fn transformed_weights(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rank()];
        let mut r = 0;
        for (k, &wk) in w.iter().enumerate().take(self.k()) {
            while r < self.kept.len() && self.kept[r] < k {
                r += 1;
            }
            if r == self.kept.len() {
                break;
            }
            out[r] += wk;
        }
        out
    }
}
