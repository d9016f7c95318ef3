//! Penalty weights and the proximal operator of the nested-group penalty
//!
//! ```text
//! Omega_w(beta) = sum_k w_k * || beta_{k:K} ||_2
//! ```
//!
//! The groups are the suffixes of `beta`. For this chain of nested groups a
//! single backward pass of block soft-thresholding, `k = K, ..., 1`, returns
//! the exact minimizer of `1/2 ||c - beta||^2 + lambda * Omega_w(beta)`.

use serde::{Deserialize, Serialize};

use crate::error::{check_lambda, HierError, Result};

/// Penalty weights `w_1, .., w_K` for smoothness order `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub m: f64,
    pub w: Vec<f64>,
}

impl WeightVector {
    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }
}

/// `w_k = k^m - (k-1)^m`.
pub fn univariate_weights(m: f64, k: usize) -> WeightVector {
    let w = (1..=k).map(|i| (i as f64).powf(m) - ((i - 1) as f64).powf(m)).collect();
    WeightVector { m, w }
}

/// Proximal operator of `lambda * Omega_w` at `c`.
pub fn hier_prox(c: &[f64], lambda: f64, w: &[f64]) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    if c.len() != w.len() {
        return Err(HierError::DimensionMismatch(format!(
            "prox input has length {} but {} weights",
            c.len(),
            w.len()
        )));
    }
    let mut out = c.to_vec();
    let mut factors = vec![0.0; c.len()];
    prox_in_place(&mut out, lambda, w, &mut factors);
    Ok(out)
}

/// In-place prox in O(K).
///
/// Instead of rescaling the tail at every step, the backward pass records the
/// shrink factor of each group; the tail norm before step `k` is
/// `S_k = c_k^2 + f_{k+1}^2 S_{k+1}`. Coordinate `i` is finally multiplied by
/// the product of the factors of all groups containing it, `f_1 .. f_i`.
/// A zero tail gets factor 0, so the operator is total.
///
/// Callers guarantee `lambda >= 0` and matching lengths; `factors` is scratch.
pub(crate) fn prox_in_place(beta: &mut [f64], lambda: f64, w: &[f64], factors: &mut Vec<f64>) {
    let k = beta.len();
    debug_assert_eq!(w.len(), k);
    factors.resize(k, 0.0);
    if lambda == 0.0 {
        return;
    }
    let mut tail_sq = 0.0;
    for i in (0..k).rev() {
        let s = beta[i] * beta[i] + tail_sq;
        let f = if s > 0.0 {
            let norm = s.sqrt();
            let shrink = w[i] * lambda;
            if shrink >= norm {
                0.0
            } else {
                1.0 - shrink / norm
            }
        } else {
            0.0
        };
        factors[i] = f;
        tail_sq = f * f * s;
    }
    let mut prod = 1.0;
    for (b, f) in beta.iter_mut().zip(factors.iter()) {
        prod *= f;
        *b *= prod;
    }
}

/// `sum_k w_k ||beta_{k:K}||_2`, accumulated from the back.
pub fn penalty_value(beta: &[f64], w: &[f64]) -> f64 {
    let mut tail_sq = 0.0;
    let mut total = 0.0;
    for (b, wk) in beta.iter().zip(w).rev() {
        tail_sq += b * b;
        if *wk != 0.0 {
            total += wk * tail_sq.sqrt();
        }
    }
    total
}

/// Smallest `lambda` for which `pred(lambda)` holds, by bisection on
/// `[0, hi]`. `pred` must be monotone (false then true) and `pred(hi)` true.
/// The returned value always satisfies `pred`.
pub(crate) fn bisect_threshold(hi: f64, tol: f64, mut pred: impl FnMut(f64) -> bool) -> f64 {
    let mut lo = 0.0;
    let mut hi = hi;
    while !pred(hi) {
        // grow the bracket if the caller's bound was not high enough
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > tol * hi {
        let mid = 0.5 * (lo + hi);
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Smallest `lambda` (to relative `tol`) at which the prox of `c` is exactly
/// zero. Returns 0 for `c = 0`.
pub fn lambda_max(c: &[f64], w: &[f64], tol: f64) -> Result<f64> {
    if c.len() != w.len() {
        return Err(HierError::DimensionMismatch(format!(
            "lambda_max: {} coefficients, {} weights",
            c.len(),
            w.len()
        )));
    }
    lambda_max_with(c, tol, |_| w.to_vec())
}

/// Like [`lambda_max`], with weights that may depend on `lambda` itself
/// (the sparse additive penalty uses `w_1 + lambda` in the first slot).
pub(crate) fn lambda_max_with(
    c: &[f64],
    tol: f64,
    weights: impl Fn(f64) -> Vec<f64>,
) -> Result<f64> {
    let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok(0.0);
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(HierError::InvalidInput(format!("bisection tolerance {tol} not in (0, 1)")));
    }
    let w1 = weights(0.0).first().copied().unwrap_or(0.0);
    if w1 <= 0.0 {
        return Err(HierError::InvalidInput(
            "first penalty weight must be positive for the zero solution to exist".into(),
        ));
    }
    // the first group covers every coordinate, so ||c|| / w_1 always zeroes
    let hi = norm / w1;
    let mut buf = vec![0.0; c.len()];
    let mut factors = Vec::new();
    let is_zero = |lam: f64, buf: &mut Vec<f64>, factors: &mut Vec<f64>| {
        buf.copy_from_slice(c);
        prox_in_place(buf, lam, &weights(lam), factors);
        buf.iter().all(|&b| b == 0.0)
    };
    Ok(bisect_threshold(hi, tol, |lam| is_zero(lam, &mut buf, &mut factors)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn weights_formula() {
        assert_eq!(univariate_weights(3.0, 3).w, vec![1.0, 7.0, 19.0]);
        assert_eq!(univariate_weights(1.0, 5).w, vec![1.0; 5]);
        assert_eq!(univariate_weights(2.0, 4).w, vec![1.0, 3.0, 5.0, 7.0]);
        let w = univariate_weights(2.5, 8).w;
        assert!(w.windows(2).all(|p| p[1] > p[0]));
    }

    #[test]
    fn zero_lambda_is_identity() {
        let c = [1.5, -2.0, 0.25];
        assert_eq!(hier_prox(&c, 0.0, &[1.0, 3.0, 5.0]).unwrap(), c.to_vec());
    }

    #[test]
    fn scalar_soft_threshold() {
        assert!(close(&hier_prox(&[3.0], 1.0, &[1.0]).unwrap(), &[2.0], 1e-15));
        assert!(close(&hier_prox(&[-3.0], 1.0, &[1.0]).unwrap(), &[-2.0], 1e-15));
        assert_eq!(hier_prox(&[0.5], 1.0, &[1.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn two_coordinate_trace() {
        // beta_2 <- 0.5, then tail norm sqrt(1.25), factor 1 - 0.5 / sqrt(1.25)
        let out = hier_prox(&[1.0, 1.0], 0.5, &[1.0, 1.0]).unwrap();
        let f = 1.0 - 0.5 / 1.25f64.sqrt();
        assert!(close(&out, &[f, 0.5 * f], 1e-15));
        assert!(close(&out, &[0.5528, 0.2764], 1e-4));
    }

    #[test]
    fn matches_naive_backward_pass() {
        // direct transcription: rescale the whole tail at every step
        let c = [0.8, -1.3, 0.4, 2.2, -0.1, 0.05];
        let w = univariate_weights(2.0, 6).w;
        let lam = 0.07;
        let mut naive = c.to_vec();
        for k in (0..c.len()).rev() {
            let nrm = naive[k..].iter().map(|v| v * v).sum::<f64>().sqrt();
            let f = if nrm > 0.0 { (1.0 - w[k] * lam / nrm).max(0.0) } else { 0.0 };
            for v in &mut naive[k..] {
                *v *= f;
            }
        }
        assert!(close(&hier_prox(&c, lam, &w).unwrap(), &naive, 1e-14));
    }

    #[test]
    fn zero_weight_leaves_nonzero_tail_alone() {
        let out = hier_prox(&[1.0, 1.0, 1.0], 0.1, &[1.0, 0.0, 0.0]).unwrap();
        let f = 1.0 - 0.1 / 3f64.sqrt();
        assert!(close(&out, &[f, f, f], 1e-15));
    }

    #[test]
    fn errors() {
        assert!(matches!(hier_prox(&[1.0], -0.1, &[1.0]), Err(HierError::NegativeLambda(_))));
        assert!(hier_prox(&[1.0, 2.0], 0.1, &[1.0]).is_err());
    }

    #[test]
    fn penalty_values() {
        assert_eq!(penalty_value(&[0.0; 4], &[1.0; 4]), 0.0);
        assert_eq!(penalty_value(&[0.0, 0.0, 0.0, 0.0, 0.0, 1.0], &[1.0; 6]), 6.0);
        let beta = [0.3, -1.1, 0.7, 0.2, -0.4, 0.9];
        let w = univariate_weights(2.0, 6).w;
        let direct: f64 = (0..6)
            .map(|k| w[k] * beta[k..].iter().map(|b| b * b).sum::<f64>().sqrt())
            .sum();
        assert!((penalty_value(&beta, &w) - direct).abs() < 1e-13);
    }

    #[test]
    fn lambda_max_scalar_and_zero() {
        let lm = lambda_max(&[3.0], &[1.0], 1e-9).unwrap();
        assert!((lm - 3.0).abs() < 3e-9);
        assert_eq!(lambda_max(&[0.0, 0.0], &[1.0, 1.0], 1e-6).unwrap(), 0.0);
    }

    #[test]
    fn lambda_max_last_coordinate_against_grid_scan() {
        let c = [0.0, 0.0, 5.0];
        let w = [1.0, 1.0, 1.0];
        let lm = lambda_max(&c, &w, 1e-8).unwrap();
        assert!(hier_prox(&c, lm, &w).unwrap().iter().all(|&b| b == 0.0));
        // dense scan: first grid value with an all-zero prox
        let step = 1e-4;
        let scan = (1..200_000)
            .map(|i| i as f64 * step)
            .find(|&l| hier_prox(&c, l, &w).unwrap().iter().all(|&b| b == 0.0))
            .unwrap();
        assert!((scan - lm).abs() <= step + 1e-6, "scan {scan} bisection {lm}");
        // three nested shrinks of a single coordinate: 5 - 3 lambda = 0
        assert!((lm - 5.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn lambda_max_homogeneous() {
        let c = [0.4, -1.2, 0.7, 0.3];
        let w = univariate_weights(3.0, 4).w;
        let a = lambda_max(&c, &w, 1e-10).unwrap();
        let c2: Vec<f64> = c.iter().map(|v| 2.0 * v).collect();
        let b = lambda_max(&c2, &w, 1e-10).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-8 * b);
        // just below the threshold something survives
        assert!(hier_prox(&c, a * (1.0 - 1e-6), &w).unwrap().iter().any(|&v| v != 0.0));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
            (1usize..=12).prop_flat_map(|k| {
                (
                    proptest::collection::vec(-3.0f64..3.0, k),
                    proptest::collection::vec(0.0f64..4.0, k),
                    0.0f64..2.0,
                )
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(256))]

            #[test]
            fn support_is_prefix((c, w, lam) in instance()) {
                let out = hier_prox(&c, lam, &w).unwrap();
                prop_assert!(crate::is_prefix_support(&out) || out.iter().all(|&v| v == 0.0)
                    || c.contains(&0.0));
            }

            #[test]
            fn nonexpansive((c1, w, lam) in instance(), shift in proptest::collection::vec(-1.0f64..1.0, 12)) {
                let c2: Vec<f64> = c1.iter().zip(&shift).map(|(a, b)| a + b).collect();
                let p1 = hier_prox(&c1, lam, &w).unwrap();
                let p2 = hier_prox(&c2, lam, &w).unwrap();
                let d_out: f64 = p1.iter().zip(&p2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                let d_in: f64 = c1.iter().zip(&c2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                prop_assert!(d_out <= d_in + 1e-12);
            }

            #[test]
            fn support_shrinks_with_lambda((c, w, _lam) in instance()) {
                let mut last = usize::MAX;
                for i in 0..60 {
                    let lam = 1e-3 * 1.15f64.powi(i);
                    let k0 = crate::support_len(&hier_prox(&c, lam, &w).unwrap());
                    prop_assert!(k0 <= last);
                    last = k0;
                }
            }
        }
    }
}
