//! Hierarchical basis expansion estimators.
//!
//! Every estimator in this crate expands each covariate in a truncated basis
//! `psi_1, ..., psi_K` whose members grow in complexity with `k`, and fits the
//! coefficients under the nested-group penalty
//!
//! ```text
//! Omega(beta) = sum_k w_k * || Psi_{k:K} beta_{k:K} ||_n,   w_k = k^m - (k-1)^m
//! ```
//!
//! The penalty forces hierarchical sparsity: once coefficient `k` is zero, so is
//! every coefficient after it, which makes the truncation level data-driven.
//!
//! Modules:
//!
//! - [`basis`]: polynomial / trigonometric expansions and their orthonormalization.
//! - [`prox`]: penalty weights and the exact one-pass proximal operator.
//! - [`univariate`]: single-covariate fits, regularization paths, degrees of freedom.
//! - [`additive`]: additive and sparse additive fits by block coordinate descent.
//! - [`multivariate`]: interaction models over a degree-graded monomial basis.
//! - [`logistic`]: binary classification by proximal gradient descent.
//! - [`modelsel`]: simulation designs, cross-validation and rate experiments.
//! - [`cli`]: the batch command-line interface and the JSON model format.
//!
//! Objective convention: squared-error fits minimize
//! `1/2 ||y - ybar - Psi beta||_n^2 + lambda * Omega(beta)` with
//! `||v||_n^2 = sum(v_i^2) / n`; the intercept is the response mean and is never
//! penalized.

// `!(x > 0.0)` is how parameter checks reject NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod additive;
pub mod basis;
pub mod cli;
pub mod error;
pub(crate) mod linalg;
pub mod logistic;
pub mod modelsel;
pub mod multivariate;
pub mod prox;
pub mod univariate;

pub use error::{HierError, Result};

pub use additive::{AdditiveConfig, AdditiveFit, AdditivePath, WeightPreset};
pub use basis::{BasisConfig, BasisExpansion, BasisFamily, BasisMap, OrthoBasis};
pub use logistic::{LogisticFit, LogisticOptions};
pub use multivariate::{MultiIndex, MultivariateConfig, MultivariateFit};
pub use prox::WeightVector;
pub use univariate::{PathResult, UnivariateFit};

/// Support length of a coefficient vector: one past the last nonzero entry.
pub fn support_len(beta: &[f64]) -> usize {
    beta.iter().rposition(|&b| b != 0.0).map_or(0, |i| i + 1)
}

/// True when the nonzero entries of `beta` form a prefix `{0, .., k0-1}`.
pub fn is_prefix_support(beta: &[f64]) -> bool {
    let k0 = support_len(beta);
    beta[..k0].iter().all(|&b| b != 0.0)
}
