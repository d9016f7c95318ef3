//! K-fold cross-validation over a shared lambda grid.

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sim::SimRng;
use crate::additive::{AdditiveConfig, AdditiveProblem};
use crate::basis::BasisConfig;
use crate::error::{HierError, Result};
use crate::logistic::{LogisticOptions, LogisticProblem};
use crate::multivariate::{MultivariateConfig, MultivariateProblem};
use crate::univariate::{log_grid, UnivariateProblem};

/// Estimator family and its settings, everything except `lambda`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FitFamily {
    Univariate { basis: BasisConfig, m: f64 },
    Additive { config: AdditiveConfig },
    Multivariate { config: MultivariateConfig },
    Logistic { basis: BasisConfig, m: f64 },
    LogisticAdditive { config: AdditiveConfig },
}

impl FitFamily {
    pub fn is_classification(&self) -> bool {
        matches!(self, FitFamily::Logistic { .. } | FitFamily::LogisticAdditive { .. })
    }

    pub fn metric(&self) -> CvMetric {
        if self.is_classification() {
            CvMetric::Misclassification
        } else {
            CvMetric::SquaredError
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvMetric {
    SquaredError,
    Misclassification,
}

impl CvMetric {
    /// Loss of one prediction; classification predictions are probabilities.
    pub fn loss(&self, y: f64, pred: f64) -> f64 {
        match self {
            CvMetric::SquaredError => (y - pred).powi(2),
            CvMetric::Misclassification => ((pred >= 0.5) != (y == 1.0)) as u8 as f64,
        }
    }
}

/// A training set prepared once for any number of fits.
#[derive(Debug, Clone)]
pub enum Prepared {
    Univariate(UnivariateProblem),
    Additive(AdditiveProblem),
    Multivariate(MultivariateProblem),
    Logistic(LogisticProblem),
}

impl Prepared {
    pub fn new(family: &FitFamily, x: ArrayView2<f64>, y: &[f64]) -> Result<Self> {
        Ok(match family {
            FitFamily::Univariate { basis, m } => {
                Prepared::Univariate(UnivariateProblem::new(&single_column(x)?, y, basis, *m)?)
            }
            FitFamily::Additive { config } => Prepared::Additive(AdditiveProblem::new(x, y, config)?),
            FitFamily::Multivariate { config } => {
                Prepared::Multivariate(MultivariateProblem::new(x, y, config)?)
            }
            FitFamily::Logistic { basis, m } => {
                Prepared::Logistic(LogisticProblem::univariate(&single_column(x)?, y, basis, *m)?)
            }
            FitFamily::LogisticAdditive { config } => {
                Prepared::Logistic(LogisticProblem::additive(x, y, config)?)
            }
        })
    }

    pub fn lambda_max(&self) -> Result<f64> {
        match self {
            Prepared::Univariate(p) => p.lambda_max(),
            Prepared::Additive(p) => p.lambda_max(),
            Prepared::Multivariate(p) => p.lambda_max(),
            Prepared::Logistic(p) => p.lambda_max(),
        }
    }

    /// Predictions at `x_test` for every lambda (probabilities for logistic fits).
    pub fn path_predictions(&self, lambdas: &[f64], x_test: ArrayView2<f64>) -> Result<Vec<Vec<f64>>> {
        match self {
            Prepared::Univariate(p) => {
                let xt = single_column(x_test)?;
                lambdas.iter().map(|&l| Ok(p.fit(l)?.predict(&xt).to_vec())).collect()
            }
            Prepared::Additive(p) => p
                .path_on(lambdas)?
                .fits
                .iter()
                .map(|f| Ok(f.predict(x_test)?.to_vec()))
                .collect(),
            Prepared::Multivariate(p) => {
                lambdas.iter().map(|&l| Ok(p.fit(l)?.predict(x_test)?.to_vec())).collect()
            }
            Prepared::Logistic(p) => p
                .path_on(lambdas, &LogisticOptions::default())?
                .iter()
                .map(|f| Ok(f.predict_proba(x_test)?.to_vec()))
                .collect(),
        }
    }
}

fn single_column(x: ArrayView2<f64>) -> Result<Vec<f64>> {
    if x.ncols() != 1 {
        return Err(HierError::DimensionMismatch(format!(
            "univariate fit needs one covariate, got {}",
            x.ncols()
        )));
    }
    Ok(x.column(0).to_vec())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub k: usize,
    pub seed: u64,
    pub n_lambda: usize,
    pub lambda_min_ratio: f64,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions { k: 5, seed: 0, n_lambda: 50, lambda_min_ratio: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub lambdas: Vec<f64>,
    pub cv_error: Vec<f64>,
    pub cv_se: Vec<f64>,
    pub best_index: usize,
    pub best_lambda: f64,
    pub best_1se_index: usize,
    pub best_1se_lambda: f64,
    /// Fold of every observation.
    pub folds: Vec<usize>,
    pub metric: CvMetric,
}

/// Shuffled round-robin folds: sizes differ by at most one.
pub fn fold_assignments(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 || k > n {
        return Err(HierError::InvalidInput(format!("need 2 <= k <= n, got k = {k}, n = {n}")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(SimRng::new(seed, 0).rng_mut());
    let mut folds = vec![0; n];
    for (pos, &i) in perm.iter().enumerate() {
        folds[i] = pos % k;
    }
    Ok(folds)
}

/// Folds dealt class by class so each fold sees both labels when possible.
pub fn stratified_fold_assignments(y: &[f64], k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = y.len();
    if k < 2 || k > n {
        return Err(HierError::InvalidInput(format!("need 2 <= k <= n, got k = {k}, n = {n}")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(SimRng::new(seed, 0).rng_mut());
    perm.sort_by_key(|&i| y[i] != 1.0);
    let mut folds = vec![0; n];
    for (pos, &i) in perm.iter().enumerate() {
        folds[i] = pos % k;
    }
    Ok(folds)
}

fn training_has_both_classes(y: &[f64], folds: &[usize], k: usize) -> bool {
    (0..k).all(|f| {
        let mut pos = false;
        let mut neg = false;
        for (yi, &fi) in y.iter().zip(folds) {
            if fi != f {
                if *yi == 1.0 {
                    pos = true;
                } else {
                    neg = true;
                }
            }
        }
        pos && neg
    })
}

pub(crate) fn select_rows(x: ArrayView2<f64>, rows: &[usize]) -> Array2<f64> {
    x.select(Axis(0), rows)
}

fn split(folds: &[usize], f: usize) -> (Vec<usize>, Vec<usize>) {
    let train = (0..folds.len()).filter(|&i| folds[i] != f).collect();
    let test = (0..folds.len()).filter(|&i| folds[i] == f).collect();
    (train, test)
}

/// Cross-validation with seeded folds and a grid that starts at the largest
/// `lambda_max` over the full data and every training split, so the first
/// grid point is the null model in every fold.
pub fn kfold_cv(x: ArrayView2<f64>, y: &[f64], family: &FitFamily, opts: &CvOptions) -> Result<CvResult> {
    let folds = seeded_folds(x, y, family, opts)?;
    let prepared = prepare_folds(x, y, family, &folds, opts.k)?;
    let mut top = Prepared::new(family, x, y)?.lambda_max()?;
    for (p, _) in &prepared {
        top = top.max(p.lambda_max()?);
    }
    let lambdas = log_grid(top, opts.n_lambda, opts.lambda_min_ratio)?;
    evaluate(x, y, family, &lambdas, folds, opts.k, prepared)
}

/// Seeded folds as in [`kfold_cv`], evaluated on a caller-supplied grid;
/// `n_lambda` and `lambda_min_ratio` are ignored.
pub fn kfold_cv_on_grid(
    x: ArrayView2<f64>,
    y: &[f64],
    family: &FitFamily,
    lambdas: &[f64],
    opts: &CvOptions,
) -> Result<CvResult> {
    let folds = seeded_folds(x, y, family, opts)?;
    kfold_cv_with_folds(x, y, family, lambdas, &folds)
}

fn seeded_folds(x: ArrayView2<f64>, y: &[f64], family: &FitFamily, opts: &CvOptions) -> Result<Vec<usize>> {
    let n = y.len();
    if x.nrows() != n {
        return Err(HierError::DimensionMismatch(format!("X has {} rows, y has {n}", x.nrows())));
    }
    let folds = fold_assignments(n, opts.k, opts.seed)?;
    if family.is_classification() && !training_has_both_classes(y, &folds, opts.k) {
        return stratified_fold_assignments(y, opts.k, opts.seed);
    }
    Ok(folds)
}

/// Cross-validation on a caller-supplied grid and fold assignment.
pub fn kfold_cv_with_folds(
    x: ArrayView2<f64>,
    y: &[f64],
    family: &FitFamily,
    lambdas: &[f64],
    folds: &[usize],
) -> Result<CvResult> {
    let n = y.len();
    if x.nrows() != n || folds.len() != n {
        return Err(HierError::DimensionMismatch(format!(
            "X has {} rows, y has {n}, folds has {}",
            x.nrows(),
            folds.len()
        )));
    }
    if lambdas.is_empty() {
        return Err(HierError::InvalidInput("empty lambda grid".into()));
    }
    let k = folds.iter().copied().max().map_or(0, |m| m + 1);
    if k < 2 || (0..k).any(|f| !folds.contains(&f)) {
        return Err(HierError::InvalidInput("folds must label 0..k-1 with k >= 2, none empty".into()));
    }
    let prepared = prepare_folds(x, y, family, folds, k)?;
    evaluate(x, y, family, lambdas, folds.to_vec(), k, prepared)
}

fn prepare_folds(
    x: ArrayView2<f64>,
    y: &[f64],
    family: &FitFamily,
    folds: &[usize],
    k: usize,
) -> Result<Vec<(Prepared, Vec<usize>)>> {
    (0..k)
        .into_par_iter()
        .map(|f| {
            let (train, test) = split(folds, f);
            let xt = select_rows(x, &train);
            let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            Ok((Prepared::new(family, xt.view(), &yt)?, test))
        })
        .collect()
}

fn evaluate(
    x: ArrayView2<f64>,
    y: &[f64],
    family: &FitFamily,
    lambdas: &[f64],
    folds: Vec<usize>,
    k: usize,
    prepared: Vec<(Prepared, Vec<usize>)>,
) -> Result<CvResult> {
    let metric = family.metric();
    // fold_loss[f][l]: summed loss of fold f at lambda l
    let fold_loss: Vec<(usize, Vec<f64>)> = prepared
        .into_par_iter()
        .map(|(prep, test)| {
            let xv = select_rows(x, &test);
            let preds = prep.path_predictions(lambdas, xv.view())?;
            let sums = preds
                .iter()
                .map(|pr| test.iter().zip(pr).map(|(&i, &p)| metric.loss(y[i], p)).sum())
                .collect();
            Ok((test.len(), sums))
        })
        .collect::<Result<_>>()?;
    let n = y.len() as f64;
    let mut cv_error = Vec::with_capacity(lambdas.len());
    let mut cv_se = Vec::with_capacity(lambdas.len());
    for l in 0..lambdas.len() {
        let mean = fold_loss.iter().map(|(_, s)| s[l]).sum::<f64>() / n;
        let spread = fold_loss
            .iter()
            .map(|(nf, s)| *nf as f64 * (s[l] / *nf as f64 - mean).powi(2))
            .sum::<f64>()
            / n;
        cv_error.push(mean);
        cv_se.push((spread / (k as f64 - 1.0)).sqrt());
    }
    // Grids run from large to small lambda, so the first minimizer is the largest.
    let mut best_index = 0;
    for l in 1..lambdas.len() {
        if cv_error[l] < cv_error[best_index] {
            best_index = l;
        }
    }
    let limit = cv_error[best_index] + cv_se[best_index];
    let best_1se_index = (0..lambdas.len())
        .filter(|&l| cv_error[l] <= limit)
        .max_by(|&a, &b| lambdas[a].total_cmp(&lambdas[b]).then(b.cmp(&a)))
        .unwrap_or(best_index);
    Ok(CvResult {
        lambdas: lambdas.to_vec(),
        best_lambda: lambdas[best_index],
        best_1se_lambda: lambdas[best_1se_index],
        cv_error,
        cv_se,
        best_index,
        best_1se_index,
        folds,
        metric,
    })
}
