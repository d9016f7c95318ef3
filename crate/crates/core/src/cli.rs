//! Batch command-line interface over CSV files.
//!
//! Subcommands: `fit`, `predict`, `cv`, `simulate`, `path`, `df`. Models are
//! saved as versioned JSON. Exit codes: 0 success, 2 input error, 3 numerical
//! or convergence failure. All randomness comes from `--seed` (default 0), and
//! `HIERFIT_THREADS` caps the worker pool.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::additive::{AdditiveConfig, AdditiveFit, AdditiveProblem, WeightPreset};
use crate::basis::{default_truncation, BasisConfig, BasisFamily};
use crate::error::HierError;
use crate::logistic::{LogisticFit, LogisticOptions, LogisticProblem};
use crate::modelsel::cv::{kfold_cv_on_grid, CvOptions, FitFamily};
use crate::modelsel::sim::{generate, Design, Generator, SimSpec};
use crate::modelsel::mse;
use crate::multivariate::{MultivariateConfig, MultivariateFit, MultivariateProblem};
use crate::univariate::{log_grid, UnivariateFit, UnivariateProblem};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<HierError> for CliError {
    fn from(e: HierError) -> Self {
        match e {
            HierError::NoConvergence(_) | HierError::Numerical(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(format!("model file: {e}"))
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "hierfit", version, about = "Hierarchical basis expansion fits over CSV data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model and save it as JSON.
    Fit(FitArgs),
    /// Predict from a saved model; writes row_id,prediction.
    Predict(PredictArgs),
    /// Cross-validate over a lambda grid; writes one row per lambda.
    Cv(CvArgs),
    /// Write a simulated dataset with a truth column.
    Simulate(SimulateArgs),
    /// Fit the regularization path; writes lambda,K0,df,train_mse[,test_mse].
    Path(PathArgs),
    /// Degrees of freedom of a saved model on its training data.
    Df(DfArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    Univariate,
    Additive,
    SparseAdditive,
    Multivariate,
    Logistic,
    LogisticAdditive,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Name of the response column.
    #[arg(long, default_value = "y")]
    pub response: String,
    /// Comma-separated feature columns; default is every other column.
    #[arg(long, value_delimiter = ',')]
    pub features: Option<Vec<String>>,
    /// Columns never used as features.
    #[arg(long, value_delimiter = ',', default_value = "truth,row_id")]
    pub ignore: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "univariate")]
    pub estimator: Estimator,
    /// Smoothness order in the weights k^m - (k-1)^m.
    #[arg(long, default_value_t = 3.0)]
    pub m: f64,
    /// Basis size per feature; default ceil(sqrt(n)).
    #[arg(long = "K")]
    pub k: Option<usize>,
    #[arg(long, default_value = "poly")]
    pub family: BasisFamily,
    /// Use the raw covariate instead of rescaling it to [0, 1] (multivariate
    /// fits always use raw monomials).
    #[arg(long)]
    pub no_standardize: bool,
    /// Weight preset for additive estimators: hierbasis, spam or splam.
    #[arg(long, default_value = "hierbasis")]
    pub preset: WeightPreset,
    /// Largest total degree for the multivariate estimator.
    #[arg(long, default_value_t = 3)]
    pub max_degree: usize,
    /// Sweep limit of the squared-error additive solver.
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    /// Convergence tolerance of the squared-error additive solver.
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// Number of lambda values on the grid.
    #[arg(long = "path", visible_alias = "n-lambda", default_value_t = 50)]
    pub n_lambda: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lambda_min_ratio: f64,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Fixed lambda; without it lambda is chosen by cross-validation.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Number of CV folds when --lambda is absent.
    #[arg(long, default_value_t = 5)]
    pub cv: usize,
    /// Pick the largest lambda within one standard error of the CV minimum.
    #[arg(long)]
    pub one_se: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Where to write the model JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Number of folds.
    #[arg(long = "k", visible_alias = "folds", default_value_t = 5)]
    pub n_folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write row_id,fold.
    #[arg(long)]
    pub folds_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value = "g1")]
    pub generator: Generator,
    #[arg(long, default_value_t = 150)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    #[arg(long, default_value_t = 3.0)]
    pub snr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// equispaced or uniform; applies to g1..g4.
    #[arg(long)]
    pub design: Option<Design>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PathArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Held-out CSV with the same columns; adds a test_mse column.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DfArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// The training CSV the model was fitted on.
    #[arg(long)]
    pub data: PathBuf,
}

/// The fitted payload of a model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "estimator", content = "fit", rename_all = "kebab-case")]
pub enum FittedModel {
    Univariate(UnivariateFit),
    Additive(AdditiveFit),
    SparseAdditive(AdditiveFit),
    Multivariate(MultivariateFit),
    Logistic(LogisticFit),
    LogisticAdditive(LogisticFit),
}

impl FittedModel {
    pub fn lambda(&self) -> f64 {
        match self {
            FittedModel::Univariate(f) => f.lambda,
            FittedModel::Additive(f) | FittedModel::SparseAdditive(f) => f.lambda,
            FittedModel::Multivariate(f) => f.lambda,
            FittedModel::Logistic(f) | FittedModel::LogisticAdditive(f) => f.lambda,
        }
    }

    /// Induced truncation level of every feature (the whole basis for multivariate fits).
    pub fn k0(&self) -> Vec<usize> {
        match self {
            FittedModel::Univariate(f) => vec![f.k0],
            FittedModel::Additive(f) | FittedModel::SparseAdditive(f) => f.k0(),
            FittedModel::Multivariate(f) => vec![f.k0],
            FittedModel::Logistic(f) | FittedModel::LogisticAdditive(f) => f.k0(),
        }
    }

    pub fn is_classifier(&self) -> bool {
        matches!(self, FittedModel::Logistic(_) | FittedModel::LogisticAdditive(_))
    }

    /// Predictions, or positive-class probabilities for logistic models.
    pub fn predict(&self, x: ArrayView2<f64>) -> crate::Result<Vec<f64>> {
        Ok(match self {
            FittedModel::Univariate(f) => {
                if x.ncols() != 1 {
                    return Err(HierError::DimensionMismatch(format!(
                        "univariate model, data has {} features",
                        x.ncols()
                    )));
                }
                f.predict(&x.column(0).to_vec()).to_vec()
            }
            FittedModel::Additive(f) | FittedModel::SparseAdditive(f) => f.predict(x)?.to_vec(),
            FittedModel::Multivariate(f) => f.predict(x)?.to_vec(),
            FittedModel::Logistic(f) | FittedModel::LogisticAdditive(f) => f.predict_proba(x)?.to_vec(),
        })
    }

    fn strip_traces(&mut self) {
        match self {
            FittedModel::Additive(f) | FittedModel::SparseAdditive(f) => f.objective_trace.clear(),
            FittedModel::Logistic(f) | FittedModel::LogisticAdditive(f) => f.objective_trace.clear(),
            _ => {}
        }
    }
}

/// Versioned on-disk model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub response: String,
    pub features: Vec<String>,
    /// Estimator settings, enough to rebuild the training problem.
    pub settings: FitFamily,
    pub model: FittedModel,
}

impl ModelFile {
    pub fn save(&self, path: &Path) -> CliResult<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let file: ModelFile = serde_json::from_str(&text)?;
        if file.format_version != FORMAT_VERSION {
            return Err(CliError::Input(format!(
                "model format version {} is not supported (expected {FORMAT_VERSION})",
                file.format_version
            )));
        }
        Ok(file)
    }
}

/// A CSV parsed into named columns of strings.
struct Table {
    headers: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    fn read(path: &Path) -> CliResult<Self> {
        let mut raw = String::new();
        File::open(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
            .read_to_string(&mut raw)?;
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(raw.as_bytes());
        let headers = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let rows = rdr.records().collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Table { headers, rows })
    }

    fn column(&self, name: &str) -> CliResult<Vec<f64>> {
        let idx = self
            .headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Input(format!("missing column '{name}'")))?;
        self.rows
            .iter()
            .enumerate()
            .map(|(r, rec)| {
                let s = rec.get(idx).unwrap_or("").trim();
                s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    CliError::Input(format!("column '{name}', row {}: '{s}' is not a finite number", r + 1))
                })
            })
            .collect()
    }

    fn matrix(&self, names: &[String]) -> CliResult<Array2<f64>> {
        let cols = names.iter().map(|c| self.column(c)).collect::<CliResult<Vec<_>>>()?;
        Ok(Array2::from_shape_fn((self.rows.len(), names.len()), |(i, j)| cols[j][i]))
    }
}

struct Dataset {
    features: Vec<String>,
    x: Array2<f64>,
    y: Vec<f64>,
}

fn load_training(args: &DataArgs) -> CliResult<Dataset> {
    let table = Table::read(&args.data)?;
    let features = match &args.features {
        Some(f) => f.clone(),
        None => table
            .headers
            .iter()
            .filter(|h| **h != args.response && !args.ignore.contains(h))
            .cloned()
            .collect(),
    };
    if features.is_empty() {
        return Err(CliError::Input("no feature columns".into()));
    }
    let y = table.column(&args.response)?;
    let x = table.matrix(&features)?;
    Ok(Dataset { features, x, y })
}

fn family_for(model: &ModelArgs, n: usize) -> CliResult<FitFamily> {
    if !(model.m > 0.0) {
        return Err(CliError::Input(format!("--m must be positive, got {}", model.m)));
    }
    let k = model.k.unwrap_or_else(|| default_truncation(n));
    let basis = BasisConfig { family: model.family, k, standardize: !model.no_standardize };
    let additive = |sparse: bool| {
        let mut c = AdditiveConfig::new(basis);
        c.m = model.m;
        c.sparse = sparse;
        c.preset = model.preset;
        c.max_iter = model.max_iter;
        c.tol = model.tol;
        c
    };
    Ok(match model.estimator {
        Estimator::Univariate => FitFamily::Univariate { basis, m: model.m },
        Estimator::Additive => FitFamily::Additive { config: additive(false) },
        Estimator::SparseAdditive => FitFamily::Additive { config: additive(true) },
        Estimator::Multivariate => FitFamily::Multivariate {
            config: MultivariateConfig { max_degree: model.max_degree, m: model.m, standardize: false },
        },
        Estimator::Logistic => FitFamily::Logistic { basis, m: model.m },
        Estimator::LogisticAdditive => FitFamily::LogisticAdditive { config: additive(true) },
    })
}

fn one_column(x: ArrayView2<f64>) -> CliResult<Vec<f64>> {
    if x.ncols() != 1 {
        return Err(CliError::Input(format!(
            "the univariate estimators take exactly one feature, got {}",
            x.ncols()
        )));
    }
    Ok(x.column(0).to_vec())
}

/// A training set prepared for the chosen estimator.
enum Problem {
    Univariate(UnivariateProblem),
    Additive(AdditiveProblem, bool),
    Multivariate(MultivariateProblem),
    Logistic(LogisticProblem, bool),
}

impl Problem {
    fn new(family: &FitFamily, x: ArrayView2<f64>, y: &[f64]) -> CliResult<Self> {
        Ok(match family {
            FitFamily::Univariate { basis, m } => {
                Problem::Univariate(UnivariateProblem::new(&one_column(x)?, y, basis, *m)?)
            }
            FitFamily::Additive { config } => {
                Problem::Additive(AdditiveProblem::new(x, y, config)?, config.sparse)
            }
            FitFamily::Multivariate { config } => Problem::Multivariate(MultivariateProblem::new(x, y, config)?),
            FitFamily::Logistic { basis, m } => {
                Problem::Logistic(LogisticProblem::univariate(&one_column(x)?, y, basis, *m)?, false)
            }
            FitFamily::LogisticAdditive { config } => {
                Problem::Logistic(LogisticProblem::additive(x, y, config)?, true)
            }
        })
    }

    fn lambda_max(&self) -> crate::Result<f64> {
        match self {
            Problem::Univariate(p) => p.lambda_max(),
            Problem::Additive(p, _) => p.lambda_max(),
            Problem::Multivariate(p) => p.lambda_max(),
            Problem::Logistic(p, _) => p.lambda_max(),
        }
    }

    /// Fits along a decreasing grid, warm-starting where it helps.
    fn path(&self, lambdas: &[f64]) -> CliResult<Vec<FittedModel>> {
        let fits = match self {
            Problem::Univariate(p) => {
                lambdas.iter().map(|&l| Ok(FittedModel::Univariate(p.fit(l)?))).collect::<CliResult<_>>()?
            }
            Problem::Additive(p, sparse) => p
                .path_on(lambdas)?
                .fits
                .into_iter()
                .map(|f| if *sparse { FittedModel::SparseAdditive(f) } else { FittedModel::Additive(f) })
                .collect(),
            Problem::Multivariate(p) => {
                lambdas.iter().map(|&l| Ok(FittedModel::Multivariate(p.fit(l)?))).collect::<CliResult<_>>()?
            }
            Problem::Logistic(p, additive) => p
                .path_on(lambdas, &LogisticOptions::default())?
                .into_iter()
                .map(|f| if *additive { FittedModel::LogisticAdditive(f) } else { FittedModel::Logistic(f) })
                .collect(),
        };
        Ok(fits)
    }

    fn fit(&self, lambda: f64) -> CliResult<FittedModel> {
        let fit = match self {
            Problem::Univariate(p) => FittedModel::Univariate(p.fit(lambda)?),
            Problem::Additive(p, sparse) => {
                let f = p.fit(lambda)?;
                if *sparse { FittedModel::SparseAdditive(f) } else { FittedModel::Additive(f) }
            }
            Problem::Multivariate(p) => FittedModel::Multivariate(p.fit(lambda)?),
            Problem::Logistic(p, additive) => {
                let f = p.fit(lambda, &LogisticOptions::default())?;
                if *additive { FittedModel::LogisticAdditive(f) } else { FittedModel::Logistic(f) }
            }
        };
        check_converged(&fit)?;
        Ok(fit)
    }

    /// Unbiased df where it is defined (univariate and multivariate squared-error fits).
    fn df(&self, fit: &FittedModel) -> CliResult<Option<f64>> {
        Ok(match (self, fit) {
            (Problem::Univariate(p), FittedModel::Univariate(f)) => {
                if p.map() != &f.basis {
                    return Err(CliError::Input("data does not match the model's training data".into()));
                }
                Some(p.degrees_of_freedom(f)?)
            }
            (Problem::Multivariate(p), FittedModel::Multivariate(f)) => {
                if p.map() != &f.map {
                    return Err(CliError::Input("data does not match the model's training data".into()));
                }
                Some(p.degrees_of_freedom(f)?)
            }
            _ => None,
        })
    }
}

fn check_converged(fit: &FittedModel) -> CliResult<()> {
    let (ok, iters) = match fit {
        FittedModel::Additive(f) | FittedModel::SparseAdditive(f) => (f.converged, f.n_iters),
        FittedModel::Logistic(f) | FittedModel::LogisticAdditive(f) => (f.converged, f.n_iters),
        _ => (true, 0),
    };
    if ok {
        Ok(())
    } else {
        Err(CliError::Numerical(format!("solver did not converge in {iters} iterations")))
    }
}

fn train_error(fit: &FittedModel, x: ArrayView2<f64>, y: &[f64]) -> CliResult<f64> {
    let pred = fit.predict(x)?;
    if fit.is_classifier() {
        // Brier score against 0/1 labels
        let labels: Vec<f64> = y.iter().map(|&v| if v == 1.0 { 1.0 } else { 0.0 }).collect();
        return Ok(mse(&pred, &labels)?);
    }
    Ok(mse(&pred, y)?)
}

fn csv_writer(out: &Option<PathBuf>) -> CliResult<csv::Writer<Box<dyn Write>>> {
    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    };
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(sink))
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn cmd_fit(args: &FitArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let data = load_training(&args.data)?;
    let family = family_for(&args.model, data.y.len())?;
    let problem = Problem::new(&family, data.x.view(), &data.y)?;
    let (lambda, how) = match args.lambda {
        Some(l) => (l, "fixed".to_string()),
        None => {
            let opts = CvOptions {
                k: args.cv,
                seed: args.seed,
                n_lambda: args.grid.n_lambda,
                lambda_min_ratio: args.grid.lambda_min_ratio,
            };
            let grid = log_grid(problem.lambda_max()?, opts.n_lambda, opts.lambda_min_ratio)?;
            let cv = kfold_cv_on_grid(data.x.view(), &data.y, &family, &grid, &opts)?;
            let l = if args.one_se { cv.best_1se_lambda } else { cv.best_lambda };
            (l, format!("{}-fold cv", args.cv))
        }
    };
    let mut fit = problem.fit(lambda)?;
    let df = problem.df(&fit)?;
    let train = train_error(&fit, data.x.view(), &data.y)?;
    let k0 = fit.k0();
    let objective = match &fit {
        FittedModel::Univariate(f) => f.objective,
        FittedModel::Additive(f) | FittedModel::SparseAdditive(f) => f.objective,
        FittedModel::Multivariate(f) => f.objective,
        FittedModel::Logistic(f) | FittedModel::LogisticAdditive(f) => f.objective,
    };
    fit.strip_traces();
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        response: args.data.response.clone(),
        features: data.features.clone(),
        settings: family,
        model: fit,
    };
    file.save(&args.out)?;
    writeln!(stdout, "lambda\t{} ({how})", fmt(lambda))?;
    if let FittedModel::Multivariate(f) = &file.model {
        writeln!(stdout, "K0\t{}", f.k0)?;
        writeln!(stdout, "induced_degree\t{}", f.induced_degree)?;
    } else {
        for (name, k) in data.features.iter().zip(&k0) {
            writeln!(stdout, "K0[{name}]\t{k}")?;
        }
        let active = k0.iter().filter(|&&k| k > 0).count();
        writeln!(stdout, "active\t{active}/{}", k0.len())?;
    }
    writeln!(stdout, "df\t{}", df.map_or("NA".to_string(), fmt))?;
    writeln!(stdout, "objective\t{}", fmt(objective))?;
    writeln!(stdout, "train_{}\t{}", if file.model.is_classifier() { "brier" } else { "mse" }, fmt(train))?;
    Ok(())
}

fn cmd_predict(args: &PredictArgs) -> CliResult<()> {
    let model = ModelFile::load(&args.model)?;
    let raw = std::fs::read_to_string(&args.data)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.data.display())))?;
    let mut w = csv_writer(&args.out)?;
    w.write_record(["row_id", "prediction"])?;
    if !raw.trim().is_empty() {
        let table = Table::read(&args.data)?;
        let n_features = table
            .headers
            .iter()
            .filter(|h| **h != model.response && !["truth", "row_id"].contains(&h.as_str()))
            .count();
        for f in &model.features {
            if !table.headers.contains(f) {
                return Err(CliError::Input(format!(
                    "missing column '{f}': model has {} features, data has {n_features}",
                    model.features.len()
                )));
            }
        }
        let x = table.matrix(&model.features)?;
        if x.nrows() > 0 {
            for (i, p) in model.model.predict(x.view())?.iter().enumerate() {
                w.write_record([(i + 1).to_string(), fmt(*p)])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_cv(args: &CvArgs) -> CliResult<()> {
    let data = load_training(&args.data)?;
    let family = family_for(&args.model, data.y.len())?;
    let opts = CvOptions {
        k: args.n_folds,
        seed: args.seed,
        n_lambda: args.grid.n_lambda,
        lambda_min_ratio: args.grid.lambda_min_ratio,
    };
    // same grid as `path`, so the chosen lambda is one of its rows
    let top = Problem::new(&family, data.x.view(), &data.y)?.lambda_max()?;
    let grid = log_grid(top, opts.n_lambda, opts.lambda_min_ratio)?;
    let cv = kfold_cv_on_grid(data.x.view(), &data.y, &family, &grid, &opts)?;
    let mut w = csv_writer(&args.out)?;
    w.write_record(["lambda", "cv_error", "cv_se", "is_best", "is_1se"])?;
    for l in 0..cv.lambdas.len() {
        w.write_record([
            fmt(cv.lambdas[l]),
            fmt(cv.cv_error[l]),
            fmt(cv.cv_se[l]),
            ((l == cv.best_index) as u8).to_string(),
            ((l == cv.best_1se_index) as u8).to_string(),
        ])?;
    }
    w.flush()?;
    if let Some(path) = &args.folds_out {
        let mut fw = csv_writer(&Some(path.clone()))?;
        fw.write_record(["row_id", "fold"])?;
        for (i, f) in cv.folds.iter().enumerate() {
            fw.write_record([(i + 1).to_string(), f.to_string()])?;
        }
        fw.flush()?;
    }
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> CliResult<()> {
    let mut spec = SimSpec::new(args.generator, args.n, args.p, args.snr, args.seed);
    if let Some(d) = args.design {
        spec = spec.with_design(d);
    }
    let d = generate(&spec)?;
    let mut w = csv_writer(&args.out)?;
    let mut header: Vec<String> = (1..=args.p).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    header.push("truth".into());
    w.write_record(&header)?;
    for i in 0..args.n {
        let mut rec: Vec<String> = d.x.row(i).iter().map(|&v| fmt(v)).collect();
        rec.push(fmt(d.y[i]));
        rec.push(fmt(d.truth[i]));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_path(args: &PathArgs) -> CliResult<()> {
    let data = load_training(&args.data)?;
    let family = family_for(&args.model, data.y.len())?;
    let problem = Problem::new(&family, data.x.view(), &data.y)?;
    let lambdas = log_grid(problem.lambda_max()?, args.grid.n_lambda, args.grid.lambda_min_ratio)?;
    let fits = problem.path(&lambdas)?;
    let test = match &args.test {
        Some(p) => {
            let t = Table::read(p)?;
            Some((t.matrix(&data.features)?, t.column(&args.data.response)?))
        }
        None => None,
    };
    let mut w = csv_writer(&args.out)?;
    let mut header = vec!["lambda", "K0", "df", "train_mse"];
    if test.is_some() {
        header.push("test_mse");
    }
    w.write_record(&header)?;
    for (lam, fit) in lambdas.iter().zip(&fits) {
        check_converged(fit)?;
        let k0: usize = fit.k0().iter().sum();
        let df = problem.df(fit)?.map_or("NA".to_string(), fmt);
        let mut rec = vec![fmt(*lam), k0.to_string(), df, fmt(train_error(fit, data.x.view(), &data.y)?)];
        if let Some((xt, yt)) = &test {
            rec.push(fmt(train_error(fit, xt.view(), yt)?));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_df(args: &DfArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let model = ModelFile::load(&args.model)?;
    let table = Table::read(&args.data)?;
    let x = table.matrix(&model.features)?;
    let y = table.column(&model.response)?;
    let problem = Problem::new(&model.settings, x.view(), &y)?;
    match problem.df(&model.model)? {
        Some(df) => writeln!(stdout, "{}", fmt(df))?,
        None => {
            return Err(CliError::Input(
                "degrees of freedom are defined for univariate and multivariate squared-error fits only".into(),
            ))
        }
    }
    Ok(())
}

fn init_threads() {
    if let Some(n) = std::env::var("HIERFIT_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // a second initialization in the same process is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> CliResult<()> {
    init_threads();
    match &cli.command {
        Command::Fit(a) => cmd_fit(a, stdout),
        Command::Predict(a) => cmd_predict(a),
        Command::Cv(a) => cmd_cv(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Path(a) => cmd_path(a),
        Command::Df(a) => cmd_df(a, stdout),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    match execute(&cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            let _ = lock.flush();
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
