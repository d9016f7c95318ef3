//! K-fold cross-validation over the lambda grid, with the minimum and
//! one-standard-error choices.
//!
//! `cargo run --release --example cross_validation`

use hierfit::basis::BasisConfig;
use hierfit::modelsel::{generate, kfold_cv, CvOptions, FitFamily, Generator, SimSpec};

fn main() -> hierfit::Result<()> {
    let data = generate(&SimSpec::new(Generator::G4, 200, 1, 3.0, 9))?;
    let family = FitFamily::Univariate { basis: BasisConfig::polynomial(14), m: 3.0 };
    let opts = CvOptions { n_lambda: 30, ..CvOptions::default() };
    let cv = kfold_cv(data.x.view(), &data.y, &family, &opts)?;

    for (i, lam) in cv.lambdas.iter().enumerate().step_by(3) {
        println!("{lam:>11.4e}  {:.4} +- {:.4}", cv.cv_error[i], cv.cv_se[i]);
    }
    println!("best lambda     {:.4e} (index {})", cv.best_lambda, cv.best_index);
    println!("one-SE lambda   {:.4e} (index {})", cv.best_1se_lambda, cv.best_1se_index);
    Ok(())
}
