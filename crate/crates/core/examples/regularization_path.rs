//! Warm-started path over a log-spaced lambda grid with per-lambda K0, df and
//! test error against a fresh draw.
//!
//! `cargo run --example regularization_path`

use hierfit::basis::{default_truncation, BasisConfig};
use hierfit::modelsel::sim::generate_stream;
use hierfit::modelsel::{mse, Generator, SimSpec};
use hierfit::univariate::UnivariateProblem;

fn main() -> hierfit::Result<()> {
    let spec = SimSpec::new(Generator::G3, 150, 1, 3.0, 11);
    let train = generate_stream(&spec, 0)?;
    let test = generate_stream(&spec, 1)?;
    let x = train.x.column(0).to_vec();
    let x_test = test.x.column(0).to_vec();

    let basis = BasisConfig::polynomial(default_truncation(spec.n));
    let prob = UnivariateProblem::new(&x, &train.y, &basis, 2.0)?;
    let path = prob.path(20, 1e-4)?;

    println!("{:>11} {:>4} {:>7} {:>9} {:>9}", "lambda", "K0", "df", "train", "test");
    for ((lam, fit), df) in path.lambdas.iter().zip(&path.fits).zip(&path.df) {
        let train_err = mse(prob.fitted_values(fit).as_slice().unwrap(), &train.y)?;
        let test_err = mse(fit.predict(&x_test).as_slice().unwrap(), &test.y)?;
        println!("{lam:>11.4e} {:>4} {df:>7.3} {train_err:>9.4} {test_err:>9.4}", fit.k0);
    }
    Ok(())
}
