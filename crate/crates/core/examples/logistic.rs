//! Sparse additive logistic regression on a two-signal classification design.
//!
//! `cargo run --release --example logistic`

use hierfit::additive::AdditiveConfig;
use hierfit::basis::BasisConfig;
use hierfit::logistic::{LogisticOptions, LogisticProblem};
use hierfit::modelsel::sim::generate_stream;
use hierfit::modelsel::{Generator, SimSpec};

fn main() -> hierfit::Result<()> {
    let spec = SimSpec::new(Generator::LogisticDemo, 300, 6, 1.0, 4);
    let train = generate_stream(&spec, 0)?;
    let test = generate_stream(&spec, 1)?;

    let cfg = AdditiveConfig::new(BasisConfig::polynomial(6));
    let prob = LogisticProblem::additive(train.x.view(), &train.y, &cfg)?;
    let opts = LogisticOptions::default();
    let grid = prob.lambda_grid(8, 1e-2)?;
    let fits = prob.path_on(&grid, &opts)?;

    println!("{:>11} {:>8} {:>6} {:>9}", "lambda", "active", "iters", "test_err");
    for fit in &fits {
        let class = fit.predict_class(test.x.view())?;
        let wrong = class.iter().zip(&test.y).filter(|(a, b)| a != b).count();
        println!(
            "{:>11.4e} {:>8} {:>6} {:>9.3}",
            fit.lambda,
            fit.active_set().len(),
            fit.n_iters,
            wrong as f64 / test.y.len() as f64
        );
    }
    let last = fits.last().expect("non-empty grid");
    println!("K0 per feature at the smallest lambda: {:?}", last.k0());
    println!("KKT residual {:.2e}", prob.kkt_residual(last));
    Ok(())
}
