//! Fit a single covariate at a fixed lambda and inspect the induced truncation.
//!
//! `cargo run --example univariate_fit`

use hierfit::basis::BasisConfig;
use hierfit::modelsel::{generate, mse, Generator, SimSpec};
use hierfit::univariate::UnivariateProblem;

fn main() -> hierfit::Result<()> {
    let data = generate(&SimSpec::new(Generator::G2, 200, 1, 3.0, 7))?;
    let x = data.x.column(0).to_vec();

    let basis = BasisConfig::polynomial(15);
    let prob = UnivariateProblem::new(&x, &data.y, &basis, 3.0)?;
    let lambda = 0.02 * prob.lambda_max()?;
    let fit = prob.fit(lambda)?;

    println!("lambda      {lambda:.4e}");
    println!("K0          {} of {}", fit.k0, basis.k);
    println!("objective   {:.6}", fit.objective);
    println!("df          {:.3}", prob.degrees_of_freedom(&fit)?);
    let fitted = prob.fitted_values(&fit);
    println!("truth MSE   {:.5}", mse(fitted.as_slice().unwrap(), &data.truth)?);

    let grid = [0.1, 0.3, 0.5, 0.7, 0.9];
    for (g, v) in grid.iter().zip(fit.predict(&grid)) {
        println!("f({g:.1}) = {v:+.4}");
    }
    Ok(())
}
