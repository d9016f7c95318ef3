//! Multivariate fit over all monomials up to a total degree; the penalty
//! grows with degree so interactions enter only when the data support them.
//!
//! `cargo run --example interactions`

use hierfit::modelsel::sim::SimRng;
use hierfit::multivariate::{MultivariateConfig, MultivariateProblem};
use ndarray::Array2;

fn main() -> hierfit::Result<()> {
    let (n, p) = (300, 3);
    let mut rng = SimRng::new(21, 0);
    let x = Array2::from_shape_fn((n, p), |_| rng.uniform());
    let y: Vec<f64> = x
        .rows()
        .into_iter()
        .map(|r| 2.0 * r[0] - 3.0 * r[1] * r[2] + 0.3 * rng.normal())
        .collect();

    let prob = MultivariateProblem::new(x.view(), &y, &MultivariateConfig::new(3))?;
    for frac in [0.5, 0.1, 0.01] {
        let fit = prob.fit(frac * prob.lambda_max()?)?;
        println!(
            "lambda = {frac:>4} * lambda_max: K0 {:>2}, induced degree {}, df {:.2}",
            fit.k0,
            fit.induced_degree,
            prob.degrees_of_freedom(&fit)?
        );
    }

    let fit = prob.fit(0.01 * prob.lambda_max()?)?;
    for (idx, b) in fit.map.indices.iter().zip(&fit.beta) {
        if b.abs() > 0.05 {
            println!("  x^{:?}  {b:+.3}", idx.nu);
        }
    }
    Ok(())
}
