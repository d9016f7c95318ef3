//! Sparse additive fit on the four-signal design with noise features, showing
//! the selected features and their feature-wise truncation levels.
//!
//! `cargo run --release --example sparse_additive -- [lambda fraction]`

use hierfit::additive::{component_function, AdditiveConfig, AdditiveProblem};
use hierfit::basis::BasisConfig;
use hierfit::modelsel::sim::generate_stream;
use hierfit::modelsel::{mse, Generator, SimSpec};

fn main() -> hierfit::Result<()> {
    let spec = SimSpec::new(Generator::Simfs, 150, 20, 3.0, 3);
    let train = generate_stream(&spec, 0)?;
    let test = generate_stream(&spec, 1)?;

    let mut cfg = AdditiveConfig::new(BasisConfig::polynomial(10));
    cfg.m = 2.0;
    let prob = AdditiveProblem::new(train.x.view(), &train.y, &cfg)?;
    let frac: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.05);
    let fit = prob.fit(frac * prob.lambda_max()?)?;

    println!("converged {} after {} sweeps", fit.converged, fit.n_iters);
    println!("active features {:?}", fit.active_set());
    println!("K0 per feature  {:?}", fit.k0());
    let pred = fit.predict(test.x.view())?;
    let mean = test.truth.iter().sum::<f64>() / test.truth.len() as f64;
    let null = vec![mean; test.truth.len()];
    println!("test MSE vs truth {:.4} (constant fit {:.4})", mse(pred.as_slice().unwrap(), &test.truth)?, mse(&null, &test.truth)?);

    let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
    for j in 0..4 {
        let f = component_function(&fit, j, &grid)?;
        println!("f{} on grid: {:?}", j + 1, f.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>());
    }
    Ok(())
}
