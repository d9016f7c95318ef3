//! Compare the closed-form degrees of freedom with a Monte Carlo estimate of
//! `sum_i cov(y_i, yhat_i) / sigma^2` at a fixed lambda.
//!
//! `cargo run --release --example degrees_of_freedom -- [reps]`

use hierfit::basis::BasisConfig;
use hierfit::modelsel::sim::SimRng;
use hierfit::univariate::UnivariateProblem;

fn main() -> hierfit::Result<()> {
    let reps: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let n = 60;
    let x: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
    let f: Vec<f64> = x.iter().map(|&t| (6.0 * t).sin()).collect();
    let basis = BasisConfig::polynomial(8);

    let mut rng = SimRng::new(5, 0);
    let mut ys = Vec::with_capacity(reps);
    let mut fits = Vec::with_capacity(reps);
    let mut lemma = 0.0;
    let base = UnivariateProblem::new(&x, &f, &basis, 2.0)?;
    let lambda = 0.05 * base.lambda_max()?.max(1e-3);
    for _ in 0..reps {
        let y: Vec<f64> = f.iter().map(|fi| fi + rng.normal()).collect();
        let prob = UnivariateProblem::new(&x, &y, &basis, 2.0)?;
        let fit = prob.fit(lambda)?;
        lemma += prob.degrees_of_freedom(&fit)?;
        fits.push(prob.fitted_values(&fit).to_vec());
        ys.push(y);
    }
    let r = reps as f64;
    let mut cov = 0.0;
    for i in 0..n {
        let my = ys.iter().map(|y| y[i]).sum::<f64>() / r;
        let mf = fits.iter().map(|v| v[i]).sum::<f64>() / r;
        cov += ys.iter().zip(&fits).map(|(y, v)| (y[i] - my) * (v[i] - mf)).sum::<f64>() / (r - 1.0);
    }
    println!("lambda           {lambda:.4e}");
    println!("mean formula df  {:.3}", lemma / r);
    println!("Monte Carlo df   {cov:.3}");
    Ok(())
}
