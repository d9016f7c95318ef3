//! Oracle-lambda MSE against sample size for the cubic `g1`, with the fitted
//! log-log slope. Smoothness order `m` sets the expected rate `-2m/(2m+1)`.
//!
//! Run with `cargo run --release --example rate_experiment -- [m] [reps]`.

use hierfit::modelsel::rate::{rate_experiment, RateConfig};
use hierfit::modelsel::Generator;

fn main() -> hierfit::Result<()> {
    let mut args = std::env::args().skip(1);
    let m: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(3.0);
    let reps: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(50);
    let grid = vec![64, 128, 256, 512, 1024, 2048];
    let cfg = RateConfig::new(m, Generator::G1, grid, reps, 2017);
    let res = rate_experiment(&cfg)?;
    println!("{:>6} {:>12} {:>10} {:>12}", "n", "mean_mse", "se", "oracle_lam");
    for p in &res.points {
        println!("{:>6} {:>12.6} {:>10.6} {:>12.3e}", p.n, p.mean_mse, p.se_mse, p.mean_oracle_lambda);
    }
    let target = -2.0 * m / (2.0 * m + 1.0);
    println!("slope {:.3} (nominal {:.3})", res.slope, target);
    Ok(())
}
