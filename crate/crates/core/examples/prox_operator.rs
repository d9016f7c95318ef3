//! The proximal operator of the nested-group penalty on a hand-picked vector:
//! the output is shrunk and its support is always a prefix.

use hierfit::prox::{hier_prox, lambda_max, penalty_value, univariate_weights};

fn main() -> hierfit::Result<()> {
    let c = [1.2, -0.8, 0.5, 0.3, -0.05, 0.02];
    let w = univariate_weights(2.0, c.len());
    println!("weights {:?}", w.as_slice());
    let top = lambda_max(&c, w.as_slice(), 1e-10)?;
    for lambda in [0.0, 0.01, 0.05, 0.1, top] {
        let beta = hier_prox(&c, lambda, w.as_slice())?;
        println!(
            "lambda {lambda:.4}: K0 {} penalty {:.4} beta {:?}",
            hierfit::support_len(&beta),
            penalty_value(&beta, w.as_slice()),
            beta.iter().map(|b| (b * 1e4).round() / 1e4).collect::<Vec<_>>()
        );
    }
    Ok(())
}
