//! Draw a dataset from one of the built-in designs and write it as CSV.
//!
//! `cargo run --example simulate -- simfs 100 8 > data.csv`

use std::io::Write;

use hierfit::modelsel::{generate, Generator, SimSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let generator: Generator = args.next().as_deref().unwrap_or("g1").parse()?;
    let n: usize = args.next().map_or(Ok(100), |s| s.parse())?;
    let p: usize = args.next().map_or(Ok(1), |s| s.parse())?;
    let data = generate(&SimSpec::new(generator, n, p, 3.0, 1))?;

    let mut out = std::io::stdout().lock();
    let names: Vec<String> = (1..=p).map(|j| format!("x{j}")).collect();
    writeln!(out, "{},y,truth", names.join(","))?;
    for (i, row) in data.x.rows().into_iter().enumerate() {
        for v in row {
            write!(out, "{v},")?;
        }
        writeln!(out, "{},{}", data.y[i], data.truth[i])?;
    }
    eprintln!("noise sd {:.4}", data.sigma);
    Ok(())
}
