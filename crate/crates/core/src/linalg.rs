//! Small dense helpers. Systems here are at most K x K with K in the tens.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{HierError, Result};

/// Solves `a x = b` for every column of `b` by Gaussian elimination with
/// partial pivoting.
pub(crate) fn solve(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n {
        return Err(HierError::DimensionMismatch(format!(
            "solve: {}x{} system with {} right-hand rows",
            a.nrows(),
            a.ncols(),
            b.nrows()
        )));
    }
    let mut a = a.to_owned();
    let mut x = b.to_owned();
    let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    for col in 0..n {
        let (piv, pmax) = (col..n)
            .map(|r| (r, a[[r, col]].abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pmax <= f64::EPSILON * scale || pmax == 0.0 {
            return Err(HierError::Numerical("singular linear system".into()));
        }
        if piv != col {
            for j in 0..n {
                a.swap([col, j], [piv, j]);
            }
            for j in 0..x.ncols() {
                x.swap([col, j], [piv, j]);
            }
        }
        for r in col + 1..n {
            let f = a[[r, col]] / a[[col, col]];
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                a[[r, j]] -= f * a[[col, j]];
            }
            for j in 0..x.ncols() {
                x[[r, j]] -= f * x[[col, j]];
            }
        }
    }
    for col in (0..n).rev() {
        for j in 0..x.ncols() {
            let mut s = x[[col, j]];
            for k in col + 1..n {
                s -= a[[col, k]] * x[[k, j]];
            }
            x[[col, j]] = s / a[[col, col]];
        }
    }
    Ok(x)
}

/// Back-substitution for an upper-triangular system `r x = b`.
pub(crate) fn solve_upper(r: ArrayView2<f64>, b: ArrayView1<f64>) -> Result<Array1<f64>> {
    let n = r.nrows();
    let mut x = Array1::zeros(n);
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= r[[i, k]] * x[k];
        }
        let d = r[[i, i]];
        if d == 0.0 || !d.is_finite() {
            return Err(HierError::Numerical(format!(
                "zero pivot at row {i} in triangular solve"
            )));
        }
        x[i] = s / d;
    }
    Ok(x)
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
