//! Oracles shared by the integration tests. None of them call into the
//! crate's solvers, so agreement is evidence rather than tautology.

#![allow(dead_code)]

use hierfit::modelsel::sim::SimRng;

/// `1/2 ||beta - c||^2 + lambda * sum_k w_k ||beta_{k:}||`.
pub fn prox_objective(beta: &[f64], c: &[f64], lambda: f64, w: &[f64]) -> f64 {
    let fit: f64 = beta.iter().zip(c).map(|(b, c)| (b - c).powi(2)).sum::<f64>() * 0.5;
    fit + lambda * nested_penalty(beta, w)
}

pub fn nested_penalty(beta: &[f64], w: &[f64]) -> f64 {
    (0..beta.len()).map(|k| w[k] * tail_norm(beta, k)).sum()
}

fn tail_norm(v: &[f64], k: usize) -> f64 {
    v[k..].iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn project_ball(v: &mut [f64], radius: f64) {
    let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nrm > radius {
        let s = if nrm > 0.0 { radius / nrm } else { 0.0 };
        v.iter_mut().for_each(|x| *x *= s);
    }
}

/// Projects `r` onto `{sum_{k >= start} xi_k : ||xi_k|| <= radius_k}`, where
/// `xi_k` lives on coordinates `k..`, by exact block coordinate descent on the
/// dual variables. Returns the distance from `r` to the set.
fn nested_ball_distance(r: &[f64], start: usize, radii: &[f64]) -> f64 {
    let kdim = r.len();
    let mut xi: Vec<Vec<f64>> = (0..kdim).map(|k| vec![0.0; kdim - k]).collect();
    let mut resid: Vec<f64> = r.to_vec();
    for _ in 0..200_000 {
        let mut moved = 0.0_f64;
        for k in start..kdim {
            let mut target: Vec<f64> = (k..kdim).map(|i| resid[i] + xi[k][i - k]).collect();
            project_ball(&mut target, radii[k]);
            for i in k..kdim {
                let d = target[i - k] - xi[k][i - k];
                moved = moved.max(d.abs());
                resid[i] -= d;
                xi[k][i - k] = target[i - k];
            }
        }
        if moved < 1e-15 {
            break;
        }
    }
    resid.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Prox of the nested-group norm by dual block coordinate descent:
/// `beta = c - sum_k xi_k` at the dual optimum.
pub fn dual_prox(c: &[f64], lambda: f64, w: &[f64]) -> Vec<f64> {
    let kdim = c.len();
    let radii: Vec<f64> = w.iter().map(|wk| lambda * wk).collect();
    let mut xi: Vec<Vec<f64>> = (0..kdim).map(|k| vec![0.0; kdim - k]).collect();
    let mut beta = c.to_vec();
    for _ in 0..200_000 {
        let mut moved = 0.0_f64;
        for k in 0..kdim {
            let mut target: Vec<f64> = (k..kdim).map(|i| beta[i] + xi[k][i - k]).collect();
            project_ball(&mut target, radii[k]);
            for i in k..kdim {
                let d = target[i - k] - xi[k][i - k];
                moved = moved.max(d.abs());
                beta[i] -= d;
                xi[k][i - k] = target[i - k];
            }
        }
        if moved < 1e-15 {
            break;
        }
    }
    beta
}

/// Distance from `c - beta` to the subdifferential `lambda * dOmega(beta)`.
///
/// Groups with a nonzero tail have a unique subgradient; the rest contribute
/// any point of their ball, so the residual is a projection onto a sum of
/// nested balls.
pub fn prox_kkt_residual(beta: &[f64], c: &[f64], lambda: f64, w: &[f64]) -> f64 {
    let kdim = c.len();
    let k0 = beta.iter().rposition(|&b| b != 0.0).map_or(0, |i| i + 1);
    let mut r: Vec<f64> = c.iter().zip(beta).map(|(c, b)| c - b).collect();
    for k in 0..k0 {
        let nrm = tail_norm(beta, k);
        for i in k..kdim {
            r[i] -= lambda * w[k] * beta[i] / nrm;
        }
    }
    let head: f64 = r[..k0].iter().map(|x| x * x).sum();
    let radii: Vec<f64> = w.iter().map(|wk| lambda * wk).collect();
    let mut tail = vec![0.0; kdim];
    tail[k0..].copy_from_slice(&r[k0..]);
    let d = nested_ball_distance(&tail, k0, &radii);
    (head + d * d).sqrt()
}

/// Ordinary least squares with an intercept via the normal equations and a
/// plain Cholesky factorization.
pub fn ols_fitted(columns: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut cols: Vec<Vec<f64>> = vec![vec![1.0; n]];
    cols.extend(columns.iter().cloned());
    let p = cols.len();
    let mut a = vec![vec![0.0; p]; p];
    let mut b = vec![0.0; p];
    for i in 0..p {
        for j in 0..p {
            a[i][j] = (0..n).map(|r| cols[i][r] * cols[j][r]).sum();
        }
        b[i] = (0..n).map(|r| cols[i][r] * y[r]).sum();
    }
    for j in 0..p {
        let d = (a[j][j] - (0..j).map(|k| a[j][k] * a[j][k]).sum::<f64>()).sqrt();
        a[j][j] = d;
        for i in j + 1..p {
            a[i][j] = (a[i][j] - (0..j).map(|k| a[i][k] * a[j][k]).sum::<f64>()) / d;
        }
    }
    let mut z = vec![0.0; p];
    for i in 0..p {
        z[i] = (b[i] - (0..i).map(|k| a[i][k] * z[k]).sum::<f64>()) / a[i][i];
    }
    let mut coef = vec![0.0; p];
    for i in (0..p).rev() {
        coef[i] = (z[i] - (i + 1..p).map(|k| a[k][i] * coef[k]).sum::<f64>()) / a[i][i];
    }
    (0..n).map(|r| (0..p).map(|j| coef[j] * cols[j][r]).sum()).collect()
}

/// Random prox instance: `c`, nonnegative weights with `w_1 > 0`, and a
/// lambda spread over several scales.
pub fn random_prox_instance(rng: &mut SimRng, kmax: usize) -> (Vec<f64>, Vec<f64>, f64) {
    let k = 1 + (rng.uniform() * kmax as f64) as usize;
    let k = k.min(kmax);
    let scale = 10f64.powf(rng.uniform() * 2.0 - 1.0);
    let c: Vec<f64> = (0..k).map(|_| scale * rng.normal()).collect();
    let w: Vec<f64> = match (rng.uniform() * 3.0) as usize {
        0 => {
            let m = 0.5 + 3.0 * rng.uniform();
            (1..=k).map(|i| (i as f64).powf(m) - ((i - 1) as f64).powf(m)).collect()
        }
        1 => (0..k).map(|i| if i == 0 { 0.5 + rng.uniform() } else { 2.0 * rng.uniform() }).collect(),
        _ => (0..k).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect(),
    };
    let lambda = scale * 10f64.powf(rng.uniform() * 3.0 - 2.5);
    (c, w, lambda)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// One line per criterion so the outcome is readable in the test log.
pub fn report(id: u32, name: &str, pass: bool, detail: &str) {
    println!("{} criterion {id} ({name}): {detail}", if pass { "PASS" } else { "FAIL" });
}
