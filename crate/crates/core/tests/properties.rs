mod common;

use common::{dual_prox, max_abs_diff, prox_objective};
use hierfit::additive::{AdditiveConfig, AdditiveProblem, WeightPreset};
use hierfit::basis::BasisConfig;
use hierfit::logistic::{LogisticOptions, LogisticProblem};
use hierfit::modelsel::cv::fold_assignments;
use hierfit::modelsel::sim::{generate_stream, SimRng};
use hierfit::modelsel::{Generator, SimSpec};
use hierfit::prox::{hier_prox, lambda_max, univariate_weights};
use hierfit::univariate::UnivariateProblem;
use ndarray::{Array1, Array2, ArrayView1};
use proptest::prelude::*;

fn prox_case() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
    (1usize..10).prop_flat_map(|k| {
        (
            proptest::collection::vec(-5.0f64..5.0, k),
            proptest::collection::vec(0.0f64..3.0, k),
            0.0f64..2.0,
            0.1f64..2.0,
        )
            .prop_map(|(c, mut w, lam, w1)| {
                w[0] = w1;
                (c, w, lam)
            })
    })
}

fn residual(prob: &AdditiveProblem, y: &[f64], betas: &[Vec<f64>]) -> Array1<f64> {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let mut r: Array1<f64> = y.iter().map(|v| v - mean).collect();
    for (j, b) in betas.iter().enumerate() {
        if let Some(o) = prob.ortho(j) {
            r -= &o.fitted(ArrayView1::from(&b[..]));
        }
    }
    r
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prox_agrees_with_dual_solver((c, w, lam) in prox_case()) {
        let ours = hier_prox(&c, lam, &w).unwrap();
        let oracle = dual_prox(&c, lam, &w);
        prop_assert!(prox_objective(&ours, &c, lam, &w) <= prox_objective(&oracle, &c, lam, &w) + 1e-9);
        prop_assert!(max_abs_diff(&ours, &oracle) < 1e-6);
    }

    #[test]
    fn prox_is_odd_and_positively_homogeneous((c, w, lam) in prox_case(), t in 0.1f64..10.0) {
        let base = hier_prox(&c, lam, &w).unwrap();
        let neg: Vec<f64> = c.iter().map(|v| -v).collect();
        let flipped = hier_prox(&neg, lam, &w).unwrap();
        prop_assert!(base.iter().zip(&flipped).all(|(a, b)| a == &-b));
        let scaled: Vec<f64> = c.iter().map(|v| t * v).collect();
        let out = hier_prox(&scaled, t * lam, &w).unwrap();
        let expect: Vec<f64> = base.iter().map(|v| t * v).collect();
        prop_assert!(max_abs_diff(&out, &expect) < 1e-9 * t.max(1.0) * 10.0);
    }

    #[test]
    fn lambda_max_is_the_zeroing_threshold((c, w, _lam) in prox_case()) {
        prop_assume!(c.iter().any(|v| v.abs() > 1e-3));
        let top = lambda_max(&c, &w, 1e-10).unwrap();
        prop_assert!(hier_prox(&c, top, &w).unwrap().iter().all(|&v| v == 0.0));
        prop_assert!(hier_prox(&c, top * (1.0 - 1e-6), &w).unwrap().iter().any(|&v| v != 0.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn univariate_fit_beats_perturbations(seed in 0u64..1000, k in 2usize..12, frac in 0.001f64..0.9, m in 0.5f64..4.0) {
        let d = generate_stream(&SimSpec::new(Generator::G2, 80, 1, 3.0, seed), 0).unwrap();
        let x = d.x.column(0).to_vec();
        let prob = UnivariateProblem::new(&x, &d.y, &BasisConfig::polynomial(k), m).unwrap();
        let lam = frac * prob.lambda_max().unwrap();
        let fit = prob.fit(lam).unwrap();
        let best = prob.objective(&fit.beta_t, lam);
        let mut rng = SimRng::new(seed, 1);
        for _ in 0..20 {
            let moved: Vec<f64> = fit.beta_t.iter().map(|b| b + 1e-3 * rng.normal()).collect();
            prop_assert!(best <= prob.objective(&moved, lam) + 1e-12);
        }
        let df = prob.degrees_of_freedom(&fit).unwrap();
        prop_assert!(df >= 1.0 - 1e-12 && df <= fit.k0 as f64 + 1.0 + 1e-9);
    }

    #[test]
    fn additive_fit_is_permutation_equivariant(seed in 0u64..1000, frac in 0.02f64..0.6) {
        let d = generate_stream(&SimSpec::new(Generator::Simfs, 90, 6, 3.0, seed), 0).unwrap();
        let perm = [3usize, 0, 5, 1, 4, 2];
        let xp = Array2::from_shape_fn((90, 6), |(i, j)| d.x[[i, perm[j]]]);
        let cfg = AdditiveConfig { tol: 1e-10, ..AdditiveConfig::new(BasisConfig::polynomial(5)) };
        let a = AdditiveProblem::new(d.x.view(), &d.y, &cfg).unwrap();
        let b = AdditiveProblem::new(xp.view(), &d.y, &cfg).unwrap();
        let lam = frac * a.lambda_max().unwrap();
        let fa = a.fit(lam).unwrap();
        let fb = b.fit(lam).unwrap();
        for (j, &src) in perm.iter().enumerate() {
            prop_assert!(max_abs_diff(&fb.components[j].beta_t, &fa.components[src].beta_t) < 1e-6);
        }
    }

    #[test]
    fn spam_preset_solves_the_group_lasso(seed in 0u64..1000, frac in 0.02f64..0.8, sparse in any::<bool>()) {
        let d = generate_stream(&SimSpec::new(Generator::Simfs, 100, 7, 3.0, seed), 0).unwrap();
        let cfg = AdditiveConfig {
            preset: WeightPreset::Spam,
            sparse,
            tol: 1e-12,
            max_iter: 100_000,
            ..AdditiveConfig::new(BasisConfig::polynomial(6))
        };
        let prob = AdditiveProblem::new(d.x.view(), &d.y, &cfg).unwrap();
        let lam = frac * prob.lambda_max().unwrap();
        let fit = prob.fit(lam).unwrap();
        prop_assert!(fit.converged);
        let betas: Vec<Vec<f64>> = fit.components.iter().map(|c| c.beta_t.clone()).collect();
        let r = residual(&prob, &d.y, &betas);
        // one group per feature with weight 1, or 1 + lambda with the extra term
        let radius = lam * if sparse { 1.0 + lam } else { 1.0 };
        for (j, b) in betas.iter().enumerate() {
            let g = prob.ortho(j).unwrap().project(r.view());
            let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            let kkt = if nb > 0.0 {
                g.iter().zip(b).map(|(gi, bi)| (gi - radius * bi / nb).powi(2)).sum::<f64>().sqrt()
            } else {
                (g.iter().map(|v| v * v).sum::<f64>().sqrt() - radius).max(0.0)
            };
            prop_assert!(kkt < 1e-6, "feature {j}: residual {kkt}");
        }
    }

    #[test]
    fn folds_are_balanced(n in 2usize..300, k in 2usize..10, seed in 0u64..1000) {
        prop_assume!(k <= n);
        let folds = fold_assignments(n, k, seed).unwrap();
        let mut counts = vec![0usize; k];
        for &f in &folds {
            counts[f] += 1;
        }
        let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
        prop_assert!(hi - lo <= 1);
        prop_assert_eq!(folds, fold_assignments(n, k, seed).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn logistic_fits_are_stationary(seed in 0u64..1000, frac in 0.02f64..0.9) {
        let d = generate_stream(&SimSpec::new(Generator::LogisticDemo, 120, 3, 1.0, seed), 0).unwrap();
        let prob = LogisticProblem::additive(d.x.view(), &d.y, &AdditiveConfig::new(BasisConfig::polynomial(5))).unwrap();
        let fit = prob.fit(frac * prob.lambda_max().unwrap(), &LogisticOptions::default()).unwrap();
        prop_assert!(fit.converged);
        prop_assert!(prob.kkt_residual(&fit) < 1e-5);
        let p = fit.predict_proba(d.x.view()).unwrap();
        prop_assert!(p.iter().all(|&q| (0.0..=1.0).contains(&q)));
    }
}

#[test]
fn truncation_adapts_per_feature() {
    let cfg = AdditiveConfig::new(BasisConfig::polynomial(8));
    let differs = (0..10).any(|seed| {
        let d = generate_stream(&SimSpec::new(Generator::Simfs, 200, 8, 3.0, seed), 0).unwrap();
        let prob = AdditiveProblem::new(d.x.view(), &d.y, &cfg).unwrap();
        let fit = prob.fit(0.05 * prob.lambda_max().unwrap()).unwrap();
        let k0 = fit.k0();
        let first4: Vec<usize> = k0[..4].to_vec();
        first4.iter().all(|&k| k > 0) && first4.iter().any(|&k| k != first4[0])
    });
    assert!(differs);
}

#[test]
fn weights_grow_with_smoothness_order() {
    for m in [1.0, 2.0, 3.0] {
        let w = univariate_weights(m, 6);
        assert_eq!(w.as_slice()[0], 1.0);
        assert!(w.as_slice().windows(2).all(|p| p[1] >= p[0]));
    }
}
