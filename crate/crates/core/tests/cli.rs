use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hierfit::cli::{FittedModel, ModelFile};
use hierfit::modelsel::{generate, Generator, SimSpec};
use ndarray::Array2;
use tempfile::TempDir;

fn hierfit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hierfit")).args(args).current_dir(dir).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = hierfit(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let (header, rows) = read_csv(path);
    let j = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[j].parse().unwrap()).collect()
}

fn setup() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["simulate", "--generator", "simfs", "--n", "100", "--p", "5", "--seed", "1", "--out", "train.csv"]);
    ok(dir.path(), &["simulate", "--generator", "simfs", "--n", "40", "--p", "5", "--seed", "2", "--out", "test.csv"]);
    dir
}

#[test]
fn simulate_layout_and_snr() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["simulate", "--generator", "g3", "--n", "500", "--snr", "2", "--seed", "4", "--out", "d.csv"]);
    let (header, rows) = read_csv(&dir.path().join("d.csv"));
    assert_eq!(header, ["x1", "y", "truth"]);
    assert_eq!(rows.len(), 500);

    let truth = column(&dir.path().join("d.csv"), "truth");
    let y = column(&dir.path().join("d.csv"), "y");
    let n = truth.len() as f64;
    let signal = truth.iter().map(|f| f * f).sum::<f64>() / (n - 1.0);
    let noise = y.iter().zip(&truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n;
    let ratio = signal / noise;
    assert!((ratio - 2.0).abs() < 0.4, "empirical SNR {ratio}");
}

#[test]
fn simulate_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["simulate", "--generator", "simfs", "--n", "30", "--p", "6", "--seed", "8", "--out", "d.csv"]);
    let d = generate(&SimSpec::new(Generator::Simfs, 30, 6, 3.0, 8)).unwrap();
    let path = dir.path().join("d.csv");
    assert_eq!(column(&path, "y"), d.y);
    assert_eq!(column(&path, "x4"), d.x.column(3).to_vec());
}

#[test]
fn predict_round_trip_is_bit_identical() {
    let dir = setup();
    let p = dir.path();
    for est in ["sparse-additive", "additive", "multivariate"] {
        let model = format!("{est}.json");
        let mut args = vec!["fit", "--data", "train.csv", "--estimator", est, "--lambda", "0.05", "--out", &model];
        if est == "multivariate" {
            args.extend(["--features", "x1,x2,x3", "--max-degree", "2"]);
        } else {
            args.extend(["--K", "6"]);
        }
        ok(p, &args);
        let out = format!("{est}.csv");
        ok(p, &["predict", "--model", &model, "--data", "test.csv", "--out", &out]);

        let file = ModelFile::load(&p.join(&model)).unwrap();
        let x = Array2::from_shape_fn((40, file.features.len()), |(i, j)| {
            column(&p.join("test.csv"), &file.features[j])[i]
        });
        let expected = file.model.predict(x.view()).unwrap();
        let got = column(&p.join(&out), "prediction");
        assert_eq!(got.len(), 40);
        for (a, b) in got.iter().zip(&expected) {
            assert_eq!(a.to_bits(), b.to_bits(), "{est}");
        }
    }
}

#[test]
fn predict_matches_columns_by_name() {
    let dir = setup();
    let p = dir.path();
    ok(p, &["fit", "--data", "train.csv", "--estimator", "sparse-additive", "--K", "5", "--lambda", "0.1", "--out", "m.json"]);
    ok(p, &["predict", "--model", "m.json", "--data", "test.csv", "--out", "a.csv"]);

    let (header, rows) = read_csv(&p.join("test.csv"));
    let order = [6, 4, 2, 0, 5, 1, 3];
    let mut text = order.iter().map(|&j| header[j].clone()).collect::<Vec<_>>().join(",") + "\n";
    for r in &rows {
        text += &(order.iter().map(|&j| r[j].clone()).collect::<Vec<_>>().join(",") + "\n");
    }
    fs::write(p.join("shuffled.csv"), text).unwrap();
    ok(p, &["predict", "--model", "m.json", "--data", "shuffled.csv", "--out", "b.csv"]);
    assert_eq!(fs::read(p.join("a.csv")).unwrap(), fs::read(p.join("b.csv")).unwrap());
}

#[test]
fn predict_on_empty_file_writes_header() {
    let dir = setup();
    let p = dir.path();
    ok(p, &["fit", "--data", "train.csv", "--estimator", "additive", "--K", "4", "--lambda", "0.1", "--out", "m.json"]);
    fs::write(p.join("empty.csv"), "").unwrap();
    ok(p, &["predict", "--model", "m.json", "--data", "empty.csv", "--out", "e.csv"]);
    assert_eq!(fs::read_to_string(p.join("e.csv")).unwrap(), "row_id,prediction\n");

    fs::write(p.join("header_only.csv"), "x1,x2,x3,x4,x5\n").unwrap();
    let stdout = ok(p, &["predict", "--model", "m.json", "--data", "header_only.csv"]);
    assert_eq!(stdout, "row_id,prediction\n");
}

#[test]
fn input_errors_exit_with_code_two() {
    let dir = setup();
    let p = dir.path();

    let out = hierfit(p, &["fit", "--data", "missing.csv", "--lambda", "0.1", "--out", "m.json"]);
    assert_eq!(code(&out), 2);

    let out = hierfit(p, &["fit", "--data", "train.csv", "--response", "target", "--lambda", "0.1", "--out", "m.json"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("target"));

    fs::write(p.join("bad.csv"), "x1,y\n0.1,1.0\n0.2,oops\n0.3,2.0\n").unwrap();
    let out = hierfit(p, &["fit", "--data", "bad.csv", "--lambda", "0.1", "--out", "m.json"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("'y'"));

    ok(p, &["fit", "--data", "train.csv", "--estimator", "additive", "--K", "4", "--lambda", "0.1", "--out", "m.json"]);
    fs::write(p.join("narrow.csv"), "x1,x2\n0.1,0.2\n").unwrap();
    let out = hierfit(p, &["predict", "--model", "m.json", "--data", "narrow.csv"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("x3"));

    let out = hierfit(p, &["fit", "--data", "train.csv", "--features", "x1,x2", "--lambda", "0.1", "--out", "u.json"]);
    assert_eq!(code(&out), 2, "univariate with two features");

    let out = hierfit(p, &["fit", "--data", "train.csv", "--bogus"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn non_convergence_exits_with_code_three() {
    let dir = setup();
    let out = hierfit(
        dir.path(),
        &["fit", "--data", "train.csv", "--estimator", "additive", "--lambda", "0.001", "--max-iter", "1", "--tol", "1e-12", "--out", "m.json"],
    );
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn path_table_starts_empty() {
    let dir = setup();
    let p = dir.path();
    ok(p, &["path", "--data", "train.csv", "--estimator", "sparse-additive", "--K", "5", "--path", "10", "--test", "test.csv", "--out", "path.csv"]);
    let (header, rows) = read_csv(&p.join("path.csv"));
    assert_eq!(header, ["lambda", "K0", "df", "train_mse", "test_mse"]);
    assert_eq!(rows.len(), 10);
    assert_eq!(rows[0][1], "0");
    let lambdas = column(&p.join("path.csv"), "lambda");
    assert!(lambdas.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn univariate_df_tends_to_k0_plus_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(p, &["simulate", "--generator", "g2", "--n", "80", "--seed", "3", "--out", "u.csv"]);
    ok(p, &["path", "--data", "u.csv", "--K", "7", "--path", "30", "--lambda-min-ratio", "1e-9", "--out", "path.csv"]);
    let k0 = column(&p.join("path.csv"), "K0");
    let df = column(&p.join("path.csv"), "df");
    assert_eq!(df[0], 1.0);
    let last = df.len() - 1;
    assert!((df[last] - (k0[last] + 1.0)).abs() < 1e-3, "df {} K0 {}", df[last], k0[last]);

    ok(p, &["fit", "--data", "u.csv", "--K", "7", "--lambda", "0", "--out", "m.json"]);
    let printed: f64 = ok(p, &["df", "--model", "m.json", "--data", "u.csv"]).trim().parse().unwrap();
    assert!((printed - 8.0).abs() < 1e-8);
}

#[test]
fn full_basis_at_zero_lambda_interpolates() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(p, &["simulate", "--generator", "g4", "--n", "12", "--seed", "5", "--out", "u.csv"]);
    let summary = ok(p, &["fit", "--data", "u.csv", "--K", "11", "--lambda", "0", "--out", "m.json"]);
    let mse: f64 = summary
        .lines()
        .find_map(|l| l.strip_prefix("train_mse\t"))
        .unwrap()
        .parse()
        .unwrap();
    assert!(mse < 1e-12, "{summary}");
}

#[test]
fn cv_best_lambda_is_on_the_grid() {
    let dir = setup();
    let p = dir.path();
    ok(p, &["cv", "--data", "train.csv", "--estimator", "sparse-additive", "--K", "5", "--path", "12", "--seed", "2", "--out", "cv.csv", "--folds-out", "folds.csv"]);
    let best = column(&p.join("cv.csv"), "is_best");
    assert_eq!(best.iter().filter(|&&b| b == 1.0).count(), 1);
    ok(p, &["path", "--data", "train.csv", "--estimator", "sparse-additive", "--K", "5", "--path", "12", "--out", "path.csv"]);
    let cv_grid = column(&p.join("cv.csv"), "lambda");
    assert_eq!(cv_grid, column(&p.join("path.csv"), "lambda"));
    let i = best.iter().position(|&b| b == 1.0).unwrap();
    let folds = column(&p.join("folds.csv"), "fold");
    assert_eq!(folds.len(), 100);
    assert!(folds.iter().all(|&f| (0.0..5.0).contains(&f)));

    ok(p, &["fit", "--data", "train.csv", "--estimator", "sparse-additive", "--K", "5", "--path", "12", "--seed", "2", "--out", "m.json"]);
    let file = ModelFile::load(&p.join("m.json")).unwrap();
    assert_eq!(file.model.lambda(), cv_grid[i]);
}

#[test]
fn logistic_model_outputs_probabilities() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(p, &["simulate", "--generator", "logistic-demo", "--n", "150", "--p", "3", "--seed", "6", "--out", "c.csv"]);
    ok(p, &["fit", "--data", "c.csv", "--estimator", "logistic-additive", "--K", "5", "--path", "10", "--cv", "3", "--out", "m.json"]);
    let file = ModelFile::load(&p.join("m.json")).unwrap();
    assert!(matches!(file.model, FittedModel::LogisticAdditive(_)));
    let out = ok(p, &["predict", "--model", "m.json", "--data", "c.csv"]);
    let probs: Vec<f64> = out.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(probs.len(), 150);
    assert!(probs.iter().all(|&q| (0.0..=1.0).contains(&q)));
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = setup();
    let p = dir.path();
    let run = |threads: &str, out: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_hierfit"))
            .args(["cv", "--data", "train.csv", "--estimator", "additive", "--K", "4", "--path", "8", "--out", out])
            .env("HIERFIT_THREADS", threads)
            .current_dir(p)
            .output()
            .unwrap();
        assert!(o.status.success());
        fs::read(p.join(out)).unwrap()
    };
    assert_eq!(run("1", "a.csv"), run("3", "b.csv"));
}
