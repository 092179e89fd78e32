use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use varsmooth::baselines::conventional_predict;
use varsmooth::io::{format_logits, read_logits, LogitFile};
use varsmooth::{LogitMatrix, Matrix};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_varsmooth"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    let out = bin().current_dir(dir).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn run_err(dir: &Path, args: &[&str]) -> String {
    let out = bin().current_dir(dir).args(args).output().unwrap();
    assert!(!out.status.success(), "{args:?} should fail");
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(
        stderr.trim_end().lines().count(),
        1,
        "not a single line: {stderr:?}"
    );
    stderr
}

fn write_logit_files(dir: &Path, logits: &[Vec<Vec<f64>>], labels: &[usize]) -> Vec<String> {
    let mut names = Vec::new();
    for (i, rows) in logits.iter().enumerate() {
        let m = LogitMatrix::new(Matrix::from_rows(rows).unwrap()).unwrap();
        let name = format!("s{i:04}.vsl");
        fs::write(dir.join(&name), format_logits(&m)).unwrap();
        names.push(name);
    }
    let labels: String = labels.iter().map(|l| format!("{l}\n")).collect();
    fs::write(dir.join("labels.txt"), labels).unwrap();
    names
}

#[test]
fn evaluate_one_hot_correct_logits_has_zero_ece() {
    let dir = tempfile::tempdir().unwrap();
    let logits = vec![
        vec![vec![1000.0, 0.0, 0.0], vec![1000.0, 0.0, 0.0]],
        vec![vec![0.0, 0.0, 1000.0], vec![0.0, 0.0, 1000.0]],
    ];
    let names = write_logit_files(dir.path(), &logits, &[0, 2]);
    let mut args = vec![
        "evaluate",
        "--method",
        "conventional",
        "--bins",
        "10",
        "--labels",
        "labels.txt",
        "--out",
        "ev",
        "--in",
    ];
    args.extend(names.iter().map(String::as_str));
    run(dir.path(), &args);
    let report = fs::read_to_string(dir.path().join("ev/report.json")).unwrap();
    assert!(report.contains("\"ece\": 0.0"), "{report}");
    assert!(report.contains("\"accuracy\": 1.0"), "{report}");
    let bins = fs::read_to_string(dir.path().join("ev/bins.csv")).unwrap();
    assert!(bins.starts_with("bin_lo,bin_hi,count,mean_conf,accuracy\n0,0.1,0,,\n"));
    assert!(bins.ends_with("0.9,1,2,1,1\n"), "{bins}");
}

#[test]
fn evaluate_ece_matches_per_sample_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 200;
    let logits: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|_| {
            (0..4)
                .map(|_| (0..5).map(|_| rng.random_range(-4.0..4.0)).collect())
                .collect()
        })
        .collect();
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..5)).collect();
    let names = write_logit_files(dir.path(), &logits, &labels);
    let mut args = vec![
        "evaluate",
        "--method",
        "conventional",
        "--labels",
        "labels.txt",
        "--out",
        "ev",
        "--in",
    ];
    args.extend(names.iter().map(String::as_str));
    run(dir.path(), &args);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("ev/report.json")).unwrap())
            .unwrap();

    // Oracle from the files as written: every sample visits every bin.
    let preds: Vec<Vec<f64>> = names
        .iter()
        .map(|name| match read_logits(&dir.path().join(name)).unwrap() {
            LogitFile::SubPatch(z) => conventional_predict(&z).unwrap().into_vec(),
            LogitFile::Ensemble(_) => unreachable!(),
        })
        .collect();
    let mut oracle = 0.0;
    for b in 0..10 {
        let (lo, hi) = (b as f64 / 10.0, (b + 1) as f64 / 10.0);
        let (mut count, mut conf, mut hits) = (0.0, 0.0, 0.0);
        for (p, &y) in preds.iter().zip(&labels) {
            let (arg, c) = p
                .iter()
                .enumerate()
                .fold((0, p[0]), |a, (i, &v)| if v > a.1 { (i, v) } else { a });
            if (c >= lo && c < hi) || (b == 9 && c >= hi) {
                count += 1.0;
                conf += c;
                hits += f64::from(u8::from(arg == y));
            }
        }
        if count > 0.0 {
            oracle += count / n as f64 * (hits / count - conf / count).abs();
        }
    }
    let ece = report["ece"].as_f64().unwrap();
    assert!((ece - oracle).abs() < 1e-12, "{ece} vs {oracle}");
}

const PIPELINE: &[&str] = &[
    "gen-data --out data --seed 7 --n-train 400 --n-val 100 --n-test 100",
    "train --in data/train.vsd --out m0.vsm --seed 7 --epochs 3",
    "train --in data/train.vsd --out m1.vsm --seed 8 --epochs 3",
    "calibrate --method variance_smoothing --beta-mode mean-offset --beta-offset 0.5 --alpha 1 \
     --in data/val.vsd --model m0.vsm --out vs.json",
    "calibrate --method temp_scaling --in data/val.vsd --model m0.vsm --logit-scale 5 --out ts.json",
    "evaluate --method variance_smoothing --calibration vs.json --in data/test.vsd --model m0.vsm \
     --out ev_vs",
    "evaluate --method temp_scaling --calibration ts.json --in data/test.vsd --model m0.vsm \
     --logit-scale 5 --out ev_ts",
    "evaluate --method ensemble_smoothing --beta-value 0.5 --in data/test.vsd \
     --members m0.vsm m1.vsm --out ev_es",
    "sweep --in data/val.vsd --model m0.vsm --lambda-grid 0:1:3 --seed 7 --out sweep",
];

fn pipeline(dir: &Path) {
    for step in PIPELINE {
        let args: Vec<&str> = step.split_whitespace().collect();
        run(dir, &args);
    }
}

fn all_files(root: &Path) -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = walkdir::WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().is_file())
        .map(|e| e.path().strip_prefix(root).unwrap().to_path_buf())
        .collect();
    out.sort();
    out
}

#[test]
fn identical_runs_give_byte_identical_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline(a.path());
    pipeline(b.path());
    let files = all_files(a.path());
    assert_eq!(files, all_files(b.path()));
    assert!(files.len() >= 16, "{files:?}");
    for f in files {
        assert_eq!(
            fs::read(a.path().join(&f)).unwrap(),
            fs::read(b.path().join(&f)).unwrap(),
            "{}",
            f.display()
        );
    }
}

#[test]
fn calibrate_refuses_the_test_split() {
    let dir = tempfile::tempdir().unwrap();
    run(
        dir.path(),
        &[
            "gen-data",
            "--out",
            "data",
            "--n-train",
            "50",
            "--n-val",
            "20",
            "--n-test",
            "20",
        ],
    );
    run(
        dir.path(),
        &[
            "train",
            "--in",
            "data/train.vsd",
            "--out",
            "m.vsm",
            "--epochs",
            "1",
        ],
    );
    let err = run_err(
        dir.path(),
        &[
            "calibrate",
            "--method",
            "temp_scaling",
            "--in",
            "data/test.vsd",
            "--model",
            "m.vsm",
            "--out",
            "t.json",
        ],
    );
    assert!(err.starts_with("CONFIG_ERROR:"), "{err}");
    assert!(!dir.path().join("t.json").exists());
}

#[test]
fn malformed_logit_file_reports_code_and_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.vsl"), "VSL 1 3 2\n0 0\n2 4\n").unwrap();
    fs::write(dir.path().join("labels.txt"), "0\n").unwrap();
    let err = run_err(
        dir.path(),
        &[
            "evaluate",
            "--method",
            "conventional",
            "--in",
            "a.vsl",
            "--labels",
            "labels.txt",
            "--out",
            "ev",
        ],
    );
    assert!(err.starts_with("ROW_COUNT_MISMATCH:"), "{err}");
    assert!(err.contains("a.vsl:4:"), "{err}");
}

#[test]
fn method_specific_inputs_are_required() {
    let dir = tempfile::tempdir().unwrap();
    run(
        dir.path(),
        &[
            "gen-data",
            "--out",
            "data",
            "--n-train",
            "50",
            "--n-val",
            "20",
            "--n-test",
            "20",
        ],
    );
    run(
        dir.path(),
        &[
            "train",
            "--in",
            "data/train.vsd",
            "--out",
            "m.vsm",
            "--epochs",
            "1",
        ],
    );
    let err = run_err(
        dir.path(),
        &[
            "evaluate",
            "--method",
            "ensemble_mean",
            "--in",
            "data/val.vsd",
            "--model",
            "m.vsm",
            "--out",
            "ev",
        ],
    );
    assert!(err.starts_with("CONFIG_ERROR:"), "{err}");
    let err = run_err(
        dir.path(),
        &[
            "evaluate",
            "--method",
            "temp_scaling",
            "--in",
            "data/val.vsd",
            "--model",
            "m.vsm",
            "--out",
            "ev",
        ],
    );
    assert!(err.starts_with("CONFIG_ERROR:"), "{err}");
    let err = run_err(
        dir.path(),
        &["evaluate", "--method", "nope", "--in", "data/val.vsd"],
    );
    assert!(err.starts_with("USAGE_ERROR:"), "{err}");
}
