use std::path::Path;
use std::process::{Command, Output};

use stratvote::data::{save_dataset, Dataset};
use stratvote::generate::{generate_synthetic, GeneratorConfig};
use stratvote_core::{Candidate, Poll, Utility, VoteRecord};

fn stratvote(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stratvote"))
        .args(args)
        .env_remove("STRATVOTE_SEED")
        .output()
        .unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn small_dataset(dir: &Path) {
    let cfg = GeneratorConfig {
        num_voters: 8,
        rounds_per_voter: 6,
        ..GeneratorConfig::default()
    };
    save_dataset(dir, &generate_synthetic(&cfg, 1).unwrap().dataset).unwrap();
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(stratvote(&[]).status.code(), Some(1));
    assert_eq!(stratvote(&["frobnicate"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    small_dataset(dir.path());
    let out = dir.path().join("out");
    // CV needs a seed
    let o = stratvote(&[
        "evaluate",
        "--data",
        p(dir.path()),
        "--families",
        "CV",
        "--out",
        p(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let o = stratvote(&[
        "evaluate",
        "--data",
        p(dir.path()),
        "--families",
        "XYZ",
        "--out",
        p(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bad_data_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("broken.csv");
    std::fs::write(&csv, "voter_id,round,n,s_1\nv,1\n").unwrap();
    let o = stratvote(&[
        "evaluate",
        "--data",
        p(&csv),
        "--families",
        "PRAG",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let missing = dir.path().join("nope.csv");
    let o = stratvote(&[
        "fit",
        "--data",
        p(&missing),
        "--families",
        "LD",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_then_evaluate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("gen.json");
    std::fs::write(&config, r#"{"num_voters": 6, "rounds_per_voter": 5}"#).unwrap();
    let data = dir.path().join("data");
    let o = stratvote(&[
        "simulate",
        "--config",
        p(&config),
        "--seed",
        "3",
        "--out",
        p(&data),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["dataset.csv", "manifest.json", "voters.json"] {
        assert!(data.join(f).is_file(), "{f}");
    }
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = stratvote(&[
            "evaluate",
            "--data",
            p(&data),
            "--families",
            "PRAG,LD,CV",
            "--mode",
            "both",
            "--seed",
            "4",
            "--out",
            p(&out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let (a, b) = (run("a"), run("b"));
    let mut names: Vec<_> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.iter().any(|n| n == "scenarios.csv"));
    assert!(names.iter().any(|n| n == "upper_bounds.csv"));
    for n in names {
        assert_eq!(
            std::fs::read(a.join(&n)).unwrap(),
            std::fs::read(b.join(&n)).unwrap()
        );
    }
}

#[test]
fn predict_an_explicit_model() {
    let dir = tempfile::tempdir().unwrap();
    let rec = VoteRecord {
        voter_id: "v1".into(),
        round: 1,
        poll: Poll::new(vec![25, 70, 20, 100, 80]).unwrap(),
        utilities: Utility::new(vec![40.0, 30.0, 20.0, 10.0, 0.0]).unwrap(),
        action: Candidate(0),
    };
    let data = dir.path().join("ex");
    save_dataset(&data, &Dataset::new(vec![rec], "example").unwrap()).unwrap();
    let out = dir.path().join("pred.csv");
    let o = stratvote(&[
        "predict",
        "--data",
        p(&data),
        "--model",
        "AU",
        "--alpha",
        "1.8",
        "--beta",
        "30",
        "--out",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text, "voter_id,round,predicted,candidate\nv1,1,2,q2\n");
    // a family parameter is missing
    let o = stratvote(&[
        "predict",
        "--data",
        p(&data),
        "--model",
        "AU",
        "--alpha",
        "1.8",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn fitted_models_feed_predict() {
    let dir = tempfile::tempdir().unwrap();
    small_dataset(dir.path());
    let fits = dir.path().join("fits");
    let o = stratvote(&[
        "fit",
        "--data",
        p(dir.path()),
        "--families",
        "PRAG",
        "--out",
        p(&fits),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let fitted = fits.join("fitted_PRAG.json");
    assert!(fitted.is_file());
    let o = stratvote(&["predict", "--data", p(dir.path()), "--fitted", p(&fitted)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let lines = String::from_utf8(o.stdout).unwrap().lines().count();
    assert_eq!(lines, 8 * 6 + 1);
}
