use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gadl::data::{labels_to_idx_bytes, synthetic_blobs, IdxImages};
use gadl::RandomStream;

const BIN: &str = env!("CARGO_BIN_EXE_gadl");

/// Writes a 4x4-pixel IDX split quantized from synthetic blobs.
fn write_split(dir: &Path, name: &str, n: usize, seed: u64) {
    let set = synthetic_blobs(16, 3, n, 0.15, &mut RandomStream::new(seed)).unwrap();
    let pixels = set
        .base
        .samples()
        .iter()
        .flat_map(|s| {
            s.iter()
                .map(|v| (v * 255.0).round() as u8)
                .collect::<Vec<_>>()
        })
        .collect();
    let images = IdxImages {
        count: n,
        rows: 4,
        cols: 4,
        pixels,
    };
    fs::write(dir.join(format!("{name}-images")), images.to_idx_bytes()).unwrap();
    fs::write(
        dir.join(format!("{name}-labels")),
        labels_to_idx_bytes(&set.labels),
    )
    .unwrap();
}

fn fixture() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    write_split(dir.path(), "train", 60, 1);
    write_split(dir.path(), "test", 30, 2);
    let d = dir.path().display();
    let config = format!(
        "# tiny end-to-end run\n\
         train_images = {d}/train-images\n\
         train_labels = {d}/train-labels\n\
         test_images = {d}/test-images\n\
         test_labels = {d}/test-labels\n\
         architecture = 16,8,4\n\
         baseline_restarts = 2\n\
         budget_total_updates = 240\n\
         population_size = 4\n\
         updates_per_survivor_per_generation = 3\n\
         learning_rate = 1.0\n\
         batch_size = 10\n\
         fitness_eval_sample_count = 20\n\
         classifier_epochs = 5\n"
    );
    let path = dir.path().join("tiny.conf");
    fs::write(&path, config).unwrap();
    (dir, path)
}

fn gadl(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "stderr: {}\nstdout: {}",
        String::from_utf8_lossy(&out.stderr),
        String::from_utf8_lossy(&out.stdout)
    );
}

#[test]
fn compare_writes_reports_and_is_reproducible() {
    let (dir, conf) = fixture();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        ok(&gadl(&[
            "compare",
            "--config",
            conf.to_str().unwrap(),
            "--seed",
            "3",
            "--out",
            out.to_str().unwrap(),
        ]));
    }
    for f in [
        "metrics.csv",
        "summary.txt",
        "stack_baseline.gadl",
        "stack_ga.gadl",
        "config.txt",
    ] {
        assert!(a.join(f).is_file(), "{f} missing");
    }
    assert_eq!(
        fs::read(a.join("metrics.csv")).unwrap(),
        fs::read(b.join("metrics.csv")).unwrap()
    );
    let metrics = fs::read_to_string(a.join("metrics.csv")).unwrap();
    // header + 2 arms x (2 layers + total)
    assert_eq!(metrics.lines().count(), 7);
    assert!(fs::read_to_string(a.join("config.txt"))
        .unwrap()
        .contains("seed = 3"));
}

#[test]
fn single_arm_then_features_and_classify() {
    let (dir, conf) = fixture();
    let conf = conf.to_str().unwrap();
    let out = dir.path().join("ga");
    let out_s = out.to_str().unwrap();
    ok(&gadl(&["train-ga", "--config", conf, "--out", out_s]));
    assert!(out.join("stack_ga.gadl").is_file());
    assert!(!out.join("stack_baseline.gadl").exists());

    let stack = out.join("stack_ga.gadl");
    let stack_s = stack.to_str().unwrap();
    ok(&gadl(&[
        "extract-features",
        "--config",
        conf,
        "--out",
        out_s,
        "--stack",
        stack_s,
        "--split",
        "test",
    ]));
    let csv = fs::read_to_string(out.join("features_test.csv")).unwrap();
    assert_eq!(csv.lines().count(), 30);
    assert!(csv.lines().all(|l| l.split(',').count() == 5));

    let r = gadl(&[
        "classify", "--config", conf, "--out", out_s, "--stack", stack_s,
    ]);
    ok(&r);
    let stdout = String::from_utf8(r.stdout).unwrap();
    let err: f64 = stdout
        .trim()
        .strip_prefix("classification_error = ")
        .unwrap()
        .parse()
        .unwrap();
    assert!((0.0..=1.0).contains(&err));
}

#[test]
fn train_baseline_runs() {
    let (dir, conf) = fixture();
    let out = dir.path().join("base");
    ok(&gadl(&[
        "train-baseline",
        "--config",
        conf.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]));
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(metrics.lines().skip(1).all(|l| l.starts_with("baseline,")));
}

#[test]
fn rejections_exit_nonzero_with_diagnostic() {
    let (dir, conf) = fixture();
    let conf = conf.to_str().unwrap();
    let bad = dir.path().join("bad.conf");
    fs::write(&bad, "population_size = 10\nno_such_key = 1\n").unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["compare", "--config", bad.to_str().unwrap()],
        vec!["compare", "--config", "/nonexistent/config"],
        vec!["compare", "--config", conf, "--set", "population_size=1"],
        vec![
            "compare",
            "--config",
            conf,
            "--set",
            "budget_total_updates=1",
        ],
        vec!["classify", "--config", conf, "--stack", conf],
        vec!["no-such-command"],
    ];
    for args in cases {
        let r = gadl(&args);
        assert!(!r.status.success(), "{args:?} succeeded");
        assert!(!r.stderr.is_empty(), "{args:?} printed no diagnostic");
    }
}

#[test]
fn stack_width_mismatch_is_rejected() {
    let (dir, conf) = fixture();
    let out = dir.path().join("o");
    ok(&gadl(&[
        "train-ga",
        "--config",
        conf.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]));
    // same stack against 9-pixel inputs
    let small = dir.path().join("small");
    fs::create_dir(&small).unwrap();
    let images = IdxImages {
        count: 2,
        rows: 3,
        cols: 3,
        pixels: vec![0; 18],
    };
    for split in ["train", "test"] {
        fs::write(small.join(format!("{split}-images")), images.to_idx_bytes()).unwrap();
        fs::write(
            small.join(format!("{split}-labels")),
            labels_to_idx_bytes(&[0, 1]),
        )
        .unwrap();
    }
    let s = small.display();
    let r = gadl(&[
        "classify",
        "--stack",
        out.join("stack_ga.gadl").to_str().unwrap(),
        "--set",
        "architecture=9,3",
        "--set",
        "fitness_eval_sample_count=2",
        "--set",
        &format!("train_images={s}/train-images"),
        "--set",
        &format!("train_labels={s}/train-labels"),
        "--set",
        &format!("test_images={s}/test-images"),
        "--set",
        &format!("test_labels={s}/test-labels"),
    ]);
    assert!(!r.status.success());
    let stderr = String::from_utf8_lossy(&r.stderr);
    assert!(stderr.contains("loading stack"), "{stderr}");
}
