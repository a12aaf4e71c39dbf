use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bta_forest::libsvm::write_libsvm;
use bta_forest::synth::{blobs_split, BlobSpec};
use tempfile::TempDir;

fn bta(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bta"))
        .args(args)
        .output()
        .expect("run bta")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

struct Fixture {
    dir: TempDir,
    train: PathBuf,
    test: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let spec = BlobSpec {
            class_sizes: vec![120, 30, 20, 15],
            num_features: 4,
            separation: 1.5,
        };
        let train = dir.path().join("train.svm");
        let test = dir.path().join("test.svm");
        let (train_ds, test_ds) = blobs_split(&spec, &[120, 30, 20, 15], 1);
        write_libsvm(std::fs::File::create(&train).unwrap(), &train_ds).unwrap();
        write_libsvm(std::fs::File::create(&test).unwrap(), &test_ds).unwrap();
        Fixture { dir, train, test }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn train_model(&self, name: &str, extra: &[&str]) -> PathBuf {
        let model = self.path(name);
        let mut args = vec!["train", "--train", s(&self.train), "--model", s(&model), "--trees", "15"];
        args.extend_from_slice(extra);
        let o = bta(&args);
        assert!(o.status.success(), "train failed: {}", stderr(&o));
        model
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_2() {
    let f = Fixture::new();
    let model = f.path("m.txt");
    for args in [
        vec!["train", "--model", s(&model)],
        vec!["train", "--train", s(&f.train), "--model", s(&model), "--trees", "0"],
        vec!["train", "--train", s(&f.train), "--model", s(&model), "--min-split", "1"],
        vec!["predict", "--model", s(&model), "--test", s(&f.test), "--strategy", "vote"],
        vec!["bench", "--train", s(&f.train), "--test", s(&f.test), "--strategies", "mv,bogus"],
        vec!["bench", "--train", s(&f.train), "--test", s(&f.test), "--strategies", "bta-b=-1"],
    ] {
        let o = bta(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
    assert!(!model.exists());
}

#[test]
fn runtime_errors_exit_1() {
    let f = Fixture::new();
    let missing = bta(&["train", "--train", s(&f.path("nope.svm")), "--model", s(&f.path("m"))]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(stderr(&missing).starts_with("error:"));

    let model = f.train_model("m.txt", &[]);
    let mismatch = bta(&[
        "evaluate", "--model", s(&model), "--test", s(&f.test), "--merge-classes", "3",
    ]);
    assert_eq!(mismatch.status.code(), Some(1));
    assert!(stderr(&mismatch).contains("classes"), "{}", stderr(&mismatch));

    let bad = f.path("bad.svm");
    std::fs::write(&bad, "1 3:1 2:1\n").unwrap();
    let o = bta(&["train", "--train", s(&bad), "--model", s(&f.path("x"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 1"), "{}", stderr(&o));
}

#[test]
fn train_evaluate_predict() {
    let f = Fixture::new();
    let model = f.train_model("m.txt", &["--merge-classes", "3", "--seed", "4"]);
    let summary = bta(&["train", "--train", s(&f.train), "--model", s(&f.path("m2.txt")), "--trees", "5"]);
    assert!(stdout(&summary).contains("oob size"));

    let report = f.path("report.json");
    let o = bta(&[
        "evaluate", "--model", s(&model), "--test", s(&f.test), "--merge-classes", "3",
        "--report", s(&report),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("strategy bta-eps=1e-5"));
    assert!(text.contains("macro"));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let f_score = json["macro"]["fscore"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&f_score));

    let out = f.path("pred.tsv");
    let o = bta(&[
        "predict", "--model", s(&model), "--test", s(&f.test), "--strategy", "mv",
        "--output", s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let pred = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = pred.lines().collect();
    assert!(lines[0].starts_with("index\tlabel\t"));
    assert_eq!(lines.len(), 1 + 185);
    assert_eq!(lines[1].split('\t').count(), 2 + 3);
}

#[test]
fn bench_single_repeat_has_zero_std() {
    let f = Fixture::new();
    let o = bta(&[
        "bench", "--train", s(&f.train), "--test", s(&f.test), "--repeats", "1", "--trees", "10",
        "--strategies", "mv,bta-eps,bta-b=0.8", "--merge-classes", "3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    for label in ["mv", "bta-eps=1e-5", "bta-b=0.8"] {
        let row = text.lines().find(|l| l.trim_start().starts_with(label)).unwrap();
        assert_eq!(row.matches("± 0.000").count(), 3, "{row}");
    }
}

#[test]
fn reruns_are_deterministic() {
    let f = Fixture::new();
    let a = f.train_model("a.txt", &["--seed", "9"]);
    let b = f.train_model("b.txt", &["--seed", "9", "--sequential"]);
    let c = f.train_model("c.txt", &["--seed", "9", "--threads", "3"]);
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    assert_eq!(bytes, std::fs::read(&c).unwrap());

    let bench = |extra: &[&str]| {
        let mut args = vec![
            "bench", "--train", s(&f.train), "--test", s(&f.test), "--repeats", "2", "--trees", "8",
        ];
        args.extend_from_slice(extra);
        let o = bta(&args);
        assert!(o.status.success(), "{}", stderr(&o));
        stdout(&o)
    };
    let first = bench(&[]);
    assert_eq!(first, bench(&["--parallel-repeats", "--threads", "2"]));
    assert_eq!(first, bench(&["--sequential"]));
}
