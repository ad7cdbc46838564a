use std::path::Path;
use std::process::{Command, Output};

fn pressense(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pressense")).args(args).env("RUST_LOG", "error").output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn invalid_arguments_exit_2() {
    assert_eq!(code(&pressense(&[])), 2);
    assert_eq!(code(&pressense(&["frobnicate"])), 2);
    assert_eq!(code(&pressense(&["replay"])), 2);
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ck.json");
    assert_eq!(code(&pressense(&["train", "--epochs", "0", "--participants", "1", "1", "1", "1", "--out", s(&out)])), 2);
    assert_eq!(code(&pressense(&["--help"])), 0);
}

#[test]
fn data_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.jsonl");
    assert_eq!(code(&pressense(&["replay", "--records", s(&missing)])), 3);
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"version\":1}\n{oops\n").unwrap();
    let out = pressense(&["replay", "--records", s(&bad)]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains(":1") || String::from_utf8_lossy(&out.stderr).contains("line 1"));
}

#[test]
fn divergence_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ck.json");
    let o = pressense(&["train", "--epochs", "2", "--lr", "1e308", "--participants", "1", "1", "1", "1", "--out", s(&out)]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.exists());
}

#[test]
fn typing_replay_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("typing.jsonl");
    assert_eq!(code(&pressense(&["synth", "--typing", "hello world", "--out", s(&rec)])), 0);
    let run = |name: &str| {
        let report = dir.path().join(name);
        let o = pressense(&["replay", "--records", s(&rec), "--qwerty", "--out", s(&report)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(report).unwrap()
    };
    let a = run("a.json");
    assert_eq!(a, run("b.json"));
    let v: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(v["transcripts"][0]["transcript"]["typed"], "hello world");
}

#[test]
fn synth_train_evaluate_replay_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).to_str().unwrap().to_string();
    let parts = ["--participants", "1", "1", "1", "1"];

    let (a, b, ck) = (p("a.jsonl"), p("b.jsonl"), p("ck.json"));
    let mut args = vec!["synth", "--toy", "--seed", "3", "--out", &a];
    args.extend(parts);
    assert_eq!(code(&pressense(&args)), 0);
    args[5] = &b;
    assert_eq!(code(&pressense(&args)), 0);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let mut args = vec!["train", "--epochs", "1", "--out", &ck];
    args.extend(parts);
    let o = pressense(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let epochs = String::from_utf8(o.stdout).unwrap();
    assert_eq!(epochs.lines().count(), 1);

    let o = pressense(&[
        "evaluate",
        "--checkpoint",
        &p("ck.json"),
        "--out",
        &p("eval.json"),
        "--records-out",
        &p("test.jsonl"),
        "--predictions-out",
        &p("pred.jsonl"),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let o = pressense(&["replay", "--records", &p("test.jsonl"), "--predictions", &p("pred.jsonl"), "--out", &p("r.json")]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(p("r.json")).unwrap()).unwrap();
    assert!(v["metrics"]["contact_accuracy"].is_number());

    let o = pressense(&["replay", "--records", &p("test.jsonl"), "--out", &p("r2.json")]);
    assert_eq!(code(&o), 3);
}
