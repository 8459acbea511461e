use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn homnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_homnet")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string(v).unwrap()).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A 2-path pattern and a target with a directed triangle plus a loop.
fn count_inputs(dir: &Path) -> (PathBuf, PathBuf) {
    let pattern = write(
        dir,
        "pattern.json",
        &json!({"schema": {"E": 2}, "facts": [["E", "r", "a"], ["E", "a", "b"]], "root": "r"}),
    );
    let target = write(
        dir,
        "target.json",
        &json!({"schema": {"E": 2}, "facts": [["E", "1", "2"], ["E", "2", "3"], ["E", "3", "1"], ["E", "1", "1"]], "root": "1"}),
    );
    (pattern, target)
}

#[test]
fn count_modes() {
    let dir = tempfile::tempdir().unwrap();
    let (p, t) = count_inputs(dir.path());
    // From 1: walks 1-2-3, 1-1-2, 1-1-1 (hom); only 1-2-3 is injective.
    let got: Vec<String> = ["hom", "inj", "emb"]
        .iter()
        .map(|m| stdout(&homnet(&["count", "--pattern", s(&p), "--target", s(&t), "--mode", m, "--seed", "0"])).trim().to_string())
        .collect();
    assert_eq!(got, ["3", "1", "0"]);
    let all = stdout(&homnet(&["count", "--pattern", s(&p), "--target", s(&t), "--mode", "hom", "--all-roots"]));
    let lines: Vec<&str> = all.lines().collect();
    assert_eq!(lines, ["1\t3", "2\t1", "3\t2"]);
}

#[test]
fn compile_run_and_check() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("net.json");
    let f = "(exists (y) (E x y) (E y y))";
    let o = homnet(&["compile", "--formula", f, "--target", "max-dhn", "-o", s(&net), "--seed", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let db = write(dir.path(), "db.json", &json!({"schema": {"E": 2}, "facts": [["E", "a", "b"], ["E", "b", "b"], ["E", "c", "a"]]}));
    let out = stdout(&homnet(&["run", "--model", s(&net), "--db", s(&db)]));
    assert_eq!(out.lines().collect::<Vec<_>>(), ["a\taccept", "b\taccept", "c\treject"]);
    let one = stdout(&homnet(&["run", "--model", s(&net), "--db", s(&db), "--root", "c"]));
    assert!(one.contains("reject"));
    let o = homnet(&["check-equiv", "--formula", f, "--model", s(&net), "--samples", "50", "--max-size", "5"]);
    assert_eq!(o.status.code(), Some(0));
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["disagreements"], json!([]));
    let o = homnet(&["check-equiv", "--formula", "(exists (y) (E y x))", "--model", s(&net), "--samples", "20"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn emptiness_and_subsumption() {
    let dir = tempfile::tempdir().unwrap();
    let compile = |name: &str, f: &str, target: &str| {
        let p = dir.path().join(name);
        assert!(homnet(&["compile", "--formula", f, "--target", target, "-o", s(&p)]).status.success());
        p
    };
    let sat = compile("sat.json", "(exists>= 2 (y) (E x y))", "sum-dhn");
    let o = homnet(&["emptiness", "--model", s(&sat), "--degree", "3", "--max-size", "4", "--seed", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(serde_json::from_str::<Value>(&stdout(&o)).unwrap()["result"], "found");
    let never = compile("never.json", "(and (exists (y) (E x y)) (not (exists (y) (E x y))))", "max-dhn");
    let o = homnet(&["emptiness", "--model", s(&never), "--degree", "3", "--max-size", "4"]);
    assert!(matches!(o.status.code(), Some(3) | Some(4)));
    let one = compile("one.json", "(exists>= 1 (y) (E x y))", "sum-dhn");
    let o = homnet(&["subsume", "--model1", s(&sat), "--model2", s(&one), "--degree", "3", "--max-size", "4"]);
    assert!(matches!(o.status.code(), Some(3) | Some(4)));
    let o = homnet(&["subsume", "--model1", s(&one), "--model2", s(&sat), "--degree", "3", "--max-size", "4"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn generate_train_eval() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("sun.json");
    let params = r#"{"n_pos": 3, "n_neg": 3}"#;
    let o = homnet(&["generate", "--kind", "sun", "--params", params, "-o", s(&data), "--seed", "4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&data).unwrap()).unwrap();
    assert_eq!(doc["labels"].as_object().unwrap().len(), 36);
    let cfg = write(
        dir.path(),
        "cfg.json",
        &json!({
            "name": "tiny",
            "dataset": {"kind": "file", "path": s(&data)},
            "model": {"kind": "dhn", "patterns": "sun", "mode": "injective", "agg": "sum",
                      "arch": {"hidden": 4, "layers": 2, "classifier_hidden": 4}},
            "lr": 0.01, "epochs": 5, "restarts": 1, "seed": 2
        }),
    );
    let model = dir.path().join("model.json");
    let report = dir.path().join("report.json");
    let o = homnet(&["train", "--config", s(&cfg), "-o", s(&model), "--report", s(&report)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("test F1"));
    let o = homnet(&["eval", "--model", s(&model), "--data", s(&data), "--part", "all", "--seed", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(m["f1"].as_f64().unwrap() >= 0.0 && m["auroc"].is_number());
}

#[test]
fn errors_exit_with_one() {
    let o = homnet(&["compile", "--formula", "(exists (y)", "--target", "max-dhn"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}
