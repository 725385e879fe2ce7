//! The `gosszeta` binary: exit codes, determinism and the shipped schemas.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gosszeta"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn schema(name: &str) -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(format!("{name}.schema.json"));
    let text = std::fs::read_to_string(&path).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

fn assert_valid(name: &str, doc: &Value) {
    let v = schema(name);
    let errors: Vec<String> = v.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{name} document fails its schema: {errors:#?}");
}

fn json_out(args: &[&str], code: i32) -> Value {
    let out = run(args);
    assert_eq!(out.status.code(), Some(code), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("gosszeta-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn verify_examples() {
    let doc = json_out(&["verify", "--p", "3", "--z", "1", "--m", "8"], 0);
    assert_eq!(doc["verdict"], true);
    assert_eq!(doc["degree"], 2);
    assert_eq!(doc["roots"].as_array().unwrap().len(), 2);
    assert_valid("verify", &doc);

    // exponent zero gives 1 - x: one root, x = 1
    let doc = json_out(&["verify", "--p", "3", "--m", "0"], 0);
    assert_eq!(doc["degree"], 1);
    assert_eq!(doc["roots"][0]["valuation"], 0);
    assert_valid("verify", &doc);

    let doc = json_out(&["verify", "--p", "5", "--z", "3", "--m-stream", "repeat:1,0", "--precision", "64"], 0);
    assert_eq!(doc["degree"], 4);
    assert!(doc["stabilization_depth"].as_u64().unwrap() <= 32);
    assert_valid("verify", &doc);
}

#[test]
fn every_json_document_matches_its_schema() {
    let cases: &[(&str, &[&str])] = &[
        ("valuation", &["valuation", "--p", "3", "--z", "1", "--m", "8", "--format", "json"]),
        ("valuation", &["valuation", "--p", "2", "--m-stream", "-1", "--format", "json"]),
        ("greedy", &["greedy", "--p", "2", "--n", "2", "--z", "2", "--m", "45", "--d-max", "3"]),
        ("powersum", &["powersum", "--p", "3", "--z", "0", "--m", "2", "--d-max", "2", "--precision", "4"]),
        ("powersum", &["powersum", "--p", "3", "--m-stream", "repeat:1,0", "--d-max", "2"]),
        ("polygon", &["polygon", "--p", "3", "--z", "1", "--m", "8"]),
        ("roots", &["roots", "--p", "2", "--n", "2", "--z", "2", "--m", "5", "--precision", "20"]),
        ("verify", &["verify", "--p", "3", "--n", "2", "--z", "4", "--m", "50"]),
    ];
    for (name, args) in cases {
        let doc = json_out(args, 0);
        assert_valid(name, &doc);
        assert_valid("config", &doc["params"]);
    }
    let doc = json_out(&["sweep", "--q", "2,3", "--m", "1-5", "--format", "json"], 0);
    assert_valid("sweep", &doc);
}

#[test]
fn valuation_table_agrees() {
    let out = run(&["valuation", "--p", "3", "--z", "1", "--m", "8", "--d-max", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("d,greedy,closed_form,enumeration,combinatorial,agree"));
    let greedy: Vec<&str> = lines.map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(greedy, ["0", "1", "6", "zero"]);

    let out = run(&["valuation", "--p", "5", "--z", "3", "--m", "7", "--d-max", "2"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout).unwrap().lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn roots_from_input() {
    let wide = scratch("wide.json");
    std::fs::write(
        &wide,
        r#"{"p": 3, "n": 1, "coefficients": [{"lead_val": 0, "coeffs": [[1]]}, {"lead_val": 1, "coeffs": [[1]]}, {"lead_val": 2, "coeffs": [[1]]}]}"#,
    )
    .unwrap();
    let out = run(&["roots", "--input", wide.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_valid("error", &err);
    assert_eq!(err["error"]["kind"], "usage");

    let linear = scratch("linear.json");
    let poly = r#"{"p": 3, "n": 1, "coefficients": [{"lead_val": 0, "coeffs": [[1]]}, {"lead_val": 1, "coeffs": [[1]]}]}"#;
    assert_valid("polynomial", &serde_json::from_str(poly).unwrap());
    std::fs::write(&linear, poly).unwrap();
    let doc = json_out(&["roots", "--input", linear.to_str().unwrap(), "--precision", "8"], 0);
    assert_valid("roots", &doc);
    assert_eq!(doc["roots"][0]["series"]["coeffs"][0], serde_json::json!([2]));
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["verify", "--p", "3"]).status.code(), Some(2));
    assert_eq!(run(&["verify", "--p", "9", "--m", "1"]).status.code(), Some(2));
    assert_eq!(run(&["nonsense"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    let capped = run(&["verify", "--p", "2", "--m", "1099511627775", "--cap", "10", "--max-tuples", "10"]);
    assert_eq!(capped.status.code(), Some(3));
    let err: Value = serde_json::from_slice(&capped.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "resource_limit");
    // a width-2 polygon side inside the pipeline is a verdict, not an input error
    let stream = run(&["verify", "--p", "3", "--m-stream", "0|", "--depth", "1"]);
    assert_ne!(stream.status.code(), Some(101), "no panics");
}

#[test]
fn sweep_behaviour() {
    let out = run(&["sweep", "--q", "2,3", "--m", "1-20"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1 + 20 + 40);
    assert!(text.lines().skip(1).all(|l| l.contains(",pass,")));

    let empty = run(&["sweep", "--q", "2,3"]);
    assert_eq!(empty.status.code(), Some(0));
    assert_eq!(String::from_utf8(empty.stdout).unwrap().lines().count(), 1);

    let capped = run(&["sweep", "--q", "2", "--m", "3,1099511627775", "--cap", "10", "--max-tuples", "10"]);
    assert_eq!(capped.status.code(), Some(0));
    let text = String::from_utf8(capped.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().contains(",pass,"));
    assert!(text.lines().nth(2).unwrap().contains(",cap_exceeded,"));

    // all base-3 units of 1,0,1,0,... are 1 mod 8, so 32 digits cannot supply d = 3
    let shallow = run(&["sweep", "--q", "9", "--z", "1", "--m-stream", "repeat:1,0", "--d-max", "3", "--format", "json"]);
    assert_eq!(shallow.status.code(), Some(0));
    let doc: Value = serde_json::from_slice(&shallow.stdout).unwrap();
    assert_valid("sweep", &doc);
    assert_eq!(doc["summary"]["not_stabilized"], 1);
}

#[test]
fn output_is_deterministic() {
    let path = scratch("verify.json");
    for _ in 0..2 {
        let out = run(&["verify", "--p", "2", "--n", "2", "--z", "1", "--m", "77", "--out", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
        assert!(out.stdout.is_empty());
    }
    let a = run(&["verify", "--p", "2", "--n", "2", "--z", "1", "--m", "77"]).stdout;
    assert_eq!(a, std::fs::read(&path).unwrap());

    let args = ["sweep", "--q", "2,3,4,5", "--m", "1-30", "--m-stream", "-1;repeat:1,0"];
    let one = run(&args).stdout;
    let two = bin().args(args).env("RAYON_NUM_THREADS", "1").output().unwrap().stdout;
    assert_eq!(one, two);
}
