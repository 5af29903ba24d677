use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snowcircle"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn gen_is_deterministic_and_reparses() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["gen", "--sigma", "0.7", "--rule", "random_bernoulli", "--depth", "12", "--seed", "4"];
    let a = run(dir.path(), &[&args[..], &["-o", "a.json"]].concat());
    let b = run(dir.path(), &[&args[..], &["-o", "b.json"]].concat());
    assert!(a.status.success() && b.status.success());
    assert_eq!(String::from_utf8_lossy(&a.stdout).trim(), "gen m=1 parameter=0.7 rule=random_bernoulli valid=true checked_depth=12");
    let ta = std::fs::read(dir.path().join("a.json")).unwrap();
    assert_eq!(ta, std::fs::read(dir.path().join("b.json")).unwrap());
    let df = snowcircle::DiameterFunction::from_json_str(std::str::from_utf8(&ta).unwrap()).unwrap();
    assert_eq!(df.base_exponent(), 1);
}

#[test]
fn dist_recovers_arc_length() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(dir.path(), &["gen", "--sigma", "1/2", "--rule", "all_half", "-o", "half.json"]).status.success());
    let v = stdout_json(&run(dir.path(), &["dist", "half.json", "1/8", "3/8", "--depth", "8"]));
    assert_eq!((v["lower"].as_f64(), v["upper"].as_f64()), (Some(0.25), Some(0.25)));
}

#[test]
fn rohde_svg_has_256_edges() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["rohde", "--p", "0.3333333333", "--choices", "all_snow", "--levels", "4", "-o", "snow.svg"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("edges=256"));
    let svg = std::fs::read_to_string(dir.path().join("snow.svg")).unwrap();
    assert_eq!(svg.matches(" L").count() + 1, 256);
}

#[test]
fn doubling_and_builds_report() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(dir.path(), &["gen", "--sigma", "1", "--rule", "alternating", "--horizon", "2", "-o", "alt.json"]).status.success());
    let v = stdout_json(&run(dir.path(), &["doubling", "alt.json"]));
    assert_eq!((v["verdict"].as_str(), v["n0"].as_u64(), v["n"].as_u64()), (Some("doubling"), Some(2), Some(16)));

    let out = run(dir.path(), &["build-b", "circle", "--sigma", "0.8", "--m", "4", "--depth", "2", "--pairs", "100", "-o", "b.json"]);
    let line = String::from_utf8_lossy(&out.stdout);
    assert!(line.starts_with("build TheoremB depth=2 m=4 K=6.5536 L=209.7152"), "{line}");
    let built: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("b.json")).unwrap()).unwrap();
    assert_eq!(built["distortion"]["violations"].as_u64(), Some(0));
}

#[test]
fn errors_are_json_with_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["gen", "--sigma", "1", "--rule", "all_snow"]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"].as_str(), Some("invalid"));

    let out = run(dir.path(), &["dist", "missing.json", "0", "1/2"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(serde_json::from_slice::<Value>(&out.stderr).unwrap()["error"].as_str(), Some("io"));

    let out = run(dir.path(), &["rohde", "--p", "0.6"]);
    assert_eq!(out.status.code(), Some(1));

    let out = run(dir.path(), &["gen"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(serde_json::from_slice::<Value>(&out.stderr).unwrap()["error"].as_str(), Some("usage"));
}
