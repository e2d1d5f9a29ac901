use std::process::Command;

fn run(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_stable-cantor")).args(args).output().expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned())
}

#[test]
fn planar_certificates_exit_zero() {
    let (code, out) = run(&["certify-w1", "--N", "7", "--delta", "1/100", "--gamma", "1/10000", "--tau", "0", "--exact"]);
    assert_eq!(code, 0);
    assert!(out.contains("min margin 1/20000"), "{out}");
}

#[test]
fn failing_certificate_exits_one() {
    let (code, _) = run(&["certify-w1", "--gamma", "1/1000", "--tau", "1/100"]);
    assert_eq!(code, 1);
}

#[test]
fn bad_parameters_exit_two() {
    assert_eq!(run(&["certify-w1", "--gamma", "1/3"]).0, 2);
    assert_eq!(run(&["dim", "--eps", "x"]).0, 2);
}

#[test]
fn dimension_search() {
    let (code, out) = run(&["dim", "--N", "7", "--d", "2", "--eps", "1/2"]);
    assert_eq!(code, 0);
    assert!(out.contains("1297"), "{out}");
}

#[test]
fn render_and_report_files() {
    let dir = std::env::temp_dir().join(format!("stable-cantor-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let csv = dir.join("k.csv");
    let (code, _) = run(&["render", "--depth", "2", "--out", csv.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 36 * 36);
    let svg = dir.join("w.svg");
    assert_eq!(run(&["render", "--out", svg.to_str().unwrap(), "--w1", "2"]).0, 0);
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
    let json = dir.join("wd.json");
    assert_eq!(run(&["certify-wd", "--d", "2", "--report", json.to_str().unwrap()]).0, 0);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["expanding_total"], 36);
    std::fs::remove_dir_all(&dir).unwrap();
}
