use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ckp::io::ResultFile;
use ckp::num::{parse_rational, rat};
use tempfile::TempDir;

const FIXTURE: &str = r#"{
  "capacity": "5",
  "users": [
    { "id": 1, "demands": [ { "re": "3", "im": "4", "value": "10" } ] },
    { "id": 2, "demands": [ { "re": "4", "im": "3", "value": "10" } ] },
    { "id": 3, "demands": [ { "re": "5", "im": "0", "value": "12" } ] }
  ]
}
"#;

fn ckp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ckp")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn solve(instance: &Path, out: &Path, extra: &[&str]) -> ResultFile {
    let mut args = vec!["solve", s(instance), "--omit-runtime", "-o", s(out)];
    args.extend_from_slice(extra);
    let o = ckp(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    ResultFile::parse(&std::fs::read_to_string(out).unwrap()).unwrap()
}

#[test]
fn exact_solve_on_fixture() {
    let dir = TempDir::new().unwrap();
    let inst = write(&dir, "i.json", FIXTURE);
    let r = solve(&inst, &dir.path().join("r.json"), &["--algo", "exact"]);
    assert_eq!(r.welfare, "12");
    assert_eq!(r.choices, vec![None, None, Some(0)]);
    assert_eq!(r.violation_factor, "1");
    assert_eq!(r.runtime_ms, None);
    let o = ckp(&["verify", s(&inst), s(&dir.path().join("r.json")), "--beta", "1"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn fptas_violation_on_right_angle_instance() {
    let dir = TempDir::new().unwrap();
    let inst = dir.path().join("i.json");
    for seed in 0..5 {
        let seed = seed.to_string();
        let o = ckp(&["gen", "--n", "6", "--k", "2", "--phi-max-deg", "90", "--seed", &seed, "-o", s(&inst)]);
        assert_eq!(code(&o), 0);
        let out = dir.path().join("r.json");
        let r = solve(&inst, &out, &["--algo", "fptas", "--epsilon", "1/4", "--pn", "1"]);
        // squared certificate, so the bound is (7/4)^2
        assert!(parse_rational(&r.violation_factor).unwrap() <= rat(49, 16));
        assert_eq!(code(&ckp(&["verify", s(&inst), s(&out), "--beta", "7/4"])), 0);
    }
}

#[test]
fn malformed_json_is_a_parse_error() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.json", "{ \"capacity\": ");
    assert_eq!(code(&ckp(&["solve", s(&bad)])), 2);
    let bad_num = write(&dir, "num.json", &FIXTURE.replace("\"12\"", "\"twelve\""));
    assert_eq!(code(&ckp(&["solve", s(&bad_num)])), 2);
    assert_eq!(code(&ckp(&["solve", "--no-such-flag"])), 2);
}

#[test]
fn gen_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        assert_eq!(code(&ckp(&["gen", "--n", "5", "--k", "3", "--phi-max-deg", "150", "--seed", "11", "-o", s(p)])), 0);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let f = ckp::io::InstanceFile::parse(&std::fs::read_to_string(&a).unwrap()).unwrap();
    let tan = f.metadata.unwrap().tan_theta.unwrap();
    assert!(tan <= 60f64.to_radians().tan() + 1e-12);
}

#[test]
fn gen_rejects_bad_ranges() {
    assert_eq!(code(&ckp(&["gen", "--n", "3", "--phi-max-deg", "200"])), 2);
    assert_eq!(code(&ckp(&["gen", "--n", "3", "--k", "0"])), 2);
}

#[test]
fn verify_catches_tampering() {
    let dir = TempDir::new().unwrap();
    let inst = write(&dir, "i.json", FIXTURE);
    let out = dir.path().join("r.json");
    let mut r = solve(&inst, &out, &["--algo", "exact", "--payments"]);
    assert!(r.payments.is_some());
    assert_eq!(code(&ckp(&["verify", s(&inst), s(&out)])), 0);
    r.welfare = "13".into();
    let tampered = write(&dir, "t.json", &r.to_json());
    assert_eq!(code(&ckp(&["verify", s(&inst), s(&tampered)])), 3);
    r.welfare = "12".into();
    r.payments = Some(vec!["0".into(), "-1".into(), "0".into()]);
    let tampered = write(&dir, "t.json", &r.to_json());
    assert_eq!(code(&ckp(&["verify", s(&inst), s(&tampered)])), 3);
}

#[test]
fn verify_enforces_beta() {
    let dir = TempDir::new().unwrap();
    let inst = write(&dir, "i.json", FIXTURE);
    let out = dir.path().join("r.json");
    let mut r = solve(&inst, &out, &["--algo", "exact"]);
    // serve users 1 and 2 together: |(7,7)| = 7 sqrt 2 > 5
    r.choices = vec![Some(0), Some(0), None];
    r.total = ckp::io::PointRecord { re: "7".into(), im: "7".into() };
    r.welfare = "20".into();
    r.violation_factor = "98/25".into();
    let over = write(&dir, "o.json", &r.to_json());
    assert_eq!(code(&ckp(&["verify", s(&inst), s(&over), "--beta", "1"])), 3);
    assert_eq!(code(&ckp(&["verify", s(&inst), s(&over), "--beta", "2"])), 0);
}

#[test]
fn audit_and_bench() {
    let dir = TempDir::new().unwrap();
    let inst = write(&dir, "i.json", FIXTURE);
    let report = dir.path().join("a.json");
    assert_eq!(code(&ckp(&["audit", s(&inst), "--mechanism", "fptas", "-o", s(&report)])), 0);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["instances"][0]["violations"].as_array().unwrap().len(), 0);

    let csv = dir.path().join("b.csv");
    let o = ckp(&["bench", s(&inst), "--algos", "ptas,fptas", "--eps", "1/4,1/5", "--omit-runtime", "-o", s(&csv)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(ckp::cli::BENCH_HEADER));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        let eps = parse_rational(r[2]).unwrap();
        let one = rat(1, 1);
        match r[1] {
            "ptas" => assert!(parse_rational(r[5]).unwrap() >= &one - &eps * rat(3, 1)),
            "fptas" => {
                let bound = &one + &eps * rat(3, 1);
                assert!(parse_rational(r[6]).unwrap() <= &bound * &bound);
            }
            other => panic!("unexpected algo {other}"),
        }
    }
}
