use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qkd-ratelab")).args(args).output().expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn csv_rows(args: &[&str]) -> (Vec<String>, Vec<Vec<f64>>) {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    let mut r = csv::Reader::from_reader(out.stdout.as_slice());
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(|v| v.parse().unwrap()).collect()).collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

fn temp_file(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qkd-ratelab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, contents).unwrap();
    p
}

#[test]
fn rate_amplitude_damping_reverse() {
    let v = json(&["rate", "--channel", "amplitude_damping:0.2", "--protocol", "bb84", "--direction", "reverse"]);
    assert!((v["rate"].as_f64().unwrap() - 0.531004).abs() < 1e-6);
    for key in ["raw", "eveAmbiguity", "cost", "worstCase"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn rate_identity_sixstate() {
    let v = json(&["rate", "--channel", "identity", "--protocol", "sixstate"]);
    assert!((v["rate"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn rate_from_json_files() {
    let tagged = temp_file("ad.json", r#"{"kind": "amplitude_damping", "params": {"p": 0.2}}"#);
    let v = json(&["rate", "--channel", &format!("@{}", tagged.display()), "--direction", "reverse"]);
    assert!((v["rate"].as_f64().unwrap() - 0.531004).abs() < 1e-6);
    let raw = temp_file("id.json", r#"{"R": [[1,0,0],[0,1,0],[0,0,1]], "t": [0,0,0]}"#);
    let v = json(&["rate", "--channel", &format!("raw:@{}", raw.display()), "--protocol", "sixstate"]);
    assert!((v["rate"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn invalid_inputs_exit_2() {
    let bad = temp_file("bad.json", r#"{"R": [[1,0,0],[0,1,0],[0,0,1]], "t": [0.5,0,0]}"#);
    assert_eq!(run(&["rate", "--channel", &format!("raw:@{}", bad.display())]).status.code(), Some(2));
    assert_eq!(run(&["rate", "--channel", "depolarizing"]).status.code(), Some(2));
    assert_eq!(run(&["rate", "--channel", "amplitude_damping:1.5"]).status.code(), Some(2));
    assert_eq!(run(&["rate", "--channel", "identity", "--basis", "y"]).status.code(), Some(2));
    assert_eq!(run(&["figure", "nope"]).status.code(), Some(2));
    assert_eq!(
        run(&[
            "sweep",
            "--channel",
            "depolarizing:{}",
            "--start",
            "0",
            "--stop",
            "0.1",
            "--steps",
            "1",
            "--curve",
            "bb84"
        ])
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn budget_exceeded_exits_3() {
    assert_eq!(run(&["audit", "toeplitz", "--n", "14", "--l", "10"]).status.code(), Some(3));
    assert_eq!(run(&["audit", "ir", "--n", "40", "--k", "5", "--q", "0.05", "--trials", "1"]).status.code(), Some(3));
    let out = run(&["audit", "secrecy", "--channel", "depolarizing:0.1", "--copies", "6", "--l", "1"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn twoway_rate_reports_functions() {
    let v = json(&["rate", "--channel", "identity", "--protocol", "sixstate", "--twoway"]);
    assert_eq!(v["functions"], "0110/1111");
    assert_eq!(v["branches"].as_array().unwrap().len(), 2);
    let v = json(&[
        "rate",
        "--channel",
        "depolarizing:0.1",
        "--protocol",
        "sixstate",
        "--twoway",
        "--functions",
        "optimize",
    ]);
    let ties: Vec<&str> = v["ties"].as_array().unwrap().iter().map(|t| t.as_str().unwrap()).collect();
    assert!(ties.contains(&"0110/1111"));
}

#[test]
fn amp_damping_z_figure_properties() {
    let (h, rows) = csv_rows(&["figure", "amp-damping-z", "--points", "21"]);
    assert_eq!(h[0], "param");
    assert_eq!(rows.len(), 21);
    let (rev, dir) = (column(&h, "reverse"), column(&h, "direct"));
    assert_eq!(rows[0][0], 0.0);
    assert!((rows[0][rev] - 1.0).abs() < 1e-9 && (rows[0][dir] - 1.0).abs() < 1e-9);
    for r in &rows {
        assert!(r[rev] >= r[dir] - 1e-9, "reverse below direct at p={}", r[0]);
        for v in &r[1..] {
            assert!(*v >= 0.0);
        }
    }
}

#[test]
fn depolarizing_bb84_two_way_dominates_one_way() {
    let (h, rows) = csv_rows(&["figure", "depolarizing-bb84", "--points", "7"]);
    let (tw, ow) = (column(&h, "two-way"), column(&h, "one-way"));
    for r in &rows {
        assert!(r[tw] >= r[ow] - 1e-9, "two-way below one-way at e={}", r[0]);
    }
    assert!(rows[1][tw] > rows[1][ow], "strict gain at e={}", rows[1][0]);
}

#[test]
fn figure_output_is_deterministic() {
    let dir = std::env::temp_dir().join(format!("qkd-ratelab-det-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let (a, b) = (dir.join("a.csv"), dir.join("b.csv"));
    for (p, threads) in [(&a, "1"), (&b, "3")] {
        let out = Command::new(env!("CARGO_BIN_EXE_qkd-ratelab"))
            .args(["figure", "amp-damping-twoway", "--points", "6", "--output", p.to_str().unwrap()])
            .env("QKD_RATELAB_THREADS", threads)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn sweep_columns_follow_curves() {
    let args = [
        "sweep",
        "--channel",
        "rotation:{}",
        "--start",
        "0",
        "--stop",
        "pi",
        "--steps",
        "3",
        "--curve",
        "bb84",
        "--curve",
        "bb84/conventional",
    ];
    assert_eq!(run(&args).status.code(), Some(2), "non-numeric bounds are rejected");
    let (h, rows) = csv_rows(&[
        "sweep",
        "--channel",
        "rotation:{}",
        "--start",
        "0",
        "--stop",
        "2.0943951023931953",
        "--steps",
        "3",
        "--curve",
        "bb84",
        "--curve",
        "bb84/conventional",
    ]);
    assert_eq!(h, ["param", "bb84", "bb84/conventional"]);
    let last = rows.last().unwrap();
    assert!(last[1] > 0.18 && last[2] == 0.0);
}

#[test]
fn estimate_round_trips_samples() {
    let dir = std::env::temp_dir().join(format!("qkd-ratelab-est-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let samples = dir.join("s.csv");
    let s = samples.to_str().unwrap();
    let a = json(&[
        "estimate",
        "--channel",
        "depolarizing:0.1",
        "--protocol",
        "sixstate",
        "--m",
        "20000",
        "--seed",
        "3",
        "--write-samples",
        s,
    ]);
    let b = json(&["estimate", "--samples", s]);
    assert_eq!(a, b);
    let h = a["estimatedAmbiguity"].as_f64().unwrap();
    assert!(h > 0.0 && h < 1.0);
    assert!(a["etaHat"].as_f64().unwrap() >= 0.0);
}

#[test]
fn simulate_one_way_and_two_way() {
    let v = json(&[
        "simulate",
        "--channel",
        "depolarizing:0.03",
        "--protocol",
        "sixstate",
        "--m",
        "1000000",
        "--n",
        "1000000",
        "--ir-trials",
        "20",
    ]);
    let fk = &v["finiteKey"];
    assert_eq!(fk["aborted"], false);
    assert!(fk["length"].as_u64().unwrap() > 0);
    assert!(v["irCheck"]["error"].as_f64().is_some());
    let v = json(&[
        "simulate",
        "--channel",
        "depolarizing:0.03",
        "--protocol",
        "sixstate",
        "--m",
        "1000000",
        "--n",
        "1000000",
        "--twoway",
    ]);
    assert_eq!(v["syndromeLengths"].as_array().unwrap().len(), 3);
    assert!(v["finiteKey"]["security"].as_f64().is_some());
}

#[test]
fn audits_hold() {
    let v = json(&["audit", "toeplitz", "--n", "4", "--l", "2"]);
    assert_eq!(v["holds"], true);
    let v = json(&["audit", "secrecy", "--channel", "depolarizing:0.05", "--copies", "2", "--l", "1"]);
    assert_eq!(v["holds"], true);
    let state = temp_file("c.json", r#"{"n": 2, "eSize": 1, "p": [0.4, 0.3, 0.2, 0.1]}"#);
    let v = json(&["audit", "secrecy", "--state", state.to_str().unwrap(), "--l", "1"]);
    assert_eq!(v["holds"], true);
    assert_eq!(v["exhaustive"], true);
    let v = json(&["audit", "ir", "--n", "12", "--k", "12", "--q", "0.05", "--trials", "20"]);
    assert_eq!(v["error"], 0.0);
    let v = json(&["audit", "ir-two-way", "--channel", "identity", "--n", "4", "--k", "4,4,1", "--trials", "5"]);
    assert_eq!(v["success"], 1.0);
    assert_eq!(run(&["audit", "ir-two-way", "--channel", "identity", "--n", "4", "--k", "1,2"]).status.code(), Some(2));
}
