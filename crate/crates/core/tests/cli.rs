use std::process::Command;

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_levy-penal"))
}

#[test]
fn hitprob_prints_gamblers_ruin_value() {
    let out = cli().args(["hitprob", "--model", "bm", "--x", "0", "--a", "-1", "--b", "2"]).output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "0.666667");
}

#[test]
fn h_table_is_abs_for_brownian_motion() {
    let out = cli().args(["h-table", "--model", "bm", "--xs", "-3:3:1"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<(f64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let mut c = l.split(',');
            (c.next().unwrap().parse().unwrap(), c.next().unwrap().parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 7);
    for (x, h) in rows {
        assert!((h - f64::abs(x)).abs() < 1e-8, "{x} {h}");
    }
}

#[test]
fn invalid_input_exits_with_two() {
    let bad_model = cli().args(["hitprob", "--model", "nope", "--x", "0", "--a", "1", "--b", "-1"]).status().unwrap();
    assert_eq!(bad_model.code(), Some(2));
    let bad_clock = cli().args(["penalize", "--clock", "twopoint", "--params", "a=1,b=-1"]).status().unwrap();
    assert_eq!(bad_clock.code(), Some(2));
}

#[test]
fn model_from_toml_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("model.toml");
    std::fs::write(&cfg, "[model]\nkind = \"brownian\"\nsigma = 2.0\n").unwrap();
    let out = cli().args(["h-table", "--model", cfg.to_str().unwrap(), "--xs", "1:1:1"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let h: f64 = text.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((h - 0.25).abs() < 1e-8, "{h}");
}

#[test]
fn simulate_writes_paths_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("paths.csv");
    let status = cli()
        .args(["simulate", "--model", "bm", "--clock", "exp", "--params", "q=1", "--paths", "3", "--dt", "0.01", "--out"])
        .arg(&csv)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 * 101);

    let json = dir.path().join("report.json");
    let status = cli()
        .args(["simulate", "--model", "bm", "--clock", "hit", "--params", "a=1", "--paths", "20000", "--x0", "0.3", "--seed", "7", "--out"])
        .arg(&json)
        .status()
        .unwrap();
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(status.success(), report["pass"].as_bool().unwrap());
    assert!(report["sigmas"].as_f64().unwrap() < 4.0, "{report}");
}

#[test]
fn verify_writes_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("report.json");
    let status = cli().args(["verify", "--suite", "clocks", "--path-scale", "0.05", "--out"]).arg(&json).status().unwrap();
    let rows: Vec<serde_json::Value> = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert!(!rows.is_empty());
    let all_pass = rows.iter().all(|r| r["pass"].as_bool().unwrap());
    assert_eq!(status.code(), Some(if all_pass { 0 } else { 1 }));
}
