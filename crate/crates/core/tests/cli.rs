use std::process::{Command, Output};

fn kantorovich(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kantorovich"))
        .args(args)
        .output()
        .unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn majorant_table_example() {
    let out = kantorovich(&["majorant", "--b", "0.25", "--L", "1", "--kmax", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    let expected = [0.0, 0.25, 7.0 / 24.0, 0.292_892_156_862_745_1];
    for (row, t) in rows.iter().zip(expected) {
        let rec = row["t_recursive"].as_f64().unwrap();
        let closed = row["t_closed_form"].as_f64().unwrap();
        assert!((rec - t).abs() < 1e-12, "{rec} vs {t}");
        assert!((rec - closed).abs() < 1e-12);
    }
}

#[test]
fn verify_with_supplied_l_passes() {
    let out = kantorovich(&[
        "verify",
        "--problem",
        "scalar-sqrt",
        "--param",
        "c=2",
        "--x0",
        "1.5",
        "--R",
        "1",
        "--L",
        "0.6666667",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["report"]["all_pass"], true);
    assert_eq!(v["certificate"]["status"], "CERTIFIED_STRICT");
}

#[test]
fn exit_codes() {
    let out = kantorovich(&["certify", "--b", "0.6", "--L", "1", "--R", "2"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["certificate"]["reason"], "HYPOTHESIS_2BL");

    let out = kantorovich(&["verify", "--problem", "scalar-sqrt", "--L", "0.3333333333"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["trace"]["stop_reason"], "LEFT_CERTIFIED_BALL");

    for bad in [
        &["verify", "--problem", "no-such-problem"][..],
        &["certify", "--b", "0.1"],
        &["solve", "--problem", "scalar-sqrt", "--kmax", "x"],
        &["frobnicate"],
        &["verify", "--problem", "/nonexistent/problem.json"],
    ] {
        let out = kantorovich(bad);
        assert_eq!(out.status.code(), Some(3), "{bad:?}");
        assert!(!out.stderr.is_empty());
    }
    assert_eq!(kantorovich(&["--help"]).status.code(), Some(0));
    assert_eq!(
        kantorovich(&["majorant", "--b", "1", "--L", "1"]).status.code(),
        Some(1)
    );
}

#[test]
fn reports_are_deterministic() {
    let args = ["verify", "--problem", "discrete-bvp", "--param", "n=6", "--seed", "7"];
    let a = kantorovich(&args);
    let b = kantorovich(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn problem_file_and_output_flag() {
    let dir = tempfile::tempdir().unwrap();
    let problem = dir.path().join("exp.json");
    std::fs::write(
        &problem,
        r#"{"name": "scalar-exp", "params": {"c": 3}, "x0": [1.0], "R": 0.5, "norm": "max", "k_max": 12}"#,
    )
    .unwrap();
    let report = dir.path().join("report.json");
    let out = kantorovich(&[
        "solve",
        "--problem",
        problem.to_str().unwrap(),
        "--output",
        report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["problem"]["norm"], "max");
    let last = v["trace"]["iterates"].as_array().unwrap().last().unwrap()[0]
        .as_f64()
        .unwrap();
    assert!((last - 3f64.ln()).abs() < 1e-14);
}

#[test]
fn table_format_and_listing() {
    let out = kantorovich(&["certify", "--problem", "circle-line", "--format", "table"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("CERTIFIED_STRICT"));

    let out = kantorovich(&["problems"]);
    let names: Vec<_> = json(&out)
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["name"].as_str().unwrap().to_owned())
        .collect();
    assert_eq!(
        names,
        [
            "scalar-majorant",
            "scalar-sqrt",
            "circle-line",
            "scalar-exp",
            "discrete-bvp"
        ]
    );
}
