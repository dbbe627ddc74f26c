use std::path::Path;
use std::process::{Command, Output};

use pharm_core::hodograph::SeriesDocument;
use serde_json::Value;

fn pharm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pharm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit status")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn exponent_table_at_p_two() {
    let out = pharm(&["exponents", "--p", "2", "--n", "1", "--kmax", "5"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter_map(|l| {
            let cols: Vec<f64> = l
                .split_whitespace()
                .filter_map(|c| c.parse().ok())
                .collect();
            (cols.len() == 3).then_some(cols)
        })
        .collect();
    assert_eq!(rows.len(), 4);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row[0], i as f64 + 2.0);
        assert_eq!(row[1], i as f64 + 1.0);
        assert_eq!(row[2], 0.0);
    }
}

#[test]
fn criticality_ratio_at_the_threshold() {
    let out = pharm(&[
        "exponents",
        "--p",
        "9.52520797",
        "--n",
        "1",
        "--kmax",
        "3",
        "--json",
    ]);
    assert_eq!(code(&out), 0);
    let ratio = stdout_json(&out)["criticality_ratio"].as_f64().unwrap();
    assert!((ratio - 1.0).abs() < 1e-6, "{ratio}");
}

#[test]
fn invalid_exponent_is_rejected() {
    let out = pharm(&["exponents", "--p", "0.5", "--n", "1", "--kmax", "3"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("1 < p"), "{}", stderr(&out));
}

#[test]
fn thresholds() {
    let one = pharm(&["threshold", "--n", "1"]);
    assert_eq!(code(&one), 0);
    let one = stdout_json(&one)["value"].as_f64().unwrap();
    assert!((one - 9.52520797).abs() < 1e-7, "{one}");

    let two = pharm(&["threshold", "--n", "2"]);
    assert_eq!(code(&two), 0);
    assert!(stdout_json(&two)["value"].as_f64().unwrap() > 9.52520797);

    assert_eq!(code(&pharm(&["threshold", "--n", "5"])), 2);
}

#[test]
fn built_series_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("s.json");
    let out = pharm(&[
        "build",
        "--n",
        "1",
        "--mode",
        "2:1",
        "--mode",
        "3:0.3:-0.1",
        "--p",
        "4.5",
        "--out",
        path(&file),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(&file).unwrap();
    let doc = SeriesDocument::parse(&text).unwrap();
    assert_eq!(doc.to_json(), text.trim_end());
    let series = doc.build::<f64>().unwrap();
    assert_eq!(series.params().p(), 4.5);
    assert_eq!(series.modes().len(), 2);

    let preset = pharm(&["build", "--preset", "worst-case"]);
    assert_eq!(code(&preset), 0);
    let doc = SeriesDocument::parse(std::str::from_utf8(&preset.stdout).unwrap()).unwrap();
    assert_eq!(doc.build::<f64>().unwrap().params().p(), 4.0);
}

#[test]
fn verify_exit_codes() {
    let floor = pharm(&["verify", "--preset", "main-term", "--p", "4"]);
    assert_eq!(code(&floor), 0);
    assert_eq!(stdout_json(&floor)["verdict"], "floor_hit");

    let two = pharm(&["verify", "--preset", "worst-case", "--p", "4"]);
    assert_eq!(code(&two), 0);
    let two = stdout_json(&two);
    assert_eq!(two["verdict"], "verified");
    assert!(two["exponent"].as_f64().unwrap() > 2.05);

    let aronsson = pharm(&["verify", "--aronsson", "--center", "1,0"]);
    assert_eq!(code(&aronsson), 4);
    let slope = stdout_json(&aronsson)["exponent"].as_f64().unwrap();
    assert!((slope - 2.0).abs() < 0.05, "{slope}");

    let outside = pharm(&["verify", "--preset", "worst-case", "--center", "0.5,0"]);
    assert_eq!(code(&outside), 2);
}

#[test]
fn malformed_series_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.json");
    std::fs::write(&file, r#"{"p": 4, "n": 1, "modes": [{"k": 2, "re": 1, "im": 0}, {"k": "three", "re": 0.3, "im": 0}]}"#).unwrap();
    let out = pharm(&["verify", "--series", path(&file)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("$.modes[1].k"), "{}", stderr(&out));

    std::fs::write(&file, "{").unwrap();
    assert_eq!(code(&pharm(&["verify", "--series", path(&file)])), 2);
}

#[test]
fn verify_outputs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let stems = [dir.path().join("a"), dir.path().join("b")];
    for stem in &stems {
        let out = pharm(&[
            "verify",
            "--preset",
            "n2",
            "--rungs",
            "6",
            "--out",
            path(stem),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    for ext in ["csv", "json"] {
        let a = std::fs::read(stems[0].with_extension(ext)).unwrap();
        let b = std::fs::read(stems[1].with_extension(ext)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{ext} differs");
    }
    let summary: Value =
        serde_json::from_slice(&std::fs::read(stems[0].with_extension("json")).unwrap()).unwrap();
    assert_eq!(summary["rungs"], 6);
    let csv = std::fs::read_to_string(stems[0].with_extension("csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn oracle_outputs_are_deterministic_and_reloadable() {
    let dir = tempfile::tempdir().unwrap();
    let stems = [dir.path().join("a"), dir.path().join("b")];
    for stem in &stems {
        let out = pharm(&[
            "oracle",
            "--preset",
            "worst-case",
            "--grid",
            "17",
            "--format",
            "bin",
            "--out",
            path(stem),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    for name in [
        "a.json",
        "a_reference.bin",
        "a_variational.bin",
        "a_amv.bin",
    ] {
        let a = std::fs::read(dir.path().join(name)).unwrap();
        let b = std::fs::read(dir.path().join(name.replacen('a', "b", 1))).unwrap();
        assert_eq!(a, b, "{name} differs");
    }
    let reference = pharm_core::GridField::load(&dir.path().join("a_reference.bin")).unwrap();
    let solved = pharm_core::GridField::load(&dir.path().join("a_variational.bin")).unwrap();
    let summary: Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("a.json")).unwrap()).unwrap();
    let cmp = pharm_core::oracle::compare_fields(&solved, &reference).unwrap();
    assert_eq!(
        summary["variational"]["vs_reference"]["rel_l2"]
            .as_f64()
            .unwrap(),
        cmp.rel_l2
    );
}

#[test]
fn harmonic_oracle_is_exact() {
    let out = pharm(&[
        "oracle",
        "--preset",
        "harmonic",
        "--grid",
        "33",
        "--mode",
        "variational",
    ]);
    assert_eq!(code(&out), 0);
    let err = stdout_json(&out)["variational"]["vs_reference"]["max_abs"]
        .as_f64()
        .unwrap();
    assert!(err < 1e-10, "{err:e}");
}

#[test]
fn oracle_failures() {
    assert_eq!(
        code(&pharm(&[
            "oracle",
            "--preset",
            "worst-case",
            "--grid",
            "16"
        ])),
        2
    );
    let out = pharm(&[
        "oracle",
        "--preset",
        "worst-case",
        "--grid",
        "33",
        "--mode",
        "variational",
        "--max-iter",
        "3",
    ]);
    assert_eq!(code(&out), 5);
    assert_eq!(stdout_json(&out)["variational"]["converged"], false);
    assert_eq!(
        code(&pharm(&[
            "oracle", "--preset", "harmonic", "--mode", "amv", "--p", "1.5"
        ])),
        2
    );
}

#[test]
fn config_file_matches_flags() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.json");
    std::fs::write(
        &file,
        r#"{"command": "exponents", "args": {"p": 4, "n": 2, "kmax": 5, "json": true}}"#,
    )
    .unwrap();
    let via_config = pharm(&["--config", path(&file)]);
    let via_flags = pharm(&["exponents", "--p", "4", "--n", "2", "--kmax", "5", "--json"]);
    assert_eq!(code(&via_config), 0);
    assert_eq!(via_config.stdout, via_flags.stdout);

    assert_eq!(
        code(&pharm(&["--config", path(&file), "threshold", "--n", "1"])),
        2
    );
    std::fs::write(&file, "[]").unwrap();
    assert_eq!(code(&pharm(&["--config", path(&file)])), 2);
}

#[test]
fn thread_cap_does_not_change_results() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_pharm"))
            .args(["verify", "--preset", "worst-case", "--rungs", "5"])
            .env("PHARM_THREADS", threads)
            .output()
            .unwrap()
    };
    let serial = run("0");
    let parallel = run("4");
    assert_eq!(code(&serial), 0);
    assert_eq!(serial.stdout, parallel.stdout);
    assert_eq!(code(&run("many")), 2);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&pharm(&[])), 2);
    assert_eq!(code(&pharm(&["frobnicate"])), 2);
    assert_eq!(code(&pharm(&["verify", "--center", "1"])), 2);
    assert_eq!(code(&pharm(&["--help"])), 0);
}
