//! End-to-end tests of the `leastcore` binary: output shapes, JSON schema,
//! exit codes, determinism, and fixture integrity.

use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_leastcore"))
}

fn write_game(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn solve_fig1_text_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let game = write_game(dir.path(), "fig1.txt", "5; 2 4 2 1\n");

    let out = bin().arg("solve").arg(&game).output().unwrap();
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("eps* = 0.4000000000"), "{text}");
    assert!(text.contains("tight witness"), "{text}");

    let out = bin().arg("solve").arg(&game).arg("--json").output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((v["epsilon_star"].as_f64().unwrap() - 0.4).abs() < 1e-9);
    assert_eq!(v["payoff"].as_array().unwrap().len(), 4);
    assert!(v["diagnostics"]["duality_gap"].as_f64().unwrap() < 1e-9);
    assert_eq!(v["exact"], serde_json::json!(false));
}

#[test]
fn solve_exact_reports_rational() {
    let dir = tempfile::tempdir().unwrap();
    let game = write_game(dir.path(), "fig1.txt", "5; 2 4 2 1\n");
    let out = bin().arg("solve").arg(&game).arg("--exact").arg("--json").output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["epsilon_star_rational"], serde_json::json!("2/5"));
    assert_eq!(v["exact"], serde_json::json!(true));
}

#[test]
fn solve_trivial_core_game() {
    let dir = tempfile::tempdir().unwrap();
    let game = write_game(dir.path(), "tiny.txt", "2; 1 1\n");
    let out = bin().arg("solve").arg(&game).output().unwrap();
    assert!(out.status.success());
    assert!(stdout(&out).contains("eps* = 0.0000000000"));
}

#[test]
fn oracle_agrees_with_solve_on_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    for text in ["5; 2 4 2 1\n", "1; 1 1\n", "6; 2 4 2 1\n", "4; 3 2 1 1\n"] {
        let game = write_game(dir.path(), "g.txt", text);
        let solve_out = bin().arg("solve").arg(&game).arg("--json").output().unwrap();
        assert!(solve_out.status.success(), "{text}");
        let s: serde_json::Value = serde_json::from_str(&stdout(&solve_out)).unwrap();
        let oracle_out = bin().arg("oracle").arg(&game).arg("--json").output().unwrap();
        assert!(oracle_out.status.success(), "{text}");
        let o: serde_json::Value = serde_json::from_str(&stdout(&oracle_out)).unwrap();
        let diff = (s["epsilon_star"].as_f64().unwrap() - o["epsilon_star"].as_f64().unwrap()).abs();
        assert!(diff <= 1e-8, "{text}: diff {diff}");
    }
}

#[test]
fn oracle_diff_flag() {
    let dir = tempfile::tempdir().unwrap();
    let game = write_game(dir.path(), "g.txt", "5; 2 4 2 1\n");
    let out = bin().arg("oracle").arg(&game).arg("--diff").output().unwrap();
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("eps* = 2/5"), "{text}");
    assert!(text.contains("4 minimal winning coalitions"), "{text}");
    assert!(text.contains("|diff|"), "{text}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();

    // 2: parse error
    let bad = write_game(dir.path(), "bad.txt", "not a game\n");
    let out = bin().arg("solve").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    // 2: missing file
    let out = bin().arg("solve").arg(dir.path().join("missing.txt")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    // 4: oracle player cap
    let big = write_game(
        dir.path(),
        "big.txt",
        &format!("1; {}\n", vec!["1"; 25].join(" ")),
    );
    let out = bin().arg("oracle").arg(&big).output().unwrap();
    assert_eq!(out.status.code(), Some(4));

    // 4: p1 export player cap
    let out = bin()
        .arg("export")
        .arg(&big)
        .arg(dir.path().join("big.lp"))
        .arg("--formulation")
        .arg("p1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));

    // 5: regression on a rank-deficient design
    let game = write_game(dir.path(), "g.txt", "3; 2 2 1\n");
    let csv = dir.path().join("thin.csv");
    let out = bin()
        .args(["bench", "--n", "4", "--u", "3", "--instances", "2", "-o"])
        .arg(&csv)
        .output()
        .unwrap();
    assert!(out.status.success());
    let out = bin().arg("regress").arg(&csv).output().unwrap();
    assert_eq!(out.status.code(), Some(5));
    drop(game);
}

#[test]
fn export_p2_deterministic_and_line_capped() {
    let dir = tempfile::tempdir().unwrap();
    let game = write_game(dir.path(), "fig1.txt", "5; 2 4 2 1\n");
    let a = dir.path().join("a.lp");
    let b = dir.path().join("b.lp");
    for out_path in [&a, &b] {
        let out = bin()
            .arg("export")
            .arg(&game)
            .arg(out_path)
            .arg("--no-prune")
            .output()
            .unwrap();
        assert!(out.status.success());
        assert!(stdout(&out).contains("79 rows, 56 columns"));
    }
    let bytes_a = std::fs::read(&a).unwrap();
    assert_eq!(bytes_a, std::fs::read(&b).unwrap());
    for line in String::from_utf8(bytes_a).unwrap().lines() {
        assert!(line.len() <= 255, "line over 255 chars: {line}");
    }
}

#[test]
fn export_flow_requires_x() {
    let dir = tempfile::tempdir().unwrap();
    let game = write_game(dir.path(), "fig1.txt", "5; 2 4 2 1\n");
    let out = bin()
        .arg("export")
        .arg(&game)
        .arg(dir.path().join("f.lp"))
        .args(["--formulation", "flow"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin()
        .arg("export")
        .arg(&game)
        .arg(dir.path().join("f.lp"))
        .args(["--formulation", "flow", "--x", "0.2,0.4,0.2,0.2"])
        .output()
        .unwrap();
    assert!(out.status.success());
}

#[test]
fn bench_no_timing_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out_path in [&a, &b] {
        let out = bin()
            .args(["bench", "--n", "4,6", "--u", "5", "--instances", "3", "--no-timing", "--seed", "9", "-o"])
            .arg(out_path)
            .output()
            .unwrap();
        assert!(out.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn solve_vector_game_json_input() {
    let dir = tempfile::tempdir().unwrap();
    let game = write_game(
        dir.path(),
        "vec.json",
        r#"{"rules":[{"quota":3,"weights":[2,1,1]},{"quota":2,"weights":[1,1,1]}],"combine":"intersection"}"#,
    );
    let solve_out = bin().arg("solve").arg(&game).arg("--json").output().unwrap();
    assert!(solve_out.status.success());
    let s: serde_json::Value = serde_json::from_str(&stdout(&solve_out)).unwrap();
    let oracle_out = bin().arg("oracle").arg(&game).arg("--json").output().unwrap();
    assert!(oracle_out.status.success());
    let o: serde_json::Value = serde_json::from_str(&stdout(&oracle_out)).unwrap();
    let diff = (s["epsilon_star"].as_f64().unwrap() - o["epsilon_star"].as_f64().unwrap()).abs();
    assert!(diff <= 1e-8);
}

#[test]
fn bundled_fixtures_match_checksums() {
    let expected = [
        (
            "data/us_electoral.txt",
            "5b2c91569b1a0386bf6a2719a257da51fffa4ab62df281e28aff624a40a2cd3d",
        ),
        (
            "data/eu_council.txt",
            "bc94b3affd787df59685f3d3163eeea75a3276bd3a7f7515459096b205cefa72",
        ),
    ];
    for (rel, want) in expected {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join(rel);
        let bytes = std::fs::read(&path).unwrap();
        let got = format!("{:x}", Sha256::digest(&bytes));
        assert_eq!(got, want, "{rel}");
    }
}
