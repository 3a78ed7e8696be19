//! End-to-end tests of the command-line interface: flag contracts, file
//! formats, exit codes, and rerun determinism.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_heleshaw"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("heleshaw-cli-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn heleshaw")
}

#[test]
fn boundary_negaxis_first_row() {
    let out = tmp("negaxis.csv");
    let res = run(&["boundary", "--map", "negaxis", "--n", "1024", "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "theta,x,y");
    let first: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(first[0], 0.0, "first data row theta");
    assert!((first[1] - 1.25).abs() < 1e-9, "first data row x = {}", first[1]);
    assert_eq!(first[2], 0.0);
}

#[test]
fn boundary_angle_row_count() {
    let out = tmp("angle.csv");
    let res = run(&[
        "boundary", "--map", "angle", "--b", "0.5", "--n", "512", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let text = fs::read_to_string(&out).unwrap();
    let rows = text.lines().count() - 1; // header
    assert!(rows > 512, "512 arc rows plus straight sides, got {rows}");
}

#[test]
fn boundary_invalid_b_exits_2() {
    let res = run(&["boundary", "--map", "angle", "--b", "-1", "--n", "64", "--out", "/dev/null"]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("--b"), "message names the flag: {err}");
}

#[test]
fn unknown_flag_exits_2() {
    let res = run(&["boundary", "--map", "negaxis", "--frobnicate", "--out", "/dev/null"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn help_exists_for_every_command() {
    for cmd in ["boundary", "moments", "simulate", "compare", "beurling"] {
        let res = run(&[cmd, "--help"]);
        assert!(res.status.success(), "{cmd} --help");
        let text = String::from_utf8_lossy(&res.stdout);
        assert!(text.contains("--out"), "{cmd} help lists --out");
        assert!(text.contains("default"), "{cmd} help lists defaults");
    }
}

#[test]
fn simulate_single_particle_file() {
    let out = tmp("one.txt");
    let res = run(&["simulate", "--model", "idla", "--N", "1", "--out", out.to_str().unwrap()]);
    assert!(res.status.success());
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    let header: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert_eq!(header["N"], 1);
    assert_eq!(header["emitted"], 1);
    assert_eq!(lines.next().unwrap(), "0 0");
}

#[test]
fn simulate_rotor_five_particles() {
    let out = tmp("rotor5.txt");
    let res = run(&[
        "simulate", "--model", "rotor", "--N", "5", "--bc", "none", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let text = fs::read_to_string(&out).unwrap();
    let sites: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(sites, vec!["0 0", "1 0", "0 -1", "-1 0", "0 1"]);
    let summary = String::from_utf8_lossy(&res.stdout);
    assert!(summary.contains("emitted=5"), "summary on stdout: {summary}");
}

#[test]
fn simulate_seeded_rerun_is_byte_identical() {
    let out1 = tmp("kpr-a.txt");
    let out2 = tmp("kpr-b.txt");
    for out in [&out1, &out2] {
        let res = run(&[
            "simulate", "--model", "kpr", "--p", "1", "--N", "20000", "--seed", "7", "--out",
            out.to_str().unwrap(),
        ]);
        assert!(res.status.success());
    }
    assert_eq!(fs::read(&out1).unwrap(), fs::read(&out2).unwrap());
}

#[test]
fn simulate_step_cap_exits_3_with_truncated_output() {
    let out = tmp("capped.txt");
    let res = run(&[
        "simulate", "--model", "idla", "--N", "5000", "--step-cap", "100", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(3));
    let text = fs::read_to_string(&out).unwrap();
    let header: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(header["truncated"], true);
}

#[test]
fn simulate_writes_pbm() {
    let out = tmp("r5.txt");
    let pbm = tmp("r5.pbm");
    let res = run(&[
        "simulate", "--model", "rotor", "--N", "5", "--out", out.to_str().unwrap(), "--pbm",
        pbm.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let text = fs::read_to_string(&pbm).unwrap();
    assert!(text.starts_with("P1\n3 3\n"));
}

#[test]
fn moments_negaxis_csv() {
    let out = tmp("moments.csv");
    let res = run(&[
        "moments", "--map", "negaxis", "--nmax", "3", "--grid", "48", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "exponent,with_log,value,error_estimate");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4, "nmax 3 gives 4 rows");
    assert!(rows[0].starts_with("5.0"), "first exponent 1/2: {}", rows[0]);
    // the vanishing family: rows n ≥ 1 are tiny
    for row in &rows[1..] {
        let value: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
        assert!(value.abs() < 1e-5, "row {row}");
    }
}

#[test]
fn moments_doubled_exponents() {
    let out = tmp("moments-doubled.csv");
    let res = run(&[
        "moments", "--map", "doubled", "--nmax", "2", "--grid", "32", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let text = fs::read_to_string(&out).unwrap();
    let exps: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|r| r.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(exps, vec![0.25, 0.75, 1.25]);
}

#[test]
fn moments_with_p_uses_offset_exponents() {
    let out = tmp("moments-p.csv");
    let json = tmp("moments-p.json");
    let res = run(&[
        "moments", "--map", "doubled", "--nmax", "2", "--p", "0.5", "--grid", "32", "--out",
        out.to_str().unwrap(), "--json", json.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let text = fs::read_to_string(&out).unwrap();
    let exps: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|r| r.split(',').next().unwrap().parse().unwrap())
        .collect();
    // alpha(0.5) = 1/6: exponents n ∓ 1/6 for n = 1, 2
    let expected = [1.0 - 1.0 / 6.0, 1.0 + 1.0 / 6.0, 2.0 - 1.0 / 6.0, 2.0 + 1.0 / 6.0];
    assert_eq!(exps.len(), expected.len());
    for (a, b) in exps.iter().zip(expected) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["rows"].as_array().unwrap().len(), 4);
}

#[test]
fn compare_cluster_against_map() {
    let cluster = tmp("cmp-cluster.txt");
    let res = run(&[
        "simulate", "--model", "rotor", "--bc", "halfplane", "--N", "5000", "--out",
        cluster.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let report_path = tmp("cmp-report.json");
    let svg_path = tmp("cmp.svg");
    let res = run(&[
        "compare", "--cluster", cluster.to_str().unwrap(), "--map", "halfplane", "--n-boundary",
        "512", "--out", report_path.to_str().unwrap(), "--svg", svg_path.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    let sym = report["sym_diff"].as_f64().unwrap();
    assert!(sym > 0.0 && sym < 0.3, "plausible fit at N = 5000: {sym}");
    assert!(report["hausdorff"].as_f64().unwrap() > 0.0);
    let svg = fs::read_to_string(&svg_path).unwrap();
    assert_eq!(svg.matches("<polygon").count(), 2);
}

#[test]
fn compare_missing_cluster_exits_2() {
    let res = run(&[
        "compare", "--cluster", "/nonexistent/cluster.txt", "--map", "negaxis", "--out",
        "/dev/null",
    ]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn beurling_none_slope_is_one() {
    let out = tmp("beurling.csv");
    let res = run(&[
        "beurling", "--Ns", "100,200,400", "--seeds", "3", "--bc", "none", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("N,mean_emitted,stderr"));
    let slope_line = text.lines().last().unwrap();
    assert!(slope_line.starts_with("# slope 1.000000"), "{slope_line}");
}

#[test]
fn beurling_single_n_exits_2() {
    let res = run(&["beurling", "--Ns", "500", "--seeds", "3", "--out", "/dev/null"]);
    assert_eq!(res.status.code(), Some(2));
}
