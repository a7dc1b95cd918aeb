use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn pnl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pnl"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn simulate(dir: &Path, extra: &[&str]) -> (String, String) {
    let (c, g) = (path(dir, "corr.json"), path(dir, "gt.json"));
    let mut args = vec!["simulate", "--out", &c, "--gt", &g];
    args.extend_from_slice(extra);
    let out = pnl(&args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    (c, g)
}

fn json(p: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn simulate_is_byte_identical_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let flags = [
        "--lines",
        "100",
        "--outlier-ratio",
        "0.6",
        "--noise-deg",
        "0.5",
        "--seed",
        "42",
    ];
    let (c, g) = simulate(dir.path(), &flags);
    let first = (fs::read(&c).unwrap(), fs::read(&g).unwrap());
    simulate(dir.path(), &flags);
    assert_eq!(first, (fs::read(&c).unwrap(), fs::read(&g).unwrap()));

    let gt = json(&g);
    assert_eq!(gt["inlier_count"], 40);
    assert_eq!(gt["inlier_mask"].as_array().unwrap().len(), 100);
    assert_eq!(json(&c)["correspondences"].as_array().unwrap().len(), 100);
}

#[test]
fn invalid_flags_exit_with_usage_error() {
    let cases: [&[&str]; 6] = [
        &[
            "simulate",
            "--outlier-ratio",
            "1.5",
            "--out",
            "a",
            "--gt",
            "b",
        ],
        &["simulate", "--lines", "0", "--out", "a", "--gt", "b"],
        &[
            "solve",
            "--input",
            "x.json",
            "--out",
            "r.json",
            "--epsilon",
            "0",
        ],
        &["verify-bounds", "--trials", "0"],
        &["solve", "--input", "x.json"],
        &["frobnicate"],
    ];
    for args in cases {
        let out = pnl(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
    let out = pnl(&[
        "simulate",
        "--outlier-ratio",
        "1.5",
        "--out",
        "a",
        "--gt",
        "b",
    ]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--outlier-ratio"));
}

#[test]
fn bad_input_files_exit_with_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let r = path(dir.path(), "r.json");
    let missing = path(dir.path(), "missing.json");
    assert_eq!(
        pnl(&["solve", "--input", &missing, "--out", &r])
            .status
            .code(),
        Some(1)
    );

    let corrupt = path(dir.path(), "corrupt.json");
    fs::write(
        &corrupt,
        "{\n  \"correspondences\": [\n    {\"v\": [1, 0, 0], \"n\": [0, 1,]}\n",
    )
    .unwrap();
    let out = pnl(&["solve", "--input", &corrupt, "--out", &r]);
    assert_eq!(out.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("corrupt.json:3:"), "{msg}");

    let empty = path(dir.path(), "empty.json");
    fs::write(&empty, r#"{"correspondences": []}"#).unwrap();
    assert_eq!(
        pnl(&["solve", "--input", &empty, "--out", &r])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn zero_noise_solve_recovers_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let (c, g) = simulate(
        dir.path(),
        &["--lines", "40", "--outlier-ratio", "0.5", "--seed", "11"],
    );
    let r = path(dir.path(), "r.json");
    let log = path(dir.path(), "nodes.csv");
    let (eps, min_edge) = (1e-6, 1e-3);
    let out = pnl(&[
        "solve",
        "--input",
        &c,
        "--out",
        &r,
        "--node-log",
        &log,
        "--epsilon",
        "1e-6",
        "--min-edge",
        "1e-3",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let res = json(&r);
    let gt = json(&g);
    assert!(res["consensus"].as_u64().unwrap() >= gt["inlier_count"].as_u64().unwrap());
    assert_eq!(res["gap"], 0);
    assert!(res["stats"]["time_ms"].as_f64().unwrap() > 0.0);

    let q = |v: &Value| -> Vec<f64> {
        v["rotation"]["matrix"]
            .as_array()
            .unwrap()
            .iter()
            .flat_map(|row| row.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()))
            .collect()
    };
    let (a, b) = (q(&res), q(&gt));
    // angle of a^T b from its trace
    let trace: f64 = (0..3)
        .map(|i| (0..3).map(|k| a[k * 3 + i] * b[k * 3 + i]).sum::<f64>())
        .sum();
    let err = ((trace - 1.0) / 2.0).clamp(-1.0, 1.0).acos();
    assert!(err <= 2.0 * min_edge + eps, "rotation error {err}");

    let csv = fs::read_to_string(&log).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("node,depth,alpha_lo,alpha_hi,phi_lo,phi_hi,lower,upper,t_ms")
    );
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first.len(), 9);
    assert_eq!(first[0], "1");
    assert_eq!(first[7], "40");
}

#[test]
fn solve_is_deterministic_across_reruns_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let (c, _) = simulate(
        dir.path(),
        &[
            "--lines",
            "30",
            "--outlier-ratio",
            "0.3",
            "--noise-deg",
            "0.1",
            "--seed",
            "5",
        ],
    );
    let run = |name: &str, workers: &str| {
        let r = path(dir.path(), name);
        let log = path(dir.path(), &format!("{name}.csv"));
        let out = pnl(&[
            "solve",
            "--input",
            &c,
            "--out",
            &r,
            "--node-log",
            &log,
            "--epsilon",
            "0.005",
            "--workers",
            workers,
            "--no-timing",
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        (fs::read(&r).unwrap(), fs::read(&log).unwrap())
    };
    let a = run("a.json", "1");
    assert_eq!(a, run("b.json", "1"));
    assert_eq!(a, run("c.json", "4"));
}

#[test]
fn pixel_line_input_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let c = path(dir.path(), "pix.json");
    // lines x = 320 and y = 240 through the principal point, seen under the identity rotation
    fs::write(
        &c,
        r#"{"K": [[500, 0, 320], [0, 500, 240], [0, 0, 1]],
            "correspondences": [
              {"v": [0, 1, 0], "abc": [1, 0, -320]},
              {"v": [1, 0, 0], "abc": [0, 1, -240]},
              {"v": [0, 0, 1], "n": [1, 0, 0]}
            ]}"#,
    )
    .unwrap();
    let r = path(dir.path(), "r.json");
    let out = pnl(&["solve", "--input", &c, "--out", &r]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(json(&r)["consensus"], 3);
}

#[test]
fn verify_bounds_reports_worst_offenders() {
    let out = pnl(&[
        "verify-bounds",
        "--trials",
        "50",
        "--grid",
        "200",
        "--seed",
        "7",
    ]);
    assert!(out.status.success());
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["passed"], true);
    assert!(report["max_violation"].as_f64().unwrap() <= 1e-9);
    for case in ["h1_lo", "h1_hi", "h2_lo", "h2_hi"] {
        let worst = &report[case]["worst"];
        assert!(worst["cube"]["alpha_lo"].is_number(), "{case}");
        assert!(worst["v"].is_array() && worst["n"].is_array());
        assert!(worst["bound"].is_number() && worst["oracle"].is_number());
    }
}

#[test]
fn bench_prints_one_row_per_run() {
    let out = pnl(&[
        "bench",
        "--lines",
        "20",
        "--runs",
        "3",
        "--outlier-ratio",
        "0.2",
        "--epsilon",
        "1e-4",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("seed,lines,"));
}
