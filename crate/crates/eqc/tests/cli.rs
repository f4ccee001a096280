//! The `eqc` binary: exit codes, output schemas and configuration layering.

use std::path::Path;
use std::process::{Command, Output};

fn eqc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eqc"))
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(code(&eqc(&["--help"])), 0);
    assert_eq!(code(&eqc(&["--version"])), 0);
    assert_eq!(code(&eqc(&["simulate", "--help"])), 0);
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &["simulate", "--p", "0.5"][..],
        &["simulate", "--kind", "square"],
        &["simulate", "--kind", "square", "--p", "0.4..0.2"],
        &["simulate", "--kind", "square", "--p", "2", "--L", "6"],
        &[
            "simulate", "--kind", "square", "--p", "0.5", "--mode", "p2p", "--k", "3", "--L", "6",
        ],
        &[
            "simulate", "--kind", "hexagon", "--p", "0.5", "--d", "2", "--L", "8", "--trials", "10",
        ],
        &[
            "transform",
            "--kind",
            "tdhex2sq",
            "--baseline",
            "dhex-joint",
        ],
        &["analytic", "--b", "4"],
        &["graph", "--kind", "square", "--d", "2"],
        &["theta", "--kind", "square", "--p", "0.5", "--trials", "0"],
    ] {
        let out = eqc(args);
        assert_eq!(
            code(&out),
            2,
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn runtime_errors_exit_1() {
    assert_eq!(code(&eqc(&["fit", "/nonexistent/curve.csv"])), 1);
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "x,mean\n1,0.5\n2,0.4\n").unwrap();
    assert_eq!(code(&eqc(&["fit", bad.to_str().unwrap()])), 1);
}

#[test]
fn simulate_csv_schema_and_provenance() {
    let out = eqc(&[
        "simulate", "--kind", "square", "--p", "0.6", "--d", "1..4", "--L", "10", "--trials",
        "500", "--seed", "7",
    ]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    for key in [
        "# L=10",
        "# seed=7",
        "# trials=500",
        "# p=0.6",
        "# streams=common",
    ] {
        assert!(text.lines().any(|l| l == key), "missing {key} in\n{text}");
    }
    assert!(text.starts_with("# eqc "));
    assert!(!text.contains("threads"));
    let rows = data_lines(&text);
    assert_eq!(rows[0], "x,mean,std_error,trials,N1");
    assert_eq!(rows.len(), 5);
    assert!(rows[1].starts_with("1.0,") && rows[1].ends_with(",500,4"));
    // the human-readable table goes to stderr when data goes to stdout
    assert!(String::from_utf8(out.stderr).unwrap().contains("EQC"));
}

#[test]
fn sweep_then_fit_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let curve = dir.path().join("curve.csv");
    let c = curve.to_str().unwrap();
    let sim = eqc(&[
        "simulate", "--kind", "square", "--p", "0.6", "--d", "1..8", "--L", "14", "--trials",
        "4000", "-o", c,
    ]);
    assert_eq!(code(&sim), 0);
    assert!(String::from_utf8(sim.stdout).unwrap().contains("EQC"));
    let fit = eqc(&["fit", c]);
    assert_eq!(code(&fit), 0, "{}", String::from_utf8_lossy(&fit.stderr));
    let report: serde_json::Value = serde_json::from_slice(&fit.stdout).unwrap();
    for key in ["E0", "C0", "gamma", "radius", "residual_rms", "flags"] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    let gamma = report["gamma"].as_f64().unwrap();
    assert!((report["radius"].as_f64().unwrap() - (1.0 / gamma + 0.5)).abs() < 1e-12);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "# small run\nkind = triangle\nL = 8\np = 0.5\nd = 3\ntrials = 300\nseed = 3\n",
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    let from_file = String::from_utf8(eqc(&["--config", cfg, "simulate"]).stdout).unwrap();
    assert!(from_file.contains("# kind=triangle") && from_file.contains("# trials=300"));
    let flagged =
        String::from_utf8(eqc(&["--config", cfg, "simulate", "--trials", "200"]).stdout).unwrap();
    assert!(flagged.contains("# trials=200") && flagged.contains("# L=8"));

    std::fs::write(Path::new(cfg), "colour = blue\n").unwrap();
    assert_eq!(
        code(&eqc(&[
            "--config", cfg, "simulate", "--kind", "square", "--p", "0.5"
        ])),
        2
    );
}

#[test]
fn p_sweep_json_output() {
    let out = eqc(&[
        "simulate", "--kind", "square", "--p", "0.5,1", "--d", "3", "--L", "8", "--trials", "200",
        "--format", "json",
    ]);
    assert_eq!(code(&out), 0);
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["provenance"]["x"], "p");
    assert_eq!(doc["rows"][1]["mean"], 1.0);
    assert_eq!(doc["rows"][1]["std_error"], 0.0);
}

#[test]
fn transform_reports_pairs_and_crossing() {
    let out = eqc(&[
        "transform",
        "--kind",
        "dhex2tri",
        "--p",
        "0.45,0.8",
        "--d",
        "3",
        "--L",
        "10",
        "--trials",
        "2000",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        data_lines(&text)[0],
        "p,eqc_original,eqc_transformed,diff,diff_stderr"
    );
    assert!(text.contains("# original=dhex-joint"));
    let said = String::from_utf8(out.stderr).unwrap();
    assert!(said.contains("crossing"), "{said}");
}

#[test]
fn analytic_and_graph_outputs() {
    let a =
        String::from_utf8(eqc(&["analytic", "--kind", "square", "--p", "0.3,1"]).stdout).unwrap();
    let rows = data_lines(&a);
    assert_eq!(rows[0], "p,e0,extrapolated");
    assert!(rows[1].starts_with("0.3,") && rows[1].ends_with(",true"));
    assert_eq!(rows[2], "1.0,1.0,false");

    let g = eqc(&[
        "graph", "--kind", "square", "--L", "4", "--p", "1", "--d", "2",
    ]);
    let doc: serde_json::Value = serde_json::from_slice(&g.stdout).unwrap();
    assert_eq!(doc["channels"]["value"], 4);
    assert_eq!(doc["channels"]["paths"].as_array().unwrap().len(), 4);
}
