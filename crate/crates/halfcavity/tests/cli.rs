//! End-to-end tests of the command-line interface: output formats,
//! round-trip precision, determinism across worker counts and exit codes.

use std::path::Path;
use std::process::{Command, Output};

use halfcavity::{amplitude_mos, default_horizon, nm_measure, ModelParams};

fn halfcavity(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_halfcavity"))
        .args(args)
        .env_remove("HALFCAVITY_WORKERS")
        .output()
        .expect("binary runs")
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 output")
}

type CsvDoc = (Vec<(String, String)>, Vec<String>, Vec<Vec<Option<f64>>>);

/// Split a CSV document into (meta map, header fields, data rows).
fn parse_csv(text: &str) -> CsvDoc {
    let mut meta = Vec::new();
    let mut headers = Vec::new();
    let mut rows = Vec::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("# ") {
            let (k, v) = rest.split_once(": ").expect("meta line");
            meta.push((k.to_string(), v.to_string()));
        } else if headers.is_empty() {
            headers = line.split(',').map(str::to_string).collect();
        } else {
            rows.push(
                line.split(',')
                    .map(|f| {
                        if f.is_empty() {
                            None
                        } else {
                            Some(f.parse::<f64>().expect("numeric field"))
                        }
                    })
                    .collect(),
            );
        }
    }
    (meta, headers, rows)
}

#[test]
fn amplitude_csv_round_trips_solver_values() {
    let out = halfcavity(&[
        "amplitude",
        "--gtd",
        "2",
        "--phi",
        "1.1",
        "--horizon",
        "9",
        "--mesh-per-delay",
        "32",
    ]);
    assert!(out.status.success());
    let (meta, headers, rows) = parse_csv(&stdout_str(&out));
    assert_eq!(
        headers,
        ["t_gamma", "eps_re", "eps_im", "eps_abs2", "eps_abs4"]
    );
    assert!(meta.iter().any(|(k, v)| k == "command" && v == "amplitude"));

    let params = ModelParams::dimensionless(2.0, 1.1).unwrap();
    let traj = amplitude_mos(&params, 9.0, 32).unwrap();
    assert_eq!(rows.len(), traj.len());
    for (row, (&t, &v)) in rows.iter().zip(traj.times.iter().zip(&traj.values)) {
        // 17 significant digits reproduce the exact bits.
        assert_eq!(row[0].unwrap().to_bits(), t.to_bits());
        assert_eq!(row[1].unwrap().to_bits(), v.re.to_bits());
        assert_eq!(row[2].unwrap().to_bits(), v.im.to_bits());
    }
}

#[test]
fn measure_json_matches_library() {
    let out = halfcavity(&["measure", "--gtd", "2", "--phi", "0", "--format", "json"]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(doc["meta"]["command"], "measure");
    assert_eq!(doc["meta"]["gtd"], "2");

    let params = ModelParams::dimensionless(2.0, 0.0).unwrap();
    let r = nm_measure(&params, default_horizon(&params), 512, 1e-6).unwrap();
    assert_eq!(
        doc["data"]["measure"].as_f64().unwrap().to_bits(),
        r.measure.to_bits()
    );
    assert_eq!(doc["data"]["markovian"], false);
    assert_eq!(
        doc["data"]["intervals"].as_array().unwrap().len(),
        r.intervals.len()
    );
}

#[test]
fn measure_markovian_point() {
    let out = halfcavity(&["measure", "--gtd", "0.05", "--phi", "3.14159"]);
    assert!(out.status.success());
    let text = stdout_str(&out);
    assert!(text.contains("# verdict: markovian"));
    assert!(text.contains("# measure: 0.0000000000000000e0"));
}

#[test]
fn sweep_output_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let run = |workers: &str, path: &Path| {
        let out = halfcavity(&[
            "sweep",
            "--phi-points",
            "5",
            "--gtd-min",
            "0.5",
            "--gtd-max",
            "3",
            "--gtd-points",
            "4",
            "--mesh-per-delay",
            "128",
            "--workers",
            workers,
            "--output",
            path.to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    };
    let p1 = dir.path().join("w1.csv");
    let p2 = dir.path().join("w2.csv");
    run("1", &p1);
    run("2", &p2);
    let b1 = std::fs::read(&p1).unwrap();
    let b2 = std::fs::read(&p2).unwrap();
    assert!(!b1.is_empty());
    assert_eq!(b1, b2, "byte-identical output regardless of worker count");
}

#[test]
fn sweep_csv_matrix_shape() {
    let out = halfcavity(&[
        "sweep",
        "--phi-points",
        "3",
        "--gtd-min",
        "1",
        "--gtd-max",
        "2",
        "--gtd-points",
        "2",
        "--mesh-per-delay",
        "64",
    ]);
    assert!(out.status.success());
    let (_, headers, rows) = parse_csv(&stdout_str(&out));
    assert_eq!(headers.len(), 4); // gtd + 3 phase columns
    assert_eq!(headers[0], "gtd");
    assert!(headers[1].starts_with("phi_0.0"));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], Some(1.0));
    assert_eq!(rows[1][0], Some(2.0));
    // Symmetric first/last phase columns (0 and 2pi are the same dynamics).
    for row in &rows {
        assert_eq!(row[1], row[3]);
    }
}

#[test]
fn threshold_list_and_expected_values() {
    let out = halfcavity(&[
        "threshold",
        "--phi-points",
        "3",
        "--list",
        "0,1.5708,3.14159",
    ]);
    assert!(out.status.success());
    let (_, headers, rows) = parse_csv(&stdout_str(&out));
    assert_eq!(headers, ["phi", "critical_gtd"]);
    assert_eq!(rows.len(), 3);
    let zero = rows[0][1].unwrap();
    assert!(zero <= 0.01, "threshold at 0 is {zero}");
    let quarter = rows[1][1].unwrap();
    assert!(
        (quarter - 1.4).abs() <= 0.1,
        "threshold at pi/2 is {quarter}"
    );
    let pi_val = rows[2][1].unwrap();
    assert!(pi_val >= 0.0);
}

#[test]
fn threshold_list_count_mismatch_is_usage_error() {
    let out = halfcavity(&["threshold", "--phi-points", "4", "--list", "0,1.5708"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn spectrum_dimensionless_columns() {
    let out = halfcavity(&[
        "spectrum",
        "--gamma",
        "2.5",
        "--td",
        "0.8",
        "--phi",
        "3.141592653589793",
        "--delta-min",
        "0",
        "--delta-max",
        "1",
        "--points",
        "3",
    ]);
    assert!(out.status.success());
    let (_, headers, rows) = parse_csv(&stdout_str(&out));
    assert_eq!(headers, ["delta_over_gamma", "j_pi_over_gamma"]);
    // At resonance and phase pi the atom sits at an antinode: J pi / gamma = 1.
    assert_eq!(rows[0][0], Some(0.0));
    assert!((rows[0][1].unwrap() - 1.0).abs() < 1e-14);
}

#[test]
fn usage_errors_exit_2() {
    // Unknown flag.
    assert_eq!(
        halfcavity(&["measure", "--gtd", "1", "--frobnicate"])
            .status
            .code(),
        Some(2)
    );
    // Missing parameter point.
    assert_eq!(halfcavity(&["measure"]).status.code(), Some(2));
    // Conflicting parameter conventions.
    assert_eq!(
        halfcavity(&["measure", "--gtd", "1", "--gamma", "1", "--td", "1"])
            .status
            .code(),
        Some(2)
    );
    // Invalid scan range.
    assert_eq!(
        halfcavity(&[
            "spectrum",
            "--gtd",
            "1",
            "--delta-min",
            "2",
            "--delta-max",
            "-2"
        ])
        .status
        .code(),
        Some(2)
    );
    // Unwritable output path.
    assert_eq!(
        halfcavity(&[
            "measure",
            "--gtd",
            "1",
            "--output",
            "/nonexistent-dir/x.csv"
        ])
        .status
        .code(),
        Some(2)
    );
    // Negative model parameter.
    assert_eq!(
        halfcavity(&["measure", "--gtd", "-1"]).status.code(),
        Some(2)
    );
}

#[test]
fn convergence_failure_exits_1_unless_allowed() {
    // Near-bound-state phase with a tiny starting horizon: the doubling
    // budget cannot certify the tail. The loose tolerance avoids the early
    // non-Markovian exit, forcing a full (failed) certification.
    let args = [
        "measure",
        "--gtd",
        "1",
        "--phi",
        "0.01",
        "--horizon",
        "0.01",
        "--classify-tol",
        "0.5",
        "--mesh-per-delay",
        "64",
    ];
    let out = halfcavity(&args);
    assert_eq!(
        out.status.code(),
        Some(1),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("not converged"));
    // Output is still written (flagged), and --allow-partial downgrades the
    // exit code.
    assert!(stdout_str(&out).contains("# converged: false"));
    let mut permissive: Vec<&str> = args.to_vec();
    permissive.push("--allow-partial");
    assert_eq!(halfcavity(&permissive).status.code(), Some(0));
}

#[test]
fn workers_env_variable_is_honored() {
    let out = Command::new(env!("CARGO_BIN_EXE_halfcavity"))
        .args([
            "sweep",
            "--phi-points",
            "3",
            "--gtd-min",
            "1",
            "--gtd-max",
            "2",
            "--gtd-points",
            "2",
            "--mesh-per-delay",
            "64",
        ])
        .env("HALFCAVITY_WORKERS", "1")
        .output()
        .expect("binary runs");
    assert!(out.status.success());
}

#[test]
fn json_sweep_document_shape() {
    let out = halfcavity(&[
        "sweep",
        "--phi-points",
        "3",
        "--gtd-min",
        "1",
        "--gtd-max",
        "2",
        "--gtd-points",
        "2",
        "--mesh-per-delay",
        "64",
        "--format",
        "json",
    ]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(doc["data"]["phi_values"].as_array().unwrap().len(), 3);
    assert_eq!(doc["data"]["gtd_values"].as_array().unwrap().len(), 2);
    assert_eq!(doc["data"]["measures"][0].as_array().unwrap().len(), 3);
    assert_eq!(doc["data"]["converged"][1][2], true);
}
