//! End-to-end tests of the ftdsim binary: exit codes, artifact
//! layout, reproducibility, and agreement with closed-form onsets.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ftdsim::channels::swap_operator;
use ftdsim::ftd::{verify_witness_intervals, Dynamics, Method};
use ftdsim::io::report_from_json;
use ftdsim::states::{DensityOperator, StateTolerance};
use ftdsim::tensor::BipartiteDims;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ftdsim"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn summary(dir: &Path) -> String {
    fs::read_to_string(dir.join("summary.txt")).expect("summary.txt exists")
}

#[test]
fn depolarizing_bell_reports_the_ln3_onset() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("artifacts");
    let out = run(&[
        "simulate",
        "depolarizing-bell",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let table = summary(&out_dir);
    assert!(table.contains("bell-phi_plus\t1.098612\tftd"), "table: {table}");
    let csv = fs::read_to_string(out_dir.join("state-0-trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,tr,purity,lambda_minus,negativity\n"));
    assert!(out_dir.join("state-0-report.json").exists());
}

#[test]
fn local_rotations_report_no_ftd_for_every_state() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("artifacts");
    let out = run(&[
        "simulate",
        "local-rotations",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let table = summary(&out_dir);
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    for row in rows {
        assert!(row.ends_with("\t-\tno_ftd_found"), "row: {row}");
    }
    assert!(!out_dir.join("state-0-report.json").exists());
}

#[test]
fn sudden_death_and_dephasing_onsets_match_closed_forms() {
    let tmp = tempfile::tempdir().unwrap();
    let damping = tmp.path().join("damping");
    let out = run(&[
        "simulate",
        "amplitude-damping-sudden-death",
        "--out-dir",
        damping.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    // ln(3/2) = 0.405465...
    assert!(summary(&damping).contains("\t0.405465\tftd"));
    let dephasing = tmp.path().join("dephasing");
    let out = run(&[
        "simulate",
        "dephasing-witness",
        "--out-dir",
        dephasing.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert!(summary(&dephasing).contains("\t0.750000\tftd"));
}

#[test]
fn repeated_runs_emit_byte_identical_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = run(&[
            "simulate",
            "partial-swap",
            "--seed",
            "9",
            "--out-dir",
            dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "stderr: {}", stderr(&out));
    }
    let mut names: Vec<String> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert!(!names.is_empty());
    for name in names {
        let left = fs::read(a.join(&name)).unwrap();
        let right = fs::read(b.join(&name)).unwrap();
        assert_eq!(left, right, "artifact {name} differs between runs");
    }
}

#[test]
fn emitted_reports_verify_after_reload() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("artifacts");
    let out = run(&[
        "simulate",
        "partial-swap",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = fs::read_to_string(out_dir.join("state-0-report.json")).unwrap();
    let report = report_from_json(&text).unwrap();
    assert_eq!(report.method, Method::Scan);
    assert_eq!(report.trajectory_csv_path, "state-0-trajectory.csv");
    assert_eq!(report.intervals.len(), 1);
    let iv = &report.intervals[0];
    // Closed window at pi/4 -+ asin(1/4)/2 under the swap flow.
    let half = (0.25f64).asin() / 2.0;
    let center = std::f64::consts::FRAC_PI_4;
    assert!((iv.start - (center - half)).abs() <= 1e-4, "start {}", iv.start);
    assert!((iv.end - (center + half)).abs() <= 1e-4, "end {}", iv.end);
    assert!(!iv.open_ended);
    // Re-load the witness and re-check the intervals against freshly
    // constructed dynamics.
    let dims = BipartiteDims::new(2, 2).unwrap();
    let swap = swap_operator(dims).unwrap();
    let dynamics =
        Dynamics::hamiltonian_flow(&swap, dims, std::f64::consts::FRAC_PI_2).unwrap();
    let witness =
        DensityOperator::with_tolerance(report.witness, dims, StateTolerance::default())
            .unwrap();
    assert!(verify_witness_intervals(&dynamics, &witness, &report.intervals).unwrap());
}

#[test]
fn witness_subcommand_synthesizes_for_the_cnot_pulse() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("artifacts");
    let out = run(&[
        "witness",
        "cnot-pulse",
        "--t",
        "1.0",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let printed = stdout(&out);
    assert!(printed.contains("method: closed_witness"), "stdout: {printed}");
    assert!(printed.contains("witness_lambda_minus: -0.250000000"));
    let text = fs::read_to_string(out_dir.join("witness-report.json")).unwrap();
    let report = report_from_json(&text).unwrap();
    assert_eq!(report.method, Method::ClosedWitness);
    assert!(out_dir.join("witness-trajectory.csv").exists());
    assert!(out_dir.join("witness-state.txt").exists());
}

#[test]
fn witness_subcommand_declines_local_flows() {
    let out = run(&["witness", "local-rotations"]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("not applicable"));
}

#[test]
fn classify_recognizes_the_three_unitary_classes() {
    let tmp = tempfile::tempdir().unwrap();
    let cnot = tmp.path().join("cnot.txt");
    fs::write(&cnot, "4 4\n1 0 0 0\n0 1 0 0\n0 0 0 1\n0 0 1 0\n").unwrap();
    let out = run(&["classify", cnot.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("class: not_product_preserving"));

    let swap = tmp.path().join("swap.txt");
    fs::write(&swap, "4 4\n1 0 0 0\n0 0 1 0\n0 1 0 0\n0 0 0 1\n").unwrap();
    let out = run(&["classify", swap.to_str().unwrap()]);
    assert!(out.status.success());
    let printed = stdout(&out);
    assert!(printed.contains("class: local_swap"), "stdout: {printed}");
    assert!(printed.contains("factor_a:"));

    let s = "0.7071067811865476";
    let local = tmp.path().join("local.txt");
    fs::write(
        &local,
        format!("4 4\n{s} 0 {s} 0\n0 {s} 0 {s}\n{s} 0 -{s} 0\n0 {s} 0 -{s}\n"),
    )
    .unwrap();
    let out = run(&["classify", local.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("class: local"));
}

#[test]
fn classify_exit_codes_distinguish_parse_and_unitarity() {
    let tmp = tempfile::tempdir().unwrap();
    let garbage = tmp.path().join("garbage.txt");
    fs::write(&garbage, "not a matrix").unwrap();
    let out = run(&["classify", garbage.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));

    let missing = tmp.path().join("does-not-exist.txt");
    let out = run(&["classify", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let skewed = tmp.path().join("skewed.txt");
    fs::write(&skewed, "4 4\n1 0 0 0\n0 1 0 0\n0 0 1 0\n0 0 0 2\n").unwrap();
    let out = run(&["classify", skewed.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4), "stderr: {}", stderr(&out));
}

#[test]
fn classify_reports_channel_predicates() {
    let tmp = tempfile::tempdir().unwrap();
    let s = "0.7071067811865476";
    let channel = tmp.path().join("dephasing.json");
    fs::write(
        &channel,
        format!(
            "{{\"dims\": [2, 2], \"kraus\": [\"4 4\\n{s} 0 0 0\\n0 {s} 0 0\\n0 0 {s} 0\\n0 0 0 {s}\\n\", \"4 4\\n{s} 0 0 0\\n0 {s} 0 0\\n0 0 -{s} 0\\n0 0 0 -{s}\\n\"]}}"
        ),
    )
    .unwrap();
    let out = run(&["classify", "--channel", channel.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let printed = stdout(&out);
    assert!(printed.contains("unital: true"));
    assert!(printed.contains("pure_state_preserving: false"));
    assert!(printed.contains("unitary_equivalent: no"));
}

#[test]
fn malformed_configs_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let unknown = tmp.path().join("unknown.json");
    fs::write(
        &unknown,
        r#"{"version": 1, "name": "x", "dynamics": {"type": "depolarizing", "rate": 1.0},
           "initial_states": [{"type": "bell", "which": "phi_plus"}], "horizon": 1.0,
           "extra": true}"#,
    )
    .unwrap();
    let out = run(&["simulate", unknown.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("extra"), "stderr: {}", stderr(&out));

    let version = tmp.path().join("version.json");
    fs::write(
        &version,
        r#"{"version": 7, "name": "x", "dynamics": {"type": "depolarizing", "rate": 1.0},
           "initial_states": [{"type": "bell", "which": "phi_plus"}], "horizon": 1.0}"#,
    )
    .unwrap();
    let out = run(&["simulate", version.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("version"));

    let dims = tmp.path().join("dims.json");
    fs::write(
        &dims,
        r#"{"version": 1, "name": "x",
           "dynamics": {"type": "semigroup", "dims": [1, 2],
                        "hamiltonian": "2 2\n0 0\n0 0", "jumps": []},
           "initial_states": [{"type": "bell", "which": "phi_plus"}], "horizon": 1.0}"#,
    )
    .unwrap();
    let out = run(&["simulate", dims.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("dims"), "stderr: {}", stderr(&out));
}

#[test]
fn config_files_compose_states_and_respect_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("scenario.json");
    fs::write(
        &config,
        r#"{"version": 1, "name": "mixed-start",
           "dynamics": {"type": "depolarizing", "rate": 1.0},
           "initial_states": [
             {"type": "isotropic", "lambda": 0.5,
              "of": {"type": "bell", "which": "psi_minus"}},
             {"type": "pure", "dims": [2, 2],
              "amplitudes": [[1, 0], [0, 0], [0, 0], [0, 0]]}],
           "horizon": 2.0}"#,
    )
    .unwrap();
    let out_dir = tmp.path().join("artifacts");
    let out = run(&[
        "simulate",
        config.to_str().unwrap(),
        "--samples",
        "48",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let table = summary(&out_dir);
    // Half-mixed psi_minus crosses at ln(3/2); |00> is never entangled.
    assert!(table.contains("\t0.405465\tftd"), "table: {table}");
    assert!(table.contains("\t-\tnot_entangled_initially"), "table: {table}");
}

#[test]
fn sweep_emits_one_row_per_value_and_state() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("artifacts");
    let out = run(&[
        "sweep",
        "depolarizing-bell",
        "--param",
        "samples",
        "--range",
        "32:64:2",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let csv = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "param,value,index,label,onset,verdict");
    assert_eq!(lines.len(), 3);
    for line in &lines[1..] {
        assert!(line.starts_with("samples,"), "line: {line}");
        assert!(line.ends_with(",ftd"), "line: {line}");
    }

    let out = run(&[
        "sweep",
        "depolarizing-bell",
        "--param",
        "nonsense",
        "--range",
        "0:1:2",
    ]);
    assert_eq!(out.status.code(), Some(2));
}
