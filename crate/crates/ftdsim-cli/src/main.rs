//! Command-line front end: runs disentanglement scenarios, classifies
//! unitaries and channels, synthesizes witness states, and sweeps
//! scenario parameters.
//!
//! Exit codes: 0 success; 2 configuration or parse error; 3 numerical
//! invariant violation at run time; 4 non-unitary input where a
//! unitary was required; 1 artifact write failure.

mod scenario;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use ftdsim::channels::{
    classify_product_preserving_unitary, is_pure_state_preserving,
    reconstruct_unitary_from_channel, UnitaryClass,
};
use ftdsim::entanglement::{classify_separability, Classification};
use ftdsim::ftd::{
    detect_ftd, entanglement_trajectory, synthesize_witness, verify_ftd_report, Dynamics,
    EntanglementTrajectory, FtdOutcome, FtdReport, WitnessOutcome,
};
use ftdsim::io;
use ftdsim::states::DensityOperator;
use ftdsim::tensor::BipartiteDims;

use scenario::{resolve, Overrides, ResolvedScenario};

/// Trials used by the randomized purity-preservation predicate.
const PURITY_TRIALS: usize = 64;
/// Default seed for the purity-preservation predicate.
const PURITY_SEED: u64 = 0x5EED;

#[derive(Parser)]
#[command(
    name = "ftdsim",
    version,
    about = "Finite time disentanglement of bipartite open-system dynamics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Default)]
struct CommonFlags {
    /// Seed forwarded to randomized searches.
    #[arg(long)]
    seed: Option<u64>,
    /// Integration step for semigroup dynamics.
    #[arg(long)]
    dt: Option<f64>,
    /// Grid samples over the horizon.
    #[arg(long)]
    samples: Option<usize>,
    /// Directory for emitted artifacts.
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario: trajectory CSVs, reports, and a summary table.
    Simulate {
        /// Builtin scenario name or path to a JSON config.
        config: String,
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Classify a unitary matrix file, or report channel predicates.
    Classify {
        /// Matrix text file (default) or channel JSON (--channel).
        file: PathBuf,
        /// Treat the input as a channel JSON file.
        #[arg(long)]
        channel: bool,
        /// Bipartite split as AxB, e.g. 2x3; inferred when square.
        #[arg(long)]
        dims: Option<String>,
        /// Seed for the randomized purity predicate.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Synthesize a witness state for a scenario's dynamics.
    Witness {
        /// Builtin scenario name or path to a JSON config.
        config: String,
        /// Time at which to take the channel; defaults to the horizon.
        #[arg(long)]
        t: Option<f64>,
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Re-run a scenario over a grid of one parameter.
    Sweep {
        /// Builtin scenario name or path to a JSON config.
        config: String,
        /// Parameter to vary: horizon, dt, samples, or seed.
        #[arg(long)]
        param: String,
        /// Grid as start:end:count, e.g. 0.5:2.0:4.
        #[arg(long)]
        range: String,
        #[command(flatten)]
        flags: CommonFlags,
    },
}

/// CLI failure carrying its exit code.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical(String),
    NotUnitary(String),
    Artifact(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::NotUnitary(_) => 4,
            Failure::Artifact(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m)
            | Failure::Numerical(m)
            | Failure::NotUnitary(m)
            | Failure::Artifact(m) => m,
        }
    }
}

fn num<T, E: std::fmt::Display>(r: Result<T, E>, context: &str) -> Result<T, Failure> {
    r.map_err(|e| Failure::Numerical(format!("{context}: {e}")))
}

fn art<T, E: std::fmt::Display>(r: Result<T, E>, context: &str) -> Result<T, Failure> {
    r.map_err(|e| Failure::Artifact(format!("{context}: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Simulate { config, flags } => cmd_simulate(&config, &flags.into()),
        Command::Classify {
            file,
            channel,
            dims,
            seed,
        } => cmd_classify(&file, channel, dims.as_deref(), seed),
        Command::Witness { config, t, flags } => cmd_witness(&config, t, &flags.into()),
        Command::Sweep {
            config,
            param,
            range,
            flags,
        } => cmd_sweep(&config, &param, &range, &flags.into()),
    }
}

impl From<CommonFlags> for Overrides {
    fn from(f: CommonFlags) -> Self {
        Overrides {
            seed: f.seed,
            dt: f.dt,
            samples: f.samples,
            out_dir: f.out_dir,
            horizon: None,
        }
    }
}

/// Result of running one initial state: the sampled trajectory and, for
/// entangled starts, the detection outcome.
struct StateRun {
    label: String,
    trajectory: EntanglementTrajectory,
    outcome: Option<FtdOutcome>,
}

impl StateRun {
    fn onset(&self) -> Option<f64> {
        match &self.outcome {
            Some(FtdOutcome::Ftd(report)) => report.intervals.first().map(|iv| iv.start),
            _ => None,
        }
    }

    fn verdict(&self) -> &'static str {
        match &self.outcome {
            Some(FtdOutcome::Ftd(_)) => "ftd",
            Some(FtdOutcome::NoFtdFound) => "no_ftd_found",
            None => "not_entangled_initially",
        }
    }
}

fn run_state(
    dynamics: &Dynamics,
    label: &str,
    rho0: &DensityOperator,
    samples: usize,
) -> Result<StateRun, Failure> {
    let trajectory = num(
        entanglement_trajectory(dynamics, rho0, samples),
        &format!("state {label}"),
    )?;
    let entangled = classify_separability(rho0).classification == Classification::Entangled;
    let outcome = if entangled {
        Some(num(detect_ftd(dynamics, rho0, samples), &format!("state {label}"))?)
    } else {
        None
    };
    if let Some(FtdOutcome::Ftd(report)) = &outcome {
        let ok = num(verify_ftd_report(dynamics, report), &format!("state {label}"))?;
        if !ok {
            return Err(Failure::Numerical(format!(
                "state {label}: detected intervals failed re-simulation checks"
            )));
        }
    }
    Ok(StateRun {
        label: label.to_string(),
        trajectory,
        outcome,
    })
}

fn summary_table(runs: &[StateRun]) -> String {
    let mut out = String::from("index\tlabel\tonset\tverdict\n");
    for (i, run) in runs.iter().enumerate() {
        let onset = run
            .onset()
            .map(|a| format!("{a:.6}"))
            .unwrap_or_else(|| "-".into());
        let _ = writeln!(out, "{i}\t{}\t{onset}\t{}", run.label, run.verdict());
    }
    out
}

fn cmd_simulate(config: &str, ov: &Overrides) -> Result<(), Failure> {
    let scn = resolve(config, ov)?;
    let runs: Vec<StateRun> = scn
        .initial_states
        .par_iter()
        .map(|(label, rho0)| run_state(&scn.dynamics, label, rho0, scn.samples))
        .collect::<Result<_, _>>()?;
    art(fs::create_dir_all(&scn.out_dir), "out dir")?;
    for (i, run) in runs.iter().enumerate() {
        let csv_name = format!("state-{i}-trajectory.csv");
        let csv = io::trajectory_to_csv(&run.trajectory);
        art(
            fs::write(scn.out_dir.join(&csv_name), csv),
            &format!("writing {csv_name}"),
        )?;
        if let Some(FtdOutcome::Ftd(report)) = &run.outcome {
            let json = io::report_to_json(report, &csv_name);
            let json_name = format!("state-{i}-report.json");
            art(
                fs::write(scn.out_dir.join(&json_name), json),
                &format!("writing {json_name}"),
            )?;
        }
    }
    let table = summary_table(&runs);
    art(fs::write(scn.out_dir.join("summary.txt"), &table), "writing summary.txt")?;
    println!(
        "scenario {}: horizon {}, samples {}, seed {}, artifacts in {}",
        scn.name,
        scn.dynamics.horizon(),
        scn.samples,
        scn.seed,
        scn.out_dir.display()
    );
    print!("{table}");
    Ok(())
}

fn parse_dims_flag(raw: Option<&str>, total: usize) -> Result<BipartiteDims, Failure> {
    if let Some(raw) = raw {
        let (a, b) = raw
            .split_once(['x', 'X'])
            .ok_or_else(|| Failure::Config(format!("--dims: expected AxB, got {raw:?}")))?;
        let d_a: usize = a
            .trim()
            .parse()
            .map_err(|_| Failure::Config(format!("--dims: bad factor {a:?}")))?;
        let d_b: usize = b
            .trim()
            .parse()
            .map_err(|_| Failure::Config(format!("--dims: bad factor {b:?}")))?;
        let dims = BipartiteDims::new(d_a, d_b)
            .map_err(|e| Failure::Config(format!("--dims: {e}")))?;
        if dims.total() != total {
            return Err(Failure::Config(format!(
                "--dims: {d_a} x {d_b} = {} does not match matrix size {total}",
                dims.total()
            )));
        }
        return Ok(dims);
    }
    let root = (total as f64).sqrt().round() as usize;
    if root >= 2 && root * root == total {
        Ok(BipartiteDims::new(root, root).map_err(|e| Failure::Config(e.to_string()))?)
    } else {
        Err(Failure::Config(format!(
            "matrix size {total} has no balanced bipartite split; pass --dims AxB"
        )))
    }
}

fn cmd_classify(
    file: &Path,
    channel_mode: bool,
    dims_flag: Option<&str>,
    seed: Option<u64>,
) -> Result<(), Failure> {
    let text = fs::read_to_string(file)
        .map_err(|e| Failure::Config(format!("{}: {e}", file.display())))?;
    if channel_mode {
        let ch = io::channel_from_json(&text)
            .map_err(|e| Failure::Config(format!("{}: {e}", file.display())))?;
        let dims = ch.dims();
        println!("input: channel on dimension {}", ch.dim());
        if let Some(d) = dims {
            println!("dims: {} x {}", d.d_a(), d.d_b());
        }
        println!("kraus_operators: {}", ch.kraus().len());
        println!("trace_preserving: true (validated on load)");
        let defect = ch.unitality_defect();
        println!("unital: {} (defect {defect:.3e})", ch.is_unital());
        let seed = seed.unwrap_or(PURITY_SEED);
        let purity = is_pure_state_preserving(&ch, PURITY_TRIALS, seed);
        println!(
            "pure_state_preserving: {} ({PURITY_TRIALS} random trials, seed {seed})",
            purity.preserving
        );
        if let Some(w) = &purity.witness {
            println!("purity_witness: image purity {:.6}", w.purity);
        }
        match reconstruct_unitary_from_channel(&ch) {
            Ok(u) => {
                println!("unitary_equivalent: yes");
                if let Some(d) = dims {
                    let class = num(
                        classify_product_preserving_unitary(&u, d),
                        "classifying reconstructed unitary",
                    )?;
                    println!("reconstructed_class: {}", class.tag());
                }
            }
            Err(e) => println!("unitary_equivalent: no ({e})"),
        }
        return Ok(());
    }
    let m = io::parse_matrix(&text)
        .map_err(|e| Failure::Config(format!("{}: {e}", file.display())))?;
    if !m.is_square() {
        return Err(Failure::Config(format!(
            "{}: matrix is {} x {}, unitary classification needs square",
            file.display(),
            m.rows(),
            m.cols()
        )));
    }
    let dims = parse_dims_flag(dims_flag, m.rows())?;
    if let Err(e) = m.check_unitary(1e-9) {
        return Err(Failure::NotUnitary(format!("{}: {e}", file.display())));
    }
    let class = num(
        classify_product_preserving_unitary(&m, dims),
        "classification",
    )?;
    println!("dims: {} x {}", dims.d_a(), dims.d_b());
    println!("class: {}", class.tag());
    match class {
        UnitaryClass::Local { factor_a, factor_b }
        | UnitaryClass::LocalSwap { factor_a, factor_b } => {
            println!("factor_a:\n{}", io::format_matrix(&factor_a));
            println!("factor_b:\n{}", io::format_matrix(&factor_b));
        }
        UnitaryClass::NotProductPreserving => {}
    }
    Ok(())
}

fn cmd_witness(config: &str, t: Option<f64>, ov: &Overrides) -> Result<(), Failure> {
    let scn = resolve(config, ov)?;
    let t_bar = t.unwrap_or_else(|| scn.dynamics.horizon());
    let outcome = num(
        synthesize_witness(&scn.dynamics, t_bar, scn.samples),
        "witness synthesis",
    )?;
    match outcome {
        WitnessOutcome::NotApplicable { reason } => {
            println!("witness not applicable at t = {t_bar}: {reason}");
            Ok(())
        }
        WitnessOutcome::Report(report) => {
            let ok = num(verify_ftd_report(&scn.dynamics, &report), "verification")?;
            if !ok {
                return Err(Failure::Numerical(
                    "synthesized report failed re-simulation checks".into(),
                ));
            }
            write_witness_artifacts(&scn, &report)?;
            let verdict = classify_separability(&report.witness_state);
            println!("method: {}", report.method.as_str());
            println!("t: {t_bar}");
            println!("witness_lambda_minus: {:.9}", verdict.lambda_minus);
            for iv in &report.intervals {
                let end = if iv.open_ended {
                    format!("{:.6}+ (open ended)", iv.end)
                } else {
                    format!("{:.6}", iv.end)
                };
                println!("interval: {:.6} .. {end}", iv.start);
            }
            println!("artifacts: {}", scn.out_dir.display());
            Ok(())
        }
    }
}

fn write_witness_artifacts(scn: &ResolvedScenario, report: &FtdReport) -> Result<(), Failure> {
    art(fs::create_dir_all(&scn.out_dir), "out dir")?;
    let csv_name = "witness-trajectory.csv";
    art(
        fs::write(
            scn.out_dir.join(csv_name),
            io::trajectory_to_csv(&report.trajectory),
        ),
        "writing witness-trajectory.csv",
    )?;
    art(
        fs::write(
            scn.out_dir.join("witness-report.json"),
            io::report_to_json(report, csv_name),
        ),
        "writing witness-report.json",
    )?;
    art(
        fs::write(
            scn.out_dir.join("witness-state.txt"),
            io::format_density(&report.witness_state),
        ),
        "writing witness-state.txt",
    )?;
    Ok(())
}

fn parse_range(raw: &str) -> Result<(f64, f64, usize), Failure> {
    let parts: Vec<&str> = raw.split(':').collect();
    if parts.len() != 3 {
        return Err(Failure::Config(format!(
            "--range: expected start:end:count, got {raw:?}"
        )));
    }
    let start: f64 = parts[0]
        .parse()
        .map_err(|_| Failure::Config(format!("--range: bad start {:?}", parts[0])))?;
    let end: f64 = parts[1]
        .parse()
        .map_err(|_| Failure::Config(format!("--range: bad end {:?}", parts[1])))?;
    let count: usize = parts[2]
        .parse()
        .map_err(|_| Failure::Config(format!("--range: bad count {:?}", parts[2])))?;
    if count == 0 {
        return Err(Failure::Config("--range: count must be at least 1".into()));
    }
    if !start.is_finite() || !end.is_finite() {
        return Err(Failure::Config("--range: endpoints must be finite".into()));
    }
    Ok((start, end, count))
}

fn cmd_sweep(config: &str, param: &str, range: &str, ov: &Overrides) -> Result<(), Failure> {
    let (start, end, count) = parse_range(range)?;
    let values: Vec<f64> = (0..count)
        .map(|k| {
            if count == 1 {
                start
            } else {
                start + (end - start) * k as f64 / (count - 1) as f64
            }
        })
        .collect();
    match param {
        "horizon" | "dt" | "samples" | "seed" => {}
        other => {
            return Err(Failure::Config(format!(
                "--param: {other:?} is not sweepable (horizon, dt, samples, seed)"
            )))
        }
    }
    let per_value: Vec<(f64, Vec<StateRun>)> = values
        .par_iter()
        .map(|&value| {
            let mut ov2 = ov.clone();
            match param {
                "horizon" => ov2.horizon = Some(value),
                "dt" => ov2.dt = Some(value),
                "samples" => {
                    let rounded = value.round();
                    if rounded < 2.0 {
                        return Err(Failure::Config(format!(
                            "--range: samples value {value} rounds below 2"
                        )));
                    }
                    ov2.samples = Some(rounded as usize);
                }
                _ => {
                    let rounded = value.round();
                    if rounded < 0.0 {
                        return Err(Failure::Config(format!(
                            "--range: seed value {value} is negative"
                        )));
                    }
                    ov2.seed = Some(rounded as u64);
                }
            }
            let scn = resolve(config, &ov2)?;
            let runs: Vec<StateRun> = scn
                .initial_states
                .iter()
                .map(|(label, rho0)| run_state(&scn.dynamics, label, rho0, scn.samples))
                .collect::<Result<_, _>>()?;
            Ok((value, runs))
        })
        .collect::<Result<_, _>>()?;
    let scn = resolve(config, ov)?;
    let mut csv = String::from("param,value,index,label,onset,verdict\n");
    let mut table = String::from("value\tindex\tlabel\tonset\tverdict\n");
    for (value, runs) in &per_value {
        for (i, run) in runs.iter().enumerate() {
            let onset = run
                .onset()
                .map(|a| format!("{a:.6}"))
                .unwrap_or_else(|| "-".into());
            let _ = writeln!(csv, "{param},{value},{i},{},{onset},{}", run.label, run.verdict());
            let _ = writeln!(table, "{value}\t{i}\t{}\t{onset}\t{}", run.label, run.verdict());
        }
    }
    art(fs::create_dir_all(&scn.out_dir), "out dir")?;
    art(fs::write(scn.out_dir.join("sweep.csv"), &csv), "writing sweep.csv")?;
    println!(
        "sweep {param} over [{start}, {end}] in {count} step(s), artifacts in {}",
        scn.out_dir.display()
    );
    print!("{table}");
    Ok(())
}
