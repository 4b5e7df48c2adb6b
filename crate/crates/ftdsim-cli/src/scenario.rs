//! Scenario configuration: the JSON schema, the built-in model
//! library, and resolution of either into runnable dynamics plus
//! labelled initial states.

use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use ftdsim::channels::{cnot, one_sided_dephasing, swap_operator, Channel};
use ftdsim::ftd::Dynamics;
use ftdsim::io::{self, MatrixRepr};
use ftdsim::lindblad::{
    amplitude_damping_generator, dephasing_generator, depolarizing_generator, LindbladGenerator,
};
use ftdsim::states::{bell_state, isotropic_mix, BellState, DensityOperator, PureState};
use ftdsim::tensor::{kron, pauli_x, pauli_z, BipartiteDims, ComplexMatrix, C64};

use crate::Failure;

pub const CONFIG_VERSION: u32 = 1;
pub const DEFAULT_SAMPLES: usize = 64;

/// Scenario names that resolve without a config file.
pub const BUILTIN_NAMES: [&str; 6] = [
    "depolarizing-bell",
    "dephasing-witness",
    "amplitude-damping-sudden-death",
    "cnot-pulse",
    "local-rotations",
    "partial-swap",
];

/// Command-line overrides applied on top of a config or builtin.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub samples: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub horizon: Option<f64>,
}

/// A scenario ready to run.
pub struct ResolvedScenario {
    pub name: String,
    pub dynamics: Dynamics,
    pub initial_states: Vec<(String, DensityOperator)>,
    pub samples: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    version: u32,
    name: String,
    dynamics: DynamicsSpec,
    initial_states: Vec<StateSpec>,
    horizon: f64,
    #[serde(default)]
    samples: Option<usize>,
    #[serde(default)]
    dt: Option<f64>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    out_dir: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum DynamicsSpec {
    /// Inline Lindblad generator.
    Semigroup {
        dims: [usize; 2],
        hamiltonian: MatrixRepr,
        jumps: Vec<MatrixRepr>,
    },
    /// Generator loaded from a JSON file.
    GeneratorFile { path: String },
    /// Closed-system flow exp(-i H t) for an inline Hamiltonian.
    HamiltonianFlow {
        dims: [usize; 2],
        matrix: MatrixRepr,
    },
    /// Linear interpolation from the identity to the channel stored in
    /// a JSON file: C_t = (1 - t/horizon) id + (t/horizon) target.
    ChannelRamp { path: String },
    /// Named two-qubit generators.
    Depolarizing { rate: f64 },
    Dephasing { gamma: f64 },
    AmplitudeDamping { rate_a: f64, rate_b: f64 },
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum StateSpec {
    Bell { which: String },
    Pure {
        dims: [usize; 2],
        amplitudes: Vec<[f64; 2]>,
    },
    Isotropic { lambda: f64, of: Box<StateSpec> },
    File { path: String },
}

fn cfg<T, E: std::fmt::Display>(r: Result<T, E>, context: &str) -> Result<T, Failure> {
    r.map_err(|e| Failure::Config(format!("{context}: {e}")))
}

fn parse_dims(raw: [usize; 2], field: &str) -> Result<BipartiteDims, Failure> {
    cfg(BipartiteDims::new(raw[0], raw[1]), field)
}

impl StateSpec {
    fn label(&self) -> String {
        match self {
            StateSpec::Bell { which } => format!("bell-{which}"),
            StateSpec::Pure { .. } => "pure".into(),
            StateSpec::Isotropic { lambda, of } => {
                format!("isotropic-{lambda}-{}", of.label())
            }
            StateSpec::File { path } => {
                let stem = Path::new(path)
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "state".into());
                format!("file-{stem}")
            }
        }
    }

    fn build(&self, base: &Path, field: &str) -> Result<DensityOperator, Failure> {
        match self {
            StateSpec::Bell { which } => {
                let state = match which.as_str() {
                    "phi_plus" => BellState::PhiPlus,
                    "phi_minus" => BellState::PhiMinus,
                    "psi_plus" => BellState::PsiPlus,
                    "psi_minus" => BellState::PsiMinus,
                    other => {
                        return Err(Failure::Config(format!(
                            "{field}.which: unknown Bell state {other:?} \
                             (expected phi_plus, phi_minus, psi_plus, psi_minus)"
                        )))
                    }
                };
                Ok(bell_state(state).density())
            }
            StateSpec::Pure { dims, amplitudes } => {
                let dims = parse_dims(*dims, &format!("{field}.dims"))?;
                let amps: Vec<C64> = amplitudes.iter().map(|[re, im]| C64::new(*re, *im)).collect();
                let psi = cfg(
                    PureState::from_unnormalized(&amps, dims),
                    &format!("{field}.amplitudes"),
                )?;
                Ok(psi.density())
            }
            StateSpec::Isotropic { lambda, of } => {
                let inner = of.build(base, &format!("{field}.of"))?;
                cfg(isotropic_mix(&inner, *lambda), &format!("{field}.lambda"))
            }
            StateSpec::File { path } => {
                let full = base.join(path);
                let text = cfg(fs::read_to_string(&full), &format!("{field}.path ({})", full.display()))?;
                let state = cfg(io::parse_state(&text), &format!("{field}.path ({})", full.display()))?;
                Ok(state.into_density())
            }
        }
    }
}

impl DynamicsSpec {
    fn build(&self, horizon: f64, base: &Path) -> Result<Dynamics, Failure> {
        match self {
            DynamicsSpec::Semigroup {
                dims,
                hamiltonian,
                jumps,
            } => {
                let dims = parse_dims(*dims, "dynamics.dims")?;
                let h = cfg(hamiltonian.to_matrix(), "dynamics.hamiltonian")?;
                let mut ops = Vec::with_capacity(jumps.len());
                for (i, j) in jumps.iter().enumerate() {
                    ops.push(cfg(j.to_matrix(), &format!("dynamics.jumps[{i}]"))?);
                }
                let gen = cfg(LindbladGenerator::new(h, ops, dims), "dynamics")?;
                cfg(Dynamics::semigroup(gen, horizon), "horizon")
            }
            DynamicsSpec::GeneratorFile { path } => {
                let full = base.join(path);
                let text = cfg(
                    fs::read_to_string(&full),
                    &format!("dynamics.path ({})", full.display()),
                )?;
                let gen = cfg(
                    io::generator_from_json(&text),
                    &format!("dynamics.path ({})", full.display()),
                )?;
                cfg(Dynamics::semigroup(gen, horizon), "horizon")
            }
            DynamicsSpec::HamiltonianFlow { dims, matrix } => {
                let dims = parse_dims(*dims, "dynamics.dims")?;
                let h = cfg(matrix.to_matrix(), "dynamics.matrix")?;
                cfg(Dynamics::hamiltonian_flow(&h, dims, horizon), "dynamics")
            }
            DynamicsSpec::ChannelRamp { path } => {
                let full = base.join(path);
                let text = cfg(
                    fs::read_to_string(&full),
                    &format!("dynamics.path ({})", full.display()),
                )?;
                let target = cfg(
                    io::channel_from_json(&text),
                    &format!("dynamics.path ({})", full.display()),
                )?;
                ramp_dynamics(target, horizon)
            }
            DynamicsSpec::Depolarizing { rate } => {
                let gen = cfg(depolarizing_generator(*rate), "dynamics.rate")?;
                cfg(Dynamics::semigroup(gen, horizon), "horizon")
            }
            DynamicsSpec::Dephasing { gamma } => {
                let gen = cfg(dephasing_generator(*gamma), "dynamics.gamma")?;
                cfg(Dynamics::semigroup(gen, horizon), "horizon")
            }
            DynamicsSpec::AmplitudeDamping { rate_a, rate_b } => {
                let gen = cfg(amplitude_damping_generator(*rate_a, *rate_b), "dynamics")?;
                cfg(Dynamics::semigroup(gen, horizon), "horizon")
            }
        }
    }
}

/// Kraus family interpolating from the identity to `target` over the
/// horizon: {sqrt(1-s) I} with {sqrt(s) K_i}, s = t/horizon.
fn ramp_dynamics(target: Channel, horizon: f64) -> Result<Dynamics, Failure> {
    let dims = target.dims().ok_or_else(|| {
        Failure::Config("dynamics: channel file must carry bipartite dims".into())
    })?;
    let kraus: Vec<ComplexMatrix> = target.kraus().to_vec();
    let d = dims.total();
    cfg(
        Dynamics::channel_family(dims, horizon, move |t| {
            let s = (t / horizon).clamp(0.0, 1.0);
            let mut ops = Vec::with_capacity(kraus.len() + 1);
            ops.push(ComplexMatrix::identity(d).scale_re((1.0 - s).sqrt()));
            for k in &kraus {
                ops.push(k.scale_re(s.sqrt()));
            }
            Channel::new(ops, Some(dims))
        }),
        "dynamics",
    )
}

/// Resolves a config argument: a builtin name first, else a JSON file.
pub fn resolve(config: &str, ov: &Overrides) -> Result<ResolvedScenario, Failure> {
    if BUILTIN_NAMES.contains(&config) {
        return resolve_builtin(config, ov);
    }
    let path = PathBuf::from(config);
    let text = cfg(
        fs::read_to_string(&path),
        &format!("config ({})", path.display()),
    )?;
    let file: ScenarioFile = serde_json::from_str(&text)
        .map_err(|e| Failure::Config(format!("config ({}): {e}", path.display())))?;
    if file.version != CONFIG_VERSION {
        return Err(Failure::Config(format!(
            "version: {} is not supported (expected {CONFIG_VERSION})",
            file.version
        )));
    }
    if file.initial_states.is_empty() {
        return Err(Failure::Config("initial_states: at least one required".into()));
    }
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let horizon = ov.horizon.unwrap_or(file.horizon);
    let mut dynamics = file.dynamics.build(horizon, &base)?;
    if let Some(dt) = ov.dt.or(file.dt) {
        dynamics = cfg(dynamics.with_step(dt), "dt")?;
    }
    let mut initial_states = Vec::with_capacity(file.initial_states.len());
    for (i, spec) in file.initial_states.iter().enumerate() {
        let rho = spec.build(&base, &format!("initial_states[{i}]"))?;
        if rho.dims() != dynamics.dims() {
            return Err(Failure::Config(format!(
                "initial_states[{i}]: dims {} x {} do not match dynamics dims {} x {}",
                rho.dims().d_a(),
                rho.dims().d_b(),
                dynamics.dims().d_a(),
                dynamics.dims().d_b()
            )));
        }
        initial_states.push((spec.label(), rho));
    }
    finish(
        file.name,
        dynamics,
        initial_states,
        ov,
        file.samples,
        file.seed,
        file.out_dir.map(PathBuf::from),
    )
}

fn finish(
    name: String,
    dynamics: Dynamics,
    initial_states: Vec<(String, DensityOperator)>,
    ov: &Overrides,
    file_samples: Option<usize>,
    file_seed: Option<u64>,
    file_out_dir: Option<PathBuf>,
) -> Result<ResolvedScenario, Failure> {
    let samples = ov.samples.or(file_samples).unwrap_or(DEFAULT_SAMPLES);
    if samples < 2 {
        return Err(Failure::Config(format!("samples: {samples} is below 2")));
    }
    let seed = ov.seed.or(file_seed).unwrap_or(0);
    let out_dir = ov
        .out_dir
        .clone()
        .or(file_out_dir)
        .unwrap_or_else(|| PathBuf::from(format!("{}-artifacts", sanitize(&name))));
    Ok(ResolvedScenario {
        name,
        dynamics,
        initial_states,
        samples,
        seed,
        out_dir,
    })
}

fn sanitize(name: &str) -> String {
    let cleaned: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '-' })
        .collect();
    if cleaned.is_empty() {
        "scenario".into()
    } else {
        cleaned
    }
}

fn resolve_builtin(name: &str, ov: &Overrides) -> Result<ResolvedScenario, Failure> {
    let dims = cfg(BipartiteDims::new(2, 2), "dims")?;
    let phi_plus = bell_state(BellState::PhiPlus).density();
    let canonical_witness = cfg(isotropic_mix(&phi_plus, 1.0 / 3.0), "builtin witness")?;
    let (mut dynamics, initial_states): (Dynamics, Vec<(String, DensityOperator)>) = match name {
        "depolarizing-bell" => {
            let horizon = ov.horizon.unwrap_or(2.0);
            let gen = cfg(depolarizing_generator(1.0), "builtin generator")?;
            (
                cfg(Dynamics::semigroup(gen, horizon), "horizon")?,
                vec![("bell-phi_plus".into(), phi_plus)],
            )
        }
        "dephasing-witness" => {
            let horizon = ov.horizon.unwrap_or(1.0);
            let target = cfg(one_sided_dephasing(0.5), "builtin channel")?;
            (
                ramp_dynamics(target, horizon)?,
                vec![("isotropic-0.333-bell-phi_plus".into(), canonical_witness)],
            )
        }
        "amplitude-damping-sudden-death" => {
            let horizon = ov.horizon.unwrap_or(2.0);
            let gen = cfg(amplitude_damping_generator(1.0, 1.0), "builtin generator")?;
            let mut amps = vec![C64::new(0.0, 0.0); 4];
            amps[0] = C64::new(0.1f64.sqrt(), 0.0);
            amps[3] = C64::new(0.9f64.sqrt(), 0.0);
            let skew = cfg(PureState::new(amps, dims), "builtin state")?;
            (
                cfg(Dynamics::semigroup(gen, horizon), "horizon")?,
                vec![("pure-skew".into(), skew.density())],
            )
        }
        "cnot-pulse" => {
            let horizon = ov.horizon.unwrap_or(1.0);
            let h = cnot().scale_re(FRAC_PI_2);
            (
                cfg(Dynamics::hamiltonian_flow(&h, dims, horizon), "builtin flow")?,
                vec![("isotropic-0.333-bell-phi_plus".into(), canonical_witness)],
            )
        }
        "local-rotations" => {
            let horizon = ov.horizon.unwrap_or(2.0);
            let eye = ComplexMatrix::identity(2);
            let h = kron(&pauli_z(), &eye).add(&kron(&eye, &pauli_x()));
            (
                cfg(Dynamics::hamiltonian_flow(&h, dims, horizon), "builtin flow")?,
                vec![
                    ("bell-phi_plus".into(), phi_plus),
                    ("isotropic-0.333-bell-phi_plus".into(), canonical_witness),
                ],
            )
        }
        "partial-swap" => {
            let horizon = ov.horizon.unwrap_or(FRAC_PI_2);
            let swap = cfg(swap_operator(dims), "builtin flow")?;
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let mut amps = vec![C64::new(0.0, 0.0); 4];
            amps[1] = C64::new(s, 0.0);
            amps[2] = C64::new(0.0, s);
            let psi = cfg(PureState::new(amps, dims), "builtin state")?;
            let witness = cfg(isotropic_mix(&psi.density(), 1.0 / 3.0), "builtin state")?;
            (
                cfg(Dynamics::hamiltonian_flow(&swap, dims, horizon), "builtin flow")?,
                vec![("isotropic-0.333-pure".into(), witness)],
            )
        }
        other => {
            return Err(Failure::Config(format!("unknown builtin scenario {other:?}")));
        }
    };
    if let Some(dt) = ov.dt {
        dynamics = cfg(dynamics.with_step(dt), "dt")?;
    }
    finish(name.to_string(), dynamics, initial_states, ov, None, None, None)
}
