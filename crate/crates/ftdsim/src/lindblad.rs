//! Markovian master equation in diagonal form and a fixed-step RK4
//! integrator with numerical-integrity guards.
//!
//! The generator is
//!
//! ```text
//! d rho / dt = -i [H, rho] + sum_i ( A_i rho A_i^dag
//!                                    - (A_i^dag A_i rho + rho A_i^dag A_i) / 2 )
//! ```
//!
//! with H Hermitian. Two structural facts drive the rest of the crate:
//!
//! * The semigroup is unital (fixes I/d) iff sum_i (A_i A_i^dag -
//!   A_i^dag A_i) = 0.
//! * At a pure state psi the purity derivative is
//!   2 sum_i (|<psi|A_i|psi>|^2 - ||A_i psi||^2), which is never
//!   positive and vanishes for every psi only when each A_i is a
//!   multiple of the identity. Hence a semigroup with any non-trivial
//!   jump operator is non-unitary at every positive time.
//!
//! The integrator never renormalizes: it hermitizes each step and
//! *fails* if the trace drifts beyond `drift_tolerance` or an
//! eigenvalue dips below `-positivity_tolerance`, so a reported
//! trajectory is also a certificate of numerical health.

use crate::error::{Error, Result};
use crate::states::{DensityOperator, PureState};
use crate::tensor::{
    hermitian_spectrum, kron, BipartiteDims, ComplexMatrix, C64, TAU_HERM,
};

/// Default RK4 step size.
pub const DEFAULT_STEP: f64 = 1e-3;
/// Default bound on |Tr rho - 1| along a trajectory.
pub const DEFAULT_DRIFT_TOLERANCE: f64 = 1e-8;
/// Default bound on how negative an eigenvalue may go.
pub const DEFAULT_POSITIVITY_TOLERANCE: f64 = 1e-8;
/// Unitality threshold for the jump-operator balance.
pub const TAU_UNITAL_GENERATOR: f64 = 1e-9;
/// Threshold for treating a jump operator as a multiple of identity.
pub const TAU_TRIVIAL_JUMP: f64 = 1e-9;

/// Generator of a Lindblad semigroup on a bipartite space.
#[derive(Debug, Clone)]
pub struct LindbladGenerator {
    hamiltonian: ComplexMatrix,
    jumps: Vec<ComplexMatrix>,
    dims: BipartiteDims,
    /// Cached sum_i A_i^dag A_i.
    gram: ComplexMatrix,
}

impl LindbladGenerator {
    pub fn new(
        hamiltonian: ComplexMatrix,
        jumps: Vec<ComplexMatrix>,
        dims: BipartiteDims,
    ) -> Result<Self> {
        let d = dims.total();
        if hamiltonian.rows() != d || hamiltonian.cols() != d {
            return Err(Error::DimensionMismatch(format!(
                "Hamiltonian is {} x {}, dims need {d}",
                hamiltonian.rows(),
                hamiltonian.cols()
            )));
        }
        hamiltonian.check_finite()?;
        let defect = hamiltonian.hermiticity_defect();
        if defect > TAU_HERM {
            return Err(Error::NonHermitian {
                deviation: defect,
                tol: TAU_HERM,
            });
        }
        for a in &jumps {
            if a.rows() != d || a.cols() != d {
                return Err(Error::DimensionMismatch(format!(
                    "jump operator is {} x {}, dims need {d}",
                    a.rows(),
                    a.cols()
                )));
            }
            a.check_finite()?;
        }
        let mut gram = ComplexMatrix::zeros(d, d);
        for a in &jumps {
            gram = gram.add(&a.adjoint().mul(a));
        }
        Ok(Self {
            hamiltonian,
            jumps,
            dims,
            gram,
        })
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.hamiltonian
    }

    pub fn jumps(&self) -> &[ComplexMatrix] {
        &self.jumps
    }

    pub fn dims(&self) -> BipartiteDims {
        self.dims
    }

    pub fn dimension(&self) -> usize {
        self.dims.total()
    }

    /// Right-hand side of the master equation, valid for arbitrary
    /// (not necessarily Hermitian) matrices; the map is linear.
    pub fn rhs(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let h = &self.hamiltonian;
        let minus_i = C64::new(0.0, -1.0);
        let mut out = h.mul(rho).sub(&rho.mul(h)).scale(minus_i);
        for a in &self.jumps {
            out = out.add(&a.mul(rho).mul(&a.adjoint()));
        }
        let anti = self.gram.mul(rho).add(&rho.mul(&self.gram));
        out.sub(&anti.scale_re(0.5))
    }

    /// Max-entry norm of sum_i (A_i A_i^dag - A_i^dag A_i); zero iff
    /// the semigroup is unital.
    pub fn unitality_defect(&self) -> f64 {
        let d = self.dimension();
        let mut acc = ComplexMatrix::zeros(d, d);
        for a in &self.jumps {
            acc = acc.add(&a.mul(&a.adjoint())).sub(&a.adjoint().mul(a));
        }
        acc.max_abs()
    }

    pub fn is_unital(&self) -> bool {
        self.unitality_defect() <= TAU_UNITAL_GENERATOR
    }

    /// d/dt Tr(rho^2) evaluated at the pure state psi:
    /// 2 sum_i (|<psi|A_i|psi>|^2 - ||A_i psi||^2). Always <= 0.
    pub fn purity_derivative_at_pure(&self, psi: &PureState) -> Result<f64> {
        if psi.dims() != self.dims {
            return Err(Error::DimensionMismatch(
                "state dims do not match generator dims".into(),
            ));
        }
        let amps = psi.amplitudes();
        let mut sum = 0.0;
        for a in &self.jumps {
            let image = a.matvec(amps);
            let expectation = crate::tensor::inner(amps, &image);
            let norm_sq: f64 = image.iter().map(|z| z.norm_sqr()).sum();
            sum += expectation.norm_sqr() - norm_sq;
        }
        Ok(2.0 * sum)
    }

    /// True when every jump operator is a multiple of the identity, in
    /// which case the dissipator vanishes and the flow is the unitary
    /// one generated by the Hamiltonian alone.
    pub fn jumps_act_trivially(&self) -> bool {
        let d = self.dimension();
        self.jumps.iter().all(|a| {
            let mean = a.trace() / d as f64;
            let shifted = a.sub(&ComplexMatrix::identity(d).scale(mean));
            shifted.max_abs() <= TAU_TRIVIAL_JUMP * a.max_abs().max(1.0)
        })
    }
}

/// Step size and integrity thresholds for the RK4 integrator.
#[derive(Debug, Clone, Copy)]
pub struct IntegrationOptions {
    pub step: f64,
    pub drift_tolerance: f64,
    pub positivity_tolerance: f64,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        Self {
            step: DEFAULT_STEP,
            drift_tolerance: DEFAULT_DRIFT_TOLERANCE,
            positivity_tolerance: DEFAULT_POSITIVITY_TOLERANCE,
        }
    }
}

/// A uniformly sampled, validated trajectory.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityOperator>,
}

fn rk4_step(gen: &LindbladGenerator, m: &ComplexMatrix, h: f64) -> ComplexMatrix {
    let k1 = gen.rhs(m);
    let k2 = gen.rhs(&m.add(&k1.scale_re(h / 2.0)));
    let k3 = gen.rhs(&m.add(&k2.scale_re(h / 2.0)));
    let k4 = gen.rhs(&m.add(&k3.scale_re(h)));
    let incr = k1
        .add(&k2.scale_re(2.0))
        .add(&k3.scale_re(2.0))
        .add(&k4);
    m.add(&incr.scale_re(h / 6.0))
}

fn check_time_grid(horizon: f64, step: f64) -> Result<usize> {
    if !horizon.is_finite() || horizon < 0.0 {
        return Err(Error::OutOfRange(format!("horizon {horizon}")));
    }
    if !step.is_finite() || step <= 0.0 {
        return Err(Error::OutOfRange(format!("step {step}")));
    }
    Ok((horizon / step - 1e-9).ceil().max(0.0) as usize)
}

fn guard_state(
    matrix: ComplexMatrix,
    dims: BipartiteDims,
    step: usize,
    time: f64,
    opts: &IntegrationOptions,
) -> Result<DensityOperator> {
    let herm = matrix.hermitize();
    let drift = (herm.trace().re - 1.0).abs();
    if drift > opts.drift_tolerance {
        return Err(Error::IntegrationDrift {
            step,
            time,
            drift,
            tol: opts.drift_tolerance,
        });
    }
    let spectrum = hermitian_spectrum(&herm)?;
    let min_eigenvalue = spectrum[0];
    if min_eigenvalue < -opts.positivity_tolerance {
        return Err(Error::IntegrationPositivity {
            step,
            time,
            min_eigenvalue,
        });
    }
    Ok(DensityOperator::from_parts_unchecked(herm, dims))
}

/// Fixed-step RK4 over a uniform grid covering [0, horizon]. The grid
/// spacing is horizon/n with n = ceil(horizon/step), so the requested
/// step is an upper bound and the final time is hit exactly. Each
/// recorded state is hermitized and checked; the raw (unhermitized)
/// matrix carries the integration forward.
pub fn integrate(
    gen: &LindbladGenerator,
    initial: &DensityOperator,
    horizon: f64,
    opts: &IntegrationOptions,
) -> Result<Trajectory> {
    if initial.dims() != gen.dims() {
        return Err(Error::DimensionMismatch(
            "initial state dims do not match generator dims".into(),
        ));
    }
    let n = check_time_grid(horizon, opts.step)?;
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    let mut current = initial.matrix().clone();
    times.push(0.0);
    states.push(guard_state(current.clone(), gen.dims(), 0, 0.0, opts)?);
    if n == 0 {
        return Ok(Trajectory { times, states });
    }
    let h = horizon / n as f64;
    for k in 1..=n {
        current = rk4_step(gen, &current, h);
        let t = k as f64 * h;
        times.push(t);
        states.push(guard_state(current.clone(), gen.dims(), k, t, opts)?);
    }
    Ok(Trajectory { times, states })
}

/// Final state of `integrate` without storing the path.
pub fn evolve_state(
    gen: &LindbladGenerator,
    initial: &DensityOperator,
    horizon: f64,
    opts: &IntegrationOptions,
) -> Result<DensityOperator> {
    if initial.dims() != gen.dims() {
        return Err(Error::DimensionMismatch(
            "initial state dims do not match generator dims".into(),
        ));
    }
    let n = check_time_grid(horizon, opts.step)?;
    let mut current = initial.matrix().clone();
    if n == 0 {
        return guard_state(current, gen.dims(), 0, 0.0, opts);
    }
    let h = horizon / n as f64;
    let mut out = None;
    for k in 1..=n {
        current = rk4_step(gen, &current, h);
        let t = k as f64 * h;
        out = Some(guard_state(current.clone(), gen.dims(), k, t, opts)?);
    }
    Ok(out.expect("n >= 1"))
}

/// Propagates an arbitrary matrix by the (linear) master equation,
/// with no hermitization and no integrity checks. This is the path used
/// to reconstruct the induced channel from matrix-unit initial data,
/// which is neither Hermitian nor positive.
pub fn evolve_matrix(
    gen: &LindbladGenerator,
    initial: &ComplexMatrix,
    horizon: f64,
    step: f64,
) -> Result<ComplexMatrix> {
    let n = check_time_grid(horizon, step)?;
    let mut current = initial.clone();
    if n == 0 {
        return Ok(current);
    }
    let h = horizon / n as f64;
    for _ in 0..n {
        current = rk4_step(gen, &current, h);
    }
    Ok(current)
}

/// Global depolarizing semigroup on two qubits: jump operators are all
/// sixteen Pauli products scaled by sqrt(rate)/4, giving the closed
/// form rho(t) = e^{-rate t} rho(0) + (1 - e^{-rate t}) I/4.
pub fn depolarizing_generator(rate: f64) -> Result<LindbladGenerator> {
    if !(rate.is_finite() && rate >= 0.0) {
        return Err(Error::OutOfRange(format!("depolarizing rate {rate}")));
    }
    let dims = BipartiteDims::new(2, 2)?;
    let scale = rate.sqrt() / 4.0;
    let jumps = crate::channels::two_qubit_paulis()
        .into_iter()
        .map(|p| p.scale_re(scale))
        .collect();
    LindbladGenerator::new(ComplexMatrix::zeros(4, 4), jumps, dims)
}

/// Dephasing of qubit A at rate gamma: single jump sqrt(gamma) Z tensor I.
/// Coherences between the Z eigenspaces decay as e^{-2 gamma t}.
pub fn dephasing_generator(gamma: f64) -> Result<LindbladGenerator> {
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::OutOfRange(format!("dephasing rate {gamma}")));
    }
    let dims = BipartiteDims::new(2, 2)?;
    let jump = kron(&crate::tensor::pauli_z(), &ComplexMatrix::identity(2))
        .scale_re(gamma.sqrt());
    LindbladGenerator::new(ComplexMatrix::zeros(4, 4), vec![jump], dims)
}

/// Independent amplitude damping on both qubits; non-unital whenever a
/// rate is positive.
pub fn amplitude_damping_generator(rate_a: f64, rate_b: f64) -> Result<LindbladGenerator> {
    for rate in [rate_a, rate_b] {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(Error::OutOfRange(format!("damping rate {rate}")));
        }
    }
    let dims = BipartiteDims::new(2, 2)?;
    let mut lower = ComplexMatrix::zeros(2, 2);
    lower.set(0, 1, C64::new(1.0, 0.0));
    let eye = ComplexMatrix::identity(2);
    let jumps = vec![
        kron(&lower, &eye).scale_re(rate_a.sqrt()),
        kron(&eye, &lower).scale_re(rate_b.sqrt()),
    ];
    LindbladGenerator::new(ComplexMatrix::zeros(4, 4), jumps, dims)
}
