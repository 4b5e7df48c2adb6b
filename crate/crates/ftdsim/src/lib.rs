//! Simulation and analysis of entanglement dynamics on bipartite
//! quantum systems: CPTP channels in Kraus form, Lindblad master
//! equations, partial-transpose separability tests, detection of
//! finite time disentanglement (FTD), and constructive synthesis of
//! entangled witness states whose evolutions pass through the interior
//! of the separable set.
//!
//! The crate is organized bottom-up:
//!
//! * [`tensor`] — dense complex matrices, Kronecker products, partial
//!   trace/transpose, Hermitian eigendecomposition, SVD.
//! * [`states`] — pure states, density operators, Schmidt
//!   decomposition, Bell states, isotropic mixtures.
//! * [`random`] — seeded Haar-distributed unitaries and states.
//! * [`entanglement`] — partial-transpose criteria, negativity, and
//!   the mixing threshold toward the maximally mixed state.
//! * [`channels`] — CPTP maps in Kraus form, Choi matrices,
//!   classification of product-preserving unitaries, reconstruction of
//!   a unitary from a unital pure-state-preserving channel, and the
//!   entangled-to-product witness search.
//! * [`lindblad`] — master-equation generators and a guarded RK4
//!   integrator.
//! * [`ftd`] — time-parametrized channel families, entanglement
//!   trajectories, FTD detection with bisection refinement, witness
//!   synthesis, and dynamics classification.
//! * [`io`] — text and JSON serialization for matrices, states,
//!   channels, generators, trajectories, and reports.

pub mod channels;
pub mod entanglement;
pub mod error;
pub mod ftd;
pub mod io;
pub mod lindblad;
pub mod random;
pub mod states;
pub mod tensor;

pub use channels::{
    classify_product_preserving_unitary, find_entangled_to_product_witness,
    is_pure_state_preserving, reconstruct_unitary_from_channel, Channel, ReconstructionError,
    UnitaryClass, WitnessSearch,
};
pub use entanglement::{
    classify_separability, entanglement_mixing_threshold, min_pt_eigenvalue, negativity,
    Classification, EntanglementVerdict,
};
pub use error::{Error, Result};
pub use ftd::{
    classify_dynamics, closed_system_witness, detect_ftd, entanglement_trajectory,
    synthesize_witness, unital_qubit_witness, verify_ftd_report, Dynamics, DynamicsClass,
    DynamicsKind, DynamicsVerdict, EntanglementTrajectory, FtdInterval, FtdOutcome, FtdReport,
    Method, WitnessOutcome,
};
pub use lindblad::{evolve_state, integrate, IntegrationOptions, LindbladGenerator, Trajectory};
pub use states::{
    bell_state, isotropic_mix, schmidt_decompose, BellState, DensityOperator, PureState,
    SchmidtDecomposition,
};
pub use tensor::{BipartiteDims, ComplexMatrix, C64};
