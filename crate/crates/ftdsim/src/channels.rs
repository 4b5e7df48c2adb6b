//! CPTP maps in Kraus form and the structure theory of unitaries that
//! respect the product-state set.
//!
//! Three constructive results are implemented here.
//!
//! 1. `classify_product_preserving_unitary`: a unitary on a bipartite
//!    space maps every product vector to a product vector iff it is
//!    local (u_A tensor u_B) or local composed with the SWAP (square
//!    factors only). The classifier follows the constructive proof:
//!    Schmidt-factor the images of the product basis, branch on which
//!    side of each factor pair is proportional vs orthogonal, check the
//!    branch holds for all pairs, then rebuild the candidate factors and
//!    accept only if the residual against the input is at most
//!    `TAU_FACTOR` up to global phase. The residual check is what
//!    catches phase-law violators (CZ or CNOT styles) whose basis images
//!    are all products.
//!
//! 2. `reconstruct_unitary_from_channel`: a unital channel that
//!    preserves pure states is conjugation by a unitary, and that
//!    unitary is recovered constructively: eigenvectors of the images of
//!    basis projectors fix the columns up to phase, images of
//!    (|0> + |j>)/sqrt(2) fix the relative phases, and a full
//!    operator-basis self-check guards the result.
//!
//! 3. `find_entangled_to_product_witness`: any unitary that is neither
//!    local nor local-after-SWAP must map some entangled state to a
//!    product state. The inverse image of a product grid (Pauli
//!    eigenbases for qubits, computational + Fourier bases otherwise)
//!    plus seeded Haar product samples finds one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::error::{Error, Result};
use crate::random::{haar_product, haar_vector};
use crate::states::{schmidt_decompose, DensityOperator, PureState};
use crate::tensor::{
    hermitian_eigen, inner, kron, max_diff_up_to_phase, outer, svd, BipartiteDims, ComplexMatrix,
    C64, ONE, TAU_UNITARY, ZERO,
};

/// Trace-preservation tolerance: max |sum K^dag K - I| at construction.
pub const TAU_CHANNEL: f64 = 1e-9;
/// Unitality tolerance: max |sum K K^dag - I|.
pub const TAU_UNITAL: f64 = 1e-9;
/// Residual bound for accepted factorizations and reconstructions.
pub const TAU_FACTOR: f64 = 1e-8;
/// A pure state whose image has purity below 1 - TAU_PURITY witnesses a
/// non-pure-preserving channel.
pub const TAU_PURITY: f64 = 1e-9;
/// Second Schmidt coefficient above this certifies a witness candidate.
pub const TAU_WITNESS: f64 = 1e-4;
/// Images of basis projectors whose top eigenvalue sits further than
/// this from 1 are treated as mixed during reconstruction.
pub const TAU_RECON_GAP: f64 = 1e-6;
/// Default Haar trial count for the pure-state-preservation probe.
pub const DEFAULT_PURITY_TRIALS: usize = 500;

/// Branch tolerance for proportional-vs-orthogonal factor overlaps. The
/// final residual check is the authority; this only routes the attempt.
const TOL_OVERLAP: f64 = 1e-6;

/// Completely positive trace-preserving map, stored as Kraus operators.
#[derive(Debug, Clone)]
pub struct Channel {
    kraus: Vec<ComplexMatrix>,
    dims: Option<BipartiteDims>,
}

impl Channel {
    pub fn new(kraus: Vec<ComplexMatrix>, dims: Option<BipartiteDims>) -> Result<Self> {
        Self::with_tolerance(kraus, dims, TAU_CHANNEL)
    }

    /// Construction with a caller-chosen trace-preservation tolerance;
    /// channels reconstructed from integrated dynamics inherit the
    /// integrator's looser error scale.
    pub fn with_tolerance(
        kraus: Vec<ComplexMatrix>,
        dims: Option<BipartiteDims>,
        tol: f64,
    ) -> Result<Self> {
        let first = kraus
            .first()
            .ok_or_else(|| Error::InvalidChannel("empty Kraus list".into()))?;
        if !first.is_square() {
            return Err(Error::InvalidChannel("Kraus operators must be square".into()));
        }
        let d = first.rows();
        if kraus.iter().any(|k| k.rows() != d || k.cols() != d) {
            return Err(Error::InvalidChannel("Kraus operators differ in size".into()));
        }
        for k in &kraus {
            k.check_finite()?;
        }
        if let Some(dims) = dims {
            if dims.total() != d {
                return Err(Error::DimensionMismatch(format!(
                    "Kraus size {d} does not match dims {} x {}",
                    dims.d_a(),
                    dims.d_b()
                )));
            }
        }
        let mut gram = ComplexMatrix::zeros(d, d);
        for k in &kraus {
            gram = gram.add(&k.adjoint().mul(k));
        }
        let defect = gram.max_diff(&ComplexMatrix::identity(d));
        if defect > tol {
            return Err(Error::InvalidChannel(format!(
                "not trace preserving: max |sum K^dag K - I| = {defect:.3e} exceeds {tol:.1e}"
            )));
        }
        Ok(Self { kraus, dims })
    }

    /// Conjugation by a unitary as a single-Kraus channel.
    pub fn unitary(u: ComplexMatrix, dims: Option<BipartiteDims>) -> Result<Self> {
        u.check_unitary(TAU_UNITARY)?;
        Self::new(vec![u], dims)
    }

    pub fn identity(d: usize, dims: Option<BipartiteDims>) -> Result<Self> {
        Self::new(vec![ComplexMatrix::identity(d)], dims)
    }

    pub fn kraus(&self) -> &[ComplexMatrix] {
        &self.kraus
    }

    pub fn dims(&self) -> Option<BipartiteDims> {
        self.dims
    }

    pub fn dim(&self) -> usize {
        self.kraus[0].rows()
    }

    /// Linear action sum_i K_i m K_i^dag on an arbitrary matrix.
    pub fn apply_matrix(&self, m: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(m.rows(), self.dim());
        assert_eq!(m.cols(), self.dim());
        let mut out = ComplexMatrix::zeros(self.dim(), self.dim());
        for k in &self.kraus {
            out = out.add(&k.mul(m).mul(&k.adjoint()));
        }
        out
    }

    /// Action on a validated state; the output is re-validated.
    pub fn apply(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        if rho.dims().total() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "state dimension {} does not match channel dimension {}",
                rho.dims().total(),
                self.dim()
            )));
        }
        DensityOperator::new(self.apply_matrix(rho.matrix()).hermitize(), rho.dims())
    }

    /// Max-entry deviation of sum_i K_i K_i^dag from the identity;
    /// zero exactly when the maximally mixed state is a fixed point.
    pub fn unitality_defect(&self) -> f64 {
        let d = self.dim();
        let mut acc = ComplexMatrix::zeros(d, d);
        for k in &self.kraus {
            acc = acc.add(&k.mul(&k.adjoint()));
        }
        acc.max_diff(&ComplexMatrix::identity(d))
    }

    /// Unital means the maximally mixed state is a fixed point:
    /// sum_i K_i K_i^dag = I within `TAU_UNITAL`.
    pub fn is_unital(&self) -> bool {
        self.unitality_defect() <= TAU_UNITAL
    }

    /// Choi matrix sum_jk E_jk tensor Lambda(E_jk), assembled directly
    /// as sum_K vec(K) vec(K)^dag with vec(K)[j*d + m] = K[m, j].
    pub fn choi(&self) -> ComplexMatrix {
        let d = self.dim();
        let mut c = ComplexMatrix::zeros(d * d, d * d);
        for k in &self.kraus {
            let v: Vec<C64> = (0..d * d).map(|i| k.get(i % d, i / d)).collect();
            c = c.add(&outer(&v, &v));
        }
        c
    }

    /// Number of Choi eigenvalues above `tol` (relative to the trace
    /// scale d): the minimal Kraus rank at that tolerance.
    pub fn effective_kraus_rank(&self, tol: f64) -> usize {
        let spectrum = crate::tensor::hermitian_spectrum(&self.choi().hermitize())
            .expect("Choi of a valid channel is Hermitian");
        let cut = tol * self.dim() as f64;
        spectrum.iter().filter(|x| **x > cut).count()
    }

    /// Extracts the conjugating unitary if this channel has an
    /// effectively rank-one Choi matrix; None otherwise.
    pub fn as_unitary(&self, tol: f64) -> Option<ComplexMatrix> {
        if self.effective_kraus_rank(tol) != 1 {
            return None;
        }
        let d = self.dim();
        let (values, vectors) = hermitian_eigen(&self.choi().hermitize()).ok()?;
        let top = values[d * d - 1];
        let x = vectors.column(d * d - 1);
        let k = ComplexMatrix::from_fn(d, d, |m, j| x[j * d + m] * top.sqrt());
        if k.is_unitary(1e-7) {
            Some(k)
        } else {
            None
        }
    }

    /// Max deviation of Lambda(E_jk) from E_jk over all matrix units.
    pub fn identity_defect(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for j in 0..d {
            for k in 0..d {
                let mut e = ComplexMatrix::zeros(d, d);
                e.set(j, k, ONE);
                worst = worst.max(self.apply_matrix(&e).max_diff(&e));
            }
        }
        worst
    }
}

/// SWAP on a square bipartite space: |j>_A |k>_B -> |k>_A |j>_B.
pub fn swap_operator(dims: BipartiteDims) -> Result<ComplexMatrix> {
    if !dims.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "SWAP needs d_A = d_B, got {} x {}",
            dims.d_a(),
            dims.d_b()
        )));
    }
    let mut s = ComplexMatrix::zeros(dims.total(), dims.total());
    for j in 0..dims.d_a() {
        for k in 0..dims.d_b() {
            s.set(dims.flat(k, j), dims.flat(j, k), ONE);
        }
    }
    Ok(s)
}

/// A state whose image lost purity, certifying the channel is not
/// pure-state-preserving.
#[derive(Debug, Clone)]
pub struct PurityWitness {
    pub state: Vec<C64>,
    pub purity: f64,
}

#[derive(Debug, Clone)]
pub struct PurityCheck {
    pub preserving: bool,
    pub witness: Option<PurityWitness>,
}

/// Probabilistic purity preservation check: the d^2 deterministic
/// basis/superposition states that drive the reconstruction proof, then
/// `trials` seeded Haar states. A pass is evidence, not proof; a failure
/// returns the offending state.
pub fn is_pure_state_preserving(ch: &Channel, trials: usize, seed: u64) -> PurityCheck {
    let d = ch.dim();
    let mut candidates: Vec<Vec<C64>> = Vec::new();
    for j in 0..d {
        let mut e = vec![ZERO; d];
        e[j] = ONE;
        candidates.push(e);
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..d {
        for k in (j + 1)..d {
            let mut plus = vec![ZERO; d];
            plus[j] = C64::new(s, 0.0);
            plus[k] = C64::new(s, 0.0);
            candidates.push(plus);
            let mut plus_i = vec![ZERO; d];
            plus_i[j] = C64::new(s, 0.0);
            plus_i[k] = C64::new(0.0, s);
            candidates.push(plus_i);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        candidates.push(haar_vector(d, &mut rng));
    }
    for state in candidates {
        let image = ch.apply_matrix(&outer(&state, &state));
        let purity = image.mul(&image).trace().re;
        if purity < 1.0 - TAU_PURITY {
            return PurityCheck {
                preserving: false,
                witness: Some(PurityWitness { state, purity }),
            };
        }
    }
    PurityCheck {
        preserving: true,
        witness: None,
    }
}

/// Verdict of `classify_product_preserving_unitary`. Factors satisfy
/// ||u - u_A tensor u_B|| <= TAU_FACTOR (max norm, up to global phase),
/// with an extra SWAP on the right for `LocalSwap`.
#[derive(Debug, Clone)]
pub enum UnitaryClass {
    Local {
        factor_a: ComplexMatrix,
        factor_b: ComplexMatrix,
    },
    LocalSwap {
        factor_a: ComplexMatrix,
        factor_b: ComplexMatrix,
    },
    NotProductPreserving,
}

impl UnitaryClass {
    pub fn is_product_preserving(&self) -> bool {
        !matches!(self, UnitaryClass::NotProductPreserving)
    }

    pub fn tag(&self) -> &'static str {
        match self {
            UnitaryClass::Local { .. } => "local",
            UnitaryClass::LocalSwap { .. } => "local_swap",
            UnitaryClass::NotProductPreserving => "not_product_preserving",
        }
    }
}

/// Schmidt factors of every product-basis image, or None as soon as an
/// image is entangled beyond tolerance.
fn factor_images(u: &ComplexMatrix, dims: BipartiteDims) -> Option<Vec<Vec<(Vec<C64>, Vec<C64>)>>> {
    let (da, db) = (dims.d_a(), dims.d_b());
    let mut factors = Vec::with_capacity(da);
    for j in 0..da {
        let mut row = Vec::with_capacity(db);
        for k in 0..db {
            let w = u.column(dims.flat(j, k));
            let m = ComplexMatrix::from_fn(da, db, |r, c| w[dims.flat(r, c)]);
            let f = svd(&m);
            if f.sigma.len() > 1 && f.sigma[1] > TAU_FACTOR {
                return None;
            }
            let left = f.u.column(0);
            let right: Vec<C64> = f.v.column(0).iter().map(|z| z.conj()).collect();
            // sigma[0] carries the norm (1 for unitary input); fold it
            // into the left factor so left kron right equals the image.
            let left = left.iter().map(|z| z * f.sigma[0]).collect();
            row.push((left, right));
        }
        factors.push(row);
    }
    Some(factors)
}

/// Checks the branch structure of a factored image table: for fixed k
/// the B factors must be proportional and the A factors orthogonal
/// across j, and for fixed j the roles swap across k. This is the
/// branch in which u can be a plain local unitary.
fn branch_is_local(factors: &[Vec<(Vec<C64>, Vec<C64>)>]) -> bool {
    let da = factors.len();
    let db = factors[0].len();
    for k in 0..db {
        for j1 in 0..da {
            for j2 in (j1 + 1)..da {
                let a_overlap = inner(&factors[j1][k].0, &factors[j2][k].0).norm();
                let b_overlap = inner(&factors[j1][k].1, &factors[j2][k].1).norm();
                if a_overlap > TOL_OVERLAP || b_overlap < 1.0 - TOL_OVERLAP {
                    return false;
                }
            }
        }
    }
    for j in 0..da {
        for k1 in 0..db {
            for k2 in (k1 + 1)..db {
                let a_overlap = inner(&factors[j][k1].0, &factors[j][k2].0).norm();
                let b_overlap = inner(&factors[j][k1].1, &factors[j][k2].1).norm();
                if b_overlap > TOL_OVERLAP || a_overlap < 1.0 - TOL_OVERLAP {
                    return false;
                }
            }
        }
    }
    true
}

/// Rebuilds local factors from a branch-consistent image table, anchored
/// so that the candidate reproduces the (0,0) image with no phase slack:
/// psi_j absorbs the phase of <phi_0 | v_j0> and phi_k the phase of
/// <psi_0 | u_0k>. Returns None when the phase law fails, i.e. the
/// candidate misses some other image.
fn extract_local_factors(
    u: &ComplexMatrix,
    dims: BipartiteDims,
) -> Option<(ComplexMatrix, ComplexMatrix)> {
    let factors = factor_images(u, dims)?;
    if !branch_is_local(&factors) {
        return None;
    }
    let psi_0 = factors[0][0].0.clone();
    let phi_0 = factors[0][0].1.clone();
    let mut a_cols = vec![psi_0.clone()];
    for j in 1..dims.d_a() {
        let overlap = inner(&phi_0, &factors[j][0].1);
        let phase = overlap / overlap.norm();
        a_cols.push(factors[j][0].0.iter().map(|z| z * phase).collect());
    }
    let mut b_cols = vec![phi_0];
    for k in 1..dims.d_b() {
        let overlap = inner(&psi_0, &factors[0][k].0);
        let phase = overlap / overlap.norm();
        b_cols.push(factors[0][k].1.iter().map(|z| z * phase).collect());
    }
    let factor_a = ComplexMatrix::from_columns(&a_cols).expect("non-empty");
    let factor_b = ComplexMatrix::from_columns(&b_cols).expect("non-empty");
    let candidate = kron(&factor_a, &factor_b);
    if max_diff_up_to_phase(u, &candidate) <= TAU_FACTOR {
        Some((factor_a, factor_b))
    } else {
        None
    }
}

/// Decides whether a unitary maps all product states to product states,
/// and if so exhibits the local factors. The only structural options are
/// local and local-composed-with-SWAP; everything else fails either the
/// image product test, the branch consistency test, or the residual
/// (phase law) test.
pub fn classify_product_preserving_unitary(
    u: &ComplexMatrix,
    dims: BipartiteDims,
) -> Result<UnitaryClass> {
    if u.rows() != dims.total() {
        return Err(Error::DimensionMismatch(format!(
            "unitary is {} x {}, dims need {}",
            u.rows(),
            u.cols(),
            dims.total()
        )));
    }
    u.check_unitary(TAU_UNITARY)?;
    if let Some((factor_a, factor_b)) = extract_local_factors(u, dims) {
        return Ok(UnitaryClass::Local { factor_a, factor_b });
    }
    if dims.is_square() {
        // u = (a tensor b) SWAP iff u * SWAP is local.
        let us = u.mul(&swap_operator(dims)?);
        if let Some((factor_a, factor_b)) = extract_local_factors(&us, dims) {
            return Ok(UnitaryClass::LocalSwap { factor_a, factor_b });
        }
    }
    Ok(UnitaryClass::NotProductPreserving)
}

/// Why a channel could not be written as conjugation by a unitary.
#[derive(Debug, Clone, Error)]
pub enum ReconstructionError {
    #[error("channel is not unital")]
    NotUnital,
    #[error("channel does not preserve purity (witness image purity {purity:.6})")]
    NotPurePreserving { witness: Vec<C64>, purity: f64 },
    #[error("phase relations are inconsistent with a unitary (residual {residual:.3e})")]
    PhaseInconsistent { residual: f64 },
}

fn top_eigenpair(m: &ComplexMatrix) -> (f64, Vec<C64>) {
    let (values, vectors) = hermitian_eigen(&m.hermitize()).expect("Hermitian image");
    let last = values.len() - 1;
    (values[last], vectors.column(last))
}

/// Recovers v with Lambda(rho) = v rho v^dag from a unital
/// pure-state-preserving channel. Columns come from the images of basis
/// projectors; relative phases from the images of (|0> + |j>)/sqrt(2);
/// a final check over a full operator basis plus Haar states guards the
/// assembly. Seeds are fixed so rejection is deterministic.
pub fn reconstruct_unitary_from_channel(
    ch: &Channel,
) -> std::result::Result<ComplexMatrix, ReconstructionError> {
    let d = ch.dim();
    if !ch.is_unital() {
        return Err(ReconstructionError::NotUnital);
    }

    // Columns up to phase: Lambda(|j><j|) must be a rank-one projector.
    let mut columns: Vec<Vec<C64>> = Vec::with_capacity(d);
    for j in 0..d {
        let mut basis = vec![ZERO; d];
        basis[j] = ONE;
        let image = ch.apply_matrix(&outer(&basis, &basis));
        let (top, vector) = top_eigenpair(&image);
        if top < 1.0 - TAU_RECON_GAP {
            let purity = image.mul(&image).trace().re;
            return Err(ReconstructionError::NotPurePreserving {
                witness: basis,
                purity,
            });
        }
        columns.push(vector);
    }

    // Relative phases against column 0. For a genuine conjugation the
    // overlap <psi_0| Lambda(P_0j) |psi_j> has modulus exactly 1/2.
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut v = ComplexMatrix::zeros(d, d);
    for (i, z) in columns[0].iter().enumerate() {
        v.set(i, 0, *z);
    }
    for j in 1..d {
        let mut plus = vec![ZERO; d];
        plus[0] = C64::new(s, 0.0);
        plus[j] = C64::new(s, 0.0);
        let image = ch.apply_matrix(&outer(&plus, &plus));
        let (top, _) = top_eigenpair(&image);
        if top < 1.0 - TAU_RECON_GAP {
            let purity = image.mul(&image).trace().re;
            return Err(ReconstructionError::NotPurePreserving {
                witness: plus,
                purity,
            });
        }
        let overlap = {
            let lhs = image.matvec(&columns[j]);
            inner(&columns[0], &lhs)
        };
        if (overlap.norm() - 0.5).abs() > TAU_RECON_GAP {
            return Err(ReconstructionError::PhaseInconsistent {
                residual: (overlap.norm() - 0.5).abs(),
            });
        }
        let phase = overlap.conj() / overlap.norm();
        for i in 0..d {
            v.set(i, j, columns[j][i] * phase);
        }
    }

    if let Err(Error::NotUnitary { deviation, .. }) = v.check_unitary(1e-7) {
        return Err(ReconstructionError::PhaseInconsistent { residual: deviation });
    }

    // Self-check over a spanning set: all basis projectors and pairwise
    // superpositions (real and imaginary), plus a few Haar states.
    let mut probes: Vec<Vec<C64>> = Vec::new();
    for j in 0..d {
        let mut e = vec![ZERO; d];
        e[j] = ONE;
        probes.push(e);
    }
    for j in 0..d {
        for k in (j + 1)..d {
            let mut x = vec![ZERO; d];
            x[j] = C64::new(s, 0.0);
            x[k] = C64::new(s, 0.0);
            probes.push(x);
            let mut y = vec![ZERO; d];
            y[j] = C64::new(s, 0.0);
            y[k] = C64::new(0.0, s);
            probes.push(y);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xF7D5);
    for _ in 0..8 {
        probes.push(haar_vector(d, &mut rng));
    }
    let mut residual = 0.0f64;
    for p in probes {
        let rho = outer(&p, &p);
        let via_channel = ch.apply_matrix(&rho);
        let via_unitary = v.mul(&rho).mul(&v.adjoint());
        residual = residual.max(via_channel.max_diff(&via_unitary));
    }
    if residual > TAU_FACTOR {
        return Err(ReconstructionError::PhaseInconsistent { residual });
    }
    Ok(v)
}

/// Outcome of the entangled-to-product search.
#[derive(Debug, Clone)]
pub enum WitnessSearch {
    /// u maps `entangled` to `product`; the certificate of a
    /// non-product-preserving unitary.
    Witness {
        entangled: PureState,
        product: PureState,
    },
    /// u is local or local-after-SWAP; no such pair exists.
    NoWitnessExists,
    /// Budget ran out; reports the best candidate seen and its second
    /// Schmidt coefficient.
    BudgetExhausted {
        best: PureState,
        second_coefficient: f64,
    },
}

/// Deterministic per-side grid: Pauli eigenbases for qubits,
/// computational plus Fourier bases for larger factors.
fn side_grid(d: usize) -> Vec<Vec<C64>> {
    let mut grid = Vec::new();
    for j in 0..d {
        let mut e = vec![ZERO; d];
        e[j] = ONE;
        grid.push(e);
    }
    if d == 2 {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let h = C64::new(s, 0.0);
        grid.push(vec![h, h]);
        grid.push(vec![h, -h]);
        grid.push(vec![h, C64::new(0.0, s)]);
        grid.push(vec![h, C64::new(0.0, -s)]);
    } else {
        let root = 1.0 / (d as f64).sqrt();
        for k in 0..d {
            grid.push(
                (0..d)
                    .map(|j| {
                        C64::from_polar(
                            root,
                            2.0 * std::f64::consts::PI * (j * k) as f64 / d as f64,
                        )
                    })
                    .collect(),
            );
        }
    }
    grid
}

/// Searches for an entangled state that u maps to a product state.
/// Product candidates |a>|b> are pulled back through u^dag; a second
/// Schmidt coefficient above `TAU_WITNESS` certifies success. The grid
/// is scanned first, then seeded Haar product states up to `budget`
/// total candidates.
pub fn find_entangled_to_product_witness(
    u: &ComplexMatrix,
    dims: BipartiteDims,
    budget: usize,
    seed: u64,
) -> Result<WitnessSearch> {
    let class = classify_product_preserving_unitary(u, dims)?;
    if class.is_product_preserving() {
        return Ok(WitnessSearch::NoWitnessExists);
    }
    let ut = u.adjoint();
    let mut best: Option<(PureState, f64)> = None;
    let mut examined = 0usize;

    let consider = |product: PureState,
                    best: &mut Option<(PureState, f64)>|
     -> Result<Option<WitnessSearch>> {
        let pulled = ut.matvec(product.amplitudes());
        let candidate = PureState::new(pulled, dims)?;
        let second = schmidt_decompose(&candidate).second_coefficient();
        if second > TAU_WITNESS {
            return Ok(Some(WitnessSearch::Witness {
                entangled: candidate,
                product,
            }));
        }
        if best.as_ref().map_or(true, |(_, s)| second > *s) {
            *best = Some((candidate, second));
        }
        Ok(None)
    };

    'grid: for a in side_grid(dims.d_a()) {
        for b in side_grid(dims.d_b()) {
            if examined >= budget {
                break 'grid;
            }
            examined += 1;
            if let Some(hit) = consider(PureState::product(&a, &b, dims)?, &mut best)? {
                return Ok(hit);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while examined < budget {
        examined += 1;
        if let Some(hit) = consider(haar_product(dims, &mut rng), &mut best)? {
            return Ok(hit);
        }
    }
    let (best, second_coefficient) = best.expect("budget >= 1");
    Ok(WitnessSearch::BudgetExhausted {
        best,
        second_coefficient,
    })
}

/// The sixteen two-qubit Pauli products, identity first.
pub fn two_qubit_paulis() -> Vec<ComplexMatrix> {
    let singles = [
        ComplexMatrix::identity(2),
        crate::tensor::pauli_x(),
        crate::tensor::pauli_y(),
        crate::tensor::pauli_z(),
    ];
    let mut out = Vec::with_capacity(16);
    for a in &singles {
        for b in &singles {
            out.push(kron(a, b));
        }
    }
    out
}

/// Global two-qubit depolarizing channel rho -> (1-q) rho + q I/4.
pub fn two_qubit_depolarizing(q: f64) -> Result<Channel> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::OutOfRange(format!("depolarizing weight {q}")));
    }
    let paulis = two_qubit_paulis();
    let mut kraus = vec![paulis[0].scale_re((1.0 - 15.0 * q / 16.0).sqrt())];
    for p in &paulis[1..] {
        kraus.push(p.scale_re((q / 16.0).sqrt()));
    }
    Channel::new(kraus, Some(BipartiteDims::new(2, 2)?))
}

/// One-sided dephasing rho -> (1-q) rho + q (Z tensor I) rho (Z tensor I).
pub fn one_sided_dephasing(q: f64) -> Result<Channel> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::OutOfRange(format!("dephasing weight {q}")));
    }
    let dims = BipartiteDims::new(2, 2)?;
    let z_a = kron(&crate::tensor::pauli_z(), &ComplexMatrix::identity(2));
    Channel::new(
        vec![
            ComplexMatrix::identity(4).scale_re((1.0 - q).sqrt()),
            z_a.scale_re(q.sqrt()),
        ],
        Some(dims),
    )
}

/// CNOT with control on A: |j>|k> -> |j>|k xor j>.
pub fn cnot() -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(4, 4);
    m.set(0, 0, ONE);
    m.set(1, 1, ONE);
    m.set(2, 3, ONE);
    m.set(3, 2, ONE);
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::haar_unitary;
    use crate::states::{bell_state, BellState};
    use crate::tensor::{partial_trace, pauli_x, pauli_z, Subsystem};
    use rand::SeedableRng;

    fn dims22() -> BipartiteDims {
        BipartiteDims::new(2, 2).unwrap()
    }

    #[test]
    fn channel_rejects_non_trace_preserving_kraus() {
        let k = ComplexMatrix::identity(2).scale_re(0.5);
        assert!(matches!(
            Channel::new(vec![k], None),
            Err(Error::InvalidChannel(_))
        ));
    }

    #[test]
    fn depolarizing_on_bell_is_isotropic_mix() {
        let q = 0.37;
        let ch = two_qubit_depolarizing(q).unwrap();
        let rho = bell_state(BellState::PhiPlus).density();
        let image = ch.apply(&rho).unwrap();
        let expected = crate::states::isotropic_mix(&rho, q).unwrap();
        assert!(image.matrix().max_diff(expected.matrix()) < 1e-12);
        assert!(ch.is_unital());
    }

    #[test]
    fn amplitude_damping_is_not_unital() {
        // Single-qubit damping padded onto qubit A.
        let gamma: f64 = 0.4;
        let k0 = ComplexMatrix::from_rows(vec![
            vec![ONE, ZERO],
            vec![ZERO, C64::new((1.0 - gamma).sqrt(), 0.0)],
        ])
        .unwrap();
        let k1 = ComplexMatrix::from_rows(vec![
            vec![ZERO, C64::new(gamma.sqrt(), 0.0)],
            vec![ZERO, ZERO],
        ])
        .unwrap();
        let eye = ComplexMatrix::identity(2);
        let ch = Channel::new(vec![kron(&k0, &eye), kron(&k1, &eye)], Some(dims22())).unwrap();
        assert!(!ch.is_unital());
    }

    #[test]
    fn swap_operator_acts_and_rejects_rectangular_dims() {
        let s = swap_operator(dims22()).unwrap();
        let psi = PureState::basis(dims22(), 0, 1);
        let out = s.matvec(psi.amplitudes());
        assert_eq!(out[dims22().flat(1, 0)], ONE);
        assert!(swap_operator(BipartiteDims::new(2, 3).unwrap()).is_err());
    }

    #[test]
    fn unitary_channel_preserves_purity_dephasing_does_not() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let u = haar_unitary(4, &mut rng);
        let ch = Channel::unitary(u, Some(dims22())).unwrap();
        assert!(is_pure_state_preserving(&ch, 50, 1).preserving);

        let deph = one_sided_dephasing(0.5).unwrap();
        let probe = is_pure_state_preserving(&deph, 50, 1);
        assert!(!probe.preserving);
        let w = probe.witness.unwrap();
        assert!(w.purity < 0.999);
    }

    #[test]
    fn classify_recognizes_local_unitaries() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let a = haar_unitary(2, &mut rng);
        let b = haar_unitary(2, &mut rng);
        let u = kron(&a, &b);
        match classify_product_preserving_unitary(&u, dims22()).unwrap() {
            UnitaryClass::Local { factor_a, factor_b } => {
                assert!(max_diff_up_to_phase(&kron(&factor_a, &factor_b), &u) < 1e-10);
            }
            other => panic!("expected Local, got {}", other.tag()),
        }
    }

    #[test]
    fn classify_recognizes_local_swap() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
        let a = haar_unitary(2, &mut rng);
        let b = haar_unitary(2, &mut rng);
        let u = kron(&a, &b).mul(&swap_operator(dims22()).unwrap());
        match classify_product_preserving_unitary(&u, dims22()).unwrap() {
            UnitaryClass::LocalSwap { factor_a, factor_b } => {
                let rebuilt = kron(&factor_a, &factor_b).mul(&swap_operator(dims22()).unwrap());
                assert!(max_diff_up_to_phase(&rebuilt, &u) < 1e-10);
            }
            other => panic!("expected LocalSwap, got {}", other.tag()),
        }
    }

    #[test]
    fn classify_rejects_cnot_and_cz() {
        // CNOT maps every basis product to a basis product, so only the
        // branch/phase analysis can reject it.
        let verdict = classify_product_preserving_unitary(&cnot(), dims22()).unwrap();
        assert!(matches!(verdict, UnitaryClass::NotProductPreserving));

        let mut cz = ComplexMatrix::identity(4);
        cz.set(3, 3, -ONE);
        let verdict = classify_product_preserving_unitary(&cz, dims22()).unwrap();
        assert!(matches!(verdict, UnitaryClass::NotProductPreserving));
    }

    #[test]
    fn classify_rejects_haar_global_unitary() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let u = haar_unitary(4, &mut rng);
        let verdict = classify_product_preserving_unitary(&u, dims22()).unwrap();
        assert!(matches!(verdict, UnitaryClass::NotProductPreserving));
    }

    #[test]
    fn witness_for_cnot_is_bell_to_plus_zero() {
        match find_entangled_to_product_witness(&cnot(), dims22(), 500, 77).unwrap() {
            WitnessSearch::Witness { entangled, product } => {
                let bell = bell_state(BellState::PhiPlus);
                let diff: f64 = entangled
                    .amplitudes()
                    .iter()
                    .zip(bell.amplitudes())
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max);
                assert!(diff < 1e-12, "expected Phi+ pullback");
                // The product side is |+>|0>.
                let s = std::f64::consts::FRAC_1_SQRT_2;
                assert!((product.amplitudes()[0].re - s).abs() < 1e-12);
                assert!((product.amplitudes()[2].re - s).abs() < 1e-12);
            }
            other => panic!("expected witness, got {other:?}"),
        }
    }

    #[test]
    fn witness_search_reports_no_witness_for_local() {
        let u = kron(&pauli_x(), &pauli_z());
        assert!(matches!(
            find_entangled_to_product_witness(&u, dims22(), 100, 0).unwrap(),
            WitnessSearch::NoWitnessExists
        ));
    }

    #[test]
    fn reconstruction_round_trips_a_unitary() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for d in [2usize, 3, 4] {
            let u = haar_unitary(d, &mut rng);
            let ch = Channel::new(vec![u.clone()], None).unwrap();
            let v = reconstruct_unitary_from_channel(&ch).unwrap();
            assert!(max_diff_up_to_phase(&v, &u) < 1e-10, "d = {d}");
        }
    }

    #[test]
    fn reconstruction_rejects_dephasing_and_constant_channels() {
        let deph = one_sided_dephasing(0.5).unwrap();
        assert!(matches!(
            reconstruct_unitary_from_channel(&deph),
            Err(ReconstructionError::NotPurePreserving { .. })
        ));

        // rho -> |0><0| is trace preserving but not unital.
        let mut k0 = ComplexMatrix::zeros(2, 2);
        k0.set(0, 0, ONE);
        let mut k1 = ComplexMatrix::zeros(2, 2);
        k1.set(0, 1, ONE);
        let constant = Channel::new(vec![k0, k1], None).unwrap();
        assert!(matches!(
            reconstruct_unitary_from_channel(&constant),
            Err(ReconstructionError::NotUnital)
        ));

        // The completely depolarizing channel is unital but far from
        // pure-preserving.
        let depol = two_qubit_depolarizing(1.0).unwrap();
        assert!(matches!(
            reconstruct_unitary_from_channel(&depol),
            Err(ReconstructionError::NotPurePreserving { .. })
        ));
    }

    #[test]
    fn choi_rank_separates_unitary_from_mixing() {
        let u = Channel::unitary(cnot(), Some(dims22())).unwrap();
        assert_eq!(u.effective_kraus_rank(1e-9), 1);
        assert!(u.as_unitary(1e-9).is_some());
        let depol = two_qubit_depolarizing(0.3).unwrap();
        assert_eq!(depol.effective_kraus_rank(1e-9), 16);
        assert!(depol.as_unitary(1e-9).is_none());
    }

    #[test]
    fn apply_preserves_reduced_trace() {
        let ch = two_qubit_depolarizing(0.2).unwrap();
        let rho = bell_state(BellState::PsiMinus).density();
        let out = ch.apply(&rho).unwrap();
        let red = partial_trace(out.matrix(), dims22(), Subsystem::B).unwrap();
        assert!((red.trace().re - 1.0).abs() < 1e-12);
    }
}
