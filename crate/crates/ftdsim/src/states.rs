//! Pure and mixed states on a bipartite space, Schmidt structure, and
//! the product tests the rest of the crate leans on.
//!
//! A pure state |psi> with amplitudes psi[j * d_B + k] reshapes into the
//! d_A x d_B coefficient matrix M[j][k]; its singular values are the
//! Schmidt coefficients and the state is a product exactly when only one
//! of them is nonzero. The two-parameter test `phase_family_all_product`
//! decides whether phi + z*psi stays product for every unimodular z; it
//! does so by a polynomial identity instead of sampling: each 2x2 minor
//! determinant of M_phi + z*M_psi is a quadratic in z, and the family is
//! all-product iff every coefficient of every such quadratic vanishes.

use crate::error::{Error, Result};
use crate::tensor::{
    hermitian_spectrum, kron, outer, svd, vec_kron, vec_norm, BipartiteDims, ComplexMatrix,
    Subsystem, C64, ONE, TAU_HERM, ZERO,
};

/// Norm tolerance for pure-state amplitudes.
pub const TAU_NORM: f64 = 1e-10;
/// Trace and positivity tolerance for density operators.
pub const TAU_STATE: f64 = 1e-9;
/// Schmidt coefficients above this count toward the Schmidt rank.
pub const TAU_SCHMIDT: f64 = 1e-8;
/// Tolerance on the minor-determinant coefficients in the phase-family test.
pub const TAU_POLY: f64 = 1e-9;

/// Unit vector on a bipartite space.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: Vec<C64>,
    dims: BipartiteDims,
}

impl PureState {
    pub fn new(amplitudes: Vec<C64>, dims: BipartiteDims) -> Result<Self> {
        if amplitudes.len() != dims.total() {
            return Err(Error::DimensionMismatch(format!(
                "state has {} amplitudes, dims {} x {} need {}",
                amplitudes.len(),
                dims.d_a(),
                dims.d_b(),
                dims.total()
            )));
        }
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("pure-state amplitude".into()));
        }
        let norm = vec_norm(&amplitudes);
        if (norm - 1.0).abs() > TAU_NORM {
            return Err(Error::InvalidState(format!(
                "pure state norm {norm} deviates from 1 beyond {TAU_NORM:.1e}"
            )));
        }
        Ok(Self { amplitudes, dims })
    }

    /// Normalizes before constructing; rejects near-zero vectors.
    pub fn from_unnormalized(amplitudes: &[C64], dims: BipartiteDims) -> Result<Self> {
        let norm = vec_norm(amplitudes);
        if norm < 1e-12 {
            return Err(Error::InvalidState(
                "cannot normalize a (near-)zero vector".into(),
            ));
        }
        Self::new(amplitudes.iter().map(|z| z / norm).collect(), dims)
    }

    /// Product basis state |j>_A tensor |k>_B.
    pub fn basis(dims: BipartiteDims, j: usize, k: usize) -> Self {
        let mut amplitudes = vec![ZERO; dims.total()];
        amplitudes[dims.flat(j, k)] = ONE;
        Self { amplitudes, dims }
    }

    /// Tensor product of local unit vectors.
    pub fn product(a: &[C64], b: &[C64], dims: BipartiteDims) -> Result<Self> {
        if a.len() != dims.d_a() || b.len() != dims.d_b() {
            return Err(Error::DimensionMismatch(
                "local factor lengths do not match dims".into(),
            ));
        }
        Self::new(vec_kron(a, b), dims)
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn dims(&self) -> BipartiteDims {
        self.dims
    }

    /// Reshape into the d_A x d_B coefficient matrix M[j][k] = psi[j*d_B + k].
    pub fn coefficient_matrix(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.dims.d_a(), self.dims.d_b(), |j, k| {
            self.amplitudes[self.dims.flat(j, k)]
        })
    }

    /// |psi><psi| as a validated density operator.
    pub fn density(&self) -> DensityOperator {
        DensityOperator {
            matrix: outer(&self.amplitudes, &self.amplitudes),
            dims: self.dims,
        }
    }
}

/// Validation bounds for density operators. The defaults are the
/// construction-time tolerances; the integrator re-validates evolved
/// states against its own slightly looser drift bound.
#[derive(Debug, Clone, Copy)]
pub struct StateTolerance {
    pub hermiticity: f64,
    pub trace: f64,
    pub positivity: f64,
}

impl Default for StateTolerance {
    fn default() -> Self {
        Self {
            hermiticity: TAU_HERM,
            trace: TAU_STATE,
            positivity: TAU_STATE,
        }
    }
}

/// Hermitian, unit-trace, positive-semidefinite operator on the product
/// space (within `StateTolerance`).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: ComplexMatrix,
    dims: BipartiteDims,
}

impl DensityOperator {
    pub fn new(matrix: ComplexMatrix, dims: BipartiteDims) -> Result<Self> {
        Self::with_tolerance(matrix, dims, StateTolerance::default())
    }

    pub fn with_tolerance(
        matrix: ComplexMatrix,
        dims: BipartiteDims,
        tol: StateTolerance,
    ) -> Result<Self> {
        if !matrix.is_square() || matrix.rows() != dims.total() {
            return Err(Error::DimensionMismatch(format!(
                "density matrix is {} x {}, dims need {}",
                matrix.rows(),
                matrix.cols(),
                dims.total()
            )));
        }
        matrix.check_finite()?;
        let herm = matrix.hermiticity_defect();
        if herm > tol.hermiticity {
            return Err(Error::NonHermitian {
                deviation: herm,
                tol: tol.hermiticity,
            });
        }
        let trace = matrix.trace();
        if (trace.re - 1.0).abs() > tol.trace || trace.im.abs() > tol.trace {
            return Err(Error::InvalidState(format!(
                "trace {trace} deviates from 1 beyond {:.1e}",
                tol.trace
            )));
        }
        let spectrum = hermitian_spectrum(&matrix.hermitize())?;
        if spectrum[0] < -tol.positivity {
            return Err(Error::InvalidState(format!(
                "minimum eigenvalue {:.3e} below -{:.1e}",
                spectrum[0], tol.positivity
            )));
        }
        Ok(Self { matrix, dims })
    }

    /// Skips validation; for internal use where the invariants are
    /// enforced by construction.
    pub(crate) fn from_parts_unchecked(matrix: ComplexMatrix, dims: BipartiteDims) -> Self {
        Self { matrix, dims }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dims(&self) -> BipartiteDims {
        self.dims
    }

    /// Maximally mixed state I/(d_A d_B).
    pub fn maximally_mixed(dims: BipartiteDims) -> Self {
        let d = dims.total();
        Self {
            matrix: ComplexMatrix::identity(d).scale_re(1.0 / d as f64),
            dims,
        }
    }

    pub fn purity(&self) -> f64 {
        self.matrix.mul(&self.matrix).trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_spectrum(&self.matrix.hermitize()).expect("validated Hermitian")[0]
    }

    pub fn reduced(&self, traced: Subsystem) -> ComplexMatrix {
        crate::tensor::partial_trace(&self.matrix, self.dims, traced).expect("validated dims")
    }
}

/// Schmidt data of a pure state: nonincreasing coefficients and matching
/// orthonormal local vectors, with psi = sum_i c_i u_i tensor v_i.
#[derive(Debug, Clone)]
pub struct SchmidtDecomposition {
    pub coefficients: Vec<f64>,
    pub left_vectors: Vec<Vec<C64>>,
    pub right_vectors: Vec<Vec<C64>>,
}

impl SchmidtDecomposition {
    /// Number of coefficients above `TAU_SCHMIDT`.
    pub fn rank(&self) -> usize {
        self.coefficients.iter().filter(|c| **c > TAU_SCHMIDT).count()
    }

    /// Second coefficient, or 0 when only one survived truncation.
    pub fn second_coefficient(&self) -> f64 {
        self.coefficients.get(1).copied().unwrap_or(0.0)
    }
}

/// Schmidt decomposition via SVD of the reshaped coefficient matrix.
/// With M = sum_i s_i u_i w_i^dag, the right Schmidt vectors are the
/// conjugated w_i so that M = sum_i s_i u_i v_i^T.
pub fn schmidt_decompose(psi: &PureState) -> SchmidtDecomposition {
    let f = svd(&psi.coefficient_matrix());
    let left_vectors: Vec<Vec<C64>> = (0..f.sigma.len()).map(|i| f.u.column(i)).collect();
    let right_vectors: Vec<Vec<C64>> = (0..f.sigma.len())
        .map(|i| f.v.column(i).iter().map(|z| z.conj()).collect())
        .collect();
    SchmidtDecomposition {
        coefficients: f.sigma,
        left_vectors,
        right_vectors,
    }
}

/// True when the Schmidt rank is 1 at tolerance `TAU_SCHMIDT`.
pub fn is_product(psi: &PureState) -> bool {
    schmidt_decompose(psi).rank() <= 1
}

/// The four Bell states on 2 x 2, in the conventions
/// Phi+- = (|00> +- |11>)/sqrt(2) and Psi+- = (|01> +- |10>)/sqrt(2).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BellState {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

pub fn bell_state(which: BellState) -> PureState {
    let dims = BipartiteDims::new(2, 2).unwrap();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let h = C64::new(s, 0.0);
    let amplitudes = match which {
        BellState::PhiPlus => vec![h, ZERO, ZERO, h],
        BellState::PhiMinus => vec![h, ZERO, ZERO, -h],
        BellState::PsiPlus => vec![ZERO, h, h, ZERO],
        BellState::PsiMinus => vec![ZERO, h, -h, ZERO],
    };
    PureState { amplitudes, dims }
}

/// lambda * I/(d_A d_B) + (1 - lambda) * rho for lambda in [0, 1].
pub fn isotropic_mix(rho: &DensityOperator, lambda: f64) -> Result<DensityOperator> {
    if !(0.0..=1.0).contains(&lambda) || !lambda.is_finite() {
        return Err(Error::OutOfRange(format!(
            "mixing weight must lie in [0, 1], got {lambda}"
        )));
    }
    let d = rho.dims().total();
    let matrix = ComplexMatrix::identity(d)
        .scale_re(lambda / d as f64)
        .add(&rho.matrix().scale_re(1.0 - lambda));
    Ok(DensityOperator {
        matrix,
        dims: rho.dims(),
    })
}

/// Decides whether phi + z*psi is a product vector for every unimodular
/// z (the test is projective, so the unnormalized sum is fine). Each 2x2
/// minor determinant of M_phi + z*M_psi expands to
/// det_phi + z * (cross term) + z^2 * det_psi, and the family is
/// all-product iff all three coefficients of every minor vanish.
pub fn phase_family_all_product(phi: &PureState, psi: &PureState) -> Result<bool> {
    if phi.dims() != psi.dims() {
        return Err(Error::DimensionMismatch(
            "phase-family inputs must share dims".into(),
        ));
    }
    let mp = phi.coefficient_matrix();
    let mq = psi.coefficient_matrix();
    let (da, db) = (phi.dims().d_a(), phi.dims().d_b());
    for r1 in 0..da {
        for r2 in (r1 + 1)..da {
            for c1 in 0..db {
                for c2 in (c1 + 1)..db {
                    let (ap, bp, cp, dp) =
                        (mp.get(r1, c1), mp.get(r1, c2), mp.get(r2, c1), mp.get(r2, c2));
                    let (aq, bq, cq, dq) =
                        (mq.get(r1, c1), mq.get(r1, c2), mq.get(r2, c1), mq.get(r2, c2));
                    let det_phi = ap * dp - bp * cp;
                    let cross = ap * dq + aq * dp - bp * cq - bq * cp;
                    let det_psi = aq * dq - bq * cq;
                    if det_phi.norm() > TAU_POLY
                        || cross.norm() > TAU_POLY
                        || det_psi.norm() > TAU_POLY
                    {
                        return Ok(false);
                    }
                }
            }
        }
    }
    Ok(true)
}

/// Local unitaries act on states as (u_A tensor u_B) |psi>.
pub fn apply_local(u_a: &ComplexMatrix, u_b: &ComplexMatrix, psi: &PureState) -> Result<PureState> {
    let dims = psi.dims();
    if u_a.rows() != dims.d_a() || u_b.rows() != dims.d_b() {
        return Err(Error::DimensionMismatch(
            "local unitary sizes do not match dims".into(),
        ));
    }
    PureState::new(kron(u_a, u_b).matvec(psi.amplitudes()), dims)
}
