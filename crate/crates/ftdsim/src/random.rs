//! Seeded sampling of Haar-random unitaries and states.
//!
//! Every consumer passes an explicit RNG (callers seed `ChaCha8Rng` for
//! reproducibility), so identical seeds give identical searches and
//! byte-identical outputs downstream.

use rand::Rng;

use crate::states::{DensityOperator, PureState};
use crate::tensor::{inner, outer, vec_norm, BipartiteDims, ComplexMatrix, C64, ZERO};

/// Standard normal via Box-Muller.
fn gaussian(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn ginibre(n: usize, rng: &mut impl Rng) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, n, |_, _| C64::new(gaussian(rng), gaussian(rng)))
}

/// Haar-distributed unitary: QR of a Ginibre matrix via modified
/// Gram-Schmidt. MGS normalization makes the R diagonal positive real,
/// which is exactly the phase convention under which QR of a Ginibre
/// sample is Haar; no further correction is needed.
pub fn haar_unitary(n: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let g = ginibre(n, rng);
    let mut cols: Vec<Vec<C64>> = (0..n).map(|j| g.column(j)).collect();
    for j in 0..n {
        for k in 0..j {
            let proj = inner(&cols[k], &cols[j]);
            for i in 0..n {
                let corr = proj * cols[k][i];
                cols[j][i] -= corr;
            }
        }
        let r = vec_norm(&cols[j]);
        for z in cols[j].iter_mut() {
            *z /= r;
        }
    }
    ComplexMatrix::from_columns(&cols).expect("square")
}

/// Haar-random unit vector of length n.
pub fn haar_vector(n: usize, rng: &mut impl Rng) -> Vec<C64> {
    loop {
        let v: Vec<C64> = (0..n).map(|_| C64::new(gaussian(rng), gaussian(rng))).collect();
        if vec_norm(&v) > 1e-6 {
            return crate::tensor::vec_normalize(&v);
        }
    }
}

pub fn haar_pure(dims: BipartiteDims, rng: &mut impl Rng) -> PureState {
    PureState::new(haar_vector(dims.total(), rng), dims).expect("normalized")
}

/// Random product state with independent Haar factors.
pub fn haar_product(dims: BipartiteDims, rng: &mut impl Rng) -> PureState {
    let a = haar_vector(dims.d_a(), rng);
    let b = haar_vector(dims.d_b(), rng);
    PureState::product(&a, &b, dims).expect("normalized factors")
}

/// Full-rank random density operator: a Dirichlet-ish mixture of `rank`
/// Haar pure states.
pub fn random_density(dims: BipartiteDims, rank: usize, rng: &mut impl Rng) -> DensityOperator {
    let d = dims.total();
    let rank = rank.max(1);
    let mut weights: Vec<f64> = (0..rank).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
    let mut m = ComplexMatrix::zeros(d, d);
    for w in weights {
        let v = haar_vector(d, rng);
        m = m.add(&outer(&v, &v).scale_re(w));
    }
    DensityOperator::new(m.hermitize(), dims).expect("convex mixture of pure states")
}

/// Maximally entangled pure state (u_A tensor u_B) applied to
/// sum_i |ii>/sqrt(d) on a square bipartite space.
pub fn random_maximally_entangled(dims: BipartiteDims, rng: &mut impl Rng) -> PureState {
    assert!(dims.is_square(), "maximal entanglement needs d_A = d_B");
    let d = dims.d_a();
    let u_a = haar_unitary(d, rng);
    let u_b = haar_unitary(d, rng);
    let mut amp = vec![ZERO; dims.total()];
    let s = 1.0 / (d as f64).sqrt();
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                // (u_A kron u_B) |ii> / sqrt(d)
                amp[dims.flat(j, k)] += u_a.get(j, i) * u_b.get(k, i) * s;
            }
        }
    }
    PureState::new(amp, dims).expect("unitary image of a unit vector")
}
