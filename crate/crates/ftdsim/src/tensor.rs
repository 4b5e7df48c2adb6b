//! Dense complex linear algebra sized for small bipartite quantum systems.
//!
//! Matrices are stored row-major. The product-basis ordering is fixed
//! project-wide: |j>_A tensor |k>_B lives at index `j * d_B + k`, so the
//! first tensor factor varies slowest. Everything downstream (partial
//! traces, partial transposes, Schmidt reshapes, the SWAP operator)
//! assumes this convention.
//!
//! Eigenvalues of Hermitian matrices come from a cyclic Jacobi sweep,
//! which is exact enough at these sizes (nothing here exceeds 36 x 36)
//! and has no failure modes requiring pivoting or shifts. Singular
//! values come from a one-sided Jacobi orthogonalization, preferred over
//! eigendecomposing m^dag m because it keeps full accuracy on small
//! singular values, which the product tests downstream care about.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Hermiticity tolerance: max entrywise |m - m^dag|.
pub const TAU_HERM: f64 = 1e-9;
/// Unitarity tolerance: max entrywise |u^dag u - I|.
pub const TAU_UNITARY: f64 = 1e-9;
/// Jacobi stops when the off-diagonal Frobenius norm drops below this
/// (scaled by the matrix norm when that norm exceeds one).
const JACOBI_OFF_THRESHOLD: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Dimensions of a bipartite system; both factors must be at least 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BipartiteDims {
    d_a: usize,
    d_b: usize,
}

impl BipartiteDims {
    pub fn new(d_a: usize, d_b: usize) -> Result<Self> {
        if d_a < 2 || d_b < 2 {
            return Err(Error::OutOfRange(format!(
                "bipartite dimensions must both be >= 2, got {d_a} x {d_b}"
            )));
        }
        Ok(Self { d_a, d_b })
    }

    pub fn d_a(&self) -> usize {
        self.d_a
    }

    pub fn d_b(&self) -> usize {
        self.d_b
    }

    pub fn total(&self) -> usize {
        self.d_a * self.d_b
    }

    /// Index of |j>_A tensor |k>_B in the product basis.
    pub fn flat(&self, j: usize, k: usize) -> usize {
        debug_assert!(j < self.d_a && k < self.d_b);
        j * self.d_b + k
    }

    pub fn is_square(&self) -> bool {
        self.d_a == self.d_b
    }
}

/// Which tensor factor an operation targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    A,
    B,
}

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, ONE);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<C64>>) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::DimensionMismatch("matrix must be non-empty".into()));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged row lengths".into()));
        }
        let m = Self {
            rows: rows.len(),
            cols,
            entries: rows.into_iter().flatten().collect(),
        };
        m.check_finite()?;
        Ok(m)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.set(r, c, f(r, c));
            }
        }
        m
    }

    /// Column vector from a slice of amplitudes.
    pub fn column_vector(v: &[C64]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            entries: v.to_vec(),
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        for (i, z) in self.entries.iter().enumerate() {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::NonFinite(format!(
                    "entry ({}, {}) = {z}",
                    i / self.cols,
                    i % self.cols
                )));
            }
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.entries[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: C64) {
        self.entries[r * self.cols + c] = v;
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn column(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn from_columns(cols: &[Vec<C64>]) -> Result<Self> {
        if cols.is_empty() || cols[0].is_empty() {
            return Err(Error::DimensionMismatch("matrix must be non-empty".into()));
        }
        let rows = cols[0].len();
        if cols.iter().any(|c| c.len() != rows) {
            return Err(Error::DimensionMismatch("ragged column lengths".into()));
        }
        Ok(Self::from_fn(rows, cols.len(), |r, c| cols[c][r]))
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r).conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(
            self.cols, other.rows,
            "matrix product dimension mismatch: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == ZERO {
                    continue;
                }
                for c in 0..other.cols {
                    let v = out.get(r, c) + a * other.get(k, c);
                    out.set(r, c, v);
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self.get(r, c) * v[c]).sum())
            .collect()
    }

    pub fn trace(&self) -> C64 {
        assert!(self.is_square());
        (0..self.rows).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Max entrywise |self - other|.
    pub fn max_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Max entrywise deviation from the adjoint.
    pub fn hermiticity_defect(&self) -> f64 {
        assert!(self.is_square());
        let mut worst = 0.0f64;
        for r in 0..self.rows {
            for c in r..self.cols {
                worst = worst.max((self.get(r, c) - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && self.hermiticity_defect() <= tol
    }

    /// (m + m^dag) / 2, the nearest Hermitian matrix.
    pub fn hermitize(&self) -> Self {
        assert!(self.is_square());
        Self::from_fn(self.rows, self.cols, |r, c| {
            (self.get(r, c) + self.get(c, r).conj()) * 0.5
        })
    }

    pub fn unitarity_defect(&self) -> f64 {
        let gram = self.adjoint().mul(self);
        gram.max_diff(&Self::identity(self.cols))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.is_square() && self.unitarity_defect() <= tol
    }

    pub fn check_unitary(&self, tol: f64) -> Result<()> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "unitary must be square, got {} x {}",
                self.rows, self.cols
            )));
        }
        let deviation = self.unitarity_defect();
        if deviation > tol {
            return Err(Error::NotUnitary { deviation, tol });
        }
        Ok(())
    }
}

impl std::fmt::Display for ComplexMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for r in 0..self.rows {
            for c in 0..self.cols {
                if c > 0 {
                    write!(f, " ")?;
                }
                let z = self.get(r, c);
                write!(f, "{:.6}{:+.6}j", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// |u><v| outer product.
pub fn outer(u: &[C64], v: &[C64]) -> ComplexMatrix {
    ComplexMatrix::from_fn(u.len(), v.len(), |r, c| u[r] * v[c].conj())
}

/// <u|v> with conjugation on the left argument.
pub fn inner(u: &[C64], v: &[C64]) -> C64 {
    assert_eq!(u.len(), v.len());
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vec_normalize(v: &[C64]) -> Vec<C64> {
    let n = vec_norm(v);
    assert!(n > 0.0, "cannot normalize the zero vector");
    v.iter().map(|z| z / n).collect()
}

pub fn vec_kron(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(x * y);
        }
    }
    out
}

/// Kronecker product in the project ordering: (a kron b)[(j,k),(j',k')] =
/// a[j,j'] * b[k,k'] with row index j * rows(b) + k.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(a.rows() * b.rows(), a.cols() * b.cols());
    for ja in 0..a.rows() {
        for ka in 0..a.cols() {
            let f = a.get(ja, ka);
            if f == ZERO {
                continue;
            }
            for jb in 0..b.rows() {
                for kb in 0..b.cols() {
                    out.set(ja * b.rows() + jb, ka * b.cols() + kb, f * b.get(jb, kb));
                }
            }
        }
    }
    out
}

fn check_bipartite(m: &ComplexMatrix, dims: BipartiteDims) -> Result<()> {
    if !m.is_square() || m.rows() != dims.total() {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {} x {}, expected {} x {} for dims {} x {}",
            m.rows(),
            m.cols(),
            dims.total(),
            dims.total(),
            dims.d_a(),
            dims.d_b()
        )));
    }
    Ok(())
}

/// Trace out one subsystem of an operator on the product space.
pub fn partial_trace(
    m: &ComplexMatrix,
    dims: BipartiteDims,
    traced: Subsystem,
) -> Result<ComplexMatrix> {
    check_bipartite(m, dims)?;
    let (da, db) = (dims.d_a(), dims.d_b());
    Ok(match traced {
        Subsystem::B => ComplexMatrix::from_fn(da, da, |j, jp| {
            (0..db).map(|k| m.get(dims.flat(j, k), dims.flat(jp, k))).sum()
        }),
        Subsystem::A => ComplexMatrix::from_fn(db, db, |k, kp| {
            (0..da).map(|j| m.get(dims.flat(j, k), dims.flat(j, kp))).sum()
        }),
    })
}

/// Partial transpose on the B factor: (j,k),(j',k') -> (j,k'),(j',k).
pub fn partial_transpose(m: &ComplexMatrix, dims: BipartiteDims) -> Result<ComplexMatrix> {
    check_bipartite(m, dims)?;
    let (da, db) = (dims.d_a(), dims.d_b());
    let mut out = ComplexMatrix::zeros(m.rows(), m.cols());
    for j in 0..da {
        for jp in 0..da {
            for k in 0..db {
                for kp in 0..db {
                    out.set(
                        dims.flat(j, k),
                        dims.flat(jp, kp),
                        m.get(dims.flat(j, kp), dims.flat(jp, k)),
                    );
                }
            }
        }
    }
    Ok(out)
}

/// One complex Jacobi rotation: returns (c, s, phase) zeroing the
/// off-diagonal element g of the Hermitian 2x2 [[app, g], [g*, aqq]].
/// The rotation matrix is [[c, s*phase], [-s*conj(phase), c]].
fn jacobi_rotation(app: f64, aqq: f64, g: C64) -> (f64, f64, C64) {
    let absg = g.norm();
    let phase = g / absg;
    let tau = (aqq - app) / (2.0 * absg);
    let t = if tau == 0.0 {
        1.0
    } else {
        tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    (c, t * c, phase)
}

fn off_diagonal_norm(a: &ComplexMatrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for p in 0..n {
        for q in 0..n {
            if p != q {
                s += a.get(p, q).norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Eigenvalues and eigenvectors of a Hermitian matrix by cyclic Jacobi
/// sweeps. Eigenvalues ascend; eigenvectors are the matching columns of
/// the returned unitary. The input is Hermitized before iterating and
/// rejected if its Hermiticity defect exceeds `TAU_HERM`.
pub fn hermitian_eigen(m: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "eigendecomposition needs a square matrix, got {} x {}",
            m.rows(),
            m.cols()
        )));
    }
    let deviation = m.hermiticity_defect();
    if deviation > TAU_HERM {
        return Err(Error::NonHermitian {
            deviation,
            tol: TAU_HERM,
        });
    }
    m.check_finite()?;

    let n = m.rows();
    let mut a = m.hermitize();
    let mut v = ComplexMatrix::identity(n);
    let stop = JACOBI_OFF_THRESHOLD * a.frobenius_norm().max(1.0);

    for _sweep in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&a) <= stop {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let g = a.get(p, q);
                if g.norm() < 1e-300 {
                    a.set(p, q, ZERO);
                    a.set(q, p, ZERO);
                    continue;
                }
                let (c, s, phase) = jacobi_rotation(a.get(p, p).re, a.get(q, q).re, g);
                // Columns p, q of a and v; then rows p, q of a by symmetry.
                for i in 0..n {
                    let aip = a.get(i, p);
                    let aiq = a.get(i, q);
                    a.set(i, p, aip * c - aiq * s * phase.conj());
                    a.set(i, q, aip * s * phase + aiq * c);
                    let vip = v.get(i, p);
                    let viq = v.get(i, q);
                    v.set(i, p, vip * c - viq * s * phase.conj());
                    v.set(i, q, vip * s * phase + viq * c);
                }
                for i in 0..n {
                    let api = a.get(p, i);
                    let aqi = a.get(q, i);
                    a.set(p, i, api * c - aqi * s * phase);
                    a.set(q, i, api * s * phase.conj() + aqi * c);
                }
                a.set(p, q, ZERO);
                a.set(q, p, ZERO);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a.get(i, i).re).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| v.get(r, order[c]));
    Ok((values, vectors))
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn hermitian_spectrum(m: &ComplexMatrix) -> Result<Vec<f64>> {
    hermitian_eigen(m).map(|(values, _)| values)
}

/// Thin singular value decomposition, m = u diag(sigma) v^dag, truncated
/// at numerically zero singular values. Columns of `u` and `v` are the
/// singular vectors; `sigma` descends.
pub struct Svd {
    pub sigma: Vec<f64>,
    pub u: ComplexMatrix,
    pub v: ComplexMatrix,
}

/// One-sided Jacobi SVD: rotate column pairs until all are orthogonal.
pub fn svd(m: &ComplexMatrix) -> Svd {
    let (rows, cols) = (m.rows(), m.cols());
    let mut w = m.clone();
    let mut v = ComplexMatrix::identity(cols);

    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let (mut hpp, mut hqq, mut hpq) = (0.0, 0.0, ZERO);
                for i in 0..rows {
                    let wp = w.get(i, p);
                    let wq = w.get(i, q);
                    hpp += wp.norm_sqr();
                    hqq += wq.norm_sqr();
                    hpq += wp.conj() * wq;
                }
                let absg = hpq.norm();
                if absg <= 1e-14 * (hpp * hqq).sqrt() || absg < 1e-300 {
                    continue;
                }
                rotated = true;
                let (c, s, phase) = jacobi_rotation(hpp, hqq, hpq);
                for i in 0..rows {
                    let wp = w.get(i, p);
                    let wq = w.get(i, q);
                    w.set(i, p, wp * c - wq * s * phase.conj());
                    w.set(i, q, wp * s * phase + wq * c);
                }
                for i in 0..cols {
                    let vp = v.get(i, p);
                    let vq = v.get(i, q);
                    v.set(i, p, vp * c - vq * s * phase.conj());
                    v.set(i, q, vp * s * phase + vq * c);
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut triplets: Vec<(f64, Vec<C64>, Vec<C64>)> = Vec::new();
    for j in 0..cols {
        let col = w.column(j);
        let sigma = vec_norm(&col);
        triplets.push((sigma, col, v.column(j)));
    }
    triplets.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let floor = 1e-14 * triplets.first().map(|t| t.0).unwrap_or(0.0).max(1.0);

    let mut sigma = Vec::new();
    let mut us = Vec::new();
    let mut vs = Vec::new();
    for (s, ucol, vcol) in triplets {
        if s <= floor {
            continue;
        }
        sigma.push(s);
        us.push(ucol.iter().map(|z| z / s).collect());
        vs.push(vcol);
    }
    // A zero matrix keeps one zero triplet so callers always see a shape.
    if sigma.is_empty() {
        sigma.push(0.0);
        us.push({
            let mut e = vec![ZERO; rows];
            e[0] = ONE;
            e
        });
        vs.push({
            let mut e = vec![ZERO; cols];
            e[0] = ONE;
            e
        });
    }
    Svd {
        sigma,
        u: ComplexMatrix::from_columns(&us).expect("non-empty"),
        v: ComplexMatrix::from_columns(&vs).expect("non-empty"),
    }
}

/// Max entrywise |a - z*b| minimized over unimodular z, with z fixed by
/// aligning the largest-magnitude entry of b. Falls back to the plain
/// difference when that entry is negligible.
pub fn max_diff_up_to_phase(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    assert_eq!((a.rows(), a.cols()), (b.rows(), b.cols()));
    let mut idx = 0;
    let mut best = 0.0;
    for (i, z) in b.entries().iter().enumerate() {
        if z.norm() > best {
            best = z.norm();
            idx = i;
        }
    }
    if best < 1e-12 {
        return a.max_diff(b);
    }
    let z = a.entries()[idx] / b.entries()[idx];
    if z.norm() < 1e-12 {
        return a.max_diff(b);
    }
    let phase = z / z.norm();
    a.max_diff(&b.scale(phase))
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_rows(vec![vec![ZERO, ONE], vec![ONE, ZERO]]).unwrap()
}

pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::from_rows(vec![vec![ZERO, -I], vec![I, ZERO]]).unwrap()
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_rows(vec![vec![ONE, ZERO], vec![ZERO, -ONE]]).unwrap()
}
