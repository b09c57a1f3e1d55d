//! Dense multi-qubit linear algebra: pure states, density matrices, reductions
//! and Pauli expectations.
//!
//! Registers are big-endian in label order: the first label is the most
//! significant bit of a basis index, so for labels `[S, A]` the index of
//! `|s a⟩` is `2*s + a`.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Tolerance for algebraic identities.
pub const ALGEBRA_TOL: f64 = 1e-12;
/// Floor below which an eigenvalue counts as negative.
pub const PSD_FLOOR: f64 = 1e-10;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Pauli matrix by index: 0 = identity, 1 = X, 2 = Y, 3 = Z.
pub fn pauli(index: usize) -> CMatrix {
    match index {
        0 => CMatrix::identity(2, 2),
        1 => CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        2 => CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
        3 => CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        _ => panic!("Pauli index {index} out of range"),
    }
}

pub fn sigma_x() -> CMatrix {
    pauli(1)
}

pub fn sigma_y() -> CMatrix {
    pauli(2)
}

pub fn sigma_z() -> CMatrix {
    pauli(3)
}

pub fn hadamard() -> CMatrix {
    let h = c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    CMatrix::from_row_slice(2, 2, &[h, h, h, -h])
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn kron_vec(a: &CVector, b: &CVector) -> CVector {
    a.kronecker(b)
}

pub fn outer(a: &CVector, b: &CVector) -> CMatrix {
    a * b.adjoint()
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entrywise deviation of `m` from its adjoint.
pub fn hermiticity_error(m: &CMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    max_abs(&(m - m.adjoint()))
}

pub fn unitarity_error(m: &CMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    max_abs(&(m.adjoint() * m - CMatrix::identity(n, n)))
}

pub fn is_unitary(m: &CMatrix) -> bool {
    unitarity_error(m) <= ALGEBRA_TOL
}

/// Eigenvalues of a Hermitian matrix, sorted ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut values: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

/// Principal square root of a Hermitian positive semidefinite matrix. Small
/// negative eigenvalues from rounding are clamped to zero.
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    let eig = m.clone().symmetric_eigen();
    let roots = eig.eigenvalues.map(|v| c(v.max(0.0).sqrt(), 0.0));
    &eig.eigenvectors * CMatrix::from_diagonal(&roots) * eig.eigenvectors.adjoint()
}

fn check_labels(labels: &[String]) -> Result<()> {
    let mut seen = HashSet::new();
    for label in labels {
        if !seen.insert(label.as_str()) {
            return Err(Error::LabelCollision(label.clone()));
        }
    }
    Ok(())
}

fn label_positions(labels: &[String], wanted: &[&str]) -> Result<Vec<usize>> {
    wanted
        .iter()
        .map(|w| {
            labels
                .iter()
                .position(|l| l == w)
                .ok_or_else(|| Error::UnknownLabel((*w).to_string()))
        })
        .collect()
}

/// Bit mask of qubit `position` in an `n`-qubit big-endian register.
#[inline]
fn bit(n: usize, position: usize) -> usize {
    1 << (n - 1 - position)
}

/// Spreads the bits of `value` (big-endian over `positions.len()` bits) onto
/// the given register positions.
fn scatter(value: usize, positions: &[usize], n: usize) -> usize {
    let k = positions.len();
    positions
        .iter()
        .enumerate()
        .filter(|(i, _)| value & (1 << (k - 1 - i)) != 0)
        .fold(0, |acc, (_, &p)| acc | bit(n, p))
}

/// Builds the `2^n`-dimensional operator acting as `op` on `targets` and as
/// the identity elsewhere.
pub fn embed_operator(op: &CMatrix, targets: &[usize], n: usize) -> CMatrix {
    let k = targets.len();
    assert_eq!(op.nrows(), 1 << k, "operator arity does not match targets");
    let rest: Vec<usize> = (0..n).filter(|q| !targets.contains(q)).collect();
    let dim = 1 << n;
    let mut full = CMatrix::zeros(dim, dim);
    for r in 0..(1 << rest.len()) {
        let base = scatter(r, &rest, n);
        for i in 0..(1 << k) {
            let row = base | scatter(i, targets, n);
            for j in 0..(1 << k) {
                let col = base | scatter(j, targets, n);
                full[(row, col)] = op[(i, j)];
            }
        }
    }
    full
}

/// Normalized amplitude vector over a labelled qubit register.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: CVector,
    labels: Vec<String>,
}

impl PureState {
    pub fn new<L, S>(amplitudes: CVector, labels: L) -> Result<Self>
    where
        L: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        check_labels(&labels)?;
        let expected = 1usize << labels.len();
        if amplitudes.len() != expected || labels.is_empty() {
            return Err(Error::DimensionMismatch {
                expected,
                found: amplitudes.len(),
            });
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > ALGEBRA_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self { amplitudes, labels })
    }

    /// Normalizes `amplitudes` before validating.
    pub fn normalized<L, S>(amplitudes: CVector, labels: L) -> Result<Self>
    where
        L: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized(norm));
        }
        Self::new(amplitudes.unscale(norm), labels)
    }

    /// Computational basis state; `bits[0]` belongs to the first label.
    pub fn basis<S: Into<String>>(bits: &[u8], labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let n = bits.len();
        let index = bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b != 0)
            .fold(0, |acc, (q, _)| acc | bit(n, q));
        let mut amplitudes = CVector::zeros(1 << n);
        amplitudes[index] = ONE;
        Self::new(amplitudes, labels)
    }

    /// Single qubit `cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩`.
    pub fn from_bloch_angles(theta: f64, phi: f64, label: impl Into<String>) -> Self {
        let amplitudes = CVector::from_vec(vec![
            c((theta / 2.0).cos(), 0.0),
            Complex64::from_polar((theta / 2.0).sin(), phi),
        ]);
        Self {
            amplitudes,
            labels: vec![label.into()],
        }
    }

    /// Single qubit from raw amplitudes `(α, β)`.
    pub fn qubit(alpha: Complex64, beta: Complex64, label: impl Into<String>) -> Result<Self> {
        Self::new(CVector::from_vec(vec![alpha, beta]), [label.into()])
    }

    pub fn num_qubits(&self) -> usize {
        self.labels.len()
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn relabel<S: Into<String>>(mut self, labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() != self.labels.len() {
            return Err(Error::DimensionMismatch {
                expected: self.labels.len(),
                found: labels.len(),
            });
        }
        check_labels(&labels)?;
        self.labels = labels;
        Ok(self)
    }

    pub fn tensor(&self, other: &PureState) -> Result<PureState> {
        let labels: Vec<String> = self.labels.iter().chain(&other.labels).cloned().collect();
        check_labels(&labels)?;
        Ok(PureState {
            amplitudes: kron_vec(&self.amplitudes, &other.amplitudes),
            labels,
        })
    }

    /// The orthogonal single-qubit state `(−β*, α*)`.
    pub fn orthogonal(&self) -> Result<PureState> {
        self.require_single()?;
        let (a, b) = (self.amplitudes[0], self.amplitudes[1]);
        Ok(PureState {
            amplitudes: CVector::from_vec(vec![-b.conj(), a.conj()]),
            labels: self.labels.clone(),
        })
    }

    /// Complex conjugate of the amplitudes in the computational basis.
    pub fn conjugate(&self) -> PureState {
        PureState {
            amplitudes: self.amplitudes.map(|z| z.conj()),
            labels: self.labels.clone(),
        }
    }

    pub fn require_single(&self) -> Result<()> {
        if self.num_qubits() == 1 {
            Ok(())
        } else {
            Err(Error::NotSingleQubit(self.num_qubits()))
        }
    }

    pub fn inner(&self, other: &PureState) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// Applies `op` to the qubits named by `targets`, in that order.
    pub fn apply(&mut self, op: &CMatrix, targets: &[&str]) -> Result<()> {
        let positions = label_positions(&self.labels, targets)?;
        let k = positions.len();
        if op.nrows() != 1 << k || op.ncols() != 1 << k {
            return Err(Error::DimensionMismatch {
                expected: 1 << k,
                found: op.nrows(),
            });
        }
        let n = self.num_qubits();
        let rest: Vec<usize> = (0..n).filter(|q| !positions.contains(q)).collect();
        let offsets: Vec<usize> = (0..1 << k).map(|i| scatter(i, &positions, n)).collect();
        let mut local = CVector::zeros(1 << k);
        for r in 0..(1 << rest.len()) {
            let base = scatter(r, &rest, n);
            for (i, off) in offsets.iter().enumerate() {
                local[i] = self.amplitudes[base | off];
            }
            let mapped = op * &local;
            for (i, off) in offsets.iter().enumerate() {
                self.amplitudes[base | off] = mapped[i];
            }
        }
        Ok(())
    }

    /// Fixes the global phase so that the largest-magnitude amplitude (the
    /// first one, among ties) is real and positive.
    pub fn canonical_phase(&self) -> PureState {
        PureState {
            amplitudes: canonicalize_phase(&self.amplitudes),
            labels: self.labels.clone(),
        }
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix {
            matrix: outer(&self.amplitudes, &self.amplitudes),
            labels: self.labels.clone(),
        }
    }

    /// Reduced density matrix on `keep`, computed directly from the
    /// amplitudes. The result lists the kept qubits in register order.
    pub fn reduced(&self, keep: &[&str]) -> Result<DensityMatrix> {
        let mut positions = label_positions(&self.labels, keep)?;
        positions.sort_unstable();
        positions.dedup();
        let n = self.num_qubits();
        let traced: Vec<usize> = (0..n).filter(|q| !positions.contains(q)).collect();
        let k = positions.len();
        let kept_offsets: Vec<usize> = (0..1 << k).map(|i| scatter(i, &positions, n)).collect();
        let mut matrix = CMatrix::zeros(1 << k, 1 << k);
        for t in 0..(1 << traced.len()) {
            let base = scatter(t, &traced, n);
            for (i, oi) in kept_offsets.iter().enumerate() {
                let ai = self.amplitudes[base | oi];
                if ai == ZERO {
                    continue;
                }
                for (j, oj) in kept_offsets.iter().enumerate() {
                    matrix[(i, j)] += ai * self.amplitudes[base | oj].conj();
                }
            }
        }
        Ok(DensityMatrix {
            matrix,
            labels: positions.iter().map(|&p| self.labels[p].clone()).collect(),
        })
    }

    /// `1 − |⟨a|b⟩|`, zero when the states agree up to a global phase.
    pub fn phase_insensitive_distance(&self, other: &PureState) -> Result<f64> {
        Ok(1.0 - self.inner(other)?.norm())
    }

    /// Maximum entrywise distance after canonicalizing both global phases.
    pub fn canonical_distance(&self, other: &PureState) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        let a = canonicalize_phase(&self.amplitudes);
        let b = canonicalize_phase(&other.amplitudes);
        Ok((a - b).iter().map(|z| z.norm()).fold(0.0, f64::max))
    }
}

/// Multiplies `v` by the phase that makes its dominant entry real-positive.
pub fn canonicalize_phase(v: &CVector) -> CVector {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return v.clone();
    }
    let pivot = v
        .iter()
        .find(|z| z.norm() >= max - 1e-9)
        .copied()
        .unwrap_or(ONE);
    let phase = pivot.conj() / pivot.norm();
    v.map(|z| z * phase)
}

/// Hermitian, unit-trace, positive semidefinite matrix over a labelled register.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
    labels: Vec<String>,
}

impl DensityMatrix {
    pub fn new<L, S>(matrix: CMatrix, labels: L) -> Result<Self>
    where
        L: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        check_labels(&labels)?;
        let expected = 1usize << labels.len();
        if !matrix.is_square() || matrix.nrows() != expected || labels.is_empty() {
            return Err(Error::DimensionMismatch {
                expected,
                found: matrix.nrows(),
            });
        }
        let rho = Self { matrix, labels };
        rho.validate()?;
        Ok(rho)
    }

    /// Wraps a matrix produced by trusted algebra; invariants are checked in
    /// debug builds only.
    pub(crate) fn from_parts(matrix: CMatrix, labels: Vec<String>) -> Self {
        let rho = Self { matrix, labels };
        debug_assert!(rho.validate().is_ok(), "{:?}", rho.validate());
        rho
    }

    /// `𝕀/2^n` over the given labels.
    pub fn maximally_mixed<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let dim = 1usize << labels.len();
        Self::new(CMatrix::identity(dim, dim).unscale(dim as f64), labels)
    }

    /// Checks Hermiticity, unit trace and the eigenvalue floor.
    pub fn validate(&self) -> Result<()> {
        let herm = hermiticity_error(&self.matrix);
        if herm > ALGEBRA_TOL {
            return Err(Error::NotHermitian(herm));
        }
        let tr = trace(&self.matrix);
        if (tr.re - 1.0).abs() > ALGEBRA_TOL || tr.im.abs() > ALGEBRA_TOL {
            return Err(Error::BadTrace(tr.re));
        }
        let min = self.min_eigenvalue();
        if min < -PSD_FLOOR {
            return Err(Error::NotPositive(min));
        }
        Ok(())
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn num_qubits(&self) -> usize {
        self.labels.len()
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    pub fn purity(&self) -> f64 {
        trace(&(&self.matrix * &self.matrix)).re
    }

    pub fn relabel<S: Into<String>>(mut self, labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() != self.labels.len() {
            return Err(Error::DimensionMismatch {
                expected: self.labels.len(),
                found: labels.len(),
            });
        }
        check_labels(&labels)?;
        self.labels = labels;
        Ok(self)
    }

    pub fn tensor(&self, other: &DensityMatrix) -> Result<DensityMatrix> {
        let labels: Vec<String> = self.labels.iter().chain(&other.labels).cloned().collect();
        check_labels(&labels)?;
        Ok(DensityMatrix {
            matrix: kron(&self.matrix, &other.matrix),
            labels,
        })
    }

    /// Traces out every qubit not named in `keep`. The kept qubits stay in
    /// register order.
    pub fn partial_trace(&self, keep: &[&str]) -> Result<DensityMatrix> {
        let mut positions = label_positions(&self.labels, keep)?;
        positions.sort_unstable();
        positions.dedup();
        let n = self.num_qubits();
        let traced: Vec<usize> = (0..n).filter(|q| !positions.contains(q)).collect();
        let k = positions.len();
        let kept_offsets: Vec<usize> = (0..1 << k).map(|i| scatter(i, &positions, n)).collect();
        let mut matrix = CMatrix::zeros(1 << k, 1 << k);
        for t in 0..(1 << traced.len()) {
            let base = scatter(t, &traced, n);
            for (i, oi) in kept_offsets.iter().enumerate() {
                for (j, oj) in kept_offsets.iter().enumerate() {
                    matrix[(i, j)] += self.matrix[(base | oi, base | oj)];
                }
            }
        }
        Ok(DensityMatrix {
            matrix,
            labels: positions.iter().map(|&p| self.labels[p].clone()).collect(),
        })
    }

    /// `U ρ U†` with `op` acting on `targets`.
    pub fn conjugate_by(&self, op: &CMatrix, targets: &[&str]) -> Result<DensityMatrix> {
        let positions = label_positions(&self.labels, targets)?;
        if op.nrows() != 1 << positions.len() {
            return Err(Error::DimensionMismatch {
                expected: 1 << positions.len(),
                found: op.nrows(),
            });
        }
        let full = embed_operator(op, &positions, self.num_qubits());
        Ok(DensityMatrix {
            matrix: &full * &self.matrix * full.adjoint(),
            labels: self.labels.clone(),
        })
    }

    pub fn to_bloch(&self) -> Result<BlochVector> {
        if self.num_qubits() != 1 {
            return Err(Error::NotSingleQubit(self.num_qubits()));
        }
        let r = [1, 2, 3].map(|i| trace(&(pauli(i) * &self.matrix)).re);
        Ok(BlochVector { r })
    }

    /// Mixture `Σ wᵢ ρᵢ` of states on identical registers.
    pub fn mixture(parts: &[(f64, &DensityMatrix)]) -> Result<DensityMatrix> {
        let (_, first) = parts
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty mixture".into()))?;
        let mut matrix = CMatrix::zeros(first.dim(), first.dim());
        for (w, rho) in parts {
            if rho.dim() != first.dim() {
                return Err(Error::DimensionMismatch {
                    expected: first.dim(),
                    found: rho.dim(),
                });
            }
            matrix += rho.matrix.scale(*w);
        }
        DensityMatrix::new(matrix, first.labels.clone())
    }

    /// Largest entrywise distance between the two matrices.
    pub fn max_distance(&self, other: &DensityMatrix) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        max_abs(&(&self.matrix - &other.matrix))
    }

    /// `½‖ρ − σ‖₁`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        0.5 * hermitian_eigenvalues(&(&self.matrix - &other.matrix))
            .iter()
            .map(|v| v.abs())
            .sum::<f64>()
    }
}

/// Free-function form of [`PureState::tensor`] / [`DensityMatrix::tensor`].
pub fn tensor<T: Tensor>(a: &T, b: &T) -> Result<T> {
    a.tensor_with(b)
}

pub trait Tensor: Sized {
    fn tensor_with(&self, other: &Self) -> Result<Self>;
}

impl Tensor for PureState {
    fn tensor_with(&self, other: &Self) -> Result<Self> {
        self.tensor(other)
    }
}

impl Tensor for DensityMatrix {
    fn tensor_with(&self, other: &Self) -> Result<Self> {
        self.tensor(other)
    }
}

pub fn partial_trace(rho: &DensityMatrix, keep: &[&str]) -> Result<DensityMatrix> {
    rho.partial_trace(keep)
}

/// `⟨target|ρ|target⟩`.
pub fn fidelity_pure(rho: &DensityMatrix, target: &PureState) -> Result<f64> {
    if rho.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: target.dim(),
        });
    }
    let v = target.amplitudes();
    Ok(v.dotc(&(rho.matrix() * v)).re)
}

/// `Tr[(σ_{i₁} ⊗ … ⊗ σ_{iₙ}) ρ]` with one Pauli index per qubit.
pub fn pauli_expectation(rho: &DensityMatrix, ops: &[usize]) -> Result<f64> {
    if ops.len() != rho.num_qubits() {
        return Err(Error::DimensionMismatch {
            expected: rho.num_qubits(),
            found: ops.len(),
        });
    }
    if let Some(bad) = ops.iter().find(|&&i| i > 3) {
        return Err(Error::InvalidParameter(format!("Pauli index {bad} out of range 0..=3")));
    }
    let op = ops
        .iter()
        .fold(CMatrix::identity(1, 1), |acc, &i| kron(&acc, &pauli(i)));
    Ok(trace(&(op * rho.matrix())).re)
}

/// Bloch vector `r⃗` of a qubit state `ρ = ½(𝕀 + r⃗·σ⃗)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub r: [f64; 3],
}

impl BlochVector {
    pub fn new(r: [f64; 3]) -> Result<Self> {
        let v = Self { r };
        if v.norm() > 1.0 + PSD_FLOOR {
            return Err(Error::InvalidParameter(format!(
                "Bloch vector norm {} exceeds 1",
                v.norm()
            )));
        }
        Ok(v)
    }

    pub fn norm(&self) -> f64 {
        self.r.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn to_density(&self, label: impl Into<String>) -> DensityMatrix {
        let mut m = CMatrix::identity(2, 2);
        for (i, x) in self.r.iter().enumerate() {
            m += pauli(i + 1).scale(*x);
        }
        DensityMatrix::from_parts(m.unscale(2.0), vec![label.into()])
    }
}

pub mod random {
    //! Haar-distributed single-qubit states and unitaries.

    use std::f64::consts::PI;

    use rand::Rng;
    use rand_distr::StandardNormal;

    use super::{c, CMatrix, PureState};

    /// Uniform point on the Bloch sphere as a pure qubit.
    pub fn haar_qubit<R: Rng + ?Sized>(rng: &mut R, label: &str) -> PureState {
        let [x, y, z] = uniform_sphere(rng);
        let theta = z.clamp(-1.0, 1.0).acos();
        let phi = y.atan2(x);
        PureState::from_bloch_angles(theta, phi, label)
    }

    pub fn uniform_sphere<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
        let z: f64 = rng.random_range(-1.0..=1.0);
        let angle: f64 = rng.random_range(0.0..2.0 * PI);
        let s = (1.0 - z * z).max(0.0).sqrt();
        [s * angle.cos(), s * angle.sin(), z]
    }

    /// Haar-random element of SU(2) from a uniform unit quaternion.
    pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R) -> CMatrix {
        let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let norm = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        let [a, b, cc, d] = q.map(|x| x / norm);
        CMatrix::from_row_slice(2, 2, &[c(a, b), c(cc, d), c(-cc, d), c(a, -b)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn singlet(a: &str, b: &str) -> PureState {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        PureState::new(
            CVector::from_vec(vec![ZERO, c(s, 0.0), c(-s, 0.0), ZERO]),
            [a, b],
        )
        .unwrap()
    }

    #[test]
    fn tensor_of_basis_states() {
        let zero = PureState::basis(&[0], ["a"]).unwrap();
        let one = PureState::basis(&[1], ["b"]).unwrap();
        let joint = zero.tensor(&one).unwrap();
        let expected = [ZERO, ONE, ZERO, ZERO];
        assert_eq!(joint.amplitudes().as_slice(), &expected);
        assert_eq!(joint.labels(), ["a", "b"]);
    }

    #[test]
    fn tensor_rejects_label_collision() {
        let a = PureState::basis(&[0], ["S"]).unwrap();
        assert_eq!(a.tensor(&a), Err(Error::LabelCollision("S".into())));
    }

    #[test]
    fn tensor_reproduces_input_with_singlet() {
        let phi = PureState::basis(&[0], ["S"]).unwrap();
        let omega = tensor(&phi, &singlet("A", "B")).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // |0⟩(|01⟩ − |10⟩)/√2
        let mut expected = CVector::zeros(8);
        expected[1] = c(s, 0.0);
        expected[2] = c(-s, 0.0);
        assert!((omega.amplitudes() - expected).norm() < 1e-15);
    }

    #[test]
    fn tensor_of_mixed_states() {
        let a = DensityMatrix::maximally_mixed(["a"]).unwrap();
        let b = DensityMatrix::maximally_mixed(["b"]).unwrap();
        let ab = tensor(&a, &b).unwrap();
        let expected = CMatrix::identity(4, 4).unscale(4.0);
        assert!(max_abs(&(ab.matrix() - expected)) < 1e-15);
    }

    #[test]
    fn singlet_reduces_to_maximally_mixed() {
        let rho = singlet("A", "B").to_density();
        let reduced = partial_trace(&rho, &["A"]).unwrap();
        let expected = DensityMatrix::maximally_mixed(["A"]).unwrap();
        assert!(reduced.max_distance(&expected) < 1e-15);
        let direct = singlet("A", "B").reduced(&["A"]).unwrap();
        assert!(direct.max_distance(&expected) < 1e-15);
    }

    #[test]
    fn partial_trace_unknown_label() {
        let rho = singlet("A", "B").to_density();
        assert_eq!(
            rho.partial_trace(&["Q"]),
            Err(Error::UnknownLabel("Q".into()))
        );
    }

    #[test]
    fn fidelity_edge_cases() {
        let phi = PureState::from_bloch_angles(1.1, 0.3, "q");
        assert_abs_diff_eq!(fidelity_pure(&phi.to_density(), &phi).unwrap(), 1.0, epsilon = 1e-14);
        let mixed = DensityMatrix::maximally_mixed(["q"]).unwrap();
        assert_abs_diff_eq!(fidelity_pure(&mixed, &phi).unwrap(), 0.5, epsilon = 1e-14);
        let two = singlet("a", "b");
        assert!(matches!(
            fidelity_pure(&mixed, &two),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn bloch_vectors() {
        let zero = PureState::basis(&[0], ["q"]).unwrap().to_density();
        assert_eq!(zero.to_bloch().unwrap().r, [0.0, 0.0, 1.0]);
        let mixed = DensityMatrix::maximally_mixed(["q"]).unwrap();
        assert_eq!(mixed.to_bloch().unwrap().r, [0.0, 0.0, 0.0]);
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![c(5.0 / 6.0, 0.0), c(1.0 / 6.0, 0.0)]));
        let rho = DensityMatrix::new(m, ["q"]).unwrap();
        let r = rho.to_bloch().unwrap().r;
        assert_abs_diff_eq!(r[2], 2.0 / 3.0, epsilon = 1e-15);
        assert!(singlet("a", "b").to_density().to_bloch().is_err());
    }

    #[test]
    fn pauli_expectations() {
        let rho = singlet("a", "b").to_density();
        for i in 1..=3 {
            assert_abs_diff_eq!(pauli_expectation(&rho, &[i, i]).unwrap(), -1.0, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(pauli_expectation(&rho, &[0, 0]).unwrap(), 1.0, epsilon = 1e-14);
        let zz = PureState::basis(&[0, 0], ["a", "b"]).unwrap().to_density();
        assert_abs_diff_eq!(pauli_expectation(&zz, &[3, 3]).unwrap(), 1.0, epsilon = 1e-14);
        assert!(pauli_expectation(&zz, &[4, 0]).is_err());
        assert!(pauli_expectation(&zz, &[1]).is_err());
    }

    #[test]
    fn validation_rejects_bad_matrices() {
        let not_herm = CMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), ONE, ZERO, c(0.5, 0.0)]);
        assert!(matches!(DensityMatrix::new(not_herm, ["q"]), Err(Error::NotHermitian(_))));
        let bad_trace = CMatrix::identity(2, 2);
        assert!(matches!(DensityMatrix::new(bad_trace, ["q"]), Err(Error::BadTrace(_))));
        let negative = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.5, 0.0), c(-0.5, 0.0)]));
        assert!(matches!(DensityMatrix::new(negative, ["q"]), Err(Error::NotPositive(_))));
        let unnormalized = CVector::from_vec(vec![ONE, ONE]);
        assert!(matches!(PureState::new(unnormalized, ["q"]), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn apply_matches_embedded_operator() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random::haar_qubit(&mut rng, "a");
        let b = random::haar_qubit(&mut rng, "b");
        let cq = random::haar_qubit(&mut rng, "c");
        let state = a.tensor(&b).unwrap().tensor(&cq).unwrap();
        let op = kron(&random::haar_unitary(&mut rng), &hadamard());
        let mut applied = state.clone();
        applied.apply(&op, &["c", "a"]).unwrap();
        let full = embed_operator(&op, &[2, 0], 3);
        let expected = full * state.amplitudes();
        assert!((applied.amplitudes() - expected).norm() < 1e-14);
    }

    fn arb_qubit(label: &'static str) -> impl Strategy<Value = PureState> {
        (0.0..std::f64::consts::PI, 0.0..2.0 * std::f64::consts::PI)
            .prop_map(move |(t, p)| PureState::from_bloch_angles(t, p, label))
    }

    fn arb_mixed(label: &'static str) -> impl Strategy<Value = DensityMatrix> {
        (arb_qubit(label), 0.0..1.0f64).prop_map(move |(psi, w)| {
            let mixed = DensityMatrix::maximally_mixed([label]).unwrap();
            DensityMatrix::mixture(&[(w, &psi.to_density()), (1.0 - w, &mixed)]).unwrap()
        })
    }

    proptest! {
        #[test]
        fn partial_trace_inverts_tensor(a in arb_mixed("a"), b in arb_mixed("b"), c0 in arb_mixed("c")) {
            let ab = a.tensor(&b).unwrap();
            let abc = ab.tensor(&c0).unwrap();
            prop_assert!(abc.partial_trace(&["a", "b"]).unwrap().max_distance(&ab) < 1e-12);
            prop_assert!(abc.partial_trace(&["c"]).unwrap().max_distance(&c0) < 1e-12);
            prop_assert!(abc.partial_trace(&["b"]).unwrap().max_distance(&b) < 1e-12);
            prop_assert!(abc.validate().is_ok());
        }

        #[test]
        fn fidelity_is_unitarily_invariant(rho in arb_mixed("q"), target in arb_qubit("q"), seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = random::haar_unitary(&mut rng);
            let rotated_rho = rho.conjugate_by(&u, &["q"]).unwrap();
            let mut rotated_target = target.clone();
            rotated_target.apply(&u, &["q"]).unwrap();
            let f0 = fidelity_pure(&rho, &target).unwrap();
            let f1 = fidelity_pure(&rotated_rho, &rotated_target).unwrap();
            prop_assert!((f0 - f1).abs() < 1e-12);
        }

        #[test]
        fn bloch_roundtrip(rho in arb_mixed("q")) {
            let back = rho.to_bloch().unwrap().to_density("q");
            prop_assert!(back.max_distance(&rho) < 1e-12);
        }
    }
}
