//! Completely positive qubit maps: Kraus channels, Pauli transfer matrices,
//! the partial transpose and the structural physical approximation used for
//! entanglement detection.

use nalgebra::Matrix4;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{
    c, embed_operator, hermitian_eigenvalues, max_abs, pauli, trace, CMatrix, DensityMatrix,
    ALGEBRA_TOL, PSD_FLOOR,
};

/// One weighted Kraus operator.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausTerm {
    pub weight: f64,
    pub op: CMatrix,
}

/// Qubit channel `ρ ↦ Σ wᵢ Kᵢ ρ Kᵢ†`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    terms: Vec<KrausTerm>,
}

impl KrausChannel {
    pub fn new(terms: Vec<KrausTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidParameter("channel has no Kraus terms".into()));
        }
        for term in &terms {
            if term.weight < 0.0 || !term.weight.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "Kraus weight {} is negative",
                    term.weight
                )));
            }
            if term.op.shape() != (2, 2) {
                return Err(Error::DimensionMismatch {
                    expected: 2,
                    found: term.op.nrows(),
                });
            }
        }
        let ch = Self { terms };
        let dev = ch.trace_preservation_error();
        if dev > ALGEBRA_TOL {
            return Err(Error::NotTracePreserving(dev));
        }
        Ok(ch)
    }

    fn from_paulis(weighted: &[(f64, usize)]) -> Self {
        Self {
            terms: weighted
                .iter()
                .map(|&(weight, i)| KrausTerm { weight, op: pauli(i) })
                .collect(),
        }
    }

    pub fn terms(&self) -> &[KrausTerm] {
        &self.terms
    }

    /// Max deviation of `Σ wᵢ Kᵢ†Kᵢ` from the identity.
    pub fn trace_preservation_error(&self) -> f64 {
        let sum = self
            .terms
            .iter()
            .fold(CMatrix::zeros(2, 2), |acc, t| acc + (t.op.adjoint() * &t.op).scale(t.weight));
        max_abs(&(sum - CMatrix::identity(2, 2)))
    }

    pub fn identity() -> Self {
        Self::from_paulis(&[(1.0, 0)])
    }

    /// Optimal transpose `(ρ + XρX + ZρZ)/3`.
    pub fn optimal_transpose() -> Self {
        Self::from_paulis(&[(1.0 / 3.0, 0), (1.0 / 3.0, 1), (1.0 / 3.0, 3)])
    }

    /// Fully depolarizing `(ρ + XρX + YρY + ZρZ)/4 = 𝕀/2`.
    pub fn depolarizing() -> Self {
        Self::from_paulis(&[(0.25, 0), (0.25, 1), (0.25, 2), (0.25, 3)])
    }

    /// Optimal universal NOT `(XρX + YρY + ZρZ)/3`.
    pub fn unot() -> Self {
        Self::from_paulis(&[(1.0 / 3.0, 1), (1.0 / 3.0, 2), (1.0 / 3.0, 3)])
    }

    /// Applies `other` after `self`.
    pub fn then(&self, other: &KrausChannel) -> KrausChannel {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                terms.push(KrausTerm {
                    weight: a.weight * b.weight,
                    op: &b.op * &a.op,
                });
            }
        }
        KrausChannel { terms }
    }

    /// Raw action on a 2×2 operator (not necessarily a state).
    pub fn apply_operator(&self, m: &CMatrix) -> CMatrix {
        self.terms.iter().fold(CMatrix::zeros(2, 2), |acc, t| {
            acc + (&t.op * m * t.op.adjoint()).scale(t.weight)
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ChannelJson::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: ChannelJson = serde_json::from_str(text)?;
        raw.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    w: f64,
    /// Row-major entries as `[re, im]` pairs.
    op: Vec<Vec<[f64; 2]>>,
}

#[derive(Serialize, Deserialize)]
struct ChannelJson {
    terms: Vec<TermJson>,
}

impl From<&KrausChannel> for ChannelJson {
    fn from(ch: &KrausChannel) -> Self {
        ChannelJson {
            terms: ch
                .terms
                .iter()
                .map(|t| TermJson {
                    w: t.weight,
                    op: (0..2)
                        .map(|i| (0..2).map(|j| [t.op[(i, j)].re, t.op[(i, j)].im]).collect())
                        .collect(),
                })
                .collect(),
        }
    }
}

impl TryFrom<ChannelJson> for KrausChannel {
    type Error = Error;

    fn try_from(raw: ChannelJson) -> Result<Self> {
        let mut terms = Vec::with_capacity(raw.terms.len());
        for t in raw.terms {
            if t.op.len() != 2 || t.op.iter().any(|row| row.len() != 2) {
                return Err(Error::Serialization("Kraus operator must be 2x2".into()));
            }
            let entries: Vec<_> = t.op.iter().flatten().map(|[re, im]| c(*re, *im)).collect();
            terms.push(KrausTerm {
                weight: t.w,
                op: CMatrix::from_row_slice(2, 2, &entries),
            });
        }
        KrausChannel::new(terms)
    }
}

/// Applies a single-qubit channel to a single-qubit state.
pub fn apply_channel(ch: &KrausChannel, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if rho.num_qubits() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: rho.dim(),
        });
    }
    Ok(DensityMatrix::from_parts(
        ch.apply_operator(rho.matrix()),
        rho.labels().to_vec(),
    ))
}

/// Applies a single-qubit channel to the qubit `label` of a larger register.
pub fn apply_local(ch: &KrausChannel, rho: &DensityMatrix, label: &str) -> Result<DensityMatrix> {
    let position = rho
        .labels()
        .iter()
        .position(|l| l == label)
        .ok_or_else(|| Error::UnknownLabel(label.to_string()))?;
    Ok(DensityMatrix::from_parts(
        apply_local_matrix(ch, rho.matrix(), position, rho.num_qubits()),
        rho.labels().to_vec(),
    ))
}

fn apply_local_matrix(ch: &KrausChannel, m: &CMatrix, position: usize, n: usize) -> CMatrix {
    ch.terms.iter().fold(CMatrix::zeros(m.nrows(), m.ncols()), |acc, t| {
        let k = embed_operator(&t.op, &[position], n);
        acc + (&k * m * k.adjoint()).scale(t.weight)
    })
}

/// 4×4 real matrix acting on `(1, rx, ry, rz)`: `m_ij = ½ Tr[σᵢ E(σⱼ)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PauliTransferMatrix {
    pub m: Matrix4<f64>,
}

impl PauliTransferMatrix {
    pub fn new(m: Matrix4<f64>) -> Self {
        Self { m }
    }

    pub fn identity() -> Self {
        Self::new(Matrix4::identity())
    }

    /// Applies `other` after `self`.
    pub fn then(&self, other: &PauliTransferMatrix) -> PauliTransferMatrix {
        Self::new(other.m * self.m)
    }

    /// True when the first row is `(1, 0, 0, 0)` within `tol`.
    pub fn is_trace_preserving(&self, tol: f64) -> bool {
        (self.m[(0, 0)] - 1.0).abs() <= tol && (1..4).all(|j| self.m[(0, j)].abs() <= tol)
    }

    /// Image of a 2×2 operator, without any positivity check.
    pub fn apply_operator(&self, rho: &CMatrix) -> CMatrix {
        let coords: [f64; 4] = std::array::from_fn(|i| trace(&(pauli(i) * rho)).re);
        let v = self.m * nalgebra::Vector4::from(coords);
        (0..4).fold(CMatrix::zeros(2, 2), |acc, i| acc + pauli(i).scale(v[i] / 2.0))
    }

    pub fn rows(&self) -> [[f64; 4]; 4] {
        std::array::from_fn(|i| std::array::from_fn(|j| self.m[(i, j)]))
    }

    pub fn from_rows(rows: [[f64; 4]; 4]) -> Self {
        Self::new(Matrix4::from_fn(|i, j| rows[i][j]))
    }

    /// Row-major 4×4 JSON array.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.rows())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(Self::from_rows(serde_json::from_str(text)?))
    }

    /// Four comma-separated rows, no header.
    pub fn to_csv(&self) -> Result<String> {
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(vec![]);
        for row in self.rows() {
            writer.serialize(row)?;
        }
        let bytes = writer
            .into_inner()
            .map_err(|e| Error::Serialization(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Serialization(e.to_string()))
    }
}

pub fn kraus_to_ptm(ch: &KrausChannel) -> PauliTransferMatrix {
    let images: Vec<CMatrix> = (0..4).map(|j| ch.apply_operator(&pauli(j))).collect();
    PauliTransferMatrix::new(Matrix4::from_fn(|i, j| {
        0.5 * trace(&(pauli(i) * &images[j])).re
    }))
}

/// Applies a transfer matrix to a qubit state, validating the result.
pub fn ptm_apply(ptm: &PauliTransferMatrix, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if rho.num_qubits() != 1 {
        return Err(Error::NotSingleQubit(rho.num_qubits()));
    }
    DensityMatrix::new(ptm.apply_operator(rho.matrix()), rho.labels().to_vec())
}

/// Which factor of a two-qubit register to transpose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

/// Partial transpose of a two-qubit operator. The result is Hermitian with
/// unit trace but need not be positive.
pub fn partial_transpose(rho: &DensityMatrix, side: Side) -> Result<CMatrix> {
    if rho.num_qubits() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: rho.dim(),
        });
    }
    Ok(partial_transpose_matrix(rho.matrix(), side))
}

pub fn partial_transpose_matrix(m: &CMatrix, side: Side) -> CMatrix {
    let mut out = CMatrix::zeros(4, 4);
    for a in 0..2 {
        for b in 0..2 {
            for a2 in 0..2 {
                for b2 in 0..2 {
                    let (ra, rb, ca, cb) = match side {
                        Side::A => (a2, b, a, b2),
                        Side::B => (a, b2, a2, b),
                    };
                    out[(2 * a + b, 2 * a2 + b2)] = m[(2 * ra + rb, 2 * ca + cb)];
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PptReport {
    /// Eigenvalues of the partial transpose, ascending.
    pub eigenvalues: [f64; 4],
    pub entangled: bool,
}

/// Peres–Horodecki test on side B.
pub fn ppt_test(rho: &DensityMatrix) -> Result<PptReport> {
    let pt = partial_transpose(rho, Side::B)?;
    let values = hermitian_eigenvalues(&pt);
    let eigenvalues = [values[0], values[1], values[2], values[3]];
    Ok(PptReport {
        eigenvalues,
        entangled: eigenvalues[0] < -PSD_FLOOR,
    })
}

/// `w|Ψ⁻⟩⟨Ψ⁻| + (1 − w)𝕀/4` on qubits `A`, `B`.
pub fn werner_state(w: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::InvalidParameter(format!("Werner weight {w} outside [0, 1]")));
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let singlet = crate::qcore::CVector::from_vec(vec![c(0.0, 0.0), c(h, 0.0), c(-h, 0.0), c(0.0, 0.0)]);
    let m = crate::qcore::outer(&singlet, &singlet).scale(w)
        + CMatrix::identity(4, 4).scale((1.0 - w) / 4.0);
    DensityMatrix::new(m, ["A", "B"])
}

/// Convex weights of the structural physical approximation
/// `u·(E_UNOT ⊗ E_DEP) + t·(𝕀 ⊗ E_TR)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaWeights {
    pub unot_dep: f64,
    pub id_tr: f64,
}

impl Default for SpaWeights {
    fn default() -> Self {
        Self {
            unot_dep: 1.0 / 3.0,
            id_tr: 2.0 / 3.0,
        }
    }
}

/// Smallest output eigenvalue at or below which the syndrome fires.
pub const SPA_THRESHOLD: f64 = 2.0 / 9.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SpaResult {
    pub output: DensityMatrix,
    pub lambda_min: f64,
    pub syndrome: bool,
}

/// SPA of the partial transpose with the default `(1/3, 2/3)` weights.
pub fn spa_map(rho: &DensityMatrix) -> Result<SpaResult> {
    spa_map_weighted(rho, SpaWeights::default())
}

pub fn spa_map_weighted(rho: &DensityMatrix, weights: SpaWeights) -> Result<SpaResult> {
    if rho.num_qubits() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: rho.dim(),
        });
    }
    let total = weights.unot_dep + weights.id_tr;
    if weights.unot_dep < 0.0 || weights.id_tr < 0.0 || (total - 1.0).abs() > ALGEBRA_TOL {
        return Err(Error::InvalidParameter(format!(
            "SPA weights ({}, {}) are not a convex combination",
            weights.unot_dep, weights.id_tr
        )));
    }
    let m = rho.matrix();
    let first = apply_local_matrix(
        &KrausChannel::unot(),
        &apply_local_matrix(&KrausChannel::depolarizing(), m, 1, 2),
        0,
        2,
    );
    let second = apply_local_matrix(&KrausChannel::optimal_transpose(), m, 1, 2);
    let output = DensityMatrix::new(
        first.scale(weights.unot_dep) + second.scale(weights.id_tr),
        rho.labels().to_vec(),
    )?;
    let lambda_min = output.min_eigenvalue();
    Ok(SpaResult {
        output,
        lambda_min,
        syndrome: lambda_min <= SPA_THRESHOLD,
    })
}

/// Monte Carlo realization of a channel: each shot picks one Kraus branch
/// with probability `wᵢ Tr[Kᵢ ρ Kᵢ†]` and the empirical mixture of the
/// normalized branch outputs is returned.
pub fn sample_stochastic(
    ch: &KrausChannel,
    rho: &DensityMatrix,
    shots: u64,
    seed: u64,
) -> Result<DensityMatrix> {
    if shots < 1 {
        return Err(Error::InvalidParameter("shots must be at least 1".into()));
    }
    if rho.num_qubits() != 1 {
        return Err(Error::NotSingleQubit(rho.num_qubits()));
    }
    let branches: Vec<(f64, CMatrix)> = ch
        .terms
        .iter()
        .map(|t| {
            let out = (&t.op * rho.matrix() * t.op.adjoint()).scale(t.weight);
            let p = trace(&out).re.max(0.0);
            (p, out)
        })
        .collect();
    let dist = WeightedIndex::new(branches.iter().map(|(p, _)| *p))
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; branches.len()];
    for _ in 0..shots {
        counts[dist.sample(&mut rng)] += 1;
    }
    let mut m = CMatrix::zeros(2, 2);
    for ((p, out), n) in branches.iter().zip(&counts) {
        if *n > 0 {
            m += out.scale(*n as f64 / (shots as f64 * p));
        }
    }
    DensityMatrix::new(m, rho.labels().to_vec())
}
