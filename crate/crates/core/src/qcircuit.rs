//! Gate-level symmetric projection: EPR preparation, Bell-basis rotation
//! boxes, a Toffoli-controlled ancilla flip and a final ancilla measurement.
//!
//! The register is `[S, A, B, anc]`, initialised to `|φ⟩|1⟩|1⟩|0⟩`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{c, hadamard, pauli, CMatrix, CVector, DensityMatrix, PureState, ONE, ZERO};
use crate::symmproto::{ALICE, BOB, INPUT};

pub const ANCILLA: &str = "anc";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateKind {
    Hadamard,
    PauliX,
    PauliY,
    PauliZ,
    CNOT,
    Toffoli,
}

impl GateKind {
    pub fn arity(self) -> usize {
        match self {
            GateKind::Hadamard | GateKind::PauliX | GateKind::PauliY | GateKind::PauliZ => 1,
            GateKind::CNOT => 2,
            GateKind::Toffoli => 3,
        }
    }

    /// Matrix in target order; controls come first for CNOT and Toffoli.
    pub fn matrix(self) -> CMatrix {
        match self {
            GateKind::Hadamard => hadamard(),
            GateKind::PauliX => pauli(1),
            GateKind::PauliY => pauli(2),
            GateKind::PauliZ => pauli(3),
            GateKind::CNOT => controlled_x(2),
            GateKind::Toffoli => controlled_x(3),
        }
    }
}

/// X on the last qubit, conditioned on all others being `|1⟩`.
fn controlled_x(qubits: usize) -> CMatrix {
    let dim = 1 << qubits;
    let mut m = CMatrix::identity(dim, dim);
    let (a, b) = (dim - 2, dim - 1);
    m[(a, a)] = ZERO;
    m[(b, b)] = ZERO;
    m[(a, b)] = ONE;
    m[(b, a)] = ONE;
    m
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawGate")]
pub struct Gate {
    pub kind: GateKind,
    pub targets: Vec<String>,
}

#[derive(Deserialize)]
struct RawGate {
    kind: GateKind,
    targets: Vec<String>,
}

impl TryFrom<RawGate> for Gate {
    type Error = Error;

    fn try_from(raw: RawGate) -> Result<Self> {
        Gate::new(raw.kind, raw.targets)
    }
}

impl Gate {
    pub fn new<S: Into<String>>(kind: GateKind, targets: impl IntoIterator<Item = S>) -> Result<Self> {
        let targets: Vec<String> = targets.into_iter().map(Into::into).collect();
        if targets.len() != kind.arity() {
            return Err(Error::InvalidParameter(format!(
                "{kind:?} takes {} target(s), got {}",
                kind.arity(),
                targets.len()
            )));
        }
        for (i, t) in targets.iter().enumerate() {
            if targets[..i].contains(t) {
                return Err(Error::LabelCollision(t.clone()));
            }
        }
        Ok(Self { kind, targets })
    }

    fn unchecked(kind: GateKind, targets: &[&str]) -> Self {
        Self::new(kind, targets.iter().copied()).expect("static gate is well-formed")
    }

    pub fn apply(&self, state: &mut PureState) -> Result<()> {
        let targets: Vec<&str> = self.targets.iter().map(String::as_str).collect();
        state.apply(&self.kind.matrix(), &targets)
    }
}

pub fn apply_gates(gates: &[Gate], state: &mut PureState) -> Result<()> {
    gates.iter().try_for_each(|g| g.apply(state))
}

pub fn gates_to_json(gates: &[Gate]) -> Result<String> {
    Ok(serde_json::to_string(gates)?)
}

pub fn gates_from_json(text: &str) -> Result<Vec<Gate>> {
    Ok(serde_json::from_str(text)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    Z,
    X,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Measurement {
    pub label: String,
    pub basis: Basis,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Network {
    pub gates: Vec<Gate>,
    pub measure: Measurement,
}

/// One measurement branch. `state` excludes the measured qubit and is
/// `None` when the branch has zero probability or no qubit remains.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub probability: f64,
    pub state: Option<PureState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branches {
    pub zero: Branch,
    pub one: Branch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SampleCounts {
    pub zeros: u64,
    pub ones: u64,
}

impl Network {
    pub fn new(gates: Vec<Gate>, measure: Measurement) -> Self {
        Self { gates, measure }
    }

    /// Checks that every label used by the network exists in `labels`.
    pub fn validate_register(&self, labels: &[String]) -> Result<()> {
        let used = self
            .gates
            .iter()
            .flat_map(|g| g.targets.iter())
            .chain(std::iter::once(&self.measure.label));
        for label in used {
            if !labels.contains(label) {
                return Err(Error::UnknownLabel(label.clone()));
            }
        }
        Ok(())
    }

    /// State just before the measurement, rotated into the measured basis.
    pub fn evolve(&self, initial: &PureState) -> Result<PureState> {
        self.validate_register(initial.labels())?;
        let mut state = initial.clone();
        apply_gates(&self.gates, &mut state)?;
        if self.measure.basis == Basis::X {
            state.apply(&hadamard(), &[self.measure.label.as_str()])?;
        }
        Ok(state)
    }

    /// Exact projection onto both measurement outcomes.
    pub fn run(&self, initial: &PureState) -> Result<Branches> {
        let state = self.evolve(initial)?;
        let (zero, one) = split_on(&state, &self.measure.label)?;
        Ok(Branches { zero, one })
    }

    /// Seeded shot sampling of the measurement outcome.
    pub fn sample(&self, initial: &PureState, shots: u64, seed: u64) -> Result<SampleCounts> {
        let branches = self.run(initial)?;
        let p1 = branches.one.probability.clamp(0.0, 1.0);
        let dist = Binomial::new(shots, p1).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let ones = dist.sample(&mut ChaCha8Rng::seed_from_u64(seed));
        Ok(SampleCounts { zeros: shots - ones, ones })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn split_on(state: &PureState, label: &str) -> Result<(Branch, Branch)> {
    let labels = state.labels();
    let pos = labels
        .iter()
        .position(|l| l == label)
        .ok_or_else(|| Error::UnknownLabel(label.to_string()))?;
    let n = labels.len();
    let rest: Vec<String> = labels.iter().filter(|l| *l != label).cloned().collect();
    let shift = n - 1 - pos;
    let branch = |outcome: usize| -> Result<Branch> {
        let amps = CVector::from_fn(1 << (n - 1), |r, _| {
            let high = (r >> shift) << (shift + 1);
            let low = r & ((1 << shift) - 1);
            state.amplitudes()[high | (outcome << shift) | low]
        });
        let probability = amps.norm_squared();
        let state = if probability > 1e-24 && !rest.is_empty() {
            Some(PureState::normalized(amps, rest.clone())?.canonical_phase())
        } else {
            None
        };
        Ok(Branch { probability, state })
    };
    Ok((branch(0)?, branch(1)?))
}

/// Hadamard on A then CNOT(A→B): `|1⟩|1⟩ ↦ |Ψ⁻⟩`.
pub fn epr_prepare() -> Vec<Gate> {
    vec![
        Gate::unchecked(GateKind::Hadamard, &[ALICE]),
        Gate::unchecked(GateKind::CNOT, &[ALICE, BOB]),
    ]
}

/// CNOT(S→A) then Hadamard on S: `Ψ⁻, Ψ⁺, Φ⁻, Φ⁺ ↦ |11⟩, |01⟩, |10⟩, |00⟩`
/// with no extra phases.
pub fn bell_rotation_box1() -> Vec<Gate> {
    vec![
        Gate::unchecked(GateKind::CNOT, &[INPUT, ALICE]),
        Gate::unchecked(GateKind::Hadamard, &[INPUT]),
    ]
}

/// Inverse of box 1.
pub fn bell_rotation_box2() -> Vec<Gate> {
    let mut gates = bell_rotation_box1();
    gates.reverse();
    gates
}

fn toffoli() -> Gate {
    Gate::unchecked(GateKind::Toffoli, &[INPUT, ALICE, ANCILLA])
}

/// Full network: EPR preparation, box 1, Toffoli, box 2, ancilla readout.
pub fn teleunot_network() -> Network {
    let gates = epr_prepare()
        .into_iter()
        .chain(bell_rotation_box1())
        .chain(std::iter::once(toffoli()))
        .chain(bell_rotation_box2())
        .collect();
    Network::new(gates, Measurement { label: ANCILLA.into(), basis: Basis::Z })
}

/// `|φ⟩_S |1⟩_A |1⟩_B |0⟩_anc`.
pub fn initial_register(phi: &PureState) -> Result<PureState> {
    phi.require_single()?;
    let phi = PureState::new(phi.amplitudes().clone(), [INPUT])?;
    phi.tensor(&PureState::basis(&[1, 1, 0], [ALICE, BOB, ANCILLA])?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkOutcome {
    /// Probability of ancilla `1` and Bob's state on that branch.
    pub outcome_1: (f64, DensityMatrix),
    /// Probability of ancilla `0` and the joint `S, A, B` state.
    pub outcome_0: (f64, PureState),
}

pub fn run_network(phi: &PureState) -> Result<NetworkOutcome> {
    let branches = teleunot_network().run(&initial_register(phi)?)?;
    let missing = || Error::InvalidParameter("branch has zero probability".into());
    let one = branches.one.state.ok_or_else(missing)?;
    let zero = branches.zero.state.ok_or_else(missing)?;
    Ok(NetworkOutcome {
        outcome_1: (branches.one.probability, one.reduced(&[BOB])?),
        outcome_0: (branches.zero.probability, zero),
    })
}

pub fn sample_network(phi: &PureState, shots: u64, seed: u64) -> Result<SampleCounts> {
    teleunot_network().sample(&initial_register(phi)?, shots, seed)
}

/// Comparison of the register right after the Toffoli gate with the
/// four-branch expansion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntermediateReport {
    /// Max entrywise deviation after canonicalizing both phases.
    pub max_deviation: f64,
    /// Norm of each `|s a⟩_SA` branch, ordered `00, 01, 10, 11`.
    pub branch_magnitudes: [f64; 4],
    /// True when the ancilla has weight only on the `|11⟩_SA` branch.
    pub ancilla_flip_only_on_11: bool,
}

impl IntermediateReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_deviation <= tol
            && self.ancilla_flip_only_on_11
            && self.branch_magnitudes.iter().all(|m| (m - 0.5).abs() <= tol)
    }
}

/// `½[−|11⟩φ|1⟩ − |01⟩σ_Zφ|0⟩ + |10⟩σ_Xφ|0⟩ + |00⟩σ_Xσ_Zφ|0⟩]` on
/// `[S, A, B, anc]`.
pub fn expected_after_toffoli(phi: &PureState) -> Result<PureState> {
    phi.require_single()?;
    let v = phi.amplitudes();
    let (x, z) = (pauli(1), pauli(3));
    let terms: [(usize, usize, f64, CVector); 4] = [
        (0b11, 1, -0.5, v.clone()),
        (0b01, 0, -0.5, &z * v),
        (0b10, 0, 0.5, &x * v),
        (0b00, 0, 0.5, &x * &z * v),
    ];
    let mut amps = CVector::zeros(16);
    for (sa, anc, coef, bob) in terms {
        for (b, amp) in bob.iter().enumerate() {
            amps[(sa << 2) | (b << 1) | anc] += amp * c(coef, 0.0);
        }
    }
    PureState::new(amps, [INPUT, ALICE, BOB, ANCILLA])
}

pub fn intermediate_state_check(phi: &PureState) -> Result<IntermediateReport> {
    let mut state = initial_register(phi)?;
    apply_gates(&epr_prepare(), &mut state)?;
    apply_gates(&bell_rotation_box1(), &mut state)?;
    toffoli().apply(&mut state)?;
    let expected = expected_after_toffoli(phi)?;
    let amps = state.amplitudes();
    let branch_magnitudes = std::array::from_fn(|sa| {
        (0..4).map(|r| amps[(sa << 2) | r].norm_sqr()).sum::<f64>().sqrt()
    });
    let ancilla_flip_only_on_11 = (0..16)
        .filter(|i| i & 1 == 1 && i >> 2 != 0b11)
        .all(|i| amps[i].norm() <= crate::qcore::ALGEBRA_TOL);
    Ok(IntermediateReport {
        max_deviation: state.canonical_distance(&expected)?,
        branch_magnitudes,
        ancilla_flip_only_on_11,
    })
}
