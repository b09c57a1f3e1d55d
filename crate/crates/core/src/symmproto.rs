//! Projective symmetrization protocols on two qubits: 1→2 cloning with the
//! teleported universal NOT, purification of equally oriented mixed qubits,
//! and programmable teleportation of optimal anti-unitary maps.

use std::collections::BTreeMap;

use crate::channels::{apply_channel, KrausChannel, KrausTerm};
use crate::error::{Error, Result};
use crate::qcore::{
    c, fidelity_pure, is_unitary, outer, pauli, sigma_y, trace, unitarity_error, CMatrix,
    CVector, DensityMatrix, PureState, ZERO,
};

pub const INPUT: &str = "S";
pub const ALICE: &str = "A";
pub const BOB: &str = "B";

/// `|Ψ⁻⟩ = (|01⟩ − |10⟩)/√2`.
pub fn singlet_vector() -> CVector {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    CVector::from_vec(vec![ZERO, c(h, 0.0), c(-h, 0.0), ZERO])
}

pub fn singlet(a: &str, b: &str) -> PureState {
    PureState::new(singlet_vector(), [a, b]).expect("singlet is normalized")
}

/// `P = 𝕀 − |Ψ⁻⟩⟨Ψ⁻|`, the projector onto the two-qubit symmetric subspace.
pub fn symmetric_projector_2q() -> CMatrix {
    let s = singlet_vector();
    CMatrix::identity(4, 4) - outer(&s, &s)
}

#[derive(Debug, Clone, PartialEq)]
pub enum PostState {
    Pure(PureState),
    Mixed(DensityMatrix),
}

impl PostState {
    pub fn to_density(&self) -> DensityMatrix {
        match self {
            PostState::Pure(psi) => psi.to_density(),
            PostState::Mixed(rho) => rho.clone(),
        }
    }
}

/// Result of a heralded protocol run.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolOutcome {
    pub success_probability: f64,
    pub post_state: PostState,
    /// Single-qubit reduced states keyed by party label.
    pub reduced: BTreeMap<String, DensityMatrix>,
    /// Named figures of merit.
    pub fidelities: BTreeMap<String, f64>,
}

fn require_qubit(phi: &PureState) -> Result<PureState> {
    phi.require_single()?;
    // Re-validating normalization guards against hand-built states.
    PureState::new(phi.amplitudes().clone(), [INPUT])
}

/// Applies `P_SA ⊗ 𝕀` to `|φ⟩_S ⊗ |pair⟩_AB` and collects the heralded
/// outputs on success.
fn project_with_pair(phi: &PureState, pair: PureState) -> Result<(f64, PureState)> {
    let mut state = phi.tensor(&pair)?;
    let before = state.clone();
    state.apply(&symmetric_projector_2q(), &[INPUT, ALICE])?;
    let p = before.inner(&state)?.re;
    let post = PureState::normalized(state.amplitudes().clone(), state.labels().to_vec())?;
    Ok((p, post.canonical_phase()))
}

/// 1→2 cloning at Alice's site with the universal NOT teleported to Bob.
pub fn run_cloning_teleunot(phi: &PureState) -> Result<ProtocolOutcome> {
    let phi = require_qubit(phi)?;
    let (p, post) = project_with_pair(&phi, singlet(ALICE, BOB))?;
    let perp = phi.orthogonal()?;
    let mut reduced = BTreeMap::new();
    for label in [INPUT, ALICE, BOB] {
        reduced.insert(label.to_string(), post.reduced(&[label])?.relabel(["q"])?);
    }
    let target = phi.clone().relabel(["q"])?;
    let target_perp = perp.relabel(["q"])?;
    let mut fidelities = BTreeMap::new();
    fidelities.insert("clone".into(), fidelity_pure(&reduced[INPUT], &target)?);
    fidelities.insert("unot".into(), fidelity_pure(&reduced[BOB], &target_perp)?);
    Ok(ProtocolOutcome {
        success_probability: p,
        post_state: PostState::Pure(post),
        reduced,
        fidelities,
    })
}

/// Closed-form `|Ξ_SAB⟩ = √(2/3)|φφφ⊥⟩ − √(1/6)(|φφ⊥⟩ + |φ⊥φ⟩)|φ⟩`.
pub fn xi_state(phi: &PureState) -> Result<PureState> {
    let phi = require_qubit(phi)?;
    let perp = phi.orthogonal()?;
    let (u, v) = (phi.amplitudes(), perp.amplitudes());
    let k3 = |a: &CVector, b: &CVector, d: &CVector| a.kronecker(b).kronecker(d);
    let amps = k3(u, u, v).scale((2.0f64 / 3.0).sqrt())
        - (k3(u, v, u) + k3(v, u, u)).scale((1.0f64 / 6.0).sqrt());
    Ok(PureState::new(amps, [INPUT, ALICE, BOB])?.canonical_phase())
}

/// Cloning variant with a maximally mixed ancilla and no Bob.
pub fn run_cloning_mixed_ancilla(phi: &PureState) -> Result<ProtocolOutcome> {
    let phi = require_qubit(phi)?;
    let rho = phi.to_density().tensor(&DensityMatrix::maximally_mixed([ALICE])?)?;
    let (p, post) = project_density(&rho)?;
    let mut reduced = BTreeMap::new();
    for label in [INPUT, ALICE] {
        reduced.insert(label.to_string(), post.partial_trace(&[label])?.relabel(["q"])?);
    }
    let target = phi.relabel(["q"])?;
    let mut fidelities = BTreeMap::new();
    fidelities.insert("clone".into(), fidelity_pure(&reduced[INPUT], &target)?);
    Ok(ProtocolOutcome {
        success_probability: p,
        post_state: PostState::Mixed(post),
        reduced,
        fidelities,
    })
}

/// `P ρ P / Tr[Pρ]` on a two-qubit register.
fn project_density(rho: &DensityMatrix) -> Result<(f64, DensityMatrix)> {
    let proj = symmetric_projector_2q();
    let projected = &proj * rho.matrix() * &proj;
    let p = trace(&projected).re;
    if p <= 0.0 {
        return Err(Error::InvalidParameter("projection has zero probability".into()));
    }
    Ok((p, DensityMatrix::new(projected.unscale(p), rho.labels().to_vec())?))
}

/// Two qubits sharing the Bloch direction of `phi` with purities `λ_S`, `λ_A`.
#[derive(Debug, Clone, PartialEq)]
pub struct PurificationInput {
    pub lambda_s: f64,
    pub lambda_a: f64,
    pub phi: PureState,
}

impl PurificationInput {
    pub fn new(lambda_s: f64, lambda_a: f64, phi: PureState) -> Result<Self> {
        for (name, v) in [("lambda_S", lambda_s), ("lambda_A", lambda_a)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("{name} = {v} outside [0, 1]")));
            }
        }
        phi.require_single()?;
        Ok(Self { lambda_s, lambda_a, phi })
    }
}

/// `((1+λ)/2)|φ⟩⟨φ| + ((1−λ)/2)|φ⊥⟩⟨φ⊥|`.
pub fn oriented_mixture(phi: &PureState, lambda: f64, label: &str) -> Result<DensityMatrix> {
    let perp = phi.orthogonal()?;
    let m = outer(phi.amplitudes(), phi.amplitudes()).scale((1.0 + lambda) / 2.0)
        + outer(perp.amplitudes(), perp.amplitudes()).scale((1.0 - lambda) / 2.0);
    DensityMatrix::new(m, [label])
}

/// Closed-form purification figures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PurificationFigures {
    pub success_probability: f64,
    pub delta: f64,
    pub lambda_out: f64,
    pub f_in: f64,
    pub f_out: f64,
}

pub fn purification_closed_form(lambda_s: f64, lambda_a: f64) -> PurificationFigures {
    let p = (3.0 + lambda_a * lambda_s) / 4.0;
    let delta = (lambda_a + lambda_s) / 2.0;
    PurificationFigures {
        success_probability: p,
        delta,
        lambda_out: delta / p,
        f_in: (1.0 + delta) / 2.0,
        f_out: (1.0 + delta / p) / 2.0,
    }
}

/// Symmetric projection of `ρ_S ⊗ ρ_A`, evaluated by direct projector algebra.
pub fn run_purification(input: &PurificationInput) -> Result<ProtocolOutcome> {
    let phi = require_qubit(&input.phi)?;
    let rho_s = oriented_mixture(&phi, input.lambda_s, INPUT)?;
    let rho_a = oriented_mixture(&phi, input.lambda_a, ALICE)?;
    let (p, post) = project_density(&rho_s.tensor(&rho_a)?)?;
    let mut reduced = BTreeMap::new();
    for label in [INPUT, ALICE] {
        reduced.insert(label.to_string(), post.partial_trace(&[label])?.relabel(["q"])?);
    }
    let target = phi.relabel(["q"])?;
    let f_out = fidelity_pure(&reduced[INPUT], &target)?;
    let f_in = 0.5 * (fidelity_pure(&rho_s.relabel(["q"])?, &target)? + fidelity_pure(&rho_a.relabel(["q"])?, &target)?);
    let mut fidelities = BTreeMap::new();
    fidelities.insert("f_in".into(), f_in);
    fidelities.insert("f_out".into(), f_out);
    fidelities.insert("lambda_out".into(), 2.0 * f_out - 1.0);
    Ok(ProtocolOutcome {
        success_probability: p,
        post_state: PostState::Mixed(post),
        reduced,
        fidelities,
    })
}

/// An anti-unitary operator `V·K`, or a unitary when `conjugate` is false.
#[derive(Debug, Clone, PartialEq)]
pub struct AntiUnitary {
    pub unitary: CMatrix,
    pub conjugate: bool,
}

impl AntiUnitary {
    pub fn new(unitary: CMatrix, conjugate: bool) -> Self {
        Self { unitary, conjugate }
    }

    /// `A|φ⟩ = V (K|φ⟩)`.
    pub fn apply(&self, phi: &PureState) -> Result<PureState> {
        let v = if self.conjugate { phi.conjugate() } else { phi.clone() };
        PureState::normalized(&self.unitary * v.amplitudes(), v.labels().to_vec())
    }
}

/// Unitary part `U^A` of `A = U^A σ_Y A^NOT` with `A^NOT = σ_Y K`.
#[derive(Debug, Clone, PartialEq)]
pub struct AntiUnitarySpec {
    pub unitary: CMatrix,
}

impl AntiUnitarySpec {
    pub fn new(unitary: CMatrix) -> Result<Self> {
        if unitary.shape() != (2, 2) {
            return Err(Error::DimensionMismatch { expected: 2, found: unitary.nrows() });
        }
        let err = unitarity_error(&unitary);
        if err > 1e-12 {
            return Err(Error::NotUnitary(err));
        }
        Ok(Self { unitary })
    }

    pub fn unot() -> Self {
        Self { unitary: sigma_y() }
    }

    pub fn transpose() -> Self {
        Self { unitary: CMatrix::identity(2, 2) }
    }

    /// `|φ^A⟩ = U^A σ_Y (σ_Y K)|φ⟩`.
    pub fn image(&self, phi: &PureState) -> Result<PureState> {
        phi.require_single()?;
        let not = sigma_y() * phi.conjugate().amplitudes();
        PureState::normalized(&self.unitary * sigma_y() * not, phi.labels().to_vec())
    }

    /// The completely positive map `ρ ↦ U^A σ_Y E_UNOT(ρ) σ_Y U^A†`.
    pub fn channel(&self) -> KrausChannel {
        let rotation = &self.unitary * sigma_y();
        let terms = (1..=3)
            .map(|i| KrausTerm { weight: 1.0 / 3.0, op: &rotation * pauli(i) })
            .collect();
        KrausChannel::new(terms).expect("unitary rotation of the UNOT channel is trace preserving")
    }
}

pub fn antiunitary_decompose(a: &AntiUnitary) -> Result<AntiUnitarySpec> {
    if !a.conjugate {
        return Err(Error::InvalidParameter("operator is unitary, not anti-unitary".into()));
    }
    AntiUnitarySpec::new(a.unitary.clone())
}

/// Optimal CP approximation of the anti-unitary map: on a pure input returns
/// `(2/3)|φ^A⟩⟨φ^A| + (1/3)|φ^{A⊥}⟩⟨φ^{A⊥}|`. Mixed inputs go through the
/// linear (Kraus) extension.
pub fn optimal_antiunitary_map(spec: &AntiUnitarySpec, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if rho.num_qubits() != 1 {
        return Err(Error::NotSingleQubit(rho.num_qubits()));
    }
    apply_channel(&spec.channel(), rho)
}

/// Tele-UNOT protocol with the shared pair `(𝕀 ⊗ U†)|Ψ⁻⟩`: Bob receives
/// `U† E_UNOT(ρ_S) U`.
pub fn programmable_teleport(phi: &PureState, u: &CMatrix) -> Result<ProtocolOutcome> {
    let phi = require_qubit(phi)?;
    if u.shape() != (2, 2) {
        return Err(Error::DimensionMismatch { expected: 2, found: u.nrows() });
    }
    if !is_unitary(u) {
        return Err(Error::NotUnitary(unitarity_error(u)));
    }
    let mut pair = singlet(ALICE, BOB);
    pair.apply(&u.adjoint(), &[BOB])?;
    let (p, post) = project_with_pair(&phi, pair)?;
    let mut reduced = BTreeMap::new();
    for label in [INPUT, ALICE, BOB] {
        reduced.insert(label.to_string(), post.reduced(&[label])?.relabel(["q"])?);
    }
    let target = phi.clone().relabel(["q"])?;
    // Bob's output approximates A = U†σ_Y K, i.e. U^A = U†σ_Y.
    let spec = AntiUnitarySpec::new(u.adjoint() * sigma_y())?;
    let bob_target = spec.image(&target)?;
    let mut fidelities = BTreeMap::new();
    fidelities.insert("clone".into(), fidelity_pure(&reduced[INPUT], &target)?);
    fidelities.insert("antiunitary".into(), fidelity_pure(&reduced[BOB], &bob_target)?);
    Ok(ProtocolOutcome {
        success_probability: p,
        post_state: PostState::Pure(post),
        reduced,
        fidelities,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{max_abs, random, sigma_x};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag(a: f64, b: f64) -> CMatrix {
        CMatrix::from_diagonal(&CVector::from_vec(vec![c(a, 0.0), c(b, 0.0)]))
    }

    #[test]
    fn projector_properties() {
        let p = symmetric_projector_2q();
        assert!(max_abs(&(&p * &p - &p)) < 1e-15);
        assert_abs_diff_eq!(trace(&p).re, 3.0, epsilon = 1e-15);
        assert!((&p * singlet_vector()).norm() < 1e-15);
        let mut zero = CVector::zeros(4);
        zero[0] = c(1.0, 0.0);
        assert!((&p * &zero - &zero).norm() < 1e-15);
    }

    #[test]
    fn cloning_from_ground_state() {
        let phi = PureState::basis(&[0], ["S"]).unwrap();
        let out = run_cloning_teleunot(&phi).unwrap();
        assert_abs_diff_eq!(out.success_probability, 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(out.fidelities["clone"], 5.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.fidelities["unot"], 2.0 / 3.0, epsilon = 1e-12);
        assert!(max_abs(&(out.reduced["S"].matrix() - diag(5.0 / 6.0, 1.0 / 6.0))) < 1e-12);
        assert!(max_abs(&(out.reduced["B"].matrix() - diag(1.0 / 3.0, 2.0 / 3.0))) < 1e-12);
        let PostState::Pure(post) = &out.post_state else { panic!("pure post state") };
        assert!(post.canonical_distance(&xi_state(&phi).unwrap()).unwrap() < 1e-12);
    }

    #[test]
    fn cloning_is_universal() {
        let plus = PureState::from_bloch_angles(std::f64::consts::FRAC_PI_2, 0.0, "S");
        let out = run_cloning_teleunot(&plus).unwrap();
        assert_abs_diff_eq!(out.fidelities["clone"], 5.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.fidelities["unot"], 2.0 / 3.0, epsilon = 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let phi = random::haar_qubit(&mut rng, "S");
            let out = run_cloning_teleunot(&phi).unwrap();
            assert_abs_diff_eq!(out.success_probability, 0.75, epsilon = 1e-12);
            assert_abs_diff_eq!(out.fidelities["clone"], 5.0 / 6.0, epsilon = 1e-12);
            assert_abs_diff_eq!(out.fidelities["unot"], 2.0 / 3.0, epsilon = 1e-12);
            assert!(out.reduced["S"].max_distance(&out.reduced["A"]) < 1e-12);
            let PostState::Pure(post) = &out.post_state else { panic!() };
            assert!(post.canonical_distance(&xi_state(&phi).unwrap()).unwrap() < 1e-12);
        }
    }

    #[test]
    fn cloning_rejects_bad_input() {
        let two = PureState::basis(&[0, 0], ["S", "T"]).unwrap();
        assert!(run_cloning_teleunot(&two).is_err());
    }

    #[test]
    fn mixed_ancilla_cloning() {
        let zero = PureState::basis(&[0], ["S"]).unwrap();
        let out = run_cloning_mixed_ancilla(&zero).unwrap();
        assert!(max_abs(&(out.reduced["S"].matrix() - diag(5.0 / 6.0, 1.0 / 6.0))) < 1e-12);
        assert!(!out.reduced.contains_key("B"));
        let one = PureState::basis(&[1], ["S"]).unwrap();
        let out = run_cloning_mixed_ancilla(&one).unwrap();
        assert!(max_abs(&(out.reduced["S"].matrix() - diag(1.0 / 6.0, 5.0 / 6.0))) < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let phi = random::haar_qubit(&mut rng, "S");
            let out = run_cloning_mixed_ancilla(&phi).unwrap();
            assert_abs_diff_eq!(out.success_probability, 0.75, epsilon = 1e-12);
            assert_abs_diff_eq!(out.fidelities["clone"], 5.0 / 6.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn purification_cases() {
        let phi = PureState::from_bloch_angles(0.9, 1.3, "S");
        let corner = run_purification(&PurificationInput::new(1.0, 0.0, phi.clone()).unwrap()).unwrap();
        assert_abs_diff_eq!(corner.success_probability, 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(corner.fidelities["f_in"], 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(corner.fidelities["f_out"], 5.0 / 6.0, epsilon = 1e-12);
        let cloning = run_cloning_mixed_ancilla(&phi).unwrap();
        assert_eq!(corner.post_state.to_density().dim(), 4);
        assert!(corner.post_state.to_density().max_distance(&cloning.post_state.to_density()) < 1e-12);

        let pure = run_purification(&PurificationInput::new(1.0, 1.0, phi.clone()).unwrap()).unwrap();
        assert_abs_diff_eq!(pure.success_probability, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pure.fidelities["f_out"], 1.0, epsilon = 1e-12);

        let half = run_purification(&PurificationInput::new(0.5, 0.5, phi.clone()).unwrap()).unwrap();
        assert_abs_diff_eq!(half.success_probability, 0.8125, epsilon = 1e-12);
        // (1 + 0.5/0.8125)/2
        assert_abs_diff_eq!(half.fidelities["f_out"], 0.807_692_307_692_307_7, epsilon = 1e-12);
        assert!(half.reduced["S"].max_distance(&half.reduced["A"]) < 1e-12);

        assert!(PurificationInput::new(1.2, 0.0, phi.clone()).is_err());
        assert!(PurificationInput::new(0.2, -0.1, phi).is_err());
    }

    #[test]
    fn decomposition_examples() {
        let not = antiunitary_decompose(&AntiUnitary::new(sigma_y(), true)).unwrap();
        assert_eq!(not.unitary, sigma_y());
        let tr = antiunitary_decompose(&AntiUnitary::new(CMatrix::identity(2, 2), true)).unwrap();
        assert_eq!(tr.unitary, CMatrix::identity(2, 2));
        let a = AntiUnitary::new(sigma_x(), true);
        let spec = antiunitary_decompose(&a).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let phi = random::haar_qubit(&mut rng, "q");
            let direct = a.apply(&phi).unwrap();
            let via = spec.image(&phi).unwrap();
            assert!(direct.canonical_distance(&via).unwrap() < 1e-12);
        }
        assert!(antiunitary_decompose(&AntiUnitary::new(sigma_x(), false)).is_err());
        let bad = CMatrix::identity(2, 2).scale(2.0);
        assert!(matches!(
            antiunitary_decompose(&AntiUnitary::new(bad, true)),
            Err(Error::NotUnitary(_))
        ));
    }

    #[test]
    fn antiunitary_map_examples() {
        let zero = PureState::basis(&[0], ["q"]).unwrap().to_density();
        let out = optimal_antiunitary_map(&AntiUnitarySpec::unot(), &zero).unwrap();
        assert!(max_abs(&(out.matrix() - diag(1.0 / 3.0, 2.0 / 3.0))) < 1e-12);

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let phi = PureState::qubit(c(h, 0.0), c(0.0, h), "q").unwrap();
        let out = optimal_antiunitary_map(&AntiUnitarySpec::transpose(), &phi.to_density()).unwrap();
        let conj = PureState::qubit(c(h, 0.0), c(0.0, -h), "q").unwrap();
        assert_abs_diff_eq!(fidelity_pure(&out, &conj).unwrap(), 2.0 / 3.0, epsilon = 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let spec = AntiUnitarySpec::new(random::haar_unitary(&mut rng)).unwrap();
            let phi = random::haar_qubit(&mut rng, "q");
            let out = optimal_antiunitary_map(&spec, &phi.to_density()).unwrap();
            let target = spec.image(&phi).unwrap();
            assert_abs_diff_eq!(fidelity_pure(&out, &target).unwrap(), 2.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn teleport_program_examples() {
        let zero = PureState::basis(&[0], ["S"]).unwrap();
        let plain = programmable_teleport(&zero, &CMatrix::identity(2, 2)).unwrap();
        assert!(max_abs(&(plain.reduced["B"].matrix() - diag(1.0 / 3.0, 2.0 / 3.0))) < 1e-12);
        let tr = programmable_teleport(&zero, &sigma_y()).unwrap();
        assert!(max_abs(&(tr.reduced["B"].matrix() - diag(2.0 / 3.0, 1.0 / 3.0))) < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let u = random::haar_unitary(&mut rng);
            let phi = random::haar_qubit(&mut rng, "S");
            let out = programmable_teleport(&phi, &u).unwrap();
            assert_abs_diff_eq!(out.success_probability, 0.75, epsilon = 1e-12);
            assert_abs_diff_eq!(out.fidelities["antiunitary"], 2.0 / 3.0, epsilon = 1e-12);
            assert_abs_diff_eq!(out.fidelities["clone"], 5.0 / 6.0, epsilon = 1e-12);
            let base = programmable_teleport(&phi, &CMatrix::identity(2, 2)).unwrap();
            let rotated = u.adjoint() * base.reduced["B"].matrix() * &u;
            assert!(max_abs(&(rotated - out.reduced["B"].matrix())) < 1e-12);
            let spec = AntiUnitarySpec::new(u.adjoint() * sigma_y()).unwrap();
            let oracle = optimal_antiunitary_map(&spec, &phi.clone().relabel(["q"]).unwrap().to_density()).unwrap();
            assert!(oracle.max_distance(&out.reduced["B"]) < 1e-12);
        }
        assert!(programmable_teleport(&zero, &CMatrix::identity(2, 2).scale(1.1)).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_input() -> impl Strategy<Value = PureState> {
            (0.0..std::f64::consts::PI, 0.0..std::f64::consts::TAU)
                .prop_map(|(t, p)| PureState::from_bloch_angles(t, p, INPUT))
        }

        proptest! {
            #[test]
            fn cloning_figures_are_state_independent(phi in arb_input()) {
                let out = run_cloning_teleunot(&phi).unwrap();
                prop_assert!((out.success_probability - 0.75).abs() < 1e-12);
                prop_assert!((out.fidelities["clone"] - 5.0 / 6.0).abs() < 1e-12);
                prop_assert!((out.fidelities["unot"] - 2.0 / 3.0).abs() < 1e-12);
                prop_assert!(out.reduced["S"].max_distance(&out.reduced["A"]) < 1e-12);
                for rho in out.reduced.values() {
                    prop_assert!(rho.validate().is_ok());
                }
            }

            #[test]
            fn purification_matches_closed_form(phi in arb_input(), ls in 0.0..=1.0f64, la in 0.0..=1.0f64) {
                let out = run_purification(&PurificationInput::new(ls, la, phi).unwrap()).unwrap();
                let want = purification_closed_form(ls, la);
                prop_assert!((out.success_probability - want.success_probability).abs() < 1e-12);
                prop_assert!((out.fidelities["f_out"] - want.f_out).abs() < 1e-12);
                prop_assert!(out.fidelities["f_out"] >= out.fidelities["f_in"] - 1e-12);
            }

            #[test]
            fn teleported_output_rotates_with_program(phi in arb_input(), seed in any::<u64>()) {
                let u = random::haar_unitary(&mut ChaCha8Rng::seed_from_u64(seed));
                let plain = programmable_teleport(&phi, &CMatrix::identity(2, 2)).unwrap();
                let programmed = programmable_teleport(&phi, &u).unwrap();
                let expected = u.adjoint() * plain.reduced["B"].matrix() * &u;
                prop_assert!(max_abs(&(programmed.reduced["B"].matrix() - expected)) < 1e-12);
                prop_assert!((programmed.success_probability - 0.75).abs() < 1e-12);
            }
        }
    }
}
