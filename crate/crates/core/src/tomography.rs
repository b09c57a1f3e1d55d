//! Entanglement-assisted process tomography of a single-qubit channel.
//!
//! One half (B) of a two-qubit probe passes through the channel. With
//! `C_ij = Tr[(σ_i ⊗ σ_j) ρ_AB]` measured before and after, the Pauli
//! transfer matrix satisfies `Mᵀ = C⁻¹ C′`.

use nalgebra::Matrix4;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use crate::channels::{apply_local, KrausChannel, PauliTransferMatrix};
use crate::error::{Error, Result};
use crate::qcore::{pauli_expectation, psd_sqrt, random, trace, BlochVector, CMatrix, DensityMatrix};

/// Condition number above which `C` is treated as singular.
pub const CONDITION_LIMIT: f64 = 1e6;
pub const DEFAULT_FIDELITY_SAMPLES: usize = 100_000;


#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationMatrix {
    pub c: Matrix4<f64>,
}

impl CorrelationMatrix {
    pub fn rows(&self) -> [[f64; 4]; 4] {
        std::array::from_fn(|i| std::array::from_fn(|j| self.c[(i, j)]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shots {
    Exact,
    Sampled(u64),
}

impl Shots {
    fn validate(self) -> Result<()> {
        match self {
            Shots::Sampled(0) => Err(Error::InvalidParameter("shots must be at least 1".into())),
            _ => Ok(()),
        }
    }
}

fn require_two_qubits(rho: &DensityMatrix) -> Result<()> {
    if rho.num_qubits() != 2 {
        return Err(Error::DimensionMismatch { expected: 4, found: rho.dim() });
    }
    Ok(())
}

fn correlation_with(rho: &DensityMatrix, shots: Shots, rng: &mut ChaCha8Rng) -> Result<CorrelationMatrix> {
    require_two_qubits(rho)?;
    shots.validate()?;
    let mut c = Matrix4::zeros();
    for i in 0..4 {
        for j in 0..4 {
            let exact = pauli_expectation(rho, &[i, j])?;
            c[(i, j)] = match shots {
                _ if i == 0 && j == 0 => 1.0,
                Shots::Exact => exact,
                Shots::Sampled(n) => {
                    let p = ((1.0 + exact) / 2.0).clamp(0.0, 1.0);
                    let dist = Binomial::new(n, p).map_err(|e| Error::InvalidParameter(e.to_string()))?;
                    2.0 * dist.sample(rng) as f64 / n as f64 - 1.0
                }
            };
        }
    }
    Ok(CorrelationMatrix { c })
}

/// `C_ij = ⟨σ_i ⊗ σ_j⟩`; sampled mode draws a fixed number of ±1 outcomes
/// per Pauli setting.
pub fn correlation_matrix(rho: &DensityMatrix, shots: Shots, seed: u64) -> Result<CorrelationMatrix> {
    correlation_with(rho, shots, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Ratio of largest to smallest singular value; infinite when singular.
pub fn condition_number(m: &Matrix4<f64>) -> f64 {
    let s = m.svd(false, false).singular_values;
    let (max, min) = (s.max(), s.min());
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// `M = (C⁻¹ C′)ᵀ`, rejecting an ill-conditioned `C`.
pub fn eaqpt_reconstruct(c: &CorrelationMatrix, c_prime: &CorrelationMatrix) -> Result<PauliTransferMatrix> {
    let cond = condition_number(&c.c);
    if !(cond <= CONDITION_LIMIT) {
        return Err(Error::IllConditioned(cond));
    }
    let inv = c.c.try_inverse().ok_or(Error::IllConditioned(cond))?;
    Ok(PauliTransferMatrix::new((inv * c_prime.c).transpose()))
}

/// A linear map on single-qubit operators.
pub trait QubitMap {
    fn map_operator(&self, rho: &CMatrix) -> CMatrix;
}

impl QubitMap for KrausChannel {
    fn map_operator(&self, rho: &CMatrix) -> CMatrix {
        self.apply_operator(rho)
    }
}

impl QubitMap for PauliTransferMatrix {
    fn map_operator(&self, rho: &CMatrix) -> CMatrix {
        self.apply_operator(rho)
    }
}

/// Determinants below this are rounding noise of a pure state.
const DET_FLOOR: f64 = 1e-15;

fn det2(m: &CMatrix) -> f64 {
    let d = (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).re;
    if d < DET_FLOOR {
        0.0
    } else {
        d
    }
}

/// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²`. For qubits this is evaluated as
/// `Tr[ρσ] + 2√(det ρ det σ)`, which is exact for pure arguments.
pub fn uhlmann_fidelity(rho: &CMatrix, sigma: &CMatrix) -> Result<f64> {
    if rho.shape() != sigma.shape() || rho.nrows() != rho.ncols() {
        return Err(Error::DimensionMismatch { expected: rho.nrows(), found: sigma.nrows() });
    }
    if rho.nrows() == 2 {
        let overlap = trace(&(rho * sigma)).re;
        let dets = det2(rho) * det2(sigma);
        return Ok(overlap + 2.0 * dets.sqrt());
    }
    let s = psd_sqrt(rho);
    let inner = &s * sigma * &s;
    Ok(trace(&psd_sqrt(&inner)).re.powi(2))
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

fn map_fidelity_with<E: QubitMap + ?Sized, L: QubitMap + ?Sized>(
    e: &E,
    l: &L,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Estimate> {
    if samples < 2 {
        return Err(Error::InvalidParameter("map fidelity needs at least 2 samples".into()));
    }
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        let r = random::uniform_sphere(rng);
        let input = BlochVector { r }.to_density("q");
        let f = uhlmann_fidelity(&e.map_operator(input.matrix()), &l.map_operator(input.matrix()))?;
        sum += f;
        sum_sq += f * f;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(Estimate { mean, stderr: (var / n).sqrt(), samples })
}

/// `F(E, L) = ∫dΨ F[E(Ψ), L(Ψ)]` over uniformly distributed pure inputs.
pub fn map_fidelity<E: QubitMap + ?Sized, L: QubitMap + ?Sized>(
    e: &E,
    l: &L,
    samples: usize,
    seed: u64,
) -> Result<Estimate> {
    map_fidelity_with(e, l, samples, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TomographyRun {
    /// Two-qubit probe; the channel acts on its second qubit.
    pub input_state: DensityMatrix,
    pub channel_under_test: KrausChannel,
    pub shots: Shots,
    pub seed: u64,
}

impl TomographyRun {
    pub fn new(input_state: DensityMatrix, channel_under_test: KrausChannel, shots: Shots, seed: u64) -> Result<Self> {
        require_two_qubits(&input_state)?;
        shots.validate()?;
        Ok(Self { input_state, channel_under_test, shots, seed })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EaqptResult {
    pub ptm: PauliTransferMatrix,
    pub c: CorrelationMatrix,
    pub c_prime: CorrelationMatrix,
    pub condition_number: f64,
    pub fidelity: Estimate,
}

#[derive(Serialize)]
struct EaqptJson {
    ptm: [[f64; 4]; 4],
    condition_number: f64,
    fidelity: f64,
    fidelity_stderr: f64,
    fidelity_samples: usize,
}

impl EaqptResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&EaqptJson {
            ptm: self.ptm.rows(),
            condition_number: self.condition_number,
            fidelity: self.fidelity.mean,
            fidelity_stderr: self.fidelity.stderr,
            fidelity_samples: self.fidelity.samples,
        })?)
    }

    /// `field,value` rows: PTM entries `m{i}{j}`, then the scalar figures.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["field", "value"])?;
        for (i, row) in self.ptm.rows().iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                w.write_record([format!("m{i}{j}"), v.to_string()])?;
            }
        }
        w.write_record(["condition_number".to_string(), self.condition_number.to_string()])?;
        w.write_record(["fidelity".to_string(), self.fidelity.mean.to_string()])?;
        w.write_record(["fidelity_stderr".to_string(), self.fidelity.stderr.to_string()])?;
        let bytes = w.into_inner().map_err(|e| Error::Serialization(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Serialization(e.to_string()))
    }
}

/// Measures `C`, sends the probe through the channel, measures `C′`,
/// reconstructs the PTM and scores it against `target`. The three random
/// stages draw from separate ChaCha streams of the same seed.
pub fn run_eaqpt(run: &TomographyRun, target: &KrausChannel, fidelity_samples: usize) -> Result<EaqptResult> {
    let label = run.input_state.labels()[1].clone();
    let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
    let c = correlation_with(&run.input_state, run.shots, &mut rng)?;
    let output = apply_local(&run.channel_under_test, &run.input_state, &label)?;
    rng.set_stream(1);
    let c_prime = correlation_with(&output, run.shots, &mut rng)?;
    let ptm = eaqpt_reconstruct(&c, &c_prime)?;
    rng.set_stream(2);
    let fidelity = map_fidelity_with(target, &ptm, fidelity_samples, &mut rng)?;
    Ok(EaqptResult {
        condition_number: condition_number(&c.c),
        ptm,
        c,
        c_prime,
        fidelity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::kraus_to_ptm;
    use crate::qcore::{c, CVector, PureState};
    use crate::symmproto::singlet;
    use approx::assert_abs_diff_eq;

    fn singlet_rho() -> DensityMatrix {
        singlet("A", "B").to_density()
    }

    fn diag(d: [f64; 4]) -> Matrix4<f64> {
        Matrix4::from_diagonal(&d.into())
    }

    fn max_entry(m: Matrix4<f64>) -> f64 {
        m.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }

    #[test]
    fn correlation_examples() {
        let cm = correlation_matrix(&singlet_rho(), Shots::Exact, 0).unwrap();
        assert!(max_entry(cm.c - diag([1.0, -1.0, -1.0, -1.0])) < 1e-12);

        let zz = PureState::basis(&[0, 0], ["A", "B"]).unwrap().to_density();
        let cm = correlation_matrix(&zz, Shots::Exact, 0).unwrap();
        let mut want = Matrix4::zeros();
        for (i, j) in [(0, 0), (0, 3), (3, 0), (3, 3)] {
            want[(i, j)] = 1.0;
        }
        assert!(max_entry(cm.c - want) < 1e-12);

        let sampled = correlation_matrix(&singlet_rho(), Shots::Sampled(10_000), 4).unwrap();
        assert_eq!(sampled.c[(0, 0)], 1.0);
        assert!(max_entry(sampled.c - diag([1.0, -1.0, -1.0, -1.0])) <= 3.0 / 100.0);
        let mixed = DensityMatrix::mixture(&[(0.6, &singlet_rho()), (0.4, &zz)]).unwrap();
        let exact = correlation_matrix(&mixed, Shots::Exact, 0).unwrap();
        let sampled = correlation_matrix(&mixed, Shots::Sampled(10_000), 9).unwrap();
        assert!(max_entry(sampled.c - exact.c) <= 3.0 / 100.0);
        assert_eq!(sampled, correlation_matrix(&mixed, Shots::Sampled(10_000), 9).unwrap());
        assert!(correlation_matrix(&mixed, Shots::Sampled(0), 9).is_err());
    }

    fn reconstruct(ch: &KrausChannel, rho: &DensityMatrix) -> Result<PauliTransferMatrix> {
        let cm = correlation_matrix(rho, Shots::Exact, 0)?;
        let out = apply_local(ch, rho, "B")?;
        eaqpt_reconstruct(&cm, &correlation_matrix(&out, Shots::Exact, 0)?)
    }

    #[test]
    fn reconstruction_examples() {
        let rho = singlet_rho();
        let c_prime = correlation_matrix(&apply_local(&KrausChannel::optimal_transpose(), &rho, "B").unwrap(), Shots::Exact, 0).unwrap();
        assert!(max_entry(c_prime.c - diag([1.0, -1.0 / 3.0, 1.0 / 3.0, -1.0 / 3.0])) < 1e-12);
        let m = reconstruct(&KrausChannel::optimal_transpose(), &rho).unwrap();
        assert!(max_entry(m.m - diag([1.0, 1.0 / 3.0, -1.0 / 3.0, 1.0 / 3.0])) < 1e-9);
        let m = reconstruct(&KrausChannel::identity(), &rho).unwrap();
        assert!(max_entry(m.m - Matrix4::identity()) < 1e-12);
        let m = reconstruct(&KrausChannel::depolarizing(), &rho).unwrap();
        assert!(max_entry(m.m - diag([1.0, 0.0, 0.0, 0.0])) < 1e-12);
    }

    #[test]
    fn product_probe_is_singular() {
        let zz = PureState::basis(&[0, 0], ["A", "B"]).unwrap().to_density();
        assert!(matches!(
            reconstruct(&KrausChannel::optimal_transpose(), &zz),
            Err(Error::IllConditioned(_))
        ));
        let run = TomographyRun::new(zz, KrausChannel::optimal_transpose(), Shots::Exact, 0).unwrap();
        assert!(matches!(
            run_eaqpt(&run, &KrausChannel::optimal_transpose(), 10),
            Err(Error::IllConditioned(_))
        ));
    }

    #[test]
    fn reconstruction_is_probe_independent() {
        // cos(0.3)|00⟩ + sin(0.3)|11⟩ has C = diag-like with nonzero
        // determinant and is not maximally entangled.
        let (a, b) = (0.3f64.cos(), 0.3f64.sin());
        let probe = PureState::new(
            CVector::from_vec(vec![c(a, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(b, 0.0)]),
            ["A", "B"],
        )
        .unwrap()
        .to_density();
        let ch = KrausChannel::unot().then(&KrausChannel::optimal_transpose());
        let from_singlet = reconstruct(&ch, &singlet_rho()).unwrap();
        let from_probe = reconstruct(&ch, &probe).unwrap();
        assert!(max_entry(from_singlet.m - from_probe.m) < 1e-9);
        assert!(max_entry(from_singlet.m - kraus_to_ptm(&ch).m) < 1e-9);
    }

    #[test]
    fn fidelity_examples() {
        let tr = KrausChannel::optimal_transpose();
        let same = map_fidelity(&tr, &tr, 1000, 1).unwrap();
        assert_abs_diff_eq!(same.mean, 1.0, epsilon = 1e-12);
        let est = map_fidelity(&KrausChannel::identity(), &tr, 100_000, 2).unwrap();
        assert!((est.mean - 5.0 / 9.0).abs() < 3.0 * est.stderr, "{est:?}");
        assert!(est.stderr > 0.0);
        let ptm = kraus_to_ptm(&tr);
        let mixed = map_fidelity(&tr, &ptm, 100, 3).unwrap();
        assert_abs_diff_eq!(mixed.mean, 1.0, epsilon = 1e-12);
        assert!(map_fidelity(&tr, &tr, 1, 0).is_err());
    }

    #[test]
    fn uhlmann_reduces_to_overlap() {
        let psi = PureState::from_bloch_angles(0.9, 2.1, "q");
        let rho = BlochVector { r: [0.2, -0.3, 0.5] }.to_density("q");
        let f = uhlmann_fidelity(psi.to_density().matrix(), rho.matrix()).unwrap();
        let direct = psi.amplitudes().dotc(&(rho.matrix() * psi.amplitudes())).re;
        assert_abs_diff_eq!(f, direct, epsilon = 1e-12);
        // General path agrees with the qubit formula.
        let sigma = BlochVector { r: [-0.1, 0.4, 0.2] }.to_density("q");
        let qubit = uhlmann_fidelity(rho.matrix(), sigma.matrix()).unwrap();
        let big = |m: &CMatrix| crate::qcore::kron(m, &CMatrix::identity(2, 2).unscale(2.0));
        let general = uhlmann_fidelity(&big(rho.matrix()), &big(sigma.matrix())).unwrap();
        assert_abs_diff_eq!(qubit, general, epsilon = 1e-10);
    }

    #[test]
    fn pipeline_examples() {
        let tr = KrausChannel::optimal_transpose();
        let run = TomographyRun::new(singlet_rho(), tr.clone(), Shots::Exact, 0).unwrap();
        let res = run_eaqpt(&run, &tr, 1000).unwrap();
        assert_abs_diff_eq!(res.fidelity.mean, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(res.condition_number, 1.0, epsilon = 1e-12);

        let run = TomographyRun::new(singlet_rho(), tr.clone(), Shots::Sampled(10_000), 42).unwrap();
        let res = run_eaqpt(&run, &tr, 1000).unwrap();
        let target = diag([1.0, 1.0 / 3.0, -1.0 / 3.0, 1.0 / 3.0]);
        assert!(max_entry(res.ptm.m - target) <= 5.0 / 100.0);
        assert_eq!(res, run_eaqpt(&run, &tr, 1000).unwrap());
        assert!(TomographyRun::new(singlet_rho(), tr, Shots::Sampled(0), 1).is_err());
    }

    #[test]
    fn report_formats() {
        let tr = KrausChannel::optimal_transpose();
        let run = TomographyRun::new(singlet_rho(), tr.clone(), Shots::Exact, 0).unwrap();
        let res = run_eaqpt(&run, &tr, 10).unwrap();
        let json: serde_json::Value = serde_json::from_str(&res.to_json().unwrap()).unwrap();
        assert_eq!(json["ptm"][2][2].as_f64().unwrap().signum(), -1.0);
        assert!(json["condition_number"].is_number());
        let csv = res.to_csv().unwrap();
        assert!(csv.starts_with("field,value\nm00,1"));
        assert!(csv.contains("fidelity_stderr,"));
    }

    mod properties {
        use super::*;
        use crate::channels::KrausTerm;
        use proptest::prelude::*;
        use rand::SeedableRng;

        fn random_channel(seed: u64, w: f64) -> KrausChannel {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            KrausChannel::new(vec![
                KrausTerm { weight: w, op: random::haar_unitary(&mut rng) },
                KrausTerm { weight: 1.0 - w, op: random::haar_unitary(&mut rng) },
            ])
            .unwrap()
        }

        /// `cos a |01⟩ − sin a |10⟩`.
        fn partially_entangled(a: f64) -> DensityMatrix {
            let amps = CVector::from_vec(vec![c(0.0, 0.0), c(a.cos(), 0.0), c(-a.sin(), 0.0), c(0.0, 0.0)]);
            PureState::new(amps, ["A", "B"]).unwrap().to_density()
        }

        proptest! {
            #[test]
            fn exact_reconstruction_inverts_any_channel(seed in any::<u64>(), w in 0.0..=1.0f64, a in 0.2..1.3f64) {
                let ch = random_channel(seed, w);
                let truth = kraus_to_ptm(&ch).m;
                for probe in [singlet_rho(), partially_entangled(a)] {
                    let got = reconstruct(&ch, &probe).unwrap();
                    prop_assert!(max_entry(got.m - truth) < 1e-9);
                }
            }

            #[test]
            fn fidelity_with_pure_state_is_overlap(t in 0.0..3.1f64, p in 0.0..6.2f64, seed in any::<u64>(), w in 0.0..=1.0f64) {
                let psi = PureState::from_bloch_angles(t, p, "q");
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let other = random::haar_qubit(&mut rng, "q").to_density();
                let mixed = DensityMatrix::maximally_mixed(["q"]).unwrap();
                let rho = DensityMatrix::mixture(&[(w, &other), (1.0 - w, &mixed)]).unwrap();
                let f = uhlmann_fidelity(&psi.to_density().matrix().clone(), rho.matrix()).unwrap();
                let overlap = (psi.amplitudes().adjoint() * rho.matrix() * psi.amplitudes())[(0, 0)].re;
                prop_assert!((f - overlap).abs() < 1e-9);
                let g = uhlmann_fidelity(rho.matrix(), &psi.to_density().matrix().clone()).unwrap();
                prop_assert!((f - g).abs() < 1e-12);
            }

            #[test]
            fn sampled_correlations_are_bounded(seed in any::<u64>(), shots in 1u64..2_000, w in 0.0..=1.0f64) {
                let rho = DensityMatrix::mixture(&[
                    (w, &singlet_rho()),
                    (1.0 - w, &DensityMatrix::maximally_mixed(["A", "B"]).unwrap()),
                ])
                .unwrap();
                let c = correlation_matrix(&rho, Shots::Sampled(shots), seed).unwrap();
                prop_assert_eq!(c.c[(0, 0)], 1.0);
                prop_assert!(c.c.iter().all(|x| (-1.0..=1.0).contains(x)));
            }
        }
    }
}
