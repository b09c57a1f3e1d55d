//! Abstracted two-photon post-selection model of the cloning and NOT
//! experiments.
//!
//! An input photon `φ` and an ancilla photon (either `φ` or `φ⊥`, each with
//! probability ½) meet on a balanced beam splitter. A coincidence is
//! recorded when both photons leave through the monitored port. With
//! temporal overlap `v`, that happens with probability `(1+v)/4` for equal
//! polarizations and `1/4` for orthogonal ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::qcore::PureState;

#[derive(Debug, Clone, PartialEq)]
pub struct HomConfig {
    pub phi: PureState,
    pub delay_z: f64,
    pub sigma_z: f64,
    pub shots: u64,
    pub seed: u64,
    /// Signal-to-noise correction factor.
    pub xi: f64,
}

impl HomConfig {
    pub fn new(phi: PureState, delay_z: f64, sigma_z: f64, shots: u64, seed: u64, xi: f64) -> Result<Self> {
        phi.require_single()?;
        if !(sigma_z > 0.0) {
            return Err(Error::InvalidParameter(format!("sigma_z must be positive, got {sigma_z}")));
        }
        if shots < 1 {
            return Err(Error::InvalidParameter("shots must be at least 1".into()));
        }
        if !(xi > 0.0 && xi <= 1.0) {
            return Err(Error::InvalidParameter(format!("xi must lie in (0, 1], got {xi}")));
        }
        if !delay_z.is_finite() {
            return Err(Error::InvalidParameter("delay must be finite".into()));
        }
        Ok(Self { phi, delay_z, sigma_z, shots, seed, xi })
    }

    pub fn visibility(&self) -> f64 {
        overlap(self.delay_z, self.sigma_z).expect("validated sigma_z")
    }
}

/// Gaussian dip profile `v = exp(−(Δz/σ_z)²)`.
pub fn overlap(delay_z: f64, sigma_z: f64) -> Result<f64> {
    if !(sigma_z > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma_z must be positive, got {sigma_z}")));
    }
    Ok((-(delay_z / sigma_z).powi(2)).exp())
}

fn check_visibility(v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidParameter(format!("visibility must lie in [0, 1], got {v}")));
    }
    Ok(())
}

/// Unconditional probabilities of a monitored-port coincidence together
/// with a parallel or orthogonal ancilla: `(1+v)/8` and `1/8`.
pub fn joint_probabilities(v: f64) -> Result<(f64, f64)> {
    check_visibility(v)?;
    Ok(((1.0 + v) / 8.0, 1.0 / 8.0))
}

/// Conditional on a coincidence: `((1+v)/(2+v), 1/(2+v))`.
pub fn coincidence_probabilities(phi: &PureState, v: f64) -> Result<(f64, f64)> {
    phi.require_single()?;
    let (par, orth) = joint_probabilities(v)?;
    let total = par + orth;
    Ok((par / total, orth / total))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoincidenceRecord {
    pub visibility: f64,
    pub n_parallel: u64,
    pub n_orthogonal: u64,
    pub baseline_parallel: u64,
    pub baseline_orthogonal: u64,
    pub r_hat: f64,
    pub r_err: f64,
    /// Set when a denominator count is zero; `r_err` is then infinite.
    pub flagged: bool,
}

fn sample_counts(v: f64, shots: u64, rng: &mut ChaCha8Rng) -> Result<(u64, u64)> {
    let (p_par, p_orth) = joint_probabilities(v)?;
    let bin = |n: u64, p: f64| {
        Binomial::new(n, p.clamp(0.0, 1.0)).map_err(|e| Error::InvalidParameter(e.to_string()))
    };
    let n_par = bin(shots, p_par)?.sample(rng);
    let n_orth = bin(shots - n_par, p_orth / (1.0 - p_par))?.sample(rng);
    Ok((n_par, n_orth))
}

/// Coincidence counting at visibility `v` and at an off-dip baseline
/// (`v = 0`), each with `shots` trials on separate streams of `seed`.
pub fn estimate_r_at_visibility(v: f64, shots: u64, seed: u64) -> Result<CoincidenceRecord> {
    check_visibility(v)?;
    if shots < 1 {
        return Err(Error::InvalidParameter("shots must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n_par, n_orth) = sample_counts(v, shots, &mut rng)?;
    rng.set_stream(1);
    let (b_par, b_orth) = sample_counts(0.0, shots, &mut rng)?;
    let flagged = n_orth == 0 || b_par == 0 || b_orth == 0;
    let (r_hat, r_err) = if flagged {
        (f64::INFINITY, f64::INFINITY)
    } else {
        let r = (n_par as f64 / n_orth as f64) / (b_par as f64 / b_orth as f64);
        let inv = |n: u64| if n == 0 { 0.0 } else { 1.0 / n as f64 };
        // Multinomial counts: var(ln(n₁/n₂)) ≈ 1/n₁ + 1/n₂.
        let rel = (inv(n_par) + inv(n_orth) + inv(b_par) + inv(b_orth)).sqrt();
        (r, r * rel)
    };
    Ok(CoincidenceRecord {
        visibility: v,
        n_parallel: n_par,
        n_orthogonal: n_orth,
        baseline_parallel: b_par,
        baseline_orthogonal: b_orth,
        r_hat,
        r_err,
        flagged,
    })
}

pub fn estimate_r(config: &HomConfig) -> Result<CoincidenceRecord> {
    estimate_r_at_visibility(config.visibility(), config.shots, config.seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorMode {
    Clone,
    Unot,
}

/// `(2R+1)/(2R+2)` for cloning, `R/(R+1)` for the NOT.
pub fn fidelity_from_r(r: f64, mode: EstimatorMode) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::InvalidParameter(format!("R must be non-negative, got {r}")));
    }
    if r.is_infinite() {
        return Ok(1.0);
    }
    Ok(match mode {
        EstimatorMode::Clone => (2.0 * r + 1.0) / (2.0 * r + 2.0),
        EstimatorMode::Unot => r / (r + 1.0),
    })
}

/// First-order propagation of `r_err` through the estimator.
pub fn fidelity_error(r: f64, r_err: f64, mode: EstimatorMode) -> Result<f64> {
    fidelity_from_r(r, mode)?;
    let slope = match mode {
        EstimatorMode::Clone => 1.0 / (2.0 * (r + 1.0).powi(2)),
        EstimatorMode::Unot => 1.0 / (r + 1.0).powi(2),
    };
    Ok(slope * r_err)
}

/// `R_raw / ξ`.
pub fn xi_correct(r_raw: f64, xi: f64) -> Result<f64> {
    if !(xi > 0.0) {
        return Err(Error::InvalidParameter(format!("xi must be positive, got {xi}")));
    }
    Ok(r_raw / xi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanPoint {
    pub delay_z: f64,
    pub n_parallel: u64,
    pub n_orthogonal: u64,
    #[serde(rename = "R_hat")]
    pub r_hat: f64,
    #[serde(rename = "R_err")]
    pub r_err: f64,
    #[serde(rename = "F_clone")]
    pub f_clone: f64,
    #[serde(rename = "F_unot")]
    pub f_unot: f64,
}

/// One estimate per delay, seeded with `seed + index`. Fidelities use the
/// ξ-corrected ratio.
pub fn dip_scan(config: &HomConfig, delays: &[f64]) -> Result<Vec<ScanPoint>> {
    delays
        .iter()
        .enumerate()
        .map(|(i, &delay_z)| {
            let point = HomConfig { delay_z, seed: config.seed.wrapping_add(i as u64), ..config.clone() };
            let rec = estimate_r(&point)?;
            let r = xi_correct(rec.r_hat, config.xi)?;
            Ok(ScanPoint {
                delay_z,
                n_parallel: rec.n_parallel,
                n_orthogonal: rec.n_orthogonal,
                r_hat: rec.r_hat,
                r_err: rec.r_err,
                f_clone: fidelity_from_r(r, EstimatorMode::Clone)?,
                f_unot: fidelity_from_r(r, EstimatorMode::Unot)?,
            })
        })
        .collect()
}

pub fn scan_to_csv(points: &[ScanPoint]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in points {
        w.serialize(p)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Serialization(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Serialization(e.to_string()))
}

pub fn scan_to_json(points: &[ScanPoint]) -> Result<String> {
    Ok(serde_json::to_string(points)?)
}
