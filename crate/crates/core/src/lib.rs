//! Simulation of universal optimal quantum machines built on symmetric-subspace
//! projection: 1→2 cloning with the teleported universal NOT, qubit
//! purification, programmable anti-unitary teleportation, N→M cloning through
//! angular-momentum coupling, the stochastic optimal-transpose channel and its
//! entanglement-assisted tomography, and an abstracted two-photon
//! post-selection model.

pub mod angmom;
pub mod channels;
pub mod error;
pub mod optics;
pub mod qcircuit;
pub mod qcore;
pub mod report;
pub mod symmproto;
pub mod tomography;

pub use error::{Error, Result};
pub use qcore::{BlochVector, CMatrix, CVector, DensityMatrix, PureState};
