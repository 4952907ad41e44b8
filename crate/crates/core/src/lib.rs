//! Dressed-state spectra, perturbative couplings and open-system dynamics of a
//! qubit coupled to a photon mode and a magnon mode without the rotating-wave
//! approximation.

pub mod dynamics;
pub mod error;
pub mod fock;
pub mod hamiltonian;
mod linalg;
pub mod perturbation;
pub mod protocols;
pub mod spectral;
pub mod table;

pub use error::{Error, Result};
pub use fock::{BareLabel, DensityMatrix, OperatorKind, OperatorMatrix, Qubit, StateVector, Truncation, C64};
pub use hamiltonian::SystemParams;
