//! Truncated Fock-space simulator for a three-mode chi^(3) microring model.
//!
//! The crate builds sparse bosonic operators over a truncated multimode Fock
//! basis, propagates unitary and dissipative (Lindblad) dynamics of the
//! four-wave-mixing Hamiltonian with self- and cross-phase modulation, and
//! computes phase-space and photon-statistics diagnostics (Wigner functions,
//! quadrature variances, Fano factors, Schmidt numbers, fidelities).

pub mod dynamics;
pub mod error;
pub mod fock;
pub mod io;
pub mod linalg;
pub mod observables;
pub mod scenario;
pub mod sparse;
pub mod states;
pub mod wigner;

pub use error::SimError;
pub type Result<T> = std::result::Result<T, SimError>;
