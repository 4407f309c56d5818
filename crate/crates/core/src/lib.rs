//! Tight-binding interfaces between two generalized honeycomb materials.
//!
//! The crate covers the lattice geometry, the Bloch-reduced interface
//! Hamiltonians for the two interface orientations, closed-form transfer
//! matrix analysis of zero-energy edge states, supercell spectra with
//! boundary filtering, wavepacket dynamics on finite 2D domains and the
//! 6-band bulk model.

pub mod bulk;
pub mod dynamics;
pub mod error;
pub mod hamiltonian;
pub mod lattice;
pub mod linalg;
pub mod spectrum;
pub mod transfer;

pub use error::{EdgeError, Result};
pub use hamiltonian::{BlochOperator, CoefficientRow, HoppingProfile};
pub use lattice::{InterfaceKind, LatticeVector, Side, SiteIndex};

pub type C64 = num_complex::Complex64;
