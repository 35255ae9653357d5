//! Eight-state nearest-neighbor circuit Hamiltonians on a qudit line.
//!
//! * [`circuit`]: layered nearest-neighbor verifier circuits.
//! * [`chain`]: the six-symbol configuration automaton, pair legality and
//!   configuration classes.
//! * [`hamiltonian`]: the penalty, propagation, input and output terms.
//! * [`spectra`]: states, matrix-free products, restrictions and eigensolvers.
//! * [`verify`]: executable checks tying the pieces together.

pub mod chain;
pub mod circuit;
pub mod error;
pub mod hamiltonian;
pub mod spectra;
pub mod verify;

pub use error::{Error, Result};
