//! Random plaquette spin models over GF(2).
//!
//! * [`gf2`]: packed binary matrices, elimination, nullspaces
//! * [`lattice`]: geometries, disorder realizations, parity-check matrices
//! * [`symmetry`]: symmetry groups and rank entropies
//! * [`automaton`]: layer-by-layer cellular-automaton evolution of boundary symmetries
//! * [`stabilizer`]: Clifford tableau cross-check of the measured cluster state
//! * [`harness`]: disorder-averaged parameter sweeps
//! * [`scaling`]: finite-size scaling fits
//! * [`recipes`]: scaled-down figure reproductions

pub mod automaton;
pub mod error;
pub mod gf2;
pub mod harness;
pub mod lattice;
pub mod recipes;
pub mod scaling;
pub mod stabilizer;
pub mod symmetry;

pub use error::{Error, Result};
