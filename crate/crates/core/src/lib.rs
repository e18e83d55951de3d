//! Dirac field scattering off commutative and Moyal-deformed potentials on a discretized torus.

pub mod clifford;
pub mod dynamics;
pub mod error;
pub mod fock;
pub mod grid;
pub mod harness;
pub mod linalg;
pub mod moyal;
pub mod operator;
pub mod scattering;

pub use error::{Error, Result};
