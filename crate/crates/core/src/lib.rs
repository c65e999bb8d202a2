//! Coset-state copy-protection laboratory: F_2 algebra, statevector
//! simulation, puncturable primitives, the copy-protected schemes and their
//! security games.

pub mod bits;
pub mod circuit;
pub mod copy_protect;
pub mod error;
pub mod fe;
pub mod games;
pub mod gf2;
pub(crate) mod hexser;
pub mod ibe;
pub mod obf;
pub mod pke;
pub mod prf;
pub mod rng;
pub mod statevec;
pub mod stream;

pub use error::{Error, Result};
