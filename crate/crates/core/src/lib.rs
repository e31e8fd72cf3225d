//! Complexity reduction for parameter-dependent linear systems.
//!
//! A system whose state-space matrices are polynomial in a parameter vector
//! `alpha` (ranging over a compact semi-algebraic set) is approximated by one
//! with fewer parameters and/or states. The worst-case H-infinity error is
//! bounded through sum-of-squares relaxations of bounded-real-lemma
//! conditions, solved by alternating between the storage function and the
//! reduced model.

pub mod catalog;
pub mod error;
pub mod gramian;
pub mod io;
pub mod polymat;
pub mod psys;
pub mod reduce;
pub mod sdp;
pub mod sos;

pub use error::{Error, Result};
