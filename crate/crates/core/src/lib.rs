//! Numerical toolkit for the renormalization analysis of catalytic
//! Wright-Fisher diffusions.

pub mod branching;
pub mod error;
pub mod hierarchical;
pub mod io;
pub mod loglaplace;
pub mod pde;
pub mod renorm;
pub mod rng;
pub mod stats;
pub mod verify;
pub mod wf;

pub use error::{Error, Result};
