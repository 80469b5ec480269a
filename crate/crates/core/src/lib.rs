//! Measurement-feedback control of spin chains: stochastic trajectory
//! simulation, exact averaged dynamics, and the classical absorbing-walk
//! description of their relaxation.

pub mod analysis;
pub mod error;
pub mod io;
pub mod lanczos;
pub mod linalg;
pub mod oracle;
pub mod protocols;
pub mod sector;
pub mod state;
pub mod trajectory;
pub mod walk;
pub mod words;

pub use error::{Error, Result};
