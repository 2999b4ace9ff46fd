//! Contour-dynamics solver for the two-dimensional Muskat interface
//! equation in the stable regime, on the half-plane above an impermeable
//! bottom and on the whole plane, together with numerical checks of its
//! maximum principles, dissipation laws and variational lemmas.

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod evolution;
pub mod interface;
pub mod kernels;
pub mod par;
pub mod quadrature;
pub mod scenarios;
pub mod variational;
pub mod verify;

pub use error::{Error, Result};
