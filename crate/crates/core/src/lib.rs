//! Finite-element simulation of ionic electrodiffusion (KNP-EMI) in
//! geometrically explicit cells.

pub mod error;
pub mod fespace;
pub mod geometry;
pub mod knp;
pub mod membrane;
pub mod output;
pub mod scenario;
pub mod verify;

pub use error::{Error, ErrorCategory, Result};
