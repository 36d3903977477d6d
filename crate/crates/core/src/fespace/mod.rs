//! Lagrange finite-element spaces, block assembly and the sparse direct
//! solve.

pub mod assembly;
pub mod element;
pub mod multifrontal;
pub mod norms;
pub mod quadrature;
pub mod solve;
pub mod space;
pub mod system;

pub use assembly::{
    assemble_diffusion, assemble_drift, assemble_grad_load, assemble_interface_terms, assemble_jump,
    assemble_load, assemble_mass, assemble_multiplier_row, assemble_weighted_stiffness, combine_blocks, map_interface_block, Coefficient,
    CooBlock,
};
pub use norms::{broken_l2_error, h1_error, integral, l2_error, l2_norm};
pub use solve::{LinearSolver, SolverStats};
pub use space::{Field, FunctionSpace, Side, TraceMap};
pub use system::{BlockLayout, BlockSystem};
