//! Coupled time stepping of concentrations, potentials and membrane
//! current, for the electrodiffusive and the volume-conductor model.

mod problem;
mod simulator;
mod state;

pub use problem::{BoundaryCondition, Discretization, Framework, Grounding, Problem};
pub use simulator::{Simulator, SourceTerms, StepReport};
pub use state::SystemState;
