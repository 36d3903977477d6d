//! Manufactured-solution verification and the convergence study.

mod exact;
mod mms;

pub use exact::{ExactSolution, SPECIES_NAMES, VALENCES};
pub use mms::{
    convergence_study, error_names, exact_state, level_parameters, measure_errors, mms_discretization, mms_problem,
    rate, run_mms_case, ConvergenceReport, MmsErrors, MmsSources, BASE_TIME_STEP, MMS_STEPS,
};
