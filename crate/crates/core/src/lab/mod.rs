//! Diagnostics built on the simulator: exit-time sequences of the centre of
//! mass, the stopping-time chain and its range and volume checks, variance
//! series checks, the clearing lower bound, and power-law exponent fits.

mod chain;
mod clearing;
mod fit;
mod report;
mod smoothing;
mod tau;

pub use chain::{
    calibrate_lambda, chain_constants, confinement_frequency, stopping_chain, ChainConstants, ChainInterval,
    ConfinementReport, StoppingChain, C0_STANDARD,
};
pub use clearing::{clearing_bound, clearing_probability, ClearingBound};
pub use fit::{exponent_fit, neg_log_survival, ExponentFit};
pub use smoothing::{circle_distance, gspace_ratio, range_smoothing_check, GspaceReport, SmoothingReport, GSPACE_MAX_SPREAD};
pub use tau::{count_lower_bound, count_lower_bound_constant, tau_sequence, TauReport};
pub use report::{
    center_of_mass_test, chain_runs, independence_run, run_diagnostics, smoothing_sweep, stationary_box_count,
    BrownianReport, ChainSummary, DiagnosticsOptions, DiagnosticsReport,
};
