//! Configuration, initial data, ε-sweeps, rate fitting, checks and reports.

pub mod check;
pub mod config;
pub mod fit;
pub mod initial;
pub mod report;
pub mod runs;
pub mod sweep;

pub use check::{check_suite, CheckLine, CheckReport};
pub use config::{ExperimentConfig, ModelVariant, MomentumPrep};
pub use fit::{slope_fit, SlopeFit};
pub use initial::{make_initial, InitialData};
pub use report::{report, Consolidated};
pub use runs::{identity, simulate, IdentitySummary, SimulateSummary};
pub use sweep::{refine_inequality, run_coupled, run_coupled_steps, RefinedInequality, RefinedRow, run_point, sweep_eps, sweep_runs, write_sweep, CoupledOptions, CoupledRun, PointOutcome, PointRun, SweepPoint, SweepReport};
