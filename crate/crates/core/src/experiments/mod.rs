//! Baselines, experiment drivers and result files.

mod baselines;
mod case_study;
mod certify;
mod instance;
mod runner;

pub use baselines::{baseline_epa_ras, baseline_opa_ras, equal_power, opa_on, random_association, RAS_TRIES};
pub use case_study::{case_study_config, run_case_study, CaseStudy};
pub use certify::certify_closed_form;
pub use instance::Instance;
pub use runner::{
    empirical_cdf, run_experiment, run_one, run_solver, sibling_path, summarize, summarize_runs, write_cdf,
    write_experiment, write_results, write_summary, CdfKnot, ExperimentSpec, RunOptions, RunRecord, Solver, SummaryRow,
    SweepVar, RESULT_HEADER,
};
