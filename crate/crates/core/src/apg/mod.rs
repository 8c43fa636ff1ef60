//! Joint AP selection and power control by a penalized, nonmonotone
//! accelerated projected gradient method.

mod extract;
mod penalty;
mod projection;
mod solver;

pub use extract::{extract_solution, Residuals, SolutionReport, QOS_SLACK};
pub use penalty::{penalty_gradient, penalty_value, Objective, PenaltyConfig, PenaltyParts};
pub use projection::{project, project_box_ball, project_orthant_ball, Projector};
pub use solver::{
    apg_solve, apg_solve_with, estimate_lipschitz, relaxed_residual, run_apg, ApgOutcome, ApgRun, IterRecord,
    MAX_BACKTRACKS,
};
