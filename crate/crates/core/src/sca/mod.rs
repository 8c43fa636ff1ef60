//! Successive convex approximation benchmark for the joint problem.

mod backend;
mod surrogates;

pub use backend::{AugLagFista, BackendSolution, ConvexBackend, ConvexProgram};
pub use surrogates::{
    binary_surrogate, fronthaul_surrogate, sca_surrogates, se_lower_bound, se_upper_bound, ScaPoint, Subproblem,
};

use nalgebra::DMatrix;

use crate::apg::{extract_solution, SolutionReport};
use crate::closed_form::{CoeffTable, DecisionVars};
use crate::error::Result;
use crate::network::ValidConfig;
use surrogates::Model;

#[derive(Debug, Clone)]
pub struct ScaOptions {
    /// Initial weight of the binariness penalty.
    pub lambda: f64,
    pub max_iters: usize,
    /// Stop on relative change of the penalized objective.
    pub tol: f64,
    /// Doublings of `lambda` allowed while `Σ (a - a²)` exceeds
    /// `binary_tol`.
    pub max_lambda_doublings: usize,
    pub binary_tol: f64,
    /// Slack on the per-step monotonicity check.
    pub monotone_tol: f64,
    /// Cost per bit/s/Hz of QoS shortfall, used while the iterate misses
    /// some target.
    pub qos_penalty: f64,
}

impl Default for ScaOptions {
    fn default() -> Self {
        ScaOptions {
            lambda: 10.0,
            max_iters: 100,
            tol: 1e-4,
            max_lambda_doublings: 5,
            binary_tol: 1e-3,
            monotone_tol: 1e-8,
            qos_penalty: 100.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScaOutcome {
    pub report: SolutionReport,
    /// Relaxed solution before rounding (`z = √a`).
    pub relaxed: DecisionVars,
    pub iters: usize,
    /// Penalized objective `-SSE + λ Σ (a - a²) + κ Σ max(0, q - SE)` after
    /// each accepted step.
    pub objective_history: Vec<f64>,
    pub lambda: f64,
    /// A step was rejected for increasing the objective.
    pub stalled: bool,
    /// Leading steps taken while the iterate exceeded the fronthaul cap.
    /// The objective may rise during these.
    pub restoration_steps: usize,
}

/// Worst per-AP fronthaul excess `Σ_e a_ne SE_e - C`.
fn fronthaul_excess(model: &Model<'_>, cfg: &ValidConfig, theta: &[f64], a: &[f64]) -> f64 {
    let cap = cfg.cfg().fronthaul_cap;
    if !cap.is_finite() {
        return f64::NEG_INFINITY;
    }
    let ne = model.n_entities;
    let mut load = vec![0.0; ne];
    for (i, s) in model.se(theta).iter().enumerate() {
        load[model.entity[i]] += s;
    }
    (0..model.n_aps)
        .map(|n| (0..ne).map(|e| a[n * ne + e] * load[e]).sum::<f64>() - cap)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn penalized(model: &Model<'_>, cfg: &ValidConfig, theta: &[f64], a: &[f64], lambda: f64, kappa: f64) -> f64 {
    let se = model.se(theta);
    let sse: f64 = se.iter().enumerate().map(|(i, s)| cfg.weight_of_user(i) * s).sum();
    let short: f64 = se
        .iter()
        .enumerate()
        .map(|(i, s)| (cfg.qos_of_user(i) - s).max(0.0))
        .sum();
    -sse + lambda * a.iter().map(|a| a - a * a).sum::<f64>() + kappa * short
}

fn to_matrix(v: &[f64], rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |n, e| v[n * cols + e])
}

fn tight_point(model: &Model<'_>, theta: &[f64], a: &[f64], lambda: f64, qos_penalty: f64) -> ScaPoint {
    let (_, v) = model.signal(theta);
    ScaPoint {
        theta: to_matrix(theta, model.n_aps, model.n_entities),
        a: to_matrix(a, model.n_aps, model.n_entities),
        w: v,
        t_hat: model.se(theta),
        lambda,
        qos_penalty,
    }
}

/// Runs SCA from `init` (its `z²` is the relaxed association) with the
/// given convex backend, then rounds like the APG solver.
pub fn sca_solve_with(
    cfg: &ValidConfig,
    coeffs: &CoeffTable,
    init: &DecisionVars,
    opts: &ScaOptions,
    backend: &dyn ConvexBackend,
) -> Result<ScaOutcome> {
    let model = Model::new(cfg, coeffs);
    let (rows, cols) = (model.n_aps, model.n_entities);
    let mut theta: Vec<f64> = init.to_flat()[..rows * cols].to_vec();
    let mut a: Vec<f64> = (0..rows * cols).map(|j| init.z[(j / cols, j % cols)].powi(2)).collect();
    let mut lambda = opts.lambda;
    let mut doublings = 0;
    let mut phi = penalized(&model, cfg, &theta, &a, lambda, opts.qos_penalty);
    let mut history = vec![phi];
    let mut iters = 0;
    let mut stalled = false;
    let mut restoration_steps = 0;
    let cap_tol = 1e-6 * cfg.cfg().fronthaul_cap.max(1.0);
    while iters < opts.max_iters {
        iters += 1;
        let point = tight_point(&model, &theta, &a, lambda, opts.qos_penalty);
        let sub = sca_surrogates(&point, coeffs, cfg);
        // multipliers from earlier points mislead the solver, so each
        // subproblem starts from zero
        let sol = backend.solve(&sub, sub.start(), &mut Vec::new())?;
        let (t_new, a_new, _) = sub.unpack(&sol.y);
        let phi_new = penalized(&model, cfg, &t_new, &a_new, lambda, opts.qos_penalty);
        let restoring = fronthaul_excess(&model, cfg, &theta, &a) > cap_tol;
        if restoring {
            restoration_steps += 1;
        } else if phi_new > phi + opts.monotone_tol * phi.abs().max(1.0) {
            stalled = true;
            break;
        }
        let rel = (phi_new - phi).abs() / phi.abs().max(1e-12);
        theta = t_new;
        a = a_new;
        phi = phi_new;
        history.push(phi);
        if rel <= opts.tol {
            let binary: f64 = a.iter().map(|a| a - a * a).sum();
            if binary > opts.binary_tol && doublings < opts.max_lambda_doublings {
                lambda *= 2.0;
                doublings += 1;
                phi = penalized(&model, cfg, &theta, &a, lambda, opts.qos_penalty);
                continue;
            }
            break;
        }
    }
    let relaxed = DecisionVars {
        precoder: coeffs.precoder,
        theta: to_matrix(&theta, rows, cols),
        z: to_matrix(&a, rows, cols).map(|a| a.max(0.0).sqrt()),
    };
    let report = extract_solution(&relaxed, cfg, coeffs);
    Ok(ScaOutcome {
        report,
        relaxed,
        iters,
        objective_history: history,
        lambda,
        stalled,
        restoration_steps,
    })
}

pub fn sca_solve(cfg: &ValidConfig, coeffs: &CoeffTable, init: &DecisionVars, opts: &ScaOptions) -> Result<ScaOutcome> {
    sca_solve_with(cfg, coeffs, init, opts, &AugLagFista::default())
}
