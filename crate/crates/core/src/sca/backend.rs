//! Smooth convex programs and the built-in solver for them.

use crate::error::{Error, Result};

/// `min F(y)` subject to `h_j(y) <= 0` and `y` in a set with a cheap
/// projection. `F` and every `h_j` must be convex and continuously
/// differentiable.
pub trait ConvexProgram {
    fn dim(&self) -> usize;
    fn n_constraints(&self) -> usize;
    /// `F(y)`; adds `∇F(y)` into `grad` when given.
    fn objective(&self, y: &[f64], grad: Option<&mut [f64]>) -> f64;
    /// Writes every `h_j(y)` into `h`.
    fn constraints(&self, y: &[f64], h: &mut [f64]);
    /// Adds `Σ_j weights[j] ∇h_j(y)` into `grad`.
    fn constraint_gradients(&self, y: &[f64], weights: &[f64], grad: &mut [f64]);
    fn project(&self, y: &mut [f64]);
}

#[derive(Debug, Clone)]
pub struct BackendSolution {
    pub y: Vec<f64>,
    pub objective: f64,
    pub max_violation: f64,
    pub outer_iters: usize,
}

pub trait ConvexBackend {
    /// Solves `prog` from `start`. `multipliers` carries constraint
    /// multipliers in and out, for warm starts.
    fn solve(&self, prog: &dyn ConvexProgram, start: &[f64], multipliers: &mut Vec<f64>) -> Result<BackendSolution>;
}

/// Augmented Lagrangian outer loop with accelerated projected gradient
/// (FISTA with backtracking and adaptive restart) on each subproblem.
#[derive(Debug, Clone)]
pub struct AugLagFista {
    pub max_outer: usize,
    pub max_inner: usize,
    /// Feasibility target on `max_j h_j`.
    pub feas_tol: f64,
    /// Inner stop on the projected-gradient step length.
    pub step_tol: f64,
    pub penalty0: f64,
    pub penalty_max: f64,
    /// Violation above which the program is declared infeasible.
    pub infeasible_tol: f64,
}

impl Default for AugLagFista {
    fn default() -> Self {
        AugLagFista {
            max_outer: 60,
            max_inner: 3000,
            feas_tol: 1e-7,
            step_tol: 1e-9,
            penalty0: 10.0,
            penalty_max: 1e9,
            infeasible_tol: 1e-6,
        }
    }
}

struct Lagrangian<'a> {
    prog: &'a dyn ConvexProgram,
    mu: &'a [f64],
    penalty: f64,
    h: Vec<f64>,
    w: Vec<f64>,
}

impl Lagrangian<'_> {
    fn value(&mut self, y: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let mut grad = grad;
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|x| *x = 0.0);
        }
        let mut value = self.prog.objective(y, grad.as_deref_mut());
        self.prog.constraints(y, &mut self.h);
        let r = self.penalty;
        for j in 0..self.h.len() {
            let s = (self.h[j] + self.mu[j] / r).max(0.0);
            value += 0.5 * r * s * s - self.mu[j] * self.mu[j] / (2.0 * r);
            self.w[j] = r * s;
        }
        if let Some(g) = grad {
            self.prog.constraint_gradients(y, &self.w, g);
        }
        value
    }
}

fn max_violation(prog: &dyn ConvexProgram, y: &[f64]) -> f64 {
    let mut h = vec![0.0; prog.n_constraints()];
    prog.constraints(y, &mut h);
    h.iter().copied().fold(0.0, f64::max)
}

impl AugLagFista {
    fn inner(&self, lag: &mut Lagrangian<'_>, y: &mut Vec<f64>, lip: &mut f64) {
        let n = y.len();
        let mut x_prev = y.clone();
        let mut ext = y.clone();
        let mut t = 1.0f64;
        let mut grad = vec![0.0; n];
        let mut f_prev = lag.value(y, None);
        for _ in 0..self.max_inner {
            let f_ext = lag.value(&ext, Some(&mut grad));
            let mut cand;
            let mut f_cand;
            loop {
                cand = ext.iter().zip(&grad).map(|(a, g)| a - g / *lip).collect::<Vec<f64>>();
                lag.prog.project(&mut cand);
                f_cand = lag.value(&cand, None);
                let mut model = f_ext;
                for i in 0..n {
                    let d = cand[i] - ext[i];
                    model += grad[i] * d + 0.5 * *lip * d * d;
                }
                if f_cand <= model + 1e-12 * f_ext.abs().max(1.0) || *lip > 1e30 {
                    break;
                }
                *lip *= 2.0;
            }
            let step: f64 = cand.iter().zip(&ext).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let scale = cand.iter().map(|a| a * a).sum::<f64>().sqrt().max(1.0);
            if f_cand > f_prev {
                // adaptive restart
                t = 1.0;
                ext.clone_from(&x_prev);
                f_prev = lag.value(&x_prev, None);
                *lip *= 0.9;
                continue;
            }
            let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            let beta = (t - 1.0) / t_next;
            for i in 0..n {
                ext[i] = cand[i] + beta * (cand[i] - x_prev[i]);
            }
            x_prev.clone_from(&cand);
            f_prev = f_cand;
            t = t_next;
            *lip *= 0.95;
            if step <= self.step_tol * scale {
                break;
            }
        }
        y.clone_from(&x_prev);
    }
}

impl ConvexBackend for AugLagFista {
    fn solve(&self, prog: &dyn ConvexProgram, start: &[f64], multipliers: &mut Vec<f64>) -> Result<BackendSolution> {
        let m = prog.n_constraints();
        multipliers.resize(m, 0.0);
        let mut y = start.to_vec();
        prog.project(&mut y);
        let mut penalty = self.penalty0;
        let mut lip = 1.0;
        let mut last_viol = f64::INFINITY;
        let mut outer = 0;
        let mut h = vec![0.0; m];
        while outer < self.max_outer {
            outer += 1;
            let mut lag = Lagrangian {
                prog,
                mu: multipliers,
                penalty,
                h: vec![0.0; m],
                w: vec![0.0; m],
            };
            let y_before = y.clone();
            self.inner(&mut lag, &mut y, &mut lip);
            prog.constraints(&y, &mut h);
            let viol = h.iter().copied().fold(0.0, f64::max);
            for j in 0..m {
                multipliers[j] = (multipliers[j] + penalty * h[j]).max(0.0);
            }
            let moved: f64 = y
                .iter()
                .zip(&y_before)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            let scale = y.iter().map(|a| a * a).sum::<f64>().sqrt().max(1.0);
            let complementary = (0..m).all(|j| (multipliers[j] * h[j]).abs() <= 1e-8);
            if viol <= self.feas_tol && (moved <= 1e-7 * scale || complementary) {
                break;
            }
            if viol > 0.25 * last_viol && penalty < self.penalty_max {
                penalty *= 5.0;
            }
            last_viol = viol;
        }
        let viol = max_violation(prog, &y);
        if viol > self.infeasible_tol {
            return Err(Error::SubproblemInfeasible(viol));
        }
        let objective = prog.objective(&y, None);
        Ok(BackendSolution {
            y,
            objective,
            max_violation: viol,
            outer_iters: outer,
        })
    }
}
