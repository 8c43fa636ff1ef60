//! Rounding of relaxed solutions and constraint bookkeeping.

use nalgebra::DMatrix;

use super::projection::project_orthant_ball;
use crate::channel::EstimationStats;
use crate::closed_form::{se_and_sse, AssociationPower, CoeffTable, DecisionVars};
use crate::network::ValidConfig;
use crate::system::Precoder;

/// Shortfall above which a solution is flagged as missing its QoS.
pub const QOS_SLACK: f64 = 1e-6;

/// Residuals of the original constraints: QoS, nonnegative power, per-AP
/// power budget, fronthaul, coverage, association cap.
pub type Residuals = [f64; 6];

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionReport {
    pub precoder: Precoder,
    /// Binary association, `N x (U + M)`.
    pub a: DMatrix<bool>,
    pub theta: DMatrix<f64>,
    /// Per receiving user, layout order.
    pub se: Vec<f64>,
    pub sse: f64,
    pub residuals: Residuals,
    pub qos_infeasible: bool,
    /// Associations added or removed by the repair pass.
    pub repairs: usize,
}

impl SolutionReport {
    /// Evaluates a binary association with its powers. `theta` must already
    /// be zero where `a` is false.
    pub fn evaluate(a: DMatrix<bool>, theta: DMatrix<f64>, cfg: &ValidConfig, coeffs: &CoeffTable) -> Self {
        let d = coeffs.dims();
        let vars = DecisionVars {
            precoder: coeffs.precoder,
            z: a.map(|b| if b { 1.0 } else { 0.0 }),
            theta,
        };
        let summary = se_and_sse(&vars, coeffs, cfg);
        let (n_aps, ne) = vars.theta.shape();
        let mut r = [0f64; 6];
        for (i, s) in summary.se.iter().enumerate() {
            r[0] = r[0].max(cfg.qos_of_user(i) - s);
        }
        let cap = cfg.cfg().fronthaul_cap;
        let k_max = cfg.cfg().assoc_cap as f64;
        for n in 0..n_aps {
            let row = vars.theta.row(n);
            r[1] = r[1].max(row.iter().map(|t| -t).fold(0.0, f64::max));
            r[2] = r[2].max(row.norm_squared() - coeffs.rho);
            if cap.is_finite() {
                let load: f64 = (0..d.n_users())
                    .filter(|&i| a[(n, d.entity_of_user(i))])
                    .map(|i| summary.se[i])
                    .sum();
                r[3] = r[3].max(load - cap);
            }
            let count = (0..ne).filter(|&e| a[(n, e)]).count() as f64;
            r[5] = r[5].max(count - k_max);
        }
        for e in 0..ne {
            let count = (0..n_aps).filter(|&n| a[(n, e)]).count() as f64;
            r[4] = r[4].max(1.0 - count);
        }
        for x in r.iter_mut() {
            *x = x.max(0.0);
        }
        SolutionReport {
            precoder: coeffs.precoder,
            a,
            theta: vars.theta,
            se: summary.se,
            sse: summary.sse,
            qos_infeasible: r[0] > QOS_SLACK,
            residuals: r,
            repairs: 0,
        }
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_user_se(&self) -> f64 {
        self.se.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Association and power coefficients behind this solution.
    pub fn power(&self, stats: &EstimationStats) -> AssociationPower {
        let vars = DecisionVars {
            precoder: self.precoder,
            theta: self.theta.clone(),
            z: self.a.map(|b| if b { 1.0 } else { 0.0 }),
        };
        vars.to_power(stats)
    }

    /// The association matrix as text: one line per AP, one 0/1 column per
    /// serving entity (unicast users first, then groups).
    pub fn association_text(&self) -> String {
        let mut out = String::new();
        for n in 0..self.a.nrows() {
            let row: Vec<&str> = (0..self.a.ncols())
                .map(|e| if self.a[(n, e)] { "1" } else { "0" })
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Rounds `z` at 0.5, repairs coverage and the per-AP cap, and reports
/// the resulting SEs and constraint residuals.
pub fn extract_solution(vars: &DecisionVars, cfg: &ValidConfig, coeffs: &CoeffTable) -> SolutionReport {
    let (n_aps, ne) = vars.theta.shape();
    let mut a = vars.z.map(|z| z >= 0.5);
    let mut repairs = 0;
    let argmax = |list: &mut dyn Iterator<Item = usize>, key: &dyn Fn(usize) -> f64| {
        list.fold(None, |best: Option<usize>, x| match best {
            Some(b) if key(b) >= key(x) => Some(b),
            _ => Some(x),
        })
    };
    for e in 0..ne {
        if (0..n_aps).all(|n| !a[(n, e)]) {
            if let Some(n) = argmax(&mut (0..n_aps), &|n| vars.theta[(n, e)]) {
                a[(n, e)] = true;
                repairs += 1;
            }
        }
    }
    let k_max = cfg.cfg().assoc_cap;
    for n in 0..n_aps {
        let mut served: Vec<usize> = (0..ne).filter(|&e| a[(n, e)]).collect();
        if served.len() > k_max {
            // stable sort keeps lower entity indices first on ties
            served.sort_by(|&x, &y| vars.theta[(n, y)].total_cmp(&vars.theta[(n, x)]));
            for &e in &served[k_max..] {
                a[(n, e)] = false;
                repairs += 1;
            }
        }
    }
    let mut theta = DMatrix::from_fn(n_aps, ne, |n, e| if a[(n, e)] { vars.theta[(n, e)] } else { 0.0 });
    for n in 0..n_aps {
        let mut row: Vec<f64> = theta.row(n).iter().copied().collect();
        project_orthant_ball(&mut row, coeffs.rho);
        for (e, t) in row.into_iter().enumerate() {
            theta[(n, e)] = t;
        }
    }
    let mut report = SolutionReport::evaluate(a, theta, cfg, coeffs);
    report.repairs = repairs;
    report
}
