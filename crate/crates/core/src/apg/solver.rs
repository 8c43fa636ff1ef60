//! Nonmonotone accelerated projected gradient.

use super::penalty::{Objective, PenaltyConfig};
use super::projection::Projector;
use crate::closed_form::{CoeffTable, DecisionVars};
use crate::error::{Error, Result};
use crate::network::ValidConfig;

/// Halvings tried by the correction step before giving up.
pub const MAX_BACKTRACKS: usize = 20;
const WINDOW: usize = 10;

/// One iteration as seen by an observer.
#[derive(Debug, Clone)]
pub struct IterRecord<'a> {
    pub iter: usize,
    /// `ϑ^(o)` and `g(ϑ^(o))`.
    pub current: &'a [f64],
    pub g_current: f64,
    /// Extrapolated point `ϑ̄^(o)`.
    pub extrapolated: &'a [f64],
    /// Projected step from the extrapolated point, `ϑ̃^(o+1)`.
    pub tilde: &'a [f64],
    pub g_tilde: f64,
    /// Right-hand side of the acceptance test, `c - ν |ϑ̃ - ϑ̄|²`.
    pub envelope: f64,
    /// Correction candidate `ϑ̂^(o+1)`, present when the test failed.
    pub hat: Option<(&'a [f64], f64)>,
    /// Accepted `ϑ^(o+1)` and its value.
    pub next: &'a [f64],
    pub g_next: f64,
    pub b: f64,
    pub c: f64,
    pub b_next: f64,
    pub c_next: f64,
    pub nu: f64,
}

#[derive(Debug, Clone)]
pub struct ApgRun {
    pub best: Vec<f64>,
    pub best_g: f64,
    pub iters: usize,
    pub converged: bool,
    /// `g(ϑ^(o))` per iterate.
    pub g_history: Vec<f64>,
}

fn rel_change(now: f64, then: f64) -> f64 {
    (now - then).abs() / now.abs().max(1e-12)
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn step(x: &[f64], grad: &[f64], alpha: f64, proj: &Projector) -> Vec<f64> {
    let mut out: Vec<f64> = x.iter().zip(grad).map(|(a, g)| a - alpha * g).collect();
    proj.project_in_place(&mut out);
    out
}

/// Power iteration on finite-difference Hessian-vector products at `x`.
pub fn estimate_lipschitz(obj: &Objective<'_>, x: &[f64]) -> f64 {
    let n = x.len();
    let half = obj.lay.half();
    let active = |i: usize| !(obj.freeze_z && i >= half);
    let mut v: Vec<f64> = (0..n)
        .map(|i| {
            if active(i) {
                1.0 + 0.5 * ((i as f64) * 1.618).sin()
            } else {
                0.0
            }
        })
        .collect();
    let scale = (x.iter().map(|a| a * a).sum::<f64>() / n as f64).sqrt().max(1e-3);
    let h = 1e-6 * scale;
    let mut est = 0.0;
    for _ in 0..30 {
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        v.iter_mut().for_each(|a| *a /= norm);
        let plus: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + h * b).collect();
        let minus: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a - h * b).collect();
        let gp = obj.gradient(&plus);
        let gm = obj.gradient(&minus);
        let mut hv: Vec<f64> = gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        for (i, x) in hv.iter_mut().enumerate() {
            if !active(i) {
                *x = 0.0;
            }
        }
        est = hv.iter().map(|a| a * a).sum::<f64>().sqrt();
        v = hv;
    }
    est.max(1e-12)
}

/// Runs the accelerated loop from `init` at the penalty of `obj`.
pub fn run_apg(
    obj: &Objective<'_>,
    proj: &Projector,
    init: &[f64],
    observer: &mut dyn FnMut(&IterRecord<'_>),
) -> Result<ApgRun> {
    let viol = proj.violation(init);
    if viol > 1e-9 {
        return Err(Error::InfeasibleStart(viol));
    }
    let pen = &obj.pen;
    let lip = if pen.alpha_bar.is_none() || pen.alpha.is_none() {
        estimate_lipschitz(obj, init)
    } else {
        1.0
    };
    let mut alpha_bar = pen.alpha_bar.unwrap_or(1.0 / lip);
    let mut alpha = pen.alpha.unwrap_or(1.0 / lip);
    let nu = pen.nu;

    let mut prev = init.to_vec();
    let mut cur = init.to_vec();
    let mut tilde_prev = init.to_vec();
    let mut g_cur = obj.value(&cur);
    let mut f_hist = vec![obj.parts(&cur).f];
    let mut g_hist = vec![g_cur];
    let (mut q_prev, mut q) = (0.0f64, 1.0f64);
    let (mut b, mut c) = (1.0, g_cur);
    let (mut best, mut best_g) = (cur.clone(), g_cur);
    let mut converged = false;
    let mut iters = 0;

    while iters < pen.max_iters {
        iters += 1;
        let extrapolated: Vec<f64> = (0..cur.len())
            .map(|i| cur[i] + (q_prev / q) * (tilde_prev[i] - cur[i]) + ((q_prev - 1.0) / q) * (cur[i] - prev[i]))
            .collect();
        let grad_bar = obj.gradient(&extrapolated);
        let tilde = step(&extrapolated, &grad_bar, alpha_bar, proj);
        let g_tilde = obj.value(&tilde);
        let envelope = c - nu * dist_sq(&tilde, &extrapolated);

        let mut hat: Option<(Vec<f64>, f64)> = None;
        let (next, g_next) = if g_tilde <= envelope {
            (tilde.clone(), g_tilde)
        } else {
            let grad = obj.gradient(&cur);
            let mut a = alpha;
            let mut cand = step(&cur, &grad, a, proj);
            let mut g_cand = obj.value(&cand);
            let mut backtracked = false;
            for _ in 0..MAX_BACKTRACKS {
                if g_cand <= c - nu * dist_sq(&cand, &cur) {
                    break;
                }
                a *= 0.5;
                backtracked = true;
                cand = step(&cur, &grad, a, proj);
                g_cand = obj.value(&cand);
            }
            if backtracked {
                alpha = a;
                alpha_bar = a;
            }
            let pick = if g_tilde <= g_cand {
                (tilde.clone(), g_tilde)
            } else {
                (cand.clone(), g_cand)
            };
            hat = Some((cand, g_cand));
            pick
        };

        let q_next = (1.0 + (4.0 * q * q + 1.0).sqrt()) / 2.0;
        let b_next = nu * b + 1.0;
        let c_next = (nu * b * c + g_cur) / b_next;
        observer(&IterRecord {
            iter: iters,
            current: &cur,
            g_current: g_cur,
            extrapolated: &extrapolated,
            tilde: &tilde,
            g_tilde,
            envelope,
            hat: hat.as_ref().map(|(v, g)| (v.as_slice(), *g)),
            next: &next,
            g_next,
            b,
            c,
            b_next,
            c_next,
            nu,
        });

        prev = std::mem::replace(&mut cur, next);
        tilde_prev = tilde;
        g_cur = g_next;
        q_prev = q;
        q = q_next;
        b = b_next;
        c = c_next;
        if g_cur < best_g {
            best_g = g_cur;
            best.clone_from(&cur);
        }
        g_hist.push(g_cur);
        f_hist.push(obj.parts(&cur).f);
        let o = g_hist.len() - 1;
        if o >= WINDOW
            && rel_change(g_hist[o], g_hist[o - WINDOW]) <= pen.epsilon
            && rel_change(f_hist[o], f_hist[o - WINDOW]) <= pen.epsilon
        {
            converged = true;
            break;
        }
    }
    Ok(ApgRun {
        best,
        best_g,
        iters,
        converged,
        g_history: g_hist,
    })
}

/// Largest violation of the relaxed constraints at `v`: QoS shortfall,
/// non-binary z, coverage shortfall, masking excess, fronthaul excess.
pub fn relaxed_residual(obj: &Objective<'_>, cfg: &ValidConfig, v: &[f64]) -> f64 {
    let parts = obj.parts(v);
    let lay = obj.lay;
    let rho = obj.coeffs.rho;
    let mut worst = 0f64;
    for (i, s) in parts.se.iter().enumerate() {
        worst = worst.max(cfg.qos_of_user(i) - s);
    }
    for e in 0..lay.n_entities {
        let mut cov = 0.0;
        for n in 0..lay.n_aps {
            let z = v[lay.z(n, e)];
            let t = v[lay.theta(n, e)];
            worst = worst.max(z * z - z.powi(4));
            worst = worst.max(t * t - rho * z * z);
            cov += z * z;
        }
        worst = worst.max(1.0 - cov);
    }
    let cap = cfg.cfg().fronthaul_cap;
    if cap.is_finite() {
        let d = obj.coeffs.dims();
        for n in 0..lay.n_aps {
            let mut load = 0.0;
            for (i, s) in parts.se.iter().enumerate() {
                load += v[lay.z(n, d.entity_of_user(i))].powi(2) * s;
            }
            worst = worst.max(load - cap);
        }
    }
    worst.max(0.0)
}

#[derive(Debug, Clone)]
pub struct ApgOutcome {
    pub vars: DecisionVars,
    pub g: f64,
    pub iters: usize,
    pub converged: bool,
    /// Penalty multiplier used in the final round.
    pub x: f64,
    pub residual: f64,
}

/// Penalty rounds of [`run_apg`], doubling `X` (restarting from the best
/// point) while the relaxed constraints stay violated.
pub fn apg_solve_with(
    cfg: &ValidConfig,
    coeffs: &CoeffTable,
    pen: &PenaltyConfig,
    init: &DecisionVars,
    mask: Option<Vec<bool>>,
    observer: &mut dyn FnMut(&IterRecord<'_>),
) -> Result<ApgOutcome> {
    let mut proj = Projector::new(cfg, coeffs);
    let freeze = mask.is_some();
    proj.mask = mask;
    let mut start = init.to_flat();
    let mut pen = pen.clone();
    let mut total = 0;
    loop {
        let mut obj = Objective::new(cfg, coeffs, pen.clone());
        obj.freeze_z = freeze;
        let run = run_apg(&obj, &proj, &start, observer)?;
        total += run.iters;
        let residual = relaxed_residual(&obj, cfg, &run.best);
        let rounds_left = pen.max_doublings > 0;
        if residual <= pen.residual_tol || !rounds_left {
            return Ok(ApgOutcome {
                vars: DecisionVars::from_flat(proj.lay, &run.best, coeffs.precoder),
                g: run.best_g,
                iters: total,
                converged: run.converged,
                x: pen.x,
                residual,
            });
        }
        pen.x *= 2.0;
        pen.max_doublings -= 1;
        start = run.best;
    }
}

pub fn apg_solve(
    cfg: &ValidConfig,
    coeffs: &CoeffTable,
    pen: &PenaltyConfig,
    init: &DecisionVars,
) -> Result<ApgOutcome> {
    apg_solve_with(cfg, coeffs, pen, init, None, &mut |_| {})
}
