//! Convex surrogates of the joint problem around an expansion point.
//!
//! With `x = √p Σ_n θ[n, e_i] Λ[n, i]` and `y = V_i(θ)` the interference
//! plus noise, a user's SE is `c ln(1 + x² / y)`, `c = prelog / ln 2`.

use nalgebra::DMatrix;

use super::backend::ConvexProgram;
use crate::apg::project_orthant_ball;
use crate::closed_form::CoeffTable;
use crate::network::ValidConfig;

/// Concave lower bound of `c ln(1 + x²/y)`, tight at `(x0, y0)`.
pub fn se_lower_bound(x: f64, y: f64, x0: f64, y0: f64, c: f64) -> f64 {
    let r = x0 * x0 / y0;
    c * (r.ln_1p() - r + 2.0 * x0 * x / y0 - x0 * x0 * (x * x + y) / (y0 * (x0 * x0 + y0)))
}

/// Convex upper bound of `c ln(1 + x²/w)` (hence of the SE whenever
/// `w <= y`), tight at `(x0, w0)`.
pub fn se_upper_bound(x: f64, w: f64, x0: f64, w0: f64, c: f64) -> f64 {
    let s0 = x0 * x0 + w0;
    c * (s0.ln() + (x * x + w) / s0 - 1.0 - w.ln())
}

/// Linear upper bound of `a - a²`, tight at `a0`.
pub fn binary_surrogate(a: f64, a0: f64) -> f64 {
    a - 2.0 * a * a0 + a0 * a0
}

/// Convex upper bound of `a t`, tight at `(a0, t0)`.
pub fn fronthaul_surrogate(a: f64, t: f64, a0: f64, t0: f64) -> f64 {
    let d0 = a0 - t0;
    0.25 * ((a + t).powi(2) - 2.0 * d0 * (a - t) + d0 * d0)
}

/// Expansion point of one SCA step. `a` is the relaxed association and
/// `w` lower-bounds each user's interference plus noise.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaPoint {
    pub theta: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub w: Vec<f64>,
    /// Upper bounds on each user's SE carried over the fronthaul.
    pub t_hat: Vec<f64>,
    pub lambda: f64,
    /// Cost per unit of QoS shortfall while the expansion point misses QoS.
    pub qos_penalty: f64,
}

/// Shared signal model for the surrogates.
#[derive(Debug, Clone)]
pub(crate) struct Model<'a> {
    pub coeffs: &'a CoeffTable,
    pub p: f64,
    pub sqrt_p: f64,
    pub c: f64,
    pub entity: Vec<usize>,
    pub n_aps: usize,
    pub n_entities: usize,
}

impl<'a> Model<'a> {
    pub fn new(cfg: &ValidConfig, coeffs: &'a CoeffTable) -> Self {
        let d = coeffs.dims();
        Model {
            coeffs,
            p: cfg.p_dl_norm(),
            sqrt_p: cfg.p_dl_norm().sqrt(),
            c: coeffs.prelog / std::f64::consts::LN_2,
            entity: (0..d.n_users()).map(|i| d.entity_of_user(i)).collect(),
            n_aps: d.n_aps,
            n_entities: d.n_entities(),
        }
    }

    fn th(&self, theta: &[f64], n: usize, e: usize) -> f64 {
        theta[n * self.n_entities + e]
    }

    /// `(x_i, V_i)` for every user at flat θ.
    pub fn signal(&self, theta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let power: Vec<f64> = (0..self.n_aps)
            .map(|n| (0..self.n_entities).map(|e| self.th(theta, n, e).powi(2)).sum())
            .collect();
        let users = self.entity.len();
        let mut x = vec![0.0; users];
        let mut v = vec![0.0; users];
        for i in 0..users {
            let e = self.entity[i];
            let (mut a, mut inter) = (0.0, 0.0);
            for n in 0..self.n_aps {
                a += self.th(theta, n, e) * self.coeffs.lambda[(n, i)];
                inter += self.coeffs.theta[(n, i)] * power[n];
            }
            x[i] = self.sqrt_p * a;
            v[i] = self.p * inter + 1.0;
        }
        (x, v)
    }

    /// Adds `Σ_i dx[i] ∇x_i + dv[i] ∇V_i` into the θ part of `grad`.
    pub fn theta_grad(&self, theta: &[f64], dx: &[f64], dv: &[f64], grad: &mut [f64]) {
        for n in 0..self.n_aps {
            let mut kappa = 0.0;
            for i in 0..self.entity.len() {
                kappa += dv[i] * self.coeffs.theta[(n, i)];
            }
            for e in 0..self.n_entities {
                grad[n * self.n_entities + e] += 2.0 * self.p * self.th(theta, n, e) * kappa;
            }
            for (i, &e) in self.entity.iter().enumerate() {
                grad[n * self.n_entities + e] += dx[i] * self.sqrt_p * self.coeffs.lambda[(n, i)];
            }
        }
    }

    pub fn se(&self, theta: &[f64]) -> Vec<f64> {
        let (x, v) = self.signal(theta);
        x.iter().zip(&v).map(|(x, v)| self.c * (x * x / v).ln_1p()).collect()
    }
}

/// Convex subproblem at one expansion point. Variables are stacked as
/// θ (AP-major), a (AP-major), then, with a finite fronthaul cap, the
/// scaled slack `w_i / V_i(θ0)` and `t̂_i` per user. When the expansion
/// point misses some QoS target, a nonnegative shortfall per user follows
/// and is charged linearly.
#[derive(Debug, Clone)]
pub struct Subproblem<'a> {
    pub(crate) model: Model<'a>,
    theta0: Vec<f64>,
    a0: Vec<f64>,
    x0: Vec<f64>,
    v0: Vec<f64>,
    /// Per-entity sum of `t̂` at the expansion point.
    load0: Vec<f64>,
    weight: Vec<f64>,
    qos: Vec<f64>,
    lambda: f64,
    rho: f64,
    k_max: f64,
    cap: f64,
    fronthaul: bool,
    elastic: bool,
    qos_penalty: f64,
    start: Vec<f64>,
}

pub fn sca_surrogates<'a>(point: &ScaPoint, coeffs: &'a CoeffTable, cfg: &ValidConfig) -> Subproblem<'a> {
    let model = Model::new(cfg, coeffs);
    let (n_aps, ne) = (model.n_aps, model.n_entities);
    let flat = |m: &DMatrix<f64>| -> Vec<f64> {
        let mut v = Vec::with_capacity(n_aps * ne);
        for n in 0..n_aps {
            for e in 0..ne {
                v.push(m[(n, e)]);
            }
        }
        v
    };
    let theta0 = flat(&point.theta);
    let a0 = flat(&point.a);
    let (x0, v0) = model.signal(&theta0);
    let users = model.entity.len();
    let cap = cfg.cfg().fronthaul_cap;
    let fronthaul = cap.is_finite();
    let mut load0 = vec![0.0; ne];
    for i in 0..users {
        load0[model.entity[i]] += point.t_hat[i];
    }
    let mut start = theta0.clone();
    start.extend_from_slice(&a0);
    if fronthaul {
        start.extend(point.w.iter().zip(&v0).map(|(w, v)| w / v));
        start.extend_from_slice(&point.t_hat);
    }
    let shortfall: Vec<f64> = (0..users)
        .map(|i| (cfg.qos_of_user(i) - se_lower_bound(x0[i], v0[i], x0[i], v0[i], model.c)).max(0.0))
        .collect();
    let elastic = shortfall.iter().any(|&s| s > 0.0);
    if elastic {
        start.extend_from_slice(&shortfall);
    }
    Subproblem {
        weight: (0..users).map(|i| cfg.weight_of_user(i)).collect(),
        qos: (0..users).map(|i| cfg.qos_of_user(i)).collect(),
        theta0,
        a0,
        x0,
        v0,
        load0,
        lambda: point.lambda,
        rho: coeffs.rho,
        k_max: cfg.cfg().assoc_cap as f64,
        cap,
        fronthaul,
        elastic,
        qos_penalty: point.qos_penalty,
        start,
        model,
    }
}

impl Subproblem<'_> {
    fn half(&self) -> usize {
        self.model.n_aps * self.model.n_entities
    }

    fn users(&self) -> usize {
        self.model.entity.len()
    }

    /// The expansion point in this program's variables.
    pub fn start(&self) -> &[f64] {
        &self.start
    }

    pub fn has_fronthaul(&self) -> bool {
        self.fronthaul
    }

    pub fn is_elastic(&self) -> bool {
        self.elastic
    }

    fn shortfall_offset(&self) -> usize {
        2 * self.half() + if self.fronthaul { 2 * self.users() } else { 0 }
    }

    /// QoS shortfall variables of a solution, empty unless elastic.
    pub fn shortfall<'y>(&self, y: &'y [f64]) -> &'y [f64] {
        if self.elastic {
            &y[self.shortfall_offset()..]
        } else {
            &[]
        }
    }

    /// Lower bounds on every user's SE at flat θ.
    pub fn se_lower(&self, theta: &[f64]) -> Vec<f64> {
        let (x, v) = self.model.signal(theta);
        (0..self.users())
            .map(|i| se_lower_bound(x[i], v[i], self.x0[i], self.v0[i], self.model.c))
            .collect()
    }

    /// Splits a solution into θ, a, w (unscaled) and t̂.
    pub fn unpack(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>, Option<(Vec<f64>, Vec<f64>)>) {
        let h = self.half();
        let theta = y[..h].to_vec();
        let a = y[h..2 * h].to_vec();
        let extra = self.fronthaul.then(|| {
            let g = self.users();
            let w = (0..g).map(|i| y[2 * h + i] * self.v0[i]).collect();
            (w, y[2 * h + g..2 * h + 2 * g].to_vec())
        });
        (theta, a, extra)
    }

    // per-user coefficients of the lower bound: const + k1 x - k2 (x² + y)
    fn lower_coeffs(&self, i: usize) -> (f64, f64) {
        let (x0, y0) = (self.x0[i], self.v0[i]);
        (2.0 * x0 / y0, x0 * x0 / (y0 * (x0 * x0 + y0)))
    }
}

impl ConvexProgram for Subproblem<'_> {
    fn dim(&self) -> usize {
        self.shortfall_offset() + if self.elastic { self.users() } else { 0 }
    }

    fn n_constraints(&self) -> usize {
        let (n, ne, g) = (self.model.n_aps, self.model.n_entities, self.users());
        g + n * ne + ne + n + if self.fronthaul { n + 2 * g } else { 0 }
    }

    fn objective(&self, y: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let h = self.half();
        let theta = &y[..h];
        let (x, v) = self.model.signal(theta);
        let c = self.model.c;
        let mut value = 0.0;
        let g = self.users();
        let mut dx = vec![0.0; g];
        let mut dv = vec![0.0; g];
        for i in 0..g {
            value -= self.weight[i] * se_lower_bound(x[i], v[i], self.x0[i], self.v0[i], c);
            let (k1, k2) = self.lower_coeffs(i);
            dx[i] = -self.weight[i] * c * (k1 - 2.0 * k2 * x[i]);
            dv[i] = self.weight[i] * c * k2;
        }
        for j in 0..h {
            value += self.lambda * binary_surrogate(y[h + j], self.a0[j]);
        }
        let s = self.shortfall(y);
        value += self.qos_penalty * s.iter().sum::<f64>();
        if let Some(grad) = grad {
            self.model.theta_grad(theta, &dx, &dv, grad);
            for j in 0..h {
                grad[h + j] += self.lambda * (1.0 - 2.0 * self.a0[j]);
            }
            let s0 = self.shortfall_offset();
            for i in 0..s.len() {
                grad[s0 + i] += self.qos_penalty;
            }
        }
        value
    }

    fn constraints(&self, y: &[f64], out: &mut [f64]) {
        let h = self.half();
        let (n_aps, ne, g) = (self.model.n_aps, self.model.n_entities, self.users());
        let theta = &y[..h];
        let a = &y[h..2 * h];
        let (x, v) = self.model.signal(theta);
        let c = self.model.c;
        let s = self.shortfall(y);
        let mut k = 0;
        for i in 0..g {
            out[k] = self.qos[i] - se_lower_bound(x[i], v[i], self.x0[i], self.v0[i], c) - s.get(i).unwrap_or(&0.0);
            k += 1;
        }
        for j in 0..h {
            out[k] = theta[j] * theta[j] / self.rho - a[j];
            k += 1;
        }
        for e in 0..ne {
            out[k] = 1.0 - (0..n_aps).map(|n| a[n * ne + e]).sum::<f64>();
            k += 1;
        }
        for n in 0..n_aps {
            out[k] = a[n * ne..(n + 1) * ne].iter().sum::<f64>() - self.k_max;
            k += 1;
        }
        if !self.fronthaul {
            return;
        }
        let omega = &y[2 * h..2 * h + g];
        let t_hat = &y[2 * h + g..2 * h + 2 * g];
        let mut load = vec![0.0; ne];
        for i in 0..g {
            load[self.model.entity[i]] += t_hat[i];
        }
        for n in 0..n_aps {
            let mut s = 0.0;
            for e in 0..ne {
                s += fronthaul_surrogate(a[n * ne + e], load[e], self.a0[n * ne + e], self.load0[e]);
            }
            out[k] = s - self.cap;
            k += 1;
        }
        for i in 0..g {
            let w = omega[i] * self.v0[i];
            out[k] = se_upper_bound(x[i], w, self.x0[i], self.v0[i], c) - t_hat[i];
            k += 1;
        }
        for i in 0..g {
            out[k] = omega[i] - self.v_lin(theta, i) / self.v0[i];
            k += 1;
        }
    }

    fn constraint_gradients(&self, y: &[f64], wts: &[f64], grad: &mut [f64]) {
        let h = self.half();
        let (n_aps, ne, g) = (self.model.n_aps, self.model.n_entities, self.users());
        let theta = &y[..h];
        let a = &y[h..2 * h];
        let (x, _) = self.model.signal(theta);
        let c = self.model.c;
        let mut dx = vec![0.0; g];
        let mut dv = vec![0.0; g];
        let mut k = 0;
        let s0 = self.shortfall_offset();
        for i in 0..g {
            let (k1, k2) = self.lower_coeffs(i);
            dx[i] -= wts[k] * c * (k1 - 2.0 * k2 * x[i]);
            dv[i] += wts[k] * c * k2;
            if self.elastic {
                grad[s0 + i] -= wts[k];
            }
            k += 1;
        }
        for j in 0..h {
            grad[j] += wts[k] * 2.0 * theta[j] / self.rho;
            grad[h + j] -= wts[k];
            k += 1;
        }
        for e in 0..ne {
            for n in 0..n_aps {
                grad[h + n * ne + e] -= wts[k];
            }
            k += 1;
        }
        for n in 0..n_aps {
            for e in 0..ne {
                grad[h + n * ne + e] += wts[k];
            }
            k += 1;
        }
        if self.fronthaul {
            let (o0, t0) = (2 * h, 2 * h + g);
            let omega = &y[o0..o0 + g];
            let t_hat = &y[t0..t0 + g];
            let mut load = vec![0.0; ne];
            for i in 0..g {
                load[self.model.entity[i]] += t_hat[i];
            }
            let mut d_load = vec![0.0; ne];
            for n in 0..n_aps {
                for e in 0..ne {
                    let j = n * ne + e;
                    let d0 = self.a0[j] - self.load0[e];
                    let sum = a[j] + load[e];
                    grad[h + j] += wts[k] * 0.5 * (sum - d0);
                    d_load[e] += wts[k] * 0.5 * (sum + d0);
                }
                k += 1;
            }
            for i in 0..g {
                grad[t0 + i] += d_load[self.model.entity[i]];
            }
            for i in 0..g {
                let s0 = self.x0[i] * self.x0[i] + self.v0[i];
                dx[i] += wts[k] * c * 2.0 * x[i] / s0;
                grad[o0 + i] += wts[k] * c * (self.v0[i] / s0 - 1.0 / omega[i]);
                grad[t0 + i] -= wts[k];
                k += 1;
            }
            // slack rows are linear in θ through the linearized V
            let mut kappa_rows = vec![0.0; g];
            for i in 0..g {
                grad[o0 + i] += wts[k];
                kappa_rows[i] = wts[k] / self.v0[i];
                k += 1;
            }
            for n in 0..n_aps {
                let kappa: f64 = (0..g).map(|i| kappa_rows[i] * self.model.coeffs.theta[(n, i)]).sum();
                for e in 0..ne {
                    grad[n * ne + e] -= 2.0 * self.model.p * self.theta0[n * ne + e] * kappa;
                }
            }
        }
        self.model.theta_grad(theta, &dx, &dv, grad);
    }

    fn project(&self, y: &mut [f64]) {
        let h = self.half();
        let ne = self.model.n_entities;
        for n in 0..self.model.n_aps {
            project_orthant_ball(&mut y[n * ne..(n + 1) * ne], self.rho);
        }
        for a in &mut y[h..2 * h] {
            *a = a.clamp(0.0, 1.0);
        }
        if self.fronthaul {
            let g = self.users();
            for i in 0..g {
                // w >= 1 because V >= 1
                let lo = 1.0 / self.v0[i];
                y[2 * h + i] = y[2 * h + i].max(lo);
                y[2 * h + g + i] = y[2 * h + g + i].max(0.0);
            }
        }
        if self.elastic {
            let s0 = self.shortfall_offset();
            for s in &mut y[s0..] {
                *s = s.max(0.0);
            }
        }
    }
}

impl Subproblem<'_> {
    /// `V_i` linearized at the expansion point.
    pub fn v_lin(&self, theta: &[f64], i: usize) -> f64 {
        let ne = self.model.n_entities;
        let mut s = self.v0[i];
        for n in 0..self.model.n_aps {
            let mut dot = 0.0;
            for e in 0..ne {
                let j = n * ne + e;
                dot += self.theta0[j] * (theta[j] - self.theta0[j]);
            }
            s += 2.0 * self.model.p * self.model.coeffs.theta[(n, i)] * dot;
        }
        s
    }
}
