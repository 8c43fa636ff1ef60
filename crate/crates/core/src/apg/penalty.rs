//! Penalized objective `g = -SSE + X Σ μ_j C_j` and its gradient.

use std::f64::consts::LN_2;

use crate::closed_form::{CoeffTable, VarLayout};
use crate::network::ValidConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyConfig {
    /// Weights of the QoS, binariness, coverage/masking and fronthaul terms.
    pub mu: [f64; 4],
    /// Penalty multiplier.
    pub x: f64,
    /// Step for the extrapolated point; `None` uses `1 / L` with `L`
    /// estimated at the start point.
    pub alpha_bar: Option<f64>,
    /// Step for the correction point; `None` as above.
    pub alpha: Option<f64>,
    /// Nonmonotonicity degree in `[0, 1)`.
    pub nu: f64,
    pub epsilon: f64,
    pub max_iters: usize,
    /// Times `x` may be doubled when the solution still violates the
    /// relaxed constraints.
    pub max_doublings: usize,
    /// Residual above which `x` is doubled.
    pub residual_tol: f64,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        PenaltyConfig {
            mu: [1.0; 4],
            x: 100.0,
            alpha_bar: None,
            alpha: None,
            nu: 0.5,
            epsilon: 1e-4,
            max_iters: 5000,
            max_doublings: 3,
            residual_tol: 1e-3,
        }
    }
}

/// Breakdown of `g` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyParts {
    /// `-SSE`.
    pub f: f64,
    /// Unweighted QoS, binariness, coverage/masking and fronthaul terms.
    pub terms: [f64; 4],
    pub g: f64,
    pub se: Vec<f64>,
}

/// `g` together with the data its gradient needs.
#[derive(Debug, Clone)]
pub struct Objective<'a> {
    pub coeffs: &'a CoeffTable,
    pub lay: VarLayout,
    pub pen: PenaltyConfig,
    p: f64,
    /// `prelog / ln 2`.
    c: f64,
    qos: Vec<f64>,
    weight: Vec<f64>,
    entity: Vec<usize>,
    fronthaul_cap: f64,
    /// Zero the z components of the gradient.
    pub freeze_z: bool,
}

struct Eval {
    amp: Vec<f64>,
    sig: Vec<f64>,
    den: Vec<f64>,
    se: Vec<f64>,
    /// Per-entity SE carried over the fronthaul.
    load_se: Vec<f64>,
    /// Per-AP fronthaul excess.
    excess: Vec<f64>,
}

impl<'a> Objective<'a> {
    pub fn new(cfg: &ValidConfig, coeffs: &'a CoeffTable, pen: PenaltyConfig) -> Self {
        let d = coeffs.dims();
        let users = 0..d.n_users();
        Objective {
            coeffs,
            lay: VarLayout::new(d),
            pen,
            p: cfg.p_dl_norm(),
            c: coeffs.prelog / LN_2,
            qos: users.clone().map(|i| cfg.qos_of_user(i)).collect(),
            weight: users.clone().map(|i| cfg.weight_of_user(i)).collect(),
            entity: users.map(|i| d.entity_of_user(i)).collect(),
            fronthaul_cap: cfg.cfg().fronthaul_cap,
            freeze_z: false,
        }
    }

    fn eval(&self, v: &[f64]) -> Eval {
        let lay = self.lay;
        let (n_aps, ne) = (lay.n_aps, lay.n_entities);
        let power: Vec<f64> = (0..n_aps)
            .map(|n| v[lay.theta_block(n)].iter().map(|t| t * t).sum())
            .collect();
        let users = self.entity.len();
        let (mut amp, mut sig, mut den, mut se) =
            (vec![0.0; users], vec![0.0; users], vec![0.0; users], vec![0.0; users]);
        for i in 0..users {
            let e = self.entity[i];
            let (mut a, mut inter) = (0.0, 0.0);
            for n in 0..n_aps {
                a += v[lay.theta(n, e)] * self.coeffs.lambda[(n, i)];
                inter += self.coeffs.theta[(n, i)] * power[n];
            }
            amp[i] = a;
            sig[i] = self.p * a * a;
            den[i] = self.p * inter + 1.0;
            se[i] = self.c * (sig[i] / den[i]).ln_1p();
        }
        let mut load_se = vec![0.0; ne];
        for i in 0..users {
            load_se[self.entity[i]] += se[i];
        }
        let excess = (0..n_aps)
            .map(|n| {
                if self.fronthaul_cap.is_finite() {
                    let load: f64 = (0..ne).map(|e| v[lay.z(n, e)].powi(2) * load_se[e]).sum();
                    (load - self.fronthaul_cap).max(0.0)
                } else {
                    0.0
                }
            })
            .collect();
        Eval {
            amp,
            sig,
            den,
            se,
            load_se,
            excess,
        }
    }

    pub fn parts(&self, v: &[f64]) -> PenaltyParts {
        let ev = self.eval(v);
        let lay = self.lay;
        let rho = self.coeffs.rho;
        let f = -ev.se.iter().zip(&self.weight).map(|(s, w)| s * w).sum::<f64>();
        let qos: f64 = ev.se.iter().zip(&self.qos).map(|(s, q)| (q - s).max(0.0).powi(2)).sum();
        let mut binary = 0.0;
        let mut cover_mask = 0.0;
        for e in 0..lay.n_entities {
            let mut cov = 0.0;
            for n in 0..lay.n_aps {
                let z = v[lay.z(n, e)];
                let t = v[lay.theta(n, e)];
                binary += z * z - z.powi(4);
                cover_mask += (t * t - rho * z * z).max(0.0).powi(2);
                cov += z * z;
            }
            cover_mask += (1.0 - cov).max(0.0).powi(2);
        }
        let fronthaul: f64 = ev.excess.iter().map(|r| r * r).sum();
        let terms = [qos, binary, cover_mask, fronthaul];
        let mu = self.pen.mu;
        let pen: f64 = terms.iter().zip(mu).map(|(t, m)| t * m).sum();
        PenaltyParts {
            f,
            terms,
            g: f + self.pen.x * pen,
            se: ev.se,
        }
    }

    pub fn value(&self, v: &[f64]) -> f64 {
        self.parts(v).g
    }

    pub fn gradient(&self, v: &[f64]) -> Vec<f64> {
        let ev = self.eval(v);
        let lay = self.lay;
        let (n_aps, ne) = (lay.n_aps, lay.n_entities);
        let (x, mu, rho, p, c) = (self.pen.x, self.pen.mu, self.coeffs.rho, self.p, self.c);
        let users = self.entity.len();

        // dg/dSE_i
        let omega: Vec<f64> = (0..users)
            .map(|i| {
                let e = self.entity[i];
                let qos = -2.0 * x * mu[0] * (self.qos[i] - ev.se[i]).max(0.0);
                let fh: f64 = (0..n_aps).map(|n| 2.0 * ev.excess[n] * v[lay.z(n, e)].powi(2)).sum();
                -self.weight[i] + qos + x * mu[3] * fh
            })
            .collect();

        let mut grad = vec![0.0; lay.len()];
        for n in 0..n_aps {
            let mut kappa = 0.0;
            for i in 0..users {
                let total = ev.sig[i] + ev.den[i];
                kappa += omega[i] * self.coeffs.theta[(n, i)] * (1.0 / total - 1.0 / ev.den[i]);
            }
            for e in 0..ne {
                let t = v[lay.theta(n, e)];
                grad[lay.theta(n, e)] = c * 2.0 * p * t * kappa;
            }
            for i in 0..users {
                let e = self.entity[i];
                let total = ev.sig[i] + ev.den[i];
                grad[lay.theta(n, e)] += c * omega[i] * 2.0 * p * ev.amp[i] * self.coeffs.lambda[(n, i)] / total;
            }
        }

        for e in 0..ne {
            let cov: f64 = (0..n_aps).map(|n| v[lay.z(n, e)].powi(2)).sum();
            let short = (1.0 - cov).max(0.0);
            for n in 0..n_aps {
                let t = v[lay.theta(n, e)];
                let z = v[lay.z(n, e)];
                let mask = (t * t - rho * z * z).max(0.0);
                grad[lay.theta(n, e)] += 4.0 * x * mu[2] * mask * t;
                if !self.freeze_z {
                    grad[lay.z(n, e)] = x * mu[1] * (2.0 * z - 4.0 * z.powi(3))
                        - 4.0 * x * mu[2] * z * (short + rho * mask)
                        + 4.0 * x * mu[3] * ev.excess[n] * z * ev.load_se[e];
                }
            }
        }
        grad
    }
}

pub fn penalty_value(v: &[f64], coeffs: &CoeffTable, cfg: &ValidConfig, pen: &PenaltyConfig) -> f64 {
    Objective::new(cfg, coeffs, pen.clone()).value(v)
}

pub fn penalty_gradient(v: &[f64], coeffs: &CoeffTable, cfg: &ValidConfig, pen: &PenaltyConfig) -> Vec<f64> {
    Objective::new(cfg, coeffs, pen.clone()).gradient(v)
}
