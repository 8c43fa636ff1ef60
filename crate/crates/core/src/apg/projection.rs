//! Euclidean projection onto the per-AP feasible set: θ in the nonnegative
//! part of the `√ρ` ball, z in the unit box intersected with the `√K` ball.

use crate::closed_form::{CoeffTable, VarLayout};
use crate::network::ValidConfig;

/// Projection onto `{x >= 0, |x|² <= radius_sq}`, in place.
pub fn project_orthant_ball(r: &mut [f64], radius_sq: f64) {
    for x in r.iter_mut() {
        *x = x.max(0.0);
    }
    let norm_sq: f64 = r.iter().map(|x| x * x).sum();
    if norm_sq > radius_sq {
        let s = (radius_sq / norm_sq).sqrt();
        for x in r.iter_mut() {
            *x *= s;
        }
    }
}

/// Projection onto `{0 <= x <= 1, |x|² <= k}`, in place.
///
/// The minimizer is `min(1, s r⁺)` for the largest `s <= 1` meeting the
/// ball. With the `j` largest coordinates saturated, `s² = (k - j) / R_j`
/// where `R_j` is the squared norm of the remaining ones.
pub fn project_box_ball(r: &mut [f64], k: f64) {
    for x in r.iter_mut() {
        *x = x.max(0.0);
    }
    let clipped: f64 = r.iter().map(|x| x.min(1.0).powi(2)).sum();
    if clipped <= k {
        for x in r.iter_mut() {
            *x = x.min(1.0);
        }
        return;
    }
    let mut sorted: Vec<f64> = r.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut rest: f64 = sorted.iter().map(|x| x * x).sum();
    let mut s = 0.0;
    for j in 0..sorted.len() {
        if (j as f64) >= k {
            break;
        }
        let cand = ((k - j as f64) / rest).sqrt();
        let head_ok = j == 0 || cand * sorted[j - 1] >= 1.0;
        if head_ok && cand * sorted[j] < 1.0 {
            s = cand;
            break;
        }
        rest -= sorted[j] * sorted[j];
        rest = rest.max(0.0);
    }
    for x in r.iter_mut() {
        *x = (s * *x).min(1.0);
    }
}

/// Projection onto the optimizer's feasible set.
#[derive(Debug, Clone)]
pub struct Projector {
    pub lay: VarLayout,
    pub rho: f64,
    pub k_max: f64,
    /// Frozen association: θ is forced to zero where the mask is false and
    /// the z block is left untouched.
    pub mask: Option<Vec<bool>>,
}

impl Projector {
    pub fn new(cfg: &ValidConfig, coeffs: &CoeffTable) -> Self {
        Projector {
            lay: VarLayout::new(coeffs.dims()),
            rho: coeffs.rho,
            k_max: cfg.cfg().assoc_cap as f64,
            mask: None,
        }
    }

    pub fn project_in_place(&self, v: &mut [f64]) {
        for n in 0..self.lay.n_aps {
            let tb = self.lay.theta_block(n);
            if let Some(mask) = &self.mask {
                for (x, &keep) in v[tb.clone()].iter_mut().zip(&mask[tb.clone()]) {
                    if !keep {
                        *x = 0.0;
                    }
                }
            }
            project_orthant_ball(&mut v[tb], self.rho);
            if self.mask.is_none() {
                project_box_ball(&mut v[self.lay.z_block(n)], self.k_max);
            }
        }
    }

    pub fn project(&self, r: &[f64]) -> Vec<f64> {
        let mut v = r.to_vec();
        self.project_in_place(&mut v);
        v
    }

    /// Largest violation of the feasible set at `v`.
    pub fn violation(&self, v: &[f64]) -> f64 {
        let mut worst = 0f64;
        for n in 0..self.lay.n_aps {
            let th = &v[self.lay.theta_block(n)];
            let z = &v[self.lay.z_block(n)];
            worst = worst.max(th.iter().map(|t| -t).fold(0.0, f64::max));
            worst = worst.max(th.iter().map(|t| t * t).sum::<f64>() - self.rho);
            worst = worst.max(z.iter().map(|x| (-x).max(x - 1.0)).fold(0.0, f64::max));
            worst = worst.max(z.iter().map(|x| x * x).sum::<f64>() - self.k_max);
            if let Some(mask) = &self.mask {
                let tb = self.lay.theta_block(n);
                for (t, &keep) in th.iter().zip(&mask[tb]) {
                    if !keep {
                        worst = worst.max(t.abs());
                    }
                }
            }
        }
        worst
    }
}

pub fn project(r: &[f64], cfg: &ValidConfig, coeffs: &CoeffTable) -> Vec<f64> {
    Projector::new(cfg, coeffs).project(r)
}
