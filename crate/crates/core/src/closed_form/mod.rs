//! Closed-form SINR and SE for MR and ZF precoding.
//!
//! The optimizers work in the θ parameterization, where every entity's
//! per-AP power enters as `θ[n, e]` and the SINR of receiving user `i` is
//!
//! ```text
//! SINR_i = p (Σ_n θ[n, e_i] Λ[n, i])² / (p Σ_n Θ[n, i] Σ_e θ[n, e]² + 1)
//! ```
//!
//! [`direct`] evaluates the same quantities from association and power
//! coefficients without going through θ.

pub mod direct;
mod vars;

pub use vars::{epa_point, AssociationPower, DecisionVars, VarLayout};

use nalgebra::DMatrix;

use crate::channel::EstimationStats;
use crate::error::Result;
use crate::network::{LargeScaleFading, ValidConfig};
use crate::system::{Dims, Precoder};

/// Per-(AP, user) signal and interference coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffTable {
    pub precoder: Precoder,
    /// Per-AP budget on `Σ_e θ²`.
    pub rho: f64,
    pub prelog: f64,
    /// `N x (U + K_M)`: Λ for unicast columns, Λ̄ for multicast members.
    pub lambda: DMatrix<f64>,
    /// `N x (U + K_M)`: Θ for unicast columns, Θ̄ for multicast members.
    pub theta: DMatrix<f64>,
    dims: Dims,
}

impl CoeffTable {
    pub fn build(
        cfg: &ValidConfig,
        fading: &LargeScaleFading,
        stats: &EstimationStats,
        precoder: Precoder,
    ) -> Result<Self> {
        cfg.require(precoder)?;
        let dims = cfg.dims().clone();
        let l = dims.antennas as f64;
        let spare = (dims.antennas as f64) - dims.n_entities() as f64;
        let (rows, cols) = (dims.n_aps, dims.n_users());
        let (lambda, theta, rho) = match precoder {
            Precoder::Mr => (
                DMatrix::from_fn(rows, cols, |n, i| l * stats.gamma_user(n, i).sqrt()),
                DMatrix::from_fn(rows, cols, |n, i| l * fading.user(n, i)),
                1.0 / l,
            ),
            Precoder::Zf => (
                DMatrix::from_fn(rows, cols, |n, i| stats.gamma_user(n, i).sqrt()),
                DMatrix::from_fn(rows, cols, |n, i| {
                    (fading.user(n, i) - stats.gamma_user(n, i)).max(0.0) / spare
                }),
                spare,
            ),
        };
        Ok(CoeffTable {
            precoder,
            rho,
            prelog: cfg.prelog(),
            lambda,
            theta,
            dims,
        })
    }

    pub fn dims(&self) -> &Dims {
        &self.dims
    }
}

/// Numerator and denominator of every user's SINR at `theta` (`N x E`).
pub fn sinr_parts(theta: &DMatrix<f64>, coeffs: &CoeffTable, p_dl: f64) -> Vec<(f64, f64)> {
    let d = coeffs.dims();
    let power: Vec<f64> = (0..d.n_aps).map(|n| theta.row(n).norm_squared()).collect();
    (0..d.n_users())
        .map(|i| {
            let e = d.entity_of_user(i);
            let mut amp = 0.0;
            let mut interference = 0.0;
            for n in 0..d.n_aps {
                amp += theta[(n, e)] * coeffs.lambda[(n, i)];
                interference += coeffs.theta[(n, i)] * power[n];
            }
            (p_dl * amp * amp, p_dl * interference + 1.0)
        })
        .collect()
}

/// SINR of every receiving user in layout order.
pub fn sinr(vars: &DecisionVars, coeffs: &CoeffTable, p_dl: f64) -> Vec<f64> {
    sinr_parts(&vars.theta, coeffs, p_dl)
        .into_iter()
        .map(|(s, i)| s / i)
        .collect()
}

pub fn sinr_unicast(vars: &DecisionVars, coeffs: &CoeffTable, p_dl: f64) -> Vec<f64> {
    let mut all = sinr(vars, coeffs, p_dl);
    all.truncate(coeffs.dims().n_unicast);
    all
}

/// Per-group lists of member SINRs.
pub fn sinr_multicast(vars: &DecisionVars, coeffs: &CoeffTable, p_dl: f64) -> Vec<Vec<f64>> {
    let d = coeffs.dims();
    let all = sinr(vars, coeffs, p_dl);
    (0..d.n_groups())
        .map(|m| d.group_range(m).map(|mk| all[d.n_unicast + mk]).collect())
        .collect()
}

pub fn se_from_sinr(sinr: f64, prelog: f64) -> f64 {
    prelog * sinr.ln_1p() / std::f64::consts::LN_2
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeSummary {
    /// Per receiving user, layout order.
    pub se: Vec<f64>,
    pub sse: f64,
}

impl SeSummary {
    pub fn from_se(se: Vec<f64>, cfg: &ValidConfig) -> Self {
        let sse = se.iter().enumerate().map(|(i, s)| cfg.weight_of_user(i) * s).sum();
        SeSummary { se, sse }
    }

    pub fn min_unicast(&self, dims: &Dims) -> Option<f64> {
        self.se[..dims.n_unicast].iter().copied().reduce(f64::min)
    }

    pub fn min_multicast(&self, dims: &Dims) -> Option<f64> {
        self.se[dims.n_unicast..].iter().copied().reduce(f64::min)
    }
}

pub fn se_and_sse(vars: &DecisionVars, coeffs: &CoeffTable, cfg: &ValidConfig) -> SeSummary {
    let se = sinr(vars, coeffs, cfg.p_dl_norm())
        .into_iter()
        .map(|s| se_from_sinr(s, coeffs.prelog))
        .collect();
    SeSummary::from_se(se, cfg)
}
