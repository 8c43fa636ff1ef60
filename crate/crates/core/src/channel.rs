//! MMSE estimation statistics and small-scale channel sampling.
//!
//! Pilots come from the identity book: unicast user `u` sends column `u`,
//! every member of group `m` sends column `U + m`. Projecting the received
//! training block onto a pilot then reduces to picking one column, so only
//! those columns are simulated.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::network::{LargeScaleFading, ValidConfig};
use crate::system::Dims;

/// Variance of the unicast MMSE estimate, `tau p beta^2 / (tau p beta + 1)`.
pub fn mmse_variance_unicast(beta: f64, tau: f64, p_ul: f64) -> f64 {
    let tp = tau * p_ul;
    tp * beta * beta / (tp * beta + 1.0)
}

/// (`gamma_bar_k`, `zeta`) for member `k` of a group with gains `betas`.
pub fn mmse_variance_multicast(betas: &[f64], k: usize, tau: f64, p_ul: f64) -> (f64, f64) {
    let tp = tau * p_ul;
    let sum: f64 = betas.iter().sum();
    let den = tp * sum + 1.0;
    (tp * betas[k] * betas[k] / den, tp * sum * sum / den)
}

/// Estimate variances per AP. `gamma` has one column per receiving user
/// (gamma for unicast, gamma bar for multicast members), `zeta` one column
/// per group.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationStats {
    dims: Dims,
    gamma: DMatrix<f64>,
    zeta: DMatrix<f64>,
}

impl EstimationStats {
    pub fn new(cfg: &ValidConfig, fading: &LargeScaleFading) -> Self {
        Self::from_parts(fading, cfg.tau(), cfg.p_ul_norm())
    }

    pub fn from_parts(fading: &LargeScaleFading, tau: f64, p_ul: f64) -> Self {
        let dims = fading.dims().clone();
        let (n_aps, g, u) = (dims.n_aps, dims.n_users(), dims.n_unicast);
        let mut gamma = DMatrix::zeros(n_aps, g);
        let mut zeta = DMatrix::zeros(n_aps, dims.n_groups());
        for n in 0..n_aps {
            for i in 0..u {
                gamma[(n, i)] = mmse_variance_unicast(fading.user(n, i), tau, p_ul);
            }
            for m in 0..dims.n_groups() {
                let betas: Vec<f64> = dims.group_range(m).map(|mk| fading.user(n, u + mk)).collect();
                for (k, mk) in dims.group_range(m).enumerate() {
                    let (gb, z) = mmse_variance_multicast(&betas, k, tau, p_ul);
                    gamma[(n, u + mk)] = gb;
                    zeta[(n, m)] = z;
                }
            }
        }
        EstimationStats { dims, gamma, zeta }
    }

    pub fn dims(&self) -> &Dims {
        &self.dims
    }

    pub fn gamma_user(&self, n: usize, i: usize) -> f64 {
        self.gamma[(n, i)]
    }

    pub fn gamma(&self, n: usize, u: usize) -> f64 {
        debug_assert!(u < self.dims.n_unicast);
        self.gamma[(n, u)]
    }

    pub fn gamma_bar(&self, n: usize, m: usize, k: usize) -> f64 {
        self.gamma[(n, self.dims.n_unicast + self.dims.mc_index(m, k))]
    }

    pub fn zeta(&self, n: usize, m: usize) -> f64 {
        self.zeta[(n, m)]
    }

    /// Variance of the estimate used for entity `e`'s precoder: gamma for a
    /// unicast user, zeta for a group.
    pub fn entity_variance(&self, n: usize, e: usize) -> f64 {
        let u = self.dims.n_unicast;
        if e < u {
            self.gamma[(n, e)]
        } else {
            self.zeta[(n, e - u)]
        }
    }
}

/// Circularly symmetric complex Gaussian with unit variance.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Channels and estimates seen by one AP. Columns of `h` and `h_hat` are
/// receiving users in layout order, columns of `group_hat` are groups.
#[derive(Debug, Clone)]
pub struct ApChannels {
    pub h: DMatrix<Complex64>,
    pub h_hat: DMatrix<Complex64>,
    pub group_hat: DMatrix<Complex64>,
}

impl ApChannels {
    /// Estimation errors `h - h_hat`.
    pub fn error(&self) -> DMatrix<Complex64> {
        &self.h - &self.h_hat
    }

    /// Estimate that entity `e` is precoded against.
    pub fn entity_estimate(&self, e: usize, n_unicast: usize) -> nalgebra::DVectorView<'_, Complex64> {
        if e < n_unicast {
            self.h_hat.column(e)
        } else {
            self.group_hat.column(e - n_unicast)
        }
    }

    /// `G_hat = [c_hat_1 .. c_hat_U, t_hat_1 .. t_hat_M]`, `L x (U + M)`.
    pub fn entity_matrix(&self, n_unicast: usize) -> DMatrix<Complex64> {
        let l = self.h.nrows();
        let m = self.group_hat.ncols();
        let mut g = DMatrix::zeros(l, n_unicast + m);
        g.columns_mut(0, n_unicast).copy_from(&self.h_hat.columns(0, n_unicast));
        g.columns_mut(n_unicast, m).copy_from(&self.group_hat);
        g
    }
}

#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub aps: Vec<ApChannels>,
}

/// Precomputed training coefficients for repeated draws.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    dims: Dims,
    sqrt_beta: DMatrix<f64>,
    sqrt_tp: f64,
    /// MMSE gain applied to the projected training signal, per (AP, user).
    est_gain: DMatrix<f64>,
}

impl ChannelSampler {
    pub fn new(cfg: &ValidConfig, fading: &LargeScaleFading) -> Self {
        Self::from_parts(fading, cfg.tau(), cfg.p_ul_norm())
    }

    pub fn from_parts(fading: &LargeScaleFading, tau: f64, p_ul: f64) -> Self {
        let dims = fading.dims().clone();
        let tp = tau * p_ul;
        let sqrt_tp = tp.sqrt();
        let u = dims.n_unicast;
        let mut est_gain = DMatrix::zeros(dims.n_aps, dims.n_users());
        for n in 0..dims.n_aps {
            for i in 0..u {
                let b = fading.user(n, i);
                est_gain[(n, i)] = sqrt_tp * b / (tp * b + 1.0);
            }
            for m in 0..dims.n_groups() {
                let sum: f64 = dims.group_range(m).map(|mk| fading.user(n, u + mk)).sum();
                for mk in dims.group_range(m) {
                    est_gain[(n, u + mk)] = sqrt_tp * fading.user(n, u + mk) / (tp * sum + 1.0);
                }
            }
        }
        ChannelSampler {
            sqrt_beta: fading.gains().map(f64::sqrt),
            sqrt_tp,
            est_gain,
            dims,
        }
    }

    pub fn dims(&self) -> &Dims {
        &self.dims
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelRealization {
        let d = &self.dims;
        let (l, g, u, m) = (d.antennas, d.n_users(), d.n_unicast, d.n_groups());
        let aps = (0..d.n_aps)
            .map(|n| {
                let h = DMatrix::from_fn(l, g, |_, i| complex_normal(rng) * self.sqrt_beta[(n, i)]);
                let mut h_hat = DMatrix::zeros(l, g);
                let mut group_hat = DMatrix::zeros(l, m);
                for i in 0..u {
                    for r in 0..l {
                        let y = self.sqrt_tp * h[(r, i)] + complex_normal(rng);
                        h_hat[(r, i)] = y * self.est_gain[(n, i)];
                    }
                }
                for gm in 0..m {
                    let members = d.group_range(gm);
                    for r in 0..l {
                        let mut y = complex_normal(rng);
                        for mk in members.clone() {
                            y += self.sqrt_tp * h[(r, u + mk)];
                        }
                        let mut sum = Complex64::new(0.0, 0.0);
                        for mk in members.clone() {
                            let est = y * self.est_gain[(n, u + mk)];
                            h_hat[(r, u + mk)] = est;
                            sum += est;
                        }
                        group_hat[(r, gm)] = sum;
                    }
                }
                ApChannels { h, h_hat, group_hat }
            })
            .collect();
        ChannelRealization { aps }
    }
}

pub fn sample_channels<R: Rng + ?Sized>(
    cfg: &ValidConfig,
    fading: &LargeScaleFading,
    rng: &mut R,
) -> ChannelRealization {
    ChannelSampler::new(cfg, fading).sample(rng)
}
