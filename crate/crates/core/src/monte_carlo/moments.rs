//! Empirical checks of the estimate moments behind the closed forms.

use nalgebra::DMatrix;

use super::build_precoders;
use crate::channel::{ChannelSampler, EstimationStats};
use crate::network::{LargeScaleFading, ValidConfig};
use crate::rng;
use crate::system::{Dims, Precoder};

#[derive(Debug, Clone, PartialEq)]
pub struct MomentCheck {
    pub name: &'static str,
    pub expected: f64,
    pub mean: f64,
    pub std_err: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub checks: Vec<MomentCheck>,
    pub trials: usize,
}

impl MomentReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Default)]
struct Stat {
    n: f64,
    sum: f64,
    sum_sq: f64,
}

impl Stat {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn check(&self, name: &'static str, expected: f64) -> MomentCheck {
        let mean = self.sum / self.n;
        let var = ((self.sum_sq - self.n * mean * mean) / (self.n - 1.0)).max(0.0);
        let std_err = (var / self.n).sqrt();
        let pass = (mean - expected).abs() <= 3.0 * std_err + 1e-12 * expected.abs();
        MomentCheck {
            name,
            expected,
            mean,
            std_err,
            pass,
        }
    }
}

/// Checks the six estimate moments at AP 0 of `fading` for unicast user 0
/// and the first member of group 0. The zero-forcing norm check is skipped
/// when `L <= U + M` or the estimate variance is zero.
pub fn moment_identity_suite(cfg: &ValidConfig, fading: &LargeScaleFading, trials: usize, seed: u64) -> MomentReport {
    let full = fading.dims();
    let dims = Dims::new(1, full.antennas, full.n_unicast, full.group_sizes());
    let row = DMatrix::from_fn(1, full.n_users(), |_, i| fading.user(0, i));
    let single = LargeScaleFading::from_gains(dims.clone(), row);
    let stats = EstimationStats::new(cfg, &single);
    let sampler = ChannelSampler::new(cfg, &single);
    let l = dims.antennas as f64;
    let spare = l - dims.n_entities() as f64;
    let u = dims.n_unicast;
    let has_unicast = u > 0;
    let has_group = dims.n_groups() > 0;
    let gamma = if has_unicast { stats.gamma(0, 0) } else { 0.0 };
    let beta = if has_unicast { single.beta(0, 0) } else { 0.0 };
    let zf = has_unicast && spare > 0.0 && gamma > 0.0;

    let mut s: [Stat; 6] = Default::default();
    let mut rng = rng::stream(seed, rng::PROBE);
    let mut done = 0;
    while done < trials {
        let real = sampler.sample(&mut rng);
        let ap = &real.aps[0];
        let b_zf = if zf {
            match build_precoders(ap, Precoder::Zf, &dims) {
                Ok(b) => Some(b),
                Err(_) => continue,
            }
        } else {
            None
        };
        if has_unicast {
            let c_hat = ap.h_hat.column(0);
            let c_err = ap.h.column(0) - c_hat;
            let energy = c_hat.norm_squared();
            s[0].push(energy);
            s[1].push(energy * energy);
            s[2].push(c_err.dotc(&c_hat).norm_sqr());
        }
        if has_group {
            let t_k = ap.h_hat.column(u);
            let t_group = ap.group_hat.column(0);
            let inner = t_k.dotc(&t_group);
            s[3].push(inner.re);
            s[4].push(inner.norm_sqr());
        }
        if let Some(b) = b_zf {
            s[5].push(b.column(0).norm_squared());
        }
        done += 1;
    }

    let mut checks = Vec::new();
    if has_unicast {
        checks.push(s[0].check("E|c_hat|^2 = L gamma", l * gamma));
        checks.push(s[1].check("E|c_hat|^4 = L(L+1) gamma^2", l * (l + 1.0) * gamma * gamma));
        checks.push(s[2].check(
            "E|c_err^H c_hat|^2 = L gamma (beta - gamma)",
            l * gamma * (beta - gamma),
        ));
    }
    if has_group {
        let (gb, z) = (stats.gamma_bar(0, 0, 0), stats.zeta(0, 0));
        checks.push(s[3].check("E t_hat_k^H t_hat = L sqrt(zeta gamma_bar)", l * (z * gb).sqrt()));
        checks.push(s[4].check("E|t_hat_k^H t_hat|^2 = L(L+1) gamma_bar zeta", l * (l + 1.0) * gb * z));
    }
    if zf {
        checks.push(s[5].check("E|b_zf|^2 = 1/((L-U-M) gamma)", 1.0 / (spare * gamma)));
    }
    MomentReport { checks, trials }
}
