#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;

use cellfree::channel::EstimationStats;
use cellfree::closed_form::CoeffTable;
use cellfree::experiments::Instance;
use cellfree::network::{LargeScaleFading, SystemConfig, ValidConfig};
use cellfree::rng::{self, SimRng};
use cellfree::{Dims, Precoder};

pub fn desk(n_aps: usize) -> ValidConfig {
    SystemConfig::with_users(n_aps, 12, 3, vec![2, 2])
        .validate(None)
        .unwrap()
}

pub fn config(n_aps: usize, antennas: usize, n_unicast: usize, groups: &[usize]) -> ValidConfig {
    SystemConfig::with_users(n_aps, antennas, n_unicast, groups.to_vec())
        .validate(None)
        .unwrap()
}

pub fn probe_rng(seed: u64) -> SimRng {
    rng::stream(seed, rng::PROBE)
}

/// Gains log-uniform over four decades around the estimation knee of the
/// default uplink power.
pub fn random_fading(dims: &Dims, r: &mut SimRng) -> LargeScaleFading {
    let gains = DMatrix::from_fn(dims.n_aps, dims.n_users(), |_, _| {
        10f64.powf(r.random_range(-13.0..-9.0))
    });
    LargeScaleFading::from_gains(dims.clone(), gains)
}

pub struct Fixture {
    pub cfg: ValidConfig,
    pub fading: LargeScaleFading,
    pub stats: EstimationStats,
}

impl Fixture {
    pub fn random(cfg: ValidConfig, r: &mut SimRng) -> Self {
        let fading = random_fading(cfg.dims(), r);
        let stats = EstimationStats::new(&cfg, &fading);
        Fixture { cfg, fading, stats }
    }

    pub fn coeffs(&self, precoder: Precoder) -> CoeffTable {
        CoeffTable::build(&self.cfg, &self.fading, &self.stats, precoder).unwrap()
    }
}

pub fn instance(cfg: &ValidConfig, seed: u64) -> Instance {
    Instance::generate(cfg, seed)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
