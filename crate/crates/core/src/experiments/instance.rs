use crate::channel::EstimationStats;
use crate::closed_form::CoeffTable;
use crate::error::Result;
use crate::network::{compute_large_scale, place_network, Geometry, LargeScaleFading, Shadowing, ValidConfig};
use crate::rng;
use crate::system::Precoder;

/// One network realization: geometry, large-scale fading and estimation
/// statistics, all derived from `seed`.
#[derive(Debug, Clone)]
pub struct Instance {
    pub cfg: ValidConfig,
    pub seed: u64,
    pub geometry: Geometry,
    pub fading: LargeScaleFading,
    pub stats: EstimationStats,
}

impl Instance {
    pub fn generate(cfg: &ValidConfig, seed: u64) -> Self {
        let geometry = place_network(cfg, &mut rng::stream(seed, rng::GEOMETRY));
        let fading = compute_large_scale(
            &geometry,
            cfg,
            &Shadowing::Correlated,
            &mut rng::stream(seed, rng::SHADOWING),
        );
        let stats = EstimationStats::new(cfg, &fading);
        Instance {
            cfg: cfg.clone(),
            seed,
            geometry,
            fading,
            stats,
        }
    }

    pub fn coeffs(&self, precoder: Precoder) -> Result<CoeffTable> {
        CoeffTable::build(&self.cfg, &self.fading, &self.stats, precoder)
    }
}
