use super::instance::Instance;
use crate::closed_form::{epa_point, se_and_sse};
use crate::error::Result;
use crate::monte_carlo::{estimate_uatf_terms, validation_rows, ValidationRow};
use crate::network::ValidConfig;
use crate::system::Precoder;

/// Closed-form against Monte Carlo SE at the equal-power point of the
/// network drawn from `seed`.
pub fn certify_closed_form(
    cfg: &ValidConfig,
    seed: u64,
    precoder: Precoder,
    trials: usize,
) -> Result<Vec<ValidationRow>> {
    cfg.require(precoder)?;
    let inst = Instance::generate(cfg, seed);
    let coeffs = inst.coeffs(precoder)?;
    let vars = epa_point(&coeffs);
    let closed = se_and_sse(&vars, &coeffs, cfg);
    let ap = vars.to_power(&inst.stats);
    let est = estimate_uatf_terms(cfg, &inst.fading, &ap, precoder, trials, seed)?;
    Ok(validation_rows(cfg.dims(), precoder, &closed.se, &est))
}
