//! SINR written directly in association and power coefficients, as the
//! expectations of the use-and-then-forget bound evaluate.

use super::AssociationPower;
use crate::channel::EstimationStats;
use crate::network::LargeScaleFading;
use crate::system::Precoder;

/// SINR of every receiving user (layout order).
pub fn sinr(
    ap: &AssociationPower,
    fading: &LargeScaleFading,
    stats: &EstimationStats,
    precoder: Precoder,
    p_dl: f64,
) -> Vec<f64> {
    let d = fading.dims();
    let (u_count, l) = (d.n_unicast, d.antennas as f64);
    let spare = l - d.n_entities() as f64;
    let served = |n: usize, e: usize| if ap.a[(n, e)] { ap.eta[(n, e)] } else { 0.0 };

    let mut out = Vec::with_capacity(d.n_users());
    for i in 0..d.n_users() {
        let e = d.entity_of_user(i);
        let mut amp = 0.0;
        let mut den = 1.0;
        for n in 0..d.n_aps {
            let beta = fading.user(n, i);
            match precoder {
                Precoder::Mr => {
                    // E{h^H v} for the estimate v this user's entity is precoded with
                    let mean = if i < u_count {
                        l * stats.gamma(n, i)
                    } else {
                        l * (stats.zeta(n, e - u_count) * stats.gamma_user(n, i)).sqrt()
                    };
                    amp += served(n, e).sqrt() * mean;
                    let mut load = 0.0;
                    for u in 0..u_count {
                        load += served(n, u) * stats.gamma(n, u);
                    }
                    for m in 0..d.n_groups() {
                        load += served(n, u_count + m) * stats.zeta(n, m);
                    }
                    den += p_dl * l * beta * load;
                }
                Precoder::Zf => {
                    let gain = if i < u_count {
                        1.0
                    } else {
                        (stats.gamma_user(n, i) / stats.zeta(n, e - u_count)).sqrt()
                    };
                    amp += served(n, e).sqrt() * gain;
                    let mut load = 0.0;
                    for u in 0..u_count {
                        load += served(n, u) / stats.gamma(n, u);
                    }
                    for m in 0..d.n_groups() {
                        load += served(n, u_count + m) / stats.zeta(n, m);
                    }
                    den += p_dl * (beta - stats.gamma_user(n, i)) / spare * load;
                }
            }
        }
        out.push(p_dl * amp * amp / den);
    }
    out
}
