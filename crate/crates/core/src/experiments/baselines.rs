//! Random AP selection baselines with equal or optimized power.

use nalgebra::DMatrix;
use rand::Rng;

use crate::apg::{apg_solve_with, ApgOutcome, PenaltyConfig, SolutionReport};
use crate::closed_form::{CoeffTable, DecisionVars, VarLayout};
use crate::error::Result;
use crate::network::ValidConfig;
use crate::rng::SimRng;

pub const RAS_TRIES: usize = 100;

fn admissible(a: &DMatrix<bool>, k_max: usize) -> bool {
    let covered = a.column_iter().all(|c| c.iter().any(|&x| x));
    let capped = a.row_iter().all(|r| r.iter().filter(|&&x| x).count() <= k_max);
    covered && capped
}

/// Every AP joins each entity's serving set with probability 1/2. Draws that
/// leave an entity unserved or overload an AP are redrawn; after
/// [`RAS_TRIES`] failures the last draw is repaired greedily.
pub fn random_association(n_aps: usize, n_entities: usize, k_max: usize, rng: &mut SimRng) -> DMatrix<bool> {
    let mut a = DMatrix::from_element(n_aps, n_entities, false);
    for _ in 0..RAS_TRIES {
        for e in 0..n_entities {
            for n in 0..n_aps {
                a[(n, e)] = rng.random_bool(0.5);
            }
        }
        if admissible(&a, k_max) {
            return a;
        }
    }
    greedy_fix(&mut a, k_max);
    a
}

fn greedy_fix(a: &mut DMatrix<bool>, k_max: usize) {
    let (n_aps, ne) = a.shape();
    let load = |a: &DMatrix<bool>, n: usize| a.row(n).iter().filter(|&&x| x).count();
    let served = |a: &DMatrix<bool>, e: usize| a.column(e).iter().filter(|&&x| x).count();
    // drop the best-covered entities from overloaded APs first
    for n in 0..n_aps {
        while load(a, n) > k_max {
            let e = (0..ne)
                .filter(|&e| a[(n, e)])
                .max_by_key(|&e| (served(a, e), std::cmp::Reverse(e)))
                .unwrap();
            a[(n, e)] = false;
        }
    }
    for e in 0..ne {
        if served(a, e) > 0 {
            continue;
        }
        let n = (0..n_aps).min_by_key(|&n| (load(a, n), n)).unwrap();
        if load(a, n) >= k_max {
            // every AP is full: take a slot from a doubly covered entity
            let steal = (0..n_aps)
                .flat_map(|n| (0..ne).map(move |f| (n, f)))
                .find(|&(n, f)| a[(n, f)] && served(a, f) > 1);
            if let Some((n, f)) = steal {
                a[(n, f)] = false;
                a[(n, e)] = true;
                continue;
            }
        }
        a[(n, e)] = true;
    }
}

/// Splits each AP's budget equally over the entities it serves.
pub fn equal_power(a: &DMatrix<bool>, rho: f64) -> DMatrix<f64> {
    let mut theta = DMatrix::zeros(a.nrows(), a.ncols());
    for n in 0..a.nrows() {
        let count = a.row(n).iter().filter(|&&x| x).count();
        if count == 0 {
            continue;
        }
        let t = (rho / count as f64).sqrt();
        for e in 0..a.ncols() {
            if a[(n, e)] {
                theta[(n, e)] = t;
            }
        }
    }
    theta
}

fn draw(cfg: &ValidConfig, coeffs: &CoeffTable, rng: &mut SimRng) -> DMatrix<bool> {
    let d = coeffs.dims();
    random_association(d.n_aps, d.n_entities(), cfg.cfg().assoc_cap, rng)
}

pub fn baseline_epa_ras(cfg: &ValidConfig, coeffs: &CoeffTable, rng: &mut SimRng) -> SolutionReport {
    let a = draw(cfg, coeffs, rng);
    let theta = equal_power(&a, coeffs.rho);
    SolutionReport::evaluate(a, theta, cfg, coeffs)
}

/// Optimized powers on a random association. Also returns the solver run.
pub fn baseline_opa_ras(
    cfg: &ValidConfig,
    coeffs: &CoeffTable,
    pen: &PenaltyConfig,
    rng: &mut SimRng,
) -> Result<(SolutionReport, ApgOutcome)> {
    let a = draw(cfg, coeffs, rng);
    opa_on(cfg, coeffs, pen, a)
}

/// Power optimization with the association frozen at `a`, started from the
/// equal split.
pub fn opa_on(
    cfg: &ValidConfig,
    coeffs: &CoeffTable,
    pen: &PenaltyConfig,
    a: DMatrix<bool>,
) -> Result<(SolutionReport, ApgOutcome)> {
    let lay = VarLayout::new(coeffs.dims());
    let init = DecisionVars {
        precoder: coeffs.precoder,
        theta: equal_power(&a, coeffs.rho),
        z: a.map(|x| if x { 1.0 } else { 0.0 }),
    };
    let mut mask = vec![false; lay.len()];
    for n in 0..lay.n_aps {
        for e in 0..lay.n_entities {
            mask[lay.theta(n, e)] = a[(n, e)];
        }
    }
    let out = apg_solve_with(cfg, coeffs, pen, &init, Some(mask), &mut |_| {})?;
    let theta = out.vars.theta.clone();
    Ok((SolutionReport::evaluate(a, theta, cfg, coeffs), out))
}
