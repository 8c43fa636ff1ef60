//! Downlink simulation used to certify the closed forms.

mod moments;

pub use moments::{moment_identity_suite, MomentCheck, MomentReport};

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::{ApChannels, ChannelSampler};
use crate::closed_form::{se_from_sinr, AssociationPower};
use crate::error::{Error, Result};
use crate::network::{LargeScaleFading, ValidConfig};
use crate::rng;
use crate::system::{Dims, Precoder, UserKind};

/// Gram matrices above this condition number are rejected.
pub const MAX_CONDITION: f64 = 1e12;
/// Trials per independent RNG stream.
pub const CHUNK: usize = 1000;

/// Per-AP precoding vectors, one column per serving entity.
pub fn build_precoders(ap: &ApChannels, precoder: Precoder, dims: &Dims) -> Result<DMatrix<Complex64>> {
    let g = ap.entity_matrix(dims.n_unicast);
    match precoder {
        Precoder::Mr => Ok(g),
        Precoder::Zf => {
            let gram = g.adjoint() * &g;
            let eig = gram.clone().symmetric_eigenvalues();
            let (lo, hi) = eig
                .iter()
                .fold((f64::INFINITY, 0f64), |(lo, hi), &l| (lo.min(l), hi.max(l)));
            let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
            if !(cond <= MAX_CONDITION) {
                return Err(Error::SingularGram(cond));
            }
            let inv = gram.cholesky().ok_or(Error::SingularGram(cond))?.inverse();
            Ok(g * inv)
        }
    }
}

/// Running sums of effective gains `G[i, e]` over trials.
#[derive(Debug, Clone)]
struct Accumulator {
    trials: usize,
    sum: DMatrix<Complex64>,
    sum_sq: DMatrix<f64>,
    resampled: usize,
}

impl Accumulator {
    fn new(users: usize, entities: usize) -> Self {
        Accumulator {
            trials: 0,
            sum: DMatrix::zeros(users, entities),
            sum_sq: DMatrix::zeros(users, entities),
            resampled: 0,
        }
    }

    fn merge(&mut self, other: &Accumulator) {
        self.trials += other.trials;
        self.sum += &other.sum;
        self.sum_sq += &other.sum_sq;
        self.resampled += other.resampled;
    }
}

/// Empirical use-and-then-forget terms per receiving user.
#[derive(Debug, Clone)]
pub struct UatfEstimate {
    /// `|E{gain}|²` of the user's own stream.
    pub ds: Vec<f64>,
    /// Variance of the user's own gain.
    pub bu: Vec<f64>,
    /// `E{|gain|²}` from each unicast stream other than the user's own.
    pub ui: Vec<Vec<f64>>,
    /// `E{|gain|²}` from each multicast stream other than the user's own.
    pub mi: Vec<Vec<f64>>,
    pub n_trials: usize,
    /// Draws rejected for an ill-conditioned Gram matrix.
    pub resampled: usize,
    pub se_mc: Vec<f64>,
}

impl UatfEstimate {
    pub fn sinr(&self, i: usize) -> f64 {
        let inter: f64 = self.ui[i].iter().sum::<f64>() + self.mi[i].iter().sum::<f64>();
        self.ds[i] / (self.bu[i] + inter + 1.0)
    }
}

fn run_chunk(
    sampler: &ChannelSampler,
    amp: &DMatrix<f64>,
    precoder: Precoder,
    trials: usize,
    seed: u64,
    chunk: u64,
) -> Accumulator {
    let d = sampler.dims();
    let (users, entities) = (d.n_users(), d.n_entities());
    let mut rng = rng::stream(seed, rng::MONTE_CARLO + chunk);
    let mut acc = Accumulator::new(users, entities);
    let mut gains = DMatrix::<Complex64>::zeros(users, entities);
    while acc.trials < trials {
        let real = sampler.sample(&mut rng);
        gains.fill(Complex64::new(0.0, 0.0));
        let mut ok = true;
        for (n, ap) in real.aps.iter().enumerate() {
            let b = match build_precoders(ap, precoder, d) {
                Ok(b) => b,
                Err(_) => {
                    ok = false;
                    break;
                }
            };
            // h^H b for all (user, entity) pairs
            let inner = ap.h.adjoint() * b;
            for e in 0..entities {
                let s = amp[(n, e)];
                if s != 0.0 {
                    for i in 0..users {
                        gains[(i, e)] += inner[(i, e)] * s;
                    }
                }
            }
        }
        if !ok {
            acc.resampled += 1;
            continue;
        }
        acc.sum += &gains;
        acc.sum_sq += gains.map(|g| g.norm_sqr());
        acc.trials += 1;
    }
    acc
}

/// Simulates `trials` channel draws and estimates every term of the
/// use-and-then-forget bound. Chunks of [`CHUNK`] trials run in parallel on
/// their own RNG streams and are merged in order, so the result depends
/// only on `seed`.
pub fn estimate_uatf_terms(
    cfg: &ValidConfig,
    fading: &LargeScaleFading,
    ap: &AssociationPower,
    precoder: Precoder,
    trials: usize,
    seed: u64,
) -> Result<UatfEstimate> {
    cfg.require(precoder)?;
    if trials < 2 {
        return Err(Error::InvalidConfig("Monte Carlo needs at least 2 trials".into()));
    }
    let d = cfg.dims();
    let sampler = ChannelSampler::new(cfg, fading);
    let p = cfg.p_dl_norm();
    let amp = DMatrix::from_fn(d.n_aps, d.n_entities(), |n, e| {
        if ap.a[(n, e)] {
            (p * ap.eta[(n, e)]).sqrt()
        } else {
            0.0
        }
    });
    let chunks: Vec<(u64, usize)> = (0..trials.div_ceil(CHUNK))
        .map(|k| (k as u64, CHUNK.min(trials - k * CHUNK)))
        .collect();
    let parts: Vec<Accumulator> = chunks
        .par_iter()
        .map(|&(k, t)| run_chunk(&sampler, &amp, precoder, t, seed, k))
        .collect();
    let mut acc = Accumulator::new(d.n_users(), d.n_entities());
    for part in &parts {
        acc.merge(part);
    }

    let t = acc.trials as f64;
    let u = d.n_unicast;
    let mut est = UatfEstimate {
        ds: vec![],
        bu: vec![],
        ui: vec![],
        mi: vec![],
        n_trials: acc.trials,
        resampled: acc.resampled,
        se_mc: vec![],
    };
    for i in 0..d.n_users() {
        let own = d.entity_of_user(i);
        let mean = acc.sum[(i, own)] / t;
        let ds = mean.norm_sqr();
        let bu = ((acc.sum_sq[(i, own)] - t * ds) / (t - 1.0)).max(0.0);
        let second = |e: usize| acc.sum_sq[(i, e)] / t;
        est.ui.push((0..u).filter(|&e| e != own).map(second).collect());
        est.mi
            .push((u..d.n_entities()).filter(|&e| e != own).map(second).collect());
        est.ds.push(ds);
        est.bu.push(bu);
    }
    est.se_mc = (0..d.n_users())
        .map(|i| se_from_sinr(est.sinr(i), cfg.prelog()))
        .collect();
    Ok(est)
}

/// One validation CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationRow {
    pub user_id: String,
    pub kind: UserKind,
    pub precoder: Precoder,
    pub se_closed: f64,
    pub se_mc: f64,
    pub rel_err: f64,
    pub trials: usize,
}

pub fn validation_rows(dims: &Dims, precoder: Precoder, se_closed: &[f64], est: &UatfEstimate) -> Vec<ValidationRow> {
    (0..dims.n_users())
        .map(|i| {
            let (c, m) = (se_closed[i], est.se_mc[i]);
            let rel_err = if c > 0.0 { (m - c).abs() / c } else { (m - c).abs() };
            ValidationRow {
                user_id: dims.user_label(i),
                kind: dims.user_kind(i),
                precoder,
                se_closed: c,
                se_mc: m,
                rel_err,
                trials: est.n_trials,
            }
        })
        .collect()
}

pub const VALIDATION_HEADER: [&str; 7] = ["user_id", "kind", "precoder", "se_closed", "se_mc", "rel_err", "trials"];

pub fn write_validation_csv<W: Write>(out: W, rows: &[ValidationRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(VALIDATION_HEADER)?;
    for r in rows {
        let kind = match r.kind {
            UserKind::Unicast => "unicast",
            UserKind::Multicast => "multicast",
        };
        w.write_record([
            r.user_id.clone(),
            kind.to_string(),
            r.precoder.to_string(),
            format!("{:.10e}", r.se_closed),
            format!("{:.10e}", r.se_mc),
            format!("{:.10e}", r.rel_err),
            r.trials.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
