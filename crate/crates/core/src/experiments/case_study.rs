//! Per-user SE and association matrices on one small network.

use std::io::Write;

use super::instance::Instance;
use super::runner::{run_solver, RunOptions, Solver};
use crate::apg::SolutionReport;
use crate::error::Result;
use crate::network::{SystemConfig, ValidConfig};
use crate::system::{Precoder, UserKind};

/// Five APs serving three unicast users and three groups of two.
pub fn case_study_config() -> SystemConfig {
    SystemConfig::with_users(5, 12, 3, vec![2, 2, 2])
}

#[derive(Debug, Clone)]
pub struct CaseStudy {
    pub cfg: ValidConfig,
    pub seed: u64,
    pub precoder: Precoder,
    pub reports: Vec<(Solver, SolutionReport)>,
}

pub fn run_case_study(
    cfg: &ValidConfig,
    seed: u64,
    precoder: Precoder,
    solvers: &[Solver],
    opts: &RunOptions,
) -> Result<CaseStudy> {
    cfg.require(precoder)?;
    let inst = Instance::generate(cfg, seed);
    let coeffs = inst.coeffs(precoder)?;
    let mut reports = Vec::with_capacity(solvers.len());
    for &s in solvers {
        let (rep, _, _) = run_solver(&inst, &coeffs, s, opts)?;
        reports.push((s, rep));
    }
    Ok(CaseStudy {
        cfg: cfg.clone(),
        seed,
        precoder,
        reports,
    })
}

impl CaseStudy {
    /// One row per (solver, user).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let d = self.cfg.dims();
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["seed", "precoder", "solver", "user_id", "kind", "se"])?;
        for (solver, rep) in &self.reports {
            for i in 0..d.n_users() {
                let kind = match d.user_kind(i) {
                    UserKind::Unicast => "unicast",
                    UserKind::Multicast => "multicast",
                };
                w.write_record([
                    self.seed.to_string(),
                    self.precoder.to_string(),
                    solver.to_string(),
                    d.user_label(i),
                    kind.to_string(),
                    format!("{:.10e}", rep.se[i]),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Association matrix of every solver, with its SSE.
    pub fn association_block(&self) -> String {
        let mut out = String::new();
        for (solver, rep) in &self.reports {
            out.push_str(&format!("# {solver} ({}) SSE = {:.4}\n", self.precoder, rep.sse));
            out.push_str(&rep.association_text());
        }
        out
    }
}
