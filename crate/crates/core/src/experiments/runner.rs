//! Sweeps over configurations, seeds, precoders and solvers.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::baselines::{baseline_epa_ras, baseline_opa_ras};
use super::instance::Instance;
use crate::apg::{apg_solve, extract_solution, PenaltyConfig, SolutionReport, QOS_SLACK};
use crate::closed_form::{epa_point, CoeffTable};
use crate::error::{Error, Result};
use crate::network::{ConfigFile, SystemConfig, ValidConfig};
use crate::rng;
use crate::sca::{sca_solve, ScaOptions};
use crate::system::{Precoder, UserKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Solver {
    #[serde(rename = "apg")]
    Apg,
    #[serde(rename = "sca")]
    Sca,
    #[serde(rename = "epa_ras", alias = "epa-ras")]
    EpaRas,
    #[serde(rename = "opa_ras", alias = "opa-ras")]
    OpaRas,
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Solver::Apg => "apg",
            Solver::Sca => "sca",
            Solver::EpaRas => "epa_ras",
            Solver::OpaRas => "opa_ras",
        })
    }
}

impl FromStr for Solver {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "apg" => Ok(Solver::Apg),
            "sca" => Ok(Solver::Sca),
            "epa_ras" => Ok(Solver::EpaRas),
            "opa_ras" => Ok(Solver::OpaRas),
            other => Err(format!(
                "unknown solver `{other}` (expected apg, sca, epa-ras or opa-ras)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    NAps,
    Antennas,
    /// Total multicast users, spread as evenly as possible over the groups.
    NMulticastUsers,
    NUnicastUsers,
    /// `w1`; `w2 = 1 - w1`.
    Weights,
}

impl fmt::Display for SweepVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepVar::NAps => "n_aps",
            SweepVar::Antennas => "antennas",
            SweepVar::NMulticastUsers => "n_multicast_users",
            SweepVar::NUnicastUsers => "n_unicast_users",
            SweepVar::Weights => "weights",
        })
    }
}

fn as_count(value: f64, what: SweepVar) -> Result<usize> {
    if value >= 0.0 && value.fract() == 0.0 && value < 1e9 {
        Ok(value as usize)
    } else {
        Err(Error::InvalidConfig(format!(
            "{what} needs whole numbers (got {value})"
        )))
    }
}

impl SweepVar {
    /// `base` with this variable set to `value`. Derived defaults such as the
    /// pilot length follow the new user counts unless `base` fixes them.
    pub fn apply(self, base: &ConfigFile, value: f64) -> Result<SystemConfig> {
        let mut c = base.clone();
        match self {
            SweepVar::NAps => c.n_aps = Some(as_count(value, self)?),
            SweepVar::Antennas => c.antennas_per_ap = Some(as_count(value, self)?),
            SweepVar::NUnicastUsers => c.n_unicast = Some(as_count(value, self)?),
            SweepVar::NMulticastUsers => {
                let total = as_count(value, self)?;
                let m = base.resolve()?.n_groups;
                if m == 0 || total < m {
                    return Err(Error::InvalidConfig(format!(
                        "{total} multicast users cannot fill {m} groups"
                    )));
                }
                c.group_sizes = Some((0..m).map(|g| total / m + usize::from(g < total % m)).collect());
                c.n_groups = Some(m);
            }
            SweepVar::Weights => {
                c.w1 = Some(value);
                c.w2 = Some(1.0 - value);
            }
        }
        c.resolve()
    }
}

/// A sweep read from a TOML file. `base` holds configuration keys; missing
/// keys take the desk defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub sweep_var: SweepVar,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
    pub precoders: Vec<Precoder>,
    pub solvers: Vec<Solver>,
    pub output: PathBuf,
    #[serde(default)]
    pub base: ConfigFile,
}

impl FromStr for ExperimentSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let spec: ExperimentSpec = toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        spec.check()?;
        Ok(spec)
    }
}

impl ExperimentSpec {
    pub fn load(path: &Path) -> Result<Self> {
        std::fs::read_to_string(path)?.parse()
    }

    pub fn check(&self) -> Result<()> {
        for (name, empty) in [
            ("values", self.values.is_empty()),
            ("seeds", self.seeds.is_empty()),
            ("precoders", self.precoders.is_empty()),
            ("solvers", self.solvers.is_empty()),
        ] {
            if empty {
                return Err(Error::InvalidConfig(format!(
                    "experiment needs at least one entry in `{name}`"
                )));
            }
        }
        Ok(())
    }

    pub fn n_runs(&self) -> usize {
        self.values.len() * self.seeds.len() * self.precoders.len() * self.solvers.len()
    }
}

/// Knobs shared by every run of an experiment.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub penalty: PenaltyConfig,
    pub sca: ScaOptions,
    /// Record wall-clock times. Off by default so result files are
    /// reproducible byte for byte.
    pub timing: bool,
}

/// Outcome of one solver on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run_id: usize,
    pub sweep_var: String,
    pub sweep_value: f64,
    pub seed: u64,
    pub precoder: Precoder,
    pub solver: Solver,
    pub sse: f64,
    pub se_min_unicast: f64,
    pub se_min_multicast: f64,
    pub min_user_se: f64,
    pub qos_violations: usize,
    pub residuals: [f64; 6],
    pub iters: usize,
    /// Final penalized objective for the iterative solvers, `-SSE` otherwise.
    pub final_g: f64,
    pub wall_time_ms: f64,
    pub status: String,
}

pub const RESULT_HEADER: [&str; 14] = [
    "run_id",
    "sweep_var",
    "sweep_value",
    "seed",
    "precoder",
    "solver",
    "sse",
    "se_min_unicast",
    "se_min_multicast",
    "qos_violations",
    "fronthaul_residual",
    "iters",
    "wall_time_ms",
    "status",
];

fn num(x: f64) -> String {
    format!("{x:.10e}")
}

impl RunRecord {
    fn failed(run_id: usize, solver: Solver, precoder: Precoder, seed: u64, err: &Error) -> Self {
        RunRecord {
            run_id,
            sweep_var: String::new(),
            sweep_value: f64::NAN,
            seed,
            precoder,
            solver,
            sse: f64::NAN,
            se_min_unicast: f64::NAN,
            se_min_multicast: f64::NAN,
            min_user_se: f64::NAN,
            qos_violations: 0,
            residuals: [f64::NAN; 6],
            iters: 0,
            final_g: f64::NAN,
            wall_time_ms: 0.0,
            status: format!("error: {err}"),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok" || self.status == "qos_infeasible"
    }

    fn csv_fields(&self) -> [String; 14] {
        [
            self.run_id.to_string(),
            self.sweep_var.clone(),
            self.sweep_value.to_string(),
            self.seed.to_string(),
            self.precoder.to_string(),
            self.solver.to_string(),
            num(self.sse),
            num(self.se_min_unicast),
            num(self.se_min_multicast),
            self.qos_violations.to_string(),
            num(self.residuals[3]),
            self.iters.to_string(),
            format!("{:.3}", self.wall_time_ms),
            self.status.clone(),
        ]
    }
}

/// Runs `solver` on one instance.
pub fn run_solver(
    inst: &Instance,
    coeffs: &CoeffTable,
    solver: Solver,
    opts: &RunOptions,
) -> Result<(SolutionReport, usize, f64)> {
    let cfg = &inst.cfg;
    Ok(match solver {
        Solver::Apg => {
            let out = apg_solve(cfg, coeffs, &opts.penalty, &epa_point(coeffs))?;
            (extract_solution(&out.vars, cfg, coeffs), out.iters, out.g)
        }
        Solver::Sca => {
            let out = sca_solve(cfg, coeffs, &epa_point(coeffs), &opts.sca)?;
            let g = out.objective_history.last().copied().unwrap_or(f64::NAN);
            (out.report, out.iters, g)
        }
        Solver::EpaRas => {
            let rep = baseline_epa_ras(cfg, coeffs, &mut rng::stream(inst.seed, rng::ASSOCIATION));
            let g = -rep.sse;
            (rep, 0, g)
        }
        Solver::OpaRas => {
            let mut r = rng::stream(inst.seed, rng::ASSOCIATION);
            let (rep, out) = baseline_opa_ras(cfg, coeffs, &opts.penalty, &mut r)?;
            (rep, out.iters, out.g)
        }
    })
}

/// Generates the instance for `seed`, runs `solver` and summarizes. Errors
/// become a record with an `error: ..` status.
pub fn run_one(
    cfg: &ValidConfig,
    run_id: usize,
    seed: u64,
    precoder: Precoder,
    solver: Solver,
    opts: &RunOptions,
) -> RunRecord {
    let start = Instant::now();
    let attempt = || -> Result<RunRecord> {
        cfg.require(precoder)?;
        let inst = Instance::generate(cfg, seed);
        let coeffs = inst.coeffs(precoder)?;
        let (rep, iters, final_g) = run_solver(&inst, &coeffs, solver, opts)?;
        Ok(summarize(cfg, &rep, run_id, seed, solver, iters, final_g))
    };
    let mut rec = attempt().unwrap_or_else(|e| RunRecord::failed(run_id, solver, precoder, seed, &e));
    if opts.timing {
        rec.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    }
    rec
}

pub fn summarize(
    cfg: &ValidConfig,
    rep: &SolutionReport,
    run_id: usize,
    seed: u64,
    solver: Solver,
    iters: usize,
    final_g: f64,
) -> RunRecord {
    let d = cfg.dims();
    let min_of = |kind: UserKind| {
        (0..d.n_users())
            .filter(|&i| d.user_kind(i) == kind)
            .map(|i| rep.se[i])
            .fold(f64::NAN, f64::min)
    };
    let qos_violations = (0..d.n_users())
        .filter(|&i| rep.se[i] < cfg.qos_of_user(i) - QOS_SLACK)
        .count();
    RunRecord {
        run_id,
        sweep_var: String::new(),
        sweep_value: f64::NAN,
        seed,
        precoder: rep.precoder,
        solver,
        sse: rep.sse,
        se_min_unicast: min_of(UserKind::Unicast),
        se_min_multicast: min_of(UserKind::Multicast),
        min_user_se: rep.min_user_se(),
        qos_violations,
        residuals: rep.residuals,
        iters,
        final_g,
        wall_time_ms: 0.0,
        status: if rep.qos_infeasible { "qos_infeasible" } else { "ok" }.into(),
    }
}

/// All runs of `spec`, in the order values × seeds × precoders × solvers.
/// Runs execute in parallel; the result order does not depend on
/// scheduling.
pub fn run_experiment(spec: &ExperimentSpec, opts: &RunOptions) -> Result<Vec<RunRecord>> {
    spec.check()?;
    let mut jobs = Vec::with_capacity(spec.n_runs());
    for &value in &spec.values {
        for &seed in &spec.seeds {
            for &precoder in &spec.precoders {
                for &solver in &spec.solvers {
                    jobs.push((value, seed, precoder, solver));
                }
            }
        }
    }
    let records = jobs
        .into_par_iter()
        .enumerate()
        .map(|(run_id, (value, seed, precoder, solver))| {
            let cfg = spec.sweep_var.apply(&spec.base, value).and_then(|c| c.validate(None));
            let mut rec = match cfg {
                Ok(cfg) => run_one(&cfg, run_id, seed, precoder, solver, opts),
                Err(e) => RunRecord::failed(run_id, solver, precoder, seed, &e),
            };
            rec.sweep_var = spec.sweep_var.to_string();
            rec.sweep_value = value;
            rec
        })
        .collect();
    Ok(records)
}

pub fn write_results<W: Write>(out: W, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULT_HEADER)?;
    for r in records {
        w.write_record(r.csv_fields())?;
    }
    w.flush()?;
    Ok(())
}

/// One line per (value, precoder, solver) over the successful runs.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub sweep_var: String,
    pub sweep_value: f64,
    pub precoder: Precoder,
    pub solver: Solver,
    pub runs: usize,
    pub failed: usize,
    pub mean_sse: f64,
    /// Sample standard deviation, `NaN` for fewer than two runs.
    pub std_sse: f64,
    pub mean_qos_violations: f64,
}

fn groups(records: &[RunRecord]) -> Vec<Vec<&RunRecord>> {
    let mut out: Vec<Vec<&RunRecord>> = Vec::new();
    for r in records {
        let key = |x: &RunRecord| (x.sweep_value.to_bits(), x.precoder, x.solver);
        match out.iter_mut().find(|g| key(g[0]) == key(r)) {
            Some(g) => g.push(r),
            None => out.push(vec![r]),
        }
    }
    out
}

pub fn summarize_runs(records: &[RunRecord]) -> Vec<SummaryRow> {
    groups(records)
        .into_iter()
        .map(|g| {
            let ok: Vec<&RunRecord> = g.iter().copied().filter(|r| r.is_ok()).collect();
            let n = ok.len() as f64;
            let mean = ok.iter().map(|r| r.sse).sum::<f64>() / n;
            let var = ok.iter().map(|r| (r.sse - mean).powi(2)).sum::<f64>() / (n - 1.0);
            SummaryRow {
                sweep_var: g[0].sweep_var.clone(),
                sweep_value: g[0].sweep_value,
                precoder: g[0].precoder,
                solver: g[0].solver,
                runs: ok.len(),
                failed: g.len() - ok.len(),
                mean_sse: mean,
                std_sse: if ok.len() > 1 { var.sqrt() } else { f64::NAN },
                mean_qos_violations: ok.iter().map(|r| r.qos_violations as f64).sum::<f64>() / n,
            }
        })
        .collect()
}

pub fn write_summary<W: Write>(out: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "sweep_var",
        "sweep_value",
        "precoder",
        "solver",
        "runs",
        "failed",
        "mean_sse",
        "std_sse",
        "mean_qos_violations",
    ])?;
    for r in rows {
        w.write_record([
            r.sweep_var.clone(),
            r.sweep_value.to_string(),
            r.precoder.to_string(),
            r.solver.to_string(),
            r.runs.to_string(),
            r.failed.to_string(),
            num(r.mean_sse),
            num(r.std_sse),
            num(r.mean_qos_violations),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Knots of the empirical CDF of successful-run SSE per group: the `k`-th
/// smallest value carries probability `k / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfKnot {
    pub sweep_value: f64,
    pub precoder: Precoder,
    pub solver: Solver,
    pub sse: f64,
    pub cdf: f64,
}

pub fn empirical_cdf(records: &[RunRecord]) -> Vec<CdfKnot> {
    let mut out = Vec::new();
    for g in groups(records) {
        let mut v: Vec<f64> = g.iter().filter(|r| r.is_ok()).map(|r| r.sse).collect();
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        for (k, sse) in v.into_iter().enumerate() {
            out.push(CdfKnot {
                sweep_value: g[0].sweep_value,
                precoder: g[0].precoder,
                solver: g[0].solver,
                sse,
                cdf: (k + 1) as f64 / n,
            });
        }
    }
    out
}

pub fn write_cdf<W: Write>(out: W, sweep_var: &str, knots: &[CdfKnot]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sweep_var", "sweep_value", "precoder", "solver", "sse", "cdf"])?;
    for k in knots {
        w.write_record([
            sweep_var.to_string(),
            k.sweep_value.to_string(),
            k.precoder.to_string(),
            k.solver.to_string(),
            num(k.sse),
            num(k.cdf),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `results.csv` -> `results_summary.csv`.
pub fn sibling_path(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ext = path
        .extension()
        .map(|e| e.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    path.with_file_name(format!("{stem}_{suffix}.{ext}"))
}

/// Writes the results, summary and CDF files; returns their paths.
pub fn write_experiment(path: &Path, spec: &ExperimentSpec, records: &[RunRecord]) -> Result<[PathBuf; 3]> {
    let summary = sibling_path(path, "summary");
    let cdf = sibling_path(path, "cdf");
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_results(std::fs::File::create(path)?, records)?;
    write_summary(std::fs::File::create(&summary)?, &summarize_runs(records))?;
    write_cdf(
        std::fs::File::create(&cdf)?,
        &spec.sweep_var.to_string(),
        &empirical_cdf(records),
    )?;
    Ok([path.to_path_buf(), summary, cdf])
}
