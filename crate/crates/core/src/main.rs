use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cellfree::experiments::{
    case_study_config, certify_closed_form, run_case_study, run_solver, summarize, write_experiment, write_results,
    ExperimentSpec, Instance, RunOptions, Solver,
};
use cellfree::monte_carlo::write_validation_csv;
use cellfree::network::SystemConfig;
use cellfree::{Precoder, Result};

#[derive(Parser)]
#[command(
    name = "cellfree",
    version,
    about = "Cell-free massive MIMO unicast/multicast simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; desk defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Network seed; defaults to `rng_seed` from the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self, fallback: SystemConfig) -> Result<(SystemConfig, u64)> {
        let cfg = match &self.config {
            Some(p) => SystemConfig::load(p)?,
            None => fallback,
        };
        let seed = self.seed.unwrap_or(cfg.rng_seed);
        Ok((cfg, seed))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Compare closed-form and Monte Carlo SE at equal power.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Both precoders when absent.
        #[arg(long)]
        precoder: Option<Precoder>,
        #[arg(long, default_value_t = 20_000)]
        trials: usize,
    },
    /// Solve one instance and print the solution.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = Precoder::Zf)]
        precoder: Precoder,
        #[arg(long, default_value_t = Solver::Apg)]
        solver: Solver,
        /// Record wall-clock times.
        #[arg(long)]
        timing: bool,
    },
    /// Run an experiment file.
    Sweep {
        spec: PathBuf,
        /// Results path; overrides `output` in the file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        timing: bool,
    },
    /// Per-user SE and association matrices on the five-AP network.
    CaseStudy {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = Precoder::Zf)]
        precoder: Precoder,
        /// Repeat or comma-separate; all four when absent.
        #[arg(long, value_delimiter = ',')]
        solver: Vec<Solver>,
    },
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn validate(common: &Common, precoder: Option<Precoder>, trials: usize) -> Result<()> {
    let (raw, seed) = common.load(SystemConfig::with_users(5, 12, 3, vec![2, 2]))?;
    let cfg = raw.validate(None)?;
    let precoders = match precoder {
        Some(p) => vec![p],
        None => vec![Precoder::Mr, Precoder::Zf],
    };
    let mut rows = Vec::new();
    for p in precoders {
        rows.extend(certify_closed_form(&cfg, seed, p, trials)?);
    }
    let worst = rows.iter().map(|r| r.rel_err).fold(0.0, f64::max);
    write_validation_csv(output(&common.out)?, &rows)?;
    eprintln!("max relative error {worst:.4}");
    Ok(())
}

fn optimize(common: &Common, precoder: Precoder, solver: Solver, timing: bool) -> Result<()> {
    let (raw, seed) = common.load(SystemConfig::desk_default())?;
    let cfg = raw.validate(Some(precoder))?;
    let opts = RunOptions {
        timing,
        ..Default::default()
    };
    let inst = Instance::generate(&cfg, seed);
    let coeffs = inst.coeffs(precoder)?;
    let start = std::time::Instant::now();
    let (rep, iters, final_g) = run_solver(&inst, &coeffs, solver, &opts)?;
    let mut rec = summarize(&cfg, &rep, 0, seed, solver, iters, final_g);
    if timing {
        rec.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    }
    let d = cfg.dims();
    let mut err = std::io::stderr().lock();
    writeln!(
        err,
        "seed {seed} precoder {precoder} solver {solver} status {}",
        rec.status
    )?;
    writeln!(
        err,
        "iters {} final_g {:.6} sse {:.6} min_user_se {:.6}",
        rec.iters, rec.final_g, rec.sse, rec.min_user_se
    )?;
    let res: Vec<String> = rec
        .residuals
        .iter()
        .enumerate()
        .map(|(k, r)| format!("c{}={r:.3e}", k + 1))
        .collect();
    writeln!(err, "residuals {}", res.join(" "))?;
    writeln!(err, "wall_time_ms {:.3}", rec.wall_time_ms)?;
    for i in 0..d.n_users() {
        writeln!(err, "user {:>4} se {:.6}", d.user_label(i), rep.se[i])?;
    }
    writeln!(err, "association (rows: APs, columns: unicast users then groups)")?;
    write!(err, "{}", rep.association_text())?;
    rec.sweep_var = "none".into();
    rec.sweep_value = 0.0;
    write_results(output(&common.out)?, &[rec])
}

fn sweep(path: &Path, out: &Option<PathBuf>, timing: bool) -> Result<()> {
    let mut spec = ExperimentSpec::load(path)?;
    if let Some(o) = out {
        spec.output = o.clone();
    }
    let opts = RunOptions {
        timing,
        ..Default::default()
    };
    let records = cellfree::experiments::run_experiment(&spec, &opts)?;
    let failed = records.iter().filter(|r| !r.is_ok()).count();
    for p in write_experiment(&spec.output, &spec, &records)? {
        eprintln!("wrote {}", p.display());
    }
    eprintln!("{} runs, {failed} failed", records.len());
    Ok(())
}

fn case_study(common: &Common, precoder: Precoder, solvers: &[Solver]) -> Result<()> {
    let (raw, seed) = common.load(case_study_config())?;
    let cfg = raw.validate(Some(precoder))?;
    let solvers = if solvers.is_empty() {
        vec![Solver::Apg, Solver::Sca, Solver::EpaRas, Solver::OpaRas]
    } else {
        solvers.to_vec()
    };
    let study = run_case_study(&cfg, seed, precoder, &solvers, &RunOptions::default())?;
    eprint!("{}", study.association_block());
    study.write_csv(output(&common.out)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Validate {
            common,
            precoder,
            trials,
        } => validate(common, *precoder, *trials),
        Command::Optimize {
            common,
            precoder,
            solver,
            timing,
        } => optimize(common, *precoder, *solver, *timing),
        Command::Sweep { spec, out, timing } => sweep(spec, out, *timing),
        Command::CaseStudy {
            common,
            precoder,
            solver,
        } => case_study(common, *precoder, solver),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
