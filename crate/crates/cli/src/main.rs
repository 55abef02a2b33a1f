use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use nshomog::config::RunConfig;
use nshomog::harness::{convergence_sweep, run_ensemble, write_stats_csv, Harness, SweepOptions};
use nshomog::integrator::simulate_path;
use nshomog::io::write_bytes_atomic;
use nshomog::verify::{all_passed, identity_suite, verify_suite, Check};
use nshomog::Error;

/// Stochastic Navier–Stokes with oscillating coefficients and its homogenized limit.
#[derive(Parser, Debug)]
#[command(name = "nshomog", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML configuration; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Overrides `simulation.eps` (must be 1/n).
    #[arg(long, global = true)]
    eps: Option<f64>,

    /// Overrides `harness.members`.
    #[arg(long, global = true)]
    members: Option<usize>,

    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = "NSHOMOG_THREADS")]
    threads: Option<usize>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One path; writes trajectory.csv and terminal.json.
    Simulate,
    /// Moment estimates over an ensemble; writes stats.csv.
    Ensemble,
    /// Oscillating vs effective over the ε list; writes sweep.csv and stats.csv.
    Sweep,
    /// Moment, Hölder and term-limit gates; writes report.txt, hoelder.csv, sweep.csv, stats.csv.
    Verify,
    /// Spectral and advection identity suite; writes identities.txt.
    Identities,
}

enum Failure {
    Invalid(anyhow::Error),
    Diverged(anyhow::Error),
    Gates,
    Other(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_divergence() {
            Failure::Diverged(e.into())
        } else {
            match e {
                Error::Io(_) | Error::Csv(_) | Error::Json(_) => Failure::Other(e.into()),
                _ => Failure::Invalid(e.into()),
            }
        }
    }
}

fn load(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display())).map_err(Failure::Invalid)?;
            RunConfig::from_toml(&text).map_err(|e| Failure::Invalid(anyhow::Error::new(e).context(format!("in {}", p.display()))))?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(e) = cli.eps {
        cfg.simulation.eps = e;
    }
    if let Some(m) = cli.members {
        cfg.harness.members = m;
    }
    if let Some(t) = cli.threads {
        cfg.harness.threads = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report(path: &Path, checks: &[Check]) -> Result<(), Failure> {
    let mut text = String::new();
    for c in checks {
        println!("{c}");
        text.push_str(&format!("{c}\n"));
    }
    write_bytes_atomic(path, text.as_bytes())?;
    if all_passed(checks) {
        Ok(())
    } else {
        Err(Failure::Gates)
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = load(cli)?;
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display())).map_err(Failure::Other)?;
    let out = |name: &str| cli.out.join(name);
    let h = Harness::new(cfg.threads())?;
    let sim = cfg.simulation()?;
    match cli.command {
        Command::Simulate => {
            let path = simulate_path(&sim)?;
            path.trajectory.write_csv(&out("trajectory.csv"))?;
            let json = serde_json::to_vec_pretty(&path.terminal.to_json()).map_err(Error::from)?;
            write_bytes_atomic(&out("terminal.json"), &json)?;
        }
        Command::Ensemble => {
            let stats = run_ensemble(&h, &sim, cfg.harness.members)?;
            write_stats_csv(&out("stats.csv"), &[stats])?;
        }
        Command::Sweep => {
            let opt = SweepOptions { members: cfg.harness.members, coupled: cfg.harness.coupled, permutations: cfg.harness.permutations };
            let sweep = convergence_sweep(&h, &sim, &cfg.eps_list()?, &opt)?;
            sweep.write_csv(&out("sweep.csv"))?;
            write_stats_csv(&out("stats.csv"), &sweep.stats)?;
        }
        Command::Verify => {
            let r = verify_suite(&h, &sim, &cfg.eps_list()?, cfg.harness.members, cfg.harness.permutations, &cfg.harness.hoelder_dt)?;
            r.sweep.write_csv(&out("sweep.csv"))?;
            write_stats_csv(&out("stats.csv"), &r.sweep.stats)?;
            r.hoelder.write_csv(&out("hoelder.csv"))?;
            for (eps, d, p) in &r.limits.sigma_law {
                log::info!("sigma law at eps = {eps}: distance {d:.3e}, p = {p:.3}");
            }
            report(&out("report.txt"), &r.checks)?;
        }
        Command::Identities => {
            report(&out("identities.txt"), &identity_suite(cfg.seed, 500)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).format_timestamp(None).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Diverged(e)) => {
            eprintln!("diverged: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Gates) => {
            eprintln!("verification gates failed");
            ExitCode::from(3)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
