use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use nconv::config::RunConfig;
use nconv::geometry::parse_core_map;
use nconv::run::{run_bench, run_compare, run_solve, ExitStatus};

#[derive(Parser)]
#[command(name = "nconv", version, about = "Multigroup neutron diffusion k_eff solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for k_eff and write fluxes, history and a summary.
    Solve {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the multigrid and Gauss-Seidel pipelines and report their differences.
    Compare {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Time repeated Jacobi sweeps over every group.
    Bench {
        config: PathBuf,
        #[arg(long)]
        repeats: Option<usize>,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// fv | convfem
    #[arg(long)]
    scheme: Option<String>,
    /// withdrawn | inserted
    #[arg(long)]
    rods: Option<String>,
    /// Quarter-core rod map, e.g. WWI/WIW/IWW (top row first)
    #[arg(long)]
    core_map: Option<String>,
}

fn load(path: &PathBuf, o: &Overrides) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(dir) = &o.output_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(s) = &o.scheme {
        cfg.scheme = s.parse().map_err(anyhow::Error::msg).context("--scheme")?;
    }
    if let Some(r) = &o.rods {
        cfg.rods = r.parse().map_err(anyhow::Error::msg).context("--rods")?;
    }
    if let Some(m) = &o.core_map {
        cfg.core_map = Some(parse_core_map(m).map_err(anyhow::Error::msg).context("--core-map")?);
    }
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<ExitStatus> {
    match cli.command {
        Command::Solve { config, overrides } => {
            let cfg = load(&config, &overrides)?;
            let (status, run) = run_solve(&cfg)?;
            let s = &run.state;
            println!("k_eff = {:.10}", s.k_eff);
            println!(
                "power iterations = {}, converged = {}, wall time = {:.3} s",
                s.counters.power, s.converged, run.seconds
            );
            println!("output written to {}", cfg.output_dir.display());
            if status == ExitStatus::NonConvergence {
                eprintln!("error: power iteration did not converge within {} iterations", s.counters.power);
            }
            Ok(status)
        }
        Command::Compare { config, overrides } => {
            let cfg = load(&config, &overrides)?;
            let (status, report) = run_compare(&cfg)?;
            println!("k_eff multigrid = {:.12}", report.multigrid.state.k_eff);
            println!("k_eff oracle    = {:.12}", report.oracle.state.k_eff);
            println!("|delta k_eff|   = {:e}", report.delta_k_eff);
            println!("max flux linf   = {:e} (bound {:e})", report.max_flux_linf(), cfg.compare_bound);
            match status {
                ExitStatus::ComparisonFailure => eprintln!("error: pipelines differ by more than the bound"),
                ExitStatus::NonConvergence => eprintln!("error: a pipeline did not converge"),
                _ => {}
            }
            Ok(status)
        }
        Command::Bench {
            config,
            repeats,
            overrides,
        } => {
            let mut cfg = load(&config, &overrides)?;
            if let Some(r) = repeats {
                anyhow::ensure!(r >= 1, "--repeats must be at least 1");
                cfg.bench_repeats = r;
            }
            let (status, report) = run_bench(&cfg)?;
            println!(
                "{} repeats: min {:.6} s, max {:.6} s, mean {:.6} s",
                report.seconds.len(),
                report.min(),
                report.max(),
                report.mean()
            );
            Ok(status)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(status) => ExitCode::from(status.code() as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            let status = e
                .downcast_ref::<nconv::Error>()
                .map_or(ExitStatus::ConfigError, ExitStatus::for_error);
            ExitCode::from(status.code() as u8)
        }
    }
}
