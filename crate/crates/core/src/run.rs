//! The `solve`, `compare` and `bench` runs behind the command-line tool, and the
//! files they write.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::RunConfig;
use crate::discretisation::DiscretisedProblem;
use crate::eigen::{coupled_residuals, power_iteration, EigenSolveState, MultigridGroupSolver};
use crate::error::{Error, Result};
use crate::field::{norms, GridField};
use crate::geometry::MaterialLayout;
use crate::multigrid::MultigridHierarchy;
use crate::oracle::reference_eigensolve;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    ConfigError = 1,
    NonConvergence = 2,
    ComparisonFailure = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn for_error(e: &Error) -> Self {
        match e {
            Error::NonConvergence(_) => ExitStatus::NonConvergence,
            _ => ExitStatus::ConfigError,
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Interior values, top row first, 17 significant digits.
pub fn flux_csv(field: &GridField) -> String {
    let h = field.halo();
    let mut out = String::with_capacity(field.nx() * field.ny() * 24);
    for j in (h..h + field.ny()).rev() {
        for i in h..h + field.nx() {
            if i > h {
                out.push(',');
            }
            let _ = write!(out, "{:.16e}", field.get(i, j));
        }
        out.push('\n');
    }
    out
}

pub fn history_csv(history: &[(usize, f64)]) -> String {
    let mut out = String::from("power_iter,k_eff\n");
    for (m, k) in history {
        let _ = writeln!(out, "{m},{k:.16e}");
    }
    out
}

/// Result of one eigenvalue pipeline, converged or not.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub state: EigenSolveState,
    pub seconds: f64,
}

fn finish(result: Result<EigenSolveState>, start: Instant) -> Result<PipelineRun> {
    let seconds = start.elapsed().as_secs_f64();
    match result {
        Ok(state) => Ok(PipelineRun { state, seconds }),
        Err(Error::NonConvergence(state)) => Ok(PipelineRun { state: *state, seconds }),
        Err(e) => Err(e),
    }
}

/// Multigrid pipeline; a budget-exhausted run is returned with `converged = false`.
pub fn solve_multigrid(cfg: &RunConfig, problem: &DiscretisedProblem) -> Result<PipelineRun> {
    let start = Instant::now();
    let solver = MultigridGroupSolver::new(problem, cfg.n_levels, cfg.jacobi_iters_per_level, cfg.mg_cycles, cfg.mg_tol)?;
    finish(power_iteration(problem, &solver, &cfg.controls()), start)
}

/// Gauss-Seidel reference pipeline, same power-iteration controls.
pub fn solve_oracle(cfg: &RunConfig, problem: &DiscretisedProblem) -> Result<PipelineRun> {
    let start = Instant::now();
    finish(reference_eigensolve(problem, &cfg.controls(), cfg.gs_tol, cfg.gs_max_iters), start)
}

fn write_fluxes(dir: &Path, state: &EigenSolveState) -> Result<()> {
    for (g, phi) in state.phi.iter().enumerate() {
        write_file(&dir.join(format!("flux_g{}.csv", g + 1)), &flux_csv(phi))?;
    }
    Ok(())
}

fn summary(cfg: &RunConfig, layout: &MaterialLayout, problem: &DiscretisedProblem, run: &PipelineRun) -> Result<String> {
    let s = &run.state;
    let residuals = coupled_residuals(problem, s)?;
    let mut out = String::new();
    let _ = writeln!(out, "config: {}", cfg.path.display());
    let _ = writeln!(out, "scheme: {:?}", cfg.scheme);
    let _ = writeln!(out, "grid: {} x {} cells, dx = {} cm, dy = {} cm", layout.nx, layout.ny, layout.dx, layout.dy);
    let _ = writeln!(out, "groups: {}", problem.n_groups());
    let _ = writeln!(out, "k_eff: {:.12}", s.k_eff);
    let _ = writeln!(out, "converged: {}", s.converged);
    let _ = writeln!(out, "power_iterations: {}", s.counters.power);
    let _ = writeln!(out, "multigroup_iterations: {}", s.counters.multigroup);
    let _ = writeln!(out, "inner_iterations: {}", s.counters.multigrid);
    let _ = writeln!(out, "final_flux_change: {:e}", s.flux_change);
    for (g, r) in residuals.iter().enumerate() {
        let _ = writeln!(out, "relative_residual_g{}: {:e}", g + 1, r);
    }
    let _ = writeln!(out, "seed: {}", cfg.seed);
    let _ = writeln!(out, "wall_seconds: {:.6}", run.seconds);
    Ok(out)
}

/// Solves with the multigrid pipeline and writes `flux_g*.csv`,
/// `keff_history.csv` and `summary.txt` into the output directory.
pub fn run_solve(cfg: &RunConfig) -> Result<(ExitStatus, PipelineRun)> {
    let (layout, problem) = cfg.build_problem()?;
    let run = solve_multigrid(cfg, &problem)?;
    ensure_dir(&cfg.output_dir)?;
    write_file(&cfg.output_dir.join("keff_history.csv"), &history_csv(&run.state.keff_history))?;
    write_fluxes(&cfg.output_dir, &run.state)?;
    write_file(&cfg.output_dir.join("summary.txt"), &summary(cfg, &layout, &problem, &run)?)?;
    let status = if run.state.converged {
        ExitStatus::Success
    } else {
        ExitStatus::NonConvergence
    };
    Ok((status, run))
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub flux_linf: Vec<f64>,
    pub flux_l2: Vec<f64>,
    pub delta_k_eff: f64,
    /// Largest per-step k_eff difference over the common length of the two histories.
    pub history_linf: f64,
    pub history_lengths: (usize, usize),
    pub multigrid: PipelineRun,
    pub oracle: PipelineRun,
}

impl CompareReport {
    pub fn max_flux_linf(&self) -> f64 {
        self.flux_linf.iter().copied().fold(0.0, f64::max)
    }

    pub fn passes(&self, bound: f64) -> bool {
        self.max_flux_linf() <= bound && self.delta_k_eff <= bound
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("metric,group,value\n");
        for (g, v) in self.flux_linf.iter().enumerate() {
            let _ = writeln!(out, "flux_linf,{},{v:.6e}", g + 1);
        }
        for (g, v) in self.flux_l2.iter().enumerate() {
            let _ = writeln!(out, "flux_l2,{},{v:.6e}", g + 1);
        }
        let _ = writeln!(out, "delta_k_eff,all,{:.6e}", self.delta_k_eff);
        let _ = writeln!(out, "history_linf,all,{:.6e}", self.history_linf);
        out
    }
}

/// Runs both pipelines on the same discretised problem and measures their differences.
pub fn compare_pipelines(cfg: &RunConfig, problem: &DiscretisedProblem) -> Result<CompareReport> {
    let multigrid = solve_multigrid(cfg, problem)?;
    let oracle = solve_oracle(cfg, problem)?;
    let (a, b) = (&multigrid.state, &oracle.state);
    let mut flux_linf = Vec::new();
    let mut flux_l2 = Vec::new();
    for (pa, pb) in a.phi.iter().zip(&b.phi) {
        let n = norms(&pa.sub_interior(pb)?);
        flux_linf.push(n.linf);
        flux_l2.push(n.l2);
    }
    let common = a.keff_history.len().min(b.keff_history.len());
    let mut history_linf = 0.0f64;
    for m in 0..common {
        history_linf = history_linf.max((a.keff_history[m].1 - b.keff_history[m].1).abs());
    }
    if a.keff_history.len() != b.keff_history.len() {
        history_linf = f64::INFINITY;
    }
    Ok(CompareReport {
        flux_linf,
        flux_l2,
        delta_k_eff: (a.k_eff - b.k_eff).abs(),
        history_linf,
        history_lengths: (a.keff_history.len(), b.keff_history.len()),
        multigrid,
        oracle,
    })
}

/// Writes `compare_report.csv`; success iff both the flux and k_eff differences are within the bound.
pub fn run_compare(cfg: &RunConfig) -> Result<(ExitStatus, CompareReport)> {
    let (_, problem) = cfg.build_problem()?;
    let report = compare_pipelines(cfg, &problem)?;
    ensure_dir(&cfg.output_dir)?;
    write_file(&cfg.output_dir.join("compare_report.csv"), &report.csv())?;
    let status = if !report.multigrid.state.converged || !report.oracle.state.converged {
        ExitStatus::NonConvergence
    } else if report.passes(cfg.compare_bound) {
        ExitStatus::Success
    } else {
        ExitStatus::ComparisonFailure
    };
    Ok((status, report))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub seconds: Vec<f64>,
}

impl BenchReport {
    pub fn min(&self) -> f64 {
        self.seconds.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.seconds.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        // clamped so rounding in the sum cannot push it outside [min, max]
        let m = self.seconds.iter().sum::<f64>() / self.seconds.len() as f64;
        m.clamp(self.min(), self.max())
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("repeat_index,seconds\n");
        for (r, s) in self.seconds.iter().enumerate() {
            let _ = writeln!(out, "{r},{s:.9}");
        }
        let _ = writeln!(out, "min,max,mean");
        let _ = writeln!(out, "{:.9},{:.9},{:.9}", self.min(), self.max(), self.mean());
        out
    }
}

/// Times `jacobi_iters` Jacobi steps on every group of the finest grid, `repeats` times.
pub fn bench_problem(problem: &DiscretisedProblem, jacobi_iters: usize, repeats: usize) -> Result<BenchReport> {
    let levels = problem
        .groups
        .iter()
        .map(|op| MultigridHierarchy::new(op.clone(), 1, jacobi_iters))
        .collect::<Result<Vec<_>>>()?;
    let source = GridField::interior_constant(problem.nx(), problem.ny(), problem.halo(), 1.0);
    let mut seconds = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        for h in &levels {
            let mut phi = source.zeros_like();
            for _ in 0..jacobi_iters {
                phi = h.jacobi(0, &phi, &source)?;
            }
            std::hint::black_box(&phi);
        }
        seconds.push(start.elapsed().as_secs_f64());
    }
    Ok(BenchReport { seconds })
}

pub fn run_bench(cfg: &RunConfig) -> Result<(ExitStatus, BenchReport)> {
    let (_, problem) = cfg.build_problem()?;
    let report = bench_problem(&problem, cfg.bench_jacobi_iters, cfg.bench_repeats)?;
    ensure_dir(&cfg.output_dir)?;
    write_file(&cfg.output_dir.join("bench.csv"), &report.csv())?;
    Ok((ExitStatus::Success, report))
}

/// Output directory override helper for callers that build configs in code.
pub fn with_output_dir(cfg: &RunConfig, dir: impl Into<PathBuf>) -> RunConfig {
    RunConfig {
        output_dir: dir.into(),
        ..cfg.clone()
    }
}
