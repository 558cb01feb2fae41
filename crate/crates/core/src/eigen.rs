//! Multigroup source assembly, group sweeps and the outer power iteration for k_eff.

use rayon::prelude::*;

use crate::discretisation::DiscretisedProblem;
use crate::error::{Error, Result};
use crate::field::{fill_interior, norms, GridField};
use crate::multigrid::MultigridHierarchy;

/// Order in which group fluxes feed each other's scattering sources within a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SweepMode {
    /// Groups solved in order, each using the freshest fluxes of the groups before it.
    #[default]
    GaussSeidel,
    /// Every group uses the previous sweep's fluxes; groups are solved concurrently.
    Jacobi,
}

impl std::str::FromStr for SweepMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gauss_seidel" | "gauss-seidel" | "gs" => Ok(SweepMode::GaussSeidel),
            "jacobi" => Ok(SweepMode::Jacobi),
            other => Err(format!("unknown multigroup mode '{other}' (expected gauss_seidel or jacobi)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerControls {
    pub max_power_iters: usize,
    pub k_tol: f64,
    pub flux_tol: f64,
    pub sweeps_per_power_iter: usize,
    pub mode: SweepMode,
}

impl Default for PowerControls {
    fn default() -> Self {
        Self {
            max_power_iters: 100,
            k_tol: 1e-10,
            flux_tol: 1e-10,
            sweeps_per_power_iter: 1,
            mode: SweepMode::GaussSeidel,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IterationCounters {
    pub power: usize,
    pub multigroup: usize,
    /// Inner single-group iterations (multigrid cycles or Gauss-Seidel sweeps).
    pub multigrid: usize,
}

#[derive(Debug, Clone)]
pub struct EigenSolveState {
    pub phi: Vec<GridField>,
    pub k_eff: f64,
    /// Fission source used in the last power step.
    pub fission_source: Vec<GridField>,
    /// `(power step, k_eff)` after each step, steps numbered from 1.
    pub keff_history: Vec<(usize, f64)>,
    pub counters: IterationCounters,
    pub converged: bool,
    /// Max interior flux change over groups in the last step.
    pub flux_change: f64,
}

/// Solves one group's linear system for a given source.
pub trait GroupSolver: Sync {
    /// Returns the new flux and the number of inner iterations spent.
    fn solve_group(&self, g: usize, phi0: &GridField, source: &GridField) -> Result<(GridField, usize)>;
}

/// Sawtooth multigrid per group, stopped by a cycle cap or a relative residual tolerance.
#[derive(Debug, Clone)]
pub struct MultigridGroupSolver {
    pub hierarchies: Vec<MultigridHierarchy>,
    pub max_cycles: usize,
    pub tol: f64,
}

impl MultigridGroupSolver {
    pub fn new(
        problem: &DiscretisedProblem,
        n_levels: usize,
        jacobi_iters_per_level: usize,
        max_cycles: usize,
        tol: f64,
    ) -> Result<Self> {
        let hierarchies = problem
            .groups
            .iter()
            .map(|op| MultigridHierarchy::new(op.clone(), n_levels, jacobi_iters_per_level))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            hierarchies,
            max_cycles,
            tol,
        })
    }
}

impl GroupSolver for MultigridGroupSolver {
    fn solve_group(&self, g: usize, phi0: &GridField, source: &GridField) -> Result<(GridField, usize)> {
        let out = self.hierarchies[g].solve(phi0, source, self.max_cycles, self.tol)?;
        Ok((out.phi, out.cycles))
    }
}

/// `sum_{g'} sigma_s[g'][g] . phi_{g'} + fission_g`, summed over `g'` ascending.
///
/// In Gauss-Seidel mode groups `g' < g` come from `phi_new`, the rest from
/// `phi_old`; in Jacobi mode everything comes from `phi_old`.
pub fn assemble_group_source(
    g: usize,
    phi_new: &[GridField],
    phi_old: &[GridField],
    fission_g: &GridField,
    scatter: &[Vec<Option<GridField>>],
    mode: SweepMode,
) -> Result<GridField> {
    let mut terms: Vec<(&[f64], &[f64])> = Vec::new();
    for (from, row) in scatter.iter().enumerate() {
        let Some(sigma) = row.get(g).and_then(|s| s.as_ref()) else {
            continue;
        };
        let phi = if mode == SweepMode::GaussSeidel && from < g {
            &phi_new[from]
        } else {
            &phi_old[from]
        };
        sigma.check_layout(phi, "group source")?;
        fission_g.check_layout(phi, "group source")?;
        terms.push((sigma.values(), phi.values()));
    }
    let fv = fission_g.values();
    let mut out = fission_g.zeros_like();
    fill_interior(&mut out, |k| {
        let mut acc = 0.0;
        for (s, p) in &terms {
            acc += s[k] * p[k];
        }
        acc + fv[k]
    });
    Ok(out)
}

/// Cellwise `sum_g nu_sigma_f_g . phi_g`, groups ascending.
fn production_density(phi: &[GridField], nu_sigma_f: &[GridField]) -> GridField {
    let mut out = phi[0].zeros_like();
    fill_interior(&mut out, |k| {
        let mut acc = 0.0;
        for (n, p) in nu_sigma_f.iter().zip(phi) {
            acc += n.values()[k] * p.values()[k];
        }
        acc
    });
    out
}

/// `lambda chi_g . sum_{g'} nu_sigma_f_{g'} . phi_{g'}` for every group.
pub fn fission_source(
    phi: &[GridField],
    nu_sigma_f: &[GridField],
    chi: &[GridField],
    lambda: f64,
) -> Result<Vec<GridField>> {
    for f in nu_sigma_f.iter().chain(chi).chain(phi) {
        f.check_layout(&phi[0], "fission source")?;
    }
    let p = production_density(phi, nu_sigma_f);
    let pv = p.values();
    Ok(chi
        .iter()
        .map(|c| {
            let cv = c.values();
            let mut out = p.zeros_like();
            fill_interior(&mut out, |k| lambda * cv[k] * pv[k]);
            out
        })
        .collect())
}

/// Total fission production `sum_cells sum_g nu_sigma_f_g phi_g`, cells in storage order.
pub fn total_production(phi: &[GridField], nu_sigma_f: &[GridField]) -> f64 {
    norms(&production_density(phi, nu_sigma_f)).sum
}

/// One multigroup sweep with fixed fission sources. Returns the new fluxes and
/// the inner iterations spent.
pub fn multigroup_sweep(
    phi: &[GridField],
    fission: &[GridField],
    problem: &DiscretisedProblem,
    solver: &dyn GroupSolver,
    mode: SweepMode,
) -> Result<(Vec<GridField>, usize)> {
    match mode {
        SweepMode::GaussSeidel => {
            let mut current = phi.to_vec();
            let mut inner = 0;
            for g in 0..problem.n_groups() {
                let s = assemble_group_source(g, &current, &current, &fission[g], &problem.scatter, mode)?;
                let (next, its) = solver.solve_group(g, &current[g], &s)?;
                current[g] = next;
                inner += its;
            }
            Ok((current, inner))
        }
        SweepMode::Jacobi => {
            let solved = (0..problem.n_groups())
                .into_par_iter()
                .map(|g| {
                    let s = assemble_group_source(g, phi, phi, &fission[g], &problem.scatter, mode)?;
                    solver.solve_group(g, &phi[g], &s)
                })
                .collect::<Result<Vec<_>>>()?;
            let inner = solved.iter().map(|(_, n)| n).sum();
            Ok((solved.into_iter().map(|(p, _)| p).collect(), inner))
        }
    }
}

fn has_fissile(problem: &DiscretisedProblem) -> bool {
    let produces = problem.nu_sigma_f.iter().any(|f| norms(f).linf > 0.0);
    let emits = problem.chi.iter().any(|f| norms(f).linf > 0.0);
    produces && emits
}

fn max_interior(phi: &[GridField]) -> f64 {
    phi.iter().map(|p| norms(p).linf).fold(0.0, f64::max)
}

fn normalise(phi: &mut [GridField]) {
    let m = max_interior(phi);
    if m > 0.0 {
        let inv = 1.0 / m;
        phi.iter_mut().for_each(|p| p.scale(inv));
    }
}

/// Power iteration from a flat unit flux and `k = 1`.
pub fn power_iteration(
    problem: &DiscretisedProblem,
    solver: &dyn GroupSolver,
    controls: &PowerControls,
) -> Result<EigenSolveState> {
    let phi0 = vec![GridField::interior_constant(problem.nx(), problem.ny(), problem.halo(), 1.0); problem.n_groups()];
    power_iteration_from(problem, solver, controls, phi0)
}

/// Power iteration from a caller-supplied initial flux (normalised to max 1 first).
///
/// Each step forms the fission source with `lambda = 1/k`, runs the configured
/// sweeps, updates `k` by the ratio of total fission production and normalises
/// the flux to a maximum of one.
pub fn power_iteration_from(
    problem: &DiscretisedProblem,
    solver: &dyn GroupSolver,
    controls: &PowerControls,
    mut phi: Vec<GridField>,
) -> Result<EigenSolveState> {
    if !has_fissile(problem) {
        return Err(Error::NoFissileMaterial);
    }
    if phi.len() != problem.n_groups() {
        return Err(Error::DimensionMismatch(format!(
            "initial flux has {} groups, problem has {}",
            phi.len(),
            problem.n_groups()
        )));
    }
    let template = problem.zero_field();
    for p in phi.iter_mut() {
        template.check_layout(p, "initial flux")?;
        p.zero_halo();
    }
    normalise(&mut phi);
    let mut production = total_production(&phi, &problem.nu_sigma_f);
    if !(production > 0.0) {
        return Err(Error::NoFissileMaterial);
    }

    let mut state = EigenSolveState {
        phi,
        k_eff: 1.0,
        fission_source: Vec::new(),
        keff_history: Vec::new(),
        counters: IterationCounters::default(),
        converged: false,
        flux_change: f64::INFINITY,
    };
    for step in 1..=controls.max_power_iters {
        let lambda = 1.0 / state.k_eff;
        let fission = fission_source(&state.phi, &problem.nu_sigma_f, &problem.chi, lambda)?;
        let mut next = state.phi.clone();
        for _ in 0..controls.sweeps_per_power_iter {
            let (swept, inner) = multigroup_sweep(&next, &fission, problem, solver, controls.mode)?;
            next = swept;
            state.counters.multigroup += 1;
            state.counters.multigrid += inner;
        }
        let new_production = total_production(&next, &problem.nu_sigma_f);
        let k_new = state.k_eff * new_production / production;
        normalise(&mut next);
        production = total_production(&next, &problem.nu_sigma_f);

        let change = next
            .iter()
            .zip(&state.phi)
            .map(|(a, b)| a.sub_interior(b).map(|d| norms(&d).linf))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        let dk = (k_new - state.k_eff).abs();

        state.phi = next;
        state.fission_source = fission;
        state.k_eff = k_new;
        state.flux_change = change;
        state.keff_history.push((step, k_new));
        state.counters.power = step;
        if !k_new.is_finite() || !(k_new > 0.0) {
            return Err(Error::NonConvergence(Box::new(state)));
        }
        if dk < controls.k_tol && change < controls.flux_tol {
            state.converged = true;
            return Ok(state);
        }
    }
    Err(Error::NonConvergence(Box::new(state)))
}

/// Per-group relative residual `linf(s_g - A_g phi_g) / linf(s_g)` of the
/// coupled eigenproblem at the state's `(k_eff, phi)`.
pub fn coupled_residuals(problem: &DiscretisedProblem, state: &EigenSolveState) -> Result<Vec<f64>> {
    let fission = fission_source(&state.phi, &problem.nu_sigma_f, &problem.chi, 1.0 / state.k_eff)?;
    (0..problem.n_groups())
        .map(|g| {
            let s = assemble_group_source(g, &state.phi, &state.phi, &fission[g], &problem.scatter, SweepMode::Jacobi)?;
            let a_phi = problem.groups[g].apply(&state.phi[g])?;
            let r = norms(&s.sub_interior(&a_phi)?).linf;
            let scale = norms(&s).linf;
            Ok(if scale > 0.0 { r / scale } else { r })
        })
        .collect()
}
