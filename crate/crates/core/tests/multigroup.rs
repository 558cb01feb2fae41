//! Multigroup sweep structure on small two-group problems.

mod common;

use common::*;
use nconv::eigen::{
    fission_source, multigroup_sweep, power_iteration, GroupSolver, MultigridGroupSolver, PowerControls, SweepMode,
};
use nconv::oracle::GaussSeidelGroupSolver;
use nconv::{BoundaryKind, DiscretisationOptions, DiscretisedProblem, GridField, MaterialLayout, Scheme};

fn problem(upscatter: f64) -> DiscretisedProblem {
    let text = format!(
        "[material fuel]\ngroups 2\nsigma_a 0.01 0.08\nsigma_s_row 1 0.2 0.016\nsigma_s_row 2 {upscatter} 0.4\n\
         nu 2.4 2.4\nsigma_f 0.004 0.07\nchi 1 0\n"
    );
    let lib = nconv::geometry::parse_cross_sections(&text, std::path::Path::new("inline"), Default::default()).unwrap();
    let layout = MaterialLayout::uniform(16, 16, 1.0, 1.0, "fuel", [BoundaryKind::Vacuum; 4]);
    DiscretisedProblem::new(layout.material_fields(&lib, 1).unwrap(), &DiscretisationOptions::new(Scheme::Fv)).unwrap()
}

fn exact_solver(p: &DiscretisedProblem) -> GaussSeidelGroupSolver {
    GaussSeidelGroupSolver::new(p, 1e-11, 100_000).unwrap()
}

#[test]
fn gauss_seidel_sweep_is_block_forward_substitution() {
    // without upscatter, group 1 sees its own old flux and group 2 sees the new group 1 flux
    let p = problem(0.0);
    let solver = exact_solver(&p);
    let phi = vec![GridField::interior_constant(16, 16, 1, 1.0); 2];
    let fission = fission_source(&phi, &p.nu_sigma_f, &p.chi, 1.0).unwrap();
    let (swept, _) = multigroup_sweep(&phi, &fission, &p, &solver, SweepMode::GaussSeidel).unwrap();

    let sigma = |from: usize, to: usize| p.scatter[from][to].as_ref().unwrap();
    // closures see interior-local indices; shift by the one-cell halo
    let at = |f: &GridField, i: usize, j: usize| f.get(i + 1, j + 1);
    let src1 = GridField::from_interior_fn(16, 16, 1, |i, j| at(sigma(0, 0), i, j) * at(&phi[0], i, j) + at(&fission[0], i, j));
    let (phi1, _) = solver.solve_group(0, &phi[0], &src1).unwrap();
    let src2 = GridField::from_interior_fn(16, 16, 1, |i, j| {
        at(sigma(0, 1), i, j) * at(&phi1, i, j) + at(sigma(1, 1), i, j) * at(&phi[1], i, j) + at(&fission[1], i, j)
    });
    let (phi2, _) = solver.solve_group(1, &phi[1], &src2).unwrap();
    assert!(linf_diff(&swept[0], &phi1) <= 1e-12 * linf(&phi1));
    assert!(linf_diff(&swept[1], &phi2) <= 1e-12 * linf(&phi2));
}

#[test]
fn converged_state_is_a_sweep_fixed_point() {
    let p = problem(0.001);
    let solver = MultigridGroupSolver::new(&p, 2, 2, 100_000, 1e-12).unwrap();
    let controls = PowerControls {
        max_power_iters: 2000,
        k_tol: 1e-13,
        flux_tol: 1e-12,
        ..Default::default()
    };
    let state = power_iteration(&p, &solver, &controls).unwrap();
    let fission = fission_source(&state.phi, &p.nu_sigma_f, &p.chi, 1.0 / state.k_eff).unwrap();
    let (swept, _) = multigroup_sweep(&state.phi, &fission, &p, &solver, SweepMode::GaussSeidel).unwrap();
    for (a, b) in swept.iter().zip(&state.phi) {
        assert!(linf_diff(a, b) <= 1e-9, "{}", linf_diff(a, b));
    }
}

#[test]
fn jacobi_and_gauss_seidel_modes_find_the_same_eigenpair() {
    let p = problem(0.001);
    let solver = MultigridGroupSolver::new(&p, 2, 2, 100_000, 1e-12).unwrap();
    let mut controls = PowerControls {
        max_power_iters: 4000,
        k_tol: 1e-12,
        flux_tol: 1e-11,
        ..Default::default()
    };
    let gs = power_iteration(&p, &solver, &controls).unwrap();
    controls.mode = SweepMode::Jacobi;
    let jac = power_iteration(&p, &solver, &controls).unwrap();
    assert!((gs.k_eff - jac.k_eff).abs() <= 1e-9);
    assert!(gs.converged && jac.converged);
}
