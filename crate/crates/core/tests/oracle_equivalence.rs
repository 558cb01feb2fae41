//! The explicit sparse matrix and the convolution operator describe the same system.

mod common;

use common::*;
use nconv::eigen::{power_iteration, MultigridGroupSolver, PowerControls};
use nconv::multigrid::MultigridHierarchy;
use nconv::oracle::{assemble_operator, gauss_seidel_solve, reference_eigensolve};
use nconv::{
    BoundaryKind, BoundarySpec, DiscretisationOptions, DiscretisedProblem, GridField, GroupOperator, MaterialLayout,
    Scheme, VacuumMode,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn random_op(scheme: Scheme, n: usize, edges: [BoundaryKind; 4], rng: &mut StdRng) -> GroupOperator {
    let halo = scheme.halo();
    let d = random_interior(n, n, halo, 0.5, 2.0, rng);
    let sa = random_interior(n, n, halo, 0.1, 1.0, rng);
    let h = if scheme == Scheme::Fv { rng.gen_range(0.1..1.5) } else { 1.0 };
    let dy = if scheme == Scheme::Fv { rng.gen_range(0.1..1.5) } else { h };
    GroupOperator::assemble(scheme, h, dy, &d, &sa, &BoundarySpec::new(edges, VacuumMode::ZeroHalo)).unwrap()
}

fn matvec_matches(scheme: Scheme, n: usize) {
    let mut rng = StdRng::seed_from_u64(n as u64 + scheme.halo() as u64);
    for _ in 0..100 {
        let op = random_op(scheme, n, [BoundaryKind::Vacuum; 4], &mut rng);
        let sys = assemble_operator(&op).unwrap();
        let phi = random_interior(n, n, op.halo(), -1.0, 1.0, &mut rng);
        let conv = op.apply(&phi).unwrap();
        let sparse = sys.to_field(&sys.matvec(&phi.interior_values())).unwrap();
        let rel = linf_diff(&conv, &sparse) / linf(&sparse);
        assert!(rel <= 1e-13, "{scheme:?} {n}x{n}: relative difference {rel:e}");
    }
}

#[test]
fn fv_matvec_16() {
    matvec_matches(Scheme::Fv, 16);
}

#[test]
fn fv_matvec_32() {
    matvec_matches(Scheme::Fv, 32);
}

#[test]
fn convfem_matvec_16() {
    matvec_matches(Scheme::ConvFem, 16);
}

#[test]
fn convfem_matvec_32() {
    matvec_matches(Scheme::ConvFem, 32);
}

#[test]
fn fv_matrix_matches_dense_five_point() {
    let mut rng = StdRng::seed_from_u64(3);
    let op = random_op(Scheme::Fv, 8, [BoundaryKind::Vacuum; 4], &mut rng);
    let sys = assemble_operator(&op).unwrap();
    let dense = dense_fv_matrix(&op);
    for (r, row) in dense.iter().enumerate() {
        for (c, want) in row.iter().enumerate() {
            let got = sys.get(r, c);
            assert!((got - want).abs() <= 1e-13 * want.abs().max(1.0), "({r},{c}) {got} vs {want}");
        }
    }
}

#[test]
fn operators_are_symmetric() {
    let mut rng = StdRng::seed_from_u64(11);
    for scheme in [Scheme::Fv, Scheme::ConvFem] {
        let op = random_op(scheme, 12, [BoundaryKind::Vacuum; 4], &mut rng);
        let sys = assemble_operator(&op).unwrap();
        assert!(sys.asymmetry() <= 1e-14, "{scheme:?}: {}", sys.asymmetry());
    }
    let edges = [BoundaryKind::Reflective, BoundaryKind::Vacuum, BoundaryKind::Reflective, BoundaryKind::Vacuum];
    let op = random_op(Scheme::Fv, 12, edges, &mut rng);
    assert!(assemble_operator(&op).unwrap().asymmetry() <= 1e-14);
}

#[test]
fn multigrid_and_gauss_seidel_agree_on_one_group() {
    let mut rng = StdRng::seed_from_u64(5);
    let op = random_op(Scheme::Fv, 32, [BoundaryKind::Vacuum; 4], &mut rng);
    let s = random_interior(32, 32, 1, 0.0, 1.0, &mut rng);
    let sys = assemble_operator(&op).unwrap().with_rhs(s.interior_values()).unwrap();
    let gs = gauss_seidel_solve(&sys, &vec![0.0; 1024], 1e-12, 100_000).unwrap();
    let gs = sys.to_field(&gs.x).unwrap();
    let h = MultigridHierarchy::new(op, 3, 2).unwrap();
    let mg = h.solve(&s.zeros_like(), &s, 100_000, 1e-12).unwrap();
    let diff = linf_diff(&mg.phi, &gs) / linf(&gs);
    assert!(diff <= 1e-8, "relative difference {diff:e} after {} cycles", mg.cycles);
}

fn small_problem(scheme: Scheme) -> DiscretisedProblem {
    let text = "[material fuel]\ngroups 2\nsigma_a 0.01 0.08\nsigma_s_row 1 0.2 0.016\nsigma_s_row 2 0 0.4\n\
                nu 2.4 2.4\nsigma_f 0.004 0.07\nchi 1 0\n";
    let lib = nconv::geometry::parse_cross_sections(text, std::path::Path::new("inline"), Default::default()).unwrap();
    let edges = [BoundaryKind::Reflective, BoundaryKind::Vacuum, BoundaryKind::Vacuum, BoundaryKind::Reflective];
    let layout = MaterialLayout::uniform(16, 16, 1.0, 1.0, "fuel", edges);
    let fields = layout.material_fields(&lib, 2).unwrap();
    let mut options = DiscretisationOptions::new(scheme);
    options.convfem_constrained_reflective = true;
    DiscretisedProblem::new(fields, &options).unwrap()
}

fn eigen_pipelines_agree(scheme: Scheme) {
    let problem = small_problem(scheme);
    let controls = PowerControls {
        max_power_iters: 2000,
        k_tol: 1e-12,
        flux_tol: 1e-11,
        ..Default::default()
    };
    let mg = MultigridGroupSolver::new(&problem, 2, 2, 100_000, 1e-12).unwrap();
    let a = power_iteration(&problem, &mg, &controls).unwrap();
    let b = reference_eigensolve(&problem, &controls, 1e-12, 100_000).unwrap();
    assert!((a.k_eff - b.k_eff).abs() <= 1e-8, "{} vs {}", a.k_eff, b.k_eff);
    for (x, y) in a.phi.iter().zip(&b.phi) {
        assert!(linf_diff(x, y) <= 1e-8);
    }
}

#[test]
fn fv_eigen_pipelines_agree() {
    eigen_pipelines_agree(Scheme::Fv);
}

#[test]
fn convfem_eigen_pipelines_agree() {
    eigen_pipelines_agree(Scheme::ConvFem);
}

#[test]
fn zero_source_gives_zero_solution() {
    let mut rng = StdRng::seed_from_u64(9);
    let op = random_op(Scheme::ConvFem, 16, [BoundaryKind::Vacuum; 4], &mut rng);
    let h = MultigridHierarchy::new(op, 2, 2).unwrap();
    let zero = GridField::zeros(16, 16, 2);
    let out = h.solve(&zero, &zero, 10, 1e-10).unwrap();
    assert_eq!(linf(&out.phi), 0.0);
}
