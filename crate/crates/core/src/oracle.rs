//! Reference path: the discretised group operators assembled as explicit sparse
//! matrices and solved by lexicographic Gauss-Seidel.

use crate::discretisation::{DiscretisedProblem, GroupOperator, Scheme};
use crate::eigen::{power_iteration, EigenSolveState, GroupSolver, PowerControls};
use crate::error::{Error, Result};
use crate::field::GridField;

/// Row-compressed system for one group. Row `(j - halo) * nx + (i - halo)`
/// holds interior cell `(i, j)`; columns within a row are ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSystem {
    pub nx: usize,
    pub ny: usize,
    pub halo: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
    pub diag: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl SparseSystem {
    pub fn n(&self) -> usize {
        self.nx * self.ny
    }

    /// Row of storage cell `(i, j)` (halo-inclusive indices).
    pub fn row_of(&self, i: usize, j: usize) -> usize {
        (j - self.halo) * self.nx + (i - self.halo)
    }

    /// Storage cell `(i, j)` of `row`.
    pub fn cell_of(&self, row: usize) -> (usize, usize) {
        (row % self.nx + self.halo, row / self.nx + self.halo)
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|(col, _)| *col == c).map_or(0.0, |(_, v)| v)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n()).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    /// `rhs - A x`.
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        self.matvec(x).iter().zip(&self.rhs).map(|(ax, b)| b - ax).collect()
    }

    pub fn with_rhs(&self, rhs: Vec<f64>) -> Result<Self> {
        if rhs.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "right-hand side has {} entries, system has {}",
                rhs.len(),
                self.n()
            )));
        }
        Ok(Self { rhs, ..self.clone() })
    }

    /// Largest `|a_rc - a_cr|` over stored entries.
    pub fn asymmetry(&self) -> f64 {
        (0..self.n())
            .flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v)))
            .map(|(r, c, v)| (v - self.get(c, r)).abs())
            .fold(0.0, f64::max)
    }

    /// Interior vector as a field on this system's grid.
    pub fn to_field(&self, x: &[f64]) -> Result<GridField> {
        GridField::from_interior(self.nx, self.ny, self.halo, x)
    }
}

/// Spatial coefficients of one interior cell as `(di, dj, value)`, centre included.
fn cell_coefficients(op: &GroupOperator, i: usize, j: usize) -> Vec<(isize, isize, f64)> {
    let d = &op.d;
    let dc = d.get(i, j);
    let at = |u: isize, v: isize| d.get((i as isize + u) as usize, (j as isize + v) as usize);
    match op.scheme {
        Scheme::Fv => {
            // face coefficients (D_P + D_nb) / (2 h^2)
            let (ax, ay) = (1.0 / (2.0 * op.dx * op.dx), 1.0 / (2.0 * op.dy * op.dy));
            let w = (dc + at(-1, 0)) * ax;
            let e = (dc + at(1, 0)) * ax;
            let s = (dc + at(0, -1)) * ay;
            let n = (dc + at(0, 1)) * ay;
            let c = w + e + s + n + op.sigma_as.get(i, j);
            vec![(0, -1, -s), (-1, 0, -w), (0, 0, c), (1, 0, -e), (0, 1, -n)]
        }
        Scheme::ConvFem => {
            // phi_nb collects 1/2 w (D_P + D_nb); phi_P collects 1/2 w00 D_P - 1/2 sum w D_nb
            let f = &op.filter;
            let l = f.halo_required() as isize;
            let mut out = Vec::with_capacity(f.size() * f.size());
            let mut centre = 0.5 * f.center() * dc;
            for v in -l..=l {
                for u in -l..=l {
                    if (u, v) == (0, 0) {
                        out.push((0, 0, 0.0));
                        continue;
                    }
                    let w = f.weight(u, v);
                    if w == 0.0 {
                        continue;
                    }
                    out.push((u, v, 0.5 * w * (dc + at(u, v))));
                    centre -= 0.5 * w * at(u, v);
                }
            }
            let c = centre + op.sigma_as.get(i, j);
            for e in out.iter_mut() {
                if (e.0, e.1) == (0, 0) {
                    e.2 = c;
                }
            }
            out
        }
    }
}

/// Sparse matrix of one group operator with a zero right-hand side.
///
/// Neighbours that fall in the halo are dropped: every boundary treatment
/// holds the halo flux at zero.
pub fn assemble_operator(op: &GroupOperator) -> Result<SparseSystem> {
    let (nx, ny, h) = (op.nx(), op.ny(), op.halo());
    let mut sys = SparseSystem {
        nx,
        ny,
        halo: h,
        row_ptr: vec![0],
        cols: Vec::new(),
        vals: Vec::new(),
        diag: Vec::with_capacity(nx * ny),
        rhs: vec![0.0; nx * ny],
    };
    for j in h..h + ny {
        for i in h..h + nx {
            let mut entries: Vec<(usize, f64)> = Vec::new();
            let mut diag = 0.0;
            for (u, v, a) in cell_coefficients(op, i, j) {
                let (ni, nj) = (i as isize + u, j as isize + v);
                let inside = ni >= h as isize && nj >= h as isize && ni < (h + nx) as isize && nj < (h + ny) as isize;
                if !inside {
                    continue;
                }
                let col = (nj as usize - h) * nx + (ni as usize - h);
                if (u, v) == (0, 0) {
                    diag = a;
                }
                entries.push((col, a));
            }
            if !(diag > 0.0) {
                return Err(Error::NonPositiveDiagonal { i, j, value: diag });
            }
            entries.sort_by_key(|e| e.0);
            for (c, a) in entries {
                sys.cols.push(c);
                sys.vals.push(a);
            }
            sys.diag.push(diag);
            sys.row_ptr.push(sys.cols.len());
        }
    }
    Ok(sys)
}

/// Sparse system of group `g` with `source` (interior) as right-hand side.
pub fn assemble_sparse_system(problem: &DiscretisedProblem, g: usize, source: &GridField) -> Result<SparseSystem> {
    let op = &problem.groups[g];
    op.d.check_layout(source, "sparse system")?;
    assemble_operator(op)?.with_rhs(source.interior_values())
}

#[derive(Debug, Clone)]
pub struct GaussSeidelResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Relative residual linf after each sweep.
    pub residual_history: Vec<f64>,
}

fn linf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Lexicographic Gauss-Seidel until `linf(rhs - A x) <= tol * linf(rhs)` or
/// `max_iters` sweeps.
pub fn gauss_seidel_solve(system: &SparseSystem, x0: &[f64], tol: f64, max_iters: usize) -> Result<GaussSeidelResult> {
    let n = system.n();
    if x0.len() != n {
        return Err(Error::DimensionMismatch(format!("initial guess has {} entries, system has {n}", x0.len())));
    }
    let b_norm = linf(&system.rhs);
    let scale = if b_norm > 0.0 { b_norm } else { 1.0 };
    let mut x = x0.to_vec();
    let mut history = Vec::new();
    let mut rel = linf(&system.residual(&x)) / scale;
    if rel <= tol {
        return Ok(GaussSeidelResult {
            x,
            iterations: 0,
            residual_history: history,
        });
    }
    for sweep in 1..=max_iters {
        for r in 0..n {
            let mut acc = system.rhs[r];
            for (c, a) in system.row(r) {
                if c != r {
                    acc -= a * x[c];
                }
            }
            x[r] = acc / system.diag[r];
        }
        rel = linf(&system.residual(&x)) / scale;
        history.push(rel);
        if rel <= tol {
            return Ok(GaussSeidelResult {
                x,
                iterations: sweep,
                residual_history: history,
            });
        }
    }
    Err(Error::GaussSeidelNonConvergence {
        iterations: max_iters,
        final_residual: rel,
        residual_history: history,
        solution: x,
    })
}

/// Per-group Gauss-Seidel solves on pre-assembled matrices. A solve that hits
/// the sweep cap keeps its last iterate.
#[derive(Debug, Clone)]
pub struct GaussSeidelGroupSolver {
    pub systems: Vec<SparseSystem>,
    pub tol: f64,
    pub max_iters: usize,
}

impl GaussSeidelGroupSolver {
    pub fn new(problem: &DiscretisedProblem, tol: f64, max_iters: usize) -> Result<Self> {
        let systems = problem.groups.iter().map(assemble_operator).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            systems,
            tol,
            max_iters,
        })
    }
}

impl GroupSolver for GaussSeidelGroupSolver {
    fn solve_group(&self, g: usize, phi0: &GridField, source: &GridField) -> Result<(GridField, usize)> {
        let sys = self.systems[g].with_rhs(source.interior_values())?;
        let (x, its) = match gauss_seidel_solve(&sys, &phi0.interior_values(), self.tol, self.max_iters) {
            Ok(r) => (r.x, r.iterations),
            Err(Error::GaussSeidelNonConvergence { solution, iterations, .. }) => (solution, iterations),
            Err(e) => return Err(e),
        };
        Ok((sys.to_field(&x)?, its))
    }
}

/// The power iteration driven by Gauss-Seidel group solves.
pub fn reference_eigensolve(
    problem: &DiscretisedProblem,
    controls: &PowerControls,
    gs_tol: f64,
    gs_max_iters: usize,
) -> Result<EigenSolveState> {
    let solver = GaussSeidelGroupSolver::new(problem, gs_tol, gs_max_iters)?;
    power_iteration(problem, &solver, controls)
}
