//! Single-group solver: Jacobi smoothing written as convolutions, residuals,
//! 2x grid transfers, harmonic coarsening and the sawtooth multigrid cycle.

use crate::discretisation::{off_diagonal_at, DiscretisedProblem, GroupOperator};
use crate::error::{Error, Result};
use crate::field::{conv_apply, fill_interior, hadamard_product, norms, upsample2x, GridField, StencilFilter};

/// Coarsest interior allowed in either direction.
pub const MIN_COARSE_CELLS: usize = 4;

pub const DEFAULT_LEVELS: usize = 3;

/// `1/2 ( D.f(phi; w_od) + f(D.phi; w_od) )` on the interior.
fn off_diagonal(phi: &GridField, d: &GridField, od_filter: &StencilFilter) -> Result<GridField> {
    phi.check_layout(d, "off-diagonal operator")?;
    let a = hadamard_product(d, &conv_apply(phi, od_filter)?)?;
    let b = conv_apply(&hadamard_product(d, phi)?, od_filter)?;
    let mut out = phi.zeros_like();
    let (av, bv) = (a.values(), b.values());
    fill_interior(&mut out, |k| 0.5 * (av[k] + bv[k]));
    Ok(out)
}

/// One Jacobi step `inv_diag.(s - off_diagonal(phi))` built from whole-field convolutions.
///
/// Halo constraints must already be applied to `phi` and `d`; the returned halo is zero.
pub fn jacobi_step(
    phi: &GridField,
    s: &GridField,
    inv_diag: &GridField,
    d: &GridField,
    od_filter: &StencilFilter,
) -> Result<GridField> {
    phi.check_layout(s, "jacobi step")?;
    phi.check_layout(inv_diag, "jacobi step")?;
    let od = off_diagonal(phi, d, od_filter)?;
    let (sv, ov, iv) = (s.values(), od.values(), inv_diag.values());
    let mut out = phi.zeros_like();
    fill_interior(&mut out, |k| iv[k] * (sv[k] - ov[k]));
    Ok(out)
}

/// `s - (diag.phi + off_diagonal(phi))` on the interior.
pub fn residual(
    phi: &GridField,
    s: &GridField,
    diag: &GridField,
    d: &GridField,
    od_filter: &StencilFilter,
) -> Result<GridField> {
    phi.check_layout(s, "residual")?;
    phi.check_layout(diag, "residual")?;
    let od = off_diagonal(phi, d, od_filter)?;
    let (pv, sv, ov, dv) = (phi.values(), s.values(), od.values(), diag.values());
    let mut out = phi.zeros_like();
    fill_interior(&mut out, |k| sv[k] - (dv[k] * pv[k] + ov[k]));
    Ok(out)
}

fn check_even(fine: &GridField) -> Result<()> {
    if fine.nx() % 2 != 0 || fine.ny() % 2 != 0 {
        return Err(Error::OddDimensions {
            nx: fine.nx(),
            ny: fine.ny(),
        });
    }
    Ok(())
}

fn coarsen(fine: &GridField, block: impl Fn([f64; 4]) -> f64 + Sync + Send) -> Result<GridField> {
    check_even(fine)?;
    let h = fine.halo();
    let mut coarse = GridField::zeros(fine.nx() / 2, fine.ny() / 2, h);
    let (cnt, fnt) = (coarse.nx_total(), fine.nx_total());
    let src = fine.values();
    fill_interior(&mut coarse, |k| {
        let (ci, cj) = (k % cnt - h, k / cnt - h);
        let b = (2 * cj + h) * fnt + 2 * ci + h;
        block([src[b], src[b + 1], src[b + fnt], src[b + fnt + 1]])
    });
    Ok(coarse)
}

/// Stride-2 application of the 2x2 filter with weights 0.25: each coarse cell
/// is the mean of its fine block. Coarse halo is zero.
pub fn restrict(fine: &GridField) -> Result<GridField> {
    coarsen(fine, |b| 0.25 * b[0] + 0.25 * b[1] + 0.25 * b[2] + 0.25 * b[3])
}

/// 2x2 harmonic mean `4 / sum(1/v)`, zero when any entry is zero.
pub fn harmonic_restrict(fine: &GridField) -> Result<GridField> {
    coarsen(fine, |b| {
        if b.iter().any(|v| *v == 0.0) {
            0.0
        } else {
            4.0 / (1.0 / b[0] + 1.0 / b[1] + 1.0 / b[2] + 1.0 / b[3])
        }
    })
}

/// Per-level operators for one group, level 0 finest.
#[derive(Debug, Clone)]
pub struct MultigridHierarchy {
    levels: Vec<GroupOperator>,
    pub jacobi_iters_per_level: usize,
}

/// Outcome of repeated cycles on a fixed source.
#[derive(Debug, Clone)]
pub struct MultigridSolve {
    pub phi: GridField,
    pub cycles: usize,
    /// Residual linf of the returned iterate relative to the source linf,
    /// or of the last iterate before the final cycle when the cap was reached.
    pub relative_residual: f64,
}

impl MultigridHierarchy {
    /// Coarsens `finest` `n_levels - 1` times by harmonic averaging of `D` and
    /// the base removal term, rebuilding halos and diagonals on every level.
    pub fn new(finest: GroupOperator, n_levels: usize, jacobi_iters_per_level: usize) -> Result<Self> {
        let (nx, ny) = (finest.nx(), finest.ny());
        let levels_ok = n_levels >= 1 && n_levels <= usize::BITS as usize;
        let divisible = levels_ok && {
            let f = 1usize << (n_levels - 1);
            nx % f == 0 && ny % f == 0 && nx / f >= MIN_COARSE_CELLS && ny / f >= MIN_COARSE_CELLS
        };
        if !divisible {
            return Err(Error::IndivisibleDims {
                nx,
                ny,
                levels: n_levels,
                min: MIN_COARSE_CELLS,
            });
        }
        let mut levels = vec![finest];
        for _ in 1..n_levels {
            let fine = levels.last().unwrap();
            let d = harmonic_restrict(&fine.d)?;
            let sigma_as = harmonic_restrict(&fine.sigma_as_base)?;
            let coarse = GroupOperator::assemble(
                fine.scheme,
                2.0 * fine.dx,
                2.0 * fine.dy,
                &d,
                &sigma_as,
                &fine.boundary,
            )?;
            levels.push(coarse);
        }
        Ok(Self {
            levels,
            jacobi_iters_per_level,
        })
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, l: usize) -> &GroupOperator {
        &self.levels[l]
    }

    pub fn finest(&self) -> &GroupOperator {
        &self.levels[0]
    }

    /// Jacobi step on level `l` using the fused per-cell kernel; same arithmetic as [`jacobi_step`].
    pub fn jacobi(&self, l: usize, phi: &GridField, s: &GridField) -> Result<GridField> {
        let op = &self.levels[l];
        op.d.check_layout(phi, "jacobi step")?;
        op.d.check_layout(s, "jacobi step")?;
        let (p, d, sv, iv) = (phi.values(), op.d.values(), s.values(), op.inv_diag.values());
        let taps = op.od_taps();
        let mut out = phi.zeros_like();
        fill_interior(&mut out, |k| iv[k] * (sv[k] - off_diagonal_at(p, d, k, taps)));
        Ok(out)
    }

    pub fn residual(&self, l: usize, phi: &GridField, s: &GridField) -> Result<GridField> {
        let op = &self.levels[l];
        op.d.check_layout(phi, "residual")?;
        op.d.check_layout(s, "residual")?;
        let (p, d, sv, dg) = (phi.values(), op.d.values(), s.values(), op.diag.values());
        let taps = op.od_taps();
        let mut out = phi.zeros_like();
        fill_interior(&mut out, |k| sv[k] - (dg[k] * p[k] + off_diagonal_at(p, d, k, taps)));
        Ok(out)
    }

    fn smooth(&self, l: usize, mut x: GridField, s: &GridField) -> Result<GridField> {
        for _ in 0..self.jacobi_iters_per_level {
            x = self.jacobi(l, &x, s)?;
        }
        Ok(x)
    }

    /// One sawtooth cycle; also returns the linf norm of the residual of the input `phi`.
    pub fn cycle_with_residual(&self, phi: &GridField, s: &GridField) -> Result<(GridField, f64)> {
        let mut r = vec![self.residual(0, phi, s)?];
        let r_linf = norms(&r[0]).linf;
        for l in 1..self.levels.len() {
            let next = restrict(&r[l - 1])?;
            r.push(next);
        }
        let coarsest = self.levels.len() - 1;
        let mut delta = self.smooth(coarsest, r[coarsest].zeros_like(), &r[coarsest])?;
        for l in (0..coarsest).rev() {
            delta = self.smooth(l, upsample2x(&delta), &r[l])?;
        }
        Ok((phi.add_interior(&delta)?, r_linf))
    }

    pub fn cycle(&self, phi: &GridField, s: &GridField) -> Result<GridField> {
        Ok(self.cycle_with_residual(phi, s)?.0)
    }

    /// Up to `max_cycles` cycles, stopping early once the residual linf is at
    /// most `tol` times the source linf (`tol = 0` always runs the full budget).
    pub fn solve(&self, phi0: &GridField, s: &GridField, max_cycles: usize, tol: f64) -> Result<MultigridSolve> {
        let s_linf = norms(s).linf;
        let scale = if s_linf > 0.0 { s_linf } else { 1.0 };
        let mut phi = phi0.clone();
        let mut relative_residual = f64::INFINITY;
        let mut cycles = 0;
        while cycles < max_cycles {
            let (next, r) = self.cycle_with_residual(&phi, s)?;
            relative_residual = r / scale;
            if tol > 0.0 && relative_residual <= tol {
                return Ok(MultigridSolve {
                    phi,
                    cycles,
                    relative_residual,
                });
            }
            phi = next;
            cycles += 1;
        }
        Ok(MultigridSolve {
            phi,
            cycles,
            relative_residual,
        })
    }
}

/// Hierarchy for group `g` of `problem`.
pub fn build_hierarchy(
    problem: &DiscretisedProblem,
    n_levels: usize,
    g: usize,
    jacobi_iters_per_level: usize,
) -> Result<MultigridHierarchy> {
    MultigridHierarchy::new(problem.groups[g].clone(), n_levels, jacobi_iters_per_level)
}

pub fn mg_cycle(phi: &GridField, s: &GridField, hierarchy: &MultigridHierarchy) -> Result<GridField> {
    hierarchy.cycle(phi, s)
}
