//! Helpers shared by the integration tests: random fields and independent
//! reference evaluations written directly from the five-point formulas.
#![allow(dead_code)]

use std::path::PathBuf;

use nconv::field::GridField;
use nconv::GroupOperator;
use rand::rngs::StdRng;
use rand::Rng;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}

/// Every cell (halo included) drawn from `[lo, hi)`.
pub fn random_full(nx: usize, ny: usize, halo: usize, lo: f64, hi: f64, rng: &mut StdRng) -> GridField {
    let mut f = GridField::zeros(nx, ny, halo);
    f.values_mut().iter_mut().for_each(|v| *v = rng.gen_range(lo..hi));
    f
}

/// Interior drawn from `[lo, hi)`, halo zero.
pub fn random_interior(nx: usize, ny: usize, halo: usize, lo: f64, hi: f64, rng: &mut StdRng) -> GridField {
    GridField::from_interior_fn(nx, ny, halo, |_, _| rng.gen_range(lo..hi))
}

/// `-(1/dx^2)[(D_e+D)(phi_e-phi) - (D+D_w)(phi-phi_w)]/2` plus the y analogue,
/// written cell by cell.
pub fn five_point_diffusion(phi: &GridField, d: &GridField, dx: f64, dy: f64) -> GridField {
    let mut out = phi.zeros_like();
    let h = phi.halo();
    for j in h..h + phi.ny() {
        for i in h..h + phi.nx() {
            let (p, dc) = (phi.get(i, j), d.get(i, j));
            let flux = |ni: usize, nj: usize| (dc + d.get(ni, nj)) * (phi.get(ni, nj) - p);
            let x = (flux(i + 1, j) + flux(i - 1, j)) / (2.0 * dx * dx);
            let y = (flux(i, j + 1) + flux(i, j - 1)) / (2.0 * dy * dy);
            out.set(i, j, -(x + y));
        }
    }
    out
}

/// Face coefficients `(a_w, a_e, a_s, a_n, a_p)` of a finite-volume operator at `(i, j)`.
pub fn fv_coefficients(op: &GroupOperator, i: usize, j: usize) -> [f64; 5] {
    let d = &op.d;
    let dc = d.get(i, j);
    let (ax, ay) = (2.0 * op.dx * op.dx, 2.0 * op.dy * op.dy);
    let w = -(dc + d.get(i - 1, j)) / ax;
    let e = -(dc + d.get(i + 1, j)) / ax;
    let s = -(dc + d.get(i, j - 1)) / ay;
    let n = -(dc + d.get(i, j + 1)) / ay;
    let p = -(w + e + s + n) + op.sigma_as.get(i, j);
    [w, e, s, n, p]
}

/// Index-form Jacobi update `(s - sum a_nb phi_nb) / a_p` over the interior.
pub fn index_form_jacobi(op: &GroupOperator, phi: &GridField, s: &GridField) -> GridField {
    let mut out = phi.zeros_like();
    let h = phi.halo();
    for j in h..h + phi.ny() {
        for i in h..h + phi.nx() {
            let [w, e, so, n, p] = fv_coefficients(op, i, j);
            let nb = w * phi.get(i - 1, j) + e * phi.get(i + 1, j) + so * phi.get(i, j - 1) + n * phi.get(i, j + 1);
            out.set(i, j, (s.get(i, j) - nb) / p);
        }
    }
    out
}

/// Dense finite-volume matrix over interior cells, row `j * nx + i`.
pub fn dense_fv_matrix(op: &GroupOperator) -> Vec<Vec<f64>> {
    let (nx, ny, h) = (op.nx(), op.ny(), op.halo());
    let mut a = vec![vec![0.0; nx * ny]; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let row = j * nx + i;
            let [w, e, s, n, p] = fv_coefficients(op, i + h, j + h);
            a[row][row] = p;
            if i > 0 {
                a[row][row - 1] = w;
            }
            if i + 1 < nx {
                a[row][row + 1] = e;
            }
            if j > 0 {
                a[row][row - nx] = s;
            }
            if j + 1 < ny {
                a[row][row + nx] = n;
            }
        }
    }
    a
}

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|x, y| a[*x][c].abs().total_cmp(&a[*y][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            if f != 0.0 {
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

pub fn linf_diff(a: &GridField, b: &GridField) -> f64 {
    a.values().iter().zip(b.values()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn linf(a: &GridField) -> f64 {
    a.values().iter().fold(0.0, |m, x| m.max(x.abs()))
}
