//! Halo-padded 2D fields and the stencil primitives every operator is built from.
//!
//! Index convention: `i` runs along x, `j` along y, and storage is row-major by
//! `j` (`values[j * nx_total + i]`). Interior cells are
//! `halo <= i < nx_total - halo` and likewise for `j`.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Interior cell count above which row loops are split across threads.
const PAR_THRESHOLD: usize = 1 << 14;

#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    nx_total: usize,
    ny_total: usize,
    halo: usize,
    values: Vec<f64>,
}

impl GridField {
    /// Zero field with `nx` x `ny` interior cells surrounded by `halo` layers.
    pub fn zeros(nx: usize, ny: usize, halo: usize) -> Self {
        assert!(nx >= 1 && ny >= 1, "interior must contain at least one cell");
        let nx_total = nx + 2 * halo;
        let ny_total = ny + 2 * halo;
        Self {
            nx_total,
            ny_total,
            halo,
            values: vec![0.0; nx_total * ny_total],
        }
    }

    /// Every cell, halo included, set to `value`.
    pub fn constant(nx: usize, ny: usize, halo: usize, value: f64) -> Self {
        let mut f = Self::zeros(nx, ny, halo);
        f.values.fill(value);
        f
    }

    /// Interior cells set to `value`, halo zero.
    pub fn interior_constant(nx: usize, ny: usize, halo: usize, value: f64) -> Self {
        Self::from_interior_fn(nx, ny, halo, |_, _| value)
    }

    /// Builds a field from a closure over interior-local indices `(0..nx, 0..ny)`.
    pub fn from_interior_fn(
        nx: usize,
        ny: usize,
        halo: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Self {
        let mut out = Self::zeros(nx, ny, halo);
        for j in 0..ny {
            for i in 0..nx {
                let k = out.idx(i + halo, j + halo);
                out.values[k] = f(i, j);
            }
        }
        out
    }

    /// Interior values given row-major by `j`; halo zero.
    pub fn from_interior(nx: usize, ny: usize, halo: usize, values: &[f64]) -> Result<Self> {
        if values.len() != nx * ny {
            return Err(Error::DimensionMismatch(format!(
                "{} values supplied for a {nx}x{ny} interior",
                values.len()
            )));
        }
        Ok(Self::from_interior_fn(nx, ny, halo, |i, j| values[j * nx + i]))
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            values: vec![0.0; self.values.len()],
            ..*self
        }
    }

    pub fn nx_total(&self) -> usize {
        self.nx_total
    }

    pub fn ny_total(&self) -> usize {
        self.ny_total
    }

    pub fn halo(&self) -> usize {
        self.halo
    }

    /// Interior cell count along x.
    pub fn nx(&self) -> usize {
        self.nx_total - 2 * self.halo
    }

    /// Interior cell count along y.
    pub fn ny(&self) -> usize {
        self.ny_total - 2 * self.halo
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx_total && j < self.ny_total);
        j * self.nx_total + i
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.values[k] = v;
    }

    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        let h = self.halo;
        i >= h && i < self.nx_total - h && j >= h && j < self.ny_total - h
    }

    /// Interior values, row-major by `j`.
    pub fn interior_values(&self) -> Vec<f64> {
        let h = self.halo;
        let mut out = Vec::with_capacity(self.nx() * self.ny());
        for j in h..self.ny_total - h {
            let row = j * self.nx_total;
            out.extend_from_slice(&self.values[row + h..row + self.nx_total - h]);
        }
        out
    }

    pub fn zero_halo(&mut self) {
        let (h, nt) = (self.halo, self.nx_total);
        for j in 0..self.ny_total {
            let row = &mut self.values[j * nt..(j + 1) * nt];
            if j < h || j >= self.ny_total - h {
                row.fill(0.0);
            } else {
                row[..h].fill(0.0);
                row[nt - h..].fill(0.0);
            }
        }
    }

    pub fn same_layout(&self, other: &GridField) -> bool {
        self.nx_total == other.nx_total && self.ny_total == other.ny_total && self.halo == other.halo
    }

    pub(crate) fn check_layout(&self, other: &GridField, what: &str) -> Result<()> {
        if self.same_layout(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "{what}: {}x{} (halo {}) vs {}x{} (halo {})",
                self.nx_total, self.ny_total, self.halo, other.nx_total, other.ny_total, other.halo
            )))
        }
    }

    /// Interior-wise `self + other`; halo of the result is zero.
    pub fn add_interior(&self, other: &GridField) -> Result<GridField> {
        self.check_layout(other, "add")?;
        let mut out = self.zeros_like();
        fill_interior(&mut out, |k| self.values[k] + other.values[k]);
        Ok(out)
    }

    /// Interior-wise `self - other`; halo of the result is zero.
    pub fn sub_interior(&self, other: &GridField) -> Result<GridField> {
        self.check_layout(other, "sub")?;
        let mut out = self.zeros_like();
        fill_interior(&mut out, |k| self.values[k] - other.values[k]);
        Ok(out)
    }

    /// Multiplies every cell by `c`.
    pub fn scale(&mut self, c: f64) {
        self.values.iter_mut().for_each(|v| *v *= c);
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Writes `kernel(k)` into every interior cell `k` of `out`, leaving the halo untouched.
///
/// Rows are independent, so large grids are split across threads; the per-cell
/// arithmetic is identical either way.
pub(crate) fn fill_interior<F>(out: &mut GridField, kernel: F)
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let nt = out.nx_total;
    let h = out.halo;
    let ny_t = out.ny_total;
    let interior = out.nx() * out.ny();
    let rows = &mut out.values[h * nt..(ny_t - h) * nt];
    let body = |(r, row): (usize, &mut [f64])| {
        let base = (r + h) * nt;
        for i in h..nt - h {
            row[i] = kernel(base + i);
        }
    };
    if interior >= PAR_THRESHOLD {
        rows.par_chunks_mut(nt).enumerate().for_each(body);
    } else {
        rows.chunks_mut(nt).enumerate().for_each(body);
    }
}

/// A square `(2l+1) x (2l+1)` array of fixed weights indexed by `(u, v)` in `[-l, l]^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct StencilFilter {
    size: usize,
    weights: Vec<f64>,
}

impl StencilFilter {
    pub fn from_fn(size: usize, mut f: impl FnMut(isize, isize) -> f64) -> Self {
        assert!(size % 2 == 1, "filter size must be odd");
        let l = (size / 2) as isize;
        let mut weights = Vec::with_capacity(size * size);
        for v in -l..=l {
            for u in -l..=l {
                weights.push(f(u, v));
            }
        }
        Self { size, weights }
    }

    /// Centre weight one, everything else zero.
    pub fn identity(size: usize) -> Self {
        Self::from_fn(size, |u, v| if u == 0 && v == 0 { 1.0 } else { 0.0 })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn halo_required(&self) -> usize {
        (self.size - 1) / 2
    }

    pub fn weight(&self, u: isize, v: isize) -> f64 {
        let l = self.halo_required() as isize;
        assert!(u.abs() <= l && v.abs() <= l, "offset ({u}, {v}) outside filter");
        self.weights[((v + l) as usize) * self.size + (u + l) as usize]
    }

    pub fn center(&self) -> f64 {
        self.weight(0, 0)
    }

    /// Weights ordered `v` outer, `u` inner, both ascending.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Copy with the centre weight replaced by `value`.
    pub fn with_center(&self, value: f64) -> Self {
        let mut out = self.clone();
        let c = (self.size * self.size) / 2;
        out.weights[c] = value;
        out
    }

    /// Nonzero taps as `(u, v, w)` in the fixed summation order.
    pub fn taps(&self) -> Vec<(isize, isize, f64)> {
        let l = self.halo_required() as isize;
        let mut taps = Vec::new();
        for v in -l..=l {
            for u in -l..=l {
                let w = self.weight(u, v);
                if w != 0.0 {
                    taps.push((u, v, w));
                }
            }
        }
        taps
    }

    /// Nonzero taps as flat-index offsets into a field with row stride `nx_total`.
    pub(crate) fn offsets(&self, nx_total: usize) -> Vec<(isize, f64)> {
        self.taps()
            .into_iter()
            .map(|(u, v, w)| (v * nx_total as isize + u, w))
            .collect()
    }

    pub(crate) fn check_halo(&self, field: &GridField) -> Result<()> {
        if field.halo() < self.halo_required() {
            Err(Error::HaloTooShallow {
                required: self.halo_required(),
                available: field.halo(),
            })
        } else {
            Ok(())
        }
    }
}

#[inline]
pub(crate) fn tap_sum(src: &[f64], k: usize, taps: &[(isize, f64)]) -> f64 {
    // Zero taps are skipped: they would only add an exact zero.
    let mut acc = 0.0;
    for &(off, w) in taps {
        acc += w * src[(k as isize + off) as usize];
    }
    acc
}

/// Stride-one convolution `sum_{u,v} w(u,v) x(i+u, j+v)` on every interior cell.
/// The output halo is zero.
pub fn conv_apply(field: &GridField, filter: &StencilFilter) -> Result<GridField> {
    filter.check_halo(field)?;
    let taps = filter.offsets(field.nx_total);
    let src = &field.values;
    let mut out = field.zeros_like();
    fill_interior(&mut out, |k| tap_sum(src, k, &taps));
    Ok(out)
}

/// Componentwise product over every cell, halo included.
pub fn hadamard_product(a: &GridField, b: &GridField) -> Result<GridField> {
    a.check_layout(b, "hadamard product")?;
    Ok(GridField {
        values: a.values.iter().zip(&b.values).map(|(x, y)| x * y).collect(),
        ..*a
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Interior,
    All,
}

/// Componentwise reciprocal over `region`; cells outside it are zero.
pub fn hadamard_inverse(a: &GridField, region: Region) -> Result<GridField> {
    let mut out = a.zeros_like();
    for j in 0..a.ny_total {
        for i in 0..a.nx_total {
            if region == Region::Interior && !a.is_interior(i, j) {
                continue;
            }
            let v = a.get(i, j);
            if v == 0.0 {
                return Err(Error::ZeroDivisor { i, j });
            }
            out.set(i, j, 1.0 / v);
        }
    }
    Ok(out)
}

/// Copies each coarse interior value into its 2x2 block of fine cells.
pub fn upsample2x(coarse: &GridField) -> GridField {
    let h = coarse.halo;
    let mut fine = GridField::zeros(2 * coarse.nx(), 2 * coarse.ny(), h);
    let fnt = fine.nx_total;
    let cnt = coarse.nx_total;
    let src = &coarse.values;
    fill_interior(&mut fine, |k| {
        let (fi, fj) = (k % fnt - h, k / fnt - h);
        src[(fj / 2 + h) * cnt + fi / 2 + h]
    });
    fine
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub linf: f64,
    pub l2: f64,
    pub sum: f64,
}

/// Interior max-abs, root-sum-square and plain sum.
pub fn norms(a: &GridField) -> Norms {
    let h = a.halo;
    let (mut linf, mut ss, mut sum) = (0.0f64, 0.0, 0.0);
    for j in h..a.ny_total - h {
        for i in h..a.nx_total - h {
            let v = a.get(i, j);
            linf = linf.max(v.abs());
            ss += v * v;
            sum += v;
        }
    }
    Norms {
        linf,
        l2: ss.sqrt(),
        sum,
    }
}
