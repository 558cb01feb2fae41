//! Stencil filters for the finite-volume and quadratic ConvFEM schemes, the
//! three-convolution diffusion operator, and halo-based boundary conditions.
//!
//! The diffusion operator for a spatially varying `D` is written with one
//! constant-weight filter `w`:
//!
//! ```text
//! f_diff(phi, D) = 1/2 ( f(D.phi) + D.f(phi) - phi.f(D) )
//! ```
//!
//! Collecting the coefficient of `phi(i,j)` gives the diagonal
//! `a00 = w00 D - 1/2 f(D) + sigma_as`; the rest of the operator is carried by
//! the off-diagonal filter (`w` with its centre zeroed).

use crate::error::{Error, Result};
use crate::field::{conv_apply, fill_interior, hadamard_inverse, hadamard_product, tap_sum, GridField, Region, StencilFilter};
use crate::geometry::MaterialFields;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Five-point finite volume (3x3 filter, one halo layer).
    Fv,
    /// Quadratic 9-noded ConvFEM (5x5 filter, two halo layers).
    ConvFem,
}

impl Scheme {
    pub fn halo(self) -> usize {
        match self {
            Scheme::Fv => 1,
            Scheme::ConvFem => 2,
        }
    }

    pub fn filter(self, dx: f64, dy: f64) -> Result<StencilFilter> {
        match self {
            Scheme::Fv => build_fv_filter(dx, dy),
            Scheme::ConvFem => {
                if dx != dy {
                    return Err(Error::UnsupportedCombination(format!(
                        "ConvFEM requires dx == dy (got {dx} and {dy})"
                    )));
                }
                build_convfem_filter(dx)
            }
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fv" => Ok(Scheme::Fv),
            "convfem" => Ok(Scheme::ConvFem),
            other => Err(format!("unknown scheme '{other}' (expected fv or convfem)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Edge {
    /// x minimum (`i = 0` side)
    Left,
    /// x maximum
    Right,
    /// y minimum (`j = 0` side)
    Bottom,
    /// y maximum
    Top,
}

impl Edge {
    pub const ALL: [Edge; 4] = [Edge::Left, Edge::Right, Edge::Bottom, Edge::Top];

    fn index(self) -> usize {
        self as usize
    }

    fn is_x_normal(self) -> bool {
        matches!(self, Edge::Left | Edge::Right)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    Reflective,
    Vacuum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VacuumMode {
    /// Sigma_a gains 1/(2 dx) in boundary cells; halo gets the reflective treatment.
    Absorption,
    /// Halo flux and diffusivity both zero (any filter size).
    ZeroHalo,
}

impl std::str::FromStr for VacuumMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "absorption" => Ok(VacuumMode::Absorption),
            "zero_halo" => Ok(VacuumMode::ZeroHalo),
            other => Err(format!("unknown vacuum mode '{other}' (expected absorption or zero_halo)")),
        }
    }
}

/// Per-edge boundary tags plus the treatment of vacuum edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySpec {
    edges: [BoundaryKind; 4],
    pub vacuum_mode: VacuumMode,
    /// Allows reflective edges under ConvFEM through the two-layer negated-D
    /// halo, which is exact only when the boundary diffusivity is homogeneous.
    pub convfem_constrained_reflective: bool,
}

impl BoundarySpec {
    pub fn new(edges: [BoundaryKind; 4], vacuum_mode: VacuumMode) -> Self {
        Self {
            edges,
            vacuum_mode,
            convfem_constrained_reflective: false,
        }
    }

    pub fn uniform(kind: BoundaryKind, vacuum_mode: VacuumMode) -> Self {
        Self::new([kind; 4], vacuum_mode)
    }

    pub fn kind(&self, edge: Edge) -> BoundaryKind {
        self.edges[edge.index()]
    }

    pub fn set(&mut self, edge: Edge, kind: BoundaryKind) {
        self.edges[edge.index()] = kind;
    }

    pub fn edges(&self) -> [BoundaryKind; 4] {
        self.edges
    }
}

/// Five-point finite-volume Laplacian as a 3x3 filter.
pub fn build_fv_filter(dx: f64, dy: f64) -> Result<StencilFilter> {
    check_spacing(dx)?;
    check_spacing(dy)?;
    let (ax, ay) = (1.0 / (dx * dx), 1.0 / (dy * dy));
    Ok(StencilFilter::from_fn(3, |u, v| match (u.abs(), v.abs()) {
        (0, 0) => 2.0 * ax + 2.0 * ay,
        (1, 0) => -ax,
        (0, 1) => -ay,
        _ => 0.0,
    }))
}

const CONVFEM_WEIGHTS: [[f64; 5]; 5] = [
    [-5.0, 50.0, -15.0, 50.0, -5.0],
    [50.0, -320.0, -660.0, -320.0, 50.0],
    [-15.0, -660.0, 3600.0, -660.0, -15.0],
    [50.0, -320.0, -660.0, -320.0, 50.0],
    [-5.0, 50.0, -15.0, 50.0, -5.0],
];

/// 5x5 filter of the quadratic 9-noded ConvFEM diffusion operator (square cells).
pub fn build_convfem_filter(dx: f64) -> Result<StencilFilter> {
    check_spacing(dx)?;
    let h2 = dx * dx;
    // the table is symmetric, so image-row orientation does not matter
    Ok(StencilFilter::from_fn(5, |u, v| {
        CONVFEM_WEIGHTS[(v + 2) as usize][(u + 2) as usize] / 900.0 / h2
    }))
}

fn check_spacing(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveSpacing(h))
    }
}

pub fn off_diagonal_filter(filter: &StencilFilter) -> StencilFilter {
    filter.with_center(0.0)
}

/// `1/2 ( f(D.phi) + D.f(phi) - phi.f(D) )` on the interior.
///
/// Halo constraints must already be applied to `phi` and `d`.
pub fn diffusion_apply(phi: &GridField, d: &GridField, filter: &StencilFilter) -> Result<GridField> {
    phi.check_layout(d, "diffusion operator")?;
    filter.check_halo(phi)?;
    let d_phi = hadamard_product(d, phi)?;
    let t1 = conv_apply(&d_phi, filter)?;
    let t2 = hadamard_product(d, &conv_apply(phi, filter)?)?;
    let t3 = hadamard_product(phi, &conv_apply(d, filter)?)?;
    let mut out = phi.zeros_like();
    fill_interior(&mut out, |k| 0.5 * (t1.values()[k] + t2.values()[k] - t3.values()[k]));
    Ok(out)
}

/// Diagonal coefficient `w00 D - 1/2 f(D; w) + sigma_as` on the interior.
pub fn diagonal_coefficients(d: &GridField, sigma_as: &GridField, filter: &StencilFilter) -> Result<GridField> {
    d.check_layout(sigma_as, "diagonal coefficients")?;
    filter.check_halo(d)?;
    let taps = filter.offsets(d.nx_total());
    let w00 = filter.center();
    let (dv, sv) = (d.values(), sigma_as.values());
    let mut out = d.zeros_like();
    fill_interior(&mut out, |k| w00 * dv[k] - 0.5 * tap_sum(dv, k, &taps) + sv[k]);
    let h = d.halo();
    for j in h..d.ny_total() - h {
        for i in h..d.nx_total() - h {
            let value = out.get(i, j);
            if !(value > 0.0) {
                return Err(Error::NonPositiveDiagonal { i, j, value });
            }
        }
    }
    Ok(out)
}

/// `sigma_a + out-scatter` cellwise.
pub fn compute_sigma_as(sigma_a: &GridField, out_scatter: &GridField) -> Result<GridField> {
    sigma_a.check_layout(out_scatter, "removal cross-section")?;
    let mut out = sigma_a.clone();
    out.values_mut()
        .iter_mut()
        .zip(out_scatter.values())
        .for_each(|(a, s)| *a += s);
    Ok(out)
}

/// Walks every halo cell outside `edge` (corner blocks included), yielding the
/// halo cell and the interior cell mirrored across the boundary with the
/// tangential index clamped into the interior.
fn for_each_halo_cell(field: &GridField, edge: Edge, mut f: impl FnMut((usize, usize), (usize, usize))) {
    let h = field.halo();
    let (nt, mt) = (field.nx_total(), field.ny_total());
    let clamp_x = |i: usize| i.clamp(h, nt - h - 1);
    let clamp_y = |j: usize| j.clamp(h, mt - h - 1);
    for layer in 0..h {
        match edge {
            Edge::Left => {
                let (hi, mi) = (h - 1 - layer, clamp_x(h + layer));
                (0..mt).for_each(|j| f((hi, j), (mi, clamp_y(j))));
            }
            Edge::Right => {
                let (hi, mi) = (nt - h + layer, clamp_x((nt - h - 1).saturating_sub(layer)));
                (0..mt).for_each(|j| f((hi, j), (mi, clamp_y(j))));
            }
            Edge::Bottom => {
                let (hj, mj) = (h - 1 - layer, clamp_y(h + layer));
                (0..nt).for_each(|i| f((i, hj), (clamp_x(i), mj)));
            }
            Edge::Top => {
                let (hj, mj) = (mt - h + layer, clamp_y((mt - h - 1).saturating_sub(layer)));
                (0..nt).for_each(|i| f((i, hj), (clamp_x(i), mj)));
            }
        }
    }
}

/// Reflective edge: halo flux zero and halo diffusivity the negated mirror
/// value, so the face-averaged diffusivity across the boundary vanishes.
pub fn apply_reflective_halo(d: &mut GridField, phi: &mut GridField, edge: Edge) -> Result<()> {
    d.check_layout(phi, "reflective halo")?;
    if d.halo() == 0 {
        return Err(Error::HaloTooShallow {
            required: 1,
            available: 0,
        });
    }
    let mut updates = Vec::new();
    for_each_halo_cell(d, edge, |(hi, hj), (mi, mj)| updates.push((hi, hj, -d.get(mi, mj))));
    for (i, j, v) in updates {
        d.set(i, j, v);
        phi.set(i, j, 0.0);
    }
    Ok(())
}

/// Vacuum edge under `mode`.
///
/// `Absorption` adds `1/(2 dx)` (or `1/(2 dy)`) to the removal term of the
/// interior cells next to the edge and gives the halo the reflective treatment;
/// it needs a one-layer stencil. `ZeroHalo` zeroes halo flux and diffusivity.
#[allow(clippy::too_many_arguments)]
pub fn apply_vacuum(
    d: &mut GridField,
    phi: &mut GridField,
    sigma_as: &mut GridField,
    edge: Edge,
    mode: VacuumMode,
    dx: f64,
    dy: f64,
    filter: &StencilFilter,
) -> Result<()> {
    d.check_layout(sigma_as, "vacuum boundary")?;
    filter.check_halo(d)?;
    match mode {
        VacuumMode::Absorption => {
            if filter.halo_required() > 1 {
                return Err(Error::UnsupportedCombination(format!(
                    "absorption vacuum treatment needs a 3x3 stencil, filter is {0}x{0}",
                    filter.size()
                )));
            }
            let extra = if edge.is_x_normal() { 0.5 / dx } else { 0.5 / dy };
            let h = d.halo();
            let (nt, mt) = (d.nx_total(), d.ny_total());
            let cells: Vec<(usize, usize)> = match edge {
                Edge::Left => (h..mt - h).map(|j| (h, j)).collect(),
                Edge::Right => (h..mt - h).map(|j| (nt - h - 1, j)).collect(),
                Edge::Bottom => (h..nt - h).map(|i| (i, h)).collect(),
                Edge::Top => (h..nt - h).map(|i| (i, mt - h - 1)).collect(),
            };
            for (i, j) in cells {
                sigma_as.set(i, j, sigma_as.get(i, j) + extra);
            }
            apply_reflective_halo(d, phi, edge)
        }
        VacuumMode::ZeroHalo => {
            d.check_layout(phi, "vacuum boundary")?;
            let mut cells = Vec::new();
            for_each_halo_cell(d, edge, |(hi, hj), _| cells.push((hi, hj)));
            for (i, j) in cells {
                d.set(i, j, 0.0);
                phi.set(i, j, 0.0);
            }
            Ok(())
        }
    }
}

/// Checks that the `halo`-deep interior strips along every reflective edge hold
/// one common diffusivity; returns it.
pub fn check_boundary_homogeneity(d: &GridField, boundary: &BoundarySpec) -> Result<Option<f64>> {
    let h = d.halo();
    let (nt, mt) = (d.nx_total(), d.ny_total());
    let mut common: Option<f64> = None;
    for edge in Edge::ALL {
        if boundary.kind(edge) != BoundaryKind::Reflective {
            continue;
        }
        let mut cells = Vec::new();
        for depth in 0..h {
            match edge {
                Edge::Left => (h..mt - h).for_each(|j| cells.push((h + depth, j))),
                Edge::Right => (h..mt - h).for_each(|j| cells.push((nt - h - 1 - depth, j))),
                Edge::Bottom => (h..nt - h).for_each(|i| cells.push((i, h + depth))),
                Edge::Top => (h..nt - h).for_each(|i| cells.push((i, mt - h - 1 - depth))),
            }
        }
        for (i, j) in cells {
            let v = d.get(i, j);
            match common {
                None => common = Some(v),
                Some(c) if c != v => {
                    return Err(Error::InhomogeneousBoundary(format!(
                        "{edge:?} edge cell ({i}, {j}) has D = {v}, expected {c}"
                    )))
                }
                _ => {}
            }
        }
    }
    Ok(common)
}

#[inline]
pub(crate) fn off_diagonal_at(phi: &[f64], d: &[f64], k: usize, taps: &[(isize, f64)]) -> f64 {
    // 1/2 ( D . f(phi; w_od) + f(D.phi; w_od) ), same operation order as the composed form
    let a = tap_sum(phi, k, taps);
    let mut b = 0.0;
    for &(off, w) in taps {
        let m = (k as isize + off) as usize;
        b += w * (d[m] * phi[m]);
    }
    0.5 * (d[k] * a + b)
}

/// One energy group's discretised operator on one grid level.
#[derive(Debug, Clone)]
pub struct GroupOperator {
    pub scheme: Scheme,
    pub dx: f64,
    pub dy: f64,
    pub filter: StencilFilter,
    pub od_filter: StencilFilter,
    /// Diffusivity with boundary halos applied.
    pub d: GridField,
    /// Absorption plus out-scatter, before any boundary augmentation.
    pub sigma_as_base: GridField,
    /// Removal term actually used (vacuum augmentation included).
    pub sigma_as: GridField,
    pub diag: GridField,
    pub inv_diag: GridField,
    pub boundary: BoundarySpec,
    od_taps: Vec<(isize, f64)>,
}

impl GroupOperator {
    /// Builds the operator from raw interior fields; halo contents of the inputs are ignored.
    pub fn assemble(
        scheme: Scheme,
        dx: f64,
        dy: f64,
        d_raw: &GridField,
        sigma_as_base: &GridField,
        boundary: &BoundarySpec,
    ) -> Result<Self> {
        d_raw.check_layout(sigma_as_base, "group operator")?;
        let filter = scheme.filter(dx, dy)?;
        filter.check_halo(d_raw)?;

        let mut d = d_raw.clone();
        d.zero_halo();
        let mut sigma_as = sigma_as_base.clone();
        sigma_as.zero_halo();
        let mut phi = d.zeros_like();

        let reflective: Vec<Edge> = Edge::ALL
            .into_iter()
            .filter(|e| boundary.kind(*e) == BoundaryKind::Reflective)
            .collect();
        if scheme == Scheme::ConvFem && !reflective.is_empty() {
            if !boundary.convfem_constrained_reflective {
                return Err(Error::UnsupportedCombination(
                    "ConvFEM with reflective edges needs the constrained reflective halo option".into(),
                ));
            }
            check_boundary_homogeneity(&d, boundary)?;
        }
        // reflective first so vacuum edges own the shared corner blocks
        for &edge in &reflective {
            apply_reflective_halo(&mut d, &mut phi, edge)?;
        }
        for edge in Edge::ALL {
            if boundary.kind(edge) == BoundaryKind::Vacuum {
                apply_vacuum(&mut d, &mut phi, &mut sigma_as, edge, boundary.vacuum_mode, dx, dy, &filter)?;
            }
        }

        let diag = diagonal_coefficients(&d, &sigma_as, &filter)?;
        let inv_diag = hadamard_inverse(&diag, Region::Interior)?;
        let od_filter = off_diagonal_filter(&filter);
        let od_taps = od_filter.offsets(d.nx_total());
        let mut base = sigma_as_base.clone();
        base.zero_halo();
        Ok(Self {
            scheme,
            dx,
            dy,
            filter,
            od_filter,
            d,
            sigma_as_base: base,
            sigma_as,
            diag,
            inv_diag,
            boundary: *boundary,
            od_taps,
        })
    }

    pub fn nx(&self) -> usize {
        self.d.nx()
    }

    pub fn ny(&self) -> usize {
        self.d.ny()
    }

    pub fn halo(&self) -> usize {
        self.d.halo()
    }

    pub(crate) fn od_taps(&self) -> &[(isize, f64)] {
        &self.od_taps
    }

    /// Full operator `diag.phi + off-diagonal(phi)` on the interior. `phi`'s halo must be zero.
    pub fn apply(&self, phi: &GridField) -> Result<GridField> {
        self.d.check_layout(phi, "operator apply")?;
        let (p, d, diag) = (phi.values(), self.d.values(), self.diag.values());
        let taps = &self.od_taps;
        let mut out = phi.zeros_like();
        fill_interior(&mut out, |k| diag[k] * p[k] + off_diagonal_at(p, d, k, taps));
        Ok(out)
    }
}

/// A fully discretised multigroup problem on the finest grid.
#[derive(Debug, Clone)]
pub struct DiscretisedProblem {
    pub scheme: Scheme,
    pub dx: f64,
    pub dy: f64,
    pub boundary: BoundarySpec,
    pub groups: Vec<GroupOperator>,
    /// `nu * sigma_f` per group.
    pub nu_sigma_f: Vec<GridField>,
    pub chi: Vec<GridField>,
    /// `scatter[from][to]`, `None` where the transfer is zero everywhere.
    pub scatter: Vec<Vec<Option<GridField>>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscretisationOptions {
    pub scheme: Scheme,
    /// `None` picks absorption for FV and zero-halo for ConvFEM.
    pub vacuum_mode: Option<VacuumMode>,
    pub convfem_constrained_reflective: bool,
}

impl DiscretisationOptions {
    pub fn new(scheme: Scheme) -> Self {
        Self {
            scheme,
            vacuum_mode: None,
            convfem_constrained_reflective: false,
        }
    }

    pub fn resolved_vacuum_mode(&self) -> VacuumMode {
        self.vacuum_mode.unwrap_or(match self.scheme {
            Scheme::Fv => VacuumMode::Absorption,
            Scheme::ConvFem => VacuumMode::ZeroHalo,
        })
    }
}

impl DiscretisedProblem {
    pub fn new(fields: MaterialFields, options: &DiscretisationOptions) -> Result<Self> {
        let scheme = options.scheme;
        if fields.halo < scheme.halo() {
            return Err(Error::HaloTooShallow {
                required: scheme.halo(),
                available: fields.halo,
            });
        }
        let mut boundary = BoundarySpec::new(fields.edges, options.resolved_vacuum_mode());
        boundary.convfem_constrained_reflective = options.convfem_constrained_reflective;
        let groups = (0..fields.groups())
            .map(|g| {
                let sigma_as = compute_sigma_as(&fields.sigma_a[g], &fields.out_scatter[g])?;
                GroupOperator::assemble(scheme, fields.dx, fields.dy, &fields.d[g], &sigma_as, &boundary)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            scheme,
            dx: fields.dx,
            dy: fields.dy,
            boundary,
            groups,
            nu_sigma_f: fields.nu_sigma_f,
            chi: fields.chi,
            scatter: fields.scatter,
        })
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn nx(&self) -> usize {
        self.groups[0].nx()
    }

    pub fn ny(&self) -> usize {
        self.groups[0].ny()
    }

    pub fn halo(&self) -> usize {
        self.groups[0].halo()
    }

    /// Zero flux field on this problem's grid.
    pub fn zero_field(&self) -> GridField {
        GridField::zeros(self.nx(), self.ny(), self.halo())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::norms;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand::rngs::StdRng;

    fn random_field(nx: usize, ny: usize, halo: usize, lo: f64, hi: f64, rng: &mut StdRng) -> GridField {
        let mut f = GridField::zeros(nx, ny, halo);
        f.values_mut().iter_mut().for_each(|v| *v = rng.gen_range(lo..hi));
        f
    }

    /// Direct five-point finite-volume operator, coefficients written out per cell.
    fn fv_operator_direct(phi: &GridField, d: &GridField, dx: f64, dy: f64) -> GridField {
        let mut out = phi.zeros_like();
        let h = phi.halo();
        for j in h..phi.ny_total() - h {
            for i in h..phi.nx_total() - h {
                let dc = d.get(i, j);
                let (dw, de, ds, dn) = (d.get(i - 1, j), d.get(i + 1, j), d.get(i, j - 1), d.get(i, j + 1));
                let v = -(dw + dc) / (2.0 * dx * dx) * phi.get(i - 1, j)
                    - (dc + de) / (2.0 * dx * dx) * phi.get(i + 1, j)
                    - (ds + dc) / (2.0 * dy * dy) * phi.get(i, j - 1)
                    - (dc + dn) / (2.0 * dy * dy) * phi.get(i, j + 1)
                    + ((dw + 2.0 * dc + de) / (2.0 * dx * dx) + (ds + 2.0 * dc + dn) / (2.0 * dy * dy)) * phi.get(i, j);
                out.set(i, j, v);
            }
        }
        out
    }

    fn max_rel(a: &GridField, b: &GridField) -> f64 {
        let diff = a.sub_interior(b).unwrap();
        norms(&diff).linf / norms(b).linf.max(f64::MIN_POSITIVE)
    }

    #[test]
    fn fv_filter_unit_spacing() {
        let f = build_fv_filter(1.0, 1.0).unwrap();
        let expected = [0.0, -1.0, 0.0, -1.0, 4.0, -1.0, 0.0, -1.0, 0.0];
        assert_eq!(f.weights(), &expected);
        assert_eq!(f.weight_sum(), 0.0);
    }

    #[test]
    fn fv_filter_anisotropic() {
        let f = build_fv_filter(1.0, 2.0).unwrap();
        assert_eq!(f.center(), 2.5);
        assert_eq!(f.weight(0, 1), -0.25);
        assert_eq!(f.weight(0, -1), -0.25);
        assert_eq!(f.weight(1, 0), -1.0);
        assert_eq!(f.weight_sum(), 0.0);
        assert!(matches!(build_fv_filter(0.0, 1.0), Err(Error::NonPositiveSpacing(_))));
        assert!(matches!(build_fv_filter(1.0, -2.0), Err(Error::NonPositiveSpacing(_))));
    }

    #[test]
    fn convfem_filter_facts() {
        let f = build_convfem_filter(1.0).unwrap();
        assert_eq!(f.size(), 5);
        assert_eq!(f.center(), 4.0);
        assert_eq!(f.weight(-2, 2), -5.0 / 900.0);
        assert_eq!(f.weight(1, 0), -660.0 / 900.0);
        assert!(f.weight_sum().abs() <= 1e-15);
        let row_sums: Vec<f64> = CONVFEM_WEIGHTS.iter().map(|r| r.iter().sum()).collect();
        assert_eq!(row_sums, vec![75.0, -1200.0, 2250.0, -1200.0, 75.0]);

        let f2 = build_convfem_filter(2.0).unwrap();
        for (a, b) in f2.weights().iter().zip(f.weights()) {
            assert_eq!(*a, b / 4.0);
        }
        assert!(build_convfem_filter(0.0).is_err());
    }

    #[test]
    fn shipped_filters_are_symmetric() {
        for f in [build_fv_filter(0.3, 0.7).unwrap(), build_convfem_filter(0.4).unwrap()] {
            let l = f.halo_required() as isize;
            for u in -l..=l {
                for v in -l..=l {
                    assert_eq!(f.weight(u, v), f.weight(-u, v));
                    assert_eq!(f.weight(u, v), f.weight(u, -v));
                }
            }
        }
    }

    #[test]
    fn off_diagonal_filters() {
        let od = off_diagonal_filter(&build_fv_filter(1.0, 1.0).unwrap());
        assert_eq!(od.weights(), &[0.0, -1.0, 0.0, -1.0, 0.0, -1.0, 0.0, -1.0, 0.0]);
        let zero = off_diagonal_filter(&StencilFilter::identity(3));
        assert!(zero.weights().iter().all(|&w| w == 0.0));
        let fem = build_convfem_filter(1.0).unwrap();
        let od = off_diagonal_filter(&fem);
        assert_eq!(od.center(), 0.0);
        for (k, (a, b)) in od.weights().iter().zip(fem.weights()).enumerate() {
            if k != 12 {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn diffusion_constant_d_reduces_to_scaled_laplacian() {
        let mut rng = StdRng::seed_from_u64(1);
        let phi = random_field(7, 6, 1, -1.0, 1.0, &mut rng);
        let d = GridField::constant(7, 6, 1, 1.7);
        let filt = build_fv_filter(0.5, 0.25).unwrap();
        let got = diffusion_apply(&phi, &d, &filt).unwrap();
        let mut want = conv_apply(&phi, &filt).unwrap();
        want.scale(1.7);
        assert!(max_rel(&got, &want) <= 1e-14);
    }

    #[test]
    fn diffusion_of_constant_flux_vanishes() {
        let mut rng = StdRng::seed_from_u64(2);
        let d = random_field(6, 6, 2, 0.2, 2.0, &mut rng);
        let phi = GridField::constant(6, 6, 2, 3.0);
        let filt = build_convfem_filter(0.3).unwrap();
        let out = diffusion_apply(&phi, &d, &filt).unwrap();
        let scale = norms(&conv_apply(&d, &filt).unwrap()).linf * 3.0;
        assert!(norms(&out).linf <= 1e-14 * scale);
    }

    #[test]
    fn diffusion_matches_direct_five_point() {
        let mut rng = StdRng::seed_from_u64(3);
        let phi = random_field(8, 8, 1, -1.0, 1.0, &mut rng);
        let d = random_field(8, 8, 1, 0.1, 3.0, &mut rng);
        let filt = build_fv_filter(0.7, 1.3).unwrap();
        let got = diffusion_apply(&phi, &d, &filt).unwrap();
        let want = fv_operator_direct(&phi, &d, 0.7, 1.3);
        assert!(max_rel(&got, &want) <= 1e-13, "{}", max_rel(&got, &want));
    }

    #[test]
    fn diagonal_unit_case_is_four() {
        let d = GridField::constant(5, 5, 1, 1.0);
        let s = GridField::zeros(5, 5, 1);
        let a = diagonal_coefficients(&d, &s, &build_fv_filter(1.0, 1.0).unwrap()).unwrap();
        assert!(a.interior_values().iter().all(|&v| v == 4.0));
    }

    #[test]
    fn diagonal_matches_center_coefficient_loop() {
        let mut rng = StdRng::seed_from_u64(4);
        let (dx, dy) = (0.9, 0.4);
        let d = random_field(9, 7, 1, 0.1, 2.0, &mut rng);
        let s = random_field(9, 7, 1, 0.0, 0.5, &mut rng);
        let a = diagonal_coefficients(&d, &s, &build_fv_filter(dx, dy).unwrap()).unwrap();
        for j in 1..8 {
            for i in 1..10 {
                let want = (d.get(i - 1, j) + 2.0 * d.get(i, j) + d.get(i + 1, j)) / (2.0 * dx * dx)
                    + (d.get(i, j - 1) + 2.0 * d.get(i, j) + d.get(i, j + 1)) / (2.0 * dy * dy)
                    + s.get(i, j);
                assert!((a.get(i, j) - want).abs() <= 1e-13 * want);
            }
        }
        // additive shift
        let mut shifted = s.clone();
        shifted.values_mut().iter_mut().for_each(|v| *v += 0.125);
        let b = diagonal_coefficients(&d, &shifted, &build_fv_filter(dx, dy).unwrap()).unwrap();
        for (x, y) in b.interior_values().iter().zip(a.interior_values()) {
            assert!((x - y - 0.125).abs() <= 1e-12 * x.abs());
        }
    }

    #[test]
    fn diagonal_rejects_non_positive() {
        let d = GridField::constant(3, 3, 1, 1.0);
        let s = GridField::constant(3, 3, 1, -10.0);
        let err = diagonal_coefficients(&d, &s, &build_fv_filter(1.0, 1.0).unwrap()).unwrap_err();
        assert!(matches!(err, Error::NonPositiveDiagonal { i: 1, j: 1, .. }));
    }

    #[test]
    fn sigma_as_examples() {
        let a = GridField::constant(3, 3, 1, 0.1);
        let zero = GridField::zeros(3, 3, 1);
        assert_eq!(compute_sigma_as(&a, &zero).unwrap(), a);
        let out = GridField::constant(3, 3, 1, 0.2);
        let s = compute_sigma_as(&a, &out).unwrap();
        assert!(s.values().iter().all(|&v| v == 0.1 + 0.2));
        assert!(compute_sigma_as(&a, &GridField::zeros(3, 4, 1)).is_err());
    }

    #[test]
    fn sigma_as_seven_group_loop() {
        let mut rng = StdRng::seed_from_u64(5);
        let groups = 7;
        let sa: Vec<f64> = (0..groups).map(|_| rng.gen_range(0.0..0.3)).collect();
        let ss: Vec<Vec<f64>> = (0..groups).map(|_| (0..groups).map(|_| rng.gen_range(0.0..0.2)).collect()).collect();
        for g in 0..groups {
            let out_sum: f64 = (0..groups).map(|gp| ss[g][gp]).sum();
            let a = GridField::constant(4, 4, 1, sa[g]);
            let o = GridField::constant(4, 4, 1, out_sum);
            let got = compute_sigma_as(&a, &o).unwrap();
            let mut want = sa[g];
            for gp in 0..groups {
                want += ss[g][gp];
            }
            for v in got.interior_values() {
                assert!((v - want).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn reflective_halo_negates_mirror() {
        let mut d = GridField::constant(4, 3, 1, 0.0);
        let mut phi = GridField::constant(4, 3, 1, 9.0);
        for j in 1..4 {
            d.set(1, j, 0.5);
            d.set(4, j, 0.25);
        }
        apply_reflective_halo(&mut d, &mut phi, Edge::Left).unwrap();
        apply_reflective_halo(&mut d, &mut phi, Edge::Right).unwrap();
        for j in 1..4 {
            assert_eq!(d.get(0, j), -0.5);
            assert_eq!(phi.get(0, j), 0.0);
            assert_eq!((d.get(0, j) + d.get(1, j)) / 2.0, 0.0);
            assert_eq!((d.get(5, j) + d.get(4, j)) / 2.0, 0.0);
        }
        assert!(apply_reflective_halo(&mut GridField::zeros(2, 2, 0), &mut GridField::zeros(2, 2, 0), Edge::Top).is_err());
    }

    #[test]
    fn reflective_halo_depth_two_mirrors_both_layers() {
        let mut d = GridField::from_interior_fn(5, 5, 2, |i, _| 1.0 + i as f64);
        let mut phi = GridField::constant(5, 5, 2, 1.0);
        apply_reflective_halo(&mut d, &mut phi, Edge::Left).unwrap();
        for j in 0..9 {
            assert_eq!(d.get(1, j), -1.0);
            assert_eq!(d.get(0, j), -2.0);
            assert_eq!(phi.get(0, j), 0.0);
            assert_eq!(phi.get(1, j), 0.0);
        }
    }

    #[test]
    fn vacuum_absorption_augments_boundary_cells() {
        let dx = 0.063;
        let filt = build_fv_filter(dx, dx).unwrap();
        let mut d = GridField::interior_constant(4, 4, 1, 1.0);
        let mut phi = d.zeros_like();
        let mut s = GridField::interior_constant(4, 4, 1, 0.0);
        apply_vacuum(&mut d, &mut phi, &mut s, Edge::Left, VacuumMode::Absorption, dx, dx, &filt).unwrap();
        assert!((s.get(1, 2) - 7.9365).abs() < 1e-4);
        assert_eq!(s.get(2, 2), 0.0);
        assert_eq!(d.get(0, 2), -1.0);

        let filt = build_fv_filter(1.0, 1.0).unwrap();
        let mut d = GridField::interior_constant(3, 3, 1, 1.0);
        let mut phi = d.zeros_like();
        let mut s = d.zeros_like();
        apply_vacuum(&mut d, &mut phi, &mut s, Edge::Left, VacuumMode::Absorption, 1.0, 1.0, &filt).unwrap();
        apply_vacuum(&mut d, &mut phi, &mut s, Edge::Bottom, VacuumMode::Absorption, 1.0, 1.0, &filt).unwrap();
        assert_eq!(s.get(1, 1), 1.0);
        assert_eq!(s.get(2, 1), 0.5);
        assert_eq!(s.get(2, 2), 0.0);
    }

    #[test]
    fn vacuum_zero_halo_and_unsupported_combination() {
        let filt = build_convfem_filter(1.0).unwrap();
        let mut d = GridField::constant(5, 5, 2, 1.0);
        let mut phi = GridField::constant(5, 5, 2, 1.0);
        let mut s = d.zeros_like();
        let err = apply_vacuum(&mut d, &mut phi, &mut s, Edge::Top, VacuumMode::Absorption, 1.0, 1.0, &filt).unwrap_err();
        assert!(matches!(err, Error::UnsupportedCombination(_)));
        apply_vacuum(&mut d, &mut phi, &mut s, Edge::Top, VacuumMode::ZeroHalo, 1.0, 1.0, &filt).unwrap();
        for i in 0..9 {
            assert_eq!(d.get(i, 7), 0.0);
            assert_eq!(d.get(i, 8), 0.0);
            assert_eq!(phi.get(i, 8), 0.0);
            assert_eq!(d.get(i, 6), 1.0);
        }
        assert!(s.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn convfem_reflective_requires_homogeneous_boundary() {
        let spec = BoundarySpec::uniform(BoundaryKind::Reflective, VacuumMode::ZeroHalo);
        let d = GridField::interior_constant(8, 8, 2, 1.0);
        let s = GridField::interior_constant(8, 8, 2, 0.1);
        let err = GroupOperator::assemble(Scheme::ConvFem, 1.0, 1.0, &d, &s, &spec).unwrap_err();
        assert!(matches!(err, Error::UnsupportedCombination(_)));

        let mut spec = spec;
        spec.convfem_constrained_reflective = true;
        let op = GroupOperator::assemble(Scheme::ConvFem, 1.0, 1.0, &d, &s, &spec).unwrap();
        // constant flux is in the null space of the diffusion part
        let phi = GridField::interior_constant(8, 8, 2, 1.0);
        let out = op.apply(&phi).unwrap();
        for v in out.interior_values() {
            assert!((v - 0.1).abs() < 1e-13);
        }

        let mut bumpy = d.clone();
        bumpy.set(3, 5, 2.0);
        let err = GroupOperator::assemble(Scheme::ConvFem, 1.0, 1.0, &bumpy, &s, &spec).unwrap_err();
        assert!(matches!(err, Error::InhomogeneousBoundary(_)));
    }

    #[test]
    fn reflective_fv_operator_annihilates_constants() {
        let mut rng = StdRng::seed_from_u64(9);
        let d = random_field(6, 5, 1, 0.3, 2.0, &mut rng);
        let s = GridField::interior_constant(6, 5, 1, 0.0);
        let spec = BoundarySpec::uniform(BoundaryKind::Reflective, VacuumMode::Absorption);
        let op = GroupOperator::assemble(Scheme::Fv, 0.5, 0.5, &d, &s, &spec).unwrap();
        let out = op.apply(&GridField::interior_constant(6, 5, 1, 1.0)).unwrap();
        assert!(norms(&out).linf < 1e-13);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn three_convolution_form_equals_five_point(seed in 0u64..1000, nx in 2usize..40, ny in 2usize..40, dx in 0.05f64..2.0, dy in 0.05f64..2.0) {
            let mut rng = StdRng::seed_from_u64(seed);
            let phi = random_field(nx, ny, 1, -1.0, 1.0, &mut rng);
            let d = random_field(nx, ny, 1, 0.05, 3.0, &mut rng);
            let filt = build_fv_filter(dx, dy).unwrap();
            let got = diffusion_apply(&phi, &d, &filt).unwrap();
            let want = fv_operator_direct(&phi, &d, dx, dy);
            prop_assert!(max_rel(&got, &want) <= 1e-13);
        }

        #[test]
        fn operator_split_equals_diffusion_plus_removal(seed in 0u64..1000) {
            let mut rng = StdRng::seed_from_u64(seed);
            let d = random_field(10, 12, 2, 0.2, 2.0, &mut rng);
            let s = random_field(10, 12, 2, 0.0, 1.0, &mut rng);
            let mut phi = random_field(10, 12, 2, 0.0, 1.0, &mut rng);
            phi.zero_halo();
            let spec = BoundarySpec::uniform(BoundaryKind::Vacuum, VacuumMode::ZeroHalo);
            let op = GroupOperator::assemble(Scheme::ConvFem, 0.3, 0.3, &d, &s, &spec).unwrap();
            let split = op.apply(&phi).unwrap();
            let diff = diffusion_apply(&phi, &op.d, &op.filter).unwrap();
            let removal = hadamard_product(&op.sigma_as, &phi).unwrap();
            let whole = diff.add_interior(&removal).unwrap();
            prop_assert!(max_rel(&split, &whole) <= 1e-13);
        }
    }
}
