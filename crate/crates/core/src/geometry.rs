//! Cross-section libraries, lattice descriptions, and rasterisation of
//! assemblies and quarter cores onto the computational grid.

use std::collections::BTreeSet;
use std::path::Path;

use crate::discretisation::BoundaryKind;
use crate::error::{Error, Result};
use crate::field::GridField;
use crate::textfmt::{self, key_value, parse_f64, parse_usize, Line};

/// Tolerance on the fission spectrum normalisation.
const CHI_TOLERANCE: f64 = 1e-12;

/// Which scattering terms enter `D = 1 / (3 (sigma_a + sigma_s))` when `D` is not supplied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiffusionRule {
    /// `sigma_s` is the full out-scatter row sum, within-group term included.
    #[default]
    FullRowSum,
    ExcludeSelfScatter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Material {
    pub name: String,
    pub sigma_a: Vec<f64>,
    /// `sigma_s[from][to]`
    pub sigma_s: Vec<Vec<f64>>,
    pub nu: Vec<f64>,
    pub sigma_f: Vec<f64>,
    pub chi: Vec<f64>,
    /// Diffusion coefficient per group (supplied or derived).
    pub d: Vec<f64>,
    pub d_supplied: bool,
}

impl Material {
    pub fn groups(&self) -> usize {
        self.sigma_a.len()
    }

    pub fn is_fissile(&self) -> bool {
        self.nu.iter().zip(&self.sigma_f).any(|(n, f)| n * f > 0.0)
    }

    /// Total scattering out of group `g`, within-group transfer included.
    pub fn scatter_row_sum(&self, g: usize) -> f64 {
        self.sigma_s[g].iter().sum()
    }

    pub fn derived_d(&self, g: usize, rule: DiffusionRule) -> f64 {
        let mut s = self.scatter_row_sum(g);
        if rule == DiffusionRule::ExcludeSelfScatter {
            s -= self.sigma_s[g][g];
        }
        1.0 / (3.0 * (self.sigma_a[g] + s))
    }

    /// Checks nonnegativity and fission-spectrum normalisation, fills `d` where absent.
    pub fn finalize(mut self, rule: DiffusionRule) -> Result<Self> {
        let n = self.groups();
        let lens = [
            self.sigma_s.len(),
            self.nu.len(),
            self.sigma_f.len(),
            self.chi.len(),
        ];
        for len in lens.into_iter().chain(self.sigma_s.iter().map(|r| r.len())) {
            if len != n {
                return Err(Error::InconsistentGroups {
                    material: self.name.clone(),
                    expected: n,
                    found: len,
                });
            }
        }
        let named: [(&str, &Vec<f64>); 4] = [
            ("sigma_a", &self.sigma_a),
            ("nu", &self.nu),
            ("sigma_f", &self.sigma_f),
            ("chi", &self.chi),
        ];
        for (quantity, values) in named {
            if let Some(&value) = values.iter().find(|v| **v < 0.0) {
                return Err(Error::NegativeCrossSection {
                    material: self.name.clone(),
                    quantity: quantity.to_string(),
                    value,
                });
            }
        }
        if let Some(&value) = self.sigma_s.iter().flatten().find(|v| **v < 0.0) {
            return Err(Error::NegativeCrossSection {
                material: self.name.clone(),
                quantity: "sigma_s".into(),
                value,
            });
        }
        let chi_sum: f64 = self.chi.iter().sum();
        let chi_ok = if self.is_fissile() {
            (chi_sum - 1.0).abs() <= CHI_TOLERANCE
        } else {
            chi_sum == 0.0
        };
        if !chi_ok {
            return Err(Error::InvalidChi {
                material: self.name.clone(),
                sum: chi_sum,
            });
        }
        if self.d_supplied {
            if self.d.len() != n {
                return Err(Error::InconsistentGroups {
                    material: self.name.clone(),
                    expected: n,
                    found: self.d.len(),
                });
            }
            if let Some(&value) = self.d.iter().find(|v| !(**v > 0.0)) {
                return Err(Error::NegativeCrossSection {
                    material: self.name.clone(),
                    quantity: "d".into(),
                    value,
                });
            }
        } else {
            self.d = (0..n).map(|g| self.derived_d(g, rule)).collect();
            if let Some(g) = self.d.iter().position(|v| !v.is_finite()) {
                return Err(Error::NegativeCrossSection {
                    material: self.name.clone(),
                    quantity: format!("total cross-section of group {}", g + 1),
                    value: 0.0,
                });
            }
        }
        Ok(self)
    }
}

/// Materials keyed by name, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSectionLibrary {
    groups: usize,
    materials: Vec<Material>,
}

impl CrossSectionLibrary {
    pub fn new(materials: Vec<Material>) -> Result<Self> {
        let groups = materials.first().map(|m| m.groups()).unwrap_or(0);
        for m in &materials {
            if m.groups() != groups {
                return Err(Error::InconsistentGroups {
                    material: m.name.clone(),
                    expected: groups,
                    found: m.groups(),
                });
            }
        }
        Ok(Self { groups, materials })
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn len(&self) -> usize {
        self.materials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.materials.is_empty()
    }

    pub fn materials(&self) -> &[Material] {
        &self.materials
    }

    pub fn get(&self, name: &str) -> Result<&Material> {
        self.materials
            .iter()
            .find(|m| m.name == name)
            .ok_or_else(|| Error::UnknownMaterial(name.to_string()))
    }
}

pub fn load_cross_sections(path: impl AsRef<Path>) -> Result<CrossSectionLibrary> {
    load_cross_sections_with(path, DiffusionRule::default())
}

pub fn load_cross_sections_with(path: impl AsRef<Path>, rule: DiffusionRule) -> Result<CrossSectionLibrary> {
    let path = path.as_ref();
    parse_cross_sections(&textfmt::read(path)?, path, rule)
}

#[derive(Default)]
struct MaterialDraft {
    name: String,
    line: usize,
    groups: Option<usize>,
    sigma_a: Option<Vec<f64>>,
    rows: Vec<Option<Vec<f64>>>,
    nu: Option<Vec<f64>>,
    sigma_f: Option<Vec<f64>>,
    chi: Option<Vec<f64>>,
    d: Option<Vec<f64>>,
}

impl MaterialDraft {
    fn build(self, path: &Path, rule: DiffusionRule) -> Result<Material> {
        let n = self
            .groups
            .ok_or_else(|| Error::parse(path, self.line, format!("material '{}' has no 'groups' line", self.name)))?;
        let sigma_a = self
            .sigma_a
            .ok_or_else(|| Error::parse(path, self.line, format!("material '{}' has no 'sigma_a' line", self.name)))?;
        let mut sigma_s = Vec::with_capacity(n);
        for (g, row) in self.rows.into_iter().enumerate() {
            sigma_s.push(row.ok_or_else(|| {
                Error::parse(path, self.line, format!("material '{}' is missing sigma_s_row {}", self.name, g + 1))
            })?);
        }
        Material {
            name: self.name,
            sigma_a,
            sigma_s,
            nu: self.nu.unwrap_or_else(|| vec![0.0; n]),
            sigma_f: self.sigma_f.unwrap_or_else(|| vec![0.0; n]),
            chi: self.chi.unwrap_or_else(|| vec![0.0; n]),
            d_supplied: self.d.is_some(),
            d: self.d.unwrap_or_default(),
        }
        .finalize(rule)
    }
}

/// Parses the sectioned cross-section text format:
///
/// ```text
/// [material uox]
/// groups 2
/// sigma_a 0.01 0.08
/// sigma_s_row 1 0.50 0.02
/// sigma_s_row 2 0.00 1.10
/// nu 2.43 2.43
/// sigma_f 0.005 0.10
/// chi 1.0 0.0
/// d 1.4 0.4          # optional
/// ```
pub fn parse_cross_sections(text: &str, path: &Path, rule: DiffusionRule) -> Result<CrossSectionLibrary> {
    let mut drafts: Vec<MaterialDraft> = Vec::new();
    for item in textfmt::lines(text, path) {
        let (line, kind) = item?;
        match kind {
            Line::Section(parts) => {
                if parts.len() != 2 || parts[0] != "material" {
                    return Err(Error::parse(path, line, "expected '[material <name>]'"));
                }
                if drafts.iter().any(|d| d.name == parts[1]) {
                    return Err(Error::parse(path, line, format!("duplicate material '{}'", parts[1])));
                }
                drafts.push(MaterialDraft {
                    name: parts[1].to_string(),
                    line,
                    ..Default::default()
                });
            }
            Line::Content(body) => {
                let draft = drafts
                    .last_mut()
                    .ok_or_else(|| Error::parse(path, line, "data before the first [material] section"))?;
                let mut toks = body.split_whitespace();
                let key = toks.next().unwrap_or_default();
                let rest: Vec<&str> = toks.collect();
                if key == "groups" {
                    if rest.len() != 1 {
                        return Err(Error::parse(path, line, "'groups' takes one integer"));
                    }
                    let n = parse_usize(rest[0], path, line)?;
                    if n == 0 {
                        return Err(Error::parse(path, line, "'groups' must be positive"));
                    }
                    draft.groups = Some(n);
                    draft.rows = vec![None; n];
                    continue;
                }
                let n = draft
                    .groups
                    .ok_or_else(|| Error::parse(path, line, "'groups' must come before any data line"))?;
                let (values, row) = if key == "sigma_s_row" {
                    let g = rest
                        .first()
                        .ok_or_else(|| Error::parse(path, line, "sigma_s_row needs a group index"))
                        .and_then(|t| parse_usize(t, path, line))?;
                    if g == 0 || g > n {
                        return Err(Error::parse(path, line, format!("sigma_s_row index {g} outside 1..={n}")));
                    }
                    (&rest[1..], Some(g - 1))
                } else {
                    (&rest[..], None)
                };
                if values.len() != n {
                    return Err(Error::parse(
                        path,
                        line,
                        format!("'{key}' has {} values, expected {n}", values.len()),
                    ));
                }
                let values = values
                    .iter()
                    .map(|t| parse_f64(t, path, line))
                    .collect::<Result<Vec<_>>>()?;
                let slot = match (key, row) {
                    ("sigma_s_row", Some(g)) => &mut draft.rows[g],
                    ("sigma_a", _) => &mut draft.sigma_a,
                    ("nu", _) => &mut draft.nu,
                    ("sigma_f", _) => &mut draft.sigma_f,
                    ("chi", _) => &mut draft.chi,
                    ("d", _) => &mut draft.d,
                    _ => return Err(Error::parse(path, line, format!("unknown keyword '{key}'"))),
                };
                if slot.is_some() {
                    return Err(Error::parse(path, line, format!("'{key}' given twice")));
                }
                *slot = Some(values);
            }
        }
    }
    let materials = drafts
        .into_iter()
        .map(|d| d.build(path, rule))
        .collect::<Result<Vec<_>>>()?;
    CrossSectionLibrary::new(materials)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellType {
    Fuel,
    /// Guide tube: moderator or control rod depending on rod state.
    Guide,
    Moderator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RodState {
    Withdrawn,
    Inserted,
}

impl std::str::FromStr for RodState {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "withdrawn" | "w" => Ok(RodState::Withdrawn),
            "inserted" | "i" => Ok(RodState::Inserted),
            other => Err(format!("unknown rod state '{other}' (expected withdrawn or inserted)")),
        }
    }
}

/// 3x3 rod states of the fuel assemblies in a quarter core; row 0 is the top row.
pub type CoreMap = [[RodState; 3]; 3];

/// Parses `WWI/WIW/IWW` (rows top to bottom).
pub fn parse_core_map(s: &str) -> std::result::Result<CoreMap, String> {
    let rows: Vec<&str> = s.split('/').map(str::trim).collect();
    if rows.len() != 3 {
        return Err(format!("core map '{s}' must have 3 rows separated by '/'"));
    }
    let mut map = [[RodState::Withdrawn; 3]; 3];
    for (r, row) in rows.iter().enumerate() {
        let chars: Vec<char> = row.chars().collect();
        if chars.len() != 3 {
            return Err(format!("core map row '{row}' must have 3 entries"));
        }
        for (c, ch) in chars.iter().enumerate() {
            map[r][c] = match ch.to_ascii_uppercase() {
                'W' => RodState::Withdrawn,
                'I' => RodState::Inserted,
                other => return Err(format!("core map entry '{other}' is not W or I")),
            };
        }
    }
    Ok(map)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSpec {
    pub pitch_cm: f64,
    pub cells_per_lattice_cell: usize,
    pub inner_region_cells: usize,
    /// Lattice map, row 0 at the top (largest y).
    pub map: Vec<Vec<CellType>>,
    pub fuel_material: String,
    pub moderator_material: String,
    pub control_material: String,
}

/// 17x17 PWR guide-tube layout (24 guide tubes plus the central instrument tube).
pub const DEFAULT_GUIDE_POSITIONS: [(usize, usize); 25] = [
    (2, 5), (2, 8), (2, 11),
    (3, 3), (3, 13),
    (5, 2), (5, 5), (5, 8), (5, 11), (5, 14),
    (8, 2), (8, 5), (8, 8), (8, 11), (8, 14),
    (11, 2), (11, 5), (11, 8), (11, 11), (11, 14),
    (13, 3), (13, 13),
    (14, 5), (14, 8), (14, 11),
];

pub const DEFAULT_PITCH_CM: f64 = 21.42 / 17.0;

impl LatticeSpec {
    /// The shipped 17x17 template: 264 fuel cells and 25 guide tubes.
    pub fn default_assembly(cells_per_lattice_cell: usize) -> Self {
        let mut map = vec![vec![CellType::Fuel; 17]; 17];
        for (r, c) in DEFAULT_GUIDE_POSITIONS {
            map[r][c] = CellType::Guide;
        }
        let inner_region_cells = match cells_per_lattice_cell {
            20 => 12,
            10 => 6,
            n => (n * 3) / 5,
        };
        Self {
            pitch_cm: DEFAULT_PITCH_CM,
            cells_per_lattice_cell,
            inner_region_cells,
            map,
            fuel_material: "uox".into(),
            moderator_material: "moderator".into(),
            control_material: "control".into(),
        }
    }

    pub fn lattice_dims(&self) -> (usize, usize) {
        (self.map.first().map_or(0, |r| r.len()), self.map.len())
    }

    pub fn dx(&self) -> f64 {
        self.pitch_cm / self.cells_per_lattice_cell as f64
    }

    pub fn count(&self, kind: CellType) -> usize {
        self.map.iter().flatten().filter(|c| **c == kind).count()
    }

    pub fn validate(&self) -> Result<()> {
        let (cols, rows) = self.lattice_dims();
        if rows == 0 || cols == 0 {
            return Err(Error::GridIndivisible("lattice map is empty".into()));
        }
        if self.map.iter().any(|r| r.len() != cols) {
            return Err(Error::GridIndivisible("lattice map rows differ in length".into()));
        }
        if self.cells_per_lattice_cell == 0 {
            return Err(Error::GridIndivisible("cells_per_lattice_cell must be positive".into()));
        }
        if self.inner_region_cells > self.cells_per_lattice_cell {
            return Err(Error::GridIndivisible(format!(
                "inner region of {} cells does not fit in a {}-cell lattice cell",
                self.inner_region_cells, self.cells_per_lattice_cell
            )));
        }
        if (self.cells_per_lattice_cell - self.inner_region_cells) % 2 != 0 {
            return Err(Error::GridIndivisible(format!(
                "inner region of {} cells cannot be centred in {} cells",
                self.inner_region_cells, self.cells_per_lattice_cell
            )));
        }
        if !(self.pitch_cm > 0.0) {
            return Err(Error::NonPositiveSpacing(self.pitch_cm));
        }
        Ok(())
    }

    fn role_name(&self, role: Role) -> &str {
        match role {
            Role::Fuel => &self.fuel_material,
            Role::Moderator => &self.moderator_material,
            Role::Control => &self.control_material,
        }
    }
}

/// Material role of a rasterised cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Role {
    Fuel,
    Moderator,
    Control,
}

/// Cells of one lattice cell, row-major by `j` (bottom row first).
///
/// The central `inner_region_cells` square gets the rod material, the rest moderator.
pub fn rasterise_lattice_cell(kind: CellType, rods: RodState, spec: &LatticeSpec) -> Vec<Role> {
    let c = spec.cells_per_lattice_cell;
    let inner = spec.inner_region_cells;
    let lo = (c - inner) / 2;
    let inner_role = match (kind, rods) {
        (CellType::Fuel, _) => Role::Fuel,
        (CellType::Guide, RodState::Inserted) => Role::Control,
        (CellType::Guide, RodState::Withdrawn) | (CellType::Moderator, _) => Role::Moderator,
    };
    (0..c * c)
        .map(|k| {
            let (i, j) = (k % c, k / c);
            if (lo..lo + inner).contains(&i) && (lo..lo + inner).contains(&j) {
                inner_role
            } else {
                Role::Moderator
            }
        })
        .collect()
}

/// Material ids on a uniform grid plus edge tags.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialLayout {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    /// Index into `palette` per interior cell, row-major by `j`.
    pub ids: Vec<usize>,
    pub palette: Vec<String>,
    pub edges: [BoundaryKind; 4],
    /// Cells outside every fuel assembly (core layouts only).
    pub reflector_cells: usize,
}

impl MaterialLayout {
    pub fn uniform(nx: usize, ny: usize, dx: f64, dy: f64, material: &str, edges: [BoundaryKind; 4]) -> Self {
        Self {
            nx,
            ny,
            dx,
            dy,
            ids: vec![0; nx * ny],
            palette: vec![material.to_string()],
            edges,
            reflector_cells: 0,
        }
    }

    pub fn interior_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn halo_cells(&self, halo: usize) -> usize {
        (self.nx + 2 * halo) * (self.ny + 2 * halo) - self.interior_cells()
    }

    pub fn material_at(&self, i: usize, j: usize) -> &str {
        &self.palette[self.ids[j * self.nx + i]]
    }

    pub fn count_material(&self, name: &str) -> usize {
        match self.palette.iter().position(|p| p == name) {
            Some(id) => self.ids.iter().filter(|v| **v == id).count(),
            None => 0,
        }
    }

    fn from_roles(nx: usize, ny: usize, dx: f64, roles: &[Role], spec: &LatticeSpec, edges: [BoundaryKind; 4]) -> Self {
        let used: BTreeSet<Role> = roles.iter().copied().collect();
        let used: Vec<Role> = used.into_iter().collect();
        let palette = used.iter().map(|r| spec.role_name(*r).to_string()).collect();
        let ids = roles.iter().map(|r| used.iter().position(|u| u == r).unwrap()).collect();
        Self {
            nx,
            ny,
            dx,
            dy: dx,
            ids,
            palette,
            edges,
            reflector_cells: 0,
        }
    }

    /// Per-group material fields on a grid with `halo` layers (halo cells zero).
    pub fn material_fields(&self, lib: &CrossSectionLibrary, halo: usize) -> Result<MaterialFields> {
        let mats = self
            .palette
            .iter()
            .map(|name| lib.get(name))
            .collect::<Result<Vec<_>>>()?;
        let n = lib.groups();
        let field = |f: &dyn Fn(&Material) -> f64| {
            GridField::from_interior_fn(self.nx, self.ny, halo, |i, j| f(mats[self.ids[j * self.nx + i]]))
        };
        let per_group = |f: &dyn Fn(&Material, usize) -> f64| -> Vec<GridField> {
            (0..n).map(|g| field(&|m| f(m, g))).collect()
        };
        let scatter = (0..n)
            .map(|from| {
                (0..n)
                    .map(|to| {
                        if mats.iter().any(|m| m.sigma_s[from][to] != 0.0) {
                            Some(field(&|m| m.sigma_s[from][to]))
                        } else {
                            None
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(MaterialFields {
            nx: self.nx,
            ny: self.ny,
            halo,
            dx: self.dx,
            dy: self.dy,
            edges: self.edges,
            d: per_group(&|m, g| m.d[g]),
            sigma_a: per_group(&|m, g| m.sigma_a[g]),
            out_scatter: per_group(&|m, g| m.scatter_row_sum(g)),
            nu_sigma_f: per_group(&|m, g| m.nu[g] * m.sigma_f[g]),
            chi: per_group(&|m, g| m.chi[g]),
            scatter,
        })
    }
}

/// Per-group coefficient fields for one layout.
#[derive(Debug, Clone)]
pub struct MaterialFields {
    pub nx: usize,
    pub ny: usize,
    pub halo: usize,
    pub dx: f64,
    pub dy: f64,
    pub edges: [BoundaryKind; 4],
    pub d: Vec<GridField>,
    pub sigma_a: Vec<GridField>,
    /// Removal by scattering, balanced against the within-group term of the source.
    pub out_scatter: Vec<GridField>,
    pub nu_sigma_f: Vec<GridField>,
    pub chi: Vec<GridField>,
    /// `scatter[from][to]`, `None` where the transfer is zero everywhere.
    pub scatter: Vec<Vec<Option<GridField>>>,
}

impl MaterialFields {
    pub fn groups(&self) -> usize {
        self.d.len()
    }
}

fn check_materials(spec: &LatticeSpec, lib: &CrossSectionLibrary, roles: &[Role]) -> Result<()> {
    let used: BTreeSet<Role> = roles.iter().copied().collect();
    for r in used {
        lib.get(spec.role_name(r))?;
    }
    Ok(())
}

/// Rasterises a lattice spec into `out` (row-major by `j`, width `stride`) with
/// its bottom-left corner at `(i0, j0)`.
fn paint_lattice(spec: &LatticeSpec, rods: RodState, out: &mut [Role], stride: usize, i0: usize, j0: usize) {
    let c = spec.cells_per_lattice_cell;
    let (_, rows) = spec.lattice_dims();
    for (r, row) in spec.map.iter().enumerate() {
        for (col, kind) in row.iter().enumerate() {
            let block = rasterise_lattice_cell(*kind, rods, spec);
            let (bi, bj) = (i0 + col * c, j0 + (rows - 1 - r) * c);
            for (k, role) in block.iter().enumerate() {
                out[(bj + k / c) * stride + bi + k % c] = *role;
            }
        }
    }
}

/// A single assembly with vacuum on all four edges.
pub fn build_assembly(spec: &LatticeSpec, lib: &CrossSectionLibrary, rods: RodState) -> Result<MaterialLayout> {
    spec.validate()?;
    let c = spec.cells_per_lattice_cell;
    let (cols, rows) = spec.lattice_dims();
    let (nx, ny) = (cols * c, rows * c);
    let mut roles = vec![Role::Moderator; nx * ny];
    paint_lattice(spec, rods, &mut roles, nx, 0, 0);
    check_materials(spec, lib, &roles)?;
    Ok(MaterialLayout::from_roles(nx, ny, spec.dx(), &roles, spec, [BoundaryKind::Vacuum; 4]))
}

/// Quarter core: 3x3 assemblies in the top-left of a 4x4 assembly-width domain,
/// moderator reflector along the right and bottom. Left and top edges are
/// reflective symmetry planes, right and bottom are vacuum.
pub fn build_core(core_map: &CoreMap, spec: &LatticeSpec, lib: &CrossSectionLibrary) -> Result<MaterialLayout> {
    spec.validate()?;
    let (cols, rows) = spec.lattice_dims();
    if cols != rows {
        return Err(Error::GridIndivisible("core assemblies must be square lattices".into()));
    }
    let a = cols * spec.cells_per_lattice_cell;
    let n = 4 * a;
    let mut roles = vec![Role::Moderator; n * n];
    for (r, row) in core_map.iter().enumerate() {
        for (q, rods) in row.iter().enumerate() {
            paint_lattice(spec, *rods, &mut roles, n, q * a, (3 - r) * a);
        }
    }
    check_materials(spec, lib, &roles)?;
    let mut edges = [BoundaryKind::Vacuum; 4];
    edges[0] = BoundaryKind::Reflective; // left
    edges[3] = BoundaryKind::Reflective; // top
    let mut layout = MaterialLayout::from_roles(n, n, spec.dx(), &roles, spec, edges);
    layout.reflector_cells = n * n - 9 * a * a;
    Ok(layout)
}

/// Parsed geometry file: a lattice and an optional quarter-core map.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryFile {
    pub lattice: LatticeSpec,
    pub core: Option<CoreMap>,
}

pub fn load_geometry(path: impl AsRef<Path>) -> Result<GeometryFile> {
    let path = path.as_ref();
    parse_geometry(&textfmt::read(path)?, path)
}

/// Parses a `[lattice]` block (keys plus one row of `F`/`G`/`M` codes per
/// lattice row, top row first) and an optional `[core]` block of three `W`/`I` rows.
pub fn parse_geometry(text: &str, path: &Path) -> Result<GeometryFile> {
    #[derive(PartialEq)]
    enum Block {
        None,
        Lattice,
        Core,
    }
    let mut block = Block::None;
    let mut pitch = None;
    let mut cells = None;
    let mut inner = None;
    let mut names = [
        ("fuel_material", "uox".to_string()),
        ("moderator_material", "moderator".to_string()),
        ("control_material", "control".to_string()),
    ];
    let mut map: Vec<Vec<CellType>> = Vec::new();
    let mut core_rows: Vec<String> = Vec::new();
    let mut saw_lattice = false;
    let mut last_line = 0;

    for item in textfmt::lines(text, path) {
        let (line, kind) = item?;
        last_line = line;
        match kind {
            Line::Section(parts) => {
                block = match parts.as_slice() {
                    ["lattice"] => {
                        saw_lattice = true;
                        Block::Lattice
                    }
                    ["core"] => Block::Core,
                    _ => return Err(Error::parse(path, line, format!("unknown section [{}]", parts.join(" ")))),
                };
            }
            Line::Content(body) => match block {
                Block::None => return Err(Error::parse(path, line, "data before the first section")),
                Block::Lattice => {
                    if body.chars().all(|c| matches!(c, 'F' | 'G' | 'M')) {
                        map.push(
                            body.chars()
                                .map(|c| match c {
                                    'F' => CellType::Fuel,
                                    'G' => CellType::Guide,
                                    _ => CellType::Moderator,
                                })
                                .collect(),
                        );
                        continue;
                    }
                    let (key, value) = key_value(body);
                    match key {
                        "pitch_cm" => pitch = Some(parse_f64(value, path, line)?),
                        "cells_per_lattice_cell" => cells = Some(parse_usize(value, path, line)?),
                        "inner_region_cells" => inner = Some(parse_usize(value, path, line)?),
                        _ => match names.iter_mut().find(|(k, _)| *k == key) {
                            Some((_, slot)) if !value.is_empty() => *slot = value.to_string(),
                            _ => return Err(Error::parse(path, line, format!("unrecognised lattice line '{body}'"))),
                        },
                    }
                }
                Block::Core => {
                    if core_rows.len() == 3 {
                        return Err(Error::parse(path, line, "[core] takes exactly 3 rows"));
                    }
                    core_rows.push(body.to_string());
                    parse_core_map(&format!("{body}/WWW/WWW")).map_err(|m| Error::parse(path, line, m))?;
                }
            },
        }
    }
    if !saw_lattice {
        return Err(Error::parse(path, last_line, "missing [lattice] section"));
    }
    fn need<T>(v: Option<T>, key: &str, path: &Path, line: usize) -> Result<T> {
        v.ok_or_else(|| Error::parse(path, line, format!("[lattice] is missing '{key}'")))
    }
    let cells = need(cells, "cells_per_lattice_cell", path, last_line)?;
    let lattice = LatticeSpec {
        pitch_cm: need(pitch, "pitch_cm", path, last_line)?,
        cells_per_lattice_cell: cells,
        inner_region_cells: need(inner, "inner_region_cells", path, last_line)?,
        map,
        fuel_material: names[0].1.clone(),
        moderator_material: names[1].1.clone(),
        control_material: names[2].1.clone(),
    };
    lattice.validate().map_err(|e| Error::parse(path, last_line, e.to_string()))?;
    let core = match core_rows.len() {
        0 => None,
        3 => Some(parse_core_map(&core_rows.join("/")).map_err(|m| Error::parse(path, last_line, m))?),
        n => return Err(Error::parse(path, last_line, format!("[core] has {n} rows, expected 3"))),
    };
    Ok(GeometryFile { lattice, core })
}
