//! Run configuration: a sectioned `key = value` file naming the geometry and
//! cross-section files and the solver settings.
//!
//! ```text
//! [problem]
//! geometry = assembly.geom        # paths are relative to this file
//! cross_sections = synthetic7.xs
//! kind = assembly                 # assembly | core
//! rods = withdrawn                # assemblies only
//! scheme = fv                     # fv | convfem
//!
//! [solver]
//! n_levels = 3
//! jacobi_iters_per_level = 2
//! mg_cycles = 100
//! ```

use std::path::{Path, PathBuf};

use crate::discretisation::{DiscretisationOptions, DiscretisedProblem, Scheme, VacuumMode};
use crate::eigen::{PowerControls, SweepMode};
use crate::error::{Error, Result};
use crate::geometry::{
    build_assembly, build_core, load_cross_sections_with, load_geometry, parse_core_map, CoreMap, CrossSectionLibrary,
    DiffusionRule, MaterialLayout, RodState,
};
use crate::textfmt::{self, key_value, parse_f64, parse_usize, Line};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Assembly,
    Core,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// The file this configuration was read from.
    pub path: PathBuf,
    pub geometry: PathBuf,
    pub cross_sections: PathBuf,
    pub kind: ProblemKind,
    pub rods: RodState,
    pub core_map: Option<CoreMap>,
    pub scheme: Scheme,
    /// `None` picks the scheme's default treatment.
    pub vacuum_mode: Option<VacuumMode>,
    pub convfem_constrained_reflective: bool,
    pub d_rule: DiffusionRule,

    pub n_levels: usize,
    pub jacobi_iters_per_level: usize,
    pub mg_cycles: usize,
    /// Relative residual at which a group solve stops early; 0 runs every cycle.
    pub mg_tol: f64,
    pub multigroup_mode: SweepMode,
    pub sweeps_per_power_iter: usize,
    pub max_power_iters: usize,
    pub k_tol: f64,
    pub flux_tol: f64,

    pub gs_tol: f64,
    pub gs_max_iters: usize,
    pub compare_bound: f64,
    pub bench_repeats: usize,
    pub bench_jacobi_iters: usize,

    pub output_dir: PathBuf,
    pub seed: u64,
}

impl RunConfig {
    fn defaults(path: &Path) -> Self {
        Self {
            path: path.to_path_buf(),
            geometry: PathBuf::new(),
            cross_sections: PathBuf::new(),
            kind: ProblemKind::Assembly,
            rods: RodState::Withdrawn,
            core_map: None,
            scheme: Scheme::Fv,
            vacuum_mode: None,
            convfem_constrained_reflective: false,
            d_rule: DiffusionRule::FullRowSum,
            n_levels: crate::multigrid::DEFAULT_LEVELS,
            jacobi_iters_per_level: 2,
            mg_cycles: 100,
            mg_tol: 0.0,
            multigroup_mode: SweepMode::GaussSeidel,
            sweeps_per_power_iter: 1,
            max_power_iters: 100,
            k_tol: 1e-10,
            flux_tol: 1e-10,
            gs_tol: 1e-15,
            gs_max_iters: 100_000,
            compare_bound: 1e-8,
            bench_repeats: 400,
            bench_jacobi_iters: 100,
            output_dir: PathBuf::from("output"),
            seed: 0,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&textfmt::read(path)?, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let resolve = |v: &str| {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        let mut cfg = Self::defaults(path);
        cfg.output_dir = resolve("output");
        let mut section = String::new();
        let mut seen_geometry = false;
        let mut seen_xs = false;

        for item in textfmt::lines(text, path) {
            let (line, kind) = item?;
            let body = match kind {
                Line::Section(parts) => {
                    section = parts.join(" ");
                    if !["problem", "solver", "oracle", "compare", "bench", "output"].contains(&section.as_str()) {
                        return Err(Error::parse(path, line, format!("unknown section [{section}]")));
                    }
                    continue;
                }
                Line::Content(body) => body,
            };
            let (key, value) = key_value(body);
            if value.is_empty() {
                return Err(Error::parse(path, line, format!("'{key}' has no value")));
            }
            let err = |m: String| Error::parse(path, line, m);
            let positive = |v: usize| {
                if v >= 1 {
                    Ok(v)
                } else {
                    Err(Error::parse(path, line, format!("'{key}' must be at least 1")))
                }
            };
            let tolerance = |v: f64| {
                if v > 0.0 {
                    Ok(v)
                } else {
                    Err(Error::parse(path, line, format!("'{key}' must be positive")))
                }
            };
            match (section.as_str(), key) {
                ("problem", "geometry") => {
                    cfg.geometry = resolve(value);
                    seen_geometry = true;
                }
                ("problem", "cross_sections") => {
                    cfg.cross_sections = resolve(value);
                    seen_xs = true;
                }
                ("problem", "kind") => {
                    cfg.kind = match value {
                        "assembly" => ProblemKind::Assembly,
                        "core" => ProblemKind::Core,
                        other => return Err(err(format!("unknown kind '{other}' (expected assembly or core)"))),
                    }
                }
                ("problem", "rods") => cfg.rods = value.parse().map_err(err)?,
                ("problem", "core_map") => cfg.core_map = Some(parse_core_map(value).map_err(err)?),
                ("problem", "scheme") => cfg.scheme = value.parse().map_err(err)?,
                ("problem", "vacuum_mode") => {
                    cfg.vacuum_mode = match value {
                        "auto" => None,
                        v => Some(v.parse().map_err(err)?),
                    }
                }
                ("problem", "convfem_constrained_reflective") => {
                    cfg.convfem_constrained_reflective = parse_bool(value).ok_or_else(|| err(format!("'{value}' is not true or false")))?
                }
                ("problem", "d_rule") => {
                    cfg.d_rule = match value {
                        "full_row_sum" => DiffusionRule::FullRowSum,
                        "exclude_self_scatter" => DiffusionRule::ExcludeSelfScatter,
                        other => {
                            return Err(err(format!(
                                "unknown d_rule '{other}' (expected full_row_sum or exclude_self_scatter)"
                            )))
                        }
                    }
                }
                ("solver", "n_levels") => cfg.n_levels = positive(parse_usize(value, path, line)?)?,
                ("solver", "jacobi_iters_per_level") => {
                    cfg.jacobi_iters_per_level = positive(parse_usize(value, path, line)?)?
                }
                ("solver", "mg_cycles") => cfg.mg_cycles = positive(parse_usize(value, path, line)?)?,
                ("solver", "mg_tol") => {
                    let v = parse_f64(value, path, line)?;
                    if v < 0.0 {
                        return Err(err("'mg_tol' must not be negative".into()));
                    }
                    cfg.mg_tol = v;
                }
                ("solver", "multigroup_mode") => cfg.multigroup_mode = value.parse().map_err(err)?,
                ("solver", "sweeps_per_power_iter") => {
                    cfg.sweeps_per_power_iter = positive(parse_usize(value, path, line)?)?
                }
                ("solver", "max_power_iters") => cfg.max_power_iters = positive(parse_usize(value, path, line)?)?,
                ("solver", "k_tol") => cfg.k_tol = tolerance(parse_f64(value, path, line)?)?,
                ("solver", "flux_tol") => cfg.flux_tol = tolerance(parse_f64(value, path, line)?)?,
                ("oracle", "gs_tol") => cfg.gs_tol = tolerance(parse_f64(value, path, line)?)?,
                ("oracle", "gs_max_iters") => cfg.gs_max_iters = positive(parse_usize(value, path, line)?)?,
                ("compare", "bound") => cfg.compare_bound = tolerance(parse_f64(value, path, line)?)?,
                ("bench", "repeats") => cfg.bench_repeats = positive(parse_usize(value, path, line)?)?,
                ("bench", "jacobi_iters") => cfg.bench_jacobi_iters = positive(parse_usize(value, path, line)?)?,
                ("output", "dir") => cfg.output_dir = resolve(value),
                ("output", "seed") => {
                    cfg.seed = value.parse().map_err(|_| err(format!("'{value}' is not a non-negative integer")))?
                }
                ("", _) => return Err(err(format!("'{key}' appears before any section"))),
                (s, k) => return Err(err(format!("unknown key '{k}' in [{s}]"))),
            }
        }
        let last = text.lines().count().max(1);
        if !seen_geometry {
            return Err(Error::parse(path, last, "[problem] is missing 'geometry'"));
        }
        if !seen_xs {
            return Err(Error::parse(path, last, "[problem] is missing 'cross_sections'"));
        }
        Ok(cfg)
    }

    pub fn controls(&self) -> PowerControls {
        PowerControls {
            max_power_iters: self.max_power_iters,
            k_tol: self.k_tol,
            flux_tol: self.flux_tol,
            sweeps_per_power_iter: self.sweeps_per_power_iter,
            mode: self.multigroup_mode,
        }
    }

    pub fn discretisation_options(&self) -> DiscretisationOptions {
        DiscretisationOptions {
            scheme: self.scheme,
            vacuum_mode: self.vacuum_mode,
            convfem_constrained_reflective: self.convfem_constrained_reflective,
        }
    }

    pub fn library(&self) -> Result<CrossSectionLibrary> {
        load_cross_sections_with(&self.cross_sections, self.d_rule)
    }

    /// Rasterised layout for this configuration.
    pub fn layout(&self, lib: &CrossSectionLibrary) -> Result<MaterialLayout> {
        let geom = load_geometry(&self.geometry)?;
        match self.kind {
            ProblemKind::Assembly => build_assembly(&geom.lattice, lib, self.rods),
            ProblemKind::Core => {
                let map = self.core_map.or(geom.core).ok_or_else(|| {
                    Error::Config(format!(
                        "{}: core problems need a core map ([core] in {} or 'core_map' in [problem])",
                        self.path.display(),
                        self.geometry.display()
                    ))
                })?;
                build_core(&map, &geom.lattice, lib)
            }
        }
    }

    /// Loads the data files and discretises the problem on the finest grid.
    pub fn build_problem(&self) -> Result<(MaterialLayout, DiscretisedProblem)> {
        let lib = self.library()?;
        let layout = self.layout(&lib)?;
        let fields = layout.material_fields(&lib, self.scheme.halo())?;
        let problem = DiscretisedProblem::new(fields, &self.discretisation_options())?;
        Ok((layout, problem))
    }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Some(true),
        "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_sections() {
        let text = "
[problem]
geometry = geo/a.geom
cross_sections = /abs/x.xs
kind = core
core_map = WWI/WIW/IWW
scheme = convfem
vacuum_mode = zero_halo
convfem_constrained_reflective = true
d_rule = exclude_self_scatter
[solver]
n_levels = 4
jacobi_iters_per_level = 5
mg_cycles = 50
mg_tol = 1e-12
multigroup_mode = jacobi
max_power_iters = 300
k_tol = 1e-9
[oracle]
gs_tol = 1e-13
[compare]
bound = 1e-7
[bench]
repeats = 3
[output]
dir = out
seed = 42
";
        let c = RunConfig::parse(text, Path::new("/cfg/run.cfg")).unwrap();
        assert_eq!(c.geometry, PathBuf::from("/cfg/geo/a.geom"));
        assert_eq!(c.cross_sections, PathBuf::from("/abs/x.xs"));
        assert_eq!(c.kind, ProblemKind::Core);
        assert_eq!(c.scheme, Scheme::ConvFem);
        assert_eq!(c.vacuum_mode, Some(VacuumMode::ZeroHalo));
        assert!(c.convfem_constrained_reflective);
        assert_eq!(c.d_rule, DiffusionRule::ExcludeSelfScatter);
        assert_eq!((c.n_levels, c.jacobi_iters_per_level, c.mg_cycles), (4, 5, 50));
        assert_eq!(c.multigroup_mode, SweepMode::Jacobi);
        assert_eq!(c.controls().max_power_iters, 300);
        assert_eq!(c.gs_tol, 1e-13);
        assert_eq!(c.compare_bound, 1e-7);
        assert_eq!(c.bench_repeats, 3);
        assert_eq!(c.output_dir, PathBuf::from("/cfg/out"));
        assert_eq!(c.seed, 42);
        assert_eq!(c.core_map.unwrap()[0][2], RodState::Inserted);
    }

    #[test]
    fn errors_name_the_line() {
        let cases = [
            ("[problem]\ngeometry = a\ncross_sections = b\n[solver]\nmg_cycles = 0\n", 5),
            ("[problem]\ngeometry = a\nbogus = 1\n", 3),
            ("[problem]\nscheme = fem\n", 2),
            ("[solver]\nk_tol = -1\n", 2),
            ("[problem]\ngeometry = a\n", 2),
            ("geometry = a\n", 1),
        ];
        for (text, want) in cases {
            match RunConfig::parse(text, Path::new("c.cfg")) {
                Err(Error::Parse { line, .. }) => assert_eq!(line, want, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }
}
