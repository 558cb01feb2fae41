//! Multigroup neutron diffusion on structured grids, with every operator
//! written as stencil convolutions over halo-padded fields.
//!
//! The pipeline is: [`geometry`] rasterises a lattice and a cross-section
//! library into per-group fields, [`discretisation`] turns them into group
//! operators (finite volume or quadratic ConvFEM), [`multigrid`] solves single
//! groups, and [`eigen`] drives multigroup sweeps inside a power iteration.
//! [`oracle`] solves the same systems with explicit sparse Gauss-Seidel.

pub mod config;
pub mod discretisation;
pub mod eigen;
pub mod error;
pub mod field;
pub mod geometry;
pub mod multigrid;
pub mod oracle;
pub mod run;
mod textfmt;

pub use discretisation::{
    BoundaryKind, BoundarySpec, DiscretisationOptions, DiscretisedProblem, Edge, GroupOperator, Scheme, VacuumMode,
};
pub use eigen::{EigenSolveState, PowerControls, SweepMode};
pub use error::{Error, Result};
pub use field::{GridField, Norms, Region, StencilFilter};
pub use geometry::{CrossSectionLibrary, LatticeSpec, Material, MaterialFields, MaterialLayout, RodState};
pub use multigrid::MultigridHierarchy;
