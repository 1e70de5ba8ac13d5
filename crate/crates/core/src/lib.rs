//! Mass-lumped virtual element method (VEM) for the 2D heat equation on
//! general polygonal meshes, advanced in time with explicit strong-stability-
//! preserving Runge-Kutta schemes.
//!
//! The pipeline is:
//!
//! 1. [`mesh`]: polygonal meshes of the unit square (distorted quads,
//!    serendipity-style 8-vertex quads, clipped Voronoi cells) and their I/O.
//! 2. [`poly`]: scaled monomials, exact polygon moments and quadrature.
//! 3. [`projectors`]: DOF layouts, the DOF matrix and the energy / L² projectors.
//! 4. [`assembly`]: local stiffness, row-sum lumped mass with flooring, global
//!    system with Dirichlet elimination.
//! 5. [`spectral`]: largest eigenvalue of `M̂⁻¹K` and CFL step limits.
//! 6. [`timeint`]: forward Euler and SSP Runge-Kutta integrators.
//! 7. [`harness`]: manufactured solution, error norms and convergence studies.

pub mod assembly;
pub mod error;
pub mod harness;
pub(crate) mod linalg;
pub mod mesh;
pub mod poly;
pub mod projectors;
pub mod spectral;
pub mod timeint;

pub use assembly::{
    assemble_load, assemble_system, local_consistent_mass, local_stiffness, lumped_weights,
    CsrMatrix, LumpedWeights, SystemMatrices, DEFAULT_DELTA,
};
pub use error::{Error, Result};
pub use harness::{
    manufactured_case, run_convergence, ConvergenceConfig, DtPolicy, EocTable, ErrorReport,
    ManufacturedCase,
};
pub use mesh::{generate_mesh, Cell, CellGeometry, Mesh, MeshFamily, MeshParams, MeshStats, Point2};
pub use poly::{MonomialBasis, MultiIndex};
pub use projectors::{build_projectors, interpolate_dofs, DofLayout, DofSlot, ProjectorPack};
pub use spectral::{dt_limits, lambda_max_power, PowerOptions, SpectralReport};
pub use timeint::{integrate, ssp_step, IntegratorKind, Load, StepState, Tableau};
