//! Monotone finite-difference schemes for level-set Hamilton–Jacobi equations with
//! quasiconcave solutions (Tukey depth, eikonal, curvature flows) on grids and point clouds.

pub mod calculus;
pub mod cli;
pub mod density;
pub mod error;
pub mod field;
pub mod geometry;
pub mod io;
pub mod oracles;
pub mod schemes;
pub mod shape;
pub mod solver;

pub use calculus::{directional_gradient, quasiconcavity_gap, second_difference, subdifferential, SubdifferentialSet};
pub use density::{DensityKind, DensityModel, McParams};
pub use error::{Error, Result};
pub use field::ScalarField;
pub use geometry::{build_grid_cloud, build_grid_cloud_with, build_knn_cloud, build_knn_cloud_with, BoundarySpec, CloudOptions, PointCloud, Stencil, StencilKind};
pub use schemes::{scheme_value, Estimator, GFunction, Hamiltonian, Rhs, Scheme, SchemeSpec};
pub use shape::Shape;
pub use solver::{coarse_to_fine, node_update, residual, solve, SolveOptions, SolveReport, StopReason};
