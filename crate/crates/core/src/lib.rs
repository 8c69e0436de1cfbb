//! Geometry and optimisation on Euclidean pullback manifolds `(R^d, φ*⟨·,·⟩)`,
//! with the iso-connection (Levi-Civita geodesics traversed at constant
//! ℓ²-speed) and the descent, clustering and inverse-problem solvers built on
//! its mappings.
//!
//! Points and tangent vectors are plain `DVector<f64>` in ambient coordinates.

pub mod clustering;
pub mod descent;
pub mod diagnostics;
pub mod diffeo;
pub mod error;
pub mod iso;
pub mod lowrank;
pub mod manifold;
pub mod quadrature;
pub mod registry;
pub mod submanifold;

pub type Point = nalgebra::DVector<f64>;
pub type Vector = nalgebra::DVector<f64>;

pub use clustering::{adjusted_rand_index, euclidean_kmeans, iso_kmeans, riemannian_kmeans, ClusteringResult};
pub use descent::{
    barycentre_field, fixed_step_ird, ird_step, iso_barycentre, iso_barycentre_field, iso_barycentre_fixed_step,
    iso_barycentre_from, ConvergenceTrace, FieldVariant, LineSearchConfig,
};
pub use diagnostics::{iso_lipschitz_ratio, iso_monotonicity_ratio, restricted_isometry_check, IsometryWitnesses};
pub use diffeo::Diffeomorphism;
pub use error::{Error, Result, Stall};
pub use lowrank::{iso_rank_r_approx, RankApprox};
pub use manifold::{PullbackManifold, TangentVector};
pub use quadrature::QuadratureConfig;
pub use submanifold::{convexity_bounds_1d, l2pg_ird, ConvexityTerms, GeodesicSubmanifold, LeastSquares, Objective};
