//! Manifold-aware ICP registration of point clouds of symmetric
//! positive-definite matrices, and its application to transferring robot
//! manipulability ellipsoids between kinematic systems.
//!
//! The pipeline aligns a teacher cloud `𝒯` with a student cloud `𝒮` by
//! (optionally) parallel-transporting `𝒯` onto the student mean, recentering
//! both clouds at the identity, matching their dispersions with a matrix
//! power, fitting a rotation by alternating correspondence matching and
//! Riemannian descent on SO(D), and finally translating onto the student
//! mean. The fitted [`registration::RigidSpdTransform`] then maps new teacher
//! points online.

pub mod baseline;
pub mod error;
pub mod experiments;
pub mod io;
pub mod kinematics;
pub mod matching;
pub mod metric;
pub mod registration;
pub mod rotation;
pub mod spd;

pub use error::{Error, Result};
pub use metric::{dispersion, dist, exp_map, geodesic, geometric_mean, log_map, project_to_spd, MeanOptions};
pub use registration::{fit, FitConfig, FitReport, RigidSpdTransform};
pub use rotation::Rotation;
pub use spd::{SpdCloud, SpdMatrix, SymmetricTangent};
