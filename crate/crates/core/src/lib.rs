//! Discrete laboratory for surfaces in round spheres.
//!
//! Builds triangulated minimal surfaces in S³, S⁴ and S⁵, estimates their
//! extrinsic curvature, evaluates Willmore-type functionals and σ-invariants,
//! and runs area-preserving conformal flows both intrinsically (on edge
//! lengths) and extrinsically (as an ambient gradient flow in a tube).
//!
//! Points are stored as zero-padded 6-vectors together with the sphere
//! dimension d, so a single type covers S¹ through S⁵.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ambient;
pub mod error;
pub mod extrinsic;
pub mod flow;
pub mod functionals;
pub mod io;
pub mod mesh;
pub mod metric;
pub mod quadrature;
pub mod sphere;
pub mod zoo;

pub use error::{Error, Result};
pub use extrinsic::{compute_extrinsic, ExtrinsicField};
pub use functionals::{evaluate_functionals, sigma_of_class, FunctionalReport, SigmaReport};
pub use mesh::{euler_characteristic, SurfaceMesh};
pub use metric::{AngleConvention, DiscreteMetric, VertexField};
pub use sphere::{AmbientPoint, Coords, SphereIsometry, TangentVector};
