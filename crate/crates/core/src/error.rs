use thiserror::Error;

use crate::flow::FlowTrace;

/// Errors raised across the library.
///
/// Variants carry enough context to report the failure without re-running
/// the computation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot project a vector of norm {norm:e} onto the sphere")]
    ZeroVector { norm: f64 },

    #[error("points are (nearly) antipodal: distance {distance} is within 1e-8 of pi")]
    AntipodalPair { distance: f64 },

    #[error("tangent frame is degenerate: Gram determinant {gram_det:e}")]
    DegenerateFrame { gram_det: f64 },

    #[error("basis is not orthonormal (max Gram deviation {deviation:e})")]
    NonOrthonormalBasis { deviation: f64 },

    #[error("point is not on the unit sphere: |norm - 1| = {deviation:e}")]
    NotUnit { deviation: f64 },

    #[error("vector is not tangent at its base point: <v, p> = {inner:e}")]
    NotTangent { inner: f64 },

    #[error("matrix is not orthogonal (max deviation {deviation:e})")]
    NotOrthogonal { deviation: f64 },

    #[error("ambient dimension mismatch: expected S^{expected}, found S^{found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unsupported sphere dimension {0} (supported: 1..=5)")]
    UnsupportedDimension(usize),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("operation requires a closed mesh (mesh has {loops} boundary loop(s))")]
    NotClosed { loops: usize },

    #[error("face {face} violates the triangle inequality (slack {slack:e})")]
    DegenerateTriangle { face: usize, slack: f64 },

    #[error("{} face(s) violate the triangle inequality after conformal scaling", faces.len())]
    TriangleViolation { faces: Vec<usize> },

    #[error("metric conventions differ: {0}")]
    ConventionMismatch(String),

    #[error("vertex {vertex} has only {neighbors} stencil neighbors (need at least 5)")]
    InsufficientNeighborhood { vertex: usize, neighbors: usize },

    #[error("quadric fit at vertex {vertex} is ill-conditioned (condition number {condition:e})")]
    IllConditionedFit { vertex: usize, condition: f64 },

    #[error("field has {field} entries but mesh has {mesh} vertices")]
    FieldMeshMismatch { field: usize, mesh: usize },

    #[error("Willmore energy must be positive, got {0}")]
    NonpositiveWillmore(f64),

    #[error("elliptic modulus {0} outside [0, 1)")]
    ModulusOutOfRange(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("mesh is not minimal at this resolution: max |H| = {max_h:e} exceeds bound {bound:e}")]
    NotMinimalAtResolution { max_h: f64, bound: f64 },

    #[error("bipolar construction needs an orientable source with a consistent normal field")]
    NonOrientableSource,

    #[error("vertex welding failed: {0}")]
    WeldFailure(String),

    #[error("Plateau descent stalled after {iterations} iterations with residual {residual:e}")]
    StalledDescent { residual: f64, iterations: usize },

    #[error("assembled surface has Euler characteristic {found}, expected {expected}")]
    WrongEuler { expected: i64, found: i64 },

    #[error("invalid Plateau problem: {0}")]
    InvalidProblem(String),

    #[error("uniformization flow did not converge: curvature deviation {curvature_dev:e} after {steps} steps")]
    NonConvergence {
        curvature_dev: f64,
        steps: usize,
        trace: Box<FlowTrace>,
    },

    #[error("closest point is ambiguous: faces {faces:?} are equidistant but disagree on u by {disagreement:e}")]
    ClosestPointAmbiguous { faces: [usize; 2], disagreement: f64 },

    #[error("time step {dt:e} exceeds the tube bound {bound:e}")]
    StepTooLarge { dt: f64, bound: f64 },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
