//! Error type shared by every module of the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// The query point is at or beyond the medial axis of the obstacle
    /// boundary, so the nearest boundary point is not unique.
    #[error("nearest-point projection is not unique at {point:?}")]
    NonUniqueProjection { point: Vec<f64> },

    /// A boundary-only geometry query was made off the boundary.
    #[error("point {point:?} is not on the obstacle boundary (signed distance {rho:.3e})")]
    NotOnBoundary { point: Vec<f64>, rho: f64 },

    #[error("ball of radius {r} centered at {center:?} is not contained in the grid domain")]
    BallOutsideDomain { center: Vec<f64>, r: f64 },

    /// A node value is inside the obstacle beyond the tubular neighborhood;
    /// the projection there is unreliable and the caller must shrink its step.
    #[error("node {node} penetrates the obstacle beyond the tubular radius (rho = {rho:.3e})")]
    DeepPenetration { node: usize, rho: f64 },

    #[error("boundary data is infeasible at node {node} (rho = {rho:.3e})")]
    InfeasibleBoundaryData { node: usize, rho: f64 },

    #[error("field is infeasible at node {node} (rho = {rho:.3e})")]
    InfeasibleField { node: usize, rho: f64 },

    #[error("line search step collapsed below the machine floor at iteration {iteration}")]
    StepCollapse { iteration: usize },

    #[error("geodesic endpoint {point:?} is infeasible (rho = {rho:.3e})")]
    InfeasibleEndpoint { point: Vec<f64>, rho: f64 },

    #[error("field is constant on the sphere of radius {r}; the frequency denominator vanishes")]
    ConstantOnSphere { r: f64 },

    #[error("ball scan contains no admissible ball")]
    EmptyScan,

    #[error("comparison ball carries zero energy")]
    ZeroEnergy,

    #[error("operation requires dimension n >= 3, got n = {n}")]
    InvalidDimension { n: usize },

    #[error("radial weight r^(n-3) is not integrable for n = {n}")]
    DivergentIntegrand { n: usize },

    #[error("subharmonicity of the distance is only asserted for convex obstacles")]
    NonConvexObstacle,

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("run bundles are not comparable: {0}")]
    SchemaMismatch(String),

    #[error("solver did not converge within {max_iters} iterations")]
    NotConverged { max_iters: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("failed to parse {path}: {message}")]
    Parse { path: String, message: String },
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
