use thiserror::Error;

pub type Result<T> = std::result::Result<T, BlabError>;

/// Every failure mode surfaced by the library. Variants carry enough context
/// for the CLI to name the violated invariant.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum BlabError {
    #[error("dimension {m} is below the minimum {min} required by {context}")]
    DimensionTooSmall {
        m: usize,
        min: usize,
        context: &'static str,
    },

    #[error("index {index} out of range 0..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("divergent moment integral I^q_p with p = {p}, q = {q} (need p - q > 1 and q > -1)")]
    DivergentMoment { p: f64, q: f64 },

    #[error("integrand is not integrable for m = {m}: {detail}")]
    NotIntegrable { m: usize, detail: String },

    #[error("point |y| = {norm} leaves the chart of radius {radius}")]
    ChartExit { norm: f64, radius: f64 },

    #[error("metric jet is not symmetric: {0}")]
    AsymmetricJet(String),

    #[error("{0} is not a critical point of the weight a (|grad a| = {1:e})")]
    NotCritical(&'static str, f64),

    #[error("test function depends on the fiber variables (discrepancy {0:e})")]
    NonInvariantFunction(f64),

    #[error("potential h is not invariant with respect to the fiber")]
    FiberDependentPotential,

    #[error("grid under-resolves the bubble: {nodes_per_delta:.2} nodes per delta, need at least {required}")]
    UnderResolved { nodes_per_delta: f64, required: f64 },

    #[error("t = {t} lies outside the admissible interval [{alpha}, {beta}]")]
    TOutOfInterval { t: f64, alpha: f64, beta: f64 },

    #[error("radial charts require a rotationally symmetric model: {0}")]
    NotRadial(String),

    #[error("quadrature produced a non-finite value in {0}")]
    QuadratureFailure(&'static str),

    #[error("ill-conditioned least-squares fit: {0}")]
    IllConditionedFit(String),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("Gram matrix of the kernel basis is near-singular (condition {0:e})")]
    SingularGram(f64),

    #[error("fixed-point map is not contracting (ratio {ratio:.3} at iteration {iteration})")]
    NonContraction { ratio: f64, iteration: usize },

    #[error("fixed-point iteration exceeded {0} iterations")]
    MaxIterations(usize),

    #[error("Newton iteration failed: {0}")]
    NewtonFailure(String),

    #[error("regime mismatch: Theta = {theta:e} and sign(eps) = {sign_eps} admit no critical point t > 0")]
    RegimeMismatch { theta: f64, sign_eps: i8 },

    #[error("degenerate threshold: Theta = 0 gives no nondegenerate critical point")]
    DegenerateTheta,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for BlabError {
    fn from(e: std::io::Error) -> Self {
        BlabError::Io(e.to_string())
    }
}
