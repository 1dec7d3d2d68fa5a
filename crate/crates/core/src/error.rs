use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("coin is not unitary: residual {residual:.3e} exceeds {tolerance:.1e}")]
    NonUnitaryCoin { residual: f64, tolerance: f64 },

    #[error("initial spinor must have unit norm, got {norm}")]
    NonUnitSpinor { norm: f64 },

    #[error("invalid stripe (s={s}, t={t}): need s <= 0 <= t")]
    InvalidStripe { s: i64, t: i64 },

    #[error("band vector has {got} sites, stripe width is {expected}")]
    BandLengthMismatch { expected: usize, got: usize },

    #[error("horizon exhausted: state is at step {n} of {horizon}")]
    HorizonExhausted { n: usize, horizon: usize },

    #[error("matrix of dimension {dim} exceeds the eigensolver limit {limit}")]
    MatrixTooLarge { dim: usize, limit: usize },

    #[error("QR iteration did not converge after {iterations} iterations (active block ends at {index})")]
    NoConvergence { iterations: usize, index: usize },

    #[error("ambiguous eigenvalue match near {target}: candidates {first} and {second}")]
    AmbiguousMatch {
        target: String,
        first: String,
        second: String,
    },

    #[error("mode windows overlap at n={n} with half-width coefficient {w}")]
    OverlappingWindows { n: usize, w: f64 },

    #[error("empty window: {0}")]
    EmptyWindow(String),

    #[error("not enough points for a fit: {got} < {needed}")]
    TooFewFitPoints { got: usize, needed: usize },

    #[error("tracked value changes sign inside the fit window at n={n}")]
    SignChange { n: usize },

    #[error("peak value vanishes at n={n}")]
    VanishingPeak { n: usize },

    #[error("degenerate coin: {0}")]
    DegenerateCoin(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
