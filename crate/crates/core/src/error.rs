use thiserror::Error;

/// Errors raised by the symbol calculus, the matrix oracle and the trace machinery.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("rank mismatch: {left} vs {right}")]
    RankMismatch { left: usize, right: usize },

    #[error("truncation depth must be positive")]
    ZeroDepth,

    #[error("bandwidth {found} exceeds the configured cap {cap}")]
    BandwidthOverflow { found: usize, cap: usize },

    #[error("symbol is not classical: component of degree {degree} carries log power {logpow}")]
    NotClassical { degree: i64, logpow: u32 },

    #[error("log-polyhomogeneous component at degree -1 (higher order pole) is not supported")]
    LogResidue,

    #[error("degree {degree} lies below the truncation floor {floor}")]
    Truncated { degree: i64, floor: i64 },

    #[error("unknown builtin symbol `{0}`")]
    UnknownBuiltin(String),

    #[error("logarithmic terms survived the bracket with log Q (norm {0:e})")]
    SurvivingLogTerms(f64),

    #[error("diffeomorphism is not orientation preserving (min g' = {min_derivative:e})")]
    NotOrientationPreserving { min_derivative: f64 },

    #[error("Newton inversion did not converge at node {node} (y = {y})")]
    NewtonFailure { node: usize, y: f64 },

    #[error("the twisted sector requires a based diffeomorphism (g(0) = 0), got g(0) = {0:e}")]
    NotBased(f64),

    #[error("displacement must be real-valued")]
    ComplexDisplacement,

    #[error("incompatible mode grids")]
    GridMismatch,

    #[error("quadrature size {given} is below the required {required}")]
    QuadratureTooSmall { given: usize, required: usize },

    #[error("Re(s) = {re} is outside the convergence half-plane Re(s) > {bound}")]
    DivergentRegion { re: f64, bound: f64 },

    #[error("continuation depth too shallow: retained degrees stop at {floor}, need -1 or below")]
    DepthTooShallow { floor: i64 },

    #[error("pole coefficient {pole} disagrees with res/q = {expected}")]
    ResidueCoherence { pole: f64, expected: f64 },

    #[error("operator is not odd class")]
    NotOddClass,

    #[error("weight `{0}` is not odd class")]
    WeightNotOddClass(String),

    #[error("weight-independence violated: pole {pole:e}, finite parts differ by {delta:e}")]
    KvMismatch { pole: f64, delta: f64 },

    #[error("commutator with the sign operator is not Hilbert-Schmidt on this grid")]
    NotHilbertSchmidt,

    #[error("leading symbol is not invertible (min |det| = {0:e})")]
    NotInvertible(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
