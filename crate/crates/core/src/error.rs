use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("state dimension {got} does not match system dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("distinguished point is not a singular equilibrium: |F| = {f_norm:e}, zeta = {zeta:e}")]
    OriginNotEquilibrium { f_norm: f64, zeta: f64 },

    #[error("right-hand side evaluated on the singular set (zeta = {zeta:e})")]
    SingularEvaluation { zeta: f64 },

    #[error("initial state must satisfy zeta > 0 (got {zeta:e})")]
    InvalidInitialState { zeta: f64 },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepFailure { t: f64, h: f64 },

    #[error("time rescaling is not a diffeomorphism: sample {index} has zeta = {zeta:e}")]
    NotDiffeomorphism { index: usize, zeta: f64 },

    #[error("Newton projection onto the singular set failed for every seed")]
    SeedingFailed,

    #[error("G cannot be extended continuously at this point: {reason}")]
    ExtensionUndefined { reason: String },

    #[error("no intersection of the equilibrium manifold with the singular set in the sampling box")]
    NoIntersection,

    #[error("spectral subspaces are ill conditioned (separation {separation:e})")]
    IllConditioned { separation: f64 },

    #[error("linearization has no center directions")]
    NoCenterDirections,

    #[error("homological equation at degree {degree} is singular")]
    ResolutionFailure { degree: usize },

    #[error("reduced field has a pole on the singular set (numerator {numerator:e})")]
    DivisionDefect { numerator: f64 },

    #[error("no stable directions at base point {base:?}")]
    NoStableDirections { base: Vec<f64> },

    #[error("fiber validation failed: fitted rate {measured} below predicted {predicted}")]
    ValidationFailure { measured: f64, predicted: f64 },

    #[error("trajectory is not on the uniformly stable manifold (distance {distance:e})")]
    NotOnManifold { distance: f64 },

    #[error("trajectory does not converge to an equilibrium: {reason}")]
    NoAsymptoticEquilibrium { reason: String },

    #[error("b is not invertible on the working box (condition number {condition:e})")]
    NonInvertibleB { condition: f64 },

    #[error("residual check needs at least 5 samples, got {got}")]
    InsufficientSamples { got: usize },

    #[error("internal energy must be positive (got {e})")]
    NonPositiveEnergy { e: f64 },

    #[error("symmetric block derivation is inconsistent: residual {residual:e}")]
    DerivationInconsistency { residual: f64 },

    #[error("zeta changed sign along the profile at t = {t}")]
    SignViolation { t: f64 },

    #[error("unknown system name '{0}'")]
    UnknownName(String),

    #[error("closed form ceases to exist at t* = {t_star}")]
    BlowupReached { t_star: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}
