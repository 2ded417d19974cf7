use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("size mismatch: expected {expected} values, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("non-finite multiplier value at frequency {xi}")]
    NonFiniteMultiplier { xi: f64 },

    #[error(
        "exponential weight overflow: sigma * max|xi| = {exponent} exceeds {limit}; \
         use a smaller sigma or a coarser grid"
    )]
    Overflow { exponent: f64, limit: f64 },

    #[error("insufficient spectral decay data: {usable} usable modes (need at least 4)")]
    InsufficientDecay { usable: usize },

    #[error("Picard iteration is not contracting: increment ratio {ratio:.4} at iteration {iteration}; T_local too large")]
    NonContraction { ratio: f64, iteration: usize },

    #[error("Picard iteration did not converge in {iterations} iterations (last increment {increment:e}, ratio {ratio:.4}); T_local too large")]
    PicardMaxIter {
        iterations: usize,
        increment: f64,
        ratio: f64,
    },

    #[error("blow-up guard tripped at t = {t}: norm {norm:e} exceeds {threshold:e}")]
    BlowUp { t: f64, norm: f64, threshold: f64 },

    #[error("non-finite value in solution at t = {t}")]
    NotFinite { t: f64 },

    #[error(
        "radius estimate hit the noise floor on {hits} of {samples} samples; increase n_modes"
    )]
    FloorHit { hits: usize, samples: usize },

    #[error(
        "conjugate symmetry broken: imaginary part {imag:e} of a real functional (value {real:e})"
    )]
    SymmetryBroken { real: f64, imag: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("snapshot format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
