use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported dimension {0}: only d = 1 and d = 2 are implemented")]
    Dimension(usize),

    #[error("grid needs at least 2 nodes per axis, got {0}")]
    GridTooSmall(usize),

    #[error("unknown preset \"{0}\"")]
    UnknownPreset(String),

    #[error("preset {preset} is {expected}-dimensional but the grid is {found}-dimensional")]
    PresetDimension {
        preset: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("length mismatch: expected {expected}, found {found}")]
    Length { expected: usize, found: usize },

    #[error("density must be strictly positive, m[{index}] = {value}")]
    NonPositiveDensity { index: usize, value: f64 },

    #[error("density m[{index}] = {value:e} underflowed to the subnormal range")]
    DensityUnderflow { index: usize, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular matrix at pivot {pivot} (condition estimate {condition:.3e}); try a larger tau")]
    Singular { pivot: usize, condition: f64 },

    #[error("integrator step size underflow at t = {time}")]
    StepSizeUnderflow { time: f64 },

    #[error("integrator exceeded {max_steps} steps at t = {time}")]
    MaxSteps { max_steps: usize, time: f64 },

    #[error("non-finite state at t = {time}")]
    NonFinite { time: f64 },

    #[error("adaptive quadrature exhausted its recursion depth")]
    QuadratureDepth,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
