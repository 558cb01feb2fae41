use std::path::PathBuf;

use crate::eigen::EigenSolveState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("field halo depth {available} is shallower than the {required} layers the stencil needs")]
    HaloTooShallow { required: usize, available: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("zero divisor at cell ({i}, {j})")]
    ZeroDivisor { i: usize, j: usize },

    #[error("interior dimensions {nx}x{ny} are not even")]
    OddDimensions { nx: usize, ny: usize },

    #[error("grid spacing must be positive, got {0}")]
    NonPositiveSpacing(f64),

    #[error("diagonal coefficient {value} at cell ({i}, {j}) is not positive")]
    NonPositiveDiagonal { i: usize, j: usize, value: f64 },

    #[error("unsupported combination: {0}")]
    UnsupportedCombination(String),

    #[error("interior dimensions {nx}x{ny} cannot be halved {levels} times down to a grid of at least {min}x{min}")]
    IndivisibleDims {
        nx: usize,
        ny: usize,
        levels: usize,
        min: usize,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("material '{material}' has {found} groups, expected {expected}")]
    InconsistentGroups {
        material: String,
        expected: usize,
        found: usize,
    },

    #[error("material '{material}': negative {quantity} ({value})")]
    NegativeCrossSection {
        material: String,
        quantity: String,
        value: f64,
    },

    #[error("material '{material}': fission spectrum sums to {sum}, expected 1")]
    InvalidChi { material: String, sum: f64 },

    #[error("unknown material '{0}'")]
    UnknownMaterial(String),

    #[error("grid indivisible: {0}")]
    GridIndivisible(String),

    #[error("ConvFEM boundary diffusivity is not homogeneous: {0}")]
    InhomogeneousBoundary(String),

    #[error("problem contains no fissile material")]
    NoFissileMaterial,

    #[error("power iteration did not converge in {} iterations (last k_eff {})", .0.counters.power, .0.k_eff)]
    NonConvergence(Box<EigenSolveState>),

    #[error("Gauss-Seidel did not converge in {iterations} sweeps (residual {final_residual:e})")]
    GaussSeidelNonConvergence {
        iterations: usize,
        final_residual: f64,
        residual_history: Vec<f64>,
        solution: Vec<f64>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
