use thiserror::Error;

/// Errors produced anywhere in the despeckling toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {axis} expected {expected}, found {found}")]
    Shape {
        op: &'static str,
        axis: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate region: variance is zero, ENL is unbounded")]
    DegenerateRegion,

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid network spec: {0}")]
    Spec(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error(transparent)]
    Model(#[from] ModelError),

    #[error("training diverged at iteration {iteration}: {source}")]
    Diverged {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Failures specific to the binary model format.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("bad magic {0:?}, expected \"SDRN\"")]
    BadMagic([u8; 4]),

    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u16),

    #[error("CRC mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    CrcMismatch { stored: u32, computed: u32 },

    #[error("model file truncated: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },

    #[error("model shape mismatch: {0}")]
    ShapeMismatch(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn shape(op: &'static str, axis: &'static str, expected: usize, found: usize) -> Self {
        Error::Shape {
            op,
            axis,
            expected,
            found,
        }
    }
}
