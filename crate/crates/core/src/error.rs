use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is singular to working precision (pivot {pivot:.3e})")]
    Singular { pivot: f64 },

    #[error("matrix is not Hermitian (defect {defect:.3e})")]
    NotHermitian { defect: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid array configuration: {0}")]
    InvalidArray(String),

    #[error("desired level {rho} is outside (0, 1]; the control problem assumes rho <= 1 (0 dB)")]
    LevelOutOfRange { rho: f64 },

    #[error("control direction coincides with the beam axis")]
    DirectionIsBeamAxis,

    #[error("degenerate control geometry: {0}")]
    DegenerateControl(&'static str),

    #[error("negative discriminant ({0:.3e}): no circle of valid parameters exists")]
    NegativeDiscriminant(f64),

    #[error("parameter mapping hits its pole")]
    MappingPole,

    #[error("circle is centred at the origin; minimum-modulus point is not unique")]
    OriginCenter,

    #[error("response at the beam axis vanishes")]
    BeamAxisNull,

    #[error("degenerate gain denominator")]
    DegenerateGain,

    #[error("direction {0} deg is outside [-90, 90]")]
    InvalidDirection(f64),

    #[error("circle scan needs at least 36 samples, got {0}")]
    TooFewSamples(usize),

    #[error("invalid sampling grid: {0}")]
    InvalidGrid(String),

    #[error("value expected to be real has imaginary residue {residue:.3e}")]
    NotReal { residue: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
