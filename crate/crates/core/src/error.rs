use thiserror::Error;

use crate::spectral::SpectrumReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("degree {degree} out of range for this operation (leaf dimension {dim_p})")]
    DegreeOutOfRange { degree: usize, dim_p: usize },

    #[error("degree mismatch: expected {expected}, got {got}")]
    DegreeMismatch { expected: usize, got: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("spectral use requires a fully periodic grid")]
    NonPeriodic,

    #[error("epsilon must be a finite non-negative real, got {0}")]
    InvalidEpsilon(f64),

    #[error("overflow budget exceeded: epsilon * range(phi) = {product:.6} > budget {budget}")]
    OverflowBudget { product: f64, budget: f64 },

    #[error("operator is not symmetric in its mass inner product (relative asymmetry {0:.3e})")]
    Asymmetric(f64),

    #[error("eigensolver did not converge after {iterations} iterations (max residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("ambiguous kernel: gap ratio {:.3e} below requirement", .0.gap_ratio)]
    AmbiguousKernel(Box<SpectrumReport>),

    #[error("ambiguous kernel on leaf {leaf}: gap ratio {:.3e} below requirement", .report.gap_ratio)]
    AmbiguousLeaf { leaf: usize, report: Box<SpectrumReport> },

    #[error("kernel dimensions differ between complexes (undeformed {undeformed}, deformed {deformed})")]
    KernelDimensionMismatch { undeformed: usize, deformed: usize },

    #[error("point outside chart: coordinate {index} = {value} not in [{lo}, {hi}]")]
    OutsideChart { index: usize, value: f64, lo: f64, hi: f64 },

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("identically-critical function: every seed on leaf {leaf} is a tangential singularity")]
    IdenticallyCritical { leaf: usize },

    #[error("degenerate singular points present on leaf {leaf}; run the almost-Morse audit instead")]
    DegenerateLeaves { leaf: usize },

    #[error("invalid foliation model: {0}")]
    InvalidModel(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable snake_case name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) => "invalid_grid",
            Error::DegreeOutOfRange { .. } => "degree_out_of_range",
            Error::DegreeMismatch { .. } => "degree_mismatch",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::NonPeriodic => "non_periodic",
            Error::InvalidEpsilon(_) => "invalid_epsilon",
            Error::OverflowBudget { .. } => "overflow_budget",
            Error::Asymmetric(_) => "asymmetric",
            Error::NoConvergence { .. } => "no_convergence",
            Error::AmbiguousKernel(_) => "ambiguous_kernel",
            Error::AmbiguousLeaf { .. } => "ambiguous_leaf",
            Error::KernelDimensionMismatch { .. } => "kernel_dimension_mismatch",
            Error::OutsideChart { .. } => "outside_chart",
            Error::InvalidPotential(_) => "invalid_potential",
            Error::IdenticallyCritical { .. } => "identically_critical",
            Error::DegenerateLeaves { .. } => "degenerate_leaves",
            Error::InvalidModel(_) => "invalid_model",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
