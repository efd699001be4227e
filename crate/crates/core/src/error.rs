use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("eigensolver failure: {0}")]
    Eigensolver(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} violated: residual {residual:.3e} exceeds {tol:.1e}")]
    Invariant {
        what: &'static str,
        residual: f64,
        tol: f64,
    },

    #[error("function undefined at eigenvalue {0}")]
    Undefined(f64),

    #[error("subspace has odd dimension {0}; an odd antiunitary needs even dimension")]
    OddDimension(usize),

    #[error("no singular-value gap around kernel tolerance {kernel_tol:.1e} (nearest singular value {nearest:.3e})")]
    NoKernelGap { kernel_tol: f64, nearest: f64 },

    #[error("geometry: {0}")]
    Geometry(String),

    #[error("energy {mu} lies within {tol:.0e} of an eigenvalue; no spectral gap")]
    NoGap { mu: f64, tol: f64 },

    #[error("eigenvalue cluster near {target} is unstable: counts {counts:?} across one tolerance decade")]
    ClusterUnstable { target: f64, counts: Vec<usize> },

    #[error("dim E+1 = {plus} but dim E-1 = {minus}; symmetry broken upstream")]
    DefectMismatch { plus: usize, minus: usize },

    #[error("kernel leakage into the off-defect space: smallest singular value {min_singular:.3e} below floor {floor:.3e}")]
    KernelLeakage { min_singular: f64, floor: f64 },

    #[error("chain construction clean only to depth {clean} (requested {requested})")]
    TruncationDepth { requested: usize, clean: usize },

    #[error("no gap states to propagate: filtered norm {0:.3e}")]
    NoGapStates(f64),

    #[error("pre-wrap fit window is empty (t_max = {0:.3})")]
    EmptyWindow(f64),

    #[error("matrix format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
