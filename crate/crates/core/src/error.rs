use thiserror::Error;

/// Invalid inputs: bad grids, coefficient tables, or parameters.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("horizon must be positive and finite, got {0}")]
    Horizon(f64),
    #[error("time grid needs at least 2 steps, got {0}")]
    Steps(usize),
    #[error("coefficient `{name}` has {got} samples, expected 1 or {expected}")]
    SampleCount {
        name: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("coefficient `{name}` is not finite at node {node}")]
    NonFinite { name: &'static str, node: usize },
    #[error("coefficient `{name}` must be strictly positive at every node (node {node} = {value})")]
    NotPositive {
        name: &'static str,
        node: usize,
        value: f64,
    },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

/// Outcomes of a solve that are not input errors.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("Riccati equation blows up near t = {time}")]
    BlowUp { time: f64 },
    #[error("no MFG fixed point on this horizon (Riccati blow-up near t = {time})")]
    NoFixedPoint { time: f64 },
    #[error("existence hypotheses q(q+qbar) >= 0 and m(m+mbar) >= 0 fail; enable short-horizon mode to attempt the solve")]
    HypothesesViolated,
    #[error("offset equation routes disagree: relative gap {gap:e}")]
    OffsetMismatch { gap: f64 },
    #[error("CFL condition violated: need dt <= {required_dt:e}, have {dt:e}")]
    Cfl { dt: f64, required_dt: f64 },
    #[error("mode not supported: {0}")]
    Unsupported(&'static str),
}
