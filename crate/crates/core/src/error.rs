use crate::lattice::LatticeCluster;

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation.
    #[error("domain error in {op}: {why}")]
    Domain { op: &'static str, why: String },

    /// A parameter failed validation before any computation ran.
    #[error("invalid parameter `{name}`: {why}")]
    InvalidParameter { name: &'static str, why: String },

    /// An iterative computation did not reach the requested tolerance.
    #[error("{what} did not converge: achieved {achieved:.3e}, wanted {wanted:.3e}")]
    NoConvergence {
        what: &'static str,
        achieved: f64,
        wanted: f64,
    },

    /// A result came out non-finite, which the domain types forbid.
    #[error("non-finite result in {op}")]
    NonFinite { op: &'static str },

    /// A lattice run exhausted its total step budget. The partial cluster
    /// (marked truncated) is retained for inspection.
    #[error("step cap of {cap} exhausted after settling {settled} particles")]
    StepCapExceeded {
        cap: u64,
        settled: usize,
        partial: Box<LatticeCluster>,
    },

    /// Cluster is not lattice-connected, so no boundary can be traced.
    #[error("cluster is not connected ({n_components} components)")]
    Disconnected { n_components: usize },

    #[error("malformed cluster file: {0}")]
    MalformedCluster(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(op: &'static str, why: impl Into<String>) -> Self {
        Error::Domain { op, why: why.into() }
    }

    pub(crate) fn param(name: &'static str, why: impl Into<String>) -> Self {
        Error::InvalidParameter { name, why: why.into() }
    }
}
