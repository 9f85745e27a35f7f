use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain on which the quantity is defined.
    #[error("domain error in {op}: {reason}")]
    Domain { op: &'static str, reason: String },

    /// A model or configuration parameter violates its invariant.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Panel refinement ran out of levels before meeting the tolerance.
    #[error(
        "quadrature did not converge in {op}: estimate {estimate:e}, last change {change:e} \
         (tolerance {tolerance:e}) after {panels} panels"
    )]
    NonConvergence {
        op: &'static str,
        estimate: f64,
        change: f64,
        tolerance: f64,
        panels: usize,
    },

    /// The log-intensity did not decrease over the fit window.
    #[error("no decay on fit window [{start}, {end}]: slope {slope:e}")]
    NoDecay { start: f64, end: f64, slope: f64 },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn domain(op: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            op,
            reason: reason.into(),
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonConvergence { .. })
    }
}
