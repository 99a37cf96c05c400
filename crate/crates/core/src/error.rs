use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("drive profile never accumulates a rotation angle of pi (reached {reached:.6} by t = {last_time})")]
    InsufficientProfile { reached: f64, last_time: f64 },

    #[error("quadrature did not converge: requested {requested:e}, achieved {achieved:e}")]
    Quadrature { requested: f64, achieved: f64 },

    #[error("Fock truncation leakage {leakage:e} exceeds {tolerance:e} at n_max = {n_max}; increase n_max")]
    Truncation {
        leakage: f64,
        tolerance: f64,
        n_max: usize,
    },

    #[error("shape mismatch: {left} vs {right}")]
    Shape { left: usize, right: usize },

    #[error("finite-difference step {step:e} unstable: h and h/2 disagree by {relative:e} (relative)")]
    StepSize { step: f64, relative: f64 },

    #[error("operation requires a constant drive profile")]
    UnsupportedProfile,

    #[error("unsupported configuration: {0}")]
    UnsupportedConfiguration(String),

    #[error("capacity guard: {0}")]
    Capacity(String),

    #[error("quantum Fisher information is zero; parameter is unidentifiable")]
    Unidentifiable,

    #[error("insensitive operating point: |d<P>/d omega_s| = {slope:e}")]
    InsensitiveOperatingPoint { slope: f64 },
}

impl Error {
    /// True for failures caused by numerical tolerance rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Quadrature { .. }
                | Error::Truncation { .. }
                | Error::StepSize { .. }
                | Error::InsensitiveOperatingPoint { .. }
                | Error::Unidentifiable
        )
    }
}
