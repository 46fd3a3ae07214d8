use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian: max |M_ij - conj(M_ji)| = {max_asymmetry:e}")]
    NonHermitian { max_asymmetry: f64 },

    #[error("matrix is not unitary: max |U U^dag - 1| = {residual:e}")]
    NonUnitary { residual: f64 },

    #[error("not a density matrix: {reason}")]
    InvalidDensity { reason: String },

    #[error("non-finite input: {0}")]
    NonFinite(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("ground state is {degeneracy}-fold degenerate; zero-temperature state is not unique")]
    DegenerateGroundState { degeneracy: usize },

    #[error("Bloch vector vanishes at k = {k} (gap closing)")]
    GapClosing { k: f64 },

    #[error("grid too coarse near k_c: folded PGP step exceeds pi/2 on k in [{k_lo}, {k_hi}] at t = {t}")]
    GridTooCoarse { k_lo: f64, k_hi: f64, t: f64 },

    #[error("t = {t} lies within 1e-9 of critical time {t_star}; DTOP undefined there")]
    NearCriticalTime { t: f64, t_star: f64 },

    #[error("jump sign undefined at k_c = {k_c}: |df/dk| = {derivative:e}")]
    DegenerateJump { k_c: f64, derivative: f64 },

    #[error("k = {k} is not a root of the overlap profile (f_hat = {f_hat:e})")]
    NotARoot { k: f64, f_hat: f64 },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of a numerical guard rather than of input validation.
    pub fn is_numerical_guard(&self) -> bool {
        matches!(
            self,
            Error::DegenerateGroundState { .. }
                | Error::GapClosing { .. }
                | Error::GridTooCoarse { .. }
                | Error::NearCriticalTime { .. }
                | Error::DegenerateJump { .. }
                | Error::NotARoot { .. }
        )
    }
}
