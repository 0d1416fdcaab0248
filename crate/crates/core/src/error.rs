use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the transport toolkit.
///
/// `InvalidInput`, `Infeasible`, and `Parse` indicate bad inputs and are
/// distinguishable from runtime failures (`Diverged`, `NotConverged`, `Io`)
/// so callers can map them to different exit classes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A transport feasibility bound is violated; the message names the bound.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// The part velocity exceeded the divergence guard during simulation,
    /// the signature of a normal force too small to arrest slipping.
    #[error("simulation diverged at t = {t:.6} s: |v_p| = {v_p:.4} m/s exceeds bound {bound:.4} m/s")]
    Diverged { t: f64, v_p: f64, bound: f64 },

    #[error("steady state not reached: {0}")]
    NotConverged(String),

    #[error("parse error in {path}: {msg}")]
    Parse { path: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad inputs rather than runtime behavior.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_) | Error::Infeasible(_) | Error::Parse { .. }
        )
    }
}
