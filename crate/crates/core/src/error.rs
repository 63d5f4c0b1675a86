use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("accuracy target not met in {context}: achieved about {achieved_digits:.1} digits")]
    Accuracy { context: String, achieved_digits: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("no convergence after {iterations} iterations (best objective {best_objective:e})")]
    NonConvergence {
        iterations: usize,
        best_objective: f64,
        best_iterate: Vec<f64>,
    },
}

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
