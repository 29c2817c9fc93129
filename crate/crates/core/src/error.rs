use thiserror::Error;

/// Failures reported by the solvers.
///
/// Payloads are carried as `f64` regardless of the working scalar so that
/// they can be logged and compared uniformly.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(
        "equation-of-state solver did not converge at 1/kFa = {inv_kfa} after {iterations} \
         iterations (gap residual {gap_residual:.3e}, density residual {density_residual:.3e})"
    )]
    NonConvergence {
        inv_kfa: f64,
        iterations: usize,
        gap_residual: f64,
        density_residual: f64,
    },

    #[error("quadrature not converged ({context}): estimated relative error {estimate:.3e}")]
    QuadratureNotConverged { context: String, estimate: f64 },

    #[error("collective-mode denominator vanished at q = {q}, nu = {nu}, epsilon = {epsilon}")]
    PoleSingular { q: f64, nu: f64, epsilon: f64 },

    #[error("dispersion root not bracketed at q = {q}: {sign_changes} sign changes below threshold")]
    RootBracketFailure { q: f64, sign_changes: usize },

    #[error("no undamped collective mode at frequency nu = {nu}")]
    NoModeAtFrequency { nu: f64 },

    #[error("time step too large: dt * rate = {product:.3e} exceeds {limit}")]
    StepTooLarge { product: f64, limit: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
