//! Shared numerical kernels: special functions, adaptive Gauss-Legendre
//! quadrature on radial integrals, a Sturm-sequence tridiagonal eigensolver,
//! dense Hermitian eigenvalues, simultaneous polynomial root iteration and a
//! deterministic counter-based random source.
//!
//! Everything downstream funnels through these routines, so their contracts
//! are deliberately narrow and checked: quadrature reports its own error
//! estimate, eigensolvers verify residuals, the root finder reports why it
//! stopped.

mod gamma;
mod hermitian;
mod quad;
mod refine;
mod rng;
mod roots;
mod stats;
mod tridiag;

pub use gamma::{ln_beta, ln_binomial, log_gamma};
pub use hermitian::hermitian_eigen;
pub use quad::{
    integrate_interval, integrate_radial, integrate_radial_ln, Quadrature, QuadratureSpec,
};
pub use refine::refine_until;
pub use rng::{sample_complex_gaussians, sample_complex_gaussians_stream, DeterministicRng};
pub use roots::{companion_roots, poly_roots, RootFind, StopReason};
pub use stats::{fit_line, ks_distance, LineFit};
pub use tridiag::{tridiag_eigen, EigenPair, EigenRequest, SymmetricTridiagonal};

use thiserror::Error;

/// Errors shared by the numerical kernels.
#[derive(Debug, Error)]
pub enum NumericsError {
    /// A parameter failed its validity range.
    #[error("invalid parameter: {0}")]
    InvalidSpec(String),

    /// Quadrature doubling hit the node cap before the tolerance was met.
    /// Carries the last two estimates so the caller can judge the gap.
    #[error("quadrature did not converge: last = {last:.6e}, previous = {previous:.6e}, nodes = {nodes}")]
    QuadratureUnconverged { last: f64, previous: f64, nodes: usize },

    /// An iterative solver ran out of iterations.
    #[error("iteration did not converge: {0}")]
    Unconverged(String),

    /// A matrix claimed Hermitian/symmetric failed the symmetry check.
    #[error("matrix is not Hermitian: max asymmetry {0:.3e}")]
    NotHermitian(f64),

    /// A computed eigenpair failed its residual bound.
    #[error("eigenpair residual {residual:.3e} exceeds bound {bound:.3e}")]
    ResidualTooLarge { residual: f64, bound: f64 },

    /// A conservation law (trace or Frobenius norm) drifted.
    #[error("spectrum failed {what} conservation: drift {drift:.3e}")]
    ConservationDrift { what: &'static str, drift: f64 },

    /// Polynomial input whose leading coefficient vanishes.
    #[error("leading polynomial coefficient is zero")]
    LeadingCoefficientZero,

    /// A non-finite number appeared where one must not.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}
