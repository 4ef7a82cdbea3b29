//! Numerical laboratory for magnetic Schrödinger operators and reproducing
//! kernels attached to curvature-degenerate line bundle metrics on model
//! surfaces: a family of rotation-invariant metrics on the sphere whose
//! curvature vanishes to finite order at the two poles, and a planar family
//! whose field vanishes on a circle.
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`] — quadrature, special functions, tridiagonal and Hermitian
//!   eigensolvers, polynomial roots, deterministic random numbers.
//! * [`surface`] — the surface families, their curvature data and degeneracy
//!   jets.
//! * [`model`] — the rescaled limit operators at a degenerate point: ground
//!   state weights, kernel densities, sector spectra, Montgomery-type circle
//!   families, heat kernel diagonals.
//! * [`bergman`] — weighted polynomial bases, reproducing kernel diagonals and
//!   jets, scaling fits, uniform bounds, potential-convergence gaps.
//! * [`spectral`] — radial sector discretisations of the full surface
//!   operators: ground energies, eigenvalue counts, spectral gaps, heat
//!   diagonals, concentration probes.
//! * [`toeplitz`] — matrix compressions of multiplication operators against
//!   the weighted bases: norms, composition defects, eigenvalue measures.
//! * [`zeros`] — Gaussian random sections and their zero statistics.
//! * [`torsion`] — closed-form heat coefficient predictions in degenerating
//!   families.
//!
//! All floating-point work is `f64`. Every stochastic routine is driven by an
//! explicitly seeded counter-based generator so that reruns are byte-stable.

pub mod bergman;
pub mod model;
pub mod numerics;
pub mod spectral;
pub mod surface;
pub mod toeplitz;
pub mod torsion;
pub mod zeros;
