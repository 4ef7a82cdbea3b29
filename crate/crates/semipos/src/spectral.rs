//! Sector spectra of the magnetic Schrödinger operators attached to the
//! surface families: ground energies and their scaling constants, eigenvalue
//! window counts, the holomorphically twisted spectrum, heat kernel
//! diagonals, and ground-state concentration probes.
//!
//! Rotation invariance splits everything over angular momenta `m`. In the
//! weighted trivialization each sector is a real Sturm-Liouville pencil
//!
//! ```text
//! (1/w) [ -(p u')' + (m - kA)^2 / p * u ] = lambda u
//! ```
//!
//! where `A` is the accumulated flux through the disk of chart radius `t`.
//! The Dirichlet integrand is conformally invariant in two dimensions, so
//! the flux coefficient `p` and the volume weight `w` coincide in any radial
//! coordinate while the metric enters only through `A` and the common
//! weight.
//!
//! The compact family is discretized in the geodesic arc-length variable
//! `s in [0, sqrt(pi)/2]`, where `p(s) = w(s) = sin(2 sqrt(pi) s) / (2
//! sqrt(pi))` in closed form. The coefficient vanishes at both ends, which
//! encodes the regular condition at the two poles without any boundary
//! fudge, and the grid is exactly symmetric under the swap `m <-> kd - m`.
//! The planar circle family keeps its chart radius on `[0, wall]` with
//! `p = w = t` and a Dirichlet wall.
//!
//! The discretization is the same conservative staggered scheme used for the
//! model operators and shares its accuracy protocol: Sturm bisection for
//! values, inverse iteration for vectors, flux-form Rayleigh quotients to
//! evade the `eps/h^2` rounding floor, and Richardson refinement with an
//! honest error estimate. Deep tunneling tails, which an eigensolver cannot
//! resolve below the rounding floor, are reconstructed in log space from the
//! three-term recurrence.

use crate::model::{line_flux_rayleigh, line_pencil, origin_value_sq, ModelError, ModelOperator};
use crate::numerics::{
    fit_line, refine_until, tridiag_eigen, EigenRequest, NumericsError, SymmetricTridiagonal,
};
use crate::surface::{SurfaceError, SurfaceKind, SurfaceModel};
use rayon::prelude::*;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("unsupported: {0}")]
    Unsupported(&'static str),
    #[error("window endpoint {endpoint} sits within {distance:.3e} of an eigenvalue; shift the window")]
    IllConditionedWindow { endpoint: f64, distance: f64 },
    #[error("eigenvalue {value:.6e} below -{tolerance:.1e}: the twisted operator lost nonnegativity")]
    NegativeSpectrum { value: f64, tolerance: f64 },
    #[error("heat truncation budget exceeded: the energy window would hold about {states} states")]
    TruncationBudget { states: usize },
    #[error("{0}")]
    Unconverged(String),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

const BASE_CELLS: usize = 256;
const GRID_CAP: usize = 1 << 18;
const REFINE_TOL: f64 = 1e-8;
/// Hard stop for sector walks that fail to meet their exit rule.
const SCAN_LIMIT: i64 = 20_000;
/// Sector minima this far above the running best count toward the stop run.
const GROWTH_EXIT: f64 = 1.25;
const STOP_RUN: usize = 3;
/// Plateau detection for families whose sector minima never grow (constant
/// curvature): stop after this many consecutive near-ties.
const FLAT_TOL: f64 = 1e-5;
const FLAT_RUN: usize = 6;
/// e-folds of heat suppression retained beyond the ground energy.
const HEAT_EFOLDS: f64 = 45.0;
const HEAT_MAX_STATES: usize = 4000;
/// Eigenvector entries below this fraction of the peak are treated as
/// rounding noise and handed to the log-space tail reconstruction.
const TAIL_TRUST: f64 = 1e-8;

/// One radial sector of the surface operator: the generalized pencil
/// `K u = lambda W u` plus the raw flux/potential data needed to evaluate
/// its quadratic form without the `2/h^2` cancellation.
pub struct RadialSectorOperator {
    k: u32,
    sector: i64,
    step: f64,
    /// Flux coefficient at the `n + 1` cell walls; zero entries encode the
    /// natural closure at a coordinate end.
    flux_walls: Vec<f64>,
    /// Centrifugal potential at cell centers, already multiplied by nothing:
    /// the pencil diagonal carries `potential * 1` and the weight separately.
    potential: Vec<f64>,
    pencil: SymmetricTridiagonal,
}

impl RadialSectorOperator {
    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn sector(&self) -> i64 {
        self.sector
    }

    pub fn cells(&self) -> usize {
        self.pencil.len()
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn pencil(&self) -> &SymmetricTridiagonal {
        &self.pencil
    }

    /// Quadratic form and weighted norm of a cell vector, assembled from
    /// manifestly nonnegative pieces.
    pub(crate) fn form_parts(&self, u: &[f64]) -> (f64, f64) {
        let n = u.len();
        debug_assert_eq!(n, self.pencil.len());
        let h = self.step;
        let mut num =
            self.flux_walls[0] * u[0] * u[0] + self.flux_walls[n] * u[n - 1] * u[n - 1];
        for i in 1..n {
            let d = u[i] - u[i - 1];
            num += self.flux_walls[i] * d * d;
        }
        num /= h * h;
        let mut den = 0.0;
        for i in 0..n {
            num += self.potential[i] * u[i] * u[i];
            den += self.pencil.weight[i] * u[i] * u[i];
        }
        (num, den)
    }

    /// Rayleigh quotient in flux form; for an inverse-iteration eigenvector
    /// this is the accurate eigenvalue even on very deep grids.
    pub fn rayleigh(&self, u: &[f64]) -> f64 {
        let (num, den) = self.form_parts(u);
        num / den
    }
}

/// Builds the sector pencil on `cells` staggered cells.
///
/// Compact family: geodesic variable, closed-form coefficients
/// `p_wall(i) = sin(pi i / n) / (2 sqrt(pi))` and cell data from
/// `x = (2i + 1) / (2n)`, `si = sin(pi x / 2)`, `co = cos(pi x / 2)`:
/// `w = si co / sqrt(pi)`, `A = (r/2) si^r / (si^r + co^r)`.
/// Circle family: chart radius on `[0, wall]`, `p = w = t`, flux from the
/// surface model, Dirichlet at the wall.
pub fn assemble_sector(
    model: &SurfaceModel,
    k: u32,
    m: i64,
    cells: usize,
) -> Result<RadialSectorOperator, SpectralError> {
    if k == 0 {
        return Err(SpectralError::InvalidParameter("k must be positive"));
    }
    if cells < 8 {
        return Err(SpectralError::InvalidParameter("need at least 8 cells"));
    }
    let n = cells;
    let kf = f64::from(k);
    let mf = m as f64;
    let mut flux_walls = Vec::with_capacity(n + 1);
    let mut weight = Vec::with_capacity(n);
    let mut potential = Vec::with_capacity(n);
    let h;
    match model.kind() {
        SurfaceKind::Cp1SemiPositive => {
            let span = model.geodesic_diameter();
            h = span / n as f64;
            let sqrt_pi = PI.sqrt();
            let r = model.r() as i32;
            let half_r = 0.5 * f64::from(model.r());
            flux_walls.push(0.0);
            for i in 1..n {
                flux_walls.push((PI * i as f64 / n as f64).sin() / (2.0 * sqrt_pi));
            }
            flux_walls.push(0.0);
            for i in 0..n {
                let x = (2 * i + 1) as f64 / (2 * n) as f64;
                let (si, co) = (0.5 * PI * x).sin_cos();
                let w = si * co / sqrt_pi;
                let a = half_r * si.powi(r) / (si.powi(r) + co.powi(r));
                let c = mf - kf * a;
                weight.push(w);
                potential.push(c * c / w);
            }
        }
        SurfaceKind::CircleDegenerate => {
            let span = model.wall();
            h = span / n as f64;
            for i in 0..=n {
                flux_walls.push(i as f64 * h);
            }
            for i in 0..n {
                let t = (i as f64 + 0.5) * h;
                let c = mf - kf * model.flux(t);
                weight.push(t);
                potential.push(c * c / t);
            }
        }
    }
    let mut diag = Vec::with_capacity(n);
    let mut off = Vec::with_capacity(n - 1);
    for i in 0..n {
        diag.push((flux_walls[i] + flux_walls[i + 1]) / (h * h) + potential[i]);
        if i + 1 < n {
            off.push(-flux_walls[i + 1] / (h * h));
        }
    }
    let pencil = SymmetricTridiagonal::new(diag, off, weight)?;
    Ok(RadialSectorOperator {
        k,
        sector: m,
        step: h,
        flux_walls,
        potential,
        pencil,
    })
}

/// Lowest eigenvalues of one sector with Richardson refinement and an
/// honest error estimate.
#[derive(Debug, Clone)]
pub struct SectorEigenvalues {
    pub sector: i64,
    pub energies: Vec<f64>,
    pub error_estimate: f64,
    pub cells: usize,
}

pub fn sector_eigenvalues(
    model: &SurfaceModel,
    k: u32,
    m: i64,
    count: usize,
) -> Result<SectorEigenvalues, SpectralError> {
    if count == 0 {
        return Err(SpectralError::InvalidParameter("need at least one eigenvalue"));
    }
    let (energies, error_estimate, cells) = refine_until(
        |n| -> Result<Vec<f64>, SpectralError> {
            let op = assemble_sector(model, k, m, n)?;
            Ok(tridiag_eigen(op.pencil(), EigenRequest::Lowest(count), true)?
                .into_iter()
                .map(|p| op.rayleigh(p.vector.as_ref().expect("vectors requested")))
                .collect())
        },
        BASE_CELLS,
        GRID_CAP,
        |vals| REFINE_TOL * vals.iter().fold(1.0f64, |s, v| s.max(v.abs())),
    )?;
    Ok(SectorEigenvalues {
        sector: m,
        energies,
        error_estimate,
        cells,
    })
}

/// Ground energy over all sectors.
#[derive(Debug, Clone, Copy)]
pub struct GroundValue {
    pub value: f64,
    pub sector: i64,
    pub error_estimate: f64,
}

/// Scan result: per-sector data around the minimizing sector.
#[derive(Debug, Clone)]
pub struct SpectrumResult {
    pub k: u32,
    pub lambda0: f64,
    pub lambda0_sector: i64,
    pub error_estimate: f64,
    pub sectors: Vec<SectorEigenvalues>,
}

/// Sector whose rescaled flux is nearest the degeneracy value; the scan
/// starts there and walks outward.
fn scan_center(model: &SurfaceModel, k: u32) -> i64 {
    let t_star = match model.kind() {
        SurfaceKind::Cp1SemiPositive => 0.0,
        SurfaceKind::CircleDegenerate => 1.0,
    };
    (f64::from(k) * model.flux(t_star)).round() as i64
}

/// Walks sectors outward from the flux center, keeping `per_sector` lowest
/// values in each. Stops in a direction after `STOP_RUN` consecutive minima
/// above `GROWTH_EXIT` times the running best, or after `FLAT_RUN` ties for
/// families whose minima never grow.
pub fn sector_scan(
    model: &SurfaceModel,
    k: u32,
    per_sector: usize,
) -> Result<SpectrumResult, SpectralError> {
    let center = scan_center(model, k);
    let first = sector_eigenvalues(model, k, center, per_sector)?;
    let mut best = (first.energies[0], center, first.error_estimate);
    let mut sectors = vec![first];
    for dir in [-1i64, 1] {
        let mut flat = 0usize;
        let mut grown = 0usize;
        let mut m = center;
        loop {
            m += dir;
            if (m - center).abs() > SCAN_LIMIT {
                return Err(SpectralError::Unconverged(format!(
                    "sector scan walked {SCAN_LIMIT} sectors without an exit"
                )));
            }
            let s = sector_eigenvalues(model, k, m, per_sector)?;
            let e = s.energies[0];
            let err = s.error_estimate;
            sectors.push(s);
            if e < best.0 {
                best = (e, m, err);
            }
            let scale = best.0.max(1e-9);
            if e - best.0 <= FLAT_TOL * scale {
                flat += 1;
                grown = 0;
            } else if e > GROWTH_EXIT * scale {
                grown += 1;
                flat = 0;
            } else {
                flat = 0;
                grown = 0;
            }
            if grown >= STOP_RUN || flat >= FLAT_RUN {
                break;
            }
        }
    }
    sectors.sort_by_key(|s| s.sector);
    Ok(SpectrumResult {
        k,
        lambda0: best.0,
        lambda0_sector: best.1,
        error_estimate: best.2,
        sectors,
    })
}

/// Bottom of the spectrum at tensor power `k`.
pub fn lambda0(model: &SurfaceModel, k: u32) -> Result<GroundValue, SpectralError> {
    let scan = sector_scan(model, k, 1)?;
    Ok(GroundValue {
        value: scan.lambda0,
        sector: scan.lambda0_sector,
        error_estimate: scan.error_estimate,
    })
}

/// Fitted subleading correction of a scaling sequence.
#[derive(Debug, Clone, Copy)]
pub struct CorrectionFit {
    /// `None` when the residuals sit below the noise floor or change sign:
    /// no clean power law is resolvable.
    pub exponent: Option<f64>,
    pub amplitude: f64,
    /// Largest log-residual of the fit (zero when indeterminate).
    pub residual: f64,
}

/// Fits `value(k) - leading ~ amplitude * k^exponent` on log scales.
pub fn fit_correction_exponent(
    samples: &[(f64, f64)],
    leading: f64,
    noise_floor: f64,
) -> CorrectionFit {
    let resid: Vec<(f64, f64)> = samples.iter().map(|&(k, v)| (k, v - leading)).collect();
    let max_abs = resid.iter().fold(0.0f64, |s, &(_, y)| s.max(y.abs()));
    let indeterminate = CorrectionFit {
        exponent: None,
        amplitude: 0.0,
        residual: 0.0,
    };
    if resid.len() < 2 || max_abs <= noise_floor {
        return indeterminate;
    }
    let sign = resid[0].1.signum();
    if resid.iter().any(|&(_, y)| y.signum() != sign || y.abs() <= noise_floor) {
        return indeterminate;
    }
    let xs: Vec<f64> = resid.iter().map(|&(k, _)| k.ln()).collect();
    let ys: Vec<f64> = resid.iter().map(|&(_, y)| y.abs().ln()).collect();
    let fit = fit_line(&xs, &ys);
    CorrectionFit {
        exponent: Some(fit.slope),
        amplitude: sign * fit.intercept.exp(),
        residual: fit.max_residual,
    }
}

/// Measures the subleading behavior of `lambda0(k) k^{-2/r}` against the
/// rescaled-limit constant of the worst degenerate point.
pub fn lambda0_expansion_probe(
    model: &SurfaceModel,
    ks: &[u32],
) -> Result<CorrectionFit, SpectralError> {
    if model.kind() != SurfaceKind::Cp1SemiPositive || model.r() < 4 {
        return Err(SpectralError::Unsupported(
            "correction fit needs a point degeneracy of order at least two",
        ));
    }
    if ks.len() < 3 || ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SpectralError::InvalidParameter(
            "need at least three strictly increasing k values",
        ));
    }
    let rr = 2.0 / f64::from(model.r());
    let leading = ModelOperator::new(model.r(), model.jet_coefficient(0.0)?)?
        .lambda0()?
        .value;
    let mut samples = Vec::with_capacity(ks.len());
    let mut floor = 1e-7 * leading;
    for &k in ks {
        let g = lambda0(model, k)?;
        let scale = f64::from(k).powf(-rr);
        samples.push((f64::from(k), g.value * scale));
        floor = floor.max(20.0 * g.error_estimate * scale);
    }
    Ok(fit_correction_exponent(&samples, leading, floor))
}

/// Mass of the ground state outside the chart-radius-`rho` neighborhoods of
/// the degeneracy locus. `mass` may underflow to zero for large `k`;
/// `ln_mass` stays finite and is the honest quantity to compare.
#[derive(Debug, Clone, Copy)]
pub struct ConcentrationMass {
    pub mass: f64,
    pub ln_mass: f64,
    pub sector: i64,
}

/// Log-scale profile of the pencil's ground vector over `lo..=hi`, anchored
/// on trustworthy entries of `u` and continued through rounding-floor
/// regions by the three-term recurrence of `(K - lambda W) u = 0`.
///
/// Ratios are generated sweeping toward the anchor so that the physical,
/// toward-the-well-growing branch dominates; the sweep is seeded `buffer`
/// cells beyond the far end of the requested range (or at the true boundary
/// closure when the domain ends there), which damps the seed transient by
/// the accumulated branch separation.
fn ln_profile(
    pencil: &SymmetricTridiagonal,
    lambda: f64,
    u: &[f64],
    anchor: usize,
    lo: usize,
    hi: usize,
) -> Result<Vec<f64>, SpectralError> {
    let n = pencil.len();
    debug_assert!(lo <= hi && hi < n);
    debug_assert!(anchor <= lo || anchor >= hi, "anchor must flank the range");
    let umax = u.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let c = |i: usize| pencil.diag[i] - lambda * pencil.weight[i];
    // Ratio chain q_i = u_i / u_{i-1}. Each branch generates it by sweeping
    // away from the anchor's well, so the physical toward-the-well-growing
    // branch dominates; the seed sits `buffer` cells past the far end of
    // the needed range, or on the true boundary closure when the domain
    // ends first, which damps the seed transient by the accumulated branch
    // separation.
    let buffer = 80usize;
    let mut out = Vec::with_capacity(hi - lo + 1);
    if anchor <= lo {
        // March right from a left anchor; backward sweep from the right.
        let seed = (hi + buffer).min(n - 1);
        let mut q = vec![0.0f64; seed + 1];
        q[seed] = if seed == n - 1 {
            // True closure: u_n = 0 (Dirichlet or vanished flux wall).
            -pencil.off[n - 2] / c(n - 1)
        } else {
            -pencil.off[seed - 1] / c(seed)
        };
        for i in ((anchor + 1).max(1)..seed).rev() {
            let denom = c(i) + pencil.off[i] * q[i + 1];
            q[i] = -pencil.off[i - 1] / denom;
        }
        let mut ln_u = u[anchor].abs().max(f64::MIN_POSITIVE).ln();
        let mut pos = anchor;
        while pos < lo {
            pos += 1;
            ln_u += step_ln(u, pos, umax, q[pos])?;
        }
        out.push(ln_u);
        for i in lo + 1..=hi {
            ln_u += step_ln(u, i, umax, q[i])?;
            out.push(ln_u);
        }
    } else {
        // Mirror image: march left from a right anchor; forward sweep from
        // the left.
        let seed = lo.saturating_sub(buffer);
        let mut q = vec![0.0f64; anchor + 1];
        q[seed + 1] = -c(seed) / pencil.off[seed];
        for i in seed + 1..anchor {
            q[i + 1] = -(c(i) + pencil.off[i - 1] / q[i]) / pencil.off[i];
        }
        let mut ln_u = u[anchor].abs().max(f64::MIN_POSITIVE).ln();
        let mut pos = anchor;
        while pos > hi {
            ln_u -= step_ln(u, pos, umax, q[pos])?;
            pos -= 1;
        }
        let mut rev = Vec::with_capacity(hi - lo + 1);
        rev.push(ln_u);
        for i in (lo..hi).rev() {
            ln_u -= step_ln(u, i + 1, umax, q[i + 1])?;
            rev.push(ln_u);
        }
        rev.reverse();
        out = rev;
    }
    Ok(out)
}

/// One log step `ln u_i - ln u_{i-1}`: the direct ratio where the vector is
/// trustworthy, the recurrence ratio in the rounding-floor tail.
fn step_ln(u: &[f64], i: usize, umax: f64, q_rec: f64) -> Result<f64, SpectralError> {
    let trust = |v: f64| v.abs() >= TAIL_TRUST * umax;
    let ratio = if trust(u[i]) && trust(u[i - 1]) && u[i].signum() == u[i - 1].signum() {
        (u[i] / u[i - 1]).abs()
    } else {
        q_rec
    };
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(SpectralError::Unconverged(
            "tail reconstruction crossed a node; ground vector not one-signed".into(),
        ));
    }
    Ok(ratio.ln())
}

fn logsumexp(terms: &[f64]) -> f64 {
    let top = terms.iter().fold(f64::NEG_INFINITY, |s, &v| s.max(v));
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + terms.iter().map(|&v| (v - top).exp()).sum::<f64>().ln()
}

/// Ground-state mass outside the `rho`-neighborhoods of the degeneracy set,
/// computed from the minimizing sector's eigenvector. The region is an
/// annulus `rho <= t <= 1/rho` for the compact family (both poles excluded)
/// and `|t - 1| >= rho` for the circle family.
pub fn ground_state_concentration(
    model: &SurfaceModel,
    k: u32,
    rho: f64,
) -> Result<ConcentrationMass, SpectralError> {
    if model.r() == 2 {
        return Err(SpectralError::Unsupported(
            "the field never degenerates at r = 2; there is no concentration locus",
        ));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(SpectralError::InvalidParameter("rho must lie in (0, 1)"));
    }
    let ground = lambda0(model, k)?;
    let scan = sector_eigenvalues(model, k, ground.sector, 1)?;
    let n = scan.cells;
    let op = assemble_sector(model, k, ground.sector, n)?;
    let pairs = tridiag_eigen(op.pencil(), EigenRequest::Lowest(1), true)?;
    let u = pairs[0].vector.as_ref().expect("vectors requested");
    let lambda = op.rayleigh(u);
    let h = op.step;
    let umax = u.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let trust = |i: usize| u[i].abs() >= TAIL_TRUST * umax;
    let cell_of = |coord: f64| -> usize {
        ((coord / h - 0.5).round().max(0.0) as usize).min(n - 1)
    };
    let mut ln_terms: Vec<f64> = Vec::new();
    match model.kind() {
        SurfaceKind::Cp1SemiPositive => {
            let s_lo = model.geodesic_from_chart(rho);
            let s_hi = model.geodesic_diameter() - s_lo;
            let (i_lo, i_hi) = (cell_of(s_lo), cell_of(s_hi));
            if i_lo > i_hi {
                return Err(SpectralError::InvalidParameter("exclusion radius leaves no region"));
            }
            // The minimizing sector's well sits at one pole; the whole
            // annulus is a single decaying tail, anchored where the vector
            // is still trustworthy on the well side.
            let mut anchor = i_lo.min(n - 1);
            while anchor > 0 && !trust(anchor) {
                anchor -= 1;
            }
            let tail = ln_profile(op.pencil(), lambda, u, anchor, i_lo, i_hi)?;
            for (j, ln_u) in tail.iter().enumerate() {
                ln_terms.push(2.0 * ln_u + op.pencil().weight[i_lo + j].ln());
            }
        }
        SurfaceKind::CircleDegenerate => {
            let t_lo = 1.0 - rho;
            let t_hi = 1.0 + rho;
            if t_hi >= model.wall() {
                return Err(SpectralError::InvalidParameter(
                    "exclusion radius reaches the outer wall",
                ));
            }
            let (i_lo, i_hi) = (cell_of(t_lo), cell_of(t_hi));
            // Outside regions flank the well: march each from its inner edge
            // toward the respective domain end.
            let mut anchor_l = i_lo;
            while anchor_l + 1 < n && !trust(anchor_l) {
                anchor_l += 1;
            }
            if i_lo >= 1 {
                let left = ln_profile(op.pencil(), lambda, u, anchor_l, 0, i_lo - 1)?;
                for (j, ln_u) in left.iter().enumerate() {
                    ln_terms.push(2.0 * ln_u + op.pencil().weight[j].ln());
                }
            }
            let mut anchor_r = i_hi;
            while anchor_r > 0 && !trust(anchor_r) {
                anchor_r -= 1;
            }
            if i_hi + 1 < n {
                let right = ln_profile(op.pencil(), lambda, u, anchor_r, i_hi + 1, n - 1)?;
                for (j, ln_u) in right.iter().enumerate() {
                    ln_terms.push(2.0 * ln_u + op.pencil().weight[i_hi + 1 + j].ln());
                }
            }
        }
    }
    let ln_mass = logsumexp(&ln_terms);
    Ok(ConcentrationMass {
        mass: ln_mass.exp(),
        ln_mass,
        sector: ground.sector,
    })
}

/// Eigenvalue count in `[c1 k^{2/r}, c2 k^{2/r}]` summed over sectors.
#[derive(Debug, Clone)]
pub struct WeylCount {
    pub count: usize,
    /// Sectors actually solved, with their raw in-window counts (before the
    /// mirror multiplicity of the compact family).
    pub per_sector: Vec<(i64, usize)>,
    pub window: (f64, f64),
}

/// Window eigenvalues of one sector with an endpoint conditioning audit:
/// every value near the window must clear both edges by a margin tied to
/// the refinement error estimate.
fn window_values(
    model: &SurfaceModel,
    k: u32,
    m: i64,
    lo: f64,
    hi: f64,
) -> Result<Vec<f64>, SpectralError> {
    let pad = 0.02 * (hi - lo);
    let (vals, err, _cells) = refine_until(
        |n| -> Result<Vec<f64>, SpectralError> {
            let op = assemble_sector(model, k, m, n)?;
            Ok(
                tridiag_eigen(op.pencil(), EigenRequest::Window(lo - pad, hi + pad), true)?
                    .into_iter()
                    .map(|p| op.rayleigh(p.vector.as_ref().expect("vectors requested")))
                    .collect(),
            )
        },
        BASE_CELLS,
        GRID_CAP,
        |_| REFINE_TOL * hi.max(1.0),
    )?;
    let margin = (50.0 * err).max(1e-9 * hi.max(1.0));
    for &v in &vals {
        for edge in [lo, hi] {
            if (v - edge).abs() < margin {
                return Err(SpectralError::IllConditionedWindow {
                    endpoint: edge,
                    distance: (v - edge).abs(),
                });
            }
        }
    }
    Ok(vals)
}

/// Counts `Spec cap [c1 k^{2/r}, c2 k^{2/r}]` over all sectors. The sector
/// walk stops only after `STOP_RUN` consecutive minima above four times the
/// window top, so the cutoff is audited rather than assumed. For the
/// compact family only `m <= kd/2` is solved; the exact mirror symmetry
/// `m <-> kd - m` of the two-pole geometry supplies the rest.
pub fn weyl_count(
    model: &SurfaceModel,
    k: u32,
    c1: f64,
    c2: f64,
) -> Result<WeylCount, SpectralError> {
    if !(c1.is_finite() && c2.is_finite() && 0.0 <= c1 && c1 < c2) {
        return Err(SpectralError::InvalidParameter("window must satisfy 0 <= c1 < c2"));
    }
    let scale = f64::from(k).powf(2.0 / f64::from(model.r()));
    let (lo, hi) = (c1 * scale, c2 * scale);
    let cushion = 4.0 * hi;
    let compact_mid = match model.kind() {
        SurfaceKind::Cp1SemiPositive => {
            let kd = i64::from(k) * i64::from(model.r() / 2);
            Some((kd, kd / 2))
        }
        SurfaceKind::CircleDegenerate => None,
    };
    let center = match compact_mid {
        Some(_) => 0,
        None => scan_center(model, k),
    };
    let mut per_sector = Vec::new();
    let mut total = 0usize;
    for dir in [1i64, -1] {
        let mut run = 0usize;
        let mut m = center - dir; // first probe lands on `center` for dir = +1
        if dir == -1 {
            m = center;
        }
        loop {
            m += dir;
            if (m - center).abs() > SCAN_LIMIT {
                return Err(SpectralError::Unconverged(format!(
                    "window sector walk passed {SCAN_LIMIT} sectors"
                )));
            }
            if let Some((kd, mid)) = compact_mid {
                if dir == 1 && m > mid {
                    break;
                }
                let _ = kd;
            }
            let min_e = sector_eigenvalues(model, k, m, 1)?.energies[0];
            if min_e > cushion {
                run += 1;
                if run >= STOP_RUN {
                    break;
                }
                continue;
            }
            run = 0;
            let vals = window_values(model, k, m, lo, hi)?;
            let c = vals.iter().filter(|&&v| v >= lo && v <= hi).count();
            let mult = match compact_mid {
                Some((kd, _)) => {
                    if 2 * m == kd {
                        1
                    } else {
                        2
                    }
                }
                None => 1,
            };
            if c > 0 {
                per_sector.push((m, c));
                total += mult * c;
            }
        }
    }
    per_sector.sort_unstable();
    Ok(WeylCount {
        count: total,
        per_sector,
        window: (lo, hi),
    })
}

/// Spectrum of the holomorphically twisted operator `Delta_k - k tau`.
#[derive(Debug, Clone, Copy)]
pub struct KodairaSpectrum {
    pub k: u32,
    pub zero_modes: usize,
    pub first_positive: f64,
    pub error_estimate: f64,
    /// Classification threshold between zero modes and the positive part.
    pub threshold: f64,
}

/// Scalar curvature-twist values `tau` at the staggered cells of the
/// compact family, in the same closed `si`/`co` form as the assembly so the
/// mirror symmetry survives to rounding.
fn twist_cells(model: &SurfaceModel, n: usize) -> Vec<f64> {
    let r = model.r() as i32;
    let rf = f64::from(model.r());
    let lead = 0.5 * PI * rf * rf;
    (0..n)
        .map(|i| {
            let x = (2 * i + 1) as f64 / (2 * n) as f64;
            let (si, co) = (0.5 * PI * x).sin_cos();
            lead * (si * co).powi(r - 2) / (si.powi(r) + co.powi(r)).powi(2)
        })
        .collect()
}

/// Lowest `count` eigenvalues of one twisted sector, refined to the given
/// absolute tolerance. The polish subtracts the twist in flux form so the
/// small-residual property survives.
fn twisted_sector(
    model: &SurfaceModel,
    k: u32,
    m: i64,
    count: usize,
    tol: f64,
) -> Result<SectorEigenvalues, SpectralError> {
    let kf = f64::from(k);
    let (energies, error_estimate, cells) = refine_until(
        |n| -> Result<Vec<f64>, SpectralError> {
            let op = assemble_sector(model, k, m, n)?;
            let tau = twist_cells(model, n);
            let mut diag = op.pencil().diag.clone();
            for i in 0..n {
                diag[i] -= kf * tau[i] * op.pencil().weight[i];
            }
            let twisted = SymmetricTridiagonal::new(
                diag,
                op.pencil().off.clone(),
                op.pencil().weight.clone(),
            )?;
            Ok(tridiag_eigen(&twisted, EigenRequest::Lowest(count), true)?
                .into_iter()
                .map(|p| {
                    let u = p.vector.as_ref().expect("vectors requested");
                    let (num, den) = op.form_parts(u);
                    let shift: f64 = (0..n)
                        .map(|i| kf * tau[i] * op.pencil().weight[i] * u[i] * u[i])
                        .sum();
                    (num - shift) / den
                })
                .collect())
        },
        BASE_CELLS,
        GRID_CAP,
        |_| tol,
    )?;
    Ok(SectorEigenvalues {
        sector: m,
        energies,
        error_estimate,
        cells,
    })
}

/// Zero-mode count and first positive eigenvalue of the twisted operator on
/// the compact family. Every sector in `[0, kd/2]` is solved (in parallel)
/// and doubled by the mirror symmetry; negative sectors are walked until
/// they are clearly above the positive part.
pub fn kodaira_spectrum(model: &SurfaceModel, k: u32) -> Result<KodairaSpectrum, SpectralError> {
    if model.kind() != SurfaceKind::Cp1SemiPositive {
        return Err(SpectralError::Unsupported(
            "the holomorphic twist needs the compact semi-positive family",
        ));
    }
    if k == 0 {
        return Err(SpectralError::InvalidParameter("k must be positive"));
    }
    let rf = f64::from(model.r());
    let scale = f64::from(k).powf(2.0 / rf);
    let threshold = 1e-3 * scale;
    let tol = 0.02 * threshold;
    let kd = i64::from(k) * i64::from(model.r() / 2);
    let mid = kd / 2;
    let solved: Result<Vec<SectorEigenvalues>, SpectralError> = (0..=mid)
        .into_par_iter()
        .map(|m| twisted_sector(model, k, m, 2, tol))
        .collect();
    let solved = solved?;
    let mut zero_modes = 0usize;
    let mut first_positive = f64::INFINITY;
    let mut error_estimate = 0.0;
    for s in &solved {
        let mult = if 2 * s.sector == kd { 1 } else { 2 };
        let low = s.energies[0];
        if low < -threshold {
            return Err(SpectralError::NegativeSpectrum {
                value: low,
                tolerance: threshold,
            });
        }
        let candidate = if low < threshold {
            zero_modes += mult;
            s.energies[1]
        } else {
            low
        };
        if candidate < first_positive {
            first_positive = candidate;
            error_estimate = s.error_estimate;
        }
    }
    let mut m = -1i64;
    let mut clear = 0usize;
    while clear < STOP_RUN {
        if m < -SCAN_LIMIT {
            return Err(SpectralError::Unconverged(
                "negative sector walk found no clear exit".into(),
            ));
        }
        let s = twisted_sector(model, k, m, 1, tol)?;
        let low = s.energies[0];
        if low < -threshold {
            return Err(SpectralError::NegativeSpectrum {
                value: low,
                tolerance: threshold,
            });
        }
        if low < threshold {
            zero_modes += 2;
            clear = 0;
        } else {
            if low < first_positive {
                first_positive = low;
                error_estimate = s.error_estimate;
                clear = 0;
            } else if low > 3.0 * first_positive.max(10.0 * threshold) {
                clear += 1;
            } else {
                clear = 0;
            }
        }
        m -= 1;
    }
    if first_positive < 10.0 * threshold {
        return Err(SpectralError::Unconverged(format!(
            "positive spectrum {first_positive:.3e} is not separated from the zero-mode threshold {threshold:.3e}"
        )));
    }
    Ok(KodairaSpectrum {
        k,
        zero_modes,
        first_positive,
        error_estimate,
        threshold,
    })
}

/// Evaluation point for the heat diagonal.
#[derive(Debug, Clone, Copy)]
pub enum SurfacePoint {
    /// A degenerate pole of the compact family.
    Pole,
    /// Chart radius `t`, a generic point when `t` is off the degeneracy set.
    Chart(f64),
}

/// Heat kernel diagonal `exp(-(time/k^{2/r}) Delta_k)(y, y)` as a density
/// against the surface volume form. Sector sums are truncated `HEAT_EFOLDS`
/// above the bottom of the spectrum; the omitted tail is smaller than the
/// kept part by `e^{-HEAT_EFOLDS}`.
pub fn heat_diag(
    model: &SurfaceModel,
    k: u32,
    time: f64,
    point: SurfacePoint,
) -> Result<f64, SpectralError> {
    if k == 0 {
        return Err(SpectralError::InvalidParameter("k must be positive"));
    }
    if !(time > 0.0 && time.is_finite()) {
        return Err(SpectralError::InvalidParameter("time must be positive and finite"));
    }
    let st = time / f64::from(k).powf(2.0 / f64::from(model.r()));
    match point {
        SurfacePoint::Pole => {
            if model.kind() != SurfaceKind::Cp1SemiPositive {
                return Err(SpectralError::Unsupported(
                    "pole evaluation needs the compact family",
                ));
            }
            pole_heat(model, k, st)
        }
        SurfacePoint::Chart(t0) => {
            if !(t0 >= 0.0 && t0.is_finite()) {
                return Err(SpectralError::InvalidParameter("chart radius must be finite and nonnegative"));
            }
            if model.kind() == SurfaceKind::CircleDegenerate && t0 >= model.wall() {
                return Err(SpectralError::InvalidParameter("chart radius beyond the wall"));
            }
            chart_heat(model, k, st, t0)
        }
    }
}

/// Free one-dimensional state estimate for the truncation budget guard.
fn budget_guard(span: f64, cap: f64) -> Result<(), SpectralError> {
    let states = (span / PI) * cap.max(0.0).sqrt();
    if !states.is_finite() || states > HEAT_MAX_STATES as f64 {
        return Err(SpectralError::TruncationBudget {
            states: states.min(1e12) as usize,
        });
    }
    Ok(())
}

fn pole_heat(model: &SurfaceModel, k: u32, st: f64) -> Result<f64, SpectralError> {
    let ground = sector_eigenvalues(model, k, 0, 1)?;
    let cap = ground.energies[0] + HEAT_EFOLDS / st;
    budget_guard(model.geodesic_diameter(), cap)?;
    let (vals, _err, _cells) = refine_until(
        |n| -> Result<Vec<f64>, SpectralError> {
            let op = assemble_sector(model, k, 0, n)?;
            let pairs = tridiag_eigen(op.pencil(), EigenRequest::Window(-1.0, cap), true)?;
            let h = op.step;
            let mut acc = 0.0;
            for p in &pairs {
                let u = p.vector.as_ref().expect("vectors requested");
                let e = op.rayleigh(u);
                let head = [u[0], u[1], u[2]];
                acc += (-st * e).exp() * origin_value_sq(&head, h);
            }
            Ok(vec![acc / (2.0 * PI * h)])
        },
        1024,
        GRID_CAP,
        |vals| 1e-6 * vals[0].abs().max(1e-300),
    )?;
    Ok(vals[0])
}

/// Squared amplitude of a staggered cell vector at coordinate `s0`, by
/// linear interpolation between neighboring cells.
fn amp_sq_at(u: &[f64], h: f64, s0: f64) -> f64 {
    let n = u.len();
    let j = ((s0 / h - 0.5).floor().max(0.0) as usize).min(n - 2);
    let frac = s0 / h - 0.5 - j as f64;
    let v = u[j] * (1.0 - frac) + u[j + 1] * frac;
    v * v
}

fn chart_heat(model: &SurfaceModel, k: u32, st: f64, t0: f64) -> Result<f64, SpectralError> {
    let compact = model.kind() == SurfaceKind::Cp1SemiPositive;
    let (s0, span) = if compact {
        (model.geodesic_from_chart(t0), model.geodesic_diameter())
    } else {
        (t0, model.wall())
    };
    let kd = i64::from(k) * i64::from(model.r() / 2);
    let center = if compact { 0 } else { scan_center(model, k) };
    let ground = sector_eigenvalues(model, k, center, 1)?;
    let cap = ground.energies[0] + HEAT_EFOLDS / st;
    budget_guard(span, cap)?;
    let s_mirror = span - s0;
    let value_at = |n: usize| -> Result<f64, SpectralError> {
        let mut acc = 0.0;
        for dir in [1i64, -1] {
            let mut run = 0usize;
            let mut m = if dir == 1 { center } else { center - 1 };
            loop {
                if (m - center).abs() > SCAN_LIMIT {
                    return Err(SpectralError::Unconverged(
                        "heat sector walk passed the scan limit".into(),
                    ));
                }
                if compact && dir == 1 && 2 * m > kd {
                    break;
                }
                let op = assemble_sector(model, k, m, n)?;
                let below = op.pencil().count_below(cap);
                if below == 0 {
                    run += 1;
                    if run >= STOP_RUN {
                        break;
                    }
                    m += dir;
                    continue;
                }
                if below > HEAT_MAX_STATES {
                    return Err(SpectralError::TruncationBudget { states: below });
                }
                run = 0;
                let pairs = tridiag_eigen(op.pencil(), EigenRequest::Window(-1.0, cap), true)?;
                let h = op.step;
                for p in &pairs {
                    let u = p.vector.as_ref().expect("vectors requested");
                    let e = op.rayleigh(u);
                    let boltz = (-st * e).exp();
                    let mut amp = amp_sq_at(u, h, s0);
                    // The compact family's upper sectors are the exact
                    // mirrors of the solved ones: fold them in by
                    // evaluating the mirrored point, except at the
                    // self-mirrored middle sector.
                    if compact && 2 * m != kd {
                        amp += amp_sq_at(u, h, s_mirror);
                    }
                    acc += boltz * amp / (2.0 * PI * h);
                }
                m += dir;
            }
        }
        Ok(acc)
    };
    let (vals, _err, _cells) = refine_until(
        |n| -> Result<Vec<f64>, SpectralError> { Ok(vec![value_at(n)?]) },
        1024,
        GRID_CAP,
        |vals| 1e-6 * vals[0].abs().max(1e-300),
    )?;
    Ok(vals[0])
}

/// Ground energy of the straightened transverse family at band offset `xi`:
/// `-d^2/dx^2 + (xi - F(x))^2` on the line with `F(x) = beta x |x|^{r-2} /
/// (r-1)`, the flux primitive of the one-signed transverse field
/// `beta |x|^{r-2}`. For even `r` this coincides with the polynomial band
/// family; for odd `r` the absolute value keeps the field one-signed, which
/// is what a degeneracy circle of a semi-positive curvature form produces.
fn transverse_line_length(r: u32, beta: f64, xi_top: f64, e_top: f64) -> f64 {
    let rf = f64::from(r);
    let reach = xi_top.abs() + e_top.max(0.0).sqrt() + 6.0;
    ((rf - 1.0) * reach / beta).powf(1.0 / (rf - 1.0)) + 4.0 * beta.powf(-1.0 / rf)
}

fn transverse_potential(r: u32, beta: f64, xi: f64) -> impl Fn(f64) -> f64 + Copy {
    let rf = f64::from(r);
    move |x: f64| {
        let f = beta * x * x.abs().powi(r as i32 - 2) / (rf - 1.0);
        let c = xi - f;
        c * c
    }
}

fn transverse_validate(r: u32, beta: f64) -> Result<(), SpectralError> {
    if r < 2 {
        return Err(SpectralError::InvalidParameter("transverse order must be at least 2"));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(SpectralError::InvalidParameter("transverse jet must be positive and finite"));
    }
    Ok(())
}

/// Bottom of the transverse band function `xi -> lambda(xi)`, the scaling
/// constant of the circle family's ground energy. Coarse scan plus
/// golden-section on a fixed grid, then full refinement at the winner; the
/// band function is even in `xi`, so only `xi >= 0` is searched.
pub fn transverse_band_minimum(r: u32, beta: f64) -> Result<f64, SpectralError> {
    transverse_validate(r, beta)?;
    let xi_scale = beta.powf(1.0 / f64::from(r));
    let e_top = 4.0 * xi_scale * xi_scale + 4.0;
    let xi_top = 4.0 * xi_scale + 2.0;
    let length = transverse_line_length(r, beta, xi_top, e_top);
    let quick = |xi: f64| -> Result<f64, SpectralError> {
        let pencil = line_pencil(4096, length, transverse_potential(r, beta, xi))?;
        Ok(tridiag_eigen(&pencil, EigenRequest::Lowest(1), false)?[0].value)
    };
    let steps = 32usize;
    let mut best_xi = 0.0;
    let mut best = f64::INFINITY;
    for i in 0..=steps {
        let xi = xi_top * i as f64 / steps as f64;
        let e = quick(xi)?;
        if e < best {
            best = e;
            best_xi = xi;
        }
    }
    let step = xi_top / steps as f64;
    let (mut a, mut b) = (best_xi - step, best_xi + step);
    let gold = 0.5 * (5.0f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (b - gold * (b - a), a + gold * (b - a));
    let (mut f1, mut f2) = (quick(x1)?, quick(x2)?);
    for _ in 0..60 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gold * (b - a);
            f1 = quick(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gold * (b - a);
            f2 = quick(x2)?;
        }
    }
    let xi_star = 0.5 * (a + b);
    let v = transverse_potential(r, beta, xi_star);
    let (vals, _err, _n) = refine_until(
        |n| -> Result<Vec<f64>, SpectralError> {
            let pencil = line_pencil(n, length, v)?;
            let pairs = tridiag_eigen(&pencil, EigenRequest::Lowest(1), true)?;
            Ok(vec![line_flux_rayleigh(
                n,
                length,
                &v,
                pairs[0].vector.as_ref().expect("vectors requested"),
            )])
        },
        2048,
        GRID_CAP,
        |vals| REFINE_TOL * vals[0].abs().max(1.0),
    )?;
    Ok(vals[0])
}

/// `int over xi of #{ j : lambda_j(xi) in [lo, hi] }`: the transverse
/// counting density whose product with `k^{1/r}` is the circle family's
/// window count. Midpoint quadrature over `xi >= 0`, doubled by evenness;
/// each count is audited by one grid doubling.
pub fn transverse_window_integral(
    r: u32,
    beta: f64,
    lo: f64,
    hi: f64,
) -> Result<f64, SpectralError> {
    transverse_validate(r, beta)?;
    if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi) {
        return Err(SpectralError::InvalidParameter("window must satisfy 0 <= lo < hi"));
    }
    let delta = 1.0 / 64.0;
    let mut total = 0.0f64;
    let mut empty_run = 0usize;
    let mut j = 0usize;
    while empty_run < 8 {
        let xi = (j as f64 + 0.5) * delta;
        if xi > 1e4 {
            return Err(SpectralError::Unconverged(
                "transverse band never left the window".into(),
            ));
        }
        let length = transverse_line_length(r, beta, xi, hi);
        let mut n = 2048usize;
        let count = loop {
            let count_at = |cells: usize| -> Result<usize, SpectralError> {
                let pencil = line_pencil(cells, length, transverse_potential(r, beta, xi))?;
                Ok(pencil.count_below(hi) - pencil.count_below(lo))
            };
            let c1 = count_at(n)?;
            let c2 = count_at(2 * n)?;
            if c1 == c2 {
                break c1;
            }
            n *= 2;
            if n > (1 << 16) {
                return Err(SpectralError::Unconverged(
                    "transverse window count kept changing under refinement".into(),
                ));
            }
        };
        if count == 0 {
            empty_run += 1;
        } else {
            empty_run = 0;
            total += count as f64 * delta;
        }
        j += 1;
    }
    Ok(2.0 * total)
}
