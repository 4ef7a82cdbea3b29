//! Gaussian random sections of the compact family and their zeros.
//!
//! A trial draws i.i.d. standard complex Gaussian coefficients `c_alpha` and
//! forms the random polynomial `p(z) = sum c_alpha z^alpha / ||s_alpha||`,
//! with the squared norms taken from the curvature-measure section basis.
//! The roots of `p` are the zero set of the corresponding random section; as
//! the tensor power grows, the normalized empirical root measure concentrates
//! on the curvature form, so the radial moduli follow the closed distribution
//! function `s^r/(1+s^r)` and the arguments are uniform.
//!
//! Two basis ranges are supported. `Full` uses every section, exponents
//! `0..rk/2`. `Capped` stops at exponent `k`: for `r = 2` the two coincide,
//! while for `r > 2` the cap drops the upper part of the space and the root
//! count `k` can no longer balance the curvature mass `rk/2`, so the radial
//! statistics keep a persistent, k-independent bias. The capped variant is
//! retained deliberately: the experiments quantify that bias instead of
//! hiding it.
//!
//! Coefficients are derived per (seed, trial) from independent counter-based
//! generator streams, so trials are reproducible and embarrassingly parallel.
//! The polynomial handed to the root finder is rescaled by a single global
//! factor (roots are invariant) so the largest coefficient weight is one;
//! the ensemble refuses degrees whose weight span would leave the double
//! range instead of silently flushing end coefficients to zero.

use crate::bergman::{section_norms, BergmanError, Measure};
use crate::numerics::{ks_distance, poly_roots, DeterministicRng, NumericsError, StopReason};
use crate::surface::{SurfaceError, SurfaceKind, SurfaceModel};
use num_complex::Complex64;
use rayon::prelude::*;

/// Errors for ensemble construction and the statistics drivers.
#[derive(Debug, thiserror::Error)]
pub enum ZerosError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("data quality: {0}")]
    DataQuality(String),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Bergman(#[from] BergmanError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Which monomial exponents participate in the random section.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisRange {
    /// Every holomorphic section: exponents 0..rk/2.
    Full,
    /// Exponents capped at k; a strict truncation for r > 2.
    Capped,
}

impl BasisRange {
    /// Stable lowercase tag used in reports and CSV columns.
    pub fn label(self) -> &'static str {
        match self {
            BasisRange::Full => "full",
            BasisRange::Capped => "capped",
        }
    }

    fn top_exponent(self, r: u32, k: u32) -> u32 {
        match self {
            BasisRange::Full => r * k / 2,
            BasisRange::Capped => k.min(r * k / 2),
        }
    }
}

/// A clean trial must leave the polished Newton correction below this
/// relative size; anything else counts as a root-finder failure.
const ROOT_QUALITY_TOL: f64 = 1e-6;

/// Statistics need enough trials to average; density audits need more.
const MIN_STAT_TRIALS: u32 = 10;
const MIN_DENSITY_TRIALS: u32 = 100;

/// Largest tolerated ln spread between the heaviest and lightest coefficient
/// weight; beyond this the scaled polynomial underflows f64.
const MAX_COEFF_LN_SPAN: f64 = 700.0;

/// A seeded family of Gaussian random sections at fixed tensor power.
#[derive(Debug, Clone)]
pub struct RandomEnsemble {
    r: u32,
    k: u32,
    range: BasisRange,
    seed: u64,
    trials: u32,
    /// ln of the coefficient weight `1/||s_alpha||`, shifted so the maximum
    /// is zero; the shift is stored separately to undo it in intensities.
    ln_scales: Vec<f64>,
    shift: f64,
}

impl RandomEnsemble {
    /// Builds the ensemble on the compact family; the circle family carries
    /// no polynomial sections.
    pub fn new(
        model: &SurfaceModel,
        k: u32,
        range: BasisRange,
        seed: u64,
        trials: u32,
    ) -> Result<Self, ZerosError> {
        if model.kind() != SurfaceKind::Cp1SemiPositive {
            return Err(ZerosError::InvalidParameter(
                "random sections exist only on the compact family",
            ));
        }
        if trials == 0 {
            return Err(ZerosError::InvalidParameter("at least one trial"));
        }
        let basis = section_norms(model, k, Measure::Curvature)?;
        let r = basis.r();
        let top = range.top_exponent(r, k);
        let raw: Vec<f64> = (0..=top).map(|a| -0.5 * basis.ln_norm(a)).collect();
        let shift = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ln_scales: Vec<f64> = raw.iter().map(|a| a - shift).collect();
        if ln_scales.iter().any(|v| *v < -MAX_COEFF_LN_SPAN) {
            return Err(ZerosError::InvalidParameter(
                "coefficient weight span exceeds double precision at this degree",
            ));
        }
        Ok(Self { r, k, range, seed, trials, ln_scales, shift })
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn range(&self) -> BasisRange {
        self.range
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn trials(&self) -> u32 {
        self.trials
    }

    /// Polynomial degree, hence the root count of every trial.
    pub fn degree(&self) -> usize {
        self.ln_scales.len() - 1
    }

    /// The scaled coefficient sequence of one trial: `c_alpha` times the
    /// weight `exp(ln_scales[alpha])`, ascending in alpha. Deterministic per
    /// (seed, trial); the global weight shift does not move the roots.
    pub fn coefficients(&self, trial: u32) -> Result<Vec<Complex64>, ZerosError> {
        if trial >= self.trials {
            return Err(ZerosError::InvalidParameter("trial index past the configured count"));
        }
        let mut rng = DeterministicRng::with_stream(self.seed, u64::from(trial));
        Ok(self.ln_scales.iter().map(|&ls| rng.complex_gaussian() * ls.exp()).collect())
    }

    /// All roots of one trial.
    pub fn zero_set(&self, trial: u32) -> Result<ZeroSet, ZerosError> {
        let coeffs = self.coefficients(trial)?;
        let find = poly_roots(&coeffs)?;
        let clean =
            find.stop != StopReason::MaxIterations && find.max_newton_correction < ROOT_QUALITY_TOL;
        Ok(ZeroSet {
            trial,
            roots: find.roots,
            newton_correction: find.max_newton_correction,
            clean,
        })
    }

    /// One Monte Carlo sample of the weighted intensity `|p(t)|^2` in the
    /// section weight at chart radius `t`. Its expectation over trials is the
    /// kernel diagonal of the participating sections, which for the full
    /// range is the reproducing kernel diagonal itself.
    pub fn weighted_intensity(&self, trial: u32, t: f64) -> Result<f64, ZerosError> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(ZerosError::InvalidParameter("chart radius must be finite and nonnegative"));
        }
        let coeffs = self.coefficients(trial)?;
        let z = Complex64::new(t, 0.0);
        let mut p = Complex64::new(0.0, 0.0);
        for &c in coeffs.iter().rev() {
            p = p * z + c;
        }
        let ln_intensity = 2.0 * (p.norm().ln() + self.shift)
            - f64::from(self.k) * t.powi(self.r as i32).ln_1p();
        Ok(ln_intensity.exp())
    }

    /// Mean monomial exponent under the softmax weights `t^{2a}/||s_a||^2`.
    /// For a Gaussian section this equals the exact expected number of zeros
    /// with modulus below `t`, at every tensor power, for either basis range.
    pub fn mean_active_exponent(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t.is_infinite() {
            return self.degree() as f64;
        }
        let lnt2 = 2.0 * t.ln();
        let mut top = f64::NEG_INFINITY;
        for (a, &ls) in self.ln_scales.iter().enumerate() {
            top = top.max(2.0 * ls + a as f64 * lnt2);
        }
        let (mut num, mut den) = (0.0, 0.0);
        for (a, &ls) in self.ln_scales.iter().enumerate() {
            let w = (2.0 * ls + a as f64 * lnt2 - top).exp();
            den += w;
            num += a as f64 * w;
        }
        num / den
    }
}

/// The root multiset of one trial.
#[derive(Debug, Clone)]
pub struct ZeroSet {
    trial: u32,
    roots: Vec<Complex64>,
    newton_correction: f64,
    clean: bool,
}

impl ZeroSet {
    pub fn trial(&self) -> u32 {
        self.trial
    }

    pub fn roots(&self) -> &[Complex64] {
        &self.roots
    }

    /// Largest polished Newton correction, the root finder's own residual.
    pub fn newton_correction(&self) -> f64 {
        self.newton_correction
    }

    /// Whether the solve converged with an acceptable residual.
    pub fn is_clean(&self) -> bool {
        self.clean
    }

    /// Root moduli, unsorted.
    pub fn radial_moduli(&self) -> Vec<f64> {
        self.roots.iter().map(|z| z.norm()).collect()
    }

    /// Root arguments mapped to [0, 1).
    pub fn angular_fractions(&self) -> Vec<f64> {
        self.roots
            .iter()
            .map(|z| {
                let u = z.arg() / (2.0 * std::f64::consts::PI) + 0.5;
                u.clamp(0.0, 1.0)
            })
            .collect()
    }
}

/// Fraction of the curvature mass inside chart radius `s`: the limiting
/// distribution function of the root moduli, `s^r/(1+s^r)`.
pub fn radial_mass_fraction(r: u32, s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    let p = s.powi(r as i32);
    if p.is_infinite() {
        return 1.0;
    }
    p / (1.0 + p)
}

/// Averaged distribution distances over an ensemble.
#[derive(Debug, Clone)]
pub struct ZeroStatistics {
    pub trials: u32,
    /// Trials discarded for root-finder quality; bounded by 1% of the total.
    pub failed_trials: u32,
    pub degree: usize,
    /// Mean over clean trials of the KS distance between the root moduli and
    /// the curvature mass fraction.
    pub mean_radial_ks: f64,
    /// Mean over clean trials of the KS distance between the normalized root
    /// arguments and the uniform law.
    pub mean_angular_ks: f64,
    /// Median modulus pooled over all clean trials.
    pub median_modulus: f64,
}

/// Runs every trial, extracts roots, and averages the radial and angular
/// distribution distances. Trials run in parallel on independent generator
/// streams; the reduction is ordered, so the result is independent of the
/// thread count. More than 1% failed trials is a data-quality error.
pub fn zero_statistics(ensemble: &RandomEnsemble) -> Result<ZeroStatistics, ZerosError> {
    if ensemble.trials < MIN_STAT_TRIALS {
        return Err(ZerosError::InvalidParameter("statistics need at least 10 trials"));
    }
    let r = ensemble.r;
    let per_trial: Vec<Option<(f64, f64, Vec<f64>)>> = (0..ensemble.trials)
        .into_par_iter()
        .map(|trial| {
            let zs = ensemble.zero_set(trial).ok()?;
            if !zs.is_clean() {
                return None;
            }
            let moduli = zs.radial_moduli();
            let radial = ks_distance(&moduli, |s| radial_mass_fraction(r, s));
            let angular = ks_distance(&zs.angular_fractions(), |u| u.clamp(0.0, 1.0));
            Some((radial, angular, moduli))
        })
        .collect();

    let failed = per_trial.iter().filter(|o| o.is_none()).count() as u32;
    if u64::from(failed) * 100 > u64::from(ensemble.trials) {
        return Err(ZerosError::DataQuality(format!(
            "{failed} of {} trials failed root finding",
            ensemble.trials
        )));
    }
    let clean = (ensemble.trials - failed) as f64;
    let mut radial_sum = 0.0;
    let mut angular_sum = 0.0;
    let mut pooled: Vec<f64> = Vec::new();
    for entry in per_trial.into_iter().flatten() {
        radial_sum += entry.0;
        angular_sum += entry.1;
        pooled.extend(entry.2);
    }
    pooled.sort_by(f64::total_cmp);
    let median_modulus = if pooled.is_empty() {
        f64::NAN
    } else {
        let mid = pooled.len() / 2;
        if pooled.len() % 2 == 0 { 0.5 * (pooled[mid - 1] + pooled[mid]) } else { pooled[mid] }
    };
    Ok(ZeroStatistics {
        trials: ensemble.trials,
        failed_trials: failed,
        degree: ensemble.degree(),
        mean_radial_ks: radial_sum / clean,
        mean_angular_ks: angular_sum / clean,
        median_modulus,
    })
}

/// Monte Carlo count of zeros in an annulus against the curvature mass.
#[derive(Debug, Clone, Copy)]
pub struct DensityCheck {
    /// Mean number of roots with `lo <= |z| < hi` per trial.
    pub mean_count: f64,
    /// k times the curvature mass of the annulus: the limiting count.
    pub expected_count: f64,
    /// Exact expectation at this tensor power, from the mean active
    /// exponent. Near a degeneracy point it exceeds the limiting count until
    /// the crossover scale `k^{-1/r}` has passed the annulus.
    pub expected_exact: f64,
    /// |mean - expected_count| / expected_count, against the limit.
    pub relative_gap: f64,
    /// Standard error of the mean count over trials.
    pub std_error: f64,
}

/// Counts zeros per trial in `lo <= |z| < hi` and compares the mean against
/// `k` times the curvature mass of the annulus. `hi` may be infinite; with
/// the whole plane the count is the degree exactly and the gap collapses to
/// the mass accounting of the basis range.
pub fn expected_zero_density_check(
    ensemble: &RandomEnsemble,
    lo: f64,
    hi: f64,
) -> Result<DensityCheck, ZerosError> {
    if ensemble.trials < MIN_DENSITY_TRIALS {
        return Err(ZerosError::InvalidParameter("density audits need at least 100 trials"));
    }
    if !(lo.is_finite() && lo >= 0.0 && hi > lo) {
        return Err(ZerosError::InvalidParameter("annulus needs 0 <= lo < hi"));
    }
    let counts: Vec<f64> = (0..ensemble.trials)
        .into_par_iter()
        .map(|trial| {
            let zs = ensemble.zero_set(trial)?;
            let n = zs.roots().iter().filter(|z| z.norm() >= lo && z.norm() < hi).count();
            Ok::<f64, ZerosError>(n as f64)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<f64>() / n;
    let var = counts.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (n - 1.0);
    let std_error = (var / n).sqrt();
    let rf = f64::from(ensemble.r);
    let mass = rf / 2.0 * (radial_mass_fraction(ensemble.r, hi) - radial_mass_fraction(ensemble.r, lo));
    let expected = f64::from(ensemble.k) * mass;
    let expected_exact = ensemble.mean_active_exponent(hi) - ensemble.mean_active_exponent(lo);
    let relative_gap = if expected > 0.0 {
        (mean - expected).abs() / expected
    } else if mean == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(DensityCheck {
        mean_count: mean,
        expected_count: expected,
        expected_exact,
        relative_gap,
        std_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bergman::bergman_diag;
    use crate::numerics::{companion_roots, integrate_interval, ln_binomial};
    use approx::assert_relative_eq;

    fn cp1(r: u32) -> SurfaceModel {
        SurfaceModel::cp1_semipositive(r).unwrap()
    }

    #[test]
    fn fixed_seed_reproduces_every_trial() {
        let m = cp1(4);
        let a = RandomEnsemble::new(&m, 16, BasisRange::Full, 9, 4).unwrap();
        let b = RandomEnsemble::new(&m, 16, BasisRange::Full, 9, 4).unwrap();
        for trial in 0..4 {
            let ca = a.coefficients(trial).unwrap();
            let cb = b.coefficients(trial).unwrap();
            for (x, y) in ca.iter().zip(&cb) {
                assert_eq!(x.re.to_bits(), y.re.to_bits());
                assert_eq!(x.im.to_bits(), y.im.to_bits());
            }
            let za = a.zero_set(trial).unwrap();
            let zb = b.zero_set(trial).unwrap();
            for (x, y) in za.roots().iter().zip(zb.roots()) {
                assert_eq!(x.re.to_bits(), y.re.to_bits());
                assert_eq!(x.im.to_bits(), y.im.to_bits());
            }
        }
        // Different streams and different seeds both decorrelate.
        assert_ne!(a.coefficients(0).unwrap()[0], a.coefficients(1).unwrap()[0]);
        let c = RandomEnsemble::new(&m, 16, BasisRange::Full, 10, 4).unwrap();
        assert_ne!(a.coefficients(0).unwrap()[0], c.coefficients(0).unwrap()[0]);
    }

    #[test]
    fn quadratic_weights_are_square_root_binomials() {
        // At r = 2 the coefficient weights reduce to sqrt(C(k, alpha)) up to
        // one global factor, which the shift removes.
        let e = RandomEnsemble::new(&cp1(2), 16, BasisRange::Full, 1, 1).unwrap();
        for alpha in 0..=16u32 {
            let expect = 0.5 * ln_binomial(16, u64::from(alpha));
            let got = e.ln_scales[alpha as usize] - e.ln_scales[0];
            assert_relative_eq!(got, expect, epsilon = 1e-10);
        }
    }

    #[test]
    fn degree_follows_the_basis_range() {
        let m = cp1(4);
        let full = RandomEnsemble::new(&m, 8, BasisRange::Full, 2, 1).unwrap();
        let capped = RandomEnsemble::new(&m, 8, BasisRange::Capped, 2, 1).unwrap();
        assert_eq!(full.degree(), 16);
        assert_eq!(capped.degree(), 8);
        assert_eq!(full.zero_set(0).unwrap().roots().len(), 16);
        assert_eq!(capped.zero_set(0).unwrap().roots().len(), 8);
        // r = 2 has nothing to cap.
        let flat = RandomEnsemble::new(&cp1(2), 8, BasisRange::Capped, 2, 1).unwrap();
        assert_eq!(flat.degree(), 8);
    }

    #[test]
    fn roots_are_invariant_under_a_global_phase() {
        let e = RandomEnsemble::new(&cp1(4), 16, BasisRange::Full, 5, 1).unwrap();
        let coeffs = e.coefficients(0).unwrap();
        let phase = Complex64::from_polar(1.0, 1.234);
        let rotated: Vec<Complex64> = coeffs.iter().map(|c| c * phase).collect();
        let mut a = poly_roots(&coeffs).unwrap().roots;
        let mut b = poly_roots(&rotated).unwrap().roots;
        let key = |z: &Complex64| (z.re, z.im);
        a.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
        b.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-8 * (1.0 + x.norm()));
        }
    }

    #[test]
    fn small_degree_routes_agree() {
        // The iterated solver against the companion-matrix eigenvalues on a
        // genuine weighted trial; the two routes share no code.
        let e = RandomEnsemble::new(&cp1(2), 48, BasisRange::Full, 13, 1).unwrap();
        let coeffs = e.coefficients(0).unwrap();
        let real_coeffs: Vec<Complex64> =
            coeffs.iter().map(|c| Complex64::new(c.re, 0.0)).collect();
        let iterated = poly_roots(&real_coeffs).unwrap().roots;
        let mut reference = companion_roots(&real_coeffs).unwrap();
        for z in &iterated {
            let (best, _) = reference
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| (z - *a).norm().total_cmp(&(z - *b).norm()))
                .unwrap();
            assert!((z - reference[best]).norm() < 1e-6 * (1.0 + z.norm()));
            reference.swap_remove(best);
        }
    }

    #[test]
    fn sampled_intensity_recovers_the_kernel_diagonal() {
        // Monte Carlo second moment against the reproducing kernel diagonal:
        // |p(t)|^2 in the section weight is Exp-distributed with mean Pi, so
        // ten thousand trials pin the mean to about one percent.
        let m = cp1(4);
        let e = RandomEnsemble::new(&m, 32, BasisRange::Full, 5, 10_000).unwrap();
        let t = 0.7;
        let samples: Vec<f64> =
            (0..10_000).map(|i| e.weighted_intensity(i, t).unwrap()).collect();
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        let sigma = (var / n).sqrt();
        let reference = bergman_diag(&m, 32, Measure::Curvature, t).unwrap();
        assert!(
            (mean - reference).abs() < 3.0 * sigma,
            "intensity {mean:.4} vs kernel {reference:.4}, sigma {sigma:.4}"
        );
    }

    #[test]
    fn radial_and_angular_laws_hold_at_scale() {
        let e = RandomEnsemble::new(&cp1(2), 512, BasisRange::Full, 7, 50).unwrap();
        let s = zero_statistics(&e).unwrap();
        assert_eq!(s.failed_trials, 0);
        assert!(s.mean_radial_ks < 0.02, "radial {:.4}", s.mean_radial_ks);
        assert!(s.mean_angular_ks < 0.02, "angular {:.4}", s.mean_angular_ks);
        // The closed distribution puts half the mass below modulus one.
        assert!((s.median_modulus - 1.0).abs() < 0.02, "median {:.4}", s.median_modulus);
    }

    #[test]
    fn quartic_radial_law_holds_at_scale() {
        let e = RandomEnsemble::new(&cp1(4), 512, BasisRange::Full, 7, 10).unwrap();
        let s = zero_statistics(&e).unwrap();
        assert_eq!(s.degree, 1024);
        assert!(s.mean_radial_ks < 0.02, "radial {:.4}", s.mean_radial_ks);
        assert!(s.mean_angular_ks < 0.02, "angular {:.4}", s.mean_angular_ks);
    }

    #[test]
    fn distribution_distance_contracts_with_the_degree() {
        // Doubling the degree must cut the mean radial distance to at most
        // 0.8 of its value; measured ratios sit near 0.6 for both families.
        for r in [2u32, 4] {
            let m = cp1(r);
            let (k_lo, k_hi) = if r == 2 { (256, 512) } else { (128, 256) };
            let lo = zero_statistics(
                &RandomEnsemble::new(&m, k_lo, BasisRange::Full, 11, 30).unwrap(),
            )
            .unwrap();
            let hi = zero_statistics(
                &RandomEnsemble::new(&m, k_hi, BasisRange::Full, 11, 30).unwrap(),
            )
            .unwrap();
            assert!(
                hi.mean_radial_ks <= 0.8 * lo.mean_radial_ks,
                "r={r}: {:.4} -> {:.4}",
                lo.mean_radial_ks,
                hi.mean_radial_ks
            );
        }
    }

    #[test]
    fn capped_range_bias_persists() {
        // Capping the exponents at k keeps only the curvature mass inside the
        // unit circle, so the radial distance saturates near one half and
        // does not improve with k; the angular law is untouched.
        let m = cp1(4);
        let lo =
            zero_statistics(&RandomEnsemble::new(&m, 64, BasisRange::Capped, 3, 10).unwrap())
                .unwrap();
        let hi =
            zero_statistics(&RandomEnsemble::new(&m, 256, BasisRange::Capped, 3, 10).unwrap())
                .unwrap();
        assert!(lo.mean_radial_ks > 0.3, "capped k=64 {:.4}", lo.mean_radial_ks);
        assert!(hi.mean_radial_ks > 0.3, "capped k=256 {:.4}", hi.mean_radial_ks);
        assert!((hi.mean_radial_ks - lo.mean_radial_ks).abs() < 0.1);
        assert!(lo.mean_angular_ks < 0.05);
        assert!(hi.mean_angular_ks < 0.05);
        let full =
            zero_statistics(&RandomEnsemble::new(&m, 64, BasisRange::Full, 3, 10).unwrap())
                .unwrap();
        assert!(full.mean_radial_ks < 0.05, "full k=64 {:.4}", full.mean_radial_ks);
    }

    #[test]
    fn zero_density_matches_the_curvature_mass() {
        let e = RandomEnsemble::new(&cp1(2), 64, BasisRange::Full, 21, 200).unwrap();
        let d = expected_zero_density_check(&e, 0.5, 2.0).unwrap();
        assert!(
            (d.mean_count - d.expected_count).abs() < 3.0 * d.std_error,
            "mean {:.3} vs {:.3}, sigma {:.3}",
            d.mean_count,
            d.expected_count,
            d.std_error
        );
        // At r = 2 the finite-power expectation is already the limit.
        assert_relative_eq!(d.expected_exact, d.expected_count, epsilon = 1e-9);
        // The whole plane counts every root of every trial.
        let whole = expected_zero_density_check(&e, 0.0, f64::INFINITY).unwrap();
        assert!(whole.relative_gap < 1e-12);
        assert_eq!(whole.std_error, 0.0);
        // Closed annulus mass against direct quadrature of the density.
        let mass = integrate_interval(
            |t| 2.0 * t / ((1.0 + t * t) * (1.0 + t * t)),
            0.5,
            2.0,
            1e-12,
        )
        .unwrap()
        .value;
        assert_relative_eq!(
            radial_mass_fraction(2, 2.0) - radial_mass_fraction(2, 0.5),
            mass,
            epsilon = 1e-10
        );
    }

    #[test]
    fn suppressed_pole_density_approaches_its_limit() {
        // A disk of radius 0.3 at the quartic pole: the exact expectation
        // (mean active exponent) matches Monte Carlo at every power, while
        // the gap to the limiting curvature mass only closes once the
        // crossover scale k^{-1/4} has shrunk past the disk (measured
        // relative gaps 0.49 at k=32, 0.12 at k=128).
        let m = cp1(4);
        let near = RandomEnsemble::new(&m, 32, BasisRange::Full, 22, 200).unwrap();
        let d32 = expected_zero_density_check(&near, 0.0, 0.3).unwrap();
        assert!((d32.mean_count - d32.expected_exact).abs() < 3.0 * d32.std_error);
        assert!(d32.relative_gap > 0.3, "crossover excess {:.3}", d32.relative_gap);
        let far = RandomEnsemble::new(&m, 128, BasisRange::Full, 22, 200).unwrap();
        let d128 = expected_zero_density_check(&far, 0.0, 0.3).unwrap();
        assert!((d128.mean_count - d128.expected_exact).abs() < 3.0 * d128.std_error);
        assert!(d128.relative_gap < 0.5 * d32.relative_gap);
    }

    #[test]
    fn quadratic_mean_exponent_is_closed_form() {
        let e = RandomEnsemble::new(&cp1(2), 64, BasisRange::Full, 1, 1).unwrap();
        for t in [0.2, 0.8, 1.0, 3.5] {
            assert_relative_eq!(
                e.mean_active_exponent(t),
                64.0 * t * t / (1.0 + t * t),
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn inputs_are_guarded() {
        let m = cp1(4);
        let circle = SurfaceModel::circle_degenerate(4, 1.0).unwrap();
        assert!(RandomEnsemble::new(&circle, 8, BasisRange::Full, 1, 1).is_err());
        assert!(RandomEnsemble::new(&m, 8, BasisRange::Full, 1, 0).is_err());
        // Coefficient span leaves f64 near degree two thousand.
        assert!(RandomEnsemble::new(&cp1(2), 2048, BasisRange::Full, 1, 1).is_err());
        let e = RandomEnsemble::new(&m, 8, BasisRange::Full, 1, 4).unwrap();
        assert!(e.coefficients(4).is_err());
        assert!(e.weighted_intensity(0, -1.0).is_err());
        assert!(zero_statistics(&e).is_err(), "needs ten trials");
        assert!(expected_zero_density_check(&e, 0.0, 1.0).is_err(), "needs a hundred trials");
        let big = RandomEnsemble::new(&m, 8, BasisRange::Full, 1, 200).unwrap();
        assert!(expected_zero_density_check(&big, -0.5, 1.0).is_err());
        assert!(expected_zero_density_check(&big, 1.0, 1.0).is_err());
    }
}
