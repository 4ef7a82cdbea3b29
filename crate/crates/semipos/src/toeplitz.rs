//! Compressions of multiplication operators to the holomorphic section
//! spaces of the compact family.
//!
//! A symbol is a bounded function `f(t, theta) = rho(t) A(theta)` with a
//! named radial profile and finite cosine content `A = sum a_n cos(n theta)`.
//! Compressing multiplication by `f` to the span of the monomial sections
//! gives a real symmetric matrix whose bandwidth equals the cosine order
//! exactly: mode `n` couples `z^alpha` to `z^{alpha+n}` and nothing else.
//! Entries are single radial quadratures in the log domain, normalized by
//! the same quadrature engine that produces the basis norms, so the identity
//! symbol reproduces the identity matrix to rounding rather than to the
//! cross-engine tolerance.
//!
//! The laws checked downstream: the operator norm is dominated by and
//! converges to the sup norm of the symbol, the compression of a product
//! deviates from the product of compressions at the inverse-power rate set
//! by the degeneracy order, eigenvalue statistics converge to the symbol's
//! distribution under the normalized curvature measure, the diagonal kernel
//! ratio recovers the symbol pointwise, and the normalized trace recovers
//! the curvature integral of the symbol.

use crate::bergman::ln_norm_by_quadrature;
use crate::bergman::Measure;
use crate::numerics::{
    fit_line, hermitian_eigen, integrate_radial_ln, NumericsError, QuadratureSpec,
};
use crate::surface::{SurfaceError, SurfaceKind, SurfaceModel};
use nalgebra::{Complex, DMatrix};
use rayon::prelude::*;

/// Errors for symbol validation, assembly, and the spectral comparisons.
#[derive(Debug, thiserror::Error)]
pub enum ToeplitzError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("unsupported geometry: {0}")]
    Unsupported(&'static str),
    #[error("unsupported symbol: {0}")]
    UnsupportedSymbol(&'static str),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Bergman(#[from] crate::bergman::BergmanError),
}

/// Largest cosine order accepted for user symbols; internal products may
/// carry up to twice this.
const MAX_ANGULAR_ORDER: usize = 4;

/// Relative tolerance of the entry quadratures.
const ENTRY_QUAD_TOL: f64 = 1e-10;

/// Named nonnegative radial profiles. Nonnegativity keeps every entry
/// integrand single-signed so the log-domain quadrature applies unchanged.
#[derive(Debug, Clone)]
pub enum RadialProfile {
    /// Constant one.
    One,
    /// The projective height t^2/(1+t^2): zero at the near pole, one at the
    /// far pole, strictly increasing.
    Height,
    /// Gaussian bump exp(-((t-center)/width)^2).
    Bump { center: f64, width: f64 },
    /// Logistic ramp 1/(1+exp(-sharpness (t - threshold))).
    StepSmooth { threshold: f64, sharpness: f64 },
    /// Pointwise product; produced by symbol multiplication.
    Product(Box<RadialProfile>, Box<RadialProfile>),
}

impl RadialProfile {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            RadialProfile::One => 1.0,
            RadialProfile::Height => {
                let s = t * t;
                s / (1.0 + s)
            }
            RadialProfile::Bump { center, width } => {
                let x = (t - center) / width;
                (-x * x).exp()
            }
            RadialProfile::StepSmooth { threshold, sharpness } => {
                1.0 / (1.0 + (-sharpness * (t - threshold)).exp())
            }
            RadialProfile::Product(a, b) => a.eval(t) * b.eval(t),
        }
    }

    /// Value at the far pole, needed because a finite scan cannot reach it.
    fn limit_at_infinity(&self) -> f64 {
        match self {
            RadialProfile::One => 1.0,
            RadialProfile::Height => 1.0,
            RadialProfile::Bump { .. } => 0.0,
            RadialProfile::StepSmooth { .. } => 1.0,
            RadialProfile::Product(a, b) => a.limit_at_infinity() * b.limit_at_infinity(),
        }
    }

    fn validate(&self) -> Result<(), ToeplitzError> {
        match self {
            RadialProfile::One | RadialProfile::Height => Ok(()),
            RadialProfile::Bump { center, width } => {
                if !(center.is_finite() && *center >= 0.0 && *width > 0.0 && width.is_finite()) {
                    return Err(ToeplitzError::InvalidParameter(
                        "bump needs center >= 0 and width > 0",
                    ));
                }
                Ok(())
            }
            RadialProfile::StepSmooth { threshold, sharpness } => {
                if !(threshold.is_finite() && *sharpness > 0.0 && sharpness.is_finite()) {
                    return Err(ToeplitzError::InvalidParameter(
                        "smooth step needs finite threshold and sharpness > 0",
                    ));
                }
                Ok(())
            }
            RadialProfile::Product(a, b) => {
                a.validate()?;
                b.validate()
            }
        }
    }

    /// sup over [0, infinity], by dense scan plus the endpoint limits. The
    /// library profiles are smooth with a single scale, so a fine geometric
    /// scan pins the supremum to quadrature-level accuracy.
    fn sup(&self) -> f64 {
        let mut sup = self.eval(0.0).abs().max(self.limit_at_infinity().abs());
        let n = 8192;
        for i in 0..n {
            // tan spacing covers [0, inf) densely near both scales.
            let t = (std::f64::consts::FRAC_PI_2 * (i as f64 + 0.5) / n as f64).tan();
            sup = sup.max(self.eval(t).abs());
        }
        sup
    }
}

/// A bounded real symbol: radial profile times a finite cosine series.
#[derive(Debug, Clone)]
pub struct SymbolFunction {
    radial: RadialProfile,
    /// cosine[n] multiplies cos(n theta); cosine[0] is the constant part.
    cosine: Vec<f64>,
}

impl SymbolFunction {
    /// Purely radial symbol.
    pub fn radial(profile: RadialProfile) -> Result<Self, ToeplitzError> {
        profile.validate()?;
        Ok(Self { radial: profile, cosine: vec![1.0] })
    }

    /// Radial profile modulated by a cosine series of order at most four.
    pub fn with_cosine(profile: RadialProfile, cosine: Vec<f64>) -> Result<Self, ToeplitzError> {
        profile.validate()?;
        if cosine.is_empty() || cosine.len() > MAX_ANGULAR_ORDER + 1 {
            return Err(ToeplitzError::InvalidParameter(
                "cosine content must have order between 0 and 4",
            ));
        }
        if !cosine.iter().all(|c| c.is_finite()) {
            return Err(ToeplitzError::InvalidParameter("cosine coefficients must be finite"));
        }
        Ok(Self { radial: profile, cosine })
    }

    /// The constant symbol c.
    pub fn constant(c: f64) -> Result<Self, ToeplitzError> {
        Self::with_cosine(RadialProfile::One, vec![c])
    }

    pub fn one() -> Self {
        Self { radial: RadialProfile::One, cosine: vec![1.0] }
    }

    /// The projective height as a radial symbol.
    pub fn height() -> Self {
        Self { radial: RadialProfile::Height, cosine: vec![1.0] }
    }

    pub fn eval(&self, t: f64, theta: f64) -> f64 {
        let angular: f64 = self
            .cosine
            .iter()
            .enumerate()
            .map(|(n, a)| a * (n as f64 * theta).cos())
            .sum();
        self.radial.eval(t) * angular
    }

    /// Highest cosine order with a nonzero coefficient; equals the exact
    /// matrix bandwidth.
    pub fn angular_order(&self) -> usize {
        self.cosine
            .iter()
            .rposition(|c| *c != 0.0)
            .unwrap_or(0)
    }

    pub fn is_radial(&self) -> bool {
        self.angular_order() == 0
    }

    /// Exact sup norm: the factors are independent, so the sup of the
    /// product is the product of sups.
    pub fn sup_norm(&self) -> f64 {
        let n = 8192;
        let mut angular_sup = 0.0f64;
        for i in 0..=n {
            let theta = std::f64::consts::PI * i as f64 / n as f64;
            let a: f64 = self
                .cosine
                .iter()
                .enumerate()
                .map(|(m, c)| c * (m as f64 * theta).cos())
                .sum();
            angular_sup = angular_sup.max(a.abs());
        }
        self.radial.sup() * angular_sup
    }

    /// Pointwise product, with the cosine contents convolved through the
    /// product-to-sum identity.
    pub fn product(&self, other: &SymbolFunction) -> SymbolFunction {
        let order = self.cosine.len() + other.cosine.len() - 1;
        let mut cosine = vec![0.0; order];
        for (m, a) in self.cosine.iter().enumerate() {
            for (n, b) in other.cosine.iter().enumerate() {
                let half = 0.5 * a * b;
                cosine[m + n] += half;
                cosine[m.abs_diff(n)] += half;
            }
        }
        SymbolFunction {
            radial: RadialProfile::Product(
                Box::new(self.radial.clone()),
                Box::new(other.radial.clone()),
            ),
            cosine,
        }
    }
}

/// The compressed multiplication operator: real symmetric, banded with
/// bandwidth equal to the symbol's cosine order.
#[derive(Debug, Clone)]
pub struct ToeplitzMatrix {
    k: u32,
    measure: Measure,
    /// bands[n][i] is the entry (i, i+n); bands[0] is the diagonal.
    bands: Vec<Vec<f64>>,
}

impl ToeplitzMatrix {
    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn measure(&self) -> Measure {
        self.measure
    }

    pub fn dim(&self) -> usize {
        self.bands[0].len()
    }

    pub fn bandwidth(&self) -> usize {
        self.bands.len() - 1
    }

    /// Entry (i, j); zero outside the band by construction.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        let n = hi - lo;
        if n >= self.bands.len() {
            0.0
        } else {
            self.bands[n][lo]
        }
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.bands[0]
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| self.entry(i, j))
    }

    pub fn trace(&self) -> f64 {
        self.bands[0].iter().sum()
    }

    /// Largest-magnitude eigenvalue. Diagonal matrices read it off; banded
    /// ones go through the dense Hermitian eigensolver for reproducibility.
    pub fn operator_norm(&self) -> Result<f64, ToeplitzError> {
        if self.bandwidth() == 0 {
            return Ok(self
                .bands[0]
                .iter()
                .fold(0.0f64, |acc, v| acc.max(v.abs())));
        }
        let dense = self.to_dense().map(|v| Complex::new(v, 0.0));
        let eigen = hermitian_eigen(&dense)?;
        Ok(eigen.iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Result<Vec<f64>, ToeplitzError> {
        if self.bandwidth() == 0 {
            let mut vals = self.bands[0].clone();
            vals.sort_by(f64::total_cmp);
            return Ok(vals);
        }
        let dense = self.to_dense().map(|v| Complex::new(v, 0.0));
        let mut vals = hermitian_eigen(&dense)?;
        vals.sort_by(f64::total_cmp);
        Ok(vals)
    }
}

/// ln of the radial cross moment between `z^a` and `z^b` against the profile
/// and the tagged measure.
fn ln_cross_moment(
    r: u32,
    k: u32,
    a: u32,
    b: u32,
    profile: &RadialProfile,
    measure: Measure,
) -> Result<f64, NumericsError> {
    let spec = QuadratureSpec::new(64, ENTRY_QUAD_TOL, 2.0)?;
    let power = f64::from(a) + f64::from(b);
    let kf = f64::from(k);
    let quad = integrate_radial_ln(
        |t| {
            power * t.ln() - kf * t.powi(r as i32).ln_1p()
                + profile.eval(t).ln()
                + measure.ln_density(r, t)
        },
        &spec,
    )?;
    Ok(quad.value)
}

/// Compresses multiplication by the symbol to the section space of level k.
/// Basis norms come from the same quadrature engine as the entries, so the
/// identity symbol assembles to the identity matrix exactly.
pub fn assemble_toeplitz(
    model: &SurfaceModel,
    k: u32,
    f: &SymbolFunction,
    measure: Measure,
) -> Result<ToeplitzMatrix, ToeplitzError> {
    if model.kind() != SurfaceKind::Cp1SemiPositive {
        return Err(ToeplitzError::Unsupported(
            "compressions exist only on the compact family",
        ));
    }
    if k == 0 {
        return Err(ToeplitzError::InvalidParameter("tensor power must be positive"));
    }
    let r = model.r();
    let degree = r * k / 2;
    let dim = degree as usize + 1;
    let band = f.angular_order();
    if band >= dim {
        return Err(ToeplitzError::InvalidParameter(
            "cosine order must stay below the space dimension",
        ));
    }
    let ln_norms: Vec<f64> = (0..=degree)
        .into_par_iter()
        .map(|alpha| ln_norm_by_quadrature(r, k, alpha, measure))
        .collect::<Result<Vec<_>, _>>()?;
    let mut bands = Vec::with_capacity(band + 1);
    for n in 0..=band {
        let coupling = if n == 0 { f.cosine[0] } else { 0.5 * f.cosine[n] };
        let row: Vec<f64> = (0..dim - n)
            .into_par_iter()
            .map(|i| -> Result<f64, ToeplitzError> {
                if coupling == 0.0 {
                    return Ok(0.0);
                }
                let a = i as u32;
                let b = (i + n) as u32;
                let ln_m = ln_cross_moment(r, k, a, b, &f.radial, measure)?;
                let ln_entry = ln_m - 0.5 * (ln_norms[i] + ln_norms[i + n]);
                Ok(coupling * ln_entry.exp())
            })
            .collect::<Result<Vec<_>, _>>()?;
        bands.push(row);
    }
    Ok(ToeplitzMatrix { k, measure, bands })
}

/// Operator norm of the curvature-measure compression.
pub fn toeplitz_norm(
    model: &SurfaceModel,
    k: u32,
    f: &SymbolFunction,
) -> Result<f64, ToeplitzError> {
    assemble_toeplitz(model, k, f, Measure::Curvature)?.operator_norm()
}

/// Operator norm of `T_f T_g - T_{fg}` for the curvature-measure
/// compressions; the product symbol is formed exactly.
pub fn composition_defect(
    model: &SurfaceModel,
    k: u32,
    f: &SymbolFunction,
    g: &SymbolFunction,
) -> Result<f64, ToeplitzError> {
    let tf = assemble_toeplitz(model, k, f, Measure::Curvature)?;
    let tg = assemble_toeplitz(model, k, g, Measure::Curvature)?;
    let tfg = assemble_toeplitz(model, k, &f.product(g), Measure::Curvature)?;
    if tf.bandwidth() == 0 && tg.bandwidth() == 0 {
        // Diagonal case: the defect is diagonal too.
        let defect = tf
            .diagonal()
            .iter()
            .zip(tg.diagonal())
            .zip(tfg.diagonal())
            .fold(0.0f64, |acc, ((df, dg), dfg)| acc.max((df * dg - dfg).abs()));
        return Ok(defect);
    }
    let dense = (tf.to_dense() * tg.to_dense() - tfg.to_dense()).map(|v| Complex::new(v, 0.0));
    let eigen = hermitian_eigen(&dense)?;
    Ok(eigen.iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
}

/// Eigenvalue statistics of a radial compression against the pushforward of
/// the normalized curvature measure under the symbol.
#[derive(Debug, Clone)]
pub struct SzegoComparison {
    /// Ascending eigenvalues of the compression.
    pub eigenvalues: Vec<f64>,
    /// Kolmogorov-Smirnov distance to the pushforward distribution.
    pub ks: f64,
}

/// Compares the spectrum of the radial compression with the distribution of
/// the symbol under the normalized curvature measure.  The pushforward CDF is
/// sampled through the measure's quantile map `t(u) = (u/(1-u))^{1/r}`, which
/// handles non-monotone profiles without inversion.
pub fn szego_measure(
    model: &SurfaceModel,
    k: u32,
    f: &SymbolFunction,
) -> Result<SzegoComparison, ToeplitzError> {
    if !f.is_radial() {
        return Err(ToeplitzError::UnsupportedSymbol(
            "spectral-statistics comparison needs a radial symbol; compare moments instead",
        ));
    }
    let matrix = assemble_toeplitz(model, k, f, Measure::Curvature)?;
    let eigenvalues = matrix.eigenvalues()?;
    let r = model.r();
    let scale = f.cosine[0];
    let m = 200_000usize;
    let mut push: Vec<f64> = (0..m)
        .map(|j| {
            let u = (j as f64 + 0.5) / m as f64;
            let t = (u / (1.0 - u)).powf(1.0 / f64::from(r));
            scale * f.radial.eval(t)
        })
        .collect();
    push.sort_by(f64::total_cmp);
    let ks = two_sample_ks(&eigenvalues, &push);
    Ok(SzegoComparison { eigenvalues, ks })
}

/// Two-sample Kolmogorov statistic on sorted inputs.  Values within a
/// relative rounding slack are treated as tied and consumed together, so a
/// spectrum that is an exact point mass compares at distance zero against a
/// pushforward concentrated on the same atom.
fn two_sample_ks(a: &[f64], b: &[f64]) -> f64 {
    let na = a.len() as f64;
    let nb = b.len() as f64;
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => break,
        };
        let slack = 1e-10 * (1.0 + x.abs());
        while i < a.len() && a[i] <= x + slack {
            i += 1;
        }
        while j < b.len() && b[j] <= x + slack {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Diagonal kernel ratio of the compression to the reproducing kernel at a
/// chart radius: the weighted average of the diagonal entries under the
/// kernel's own term weights.  Radial symbols only; the ratio recovers the
/// symbol pointwise as k grows.
pub fn toeplitz_diag_ratio(
    model: &SurfaceModel,
    k: u32,
    f: &SymbolFunction,
    t: f64,
) -> Result<f64, ToeplitzError> {
    if !f.is_radial() {
        return Err(ToeplitzError::UnsupportedSymbol(
            "diagonal ratio needs a radial symbol",
        ));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(ToeplitzError::InvalidParameter(
            "chart radius must be finite and nonnegative",
        ));
    }
    let matrix = assemble_toeplitz(model, k, f, Measure::Curvature)?;
    if t == 0.0 {
        return Ok(matrix.diagonal()[0]);
    }
    let r = model.r();
    let ln_norms: Vec<f64> = (0..matrix.dim())
        .into_par_iter()
        .map(|alpha| ln_norm_by_quadrature(r, k, alpha as u32, Measure::Curvature))
        .collect::<Result<Vec<_>, _>>()?;
    let ln_t = t.ln();
    let ln_weight = -f64::from(k) * t.powi(r as i32).ln_1p();
    let ln_terms: Vec<f64> = ln_norms
        .iter()
        .enumerate()
        .map(|(alpha, ln_n)| 2.0 * alpha as f64 * ln_t + ln_weight - ln_n)
        .collect();
    let top = ln_terms.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mut num = 0.0;
    let mut den = 0.0;
    for (w, d) in ln_terms.iter().zip(matrix.diagonal()) {
        let e = (w - top).exp();
        num += d * e;
        den += e;
    }
    Ok(num / den)
}

/// OLS slope of ln(defect) against ln(k); helper for the decay-law tests and
/// the command-line report.
pub fn defect_decay_slope(
    model: &SurfaceModel,
    f: &SymbolFunction,
    g: &SymbolFunction,
    ks: &[u32],
) -> Result<f64, ToeplitzError> {
    if ks.len() < 3 {
        return Err(ToeplitzError::InvalidParameter(
            "decay fit needs at least three levels",
        ));
    }
    let xs: Vec<f64> = ks.iter().map(|&k| f64::from(k).ln()).collect();
    let ys: Vec<f64> = ks
        .iter()
        .map(|&k| composition_defect(model, k, f, g).map(|d| d.ln()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(fit_line(&xs, &ys).slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sphere(r: u32) -> SurfaceModel {
        SurfaceModel::cp1_semipositive(r).unwrap()
    }

    #[test]
    fn identity_symbol_compresses_to_the_identity() {
        let matrix =
            assemble_toeplitz(&sphere(4), 16, &SymbolFunction::one(), Measure::Curvature).unwrap();
        assert_eq!(matrix.bandwidth(), 0);
        for (i, d) in matrix.diagonal().iter().enumerate() {
            assert!((d - 1.0).abs() < 1e-12, "diagonal entry {i} is {d}");
        }
    }

    #[test]
    fn flat_height_diagonal_closed_form() {
        // r=2 with the height symbol: Beta-ratio diagonal (alpha+1)/(k+2).
        let k = 64u32;
        let matrix =
            assemble_toeplitz(&sphere(2), k, &SymbolFunction::height(), Measure::Curvature)
                .unwrap();
        for (alpha, d) in matrix.diagonal().iter().enumerate() {
            let expected = (alpha as f64 + 1.0) / (f64::from(k) + 2.0);
            assert!(
                (d - expected).abs() < 1e-10,
                "alpha={alpha}: {d} vs {expected}"
            );
        }
    }

    #[test]
    fn cosine_symbol_is_banded_and_symmetric() {
        let f = SymbolFunction::with_cosine(
            RadialProfile::Bump { center: 1.0, width: 0.5 },
            vec![0.0, 1.0],
        )
        .unwrap();
        let matrix = assemble_toeplitz(&sphere(4), 12, &f, Measure::Curvature).unwrap();
        assert_eq!(matrix.bandwidth(), 1);
        let dense = matrix.to_dense();
        for i in 0..matrix.dim() {
            for j in 0..matrix.dim() {
                assert!(
                    (dense[(i, j)] - dense[(j, i)]).abs() < 1e-12,
                    "symmetry breaks at ({i},{j})"
                );
                if i.abs_diff(j) > 1 {
                    assert_eq!(dense[(i, j)], 0.0, "band leak at ({i},{j})");
                }
                if i.abs_diff(j) == 1 {
                    assert!(dense[(i, j)].abs() > 0.0, "empty coupling at ({i},{j})");
                }
            }
        }
        // The diagonal carries no cosine mass for a pure cos(theta) symbol.
        for d in matrix.diagonal() {
            assert_eq!(*d, 0.0);
        }
    }

    #[test]
    fn flat_norm_follows_the_closed_form() {
        let k = 48u32;
        let norm = toeplitz_norm(&sphere(2), k, &SymbolFunction::height()).unwrap();
        assert_relative_eq!(
            norm,
            (f64::from(k) + 1.0) / (f64::from(k) + 2.0),
            max_relative = 1e-10
        );
        // At k = 1024 the closed-form gap 1/(k+2) sits well inside 0.01.
        let gap = 1.0 - toeplitz_norm(&sphere(2), 1024, &SymbolFunction::height()).unwrap();
        assert!(gap > 0.0 && gap < 0.01, "flat norm gap {gap}");
    }

    #[test]
    fn constant_symbol_norm_is_exact() {
        let f = SymbolFunction::constant(-0.7).unwrap();
        let norm = toeplitz_norm(&sphere(4), 20, &f).unwrap();
        assert_relative_eq!(norm, 0.7, max_relative = 1e-12);
    }

    #[test]
    fn quartic_height_norm_approaches_the_sup() {
        // The extremal state concentrates at chart scale k^{-1/4} around the
        // far pole where 1 - f ~ t^{-2}, so the gap closes like k^{-1/2}:
        // measured 0.027 at k = 1024. Pin monotonicity and that rate.
        let model = sphere(4);
        let f = SymbolFunction::height();
        let gaps: Vec<f64> = [256u32, 1024]
            .iter()
            .map(|&k| 1.0 - toeplitz_norm(&model, k, &f).unwrap())
            .collect();
        assert!(gaps[0] > 0.0 && gaps[1] > 0.0, "norm exceeded the sup: {gaps:?}");
        assert!(gaps[1] < 0.6 * gaps[0], "gap contraction off the rate: {gaps:?}");
        assert!(gaps[1] < 0.03, "limit gap {} at k=1024", gaps[1]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn operator_norm_never_exceeds_the_sup_norm(
            k in 4u32..=40,
            center in 0.2f64..2.0,
            width in 0.2f64..1.5,
            a0 in -1.0f64..1.0,
            a1 in -1.0f64..1.0,
        ) {
            let f = SymbolFunction::with_cosine(
                RadialProfile::Bump { center, width },
                vec![a0, a1],
            ).unwrap();
            let norm = toeplitz_norm(&sphere(2), k, &f).unwrap();
            prop_assert!(norm <= f.sup_norm() + 1e-10);
        }
    }

    #[test]
    fn composition_defect_vanishes_for_constants() {
        let defect = composition_defect(
            &sphere(4),
            16,
            &SymbolFunction::one(),
            &SymbolFunction::one(),
        )
        .unwrap();
        assert!(defect < 1e-12, "defect {defect}");
    }

    #[test]
    fn flat_composition_defect_follows_the_inverse_power() {
        // Exact diagonal forms make the defect
        // (alpha+1)(k+1-alpha)/((k+2)^2 (k+3)), maximal near alpha = k/2.
        let k = 256u32;
        let defect =
            composition_defect(&sphere(2), k, &SymbolFunction::height(), &SymbolFunction::height())
                .unwrap();
        let kf = f64::from(k);
        let expected = (0..=k)
            .map(|alpha| {
                let af = f64::from(alpha);
                (af + 1.0) * (kf + 1.0 - af) / ((kf + 2.0) * (kf + 2.0) * (kf + 3.0))
            })
            .fold(0.0f64, f64::max);
        assert_relative_eq!(defect, expected, max_relative = 1e-8);
        let scaled = defect * kf;
        assert!((0.2..0.3).contains(&scaled), "k-scaled defect {scaled}");
    }

    #[test]
    fn quartic_composition_defect_decays_at_the_degeneracy_rate() {
        let slope = defect_decay_slope(
            &sphere(4),
            &SymbolFunction::height(),
            &SymbolFunction::height(),
            &[64, 128, 256, 512, 1024],
        )
        .unwrap();
        assert!(slope <= -0.20, "defect decay slope {slope}");
    }

    #[test]
    fn flat_spectrum_is_asymptotically_uniform() {
        // The height pushes the normalized curvature measure of the r=2 case
        // to the uniform law on [0,1].
        let result = szego_measure(&sphere(2), 256, &SymbolFunction::height()).unwrap();
        assert!(result.ks < 0.01, "KS distance {}", result.ks);
    }

    #[test]
    fn constant_spectrum_is_a_point_mass() {
        let result = szego_measure(&sphere(4), 32, &SymbolFunction::constant(0.4).unwrap()).unwrap();
        assert!(result.ks < 1e-9, "KS distance {}", result.ks);
    }

    #[test]
    fn quartic_spectrum_matches_the_pushforward() {
        let result = szego_measure(&sphere(4), 512, &SymbolFunction::height()).unwrap();
        assert!(result.ks < 0.02, "KS distance {}", result.ks);
    }

    #[test]
    fn angular_symbols_are_rejected_by_the_spectral_comparison() {
        let f = SymbolFunction::with_cosine(RadialProfile::One, vec![0.0, 1.0]).unwrap();
        assert!(matches!(
            szego_measure(&sphere(2), 16, &f),
            Err(ToeplitzError::UnsupportedSymbol(_))
        ));
    }

    #[test]
    fn diagonal_ratio_is_one_for_the_identity() {
        for t in [0.0f64, 0.6, 1.3] {
            let ratio = toeplitz_diag_ratio(&sphere(4), 24, &SymbolFunction::one(), t).unwrap();
            assert_relative_eq!(ratio, 1.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn diagonal_ratio_recovers_the_symbol() {
        let model = sphere(4);
        let f = SymbolFunction::height();
        let k = 2048u32;
        let at_pole = toeplitz_diag_ratio(&model, k, &f, 0.0).unwrap();
        assert!(at_pole.abs() < 0.02, "pole ratio {at_pole}");
        let at_equator = toeplitz_diag_ratio(&model, k, &f, 1.0).unwrap();
        assert!(
            (at_equator - 0.5).abs() < 0.01,
            "equator ratio {at_equator} vs height 1/2"
        );
    }

    #[test]
    fn normalized_trace_recovers_the_curvature_integral() {
        // Closed r=2 check: trace (k+1)/2 over k against the integral 1/2.
        let spec = QuadratureSpec::new(64, 1e-10, 2.0).unwrap();
        for (r, tol) in [(2u32, 0.002), (4, 0.02)] {
            let model = sphere(r);
            let k = 1024u32;
            let matrix =
                assemble_toeplitz(&model, k, &SymbolFunction::height(), Measure::Curvature)
                    .unwrap();
            let height = RadialProfile::Height;
            let integral = integrate_radial_ln(
                |t| height.eval(t).ln() + Measure::Curvature.ln_density(r, t),
                &spec,
            )
            .unwrap()
            .value
            .exp();
            let normalized = matrix.trace() / f64::from(k);
            assert!(
                (normalized - integral).abs() / integral < tol,
                "r={r}: normalized trace {normalized} vs integral {integral}"
            );
        }
    }

    #[test]
    fn inputs_are_guarded() {
        let model = sphere(4);
        assert!(matches!(
            assemble_toeplitz(&model, 0, &SymbolFunction::one(), Measure::Curvature),
            Err(ToeplitzError::InvalidParameter(_))
        ));
        let line = SurfaceModel::circle_degenerate(3, 0.5).unwrap();
        assert!(matches!(
            assemble_toeplitz(&line, 8, &SymbolFunction::one(), Measure::Curvature),
            Err(ToeplitzError::Unsupported(_))
        ));
        assert!(matches!(
            SymbolFunction::with_cosine(RadialProfile::One, vec![1.0; 6]),
            Err(ToeplitzError::InvalidParameter(_))
        ));
        assert!(matches!(
            SymbolFunction::radial(RadialProfile::Bump { center: 1.0, width: 0.0 }),
            Err(ToeplitzError::InvalidParameter(_))
        ));
    }

    #[test]
    fn product_symbols_convolve_their_cosine_content() {
        let f = SymbolFunction::with_cosine(RadialProfile::One, vec![0.0, 1.0]).unwrap();
        let g = SymbolFunction::with_cosine(RadialProfile::One, vec![0.0, 1.0]).unwrap();
        let fg = f.product(&g);
        // cos^2 theta = 1/2 + cos(2 theta)/2.
        assert_eq!(fg.angular_order(), 2);
        assert!((fg.eval(1.0, 0.3) - (0.3f64).cos().powi(2)).abs() < 1e-12);
    }
}
