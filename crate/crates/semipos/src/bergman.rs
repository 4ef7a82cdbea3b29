//! Reproducing kernels of the weighted polynomial spaces carried by the
//! compact family.
//!
//! For tensor power `k` the holomorphic sections are the monomials `z^alpha`
//! with `alpha = 0..rk/2`; the pointwise weighted magnitude of `z^alpha` is
//! `t^{2alpha} (1+t^r)^{-k}` in the chart radius `t`.  Squared norms are taken
//! against one of two rotation-invariant measures:
//!
//! * the curvature measure, radial density `(r^2/2) t^{r-1} (1+t^r)^{-2}`,
//!   total mass `r/2`, for which the norms close to a Beta function;
//! * the round measure, radial density `2t (1+t^2)^{-2}`, total mass one,
//!   for which the norms come from adaptive log-domain quadrature.
//!
//! The kernel diagonal is the normalized sum
//! `Pi_k(t) = sum_alpha t^{2alpha} (1+t^r)^{-k} / ||s_alpha||^2`, accumulated
//! in the log domain so that powers up to `k = 2^14` never overflow.  Its
//! trace against the tagged measure recovers the space dimension `rk/2 + 1`,
//! which the tests use as an end-to-end check of the whole pipeline.
//!
//! Radial jets of `Pi_k` and `ln Pi_k` are computed analytically: every basis
//! term is expanded as a degree-4 Taylor series in `s = t^2` and the series
//! are summed with a running exponent shift, so no finite differencing enters.
//! On top of the jets sit the diagnostics: least-squares exponent fits of the
//! growth `Pi_k ~ k^p` at a fixed point, the sup-norm gaps between the
//! weight's potential and its projective pullback, and a two-sided audit
//! `c k^{2/r} <= Pi_k <= C k` with constants taken from the tangent-plane
//! model below the degeneracy point and from the curvature-to-area ratio.

use crate::model::{ModelError, ModelOperator};
use crate::numerics::{
    fit_line, integrate_radial_ln, ln_beta, log_gamma, NumericsError, QuadratureSpec,
};
use crate::surface::{SurfaceError, SurfaceKind, SurfaceModel};
use rayon::prelude::*;

/// Errors for basis construction, kernel evaluation, and the fit helpers.
#[derive(Debug, thiserror::Error)]
pub enum BergmanError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("unsupported geometry: {0}")]
    Unsupported(&'static str),
    #[error("sample set rejected: {0}")]
    Sample(&'static str),
    #[error("magnitude left the double range: {0}")]
    Range(&'static str),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Which rotation-invariant measure normalizes the section basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    /// The curvature form of the weight; degenerate at the poles, mass r/2.
    Curvature,
    /// The round unit-area form; strictly positive everywhere.
    Round,
}

impl Measure {
    /// Stable lowercase tag used in reports and CSV columns.
    pub fn label(self) -> &'static str {
        match self {
            Measure::Curvature => "curvature",
            Measure::Round => "round",
        }
    }

    /// ln of the radial density against dt (angular part already averaged).
    pub(crate) fn ln_density(self, r: u32, t: f64) -> f64 {
        let rf = f64::from(r);
        match self {
            Measure::Curvature => {
                (rf * rf / 2.0).ln() + (rf - 1.0) * t.ln() - 2.0 * t.powi(r as i32).ln_1p()
            }
            Measure::Round => (2.0 * t).ln() - 2.0 * (t * t).ln_1p(),
        }
    }
}

/// Relative tolerance for the adaptive norm quadratures.  The closed-form
/// cross-check in the tests passes at 1e-9, so the working tolerance sits one
/// order below it.
const NORM_QUAD_TOL: f64 = 1e-10;

/// An orthogonal monomial basis with its squared norms, stored as logarithms
/// because midrange norms decay like `2^{-k}` and underflow long before the
/// kernel sums lose accuracy.
#[derive(Debug, Clone)]
pub struct SectionBasis {
    k: u32,
    r: u32,
    measure: Measure,
    ln_norms: Vec<f64>,
}

impl SectionBasis {
    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn measure(&self) -> Measure {
        self.measure
    }

    /// Top monomial exponent, `rk/2`.
    pub fn degree(&self) -> u32 {
        self.r * self.k / 2
    }

    /// Space dimension `rk/2 + 1`.
    pub fn dimension(&self) -> usize {
        self.degree() as usize + 1
    }

    /// ln of the squared norm of `z^alpha`.
    pub fn ln_norm(&self, alpha: u32) -> f64 {
        self.ln_norms[alpha as usize]
    }

    /// Squared norm of `z^alpha`; may underflow to zero for midrange alpha at
    /// large k, in which case `ln_norm` is the faithful accessor.
    pub fn norm(&self, alpha: u32) -> f64 {
        self.ln_norms[alpha as usize].exp()
    }

    /// ln Pi_k(t).  Log-domain sum over the basis with a running maximum
    /// shift; exact single-term branch at t = 0.
    pub fn ln_kernel_diag(&self, t: f64) -> Result<f64, BergmanError> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(BergmanError::InvalidParameter(
                "chart radius must be finite and nonnegative",
            ));
        }
        if t == 0.0 {
            return Ok(-self.ln_norms[0]);
        }
        let ln_t = t.ln();
        let ln_weight = -f64::from(self.k) * t.powi(self.r as i32).ln_1p();
        let mut top = f64::NEG_INFINITY;
        let mut terms = Vec::with_capacity(self.ln_norms.len());
        for (alpha, ln_n) in self.ln_norms.iter().enumerate() {
            let l = 2.0 * alpha as f64 * ln_t + ln_weight - ln_n;
            if l > top {
                top = l;
            }
            terms.push(l);
        }
        let value = top + terms.iter().map(|l| (l - top).exp()).sum::<f64>().ln();
        if !value.is_finite() {
            return Err(BergmanError::Range("kernel diagonal log-sum"));
        }
        Ok(value)
    }

    /// Pi_k(t) as a plain double.
    pub fn kernel_diag(&self, t: f64) -> Result<f64, BergmanError> {
        let ln_value = self.ln_kernel_diag(t)?;
        if ln_value > 700.0 {
            return Err(BergmanError::Range("kernel diagonal exceeds exp(700)"));
        }
        Ok(ln_value.exp())
    }

    /// Radial jet of the kernel diagonal at `t > 0`, to order `l <= 4` in the
    /// even variable `s = t^2`.  Every basis term contributes its analytic
    /// Taylor series; nothing is differenced.
    pub fn kernel_jet(&self, t: f64, l: usize) -> Result<BergmanJet, BergmanError> {
        if l > 4 {
            return Err(BergmanError::InvalidParameter("jet order capped at 4"));
        }
        if !(t > 0.0 && t.is_finite()) {
            return Err(BergmanError::InvalidParameter(
                "jets require a positive finite chart radius",
            ));
        }
        let s0 = t * t;
        let q = (self.r / 2) as usize;
        let kf = f64::from(self.k);
        // ln s and ln(1 + s^q) as Taylor series about s0.
        let ln_s = [
            s0.ln(),
            1.0 / s0,
            -1.0 / (2.0 * s0 * s0),
            1.0 / (3.0 * s0 * s0 * s0),
            -1.0 / (4.0 * s0 * s0 * s0 * s0),
        ];
        let mut poly = [0.0f64; 5];
        poly[0] = 1.0 + s0.powi(q as i32);
        for (j, slot) in poly.iter_mut().enumerate().skip(1).take(q.min(4)) {
            *slot = binomial(q, j) * s0.powi((q - j) as i32);
        }
        let ln_poly = series_log(&poly);

        // Shift by the largest constant term so the per-term exponentials are
        // all representable, then sum coefficientwise.
        let shift = (0..=self.degree())
            .map(|alpha| f64::from(alpha) * ln_s[0] - kf * ln_poly[0] - self.ln_norm(alpha))
            .fold(f64::NEG_INFINITY, f64::max);
        let mut total = [0.0f64; 5];
        for alpha in 0..=self.degree() {
            let af = f64::from(alpha);
            let mut g = [0.0f64; 5];
            for j in 0..5 {
                g[j] = af * ln_s[j] - kf * ln_poly[j];
            }
            g[0] -= self.ln_norm(alpha) + shift;
            let e = series_exp(&g);
            for j in 0..5 {
                total[j] += e[j];
            }
        }
        if !(total[0] > 0.0 && total.iter().all(|c| c.is_finite())) {
            return Err(BergmanError::Range("jet series lost its leading term"));
        }
        let ln_series = series_log(&total);
        let mut factorial = 1.0;
        let mut pi = Vec::with_capacity(l + 1);
        let mut log_pi = Vec::with_capacity(l + 1);
        for j in 0..=l {
            if j > 0 {
                factorial *= j as f64;
            }
            pi.push(total[j] * factorial * (shift + 0.0).exp());
            log_pi.push(if j == 0 {
                shift + ln_series[0]
            } else {
                ln_series[j] * factorial
            });
        }
        Ok(BergmanJet { point: t, pi, log: log_pi })
    }
}

/// Derivatives of the kernel diagonal in the even radial variable `s = t^2`.
#[derive(Debug, Clone)]
pub struct BergmanJet {
    /// Chart radius of the evaluation point.
    pub point: f64,
    /// `d^j Pi / ds^j` for `j = 0..=l`.
    pub pi: Vec<f64>,
    /// `d^j ln Pi / ds^j`; entry 0 is `ln Pi` itself.
    pub log: Vec<f64>,
}

/// Builds the orthogonal basis with its squared norms for the requested
/// measure.  Closed Beta form for the curvature measure, quadrature for the
/// round one; basis size is always `rk/2 + 1`.
pub fn section_norms(
    model: &SurfaceModel,
    k: u32,
    measure: Measure,
) -> Result<SectionBasis, BergmanError> {
    if model.kind() != SurfaceKind::Cp1SemiPositive {
        return Err(BergmanError::Unsupported(
            "section bases exist only on the compact family",
        ));
    }
    if k == 0 {
        return Err(BergmanError::InvalidParameter("tensor power must be positive"));
    }
    let r = model.r();
    let degree = r * k / 2;
    let ln_norms: Vec<f64> = match measure {
        Measure::Curvature => (0..=degree)
            .map(|alpha| closed_form_ln_norm(r, k, alpha))
            .collect(),
        Measure::Round => (0..=degree)
            .into_par_iter()
            .map(|alpha| ln_norm_by_quadrature(r, k, alpha, Measure::Round))
            .collect::<Result<Vec<_>, _>>()?,
    };
    if !ln_norms.iter().all(|l| l.is_finite()) {
        return Err(BergmanError::Range("norm logarithm not finite"));
    }
    Ok(SectionBasis { k, r, measure, ln_norms })
}

/// ln ||z^alpha||^2 against the curvature measure:
/// `(r/2) B(2alpha/r + 1, k + 1 - 2alpha/r)`.
fn closed_form_ln_norm(r: u32, k: u32, alpha: u32) -> f64 {
    let rf = f64::from(r);
    let a = 2.0 * f64::from(alpha) / rf + 1.0;
    let b = f64::from(k) + 1.0 - 2.0 * f64::from(alpha) / rf;
    (rf / 2.0).ln() + ln_beta(a, b)
}

/// ln ||z^alpha||^2 by adaptive log-domain quadrature against either measure.
pub(crate) fn ln_norm_by_quadrature(
    r: u32,
    k: u32,
    alpha: u32,
    measure: Measure,
) -> Result<f64, NumericsError> {
    let spec = QuadratureSpec::new(64, NORM_QUAD_TOL, 2.0)?;
    let af = f64::from(alpha);
    let kf = f64::from(k);
    let quad = integrate_radial_ln(
        |t| 2.0 * af * t.ln() - kf * t.powi(r as i32).ln_1p() + measure.ln_density(r, t),
        &spec,
    )?;
    Ok(quad.value)
}

/// Pi_k(t) for the tagged measure.  Convenience wrapper that builds the basis
/// on each call; scans should hold a [`SectionBasis`] instead.
pub fn bergman_diag(
    model: &SurfaceModel,
    k: u32,
    measure: Measure,
    t: f64,
) -> Result<f64, BergmanError> {
    section_norms(model, k, measure)?.kernel_diag(t)
}

/// Jet counterpart of [`bergman_diag`]; same construction cost caveat.
pub fn bergman_jet(
    model: &SurfaceModel,
    k: u32,
    measure: Measure,
    t: f64,
    l: usize,
) -> Result<BergmanJet, BergmanError> {
    section_norms(model, k, measure)?.kernel_jet(t, l)
}

/// Least-squares growth fit of positive samples against k, in log-log form.
#[derive(Debug, Clone)]
pub struct ExponentFit {
    /// OLS slope of ln(value) against ln(k).
    pub slope: f64,
    /// OLS intercept.
    pub intercept: f64,
    /// Largest absolute log-residual of the fit; reported, never hidden.
    pub max_residual: f64,
    /// Slope snapped to the nearest sixth, the lattice every radial growth
    /// exponent of this crate lives on.
    pub snapped_exponent: f64,
    /// Largest-k sample rescaled by the snapped power: the extrapolated
    /// leading constant.
    pub leading_constant: f64,
}

/// Fits `value ~ C k^p` over geometrically spaced samples `(k, value)`.
/// Requires at least five samples so the residual column means something.
pub fn fit_scaling(samples: &[(f64, f64)]) -> Result<ExponentFit, BergmanError> {
    if samples.len() < 5 {
        return Err(BergmanError::Sample("need at least five samples for a growth fit"));
    }
    for &(k, v) in samples {
        if !(k > 0.0 && v > 0.0 && k.is_finite() && v.is_finite()) {
            return Err(BergmanError::Sample("samples must be positive and finite"));
        }
    }
    let ratios: Vec<f64> = samples.windows(2).map(|w| w[1].0 / w[0].0).collect();
    let (lo, hi) = ratios
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &q| (lo.min(q), hi.max(q)));
    if !(lo > 1.0) || hi > 1.3 * lo {
        return Err(BergmanError::Sample(
            "samples must increase in k with near-geometric spacing",
        ));
    }
    let xs: Vec<f64> = samples.iter().map(|&(k, _)| k.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|&(_, v)| v.ln()).collect();
    let fit = fit_line(&xs, &ys);
    let snapped = (fit.slope * 6.0).round() / 6.0;
    let &(k_last, v_last) = samples.last().unwrap();
    Ok(ExponentFit {
        slope: fit.slope,
        intercept: fit.intercept,
        max_residual: fit.max_residual,
        snapped_exponent: snapped,
        leading_constant: v_last * k_last.powf(-snapped),
    })
}

/// Sup-norm distances between the weight's potential data and its projective
/// pullback at level k, all divided by k.
#[derive(Debug, Clone, Copy)]
pub struct TianGap {
    /// sup |ln Pi_k| / k over the grid.
    pub potential: f64,
    /// sup of the geodesic-arclength derivative of ln Pi_k, over k.
    pub gradient: f64,
    /// sup of the metric Laplacian of ln Pi_k, over k.
    pub laplacian: f64,
}

/// Evaluates the three projective-embedding gaps on a chart-radius grid with
/// the round-measure basis.  The grid should sample the closed surface up to
/// its chart symmetry; points at t = 0 contribute only to the potential gap
/// by the evenness of the kernel.
pub fn tian_gap(model: &SurfaceModel, k: u32, grid: &[f64]) -> Result<TianGap, BergmanError> {
    if grid.is_empty() {
        return Err(BergmanError::InvalidParameter("tian grid must be nonempty"));
    }
    let basis = section_norms(model, k, Measure::Round)?;
    let kf = f64::from(k);
    let pi = std::f64::consts::PI;
    let records: Vec<(f64, f64, f64)> = grid
        .par_iter()
        .map(|&t| -> Result<(f64, f64, f64), BergmanError> {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(BergmanError::InvalidParameter(
                    "tian grid points must be finite and nonnegative",
                ));
            }
            if t == 0.0 {
                let ln_value = basis.ln_kernel_diag(0.0)?;
                return Ok((ln_value.abs(), 0.0, 0.0));
            }
            let jet = basis.kernel_jet(t, 2)?;
            let s = t * t;
            let f_s = jet.log[1];
            let f_ss = jet.log[2];
            // Chain rules from s = t^2: geodesic derivative sqrt(pi)(1+t^2) d/dt,
            // metric Laplacian (pi/area density) (f'' + f'/t) = 4 pi (1+t^2)^2 (f_s + s f_ss).
            let gradient = pi.sqrt() * (1.0 + s) * 2.0 * t * f_s;
            let laplacian = 4.0 * pi * (1.0 + s) * (1.0 + s) * (f_s + s * f_ss);
            Ok((jet.log[0].abs(), gradient.abs(), laplacian.abs()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let fold = records.iter().fold((0.0f64, 0.0f64, 0.0f64), |acc, &(p, g, l)| {
        (acc.0.max(p), acc.1.max(g), acc.2.max(l))
    });
    Ok(TianGap { potential: fold.0 / kf, gradient: fold.1 / kf, laplacian: fold.2 / kf })
}

/// Result of the two-sided kernel bound audit.
#[derive(Debug, Clone, Copy)]
pub struct UniformBounds {
    /// True when both margins are at least one everywhere on the grid.
    pub passed: bool,
    /// min over the grid of Pi / (c k^{2/r}); below one means a violation.
    pub lower_margin: f64,
    /// min over the grid of (C k) / Pi.
    pub upper_margin: f64,
    /// Grid point realizing the lower margin.
    pub lower_worst: f64,
    /// Grid point realizing the upper margin.
    pub upper_worst: f64,
    /// The frozen lower constant c.
    pub lower_constant: f64,
    /// The frozen upper constant C.
    pub upper_constant: f64,
}

/// Audits `c k^{2/r} <= Pi_k <= C k` on the grid with the default headroom:
/// c is 0.9 times the tangent-plane model density at the degeneracy point and
/// C is 1.1 times the supremum of the curvature-to-area ratio.
pub fn uniform_bounds_check(
    model: &SurfaceModel,
    k: u32,
    grid: &[f64],
) -> Result<UniformBounds, BergmanError> {
    uniform_bounds_check_with(model, k, grid, 0.9, 1.1)
}

/// Same audit with caller-chosen factors multiplying the two frozen
/// constants; factors above one sharpen the corresponding bound (used by the
/// sharpness probes).
pub fn uniform_bounds_check_with(
    model: &SurfaceModel,
    k: u32,
    grid: &[f64],
    lower_factor: f64,
    upper_factor: f64,
) -> Result<UniformBounds, BergmanError> {
    if grid.is_empty() {
        return Err(BergmanError::InvalidParameter("bounds grid must be nonempty"));
    }
    if !(lower_factor > 0.0 && upper_factor > 0.0) {
        return Err(BergmanError::InvalidParameter("bound factors must be positive"));
    }
    let r = model.r();
    let b0 = model.jet_coefficient(0.0)?;
    let lower_constant = lower_factor * ModelOperator::new(r, b0)?.kernel_diag()?;
    let upper_constant = upper_factor * sup_twist_ratio(model);
    let basis = section_norms(model, k, Measure::Round)?;
    let kf = f64::from(k);
    let lower_scale = lower_constant * kf.powf(2.0 / f64::from(r));
    let upper_scale = upper_constant * kf;
    let mut lower_margin = f64::INFINITY;
    let mut upper_margin = f64::INFINITY;
    let mut lower_worst = grid[0];
    let mut upper_worst = grid[0];
    for &t in grid {
        let value = basis.kernel_diag(t)?;
        let low = value / lower_scale;
        let up = upper_scale / value;
        if low < lower_margin {
            lower_margin = low;
            lower_worst = t;
        }
        if up < upper_margin {
            upper_margin = up;
            upper_worst = t;
        }
    }
    Ok(UniformBounds {
        passed: lower_margin >= 1.0 && upper_margin >= 1.0,
        lower_margin,
        upper_margin,
        lower_worst,
        upper_worst,
        lower_constant,
        upper_constant,
    })
}

/// sup over the surface of tau / 2 pi, sampled on a geodesic-uniform grid up
/// to the chart symmetry.
fn sup_twist_ratio(model: &SurfaceModel) -> f64 {
    let half = 0.5 * model.geodesic_diameter();
    let n = 4096;
    let mut sup: f64 = 0.0;
    for i in 1..=n {
        let s = half * i as f64 / n as f64;
        let t = model.chart_from_geodesic(s);
        sup = sup.max(model.tau(t) / std::f64::consts::TAU);
    }
    sup
}

/// C(n, j) for the small integer range the jet expansion needs.
fn binomial(n: usize, j: usize) -> f64 {
    (log_gamma(n as f64 + 1.0) - log_gamma(j as f64 + 1.0) - log_gamma((n - j) as f64 + 1.0))
        .exp()
        .round()
}

/// Coefficientwise log of a degree-4 Taylor series with positive lead.
fn series_log(a: &[f64; 5]) -> [f64; 5] {
    debug_assert!(a[0] > 0.0);
    let mut l = [0.0f64; 5];
    l[0] = a[0].ln();
    for n in 1..5 {
        let mut acc = n as f64 * a[n];
        for j in 1..n {
            acc -= (n - j) as f64 * a[j] * l[n - j];
        }
        l[n] = acc / (n as f64 * a[0]);
    }
    l
}

/// Coefficientwise exp of a degree-4 Taylor series.
fn series_exp(g: &[f64; 5]) -> [f64; 5] {
    let mut e = [0.0f64; 5];
    e[0] = g[0].exp();
    for n in 1..5 {
        let mut acc = 0.0;
        for j in 1..=n {
            acc += j as f64 * g[j] * e[n - j];
        }
        e[n] = acc / n as f64;
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sphere(r: u32) -> SurfaceModel {
        SurfaceModel::cp1_semipositive(r).unwrap()
    }

    /// Quadrature oracle for the curvature-measure norms; used to adjudicate
    /// the closed Beta form before it is trusted anywhere else.
    fn curvature_norm_oracle(r: u32, k: u32, alpha: u32) -> f64 {
        ln_norm_by_quadrature(r, k, alpha, Measure::Curvature).unwrap()
    }

    #[test]
    fn closed_norms_match_quadrature_everywhere() {
        for r in [2u32, 4, 6] {
            for k in [3u32, 16, 64] {
                if r * k % 2 != 0 {
                    continue;
                }
                let degree = r * k / 2;
                let probes = [0, 1, degree / 2, degree.saturating_sub(1), degree];
                for &alpha in &probes {
                    let closed = closed_form_ln_norm(r, k, alpha);
                    let quad = curvature_norm_oracle(r, k, alpha);
                    assert!(
                        (closed - quad).abs() < 1e-9,
                        "r={r} k={k} alpha={alpha}: {closed} vs {quad}"
                    );
                }
            }
        }
    }

    #[test]
    fn specific_norm_values() {
        // r=2, k=3: norms are 1/((k+1) C(k, alpha)); alpha=1 gives 1/12.
        let basis = section_norms(&sphere(2), 3, Measure::Curvature).unwrap();
        assert_relative_eq!(basis.norm(1), 1.0 / 12.0, max_relative = 1e-12);
        // r=4, k=10: the pure-weight norm is (r/2) Beta(1, k+1) = 2/11.
        let basis = section_norms(&sphere(4), 10, Measure::Curvature).unwrap();
        assert_relative_eq!(basis.norm(0), 2.0 / 11.0, max_relative = 1e-12);
    }

    #[test]
    fn basis_size_follows_the_degree() {
        for (r, k) in [(2u32, 5u32), (4, 7), (6, 16)] {
            let basis = section_norms(&sphere(r), k, Measure::Curvature).unwrap();
            assert_eq!(basis.dimension() as u32, r * k / 2 + 1);
        }
    }

    #[test]
    fn maximally_symmetric_kernel_is_flat() {
        // r=2 with the curvature measure is the round homogeneous case: the
        // kernel diagonal is the constant k+1 and every radial derivative
        // cancels to rounding.
        let basis = section_norms(&sphere(2), 48, Measure::Curvature).unwrap();
        let expected = 49.0;
        for t in [0.0, 0.3, 1.0, 2.5] {
            assert_relative_eq!(basis.kernel_diag(t).unwrap(), expected, max_relative = 1e-10);
        }
        let jet = basis.kernel_jet(0.8, 4).unwrap();
        for j in 1..=4 {
            assert!(
                jet.pi[j].abs() < 1e-6 * expected,
                "order {j} derivative {} should cancel",
                jet.pi[j]
            );
            assert!(jet.log[j].abs() < 1e-6, "order {j} log-derivative {}", jet.log[j]);
        }
    }

    #[test]
    fn kernel_is_symmetric_under_the_chart_swap() {
        let model = sphere(4);
        for measure in [Measure::Curvature, Measure::Round] {
            let basis = section_norms(&model, 12, measure).unwrap();
            let degree = basis.degree();
            for alpha in 0..=degree / 2 {
                assert!(
                    (basis.ln_norm(alpha) - basis.ln_norm(degree - alpha)).abs() < 1e-10,
                    "{measure:?} norms fail the palindrome at alpha={alpha}"
                );
            }
            for t in [0.3f64, 0.7, 1.6] {
                let here = basis.ln_kernel_diag(t).unwrap();
                let there = basis.ln_kernel_diag(1.0 / t).unwrap();
                assert!(
                    (here - there).abs() < 1e-10,
                    "{measure:?} kernel breaks chart symmetry at t={t}"
                );
            }
        }
    }

    #[test]
    fn pole_value_from_the_pure_weight_norm() {
        // Only the constant section survives at the degeneracy point, so the
        // kernel value is the reciprocal norm (k+1)/2 at r=4.
        let basis = section_norms(&sphere(4), 10, Measure::Curvature).unwrap();
        assert_relative_eq!(basis.kernel_diag(0.0).unwrap(), 11.0 / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn pole_density_converges_to_the_tangent_plane_model() {
        let model = sphere(4);
        let k = 4096u32;
        let value = bergman_diag(&model, k, Measure::Round, 0.0).unwrap();
        let oracle = ModelOperator::new(4, model.jet_coefficient(0.0).unwrap())
            .unwrap()
            .kernel_diag()
            .unwrap();
        let rescaled = value / f64::from(k).sqrt();
        assert!(
            (rescaled - oracle).abs() / oracle < 0.02,
            "rescaled pole density {rescaled} vs model {oracle}"
        );
    }

    #[test]
    fn kernel_trace_recovers_the_dimension() {
        let model = sphere(4);
        for measure in [Measure::Curvature, Measure::Round] {
            let basis = section_norms(&model, 32, measure).unwrap();
            let spec = QuadratureSpec::new(64, 1e-9, 2.0).unwrap();
            let trace = integrate_radial_ln(
                |t| basis.ln_kernel_diag(t).unwrap() + measure.ln_density(4, t),
                &spec,
            )
            .unwrap()
            .value
            .exp();
            assert_relative_eq!(trace, basis.dimension() as f64, max_relative = 1e-8);
        }
    }

    #[test]
    fn measure_change_is_reproducible() {
        // Both kernels recomputed with independent norm routes (closed form
        // vs quadrature for the curvature measure, two quadrature tolerances
        // for the round one) keep the pointwise ratio stable to 1e-8.
        let model = sphere(4);
        let k = 16u32;
        let curvature = section_norms(&model, k, Measure::Curvature).unwrap();
        let round = section_norms(&model, k, Measure::Round).unwrap();
        let degree = 2 * k;
        let requadratured: Vec<f64> = (0..=degree)
            .map(|alpha| curvature_norm_oracle(4, k, alpha))
            .collect();
        let alt = SectionBasis {
            k,
            r: 4,
            measure: Measure::Curvature,
            ln_norms: requadratured,
        };
        for t in [0.2f64, 0.6, 1.0, 1.4, 2.2] {
            let ratio = curvature.ln_kernel_diag(t).unwrap() - round.ln_kernel_diag(t).unwrap();
            let ratio_alt = alt.ln_kernel_diag(t).unwrap() - round.ln_kernel_diag(t).unwrap();
            assert!(
                (ratio - ratio_alt).abs() < 1e-8,
                "measure-change ratio unstable at t={t}: {ratio} vs {ratio_alt}"
            );
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn kernel_diagonal_is_positive(
            r_half in 1u32..=3,
            k in 1u32..=20,
            t in 0.0f64..3.0,
        ) {
            let basis = section_norms(&sphere(2 * r_half), k, Measure::Curvature).unwrap();
            let value = basis.kernel_diag(t).unwrap();
            prop_assert!(value.is_finite() && value > 0.0);
        }
    }

    #[test]
    fn jets_match_finite_differences() {
        let basis = section_norms(&sphere(4), 24, Measure::Curvature).unwrap();
        let t = 0.7f64;
        let jet = basis.kernel_jet(t, 2).unwrap();
        let f = |s: f64| basis.kernel_diag(s.sqrt()).unwrap();
        let s0 = t * t;
        let h = 1e-4;
        let d1 = (f(s0 + h) - f(s0 - h)) / (2.0 * h);
        let d2 = (f(s0 + h) - 2.0 * f(s0) + f(s0 - h)) / (h * h);
        assert_relative_eq!(jet.pi[1], d1, max_relative = 1e-6);
        assert_relative_eq!(jet.pi[2], d2, max_relative = 1e-4);
        assert_relative_eq!(jet.log[1], d1 / f(s0), max_relative = 1e-6);
    }

    #[test]
    fn jet_symmetry_at_the_equator() {
        // The chart swap fixes t = 1 and forces f'(1) = 0 and
        // f'''(1) = -3 f''(1) for any even-variable invariant f.
        let basis = section_norms(&sphere(4), 64, Measure::Round).unwrap();
        let jet = basis.kernel_jet(1.0, 3).unwrap();
        let scale = jet.log[2].abs().max(1.0);
        assert!(jet.log[1].abs() < 1e-8 * scale, "first log-derivative {}", jet.log[1]);
        assert!(
            (jet.log[3] + 3.0 * jet.log[2]).abs() < 1e-8 * scale.max(jet.log[3].abs()),
            "pullback relation violated: f''' = {} vs -3 f'' = {}",
            jet.log[3],
            -3.0 * jet.log[2]
        );
    }

    #[test]
    fn scaling_fit_is_exact_on_a_power_law() {
        let samples: Vec<(f64, f64)> =
            (0..6).map(|i| (2f64.powi(i + 4), 3.0 * 2f64.powi(i + 4).powf(0.5))).collect();
        let fit = fit_scaling(&samples).unwrap();
        assert_relative_eq!(fit.slope, 0.5, max_relative = 1e-12);
        assert_relative_eq!(fit.snapped_exponent, 0.5, max_relative = 1e-12);
        assert_relative_eq!(fit.leading_constant, 3.0, max_relative = 1e-12);
        assert!(fit.max_residual < 1e-12);
    }

    #[test]
    fn flat_kernel_growth_is_linear() {
        let model = sphere(2);
        let samples: Vec<(f64, f64)> = (10..=14)
            .map(|e| {
                let k = 1u32 << e;
                let basis = section_norms(&model, k, Measure::Curvature).unwrap();
                (f64::from(k), basis.kernel_diag(0.7).unwrap())
            })
            .collect();
        let fit = fit_scaling(&samples).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-3, "slope {}", fit.slope);
    }

    #[test]
    fn pole_growth_exponent_is_half_at_quartic_degeneracy() {
        // Small k drags the fitted slope low through the k^{-1/2} correction
        // term, so the window starts at 256.
        let model = sphere(4);
        let samples: Vec<(f64, f64)> = (8..=12)
            .map(|e| {
                let k = 1u32 << e;
                (f64::from(k), bergman_diag(&model, k, Measure::Round, 0.0).unwrap())
            })
            .collect();
        let fit = fit_scaling(&samples).unwrap();
        assert!((fit.slope - 0.5).abs() < 0.02, "pole exponent {}", fit.slope);
    }

    #[test]
    fn equator_growth_exponent_is_one_at_quartic_degeneracy() {
        let model = sphere(4);
        let samples: Vec<(f64, f64)> = (6..=10)
            .map(|e| {
                let k = 1u32 << e;
                let basis = section_norms(&model, k, Measure::Round).unwrap();
                (f64::from(k), basis.kernel_diag(1.0).unwrap())
            })
            .collect();
        let fit = fit_scaling(&samples).unwrap();
        assert!((fit.slope - 1.0).abs() < 0.02, "equator exponent {}", fit.slope);
    }

    #[test]
    fn rescaled_pole_residuals_step_by_even_powers() {
        // After removing the leading constant the rescaled pole sequence
        // contracts by the full inverse power per quadrupling of k (factor 2
        // in k^{-1/2}); an odd half-step would contract by sqrt(2) only.
        let model = sphere(4);
        let u: Vec<f64> = [256u32, 1024, 4096]
            .iter()
            .map(|&k| {
                bergman_diag(&model, k, Measure::Round, 0.0).unwrap() / f64::from(k).sqrt()
            })
            .collect();
        let ratio = (u[0] - u[1]) / (u[1] - u[2]);
        assert!(
            (1.6..=2.5).contains(&ratio),
            "residual contraction {ratio} is off the even-power step"
        );
    }

    #[test]
    fn projective_gaps_shrink_at_their_rates() {
        let model = sphere(4);
        let grid: Vec<f64> = (0..=64)
            .map(|i| model.chart_from_geodesic(0.5 * model.geodesic_diameter() * i as f64 / 64.0))
            .collect();
        let ks = [64u32, 128, 256, 512, 1024];
        let gaps: Vec<TianGap> =
            ks.iter().map(|&k| tian_gap(&model, k, &grid).unwrap()).collect();
        // Potential gap carries a ln k factor on top of 1/k.
        let xs: Vec<f64> = ks.iter().map(|&k| f64::from(k).ln()).collect();
        let ys: Vec<f64> =
            gaps.iter().zip(&xs).map(|(g, &x)| g.potential.ln() - x.ln()).collect();
        let potential_slope = fit_line(&xs, &ys).slope;
        assert!(
            (potential_slope + 1.0).abs() < 0.05,
            "log-corrected potential slope {potential_slope}"
        );
        let lap: Vec<f64> = gaps.iter().map(|g| g.laplacian.ln()).collect();
        let lap_slope = fit_line(&xs, &lap).slope;
        assert!(lap_slope <= -1.0 / 3.0 + 0.05, "laplacian gap slope {lap_slope}");
    }

    #[test]
    fn gradient_gap_decays_faster_than_the_bound() {
        let model = sphere(4);
        let grid: Vec<f64> = (1..=48)
            .map(|i| model.chart_from_geodesic(0.5 * model.geodesic_diameter() * i as f64 / 48.0))
            .collect();
        let ks = [64u32, 128, 256, 512, 1024];
        let xs: Vec<f64> = ks.iter().map(|&k| f64::from(k).ln()).collect();
        let ys: Vec<f64> = ks
            .iter()
            .map(|&k| tian_gap(&model, k, &grid).unwrap().gradient.ln())
            .collect();
        let slope = fit_line(&xs, &ys).slope;
        assert!(slope <= -0.6, "gradient gap slope {slope}");
    }

    #[test]
    fn uniform_bounds_hold_with_margin() {
        let model = sphere(4);
        let grid: Vec<f64> = (0..=96)
            .map(|i| model.chart_from_geodesic(0.5 * model.geodesic_diameter() * i as f64 / 96.0))
            .collect();
        let audit = uniform_bounds_check(&model, 1024, &grid).unwrap();
        assert!(
            audit.passed,
            "audit failed: lower {} at t={}, upper {} at t={}",
            audit.lower_margin, audit.lower_worst, audit.upper_margin, audit.upper_worst
        );
    }

    #[test]
    fn doubled_lower_constant_fails_at_the_pole() {
        let model = sphere(4);
        let grid: Vec<f64> = (0..=96)
            .map(|i| model.chart_from_geodesic(0.5 * model.geodesic_diameter() * i as f64 / 96.0))
            .collect();
        let audit = uniform_bounds_check_with(&model, 1024, &grid, 1.8, 1.1).unwrap();
        assert!(!audit.passed, "doubled lower constant should violate");
        assert!(audit.lower_margin < 1.0);
        let pole_scale = model.chart_from_geodesic(0.1 * model.geodesic_diameter());
        assert!(
            audit.lower_worst <= pole_scale,
            "violation at t={} should sit near the degeneracy point",
            audit.lower_worst
        );
    }

    #[test]
    fn round_homogeneous_bounds_are_trivial() {
        let model = sphere(2);
        let grid = [0.0f64, 0.2, 0.5, 1.0, 2.0];
        let audit = uniform_bounds_check(&model, 64, &grid).unwrap();
        assert!(audit.passed);
    }

    #[test]
    fn inputs_are_guarded() {
        let model = sphere(4);
        assert!(matches!(
            section_norms(&model, 0, Measure::Curvature),
            Err(BergmanError::InvalidParameter(_))
        ));
        let line = SurfaceModel::circle_degenerate(3, 0.5).unwrap();
        assert!(matches!(
            section_norms(&line, 8, Measure::Curvature),
            Err(BergmanError::Unsupported(_))
        ));
        let basis = section_norms(&model, 8, Measure::Curvature).unwrap();
        assert!(matches!(
            basis.kernel_jet(0.5, 5),
            Err(BergmanError::InvalidParameter(_))
        ));
        assert!(matches!(
            basis.kernel_jet(0.0, 2),
            Err(BergmanError::InvalidParameter(_))
        ));
        let short: Vec<(f64, f64)> = (0..4).map(|i| (2f64.powi(i), 1.0)).collect();
        assert!(matches!(fit_scaling(&short), Err(BergmanError::Sample(_))));
        let uneven = [(1.0, 1.0), (2.0, 1.0), (4.0, 1.0), (8.0, 1.0), (100.0, 1.0)];
        assert!(matches!(fit_scaling(&uneven), Err(BergmanError::Sample(_))));
    }
}
