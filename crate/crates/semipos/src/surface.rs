//! Rotation-invariant magnetic surface models.
//!
//! Two families, both radial in the chart coordinate `t = |z|`:
//!
//! * `Cp1SemiPositive`: the projective line with Hermitian potential
//!   `phi(t) = ln(1 + t^r)` (r even). The field density
//!   `b(t) = (r^2/4) t^{r-2} (1+t^r)^{-2}` is nonnegative and vanishes to
//!   order `r - 2` at the two chart poles `t = 0` and `t = infinity`; the
//!   reference metric is the round one of total area 1.
//! * `CircleDegenerate`: a flat disk of chart radius `wall` whose field
//!   `b(t) = c |t-1|^{r-2}` vanishes on the unit circle; the reference
//!   metric is Euclidean.
//!
//! Conventions, fixed once for the whole crate: areas are measured against
//! `(1/pi) dx dy`, a conformal density `f` means the 2-form
//! `f(t) (i/2pi) dz dzbar`, and `tau = 2 pi b / lambda_hat` is the field per
//! unit reference-metric area. With these choices the round reference
//! density is `lambda_hat = (1+t^2)^{-2}` (total area exactly 1) and the
//! total curvature of the projective family is `r/2`.

use crate::numerics::{integrate_interval, integrate_radial, NumericsError, QuadratureSpec};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SurfaceError {
    #[error("invalid surface parameter: {0}")]
    InvalidParameter(String),
    #[error("t = {t} is not a degeneracy point (field does not vanish there)")]
    NotDegenerate { t: f64 },
    #[error("{0} is not defined for this surface family")]
    Unsupported(&'static str),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceKind {
    Cp1SemiPositive,
    CircleDegenerate,
}

/// A rotation-invariant Hermitian line-bundle geometry. Immutable after
/// construction; freely shareable across threads.
#[derive(Debug, Clone)]
pub struct SurfaceModel {
    kind: SurfaceKind,
    r: u32,
    /// Transverse field strength c for the circle family; unused otherwise.
    strength: f64,
    /// Dirichlet wall radius for the circle family; unused otherwise.
    wall: f64,
}

/// What the curvature looks like in one report-sized value bundle.
#[derive(Debug, Clone, Copy)]
pub struct CurvatureSummary {
    /// Largest vanishing order attained on the surface (= r).
    pub max_vanishing_order: u32,
    /// Leading coefficient of the field in geodesic coordinates at a
    /// degeneracy point: `B(y) ~ jet_coefficient * |y|^{r-2}`.
    pub jet_coefficient: f64,
    /// Integral of the field density against `(1/pi) dx dy`.
    pub total_curvature: f64,
}

impl SurfaceModel {
    /// Projective-line model of even vanishing order `r >= 2`.
    pub fn cp1_semipositive(r: u32) -> Result<Self, SurfaceError> {
        if r < 2 || r % 2 != 0 {
            return Err(SurfaceError::InvalidParameter(format!(
                "projective family needs even r >= 2, got {r}"
            )));
        }
        Ok(Self { kind: SurfaceKind::Cp1SemiPositive, r, strength: f64::NAN, wall: f64::NAN })
    }

    /// Flat-disk model whose field vanishes on the unit circle to order
    /// `r - 2`, with transverse strength `c > 0`. Default wall radius 3.
    pub fn circle_degenerate(r: u32, strength: f64) -> Result<Self, SurfaceError> {
        if r < 2 {
            return Err(SurfaceError::InvalidParameter(format!(
                "circle family needs r >= 2, got {r}"
            )));
        }
        if !(strength > 0.0 && strength.is_finite()) {
            return Err(SurfaceError::InvalidParameter(format!(
                "transverse strength must be positive, got {strength}"
            )));
        }
        Ok(Self { kind: SurfaceKind::CircleDegenerate, r, strength, wall: 3.0 })
    }

    /// Same circle model with a different Dirichlet wall radius (> 1).
    pub fn with_wall(mut self, wall: f64) -> Result<Self, SurfaceError> {
        if self.kind != SurfaceKind::CircleDegenerate {
            return Err(SurfaceError::Unsupported("wall radius"));
        }
        if !(wall > 1.0 && wall.is_finite()) {
            return Err(SurfaceError::InvalidParameter(format!(
                "wall must be finite and > 1, got {wall}"
            )));
        }
        self.wall = wall;
        Ok(self)
    }

    pub fn kind(&self) -> SurfaceKind {
        self.kind
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn wall(&self) -> f64 {
        self.wall
    }

    /// Field density against `(i/2pi) dz dzbar`.
    pub fn b(&self, t: f64) -> f64 {
        let r = self.r as i32;
        match self.kind {
            SurfaceKind::Cp1SemiPositive => {
                let quarter_r2 = (self.r * self.r) as f64 / 4.0;
                if t <= 1.0 {
                    quarter_r2 * t.powi(r - 2) / (1.0 + t.powi(r)).powi(2)
                } else {
                    // Same expression pushed through t -> 1/t; immune to
                    // t^r overflow.
                    let s = 1.0 / t;
                    quarter_r2 * s.powi(r + 2) / (1.0 + s.powi(r)).powi(2)
                }
            }
            SurfaceKind::CircleDegenerate => self.strength * (t - 1.0).abs().powi(r - 2),
        }
    }

    /// Reference-metric conformal density against `(i/2pi) dz dzbar`.
    pub fn lambda_hat(&self, t: f64) -> f64 {
        match self.kind {
            SurfaceKind::Cp1SemiPositive => {
                if t <= 1.0 {
                    (1.0 + t * t).powi(-2)
                } else {
                    let s = 1.0 / t;
                    s.powi(4) * (1.0 + s * s).powi(-2)
                }
            }
            SurfaceKind::CircleDegenerate => std::f64::consts::PI,
        }
    }

    /// Field per unit reference-metric area: `2 pi b / lambda_hat`.
    pub fn tau(&self, t: f64) -> f64 {
        let tau_of = |s: f64| {
            let r = self.r as i32;
            let quarter_r2 = (self.r * self.r) as f64 / 4.0;
            2.0 * std::f64::consts::PI * quarter_r2 * s.powi(r - 2) * (1.0 + s * s).powi(2)
                / (1.0 + s.powi(r)).powi(2)
        };
        match self.kind {
            // tau is invariant under the chart swap t -> 1/t; evaluating the
            // small-argument branch keeps it finite all the way to infinity.
            SurfaceKind::Cp1SemiPositive => {
                if t <= 1.0 {
                    tau_of(t)
                } else {
                    tau_of(1.0 / t)
                }
            }
            SurfaceKind::CircleDegenerate => 2.0 * self.b(t),
        }
    }

    /// Hermitian potential: `(1/4)(phi'' + phi'/t) = b`.
    pub fn phi(&self, t: f64) -> f64 {
        match self.kind {
            SurfaceKind::Cp1SemiPositive => {
                let r = self.r as i32;
                if t <= 1.0 {
                    t.powi(r).ln_1p()
                } else {
                    self.r as f64 * t.ln() + (1.0 / t).powi(r).ln_1p()
                }
            }
            SurfaceKind::CircleDegenerate => {
                // No elementary closed form here; the flux function is
                // explicit, so integrate 2 A(u)/u, splitting at the kink.
                let inner = |u: f64| if u == 0.0 { 0.0 } else { 2.0 * self.flux(u) / u };
                let t1 = t.min(1.0);
                let mut acc = integrate_interval(inner, 0.0, t1, 1e-12)
                    .map(|q| q.value)
                    .unwrap_or(f64::NAN);
                if t > 1.0 {
                    acc += integrate_interval(inner, 1.0, t, 1e-12)
                        .map(|q| q.value)
                        .unwrap_or(f64::NAN);
                }
                acc
            }
        }
    }

    /// Flux of the field through the chart disk of radius t, against
    /// `(1/pi) dx dy`: `A(t) = 2 int_0^t b(u) u du = (t/2) phi'(t)`.
    /// Tends to the bundle degree as t grows (projective family).
    pub fn flux(&self, t: f64) -> f64 {
        match self.kind {
            SurfaceKind::Cp1SemiPositive => {
                let r = self.r as i32;
                let half_r = self.r as f64 / 2.0;
                if t <= 1.0 {
                    let tr = t.powi(r);
                    half_r * tr / (1.0 + tr)
                } else {
                    half_r / (1.0 + (1.0 / t).powi(r))
                }
            }
            SurfaceKind::CircleDegenerate => {
                let p = (self.r - 2) as i32;
                // J(x) = int_0^x v^p (1 - v) dv, used on the inner side.
                let j = |x: f64| {
                    x.powi(p + 1) / (p + 1) as f64 - x.powi(p + 2) / (p + 2) as f64
                };
                if t <= 1.0 {
                    2.0 * self.strength * (j(1.0) - j(1.0 - t))
                } else {
                    let w = t - 1.0;
                    2.0 * self.strength
                        * (j(1.0) + w.powi(p + 2) / (p + 2) as f64 + w.powi(p + 1) / (p + 1) as f64)
                }
            }
        }
    }

    /// Order of vanishing of the field at chart radius t (infinity allowed).
    pub fn vanishing_order(&self, t: f64) -> u32 {
        match self.kind {
            SurfaceKind::Cp1SemiPositive => {
                if t == 0.0 || t.is_infinite() {
                    self.r
                } else {
                    2
                }
            }
            SurfaceKind::CircleDegenerate => {
                if t == 1.0 {
                    self.r
                } else {
                    2
                }
            }
        }
    }

    /// Leading coefficient of the field in geodesic coordinates at a
    /// degeneracy point: `B(y) ~ B0 |y|^{r-2}` with y the geodesic distance.
    pub fn jet_coefficient(&self, t: f64) -> Result<f64, SurfaceError> {
        if self.vanishing_order(t) != self.r {
            return Err(SurfaceError::NotDegenerate { t });
        }
        Ok(match self.kind {
            // Geodesic radius from a pole is arctan(t)/sqrt(pi), so the
            // chart jet 2 pi (r^2/4) t^{r-2} picks up pi^{(r-2)/2}.
            SurfaceKind::Cp1SemiPositive => {
                (self.r * self.r) as f64 / 2.0 * std::f64::consts::PI.powi(self.r as i32 / 2)
            }
            // Flat metric: geodesic distance across the circle is |t - 1|.
            SurfaceKind::CircleDegenerate => 2.0 * self.strength,
        })
    }

    /// Degree of the bundle (total curvature, projective family only).
    pub fn degree(&self) -> Result<f64, SurfaceError> {
        match self.kind {
            SurfaceKind::Cp1SemiPositive => Ok(self.r as f64 / 2.0),
            SurfaceKind::CircleDegenerate => Err(SurfaceError::Unsupported("degree")),
        }
    }

    /// Geodesic distance from the chart origin to chart radius t.
    pub fn geodesic_from_chart(&self, t: f64) -> f64 {
        match self.kind {
            SurfaceKind::Cp1SemiPositive => t.atan() / std::f64::consts::PI.sqrt(),
            SurfaceKind::CircleDegenerate => t,
        }
    }

    /// Inverse of `geodesic_from_chart`.
    pub fn chart_from_geodesic(&self, s: f64) -> f64 {
        match self.kind {
            SurfaceKind::Cp1SemiPositive => {
                let cap = self.geodesic_diameter();
                if s >= cap {
                    f64::INFINITY
                } else {
                    (std::f64::consts::PI.sqrt() * s).tan()
                }
            }
            SurfaceKind::CircleDegenerate => s,
        }
    }

    /// Pole-to-pole geodesic distance (projective family) or wall radius.
    pub fn geodesic_diameter(&self) -> f64 {
        match self.kind {
            SurfaceKind::Cp1SemiPositive => std::f64::consts::PI.sqrt() / 2.0,
            SurfaceKind::CircleDegenerate => self.wall,
        }
    }

    /// Measured curvature bundle: vanishing order, geodesic jet, and the
    /// total curvature (by quadrature for the projective family, so the
    /// degree identity is checked rather than assumed).
    pub fn curvature_summary(&self) -> Result<CurvatureSummary, SurfaceError> {
        let jet = match self.kind {
            SurfaceKind::Cp1SemiPositive => self.jet_coefficient(0.0)?,
            SurfaceKind::CircleDegenerate => self.jet_coefficient(1.0)?,
        };
        let total = match self.kind {
            SurfaceKind::Cp1SemiPositive => {
                integrate_radial(|t| 2.0 * t * self.b(t), &QuadratureSpec::default_surface())?
                    .value
            }
            SurfaceKind::CircleDegenerate => self.flux(self.wall),
        };
        Ok(CurvatureSummary {
            max_vanishing_order: self.r,
            jet_coefficient: jet,
            total_curvature: total,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::PI;

    const SAMPLE_T: [f64; 9] = [1e-3, 0.1, 0.5, 0.9, 1.0, 1.3, 2.0, 10.0, 1e3];

    #[test]
    fn density_ratio_identity() {
        // tau * lambda_hat = 2 pi b pointwise, both families.
        for r in [2u32, 4, 6] {
            let cp1 = SurfaceModel::cp1_semipositive(r).unwrap();
            let circle = SurfaceModel::circle_degenerate(r.max(3), 0.5).unwrap();
            for model in [&cp1, &circle] {
                for &t in &SAMPLE_T {
                    let lhs = model.tau(t) * model.lambda_hat(t);
                    let rhs = 2.0 * PI * model.b(t);
                    assert_relative_eq!(lhs, rhs, max_relative = 1e-14, epsilon = 1e-300);
                }
            }
        }
    }

    #[test]
    fn total_curvature_is_half_the_order() {
        for r in [2u32, 4, 6, 8] {
            let model = SurfaceModel::cp1_semipositive(r).unwrap();
            let summary = model.curvature_summary().unwrap();
            assert_relative_eq!(summary.total_curvature, r as f64 / 2.0, max_relative = 1e-10);
            assert_eq!(model.degree().unwrap(), r as f64 / 2.0);
        }
    }

    #[test]
    fn chart_swap_invariance() {
        let model = SurfaceModel::cp1_semipositive(4).unwrap();
        for &t in &SAMPLE_T {
            let s = 1.0 / t;
            assert_relative_eq!(model.tau(t), model.tau(s), max_relative = 1e-12, epsilon = 1e-300);
            // Flux through complementary chart disks covers the full degree.
            assert_relative_eq!(model.flux(t) + model.flux(s), 2.0, max_relative = 1e-12);
            // The potential shifts by the chart transition r ln t.
            assert_relative_eq!(
                model.phi(t) - model.phi(s),
                4.0 * t.ln(),
                max_relative = 1e-12,
                epsilon = 1e-12
            );
        }
    }

    proptest::proptest! {
        #[test]
        fn chart_swap_invariance_everywhere(
            log_t in -3.0f64..3.0,
            r_half in 1u32..4,
        ) {
            let model = SurfaceModel::cp1_semipositive(2 * r_half).unwrap();
            let t = 10f64.powf(log_t);
            let tau_err = (model.tau(t) - model.tau(1.0 / t)).abs();
            proptest::prop_assert!(tau_err <= 1e-12 * model.tau(t).abs().max(1e-300));
            let deg = model.degree().unwrap();
            let flux_sum = model.flux(t) + model.flux(1.0 / t);
            proptest::prop_assert!((flux_sum - deg).abs() <= 1e-12 * deg);
        }
    }

    #[test]
    fn positive_family_has_constant_field() {
        let model = SurfaceModel::cp1_semipositive(2).unwrap();
        for &t in &SAMPLE_T {
            assert_relative_eq!(model.tau(t), 2.0 * PI, max_relative = 1e-14);
        }
        assert_relative_eq!(model.tau(0.0), 2.0 * PI, max_relative = 1e-14);
        assert_relative_eq!(model.tau(f64::INFINITY), 2.0 * PI, max_relative = 1e-14);
    }

    #[test]
    fn vanishing_orders() {
        let quartic = SurfaceModel::cp1_semipositive(4).unwrap();
        assert_eq!(quartic.vanishing_order(0.0), 4);
        assert_eq!(quartic.vanishing_order(1.0), 2);
        assert_eq!(quartic.vanishing_order(f64::INFINITY), 4);
        assert!(quartic.b(1.0) > 0.0);
        let positive = SurfaceModel::cp1_semipositive(2).unwrap();
        for &t in &SAMPLE_T {
            assert_eq!(positive.vanishing_order(t), 2);
        }
        let circle = SurfaceModel::circle_degenerate(3, 1.0).unwrap();
        assert_eq!(circle.vanishing_order(1.0), 3);
        assert_eq!(circle.vanishing_order(0.5), 2);
    }

    #[test]
    fn jet_matches_field_growth() {
        // Quartic pole: B(s)/s^2 against the closed-form jet at small
        // geodesic radius s ... the relative error is O(s^2).
        let quartic = SurfaceModel::cp1_semipositive(4).unwrap();
        let jet = quartic.jet_coefficient(0.0).unwrap();
        assert_relative_eq!(jet, 8.0 * PI * PI, max_relative = 1e-14);
        let s = 1e-4;
        let t = quartic.chart_from_geodesic(s);
        assert_relative_eq!(quartic.tau(t) / (s * s), jet, max_relative = 1e-6);

        let positive = SurfaceModel::cp1_semipositive(2).unwrap();
        assert_relative_eq!(positive.jet_coefficient(0.5).unwrap(), 2.0 * PI, max_relative = 1e-14);

        // Cubic circle with c = 1/2: transverse jet is exactly 1.
        let circle = SurfaceModel::circle_degenerate(3, 0.5).unwrap();
        let jet = circle.jet_coefficient(1.0).unwrap();
        assert_relative_eq!(jet, 1.0, max_relative = 1e-14);
        for y in [1e-6, -1e-6] {
            assert_relative_eq!(circle.tau(1.0 + y) / y.abs(), jet, max_relative = 1e-9);
        }

        assert!(matches!(
            quartic.jet_coefficient(1.0),
            Err(SurfaceError::NotDegenerate { .. })
        ));
    }

    #[test]
    fn flux_derivative_recovers_field() {
        // A'(t) = 2 b t by central differences, away from the circle kink.
        let cases = [
            SurfaceModel::cp1_semipositive(4).unwrap(),
            SurfaceModel::circle_degenerate(4, 0.5).unwrap(),
            SurfaceModel::circle_degenerate(3, 1.0).unwrap(),
        ];
        let h = 1e-5;
        for model in &cases {
            for &t in &[0.3, 0.8, 1.2, 1.7, 2.5] {
                let fd = (model.flux(t + h) - model.flux(t - h)) / (2.0 * h);
                assert_relative_eq!(fd, 2.0 * model.b(t) * t, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn potential_curvature_consistency() {
        // (1/4)(phi'' + phi'/t) = b, second differences with Richardson.
        let cases = [
            (SurfaceModel::cp1_semipositive(4).unwrap(), vec![0.4, 0.7, 1.0]),
            (SurfaceModel::circle_degenerate(4, 0.5).unwrap(), vec![0.5, 1.5, 2.2]),
        ];
        for (model, ts) in &cases {
            for &t in ts {
                let lap = |h: f64| {
                    let dd =
                        (model.phi(t + h) - 2.0 * model.phi(t) + model.phi(t - h)) / (h * h);
                    let d = (model.phi(t + h) - model.phi(t - h)) / (2.0 * h);
                    dd + d / t
                };
                let coarse = lap(2e-3);
                let fine = lap(1e-3);
                let extrapolated = (4.0 * fine - coarse) / 3.0;
                assert_relative_eq!(0.25 * extrapolated, model.b(t), max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn geodesic_chart_roundtrip() {
        let model = SurfaceModel::cp1_semipositive(4).unwrap();
        assert_relative_eq!(model.geodesic_diameter(), PI.sqrt() / 2.0, max_relative = 1e-15);
        for &s in &[0.01, 0.3, 0.6, 0.88] {
            let t = model.chart_from_geodesic(s);
            assert_relative_eq!(model.geodesic_from_chart(t), s, max_relative = 1e-12);
        }
        assert_eq!(model.chart_from_geodesic(model.geodesic_diameter()), f64::INFINITY);
        assert_abs_diff_eq!(
            model.geodesic_from_chart(f64::INFINITY),
            model.geodesic_diameter(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(SurfaceModel::cp1_semipositive(3).is_err());
        assert!(SurfaceModel::cp1_semipositive(0).is_err());
        assert!(SurfaceModel::circle_degenerate(1, 0.5).is_err());
        assert!(SurfaceModel::circle_degenerate(4, 0.0).is_err());
        assert!(SurfaceModel::circle_degenerate(4, f64::NAN).is_err());
        let circle = SurfaceModel::circle_degenerate(4, 0.5).unwrap();
        assert!(circle.clone().with_wall(0.5).is_err());
        assert_eq!(circle.clone().with_wall(5.0).unwrap().wall(), 5.0);
        assert!(SurfaceModel::cp1_semipositive(4).unwrap().with_wall(5.0).is_err());
    }

    #[test]
    fn potential_stable_at_extreme_chart_radius() {
        let model = SurfaceModel::cp1_semipositive(4).unwrap();
        let t = 1e160;
        let value = model.phi(t);
        assert!(value.is_finite());
        assert_relative_eq!(value, 4.0 * t.ln(), max_relative = 1e-12);
        // b ~ t^{-6} here: positive while representable, clean underflow after.
        assert!(model.b(1e50) > 0.0);
        assert_eq!(model.b(1e160), 0.0);
    }
}
