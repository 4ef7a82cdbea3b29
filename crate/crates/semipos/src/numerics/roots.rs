//! Polynomial roots by simultaneous Aberth-Ehrlich iteration.
//!
//! Initial guesses sit on circles whose radii come from the Newton polygon
//! (upper convex hull of (i, ln|c_i|)), which keeps the iteration fast even
//! for the weighted-basis polynomials whose coefficients span hundreds of
//! orders of magnitude. A companion-matrix eigenvalue route is kept as an
//! independent check and as a fallback at small degree; the two routes are
//! never merged.

use super::NumericsError;
use num_complex::Complex64;
use rayon::prelude::*;

/// Why the iteration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Every root moved less than the step tolerance.
    Converged,
    /// Iteration cap reached; roots are the best available.
    MaxIterations,
    /// Converged via the companion-matrix fallback.
    CompanionFallback,
}

/// Result of a root solve.
#[derive(Debug, Clone)]
pub struct RootFind {
    /// All D roots of the degree-D input, unordered.
    pub roots: Vec<Complex64>,
    pub iterations: usize,
    pub stop: StopReason,
    /// Largest final Newton correction |p/p'| relative to (1 + |z|).
    pub max_newton_correction: f64,
}

const MAX_ITER: usize = 400;
const STEP_TOL: f64 = 1e-13;

/// Roots of c_0 + c_1 z + ... + c_D z^D.
///
/// The coefficient slice is ascending; the leading coefficient must be
/// nonzero. Exact zeros at the low end are peeled off as roots at the origin
/// before iterating. Coefficients are normalized by their largest modulus, so
/// callers may pass log-scaled families directly.
pub fn poly_roots(coeffs: &[Complex64]) -> Result<RootFind, NumericsError> {
    if coeffs.len() < 2 {
        return Err(NumericsError::InvalidSpec(
            "polynomial must have degree >= 1".into(),
        ));
    }
    if coeffs.last().unwrap().norm() == 0.0 {
        return Err(NumericsError::LeadingCoefficientZero);
    }
    if coeffs.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(NumericsError::NonFinite("polynomial coefficients"));
    }

    // Peel exact origin roots.
    let low = coeffs.iter().position(|v| v.norm() != 0.0).unwrap();
    let mut origin = vec![Complex64::new(0.0, 0.0); low];

    // Normalize the remaining part by the largest modulus.
    let top = coeffs[low..].iter().map(|v| v.norm()).fold(0.0f64, f64::max);
    let work: Vec<Complex64> = coeffs[low..].iter().map(|v| v / top).collect();
    let degree = work.len() - 1;
    if degree == 0 {
        return Ok(RootFind {
            roots: origin,
            iterations: 0,
            stop: StopReason::Converged,
            max_newton_correction: 0.0,
        });
    }

    // Reversed coefficients drive evaluation outside the unit circle: for
    // |z| > 1 the plain Horner powers overflow long before the roots do, so
    // p/p' is computed there from q(w) = w^D p(1/w) at w = 1/z, whose partial
    // sums stay bounded by the normalized coefficients.
    let rev: Vec<Complex64> = work.iter().rev().copied().collect();

    let mut roots = newton_polygon_start(&work);
    let mut stop = StopReason::MaxIterations;
    let mut iterations = MAX_ITER;
    for iter in 0..MAX_ITER {
        let steps: Vec<Complex64> = (0..roots.len())
            .into_par_iter()
            .map(|i| aberth_step(&work, &rev, &roots, i))
            .collect();
        let mut max_step = 0.0f64;
        for (r, s) in roots.iter_mut().zip(&steps) {
            *r -= s;
            let rel = s.norm() / (1.0 + r.norm());
            if rel > max_step {
                max_step = rel;
            }
        }
        if max_step < STEP_TOL {
            stop = StopReason::Converged;
            iterations = iter + 1;
            break;
        }
    }

    if stop == StopReason::MaxIterations {
        if let Some(fallback) = companion_roots(&work) {
            roots = fallback;
            stop = StopReason::CompanionFallback;
        }
    }

    // Polish with plain Newton and record the final correction size. A
    // non-finite correction is a failed root and must saturate the quality
    // metric rather than vanish in the max (f64::max drops NaN).
    let mut max_corr = 0.0f64;
    for r in roots.iter_mut() {
        for _ in 0..2 {
            match stable_newton(&work, &rev, *r) {
                NewtonEval::Step(step) => *r -= step,
                NewtonEval::ExactRoot | NewtonEval::Flat => break,
            }
        }
        let corr = match stable_newton(&work, &rev, *r) {
            NewtonEval::ExactRoot => 0.0,
            NewtonEval::Flat => f64::INFINITY,
            NewtonEval::Step(step) => {
                let c = step.norm() / (1.0 + r.norm());
                if c.is_finite() { c } else { f64::INFINITY }
            }
        };
        max_corr = max_corr.max(corr);
    }

    origin.extend(roots);
    Ok(RootFind { roots: origin, iterations, stop, max_newton_correction: max_corr })
}

/// Roots as eigenvalues of the monic companion matrix. Real-coefficient path
/// only (the iterative route handles the general case); degree cap keeps the
/// dense solve honest. Used both as fallback and as an independent oracle.
pub fn companion_roots(coeffs: &[Complex64]) -> Option<Vec<Complex64>> {
    let degree = coeffs.len() - 1;
    if degree == 0 || degree > 64 {
        return None;
    }
    let imag_scale = coeffs.iter().map(|v| v.im.abs()).fold(0.0f64, f64::max);
    let real_scale = coeffs.iter().map(|v| v.re.abs()).fold(0.0f64, f64::max);
    if imag_scale > 1e-14 * real_scale {
        return None;
    }
    let lead = coeffs[degree].re;
    let mut m = nalgebra::DMatrix::<f64>::zeros(degree, degree);
    for i in 1..degree {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..degree {
        m[(i, degree - 1)] = -coeffs[i].re / lead;
    }
    let eig = m.complex_eigenvalues();
    Some(eig.iter().map(|v| Complex64::new(v.re, v.im)).collect())
}

fn eval_with_derivative(c: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &ck in c.iter().rev() {
        dp = dp * z + p;
        p = p * z + ck;
    }
    (p, dp)
}

/// Outcome of a guarded Newton evaluation.
enum NewtonEval {
    /// p(z) is exactly zero in floating point.
    ExactRoot,
    /// The derivative vanished or the quotient left the double range.
    Flat,
    Step(Complex64),
}

/// Newton correction p/p' at z, overflow-safe on both sides of the unit
/// circle. Inside, plain Horner; outside, the reversed polynomial gives
/// p/p' = z q(w) / (D q(w) - w q'(w)) at w = 1/z.
fn stable_newton(c: &[Complex64], rev: &[Complex64], z: Complex64) -> NewtonEval {
    let (value, denom, scale) = if z.norm() <= 1.0 {
        let (p, dp) = eval_with_derivative(c, z);
        (p, dp, Complex64::new(1.0, 0.0))
    } else {
        let w = z.inv();
        let (q, dq) = eval_with_derivative(rev, w);
        let d = (c.len() - 1) as f64;
        (q, q * d - dq * w, z)
    };
    if value.norm() == 0.0 {
        return NewtonEval::ExactRoot;
    }
    if denom.norm() == 0.0 {
        return NewtonEval::Flat;
    }
    let step = value / denom * scale;
    if step.re.is_finite() && step.im.is_finite() {
        NewtonEval::Step(step)
    } else {
        NewtonEval::Flat
    }
}

fn aberth_step(c: &[Complex64], rev: &[Complex64], roots: &[Complex64], i: usize) -> Complex64 {
    let z = roots[i];
    let newton = match stable_newton(c, rev, z) {
        NewtonEval::ExactRoot => return Complex64::new(0.0, 0.0),
        // Flat spot: take a small deterministic kick instead of dividing.
        NewtonEval::Flat => return Complex64::new(1e-6 * (1.0 + z.norm()), 1e-6),
        NewtonEval::Step(s) => s,
    };
    let mut repulse = Complex64::new(0.0, 0.0);
    for (j, r) in roots.iter().enumerate() {
        if j != i {
            let d = z - r;
            if d.norm() > 0.0 {
                repulse += d.inv();
            }
        }
    }
    let denom = Complex64::new(1.0, 0.0) - newton * repulse;
    if denom.norm() < 1e-12 {
        newton
    } else {
        newton / denom
    }
}

/// Initial guesses on Newton-polygon circles.
///
/// The upper convex hull of (i, ln|c_i|) splits the index range into segments;
/// each segment of width m contributes m starting points on the circle whose
/// radius is the segment's slope-derived modulus, spread in angle with a
/// segment-dependent twist so no two guesses coincide.
fn newton_polygon_start(c: &[Complex64]) -> Vec<Complex64> {
    let degree = c.len() - 1;
    let lnmod: Vec<f64> =
        c.iter().map(|v| if v.norm() == 0.0 { -1e300 } else { v.norm().ln() }).collect();
    // Upper convex hull by monotone scan.
    let mut hull: Vec<usize> = Vec::new();
    for i in 0..=degree {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // Remove b if it lies below the chord a->i.
            let cross = (b - a) as f64 * (lnmod[i] - lnmod[a])
                - (i - a) as f64 * (lnmod[b] - lnmod[a]);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    let mut out = Vec::with_capacity(degree);
    let golden = 0.618_033_988_749_894_9_f64;
    for seg in hull.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let m = b - a;
        let radius = ((lnmod[a] - lnmod[b]) / m as f64).exp();
        for j in 0..m {
            let angle = 2.0 * std::f64::consts::PI
                * (j as f64 / m as f64 + golden * a as f64 + 0.25 / degree as f64);
            out.push(Complex64::from_polar(radius, angle));
        }
    }
    out
}
