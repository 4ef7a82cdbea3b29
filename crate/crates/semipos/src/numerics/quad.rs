//! Adaptive Gauss-Legendre quadrature for radial integrals over (0, infinity).
//!
//! The half-line is compactified through `u = t^p / (1 + t^p)` where the
//! substitution exponent `p` is chosen per integrand family so that the
//! transformed integrand is smooth on [0, 1] (exponent 2 makes every surface
//! basis integrand of this crate a polynomial times a smooth positive factor;
//! exponent matching the vanishing order suits the degenerate-measure moment
//! family). Node counts double until two successive estimates agree to the
//! requested relative tolerance.
//!
//! A log-domain variant integrates `exp(ln f)` with a running maximum shift so
//! that sharply peaked weighted-basis integrands whose peak value under- or
//! overflows `f64` are still handled to full relative accuracy.

use super::NumericsError;
use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

/// Hard cap on nodes per level; doubling stops here.
const NODE_CAP: usize = 1 << 14;

/// Parameters for [`integrate_radial`] / [`integrate_radial_ln`].
#[derive(Debug, Clone, Copy)]
pub struct QuadratureSpec {
    /// Nodes used at the first level; doubled until convergence. At least 8.
    pub node_count: usize,
    /// Relative tolerance on successive estimates, in (0, 1e-4].
    pub relative_tolerance: f64,
    /// Exponent p of the compactification u = t^p / (1 + t^p), p >= 1.
    pub substitution_exponent: f64,
}

impl QuadratureSpec {
    pub fn new(
        node_count: usize,
        relative_tolerance: f64,
        substitution_exponent: f64,
    ) -> Result<Self, NumericsError> {
        if node_count < 8 {
            return Err(NumericsError::InvalidSpec(format!(
                "node_count must be >= 8, got {node_count}"
            )));
        }
        if !(relative_tolerance > 0.0 && relative_tolerance <= 1e-4) {
            return Err(NumericsError::InvalidSpec(format!(
                "relative_tolerance must lie in (0, 1e-4], got {relative_tolerance}"
            )));
        }
        if !(substitution_exponent >= 1.0 && substitution_exponent.is_finite()) {
            return Err(NumericsError::InvalidSpec(format!(
                "substitution_exponent must be >= 1, got {substitution_exponent}"
            )));
        }
        Ok(Self { node_count, relative_tolerance, substitution_exponent })
    }

    /// House default: 64 starting nodes, 1e-10 relative, exponent 2.
    pub fn default_surface() -> Self {
        Self { node_count: 64, relative_tolerance: 1e-10, substitution_exponent: 2.0 }
    }

    /// Same as the default but with the compactification exponent set to `p`.
    pub fn with_exponent(p: f64) -> Result<Self, NumericsError> {
        Self::new(64, 1e-10, p)
    }
}

/// A converged quadrature value with its self-reported error estimate.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: f64,
    /// |last - previous| of the final doubling step.
    pub error_estimate: f64,
    /// Nodes used at the accepted level.
    pub nodes: usize,
}

/// Gauss-Legendre nodes and weights on (-1, 1), cached per order.
///
/// Newton iteration on the Legendre recurrence; symmetric pairs are generated
/// from one half. Orders used here are the doubling chain from the spec's
/// starting count, so the cache stays small.
fn gauss_legendre(n: usize) -> std::sync::Arc<(Vec<f64>, Vec<f64>)> {
    static CACHE: OnceLock<Mutex<HashMap<usize, std::sync::Arc<(Vec<f64>, Vec<f64>)>>>> =
        OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = cache.lock().unwrap().get(&n) {
        return hit.clone();
    }
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        // Tricomi-style initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                let (p2, d2) = legendre_with_derivative(n, x);
                dp = d2;
                x -= p2 / d2;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        xs[i] = -x;
        ws[i] = w;
        xs[n - 1 - i] = x;
        ws[n - 1 - i] = w;
    }
    let arc = std::sync::Arc::new((xs, ws));
    cache.lock().unwrap().insert(n, arc.clone());
    arc
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Nodes t_i, combined weights w_i (quadrature weight times Jacobian) for the
/// compactified half-line rule of order n.
fn halfline_rule(n: usize, p: f64) -> (Vec<f64>, Vec<f64>) {
    let gl = gauss_legendre(n);
    let (xs, ws) = (&gl.0, &gl.1);
    let mut ts = Vec::with_capacity(n);
    let mut cs = Vec::with_capacity(n);
    for (&x, &w) in xs.iter().zip(ws) {
        let u = 0.5 * (x + 1.0);
        let t = (u / (1.0 - u)).powf(1.0 / p);
        // dt/du = (1/p) t / (u (1-u)); the 0.5 maps (-1,1) -> (0,1).
        let jac = 0.5 * t / (p * u * (1.0 - u));
        ts.push(t);
        cs.push(w * jac);
    }
    (ts, cs)
}

/// Integrates f over (0, infinity) with doubling Gauss-Legendre levels.
pub fn integrate_radial(
    f: impl Fn(f64) -> f64,
    spec: &QuadratureSpec,
) -> Result<Quadrature, NumericsError> {
    let mut n = spec.node_count;
    let mut previous = f64::NAN;
    loop {
        let (ts, cs) = halfline_rule(n, spec.substitution_exponent);
        let mut acc = 0.0;
        for (t, c) in ts.iter().zip(&cs) {
            acc += c * f(*t);
        }
        if !acc.is_finite() {
            return Err(NumericsError::NonFinite("radial quadrature sum"));
        }
        if previous.is_finite() {
            let delta = (acc - previous).abs();
            let scale = acc.abs().max(previous.abs()).max(f64::MIN_POSITIVE);
            if delta <= spec.relative_tolerance * scale {
                return Ok(Quadrature { value: acc, error_estimate: delta, nodes: n });
            }
            if n >= NODE_CAP {
                return Err(NumericsError::QuadratureUnconverged {
                    last: acc,
                    previous,
                    nodes: n,
                });
            }
        }
        previous = acc;
        n *= 2;
    }
}

/// Integrates exp(ln_f) over (0, infinity), returning ln of the integral.
///
/// Each level max-shifts the log-integrand before exponentiating, so the
/// result is accurate whenever the integrand has any representable dynamic
/// range at all. Returns -infinity for an identically vanishing integrand.
pub fn integrate_radial_ln(
    ln_f: impl Fn(f64) -> f64,
    spec: &QuadratureSpec,
) -> Result<Quadrature, NumericsError> {
    let mut n = spec.node_count;
    let mut previous = f64::NAN;
    loop {
        let (ts, cs) = halfline_rule(n, spec.substitution_exponent);
        let mut terms = Vec::with_capacity(n);
        let mut top = f64::NEG_INFINITY;
        for (t, c) in ts.iter().zip(&cs) {
            let l = ln_f(*t) + c.ln();
            if l.is_nan() {
                return Err(NumericsError::NonFinite("log-domain integrand"));
            }
            if l > top {
                top = l;
            }
            terms.push(l);
        }
        let acc = if top == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            top + terms.iter().map(|l| (l - top).exp()).sum::<f64>().ln()
        };
        if !previous.is_nan() {
            // ln-difference is the relative difference of the values; two
            // successive empty levels count as converged at zero.
            let both_empty = acc == f64::NEG_INFINITY && previous == f64::NEG_INFINITY;
            let delta = if both_empty { 0.0 } else { (acc - previous).abs() };
            if delta <= spec.relative_tolerance {
                return Ok(Quadrature { value: acc, error_estimate: delta, nodes: n });
            }
            if n >= NODE_CAP {
                return Err(NumericsError::QuadratureUnconverged {
                    last: acc,
                    previous,
                    nodes: n,
                });
            }
        }
        previous = acc;
        n *= 2;
    }
}

/// Integrates f over the finite interval [a, b] with doubling Gauss-Legendre
/// levels. Meant for smooth integrands; callers split at interior kinks.
pub fn integrate_interval(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    relative_tolerance: f64,
) -> Result<Quadrature, NumericsError> {
    if !(a.is_finite() && b.is_finite() && a <= b) {
        return Err(NumericsError::InvalidSpec(format!(
            "bad interval [{a}, {b}]"
        )));
    }
    if a == b {
        return Ok(Quadrature { value: 0.0, error_estimate: 0.0, nodes: 0 });
    }
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut n = 16usize;
    let mut previous = f64::NAN;
    loop {
        let gl = gauss_legendre(n);
        let mut acc = 0.0;
        for (&x, &w) in gl.0.iter().zip(&gl.1) {
            acc += w * f(mid + half * x);
        }
        acc *= half;
        if !acc.is_finite() {
            return Err(NumericsError::NonFinite("interval quadrature sum"));
        }
        if previous.is_finite() {
            let delta = (acc - previous).abs();
            let scale = acc.abs().max(previous.abs()).max(f64::MIN_POSITIVE);
            if delta <= relative_tolerance * scale {
                return Ok(Quadrature { value: acc, error_estimate: delta, nodes: n });
            }
            if n >= NODE_CAP {
                return Err(NumericsError::QuadratureUnconverged {
                    last: acc,
                    previous,
                    nodes: n,
                });
            }
        }
        previous = acc;
        n *= 2;
    }
}
