//! Grid-halving refinement driver with Richardson extrapolation.
//!
//! `solve(n)` produces a vector of values from an n-cell discretization with
//! a smooth h^2 error. The driver doubles n, extrapolates each pair of
//! levels, and decides convergence on the extrapolated sequence, which
//! contracts like h^4 once the raw deltas contract like h^2. Used for
//! eigenvalue refinement everywhere in the crate.

use super::NumericsError;

/// Refines `solve` from `n0` cells, doubling up to `cap`, until the values
/// stabilize within `tolerance_for(&values)`. Returns the extrapolated
/// values, a movement-based error estimate, and the last grid used.
///
/// Stop rules, in order:
/// * two raw levels agree within tolerance (cheap early exit);
/// * two consecutive extrapolations agree within tolerance, accepted only
///   once the raw deltas demonstrably contract (factor <= 0.6 per level),
///   so that accidental agreement on pre-asymptotic grids is not trusted;
/// * the extrapolated deltas stop shrinking while already within 30x of
///   tolerance: the eigensolve's round-off floor (eps times the stiffness
///   scale 2/h^2) has been reached, and the last clean level is returned
///   rather than letting refinement add noise.
///
/// If the number of values changes between levels (a spectral window edge
/// moved), the pairing restarts from scratch.
pub fn refine_until<E: From<NumericsError>>(
    solve: impl Fn(usize) -> Result<Vec<f64>, E>,
    n0: usize,
    cap: usize,
    tolerance_for: impl Fn(&[f64]) -> f64,
) -> Result<(Vec<f64>, f64, usize), E> {
    let mut n = n0;
    let mut prev: Option<Vec<f64>> = None;
    // Previous pair's extrapolation and raw delta.
    let mut history: Option<(Vec<f64>, f64)> = None;
    let mut last_clean: Option<(Vec<f64>, f64)> = None;
    loop {
        let vals = solve(n)?;
        if let Some(p) = prev.as_ref().filter(|p| p.len() == vals.len()) {
            let raw_delta = vals
                .iter()
                .zip(p)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            let tol = tolerance_for(&vals);
            let extrapolated: Vec<f64> =
                vals.iter().zip(p).map(|(a, b)| (4.0 * a - b) / 3.0).collect();
            if raw_delta <= tol {
                return Ok((extrapolated, raw_delta / 3.0, n));
            }
            if let Some((prev_ext, old_raw)) =
                history.as_ref().filter(|(pe, _)| pe.len() == vals.len())
            {
                let delta = extrapolated
                    .iter()
                    .zip(prev_ext)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max);
                if raw_delta <= 0.6 * old_raw && delta <= tol {
                    return Ok((extrapolated, delta, n));
                }
                if let Some((stored, old_delta)) = &last_clean {
                    if delta >= 0.5 * old_delta && *old_delta <= 30.0 * tol {
                        return Ok((stored.clone(), *old_delta, n / 2));
                    }
                }
                last_clean = Some((extrapolated.clone(), delta));
            }
            history = Some((extrapolated, raw_delta));
        } else if prev.is_some() {
            history = None;
            last_clean = None;
        }
        if n >= cap {
            return Err(E::from(NumericsError::Unconverged(format!(
                "values still moving at {n} cells"
            ))));
        }
        prev = Some(vals);
        n *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn extrapolates_a_clean_h2_sequence() {
        // v(n) = 5 + 3/n^2 - 1/n^4: limit 5 recovered far below the raw
        // delta size.
        let solve = |n: usize| -> Result<Vec<f64>, NumericsError> {
            let h2 = 1.0 / (n * n) as f64;
            Ok(vec![5.0 + 3.0 * h2 - h2 * h2])
        };
        let (vals, err, _) = refine_until(solve, 8, 1 << 20, |_| 1e-10).unwrap();
        assert_relative_eq!(vals[0], 5.0, epsilon = 1e-9);
        assert!(err <= 1e-10);
    }

    #[test]
    fn reports_the_cap_when_values_keep_moving() {
        // 1/n decays too slowly for an h^2 model at this tolerance.
        let solve = |n: usize| -> Result<Vec<f64>, NumericsError> { Ok(vec![1.0 / n as f64]) };
        let out = refine_until(solve, 8, 64, |_| 1e-14);
        assert!(matches!(out, Err(NumericsError::Unconverged(_))));
    }

    #[test]
    fn noise_floor_returns_last_clean_level() {
        // h^2 convergence that bottoms out in a noisy plateau near 1e-9.
        let solve = |n: usize| -> Result<Vec<f64>, NumericsError> {
            let clean = 2.0 + 10.0 / (n * n) as f64;
            let noise = 1e-9 * ((n as f64).sin());
            Ok(vec![clean + noise])
        };
        let (vals, _err, _) = refine_until(solve, 16, 1 << 22, |_| 1e-10).unwrap();
        assert_relative_eq!(vals[0], 2.0, epsilon = 5e-9);
    }
}
