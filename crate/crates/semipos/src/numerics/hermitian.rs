//! Dense Hermitian eigenvalues with conservation checks.

use super::NumericsError;
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Ascending real eigenvalues of a dense Hermitian matrix.
///
/// The input is checked for Hermitian symmetry, and the result is checked for
/// trace and Frobenius-norm conservation at 1e-10 relative; either failure is
/// reported as an error rather than silently returned.
pub fn hermitian_eigen(m: &DMatrix<Complex64>) -> Result<Vec<f64>, NumericsError> {
    let n = m.nrows();
    if n == 0 || m.ncols() != n {
        return Err(NumericsError::InvalidSpec(format!(
            "hermitian_eigen needs a nonempty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let mut scale = 0.0f64;
    for v in m.iter() {
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(NumericsError::NonFinite("hermitian matrix entries"));
        }
        scale = scale.max(v.norm());
    }
    let scale = scale.max(f64::MIN_POSITIVE);
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in i..n {
            asym = asym.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    if asym > 1e-12 * scale {
        return Err(NumericsError::NotHermitian(asym / scale));
    }
    let eig = m.clone().symmetric_eigen();
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);

    // Conservation: sum = trace, sum of squares = squared Frobenius norm.
    let trace: f64 = (0..n).map(|i| m[(i, i)].re).sum();
    let frob2: f64 = m.iter().map(|v| v.norm_sqr()).sum();
    let sum: f64 = values.iter().sum();
    let sum2: f64 = values.iter().map(|v| v * v).sum();
    let tdrift = (sum - trace).abs() / (scale * n as f64);
    let fdrift = (sum2 - frob2).abs() / (scale * scale * n as f64);
    if tdrift > 1e-10 {
        return Err(NumericsError::ConservationDrift { what: "trace", drift: tdrift });
    }
    if fdrift > 1e-10 {
        return Err(NumericsError::ConservationDrift { what: "Frobenius", drift: fdrift });
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::poly_roots;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_and_diagonal() {
        let id = DMatrix::<Complex64>::identity(5, 5);
        let vals = hermitian_eigen(&id).unwrap();
        for v in vals {
            assert_relative_eq!(v, 1.0, max_relative = 1e-13);
        }
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            c(3.0, 0.0),
            c(1.0, 0.0),
            c(2.0, 0.0),
        ]));
        let vals = hermitian_eigen(&d).unwrap();
        assert_relative_eq!(vals[0], 1.0, max_relative = 1e-13);
        assert_relative_eq!(vals[1], 2.0, max_relative = 1e-13);
        assert_relative_eq!(vals[2], 3.0, max_relative = 1e-13);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = DMatrix::<Complex64>::identity(3, 3);
        m[(0, 1)] = c(1.0, 0.5);
        m[(1, 0)] = c(1.0, 0.5); // conj would need -0.5
        assert!(matches!(hermitian_eigen(&m), Err(NumericsError::NotHermitian(_))));
    }

    /// Characteristic polynomial coefficients by Faddeev-LeVerrier; fine at
    /// this size and independent of any eigensolver.
    fn char_poly(m: &DMatrix<Complex64>) -> Vec<Complex64> {
        let n = m.nrows();
        let id = DMatrix::<Complex64>::identity(n, n);
        let mut coeffs = vec![Complex64::new(0.0, 0.0); n + 1];
        coeffs[n] = Complex64::new(1.0, 0.0);
        let mut aux = DMatrix::<Complex64>::zeros(n, n);
        for j in 1..=n {
            aux = m * &aux + &id * coeffs[n + 1 - j];
            let prod = m * &aux;
            let trace: Complex64 = (0..n).map(|i| prod[(i, i)]).sum();
            coeffs[n - j] = -trace / Complex64::new(j as f64, 0.0);
        }
        coeffs
    }

    #[test]
    fn eight_by_eight_matches_characteristic_roots() {
        let n = 8;
        let mut m = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = c(((i * i) % 7) as f64 * 0.5 - 1.0, 0.0);
            for j in i + 1..n {
                let re = ((3 * i + 5 * j) % 11) as f64 / 11.0 - 0.4;
                let im = ((7 * i + 2 * j) % 13) as f64 / 13.0 - 0.5;
                m[(i, j)] = c(re, im);
                m[(j, i)] = c(re, -im);
            }
        }
        let vals = hermitian_eigen(&m).unwrap();
        let mut roots: Vec<f64> =
            poly_roots(&char_poly(&m)).unwrap().roots.iter().map(|z| z.re).collect();
        roots.sort_by(f64::total_cmp);
        for (v, r) in vals.iter().zip(&roots) {
            assert_relative_eq!(v, r, max_relative = 1e-7, epsilon = 1e-7);
        }
    }
}
