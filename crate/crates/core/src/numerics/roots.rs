use num_complex::Complex64;

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 1000;

/// Roots of the companion characteristic polynomial
/// `zʳ − θ₁zʳ⁻¹ − … − θᵣ`, i.e. the eigenvalues of the AR companion matrix.
///
/// Uses Aberth–Ehrlich simultaneous iteration started on a slightly rotated
/// circle of radius `max(1, ‖θ‖∞^{1/r})`.
pub fn companion_eigenvalues(theta: &[f64]) -> Result<Vec<Complex64>> {
    let r = theta.len();
    if r == 0 {
        return Err(Error::InvalidConfig("empty coefficient vector".into()));
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("autoregressive coefficients"));
    }
    // monic, highest degree first
    let coeffs: Vec<f64> = std::iter::once(1.0)
        .chain(theta.iter().map(|t| -t))
        .collect();
    aberth(&coeffs)
}

/// Horner evaluation of a real-coefficient polynomial (highest degree first)
/// and its derivative.
fn eval_with_derivative(coeffs: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(coeffs[0], 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in &coeffs[1..] {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

pub(crate) fn eval_poly(coeffs: &[f64], z: Complex64) -> Complex64 {
    eval_with_derivative(coeffs, z).0
}

fn aberth(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let n = coeffs.len() - 1;
    let max_coeff = coeffs[1..].iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    let radius = max_coeff.powf(1.0 / n as f64).max(1.0);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.4;
            Complex64::from_polar(radius, angle)
        })
        .collect();

    for _ in 0..MAX_ITERATIONS {
        let mut settled = true;
        for k in 0..n {
            let (p, dp) = eval_with_derivative(coeffs, z[k]);
            if p == Complex64::new(0.0, 0.0) {
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..n)
                .filter(|&j| j != k)
                .map(|j| (z[k] - z[j]).inv())
                .sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            if !step.is_finite() {
                continue;
            }
            z[k] -= step;
            if step.norm() > 4.0 * f64::EPSILON * z[k].norm().max(f64::MIN_POSITIVE) {
                settled = false;
            }
        }
        if settled {
            return Ok(z);
        }
    }

    // Clustered roots converge slowly; accept the estimates if they already
    // satisfy the residual bound.
    let bound = 1e-8 * max_coeff.max(1.0);
    if z.iter().all(|&zk| eval_poly(coeffs, zk).norm() < bound) {
        Ok(z)
    } else {
        Err(Error::NoConvergence(MAX_ITERATIONS))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_order() {
        let r = companion_eigenvalues(&[0.7]).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0] - Complex64::new(0.7, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn imaginary_pair() {
        let mut r = companion_eigenvalues(&[0.0, -1.0]).unwrap();
        r.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert!((r[0] - Complex64::new(0.0, -1.0)).norm() < 1e-12);
        assert!((r[1] - Complex64::new(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn double_root_is_found() {
        // (z - 0.5)² = z² - z + 0.25
        let r = companion_eigenvalues(&[1.0, -0.25]).unwrap();
        for z in r {
            assert!((z - Complex64::new(0.5, 0.0)).norm() < 1e-6);
        }
    }

    #[test]
    fn non_finite_rejected() {
        assert_eq!(
            companion_eigenvalues(&[f64::NAN]),
            Err(Error::NonFinite("autoregressive coefficients"))
        );
    }
}
