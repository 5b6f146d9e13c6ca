//! Gauss–Legendre quadrature on `[0, 1]` and the integral form of the KMS weights.

use crate::error::Result;
use crate::linalg::{matfunc, CMatrix, HermitianMatrix};

/// Nodes and weights of the `n`-point Gauss–Legendre rule mapped to `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `int_0^1 e^{alpha (s - 1/2)} x^s y^{1-s} ds` by quadrature.
pub fn kms_mean_quadrature(alpha: f64, x: f64, y: f64, points: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(points);
    nodes
        .iter()
        .zip(&weights)
        .map(|(&s, &w)| w * (alpha * (s - 0.5)).exp() * x.powf(s) * y.powf(1.0 - s))
        .sum()
}

/// `int_0^1 e^{alpha (s - 1/2)} X^s A X^{1-s} ds` by quadrature, for positive `X`.
pub fn kms_action_quadrature(alpha: f64, x: &HermitianMatrix, a: &CMatrix, points: usize) -> Result<CMatrix> {
    let (nodes, weights) = gauss_legendre(points);
    let n = x.dim();
    let mut acc = CMatrix::zeros(n, n);
    for (&s, &w) in nodes.iter().zip(&weights) {
        let left = matfunc(x, |v| v.powf(s))?;
        let right = matfunc(x, |v| v.powf(1.0 - s))?;
        acc += (left.as_matrix() * a * right.as_matrix()).scale(w * (alpha * (s - 0.5)).exp());
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(7);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        for p in 0..14 {
            let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum();
            assert!((approx - 1.0 / (p + 1) as f64).abs() < 1e-14, "degree {p}");
        }
        let (x, w) = gauss_legendre(200);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * (3.0 * x).exp()).sum();
        assert!((approx - ((3.0f64).exp() - 1.0) / 3.0).abs() < 1e-12);
    }
}
