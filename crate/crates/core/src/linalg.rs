//! Small fixed-size linear algebra and scalar numerics shared by the modules.

use nalgebra::{SMatrix, SVector};

/// 4×4 real matrix.
pub type M4 = SMatrix<f64, 4, 4>;
/// 5×5 real matrix over the component index 𝓘 ∈ {0, 1, θ, φ, 4}.
pub type M5 = SMatrix<f64, 5, 5>;
/// 5-component vector over 𝓘.
pub type V5 = SVector<f64, 5>;

/// Symmetric part (A + Aᵀ)/2.
pub fn sym<const N: usize>(a: &SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    (a + a.transpose()) * 0.5
}

/// Eigenvalues of the symmetric part of `a`, ascending.
pub fn sym_eigenvalues<const N: usize>(a: &SMatrix<f64, N, N>) -> Vec<f64> {
    let s = sym(a);
    let dm = nalgebra::DMatrix::from_iterator(N, N, s.iter().copied());
    let mut ev: Vec<f64> = dm.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

/// Smallest eigenvalue of the symmetric part.
pub fn lambda_min<const N: usize>(a: &SMatrix<f64, N, N>) -> f64 {
    sym_eigenvalues(a)[0]
}

/// Largest eigenvalue of the symmetric part.
pub fn lambda_max<const N: usize>(a: &SMatrix<f64, N, N>) -> f64 {
    *sym_eigenvalues(a).last().expect("non-empty")
}

/// Spectral (2-)norm.
pub fn spectral_norm<const N: usize>(a: &SMatrix<f64, N, N>) -> f64 {
    let dm = nalgebra::DMatrix::from_iterator(N, N, a.iter().copied());
    dm.singular_values().iter().copied().fold(0.0, f64::max)
}

/// Max absolute entry.
pub fn max_abs<const R: usize, const C: usize>(a: &SMatrix<f64, R, C>) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// 4th-order central first derivative of a scalar function.
pub fn d1_central(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}

/// 4th-order central second derivative of a scalar function.
pub fn d2_central(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 16.0 * f(x + h) - 30.0 * f(x) + 16.0 * f(x - h) - f(x - 2.0 * h))
        / (12.0 * h * h)
}

/// 4th-order central derivative of a 5×5 matrix-valued function.
pub fn d1_central_m5(f: impl Fn(f64) -> M5, x: f64, h: f64) -> M5 {
    (-f(x + 2.0 * h) + f(x + h) * 8.0 - f(x - h) * 8.0 + f(x - 2.0 * h)) / (12.0 * h)
}

/// Least-squares slope and intercept of y against x.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Value at x = 0 of the interpolating polynomial through (x_i, y_i) (Neville).
pub fn extrapolate_to_zero(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mut p = y.to_vec();
    for k in 1..n {
        for i in 0..n - k {
            p[i] = (x[i + k] * p[i] - x[i] * p[i + 1]) / (x[i + k] - x[i]);
        }
    }
    p[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central_differences_are_fourth_order() {
        let e1 = (d1_central(f64::sin, 0.3, 1e-2) - 0.3f64.cos()).abs();
        let e2 = (d1_central(f64::sin, 0.3, 5e-3) - 0.3f64.cos()).abs();
        assert!(e1 / e2 > 14.0);
        assert!((d2_central(f64::exp, 0.1, 1e-3) - 0.1f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn fit_and_extrapolation() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let (s, c) = linear_fit(&x, &y);
        assert!((s - 2.0).abs() < 1e-14 && (c - 1.0).abs() < 1e-14);
        let xs = [0.1, 0.2, 0.3];
        let ys: Vec<f64> = xs.iter().map(|v| 2.0 + 3.0 * v + v * v).collect();
        assert!((extrapolate_to_zero(&xs, &ys) - 2.0).abs() < 1e-13);
    }

    #[test]
    fn eigen_helpers() {
        let mut a = M5::identity();
        a[(0, 1)] = 2.0;
        let ev = sym_eigenvalues(&a);
        assert!((ev[0] - 0.0).abs() < 1e-14 && (ev[4] - 2.0).abs() < 1e-14);
        assert!((spectral_norm(&M5::identity()) - 1.0).abs() < 1e-14);
    }
}
