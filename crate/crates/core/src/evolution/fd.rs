//! Finite differences on the grid: periodic 4th-order in ρ, Kreiss–Oliger
//! dissipation in ρ, and 4th-order angular differences in full mode.
//!
//! Field arrays are laid out point-major with `stride` values per point, the
//! point index being p = i·n_angles + a.

use super::grid::{Grid, GridMode};

const C1: f64 = 8.0 / 12.0;
const C2: f64 = -1.0 / 12.0;

fn wrap(i: isize, n: usize) -> usize {
    i.rem_euclid(n as isize) as usize
}

/// ∂ρ of a scalar field at (i, a).
pub fn d_rho_at(f: &[f64], grid: &Grid, i: usize, a: usize) -> f64 {
    let n = grid.n_rho;
    let at = |di: isize| f[grid.point(wrap(i as isize + di, n), a)];
    (C1 * (at(1) - at(-1)) + C2 * (at(2) - at(-2))) / grid.h
}

/// ∂ρ of every value of a strided field.
pub fn d_rho(data: &[f64], grid: &Grid, stride: usize) -> Vec<f64> {
    let na = grid.n_angles();
    let n = grid.n_rho;
    let row = na * stride;
    let mut out = vec![0.0; data.len()];
    for i in 0..n {
        let (p1, m1) = (wrap(i as isize + 1, n) * row, wrap(i as isize - 1, n) * row);
        let (p2, m2) = (wrap(i as isize + 2, n) * row, wrap(i as isize - 2, n) * row);
        let base = i * row;
        for q in 0..row {
            out[base + q] = (C1 * (data[p1 + q] - data[m1 + q]) + C2 * (data[p2 + q] - data[m2 + q])) / grid.h;
        }
    }
    out
}

/// Undivided 6th difference in ρ (stencil 1, −6, 15, −20, 15, −6, 1).
pub fn ko6(data: &[f64], grid: &Grid, stride: usize) -> Vec<f64> {
    const W: [f64; 7] = [1.0, -6.0, 15.0, -20.0, 15.0, -6.0, 1.0];
    let na = grid.n_angles();
    let n = grid.n_rho;
    let row = na * stride;
    let mut out = vec![0.0; data.len()];
    for i in 0..n {
        let rows: Vec<usize> = (-3..=3).map(|d| wrap(i as isize + d, n) * row).collect();
        let base = i * row;
        for q in 0..row {
            out[base + q] = rows.iter().zip(W).map(|(r, w)| w * data[r + q]).sum();
        }
    }
    out
}

/// 4th-order first derivative on a non-periodic line, one-sided near the ends.
pub fn d_line(f: &dyn Fn(usize) -> f64, n: usize, j: usize, h: f64) -> f64 {
    if n < 5 {
        return 0.0;
    }
    let v = match j {
        0 => -25.0 * f(0) + 48.0 * f(1) - 36.0 * f(2) + 16.0 * f(3) - 3.0 * f(4),
        1 => -3.0 * f(0) - 10.0 * f(1) + 18.0 * f(2) - 6.0 * f(3) + f(4),
        j if j == n - 1 => {
            25.0 * f(n - 1) - 48.0 * f(n - 2) + 36.0 * f(n - 3) - 16.0 * f(n - 4) + 3.0 * f(n - 5)
        }
        j if j == n - 2 => 3.0 * f(n - 1) + 10.0 * f(n - 2) - 18.0 * f(n - 3) + 6.0 * f(n - 4) - f(n - 5),
        j => 8.0 * (f(j + 1) - f(j - 1)) - (f(j + 2) - f(j - 2)),
    };
    v / (12.0 * h)
}

/// 4th-order first derivative on a periodic line.
pub fn d_periodic(f: &dyn Fn(usize) -> f64, n: usize, j: usize, h: f64) -> f64 {
    let at = |d: isize| f(wrap(j as isize + d, n));
    (C1 * (at(1) - at(-1)) + C2 * (at(2) - at(-2))) / h
}

/// (∂θ, ∂φ) of value `off` of a strided field at (i, a); zero in spherical mode.
pub fn d_angles_at(data: &[f64], grid: &Grid, stride: usize, off: usize, i: usize, a: usize) -> [f64; 2] {
    if grid.mode == GridMode::Spherical {
        return [0.0, 0.0];
    }
    let (j, l) = (a / grid.n_phi, a % grid.n_phi);
    let th = |jj: usize| data[grid.point(i, jj * grid.n_phi + l) * stride + off];
    let ph = |ll: usize| data[grid.point(i, j * grid.n_phi + ll) * stride + off];
    [d_line(&th, grid.n_theta, j, grid.d_theta()), d_periodic(&ph, grid.n_phi, l, grid.d_phi())]
}

/// (∂θ, ∂φ) of a scalar field.
pub fn d_angles_scalar_at(f: &[f64], grid: &Grid, i: usize, a: usize) -> [f64; 2] {
    d_angles_at(f, grid, 1, 0, i, a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmetrizer::ChiParams;

    fn chi() -> ChiParams {
        ChiParams { rho0: 0.4, rho1: 0.6, alpha: 0.05 }
    }

    fn periodic_error(n: usize) -> f64 {
        let g = Grid::spherical(&chi(), n).unwrap();
        let l = g.rho_hi - g.rho_lo;
        let k = 2.0 * std::f64::consts::PI / l;
        let f: Vec<f64> = g.rhos().iter().map(|x| (k * x).sin()).collect();
        let d = d_rho(&f, &g, 1);
        g.rhos().iter().zip(&d).map(|(x, d)| (d - k * (k * x).cos()).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn periodic_derivative_is_fourth_order() {
        let (e1, e2) = (periodic_error(32), periodic_error(64));
        assert!(e1 / e2 > 15.0 && e1 / e2 < 17.0, "{e1} {e2}");
        let g = Grid::spherical(&chi(), 32).unwrap();
        let f: Vec<f64> = g.rhos().iter().map(|x| (2.0 * std::f64::consts::PI * (x - g.rho_lo) / 0.4).sin()).collect();
        assert!((d_rho_at(&f, &g, 5, 0) - d_rho(&f, &g, 1)[5]).abs() < 1e-14);
    }

    #[test]
    fn ko_annihilates_quintics_and_damps_grid_mode() {
        let g = Grid::spherical(&chi(), 32).unwrap();
        let c = vec![3.0; 32];
        assert!(ko6(&c, &g, 1).iter().all(|v| v.abs() < 1e-12));
        let osc: Vec<f64> = (0..32).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let k = ko6(&osc, &g, 1);
        assert!(k.iter().zip(&osc).all(|(a, b)| (a + 64.0 * b).abs() < 1e-12));
    }

    #[test]
    fn strided_layout() {
        let g = Grid::spherical(&chi(), 32).unwrap();
        let data: Vec<f64> = (0..64).map(|q| if q % 2 == 0 { g.rho(q / 2) } else { 1.0 }).collect();
        let d = d_rho(&data, &g, 2);
        for i in 3..29 {
            assert!((d[2 * i] - 1.0).abs() < 1e-10 && d[2 * i + 1].abs() < 1e-12);
        }
    }

    #[test]
    fn one_sided_line_is_exact_for_quartics() {
        let f = |j: usize| {
            let x = 0.1 * j as f64;
            1.0 + x - 2.0 * x * x + 0.5 * x.powi(3) + x.powi(4)
        };
        let df = |j: usize| {
            let x = 0.1 * j as f64;
            1.0 - 4.0 * x + 1.5 * x * x + 4.0 * x.powi(3)
        };
        for j in 0..9 {
            assert!((d_line(&f, 9, j, 0.1) - df(j)).abs() < 1e-11, "j={j}");
        }
    }

    #[test]
    fn angular_derivatives_converge() {
        let err = |nt: usize| {
            let g = Grid::full(&chi(), 16, nt, 2 * nt).unwrap();
            let f: Vec<f64> = (0..g.n_points())
                .map(|p| {
                    let (th, ph) = g.angles(p % g.n_angles());
                    th.cos() * (2.0 * ph).sin()
                })
                .collect();
            let mut e: f64 = 0.0;
            for a in 0..g.n_angles() {
                let (th, ph) = g.angles(a);
                let d = d_angles_scalar_at(&f, &g, 3, a);
                e = e.max((d[0] + th.sin() * (2.0 * ph).sin()).abs());
                e = e.max((d[1] - 2.0 * th.cos() * (2.0 * ph).cos()).abs());
            }
            e
        };
        let (e1, e2) = (err(17), err(33));
        assert!(e1 / e2 > 12.0, "{e1} {e2}");
    }
}
