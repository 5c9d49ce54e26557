//! Independent solver for the compactified second-order equation in spherical
//! symmetry, written for (u, w = t∂ₜu) in s = ln t:
//!
//! ∂ₛu = w,  ∂ₛw = −(1−r)(ρ/m)∂ρw − (r²(1−r)²t/D²) f(u, ∇u) + g.
//!
//! The grid is non-periodic and extends the torus grid inward, so that the
//! inflow end stays causally separated from the torus interval.

use super::fd;
use super::source::{self, SourceContext};
use crate::error::{Error, Result};
use crate::geometry;
use std::sync::Arc;

/// Scalar forcing g^K(t, ρ) of the w equation.
pub type ScalarForcing = Arc<dyn Fn(f64, f64) -> Result<Vec<f64>> + Send + Sync>;

/// Non-periodic uniform line in ρ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineGrid {
    pub rho_lo: f64,
    pub h: f64,
    pub n: usize,
}

impl LineGrid {
    /// The torus nodes plus `n_ext` extra nodes below the lower end.
    pub fn extending(torus_lo: f64, h: f64, n_torus: usize, n_ext: usize) -> Self {
        Self { rho_lo: torus_lo - n_ext as f64 * h, h, n: n_torus + n_ext }
    }

    pub fn rho(&self, j: usize) -> f64 {
        self.rho_lo + self.h * j as f64
    }
}

/// (u^K, w^K) on the line.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarState {
    pub t: f64,
    pub u: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
}

/// Solver configuration.
#[derive(Clone)]
pub struct SecondOrderProblem {
    pub grid: LineGrid,
    pub m: u32,
    /// Coefficients along the representative direction.
    pub source: SourceContext,
    /// Dissipation coefficient multiplying the undivided 6th difference.
    pub ko_coefficient: f64,
    pub forcing: Option<ScalarForcing>,
}

fn ko_line(f: &[f64]) -> Vec<f64> {
    const W: [f64; 7] = [1.0, -6.0, 15.0, -20.0, 15.0, -6.0, 1.0];
    let n = f.len();
    (0..n)
        .map(|j| if j >= 3 && j + 3 < n { (0..7).map(|q| W[q] * f[j + q - 3]).sum() } else { 0.0 })
        .collect()
}

/// (∂ₛu, ∂ₛw).
pub fn rhs_second_order(p: &SecondOrderProblem, st: &ScalarState) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let g = &p.grid;
    let nk = st.u.len();
    let t = st.t;
    let mf = p.m as f64;
    let du: Vec<Vec<f64>> = st.u.iter().map(|u| (0..g.n).map(|j| fd::d_line(&|q| u[q], g.n, j, g.h)).collect()).collect();
    let dw: Vec<Vec<f64>> = st.w.iter().map(|w| (0..g.n).map(|j| fd::d_line(&|q| w[q], g.n, j, g.h)).collect()).collect();
    let kw: Vec<Vec<f64>> = st.w.iter().map(|w| ko_line(w)).collect();
    let ku: Vec<Vec<f64>> = st.u.iter().map(|u| ko_line(u)).collect();
    let mut su = vec![vec![0.0; g.n]; nk];
    let mut sw = vec![vec![0.0; g.n]; nk];
    for j in 0..g.n {
        let rho = g.rho(j);
        let r = geometry::rho_to_r(rho, p.m);
        let x = 1.0 - r;
        let d = geometry::check_region(t, r)?;
        let f = if p.source.zero {
            vec![0.0; nk]
        } else {
            let drdrho = mf * rho.powi(p.m as i32 - 1);
            let grads: Vec<source::Gradient> =
                (0..nk).map(|k| [st.w[k][j] / t, du[k][j] / drdrho, 0.0, 0.0, st.u[k][j]]).collect();
            let a = p.source.compact(0, t, r)?;
            source::source_f_from_gradients(&grads, t, r, &a)?
        };
        let forcing = match &p.forcing {
            Some(fo) => fo(t, rho)?,
            None => vec![0.0; nk],
        };
        let pre = r * r * x * x * t / (d * d);
        for k in 0..nk {
            su[k][j] = st.w[k][j] - p.ko_coefficient * ku[k][j];
            sw[k][j] = -x * rho / mf * dw[k][j] - pre * f[k] + forcing[k] - p.ko_coefficient * kw[k][j];
        }
    }
    Ok((su, sw))
}

/// Integrates with RK4 in s from `initial.t` to `t_end` using steps of at most `ds`.
pub fn evolve_second_order(p: &SecondOrderProblem, initial: &ScalarState, t_end: f64, ds: f64) -> Result<ScalarState> {
    if !(t_end > 0.0 && t_end < initial.t && ds > 0.0) {
        return Err(Error::Config(format!("need 0 < t_end < t0 and ds > 0 (t_end = {t_end}, ds = {ds})")));
    }
    let s0 = initial.t.ln();
    let s1 = t_end.ln();
    let n_steps = ((s0 - s1) / ds).ceil() as usize;
    let d = -(s0 - s1) / n_steps as f64;
    let mut st = initial.clone();
    let comb = |a: &ScalarState, k: &(Vec<Vec<f64>>, Vec<Vec<f64>>), c: f64, t: f64| ScalarState {
        t,
        u: a.u.iter().zip(&k.0).map(|(x, y)| x.iter().zip(y).map(|(x, y)| x + c * y).collect()).collect(),
        w: a.w.iter().zip(&k.1).map(|(x, y)| x.iter().zip(y).map(|(x, y)| x + c * y).collect()).collect(),
    };
    for step in 0..n_steps {
        let s = s0 + d * step as f64;
        let k1 = rhs_second_order(p, &st)?;
        let k2 = rhs_second_order(p, &comb(&st, &k1, 0.5 * d, (s + 0.5 * d).exp()))?;
        let k3 = rhs_second_order(p, &comb(&st, &k2, 0.5 * d, (s + 0.5 * d).exp()))?;
        let t_next = if step + 1 == n_steps { t_end } else { (s + d).exp() };
        let k4 = rhs_second_order(p, &comb(&st, &k3, d, t_next))?;
        let mut next = st.clone();
        next.t = t_next;
        for k in 0..st.u.len() {
            for j in 0..p.grid.n {
                next.u[k][j] += d / 6.0 * (k1.0[k][j] + 2.0 * k2.0[k][j] + 2.0 * k3.0[k][j] + k4.0[k][j]);
                next.w[k][j] += d / 6.0 * (k1.1[k][j] + 2.0 * k2.1[k][j] + 2.0 * k3.1[k][j] + k4.1[k][j]);
            }
        }
        if !next.u.iter().chain(&next.w).flatten().all(|x| x.is_finite()) {
            return Err(Error::Numerical(format!("non-finite second-order state at t = {t_next}")));
        }
        st = next;
    }
    Ok(st)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::CartesianCoeffs;
    use crate::symmetrizer::Transcription;

    fn problem(ko: f64) -> SecondOrderProblem {
        let ctx = SourceContext::new(&CartesianCoeffs::zeros(1), &[(std::f64::consts::FRAC_PI_2, 0.0)], Transcription::ChainConsistent).unwrap();
        SecondOrderProblem { grid: LineGrid { rho_lo: 0.99, h: 1e-4, n: 80 }, m: 1, source: ctx, ko_coefficient: ko, forcing: None }
    }

    /// w = t∂ₜu solves a transport equation; data independent of ρ is exact for t ↦ c·ln t + d.
    #[test]
    fn spatially_constant_solution() {
        let p = problem(0.0);
        let n = p.grid.n;
        let st = ScalarState { t: 0.4, u: vec![vec![1.0; n]], w: vec![vec![2.0; n]] };
        let out = evolve_second_order(&p, &st, 0.1, 0.01).unwrap();
        let want = 1.0 + 2.0 * (0.1f64 / 0.4).ln();
        assert!(out.u[0].iter().all(|u| (u - want).abs() < 1e-12));
        assert!(out.w[0].iter().all(|w| (w - 2.0).abs() < 1e-12));
    }

    #[test]
    fn linear_profile_in_w_is_transported() {
        let p = problem(0.0);
        let n = p.grid.n;
        let w: Vec<f64> = (0..n).map(|j| p.grid.rho(j)).collect();
        let st = ScalarState { t: 0.4, u: vec![vec![0.0; n]], w: vec![w] };
        let (_, sw) = rhs_second_order(&p, &st).unwrap();
        for j in 0..n {
            let rho = p.grid.rho(j);
            assert!((sw[0][j] + (1.0 - rho) * rho).abs() < 1e-9);
        }
    }

    #[test]
    fn ko_leaves_interior_polynomials_alone() {
        let f: Vec<f64> = (0..12).map(|j| (j as f64).powi(3)).collect();
        let k = ko_line(&f);
        assert!(k.iter().all(|x| x.abs() < 1e-9));
    }
}
