//! Comparison of the first-order evolution with the independent second-order
//! solver on a spherically symmetric pulse.

use super::grid::{Grid, StateField};
use super::second_order::{evolve_second_order, LineGrid, ScalarState, SecondOrderProblem};
use super::source::{self, SourceContext};
use super::stepper::{evolve, EvolveOptions};
use super::system::Problem;
use crate::coefficients::CartesianCoeffs;
use crate::error::{Error, Result};
use crate::geometry;
use crate::symmetrizer::{self, ChiParams, Transcription};

/// Pulse data (u, t∂ₜu) = (A·G, c_w·A·G) with a Gaussian G.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
    /// Ratio of t∂ₜu to u.
    pub w_ratio: f64,
}

impl Default for Pulse {
    fn default() -> Self {
        Self { amplitude: 1e-2, center: 0.997, width: 0.0004, w_ratio: 0.3 }
    }
}

impl Pulse {
    /// (u, ∂ρu) at ρ.
    pub fn profile(&self, rho: f64) -> (f64, f64) {
        let z = (rho - self.center) / self.width;
        let g = self.amplitude * (-z * z).exp();
        (g, -2.0 * z / self.width * g)
    }
}

/// Inputs of a comparison run.
#[derive(Debug, Clone)]
pub struct CrossSolverSetup {
    pub n_rho: usize,
    pub m: u32,
    pub chi: ChiParams,
    pub coeffs: CartesianCoeffs,
    pub transcription: Transcription,
    pub pulse: Pulse,
    pub t0: f64,
    pub t_end: f64,
    pub ds: f64,
    pub ko_eps: f64,
    /// Length of the inward extension of the second-order grid.
    pub extension: f64,
}

impl CrossSolverSetup {
    pub fn standard(n_rho: usize, coeffs: CartesianCoeffs, transcription: Transcription) -> Self {
        let t0 = symmetrizer::default_t0();
        Self {
            n_rho,
            m: 1,
            chi: ChiParams { rho0: 0.9955, rho1: 0.9985, alpha: 0.0005 },
            coeffs,
            transcription,
            pulse: Pulse::default(),
            t0,
            t_end: t0 / 4.0,
            ds: 5e-4,
            ko_eps: 0.5,
            extension: 0.025,
        }
    }
}

/// Result of a comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSolverReport {
    pub t: f64,
    /// Relative L² difference of u over [ρ₀, ρ₁], worst unknown.
    pub rel_l2: f64,
    pub u_first: Vec<Vec<f64>>,
    pub u_second: Vec<Vec<f64>>,
    pub rhos: Vec<f64>,
}

/// Runs both solvers on the pulse (same pulse in every unknown) and compares u.
pub fn cross_solver(s: &CrossSolverSetup) -> Result<CrossSolverReport> {
    let n = s.coeffs.n_unknowns();
    let g = Grid::spherical(&s.chi, s.n_rho)?;
    let p = Problem::new(g.clone(), s.m, s.chi, s.transcription, &s.coeffs, s.ko_eps)?;
    let mf = s.m as f64;
    let mut init = StateField::zeros(&g, n, s.t0);
    for i in 0..g.n_rho {
        let rho = g.rho(i);
        let r = geometry::rho_to_r(rho, s.m);
        let (u, du) = s.pulse.profile(rho);
        let grad = [s.pulse.w_ratio * u / s.t0, du / (mf * rho.powi(s.m as i32 - 1)), 0.0, 0.0, u];
        let v = source::v_from_gradients(&[grad], s.t0, r)?[0];
        for k in 0..n {
            init.set(g.point(i, 0), k, &v);
        }
    }
    let first = evolve(&p, &init, &EvolveOptions { t_min: s.t_end, ds: s.ds, ..Default::default() }, None)?.last;

    let n_ext = (s.extension / g.h).ceil() as usize;
    let line = LineGrid::extending(g.rho_lo, g.h, g.n_rho, n_ext);
    if line.rho_lo <= 0.0 {
        return Err(Error::Config("second-order grid extension reaches rho = 0".into()));
    }
    let ctx = SourceContext::new(&s.coeffs, &[g.rep_angles], s.transcription)?;
    let sp = SecondOrderProblem { grid: line, m: s.m, source: ctx, ko_coefficient: p.ko_coefficient(), forcing: None };
    let prof: Vec<f64> = (0..line.n).map(|j| s.pulse.profile(line.rho(j)).0).collect();
    let st0 = ScalarState {
        t: s.t0,
        u: vec![prof.clone(); n],
        w: vec![prof.iter().map(|u| s.pulse.w_ratio * u).collect(); n],
    };
    let second = evolve_second_order(&sp, &st0, s.t_end, s.ds)?;

    let t = first.t;
    let mut u_first = vec![Vec::new(); n];
    let mut u_second = vec![Vec::new(); n];
    let mut rhos = Vec::new();
    for i in 0..g.n_rho {
        let rho = g.rho(i);
        if rho < s.chi.rho0 || rho > s.chi.rho1 {
            continue;
        }
        rhos.push(rho);
        let r = geometry::rho_to_r(rho, s.m);
        for k in 0..n {
            u_first[k].push(source::gradients_from_v(&[first.get(g.point(i, 0), k)], t, r)?[0][4]);
            u_second[k].push(second.u[k][i + n_ext]);
        }
    }
    let mut rel: f64 = 0.0;
    for k in 0..n {
        let num: f64 = u_first[k].iter().zip(&u_second[k]).map(|(a, b)| (a - b).powi(2)).sum();
        let den: f64 = u_second[k].iter().map(|b| b * b).sum();
        rel = rel.max(if den > 0.0 { (num / den).sqrt() } else { num.sqrt() });
    }
    Ok(CrossSolverReport { t, rel_l2: rel, u_first, u_second, rhos })
}
