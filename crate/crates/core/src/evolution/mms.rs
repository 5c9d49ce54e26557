//! Manufactured solutions: an exact u^K(t, ρ), its first-order variables, and
//! the forcings that make it solve the second-order and first-order systems.

use super::grid::StateField;
use super::source;
use super::system::{Forcing, Problem};
use crate::error::{Error, Result};
use crate::expr::{Expr, Var};
use crate::geometry;
use crate::linalg::{d1_central_m5, V5};
use crate::symmetrizer::{self, projection};
use std::sync::Arc;

/// Exact solution u^K(t, ρ), spherically symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactSolution {
    pub u: Vec<Expr>,
}

/// u and its partials up to second order in (t, ρ).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct Jet2 {
    u: f64,
    ut: f64,
    ur: f64,
    utt: f64,
    utr: f64,
    urr: f64,
}

impl ExactSolution {
    pub fn parse(exprs: &[&str]) -> Result<Self> {
        let u: Vec<Expr> = exprs.iter().map(|s| Expr::parse(s)).collect::<Result<_>>()?;
        for e in &u {
            if e.depends_on(Var::Theta) || e.depends_on(Var::Phi) || e.depends_on(Var::Rbar) {
                return Err(Error::Config(format!("manufactured solution '{e}' may depend only on t and rho")));
            }
        }
        if u.is_empty() {
            return Err(Error::Config("manufactured solution needs at least one component".into()));
        }
        Ok(Self { u })
    }

    pub fn n_unknowns(&self) -> usize {
        self.u.len()
    }

    fn jet(&self, k: usize, t: f64, rho: f64) -> Jet2 {
        let j = self.u[k].jet(&[t, rho, 0.0, 0.0, 0.0]);
        Jet2 {
            u: j.value,
            ut: j.d(Var::T),
            ur: j.d(Var::Rho),
            utt: j.dd(Var::T, Var::T),
            utr: j.dd(Var::T, Var::Rho),
            urr: j.dd(Var::Rho, Var::Rho),
        }
    }

    /// u^K(t, ρ).
    pub fn value(&self, t: f64, rho: f64) -> Vec<f64> {
        (0..self.u.len()).map(|k| self.jet(k, t, rho).u).collect()
    }

    /// (∂ₜu, ∂ᵣu, 0, 0, u) per unknown.
    pub fn gradients(&self, t: f64, rho: f64, m: u32) -> Vec<source::Gradient> {
        let drdrho = m as f64 * rho.powi(m as i32 - 1);
        (0..self.u.len())
            .map(|k| {
                let j = self.jet(k, t, rho);
                [j.ut, j.ur / drdrho, 0.0, 0.0, j.u]
            })
            .collect()
    }

    /// V^K(t, ρ) of the exact solution.
    pub fn v(&self, t: f64, rho: f64, m: u32) -> Result<Vec<V5>> {
        source::v_from_gradients(&self.gradients(t, rho, m), t, geometry::rho_to_r(rho, m))
    }

    /// (V, ∂ρV, ∂ₛV) of the exact solution.
    pub fn v_with_derivatives(&self, t: f64, rho: f64, m: u32) -> Result<Vec<(V5, V5, V5)>> {
        let mf = m as f64;
        let r = geometry::rho_to_r(rho, m);
        geometry::check_region(t, r)?;
        let x = 1.0 - r;
        let dx = -mf * rho.powi(m as i32 - 1);
        let st = t.sqrt();
        let mm = symmetrizer::change_of_variables(t, r)?;
        let dm_dr = d1_central_m5(|q| symmetrizer::change_of_variables(t, q).unwrap_or(mm), r, 1e-5 * x);
        let dm_drho = dm_dr * (-dx);
        let dm_dt = d1_central_m5(|q| symmetrizer::change_of_variables(q, r).unwrap_or(mm), t, 1e-5 * t);
        (0..self.u.len())
            .map(|k| {
                let j = self.jet(k, t, rho);
                let a = t * j.ut;
                let a_r = t * j.utr;
                let a_t = j.ut + t * j.utt;
                let b = rho * j.ur / mf;
                let b_r = (j.ur + rho * j.urr) / mf;
                let b_t = rho * j.utr / mf;
                let u = V5::new(a / x, st * b, 0.0, 0.0, st * j.u / x);
                let u_r = V5::new(a_r / x - a * dx / (x * x), st * b_r, 0.0, 0.0, st * (j.ur / x - j.u * dx / (x * x)));
                let u_t = V5::new(a_t / x, b / (2.0 * st) + st * b_t, 0.0, 0.0, j.u / (2.0 * st * x) + st * j.ut / x);
                let v = mm * u;
                let v_r = dm_drho * u + mm * u_r;
                let v_s = (dm_dt * u + mm * u_t) * t;
                Ok((v, v_r, v_s))
            })
            .collect()
    }

    /// g^K = t∂ₜ(t∂ₜu) + r(1−r)∂ᵣ(t∂ₜu) + (r²(1−r)²t/D²) f^K, the forcing that makes u
    /// solve the second-order equation.
    pub fn second_order_forcing(&self, ctx: &source::SourceContext, t: f64, rho: f64, m: u32) -> Result<Vec<f64>> {
        let mf = m as f64;
        let r = geometry::rho_to_r(rho, m);
        let d = geometry::check_region(t, r)?;
        let x = 1.0 - r;
        let f = if ctx.zero {
            vec![0.0; self.u.len()]
        } else {
            source::source_f_from_gradients(&self.gradients(t, rho, m), t, r, &ctx.compact(0, t, r)?)?
        };
        Ok((0..self.u.len())
            .map(|k| {
                let j = self.jet(k, t, rho);
                t * j.ut + t * t * j.utt + x * rho / mf * t * j.utr + r * r * x * x * t / (d * d) * f[k]
            })
            .collect())
    }

    /// ∂ₛV − L(V) at a torus point for the continuum extended operator L of `p`
    /// (spherical mode).
    pub fn first_order_forcing(&self, p: &Problem, t: f64, i: usize, a: usize) -> Result<Vec<V5>> {
        let rho = p.grid.rho(i);
        let e = p.matrices(t, i, a)?;
        let jets = self.v_with_derivatives(t, rho, p.m)?;
        let v: Vec<V5> = jets.iter().map(|j| j.0).collect();
        let src = source::extended_source(&p.source, a, &v, t, rho, p.m, e.chi)?;
        let pr = projection();
        Ok(jets
            .iter()
            .zip(&src)
            .map(|((v, vr, vs), s)| {
                let l = -(e.b1 * vr) * e.adv + e.btilde * (pr * v) + e.ctilde * v * t.sqrt() + s * t;
                vs - l
            })
            .collect())
    }

    /// The exact state on the grid of `p` at time t.
    pub fn state(&self, p: &Problem, t: f64) -> Result<StateField> {
        let g = &p.grid;
        let mut s = StateField::zeros(g, self.u.len(), t);
        for i in 0..g.n_rho {
            let v = self.v(t, g.rho(i), p.m)?;
            for a in 0..g.n_angles() {
                for (k, vk) in v.iter().enumerate() {
                    s.set(g.point(i, a), k, vk);
                }
            }
        }
        Ok(s)
    }
}

/// First-order forcing closure for `p`.
pub fn mms_forcing(exact: &ExactSolution, p: &Problem) -> Forcing {
    let ex = exact.clone();
    let prob = Arc::new(Problem { forcing: None, ..p.clone() });
    Arc::new(move |t, i, a| ex.first_order_forcing(&prob, t, i, a))
}

/// Errors of one refinement study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    /// (n_rho, max |u − u_exact| / max |u_exact|) per level.
    pub levels: Vec<(usize, f64)>,
    /// log₂ of successive error ratios.
    pub orders: Vec<f64>,
}

impl ConvergenceReport {
    pub fn min_order(&self) -> f64 {
        self.orders.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Inputs of a refinement study in spherical mode.
#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    pub exact: ExactSolution,
    pub coeffs: crate::coefficients::CartesianCoeffs,
    pub m: u32,
    pub chi: symmetrizer::ChiParams,
    pub transcription: symmetrizer::Transcription,
    pub t0: f64,
    pub t_end: f64,
    pub ds: f64,
    pub ko_eps: f64,
}

impl ConvergenceStudy {
    /// Default smooth pulse solution on the default domain.
    pub fn standard(coeffs: crate::coefficients::CartesianCoeffs) -> Result<Self> {
        let n = coeffs.n_unknowns();
        let u: Vec<String> = (0..n)
            .map(|k| format!("{}*(1 + t)*gauss(rho, 0.997, 0.0005)", 0.01 / (k + 1) as f64))
            .collect();
        let refs: Vec<&str> = u.iter().map(|s| s.as_str()).collect();
        let t0 = symmetrizer::default_t0();
        Ok(Self {
            exact: ExactSolution::parse(&refs)?,
            coeffs,
            m: 1,
            chi: symmetrizer::ChiParams { rho0: 0.9955, rho1: 0.9985, alpha: 0.0005 },
            transcription: symmetrizer::Transcription::Displayed,
            t0,
            t_end: t0 / 4.0,
            ds: 2.5e-3,
            ko_eps: 0.5,
        })
    }

    /// Relative max error of u at t_end on an n-point grid.
    pub fn error(&self, n: usize) -> Result<f64> {
        use super::grid::Grid;
        use super::stepper::{evolve, EvolveOptions};
        if self.exact.n_unknowns() != self.coeffs.n_unknowns() {
            return Err(Error::Config("manufactured solution and coefficients disagree on N".into()));
        }
        let g = Grid::spherical(&self.chi, n)?;
        let base = Problem::new(g.clone(), self.m, self.chi, self.transcription, &self.coeffs, self.ko_eps)?;
        let p = base.clone().with_forcing(mms_forcing(&self.exact, &base));
        let init = self.exact.state(&p, self.t0)?;
        let opts = EvolveOptions { t_min: self.t_end, ds: self.ds, ..Default::default() };
        let out = evolve(&p, &init, &opts, None)?.last;
        let t = out.t;
        let mut num: f64 = 0.0;
        let mut den: f64 = 0.0;
        for i in 0..g.n_rho {
            let rho = g.rho(i);
            let r = geometry::rho_to_r(rho, self.m);
            let ue = self.exact.value(t, rho);
            for k in 0..self.exact.n_unknowns() {
                let grads = source::gradients_from_v(&[out.get(g.point(i, 0), k)], t, r)?;
                num = num.max((grads[0][4] - ue[k]).abs());
                den = den.max(ue[k].abs());
            }
        }
        Ok(if den > 0.0 { num / den } else { num })
    }

    /// Errors and observed orders over the given resolutions.
    pub fn run(&self, levels: &[usize]) -> Result<ConvergenceReport> {
        let errs: Vec<(usize, f64)> = levels.iter().map(|&n| Ok((n, self.error(n)?))).collect::<Result<_>>()?;
        let orders = errs
            .windows(2)
            .map(|w| (w[0].1 / w[1].1).ln() / (w[1].0 as f64 / w[0].0 as f64).ln())
            .collect();
        Ok(ConvergenceReport { levels: errs, orders })
    }
}
