//! Composite Fuchsian variables Z = (W, X, Y), energies and tracked norms,
//! decay-exponent fits, residuals of the derived W, X and Y systems, the block
//! structure of the complete system, and reconstruction of u and ū.

use crate::asymptotic_flow::{self, Direction, FlowMode, FlowOptions, FlowParams};
use crate::error::{Error, Result};
use crate::evolution::fd;
use crate::evolution::grid::{Grid, GridMode, StateField};
use crate::evolution::source;
use crate::evolution::stepper::StepObserver;
use crate::evolution::system::Problem;
use crate::geometry::{self, CompactPoint, PhysicalPoint};
use crate::linalg::{self, M5, V5};
use crate::symmetrizer::{self, projection, RunConstants};
use nalgebra::{DMatrix, DVector};

/// The exponents κ, ν, ζ, ε of the run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponents {
    pub kappa: f64,
    pub nu: f64,
    pub zeta: f64,
    pub epsilon: f64,
}

impl From<&RunConstants> for Exponents {
    fn from(c: &RunConstants) -> Self {
        Self { kappa: c.kappa, nu: c.nu, zeta: c.zeta, epsilon: c.epsilon }
    }
}

impl Default for Exponents {
    fn default() -> Self {
        Self { kappa: 0.01, nu: 0.01, zeta: 0.005, epsilon: 0.004 }
    }
}

/// Evaluator of all diagnostics for one problem.
#[derive(Debug, Clone)]
pub struct Diagnostics {
    pub problem: Problem,
    pub exps: Exponents,
    pub t0: f64,
    pub flow_opts: FlowOptions,
}

/// Z = (W_ρ, W_θ, W_φ, X, Y) at one time. W and X share the state layout; Y is
/// indexed by point·N + K.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeState {
    pub t: f64,
    pub w: [Vec<f64>; 3],
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Energies and tracked norms at one time.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyRecord {
    pub t: f64,
    /// ∫𝓱(Z, Z).
    pub z_norm2: f64,
    /// ∫𝓱(ΠZ, ΠZ).
    pub pi_norm2: f64,
    /// ∫ₜ^{t₀} τ⁻¹‖ΠZ‖² dτ.
    pub pi_integral: f64,
    pub v0_sup: f64,
    /// ‖ℙV‖ in L² and H¹.
    pub pv_l2: f64,
    pub pv_h1: f64,
    /// ‖𝓓V‖ in L² and H¹.
    pub dv_l2: f64,
    pub dv_h1: f64,
}

fn h_diag(theta: f64) -> [f64; 5] {
    let s2 = theta.sin().powi(2);
    [1.0, 1.0, 1.0, 1.0 / s2, 1.0]
}

fn q_diag(theta: f64) -> [f64; 3] {
    [1.0, 1.0, 1.0 / theta.sin().powi(2)]
}

/// Covariant derivatives 𝓓_j V (j = ρ, θ, φ) of a state-layout field; the
/// angular ones vanish in spherical mode.
pub fn covariant_derivatives(grid: &Grid, n_unknowns: usize, data: &[f64]) -> [Vec<f64>; 3] {
    let stride = 5 * n_unknowns;
    let dr = fd::d_rho(data, grid, stride);
    if grid.mode == GridMode::Spherical {
        return [dr, vec![0.0; data.len()], vec![0.0; data.len()]];
    }
    let mut dth = vec![0.0; data.len()];
    let mut dph = vec![0.0; data.len()];
    for i in 0..grid.n_rho {
        for a in 0..grid.n_angles() {
            let (th, _) = grid.angles(a);
            let (c, s) = (th.cos(), th.sin());
            let base = grid.point(i, a) * stride;
            for k in 0..n_unknowns {
                let o = base + 5 * k;
                for comp in 0..5 {
                    let [d0, d1] = fd::d_angles_at(data, grid, stride, 5 * k + comp, i, a);
                    dth[o + comp] = d0;
                    dph[o + comp] = d1;
                }
                let (vth, vph) = (data[o + 2], data[o + 3]);
                dth[o + 3] -= c / s * vph;
                dph[o + 2] -= c / s * vph;
                dph[o + 3] += s * c * vth;
            }
        }
    }
    [dr, dth, dph]
}

impl Diagnostics {
    pub fn new(problem: Problem, exps: Exponents, t0: f64) -> Self {
        Self { problem, exps, t0, flow_opts: FlowOptions::default() }
    }

    fn grid(&self) -> &Grid {
        &self.problem.grid
    }

    fn n(&self) -> usize {
        self.problem.n_unknowns
    }

    /// Parameters of the asymptotic flow at grid point (i, a).
    pub fn flow_params(&self, i: usize, a: usize) -> FlowParams {
        let rho = self.grid().rho(i);
        FlowParams {
            b: self.problem.source.null_forms[a].clone(),
            rho,
            m: self.problem.m,
            chi: symmetrizer::cutoff(rho, &self.problem.chi).0,
            t0: self.t0,
            mode: FlowMode::Exact,
        }
    }

    /// Y at one point from V₀.
    pub fn y_at(&self, s: &StateField, i: usize, a: usize) -> Result<Vec<f64>> {
        let p = self.grid().point(i, a);
        let v0: Vec<f64> = (0..self.n()).map(|k| s.data[s.index(p, k, 0)]).collect();
        let fp = self.flow_params(i, a);
        asymptotic_flow::y_transform(&v0, s.t, &fp, Direction::ToY, &self.flow_opts)
    }

    /// W = t^κ𝓓V, X = t^{−ν}ℙV and Y(V₀).
    pub fn composite(&self, s: &StateField) -> Result<CompositeState> {
        let g = self.grid();
        let n = self.n();
        let tk = s.t.powf(self.exps.kappa);
        let d = covariant_derivatives(g, n, &s.data);
        let w = d.map(|f| f.into_iter().map(|x| x * tk).collect::<Vec<f64>>());
        let tn = s.t.powf(-self.exps.nu);
        let x: Vec<f64> = s.data.iter().enumerate().map(|(q, v)| if q % 5 == 0 { 0.0 } else { v * tn }).collect();
        let mut y = vec![0.0; g.n_points() * n];
        for i in 0..g.n_rho {
            for a in 0..g.n_angles() {
                let yy = self.y_at(s, i, a)?;
                let p = g.point(i, a);
                y[p * n..(p + 1) * n].copy_from_slice(&yy);
            }
        }
        Ok(CompositeState { t: s.t, w, x, y })
    }

    /// Quadrature weight of point (i, a).
    fn weight(&self, a: usize) -> f64 {
        self.grid().h * self.grid().angular_weight(a)
    }

    /// Integral over the slab of Σ h(f, f) for state-layout fields, each
    /// weighted by q^{jj} for every derivative direction j it carries.
    fn h_integral(&self, fields: &[(&[f64], &[usize])]) -> f64 {
        let g = self.grid();
        let n = self.n();
        let mut total = 0.0;
        for i in 0..g.n_rho {
            for a in 0..g.n_angles() {
                let (th, _) = g.angles(a);
                let hd = h_diag(th);
                let qd = q_diag(th);
                let base = g.point(i, a) * 5 * n;
                let mut dens = 0.0;
                for &(f, dirs) in fields {
                    let qw: f64 = dirs.iter().map(|&j| qd[j]).product();
                    for k in 0..n {
                        for c in 0..5 {
                            let v = f[base + 5 * k + c];
                            dens += qw * hd[c] * v * v;
                        }
                    }
                }
                total += self.weight(a) * dens;
            }
        }
        total
    }

    /// Energies and norms; `pi_integral` is left at zero.
    pub fn energies(&self, z: &CompositeState, s: &StateField) -> EnergyRecord {
        let g = self.grid();
        let n = self.n();
        let pi_norm2 = self.h_integral(&[(&z.w[0], &[0]), (&z.w[1], &[1]), (&z.w[2], &[2]), (&z.x, &[])]);
        let mut y2 = 0.0;
        for i in 0..g.n_rho {
            for a in 0..g.n_angles() {
                let p = g.point(i, a);
                y2 += self.weight(a) * z.y[p * n..(p + 1) * n].iter().map(|v| v * v).sum::<f64>();
            }
        }
        let pv: Vec<f64> = s.data.iter().enumerate().map(|(q, v)| if q % 5 == 0 { 0.0 } else { *v }).collect();
        let d = covariant_derivatives(g, n, &s.data);
        let dpv: Vec<Vec<f64>> =
            d.iter().map(|f| f.iter().enumerate().map(|(q, v)| if q % 5 == 0 { 0.0 } else { *v }).collect()).collect();
        let pv_l2 = self.h_integral(&[(&pv, &[])]);
        let pv_h1 = pv_l2 + self.h_integral(&[(&dpv[0], &[0]), (&dpv[1], &[1]), (&dpv[2], &[2])]);
        let dv_l2 = self.h_integral(&[(&d[0], &[0]), (&d[1], &[1]), (&d[2], &[2])]);
        let mut dd = 0.0;
        for (j, f) in d.iter().enumerate() {
            let second = covariant_derivatives(g, n, f);
            for (l, sf) in second.iter().enumerate() {
                dd += self.h_integral(&[(sf, &[j, l])]);
            }
        }
        EnergyRecord {
            t: s.t,
            z_norm2: pi_norm2 + y2,
            pi_norm2,
            pi_integral: 0.0,
            v0_sup: s.data.iter().step_by(5).fold(0.0, |m, v| m.max(v.abs())),
            pv_l2: pv_l2.sqrt(),
            pv_h1: pv_h1.sqrt(),
            dv_l2: dv_l2.sqrt(),
            dv_h1: (dv_l2 + dd).sqrt(),
        }
    }

    /// Composite and energies of one state.
    pub fn record(&self, s: &StateField) -> Result<EnergyRecord> {
        Ok(self.energies(&self.composite(s)?, s))
    }
}

/// Collects energy records during an evolution, every `every` accepted steps.
pub struct EnergyMonitor<'a> {
    pub diag: &'a Diagnostics,
    pub every: usize,
    pub records: Vec<EnergyRecord>,
    count: usize,
}

impl<'a> EnergyMonitor<'a> {
    pub fn new(diag: &'a Diagnostics, every: usize) -> Self {
        Self { diag, every: every.max(1), records: Vec::new(), count: 0 }
    }

    fn push(&mut self, s: &StateField) -> Result<()> {
        let mut r = self.diag.record(s)?;
        if let Some(prev) = self.records.last() {
            r.pi_integral = prev.pi_integral + 0.5 * (prev.pi_norm2 + r.pi_norm2) * (prev.t.ln() - r.t.ln());
        }
        self.records.push(r);
        Ok(())
    }

    /// Records the final state if it was skipped by the stride.
    pub fn finish(&mut self, last: &StateField) -> Result<()> {
        if self.records.last().map(|r| r.t) != Some(last.t) {
            self.push(last)?;
        }
        Ok(())
    }
}

impl StepObserver for EnergyMonitor<'_> {
    fn observe(&mut self, state: &StateField) -> Result<()> {
        let c = self.count;
        self.count += 1;
        if c % self.every == 0 {
            self.push(state)?;
        }
        Ok(())
    }
}

/// sqrt(sup_t (‖Z(t)‖² + ∫ₜ^{t₀}τ⁻¹‖ΠZ‖²) / ‖Z(t₀)‖²); zero for identically zero records.
pub fn energy_constant(records: &[EnergyRecord]) -> f64 {
    let Some(first) = records.first() else { return 0.0 };
    let sup = records.iter().map(|r| r.z_norm2 + r.pi_integral).fold(0.0, f64::max);
    if sup == 0.0 {
        0.0
    } else if first.z_norm2 == 0.0 {
        f64::INFINITY
    } else {
        (sup / first.z_norm2).sqrt()
    }
}

/// One fitted decay exponent.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub name: &'static str,
    /// Exponent e of the bound ‖·‖ ≲ t^e.
    pub exponent: f64,
    /// Least-squares slope of ln‖·‖ against ln t; `None` when the norm vanishes.
    pub slope: Option<f64>,
    pub pass: bool,
    pub samples: usize,
}

/// Minimum number of samples in the fit window.
pub const MIN_FIT_SAMPLES: usize = 10;

/// Slope of ln y against ln t over the final decade t ≤ 10·t_last.
pub fn fit_final_decade(ts: &[f64], ys: &[f64]) -> Result<(Option<f64>, usize)> {
    let t_last = ts.iter().copied().fold(f64::INFINITY, f64::min);
    let pts: Vec<(f64, f64)> = ts.iter().zip(ys).filter(|(t, _)| **t <= 10.0 * t_last).map(|(t, y)| (*t, *y)).collect();
    if pts.iter().all(|(_, y)| *y == 0.0) {
        return Ok((None, pts.len()));
    }
    let pos: Vec<(f64, f64)> = pts.iter().copied().filter(|(_, y)| *y > 0.0).collect();
    if pos.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientSamples(format!(
            "{} positive samples in the final decade, need {MIN_FIT_SAMPLES}",
            pos.len()
        )));
    }
    let x: Vec<f64> = pos.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = pos.iter().map(|p| p.1.ln()).collect();
    Ok((Some(linalg::linear_fit(&x, &y).0), pos.len()))
}

/// Fits for the five tracked norms: ‖V₀‖_∞ (0), ‖ℙV‖_{H¹} (ν), ‖𝓓V‖_{H¹} (−κ),
/// ‖ℙV‖_{L²} (ν+κ−ζ), ‖𝓓V‖_{L²} (−ζ).
pub fn decay_fit(records: &[EnergyRecord], e: &Exponents) -> Result<Vec<DecayFit>> {
    let ts: Vec<f64> = records.iter().map(|r| r.t).collect();
    let cases: [(&'static str, f64, fn(&EnergyRecord) -> f64); 5] = [
        ("V0_sup", 0.0, |r| r.v0_sup),
        ("PV_Hk", e.nu, |r| r.pv_h1),
        ("DV_Hk", -e.kappa, |r| r.dv_h1),
        ("PV_Hk-1", e.nu + e.kappa - e.zeta, |r| r.pv_l2),
        ("DV_Hk-1", -e.zeta, |r| r.dv_l2),
    ];
    cases
        .iter()
        .map(|(name, exponent, f)| {
            let ys: Vec<f64> = records.iter().map(f).collect();
            let (slope, samples) = fit_final_decade(&ts, &ys)?;
            let pass = slope.map_or(true, |s| s >= exponent - 0.2);
            Ok(DecayFit { name, exponent: *exponent, slope, pass, samples })
        })
        .collect()
}

/// Discretization residuals of the derived systems at the centre of a window.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ResidualNorms {
    pub t: f64,
    /// Differentiated system for W.
    pub difs: f64,
    /// Projected system for X.
    pub mwave_n: f64,
    /// Regularized asymptotic system for Y.
    pub mwave_m: f64,
}

/// Pointwise ρ-derivatives of coefficient functions, by 4th-order differences.
struct CoefficientSlopes {
    dadv: f64,
    db1: M5,
    dbtilde: M5,
    dctilde: M5,
    /// ∂ρ of −ρ^{3m}χ/(2D).
    dpre: f64,
}

impl Diagnostics {
    fn pre(&self, t: f64, rho: f64) -> f64 {
        let m = self.problem.m;
        let r = geometry::rho_to_r(rho, m);
        let d = r * r - (1.0 - r).powi(2) * t;
        -r.powi(3) * symmetrizer::cutoff(rho, &self.problem.chi).0 / (2.0 * d)
    }

    fn slopes(&self, t: f64, rho: f64, theta: f64) -> Result<CoefficientSlopes> {
        let p = &self.problem;
        let h = p.chi.alpha * 1e-3;
        let ext = |x: f64| symmetrizer::extend(t, x, theta, p.m, &p.chi, p.transcription);
        ext(rho + 2.0 * h)?;
        ext(rho - 2.0 * h)?;
        Ok(CoefficientSlopes {
            dadv: linalg::d1_central(|x| ext(x).map(|e| e.adv).unwrap_or(f64::NAN), rho, h),
            db1: linalg::d1_central_m5(|x| ext(x).map(|e| e.b1).unwrap_or(M5::zeros()), rho, h),
            dbtilde: linalg::d1_central_m5(|x| ext(x).map(|e| e.btilde).unwrap_or(M5::zeros()), rho, h),
            dctilde: linalg::d1_central_m5(|x| ext(x).map(|e| e.ctilde).unwrap_or(M5::zeros()), rho, h),
            dpre: linalg::d1_central(|x| self.pre(t, x), rho, h),
        })
    }

    fn remainder_field(&self, s: &StateField) -> Result<Vec<f64>> {
        let g = self.grid();
        let n = self.n();
        let p = &self.problem;
        let mut out = vec![0.0; s.data.len()];
        for i in 0..g.n_rho {
            let rho = g.rho(i);
            let chi = symmetrizer::cutoff(rho, &p.chi).0;
            for a in 0..g.n_angles() {
                let pt = g.point(i, a);
                let v: Vec<V5> = (0..n).map(|k| s.get(pt, k)).collect();
                let r = source::remainder(&p.source, a, &v, s.t, rho, p.m, chi)?;
                for (k, rk) in r.iter().enumerate() {
                    let o = s.index(pt, k, 0);
                    out[o..o + 5].copy_from_slice(rk.as_slice());
                }
            }
        }
        Ok(out)
    }

    fn require_spherical(&self) -> Result<()> {
        if self.grid().mode != GridMode::Spherical {
            return Err(Error::Config("derived-system residuals are evaluated in spherical mode".into()));
        }
        Ok(())
    }

    fn v_at(data: &[f64], base: usize) -> V5 {
        V5::from_column_slice(&data[base..base + 5])
    }

    /// s-form right side of the W system: −adv B¹∂ρW + (B̃ℙ + κ)W + 𝓠 + t𝓗.
    pub fn difs_rhs(&self, s: &StateField, w: &[f64]) -> Result<Vec<f64>> {
        self.require_spherical()?;
        let g = self.grid();
        let n = self.n();
        let t = s.t;
        let (kap, st, tk) = (self.exps.kappa, t.sqrt(), t.powf(self.exps.kappa));
        let dw = fd::d_rho(w, g, 5 * n);
        let dg = fd::d_rho(&self.remainder_field(s)?, g, 5 * n);
        let pr = projection();
        let mut out = vec![0.0; w.len()];
        for i in 0..g.n_rho {
            let rho = g.rho(i);
            let e = self.problem.matrices(t, i, 0)?;
            let sl = self.slopes(t, rho, g.rep_angles.0)?;
            let pre = self.pre(t, rho);
            let b = &self.problem.source.null_forms[0];
            let pt = g.point(i, 0);
            let v0: Vec<f64> = (0..n).map(|k| s.data[s.index(pt, k, 0)]).collect();
            let w0: Vec<f64> = (0..n).map(|k| w[s.index(pt, k, 0)]).collect();
            let plus: Vec<f64> = v0.iter().zip(&w0).map(|(a, b)| a + b).collect();
            let minus: Vec<f64> = v0.iter().zip(&w0).map(|(a, b)| a - b).collect();
            let (qp, qm) = (b.contract(&plus), b.contract(&minus));
            let qvv = b.contract(&v0);
            for k in 0..n {
                let o = s.index(pt, k, 0);
                let v = Self::v_at(&s.data, o);
                let wk = Self::v_at(w, o);
                let dwk = Self::v_at(&dw, o);
                let mut r = -(e.b1 * dwk) * e.adv + e.btilde * (pr * wk) + wk * kap;
                r[0] += pre * 0.5 * (qp[k] - qm[k]);
                let mut h = -(e.b1 * wk) * sl.dadv - (sl.db1 * wk) * e.adv + sl.dbtilde * (pr * v) * tk + sl.dctilde * v * (tk * st) + e.ctilde * wk * st;
                h[0] += tk * sl.dpre * qvv[k];
                h += Self::v_at(&dg, o) * (tk * t);
                r += h;
                out[o..o + 5].copy_from_slice(r.as_slice());
            }
        }
        Ok(out)
    }

    /// s-form right side of the X system: −adv B¹∂ρX + (B̃ − ν)X + t𝓚.
    pub fn mwave_n_rhs(&self, s: &StateField, w: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.require_spherical()?;
        let g = self.grid();
        let n = self.n();
        let t = s.t;
        let (kap, nu, st) = (self.exps.kappa, self.exps.nu, t.sqrt());
        let dx = fd::d_rho(x, g, 5 * n);
        let gf = self.remainder_field(s)?;
        let pr = projection();
        let pperp = M5::identity() - pr;
        let mut out = vec![0.0; x.len()];
        for i in 0..g.n_rho {
            let e = self.problem.matrices(t, i, 0)?;
            let comm = pr * e.b1 - e.b1 * pr;
            let pt = g.point(i, 0);
            for k in 0..n {
                let o = s.index(pt, k, 0);
                let v = Self::v_at(&s.data, o);
                let xk = Self::v_at(x, o);
                let kc = -(comm * Self::v_at(w, o)) * (e.adv * t.powf(-kap - nu))
                    + pr * e.ctilde * (pperp * v * t.powf(-nu) + xk) * st
                    + pr * Self::v_at(&gf, o) * t.powf(1.0 - nu);
                let r = -(e.b1 * Self::v_at(&dx, o)) * e.adv + (e.btilde - M5::identity() * nu) * xk + kc;
                out[o..o + 5].copy_from_slice(r.as_slice());
            }
        }
        Ok(out)
    }

    /// t𝓖sc: the regular part of the V₀ equation, −adv t^{−κ}[B¹W]₀ + √t[C̃V]₀ + t[𝓖]₀,
    /// per point·N + K.
    pub fn regular_v0_source(&self, s: &StateField, w: &[f64]) -> Result<Vec<f64>> {
        let g = self.grid();
        let n = self.n();
        let t = s.t;
        let gf = self.remainder_field(s)?;
        let mut out = vec![0.0; g.n_points() * n];
        for i in 0..g.n_rho {
            for a in 0..g.n_angles() {
                let e = self.problem.matrices(t, i, a)?;
                let pt = g.point(i, a);
                for k in 0..n {
                    let o = s.index(pt, k, 0);
                    let bw = e.b1 * Self::v_at(w, o);
                    let cv = e.ctilde * Self::v_at(&s.data, o);
                    out[pt * n + k] = -e.adv * t.powf(-self.exps.kappa) * bw[0] + t.sqrt() * cv[0] + t * gf[o];
                }
            }
        }
        Ok(out)
    }

    /// Residual norms at the centre of five consecutive, equally spaced states.
    /// The dissipation term of the discrete V system, carried over to W, X and
    /// Y, is included in each right side.
    pub fn system_residuals(&self, window: &[StateField]) -> Result<ResidualNorms> {
        self.require_spherical()?;
        if window.len() != 5 {
            return Err(Error::InsufficientSamples(format!("need 5 consecutive states, got {}", window.len())));
        }
        let s: Vec<f64> = window.iter().map(|w| w.t.ln()).collect();
        let ds = s[1] - s[0];
        if ds == 0.0 || s.windows(2).any(|p| ((p[1] - p[0]) - ds).abs() > 1e-9 * ds.abs().max(1e-300)) {
            return Err(Error::Config("residual window must be equally spaced in ln t".into()));
        }
        let zs: Vec<CompositeState> = window.iter().map(|st| self.composite(st)).collect::<Result<_>>()?;
        let d5 = |f: &dyn Fn(usize) -> f64| (f(0) - 8.0 * f(1) + 8.0 * f(3) - f(4)) / (12.0 * ds);
        let c = &window[2];
        let zc = &zs[2];
        let len = c.data.len();
        let dw: Vec<f64> = (0..len).map(|q| d5(&|k| zs[k].w[0][q])).collect();
        let dx: Vec<f64> = (0..len).map(|q| d5(&|k| zs[k].x[q])).collect();
        let dy: Vec<f64> = (0..zc.y.len()).map(|q| d5(&|k| zs[k].y[q])).collect();

        let g = self.grid();
        let n = self.n();
        let kc = self.problem.ko_coefficient();
        let damp = |mut r: Vec<f64>, f: &[f64]| {
            for (rv, kv) in r.iter_mut().zip(fd::ko6(f, g, 5 * n)) {
                *rv -= kc * kv;
            }
            r
        };
        let rw = damp(self.difs_rhs(c, &zc.w[0])?, &zc.w[0]);
        let rx = damp(self.mwave_n_rhs(c, &zc.w[0], &zc.x)?, &zc.x);
        let mut gsc = self.regular_v0_source(c, &zc.w[0])?;
        for (q, kv) in fd::ko6(&c.data, g, 5 * n).iter().enumerate().step_by(5) {
            gsc[q / 5] -= kc * kv;
        }
        let mut ry = vec![0.0; zc.y.len()];
        for i in 0..g.n_rho {
            for a in 0..g.n_angles() {
                let pt = g.point(i, a);
                let fp = self.flow_params(i, a);
                let y = &zc.y[pt * n..(pt + 1) * n];
                let rhs = DVector::from_column_slice(&gsc[pt * n..(pt + 1) * n]);
                let l = if fp.b.is_zero() || fp.chi == 0.0 {
                    rhs
                } else {
                    let (_, jinv) = asymptotic_flow::flow_map(&fp, y, c.t, &self.flow_opts)?;
                    jinv * rhs
                };
                for k in 0..n {
                    ry[pt * n + k] = dy[pt * n + k] - l[k];
                }
            }
        }
        let norm = |a: &[f64], b: &[f64]| -> f64 {
            let per = a.len() / g.n_points();
            let mut tot = 0.0;
            for p in 0..g.n_points() {
                let wgt = self.weight(p % g.n_angles());
                for q in 0..per {
                    let d = a[p * per + q] - b[p * per + q];
                    tot += wgt * d * d;
                }
            }
            tot.sqrt()
        };
        let zero = vec![0.0; ry.len()];
        Ok(ResidualNorms { t: c.t, difs: norm(&dw, &rw), mwave_n: norm(&dx, &rx), mwave_m: norm(&ry, &zero) })
    }
}

/// max |ℙ𝓖₂| over random states at sampled points of supp χ, relative to
/// max |t𝓖| at t = 10⁻².
pub fn projected_leading_remainder(p: &Problem, samples: usize, seed: u64) -> Result<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = p.chi.support();
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for _ in 0..samples {
        let rho = rng.gen_range(lo..hi);
        let a = rng.gen_range(0..p.grid.n_angles());
        let chi = symmetrizer::cutoff(rho, &p.chi).0;
        let v: Vec<V5> = (0..p.n_unknowns).map(|_| V5::from_fn(|_, _| rng.gen_range(-1.0..1.0))).collect();
        let g2 = source::remainder_leading(&p.source, a, &v, rho, p.m, chi)?;
        for gk in source::remainder(&p.source, a, &v, 1e-2, rho, p.m, chi)? {
            scale = scale.max(1e-2 * gk.amax());
        }
        for gk in &g2 {
            for c in 1..5 {
                worst = worst.max(gk[c].abs());
            }
        }
    }
    Ok(if scale > 0.0 { worst / scale } else { 0.0 })
}

/// The blocks of the complete system for N = 1 on
/// Z = (W_ρ, W_θ, W_φ, X, Y) ∈ ℝ^{5·3 + 5 + 1}.
#[derive(Debug, Clone, PartialEq)]
pub struct FuchsianBlocks {
    pub a0: DMatrix<f64>,
    pub a1: DMatrix<f64>,
    pub a_sigma: [DMatrix<f64>; 2],
    pub acal: DMatrix<f64>,
    pub pi: DMatrix<f64>,
    /// Matrix of the inner product 𝓱.
    pub hcal: DMatrix<f64>,
}

/// Dimension of Z for one unknown.
pub const Z_DIM: usize = 21;

fn block_diag(blocks: &[M5; 4], last: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(Z_DIM, Z_DIM);
    for (b, blk) in blocks.iter().enumerate() {
        for r in 0..5 {
            for c in 0..5 {
                m[(5 * b + r, 5 * b + c)] = blk[(r, c)];
            }
        }
    }
    m[(20, 20)] = last;
    m
}

/// Assembles A⁰, A¹, A^Σ, 𝓐, Π and 𝓱 at (t, ρ, θ).
pub fn fuchsian_blocks(c: &RunConstants, t: f64, rho: f64, theta: f64) -> Result<FuchsianBlocks> {
    let e = c.extend(t, rho, theta)?;
    let r = geometry::rho_to_r(rho, c.m);
    let bl = symmetrizer::b_lambda(t, r, theta)?;
    let id = M5::identity();
    let pr = projection();
    let hd = h_diag(theta);
    let qd = q_diag(theta);
    let hm = M5::from_diagonal(&V5::from_column_slice(&hd));
    Ok(FuchsianBlocks {
        a0: block_diag(&[id, id, id, id], 1.0),
        a1: block_diag(&[e.b1, e.b1, e.b1, e.b1], 0.0),
        a_sigma: [block_diag(&[bl[0], bl[0], bl[0], bl[0]], 0.0), block_diag(&[bl[1], bl[1], bl[1], bl[1]], 0.0)],
        acal: {
            let wb = e.btilde * pr + id * c.kappa;
            block_diag(&[wb, wb, wb, e.btilde - id * c.nu], 1.0)
        },
        pi: block_diag(&[id, id, id, id], 0.0),
        hcal: block_diag(&[hm * qd[0], hm * qd[1], hm * qd[2], hm], 1.0),
    })
}

/// Smallest generalized eigenvalue of sym(𝓱𝓐) relative to 𝓱, i.e. the best
/// constant c with 𝓱(Z, 𝓐Z) ≥ c·𝓱(Z, Z).
pub fn coercivity(blocks: &FuchsianBlocks) -> f64 {
    let hsi = blocks.hcal.map(|v| if v > 0.0 { 1.0 / v.sqrt() } else { 0.0 });
    let ha = &blocks.hcal * &blocks.acal;
    let sym = (&ha + ha.transpose()) * 0.5;
    let m = &hsi * sym * &hsi;
    m.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// u = ((1−r)/√t)V₄.
pub fn u_from_v4(v4: f64, t: f64, r: f64) -> f64 {
    (1.0 - r) * v4 / t.sqrt()
}

/// Reconstruction of u and ū from a time-ordered history of states.
#[derive(Debug, Clone)]
pub struct Reconstruction<'a> {
    pub grid: &'a Grid,
    pub m: u32,
    pub rho_range: (f64, f64),
    /// States sorted by decreasing t.
    pub history: Vec<&'a StateField>,
}

fn lagrange4(x: f64, xs: [f64; 4], ys: [f64; 4]) -> f64 {
    let mut s = 0.0;
    for i in 0..4 {
        let mut l = 1.0;
        for j in 0..4 {
            if i != j {
                l *= (x - xs[j]) / (xs[i] - xs[j]);
            }
        }
        s += l * ys[i];
    }
    s
}

impl<'a> Reconstruction<'a> {
    pub fn new(grid: &'a Grid, m: u32, rho_range: (f64, f64), history: &'a [StateField]) -> Result<Self> {
        if history.is_empty() {
            return Err(Error::InsufficientSamples("empty history".into()));
        }
        let mut h: Vec<&StateField> = history.iter().collect();
        h.sort_by(|a, b| b.t.partial_cmp(&a.t).unwrap());
        Ok(Self { grid, m, rho_range, history: h })
    }

    fn nearest_angle(&self, theta: f64, phi: f64) -> usize {
        let g = self.grid;
        (0..g.n_angles())
            .min_by(|&a, &b| {
                let d = |q: usize| {
                    let (th, ph) = g.angles(q);
                    let dp = (ph - phi).rem_euclid(2.0 * std::f64::consts::PI);
                    (th - theta).powi(2) + dp.min(2.0 * std::f64::consts::PI - dp).powi(2)
                };
                d(a).partial_cmp(&d(b)).unwrap()
            })
            .unwrap_or(0)
    }

    /// V₄ of one state at ρ by periodic cubic interpolation.
    fn v4_at(&self, s: &StateField, rho: f64, a: usize, k: usize) -> f64 {
        let g = self.grid;
        let xf = (rho - g.rho_lo) / g.h;
        let i0 = xf.floor() as isize - 1;
        let mut xs = [0.0; 4];
        let mut ys = [0.0; 4];
        for q in 0..4 {
            let i = i0 + q as isize;
            xs[q] = i as f64;
            let iw = i.rem_euclid(g.n_rho as isize) as usize;
            ys[q] = s.data[s.index(g.point(iw, a), k, 4)];
        }
        lagrange4(xf, xs, ys)
    }

    /// u^K at (t, r, θ, φ), linear in ln t between stored states.
    pub fn u(&self, t: f64, r: f64, theta: f64, phi: f64, k: usize) -> Result<f64> {
        let rho = geometry::r_to_rho(r, self.m);
        let (t_hi, t_lo) = (self.history[0].t, self.history[self.history.len() - 1].t);
        let tol = 1e-12 * t_hi;
        if t > t_hi + tol || t < t_lo - tol || rho < self.rho_range.0 || rho > self.rho_range.1 {
            return Err(Error::OutsideDomain(format!(
                "(t, rho) = ({t}, {rho}) outside [{t_lo}, {t_hi}] x [{}, {}]",
                self.rho_range.0, self.rho_range.1
            )));
        }
        let a = self.nearest_angle(theta, phi);
        let j = self.history.iter().position(|s| s.t <= t + tol).unwrap_or(self.history.len() - 1);
        let v4 = if j == 0 || (self.history[j].t - t).abs() <= tol {
            self.v4_at(self.history[j], rho, a, k)
        } else {
            let (s1, s0) = (self.history[j - 1], self.history[j]);
            let lam = (t.ln() - s0.t.ln()) / (s1.t.ln() - s0.t.ln());
            (1.0 - lam) * self.v4_at(s0, rho, a, k) + lam * self.v4_at(s1, rho, a, k)
        };
        Ok(u_from_v4(v4, t, r))
    }

    /// ū^K = u/Ω at the compact image of (t̄, r̄, θ, φ).
    pub fn ubar(&self, p: &PhysicalPoint, k: usize) -> Result<f64> {
        let c = geometry::map_forward(p)?;
        let u = self.u(c.t, c.r, c.theta, c.phi, k)?;
        Ok(u / geometry::conformal_factor(&c)?)
    }

    /// The closed form ((t̄−r̄)√(t̄²−r̄²)/(1+t̄−r̄))·V₄(1/(t̄²−r̄²), (1+t̄−r̄)^{−1/m}),
    /// which evaluates u at the image point.
    pub fn ubar_closed_form(&self, p: &PhysicalPoint, k: usize) -> Result<f64> {
        let c = geometry::map_forward(p)?;
        self.u(c.t, c.r, c.theta, c.phi, k)
    }
}

/// Largest ratio |ū| / ((t̄−r̄)/(1+t̄−r̄))·(1/(1+t̄−r̄))^{ν+κ−ζ−1/2} over grid
/// radii in `rho_range` and all stored states. Along an outgoing ray both
/// t̄−r̄ and r are fixed.
pub fn pointwise_bound_constant(
    grid: &Grid,
    m: u32,
    rho_range: (f64, f64),
    history: &[StateField],
    e: &Exponents,
) -> Result<f64> {
    let expo = e.nu + e.kappa - e.zeta - 0.5;
    let mut worst: f64 = 0.0;
    for s in history {
        for i in 0..grid.n_rho {
            let rho = grid.rho(i);
            if rho < rho_range.0 || rho > rho_range.1 {
                continue;
            }
            let r = geometry::rho_to_r(rho, m);
            let bound = (1.0 - r) * r.powf(expo);
            for a in 0..grid.n_angles() {
                let (th, ph) = grid.angles(a);
                let om = geometry::conformal_factor(&CompactPoint::new(s.t, r, th, ph))?;
                for k in 0..s.n_unknowns {
                    let ub = u_from_v4(s.data[s.index(grid.point(i, a), k, 4)], s.t, r) / om;
                    worst = worst.max(ub.abs() / bound);
                }
            }
        }
    }
    Ok(worst)
}
