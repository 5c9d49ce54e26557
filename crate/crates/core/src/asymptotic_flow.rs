//! The asymptotic ODE ∂ₜξ = Q(ξ)/t at a fixed spatial point, its flow map 𝓕,
//! the flow Jacobian D_ξ𝓕 with its inverse, the bounded-weak-null verdict, and
//! the conversion V₀ ↔ Y defined by V₀ = 𝓕(t, t₀, y, Y).
//!
//! Integration is in s = ln t, where the equation reads ∂ₛξ = Q(ξ).

use crate::coefficients::NullForm;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Time dependence of the quadratic prefactor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FlowMode {
    /// −ρ^{3m}χ/(2(ρ^{2m} − (1−ρ^m)²t)).
    #[default]
    Exact,
    /// The t → 0 limit −ρ^mχ/2.
    Frozen,
}

/// Data of the asymptotic equation at one spatial point.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowParams {
    pub b: NullForm,
    pub rho: f64,
    pub m: u32,
    pub chi: f64,
    pub t0: f64,
    pub mode: FlowMode,
}

impl FlowParams {
    pub fn n_unknowns(&self) -> usize {
        self.b.n_unknowns()
    }

    /// The scalar multiplying b^K_{IJ}ξ^Iξ^J.
    pub fn prefactor(&self, t: f64) -> Result<f64> {
        if self.chi == 0.0 {
            return Ok(0.0);
        }
        let r = self.rho.powi(self.m as i32);
        match self.mode {
            FlowMode::Frozen => Ok(-r * self.chi / 2.0),
            FlowMode::Exact => {
                let d = r * r - (1.0 - r).powi(2) * t;
                if !(d > 0.0) {
                    return Err(Error::Domain(format!(
                        "rho^(2m) - (1-rho^m)^2 t = {d} is not positive at t = {t}"
                    )));
                }
                Ok(-r.powi(3) * self.chi / (2.0 * d))
            }
        }
    }
}

/// Q^K(ξ) = prefactor · b^K_{IJ}ξ^Iξ^J.
pub fn q_rhs(t: f64, xi: &[f64], params: &FlowParams) -> Result<Vec<f64>> {
    let c = params.prefactor(t)?;
    Ok(params.b.contract(xi).into_iter().map(|v| c * v).collect())
}

/// L^K_J = prefactor · (b^K_{JI} + b^K_{IJ})ξ^I, the linearization of Q.
pub fn linearization(t: f64, xi: &[f64], params: &FlowParams) -> Result<DMatrix<f64>> {
    let c = params.prefactor(t)?;
    let n = params.n_unknowns();
    Ok(DMatrix::from_fn(n, n, |k, j| {
        c * (0..n).map(|i| (params.b.get(k, j, i) + params.b.get(k, i, j)) * xi[i]).sum::<f64>()
    }))
}

/// Outcome of a backward integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Verdict {
    Bounded,
    Blowup { t_star: f64 },
    Inconclusive,
}

/// Integrator settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    /// Nominal step in s = ln t.
    pub ds: f64,
    /// |ξ| above this is treated as blow-up.
    pub blowup_threshold: f64,
    /// Relative tolerance of the step-halving error estimate; `None` disables it.
    pub richardson_tol: Option<f64>,
    /// Maximum consecutive halvings of a step.
    pub max_retries: u32,
    /// Co-integrate D_ξ𝓕 and its inverse.
    pub with_jacobian: bool,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self { ds: 1e-3, blowup_threshold: 1e8, richardson_tol: Some(1e-11), max_retries: 60, with_jacobian: true }
    }
}

/// Sampled solution of the asymptotic equation, decreasing in t.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrajectory {
    pub times: Vec<f64>,
    pub xi: Vec<Vec<f64>>,
    /// D_ξ𝓕 at each sample (empty without Jacobian).
    pub jac: Vec<DMatrix<f64>>,
    /// Co-integrated inverse of D_ξ𝓕.
    pub jac_inv: Vec<DMatrix<f64>>,
    pub verdict: Verdict,
    /// sup over samples of |ξ|.
    pub bound_c: f64,
}

impl FlowTrajectory {
    pub fn last_xi(&self) -> &[f64] {
        self.xi.last().expect("trajectory has the initial sample")
    }

    /// max over samples of |D𝓕 · (D𝓕)⁻¹ − I|.
    pub fn inverse_defect(&self) -> f64 {
        self.jac
            .iter()
            .zip(&self.jac_inv)
            .map(|(j, ji)| {
                let n = j.nrows();
                (j * ji - DMatrix::<f64>::identity(n, n)).abs().max()
            })
            .fold(0.0, f64::max)
    }

    /// (sup t^ε|D𝓕|, sup t^ε|(D𝓕)⁻¹|) in the spectral norm.
    pub fn scaled_jacobian_bounds(&self, eps: f64) -> (f64, f64) {
        let mut a: f64 = 0.0;
        let mut b: f64 = 0.0;
        for ((t, j), ji) in self.times.iter().zip(&self.jac).zip(&self.jac_inv) {
            let w = t.powf(eps);
            a = a.max(w * j.clone().singular_values().max());
            b = b.max(w * ji.clone().singular_values().max());
        }
        (a, b)
    }
}

#[derive(Clone)]
struct State {
    xi: DVector<f64>,
    j: DMatrix<f64>,
    ji: DMatrix<f64>,
}

impl State {
    fn axpy(&self, h: f64, k: &State) -> State {
        State { xi: &self.xi + &k.xi * h, j: &self.j + &k.j * h, ji: &self.ji + &k.ji * h }
    }

    fn norm(&self) -> f64 {
        self.xi.norm()
    }

    fn finite(&self) -> bool {
        self.xi.iter().chain(self.j.iter()).chain(self.ji.iter()).all(|v| v.is_finite())
    }
}

fn deriv(s: f64, y: &State, p: &FlowParams, jac: bool) -> Result<State> {
    let t = s.exp();
    let xi = y.xi.as_slice();
    let q = DVector::from_vec(q_rhs(t, xi, p)?);
    if !jac {
        return Ok(State { xi: q, j: y.j.clone() * 0.0, ji: y.ji.clone() * 0.0 });
    }
    let l = linearization(t, xi, p)?;
    Ok(State { xi: q, j: &l * &y.j, ji: -(&y.ji * &l) })
}

fn rk4(s: f64, y: &State, h: f64, p: &FlowParams, jac: bool) -> Result<State> {
    let k1 = deriv(s, y, p, jac)?;
    let k2 = deriv(s + h / 2.0, &y.axpy(h / 2.0, &k1), p, jac)?;
    let k3 = deriv(s + h / 2.0, &y.axpy(h / 2.0, &k2), p, jac)?;
    let k4 = deriv(s + h, &y.axpy(h, &k3), p, jac)?;
    let mut out = y.axpy(h / 6.0, &k1);
    out = out.axpy(h / 3.0, &k2);
    out = out.axpy(h / 3.0, &k3);
    Ok(out.axpy(h / 6.0, &k4))
}

/// Integrates from t₀ down to t_min (backward in s = ln t).
pub fn integrate_flow(params: &FlowParams, xi0: &[f64], t_min: f64, opts: &FlowOptions) -> Result<FlowTrajectory> {
    let n = params.n_unknowns();
    if xi0.len() != n {
        return Err(Error::Config(format!("initial value has {} components, expected {n}", xi0.len())));
    }
    if !(t_min > 0.0 && t_min <= params.t0) {
        return Err(Error::Config(format!("t_min = {t_min} must lie in (0, t0 = {}]", params.t0)));
    }
    if xi0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite initial value".into()));
    }
    let jac = opts.with_jacobian;
    let eye = DMatrix::<f64>::identity(n, n);
    let mut y = State { xi: DVector::from_column_slice(xi0), j: eye.clone(), ji: eye };
    let s_end = t_min.ln();
    let mut s = params.t0.ln();
    let mut traj = FlowTrajectory {
        times: vec![params.t0],
        xi: vec![xi0.to_vec()],
        jac: if jac { vec![y.j.clone()] } else { vec![] },
        jac_inv: if jac { vec![y.ji.clone()] } else { vec![] },
        verdict: Verdict::Bounded,
        bound_c: y.norm(),
    };
    let mut h = opts.ds;
    while s > s_end + 1e-14 {
        let step = h.min(s - s_end);
        let mut retries = 0;
        let (next, used) = loop {
            let h_try = step / 2f64.powi(retries as i32);
            let full = rk4(s, &y, -h_try, params, jac)?;
            let accept = match opts.richardson_tol {
                None => full.finite(),
                Some(tol) => {
                    let half = rk4(s, &y, -h_try / 2.0, params, jac)?;
                    let two = rk4(s - h_try / 2.0, &half, -h_try / 2.0, params, jac)?;
                    two.finite() && (&two.xi - &full.xi).norm() <= tol * (1.0 + two.norm())
                }
            };
            if accept {
                break (full, h_try);
            }
            retries += 1;
            if retries > opts.max_retries {
                if y.norm() > opts.blowup_threshold.sqrt() {
                    // Step control gave up close to a pole.
                    traj.verdict = Verdict::Blowup { t_star: s.exp() };
                    return Ok(traj);
                }
                return Err(Error::StepSize(format!(
                    "step rejected {} times at t = {}",
                    opts.max_retries,
                    s.exp()
                )));
            }
        };
        if next.norm() > opts.blowup_threshold {
            let t_star = bisect_threshold(s, &y, used, params, opts.blowup_threshold)?;
            traj.verdict = Verdict::Blowup { t_star };
            return Ok(traj);
        }
        s -= used;
        y = next;
        h = if retries == 0 { (used * 2.0).min(opts.ds) } else { used };
        let t = if (s - s_end).abs() < 1e-14 { t_min } else { s.exp() };
        traj.times.push(t);
        traj.xi.push(y.xi.as_slice().to_vec());
        if jac {
            traj.jac.push(y.j.clone());
            traj.jac_inv.push(y.ji.clone());
        }
        traj.bound_c = traj.bound_c.max(y.norm());
    }
    if jac {
        let d = traj.inverse_defect();
        if !(d <= 1e-6) {
            return Err(Error::SingularJacobian(format!("|DF (DF)^-1 - I| = {d}")));
        }
    }
    Ok(traj)
}

/// Locates the time where |ξ| crosses the threshold inside one step.
fn bisect_threshold(s: f64, y: &State, h: f64, p: &FlowParams, thr: f64) -> Result<f64> {
    let (mut lo, mut hi) = (0.0, h);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let z = rk4(s, y, -mid, p, false)?;
        if z.finite() && z.norm() <= thr {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((s - 0.5 * (lo + hi)).exp())
}

/// Bounded-weak-null verdict over a family of initial values.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundednessReport {
    pub bounded: Verdict,
    /// sup |ξ(t)| over all trajectories of the largest radius.
    pub c_estimate: f64,
    /// Largest tested radius for which all trajectories stayed bounded.
    pub r0_estimate: Option<f64>,
    /// Least-squares slope of sup|ξ| against the radius.
    pub growth_slope: f64,
    /// (radius, sup |ξ|) per radius.
    pub per_radius: Vec<(f64, f64)>,
}

/// Initial values on the sphere of radius `radius`: ±R eᵢ plus random directions.
/// With `positive_cone` only directions with nonnegative components are used.
pub fn sphere_samples(n: usize, radius: f64, count: usize, positive_cone: bool, seed: u64) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for i in 0..n {
        for sign in [1.0, -1.0] {
            if positive_cone && sign < 0.0 {
                continue;
            }
            let mut v = vec![0.0; n];
            v[i] = sign * radius;
            out.push(v);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < count.max(1) {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(1e-3..=1.0).contains(&nrm) {
            continue;
        }
        let v: Vec<f64> = v.iter().map(|x| if positive_cone { x.abs() } else { *x } * radius / nrm).collect();
        out.push(v);
    }
    out
}

/// Integrates from spheres of radius R, R/2, R/4 and classifies boundedness.
pub fn classify_bounded(
    params: &FlowParams,
    radius: f64,
    n_samples: usize,
    t_min: f64,
    positive_cone: bool,
    seed: u64,
    opts: &FlowOptions,
) -> Result<BoundednessReport> {
    if !(radius > 0.0) {
        return Err(Error::Config(format!("radius must be positive, got {radius}")));
    }
    let opts = FlowOptions { with_jacobian: false, ..*opts };
    let mut per_radius = Vec::new();
    let mut r0 = None;
    let mut overall = Verdict::Bounded;
    for (k, rad) in [radius / 4.0, radius / 2.0, radius].into_iter().enumerate() {
        let mut sup: f64 = 0.0;
        let mut verdict = Verdict::Bounded;
        for xi0 in sphere_samples(params.n_unknowns(), rad, n_samples, positive_cone, seed + k as u64) {
            let tr = match integrate_flow(params, &xi0, t_min, &opts) {
                Ok(tr) => tr,
                Err(Error::StepSize(_)) => {
                    verdict = Verdict::Inconclusive;
                    continue;
                }
                Err(e) => return Err(e),
            };
            sup = sup.max(tr.bound_c);
            if let Verdict::Blowup { .. } = tr.verdict {
                verdict = tr.verdict;
            }
        }
        if verdict == Verdict::Bounded {
            r0 = Some(rad);
        } else if overall == Verdict::Bounded || matches!(verdict, Verdict::Blowup { .. }) {
            overall = verdict;
        }
        per_radius.push((rad, sup));
    }
    let xs: Vec<f64> = per_radius.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = per_radius.iter().map(|p| p.1).collect();
    let (slope, _) = crate::linalg::linear_fit(&xs, &ys);
    Ok(BoundednessReport {
        bounded: overall,
        c_estimate: per_radius.last().map(|p| p.1).unwrap_or(0.0),
        r0_estimate: r0,
        growth_slope: slope,
        per_radius,
    })
}

/// D_ξ𝓕 and its co-integrated inverse along the trajectory from ξ₀.
pub fn flow_jacobian(
    params: &FlowParams,
    xi0: &[f64],
    t_min: f64,
    opts: &FlowOptions,
) -> Result<(Vec<f64>, Vec<DMatrix<f64>>, Vec<DMatrix<f64>>)> {
    let tr = integrate_flow(params, xi0, t_min, &FlowOptions { with_jacobian: true, ..*opts })?;
    if let Verdict::Blowup { t_star } = tr.verdict {
        return Err(Error::Numerical(format!("flow blows up at t = {t_star} before t_min = {t_min}")));
    }
    Ok((tr.times, tr.jac, tr.jac_inv))
}

/// Direction of the V₀ ↔ Y conversion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ToY,
    ToV0,
}

/// Flow map 𝓕(t, t₀, y, ξ₀) and its Jacobian at time t.
pub fn flow_map(params: &FlowParams, xi0: &[f64], t: f64, opts: &FlowOptions) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let tr = integrate_flow(params, xi0, t, &FlowOptions { with_jacobian: true, ..*opts })?;
    if let Verdict::Blowup { t_star } = tr.verdict {
        return Err(Error::Numerical(format!("flow blows up at t = {t_star}")));
    }
    Ok((tr.last_xi().to_vec(), tr.jac_inv.last().expect("sample").clone()))
}

/// Converts V₀ to Y (Newton on 𝓕(t, t₀, y, Y) = V₀ seeded with V₀) or Y to V₀.
pub fn y_transform(value: &[f64], t: f64, params: &FlowParams, dir: Direction, opts: &FlowOptions) -> Result<Vec<f64>> {
    if params.b.is_zero() || params.chi == 0.0 || t == params.t0 {
        return Ok(value.to_vec());
    }
    match dir {
        Direction::ToV0 => Ok(flow_map(params, value, t, opts)?.0),
        Direction::ToY => {
            let mut y = DVector::from_column_slice(value);
            let target = DVector::from_column_slice(value);
            for _ in 0..50 {
                let (f, jinv) = flow_map(params, y.as_slice(), t, opts)?;
                let res = DVector::from_vec(f) - &target;
                let dy = &jinv * &res;
                y -= &dy;
                if dy.norm() <= 1e-14 * (1.0 + y.norm()) || res.norm() <= 1e-15 * (1.0 + target.norm()) {
                    return Ok(y.as_slice().to_vec());
                }
            }
            Err(Error::Newton(format!("no convergence after 50 iterations at t = {t}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmetrizer::default_t0;

    /// Frozen scalar parameters with c₀ = −ρ^m bχ/2.
    fn scalar_frozen(c0: f64) -> FlowParams {
        FlowParams { b: NullForm::scalar(-2.0 * c0), rho: 1.0, m: 1, chi: 1.0, t0: default_t0(), mode: FlowMode::Frozen }
    }

    fn oracle(xi0: f64, c0: f64, t0: f64, t: f64) -> f64 {
        xi0 / (1.0 + c0 * xi0 * (t0 / t).ln())
    }

    #[test]
    fn q_rhs_examples() {
        let mut p = scalar_frozen(1.0);
        assert_eq!(q_rhs(0.1, &[2.0], &p).unwrap(), vec![4.0]);
        // c₀ = −ρ^m bχ/2 = 1 means ρ^m bχ/2 = −1; with ρ^m b/2 = 1 the value is −4.
        p.b = NullForm::scalar(2.0);
        assert_eq!(q_rhs(0.1, &[2.0], &p).unwrap(), vec![-4.0]);
        assert_eq!(q_rhs(0.1, &[0.0], &p).unwrap(), vec![0.0]);
        p.b = NullForm::scalar(0.0);
        assert_eq!(q_rhs(0.1, &[3.0], &p).unwrap(), vec![0.0]);
    }

    #[test]
    fn exact_prefactor_limits_to_frozen() {
        let p = FlowParams { mode: FlowMode::Exact, rho: 0.9, m: 2, ..scalar_frozen(1.0) };
        let f = FlowParams { mode: FlowMode::Frozen, ..p.clone() };
        assert!((p.prefactor(1e-12).unwrap() - f.prefactor(0.3).unwrap()).abs() < 1e-10);
        assert!(matches!(p.prefactor(100.0), Err(Error::Domain(_))));
    }

    #[test]
    fn frozen_scalar_matches_closed_form() {
        let p = scalar_frozen(1.0);
        let tr = integrate_flow(&p, &[1.0], 1e-6, &FlowOptions::default()).unwrap();
        assert_eq!(tr.verdict, Verdict::Bounded);
        let mut worst: f64 = 0.0;
        for (t, xi) in tr.times.iter().zip(&tr.xi) {
            let ex = oracle(1.0, 1.0, p.t0, *t);
            worst = worst.max(((xi[0] - ex) / ex).abs());
        }
        assert!(worst <= 1e-8, "{worst}");
        let at = integrate_flow(&p, &[1.0], 0.1, &FlowOptions::default()).unwrap();
        assert!((at.last_xi()[0] - 0.3930).abs() < 1e-4);
    }

    #[test]
    fn frozen_scalar_blowup_time() {
        let p = scalar_frozen(1.0);
        let tr = integrate_flow(&p, &[-1.0], 1e-3, &FlowOptions::default()).unwrap();
        match tr.verdict {
            Verdict::Blowup { t_star } => {
                let ex = p.t0 / std::f64::consts::E;
                assert!(((t_star - ex) / ex).abs() < 1e-4, "{t_star} vs {ex}");
                assert!((ex - 0.17236).abs() < 1e-5);
            }
            v => panic!("expected blow-up, got {v:?}"),
        }
    }

    #[test]
    fn null_condition_gives_constant_flow() {
        let p = scalar_frozen(0.0);
        let tr = integrate_flow(&p, &[0.7], 1e-4, &FlowOptions::default()).unwrap();
        assert!(tr.xi.iter().all(|x| x[0] == 0.7));
        assert!(tr.jac.iter().all(|j| j[(0, 0)] == 1.0));
        assert_eq!(tr.bound_c, 0.7);
    }

    #[test]
    fn scalar_jacobian_matches_derivative_of_closed_form() {
        let p = scalar_frozen(1.0);
        let (times, jac, jinv) = flow_jacobian(&p, &[0.8], 1e-5, &FlowOptions::default()).unwrap();
        assert_eq!(jac[0][(0, 0)], 1.0);
        for ((t, j), ji) in times.iter().zip(&jac).zip(&jinv) {
            let ex = 1.0 / (1.0 + 0.8 * (p.t0 / t).ln()).powi(2);
            assert!((j[(0, 0)] - ex).abs() <= 1e-7 * ex.max(1.0));
            assert!((j[(0, 0)] * ji[(0, 0)] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn decoupled_system() {
        let mut b = NullForm::zeros(2);
        b.set(0, 0, 0, 1.0);
        let p = FlowParams { b, rho: 1.0, m: 1, chi: 1.0, t0: default_t0(), mode: FlowMode::Frozen };
        // c₀ = −1/2 for component 0.
        let tr = integrate_flow(&p, &[-0.5, -0.3], 1e-3, &FlowOptions::default()).unwrap();
        for (t, xi) in tr.times.iter().zip(&tr.xi) {
            assert_eq!(xi[1], -0.3);
            let ex = oracle(-0.5, -0.5, p.t0, *t);
            assert!((xi[0] - ex).abs() < 1e-9);
        }
        assert!(tr.inverse_defect() < 1e-10);
    }

    #[test]
    fn classification_examples() {
        let opts = FlowOptions::default();
        let free = scalar_frozen(0.0);
        let rep = classify_bounded(&free, 0.5, 8, 1e-3, false, 1, &opts).unwrap();
        assert_eq!(rep.bounded, Verdict::Bounded);
        assert!((rep.c_estimate - 0.5).abs() < 1e-15);
        assert!((rep.growth_slope - 1.0).abs() < 1e-12);
        let p = scalar_frozen(1.0);
        let full = classify_bounded(&p, 0.9, 4, 1e-3, false, 2, &opts).unwrap();
        assert!(matches!(full.bounded, Verdict::Blowup { .. }));
        let cone = classify_bounded(&p, 0.9, 4, 1e-3, true, 2, &opts).unwrap();
        assert_eq!(cone.bounded, Verdict::Bounded);
        assert_eq!(cone.r0_estimate, Some(0.9));
    }

    #[test]
    fn y_transform_round_trip() {
        let p = FlowParams { mode: FlowMode::Exact, rho: 0.997, ..scalar_frozen(0.8) };
        let opts = FlowOptions::default();
        assert_eq!(y_transform(&[0.0], 0.01, &p, Direction::ToY, &opts).unwrap(), vec![0.0]);
        assert_eq!(y_transform(&[0.4], p.t0, &p, Direction::ToY, &opts).unwrap(), vec![0.4]);
        for v0 in [0.05, 0.2, -0.3] {
            let y = y_transform(&[v0], 0.01, &p, Direction::ToY, &opts).unwrap();
            let back = y_transform(&y, 0.01, &p, Direction::ToV0, &opts).unwrap();
            assert!((back[0] - v0).abs() < 1e-10);
        }
    }

    #[test]
    fn scaled_flow_vanishes_at_zero_and_jacobian_growth_is_bounded() {
        let p = scalar_frozen(1.0);
        let z = integrate_flow(&p, &[0.0], 1e-4, &FlowOptions::default()).unwrap();
        assert!(z.xi.iter().all(|x| x[0] == 0.0));
        let tr = integrate_flow(&p, &[0.5], 1e-4, &FlowOptions::default()).unwrap();
        let (a, b) = tr.scaled_jacobian_bounds(0.004);
        assert!(a.is_finite() && b.is_finite() && a >= 0.0 && b >= 1.0);
    }
}
