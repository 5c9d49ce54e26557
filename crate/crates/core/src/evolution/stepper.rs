//! Classical RK4 in s = ln t toward t_min with CFL control.

use super::grid::StateField;
use super::system::{rhs, Problem};
use crate::error::{Error, Result};

/// Integration controls.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolveOptions {
    pub t_min: f64,
    /// Magnitude of the step in s.
    pub ds: f64,
    /// Fraction of the RK4 stability limit that may be used.
    pub cfl_safety: f64,
    /// Smallest step allowed after halving.
    pub min_ds: f64,
    /// Times at which the state is stored (clipped to [t_min, t0]).
    pub snapshot_times: Vec<f64>,
    /// Store every n-th accepted state (0 disables).
    pub store_every: usize,
    /// Number of most recent accepted states kept.
    pub keep_tail: usize,
    /// A state whose max norm exceeds this ends the run as a blow-up.
    pub blowup_threshold: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            t_min: 1e-3,
            ds: 2.5e-3,
            cfl_safety: 1.0,
            min_ds: 1e-8,
            snapshot_times: Vec::new(),
            store_every: 0,
            keep_tail: 0,
            blowup_threshold: 1e8,
        }
    }
}

/// How the integration ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunStatus {
    Completed,
    BlowUp { t: f64 },
}

/// Receives each accepted state.
pub trait StepObserver {
    fn observe(&mut self, state: &StateField) -> Result<()>;
}

impl<F: FnMut(&StateField) -> Result<()>> StepObserver for F {
    fn observe(&mut self, state: &StateField) -> Result<()> {
        self(state)
    }
}

/// Output of [`evolve`].
#[derive(Debug, Clone)]
pub struct EvolveResult {
    pub status: RunStatus,
    pub last: StateField,
    pub snapshots: Vec<StateField>,
    pub stored: Vec<StateField>,
    pub tail: Vec<StateField>,
    pub steps: usize,
    /// Number of step halvings forced by the CFL check.
    pub halvings: usize,
}

/// One RK4 step of size ds (negative backward) from time t.
pub fn rk4_step(p: &Problem, t: f64, data: &[f64], ds: f64) -> Result<Vec<f64>> {
    let s = t.ln();
    let tt = |x: f64| (s + x).exp();
    let k1 = rhs(p, t, data)?;
    let y2: Vec<f64> = data.iter().zip(&k1).map(|(y, k)| y + 0.5 * ds * k).collect();
    let k2 = rhs(p, tt(0.5 * ds), &y2)?;
    let y3: Vec<f64> = data.iter().zip(&k2).map(|(y, k)| y + 0.5 * ds * k).collect();
    let k3 = rhs(p, tt(0.5 * ds), &y3)?;
    let y4: Vec<f64> = data.iter().zip(&k3).map(|(y, k)| y + ds * k).collect();
    let k4 = rhs(p, tt(ds), &y4)?;
    let out: Vec<f64> = (0..data.len())
        .map(|q| data[q] + ds / 6.0 * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q]))
        .collect();
    if !out.iter().all(|x| x.is_finite()) {
        return Err(Error::Numerical(format!("non-finite state after step from t = {t}")));
    }
    Ok(out)
}

/// Step size in s allowed by the CFL check at time t, starting from `ds`.
pub fn cfl_step(p: &Problem, t: f64, ds: f64, opts: &EvolveOptions) -> Result<(f64, usize)> {
    let lam = p.stiffness(t)?;
    let mut d = ds;
    let mut halvings = 0;
    while d * lam > 2.8 * opts.cfl_safety {
        d *= 0.5;
        halvings += 1;
        if d < opts.min_ds {
            return Err(Error::StepSize(format!(
                "CFL requires ds below {} at t = {t} (stiffness {lam})",
                opts.min_ds
            )));
        }
    }
    Ok((d, halvings))
}

/// Integrates backward from `initial.t` to `opts.t_min`.
pub fn evolve(
    p: &Problem,
    initial: &StateField,
    opts: &EvolveOptions,
    mut observer: Option<&mut dyn StepObserver>,
) -> Result<EvolveResult> {
    if !(opts.t_min > 0.0 && opts.t_min < initial.t) {
        return Err(Error::Config(format!("need 0 < t_min < t0, got t_min = {} and t0 = {}", opts.t_min, initial.t)));
    }
    if !(opts.ds > 0.0) {
        return Err(Error::Config(format!("ds = {} must be positive", opts.ds)));
    }
    if initial.data.len() != p.grid.n_points() * p.stride() {
        return Err(Error::Config("state does not match the grid".into()));
    }
    let s_min = opts.t_min.ln();
    let mut targets: Vec<f64> = opts
        .snapshot_times
        .iter()
        .copied()
        .filter(|&t| t >= opts.t_min && t <= initial.t)
        .map(f64::ln)
        .collect();
    targets.sort_by(|a, b| b.partial_cmp(a).unwrap());
    targets.dedup();
    let mut next_target = 0;
    let mut state = initial.clone();
    let mut res = EvolveResult {
        status: RunStatus::Completed,
        last: initial.clone(),
        snapshots: Vec::new(),
        stored: Vec::new(),
        tail: Vec::new(),
        steps: 0,
        halvings: 0,
    };
    let push = |res: &mut EvolveResult, st: &StateField, step: usize| {
        if opts.store_every > 0 && step % opts.store_every == 0 {
            res.stored.push(st.clone());
        }
        if opts.keep_tail > 0 {
            if res.tail.len() == opts.keep_tail {
                res.tail.remove(0);
            }
            res.tail.push(st.clone());
        }
    };
    while next_target < targets.len() && (targets[next_target] - state.t.ln()).abs() < 1e-12 {
        res.snapshots.push(state.clone());
        next_target += 1;
    }
    push(&mut res, &state, 0);
    if let Some(o) = observer.as_deref_mut() {
        o.observe(&state)?;
    }
    let tiny = 1e-12;
    loop {
        let s = state.t.ln();
        if s <= s_min + tiny {
            break;
        }
        let (mut d, h) = cfl_step(p, state.t, opts.ds, opts)?;
        res.halvings += h;
        let stop = if next_target < targets.len() { targets[next_target].max(s_min) } else { s_min };
        let mut hit = false;
        if s - d <= stop + tiny {
            d = s - stop;
            hit = true;
        }
        let new = rk4_step(p, state.t, &state.data, -d)?;
        let t_new = if hit { stop.exp() } else { (s - d).exp() };
        state = StateField { t: t_new, n_unknowns: state.n_unknowns, n_points: state.n_points, data: new };
        res.steps += 1;
        while next_target < targets.len() && targets[next_target] >= t_new.ln() - tiny {
            res.snapshots.push(state.clone());
            next_target += 1;
        }
        let n_steps = res.steps;
        push(&mut res, &state, n_steps);
        if let Some(o) = observer.as_deref_mut() {
            o.observe(&state)?;
        }
        if state.max_abs() > opts.blowup_threshold {
            res.status = RunStatus::BlowUp { t: state.t };
            break;
        }
    }
    res.last = state;
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::CartesianCoeffs;
    use crate::evolution::grid::Grid;
    use crate::linalg::V5;
    use crate::symmetrizer::{ChiParams, Transcription};

    fn chi() -> ChiParams {
        ChiParams { rho0: 0.9955, rho1: 0.9985, alpha: 0.0005 }
    }

    fn pulse(g: &Grid) -> StateField {
        let mut s = StateField::zeros(g, 1, 0.4);
        for i in 0..g.n_rho {
            let z = (g.rho(i) - 0.997) / 0.0004;
            let v = 1e-3 * (-z * z).exp();
            s.set(i, 0, &V5::new(v, 0.3 * v, 0.0, 0.0, v));
        }
        s
    }

    #[test]
    fn zero_data_stays_zero_and_lands_on_targets() {
        let g = Grid::spherical(&chi(), 32).unwrap();
        let p = Problem::new(g.clone(), 1, chi(), Transcription::Displayed, &CartesianCoeffs::zeros(1), 0.5).unwrap();
        let opts = EvolveOptions { t_min: 0.1, ds: 0.05, snapshot_times: vec![0.2, 0.4], ..Default::default() };
        let r = evolve(&p, &StateField::zeros(&g, 1, 0.4), &opts, None).unwrap();
        assert_eq!(r.status, RunStatus::Completed);
        assert!((r.last.t - 0.1).abs() < 1e-12 && r.last.max_abs() == 0.0);
        assert_eq!(r.snapshots.len(), 2);
        assert!((r.snapshots[1].t - 0.2).abs() < 1e-12);
    }

    #[test]
    fn observer_sees_every_step_and_tail_is_bounded() {
        let g = Grid::spherical(&chi(), 32).unwrap();
        let p = Problem::new(g.clone(), 1, chi(), Transcription::Displayed, &CartesianCoeffs::zeros(1), 0.5).unwrap();
        let opts = EvolveOptions { t_min: 0.2, ds: 0.05, keep_tail: 3, ..Default::default() };
        let mut count = 0usize;
        let mut obs = |_: &StateField| -> Result<()> {
            count += 1;
            Ok(())
        };
        let r = evolve(&p, &pulse(&g), &opts, Some(&mut obs)).unwrap();
        assert_eq!(count, r.steps + 1);
        assert_eq!(r.tail.len(), 3);
        assert!(r.last.is_finite());
    }

    #[test]
    fn cfl_halves_large_steps() {
        let g = Grid::spherical(&chi(), 256).unwrap();
        let p = Problem::new(g.clone(), 1, chi(), Transcription::Displayed, &CartesianCoeffs::zeros(1), 0.5).unwrap();
        let opts = EvolveOptions::default();
        let (d, h) = cfl_step(&p, 0.4, 0.1, &opts).unwrap();
        assert!(h > 0 && d * p.stiffness(0.4).unwrap() <= 2.8);
        let strict = EvolveOptions { min_ds: 0.05, ..Default::default() };
        assert!(matches!(cfl_step(&p, 0.4, 0.1, &strict), Err(Error::StepSize(_))));
    }

    #[test]
    fn rejects_bad_options() {
        let g = Grid::spherical(&chi(), 32).unwrap();
        let p = Problem::new(g.clone(), 1, chi(), Transcription::Displayed, &CartesianCoeffs::zeros(1), 0.5).unwrap();
        let s = StateField::zeros(&g, 1, 0.4);
        let bad = EvolveOptions { t_min: 0.5, ..Default::default() };
        assert!(matches!(evolve(&p, &s, &bad, None), Err(Error::Config(_))));
    }
}
