//! Initial data, evolution toward t → 0 and energy monitoring.

use crate::config::Loaded;
use crate::error::{CliError, CliResult};
use crate::io::{self, EnergyRow, NormRow};
use scri_core::diagnostics::{energy_constant, Diagnostics, EnergyMonitor, EnergyRecord, Exponents};
use scri_core::evolution::stepper::cfl_step;
use scri_core::evolution::{evolve, EvolveOptions, Problem, RunStatus, StateField, StepObserver};
use scri_core::initial_data::{constraint_residual, extend_to_torus, first_order_field};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// States kept at the end of a run for the derived-system residuals.
pub const WINDOW: usize = 5;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub command: String,
    pub seed: u64,
    pub status: String,
    pub blowup_t: Option<f64>,
    pub t0: f64,
    pub t_final: f64,
    pub steps: usize,
    pub halvings: usize,
    pub n_unknowns: usize,
    pub energy_constant: f64,
    pub constraint_residual: [f64; 4],
    pub snapshots: Vec<String>,
    pub windows: Vec<String>,
    /// First failure of the energy monitor, if any.
    #[serde(default)]
    pub monitor_error: Option<String>,
}

/// Keeps the first monitor failure so the run and its artifacts complete.
struct Guarded<'a> {
    inner: EnergyMonitor<'a>,
    error: Option<scri_core::Error>,
}

impl StepObserver for Guarded<'_> {
    fn observe(&mut self, state: &StateField) -> scri_core::Result<()> {
        if self.error.is_none() {
            self.error = self.inner.observe(state).err();
        }
        Ok(())
    }
}

fn write_state(p: &Problem, out: &Path, s: &StateField, names: &mut Vec<String>) -> CliResult<()> {
    let name = format!("state_t={}.csv", s.t);
    io::write_csv(&out.join(&name), &io::state_rows(&p.grid, s, false))?;
    names.push(name);
    Ok(())
}

/// Times t_min·e^{k·d}, k = 1..4, that force the final four steps to a common size d
/// allowed by the CFL check at all five window times.
fn window_times(p: &Problem, opts: &EvolveOptions) -> CliResult<Vec<f64>> {
    let s_min = opts.t_min.ln();
    let (d0, _) = cfl_step(p, opts.t_min, opts.ds, opts)?;
    let mut d = d0;
    for k in 1..WINDOW {
        d = d.min(cfl_step(p, (s_min + k as f64 * d0).exp(), opts.ds, opts)?.0);
    }
    Ok((1..WINDOW).map(|k| (s_min + k as f64 * d).exp()).collect())
}

pub fn run(l: &Loaded, out: &Path) -> CliResult<RunSummary> {
    let c = l.constants()?;
    let coeffs = l.coefficients()?;
    let data = l.data()?;
    let grid = l.grid()?;
    let vhat = first_order_field(&data, &grid, c.m, &c.chi, c.t0, l.transform())?;
    let cr = constraint_residual(&vhat, &grid, c.m, &c.chi, c.t0)?;
    let init = extend_to_torus(&vhat, &grid, &c.chi);
    let p = Problem::from_constants(grid, &c, &coeffs, l.cfg.solver.ko_eps)?;
    let diag = Diagnostics::new(p.clone(), Exponents::from(&c), c.t0);
    let keep = if l.is_spherical() { WINDOW } else { 0 };
    let mut opts = l.evolve_options(keep);
    if !(opts.t_min > 0.0 && opts.t_min < c.t0) {
        return Err(CliError::Config(format!("t_min = {} must lie in (0, t0 = {})", opts.t_min, c.t0)));
    }
    let user_times = opts.snapshot_times.clone();
    if keep > 0 {
        opts.snapshot_times.extend(window_times(&p, &opts)?);
    }
    let mut mon = Guarded { inner: EnergyMonitor::new(&diag, l.cfg.solver.energy_every.max(1)), error: None };
    let run = evolve(&p, &init, &opts, Some(&mut mon))?;
    if mon.error.is_none() {
        mon.error = mon.inner.finish(&run.last).err();
    }
    let records: Vec<EnergyRecord> = mon.inner.records.clone();

    let mut snapshots = Vec::new();
    write_state(&p, out, &init, &mut snapshots)?;
    for s in run.snapshots.iter().filter(|s| user_times.iter().any(|&u| (u.ln() - s.t.ln()).abs() < 1e-12)) {
        write_state(&p, out, s, &mut snapshots)?;
    }
    if !snapshots.contains(&format!("state_t={}.csv", run.last.t)) {
        write_state(&p, out, &run.last, &mut snapshots)?;
    }
    let mut windows = Vec::new();
    for (k, s) in run.tail.iter().enumerate() {
        let name = format!("window_{k}.csv");
        io::write_csv(&out.join(&name), &io::state_rows(&p.grid, s, true))?;
        windows.push(name);
    }
    io::write_csv(&out.join("energy.csv"), &records.iter().map(EnergyRow::from).collect::<Vec<_>>())?;
    io::write_csv(&out.join("norms.csv"), &records.iter().map(NormRow::from).collect::<Vec<_>>())?;

    let (status, blowup_t) = match run.status {
        RunStatus::Completed => ("completed".to_string(), None),
        RunStatus::BlowUp { t } => ("blowup".to_string(), Some(t)),
    };
    let summary = RunSummary {
        command: "evolve".into(),
        seed: l.seed(),
        status,
        blowup_t,
        t0: c.t0,
        t_final: run.last.t,
        steps: run.steps,
        halvings: run.halvings,
        n_unknowns: p.n_unknowns,
        energy_constant: energy_constant(&records),
        constraint_residual: [cr.res1, cr.res2, cr.res1_displayed, cr.res2_displayed],
        snapshots,
        windows,
        monitor_error: mon.error.as_ref().map(|e| e.to_string()),
    };
    io::write_json(&out.join("run.json"), &summary)?;
    println!(
        "{} at t = {} after {} steps; C_E = {}",
        summary.status, summary.t_final, summary.steps, summary.energy_constant
    );
    if let Some(t) = blowup_t {
        return Err(CliError::Numerical(format!("solution blew up at t = {t}")));
    }
    if let Some(e) = mon.error {
        return Err(CliError::Numerical(format!("energy monitor stopped at t = {}: {e}", records.last().map_or(c.t0, |r| r.t))));
    }
    Ok(summary)
}
