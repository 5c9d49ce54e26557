//! Asymptotic flow scenarios at one spatial point.

use crate::config::Loaded;
use crate::error::{CliError, CliResult};
use crate::io;
use scri_core::asymptotic_flow::{classify_bounded, integrate_flow, sphere_samples, FlowMode, FlowOptions, FlowParams, Verdict};
use scri_core::coefficients::null_form_at;
use scri_core::symmetrizer::cutoff;
use serde::Serialize;
use std::f64::consts::FRAC_PI_2;
use std::path::Path;

/// Tolerance on |D𝓕 (D𝓕)⁻¹ − I| along every trajectory.
pub const INVERSE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct FlowVerdict {
    pub verdict: String,
    pub t_star: Option<f64>,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "R0")]
    pub r0: Option<f64>,
    pub growth_slope: f64,
    pub per_radius: Vec<(f64, f64)>,
    pub inverse_defect: f64,
    /// sup t^ε|D𝓕| and sup t^ε|D𝓕⁻¹| with ε from the run constants.
    pub scaled_jacobian_bounds: (f64, f64),
    pub seed: u64,
}

fn verdict_name(v: &Verdict) -> (String, Option<f64>) {
    match v {
        Verdict::Bounded => ("bounded".into(), None),
        Verdict::Blowup { t_star } => ("blowup".into(), Some(*t_star)),
        Verdict::Inconclusive => ("inconclusive".into(), None),
    }
}

pub fn run(l: &Loaded, out: &Path) -> CliResult<FlowVerdict> {
    let c = l.constants()?;
    let coeffs = l.coefficients()?;
    let f = &l.cfg.flow;
    let (lo, hi) = c.chi.torus();
    if !(f.rho > lo && f.rho < hi) {
        return Err(CliError::Config(format!("[flow] rho = {} must lie in ({lo}, {hi})", f.rho)));
    }
    if f.samples == 0 || !(f.t_min > 0.0 && f.t_min < c.t0) {
        return Err(CliError::Config("[flow] needs samples >= 1 and 0 < t_min < t0".into()));
    }
    let params = FlowParams {
        b: null_form_at(&coeffs, FRAC_PI_2, 0.0),
        rho: f.rho,
        m: c.m,
        chi: cutoff(f.rho, &c.chi).0,
        t0: c.t0,
        mode: FlowMode::Exact,
    };
    let opts = FlowOptions::default();
    let report = classify_bounded(&params, f.radius, f.samples, f.t_min, f.positive_cone, l.seed(), &opts)?;

    let n = params.n_unknowns();
    let mut w = csv::Writer::from_path(out.join("flow_trajectories.csv"))?;
    let mut header = vec!["traj".to_string(), "t".to_string()];
    header.extend((0..n).map(|k| format!("xi_{k}")));
    header.extend(["xi_norm".to_string(), "jac_norm".to_string()]);
    w.write_record(&header)?;
    let (mut defect, mut bounds) = (0.0f64, (0.0f64, 0.0f64));
    for (traj, xi0) in sphere_samples(n, f.radius, f.samples, f.positive_cone, l.seed()).iter().enumerate() {
        let tr = integrate_flow(&params, xi0, f.t_min, &opts)?;
        defect = defect.max(tr.inverse_defect());
        let (b1, b2) = tr.scaled_jacobian_bounds(c.epsilon);
        bounds = (bounds.0.max(b1), bounds.1.max(b2));
        for (j, (t, xi)) in tr.times.iter().zip(&tr.xi).enumerate() {
            let mut rec = vec![traj.to_string(), format!("{t:?}")];
            rec.extend(xi.iter().map(|v| format!("{v:?}")));
            rec.push(format!("{:?}", xi.iter().map(|v| v * v).sum::<f64>().sqrt()));
            rec.push(format!("{:?}", tr.jac.get(j).map_or(f64::NAN, |m| m.norm())));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    let (verdict, t_star) = verdict_name(&report.bounded);
    let v = FlowVerdict {
        verdict,
        t_star,
        c: report.c_estimate,
        r0: report.r0_estimate,
        growth_slope: report.growth_slope,
        per_radius: report.per_radius.clone(),
        inverse_defect: defect,
        scaled_jacobian_bounds: bounds,
        seed: l.seed(),
    };
    io::write_json(&out.join("flow_verdict.json"), &v)?;
    println!("verdict {} C {} R0 {:?} inverse defect {:.3e}", v.verdict, v.c, v.r0, defect);
    if defect > INVERSE_TOL {
        return Err(CliError::Assertion(format!("flow Jacobian inverse defect {defect:e} exceeds {INVERSE_TOL:e}")));
    }
    Ok(v)
}
