//! Post-processing of an evolve run directory.

use crate::config::Loaded;
use crate::error::{CliError, CliResult};
use crate::evolve::RunSummary;
use crate::io::{self, NormRow, StateRow};
use scri_core::diagnostics::{decay_fit, energy_constant, DecayFit, Diagnostics, EnergyRecord, Exponents, ResidualNorms};
use scri_core::evolution::{Problem, StateField};
use std::fmt::Write as _;
use std::path::Path;

/// One line of summary.txt.
#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn fits_or_line(records: &[EnergyRecord], e: &Exponents, lines: &mut Vec<Line>) -> Vec<DecayFit> {
    match decay_fit(records, e) {
        Ok(f) => f,
        Err(err) => {
            lines.push(Line { name: "decay_fits".into(), pass: false, detail: err.to_string() });
            Vec::new()
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:?}"))
}

pub fn run(l: &Loaded, dir: &Path) -> CliResult<Vec<Line>> {
    let run: RunSummary = serde_json::from_str(&std::fs::read_to_string(dir.join("run.json"))?)?;
    let records: Vec<EnergyRecord> = io::read_csv::<NormRow>(&dir.join("norms.csv"))?.iter().map(EnergyRecord::from).collect();
    let c = l.constants()?;
    let exps = Exponents::from(&c);
    let mut lines = vec![Line {
        name: "run_completed".into(),
        pass: run.status == "completed" && run.monitor_error.is_none(),
        detail: format!("status {} at t = {:?}; monitor {}", run.status, run.t_final, run.monitor_error.as_deref().unwrap_or("ok")),
    }];

    let fits = fits_or_line(&records, &exps, &mut lines);
    for f in &fits {
        lines.push(Line {
            name: format!("decay_{}", f.name),
            pass: f.pass,
            detail: format!(
                "slope {} vs bound exponent {} (samples {})",
                f.slope.map_or("none (vanishing norm)".into(), |s| format!("{s:?}")),
                f.exponent,
                f.samples
            ),
        });
    }
    let ce = energy_constant(&records);
    lines.push(Line { name: "energy_constant".into(), pass: ce.is_finite(), detail: format!("C_E = {ce:?}") });

    let mut w = csv::Writer::from_path(dir.join("theorem_bounds.csv"))?;
    let mut header: Vec<String> = ["t", "h_energy", "Pi_energy", "V0_sup", "PV_Hk", "DV_Hk", "PV_Hk-1", "DV_Hk-1"].map(String::from).to_vec();
    header.extend(fits.iter().map(|f| format!("fit_{}", f.name)));
    w.write_record(&header)?;
    for r in &records {
        let mut rec: Vec<String> =
            [r.t, r.z_norm2, r.pi_integral, r.v0_sup, r.pv_h1, r.dv_h1, r.pv_l2, r.dv_l2].iter().map(|v| format!("{v:?}")).collect();
        rec.extend(fits.iter().map(|f| opt(f.slope)));
        w.write_record(&rec)?;
    }
    w.flush()?;

    if run.windows.len() == crate::evolve::WINDOW {
        let grid = l.grid()?;
        let window: Vec<StateField> = run
            .windows
            .iter()
            .map(|name| io::state_from_rows(&grid, run.n_unknowns, &io::read_csv::<StateRow>(&dir.join(name))?))
            .collect::<CliResult<_>>()?;
        let p = Problem::from_constants(grid, &c, &l.coefficients()?, l.cfg.solver.ko_eps)?;
        let res: ResidualNorms = Diagnostics::new(p, exps, c.t0).system_residuals(&window)?;
        io::write_csv(&dir.join("residuals.csv"), &[res_row(&res)])?;
        let finite = [res.difs, res.mwave_n, res.mwave_m].iter().all(|v| v.is_finite());
        lines.push(Line {
            name: "derived_system_residuals".into(),
            pass: finite,
            detail: format!("t = {:?} difs {:?} mwave_n {:?} mwave_m {:?}", res.t, res.difs, res.mwave_n, res.mwave_m),
        });
    }

    let mut text = String::new();
    for ln in &lines {
        writeln!(text, "{} {} {}", if ln.pass { "PASS" } else { "FAIL" }, ln.name, ln.detail).unwrap();
    }
    std::fs::write(dir.join("summary.txt"), &text)?;
    print!("{text}");
    let failed: Vec<&str> = lines.iter().filter(|x| !x.pass).map(|x| x.name.as_str()).collect();
    if failed.is_empty() {
        Ok(lines)
    } else {
        Err(CliError::Assertion(format!("report checks failed: {}", failed.join(", "))))
    }
}

#[derive(serde::Serialize)]
struct ResidualRow {
    t: f64,
    difs: f64,
    mwave_n: f64,
    mwave_m: f64,
}

fn res_row(r: &ResidualNorms) -> ResidualRow {
    ResidualRow { t: r.t, difs: r.difs, mwave_n: r.mwave_n, mwave_m: r.mwave_m }
}
