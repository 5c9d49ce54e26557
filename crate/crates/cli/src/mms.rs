//! Manufactured-solution refinement study.

use crate::config::Loaded;
use crate::error::{CliError, CliResult};
use crate::io;
use scri_core::evolution::mms::ConvergenceStudy;
use serde::Serialize;
use std::path::Path;

/// Minimum observed spatial order.
pub const MIN_ORDER: f64 = 1.8;

#[derive(Debug, Clone, Serialize)]
pub struct MmsRow {
    pub n_rho: usize,
    pub error: f64,
    /// Order against the previous level; empty on the coarsest.
    pub order: Option<f64>,
}

pub fn run(l: &Loaded, out: &Path) -> CliResult<Vec<MmsRow>> {
    if !l.is_spherical() {
        return Err(CliError::Config("mms runs in spherical mode".into()));
    }
    let levels = &l.cfg.mms.levels;
    if levels.len() < 2 || levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Config("[mms] levels must be at least two increasing resolutions".into()));
    }
    let mut study = ConvergenceStudy::standard(l.coefficients()?)?;
    study.transcription = l.transcription();
    study.ko_eps = l.cfg.solver.ko_eps;
    let rep = study.run(levels)?;
    let rows: Vec<MmsRow> = rep
        .levels
        .iter()
        .enumerate()
        .map(|(j, &(n_rho, error))| MmsRow { n_rho, error, order: j.checked_sub(1).map(|i| rep.orders[i]) })
        .collect();
    io::write_csv(&out.join("mms.csv"), &rows)?;
    for r in &rows {
        println!("n_rho {:>5} error {:.3e} order {}", r.n_rho, r.error, r.order.map_or("-".into(), |o| format!("{o:.3}")));
    }
    let order = rep.min_order();
    if order < MIN_ORDER {
        return Err(CliError::Assertion(format!("observed order {order} below {MIN_ORDER}")));
    }
    Ok(rows)
}
