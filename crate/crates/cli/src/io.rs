//! CSV and JSON artifacts of a run directory.

use crate::error::{CliError, CliResult};
use scri_core::diagnostics::EnergyRecord;
use scri_core::evolution::{Grid, StateField};
use scri_core::linalg::V5;
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use std::path::Path;

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

pub fn write_json<T: Serialize>(path: &Path, v: &T) -> CliResult<()> {
    std::fs::write(path, serde_json::to_string_pretty(v)? + "\n")?;
    Ok(())
}

/// One line of a state file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateRow {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub t: Option<f64>,
    pub rho: f64,
    pub theta: f64,
    pub phi: f64,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "V0")]
    pub v0: f64,
    #[serde(rename = "V1")]
    pub v1: f64,
    #[serde(rename = "Vth")]
    pub vth: f64,
    #[serde(rename = "Vph")]
    pub vph: f64,
    #[serde(rename = "V4")]
    pub v4: f64,
}

/// Rows ordered by ρ index, angle index, unknown.
pub fn state_rows(grid: &Grid, s: &StateField, with_t: bool) -> Vec<StateRow> {
    let mut out = Vec::with_capacity(s.n_points * s.n_unknowns);
    for i in 0..grid.n_rho {
        for a in 0..grid.n_angles() {
            let (theta, phi) = grid.angles(a);
            for k in 0..s.n_unknowns {
                let v = s.get(grid.point(i, a), k);
                out.push(StateRow {
                    t: with_t.then_some(s.t),
                    rho: grid.rho(i),
                    theta,
                    phi,
                    k,
                    v0: v[0],
                    v1: v[1],
                    vth: v[2],
                    vph: v[3],
                    v4: v[4],
                });
            }
        }
    }
    out
}

/// Inverse of [`state_rows`] on the same grid.
pub fn state_from_rows(grid: &Grid, n_unknowns: usize, rows: &[StateRow]) -> CliResult<StateField> {
    let t = rows.first().and_then(|r| r.t).ok_or_else(|| CliError::Config("state rows carry no time".into()))?;
    let mut s = StateField::zeros(grid, n_unknowns, t);
    if rows.len() != s.n_points * n_unknowns {
        return Err(CliError::Config(format!(
            "state has {} rows, grid needs {}",
            rows.len(),
            s.n_points * n_unknowns
        )));
    }
    let mut it = rows.iter();
    for i in 0..grid.n_rho {
        for a in 0..grid.n_angles() {
            for k in 0..n_unknowns {
                let r = it.next().unwrap();
                if r.k != k || (r.rho - grid.rho(i)).abs() > 1e-12 {
                    return Err(CliError::Config("state rows do not match the configured grid".into()));
                }
                s.set(grid.point(i, a), k, &V5::new(r.v0, r.v1, r.vth, r.vph, r.v4));
            }
        }
    }
    Ok(s)
}

/// Schema of energy.csv.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub t: f64,
    pub h_energy: f64,
    #[serde(rename = "Pi_energy")]
    pub pi_energy: f64,
    #[serde(rename = "PV_norm")]
    pub pv_norm: f64,
    #[serde(rename = "DV_norm")]
    pub dv_norm: f64,
}

impl From<&EnergyRecord> for EnergyRow {
    fn from(r: &EnergyRecord) -> Self {
        Self { t: r.t, h_energy: r.z_norm2, pi_energy: r.pi_integral, pv_norm: r.pv_h1, dv_norm: r.dv_h1 }
    }
}

/// Every field of an energy record, as stored in norms.csv.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormRow {
    pub t: f64,
    pub z_norm2: f64,
    pub pi_norm2: f64,
    pub pi_integral: f64,
    pub v0_sup: f64,
    pub pv_l2: f64,
    pub pv_h1: f64,
    pub dv_l2: f64,
    pub dv_h1: f64,
}

impl From<&EnergyRecord> for NormRow {
    fn from(r: &EnergyRecord) -> Self {
        Self {
            t: r.t,
            z_norm2: r.z_norm2,
            pi_norm2: r.pi_norm2,
            pi_integral: r.pi_integral,
            v0_sup: r.v0_sup,
            pv_l2: r.pv_l2,
            pv_h1: r.pv_h1,
            dv_l2: r.dv_l2,
            dv_h1: r.dv_h1,
        }
    }
}

impl From<&NormRow> for EnergyRecord {
    fn from(r: &NormRow) -> Self {
        Self {
            t: r.t,
            z_norm2: r.z_norm2,
            pi_norm2: r.pi_norm2,
            pi_integral: r.pi_integral,
            v0_sup: r.v0_sup,
            pv_l2: r.pv_l2,
            pv_h1: r.pv_h1,
            dv_l2: r.dv_l2,
            dv_h1: r.dv_h1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use scri_core::symmetrizer::ChiParams;

    #[test]
    fn state_rows_round_trip_bit_exactly() {
        let chi = ChiParams { rho0: 0.9955, rho1: 0.9985, alpha: 0.0005 };
        let g = Grid::full(&chi, 16, 5, 6).unwrap();
        let mut s = StateField::zeros(&g, 2, 0.123456789012345);
        for (j, x) in s.data.iter_mut().enumerate() {
            *x = (j as f64 * 0.7).sin() / 3.0;
        }
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        write_csv(&p, &state_rows(&g, &s, true)).unwrap();
        let back = state_from_rows(&g, 2, &read_csv::<StateRow>(&p).unwrap()).unwrap();
        assert_eq!(back, s);
    }
}
