//! Discretization of the slab 𝓢 = T¹_α × S² and the state field on it.

use crate::error::{Error, Result};
use crate::linalg::V5;
use crate::symmetrizer::ChiParams;
use std::f64::consts::{FRAC_PI_2, PI};

/// Smallest polar angle kept away from the poles in full mode.
pub const THETA_MIN: f64 = 1e-3;

/// Angular treatment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GridMode {
    /// All angular derivatives vanish; coefficients use a representative direction.
    #[default]
    Spherical,
    /// Equiangular (θ, φ) grid on [θ_min, π−θ_min] × [0, 2π).
    Full,
}

/// Periodic grid in the torus coordinate ρ, optionally times a sphere grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub mode: GridMode,
    pub n_rho: usize,
    pub rho_lo: f64,
    pub rho_hi: f64,
    /// Spacing in ρ.
    pub h: f64,
    pub n_theta: usize,
    pub n_phi: usize,
    /// Direction used in spherical mode.
    pub rep_angles: (f64, f64),
}

impl Grid {
    /// Spherical-mode grid on the torus range of χ.
    pub fn spherical(chi: &ChiParams, n_rho: usize) -> Result<Self> {
        Self::new(GridMode::Spherical, chi, n_rho, 1, 1)
    }

    /// Full-mode grid.
    pub fn full(chi: &ChiParams, n_rho: usize, n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta < 5 || n_phi < 5 {
            return Err(Error::Config("full mode needs at least 5 points per angle".into()));
        }
        Self::new(GridMode::Full, chi, n_rho, n_theta, n_phi)
    }

    fn new(mode: GridMode, chi: &ChiParams, n_rho: usize, n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_rho < 16 {
            return Err(Error::Config(format!("n_rho = {n_rho} must be at least 16")));
        }
        let (lo, hi) = chi.torus();
        Ok(Self {
            mode,
            n_rho,
            rho_lo: lo,
            rho_hi: hi,
            h: (hi - lo) / n_rho as f64,
            n_theta,
            n_phi,
            rep_angles: (FRAC_PI_2, 0.0),
        })
    }

    pub fn rho(&self, i: usize) -> f64 {
        self.rho_lo + self.h * i as f64
    }

    pub fn rhos(&self) -> Vec<f64> {
        (0..self.n_rho).map(|i| self.rho(i)).collect()
    }

    pub fn n_angles(&self) -> usize {
        self.n_theta * self.n_phi
    }

    pub fn n_points(&self) -> usize {
        self.n_rho * self.n_angles()
    }

    pub fn d_theta(&self) -> f64 {
        (PI - 2.0 * THETA_MIN) / (self.n_theta - 1).max(1) as f64
    }

    pub fn d_phi(&self) -> f64 {
        2.0 * PI / self.n_phi as f64
    }

    /// (θ, φ) of angular index a = j·n_phi + k.
    pub fn angles(&self, a: usize) -> (f64, f64) {
        match self.mode {
            GridMode::Spherical => self.rep_angles,
            GridMode::Full => {
                let (j, k) = (a / self.n_phi, a % self.n_phi);
                (THETA_MIN + self.d_theta() * j as f64, self.d_phi() * k as f64)
            }
        }
    }

    /// Point index of (ρ index, angular index).
    pub fn point(&self, i: usize, a: usize) -> usize {
        i * self.n_angles() + a
    }

    /// Volume weight of angular index a for quadrature (sin θ dθ dφ; 4π in spherical mode).
    pub fn angular_weight(&self, a: usize) -> f64 {
        match self.mode {
            GridMode::Spherical => 4.0 * PI,
            GridMode::Full => {
                let (th, _) = self.angles(a);
                let j = a / self.n_phi;
                let end = if j == 0 || j + 1 == self.n_theta { 0.5 } else { 1.0 };
                end * th.sin() * self.d_theta() * self.d_phi()
            }
        }
    }
}

/// V^K_𝓘 at every grid point, plus the current time.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField {
    pub t: f64,
    pub n_unknowns: usize,
    pub n_points: usize,
    /// Layout ((point · N + K) · 5 + 𝓘).
    pub data: Vec<f64>,
}

impl StateField {
    pub fn zeros(grid: &Grid, n_unknowns: usize, t: f64) -> Self {
        let n_points = grid.n_points();
        Self { t, n_unknowns, n_points, data: vec![0.0; n_points * n_unknowns * 5] }
    }

    pub fn index(&self, p: usize, k: usize, comp: usize) -> usize {
        (p * self.n_unknowns + k) * 5 + comp
    }

    pub fn get(&self, p: usize, k: usize) -> V5 {
        let s = self.index(p, k, 0);
        V5::from_column_slice(&self.data[s..s + 5])
    }

    pub fn set(&mut self, p: usize, k: usize, v: &V5) {
        let s = self.index(p, k, 0);
        self.data[s..s + 5].copy_from_slice(v.as_slice());
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// self + a·other, elementwise.
    pub fn axpy(&self, a: f64, other: &[f64]) -> Vec<f64> {
        self.data.iter().zip(other).map(|(x, y)| x + a * y).collect()
    }
}
