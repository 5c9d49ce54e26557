//! Semi-discrete right-hand side of the cutoff-extended first-order system in
//! s = ln t:
//!
//! ∂ₛV = −χ(1−ρ^m)(ρ/m)B¹∂ρV − √t B^Λ∇_ΛV + B̃ℙV + √t C̃V + t𝓕 + forcing − KO.

use super::fd;
use super::grid::{Grid, GridMode};
use super::source::{self, SourceContext};
use crate::coefficients::CartesianCoeffs;
use crate::error::{Error, Result};
use crate::geometry;
use crate::linalg::{spectral_norm, V5};
use crate::symmetrizer::{self, ChiParams, ExtendedMatrices, RunConstants, Transcription};
use std::sync::Arc;

/// Additive forcing of ∂ₛV at (t, ρ index, angular index), per unknown.
pub type Forcing = Arc<dyn Fn(f64, usize, usize) -> Result<Vec<V5>> + Send + Sync>;

/// Everything the right-hand side needs.
#[derive(Clone)]
pub struct Problem {
    pub grid: Grid,
    pub m: u32,
    pub chi: ChiParams,
    pub transcription: Transcription,
    pub n_unknowns: usize,
    pub source: SourceContext,
    /// Kreiss–Oliger strength.
    pub ko_eps: f64,
    pub forcing: Option<Forcing>,
    /// max (1−ρ^m)ρ/m over the torus.
    pub cmax: f64,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("grid", &self.grid)
            .field("m", &self.m)
            .field("chi", &self.chi)
            .field("transcription", &self.transcription)
            .field("n_unknowns", &self.n_unknowns)
            .field("ko_eps", &self.ko_eps)
            .field("forced", &self.forcing.is_some())
            .finish()
    }
}

impl Problem {
    pub fn new(
        grid: Grid,
        m: u32,
        chi: ChiParams,
        transcription: Transcription,
        coeffs: &CartesianCoeffs,
        ko_eps: f64,
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::Config("m must be at least 1".into()));
        }
        if !(ko_eps >= 0.0) {
            return Err(Error::Config(format!("ko_eps = {ko_eps} must be non-negative")));
        }
        let angles: Vec<(f64, f64)> = (0..grid.n_angles()).map(|a| grid.angles(a)).collect();
        let source = SourceContext::new(coeffs, &angles, transcription)?;
        let cmax = grid
            .rhos()
            .iter()
            .map(|&rho| (1.0 - geometry::rho_to_r(rho, m)) * rho / m as f64)
            .fold(0.0, f64::max);
        Ok(Self { grid, m, chi, transcription, n_unknowns: coeffs.n_unknowns(), source, ko_eps, forcing: None, cmax })
    }

    /// Problem using the run's m, χ and transcription.
    pub fn from_constants(grid: Grid, c: &RunConstants, coeffs: &CartesianCoeffs, ko_eps: f64) -> Result<Self> {
        Self::new(grid, c.m, c.chi, c.transcription, coeffs, ko_eps)
    }

    pub fn with_forcing(mut self, f: Forcing) -> Self {
        self.forcing = Some(f);
        self
    }

    /// Extended blocks at grid point (i, a).
    pub fn matrices(&self, t: f64, i: usize, a: usize) -> Result<ExtendedMatrices> {
        let (th, _) = self.grid.angles(a);
        symmetrizer::extend(t, self.grid.rho(i), th, self.m, &self.chi, self.transcription)
    }

    /// Values per point.
    pub fn stride(&self) -> usize {
        5 * self.n_unknowns
    }

    /// Coefficient of the dissipation term: ε·cmax/(64h).
    pub fn ko_coefficient(&self) -> f64 {
        self.ko_eps * self.cmax / (64.0 * self.grid.h)
    }

    /// Largest RK4 stability product |ds|·λ at time t, normalized so that
    /// stability requires a value below about 2.8.
    pub fn stiffness(&self, t: f64) -> Result<f64> {
        let g = &self.grid;
        let b1n = spectral_norm(&symmetrizer::b1(t));
        let mut adv: f64 = 0.0;
        let mut ang: f64 = 0.0;
        for i in 0..g.n_rho {
            for a in 0..g.n_angles() {
                let e = self.matrices(t, i, a)?;
                adv = adv.max(e.adv.abs() * b1n);
                if g.mode == GridMode::Full {
                    let (th, _) = g.angles(a);
                    let s = th.sin();
                    let k = spectral_norm(&e.b_lam[0]) / g.d_theta() + spectral_norm(&e.b_lam[1]) * s / g.d_phi();
                    ang = ang.max(t.sqrt() * k);
                }
            }
        }
        Ok(1.372 * adv / g.h + 1.372 * ang + self.ko_eps * self.cmax / g.h)
    }
}

/// ∂ₛV at time t for the field `data`.
pub fn rhs(p: &Problem, t: f64, data: &[f64]) -> Result<Vec<f64>> {
    let g = &p.grid;
    let n = p.n_unknowns;
    let stride = p.stride();
    let na = g.n_angles();
    let drho = fd::d_rho(data, g, stride);
    let ko = if p.ko_eps > 0.0 { Some(fd::ko6(data, g, stride)) } else { None };
    let kc = p.ko_coefficient();
    let st = t.sqrt();
    let full = g.mode == GridMode::Full;
    let mut out = vec![0.0; data.len()];
    let mut v = vec![V5::zeros(); n];
    for i in 0..g.n_rho {
        let rho = g.rho(i);
        for a in 0..na {
            let e = p.matrices(t, i, a)?;
            let pt = g.point(i, a);
            let base = pt * stride;
            for (k, vk) in v.iter_mut().enumerate() {
                *vk = V5::from_column_slice(&data[base + 5 * k..base + 5 * k + 5]);
            }
            let src = if e.chi > 0.0 {
                source::extended_source(&p.source, a, &v, t, rho, p.m, e.chi)?
            } else {
                vec![V5::zeros(); n]
            };
            let forcing = match &p.forcing {
                Some(f) => Some(f(t, i, a)?),
                None => None,
            };
            let (th, _) = g.angles(a);
            let sc = th.sin() * th.cos();
            for k in 0..n {
                let o = base + 5 * k;
                let dv = V5::from_column_slice(&drho[o..o + 5]);
                let mut r = -(e.b1 * dv) * e.adv + e.btilde * (e.p * v[k]) + e.ctilde * v[k] * st + src[k] * t;
                if full && e.chi > 0.0 {
                    let mut dth = V5::zeros();
                    let mut dph = V5::zeros();
                    for c in 0..5 {
                        let [a0, a1] = fd::d_angles_at(data, g, stride, 5 * k + c, i, a);
                        dth[c] = a0;
                        dph[c] = a1;
                    }
                    let mut ang = e.b_lam[0] * dth + e.b_lam[1] * dph;
                    for row in 0..2 {
                        ang[row] += e.b_lam[1][(row, 3)] * sc * v[k][2];
                    }
                    r -= ang * st;
                }
                if let Some(f) = &forcing {
                    r += f[k];
                }
                if let Some(ko) = &ko {
                    r -= V5::from_column_slice(&ko[o..o + 5]) * kc;
                }
                out[o..o + 5].copy_from_slice(r.as_slice());
            }
        }
    }
    if !out.iter().all(|x| x.is_finite()) {
        return Err(Error::Numerical(format!("non-finite right-hand side at t = {t}")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::grid::StateField;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn chi() -> ChiParams {
        ChiParams { rho0: 0.9955, rho1: 0.9985, alpha: 0.0005 }
    }

    #[test]
    fn zero_state_has_zero_rhs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = CartesianCoeffs::random(2, 1.0, &mut rng);
        let g = Grid::spherical(&chi(), 32).unwrap();
        let p = Problem::new(g.clone(), 1, chi(), Transcription::Displayed, &a, 0.5).unwrap();
        let s = StateField::zeros(&g, 2, 0.3);
        assert!(rhs(&p, 0.3, &s.data).unwrap().iter().all(|x| *x == 0.0));
    }

    /// A spatially constant state reduces the system to a pointwise ODE.
    #[test]
    fn constant_state_matches_pointwise_ode() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = CartesianCoeffs::random(1, 1.0, &mut rng);
        let g = Grid::spherical(&chi(), 32).unwrap();
        let p = Problem::new(g.clone(), 1, chi(), Transcription::ChainConsistent, &a, 0.5).unwrap();
        let v = V5::from_fn(|_, _| rng.gen_range(-0.1..0.1));
        let mut s = StateField::zeros(&g, 1, 0.2);
        for pt in 0..g.n_points() {
            s.set(pt, 0, &v);
        }
        let t = 0.2;
        let out = rhs(&p, t, &s.data).unwrap();
        for i in 0..g.n_rho {
            let rho = g.rho(i);
            let (c, _) = symmetrizer::cutoff(rho, &chi());
            let r = rho;
            let (bs, cs) = symmetrizer::starred(t, Transcription::ChainConsistent);
            let bt = bs + (symmetrizer::bcal(t, r).unwrap() - bs) * c;
            let ct = cs + (symmetrizer::ccal(t, r, Transcription::ChainConsistent).unwrap() - cs) * c;
            let mut want = bt * (symmetrizer::projection() * v) + ct * v * t.sqrt();
            if c > 0.0 {
                let ac = crate::coefficients::compact_components(
                    &a,
                    &crate::geometry::CompactPoint::equatorial(t, r),
                )
                .unwrap();
                want += source::source_big_f(&[v], t, r, &ac, Transcription::ChainConsistent).unwrap()[0] * (c * t);
            }
            let got = V5::from_column_slice(&out[5 * i..5 * i + 5]);
            assert!((got - want).amax() < 1e-10 * (1.0 + want.amax()), "i={i}");
        }
    }

    #[test]
    fn full_mode_reduces_to_spherical_for_radial_linear_data() {
        let a = CartesianCoeffs::zeros(1);
        let gs = Grid::spherical(&chi(), 32).unwrap();
        let gf = Grid::full(&chi(), 32, 9, 8).unwrap();
        let ps = Problem::new(gs.clone(), 1, chi(), Transcription::Displayed, &a, 0.5).unwrap();
        let pf = Problem::new(gf.clone(), 1, chi(), Transcription::Displayed, &a, 0.5).unwrap();
        let f = |rho: f64| {
            let z = (rho - 0.997) / 0.0008;
            let gz = (-z * z).exp();
            V5::new(gz, 0.5 * gz, 0.0, 0.0, -gz)
        };
        let mut ss = StateField::zeros(&gs, 1, 0.3);
        let mut sf = StateField::zeros(&gf, 1, 0.3);
        for i in 0..32 {
            ss.set(gs.point(i, 0), 0, &f(gs.rho(i)));
            for a in 0..gf.n_angles() {
                sf.set(gf.point(i, a), 0, &f(gf.rho(i)));
            }
        }
        let rs = rhs(&ps, 0.3, &ss.data).unwrap();
        let rf = rhs(&pf, 0.3, &sf.data).unwrap();
        let eq = 4 * gf.n_phi;
        assert!((gf.angles(eq).0 - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        for i in 0..32 {
            for c in 0..5 {
                let x = rs[5 * i + c];
                let y = rf[5 * gf.point(i, eq) + c];
                assert!((x - y).abs() < 1e-12 * (1.0 + x.abs()), "i={i} c={c}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn dissipation_damps_grid_mode_backward() {
        let a = CartesianCoeffs::zeros(1);
        let g = Grid::spherical(&chi(), 32).unwrap();
        let p = Problem::new(g.clone(), 1, chi(), Transcription::Displayed, &a, 0.5).unwrap();
        let mut s = StateField::zeros(&g, 1, 0.3);
        for i in 0..32 {
            let sgn = if i % 2 == 0 { 1.0 } else { -1.0 };
            s.set(i, 0, &V5::new(0.0, 0.0, 0.0, 0.0, sgn));
        }
        let out = rhs(&p, 0.3, &s.data).unwrap();
        let kc = p.ko_coefficient();
        for i in 0..32 {
            let sgn = if i % 2 == 0 { 1.0 } else { -1.0 };
            let e = p.matrices(0.3, i, 0).unwrap();
            let want = 0.5 * sgn + 64.0 * kc * sgn;
            assert!((out[5 * i + 4] - want).abs() < 1e-9 * want.abs(), "{} {}", out[5 * i + 4], want);
            assert!(e.btilde[(4, 4)] == 0.5);
        }
    }
}
