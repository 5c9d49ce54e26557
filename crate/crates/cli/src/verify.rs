//! Identity suite over geometry, coefficients and the symmetrized system.

use crate::config::Loaded;
use crate::error::{CliError, CliResult};
use crate::io;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scri_core::coefficients::{barred_components, compact_components, null_form, pushforward_oracle, CartesianCoeffs};
use scri_core::diagnostics::{coercivity, fuchsian_blocks, projected_leading_remainder, Z_DIM};
use scri_core::evolution::{Grid, Problem};
use scri_core::geometry::{self, CompactPoint, PhysicalPoint};
use scri_core::linalg::{self, M4, M5};
use scri_core::symmetrizer::{self, RunConstants, TimeFunctions, BETA0};
use serde::Serialize;
use std::path::Path;

/// Random samples per check.
pub const SAMPLES: usize = 200;

#[derive(Debug, Clone, Serialize)]
pub struct IdentityRow {
    pub check_name: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Default)]
struct Table(Vec<IdentityRow>);

impl Table {
    fn push(&mut self, name: &str, residual: f64, tolerance: f64) {
        let pass = residual <= tolerance;
        self.0.push(IdentityRow { check_name: name.into(), max_residual: residual, tolerance, pass });
    }
}

/// (t, r) in the compact region with the parabola gap bounded away from zero.
fn compact_sample(rng: &mut ChaCha8Rng, t0: f64) -> (f64, f64) {
    let t = 10f64.powf(rng.gen_range(-6.0..t0.log10()));
    let st = t.sqrt();
    let r_min = (1.05 * st / (1.0 + 1.05 * st)).max(0.01);
    (t, rng.gen_range(r_min..0.999))
}

fn angles(rng: &mut ChaCha8Rng) -> (f64, f64) {
    (rng.gen_range(0.2..2.9), rng.gen_range(0.0..std::f64::consts::TAU))
}

fn geometry_checks(tab: &mut Table, rng: &mut ChaCha8Rng, t0: f64) -> CliResult<()> {
    let mut e = [0.0f64; 10];
    for _ in 0..SAMPLES {
        let (t, r) = compact_sample(rng, t0);
        let (th, ph) = angles(rng);
        let m = symmetrizer::change_of_variables(t, r)?;
        let mi = symmetrizer::change_of_variables_inv(t, r)?;
        e[0] = e[0].max(linalg::max_abs(&(m * mi - M5::identity())));
        let tf = TimeFunctions::new(t);
        let (a, b) = tf.symmetrization_residuals();
        e[1] = e[1].max(a).max(b);
        e[2] = e[2].max((tf.a0 + tf.a1 * BETA0).abs());
        let c = CompactPoint::new(t, r, th, ph);
        let g = geometry::metric_sample(&c)?;
        e[3] = e[3].max(linalg::max_abs(&(g.g_dd * g.g_uu - M4::identity())) / linalg::max_abs(&g.g_dd).max(1.0));

        // ψ∘ψ⁻¹ loses digits in t̄ − r̄; scale by the cancellation factor.
        let p = geometry::map_inverse(&c)?;
        let back = geometry::map_forward(&p)?;
        let cancel = (p.tbar + p.rbar) / (p.tbar - p.rbar);
        e[4] = e[4].max(((back.t - t) / t).abs() / cancel).max((back.r - r).abs() / cancel);
        let tb = 10f64.powf(rng.gen_range(0.0..3.0));
        let p2 = PhysicalPoint::new(tb, tb * rng.gen_range(0.0..0.99), th, ph);
        let c2 = geometry::map_inverse(&geometry::map_forward(&p2)?)?;
        e[5] = e[5].max(((c2.tbar - p2.tbar) / p2.tbar).abs()).max(((c2.rbar - p2.rbar) / p2.tbar).abs());

        let j = geometry::jacobian_compact(&c)?;
        let fwd = |tb: f64, rb: f64| geometry::map_forward(&PhysicalPoint::new(tb, rb, th, ph));
        // Power-of-two step so that t̄ ± h is exact.
        let h = 2f64.powi((1e-4 * (p.tbar - p.rbar)).log2().round() as i32);
        for (col, (dt, dr)) in [(1.0, 0.0), (0.0, 1.0)].into_iter().enumerate() {
            let at = |s: f64| fwd(p.tbar + dt * s, p.rbar + dr * s).map_or((f64::NAN, f64::NAN), |c| (c.t, c.r));
            let gt = linalg::d1_central(|s| at(s).0, 0.0, h);
            let gr = linalg::d1_central(|s| at(s).1, 0.0, h);
            e[6] = e[6].max((gt - j[(0, col)]).abs() / j[(0, col)].abs()).max((gr - j[(1, col)]).abs() / j[(1, col)].abs());
        }
        let (ot, or) = geometry::conformal_factor_grad(&c)?;
        let om = |tt: f64, rr: f64| geometry::conformal_factor(&CompactPoint::new(tt, rr, th, ph)).unwrap_or(f64::NAN);
        let fd_t = linalg::d1_central(|s| om(t + s, r), 0.0, 1e-3 * t);
        let fd_r = linalg::d1_central(|s| om(t, r + s), 0.0, 1e-4 * (1.0 - r).min(r));
        let err = ((fd_t - ot) / ot).abs().max(((fd_r - or) / or).abs());
        e[7] = if err.is_nan() { f64::INFINITY } else { e[7].max(err) };
        let fd_p = linalg::d1_central(|s| TimeFunctions::new(t + s).p, 0.0, 1e-3 * t);
        e[8] = e[8].max((fd_p - tf.dp()).abs());
    }
    tab.push("change_of_variables_inverse", e[0], 1e-10);
    tab.push("symmetrization_pq", e[1], 1e-10);
    tab.push("a0_plus_a1_beta0", e[2], 1e-10);
    tab.push("metric_inverse", e[3], 1e-10);
    tab.push("map_round_trip_compact", e[4], 1e-10);
    tab.push("map_round_trip_physical", e[5], 1e-10);
    tab.push("map_jacobian_fd", e[6], 1e-6);
    tab.push("conformal_factor_grad_fd", e[7], 1e-6);
    tab.push("time_function_dp_fd", e[8], 1e-6);
    Ok(())
}

fn coefficient_checks(tab: &mut Table, rng: &mut ChaCha8Rng, coeffs: &CartesianCoeffs, t0: f64) -> CliResult<()> {
    let mut worst = 0.0f64;
    for a in [coeffs, &CartesianCoeffs::minkowski_null()] {
        for _ in 0..SAMPLES {
            let (t, r) = compact_sample(rng, t0);
            let (th, ph) = angles(rng);
            let c = CompactPoint::new(t, r, th, ph);
            let got = compact_components(a, &c)?;
            let want = pushforward_oracle(a, &c)?;
            // Rounding scale of the oracle: max entry of |J||ā||J|ᵀ.
            let p = geometry::map_inverse(&c)?;
            let j = geometry::jacobian_compact(&c)?.abs();
            let abar = barred_components(a, &p)?;
            let scale = abar.map(|m| j * m.abs() * j.transpose()).max_abs().max(1e-300);
            worst = worst.max(got.max_abs_diff(&want) / scale);
        }
    }
    tab.push("compact_components_oracle", worst, 1e-9);
    tab.push("minkowski_null_form_vanishes", if null_form(&CartesianCoeffs::minkowski_null()).is_zero() { 0.0 } else { 1.0 }, 0.0);
    Ok(())
}

fn system_checks(tab: &mut Table, rng: &mut ChaCha8Rng, c: &RunConstants) -> CliResult<()> {
    let (bs, _) = symmetrizer::starred(0.0, c.transcription);
    tab.push("gamma1_from_bstar", (linalg::lambda_min(&linalg::sym(&bs)) - c.gamma1).abs(), 1e-12);

    let (lo, hi) = c.chi.torus();
    let mut lmin = f64::INFINITY;
    for _ in 0..SAMPLES {
        let t = 10f64.powf(rng.gen_range(-8.0..c.t0.log10()));
        let e = c.extend(t, rng.gen_range(lo..hi), std::f64::consts::FRAC_PI_2)?;
        lmin = lmin.min(linalg::lambda_min(&linalg::sym(&e.btilde)));
    }
    tab.push("coercivity_btilde_deficit", (c.gamma1 - c.sigma - lmin).max(0.0), 0.0);
    tab.push("kappa_nu_gap_deficit", (c.kappa + c.nu - (c.gamma1 - c.sigma)).max(0.0), 0.0);

    let (mut eig, mut plus) = (f64::NEG_INFINITY, 0.0f64);
    for k in 0..SAMPLES {
        let t = c.t0 * (k as f64 + 1.0) / SAMPLES as f64;
        let f = symmetrizer::boundary_forms(t, c.chi.rho0 - c.chi.alpha, c.m);
        eig = eig.max(linalg::lambda_max(&linalg::sym(&f.gamma_minus)));
        eig = eig.max(linalg::lambda_max(&linalg::sym(&f.gamma)));
        plus = plus.max(linalg::max_abs(&f.gamma_plus));
    }
    tab.push("boundary_form_max_eigenvalue", eig.max(0.0), 1e-12);
    tab.push("boundary_form_outer_zero", plus, 0.0);

    let id = DMatrix::<f64>::identity(Z_DIM, Z_DIM);
    let (mut alg, mut sym, mut coer) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..SAMPLES {
        let t = rng.gen_range(1e-6..c.t0);
        let b = fuchsian_blocks(c, t, rng.gen_range(lo..hi), rng.gen_range(0.2..2.9))?;
        let perp = &id - &b.pi;
        alg = alg.max((&b.pi * &b.pi - &b.pi).amax()).max((&b.a0 * &b.pi - &b.pi * &b.a0).amax()).max((&b.a1 * &perp).amax());
        for s in b.a_sigma.iter().chain(std::iter::once(&b.a1)) {
            alg = alg.max((s * &perp).amax());
            let hs = &b.hcal * s;
            sym = sym.max((&hs - hs.transpose()).amax() / hs.amax().max(1.0));
        }
        coer = coer.max(c.kappa - coercivity(&b));
    }
    tab.push("fuchsian_block_projection", alg, 1e-12);
    tab.push("fuchsian_block_symmetry", sym, 1e-12);
    tab.push("fuchsian_coercivity_deficit", coer.max(0.0), 1e-12);
    Ok(())
}

pub fn run(l: &Loaded, out: &Path) -> CliResult<Vec<IdentityRow>> {
    let c = l.constants()?;
    let coeffs = l.coefficients()?;
    let mut rng = ChaCha8Rng::seed_from_u64(l.seed());
    let mut tab = Table::default();
    geometry_checks(&mut tab, &mut rng, c.t0)?;
    coefficient_checks(&mut tab, &mut rng, &coeffs, c.t0)?;
    system_checks(&mut tab, &mut rng, &c)?;
    let g = Grid::spherical(&c.chi, 32)?;
    let p = Problem::from_constants(g, &c, &coeffs, l.cfg.solver.ko_eps)?;
    tab.push("projected_leading_remainder", projected_leading_remainder(&p, SAMPLES, l.seed())?, 1e-9);

    io::write_csv(&out.join("identity_report.csv"), &tab.0)?;
    let failed: Vec<&str> = tab.0.iter().filter(|r| !r.pass).map(|r| r.check_name.as_str()).collect();
    for r in &tab.0 {
        println!("{:<32} {:>12.3e} <= {:<8.1e} {}", r.check_name, r.max_residual, r.tolerance, if r.pass { "pass" } else { "FAIL" });
    }
    if failed.is_empty() {
        Ok(tab.0)
    } else {
        Err(CliError::Assertion(format!("identity checks failed: {}", failed.join(", "))))
    }
}
