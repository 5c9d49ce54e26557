//! Convergence of the derived-system residuals and temporal order of RK4.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scri_core::coefficients::CartesianCoeffs;
use scri_core::diagnostics::{Diagnostics, Exponents, ResidualNorms};
use scri_core::evolution::{evolve, EvolveOptions, Grid, Problem, StateField};
use scri_core::linalg::V5;
use scri_core::symmetrizer::{self, ChiParams, Transcription};

fn chi() -> ChiParams {
    ChiParams { rho0: 0.9955, rho1: 0.9985, alpha: 0.0005 }
}

fn pulse(g: &Grid, n: usize, t: f64, seed: u64) -> StateField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coefs: Vec<[f64; 5]> = (0..n).map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0))).collect();
    let mut s = StateField::zeros(g, n, t);
    let (c, w) = (0.5 * (chi().rho0 + chi().rho1), (chi().rho1 - chi().rho0) / 8.0);
    for i in 0..g.n_rho {
        let z = (g.rho(i) - c) / w;
        let gz = 1e-3 * (-z * z).exp();
        for k in 0..n {
            s.set(i, k, &V5::from_fn(|q, _| coefs[k][q] * gz));
        }
    }
    s
}

fn problem(n_rho: usize, coeffs: &CartesianCoeffs) -> Problem {
    let g = Grid::spherical(&chi(), n_rho).unwrap();
    Problem::new(g, 1, chi(), Transcription::ChainConsistent, coeffs, 0.5).unwrap()
}

/// Runs a short evolution so the pulse stays where χ = 1; near the edge of supp χ
/// the advection speed vanishes and profiles steepen beyond grid resolution.
fn residuals(n_rho: usize, ds: f64, coeffs: &CartesianCoeffs) -> ResidualNorms {
    let p = problem(n_rho, coeffs);
    let t0 = symmetrizer::default_t0();
    let steps = (0.1 / ds).round();
    let opts = EvolveOptions { t_min: t0 * (-steps * ds).exp(), ds, keep_tail: 5, ..Default::default() };
    let init = pulse(&p.grid, p.n_unknowns, t0, 11);
    let r = evolve(&p, &init, &opts, None).unwrap();
    let d = Diagnostics::new(p, Exponents::default(), t0);
    d.system_residuals(&r.tail).unwrap()
}

#[test]
fn derived_system_residuals_converge() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let coeffs = CartesianCoeffs::random_null(2, 1.0, &mut rng);
    let levels: Vec<ResidualNorms> = [(64, 4e-3), (128, 2e-3), (256, 1e-3)].iter().map(|&(n, ds)| residuals(n, ds, &coeffs)).collect();
    for l in &levels {
        println!("difs {:.3e}  mwave_n {:.3e}  mwave_m {:.3e}", l.difs, l.mwave_n, l.mwave_m);
    }
    for w in levels.windows(2) {
        for (a, b) in [(w[0].difs, w[1].difs), (w[0].mwave_n, w[1].mwave_n), (w[0].mwave_m, w[1].mwave_m)] {
            let order = (a / b).log2();
            assert!(order > 2.0, "residual order {order} ({a:.3e} -> {b:.3e})");
        }
    }
}

#[test]
fn rk4_is_fourth_order_in_time() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let coeffs = CartesianCoeffs::random_null(1, 1.0, &mut rng);
    let p = problem(64, &coeffs);
    let t0 = symmetrizer::default_t0();
    let init = pulse(&p.grid, 1, t0, 3);
    let run = |ds: f64| {
        let opts = EvolveOptions { t_min: t0 * (-0.4f64).exp(), ds, ..Default::default() };
        evolve(&p, &init, &opts, None).unwrap().last.data
    };
    let (a, b, c) = (run(8e-3), run(4e-3), run(2e-3));
    let diff = |x: &[f64], y: &[f64]| x.iter().zip(y).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
    let order = (diff(&a, &b) / diff(&b, &c)).log2();
    println!("temporal self-convergence order {order:.3}");
    assert!(order > 3.5, "{order}");
}
