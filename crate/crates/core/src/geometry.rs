//! Compactification of the future null-cone region of Minkowski space.
//!
//! Physical coordinates (t̄, r̄, θ, φ) with t̄ > 0, t̄² − r̄² > 0 are mapped to
//! compact coordinates (t, r, θ, φ) by t = 1/(t̄² − r̄²), r = 1/(1 + t̄ − r̄).
//! Future null infinity sits at t → 0. The radial coordinate r used here is
//! always the un-reparametrized one; the torus coordinate ρ satisfies r = ρ^m
//! (see [`rho_to_r`]).

use crate::error::{Error, Result};
use crate::linalg::M4;

/// Region-boundary tolerance: points with r² − (1−r)²t below this are rejected.
pub const REGION_TOL: f64 = 1e-12;

/// Smallest |sin θ| accepted by sphere-dependent formulas.
pub const POLE_TOL: f64 = 1e-14;

/// A point of the physical region t̄ > 0, t̄² − r̄² > 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalPoint {
    pub tbar: f64,
    pub rbar: f64,
    pub theta: f64,
    pub phi: f64,
}

/// A point of the compact region in (t, r, θ, φ), r the un-reparametrized radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompactPoint {
    pub t: f64,
    pub r: f64,
    pub theta: f64,
    pub phi: f64,
}

impl PhysicalPoint {
    pub fn new(tbar: f64, rbar: f64, theta: f64, phi: f64) -> Self {
        Self { tbar, rbar, theta, phi }
    }
}

impl CompactPoint {
    pub fn new(t: f64, r: f64, theta: f64, phi: f64) -> Self {
        Self { t, r, theta, phi }
    }

    /// Point on the equator at φ = 0.
    pub fn equatorial(t: f64, r: f64) -> Self {
        Self::new(t, r, std::f64::consts::FRAC_PI_2, 0.0)
    }
}

/// r = ρ^m.
pub fn rho_to_r(rho: f64, m: u32) -> f64 {
    rho.powi(m as i32)
}

/// ρ = r^{1/m}.
pub fn r_to_rho(r: f64, m: u32) -> f64 {
    r.powf(1.0 / m as f64)
}

/// D = r² − (1−r)²t; the compact region is D > 0.
pub fn region_gap(t: f64, r: f64) -> f64 {
    r * r - (1.0 - r) * (1.0 - r) * t
}

/// Checks t > 0, r ∈ (0,1) and D ≥ [`REGION_TOL`]; returns D.
pub fn check_region(t: f64, r: f64) -> Result<f64> {
    if !(t > 0.0) || !(r > 0.0 && r < 1.0) {
        return Err(Error::Domain(format!("need t > 0 and 0 < r < 1, got t={t}, r={r}")));
    }
    let d = region_gap(t, r);
    if d < REGION_TOL {
        return Err(Error::Domain(format!(
            "point (t={t}, r={r}) is on or beyond the parabola t = (r/(1-r))^2"
        )));
    }
    Ok(d)
}

fn check_pole(theta: f64) -> Result<f64> {
    let s = theta.sin();
    if s.abs() < POLE_TOL {
        return Err(Error::Pole(format!("sin(theta) = 0 at theta = {theta}")));
    }
    Ok(s)
}

/// ψ: physical → compact.
pub fn map_forward(p: &PhysicalPoint) -> Result<CompactPoint> {
    let q = (p.tbar - p.rbar) * (p.tbar + p.rbar);
    if !(p.tbar > 0.0) || !(q > 0.0) {
        return Err(Error::Domain(format!(
            "physical point (tbar={}, rbar={}) is not inside the future null cone",
            p.tbar, p.rbar
        )));
    }
    Ok(CompactPoint::new(1.0 / q, 1.0 / (1.0 + p.tbar - p.rbar), p.theta, p.phi))
}

/// ψ⁻¹: compact → physical.
pub fn map_inverse(c: &CompactPoint) -> Result<PhysicalPoint> {
    let (t, r) = (c.t, c.r);
    let d = check_region(t, r)?;
    let den = 2.0 * r * (1.0 - r) * t;
    let s = r * r + t * (1.0 - r) * (1.0 - r);
    Ok(PhysicalPoint::new(s / den, d / den, c.theta, c.phi))
}

/// Jacobian J^μ_α = ∂x^μ/∂x̄^α of ψ, written in compact coordinates.
pub fn jacobian_compact(c: &CompactPoint) -> Result<M4> {
    let (t, r) = (c.t, c.r);
    check_region(t, r)?;
    let w = r * (1.0 - r);
    let tt = (1.0 - r) * (1.0 - r) * t * t;
    let mut j = M4::identity();
    j[(0, 0)] = (-t * r * r - tt) / w;
    j[(0, 1)] = (t * r * r - tt) / w;
    j[(1, 0)] = -r * r;
    j[(1, 1)] = r * r;
    Ok(j)
}

/// Jacobian J̄^α_μ of the Cartesian → spherical change (t̄, x̂) → (t̄, r̄, θ, φ).
pub fn jacobian_spherical(p: &PhysicalPoint) -> Result<M4> {
    let st = check_pole(p.theta)?;
    if !(p.rbar > 0.0) {
        return Err(Error::Domain(format!("rbar must be positive, got {}", p.rbar)));
    }
    let (ct, sp, cp) = (p.theta.cos(), p.phi.sin(), p.phi.cos());
    let r = p.rbar;
    let csc = 1.0 / st;
    Ok(M4::new(
        1.0, 0.0, 0.0, 0.0, //
        0.0, st * cp, st * sp, ct, //
        0.0, ct * cp / r, ct * sp / r, -st / r, //
        0.0, -csc * sp / r, csc * cp / r, 0.0,
    ))
}

/// Ω = (r² − t(1−r)²)/(2r(1−r)t).
pub fn conformal_factor(c: &CompactPoint) -> Result<f64> {
    let d = check_region(c.t, c.r)?;
    Ok(d / (2.0 * c.r * (1.0 - c.r) * c.t))
}

/// (∂_tΩ, ∂_rΩ), analytic.
pub fn conformal_factor_grad(c: &CompactPoint) -> Result<(f64, f64)> {
    let (t, r) = (c.t, c.r);
    check_region(t, r)?;
    let x = 1.0 - r;
    Ok((-r / (2.0 * x * t * t), 1.0 / (2.0 * t * x * x) + 1.0 / (2.0 * r * r)))
}

/// Lower and upper components of the compact metric g, with Ω.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSample {
    pub g_dd: M4,
    pub g_uu: M4,
    pub omega: f64,
}

/// Metric g with g_tr = −2r(1−r)/D², g_rr = 4t/D² and the round metric on S².
pub fn metric_sample(c: &CompactPoint) -> Result<MetricSample> {
    let (t, r) = (c.t, c.r);
    let d = check_region(t, r)?;
    let st = check_pole(c.theta)?;
    let w = r * (1.0 - r);
    let mut g_dd = M4::zeros();
    g_dd[(0, 1)] = -2.0 * w / (d * d);
    g_dd[(1, 0)] = g_dd[(0, 1)];
    g_dd[(1, 1)] = 4.0 * t / (d * d);
    g_dd[(2, 2)] = 1.0;
    g_dd[(3, 3)] = st * st;
    let mut g_uu = M4::zeros();
    g_uu[(0, 0)] = -t * d * d / (w * w);
    g_uu[(0, 1)] = -d * d / (2.0 * w);
    g_uu[(1, 0)] = g_uu[(0, 1)];
    g_uu[(2, 2)] = 1.0;
    g_uu[(3, 3)] = 1.0 / (st * st);
    Ok(MetricSample { g_dd, g_uu, omega: d / (2.0 * w * t) })
}

/// √|det g| = 2r(1−r) sin θ / D².
pub fn sqrt_det_metric(c: &CompactPoint) -> Result<f64> {
    let d = check_region(c.t, c.r)?;
    let st = check_pole(c.theta)?;
    Ok(2.0 * c.r * (1.0 - c.r) * st.abs() / (d * d))
}

/// Minkowski metric in Cartesian slots (t̄, x̂¹, x̂², x̂³).
pub fn minkowski() -> M4 {
    M4::from_diagonal(&nalgebra::Vector4::new(-1.0, 1.0, 1.0, 1.0))
}

/// Coordinate box in (t, r, θ, φ) for the conformal identity check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartBox {
    pub center: [f64; 4],
    pub width: [f64; 4],
}

/// Residuals of the conformal wave-operator identity and the quadratic-source law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveIdentityReport {
    /// max |□_g̃ ũ − R̃ũ/6 − Ω^{-3}□_g u| over the sample points.
    pub wave_residual: f64,
    /// max |Ω³ ã ∇̃ũ∇̃ũ − (expansion in u and ∇Ω⁻¹)| over the sample points.
    pub source_residual: f64,
    /// Largest magnitude of the compared terms, for relative judgement.
    pub scale: f64,
}

type Point4 = [f64; 4];

fn shift(x: Point4, mu: usize, dx: f64) -> Point4 {
    let mut y = x;
    y[mu] += dx;
    y
}

fn partial(f: &dyn Fn(Point4) -> f64, x: Point4, mu: usize, h: f64) -> f64 {
    crate::linalg::d1_central(|s| f(shift(x, mu, s)), 0.0, h)
}

/// (1/√g) ∂_μ(√g g^{μν} ∂_ν f), nested 4th-order central differences.
fn box_operator(
    f: &dyn Fn(Point4) -> f64,
    metric: &dyn Fn(Point4) -> (M4, f64),
    x: Point4,
    h: &[f64; 4],
) -> f64 {
    let flux = |y: Point4, mu: usize| -> f64 {
        let (guu, sg) = metric(y);
        (0..4).map(|nu| sg * guu[(mu, nu)] * partial(f, y, nu, h[nu])).sum()
    };
    let (_, sg) = metric(x);
    (0..4).map(|mu| partial(&|y| flux(y, mu), x, mu, h[mu])).sum::<f64>() / sg
}

/// Checks the n = 4 conformal wave-operator identity on a box of the compact chart.
///
/// The base metric is the compact metric g (scalar curvature zero); the rescaled
/// metric is g̃ = Ω²g with the supplied Ω, whose curvature R̃ = −6Ω⁻³□_gΩ is
/// computed by differences. With u = Ωũ both sides
/// □_g̃ũ − R̃ũ/6 and Ω⁻³□_g u are evaluated at nine points of the box using
/// steps width/`divisor`. The quadratic-source law is checked at the same
/// points for the tensor `a_tilde`.
pub fn conformal_wave_identity_check(
    test_fn: &dyn Fn(Point4) -> f64,
    omega: &dyn Fn(Point4) -> f64,
    a_tilde: &M4,
    bx: &ChartBox,
    divisor: f64,
) -> Result<WaveIdentityReport> {
    let h = [
        bx.width[0] / divisor,
        bx.width[1] / divisor,
        bx.width[2] / divisor,
        bx.width[3] / divisor,
    ];
    let gmetric = |y: Point4| -> (M4, f64) {
        let c = CompactPoint::new(y[0], y[1], y[2], y[3]);
        let m = metric_sample(&c).expect("box inside region");
        (m.g_uu, sqrt_det_metric(&c).expect("box inside region"))
    };
    let tmetric = |y: Point4| -> (M4, f64) {
        let (guu, sg) = gmetric(y);
        let o = omega(y);
        (guu / (o * o), sg * o.powi(4))
    };
    // Every probe point must be inside the region.
    for dt in [-1.0, 1.0] {
        for dr in [-1.0, 1.0] {
            let c = CompactPoint::new(
                bx.center[0] + dt * bx.width[0],
                bx.center[1] + dr * bx.width[1],
                bx.center[2],
                bx.center[3],
            );
            check_region(c.t, c.r)?;
            check_pole(c.theta)?;
        }
    }
    let u = |y: Point4| omega(y) * test_fn(y);
    let inv_omega = |y: Point4| 1.0 / omega(y);
    let mut wave_res: f64 = 0.0;
    let mut src_res: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in -1..=1 {
        for j in -1..=1 {
            let x = [
                bx.center[0] + 0.5 * i as f64 * bx.width[0],
                bx.center[1] + 0.5 * j as f64 * bx.width[1],
                bx.center[2],
                bx.center[3],
            ];
            let o = omega(x);
            let rt = -6.0 * box_operator(omega, &gmetric, x, &h) / o.powi(3);
            let lhs = box_operator(test_fn, &tmetric, x, &h) - rt * test_fn(x) / 6.0;
            let rhs = box_operator(&u, &gmetric, x, &h) / o.powi(3);
            wave_res = wave_res.max((lhs - rhs).abs());
            scale = scale.max(lhs.abs()).max(rhs.abs());

            let du: Vec<f64> = (0..4).map(|m| partial(&u, x, m, h[m])).collect();
            let dut: Vec<f64> = (0..4).map(|m| partial(test_fn, x, m, h[m])).collect();
            let dio: Vec<f64> = (0..4).map(|m| partial(&inv_omega, x, m, h[m])).collect();
            let uval = u(x);
            let mut direct = 0.0;
            let mut expanded = 0.0;
            for m in 0..4 {
                for n in 0..4 {
                    let a = a_tilde[(m, n)];
                    direct += a * dut[m] * dut[n];
                    expanded += a
                        * (o * du[m] * du[n]
                            + o * o * (dio[m] * uval * du[n] + du[m] * dio[n] * uval)
                            + o.powi(3) * dio[m] * dio[n] * uval * uval);
                }
            }
            direct *= o.powi(3);
            src_res = src_res.max((direct - expanded).abs());
            scale = scale.max(direct.abs());
        }
    }
    Ok(WaveIdentityReport { wave_residual: wave_res, source_residual: src_res, scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_physical(rng: &mut ChaCha8Rng) -> PhysicalPoint {
        let rbar = rng.gen_range(0.1..20.0);
        let tbar = rbar + rng.gen_range(0.05..5.0);
        PhysicalPoint::new(tbar, rbar, rng.gen_range(0.1..3.0), rng.gen_range(0.0..6.2))
    }

    #[test]
    fn forward_hand_value() {
        let c = map_forward(&PhysicalPoint::new(2.0, 1.0, 0.4, 0.2)).unwrap();
        assert_relative_eq!(c.t, 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(c.r, 0.5, epsilon = 1e-15);
        assert_eq!((c.theta, c.phi), (0.4, 0.2));
    }

    #[test]
    fn inverse_hand_value() {
        let p = map_inverse(&CompactPoint::new(1.0 / 3.0, 0.5, 0.4, 0.2)).unwrap();
        assert_relative_eq!(p.tbar, 2.0, epsilon = 1e-14);
        assert_relative_eq!(p.rbar, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn boundary_points_are_rejected() {
        assert!(matches!(map_forward(&PhysicalPoint::new(1.0, 1.0, 1.0, 0.0)), Err(Error::Domain(_))));
        // t = (r/(1-r))^2 at r = 1/2 is t = 1.
        assert!(matches!(map_inverse(&CompactPoint::new(1.0, 0.5, 1.0, 0.0)), Err(Error::Domain(_))));
        assert!(conformal_factor(&CompactPoint::new(1.0, 0.5, 1.0, 0.0)).is_err());
    }

    #[test]
    fn maps_are_mutually_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let p = random_physical(&mut rng);
            let q = map_inverse(&map_forward(&p).unwrap()).unwrap();
            assert!((q.tbar - p.tbar).abs() <= 1e-12 * p.tbar.max(1.0));
            assert!((q.rbar - p.rbar).abs() <= 1e-12 * p.tbar.max(1.0));
        }
    }

    #[test]
    fn jacobian_hand_values() {
        let j = jacobian_compact(&CompactPoint::new(1.0 / 3.0, 0.5, 1.0, 0.0)).unwrap();
        assert_relative_eq!(j[(0, 0)], -4.0 / 9.0, epsilon = 1e-14);
        assert_relative_eq!(j[(0, 1)], 2.0 / 9.0, epsilon = 1e-14);
        assert_relative_eq!(j[(1, 0)], -0.25, epsilon = 1e-14);
        assert_relative_eq!(j[(1, 1)], 0.25, epsilon = 1e-14);
        assert_eq!(j.fixed_view::<2, 2>(2, 2).into_owned(), nalgebra::Matrix2::identity());
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let p = random_physical(&mut rng);
            let c = map_forward(&p).unwrap();
            let j = jacobian_compact(&c).unwrap();
            let h = 1e-5;
            for (col, (dt, dr)) in [(1.0, 0.0), (0.0, 1.0)].into_iter().enumerate() {
                let f = |s: f64| {
                    let q = PhysicalPoint::new(p.tbar + s * dt, p.rbar + s * dr, p.theta, p.phi);
                    let c = map_forward(&q).unwrap();
                    [c.t, c.r]
                };
                for row in 0..2 {
                    let fd = crate::linalg::d1_central(|s| f(s)[row], 0.0, h);
                    let scale = j[(row, col)].abs().max(1.0);
                    assert!((fd - j[(row, col)]).abs() <= 1e-6 * scale, "{fd} vs {}", j[(row, col)]);
                }
            }
        }
    }

    #[test]
    fn spherical_jacobian_at_reference_direction() {
        let j = jacobian_spherical(&PhysicalPoint::new(2.0, 1.0, std::f64::consts::FRAC_PI_2, 0.0)).unwrap();
        let rows = [[0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 0.0, -1.0], [0.0, 0.0, 1.0, 0.0]];
        for (i, row) in rows.iter().enumerate() {
            for k in 0..4 {
                assert!((j[(i + 1, k)] - row[k]).abs() < 1e-15);
            }
        }
        assert!(matches!(
            jacobian_spherical(&PhysicalPoint::new(2.0, 1.0, 0.0, 0.0)),
            Err(Error::Pole(_))
        ));
    }

    #[test]
    fn spherical_jacobian_inverts_embedding_jacobian() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let p = random_physical(&mut rng);
            let (r, th, ph) = (p.rbar, p.theta, p.phi);
            let (st, ct, sp, cp) = (th.sin(), th.cos(), ph.sin(), ph.cos());
            // ∂(t̄, x̂)/∂(t̄, r̄, θ, φ)
            let e = M4::new(
                1.0, 0.0, 0.0, 0.0, //
                0.0, st * cp, r * ct * cp, -r * st * sp, //
                0.0, st * sp, r * ct * sp, r * st * cp, //
                0.0, ct, -r * st, 0.0,
            );
            let prod = jacobian_spherical(&p).unwrap() * e;
            assert!(max_abs(&(prod - M4::identity())) < 1e-12);
        }
    }

    #[test]
    fn conformal_factor_values() {
        assert_relative_eq!(conformal_factor(&CompactPoint::new(1.0 / 3.0, 0.5, 1.0, 0.0)).unwrap(), 1.0, epsilon = 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let p = random_physical(&mut rng);
            let c = map_forward(&p).unwrap();
            let o = conformal_factor(&c).unwrap();
            assert!((o - p.rbar).abs() <= 1e-10 * p.rbar.max(1.0));
            let (ot, or) = conformal_factor_grad(&c).unwrap();
            let ft = crate::linalg::d1_central(|s| conformal_factor(&CompactPoint { t: c.t + s, ..c }).unwrap(), 0.0, 1e-4 * c.t);
            let fr = crate::linalg::d1_central(|s| conformal_factor(&CompactPoint { r: c.r + s, ..c }).unwrap(), 0.0, 1e-5 * c.r.min(1.0 - c.r));
            assert!((ft - ot).abs() <= 1e-6 * ot.abs().max(1.0));
            assert!((fr - or).abs() <= 1e-6 * or.abs().max(1.0));
        }
    }

    #[test]
    fn metric_hand_values_and_inverse() {
        let m = metric_sample(&CompactPoint::new(1.0 / 3.0, 0.5, 1.0, 0.0)).unwrap();
        assert_relative_eq!(m.g_dd[(0, 1)], -18.0, epsilon = 1e-12);
        assert_relative_eq!(m.g_dd[(1, 1)], 48.0, epsilon = 1e-12);
        assert_relative_eq!(m.g_uu[(0, 0)], -4.0 / 27.0, epsilon = 1e-14);
        assert_relative_eq!(m.g_uu[(0, 1)], -1.0 / 18.0, epsilon = 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let p = random_physical(&mut rng);
            let m = metric_sample(&map_forward(&p).unwrap()).unwrap();
            assert!(max_abs(&(m.g_dd * m.g_uu - M4::identity())) < 1e-12);
            let st = p.theta.sin();
            assert_eq!(m.g_uu[(3, 3)], 1.0 / (st * st));
            assert_eq!(m.g_uu[(2, 2)], 1.0);
        }
    }

    #[test]
    fn rescaled_metric_is_pushed_forward_minkowski() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let p = random_physical(&mut rng);
            let c = map_forward(&p).unwrap();
            let m = metric_sample(&c).unwrap();
            // Minkowski in spherical coordinates via the Cartesian chain.
            let jb = jacobian_spherical(&p).unwrap();
            let jbi = jb.try_inverse().unwrap();
            let eta_sph = jbi.transpose() * minkowski() * jbi;
            let ji = jacobian_compact(&c).unwrap().try_inverse().unwrap();
            let pushed = ji.transpose() * eta_sph * ji;
            let lhs = m.g_dd * (m.omega * m.omega);
            let scale = max_abs(&pushed).max(1.0);
            assert!(max_abs(&(lhs - pushed)) <= 1e-8 * scale);
        }
    }

    fn poly(y: [f64; 4]) -> f64 {
        1.0 + 0.3 * y[0] + y[1] * y[1] - 0.2 * y[0] * y[1] + 0.1 * y[2].cos() + 0.05 * y[3].sin() * y[1]
    }

    fn bx() -> ChartBox {
        ChartBox { center: [0.3, 0.7, 1.1, 0.4], width: [0.05, 0.05, 0.2, 0.2] }
    }

    #[test]
    fn wave_identity_trivial_factor() {
        let a = minkowski();
        let rep = conformal_wave_identity_check(&poly, &|_| 1.0, &a, &bx(), 64.0).unwrap();
        assert!(rep.wave_residual < 1e-9 * rep.scale.max(1.0));
        assert!(rep.source_residual < 1e-9 * rep.scale.max(1.0));
        let rep = conformal_wave_identity_check(&|_| 2.5, &|y| conformal_factor(&CompactPoint::new(y[0], y[1], y[2], y[3])).unwrap(), &a, &bx(), 64.0).unwrap();
        assert!(rep.wave_residual < 1e-6 * rep.scale.max(1.0));
    }

    #[test]
    fn wave_identity_converges_for_compactification_factor() {
        let om = |y: [f64; 4]| conformal_factor(&CompactPoint::new(y[0], y[1], y[2], y[3])).unwrap();
        let mut a = minkowski();
        a[(0, 1)] = 0.4;
        let r1 = conformal_wave_identity_check(&poly, &om, &a, &bx(), 8.0).unwrap();
        let r2 = conformal_wave_identity_check(&poly, &om, &a, &bx(), 16.0).unwrap();
        assert!(r2.wave_residual < r1.wave_residual / 8.0, "{r1:?} {r2:?}");
        let r3 = conformal_wave_identity_check(&poly, &om, &a, &bx(), 64.0).unwrap();
        assert!(r3.wave_residual < 1e-6 * r3.scale);
        assert!(r3.source_residual < 1e-8 * r3.scale);
    }
}
