//! Blocks of the symmetric hyperbolic first-order system
//!
//!   B⁰∂ₜV + (1/t)B¹(1−r)r∂ᵣV + (1/√t)B^Λ∇_ΛV = (1/t)𝓑ℙV + (1/√t)𝓒V + F,
//!
//! the change of variables V = MU, the cutoff extension to the torus slab,
//! the inner product h, the boundary quadratic forms and the run constants.
//!
//! Component order is 𝓘 = (0, 1, θ, φ, 4).

use crate::error::{Error, Result};
use crate::geometry::{self, POLE_TOL};
use crate::linalg::{self, M5, V5};

pub const SQRT5: f64 = 2.236_067_977_499_79;

/// β₀ = (1+√5)/2.
pub const BETA0: f64 = (1.0 + SQRT5) / 2.0;

/// Which transcription of two ambiguous entries to use.
///
/// `Displayed` keeps the Λ-row V₀/V₁ entries of 𝓒 and the (1−r)² factor in the
/// second row of F. `ChainConsistent` drops the former and uses (1−r) in the
/// latter, which is what differentiating the second-order equation gives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Transcription {
    #[default]
    Displayed,
    ChainConsistent,
}

/// γ₁ = 1 − √(10+2√5)/4, the smallest eigenvalue of sym 𝓑*(0).
pub fn gamma1() -> f64 {
    1.0 - (10.0 + 2.0 * SQRT5).sqrt() / 4.0
}

/// t₀ = (√5 + √(10√5−2) − 3)/8.
pub fn default_t0() -> f64 {
    (SQRT5 + (10.0 * SQRT5 - 2.0).sqrt() - 3.0) / 8.0
}

/// The scalar functions a0, a1, p, q of t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeFunctions {
    pub t: f64,
    pub a0: f64,
    pub a1: f64,
    pub p: f64,
    pub q: f64,
}

impl TimeFunctions {
    pub fn new(t: f64) -> Self {
        let den = 2.0 + (3.0 + SQRT5) * t;
        Self {
            t,
            a0: (3.0 + SQRT5) / den,
            a1: -(1.0 + SQRT5) / den,
            p: (1.0 + t * (3.0 + t)).sqrt(),
            q: (1.0 + SQRT5) * t / (3.0 + SQRT5 + 2.0 * t),
        }
    }

    /// dp/dt.
    pub fn dp(&self) -> f64 {
        (3.0 + 2.0 * self.t) / (2.0 * self.p)
    }

    /// Residuals of the two symmetrization conditions on p and q.
    pub fn symmetrization_residuals(&self) -> (f64, f64) {
        let (t, a0, a1, p, q) = (self.t, self.a0, self.a1, self.p, self.q);
        (
            (p * a0 + a1 * p * (1.0 + q) / (1.0 + t) - (1.0 + t) / p).abs(),
            (a1 * p * q / t + 1.0 / p).abs(),
        )
    }
}

/// Scale r(1−r)p/D of the angular slots of M.
fn angular_scale(tf: &TimeFunctions, r: f64) -> Result<f64> {
    let d = geometry::check_region(tf.t, r)?;
    Ok(r * (1.0 - r) * tf.p / d)
}

/// Change-of-variables matrix M(t, r).
pub fn change_of_variables(t: f64, r: f64) -> Result<M5> {
    let tf = TimeFunctions::new(t);
    let s = angular_scale(&tf, r)?;
    let st = t.sqrt();
    let mut m = M5::identity();
    m[(0, 0)] = t + 1.0;
    m[(0, 1)] = 1.0 / st;
    m[(1, 0)] = st;
    m[(1, 1)] = BETA0;
    m[(2, 2)] = s;
    m[(3, 3)] = s;
    Ok(m)
}

/// Closed-form inverse M⁻¹(t, r).
pub fn change_of_variables_inv(t: f64, r: f64) -> Result<M5> {
    let tf = TimeFunctions::new(t);
    let s = angular_scale(&tf, r)?;
    let st = t.sqrt();
    let mut m = M5::identity();
    m[(0, 0)] = tf.a0;
    m[(0, 1)] = tf.a1 / st;
    m[(1, 0)] = st * tf.a1;
    m[(1, 1)] = -(1.0 + t) * tf.a1;
    m[(2, 2)] = 1.0 / s;
    m[(3, 3)] = 1.0 / s;
    Ok(m)
}

/// The blocks of the symmetric system at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemMatrices {
    pub b0: M5,
    pub b1: M5,
    /// B^θ, B^φ, including the inverse round-metric factors.
    pub b_lam: [M5; 2],
    pub bcal: M5,
    pub ccal: M5,
    pub p: M5,
}

/// ℙ = diag(0, 1, 1, 1, 1).
pub fn projection() -> M5 {
    M5::from_diagonal(&V5::new(0.0, 1.0, 1.0, 1.0, 1.0))
}

/// B¹(t); independent of r.
pub fn b1(t: f64) -> M5 {
    let tf = TimeFunctions::new(t);
    let den = 2.0 + (3.0 + SQRT5) * t;
    let mut b = M5::zeros();
    b[(0, 0)] = t * tf.a0;
    b[(0, 1)] = t.sqrt() * tf.a1;
    b[(1, 0)] = b[(0, 1)];
    b[(1, 1)] = 2.0 / den;
    let l = 2.0 / (2.0 + (3.0 - SQRT5) * t);
    b[(2, 2)] = l;
    b[(3, 3)] = l;
    b
}

/// 𝓑(t, r) in terms of the un-reparametrized radius.
pub fn bcal(t: f64, r: f64) -> Result<M5> {
    Ok(bcal_unchecked(t, r, geometry::check_region(t, r)?))
}

fn bcal_unchecked(t: f64, r: f64, d: f64) -> M5 {
    let tf = TimeFunctions::new(t);
    let mut b = M5::zeros();
    b[(0, 0)] = 0.5;
    b[(1, 1)] = 0.5 + tf.a1 * r * (1.0 - SQRT5) / 2.0;
    let l = (r * r + (1.0 - r).powi(2) * t) * (3.0 + t + 2.0 * tf.q) / (2.0 * d * (1.0 + t));
    b[(2, 2)] = l;
    b[(3, 3)] = l;
    b[(4, 4)] = 0.5;
    b[(4, 1)] = tf.a1;
    b
}

/// 𝓒(t, r) in terms of the un-reparametrized radius.
pub fn ccal(t: f64, r: f64, tr: Transcription) -> Result<M5> {
    Ok(ccal_unchecked(t, r, geometry::check_region(t, r)?, tr))
}

fn ccal_unchecked(t: f64, r: f64, d: f64, tr: Transcription) -> M5 {
    let tf = TimeFunctions::new(t);
    let st = t.sqrt();
    let mut c = M5::zeros();
    c[(0, 0)] = st * tf.a0 * (1.0 + r);
    c[(0, 1)] = tf.a1 * (1.0 + r);
    c[(1, 0)] = tf.a0 * r * (1.0 - SQRT5) / 2.0;
    let l = (3.0 + 2.0 * t) * st / (2.0 + 2.0 * t * (3.0 + t));
    for k in 2..4 {
        if tr == Transcription::Displayed {
            c[(k, 0)] = tf.a0 * (1.0 - r) * r * r * tf.p / d;
            c[(k, 1)] = tf.a1 * (1.0 - r) * r * r * tf.p / d;
        }
        c[(k, k)] = l;
    }
    c[(4, 0)] = tf.a0;
    c
}

/// B^θ and B^φ at (t, r, θ).
pub fn b_lambda(t: f64, r: f64, theta: f64) -> Result<[M5; 2]> {
    let tf = TimeFunctions::new(t);
    let d = geometry::check_region(t, r)?;
    let s2 = round_metric_inv_phi(theta)?;
    let ba = (1.0 - r) * r * (1.0 + t) / (tf.p * d);
    let bb = t.sqrt() * (1.0 - r) * r / (tf.p * d);
    let mut out = [M5::zeros(), M5::zeros()];
    for (k, (b, g)) in out.iter_mut().zip([1.0, s2]).enumerate() {
        let l = 2 + k;
        b[(0, l)] = -g * ba;
        b[(1, l)] = -g * bb;
        b[(l, 0)] = -ba;
        b[(l, 1)] = -bb;
    }
    Ok(out)
}

/// ḡ^{φφ} = 1/sin²θ.
fn round_metric_inv_phi(theta: f64) -> Result<f64> {
    let s = theta.sin();
    if s.abs() < POLE_TOL {
        return Err(Error::Pole(format!("sin(theta) = 0 at theta = {theta}")));
    }
    Ok(1.0 / (s * s))
}

/// All blocks at (t, ρ, θ) with r = ρ^m.
pub fn assemble(t: f64, rho: f64, theta: f64, m: u32, tr: Transcription) -> Result<SystemMatrices> {
    assemble_r(t, geometry::rho_to_r(rho, m), theta, tr)
}

/// All blocks at (t, r, θ).
pub fn assemble_r(t: f64, r: f64, theta: f64, tr: Transcription) -> Result<SystemMatrices> {
    Ok(SystemMatrices {
        b0: M5::identity(),
        b1: b1(t),
        b_lam: b_lambda(t, r, theta)?,
        bcal: bcal(t, r)?,
        ccal: ccal(t, r, tr)?,
        p: projection(),
    })
}

/// 𝓑* and 𝓒*: the blocks at r = 1.
pub fn starred(t: f64, tr: Transcription) -> (M5, M5) {
    (bcal_unchecked(t, 1.0, 1.0), ccal_unchecked(t, 1.0, 1.0, tr))
}

/// Cutoff geometry: χ = 1 on [ρ₀, ρ₁], χ = 0 outside (ρ₀−α, ρ₁+α).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiParams {
    pub rho0: f64,
    pub rho1: f64,
    pub alpha: f64,
}

impl ChiParams {
    /// Torus coordinate range [ρ₀−2α, ρ₁+2α].
    pub fn torus(&self) -> (f64, f64) {
        (self.rho0 - 2.0 * self.alpha, self.rho1 + 2.0 * self.alpha)
    }

    /// Support (ρ₀−α, ρ₁+α) of χ.
    pub fn support(&self) -> (f64, f64) {
        (self.rho0 - self.alpha, self.rho1 + self.alpha)
    }
}

fn mollifier(y: f64) -> (f64, f64) {
    if y <= 0.0 {
        (0.0, 0.0)
    } else {
        let f = (-1.0 / y).exp();
        (f, f / (y * y))
    }
}

/// Smooth step from 0 (x ≤ 0) to 1 (x ≥ 1) and its derivative.
pub fn smooth_step(x: f64) -> (f64, f64) {
    let (f, df) = mollifier(x);
    let (g, dg) = mollifier(1.0 - x);
    let s = f + g;
    (f / s, (df * g + f * dg) / (s * s))
}

/// χ(ρ) and ∂ρχ.
pub fn cutoff(rho: f64, p: &ChiParams) -> (f64, f64) {
    let (l, dl) = smooth_step((rho - (p.rho0 - p.alpha)) / p.alpha);
    let (u, du) = smooth_step(((p.rho1 + p.alpha) - rho) / p.alpha);
    (l * u, (dl * u - l * du) / p.alpha)
}

/// Blocks of the cutoff-extended system at one torus point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedMatrices {
    pub chi: f64,
    pub dchi: f64,
    /// χ(1−ρ^m)ρ/m, coefficient of (1/t)B¹∂ρ.
    pub adv: f64,
    pub b1: M5,
    /// χB^θ, χB^φ.
    pub b_lam: [M5; 2],
    pub btilde: M5,
    pub ctilde: M5,
    pub p: M5,
}

/// Extended blocks B̃ = 𝓑* + χ(𝓑−𝓑*), C̃ = 𝓒* + χ(𝓒−𝓒*), χ-weighted advection.
pub fn extend(t: f64, rho: f64, theta: f64, m: u32, chi: &ChiParams, tr: Transcription) -> Result<ExtendedMatrices> {
    let (c, dc) = cutoff(rho, chi);
    let (bs, cs) = starred(t, tr);
    let r = geometry::rho_to_r(rho, m);
    let (btilde, ctilde, b_lam) = if c > 0.0 {
        let bl = b_lambda(t, r, theta)?;
        (bs + (bcal(t, r)? - bs) * c, cs + (ccal(t, r, tr)? - cs) * c, [bl[0] * c, bl[1] * c])
    } else {
        (bs, cs, [M5::zeros(), M5::zeros()])
    };
    Ok(ExtendedMatrices {
        chi: c,
        dchi: dc,
        adv: c * (1.0 - r) * rho / m as f64,
        b1: b1(t),
        b_lam,
        btilde,
        ctilde,
        p: projection(),
    })
}

/// Weight matrix of h: diag(1, 1, ḡ^{θθ}, ḡ^{φφ}, 1).
pub fn h_weight(theta: f64) -> Result<M5> {
    Ok(M5::from_diagonal(&V5::new(1.0, 1.0, 1.0, round_metric_inv_phi(theta)?, 1.0)))
}

/// h(Y, X) = Y₀X₀ + Y₁X₁ + ḡ^{ΣΛ}Y_ΛX_Σ + Y₄X₄.
pub fn inner_product_h(y: &V5, x: &V5, theta: f64) -> Result<f64> {
    Ok((y.transpose() * h_weight(theta)? * x)[(0, 0)])
}

/// Matrices of the boundary quadratic forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryForms {
    /// Outer boundary: identically zero.
    pub gamma_plus: M5,
    /// Inner boundary ρ = ρ₀: −((1−ρ₀^m)ρ₀/m)B¹.
    pub gamma_minus: M5,
    /// Parabola t = ρ^{2m}/(1−ρ^m)²: −B⁰ + 2tB¹.
    pub gamma: M5,
}

/// Boundary forms at time t for an inner radius ρ₀.
pub fn boundary_forms(t: f64, rho0: f64, m: u32) -> BoundaryForms {
    let r0 = geometry::rho_to_r(rho0, m);
    let b = b1(t);
    BoundaryForms {
        gamma_plus: M5::zeros(),
        gamma_minus: b * (-(1.0 - r0) * rho0 / m as f64),
        gamma: -M5::identity() + b * (2.0 * t),
    }
}

/// Scaling exponents and slab geometry supplied by the user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantsConfig {
    pub m: u32,
    pub chi: ChiParams,
    pub t0: Option<f64>,
    pub kappa: f64,
    pub nu: f64,
    pub epsilon: f64,
    pub zeta: f64,
    pub transcription: Transcription,
    /// Number of (t, ρ) samples per axis for the σ estimates.
    pub samples_per_axis: usize,
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        Self {
            m: 1,
            chi: ChiParams { rho0: 0.9955, rho1: 0.9985, alpha: 0.0005 },
            t0: None,
            kappa: 0.01,
            nu: 0.01,
            epsilon: 0.004,
            zeta: 0.005,
            transcription: Transcription::Displayed,
            samples_per_axis: 100,
        }
    }
}

/// Derived constants and sampled bound estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConstants {
    pub m: u32,
    pub chi: ChiParams,
    pub t0: f64,
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub gamma1: f64,
    pub kappa: f64,
    pub nu: f64,
    pub epsilon: f64,
    pub zeta: f64,
    /// 1.1 · max(σ_B, σ_C).
    pub sigma: f64,
    /// sup |𝓑 − 𝓑*| over the sample.
    pub sigma_b: f64,
    /// sup |𝓒 − 𝓒*| over the sample.
    pub sigma_c: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub transcription: Transcription,
}

/// Sampled suprema (σ_B, σ_C) of |𝓑−𝓑*| and |𝓒−𝓒*| on (0, t₀] × supp χ.
pub fn sample_sigma(t0: f64, m: u32, chi: &ChiParams, n: usize, tr: Transcription) -> Result<(f64, f64)> {
    let (lo, hi) = chi.support();
    let mut sb: f64 = 0.0;
    let mut sc: f64 = 0.0;
    for i in 0..n {
        let t = t0 * (i as f64 + 1.0) / n as f64;
        let (bs, cs) = starred(t, tr);
        for j in 0..n {
            let rho = lo + (hi - lo) * j as f64 / (n - 1) as f64;
            let r = geometry::rho_to_r(rho, m);
            sb = sb.max(linalg::spectral_norm(&(bcal(t, r)? - bs)));
            sc = sc.max(linalg::spectral_norm(&(ccal(t, r, tr)? - cs)));
        }
    }
    Ok((sb, sc))
}

/// σ₂ = 2 sup |∂ρ(χ(1−ρ^m)ρB¹/m)| with analytic ∂ρχ.
pub fn sample_sigma2(t0: f64, m: u32, chi: &ChiParams, n: usize) -> f64 {
    let (lo, hi) = chi.torus();
    let mf = m as f64;
    let mut s: f64 = 0.0;
    for i in 0..n {
        let t = t0 * (i as f64 + 1.0) / n as f64;
        let nb = linalg::spectral_norm(&b1(t));
        for j in 0..n {
            let rho = lo + (hi - lo) * j as f64 / (n - 1) as f64;
            let (c, dc) = cutoff(rho, chi);
            let r = rho.powi(m as i32);
            let g = (1.0 - r) * rho / mf;
            let dg = (1.0 - (mf + 1.0) * r) / mf;
            s = s.max((dc * g + c * dg).abs() * nb);
        }
    }
    2.0 * s
}

/// σ₁ = sup over t of max(|B⁰|, |B¹|).
pub fn sample_sigma1(t0: f64, n: usize) -> f64 {
    (0..n)
        .map(|i| linalg::spectral_norm(&b1(t0 * (i as f64 + 1.0) / n as f64)))
        .fold(1.0, f64::max)
}

impl RunConstants {
    /// Computes the derived constants and validates all inequality constraints.
    pub fn new(cfg: &ConstantsConfig) -> Result<Self> {
        let mut problems = Vec::new();
        let chi = cfg.chi;
        if cfg.m == 0 {
            problems.push("m must be at least 1".to_string());
        }
        if !(chi.alpha > 0.0) || !(chi.rho0 < chi.rho1) {
            problems.push(format!("need alpha > 0 and rho0 < rho1 (got {chi:?})"));
        }
        let (lo, hi) = chi.torus();
        if !(lo > 0.0 && hi < 1.0) {
            problems.push(format!("torus range [{lo}, {hi}] must lie inside (0, 1)"));
        }
        if cfg.samples_per_axis < 2 {
            problems.push("samples_per_axis must be at least 2".into());
        }
        let t0 = cfg.t0.unwrap_or_else(default_t0);
        if !(t0 > 0.0) {
            problems.push(format!("t0 must be positive, got {t0}"));
        }
        if !problems.is_empty() {
            return Err(Error::Config(problems.join("; ")));
        }
        let r_in = geometry::rho_to_r(chi.rho0 - chi.alpha, cfg.m);
        if geometry::region_gap(t0, r_in) < geometry::REGION_TOL {
            problems.push(format!(
                "supp chi reaches the parabola at t0: need t0 < (r/(1-r))^2 = {} at rho = rho0 - alpha",
                (r_in / (1.0 - r_in)).powi(2)
            ));
            return Err(Error::Config(problems.join("; ")));
        }
        let n = cfg.samples_per_axis;
        let (sb, sc) = sample_sigma(t0, cfg.m, &chi, n, cfg.transcription)?;
        let sigma = 1.1 * sb.max(sc);
        let g1 = gamma1();
        let (k, nu, e, z) = (cfg.kappa, cfg.nu, cfg.epsilon, cfg.zeta);
        if !(k + nu <= g1 - sigma) {
            problems.push(format!("kappa + nu = {} exceeds gamma1 - sigma = {}", k + nu, g1 - sigma));
        }
        if !(g1 - sigma < 0.5 - e) {
            problems.push(format!("gamma1 - sigma = {} is not below 1/2 - epsilon = {}", g1 - sigma, 0.5 - e));
        }
        if !(2.0 * e < k) {
            problems.push(format!("2 epsilon = {} is not below kappa = {k}", 2.0 * e));
        }
        if !(k < 1.0 - e) {
            problems.push(format!("kappa = {k} is not below 1 - epsilon = {}", 1.0 - e));
        }
        if !(e < 2.0 * nu) {
            problems.push(format!("epsilon = {e} is not below 2 nu = {}", 2.0 * nu));
        }
        if !(z > 0.0 && z < k) {
            problems.push(format!("zeta = {z} must lie in (0, kappa = {k})"));
        }
        if !(k > 0.0 && nu > 0.0 && e > 0.0) {
            problems.push("kappa, nu and epsilon must be positive".into());
        }
        if !problems.is_empty() {
            return Err(Error::Config(problems.join("; ")));
        }
        Ok(Self {
            m: cfg.m,
            chi,
            t0,
            beta0: BETA0,
            beta1: 1.0 + SQRT5,
            beta2: (2.0 + (2.0 * SQRT5 + 10.0).sqrt()) / (1.0 + SQRT5),
            gamma1: g1,
            kappa: k,
            nu,
            epsilon: e,
            zeta: z,
            sigma,
            sigma_b: sb,
            sigma_c: sc,
            sigma1: sample_sigma1(t0, n * n),
            sigma2: sample_sigma2(t0, cfg.m, &chi, n),
            transcription: cfg.transcription,
        })
    }

    /// Extended blocks at (t, ρ, θ) for this run.
    pub fn extend(&self, t: f64, rho: f64, theta: f64) -> Result<ExtendedMatrices> {
        extend(t, rho, theta, self.m, &self.chi, self.transcription)
    }
}
