//! Exact quadratic source: reconstruction of (u, ∇u) from V, the conformal
//! source f^K, the first-order rows F^K, and the split 𝓕 = Q e₀/t + 𝓖.

use crate::coefficients::{self, CartesianCoeffs, CoeffArray, NullForm, SphericalExpansion};
use crate::error::{Error, Result};
use crate::geometry::{self, CompactPoint};
use crate::linalg::V5;
use crate::symmetrizer::{self, Transcription};

/// (∂ₜu, ∂ᵣu, ∂_θu, ∂_φu, u) of one unknown.
pub type Gradient = [f64; 5];

/// Coefficient data needed by the source at a fixed set of directions.
#[derive(Debug, Clone)]
pub struct SourceContext {
    pub n_unknowns: usize,
    pub transcription: Transcription,
    /// Expansion per angular index.
    pub expansions: Vec<SphericalExpansion>,
    /// b^K_{IJ} per angular index.
    pub null_forms: Vec<NullForm>,
    pub zero: bool,
}

impl SourceContext {
    pub fn new(a: &CartesianCoeffs, angles: &[(f64, f64)], tr: Transcription) -> Result<Self> {
        let mut expansions = Vec::with_capacity(angles.len());
        let mut null_forms = Vec::with_capacity(angles.len());
        for &(th, ph) in angles {
            let e = coefficients::spherical_expansion(a, th, ph)?;
            null_forms.push(e.null_form());
            expansions.push(e);
        }
        Ok(Self { n_unknowns: a.n_unknowns(), transcription: tr, expansions, null_forms, zero: a.is_zero() })
    }

    /// Compact components a^{Kμν}_{IJ} at (t, r) for angular index `ang`.
    pub fn compact(&self, ang: usize, t: f64, r: f64) -> Result<CoeffArray> {
        coefficients::compact_from_expansion(&self.expansions[ang], t, r)
    }
}

/// (∂ₜu, ∂ᵣu, ∂_Λu, u) from V through U = M⁻¹V and the first-order variables.
pub fn gradients_from_v(v: &[V5], t: f64, r: f64) -> Result<Vec<Gradient>> {
    let minv = symmetrizer::change_of_variables_inv(t, r)?;
    let x = 1.0 - r;
    let st = t.sqrt();
    Ok(v
        .iter()
        .map(|vk| {
            let u = minv * vk;
            [x * u[0] / t, u[1] / (st * r), x * u[2] / st, x * u[3] / st, x * u[4] / st]
        })
        .collect())
}

/// V = MU with U built from (∂ₜu, ∂ᵣu, ∂_Λu, u).
pub fn v_from_gradients(g: &[Gradient], t: f64, r: f64) -> Result<Vec<V5>> {
    let m = symmetrizer::change_of_variables(t, r)?;
    let x = 1.0 - r;
    let st = t.sqrt();
    Ok(g
        .iter()
        .map(|gk| m * V5::new(t * gk[0] / x, st * r * gk[1], st * gk[2] / x, st * gk[3] / x, st * gk[4] / x))
        .collect())
}

/// f^K = Ω⁻¹ a^{Kμν}_{IJ} y^I_μ y^J_ν with y_μ = Ω∂_μu − u∂_μΩ.
pub fn source_f_from_gradients(g: &[Gradient], t: f64, r: f64, a: &CoeffArray) -> Result<Vec<f64>> {
    let c = CompactPoint::equatorial(t, r);
    let om = geometry::conformal_factor(&c)?;
    let (dto, dro) = geometry::conformal_factor_grad(&c)?;
    let dom = [dto, dro, 0.0, 0.0];
    let y: Vec<[f64; 4]> = g
        .iter()
        .map(|gk| std::array::from_fn(|mu| om * gk[mu] - gk[4] * dom[mu]))
        .collect();
    let n = a.n_unknowns();
    let mut f = vec![0.0; n];
    for (k, fk) in f.iter_mut().enumerate() {
        for i in 0..n {
            for j in 0..n {
                let m = a.get(k, i, j);
                for mu in 0..4 {
                    for nu in 0..4 {
                        *fk += m[(mu, nu)] * y[i][mu] * y[j][nu];
                    }
                }
            }
        }
        *fk /= om;
    }
    Ok(f)
}

/// f^K from V.
pub fn source_f(v: &[V5], t: f64, r: f64, a: &CoeffArray) -> Result<Vec<f64>> {
    source_f_from_gradients(&gradients_from_v(v, t, r)?, t, r, a)
}

/// The rows F^K of the first-order system for given f^K; only rows 0 and 1 are nonzero.
pub fn source_rows(f: &[f64], t: f64, r: f64, tr: Transcription) -> Result<Vec<V5>> {
    let d = geometry::check_region(t, r)?;
    let x = 1.0 - r;
    let k0 = -(1.0 + t) * x * r * r / (d * d);
    let xp = match tr {
        Transcription::Displayed => x * x,
        Transcription::ChainConsistent => x,
    };
    let k1 = -t.sqrt() * xp * r * r / (d * d);
    Ok(f.iter().map(|fk| V5::new(k0 * fk, k1 * fk, 0.0, 0.0, 0.0)).collect())
}

/// F^K at one point from V.
pub fn source_big_f(v: &[V5], t: f64, r: f64, a: &CoeffArray, tr: Transcription) -> Result<Vec<V5>> {
    source_rows(&source_f(v, t, r, a)?, t, r, tr)
}

/// Q^K = −ρ^{3m}χ b^K_{IJ}V₀^I V₀^J / (2(ρ^{2m} − (1−ρ^m)²t)).
pub fn q_term(v: &[V5], t: f64, rho: f64, m: u32, chi: f64, b: &NullForm) -> Result<Vec<f64>> {
    let r = geometry::rho_to_r(rho, m);
    let d = geometry::check_region(t, r)?;
    let pre = -r.powi(3) * chi / (2.0 * d);
    let v0: Vec<f64> = v.iter().map(|x| x[0]).collect();
    Ok(b.contract(&v0).into_iter().map(|q| pre * q).collect())
}

/// Extended source 𝓕 = χF at a torus point, zero where χ = 0.
pub fn extended_source(
    ctx: &SourceContext,
    ang: usize,
    v: &[V5],
    t: f64,
    rho: f64,
    m: u32,
    chi: f64,
) -> Result<Vec<V5>> {
    if ctx.zero || chi == 0.0 {
        return Ok(vec![V5::zeros(); v.len()]);
    }
    let r = geometry::rho_to_r(rho, m);
    let a = ctx.compact(ang, t, r)?;
    Ok(source_big_f(v, t, r, &a, ctx.transcription)?.into_iter().map(|x| x * chi).collect())
}

/// Symmetric bilinear representation B(V, V) of a quadratic map on ℝ^{5N},
/// obtained by polarization.
#[derive(Debug, Clone)]
pub struct Bilinear {
    pub dim: usize,
    /// coef[(out·dim + a)·dim + b].
    pub coef: Vec<f64>,
}

impl Bilinear {
    pub fn from_quadratic(dim: usize, out_dim: usize, q: &dyn Fn(&[f64]) -> Result<Vec<f64>>) -> Result<Self> {
        let e = |i: usize| -> Vec<f64> { (0..dim).map(|k| if k == i { 1.0 } else { 0.0 }).collect() };
        let diag: Vec<Vec<f64>> = (0..dim).map(|i| q(&e(i))).collect::<Result<_>>()?;
        let mut coef = vec![0.0; out_dim * dim * dim];
        for a in 0..dim {
            for b in 0..dim {
                let val = if a == b {
                    diag[a].clone()
                } else {
                    let s: Vec<f64> = (0..dim).map(|k| if k == a || k == b { 1.0 } else { 0.0 }).collect();
                    let qs = q(&s)?;
                    (0..out_dim).map(|o| 0.5 * (qs[o] - diag[a][o] - diag[b][o])).collect()
                };
                for o in 0..out_dim {
                    coef[(o * dim + a) * dim + b] = val[o];
                }
            }
        }
        Ok(Self { dim, coef })
    }

    pub fn apply(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let out_dim = self.coef.len() / (self.dim * self.dim);
        (0..out_dim)
            .map(|o| {
                let mut s = 0.0;
                for a in 0..self.dim {
                    for b in 0..self.dim {
                        s += self.coef[(o * self.dim + a) * self.dim + b] * x[a] * y[b];
                    }
                }
                s
            })
            .collect()
    }
}

fn flatten(v: &[V5]) -> Vec<f64> {
    v.iter().flat_map(|x| x.iter().copied()).collect()
}

fn unflatten(x: &[f64]) -> Vec<V5> {
    x.chunks(5).map(V5::from_column_slice).collect()
}

/// The singular split at one point: Q^K from the null form and the remainder
/// 𝓖 as a bilinear map, so that 𝓕 = Q e₀/t + 𝓖(V, V).
#[derive(Debug, Clone)]
pub struct SourceSplit {
    pub t: f64,
    pub rho: f64,
    pub m: u32,
    pub chi: f64,
    pub b: NullForm,
    pub remainder: Bilinear,
}

impl SourceSplit {
    pub fn new(ctx: &SourceContext, ang: usize, t: f64, rho: f64, m: u32, chi: f64) -> Result<Self> {
        let n = ctx.n_unknowns;
        let b = ctx.null_forms[ang].clone();
        let direct = |x: &[f64]| -> Result<Vec<f64>> {
            let v = unflatten(x);
            let f = extended_source(ctx, ang, &v, t, rho, m, chi)?;
            let q = q_term(&v, t, rho, m, chi, &b)?;
            let mut out = flatten(&f);
            for k in 0..n {
                out[5 * k] -= q[k] / t;
            }
            Ok(out)
        };
        let remainder = Bilinear::from_quadratic(5 * n, 5 * n, &direct)?;
        Ok(Self { t, rho, m, chi, b, remainder })
    }

    /// Q^K e₀/t + 𝓖(V, V).
    pub fn evaluate(&self, v: &[V5]) -> Result<Vec<V5>> {
        let q = q_term(v, self.t, self.rho, self.m, self.chi, &self.b)?;
        let x = flatten(v);
        let mut g = unflatten(&self.remainder.apply(&x, &x));
        for (k, gk) in g.iter_mut().enumerate() {
            gk[0] += q[k] / self.t;
        }
        Ok(g)
    }
}

/// 𝓖 = 𝓕 − Q e₀/t at one point.
pub fn remainder(
    ctx: &SourceContext,
    ang: usize,
    v: &[V5],
    t: f64,
    rho: f64,
    m: u32,
    chi: f64,
) -> Result<Vec<V5>> {
    let mut f = extended_source(ctx, ang, v, t, rho, m, chi)?;
    let q = q_term(v, t, rho, m, chi, &ctx.null_forms[ang])?;
    for (k, fk) in f.iter_mut().enumerate() {
        fk[0] -= q[k] / t;
    }
    Ok(f)
}

/// 𝓖₂ = lim_{t→0} t·𝓖(t, V) at fixed V, by polynomial extrapolation in √t.
pub fn remainder_leading(ctx: &SourceContext, ang: usize, v: &[V5], rho: f64, m: u32, chi: f64) -> Result<Vec<V5>> {
    let ts = [1e-6, 2e-6, 4e-6, 8e-6, 1.6e-5];
    let samples: Vec<Vec<V5>> = ts
        .iter()
        .map(|&t| Ok(remainder(ctx, ang, v, t, rho, m, chi)?.into_iter().map(|x| x * t).collect()))
        .collect::<Result<_>>()?;
    let xs: Vec<f64> = ts.iter().map(|t| t.sqrt()).collect();
    let mut out = vec![V5::zeros(); v.len()];
    for (k, ok) in out.iter_mut().enumerate() {
        for c in 0..5 {
            let ys: Vec<f64> = samples.iter().map(|s| s[k][c]).collect();
            ok[c] = crate::linalg::extrapolate_to_zero(&xs, &ys);
        }
    }
    if out.iter().any(|x| !x.iter().all(|v| v.is_finite())) {
        return Err(Error::Numerical("non-finite leading remainder".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{map_inverse, PhysicalPoint};
    use crate::linalg::{d1_central, M4};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_v(rng: &mut ChaCha8Rng, n: usize) -> Vec<V5> {
        (0..n).map(|_| V5::from_fn(|_, _| rng.gen_range(-1.0..1.0))).collect()
    }

    #[test]
    fn zero_coefficients_or_zero_state_give_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ctx = SourceContext::new(&CartesianCoeffs::zeros(2), &[(1.2, 0.4)], Transcription::Displayed).unwrap();
        let v = random_v(&mut rng, 2);
        assert!(extended_source(&ctx, 0, &v, 0.3, 0.95, 1, 1.0).unwrap().iter().all(|x| x.amax() == 0.0));
        let a = CartesianCoeffs::random(2, 1.0, &mut rng);
        let ctx = SourceContext::new(&a, &[(1.2, 0.4)], Transcription::Displayed).unwrap();
        let z = vec![V5::zeros(); 2];
        assert!(extended_source(&ctx, 0, &z, 0.3, 0.95, 1, 1.0).unwrap().iter().all(|x| x.amax() == 0.0));
    }

    #[test]
    fn gradient_round_trip() {
        let g = vec![[0.3, -1.2, 0.5, 0.7, 2.0]];
        let v = v_from_gradients(&g, 0.2, 0.9).unwrap();
        let back = gradients_from_v(&v, 0.2, 0.9).unwrap();
        for q in 0..5 {
            assert!((back[0][q] - g[0][q]).abs() < 1e-12);
        }
    }

    /// The compact source equals Ω³ā∇̄ū∇̄ū at the mapped physical point.
    #[test]
    fn physical_side_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = CartesianCoeffs::random(1, 1.0, &mut rng);
        let ubar = |p: &PhysicalPoint| {
            (0.2 * p.tbar).sin() * (-(p.rbar - 2.0).powi(2)).exp() * (1.0 + 0.3 * p.theta.cos() * p.phi.sin())
        };
        for &(t, r, th, ph) in &[(0.3, 0.8, 1.1, 0.4), (0.1, 0.6, 2.0, 3.0), (0.45, 0.95, 0.7, 5.0)] {
            let c = CompactPoint::new(t, r, th, ph);
            let p = map_inverse(&c).unwrap();
            let h = 1e-5;
            let sh = |k: usize, d: f64| {
                let mut q = [p.tbar, p.rbar, p.theta, p.phi];
                q[k] += d;
                PhysicalPoint::new(q[0], q[1], q[2], q[3])
            };
            let dbar: Vec<f64> = (0..4).map(|k| d1_central(|d| ubar(&sh(k, d)), 0.0, h)).collect();
            let abar = coefficients::barred_components(&a, &p).unwrap();
            let m: &M4 = abar.get(0, 0, 0);
            let mut ftilde = 0.0;
            for mu in 0..4 {
                for nu in 0..4 {
                    ftilde += m[(mu, nu)] * dbar[mu] * dbar[nu];
                }
            }
            let om = geometry::conformal_factor(&c).unwrap();
            let want = om.powi(3) * ftilde;
            let u = |q: [f64; 4]| {
                let cc = CompactPoint::new(q[0], q[1], q[2], q[3]);
                geometry::conformal_factor(&cc).unwrap() * ubar(&map_inverse(&cc).unwrap())
            };
            let x = [t, r, th, ph];
            let du = |k: usize| {
                d1_central(
                    |d| {
                        let mut q = x;
                        q[k] += d;
                        u(q)
                    },
                    0.0,
                    1e-6,
                )
            };
            let g = [du(0), du(1), du(2), du(3), u(x)];
            let ac = coefficients::compact_components(&a, &c).unwrap();
            let f = source_f_from_gradients(&[g], t, r, &ac).unwrap()[0];
            assert!((f - want).abs() < 1e-7 * (1.0 + want.abs()), "{f} vs {want}");
        }
    }

    #[test]
    fn rows_follow_transcription() {
        let f = [2.0];
        let (t, r) = (0.3, 0.9);
        let d = r * r - (1.0 - r) * (1.0 - r) * t;
        let disp = source_rows(&f, t, r, Transcription::Displayed).unwrap()[0];
        let chain = source_rows(&f, t, r, Transcription::ChainConsistent).unwrap()[0];
        assert!((disp[0] - chain[0]).abs() < 1e-15);
        assert!((disp[1] / chain[1] - (1.0 - r)).abs() < 1e-13);
        assert!((chain[1] + t.sqrt() * (1.0 - r) * r * r * 2.0 / (d * d)).abs() < 1e-13);
        assert_eq!(disp[2], 0.0);
    }

    #[test]
    fn split_resums_to_direct_source() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1, 2] {
            let a = CartesianCoeffs::random(n, 1.0, &mut rng);
            let ctx = SourceContext::new(&a, &[(1.3, 0.2)], Transcription::Displayed).unwrap();
            for &(t, rho) in &[(0.3, 0.996), (0.01, 0.9975), (1e-3, 0.995)] {
                let split = SourceSplit::new(&ctx, 0, t, rho, 1, 0.7).unwrap();
                for _ in 0..5 {
                    let v = random_v(&mut rng, n);
                    let direct = extended_source(&ctx, 0, &v, t, rho, 1, 0.7).unwrap();
                    let resum = split.evaluate(&v).unwrap();
                    let scale = direct.iter().map(|x| x.amax()).fold(1.0, f64::max);
                    for (x, y) in direct.iter().zip(&resum) {
                        assert!((x - y).amax() < 1e-9 * scale, "{}", (x - y).amax());
                    }
                }
            }
        }
    }

    #[test]
    fn projected_leading_remainder_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = CartesianCoeffs::random(2, 1.0, &mut rng);
        let ctx = SourceContext::new(&a, &[(std::f64::consts::FRAC_PI_2, 0.0)], Transcription::Displayed).unwrap();
        for _ in 0..5 {
            let v = random_v(&mut rng, 2);
            let g2 = remainder_leading(&ctx, 0, &v, 0.997, 1, 1.0).unwrap();
            let scale = remainder(&ctx, 0, &v, 1e-3, 0.997, 1, 1.0).unwrap().iter().map(|x| x.amax()).fold(0.0, f64::max) * 1e-3;
            for g in &g2 {
                for c in 1..5 {
                    assert!(g[c].abs() < 1e-9 * (1.0 + scale), "component {c}: {}", g[c]);
                }
            }
        }
    }
}
