//! Constant Cartesian coefficients â^{Kμν}_{IJ} of the quadratic nonlinearity,
//! their spherical expansion ā = c + d/r̄ + e/r̄², the null-form scalar b^K_{IJ}
//! and the compactified components a^{Kμν}_{IJ}.

use crate::error::{Error, Result};
use crate::geometry::{self, CompactPoint, PhysicalPoint};
use crate::linalg::M4;
use rand::Rng;

/// Dense family of 4×4 matrices indexed by (K, I, J).
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffArray {
    n: usize,
    data: Vec<M4>,
}

impl CoeffArray {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![M4::zeros(); n * n * n] }
    }

    pub fn n_unknowns(&self) -> usize {
        self.n
    }

    fn idx(&self, k: usize, i: usize, j: usize) -> usize {
        assert!(k < self.n && i < self.n && j < self.n, "unknown index out of range");
        (k * self.n + i) * self.n + j
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> &M4 {
        &self.data[self.idx(k, i, j)]
    }

    pub fn get_mut(&mut self, k: usize, i: usize, j: usize) -> &mut M4 {
        let ix = self.idx(k, i, j);
        &mut self.data[ix]
    }

    /// Applies `f` to every (K,I,J) matrix.
    pub fn map(&self, f: impl Fn(&M4) -> M4) -> Self {
        Self { n: self.n, data: self.data.iter().map(f).collect() }
    }

    /// Max absolute entry over all families.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(crate::linalg::max_abs).fold(0.0, f64::max)
    }

    /// Max |self − other| over all entries.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| crate::linalg::max_abs(&(a - b)))
            .fold(0.0, f64::max)
    }

    /// Iterator over ((K, I, J), matrix).
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize, usize), &M4)> {
        let n = self.n;
        self.data.iter().enumerate().map(move |(ix, m)| ((ix / (n * n), (ix / n) % n, ix % n), m))
    }
}

/// Cartesian coefficients â^{Kμν}_{IJ}, slots (t̄, x̂¹, x̂², x̂³).
#[derive(Debug, Clone, PartialEq)]
pub struct CartesianCoeffs(pub CoeffArray);

impl CartesianCoeffs {
    pub fn zeros(n: usize) -> Self {
        Self(CoeffArray::zeros(n))
    }

    pub fn n_unknowns(&self) -> usize {
        self.0.n
    }

    pub fn set(&mut self, k: usize, i: usize, j: usize, mu: usize, nu: usize, v: f64) {
        self.0.get_mut(k, i, j)[(mu, nu)] = v;
    }

    pub fn get(&self, k: usize, i: usize, j: usize, mu: usize, nu: usize) -> f64 {
        self.0.get(k, i, j)[(mu, nu)]
    }

    pub fn is_zero(&self) -> bool {
        self.0.max_abs() == 0.0
    }

    /// Parses lines `K I J mu nu value`; blank lines and `#` comments are ignored.
    /// Repeated entries accumulate.
    pub fn parse(text: &str, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("number of unknowns must be at least 1".into()));
        }
        let mut out = Self::zeros(n);
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let tok: Vec<&str> = line.split_whitespace().collect();
            if tok.len() != 6 {
                return Err(Error::Parse(format!("line {}: expected 6 fields, got {}", lineno + 1, tok.len())));
            }
            let mut ix = [0usize; 5];
            for (slot, t) in ix.iter_mut().zip(&tok[..5]) {
                *slot = t
                    .parse()
                    .map_err(|_| Error::Parse(format!("line {}: bad index '{t}'", lineno + 1)))?;
            }
            let v: f64 = tok[5]
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad value '{}'", lineno + 1, tok[5])))?;
            if !v.is_finite() {
                return Err(Error::Parse(format!("line {}: non-finite value", lineno + 1)));
            }
            let [k, i, j, mu, nu] = ix;
            if k >= n || i >= n || j >= n || mu > 3 || nu > 3 {
                return Err(Error::Parse(format!("line {}: index out of range", lineno + 1)));
            }
            out.0.get_mut(k, i, j)[(mu, nu)] += v;
        }
        Ok(out)
    }

    /// Scalar coefficient â^{μν} for N = 1.
    pub fn scalar(a: M4) -> Self {
        let mut out = Self::zeros(1);
        *out.0.get_mut(0, 0, 0) = a;
        out
    }

    /// The classical null form: â = η⁻¹ = diag(−1,1,1,1) for N = 1.
    pub fn minkowski_null() -> Self {
        Self::scalar(geometry::minkowski())
    }

    /// Entries uniform in [−scale, scale].
    pub fn random(n: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let mut out = Self::zeros(n);
        for m in out.0.data.iter_mut() {
            *m = M4::from_fn(|_, _| rng.gen_range(-scale..=scale));
        }
        out
    }

    /// Random coefficients with b^K_{IJ} ≡ 0 in every direction:
    /// λη⁻¹ plus an antisymmetric part.
    pub fn random_null(n: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let mut out = Self::zeros(n);
        for m in out.0.data.iter_mut() {
            let a = M4::from_fn(|_, _| rng.gen_range(-scale..=scale));
            *m = geometry::minkowski() * rng.gen_range(-scale..=scale) + (a - a.transpose()) * 0.5;
        }
        out
    }
}

/// Unit radial direction n̂(θ, φ).
pub fn radial_direction(theta: f64, phi: f64) -> [f64; 3] {
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

/// ā^{Kαβ} = J̄^α_μ â^{Kμν} J̄^β_ν at a physical point (spherical components).
pub fn barred_components(a: &CartesianCoeffs, p: &PhysicalPoint) -> Result<CoeffArray> {
    let j = geometry::jacobian_spherical(p)?;
    Ok(a.0.map(|m| j * m * j.transpose()))
}

/// The c, d, e families of ā = c + d/r̄ + e/r̄² at fixed angles.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalExpansion {
    pub theta: f64,
    pub phi: f64,
    pub c: CoeffArray,
    pub d: CoeffArray,
    pub e: CoeffArray,
}

impl SphericalExpansion {
    /// c + d/r̄ + e/r̄².
    pub fn reconstruct(&self, rbar: f64) -> CoeffArray {
        let mut out = self.c.clone();
        for (dst, (d, e)) in out.data.iter_mut().zip(self.d.data.iter().zip(&self.e.data)) {
            *dst += d / rbar + e / (rbar * rbar);
        }
        out
    }

    /// b^K_{IJ} = c⁰⁰ − c⁰¹ − c¹⁰ + c¹¹.
    pub fn null_form(&self) -> NullForm {
        let n = self.c.n;
        let b = self.c.data.iter().map(|m| m[(0, 0)] - m[(0, 1)] - m[(1, 0)] + m[(1, 1)]).collect();
        NullForm { n, b }
    }
}

/// Extracts c, d, e by evaluating ā at r̄ ∈ {1, 2, 4} and solving the
/// Vandermonde system in 1/r̄.
pub fn spherical_expansion(a: &CartesianCoeffs, theta: f64, phi: f64) -> Result<SphericalExpansion> {
    let x = [1.0, 0.5, 0.25];
    let samples: Vec<CoeffArray> = x
        .iter()
        .map(|xi| barred_components(a, &PhysicalPoint::new(1.0 / xi + 1.0, 1.0 / xi, theta, phi)))
        .collect::<Result<_>>()?;
    let v = nalgebra::Matrix3::from_fn(|i, k| x[i].powi(k as i32));
    let vinv = v.try_inverse().expect("distinct nodes");
    let n = a.n_unknowns();
    let mut coef = [CoeffArray::zeros(n), CoeffArray::zeros(n), CoeffArray::zeros(n)];
    for ix in 0..n * n * n {
        for (k, c) in coef.iter_mut().enumerate() {
            c.data[ix] = samples[0].data[ix] * vinv[(k, 0)]
                + samples[1].data[ix] * vinv[(k, 1)]
                + samples[2].data[ix] * vinv[(k, 2)];
        }
    }
    let [c, d, e] = coef;
    Ok(SphericalExpansion { theta, phi, c, d, e })
}

/// Values b^K_{IJ} of the null-form scalar at one direction.
#[derive(Debug, Clone, PartialEq)]
pub struct NullForm {
    n: usize,
    b: Vec<f64>,
}

impl NullForm {
    pub fn zeros(n: usize) -> Self {
        Self { n, b: vec![0.0; n * n * n] }
    }

    pub fn n_unknowns(&self) -> usize {
        self.n
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.b[(k * self.n + i) * self.n + j]
    }

    pub fn set(&mut self, k: usize, i: usize, j: usize, v: f64) {
        self.b[(k * self.n + i) * self.n + j] = v;
    }

    /// Scalar (N = 1) null form.
    pub fn scalar(b: f64) -> Self {
        Self { n: 1, b: vec![b] }
    }

    pub fn is_zero(&self) -> bool {
        self.b.iter().all(|v| *v == 0.0)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.b.iter().zip(&other.b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Q̂^K = b^K_{IJ} ξ^I ξ^J.
    pub fn contract(&self, xi: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|k| {
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += self.get(k, i, j) * xi[i] * xi[j];
                    }
                }
                s
            })
            .collect()
    }
}

/// b^K_{IJ} = â^{K00} − â^{K01} − â^{K10} + â^{K11}, the value in the x̂¹ direction.
pub fn null_form(a: &CartesianCoeffs) -> NullForm {
    let b = a.0.data.iter().map(|m| m[(0, 0)] - m[(0, 1)] - m[(1, 0)] + m[(1, 1)]).collect();
    NullForm { n: a.n_unknowns(), b }
}

/// b^K_{IJ} = â^{Kμν} L_μ L_ν with L = −dt̄ + dr̄ in the direction (θ, φ).
pub fn null_form_at(a: &CartesianCoeffs, theta: f64, phi: f64) -> NullForm {
    let nh = radial_direction(theta, phi);
    let l = [-1.0, nh[0], nh[1], nh[2]];
    let b = a
        .0
        .data
        .iter()
        .map(|m| {
            let mut s = 0.0;
            for mu in 0..4 {
                for nu in 0..4 {
                    s += m[(mu, nu)] * l[mu] * l[nu];
                }
            }
            s
        })
        .collect();
    NullForm { n: a.n_unknowns(), b }
}

/// Compact components a^{Kμν}_{IJ} in (t, r, θ, φ) from the closed-form expansion.
pub fn compact_components(a: &CartesianCoeffs, c: &CompactPoint) -> Result<CoeffArray> {
    let exp = spherical_expansion(a, c.theta, c.phi)?;
    compact_from_expansion(&exp, c.t, c.r)
}

/// Compact components from a precomputed expansion at (t, r).
pub fn compact_from_expansion(exp: &SphericalExpansion, t: f64, r: f64) -> Result<CoeffArray> {
    let d = geometry::check_region(t, r)?;
    let x = 1.0 - r;
    let s = r * r + t * x * x;
    let n = exp.c.n;
    let mut out = CoeffArray::zeros(n);
    for ix in 0..n * n * n {
        let cc = &exp.c.data[ix];
        let dd = &exp.d.data[ix];
        let ee = &exp.e.data[ix];
        let b = cc[(0, 0)] - cc[(0, 1)] - cc[(1, 0)] + cc[(1, 1)];
        let m = &mut out.data[ix];
        m[(0, 0)] = t * t * (r / x).powi(2) * b
            + 2.0 * t.powi(3) * (cc[(0, 0)] - cc[(1, 1)])
            + t.powi(4) * x * x / (r * r) * (cc[(0, 0)] + cc[(0, 1)] + cc[(1, 0)] + cc[(1, 1)]);
        m[(0, 1)] = t * r.powi(3) / x * b
            + t * t * r * x * (cc[(0, 0)] - cc[(0, 1)] + cc[(1, 0)] - cc[(1, 1)]);
        m[(1, 0)] = t * r.powi(3) / x * b
            + t * t * r * x * (cc[(0, 0)] + cc[(0, 1)] - cc[(1, 0)] - cc[(1, 1)]);
        m[(1, 1)] = r.powi(4) * b;
        let k1 = 2.0 * r.powi(3) * x * t / d;
        for l in 2..4 {
            m[(0, l)] = -2.0 * t * t * s / d * dd[(0, l)] + 2.0 * t * t * dd[(1, l)];
            m[(l, 0)] = -2.0 * t * t * s / d * dd[(l, 0)] + 2.0 * t * t * dd[(l, 1)];
            m[(1, l)] = k1 * (dd[(1, l)] - dd[(0, l)]);
            m[(l, 1)] = k1 * (dd[(l, 1)] - dd[(l, 0)]);
            for k in 2..4 {
                m[(l, k)] = 4.0 * r * r * x * x * t * t / (d * d) * ee[(l, k)];
            }
        }
    }
    Ok(out)
}

/// a = J ā Jᵀ with ā from the direct transformation law at ψ⁻¹(c).
pub fn pushforward_oracle(a: &CartesianCoeffs, c: &CompactPoint) -> Result<CoeffArray> {
    let p = geometry::map_inverse(c)?;
    let abar = barred_components(a, &p)?;
    let j = geometry::jacobian_compact(c)?;
    Ok(abar.map(|m| j * m * j.transpose()))
}
