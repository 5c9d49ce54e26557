//! Physical Cauchy data (v̄, w̄, z̄) = (ū, ∂_t̄ū, ∂_r̄ū) on the hyperboloid
//! t̄² − r̄² = 1/t₀, its conformal image (v, w, z) = (u, ∂ₜu, ∂ᵣu) on t = t₀,
//! the first-order data V̂, the cutoff extension and the constraint residuals.

use crate::error::{Error, Result};
use crate::evolution::grid::{Grid, StateField};
use crate::expr::{Expr, Var};
use crate::geometry;
use crate::linalg::{self, V5};
use crate::symmetrizer::{self, ChiParams, TimeFunctions, BETA0, SQRT5};
use std::sync::Arc;

/// Which form of the data maps to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DataTransform {
    /// Chain rule through ψ at the run's t₀.
    #[default]
    General,
    /// Closed forms valid for t₀ = 1/2.
    Displayed,
}

/// One scalar datum as a function of (ρ, r̄, θ, φ) on the initial slice.
#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Expr(Expr),
    Table(Arc<Table>),
}

/// Value and first partials of a [`Field`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FieldJet {
    pub value: f64,
    pub d_rho: f64,
    pub d_rbar: f64,
    pub d_theta: f64,
    pub d_phi: f64,
}

impl Field {
    pub fn zero() -> Self {
        Field::Expr(Expr::zero())
    }

    pub fn depends_on_angles(&self) -> bool {
        match self {
            Field::Expr(e) => e.depends_on(Var::Theta) || e.depends_on(Var::Phi),
            Field::Table(t) => t.theta.len() > 1 || t.phi.len() > 1,
        }
    }

    fn jet(&self, t0: f64, rho: f64, rbar: f64, theta: f64, phi: f64, k: usize) -> FieldJet {
        match self {
            Field::Expr(e) => {
                let j = e.jet(&[t0, rho, rbar, theta, phi]);
                FieldJet {
                    value: j.value,
                    d_rho: j.d(Var::Rho),
                    d_rbar: j.d(Var::Rbar),
                    d_theta: j.d(Var::Theta),
                    d_phi: j.d(Var::Phi),
                }
            }
            Field::Table(t) => t.jet(k, rho, theta, phi),
        }
    }
}

/// Gridded samples on a tensor grid in (ρ, θ, φ), interpolated with local
/// cubic Lagrange polynomials along each axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub rho: Vec<f64>,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    pub n_unknowns: usize,
    /// Index ((K·nρ + i)·nθ + j)·nφ + l.
    pub values: Vec<f64>,
}

/// Lagrange weights (value, derivative) on up to four nodes nearest x.
fn lagrange_weights(nodes: &[f64], x: f64) -> (usize, Vec<f64>, Vec<f64>) {
    let n = nodes.len();
    if n == 1 {
        return (0, vec![1.0], vec![0.0]);
    }
    let k = n.min(4);
    let pos = nodes.partition_point(|v| *v <= x);
    let start = pos.saturating_sub(k / 2).min(n - k);
    let xs = &nodes[start..start + k];
    let mut w = vec![0.0; k];
    let mut dw = vec![0.0; k];
    for i in 0..k {
        let mut p = 1.0;
        let mut dp = 0.0;
        for j in 0..k {
            if j == i {
                continue;
            }
            let den = xs[i] - xs[j];
            dp = dp * (x - xs[j]) / den + p / den;
            p *= (x - xs[j]) / den;
        }
        w[i] = p;
        dw[i] = dp;
    }
    (start, w, dw)
}

impl Table {
    fn at(&self, k: usize, i: usize, j: usize, l: usize) -> f64 {
        self.values[((k * self.rho.len() + i) * self.theta.len() + j) * self.phi.len() + l]
    }

    fn jet(&self, k: usize, rho: f64, theta: f64, phi: f64) -> FieldJet {
        let (si, wi, dwi) = lagrange_weights(&self.rho, rho);
        let (sj, wj, dwj) = lagrange_weights(&self.theta, theta);
        let (sl, wl, dwl) = lagrange_weights(&self.phi, phi);
        let mut out = FieldJet::default();
        for (a, (w1, d1)) in wi.iter().zip(&dwi).enumerate() {
            for (b, (w2, d2)) in wj.iter().zip(&dwj).enumerate() {
                for (c, (w3, d3)) in wl.iter().zip(&dwl).enumerate() {
                    let v = self.at(k, si + a, sj + b, sl + c);
                    out.value += w1 * w2 * w3 * v;
                    out.d_rho += d1 * w2 * w3 * v;
                    out.d_theta += w1 * d2 * w3 * v;
                    out.d_phi += w1 * w2 * d3 * v;
                }
            }
        }
        out
    }
}

/// Physical data for every unknown K.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentData {
    pub vbar: Field,
    pub wbar: Field,
    /// `None` derives z̄ from v̄ and w̄ so the data are tangent to the slice.
    pub zbar: Option<Field>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalData {
    pub components: Vec<ComponentData>,
}

/// Values of the physical data at one point of the initial slice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalSample {
    pub vbar: f64,
    pub wbar: f64,
    pub zbar: f64,
    pub dvbar_theta: f64,
    pub dvbar_phi: f64,
}

impl PhysicalSample {
    pub fn zero() -> Self {
        Self { vbar: 0.0, wbar: 0.0, zbar: 0.0, dvbar_theta: 0.0, dvbar_phi: 0.0 }
    }
}

/// Partials of the inverse map (t, r) ↦ (t̄, r̄) and of Ω = r̄.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseMapPartials {
    pub tbar: f64,
    pub rbar: f64,
    pub dt_tbar: f64,
    pub dr_tbar: f64,
    pub dt_rbar: f64,
    pub dr_rbar: f64,
}

pub fn inverse_map_partials(t: f64, r: f64) -> Result<InverseMapPartials> {
    let d = geometry::check_region(t, r)?;
    let x = 1.0 - r;
    let dt = -r / (2.0 * x * t * t);
    Ok(InverseMapPartials {
        tbar: (r * r + t * x * x) / (2.0 * r * x * t),
        rbar: d / (2.0 * r * x * t),
        dt_tbar: dt,
        dr_tbar: 1.0 / (2.0 * x * x * t) - 1.0 / (2.0 * r * r),
        dt_rbar: dt,
        dr_rbar: 1.0 / (2.0 * t * x * x) + 1.0 / (2.0 * r * r),
    })
}

impl PhysicalData {
    pub fn zeros(n: usize) -> Self {
        Self {
            components: (0..n)
                .map(|_| ComponentData { vbar: Field::zero(), wbar: Field::zero(), zbar: None })
                .collect(),
        }
    }

    /// Data from expression strings, one per unknown.
    pub fn from_exprs(vbar: &[&str], wbar: &[&str], zbar: Option<&[&str]>) -> Result<Self> {
        if vbar.len() != wbar.len() || zbar.is_some_and(|z| z.len() != vbar.len()) {
            return Err(Error::Config("data expression lists must have equal length".into()));
        }
        let mut components = Vec::with_capacity(vbar.len());
        for k in 0..vbar.len() {
            components.push(ComponentData {
                vbar: Field::Expr(Expr::parse(vbar[k])?),
                wbar: Field::Expr(Expr::parse(wbar[k])?),
                zbar: match zbar {
                    Some(z) => Some(Field::Expr(Expr::parse(z[k])?)),
                    None => None,
                },
            });
        }
        Ok(Self { components })
    }

    /// Data from CSV text with header `rho,theta,phi,K,vbar,wbar,zbar` on a
    /// full tensor grid.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| Error::Parse("empty data CSV".into()))?
            .split(',')
            .map(|s| s.trim().to_string())
            .collect();
        let want = ["rho", "theta", "phi", "K", "vbar", "wbar", "zbar"];
        if header != want {
            return Err(Error::Parse(format!("data CSV header must be {}", want.join(","))));
        }
        let mut rows = Vec::new();
        for (n, l) in lines.enumerate() {
            let f: Vec<&str> = l.split(',').map(str::trim).collect();
            if f.len() != 7 {
                return Err(Error::Parse(format!("data CSV row {} has {} fields", n + 2, f.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Parse(format!("bad number '{s}' in data CSV")));
            let k = f[3].parse::<usize>().map_err(|_| Error::Parse(format!("bad unknown index '{}'", f[3])))?;
            rows.push(([num(f[0])?, num(f[1])?, num(f[2])?], k, [num(f[4])?, num(f[5])?, num(f[6])?]));
        }
        let axis = |c: usize| -> Vec<f64> {
            let mut v: Vec<f64> = rows.iter().map(|r| r.0[c]).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        let (rho, theta, phi) = (axis(0), axis(1), axis(2));
        let n = rows.iter().map(|r| r.1).max().map_or(0, |m| m + 1);
        let size = rho.len() * theta.len() * phi.len();
        if rows.len() != n * size {
            return Err(Error::Parse(format!(
                "data CSV is not a full tensor grid: {} rows for {} unknowns × {} nodes",
                rows.len(),
                n,
                size
            )));
        }
        let mut vals = [vec![f64::NAN; n * size], vec![f64::NAN; n * size], vec![f64::NAN; n * size]];
        let find = |ax: &[f64], x: f64| ax.binary_search_by(|v| v.total_cmp(&x)).expect("axis node");
        for (c, k, v) in &rows {
            let ix = ((k * rho.len() + find(&rho, c[0])) * theta.len() + find(&theta, c[1])) * phi.len()
                + find(&phi, c[2]);
            for q in 0..3 {
                vals[q][ix] = v[q];
            }
        }
        if vals.iter().any(|v| v.iter().any(|x| x.is_nan())) {
            return Err(Error::Parse("data CSV has duplicate or missing nodes".into()));
        }
        let [vv, ww, zz] = vals;
        let mk = |values: Vec<f64>| {
            Field::Table(Arc::new(Table {
                rho: rho.clone(),
                theta: theta.clone(),
                phi: phi.clone(),
                n_unknowns: n,
                values,
            }))
        };
        let (fv, fw, fz) = (mk(vv), mk(ww), mk(zz));
        Ok(Self {
            components: (0..n)
                .map(|_| ComponentData { vbar: fv.clone(), wbar: fw.clone(), zbar: Some(fz.clone()) })
                .collect(),
        })
    }

    pub fn n_unknowns(&self) -> usize {
        self.components.len()
    }

    pub fn depends_on_angles(&self) -> bool {
        self.components.iter().any(|c| {
            c.vbar.depends_on_angles()
                || c.wbar.depends_on_angles()
                || c.zbar.as_ref().is_some_and(Field::depends_on_angles)
        })
    }

    /// Samples component K at the point of {t = t₀} with compact radius ρ.
    pub fn sample(&self, k: usize, t0: f64, rho: f64, theta: f64, phi: f64, m: u32) -> Result<PhysicalSample> {
        let c = &self.components[k];
        let r = geometry::rho_to_r(rho, m);
        let ip = inverse_map_partials(t0, r)?;
        let v = c.vbar.jet(t0, rho, ip.rbar, theta, phi, k);
        let w = c.wbar.jet(t0, rho, ip.rbar, theta, phi, k);
        let zbar = match &c.zbar {
            Some(z) => z.jet(t0, rho, ip.rbar, theta, phi, k).value,
            None => {
                // dv̄/dr along the slice, then subtract the t̄-part of the tangent.
                let drho_dr = rho / (m as f64 * r);
                let dv_dr = v.d_rho * drho_dr + v.d_rbar * ip.dr_rbar;
                (dv_dr - ip.dr_tbar * w.value) / ip.dr_rbar
            }
        };
        Ok(PhysicalSample { vbar: v.value, wbar: w.value, zbar, dvbar_theta: v.d_theta, dvbar_phi: v.d_phi })
    }
}

/// Conformal data (u, ∂ₜu, ∂ᵣu, ∂_θu, ∂_φu) at t = t₀.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConformalData {
    pub v: f64,
    pub w: f64,
    pub z: f64,
    pub dv_theta: f64,
    pub dv_phi: f64,
}

/// u = Ωū and its partials through ψ at (t₀, r).
pub fn physical_to_conformal(s: &PhysicalSample, t0: f64, r: f64) -> Result<ConformalData> {
    let ip = inverse_map_partials(t0, r)?;
    let om = ip.rbar;
    Ok(ConformalData {
        v: om * s.vbar,
        w: ip.dt_rbar * s.vbar + om * (s.wbar * ip.dt_tbar + s.zbar * ip.dt_rbar),
        z: ip.dr_rbar * s.vbar + om * (s.wbar * ip.dr_tbar + s.zbar * ip.dr_rbar),
        dv_theta: om * s.dvbar_theta,
        dv_phi: om * s.dvbar_phi,
    })
}

fn check_open_unit(r: f64) -> Result<()> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Domain(format!("r = {r} outside (0, 1)")));
    }
    Ok(())
}

fn check_displayed_radius(r: f64) -> Result<f64> {
    check_open_unit(r)?;
    let e = r * r + 2.0 * r - 1.0;
    if e.abs() < geometry::REGION_TOL {
        return Err(Error::Domain(format!("r = {r} is the zero of r² + 2r − 1")));
    }
    Ok(e)
}

/// Closed-form conformal data maps for t₀ = 1/2.
pub fn physical_to_conformal_displayed(s: &PhysicalSample, r: f64) -> Result<ConformalData> {
    check_open_unit(r)?;
    let e = r * r + 2.0 * r - 1.0;
    let x = 1.0 - r;
    let om = e / (2.0 * r * x);
    Ok(ConformalData {
        v: om * s.vbar,
        w: -(2.0 * r / x) * (om * (s.wbar + s.zbar) + s.vbar),
        z: e * e / (4.0 * x.powi(3) * r.powi(3)) * s.wbar
            + (3.0 * r * r - 2.0 * r + 1.0) / (2.0 * x * x * r * r) * s.vbar
            + (4.0 * r.powi(4) - x.powi(4)) / (4.0 * x.powi(3) * r.powi(3)) * s.zbar,
        dv_theta: om * s.dvbar_theta,
        dv_phi: om * s.dvbar_phi,
    })
}

/// V̂ = M U with U from (t∂ₜu, r∂ᵣu, ∂_Λu, u) at t = t₀.
pub fn to_first_order(c: &ConformalData, t0: f64, r: f64) -> Result<V5> {
    let d = geometry::check_region(t0, r)?;
    let x = 1.0 - r;
    let tf = TimeFunctions::new(t0);
    let st = t0.sqrt();
    let ang = r * tf.p * st / d;
    Ok(V5::new(
        (1.0 + t0) * t0 * c.w / x + r * c.z,
        t0 * st * c.w / x + BETA0 * st * r * c.z,
        ang * c.dv_theta,
        ang * c.dv_phi,
        st * c.v / x,
    ))
}

/// Closed-form first-order data for t₀ = 1/2.
pub fn to_first_order_displayed(c: &ConformalData, r: f64) -> Result<V5> {
    let e = check_displayed_radius(r)?;
    let x = 1.0 - r;
    let s2 = std::f64::consts::SQRT_2;
    let ang = 11f64.sqrt() * r / (s2 * e);
    Ok(V5::new(
        3.0 * c.w / (4.0 * x) + r * c.z,
        c.w / (2.0 * s2 * x) + (1.0 + SQRT5) * r * c.z / (2.0 * s2),
        ang * c.dv_theta,
        ang * c.dv_phi,
        c.v / (s2 * x),
    ))
}

/// Inverts [`to_first_order`]: (t∂ₜu, r∂ᵣu, ∂_θu, ∂_φu, u) from V̂ via M⁻¹.
pub fn first_order_to_derivatives(vhat: &V5, t0: f64, r: f64) -> Result<[f64; 5]> {
    let u = symmetrizer::change_of_variables_inv(t0, r)? * vhat;
    let x = 1.0 - r;
    let st = t0.sqrt();
    Ok([x * u[0], u[1] / st, x * u[2] / st, x * u[3] / st, x * u[4] / st])
}

/// V̂ at one point from physical data.
pub fn first_order_at(
    data: &PhysicalData,
    k: usize,
    t0: f64,
    rho: f64,
    theta: f64,
    phi: f64,
    m: u32,
    transform: DataTransform,
) -> Result<V5> {
    let s = data.sample(k, t0, rho, theta, phi, m)?;
    let r = geometry::rho_to_r(rho, m);
    match transform {
        DataTransform::General => to_first_order(&physical_to_conformal(&s, t0, r)?, t0, r),
        DataTransform::Displayed => to_first_order_displayed(&physical_to_conformal_displayed(&s, r)?, r),
    }
}

/// V̂ at every grid point inside the support of χ; zero elsewhere.
pub fn first_order_field(
    data: &PhysicalData,
    grid: &Grid,
    m: u32,
    chi: &ChiParams,
    t0: f64,
    transform: DataTransform,
) -> Result<StateField> {
    if data.n_unknowns() == 0 {
        return Err(Error::Config("data must have at least one unknown".into()));
    }
    if grid.mode == crate::evolution::grid::GridMode::Spherical && data.depends_on_angles() {
        return Err(Error::Config("spherical mode requires angle-independent data".into()));
    }
    let n = data.n_unknowns();
    let mut out = StateField::zeros(grid, n, t0);
    let (lo, hi) = chi.support();
    for i in 0..grid.n_rho {
        let rho = grid.rho(i);
        if rho <= lo || rho >= hi {
            continue;
        }
        for a in 0..grid.n_angles() {
            let (th, ph) = grid.angles(a);
            for k in 0..n {
                let v = first_order_at(data, k, t0, rho, th, ph, m, transform)?;
                out.set(grid.point(i, a), k, &v);
            }
        }
    }
    Ok(out)
}

/// Multiplies by χ; the result vanishes outside the support and equals V̂ on [ρ₀, ρ₁].
pub fn extend_to_torus(vhat: &StateField, grid: &Grid, chi: &ChiParams) -> StateField {
    let mut out = vhat.clone();
    for i in 0..grid.n_rho {
        let c = symmetrizer::cutoff(grid.rho(i), chi).0;
        for a in 0..grid.n_angles() {
            let p = grid.point(i, a);
            for k in 0..out.n_unknowns {
                let s = out.index(p, k, 0);
                for v in &mut out.data[s..s + 5] {
                    *v *= c;
                }
            }
        }
    }
    out
}

/// Max norms of the constraint residuals over [ρ₀, ρ₁].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConstraintResidual {
    /// Radial constraint with constants evaluated at the run's t₀.
    pub res1: f64,
    /// Angular constraint with the run's t₀.
    pub res2: f64,
    /// Radial constraint with the closed-form constants for t₀ = 1/2.
    pub res1_displayed: f64,
    /// Angular constraint with the closed-form constants for t₀ = 1/2.
    pub res2_displayed: f64,
}

/// Pointwise residuals given V̂, ∂ρV̂₄ and ∂_ΛV̂₄.
pub fn constraint_residual_point(
    v: &V5,
    d_rho_v4: f64,
    d_ang_v4: [f64; 2],
    rho: f64,
    m: u32,
    t0: f64,
) -> Result<ConstraintResidual> {
    let r = geometry::rho_to_r(rho, m);
    let x = 1.0 - r;
    let d = geometry::check_region(t0, r)?;
    let tf = TimeFunctions::new(t0);
    let radial = x * rho / m as f64 * d_rho_v4;
    let res1 = radial - (t0.sqrt() * tf.a1 * v[0] - (1.0 + t0) * tf.a1 * v[1] + r * v[4]);
    let k7 = (1.0 + SQRT5) / (7.0 + SQRT5);
    let res1_displayed = radial + std::f64::consts::SQRT_2 * k7 * v[0] - 3.0 * k7 * v[1] - r * v[4];
    let e = r * r + 2.0 * r - 1.0;
    let mut res2: f64 = 0.0;
    let mut res2_displayed: f64 = 0.0;
    for l in 0..2 {
        res2 = res2.max((d_ang_v4[l] - d / (r * x * tf.p) * v[2 + l]).abs());
        res2_displayed = res2_displayed.max((d_ang_v4[l] - e / (11f64.sqrt() * r * x) * v[2 + l]).abs());
    }
    Ok(ConstraintResidual { res1: res1.abs(), res2, res1_displayed: res1_displayed.abs(), res2_displayed })
}

fn fold(acc: &mut ConstraintResidual, r: &ConstraintResidual) {
    acc.res1 = acc.res1.max(r.res1);
    acc.res2 = acc.res2.max(r.res2);
    acc.res1_displayed = acc.res1_displayed.max(r.res1_displayed);
    acc.res2_displayed = acc.res2_displayed.max(r.res2_displayed);
}

/// Residuals with ρ- and angle-derivatives of the pointwise data map taken by
/// 4th-order differences of step `h` (no grid), at the given radii.
pub fn constraint_residual_data(
    data: &PhysicalData,
    rhos: &[f64],
    angles: &[(f64, f64)],
    m: u32,
    t0: f64,
    transform: DataTransform,
    h: f64,
) -> Result<ConstraintResidual> {
    let mut acc = ConstraintResidual::default();
    for k in 0..data.n_unknowns() {
        for &rho in rhos {
            for &(th, ph) in angles {
                let f = |rh: f64, t: f64, p: f64| first_order_at(data, k, t0, rh, t, p, m, transform);
                let v = f(rho, th, ph)?;
                let err = std::cell::RefCell::new(None);
                let g = |rh: f64, t: f64, p: f64| match f(rh, t, p) {
                    Ok(x) => x[4],
                    Err(e) => {
                        *err.borrow_mut() = Some(e);
                        f64::NAN
                    }
                };
                let drho = linalg::d1_central(|s| g(s, th, ph), rho, h);
                let dth = linalg::d1_central(|s| g(rho, s, ph), th, h);
                let dph = linalg::d1_central(|s| g(rho, th, s), ph, h);
                if let Some(e) = err.into_inner() {
                    return Err(e);
                }
                fold(&mut acc, &constraint_residual_point(&v, drho, [dth, dph], rho, m, t0)?);
            }
        }
    }
    Ok(acc)
}

/// Residuals of a gridded V̂ with 4th-order differences in ρ (and in the
/// angles in full mode), evaluated at grid points inside [ρ₀, ρ₁].
pub fn constraint_residual(vhat: &StateField, grid: &Grid, m: u32, chi: &ChiParams, t0: f64) -> Result<ConstraintResidual> {
    use crate::evolution::fd;
    let mut acc = ConstraintResidual::default();
    let na = grid.n_angles();
    for k in 0..vhat.n_unknowns {
        let v4: Vec<f64> = (0..grid.n_points()).map(|p| vhat.data[vhat.index(p, k, 4)]).collect();
        for i in 0..grid.n_rho {
            let rho = grid.rho(i);
            if rho < chi.rho0 || rho > chi.rho1 {
                continue;
            }
            for a in 0..na {
                let p = grid.point(i, a);
                let drho = fd::d_rho_at(&v4, grid, i, a);
                let dang = fd::d_angles_scalar_at(&v4, grid, i, a);
                fold(&mut acc, &constraint_residual_point(&vhat.get(p, k), drho, dang, rho, m, t0)?);
            }
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{map_inverse, CompactPoint};
    use proptest::prelude::*;

    const T_HALF: f64 = 0.5;

    fn sample(v: f64, w: f64, z: f64) -> PhysicalSample {
        PhysicalSample { vbar: v, wbar: w, zbar: z, dvbar_theta: 0.0, dvbar_phi: 0.0 }
    }

    #[test]
    fn zero_maps_to_zero() {
        let c = physical_to_conformal(&PhysicalSample::zero(), 0.4, 0.9).unwrap();
        assert_eq!(to_first_order(&c, 0.4, 0.9).unwrap(), V5::zeros());
        let cd = physical_to_conformal_displayed(&PhysicalSample::zero(), 0.9).unwrap();
        assert_eq!(to_first_order_displayed(&cd, 0.9).unwrap(), V5::zeros());
    }

    #[test]
    fn displayed_hand_values() {
        let c = physical_to_conformal_displayed(&sample(1.0, 0.0, 0.0), 0.5).unwrap();
        assert!((c.v - 0.5).abs() < 1e-15);
        let c = physical_to_conformal_displayed(&sample(0.0, 1.0, 0.0), 0.5).unwrap();
        assert!((c.w + 1.0).abs() < 1e-15 && (c.z - 1.0).abs() < 1e-14);
    }

    #[test]
    fn domain_errors() {
        assert!(physical_to_conformal_displayed(&sample(1.0, 0.0, 0.0), 1.0).is_err());
        assert!(physical_to_conformal(&sample(1.0, 0.0, 0.0), 0.4, 0.0).is_err());
        let c = ConformalData { v: 1.0, w: 0.0, z: 0.0, dv_theta: 0.0, dv_phi: 0.0 };
        assert!(to_first_order_displayed(&c, 2f64.sqrt() - 1.0).is_err());
        assert!(to_first_order(&c, 0.5, 2f64.sqrt() - 1.0).is_err());
    }

    #[test]
    fn inverse_map_partials_match_differences() {
        for &(t, r) in &[(0.3, 0.8), (0.45, 0.97), (0.1, 0.5)] {
            let ip = inverse_map_partials(t, r).unwrap();
            let pb = |t: f64, r: f64| map_inverse(&CompactPoint::equatorial(t, r)).unwrap();
            let h = 1e-5;
            let ft = |f: &dyn Fn(&crate::geometry::PhysicalPoint) -> f64| {
                (linalg::d1_central(|s| f(&pb(s, r)), t, h), linalg::d1_central(|s| f(&pb(t, s)), r, h))
            };
            let (a, b) = ft(&|p| p.tbar);
            let (c, d) = ft(&|p| p.rbar);
            assert!((a - ip.dt_tbar).abs() < 1e-7 * (1.0 + a.abs()));
            assert!((b - ip.dr_tbar).abs() < 1e-7 * (1.0 + b.abs()));
            assert!((c - ip.dt_rbar).abs() < 1e-7 * (1.0 + c.abs()));
            assert!((d - ip.dr_rbar).abs() < 1e-7 * (1.0 + d.abs()));
            let p = pb(t, r);
            assert!((p.tbar - ip.tbar).abs() < 1e-12 && (p.rbar - ip.rbar).abs() < 1e-12);
            assert!((ip.tbar * ip.tbar - ip.rbar * ip.rbar - 1.0 / t).abs() < 1e-9 / t);
        }
    }

    /// ū(t̄, r̄) = F(t̄, r̄) with exact physical derivatives gives u = Ωū along
    /// t = t₀; its compact derivatives by differences must match the chain output.
    #[test]
    fn chain_rule_oracle() {
        let fbar = |tb: f64, rb: f64| (0.3 * tb).sin() * (-(rb - 1.5) * (rb - 1.5)).exp() + 0.1 * tb * rb;
        let dtb = |tb: f64, rb: f64| 0.3 * (0.3 * tb).cos() * (-(rb - 1.5) * (rb - 1.5)).exp() + 0.1 * rb;
        let drb = |tb: f64, rb: f64| {
            (0.3 * tb).sin() * (-2.0 * (rb - 1.5)) * (-(rb - 1.5) * (rb - 1.5)).exp() + 0.1 * tb
        };
        let u = |t: f64, r: f64| {
            let p = map_inverse(&CompactPoint::equatorial(t, r)).unwrap();
            p.rbar * fbar(p.tbar, p.rbar)
        };
        for &(t0, r) in &[(symmetrizer::default_t0(), 0.9), (0.5, 0.8), (0.3, 0.95)] {
            let p = map_inverse(&CompactPoint::equatorial(t0, r)).unwrap();
            let s = sample(fbar(p.tbar, p.rbar), dtb(p.tbar, p.rbar), drb(p.tbar, p.rbar));
            let c = physical_to_conformal(&s, t0, r).unwrap();
            let h = 1e-5;
            assert!((c.v - u(t0, r)).abs() < 1e-13);
            let w = linalg::d1_central(|x| u(x, r), t0, h);
            let z = linalg::d1_central(|x| u(t0, x), r, h);
            assert!((c.w - w).abs() < 1e-7 * (1.0 + w.abs()), "w {} vs {}", c.w, w);
            assert!((c.z - z).abs() < 1e-7 * (1.0 + z.abs()), "z {} vs {}", c.z, z);
        }
    }

    #[test]
    fn displayed_forms_are_the_half_time_case() {
        for &r in &[0.6, 0.9, 0.99] {
            let s = PhysicalSample { vbar: 0.7, wbar: -0.3, zbar: 1.1, dvbar_theta: 0.2, dvbar_phi: -0.4 };
            let g = physical_to_conformal(&s, T_HALF, r).unwrap();
            let d = physical_to_conformal_displayed(&s, r).unwrap();
            for (a, b) in [(g.v, d.v), (g.w, d.w), (g.z, d.z), (g.dv_theta, d.dv_theta)] {
                assert!((a - b).abs() < 1e-11 * (1.0 + a.abs()), "{a} vs {b} at r={r}");
            }
            let vg = to_first_order(&g, T_HALF, r).unwrap();
            let vd = to_first_order_displayed(&g, r).unwrap();
            assert!((vg - vd).amax() < 1e-11 * (1.0 + vg.amax()));
        }
    }

    #[test]
    fn displayed_forms_differ_at_default_time() {
        let s = sample(0.7, -0.3, 1.1);
        let t0 = symmetrizer::default_t0();
        let g = physical_to_conformal(&s, t0, 0.9).unwrap();
        let d = physical_to_conformal_displayed(&s, 0.9).unwrap();
        assert!((g.w - d.w).abs() > 1e-3);
    }

    proptest! {
        #[test]
        fn first_order_round_trip(
            v in -1.0f64..1.0, w in -1.0f64..1.0, z in -1.0f64..1.0,
            dth in -1.0f64..1.0, dph in -1.0f64..1.0, r in 0.7f64..0.999, t0 in 0.05f64..0.47,
        ) {
            prop_assume!(geometry::region_gap(t0, r) > 1e-3);
            let c = ConformalData { v, w, z, dv_theta: dth, dv_phi: dph };
            let vh = to_first_order(&c, t0, r).unwrap();
            let back = first_order_to_derivatives(&vh, t0, r).unwrap();
            let want = [t0 * w, r * z, dth, dph, v];
            for q in 0..5 {
                prop_assert!((back[q] - want[q]).abs() < 1e-10 * (1.0 + want[q].abs()));
            }
        }
    }

    #[test]
    fn chain_data_satisfy_constraints() {
        let data = PhysicalData::from_exprs(
            &["gauss(rho, 0.996, 0.0005)*(1 + 0.3*cos(theta, 1)*sin(phi, 2))"],
            &["0.4*gauss(rho, 0.9965, 0.0006)"],
            None,
        )
        .unwrap();
        let t0 = symmetrizer::default_t0();
        let rhos = [0.9956, 0.996, 0.9968, 0.998];
        let angles = [(0.7, 0.3), (1.9, 4.0)];
        let mut scale: f64 = 0.0;
        for &rho in &rhos {
            for &(th, ph) in &angles {
                let v = first_order_at(&data, 0, t0, rho, th, ph, 1, DataTransform::General).unwrap();
                scale = scale.max(v.amax());
            }
        }
        let res = constraint_residual_data(&data, &rhos, &angles, 1, t0, DataTransform::General, 1e-6).unwrap();
        assert!(res.res2 < 1e-8 * scale, "{res:?} scale {scale}");
        assert!(res.res1 < 1e-8 * scale, "{res:?} scale {scale}");
        // The closed-form constants belong to t₀ = 1/2.
        assert!(res.res1_displayed > 1e-3, "{res:?}");
        let half = constraint_residual_data(&data, &rhos, &angles, 1, 0.5, DataTransform::Displayed, 1e-6).unwrap();
        assert!(half.res1_displayed < 1e-8 * scale && half.res2_displayed < 1e-8 * scale, "{half:?}");
    }

    #[test]
    fn inconsistent_radial_derivative_violates_constraint() {
        let data = PhysicalData::from_exprs(&["gauss(rho, 0.996, 0.0005)"], &["0"], Some(&["0"])).unwrap();
        let res = constraint_residual_data(
            &data,
            &[0.9958, 0.996],
            &[(1.0, 0.0)],
            1,
            symmetrizer::default_t0(),
            DataTransform::General,
            1e-6,
        )
        .unwrap();
        assert!(res.res1 > 1e-3);
    }

    fn chi() -> ChiParams {
        ChiParams { rho0: 0.9955, rho1: 0.9985, alpha: 0.0005 }
    }

    #[test]
    fn extension_restricts_and_vanishes() {
        let data = PhysicalData::from_exprs(&["1 + rho"], &["0.5"], None).unwrap();
        let grid = Grid::spherical(&chi(), 128).unwrap();
        let t0 = symmetrizer::default_t0();
        let vhat = first_order_field(&data, &grid, 1, &chi(), t0, DataTransform::General).unwrap();
        let ext = extend_to_torus(&vhat, &grid, &chi());
        let (lo, hi) = chi().support();
        for i in 0..grid.n_rho {
            let rho = grid.rho(i);
            let (a, b) = (vhat.get(i, 0), ext.get(i, 0));
            if rho >= 0.9955 && rho <= 0.9985 {
                assert_eq!(a, b);
            }
            if rho <= lo || rho >= hi {
                assert_eq!(b, V5::zeros());
            }
        }
        // Discrete derivative across the cutoff is bounded by the χ′ and interior bounds.
        let dchi = (0..grid.n_rho).map(|i| symmetrizer::cutoff(grid.rho(i), &chi()).1.abs()).fold(0.0, f64::max);
        let vmax = vhat.max_abs();
        for c in 0..5 {
            let f: Vec<f64> = (0..grid.n_rho).map(|i| ext.get(i, 0)[c]).collect();
            let g: Vec<f64> = (0..grid.n_rho).map(|i| vhat.get(i, 0)[c]).collect();
            let dint = (2..grid.n_rho - 2)
                .filter(|&i| grid.rho(i - 2) > lo && grid.rho(i + 2) < hi)
                .map(|i| crate::evolution::fd::d_rho_at(&g, &grid, i, 0).abs())
                .fold(0.0, f64::max);
            for i in 0..grid.n_rho {
                let d = crate::evolution::fd::d_rho_at(&f, &grid, i, 0).abs();
                assert!(d <= 1.5 * (dchi * vmax + dint) + 1e-12);
            }
        }
    }

    #[test]
    fn gridded_constraint_residual_converges() {
        let data = PhysicalData::from_exprs(&["gauss(rho, 0.997, 0.0004)"], &["0.3*gauss(rho, 0.997, 0.0004)"], None)
            .unwrap();
        let t0 = symmetrizer::default_t0();
        let mut errs = Vec::new();
        for n in [128, 256] {
            let grid = Grid::spherical(&chi(), n).unwrap();
            let vhat = first_order_field(&data, &grid, 1, &chi(), t0, DataTransform::General).unwrap();
            errs.push(constraint_residual(&vhat, &grid, 1, &chi(), t0).unwrap().res1);
        }
        assert!(errs[0] / errs[1] > 12.0, "{errs:?}");
    }

    #[test]
    fn spherical_mode_rejects_angular_data() {
        let data = PhysicalData::from_exprs(&["cos(theta, 1)"], &["0"], None).unwrap();
        let grid = Grid::spherical(&chi(), 32).unwrap();
        assert!(first_order_field(&data, &grid, 1, &chi(), 0.4, DataTransform::General).is_err());
    }

    #[test]
    fn csv_table_interpolates_cubics_exactly() {
        let mut text = String::from("rho,theta,phi,K,vbar,wbar,zbar\n");
        let rhos: Vec<f64> = (0..8).map(|i| 0.99 + 0.001 * i as f64).collect();
        let f = |x: f64| 2.0 + 3.0 * (x - 0.99) - 50.0 * (x - 0.99).powi(2) + 1e4 * (x - 0.99).powi(3);
        for r in &rhos {
            text += &format!("{r},1.5707963267948966,0,0,{},{},0\n", f(*r), 0.5 * f(*r));
        }
        let data = PhysicalData::from_csv(&text).unwrap();
        let Field::Table(t) = &data.components[0].vbar else { panic!("table") };
        let j = t.jet(0, 0.99345, 1.0, 0.0);
        assert!((j.value - f(0.99345)).abs() < 1e-12);
        let df = linalg::d1_central(f, 0.99345, 1e-6);
        assert!((j.d_rho - df).abs() < 1e-6);
        assert!(PhysicalData::from_csv("rho,theta\n1,2\n").is_err());
        assert!(PhysicalData::from_csv("rho,theta,phi,K,vbar,wbar,zbar\n0.1,0,0,0,1,1\n").is_err());
    }
}
