//! Geometric quantities of normal graphs and the quadratic remainder of the
//! graphical flow equation.
//!
//! Heights over the round bases are radial graphs rho = R + u; writing
//! phi = ln(rho), the normal speed has the closed form
//!
//! ```text
//!   -w H(rho) = -(n - Lap phi + <grad phi, Hess phi, grad phi>/v^2) / rho,
//!   v = w = sqrt(1 + |grad phi|^2),
//! ```
//!
//! with all operators on the unit circle/sphere. Flat bases use the
//! divergence-form graph speed. The remainder is defined by subtraction,
//!
//! ```text
//!   Q(u) = (-w H_u) + H0 - (Lap u + |A|^2 u),
//! ```
//!
//! so the decomposition of the flow speed into linear part plus remainder is
//! exact by construction and the quadratic bounds are checked, not assumed.

use crate::error::{Error, Result};
use crate::field::GraphFunction;
use crate::geometry::{BaseGeometry, EvolvingGeometry, Plan};
use crate::scalar::{lit, to_f64, Real};

/// First/second angular derivatives of phi = ln(rho) for radial graphs, in
/// the orthonormal frame of the unit base.
pub(crate) struct RadialJet<T> {
    pub rho: Vec<T>,
    /// gradient frame components (g_theta, g_phi); g_phi = 0 on the circle
    pub g_t: Vec<T>,
    pub g_p: Vec<T>,
    /// covariant Hessian frame components of phi on the unit base
    pub h_tt: Vec<T>,
    pub h_tp: Vec<T>,
    pub h_pp: Vec<T>,
    /// unit-base Laplacian of phi
    pub lap1: Vec<T>,
}

impl<T: Real> RadialJet<T> {
    pub fn grad_sq(&self, i: usize) -> T {
        self.g_t[i] * self.g_t[i] + self.g_p[i] * self.g_p[i]
    }

    pub fn contract(&self, i: usize) -> T {
        let two = lit::<T>(2.0);
        self.g_t[i] * self.g_t[i] * self.h_tt[i]
            + two * self.g_t[i] * self.g_p[i] * self.h_tp[i]
            + self.g_p[i] * self.g_p[i] * self.h_pp[i]
    }
}

/// Build the log-radial jet; fails when the graph leaves the radial chart
/// (rho must stay positive).
pub(crate) fn radial_jet<T: Real>(geom: &BaseGeometry<T>, rho: &[T]) -> Result<RadialJet<T>> {
    let min_rho = rho.iter().fold(T::infinity(), |m, &v| m.min(v));
    if min_rho <= T::zero() {
        return Err(Error::GraphValidity {
            min_offset: to_f64(min_rho),
        });
    }
    let phi: Vec<T> = rho.iter().map(|&r| r.ln()).collect();
    match &geom.plan {
        Plan::Angle(p) => {
            let c = p.analyze(&phi);
            let g_t = p.synthesize(&p.differentiate(&c, 1));
            let h_tt = p.synthesize(&p.differentiate(&c, 2));
            let n = rho.len();
            Ok(RadialJet {
                rho: rho.to_vec(),
                lap1: h_tt.clone(),
                g_t,
                g_p: vec![T::zero(); n],
                h_tt,
                h_tp: vec![T::zero(); n],
                h_pp: vec![T::zero(); n],
            })
        }
        Plan::Sphere(p) => {
            let jet = p.jet(&p.analyze(&phi));
            let frame = geom.sphere_hessian_frame(p, &jet);
            let mut g_t = vec![T::zero(); rho.len()];
            let mut g_p = vec![T::zero(); rho.len()];
            for j in 0..p.nlat {
                let s = p.sin_lat[j];
                for i in 0..p.nlon {
                    let idx = j * p.nlon + i;
                    g_t[idx] = jet.f_th[idx];
                    g_p[idx] = jet.f_ph[idx] / s;
                }
            }
            Ok(RadialJet {
                rho: rho.to_vec(),
                g_t,
                g_p,
                h_tt: frame.tt,
                h_tp: frame.tp,
                h_pp: frame.pp,
                lap1: jet.lap1,
            })
        }
        Plan::Torus(_) => Err(Error::Unsupported("radial jet needs a round base")),
    }
}

/// Normal speed -w(rho) H(rho) of the radial graph, per grid point.
pub(crate) fn radial_speed<T: Real>(geom: &BaseGeometry<T>, rho: &[T]) -> Result<Vec<T>> {
    let jet = radial_jet(geom, rho)?;
    let n = lit::<T>(geom.dim() as f64);
    Ok((0..rho.len())
        .map(|i| {
            let v2 = T::one() + jet.grad_sq(i);
            -(n - jet.lap1[i] + jet.contract(i) / v2) / jet.rho[i]
        })
        .collect())
}

/// Graph speed -w H for flat bases (divergence-form mean curvature).
pub(crate) fn flat_speed<T: Real>(geom: &BaseGeometry<T>, u: &[T]) -> Vec<T> {
    match &geom.plan {
        Plan::Angle(p) => {
            let ds = T::one() / geom.angle_unit();
            let c = p.analyze(u);
            let ux: Vec<T> = p
                .synthesize(&p.differentiate(&c, 1))
                .into_iter()
                .map(|d| d * ds)
                .collect();
            let uxx: Vec<T> = p
                .synthesize(&p.differentiate(&c, 2))
                .into_iter()
                .map(|d| d * ds * ds)
                .collect();
            (0..u.len())
                .map(|i| uxx[i] / (T::one() + ux[i] * ux[i]))
                .collect()
        }
        Plan::Torus(p) => {
            let ds = T::one() / geom.angle_unit();
            let c = p.analyze(u);
            let term = |ox: usize, oy: usize, k: usize| -> Vec<T> {
                let mut s = T::one();
                for _ in 0..k {
                    s = s * ds;
                }
                p.synthesize(&p.differentiate(&c, ox, oy))
                    .into_iter()
                    .map(|d| d * s)
                    .collect()
            };
            let ux = term(1, 0, 1);
            let uy = term(0, 1, 1);
            let uxx = term(2, 0, 2);
            let uyy = term(0, 2, 2);
            let uxy = term(1, 1, 2);
            (0..u.len())
                .map(|i| {
                    let two = lit::<T>(2.0);
                    let v2 = T::one() + ux[i] * ux[i] + uy[i] * uy[i];
                    ((T::one() + uy[i] * uy[i]) * uxx[i] - two * ux[i] * uy[i] * uxy[i]
                        + (T::one() + ux[i] * ux[i]) * uyy[i])
                        / v2
                })
                .collect()
        }
        Plan::Sphere(_) => unreachable!("flat speed on a round base"),
    }
}

fn speed_minus_wh<T: Real>(geom: &BaseGeometry<T>, rho_or_u: SpeedInput<T>) -> Result<Vec<T>> {
    match rho_or_u {
        SpeedInput::Radial(rho) => radial_speed(geom, rho),
        SpeedInput::Flat(u) => Ok(flat_speed(geom, u)),
    }
}

enum SpeedInput<'a, T> {
    Radial(&'a [T]),
    Flat(&'a [T]),
}

fn rho_from_height<T: Real>(geom: &BaseGeometry<T>, u: &[T]) -> Vec<T> {
    let r = geom.scale();
    u.iter().map(|&h| r + h).collect()
}

/// Relative area element v of the graph versus the base.
pub fn area_element<T: Real>(u: &GraphFunction<T>) -> Result<Vec<T>> {
    let geom = &u.geom;
    if geom.kind().is_radial() {
        let rho = rho_from_height(geom, &u.values);
        let jet = radial_jet(geom, &rho)?;
        let r = geom.scale();
        let n = geom.dim() as i32;
        Ok((0..rho.len())
            .map(|i| (rho[i] / r).powi(n) * (T::one() + jet.grad_sq(i)).sqrt())
            .collect())
    } else {
        Ok(geom
            .grad_magnitude(&u.values, None)
            .into_iter()
            .map(|g| (T::one() + g * g).sqrt())
            .collect())
    }
}

/// Speed factor w (inverse cosine of the normal tilt).
pub fn speed_factor<T: Real>(u: &GraphFunction<T>) -> Result<Vec<T>> {
    let geom = &u.geom;
    if geom.kind().is_radial() {
        let rho = rho_from_height(geom, &u.values);
        let jet = radial_jet(geom, &rho)?;
        Ok((0..rho.len())
            .map(|i| (T::one() + jet.grad_sq(i)).sqrt())
            .collect())
    } else {
        area_element(u)
    }
}

/// Mean curvature of the graph hypersurface, evaluated at x + u(x) n(x).
pub fn mean_curvature<T: Real>(u: &GraphFunction<T>) -> Result<Vec<T>> {
    let geom = &u.geom;
    if geom.kind().is_radial() {
        let rho = rho_from_height(geom, &u.values);
        let speed = radial_speed(geom, &rho)?;
        let jet = radial_jet(geom, &rho)?;
        Ok((0..rho.len())
            .map(|i| {
                let w = (T::one() + jet.grad_sq(i)).sqrt();
                -speed[i] / w
            })
            .collect())
    } else {
        let speed = flat_speed(geom, &u.values);
        let grad = geom.grad_magnitude(&u.values, None);
        Ok((0..speed.len())
            .map(|i| {
                let w = (T::one() + grad[i] * grad[i]).sqrt();
                -speed[i] / w
            })
            .collect())
    }
}

/// Linearization L u = Lap u + |A|^2 u at the base.
pub fn linearized<T: Real>(u: &GraphFunction<T>) -> Vec<T> {
    let geom = &u.geom;
    let lap = geom.laplacian(&u.values, None);
    let a2 = geom.second_form_sq();
    lap.iter()
        .zip(u.values.iter())
        .map(|(&l, &h)| l + a2 * h)
        .collect()
}

fn require_smallness<T: Real>(geom: &BaseGeometry<T>, values: &[T], radius: Option<T>) -> Result<()> {
    let threshold = match radius {
        Some(r) => lit::<T>(0.3) * r,
        None => geom.graph_threshold(),
    };
    let sup = values.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let grad = geom
        .grad_magnitude(values, radius)
        .into_iter()
        .fold(T::zero(), |m, v| m.max(v.abs()));
    let c01 = sup + grad;
    if c01 >= threshold {
        return Err(Error::Smallness {
            norm: to_f64(c01),
            threshold: to_f64(threshold),
        });
    }
    Ok(())
}

/// Quadratic remainder Q(u) over a static base; Q(0) = 0 exactly.
pub fn nonlinearity<T: Real>(u: &GraphFunction<T>) -> Result<Vec<T>> {
    nonlinearity_slice(&u.geom, &u.values)
}

/// `nonlinearity` on raw slice data (used when mapping space-time fields).
pub fn nonlinearity_slice<T: Real>(geom: &BaseGeometry<T>, values: &[T]) -> Result<Vec<T>> {
    require_smallness(geom, values, None)?;
    let speed = if geom.kind().is_radial() {
        let rho = rho_from_height(geom, values);
        speed_minus_wh(geom, SpeedInput::Radial(&rho))?
    } else {
        speed_minus_wh(geom, SpeedInput::Flat(values))?
    };
    let h0 = geom.mean_curvature();
    let lap = geom.laplacian(values, None);
    let a2 = geom.second_form_sq();
    Ok((0..values.len())
        .map(|i| speed[i] + h0 - (lap[i] + a2 * values[i]))
        .collect())
}

/// Quadratic remainder over the shrinking family at time t: the speed of the
/// graph relative to the exactly flowing base, minus the linear part
/// `Lap_{M_t} u + |A_{M_t}|^2 u`.
pub fn nonlinearity_evolving<T: Real>(
    ev: &EvolvingGeometry<T>,
    values: &[T],
    t: T,
) -> Result<Vec<T>> {
    let geom = ev.base();
    let r_t = ev.radius(t)?;
    require_smallness(geom, values, Some(r_t))?;
    let n = lit::<T>(geom.dim() as f64);
    let rho: Vec<T> = values.iter().map(|&h| r_t + h).collect();
    let speed = radial_speed(geom, &rho)?;
    let lap = geom.laplacian(values, Some(r_t));
    let a2 = n / (r_t * r_t);
    Ok((0..values.len())
        .map(|i| speed[i] + n / r_t - (lap[i] + a2 * values[i]))
        .collect())
}

/// Pointwise quadratic-bound verification for the remainder.
#[derive(Debug, Clone, serde::Serialize)]
pub struct QuadraticBoundReport {
    pub supplied_c: f64,
    /// smallest C with |Q(u)| <= C (|u|^2 + |grad u|^2 + |Hess u| (|grad u| + |u|))
    pub fitted_c_value: f64,
    /// smallest C for the two-function difference bound
    pub fitted_c_difference: f64,
    pub pass_value: bool,
    pub pass_difference: bool,
}

pub fn check_quadratic_bounds<T: Real>(
    u: &GraphFunction<T>,
    v: &GraphFunction<T>,
    supplied_c: T,
) -> Result<QuadraticBoundReport> {
    let geom = &u.geom;
    let qu = nonlinearity(u)?;
    let qv = nonlinearity(v)?;

    let grad_u = geom.grad_magnitude(&u.values, None);
    let hess_u = geom.hessian_frobenius(&u.values, None);
    let grad_v = geom.grad_magnitude(&v.values, None);
    let hess_v = geom.hessian_frobenius(&v.values, None);

    let tiny = lit::<T>(1e-14);
    let fit = |q: &[T], vals: &[T], grad: &[T], hess: &[T]| -> T {
        let mut c = T::zero();
        for i in 0..q.len() {
            let bound = vals[i] * vals[i] + grad[i] * grad[i]
                + hess[i] * (grad[i] + vals[i].abs());
            if bound > tiny {
                c = c.max(q[i].abs() / bound);
            } else if q[i].abs() > tiny {
                c = T::infinity();
            }
        }
        c
    };
    let c_u = fit(&qu, &u.values, &grad_u, &hess_u);
    let c_v = fit(&qv, &v.values, &grad_v, &hess_v);
    let fitted_value = c_u.max(c_v);

    // difference bound
    let c01 = |vals: &[T], grad: &[T]| -> T {
        let s = vals.iter().fold(T::zero(), |m, x| m.max(x.abs()));
        let g = grad.iter().fold(T::zero(), |m, x| m.max(x.abs()));
        s + g
    };
    let norm_u = c01(&u.values, &grad_u);
    let norm_v = c01(&v.values, &grad_v);
    let diff: Vec<T> = u
        .values
        .iter()
        .zip(v.values.iter())
        .map(|(&a, &b)| a - b)
        .collect();
    let grad_d = geom.grad_magnitude(&diff, None);
    let hess_d = geom.hessian_frobenius(&diff, None);

    let mut fitted_diff = T::zero();
    for i in 0..diff.len() {
        let lhs = (qu[i] - qv[i]).abs();
        let bound = (norm_u + norm_v) * (diff[i].abs() + grad_d[i] + hess_d[i])
            + (diff[i].abs() + grad_d[i]) * hess_u[i];
        if bound > tiny {
            fitted_diff = fitted_diff.max(lhs / bound);
        } else if lhs > tiny {
            fitted_diff = T::infinity();
        }
    }

    Ok(QuadraticBoundReport {
        supplied_c: to_f64(supplied_c),
        fitted_c_value: to_f64(fitted_value),
        fitted_c_difference: to_f64(fitted_diff),
        pass_value: fitted_value <= supplied_c,
        pass_difference: fitted_diff <= supplied_c,
    })
}

/// sup |Q(s u0)| / s^2 for each scale; stabilizes as s -> 0 when the
/// remainder is quadratic at the origin.
pub fn quadratic_scaling_ratios<T: Real>(
    u0: &GraphFunction<T>,
    scales: &[T],
) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(scales.len());
    for &s in scales {
        let scaled = u0.scaled(s);
        let q = nonlinearity(&scaled)?;
        let sup = q.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        out.push(sup / (s * s));
    }
    Ok(out)
}
