//! Independent verification: a method-of-lines solver for the nonparametric
//! flow equation, the exact-solution catalog, and curvature histories.
//!
//! The solver integrates `du/dt = L u + N(u)` with the same splitting the
//! mild formulation uses - the linear part `L = Lap + |A|^2` implicit and
//! spectral, the remainder `N(u) = (-w H_u) - L u` explicit - so the two
//! paths share the algebra but nothing of the solution machinery. Time
//! stepping is implicit-explicit trapezoidal/Adams-Bashforth 2 with an
//! implicit Euler first step.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{GraphFunction, SpaceTimeField};
use crate::geometry::{BaseGeometry, GeometryKind, Plan};
use crate::graph_calculus::{flat_speed, radial_jet, radial_speed};
use crate::scalar::{lit, to_f64, Real};

/// Closed-form flows used as ground truth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactKind {
    ShrinkingCircle,
    ShrinkingSphere,
    StaticFlat,
    /// height of a second shrinking circle over the first family
    ConcentricDifference,
}

#[derive(Clone, Copy, Debug)]
pub struct ExactSolution<T> {
    pub kind: ExactKind,
    pub r0: T,
    /// outer radius for the concentric pair (unused otherwise)
    pub r0_outer: T,
}

impl<T: Real> ExactSolution<T> {
    pub fn new(kind: ExactKind, r0: T) -> Self {
        Self {
            kind,
            r0,
            r0_outer: r0,
        }
    }

    pub fn concentric(r0: T, r0_outer: T) -> Self {
        Self {
            kind: ExactKind::ConcentricDifference,
            r0,
            r0_outer,
        }
    }

    fn dim(&self) -> usize {
        match self.kind {
            ExactKind::ShrinkingSphere => 2,
            _ => 1,
        }
    }

    pub fn extinction(&self) -> T {
        match self.kind {
            ExactKind::StaticFlat => T::infinity(),
            _ => self.r0 * self.r0 / lit::<T>((2 * self.dim()) as f64),
        }
    }

    /// Height over the base (or over the inner shrinking family) at time t;
    /// all catalog solutions are homogeneous in space.
    pub fn eval(&self, t: T) -> Result<T> {
        if t < T::zero() || t >= self.extinction() {
            return Err(Error::Extinction {
                t: to_f64(t),
                extinction: to_f64(self.extinction()),
            });
        }
        let two_n = lit::<T>((2 * self.dim()) as f64);
        Ok(match self.kind {
            ExactKind::StaticFlat => T::zero(),
            ExactKind::ShrinkingCircle | ExactKind::ShrinkingSphere => {
                (self.r0 * self.r0 - two_n * t).sqrt() - self.r0
            }
            ExactKind::ConcentricDifference => {
                (self.r0_outer * self.r0_outer - two_n * t).sqrt()
                    - (self.r0 * self.r0 - two_n * t).sqrt()
            }
        })
    }
}

/// Graph speed -w H_u over a static base, reused as the method-of-lines
/// right-hand side.
fn graph_speed<T: Real>(geom: &BaseGeometry<T>, u: &[T]) -> Result<Vec<T>> {
    if geom.kind().is_radial() {
        let r = geom.scale();
        let rho: Vec<T> = u.iter().map(|&h| r + h).collect();
        radial_speed(geom, &rho)
    } else {
        Ok(flat_speed(geom, u))
    }
}

/// Method-of-lines solve of the nonparametric flow equation from the height
/// `u0`, storing every step. The linear part is integrated implicitly per
/// spectral mode, the remainder explicitly (trapezoidal/AB2, implicit Euler
/// first step). The explicit remainder carries the splitting mismatch
/// `(1/rho^2 - 1) k^2`, so `steps` must resolve that CFL once the graph
/// departs from the base.
pub fn fd_solve<T: Real>(
    geom: &Arc<BaseGeometry<T>>,
    u0: &GraphFunction<T>,
    horizon: T,
    steps: usize,
) -> Result<SpaceTimeField<T>> {
    if horizon <= T::zero() {
        return Err(Error::NonPositive {
            name: "horizon",
            value: to_f64(horizon),
        });
    }
    if steps == 0 {
        return Err(Error::NonPositive {
            name: "steps",
            value: 0.0,
        });
    }
    let np = geom.num_points();
    if u0.values.len() != np {
        return Err(Error::GridMismatch {
            left: np,
            right: u0.values.len(),
        });
    }
    let dt = horizon / lit::<T>(steps as f64);
    let a2 = geom.second_form_sq();
    let rates: Vec<T> = geom.eigenvalues().iter().map(|&e| e + a2).collect();

    // explicit part N(u) = (-w H_u) - L u
    let explicit = |u: &[T], t: T| -> Result<Vec<T>> {
        let speed = graph_speed(geom, u).map_err(|e| match e {
            Error::GraphValidity { .. } => Error::ValidityLostAt { t: to_f64(t) },
            other => other,
        })?;
        let lap = geom.laplacian(u, None);
        Ok((0..np)
            .map(|i| speed[i] - lap[i] - a2 * u[i])
            .collect())
    };

    let times = SpaceTimeField::uniform_times(horizon, steps);
    let mut slices: Vec<Vec<T>> = Vec::with_capacity(steps + 1);
    slices.push(u0.values.clone());

    let mut u = u0.values.clone();
    let mut n_prev = explicit(&u, T::zero())?;

    // implicit Euler first step: (1 - dt L) u1 = u0 + dt N(u0)
    {
        let mut rhs = geom.analyze(
            &(0..np)
                .map(|i| u[i] + dt * n_prev[i])
                .collect::<Vec<T>>(),
        );
        for (s, c) in rhs.iter_mut().enumerate() {
            *c = *c / (T::one() - dt * rates[s]);
        }
        u = geom.synthesize(&rhs);
        slices.push(u.clone());
    }

    for m in 1..steps {
        let t_m = dt * lit::<T>(m as f64);
        let n_curr = explicit(&u, t_m)?;
        // (1 - dt/2 L) u_{m+1} = u_m + dt/2 L u_m + dt (3/2 N_m - 1/2 N_{m-1})
        let half = dt / lit::<T>(2.0);
        let mut coeffs = geom.analyze(&u);
        let forcing: Vec<T> = (0..np)
            .map(|i| dt * (lit::<T>(1.5) * n_curr[i] - lit::<T>(0.5) * n_prev[i]))
            .collect();
        let f_coeffs = geom.analyze(&forcing);
        for s in 0..coeffs.len() {
            coeffs[s] = (coeffs[s] * (T::one() + half * rates[s]) + f_coeffs[s])
                / (T::one() - half * rates[s]);
        }
        u = geom.synthesize(&coeffs);
        slices.push(u.clone());
        n_prev = n_curr;
    }

    SpaceTimeField::from_slices(geom.clone(), times, slices)
}

/// |A| and |grad A| histories along an evolving graph.
pub struct CurvatureHistory<T> {
    pub times: Vec<T>,
    pub sup_a: Vec<T>,
    pub sup_grad_a: Vec<T>,
}

/// Curvature magnitude and its first covariant derivative along the
/// hypersurface described by heights over the base (static base) or over
/// the shrinking family when `radius_at` supplies R(t).
pub fn curvature_history<T: Real>(
    field: &SpaceTimeField<T>,
    radius_at: impl Fn(T) -> Result<T>,
) -> Result<CurvatureHistory<T>> {
    let geom = &field.geom;
    let times = field.times().to_vec();
    let mut sup_a = Vec::with_capacity(times.len());
    let mut sup_grad_a = Vec::with_capacity(times.len());
    for (j, &t) in times.iter().enumerate() {
        let (a, ga) = match &geom.plan {
            Plan::Angle(p) => {
                if geom.kind() == GeometryKind::Circle {
                    let r_t = radius_at(t)?;
                    let rho: Vec<T> =
                        field.slice(j).iter().map(|&h| r_t + h).collect();
                    curve_curvature(p, &rho)?
                } else {
                    flat_curve_curvature(geom, p, field.slice(j))
                }
            }
            Plan::Sphere(_) => {
                let r_t = radius_at(t)?;
                let rho: Vec<T> =
                    field.slice(j).iter().map(|&h| r_t + h).collect();
                sphere_second_form(geom, &rho)?
            }
            Plan::Torus(_) => {
                return Err(Error::Unsupported(
                    "curvature history on the torus is not wired up",
                ))
            }
        };
        sup_a.push(a);
        sup_grad_a.push(ga);
    }
    Ok(CurvatureHistory {
        times,
        sup_a,
        sup_grad_a,
    })
}

/// (sup |kappa|, sup |d kappa / d arclength|) of the polar curve rho(theta).
fn curve_curvature<T: Real>(
    p: &crate::spectral::Fourier1d<T>,
    rho: &[T],
) -> Result<(T, T)> {
    let min_rho = rho.iter().fold(T::infinity(), |m, &v| m.min(v));
    if min_rho <= T::zero() {
        return Err(Error::GraphValidity {
            min_offset: to_f64(min_rho),
        });
    }
    let c = p.analyze(rho);
    let d1 = p.synthesize(&p.differentiate(&c, 1));
    let d2 = p.synthesize(&p.differentiate(&c, 2));
    let kappa: Vec<T> = (0..rho.len())
        .map(|i| {
            let denom = (rho[i] * rho[i] + d1[i] * d1[i]).sqrt();
            (rho[i] * rho[i] + lit::<T>(2.0) * d1[i] * d1[i] - rho[i] * d2[i])
                / (denom * denom * denom)
        })
        .collect();
    let ck = p.analyze(&kappa);
    let dk = p.synthesize(&p.differentiate(&ck, 1));
    let mut sup_a = T::zero();
    let mut sup_ga = T::zero();
    for i in 0..rho.len() {
        sup_a = sup_a.max(kappa[i].abs());
        let arc = (rho[i] * rho[i] + d1[i] * d1[i]).sqrt();
        sup_ga = sup_ga.max((dk[i] / arc).abs());
    }
    Ok((sup_a, sup_ga))
}

/// Same quantities for a flat graph curve (x, u(x)).
fn flat_curve_curvature<T: Real>(
    geom: &BaseGeometry<T>,
    p: &crate::spectral::Fourier1d<T>,
    u: &[T],
) -> (T, T) {
    let ds = T::one() / geom.angle_unit();
    let c = p.analyze(u);
    let d1: Vec<T> = p
        .synthesize(&p.differentiate(&c, 1))
        .into_iter()
        .map(|v| v * ds)
        .collect();
    let d2: Vec<T> = p
        .synthesize(&p.differentiate(&c, 2))
        .into_iter()
        .map(|v| v * ds * ds)
        .collect();
    let kappa: Vec<T> = (0..u.len())
        .map(|i| {
            let v2 = T::one() + d1[i] * d1[i];
            d2[i] / (v2 * v2.sqrt())
        })
        .collect();
    let ck = p.analyze(&kappa);
    let dk: Vec<T> = p
        .synthesize(&p.differentiate(&ck, 1))
        .into_iter()
        .map(|v| v * ds)
        .collect();
    let mut sup_a = T::zero();
    let mut sup_ga = T::zero();
    for i in 0..u.len() {
        sup_a = sup_a.max(kappa[i].abs());
        let arc = (T::one() + d1[i] * d1[i]).sqrt();
        sup_ga = sup_ga.max((dk[i] / arc).abs());
    }
    (sup_a, sup_ga)
}

/// (sup |A|, sup |grad A| proxy) of a radial graph over the sphere; the
/// gradient entry uses the angular derivative of |A| along the surface.
fn sphere_second_form<T: Real>(geom: &BaseGeometry<T>, rho: &[T]) -> Result<(T, T)> {
    let jet = radial_jet(geom, rho)?;
    let np = rho.len();
    let mut a_field = vec![T::zero(); np];
    for i in 0..np {
        let g_t = jet.g_t[i];
        let g_p = jet.g_p[i];
        let v2 = T::one() + g_t * g_t + g_p * g_p;
        // frame second form h = (rho/v)(I + g g^T - Hess phi),
        // inverse metric g^{-1} = rho^{-2} (I - g g^T / v^2)
        let h = [
            [
                T::one() + g_t * g_t - jet.h_tt[i],
                g_t * g_p - jet.h_tp[i],
            ],
            [
                g_t * g_p - jet.h_tp[i],
                T::one() + g_p * g_p - jet.h_pp[i],
            ],
        ];
        let gi = [
            [T::one() - g_t * g_t / v2, -g_t * g_p / v2],
            [-g_t * g_p / v2, T::one() - g_p * g_p / v2],
        ];
        // shape operator S = g^{-1} h with the scalar prefactors
        let pref = T::one() / (rho[i] * v2.sqrt());
        let mut s = [[T::zero(); 2]; 2];
        for r in 0..2 {
            for cc in 0..2 {
                s[r][cc] = pref * (gi[r][0] * h[0][cc] + gi[r][1] * h[1][cc]);
            }
        }
        let tr_s2 = s[0][0] * s[0][0]
            + s[0][1] * s[1][0]
            + s[1][0] * s[0][1]
            + s[1][1] * s[1][1];
        a_field[i] = tr_s2.max(T::zero()).sqrt();
    }
    let grad = geom.grad_magnitude(&a_field, None);
    let mut sup_a = T::zero();
    let mut sup_ga = T::zero();
    for i in 0..np {
        sup_a = sup_a.max(a_field[i]);
        sup_ga = sup_ga.max(grad[i]);
    }
    Ok((sup_a, sup_ga))
}
