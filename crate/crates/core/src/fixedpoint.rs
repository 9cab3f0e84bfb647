//! Contraction-mapping solvers for the graphical flow.
//!
//! Existence: iterate `u -> convolve(K, -H0 + Q(u))` from zero until the
//! solution-norm increment drops below tolerance; the fitted operator and
//! nonlinearity constants give the ball radius `delta = 1/(4 C1 C2)` and the
//! horizon recipe `sqrt(T) = min((8 C1 C2 C3 |H0|)^{-1}, i0/2)` under which
//! the map provably contracts at rate <= 1/2.
//!
//! Continuous dependence: iterate
//! `u -> propagate(K~, u0) + convolve(K~, Q_t(u))` over the shrinking
//! family, with admissible data `|u0|_C01 <= eps = 1/(4 C4 C5 C6)`.
//!
//! Iterates store the full space-time history (the map couples all times
//! through the kernel); a run that leaves the ball aborts rather than
//! projecting back.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::duhamel::DuhamelOperator;
use crate::error::{Error, Result};
use crate::field::{random_space_time, GraphFunction, SpaceTimeField};
use crate::geometry::{BaseGeometry, EvolvingGeometry, Plan};
use crate::graph_calculus::{nonlinearity_evolving, nonlinearity_slice};
use crate::heat_kernels::KernelEvaluator;
use crate::parabolic_norms::{c01_norm, xt_norm, Frame};
use crate::scalar::{lit, to_f64, Real};

/// Fitted constants of the operator and nonlinearity estimates.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FittedConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
}

impl Default for FittedConstants {
    fn default() -> Self {
        Self {
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            c4: 1.0,
            c5: 1.0,
            c6: 1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PicardConfig<T> {
    pub horizon: T,
    /// contraction-ball radius in the solution norm
    pub delta: T,
    /// stop tolerance on the solution-norm increment
    pub tolerance: T,
    pub max_iterations: usize,
    /// time-grid intervals of the stored iterates
    pub intervals: usize,
    pub constants: FittedConstants,
    pub seed: u64,
    /// admissibility threshold for perturbation data; None uses the recipe
    /// `1/(4 C4 C5 C6)`
    pub smallness: Option<T>,
}

impl<T: Real> PicardConfig<T> {
    pub fn new(horizon: T, delta: T) -> Self {
        Self {
            horizon,
            delta,
            tolerance: lit::<T>(1e-9),
            max_iterations: 60,
            intervals: 64,
            constants: FittedConstants::default(),
            seed: 0,
            smallness: None,
        }
    }
}

/// Converged fixed point with its iteration diagnostics.
#[derive(Clone)]
pub struct FlowSolution<T: Real> {
    pub field: SpaceTimeField<T>,
    /// solution-norm distances between successive iterates
    pub distances: Vec<f64>,
    /// successive-distance ratios
    pub ratios: Vec<f64>,
    /// fixed-point residual |G(u*) - u*|_XT
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Ball radius and horizon from the fitted constants:
/// `delta = 1/(4 C1 C2)`, `sqrt(T) = min((8 C1 C2 C3 |H0|)^{-1}, i0/2)`.
pub fn choose_constants<T: Real>(geom: &BaseGeometry<T>, c1: T, c2: T, c3: T) -> (T, T) {
    let four = lit::<T>(4.0);
    let delta = T::one() / (four * c1 * c2);
    let h0 = geom.mean_curvature().abs();
    let i0 = geom.injectivity_radius();
    let branch = if h0 > T::zero() {
        T::one() / (lit::<T>(8.0) * c1 * c2 * c3 * h0)
    } else {
        T::infinity()
    };
    let sqrt_t = branch.min(i0 / lit::<T>(2.0));
    (delta, sqrt_t * sqrt_t)
}

fn existence_map<T: Real>(
    op: &DuhamelOperator<T>,
    geom: &Arc<BaseGeometry<T>>,
    u: &SpaceTimeField<T>,
) -> Result<SpaceTimeField<T>> {
    let h0 = geom.mean_curvature();
    let rhs = u.map_slices(|_, slice| {
        let q = nonlinearity_slice(geom, slice)?;
        Ok(q.into_iter().map(|v| v - h0).collect())
    })?;
    op.convolve(&rhs)
}

fn perturbation_map<T: Real>(
    op: &DuhamelOperator<T>,
    ev: &Arc<EvolvingGeometry<T>>,
    propagated: &SpaceTimeField<T>,
    u: &SpaceTimeField<T>,
) -> Result<SpaceTimeField<T>> {
    let times = u.times().to_vec();
    let rhs = u.map_slices(|j, slice| nonlinearity_evolving(ev, slice, times[j]))?;
    op.convolve(&rhs)?.linear_combination(T::one(), propagated, T::one())
}

fn iterate<T: Real>(
    start: SpaceTimeField<T>,
    cfg: &PicardConfig<T>,
    frame: Frame<T>,
    map: impl Fn(&SpaceTimeField<T>) -> Result<SpaceTimeField<T>>,
) -> Result<FlowSolution<T>> {
    let mut u = start;
    let mut distances = Vec::new();
    let mut ratios = Vec::new();
    for m in 0..cfg.max_iterations {
        let next = map(&u)?;
        let norm_next = xt_norm(&next, cfg.horizon, frame)?.value;
        if norm_next > cfg.delta {
            return Err(Error::BallExit {
                iteration: m + 1,
                norm: to_f64(norm_next),
                delta: to_f64(cfg.delta),
            });
        }
        let diff = next.linear_combination(T::one(), &u, -T::one())?;
        let d = xt_norm(&diff, cfg.horizon, frame)?.value;
        if let Some(&prev) = distances.last() {
            if prev > 0.0 {
                ratios.push(to_f64(d) / prev);
            }
        }
        distances.push(to_f64(d));
        u = next;
        if d < cfg.tolerance {
            // one more application measures the fixed-point residual
            let probe = map(&u)?;
            let res = xt_norm(
                &probe.linear_combination(T::one(), &u, -T::one())?,
                cfg.horizon,
                frame,
            )?
            .value;
            return Ok(FlowSolution {
                field: u,
                distances,
                ratios,
                residual: to_f64(res),
                converged: true,
                iterations: m + 1,
            });
        }
    }
    Err(Error::NonConvergence {
        max_iterations: cfg.max_iterations,
        ratios,
    })
}

/// Short-time existence from the base itself (zero initial height).
pub fn solve_existence<T: Real>(
    geom: &Arc<BaseGeometry<T>>,
    cfg: &PicardConfig<T>,
) -> Result<FlowSolution<T>> {
    let times = SpaceTimeField::uniform_times(cfg.horizon, cfg.intervals);
    let start = SpaceTimeField::zero(geom.clone(), times);
    solve_existence_from(geom, cfg, start)
}

/// Existence solve from a caller-supplied initial iterate (the fixed point
/// is the same for any admissible start; used by the uniqueness checks).
pub fn solve_existence_from<T: Real>(
    geom: &Arc<BaseGeometry<T>>,
    cfg: &PicardConfig<T>,
    start: SpaceTimeField<T>,
) -> Result<FlowSolution<T>> {
    let op = DuhamelOperator::new(KernelEvaluator::with_potential(geom.clone()));
    let geom = geom.clone();
    iterate(start, cfg, Frame::Static, move |u| {
        existence_map(&op, &geom, u)
    })
}

/// Flow of a perturbed shrinking family: fixed point of
/// `u -> propagate(K~, u0) + convolve(K~, Q_t(u))` with `u(0) = u0`.
pub fn solve_perturbation<T: Real>(
    ev: &Arc<EvolvingGeometry<T>>,
    u0: &GraphFunction<T>,
    cfg: &PicardConfig<T>,
) -> Result<FlowSolution<T>> {
    let c = &cfg.constants;
    let epsilon = cfg.smallness.unwrap_or_else(|| {
        T::one() / (lit::<T>(4.0) * lit::<T>(c.c4) * lit::<T>(c.c5) * lit::<T>(c.c6))
    });
    let norm0 = c01_norm(u0);
    if norm0 > epsilon {
        return Err(Error::InitialDataSize {
            norm: to_f64(norm0),
            epsilon: to_f64(epsilon),
        });
    }
    let op = DuhamelOperator::new(KernelEvaluator::evolving_with_potential(ev.clone()));
    let times = SpaceTimeField::uniform_times(cfg.horizon, cfg.intervals);
    let propagated = op.propagate_history(u0, &times)?;
    let start = SpaceTimeField::zero(ev.base().clone(), times);
    let ev = ev.clone();
    let frame_ev = ev.clone();
    let sol = iterate(start, cfg, Frame::Evolving(&frame_ev), move |u| {
        perturbation_map(&op, &ev, &propagated, u)
    })?;
    Ok(sol)
}

/// Which contraction map a measurement runs against.
pub enum MapSpec<'a, T: Real> {
    Existence {
        geom: &'a Arc<BaseGeometry<T>>,
        horizon: T,
        intervals: usize,
    },
    Perturbation {
        ev: &'a Arc<EvolvingGeometry<T>>,
        horizon: T,
        intervals: usize,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct ContractionReport {
    pub sup_ratio: f64,
    pub ratios: Vec<f64>,
    pub delta: f64,
    pub pairs: usize,
    pub seed: u64,
}

/// Largest `|G(u1) - G(u2)|_XT / |u1 - u2|_XT` over seeded random pairs in
/// the delta-ball (fields vanish at t = 0 and are rescaled into the ball).
pub fn measure_contraction<T: Real>(
    spec: &MapSpec<T>,
    delta: T,
    pairs: usize,
    seed: u64,
) -> Result<ContractionReport> {
    let (geom, horizon, intervals, frame_ev) = match spec {
        MapSpec::Existence {
            geom,
            horizon,
            intervals,
        } => ((*geom).clone(), *horizon, *intervals, None),
        MapSpec::Perturbation {
            ev,
            horizon,
            intervals,
        } => (ev.base().clone(), *horizon, *intervals, Some((*ev).clone())),
    };
    let frame = match &frame_ev {
        Some(ev) => Frame::Evolving(ev),
        None => Frame::Static,
    };
    let times = SpaceTimeField::uniform_times(horizon, intervals);
    let bandlimit = (geom.max_mode() / 2).max(2);

    let draw = |idx: u64, rho: T| -> Result<SpaceTimeField<T>> {
        let raw = random_space_time(&geom, &times, bandlimit, seed.wrapping_add(idx));
        // vanish at t = 0 to stay in the solution ball
        let enveloped = raw.map_slices(|j, slice| {
            let env = times[j] / horizon;
            Ok(slice.iter().map(|&v| v * env).collect())
        })?;
        let norm = xt_norm(&enveloped, horizon, frame)?.value;
        Ok(enveloped.scaled(delta * rho / norm))
    };

    let op = match &frame_ev {
        Some(ev) => DuhamelOperator::new(KernelEvaluator::evolving_with_potential(ev.clone())),
        None => DuhamelOperator::new(KernelEvaluator::with_potential(geom.clone())),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x517c_c1b7_2722_0a95);
    let rhos: Vec<(T, T)> = (0..pairs)
        .map(|_| {
            (
                lit::<T>(rng.gen_range(0.3..1.0)),
                lit::<T>(rng.gen_range(0.3..1.0)),
            )
        })
        .collect();

    let ratios: Vec<Result<f64>> = (0..pairs)
        .into_par_iter()
        .map(|p| {
            let u1 = draw(2 * p as u64, rhos[p].0)?;
            let u2 = draw(2 * p as u64 + 1, rhos[p].1)?;
            let dq = match &frame_ev {
                None => {
                    let q1 = u1.map_slices(|_, s| nonlinearity_slice(&geom, s))?;
                    let q2 = u2.map_slices(|_, s| nonlinearity_slice(&geom, s))?;
                    q1.linear_combination(T::one(), &q2, -T::one())?
                }
                Some(ev) => {
                    let q1 = u1.map_slices(|j, s| nonlinearity_evolving(ev, s, times[j]))?;
                    let q2 = u2.map_slices(|j, s| nonlinearity_evolving(ev, s, times[j]))?;
                    q1.linear_combination(T::one(), &q2, -T::one())?
                }
            };
            let num = xt_norm(&op.convolve(&dq)?, horizon, frame)?.value;
            let den = xt_norm(
                &u1.linear_combination(T::one(), &u2, -T::one())?,
                horizon,
                frame,
            )?
            .value;
            Ok(to_f64(num / den))
        })
        .collect();

    let mut vals = Vec::with_capacity(pairs);
    for r in ratios {
        vals.push(r?);
    }
    let sup_ratio = vals.iter().cloned().fold(0.0f64, f64::max);
    Ok(ContractionReport {
        sup_ratio,
        ratios: vals,
        delta: to_f64(delta),
        pairs,
        seed,
    })
}

/// One weighted-derivative supremum row.
#[derive(Clone, Debug, Serialize)]
pub struct DerivativeSup {
    pub alpha: usize,
    pub k: usize,
    pub sup: f64,
    /// sup divided by the Lipschitz norm of the initial data
    pub fitted_c: f64,
}

/// Suprema of `|(t^{1/2} grad)^alpha (t d/dt)^k grad u|` over the grid and
/// `t in (0, T]`, on one-dimensional bases. Time derivatives are centered
/// differences on the stored grid, so each k consumes one node at either
/// end.
pub fn derivative_estimates<T: Real>(
    solution: &SpaceTimeField<T>,
    ev: Option<&EvolvingGeometry<T>>,
    alpha_max: usize,
    k_max: usize,
    data_c01: T,
) -> Result<Vec<DerivativeSup>> {
    let geom = &solution.geom;
    if !matches!(&geom.plan, Plan::Angle(_)) {
        return Err(Error::Unsupported(
            "weighted derivative estimates run on one-dimensional bases",
        ));
    }
    let times = solution.times();
    let nt = times.len();
    if k_max >= 1 && nt < 2 * k_max + 3 {
        return Err(Error::TimeGridTooCoarse {
            lo: to_f64(times[0]),
            hi: to_f64(times[nt - 1]),
            needed: 2 * k_max + 3,
        });
    }
    let np = geom.num_points();
    let radius_at = |t: T| -> Result<T> {
        match ev {
            Some(e) => e.radius(t),
            None => Ok(geom.angle_unit()),
        }
    };

    // base field: grad u = u_theta / R(t), signed
    let mut base: Vec<Vec<T>> = Vec::with_capacity(nt);
    for (j, &t) in times.iter().enumerate() {
        let r = radius_at(t)?;
        let theta_deriv = match &geom.plan {
            Plan::Angle(p) => {
                let c = p.analyze(solution.slice(j));
                p.synthesize(&p.differentiate(&c, 1))
            }
            _ => unreachable!(),
        };
        base.push(theta_deriv.into_iter().map(|d| d / r).collect());
    }

    let mut out = Vec::new();
    for k in 0..=k_max {
        // apply (t d/dt)^k with centered differences, shrinking the window
        let mut field = base.clone();
        let mut lo = 0usize;
        let mut hi = nt - 1;
        for _ in 0..k {
            let mut next = field.clone();
            for j in (lo + 1)..hi {
                let dt = times[j + 1] - times[j - 1];
                for i in 0..np {
                    next[j][i] = times[j] * (field[j + 1][i] - field[j - 1][i]) / dt;
                }
            }
            lo += 1;
            hi -= 1;
            field = next;
        }
        for alpha in 0..=alpha_max {
            let mut sup = T::zero();
            for j in lo.max(1)..=hi {
                let t = times[j];
                let r = radius_at(t)?;
                let vals = if alpha == 0 {
                    field[j].clone()
                } else {
                    match &geom.plan {
                        Plan::Angle(p) => {
                            let c = p.analyze(&field[j]);
                            p.synthesize(&p.differentiate(&c, alpha))
                                .into_iter()
                                .map(|d| d / r.powi(alpha as i32))
                                .collect()
                        }
                        _ => unreachable!(),
                    }
                };
                let weight = t.sqrt().powi(alpha as i32);
                for v in vals {
                    sup = sup.max((v * weight).abs());
                }
            }
            out.push(DerivativeSup {
                alpha,
                k,
                sup: to_f64(sup),
                fitted_c: to_f64(sup / data_c01.max(lit::<T>(1e-300))),
            });
        }
    }
    Ok(out)
}
