//! Model base hypersurfaces in Euclidean space.
//!
//! The supported bases (circle, periodic line, periodic plane, round sphere)
//! all have spatially constant second fundamental form, exactly known
//! spectrum, and exactly evaluable heat kernels; every estimate downstream is
//! certified against these closed forms rather than against a second
//! discretization.
//!
//! Conventions: `n` is the outward normal on circle and sphere, the mean
//! curvature is the trace of the second fundamental form (H = 1 for the unit
//! circle, H = 2 for the unit 2-sphere), and the flow moves round
//! hypersurfaces inward.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};
use crate::spectral::{Fourier1d, Fourier2d, SphereJet, SphereTransform};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    Circle,
    PeriodicLine,
    PeriodicPlane,
    Sphere,
}

impl GeometryKind {
    pub fn name(self) -> &'static str {
        match self {
            GeometryKind::Circle => "circle",
            GeometryKind::PeriodicLine => "periodic_line",
            GeometryKind::PeriodicPlane => "periodic_plane",
            GeometryKind::Sphere => "sphere",
        }
    }

    pub fn dimension(self) -> usize {
        match self {
            GeometryKind::Circle | GeometryKind::PeriodicLine => 1,
            GeometryKind::PeriodicPlane | GeometryKind::Sphere => 2,
        }
    }

    pub fn is_radial(self) -> bool {
        matches!(self, GeometryKind::Circle | GeometryKind::Sphere)
    }
}

pub(crate) enum Plan<T> {
    Angle(Fourier1d<T>),
    Torus(Fourier2d<T>),
    Sphere(SphereTransform<T>),
}

/// A model base hypersurface with its spectral plan and exact constants.
pub struct BaseGeometry<T: Real> {
    kind: GeometryKind,
    dim: usize,
    /// radius for circle/sphere, period for the flat bases
    scale: T,
    grid: usize,
    pub(crate) plan: Plan<T>,
    eigenvalues: Vec<T>,
}

/// Construct a model base; rejects odd or too-small grids, nonpositive
/// lengths and kind/dimension mismatches.
pub fn make_base<T: Real>(
    kind: GeometryKind,
    dim: usize,
    radius_or_period: T,
    grid: usize,
) -> Result<Arc<BaseGeometry<T>>> {
    BaseGeometry::new(kind, dim, radius_or_period, grid).map(Arc::new)
}

impl<T: Real> BaseGeometry<T> {
    pub fn new(kind: GeometryKind, dim: usize, scale: T, grid: usize) -> Result<Self> {
        if dim != kind.dimension() {
            return Err(Error::Dimension {
                kind: kind.name(),
                expected: kind.dimension(),
                got: dim,
            });
        }
        if scale <= T::zero() {
            return Err(Error::NonPositive {
                name: "radius_or_period",
                value: to_f64(scale),
            });
        }
        if grid < 16 || grid % 2 != 0 {
            return Err(Error::GridSize(grid));
        }
        let plan = match kind {
            GeometryKind::Circle | GeometryKind::PeriodicLine => Plan::Angle(Fourier1d::new(grid)),
            GeometryKind::PeriodicPlane => Plan::Torus(Fourier2d::new(grid)),
            GeometryKind::Sphere => Plan::Sphere(SphereTransform::new(grid)),
        };
        let mut geom = Self {
            kind,
            dim,
            scale,
            grid,
            plan,
            eigenvalues: Vec::new(),
        };
        let ds = geom.deriv_scale();
        geom.eigenvalues = match &geom.plan {
            Plan::Angle(p) => p.unit_eigenvalues().iter().map(|&e| e * ds * ds).collect(),
            Plan::Torus(p) => p.unit_eigenvalues().iter().map(|&e| e * ds * ds).collect(),
            Plan::Sphere(p) => p.unit_eigenvalues().iter().map(|&e| e * ds * ds).collect(),
        };
        Ok(geom)
    }

    pub fn kind(&self) -> GeometryKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Radius (circle/sphere) or period (flats).
    pub fn scale(&self) -> T {
        self.scale
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn num_points(&self) -> usize {
        match &self.plan {
            Plan::Angle(p) => p.len(),
            Plan::Torus(p) => p.len(),
            Plan::Sphere(p) => p.num_points(),
        }
    }

    pub fn num_coeffs(&self) -> usize {
        match &self.plan {
            Plan::Angle(p) => p.len(),
            Plan::Torus(p) => p.len(),
            Plan::Sphere(p) => p.num_coeffs(),
        }
    }

    /// |A|^2, spatially constant on every supported base.
    pub fn second_form_sq(&self) -> T {
        match self.kind {
            GeometryKind::Circle | GeometryKind::Sphere => {
                lit::<T>(self.dim as f64) / (self.scale * self.scale)
            }
            _ => T::zero(),
        }
    }

    /// Mean curvature H0 of the base (trace convention).
    pub fn mean_curvature(&self) -> T {
        match self.kind {
            GeometryKind::Circle | GeometryKind::Sphere => lit::<T>(self.dim as f64) / self.scale,
            _ => T::zero(),
        }
    }

    /// kappa = sup |A| = sqrt(n)/R on round bases, 0 on flats.
    pub fn kappa(&self) -> T {
        self.second_form_sq().sqrt()
    }

    pub fn injectivity_radius(&self) -> T {
        match self.kind {
            GeometryKind::Circle | GeometryKind::Sphere => T::PI() * self.scale,
            GeometryKind::PeriodicLine | GeometryKind::PeriodicPlane => {
                self.scale / lit::<T>(2.0)
            }
        }
    }

    /// Radius below which the two-sided volume comparison is asserted;
    /// capped at 1 to match the comparison's stated range.
    pub fn volume_check_radius(&self) -> T {
        self.injectivity_radius().min(T::one())
    }

    /// Graph-validity threshold for the C^{0,1} norm of heights.
    pub fn graph_threshold(&self) -> T {
        lit::<T>(0.3) * self.angle_unit()
    }

    /// Length of one radian of the parametrization: R on circle/sphere,
    /// period/(2 pi) on the flats.
    pub fn angle_unit(&self) -> T {
        match self.kind {
            GeometryKind::Circle | GeometryKind::Sphere => self.scale,
            _ => self.scale / (T::PI() + T::PI()),
        }
    }

    /// d(length)/d(angle coordinate) inverse: multiply coordinate derivatives
    /// by this to get metric derivatives.
    pub(crate) fn deriv_scale(&self) -> T {
        T::one() / self.angle_unit()
    }

    /// Eigenvalues of the Laplace-Beltrami operator per coefficient slot.
    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    /// Largest wavenumber (or degree) that the grid resolves exactly.
    pub fn max_mode(&self) -> usize {
        match &self.plan {
            Plan::Angle(p) => p.len() / 2 - 1,
            Plan::Torus(p) => p.axis.len() / 2 - 1,
            Plan::Sphere(p) => p.lmax,
        }
    }

    /// Coordinates of a grid point: theta (1d), (x, y) on the torus in
    /// length units, (colatitude, longitude) on the sphere.
    pub fn point_coords(&self, idx: usize) -> (T, T) {
        let two_pi = T::PI() + T::PI();
        match &self.plan {
            Plan::Angle(p) => {
                let th = two_pi * lit::<T>(idx as f64) / lit::<T>(p.len() as f64);
                (th, T::zero())
            }
            Plan::Torus(_) => {
                let n = self.grid;
                let h = self.scale / lit::<T>(n as f64);
                let (j, i) = (idx / n, idx % n);
                (h * lit::<T>(i as f64), h * lit::<T>(j as f64))
            }
            Plan::Sphere(p) => {
                let (j, i) = (idx / p.nlon, idx % p.nlon);
                let th = p.nodes[j].acos();
                let ph = two_pi * lit::<T>(i as f64) / lit::<T>(p.nlon as f64);
                (th, ph)
            }
        }
    }

    /// Measure weight of a grid point (includes the metric volume element).
    pub fn quadrature_weight(&self, idx: usize) -> T {
        let two_pi = T::PI() + T::PI();
        match &self.plan {
            Plan::Angle(p) => two_pi * self.angle_unit() / lit::<T>(p.len() as f64),
            Plan::Torus(_) => {
                let h = self.scale / lit::<T>(self.grid as f64);
                h * h
            }
            Plan::Sphere(p) => {
                let j = idx / p.nlon;
                p.weights[j] * two_pi / lit::<T>(p.nlon as f64) * self.scale * self.scale
            }
        }
    }

    /// Total measure of the base.
    pub fn total_volume(&self) -> T {
        (0..self.num_points())
            .map(|i| self.quadrature_weight(i))
            .sum()
    }

    /// Intrinsic geodesic distance between two grid points.
    pub fn geodesic_distance(&self, a: usize, b: usize) -> T {
        match &self.plan {
            Plan::Angle(p) => {
                let two_pi = T::PI() + T::PI();
                let n = p.len() as f64;
                let d = (a as f64 - b as f64).abs();
                let d = d.min(n - d);
                two_pi * lit::<T>(d / n) * self.angle_unit()
            }
            Plan::Torus(_) => {
                let n = self.grid;
                let h = self.scale / lit::<T>(n as f64);
                let wrap = |u: usize, v: usize| {
                    let d = (u as f64 - v as f64).abs();
                    lit::<T>(d.min(n as f64 - d))
                };
                let dx = wrap(a % n, b % n) * h;
                let dy = wrap(a / n, b / n) * h;
                (dx * dx + dy * dy).sqrt()
            }
            Plan::Sphere(p) => {
                let (ja, ia) = (a / p.nlon, a % p.nlon);
                let (jb, ib) = (b / p.nlon, b % p.nlon);
                let c = p.cos_gamma(ja, ia, jb, ib);
                c.acos() * self.scale
            }
        }
    }

    /// Volume of the intrinsic ball of radius `r` (closed form).
    pub fn ball_volume(&self, _center: usize, r: T) -> Result<T> {
        if r <= T::zero() {
            return Err(Error::NonPositive {
                name: "ball radius",
                value: to_f64(r),
            });
        }
        if r >= self.injectivity_radius() {
            return Err(Error::BallRadius {
                r: to_f64(r),
                limit: to_f64(self.injectivity_radius()),
            });
        }
        Ok(match self.kind {
            GeometryKind::Circle | GeometryKind::PeriodicLine => r + r,
            GeometryKind::PeriodicPlane => T::PI() * r * r,
            GeometryKind::Sphere => {
                let two_pi = T::PI() + T::PI();
                two_pi * self.scale * self.scale * (T::one() - (r / self.scale).cos())
            }
        })
    }

    /// Two-sided comparison of ball volumes with `omega_n r^n` over a radius
    /// ladder inside the check radius. Returns the worst ratios observed.
    pub fn volume_bound_report(&self, samples: usize) -> VolumeBoundReport {
        let omega = match self.dim {
            1 => lit::<T>(2.0),
            _ => T::PI(),
        };
        let rmax = self.volume_check_radius();
        let mut worst_low = T::infinity();
        let mut worst_high = T::zero();
        for s in 1..=samples {
            let r = rmax * lit::<T>(s as f64) / lit::<T>((samples + 1) as f64);
            let vol = self.ball_volume(0, r).expect("radius inside check range");
            let reference = omega * r.powi(self.dim as i32);
            let ratio = vol / reference;
            worst_low = worst_low.min(ratio);
            worst_high = worst_high.max(ratio);
        }
        VolumeBoundReport {
            worst_low: to_f64(worst_low),
            worst_high: to_f64(worst_high),
            pass: worst_low >= lit::<T>(0.5) && worst_high <= lit::<T>(2.0),
        }
    }

    // ---- spectral field operations (values live on the grid) ----

    pub fn analyze(&self, values: &[T]) -> Vec<T> {
        match &self.plan {
            Plan::Angle(p) => p.analyze(values),
            Plan::Torus(p) => p.analyze(values),
            Plan::Sphere(p) => p.analyze(values),
        }
    }

    pub fn synthesize(&self, coeffs: &[T]) -> Vec<T> {
        match &self.plan {
            Plan::Angle(p) => p.synthesize(coeffs),
            Plan::Torus(p) => p.synthesize(coeffs),
            Plan::Sphere(p) => p.synthesize(coeffs),
        }
    }

    /// Laplace-Beltrami with an optional radius override (used on evolving
    /// round bases where only the overall scale changes in time).
    pub fn laplacian(&self, values: &[T], radius: Option<T>) -> Vec<T> {
        let scale = self.metric_factor(radius);
        let coeffs = self.analyze(values);
        match &self.plan {
            Plan::Angle(p) => {
                let e = p.unit_eigenvalues();
                let c: Vec<T> = coeffs
                    .iter()
                    .zip(e.iter())
                    .map(|(&a, &ev)| a * ev * scale * scale)
                    .collect();
                p.synthesize(&c)
            }
            Plan::Torus(p) => {
                let e = p.unit_eigenvalues();
                let c: Vec<T> = coeffs
                    .iter()
                    .zip(e.iter())
                    .map(|(&a, &ev)| a * ev * scale * scale)
                    .collect();
                p.synthesize(&c)
            }
            Plan::Sphere(p) => {
                let e = p.unit_eigenvalues();
                let c: Vec<T> = coeffs
                    .iter()
                    .zip(e.iter())
                    .map(|(&a, &ev)| a * ev * scale * scale)
                    .collect();
                p.synthesize(&c)
            }
        }
    }

    /// |grad f| pointwise.
    pub fn grad_magnitude(&self, values: &[T], radius: Option<T>) -> Vec<T> {
        let scale = self.metric_factor(radius);
        match &self.plan {
            Plan::Angle(p) => {
                let c = p.analyze(values);
                p.synthesize(&p.differentiate(&c, 1))
                    .into_iter()
                    .map(|d| (d * scale).abs())
                    .collect()
            }
            Plan::Torus(p) => {
                let c = p.analyze(values);
                let fx = p.synthesize(&p.differentiate(&c, 1, 0));
                let fy = p.synthesize(&p.differentiate(&c, 0, 1));
                fx.iter()
                    .zip(fy.iter())
                    .map(|(&a, &b)| (a * a + b * b).sqrt() * scale)
                    .collect()
            }
            Plan::Sphere(p) => {
                let jet = p.jet(&p.analyze(values));
                self.sphere_grad_sq(p, &jet)
                    .into_iter()
                    .map(|g2| g2.sqrt() * scale)
                    .collect()
            }
        }
    }

    /// Frobenius norm of the covariant Hessian of the base metric, pointwise.
    pub fn hessian_frobenius(&self, values: &[T], radius: Option<T>) -> Vec<T> {
        let scale = self.metric_factor(radius);
        let s2 = scale * scale;
        match &self.plan {
            Plan::Angle(p) => {
                let c = p.analyze(values);
                p.synthesize(&p.differentiate(&c, 2))
                    .into_iter()
                    .map(|d| (d * s2).abs())
                    .collect()
            }
            Plan::Torus(p) => {
                let c = p.analyze(values);
                let fxx = p.synthesize(&p.differentiate(&c, 2, 0));
                let fyy = p.synthesize(&p.differentiate(&c, 0, 2));
                let fxy = p.synthesize(&p.differentiate(&c, 1, 1));
                (0..fxx.len())
                    .map(|i| {
                        let two = lit::<T>(2.0);
                        ((fxx[i] * fxx[i] + two * fxy[i] * fxy[i] + fyy[i] * fyy[i]).sqrt()) * s2
                    })
                    .collect()
            }
            Plan::Sphere(p) => {
                let jet = p.jet(&p.analyze(values));
                let h = self.sphere_hessian_frame(p, &jet);
                (0..h.tt.len())
                    .map(|i| {
                        let two = lit::<T>(2.0);
                        (h.tt[i] * h.tt[i] + two * h.tp[i] * h.tp[i] + h.pp[i] * h.pp[i]).sqrt()
                            * s2
                    })
                    .collect()
            }
        }
    }

    fn metric_factor(&self, radius: Option<T>) -> T {
        match radius {
            Some(r) => {
                debug_assert!(self.kind.is_radial());
                T::one() / r
            }
            None => self.deriv_scale(),
        }
    }

    /// |grad_1 f|^2 on the unit sphere from a jet.
    pub(crate) fn sphere_grad_sq(&self, p: &SphereTransform<T>, jet: &SphereJet<T>) -> Vec<T> {
        let mut out = vec![T::zero(); jet.f.len()];
        for j in 0..p.nlat {
            let s = p.sin_lat[j];
            for i in 0..p.nlon {
                let idx = j * p.nlon + i;
                let gp = jet.f_ph[idx] / s;
                out[idx] = jet.f_th[idx] * jet.f_th[idx] + gp * gp;
            }
        }
        out
    }

    /// Orthonormal-frame covariant Hessian components on the unit sphere.
    pub(crate) fn sphere_hessian_frame(
        &self,
        p: &SphereTransform<T>,
        jet: &SphereJet<T>,
    ) -> FrameHessian<T> {
        let n = jet.f.len();
        let mut tt = vec![T::zero(); n];
        let mut tp = vec![T::zero(); n];
        let mut pp = vec![T::zero(); n];
        for j in 0..p.nlat {
            let s = p.sin_lat[j];
            let cot = p.nodes[j] / s;
            for i in 0..p.nlon {
                let idx = j * p.nlon + i;
                let fpp_frame = jet.f_phph[idx] / (s * s) + cot * jet.f_th[idx];
                // theta-theta from the Laplacian identity keeps everything
                // in one spectral pass
                let ftt = jet.lap1[idx] - fpp_frame;
                tt[idx] = ftt;
                tp[idx] = (jet.f_thph[idx] - cot * jet.f_ph[idx]) / s;
                pp[idx] = fpp_frame;
            }
        }
        FrameHessian { tt, tp, pp }
    }
}

/// Unit-sphere Hessian in the orthonormal frame (e_theta, e_phi).
pub(crate) struct FrameHessian<T> {
    pub tt: Vec<T>,
    pub tp: Vec<T>,
    pub pp: Vec<T>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct VolumeBoundReport {
    pub worst_low: f64,
    pub worst_high: f64,
    pub pass: bool,
}

/// A round base shrinking under the flow: R(t) = sqrt(R0^2 - 2 n t).
pub struct EvolvingGeometry<T: Real> {
    base: Arc<BaseGeometry<T>>,
    horizon: T,
}

impl<T: Real> EvolvingGeometry<T> {
    pub fn new(base: Arc<BaseGeometry<T>>, horizon: T) -> Result<Self> {
        if !base.kind().is_radial() {
            return Err(Error::EvolvingBase(base.kind().name()));
        }
        let ev = Self { base, horizon };
        if horizon <= T::zero() || horizon >= ev.extinction_time() {
            return Err(Error::Horizon {
                horizon: to_f64(horizon),
                limit: to_f64(ev.extinction_time()),
            });
        }
        Ok(ev)
    }

    pub fn base(&self) -> &Arc<BaseGeometry<T>> {
        &self.base
    }

    pub fn initial_radius(&self) -> T {
        self.base.scale()
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn extinction_time(&self) -> T {
        let r0 = self.base.scale();
        r0 * r0 / lit::<T>((2 * self.base.dim()) as f64)
    }

    fn check_time(&self, t: T) -> Result<()> {
        if t < T::zero() || t >= self.extinction_time() {
            return Err(Error::Extinction {
                t: to_f64(t),
                extinction: to_f64(self.extinction_time()),
            });
        }
        Ok(())
    }

    /// R(t) = sqrt(R0^2 - 2 n t).
    pub fn radius(&self, t: T) -> Result<T> {
        self.check_time(t)?;
        let r0 = self.base.scale();
        let two_n = lit::<T>((2 * self.base.dim()) as f64);
        Ok((r0 * r0 - two_n * t).sqrt())
    }

    /// Conformal time tau(t) = integral of R(s)^{-2}; strictly increasing,
    /// tau(0) = 0.
    pub fn conformal_time(&self, t: T) -> Result<T> {
        self.check_time(t)?;
        let r0 = self.base.scale();
        let two_n = lit::<T>((2 * self.base.dim()) as f64);
        let x = two_n * t / (r0 * r0);
        Ok(-(T::one() - x).ln() / two_n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rejects_bad_parameters() {
        assert!(make_base::<f64>(GeometryKind::Circle, 1, 1.0, 15).is_err());
        assert!(make_base::<f64>(GeometryKind::Circle, 1, 1.0, 14).is_err());
        assert!(make_base::<f64>(GeometryKind::Circle, 1, -1.0, 32).is_err());
        assert!(make_base::<f64>(GeometryKind::Circle, 2, 1.0, 32).is_err());
        assert!(make_base::<f64>(GeometryKind::Sphere, 1, 1.0, 32).is_err());
    }

    #[test]
    fn unit_circle_constants() {
        let g = make_base::<f64>(GeometryKind::Circle, 1, 1.0, 128).unwrap();
        assert_abs_diff_eq!(g.second_form_sq(), 1.0);
        assert_abs_diff_eq!(g.mean_curvature(), 1.0);
        assert_abs_diff_eq!(g.kappa(), 1.0);
        assert_abs_diff_eq!(g.injectivity_radius(), std::f64::consts::PI);
    }

    #[test]
    fn flat_line_constants() {
        let g = make_base::<f64>(
            GeometryKind::PeriodicLine,
            1,
            2.0 * std::f64::consts::PI,
            128,
        )
        .unwrap();
        assert_abs_diff_eq!(g.second_form_sq(), 0.0);
        assert_abs_diff_eq!(g.mean_curvature(), 0.0);
    }

    #[test]
    fn sphere_constants_from_shape() {
        // |A|^2 = n/R^2 and H0 = n/R for the round sphere
        let g = make_base::<f64>(GeometryKind::Sphere, 2, 2.0, 64).unwrap();
        assert_abs_diff_eq!(g.second_form_sq(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(g.mean_curvature(), 1.0, epsilon = 1e-15);
        // discrete second-fundamental-form oracle: embed X(th, ph), compute
        // A = -<d2 X, n> g^{-1} by central differences at an interior point
        let r = 2.0f64;
        let (th0, ph0) = (1.1f64, 0.7f64);
        let x = |th: f64, ph: f64| {
            [
                r * th.sin() * ph.cos(),
                r * th.sin() * ph.sin(),
                r * th.cos(),
            ]
        };
        let h = 1e-4;
        let diff = |f: &dyn Fn(f64, f64) -> [f64; 3], a: f64, b: f64, da: f64, db: f64| {
            let p = f(a + da * h, b + db * h);
            let m = f(a - da * h, b - db * h);
            [
                (p[0] - m[0]) / (2.0 * h),
                (p[1] - m[1]) / (2.0 * h),
                (p[2] - m[2]) / (2.0 * h),
            ]
        };
        let xu = diff(&x, th0, ph0, 1.0, 0.0);
        let xv = diff(&x, th0, ph0, 0.0, 1.0);
        let second = |da1: f64, db1: f64, da2: f64, db2: f64| {
            let pp = x(th0 + (da1 + da2) * h, ph0 + (db1 + db2) * h);
            let pm = x(th0 + (da1 - da2) * h, ph0 + (db1 - db2) * h);
            let mp = x(th0 + (-da1 + da2) * h, ph0 + (-db1 + db2) * h);
            let mm = x(th0 - (da1 + da2) * h, ph0 - (db1 + db2) * h);
            [
                (pp[0] - pm[0] - mp[0] + mm[0]) / (4.0 * h * h),
                (pp[1] - pm[1] - mp[1] + mm[1]) / (4.0 * h * h),
                (pp[2] - pm[2] - mp[2] + mm[2]) / (4.0 * h * h),
            ]
        };
        let xuu = second(1.0, 0.0, 1.0, 0.0);
        let xuv = second(1.0, 0.0, 0.0, 1.0);
        let xvv = second(0.0, 1.0, 0.0, 1.0);
        let dot = |a: &[f64; 3], b: &[f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        let cross = |a: &[f64; 3], b: &[f64; 3]| {
            [
                a[1] * b[2] - a[2] * b[1],
                a[2] * b[0] - a[0] * b[2],
                a[0] * b[1] - a[1] * b[0],
            ]
        };
        let nvec = {
            let c = cross(&xu, &xv);
            let norm = dot(&c, &c).sqrt();
            [c[0] / norm, c[1] / norm, c[2] / norm]
        };
        // outward normal
        let sign = if dot(&nvec, &x(th0, ph0)) > 0.0 { 1.0 } else { -1.0 };
        let nvec = [sign * nvec[0], sign * nvec[1], sign * nvec[2]];
        let (e, f, g2) = (dot(&xu, &xu), dot(&xu, &xv), dot(&xv, &xv));
        // h_ij with respect to the outward normal carries a minus sign in
        // this convention (H(sphere) = n/R > 0)
        let (l, m, n) = (-dot(&xuu, &nvec), -dot(&xuv, &nvec), -dot(&xvv, &nvec));
        let det = e * g2 - f * f;
        // shape operator S = (first form)^{-1} (second form)
        let s11 = (g2 * l - f * m) / det;
        let s12 = (g2 * m - f * n) / det;
        let s21 = (e * m - f * l) / det;
        let s22 = (e * n - f * m) / det;
        let trace = s11 + s22;
        let a_sq = s11 * s11 + s12 * s21 + s21 * s12 + s22 * s22;
        assert_abs_diff_eq!(trace, g.mean_curvature(), epsilon = 1e-6);
        assert_abs_diff_eq!(a_sq, g.second_form_sq(), epsilon = 1e-6);
    }

    #[test]
    fn geodesic_distances_wrap() {
        let g = make_base::<f64>(GeometryKind::Circle, 1, 1.0, 128).unwrap();
        // antipodal: theta = 0 vs pi
        assert_abs_diff_eq!(g.geodesic_distance(0, 64), std::f64::consts::PI, epsilon = 1e-12);
        // periodic wrap: theta = 0 vs 3 pi / 2 is distance pi/2
        assert_abs_diff_eq!(
            g.geodesic_distance(0, 96),
            std::f64::consts::FRAC_PI_2,
            epsilon = 1e-12
        );
    }

    #[test]
    fn sphere_pole_to_equator_distance() {
        let g = make_base::<f64>(GeometryKind::Sphere, 2, 2.0, 64).unwrap();
        // pick the most polar grid row and a near-equator row; compare with
        // R * (angular difference) along the same longitude
        let p = match &g.plan {
            Plan::Sphere(p) => p,
            _ => unreachable!(),
        };
        let j_pole = p.nlat - 1; // nodes ascending: last is closest to north pole
        let j_eq = p.nlat / 2;
        let th_pole = p.nodes[j_pole].acos();
        let th_eq = p.nodes[j_eq].acos();
        let d = g.geodesic_distance(j_pole * p.nlon, j_eq * p.nlon);
        assert_abs_diff_eq!(d, 2.0 * (th_eq - th_pole), epsilon = 1e-10);
        // and the exact pole-to-equator arc for R = 2 is pi
        assert_abs_diff_eq!(2.0 * std::f64::consts::FRAC_PI_2, std::f64::consts::PI);
    }

    #[test]
    fn ball_volumes_match_closed_forms_and_quadrature() {
        let g = make_base::<f64>(GeometryKind::Circle, 1, 1.0, 128).unwrap();
        assert_abs_diff_eq!(g.ball_volume(0, 0.5).unwrap(), 1.0, epsilon = 1e-14);

        let plane = make_base::<f64>(GeometryKind::PeriodicPlane, 2, 2.0 * std::f64::consts::PI, 64).unwrap();
        assert_abs_diff_eq!(
            plane.ball_volume(0, 0.5).unwrap(),
            std::f64::consts::PI * 0.25,
            epsilon = 1e-14
        );

        let sph = make_base::<f64>(GeometryKind::Sphere, 2, 1.0, 64).unwrap();
        let cap = sph.ball_volume(0, 0.5).unwrap();
        assert_abs_diff_eq!(cap, 2.0 * std::f64::consts::PI * (1.0 - 0.5f64.cos()), epsilon = 1e-14);
        assert_abs_diff_eq!(cap, 0.7691714485, epsilon = 1e-9);

        // quadrature oracle: sum weights of grid points inside the cap
        let mut quad = 0.0;
        let center = (sph.num_points() / 2) + 3;
        for i in 0..sph.num_points() {
            if sph.geodesic_distance(center, i) <= 0.5 {
                quad += sph.quadrature_weight(i);
            }
        }
        assert!((quad - cap).abs() / cap < 0.05, "quad {quad} vs cap {cap}");

        assert!(g.ball_volume(0, 4.0).is_err());
    }

    #[test]
    fn volume_two_sided_bounds_hold() {
        for (kind, dim, scale, grid) in [
            (GeometryKind::Circle, 1, 1.0, 32),
            (GeometryKind::PeriodicLine, 1, 6.0, 32),
            (GeometryKind::PeriodicPlane, 2, 6.0, 16),
            (GeometryKind::Sphere, 2, 1.0, 16),
        ] {
            let g = make_base::<f64>(kind, dim, scale, grid).unwrap();
            let rep = g.volume_bound_report(40);
            assert!(rep.pass, "{kind:?}: {rep:?}");
        }
    }

    #[test]
    fn eigenfunctions_reproduce_eigenvalues() {
        for (kind, dim, scale, grid) in [
            (GeometryKind::Circle, 1, 1.3, 48),
            (GeometryKind::PeriodicLine, 1, 5.0, 48),
            (GeometryKind::PeriodicPlane, 2, 5.0, 24),
            (GeometryKind::Sphere, 2, 1.7, 24),
        ] {
            let g = make_base::<f64>(kind, dim, scale, grid).unwrap();
            let eigs = g.eigenvalues().to_vec();
            let cutoff = g.max_mode() / 3;
            for slot in 0..g.num_coeffs() {
                let mode = match &g.plan {
                    Plan::Angle(p) => p.slot_wavenumber(slot),
                    Plan::Torus(p) => {
                        let n = p.axis.len();
                        p.axis
                            .slot_wavenumber(slot % n)
                            .max(p.axis.slot_wavenumber(slot / n))
                    }
                    Plan::Sphere(p) => p.slots()[slot].l,
                };
                if mode == 0 || mode > cutoff {
                    continue;
                }
                let mut c = vec![0.0; g.num_coeffs()];
                c[slot] = 1.0;
                let basis = g.synthesize(&c);
                let lap = g.laplacian(&basis, None);
                let scale_ref = basis
                    .iter()
                    .map(|v| v.abs())
                    .fold(0.0f64, f64::max);
                for i in 0..basis.len() {
                    let err = (lap[i] - eigs[slot] * basis[i]).abs();
                    assert!(
                        err <= 1e-10 * eigs[slot].abs().max(1.0) * scale_ref.max(1.0),
                        "{kind:?} slot {slot}: err {err}"
                    );
                }
            }
        }
    }

    #[test]
    fn shrinking_family_laws() {
        let base = make_base::<f64>(GeometryKind::Circle, 1, 1.0, 32).unwrap();
        let ev = EvolvingGeometry::new(base, 0.4).unwrap();
        // ODE oracle for dR/dt = -n/R, RK4
        let mut r = 1.0f64;
        let steps = 20000;
        let dt = 0.25 / steps as f64;
        for _ in 0..steps {
            let f = |r: f64| -1.0 / r;
            let k1 = f(r);
            let k2 = f(r + 0.5 * dt * k1);
            let k3 = f(r + 0.5 * dt * k2);
            let k4 = f(r + dt * k3);
            r += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        assert_abs_diff_eq!(ev.radius(0.25).unwrap(), r, epsilon = 1e-10);
        assert_abs_diff_eq!(ev.radius(0.25).unwrap(), 0.7071068, epsilon = 1e-7);
        assert_abs_diff_eq!(ev.radius(0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(ev.conformal_time(0.0).unwrap(), 0.0);

        // quadrature oracle for tau
        let mut tau = 0.0;
        let tq = 0.25;
        let n = 200000;
        for i in 0..n {
            let s = tq * (i as f64 + 0.5) / n as f64;
            tau += tq / n as f64 / (1.0 - 2.0 * s);
        }
        assert_abs_diff_eq!(ev.conformal_time(tq).unwrap(), tau, epsilon = 1e-9);

        // sphere closed form
        let sb = make_base::<f64>(GeometryKind::Sphere, 2, 1.0, 16).unwrap();
        let evs = EvolvingGeometry::new(sb, 0.2).unwrap();
        assert_abs_diff_eq!(evs.radius(0.125).unwrap(), 0.5f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(
            evs.conformal_time(0.125).unwrap(),
            -(0.5f64.ln()) / 4.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(evs.conformal_time(0.125).unwrap(), 0.1732868, epsilon = 1e-7);

        // extinction guards
        assert!(ev.radius(0.5).is_err());
        assert!(EvolvingGeometry::new(
            make_base::<f64>(GeometryKind::Circle, 1, 1.0, 32).unwrap(),
            0.5
        )
        .is_err());
    }

    #[test]
    fn radius_invariant_exact() {
        let base = make_base::<f64>(GeometryKind::Sphere, 2, 1.3, 16).unwrap();
        let ev = EvolvingGeometry::new(base, 0.3).unwrap();
        for i in 0..50 {
            let t = 0.3 * i as f64 / 50.0;
            let r = ev.radius(t).unwrap();
            assert_abs_diff_eq!(r * r + 4.0 * t, 1.3 * 1.3, epsilon = 1e-14);
        }
    }

    #[test]
    fn distance_symmetry_and_triangle() {
        for (kind, dim, scale, grid) in [
            (GeometryKind::Circle, 1, 1.0, 32),
            (GeometryKind::PeriodicPlane, 2, 4.0, 16),
            (GeometryKind::Sphere, 2, 1.0, 16),
        ] {
            let g = make_base::<f64>(kind, dim, scale, grid).unwrap();
            let np = g.num_points();
            let samples = [(0usize, np / 3, np / 2), (1, np / 4, 2 * np / 3), (5, np / 7, np - 3)];
            for (a, b, c) in samples {
                let dab = g.geodesic_distance(a, b);
                let dba = g.geodesic_distance(b, a);
                assert_abs_diff_eq!(dab, dba, epsilon = 1e-12);
                let dac = g.geodesic_distance(a, c);
                let dcb = g.geodesic_distance(c, b);
                assert!(dab <= dac + dcb + 1e-10);
            }
        }
    }
}
