//! Height fields on a base geometry: single-time graphs and space-time
//! histories.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::BaseGeometry;
use crate::scalar::{lit, to_f64, Real};

/// Height of a normal graph over the base, sampled on the grid.
#[derive(Clone)]
pub struct GraphFunction<T: Real> {
    pub geom: Arc<BaseGeometry<T>>,
    pub values: Vec<T>,
    /// Optional time label when the graph is a slice of a history.
    pub time: Option<T>,
}

impl<T: Real> GraphFunction<T> {
    pub fn new(geom: Arc<BaseGeometry<T>>, values: Vec<T>) -> Result<Self> {
        if values.len() != geom.num_points() {
            return Err(Error::GridMismatch {
                left: geom.num_points(),
                right: values.len(),
            });
        }
        Ok(Self {
            geom,
            values,
            time: None,
        })
    }

    pub fn zero(geom: Arc<BaseGeometry<T>>) -> Self {
        let n = geom.num_points();
        Self {
            geom,
            values: vec![T::zero(); n],
            time: None,
        }
    }

    pub fn constant(geom: Arc<BaseGeometry<T>>, c: T) -> Self {
        let n = geom.num_points();
        Self {
            geom,
            values: vec![c; n],
            time: None,
        }
    }

    /// Sample a closure of the point coordinates (see
    /// [`BaseGeometry::point_coords`] for their meaning per kind).
    pub fn from_fn(geom: Arc<BaseGeometry<T>>, f: impl Fn(T, T) -> T) -> Self {
        let values = (0..geom.num_points())
            .map(|i| {
                let (a, b) = geom.point_coords(i);
                f(a, b)
            })
            .collect();
        Self {
            geom,
            values,
            time: None,
        }
    }

    pub fn sup_norm(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            geom: self.geom.clone(),
            values: self.values.iter().map(|&v| v * factor).collect(),
            time: self.time,
        }
    }
}

/// Random bandlimited graph with standard-normal coefficients, deterministic
/// in the seed. The caller rescales as needed.
pub fn random_graph<T: Real>(
    geom: &Arc<BaseGeometry<T>>,
    bandlimit: usize,
    seed: u64,
) -> GraphFunction<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs = random_coeffs(geom, bandlimit, &mut rng);
    GraphFunction {
        geom: geom.clone(),
        values: geom.synthesize(&coeffs),
        time: None,
    }
}

fn random_coeffs<T: Real>(
    geom: &Arc<BaseGeometry<T>>,
    bandlimit: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<T> {
    let eigs = geom.eigenvalues();
    let unit = geom.angle_unit();
    (0..geom.num_coeffs())
        .map(|s| {
            // mode number from the metric eigenvalue; exact enough to gate
            let lam = -eigs[s] * unit * unit;
            let mode = to_f64(lam).sqrt().round() as usize;
            if mode <= bandlimit {
                lit::<T>(standard_normal(rng))
            } else {
                T::zero()
            }
        })
        .collect()
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; two uniforms per draw keeps the stream simple and portable
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// A field on (grid point) x (time node). Slice-major storage.
#[derive(Clone)]
pub struct SpaceTimeField<T: Real> {
    pub geom: Arc<BaseGeometry<T>>,
    times: Vec<T>,
    data: Vec<T>,
}

impl<T: Real> SpaceTimeField<T> {
    pub fn new(geom: Arc<BaseGeometry<T>>, times: Vec<T>, data: Vec<T>) -> Result<Self> {
        if times.is_empty() || times[0] != T::zero() {
            return Err(Error::Unsupported("time grid must start at 0"));
        }
        for w in times.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Unsupported("time grid must be strictly increasing"));
            }
        }
        if data.len() != times.len() * geom.num_points() {
            return Err(Error::GridMismatch {
                left: times.len() * geom.num_points(),
                right: data.len(),
            });
        }
        Ok(Self { geom, times, data })
    }

    /// Uniform time grid 0 = t_0 < ... < t_J = horizon with J intervals.
    pub fn uniform_times(horizon: T, intervals: usize) -> Vec<T> {
        (0..=intervals)
            .map(|j| horizon * lit::<T>(j as f64) / lit::<T>(intervals as f64))
            .collect()
    }

    pub fn zero(geom: Arc<BaseGeometry<T>>, times: Vec<T>) -> Self {
        let n = times.len() * geom.num_points();
        Self {
            geom,
            times,
            data: vec![T::zero(); n],
        }
    }

    pub fn constant(geom: Arc<BaseGeometry<T>>, times: Vec<T>, c: T) -> Self {
        let n = times.len() * geom.num_points();
        Self {
            geom,
            times,
            data: vec![c; n],
        }
    }

    pub fn from_fn(
        geom: Arc<BaseGeometry<T>>,
        times: Vec<T>,
        f: impl Fn(T, T, T) -> T,
    ) -> Self {
        let np = geom.num_points();
        let mut data = Vec::with_capacity(times.len() * np);
        for &t in &times {
            for i in 0..np {
                let (a, b) = geom.point_coords(i);
                data.push(f(a, b, t));
            }
        }
        Self { geom, times, data }
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn num_slices(&self) -> usize {
        self.times.len()
    }

    pub fn slice(&self, j: usize) -> &[T] {
        let np = self.geom.num_points();
        &self.data[j * np..(j + 1) * np]
    }

    pub fn slice_mut(&mut self, j: usize) -> &mut [T] {
        let np = self.geom.num_points();
        &mut self.data[j * np..(j + 1) * np]
    }

    pub fn graph_at(&self, j: usize) -> GraphFunction<T> {
        GraphFunction {
            geom: self.geom.clone(),
            values: self.slice(j).to_vec(),
            time: Some(self.times[j]),
        }
    }

    pub fn from_slices(
        geom: Arc<BaseGeometry<T>>,
        times: Vec<T>,
        slices: Vec<Vec<T>>,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(times.len() * geom.num_points());
        for s in &slices {
            if s.len() != geom.num_points() {
                return Err(Error::GridMismatch {
                    left: geom.num_points(),
                    right: s.len(),
                });
            }
            data.extend_from_slice(s);
        }
        Self::new(geom, times, data)
    }

    /// Apply a per-slice operation (e.g. a nonlinearity).
    pub fn map_slices(&self, mut op: impl FnMut(usize, &[T]) -> Result<Vec<T>>) -> Result<Self> {
        let mut slices = Vec::with_capacity(self.num_slices());
        for j in 0..self.num_slices() {
            slices.push(op(j, self.slice(j))?);
        }
        Self::from_slices(self.geom.clone(), self.times.clone(), slices)
    }

    pub fn linear_combination(&self, a: T, other: &Self, b: T) -> Result<Self> {
        if self.data.len() != other.data.len() {
            return Err(Error::GridMismatch {
                left: self.data.len(),
                right: other.data.len(),
            });
        }
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(&x, &y)| a * x + b * y)
            .collect();
        Ok(Self {
            geom: self.geom.clone(),
            times: self.times.clone(),
            data,
        })
    }

    pub fn sup_norm(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            geom: self.geom.clone(),
            times: self.times.clone(),
            data: self.data.iter().map(|&v| v * factor).collect(),
        }
    }
}

/// Random bandlimited space-time field: per retained mode a random cubic in
/// t/T with standard-normal coefficients. Deterministic in the seed.
pub fn random_space_time<T: Real>(
    geom: &Arc<BaseGeometry<T>>,
    times: &[T],
    bandlimit: usize,
    seed: u64,
) -> SpaceTimeField<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eigs = geom.eigenvalues();
    let unit = geom.angle_unit();
    let horizon = *times.last().expect("nonempty time grid");
    let nc = geom.num_coeffs();
    let mut polys: Vec<Option<[T; 4]>> = Vec::with_capacity(nc);
    for s in 0..nc {
        let lam = -eigs[s] * unit * unit;
        let mode = to_f64(lam).sqrt().round() as usize;
        if mode <= bandlimit {
            polys.push(Some([
                lit::<T>(standard_normal(&mut rng)),
                lit::<T>(standard_normal(&mut rng)),
                lit::<T>(standard_normal(&mut rng)),
                lit::<T>(standard_normal(&mut rng)),
            ]));
        } else {
            polys.push(None);
        }
    }
    let mut slices = Vec::with_capacity(times.len());
    for &t in times {
        let s = t / horizon;
        let coeffs: Vec<T> = polys
            .iter()
            .map(|p| match p {
                Some([c0, c1, c2, c3]) => *c0 + s * (*c1 + s * (*c2 + s * *c3)),
                None => T::zero(),
            })
            .collect();
        slices.push(geom.synthesize(&coeffs));
    }
    SpaceTimeField::from_slices(geom.clone(), times.to_vec(), slices)
        .expect("slices built on the geometry grid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_base, GeometryKind};
    use approx::assert_abs_diff_eq;

    #[test]
    fn spectral_reconstruction_of_bandlimited_graph() {
        let g = make_base::<f64>(GeometryKind::Circle, 1, 1.0, 64).unwrap();
        let u = GraphFunction::from_fn(g.clone(), |th, _| 0.1 * (5.0 * th).cos());
        let coeffs = g.analyze(&u.values);
        let back = g.synthesize(&coeffs);
        for (a, b) in u.values.iter().zip(back.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn time_grid_validation() {
        let g = make_base::<f64>(GeometryKind::Circle, 1, 1.0, 32).unwrap();
        let np = g.num_points();
        assert!(SpaceTimeField::new(g.clone(), vec![0.1, 0.2], vec![0.0; 2 * np]).is_err());
        assert!(SpaceTimeField::new(g.clone(), vec![0.0, 0.2, 0.2], vec![0.0; 3 * np]).is_err());
        assert!(SpaceTimeField::new(g, vec![0.0, 0.2], vec![0.0; 2 * np]).is_ok());
    }

    #[test]
    fn random_fields_are_seed_deterministic_and_bandlimited() {
        let g = make_base::<f64>(GeometryKind::Circle, 1, 1.0, 64).unwrap();
        let a = random_graph(&g, 8, 7);
        let b = random_graph(&g, 8, 7);
        assert_eq!(a.values, b.values);
        let coeffs = g.analyze(&a.values);
        for (s, &c) in coeffs.iter().enumerate() {
            let k = match &g {
                _ => {
                    let lam: f64 = -g.eigenvalues()[s];
                    lam.sqrt().round() as usize
                }
            };
            if k > 8 {
                assert_abs_diff_eq!(c, 0.0, epsilon = 1e-12);
            }
        }
    }
}
