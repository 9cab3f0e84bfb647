//! Spectral transforms on the model domains.
//!
//! All transforms work in unit coordinates: the circle and periodic line are
//! sampled at `theta_i = 2*pi*i/N`, the torus on the product grid, and the
//! sphere on Gauss-Legendre colatitudes times uniform longitudes. Metric
//! scaling (radius, period) is applied by the geometry layer.
//!
//! Analysis is exact for bandlimited data: plain trapezoid sums on periodic
//! grids, Gauss-Legendre quadrature in latitude on the sphere.

use crate::scalar::{lit, Real};

/// Real trigonometric transform on `N` equispaced points of `[0, 2*pi)`.
///
/// Coefficient layout: `[a0, a1, b1, a2, b2, ..., a_{N/2-1}, b_{N/2-1}, a_{N/2}]`
/// so `f(theta) = a0 + sum_k (a_k cos k theta + b_k sin k theta) + a_{N/2} cos(N/2 theta)`.
pub struct Fourier1d<T> {
    n: usize,
    cos_table: Vec<T>, // [k * n + i] = cos(k theta_i), k = 0..=N/2
    sin_table: Vec<T>,
}

impl<T: Real> Fourier1d<T> {
    pub fn new(n: usize) -> Self {
        let two_pi = T::PI() + T::PI();
        let nf = lit::<T>(n as f64);
        let half = n / 2;
        let mut cos_table = vec![T::zero(); (half + 1) * n];
        let mut sin_table = vec![T::zero(); (half + 1) * n];
        for k in 0..=half {
            for i in 0..n {
                // reduce k*i mod n to keep the argument small
                let arg = two_pi * lit::<T>(((k * i) % n) as f64) / nf;
                cos_table[k * n + i] = arg.cos();
                sin_table[k * n + i] = arg.sin();
            }
        }
        Self {
            n,
            cos_table,
            sin_table,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    /// Integer wavenumber carried by a coefficient slot.
    pub fn slot_wavenumber(&self, slot: usize) -> usize {
        if slot == 0 {
            0
        } else if slot == self.n - 1 {
            self.n / 2
        } else {
            (slot + 1) / 2
        }
    }

    pub fn analyze(&self, values: &[T]) -> Vec<T> {
        assert_eq!(values.len(), self.n);
        let n = self.n;
        let half = n / 2;
        let inv_n = T::one() / lit::<T>(n as f64);
        let two = lit::<T>(2.0);
        let mut coeffs = vec![T::zero(); n];
        let mut mean = T::zero();
        for &v in values {
            mean = mean + v;
        }
        coeffs[0] = mean * inv_n;
        for k in 1..half {
            let mut ca = T::zero();
            let mut cb = T::zero();
            for i in 0..n {
                ca = ca + values[i] * self.cos_table[k * n + i];
                cb = cb + values[i] * self.sin_table[k * n + i];
            }
            coeffs[2 * k - 1] = two * ca * inv_n;
            coeffs[2 * k] = two * cb * inv_n;
        }
        let mut cn = T::zero();
        for i in 0..n {
            cn = cn + values[i] * self.cos_table[half * n + i];
        }
        coeffs[n - 1] = cn * inv_n;
        coeffs
    }

    pub fn synthesize(&self, coeffs: &[T]) -> Vec<T> {
        assert_eq!(coeffs.len(), self.n);
        let n = self.n;
        let half = n / 2;
        let mut values = vec![coeffs[0]; n];
        for k in 1..half {
            let a = coeffs[2 * k - 1];
            let b = coeffs[2 * k];
            if a == T::zero() && b == T::zero() {
                continue;
            }
            for i in 0..n {
                values[i] = values[i] + a * self.cos_table[k * n + i] + b * self.sin_table[k * n + i];
            }
        }
        let a = coeffs[n - 1];
        if a != T::zero() {
            for i in 0..n {
                values[i] = values[i] + a * self.cos_table[half * n + i];
            }
        }
        values
    }

    /// Coefficients of `d^order/d theta^order` applied to the series.
    ///
    /// The Nyquist sine partner is invisible on the grid, so its odd
    /// derivatives are dropped (standard collocation convention).
    pub fn differentiate(&self, coeffs: &[T], order: usize) -> Vec<T> {
        assert_eq!(coeffs.len(), self.n);
        let n = self.n;
        let half = n / 2;
        let mut out = coeffs.to_vec();
        for _ in 0..order {
            let mut next = vec![T::zero(); n];
            for k in 1..half {
                let kf = lit::<T>(k as f64);
                let a = out[2 * k - 1];
                let b = out[2 * k];
                next[2 * k - 1] = kf * b;
                next[2 * k] = -kf * a;
            }
            next[n - 1] = T::zero();
            out = next;
        }
        // even orders keep the Nyquist cosine alive
        if order % 2 == 0 && order > 0 {
            let kf = lit::<T>((half * half) as f64);
            let mut sign = T::one();
            for _ in 0..(order / 2) {
                sign = -sign;
            }
            out[n - 1] = sign * kf.powi((order / 2) as i32) * coeffs[n - 1];
        }
        out
    }

    /// Eigenvalue of `d^2/d theta^2` per coefficient slot.
    pub fn unit_eigenvalues(&self) -> Vec<T> {
        (0..self.n)
            .map(|s| {
                let k = self.slot_wavenumber(s) as f64;
                lit::<T>(-(k * k))
            })
            .collect()
    }
}

/// Tensor-product transform on the `N x N` torus grid.
///
/// Slot layout is row-major over (y-slot, x-slot) of the 1d layout.
pub struct Fourier2d<T> {
    pub axis: Fourier1d<T>,
    n: usize,
}

impl<T: Real> Fourier2d<T> {
    pub fn new(n: usize) -> Self {
        Self {
            axis: Fourier1d::new(n),
            n,
        }
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn analyze(&self, values: &[T]) -> Vec<T> {
        let n = self.n;
        assert_eq!(values.len(), n * n);
        let mut rows = vec![T::zero(); n * n];
        for j in 0..n {
            let c = self.axis.analyze(&values[j * n..(j + 1) * n]);
            rows[j * n..(j + 1) * n].copy_from_slice(&c);
        }
        let mut out = vec![T::zero(); n * n];
        let mut col = vec![T::zero(); n];
        for sx in 0..n {
            for j in 0..n {
                col[j] = rows[j * n + sx];
            }
            let c = self.axis.analyze(&col);
            for sy in 0..n {
                out[sy * n + sx] = c[sy];
            }
        }
        out
    }

    pub fn synthesize(&self, coeffs: &[T]) -> Vec<T> {
        let n = self.n;
        assert_eq!(coeffs.len(), n * n);
        let mut cols = vec![T::zero(); n * n];
        let mut col = vec![T::zero(); n];
        for sx in 0..n {
            for sy in 0..n {
                col[sy] = coeffs[sy * n + sx];
            }
            let v = self.axis.synthesize(&col);
            for j in 0..n {
                cols[j * n + sx] = v[j];
            }
        }
        let mut out = vec![T::zero(); n * n];
        for j in 0..n {
            let v = self.axis.synthesize(&cols[j * n..(j + 1) * n]);
            out[j * n..(j + 1) * n].copy_from_slice(&v);
        }
        out
    }

    /// Apply `d^ox/dx^ox d^oy/dy^oy` in coefficient space.
    pub fn differentiate(&self, coeffs: &[T], ox: usize, oy: usize) -> Vec<T> {
        let n = self.n;
        let mut out = coeffs.to_vec();
        if ox > 0 {
            for sy in 0..n {
                let row: Vec<T> = (0..n).map(|sx| out[sy * n + sx]).collect();
                let d = self.axis.differentiate(&row, ox);
                for sx in 0..n {
                    out[sy * n + sx] = d[sx];
                }
            }
        }
        if oy > 0 {
            for sx in 0..n {
                let col: Vec<T> = (0..n).map(|sy| out[sy * n + sx]).collect();
                let d = self.axis.differentiate(&col, oy);
                for sy in 0..n {
                    out[sy * n + sx] = d[sy];
                }
            }
        }
        out
    }

    pub fn unit_eigenvalues(&self) -> Vec<T> {
        let n = self.n;
        let e1 = self.axis.unit_eigenvalues();
        let mut out = vec![T::zero(); n * n];
        for sy in 0..n {
            for sx in 0..n {
                out[sy * n + sx] = e1[sx] + e1[sy];
            }
        }
        out
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    let nf = n as f64;
    for i in 0..n {
        // Tricomi-style initial guess, then Newton on P_n
        let mut x = lit::<T>((std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos());
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let step = p / dp;
            x = x - step;
            if step.abs() < lit::<T>(1e-15) {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        nodes[n - 1 - i] = x; // ascending order
        weights[n - 1 - i] = lit::<T>(2.0) / ((T::one() - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
pub fn legendre_with_derivative<T: Real>(n: usize, x: T) -> (T, T) {
    if n == 0 {
        return (T::one(), T::zero());
    }
    let mut p_prev = T::one();
    let mut p = x;
    for l in 1..n {
        let lf = lit::<T>(l as f64);
        let two_l1 = lf + lf + T::one();
        let next = (two_l1 * x * p - lf * p_prev) / (lf + T::one());
        p_prev = p;
        p = next;
    }
    // (1-x^2) P_n' = n (P_{n-1} - x P_n)
    let nf = lit::<T>(n as f64);
    let dp = nf * (p_prev - x * p) / (T::one() - x * x);
    (p, dp)
}

/// Index bookkeeping for real spherical-harmonic coefficients.
///
/// Layout: all `m = 0` slots `(l = 0..=L)`, then for each `m >= 1` the cosine
/// slots `(l = m..=L)` followed by the sine slots.
#[derive(Clone, Copy, Debug)]
pub struct ShSlot {
    pub l: usize,
    pub m: usize,
    /// false = cosine (or m = 0), true = sine
    pub sine: bool,
}

/// Spherical-harmonic transform on Gauss-Legendre latitudes x uniform
/// longitudes, exact for fields bandlimited to degree `L = nlat/2 - 1`.
pub struct SphereTransform<T> {
    pub nlat: usize,
    pub nlon: usize,
    pub lmax: usize,
    pub nodes: Vec<T>,    // cos(colatitude), ascending
    pub weights: Vec<T>,  // Gauss-Legendre weights
    pub sin_lat: Vec<T>,  // sin(colatitude) > 0
    slots: Vec<ShSlot>,
    pair_offset: Vec<usize>, // (l, m) -> row into pbar tables, index m*(lmax+1)+l
    pbar: Vec<T>,            // [pair * nlat + j] normalized associated Legendre
    dpbar: Vec<T>,           // d/d(theta) of pbar
    cos_mphi: Vec<T>,        // [m * nlon + i]
    sin_mphi: Vec<T>,
    /// cos of geodesic angle between latitude rows at longitude offset:
    /// [j * nlat * nlon + jp * nlon + di]
    cos_gamma: Vec<T>,
}

impl<T: Real> SphereTransform<T> {
    pub fn new(nlat: usize) -> Self {
        let nlon = nlat;
        let lmax = nlat / 2 - 1;
        let (nodes, weights) = gauss_legendre::<T>(nlat);
        let sin_lat: Vec<T> = nodes.iter().map(|&x| (T::one() - x * x).sqrt()).collect();

        let mut slots = Vec::new();
        for l in 0..=lmax {
            slots.push(ShSlot { l, m: 0, sine: false });
        }
        for m in 1..=lmax {
            for l in m..=lmax {
                slots.push(ShSlot { l, m, sine: false });
            }
            for l in m..=lmax {
                slots.push(ShSlot { l, m, sine: true });
            }
        }

        let npairs = (lmax + 1) * (lmax + 2) / 2;
        let mut pair_offset = vec![usize::MAX; (lmax + 1) * (lmax + 1)];
        {
            let mut row = 0;
            for m in 0..=lmax {
                for l in m..=lmax {
                    pair_offset[m * (lmax + 1) + l] = row;
                    row += 1;
                }
            }
            debug_assert_eq!(row, npairs);
        }

        let mut pbar = vec![T::zero(); npairs * nlat];
        let mut dpbar = vec![T::zero(); npairs * nlat];
        for j in 0..nlat {
            let x = nodes[j];
            let s = sin_lat[j];
            // diagonal terms P̄_mm, then upward recurrence in l
            let mut pmm = (T::one() / lit::<T>(2.0)).sqrt(); // P̄_00
            for m in 0..=lmax {
                if m > 0 {
                    let mf = lit::<T>(m as f64);
                    pmm = pmm * ((mf + mf + T::one()) / (mf + mf)).sqrt() * s;
                }
                let row = pair_offset[m * (lmax + 1) + m];
                pbar[row * nlat + j] = pmm;
                if m + 1 <= lmax {
                    let mf = lit::<T>(m as f64);
                    let p_next = (mf + mf + lit::<T>(3.0)).sqrt() * x * pmm;
                    let row1 = pair_offset[m * (lmax + 1) + m + 1];
                    pbar[row1 * nlat + j] = p_next;
                    let mut p_lm1 = pmm;
                    let mut p_l = p_next;
                    for l in (m + 2)..=lmax {
                        let lf = lit::<T>(l as f64);
                        let m2 = lit::<T>((m * m) as f64);
                        let a = ((lit::<T>(4.0) * lf * lf - T::one()) / (lf * lf - m2)).sqrt();
                        let lm1 = lf - T::one();
                        let b = ((lm1 * lm1 - m2) / (lit::<T>(4.0) * lm1 * lm1 - T::one())).sqrt();
                        let p = a * (x * p_l - b * p_lm1);
                        let rowl = pair_offset[m * (lmax + 1) + l];
                        pbar[rowl * nlat + j] = p;
                        p_lm1 = p_l;
                        p_l = p;
                    }
                }
            }
            // dP̄/dtheta = [l x P̄_lm - sqrt((l^2-m^2)(2l+1)/(2l-1)) P̄_{l-1,m}] / sin(theta)
            for m in 0..=lmax {
                for l in m..=lmax {
                    let row = pair_offset[m * (lmax + 1) + l];
                    let lf = lit::<T>(l as f64);
                    let mut d = lf * x * pbar[row * nlat + j];
                    if l > m {
                        let rowm1 = pair_offset[m * (lmax + 1) + l - 1];
                        let l2m2 = lit::<T>((l * l - m * m) as f64);
                        let fac = (l2m2 * (lf + lf + T::one()) / (lf + lf - T::one())).sqrt();
                        d = d - fac * pbar[rowm1 * nlat + j];
                    }
                    dpbar[row * nlat + j] = d / s;
                }
            }
        }

        let two_pi = T::PI() + T::PI();
        let mut cos_mphi = vec![T::zero(); (lmax + 1) * nlon];
        let mut sin_mphi = vec![T::zero(); (lmax + 1) * nlon];
        for m in 0..=lmax {
            for i in 0..nlon {
                let arg = two_pi * lit::<T>(((m * i) % nlon) as f64) / lit::<T>(nlon as f64);
                cos_mphi[m * nlon + i] = arg.cos();
                sin_mphi[m * nlon + i] = arg.sin();
            }
        }

        let mut cos_gamma = vec![T::zero(); nlat * nlat * nlon];
        for j in 0..nlat {
            for jp in 0..nlat {
                for di in 0..nlon {
                    let arg = two_pi * lit::<T>(di as f64) / lit::<T>(nlon as f64);
                    let c = sin_lat[j] * sin_lat[jp] * arg.cos() + nodes[j] * nodes[jp];
                    cos_gamma[j * nlat * nlon + jp * nlon + di] =
                        c.max(-T::one()).min(T::one());
                }
            }
        }

        Self {
            nlat,
            nlon,
            lmax,
            nodes,
            weights,
            sin_lat,
            slots,
            pair_offset,
            pbar,
            dpbar,
            cos_mphi,
            sin_mphi,
            cos_gamma,
        }
    }

    pub fn num_points(&self) -> usize {
        self.nlat * self.nlon
    }

    pub fn num_coeffs(&self) -> usize {
        self.slots.len()
    }

    pub fn slots(&self) -> &[ShSlot] {
        &self.slots
    }

    #[inline]
    fn pb(&self, l: usize, m: usize, j: usize) -> T {
        self.pbar[self.pair_offset[m * (self.lmax + 1) + l] * self.nlat + j]
    }

    #[inline]
    fn dpb(&self, l: usize, m: usize, j: usize) -> T {
        self.dpbar[self.pair_offset[m * (self.lmax + 1) + l] * self.nlat + j]
    }

    pub fn cos_gamma(&self, j: usize, i: usize, jp: usize, ip: usize) -> T {
        let di = (i + self.nlon - ip) % self.nlon;
        self.cos_gamma[j * self.nlat * self.nlon + jp * self.nlon + di]
    }

    /// Longitude profiles per order m: `(mean-part, cos-part[m][j], sin-part[m][j])`.
    fn longitude_analysis(&self, values: &[T]) -> (Vec<T>, Vec<T>, Vec<T>) {
        let (nlat, nlon, lmax) = (self.nlat, self.nlon, self.lmax);
        let dphi = (T::PI() + T::PI()) / lit::<T>(nlon as f64);
        let mut f0 = vec![T::zero(); nlat];
        let mut fc = vec![T::zero(); lmax * nlat];
        let mut fs = vec![T::zero(); lmax * nlat];
        for j in 0..nlat {
            let row = &values[j * nlon..(j + 1) * nlon];
            let mut acc = T::zero();
            for &v in row {
                acc = acc + v;
            }
            f0[j] = acc * dphi;
            for m in 1..=lmax {
                let mut ac = T::zero();
                let mut as_ = T::zero();
                for i in 0..nlon {
                    ac = ac + row[i] * self.cos_mphi[m * nlon + i];
                    as_ = as_ + row[i] * self.sin_mphi[m * nlon + i];
                }
                fc[(m - 1) * nlat + j] = ac * dphi;
                fs[(m - 1) * nlat + j] = as_ * dphi;
            }
        }
        (f0, fc, fs)
    }

    pub fn analyze(&self, values: &[T]) -> Vec<T> {
        assert_eq!(values.len(), self.num_points());
        let (nlat, lmax) = (self.nlat, self.lmax);
        let (f0, fc, fs) = self.longitude_analysis(values);
        let inv_sqrt_2pi = T::one() / (T::PI() + T::PI()).sqrt();
        let inv_sqrt_pi = T::one() / T::PI().sqrt();
        let mut coeffs = vec![T::zero(); self.num_coeffs()];
        for (s, slot) in self.slots.iter().enumerate() {
            let (l, m) = (slot.l, slot.m);
            let mut acc = T::zero();
            for j in 0..nlat {
                let profile = if m == 0 {
                    f0[j]
                } else if !slot.sine {
                    fc[(m - 1) * nlat + j]
                } else {
                    fs[(m - 1) * nlat + j]
                };
                acc = acc + self.weights[j] * profile * self.pb(l, m, j);
            }
            coeffs[s] = acc * if m == 0 { inv_sqrt_2pi } else { inv_sqrt_pi };
        }
        let _ = lmax;
        coeffs
    }

    /// Latitude profiles `G(m, j)` for synthesis (cos and sin orders).
    fn latitude_profiles(&self, coeffs: &[T], use_dtheta: bool) -> (Vec<T>, Vec<T>, Vec<T>) {
        let (nlat, lmax) = (self.nlat, self.lmax);
        let inv_sqrt_2pi = T::one() / (T::PI() + T::PI()).sqrt();
        let inv_sqrt_pi = T::one() / T::PI().sqrt();
        let mut g0 = vec![T::zero(); nlat];
        let mut gc = vec![T::zero(); lmax * nlat];
        let mut gs = vec![T::zero(); lmax * nlat];
        for (s, slot) in self.slots.iter().enumerate() {
            let a = coeffs[s];
            if a == T::zero() {
                continue;
            }
            let (l, m) = (slot.l, slot.m);
            let norm = if m == 0 { inv_sqrt_2pi } else { inv_sqrt_pi };
            for j in 0..nlat {
                let basis = if use_dtheta {
                    self.dpb(l, m, j)
                } else {
                    self.pb(l, m, j)
                };
                let contrib = a * norm * basis;
                if m == 0 {
                    g0[j] = g0[j] + contrib;
                } else if !slot.sine {
                    gc[(m - 1) * nlat + j] = gc[(m - 1) * nlat + j] + contrib;
                } else {
                    gs[(m - 1) * nlat + j] = gs[(m - 1) * nlat + j] + contrib;
                }
            }
        }
        (g0, gc, gs)
    }

    fn assemble(&self, g0: &[T], gc: &[T], gs: &[T], mode: LonMode) -> Vec<T> {
        let (nlat, nlon, lmax) = (self.nlat, self.nlon, self.lmax);
        let mut out = vec![T::zero(); nlat * nlon];
        for j in 0..nlat {
            for i in 0..nlon {
                let mut v = match mode {
                    LonMode::Value => g0[j],
                    _ => T::zero(),
                };
                for m in 1..=lmax {
                    let c = gc[(m - 1) * nlat + j];
                    let s = gs[(m - 1) * nlat + j];
                    if c == T::zero() && s == T::zero() {
                        continue;
                    }
                    let cm = self.cos_mphi[m * nlon + i];
                    let sm = self.sin_mphi[m * nlon + i];
                    let mf = lit::<T>(m as f64);
                    v = v + match mode {
                        LonMode::Value => c * cm + s * sm,
                        LonMode::DPhi => mf * (-c * sm + s * cm),
                        LonMode::D2Phi => -mf * mf * (c * cm + s * sm),
                    };
                }
                out[j * nlon + i] = v;
            }
        }
        out
    }

    pub fn synthesize(&self, coeffs: &[T]) -> Vec<T> {
        let (g0, gc, gs) = self.latitude_profiles(coeffs, false);
        self.assemble(&g0, &gc, &gs, LonMode::Value)
    }

    pub fn unit_eigenvalues(&self) -> Vec<T> {
        self.slots
            .iter()
            .map(|s| lit::<T>(-((s.l * (s.l + 1)) as f64)))
            .collect()
    }

    /// Pointwise first and second angular derivatives on the unit sphere.
    pub fn jet(&self, coeffs: &[T]) -> SphereJet<T> {
        let (g0, gc, gs) = self.latitude_profiles(coeffs, false);
        let (d0, dc, ds) = self.latitude_profiles(coeffs, true);
        let f = self.assemble(&g0, &gc, &gs, LonMode::Value);
        let f_ph = self.assemble(&g0, &gc, &gs, LonMode::DPhi);
        let f_phph = self.assemble(&g0, &gc, &gs, LonMode::D2Phi);
        let f_th = self.assemble(&d0, &dc, &ds, LonMode::Value);
        let f_thph = self.assemble(&d0, &dc, &ds, LonMode::DPhi);
        let eig = self.unit_eigenvalues();
        let lap_coeffs: Vec<T> = coeffs.iter().zip(eig.iter()).map(|(&c, &e)| c * e).collect();
        let (l0, lc, ls) = self.latitude_profiles(&lap_coeffs, false);
        let lap1 = self.assemble(&l0, &lc, &ls, LonMode::Value);
        SphereJet {
            f,
            f_th,
            f_ph,
            f_thph,
            f_phph,
            lap1,
        }
    }
}

#[derive(Clone, Copy)]
enum LonMode {
    Value,
    DPhi,
    D2Phi,
}

/// Angular derivative bundle of a scalar field on the unit sphere.
pub struct SphereJet<T> {
    pub f: Vec<T>,
    pub f_th: Vec<T>,
    pub f_ph: Vec<T>,
    pub f_thph: Vec<T>,
    pub f_phph: Vec<T>,
    /// unit-sphere Laplace-Beltrami of f
    pub lap1: Vec<T>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn fourier_roundtrip_and_derivative() {
        let plan = Fourier1d::<f64>::new(32);
        let theta: Vec<f64> = (0..32).map(|i| 2.0 * std::f64::consts::PI * i as f64 / 32.0).collect();
        let values: Vec<f64> = theta.iter().map(|&t| 0.3 + (3.0 * t).cos() - 0.5 * (5.0 * t).sin()).collect();
        let coeffs = plan.analyze(&values);
        let back = plan.synthesize(&coeffs);
        for (v, b) in values.iter().zip(back.iter()) {
            assert_abs_diff_eq!(v, b, epsilon = 1e-12);
        }
        let d1 = plan.synthesize(&plan.differentiate(&coeffs, 1));
        for (i, &t) in theta.iter().enumerate() {
            let exact = -3.0 * (3.0 * t).sin() - 2.5 * (5.0 * t).cos();
            assert_abs_diff_eq!(d1[i], exact, epsilon = 1e-10);
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre::<f64>(16);
        // exact through degree 31
        let int_x30: f64 = x.iter().zip(w.iter()).map(|(&xi, &wi)| wi * xi.powi(30)).sum();
        assert_abs_diff_eq!(int_x30, 2.0 / 31.0, epsilon = 1e-13);
        let total: f64 = w.iter().sum();
        assert_abs_diff_eq!(total, 2.0, epsilon = 1e-13);
    }

    #[test]
    fn sphere_orthonormal_and_roundtrip() {
        let sph = SphereTransform::<f64>::new(16);
        // basis orthonormality through the quadrature
        for s1 in 0..sph.num_coeffs() {
            let mut c = vec![0.0; sph.num_coeffs()];
            c[s1] = 1.0;
            let v = sph.synthesize(&c);
            let back = sph.analyze(&v);
            for s2 in 0..sph.num_coeffs() {
                let expect = if s1 == s2 { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(back[s2], expect, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn sphere_jet_matches_analytic_harmonic() {
        // f = Y_21-like: use slot with l=2, m=1 cosine; check lap1 = -6 f and
        // the phi derivative structure.
        let sph = SphereTransform::<f64>::new(16);
        let slot = sph
            .slots()
            .iter()
            .position(|s| s.l == 2 && s.m == 1 && !s.sine)
            .unwrap();
        let mut c = vec![0.0; sph.num_coeffs()];
        c[slot] = 1.0;
        let jet = sph.jet(&c);
        for p in 0..sph.num_points() {
            assert_abs_diff_eq!(jet.lap1[p], -6.0 * jet.f[p], epsilon = 1e-10);
            assert_abs_diff_eq!(jet.f_phph[p], -jet.f[p], epsilon = 1e-10);
        }
        // finite-difference check of f_th along latitude at fixed longitude
        // via a fine synthesized profile
        let nlat = sph.nlat;
        for j in 1..nlat - 1 {
            // compare with centered difference over colatitude using nodes
            let th_m = sph.nodes[j - 1].acos();
            let th_p = sph.nodes[j + 1].acos();
            let i = 3;
            let fm = jet.f[(j - 1) * sph.nlon + i];
            let fp = jet.f[(j + 1) * sph.nlon + i];
            let fd = (fp - fm) / (th_p - th_m);
            // nodes are not equispaced; centered difference is only O(h),
            // use a loose tolerance
            assert_abs_diff_eq!(jet.f_th[j * sph.nlon + i], fd, epsilon = 0.05);
        }
    }
}
