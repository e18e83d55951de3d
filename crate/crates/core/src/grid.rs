//! Periodic spatial lattice, grid functions and spinors with continuum-normalized FFTs.

use crate::error::{Error, Result};
use crate::linalg::{c64, ZERO};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    pub box_length: f64,
    pub points_per_dim: usize,
    pub dimension: usize,
}

impl SpatialGrid {
    pub fn new(box_length: f64, points_per_dim: usize, dimension: usize) -> Result<Self> {
        if points_per_dim < 8 || points_per_dim % 2 != 0 {
            return Err(Error::Grid("points_per_dim must be even and at least 8".into()));
        }
        if !(dimension == 1 || dimension == 2) {
            return Err(Error::Grid(format!("spatial dimension {dimension} unsupported")));
        }
        if !(box_length > 0.0) || !box_length.is_finite() {
            return Err(Error::Grid("box_length must be positive".into()));
        }
        Ok(Self { box_length, points_per_dim, dimension })
    }

    pub fn modes(&self) -> usize {
        self.points_per_dim.pow(self.dimension as u32)
    }

    pub fn dx(&self) -> f64 {
        self.box_length / self.points_per_dim as f64
    }

    pub fn dk(&self) -> f64 {
        2.0 * PI / self.box_length
    }

    /// Δx^s
    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.dimension as i32)
    }

    /// Δk^s
    pub fn momentum_cell(&self) -> f64 {
        self.dk().powi(self.dimension as i32)
    }

    /// Multi-index of a flat site/mode index (row-major, last axis fastest).
    pub fn unflatten(&self, idx: usize) -> [usize; 2] {
        let n = self.points_per_dim;
        if self.dimension == 1 {
            [idx, 0]
        } else {
            [idx / n, idx % n]
        }
    }

    pub fn flatten(&self, m: [usize; 2]) -> usize {
        if self.dimension == 1 {
            m[0]
        } else {
            m[0] * self.points_per_dim + m[1]
        }
    }

    pub fn position(&self, idx: usize) -> [f64; 2] {
        let m = self.unflatten(idx);
        let x = |i: usize| -self.box_length / 2.0 + i as f64 * self.dx();
        if self.dimension == 1 {
            [x(m[0]), 0.0]
        } else {
            [x(m[0]), x(m[1])]
        }
    }

    fn rep(&self, m: usize) -> i64 {
        let n = self.points_per_dim as i64;
        let m = m as i64;
        if m < n / 2 {
            m
        } else {
            m - n
        }
    }

    /// Lattice momentum with representative in (2π/L)·{−n/2, …, n/2−1}.
    pub fn momentum(&self, idx: usize) -> [f64; 2] {
        let m = self.unflatten(idx);
        let k = |i: usize| self.dk() * self.rep(i) as f64;
        if self.dimension == 1 {
            [k(m[0]), 0.0]
        } else {
            [k(m[0]), k(m[1])]
        }
    }

    /// Momentum used in odd symbols: the Nyquist component is set to zero so that
    /// k ↦ −k is an exact symmetry of the lattice.
    pub fn momentum_odd(&self, idx: usize) -> [f64; 2] {
        let m = self.unflatten(idx);
        let nyq = self.points_per_dim / 2;
        let k = |i: usize| if i == nyq { 0.0 } else { self.dk() * self.rep(i) as f64 };
        if self.dimension == 1 {
            [k(m[0]), 0.0]
        } else {
            [k(m[0]), k(m[1])]
        }
    }

    /// Index of −k.
    pub fn negate(&self, idx: usize) -> usize {
        let n = self.points_per_dim;
        let m = self.unflatten(idx);
        self.flatten([(n - m[0]) % n, (n - m[1]) % n])
    }

    /// Index of k − u (periodic).
    pub fn difference(&self, k: usize, u: usize) -> usize {
        let n = self.points_per_dim;
        let a = self.unflatten(k);
        let b = self.unflatten(u);
        self.flatten([(a[0] + n - b[0]) % n, (a[1] + n - b[1]) % n])
    }

    fn sign(&self, idx: usize) -> f64 {
        let m = self.unflatten(idx);
        if (m[0] + m[1]) % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    fn check_same(&self, other: &SpatialGrid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }

    /// In-place unnormalized DFT over all axes.
    fn fft(&self, data: &mut [c64], inverse: bool) {
        let n = self.points_per_dim;
        let mut planner = FftPlanner::<f64>::new();
        let plan = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
        if self.dimension == 1 {
            plan.process(data);
            return;
        }
        plan.process(data);
        let mut col = vec![ZERO; n];
        for j in 0..n {
            for i in 0..n {
                col[i] = data[i * n + j];
            }
            plan.process(&mut col);
            for i in 0..n {
                data[i * n + j] = col[i];
            }
        }
    }

    /// ĝ(k) = (2π)^{−s/2} Σ_x g(x) e^{−ik·x} Δx^s
    pub fn forward(&self, values: &[c64]) -> Vec<c64> {
        let mut d = values.to_vec();
        self.fft(&mut d, false);
        let c = (2.0 * PI).powf(-(self.dimension as f64) / 2.0) * self.cell_volume();
        for (i, z) in d.iter_mut().enumerate() {
            *z *= c * self.sign(i);
        }
        d
    }

    /// g(x) = (2π)^{−s/2} Σ_k ĝ(k) e^{ik·x} Δk^s
    pub fn inverse(&self, coeffs: &[c64]) -> Vec<c64> {
        let c = (2.0 * PI).powf(-(self.dimension as f64) / 2.0) * self.momentum_cell();
        let mut d: Vec<c64> = coeffs.iter().enumerate().map(|(i, z)| z * (c * self.sign(i))).collect();
        self.fft(&mut d, true);
        d
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    pub grid: SpatialGrid,
    pub values: Vec<c64>,
}

impl GridFunction {
    pub fn new(grid: SpatialGrid, values: Vec<c64>) -> Result<Self> {
        if values.len() != grid.modes() {
            return Err(Error::Dimension { expected: grid.modes(), got: values.len() });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: SpatialGrid, f: impl Fn([f64; 2]) -> c64) -> Self {
        let values = (0..grid.modes()).map(|i| f(grid.position(i))).collect();
        Self { grid, values }
    }

    pub fn from_momentum(grid: SpatialGrid, coeffs: &[c64]) -> Self {
        Self { grid, values: grid.inverse(coeffs) }
    }

    pub fn zeros(grid: SpatialGrid) -> Self {
        Self { grid, values: vec![ZERO; grid.modes()] }
    }

    /// Periodized Gaussian amplitude·exp(−|x−center|²/(2 width²)).
    pub fn gaussian(grid: SpatialGrid, width: f64, amplitude: f64, center: [f64; 2]) -> Self {
        let l = grid.box_length;
        let images: Vec<f64> = (-2..=2).map(|j| j as f64 * l).collect();
        let g1 = |x: f64, c: f64| -> f64 {
            images.iter().map(|sh| (-(x - c - sh).powi(2) / (2.0 * width * width)).exp()).sum()
        };
        Self::from_fn(grid, |x| {
            let v = if grid.dimension == 1 { g1(x[0], center[0]) } else { g1(x[0], center[0]) * g1(x[1], center[1]) };
            c64::new(amplitude * v, 0.0)
        })
    }

    pub fn momentum(&self) -> Vec<c64> {
        self.grid.forward(&self.values)
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite("grid function"))
        }
    }

    pub fn same_grid(&self, other: &GridFunction) -> Result<()> {
        self.grid.check_same(&other.grid)
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.values.iter().all(|z| z.im.abs() <= tol)
    }

    /// Σ Δx^s g
    pub fn integral(&self) -> c64 {
        self.values.iter().sum::<c64>() * self.grid.cell_volume()
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    pub fn sup_distance(&self, other: &GridFunction) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn pointwise(&self, other: &GridFunction) -> GridFunction {
        GridFunction { grid: self.grid, values: self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect() }
    }

    pub fn conj(&self) -> GridFunction {
        GridFunction { grid: self.grid, values: self.values.iter().map(|z| z.conj()).collect() }
    }

    /// Spectral ∂_j (Nyquist component dropped).
    pub fn derivative(&self, axis: usize) -> GridFunction {
        let mut h = self.momentum();
        for (i, z) in h.iter_mut().enumerate() {
            *z *= c64::new(0.0, self.grid.momentum_odd(i)[axis]);
        }
        GridFunction::from_momentum(self.grid, &h)
    }

    /// Multiplication by the coordinate x^j.
    pub fn times_coordinate(&self, axis: usize) -> GridFunction {
        GridFunction {
            grid: self.grid,
            values: self.values.iter().enumerate().map(|(i, z)| z * self.grid.position(i)[axis]).collect(),
        }
    }
}

/// Spinor on the lattice, stored as momentum coefficients at index mode·N + a.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpinor {
    pub grid: SpatialGrid,
    pub n_spin: usize,
    pub coeffs: Vec<c64>,
}

impl GridSpinor {
    pub fn from_coeffs(grid: SpatialGrid, n_spin: usize, coeffs: Vec<c64>) -> Result<Self> {
        if coeffs.len() != grid.modes() * n_spin {
            return Err(Error::Dimension { expected: grid.modes() * n_spin, got: coeffs.len() });
        }
        Ok(Self { grid, n_spin, coeffs })
    }

    pub fn zeros(grid: SpatialGrid, n_spin: usize) -> Self {
        Self { grid, n_spin, coeffs: vec![ZERO; grid.modes() * n_spin] }
    }

    pub fn from_components(components: &[GridFunction]) -> Result<Self> {
        let grid = components.first().ok_or_else(|| Error::Argument("no components".into()))?.grid;
        let n = components.len();
        let mut coeffs = vec![ZERO; grid.modes() * n];
        for (a, c) in components.iter().enumerate() {
            grid.check_same(&c.grid)?;
            for (k, z) in c.momentum().into_iter().enumerate() {
                coeffs[k * n + a] = z;
            }
        }
        Ok(Self { grid, n_spin: n, coeffs })
    }

    pub fn component_momentum(&self, a: usize) -> Vec<c64> {
        self.coeffs.iter().skip(a).step_by(self.n_spin).copied().collect()
    }

    pub fn components(&self) -> Vec<GridFunction> {
        (0..self.n_spin)
            .map(|a| GridFunction::from_momentum(self.grid, &self.component_momentum(a)))
            .collect()
    }

    /// (v,w)_𝒟 = Σ Δk^s conj(v̂)ŵ, equal to the position quadrature by Parseval.
    pub fn inner(&self, other: &GridSpinor) -> c64 {
        crate::linalg::dot(&self.coeffs, &other.coeffs) * self.grid.momentum_cell()
    }

    /// Σ_sites Δx^s conj(v)·w in position space.
    pub fn inner_position(&self, other: &GridSpinor) -> c64 {
        let a = self.components();
        let b = other.components();
        a.iter()
            .zip(&b)
            .map(|(x, y)| x.values.iter().zip(&y.values).map(|(p, q)| p.conj() * q).sum::<c64>())
            .sum::<c64>()
            * self.grid.cell_volume()
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).re.max(0.0).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_1d_and_2d() {
        for (n, s) in [(16, 1), (12, 2)] {
            let g = SpatialGrid::new(7.0, n, s).unwrap();
            let f = GridFunction::from_fn(g, |x| c64::new((x[0] * 0.7).sin() + x[1], (x[0] - 0.3 * x[1]).cos()));
            let back = GridFunction::from_momentum(g, &f.momentum());
            assert!(back.sup_distance(&f) < 1e-12);
        }
    }

    #[test]
    fn gaussian_transform_matches_continuum() {
        let g = SpatialGrid::new(20.0, 64, 1).unwrap();
        let f = GridFunction::gaussian(g, 1.0, 1.0, [0.0, 0.0]);
        let h = f.momentum();
        for i in 0..g.modes() {
            let k = g.momentum(i)[0];
            let exact = (-k * k / 2.0).exp();
            assert!((h[i] - c64::new(exact, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn parseval() {
        let g = SpatialGrid::new(9.0, 10, 2).unwrap();
        let a = GridFunction::from_fn(g, |x| c64::new(x[0].cos(), x[1]));
        let b = GridFunction::from_fn(g, |x| c64::new(x[1].sin(), 0.5));
        let u = GridSpinor::from_components(&[a.clone(), b.clone()]).unwrap();
        let v = GridSpinor::from_components(&[b, a]).unwrap();
        assert!((u.inner(&v) - u.inner_position(&v)).norm() < 1e-11);
    }

    #[test]
    fn negate_and_difference() {
        let g = SpatialGrid::new(5.0, 8, 2).unwrap();
        for k in 0..g.modes() {
            let nk = g.negate(k);
            assert_eq!(g.negate(nk), k);
            let a = g.momentum_odd(k);
            let b = g.momentum_odd(nk);
            assert_eq!([a[0], a[1]], [-b[0], -b[1]]);
            assert_eq!(g.difference(k, k), 0);
        }
    }
}
