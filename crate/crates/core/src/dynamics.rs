//! Free and interacting Dirac dynamics on the lattice: H₀, the propagators, and the fundamental solutions.

use crate::clifford::{DiracRep, ModelParams};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpinor, SpatialGrid};
use crate::linalg::{self, c64, ONE, ZERO, I};
use crate::moyal::{potential_operator, PotentialKind};
use crate::operator::OneParticleOperator;
use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

/// Per-mode symbol data of the free Dirac Hamiltonian.
#[derive(Clone, Debug)]
pub struct SpectralData {
    pub grid: SpatialGrid,
    pub model: ModelParams,
    pub dirac: DiracRep,
    n_spin: usize,
    energies: Vec<f64>,
    // row-major N×N blocks
    symbols: Vec<Vec<c64>>,
    plus_vectors: Vec<Vec<Vec<c64>>>,
    minus_vectors: Vec<Vec<Vec<c64>>>,
}

impl SpectralData {
    pub fn new(model: &ModelParams, dirac: &DiracRep, grid: &SpatialGrid) -> Result<Self> {
        if model.s() != grid.dimension {
            return Err(Error::GridMismatch(format!("model s = {} vs grid dimension {}", model.s(), grid.dimension)));
        }
        let n = dirac.n_spin;
        let g0 = dirac.gamma0();
        let g0gj: Vec<Mat<c64>> = (1..=grid.dimension).map(|j| linalg::mul(g0.as_ref(), dirac.gammas[j].as_ref())).collect();
        let mut energies = Vec::with_capacity(grid.modes());
        let mut symbols = Vec::with_capacity(grid.modes());
        let mut plus_vectors = Vec::with_capacity(grid.modes());
        let mut minus_vectors = Vec::with_capacity(grid.modes());
        for mode in 0..grid.modes() {
            let k = grid.momentum_odd(mode);
            // Ĥ(k) = −γ⁰γ^j k_j + γ⁰m = γ⁰γ_j k_j + γ⁰m
            let mut h = vec![ZERO; n * n];
            for a in 0..n {
                for b in 0..n {
                    let mut z = g0[(a, b)] * model.mass;
                    for (j, m) in g0gj.iter().enumerate() {
                        z += m[(a, b)] * k[j];
                    }
                    h[a * n + b] = z;
                }
            }
            let e = (k[0] * k[0] + k[1] * k[1] + model.mass * model.mass).sqrt();
            let proj = |sign: f64| -> Vec<c64> {
                (0..n * n)
                    .map(|idx| {
                        let d = if idx / n == idx % n { 0.5 } else { 0.0 };
                        c64::new(d, 0.0) + h[idx] * (0.5 * sign / e)
                    })
                    .collect()
            };
            plus_vectors.push(range_basis(&proj(1.0), n));
            minus_vectors.push(range_basis(&proj(-1.0), n));
            energies.push(e);
            symbols.push(h);
        }
        Ok(Self { grid: *grid, model: model.clone(), dirac: dirac.clone(), n_spin: n, energies, symbols, plus_vectors, minus_vectors })
    }

    pub fn n_spin(&self) -> usize {
        self.n_spin
    }

    pub fn dim(&self) -> usize {
        self.grid.modes() * self.n_spin
    }

    pub fn energy(&self, mode: usize) -> f64 {
        self.energies[mode]
    }

    pub fn symbol(&self, mode: usize) -> &[c64] {
        &self.symbols[mode]
    }

    pub fn plus_vectors(&self, mode: usize) -> &[Vec<c64>] {
        &self.plus_vectors[mode]
    }

    pub fn minus_vectors(&self, mode: usize) -> &[Vec<c64>] {
        &self.minus_vectors[mode]
    }

    fn block_operator(&self, label: &str, f: impl Fn(usize, usize, usize) -> c64) -> OneParticleOperator {
        let n = self.n_spin;
        let d = self.dim();
        let mut m = Mat::zeros(d, d);
        for mode in 0..self.grid.modes() {
            for a in 0..n {
                for b in 0..n {
                    m[(mode * n + a, mode * n + b)] = f(mode, a, b);
                }
            }
        }
        OneParticleOperator::new(m, label)
    }

    pub fn h0(&self) -> OneParticleOperator {
        self.block_operator("H0", |m, a, b| self.symbols[m][a * self.n_spin + b])
    }

    pub fn abs_h0(&self) -> OneParticleOperator {
        self.block_operator("|H0|", |m, a, b| if a == b { c64::new(self.energies[m], 0.0) } else { ZERO })
    }

    /// |H₀|^{−ν}
    pub fn abs_h0_power(&self, nu: f64) -> OneParticleOperator {
        self.block_operator("|H0|^-nu", |m, a, b| if a == b { c64::new(self.energies[m].powf(-nu), 0.0) } else { ZERO })
    }

    pub fn sign(&self) -> OneParticleOperator {
        self.block_operator("epsilon", |m, a, b| self.symbols[m][a * self.n_spin + b] / self.energies[m])
    }

    fn projector(&self, sign: f64, m: usize, a: usize, b: usize) -> c64 {
        let d = if a == b { 0.5 } else { 0.0 };
        c64::new(d, 0.0) + self.symbols[m][a * self.n_spin + b] * (0.5 * sign / self.energies[m])
    }

    pub fn p_plus(&self) -> OneParticleOperator {
        self.block_operator("p+", |m, a, b| self.projector(1.0, m, a, b))
    }

    pub fn p_minus(&self) -> OneParticleOperator {
        self.block_operator("p-", |m, a, b| self.projector(-1.0, m, a, b))
    }

    /// p₊ applied to a vector.
    pub fn project(&self, sign: f64, v: &[c64]) -> Vec<c64> {
        let n = self.n_spin;
        let mut out = vec![ZERO; v.len()];
        for m in 0..self.grid.modes() {
            for a in 0..n {
                let mut s = ZERO;
                for b in 0..n {
                    s += self.projector(sign, m, a, b) * v[m * n + b];
                }
                out[m * n + a] = s;
            }
        }
        out
    }

    /// Orthonormal columns spanning the range of p₊ (sign = +1) or p₋ (sign = −1),
    /// normalized in the coefficient inner product.
    pub fn range_basis(&self, sign: f64) -> Mat<c64> {
        let n = self.n_spin;
        let half = n / 2;
        let d = self.dim();
        let mut m = Mat::zeros(d, self.grid.modes() * half);
        for mode in 0..self.grid.modes() {
            let vs = if sign > 0.0 { &self.plus_vectors[mode] } else { &self.minus_vectors[mode] };
            for (c, v) in vs.iter().enumerate() {
                for a in 0..n {
                    m[(mode * n + a, mode * half + c)] = v[a];
                }
            }
        }
        m
    }

    /// v ↦ e^{itH₀}v on each column, in place.
    pub fn free_columns(&self, t: f64, m: &mut Mat<c64>) {
        for j in 0..m.ncols() {
            self.free_in_place(t, m.col_as_slice_mut(j));
        }
    }

    pub fn free_in_place(&self, t: f64, v: &mut [c64]) {
        let n = self.n_spin;
        let mut tmp = [ZERO; 8];
        for mode in 0..self.grid.modes() {
            let e = self.energies[mode];
            let c = (e * t).cos();
            let s = I * ((e * t).sin() / e);
            let h = &self.symbols[mode];
            let x = &mut v[mode * n..mode * n + n];
            for a in 0..n {
                let mut acc = ZERO;
                for b in 0..n {
                    acc += h[a * n + b] * x[b];
                }
                tmp[a] = x[a] * c + s * acc;
            }
            x.copy_from_slice(&tmp[..n]);
        }
    }

    /// M ↦ M·e^{itH₀}, in place.
    pub fn free_right(&self, t: f64, m: &mut Mat<c64>) {
        let n = self.n_spin;
        let rows = m.nrows();
        let mut blk = vec![ZERO; n * n];
        let mut tmp = vec![ZERO; n * rows];
        for mode in 0..self.grid.modes() {
            let e = self.energies[mode];
            let c = (e * t).cos();
            let s = I * ((e * t).sin() / e);
            let h = &self.symbols[mode];
            for a in 0..n {
                for b in 0..n {
                    blk[a * n + b] = h[a * n + b] * s + if a == b { c64::new(c, 0.0) } else { ZERO };
                }
            }
            for b in 0..n {
                for r in 0..rows {
                    let mut acc = ZERO;
                    for a in 0..n {
                        acc += m[(r, mode * n + a)] * blk[a * n + b];
                    }
                    tmp[b * rows + r] = acc;
                }
            }
            for b in 0..n {
                m.col_as_slice_mut(mode * n + b).copy_from_slice(&tmp[b * rows..(b + 1) * rows]);
            }
        }
    }

    pub fn free_propagator(&self, t: f64) -> OneParticleOperator {
        let mut m = linalg::identity(self.dim());
        self.free_columns(t, &mut m);
        OneParticleOperator::new(m, format!("exp(i t H0), t = {t}"))
    }

    /// γ⁰ applied blockwise.
    pub fn gamma0_apply(&self, v: &[c64]) -> Vec<c64> {
        let n = self.n_spin;
        let g = self.dirac.gamma0();
        let mut out = vec![ZERO; v.len()];
        for mode in 0..self.grid.modes() {
            for a in 0..n {
                let mut s = ZERO;
                for b in 0..n {
                    s += g[(a, b)] * v[mode * n + b];
                }
                out[mode * n + a] = s;
            }
        }
        out
    }

    /// Ĥ applied blockwise.
    pub fn h0_apply(&self, v: &[c64]) -> Vec<c64> {
        let n = self.n_spin;
        let mut out = vec![ZERO; v.len()];
        for mode in 0..self.grid.modes() {
            let h = &self.symbols[mode];
            for a in 0..n {
                let mut s = ZERO;
                for b in 0..n {
                    s += h[a * n + b] * v[mode * n + b];
                }
                out[mode * n + a] = s;
            }
        }
        out
    }
}

/// Orthonormal basis of the range of a rank-N/2 projector by Gram–Schmidt over its columns.
fn range_basis(p: &[c64], n: usize) -> Vec<Vec<c64>> {
    let mut basis: Vec<Vec<c64>> = Vec::new();
    let mut cols: Vec<Vec<c64>> = (0..n).map(|j| (0..n).map(|i| p[i * n + j]).collect()).collect();
    cols.sort_by(|a, b| linalg::norm(b).partial_cmp(&linalg::norm(a)).unwrap());
    for mut c in cols {
        for q in &basis {
            let d = linalg::dot(q, &c);
            linalg::axpy(&mut c, -d, q);
        }
        let nc = linalg::norm(&c);
        if nc > 1e-8 && basis.len() < n / 2 {
            c.iter_mut().for_each(|z| *z /= nc);
            basis.push(c);
        }
    }
    basis
}

/// Smooth compactly supported bump A·exp(1 − 1/(1 − ((t−t_c)/w)²)).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeBump {
    pub center: f64,
    pub half_width: f64,
    pub amplitude: f64,
}

impl TimeBump {
    pub fn value(&self, t: f64) -> f64 {
        let x = (t - self.center) / self.half_width;
        if x.abs() >= 1.0 {
            0.0
        } else {
            self.amplitude * (1.0 - 1.0 / (1.0 - x * x)).exp()
        }
    }

    /// [λ₋, λ₊]
    pub fn support(&self) -> (f64, f64) {
        (self.center - self.half_width, self.center + self.half_width)
    }
}

#[derive(Clone, Debug)]
pub struct PotentialProfile {
    pub kind: PotentialKind,
    pub bump: TimeBump,
    pub b: GridFunction,
    pub coupling: f64,
    /// 𝗏, including the γ⁰ factor.
    pub v: OneParticleOperator,
}

impl PotentialProfile {
    pub fn new(kind: PotentialKind, bump: TimeBump, b: GridFunction, model: &ModelParams, dirac: &DiracRep) -> Result<Self> {
        if !b.is_real(1e-12) {
            return Err(Error::Argument("potential profile b must be real".into()));
        }
        if !(bump.half_width > 0.0) {
            return Err(Error::Argument("time bump half_width must be positive".into()));
        }
        let grid = b.grid;
        let v = potential_operator(kind, &b, model, &grid, dirac)?;
        Ok(Self { kind, bump, b, coupling: 1.0, v })
    }

    /// Same profile with the potential scaled by λ.
    pub fn with_coupling(&self, lambda: f64) -> Self {
        Self { coupling: lambda, ..self.clone() }
    }

    /// ã(t): a(t) for V0/Vi, a(t)² for Vii, times the coupling.
    pub fn a_tilde(&self, t: f64) -> f64 {
        let a = self.bump.value(t);
        let base = match self.kind {
            PotentialKind::Vii => a * a,
            _ => a,
        };
        self.coupling * base
    }

    pub fn support(&self) -> (f64, f64) {
        self.bump.support()
    }

    pub fn is_zero(&self) -> bool {
        self.coupling == 0.0 || self.bump.amplitude == 0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegratorMethod {
    Rk4InteractionPicture,
    Dyson,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Integrator {
    pub method: IntegratorMethod,
    pub dt: f64,
    pub dyson_order: i64,
}

impl Integrator {
    pub fn rk4(dt: f64) -> Self {
        Self { method: IntegratorMethod::Rk4InteractionPicture, dt, dyson_order: 0 }
    }

    pub fn dyson(dt: f64, order: i64) -> Self {
        Self { method: IntegratorMethod::Dyson, dt, dyson_order: order }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Integrator("dt must be positive".into()));
        }
        if self.dyson_order < 0 {
            return Err(Error::Integrator("dyson_order must be non-negative".into()));
        }
        Ok(())
    }
}

/// Interaction-picture generator applied to a block: i·G(t)·Y with G(t) = e^{−itH₀} ã(t)𝗏 e^{itH₀}.
fn generator(spectral: &SpectralData, profile: &PotentialProfile, t: f64, y: MatRef<'_, c64>) -> Option<Mat<c64>> {
    let a = profile.a_tilde(t);
    if a == 0.0 {
        return None;
    }
    let mut tmp = y.to_owned();
    spectral.free_columns(t, &mut tmp);
    let mut out = linalg::mul(profile.v.matrix.as_ref(), tmp.as_ref());
    spectral.free_columns(-t, &mut out);
    let f = I * a;
    for j in 0..out.ncols() {
        out.col_as_slice_mut(j).iter_mut().for_each(|z| *z *= f);
    }
    Some(out)
}

fn steps_for(t_from: f64, t_to: f64, dt: f64) -> usize {
    (((t_to - t_from).abs() / dt) - 1e-9).ceil().max(0.0) as usize
}

fn axpy_mat(y: &mut Mat<c64>, a: c64, x: &Mat<c64>) {
    for j in 0..y.ncols() {
        let xs = x.col_as_slice(j);
        for (yi, xi) in y.col_as_slice_mut(j).iter_mut().zip(xs) {
            *yi += a * xi;
        }
    }
}

fn check_finite(y: &Mat<c64>) -> Result<()> {
    let ok = (0..y.ncols()).all(|j| y.col_as_slice(j).iter().all(|z| z.re.is_finite() && z.im.is_finite()));
    if ok {
        Ok(())
    } else {
        Err(Error::BlowUp("non-finite state during evolution".into()))
    }
}

/// RK4 on (1/i) dỸ/dt = G(t)Ỹ from t_from to t_to (either direction).
fn rk4_block(mut y: Mat<c64>, t_from: f64, t_to: f64, profile: &PotentialProfile, spectral: &SpectralData, dt: f64) -> Result<Mat<c64>> {
    let steps = steps_for(t_from, t_to, dt);
    if steps == 0 || profile.is_zero() {
        return Ok(y);
    }
    let h = (t_to - t_from) / steps as f64;
    let hc = c64::new(h, 0.0);
    for s in 0..steps {
        let t = t_from + s as f64 * h;
        let tm = t + 0.5 * h;
        let te = t + h;
        if profile.a_tilde(t) == 0.0 && profile.a_tilde(tm) == 0.0 && profile.a_tilde(te) == 0.0 {
            continue;
        }
        let zero = || Mat::<c64>::zeros(y.nrows(), y.ncols());
        let k1 = generator(spectral, profile, t, y.as_ref()).unwrap_or_else(zero);
        let mut y2 = y.clone();
        axpy_mat(&mut y2, hc * 0.5, &k1);
        let k2 = generator(spectral, profile, tm, y2.as_ref()).unwrap_or_else(zero);
        let mut y3 = y.clone();
        axpy_mat(&mut y3, hc * 0.5, &k2);
        let k3 = generator(spectral, profile, tm, y3.as_ref()).unwrap_or_else(zero);
        let mut y4 = y.clone();
        axpy_mat(&mut y4, hc, &k3);
        let k4 = generator(spectral, profile, te, y4.as_ref()).unwrap_or_else(zero);
        axpy_mat(&mut y, hc / 6.0, &k1);
        axpy_mat(&mut y, hc / 3.0, &k2);
        axpy_mat(&mut y, hc / 3.0, &k3);
        axpy_mat(&mut y, hc / 6.0, &k4);
    }
    check_finite(&y)?;
    Ok(y)
}

/// Dyson series to the given order with nested cumulative trapezoid quadrature.
fn dyson_block(y0: Mat<c64>, t_from: f64, t_to: f64, profile: &PotentialProfile, spectral: &SpectralData, dt: f64, order: i64) -> Result<Mat<c64>> {
    let steps = steps_for(t_from, t_to, dt).max(1);
    let h = (t_to - t_from) / steps as f64;
    let times: Vec<f64> = (0..=steps).map(|s| t_from + s as f64 * h).collect();
    let mut total = y0.clone();
    let mut prev: Vec<Option<Mat<c64>>> = vec![Some(y0.clone()); steps + 1];
    for _ in 0..order {
        let g: Vec<Option<Mat<c64>>> = times
            .iter()
            .zip(&prev)
            .map(|(&t, y)| y.as_ref().and_then(|y| generator(spectral, profile, t, y.as_ref())))
            .collect();
        let mut acc = Mat::<c64>::zeros(y0.nrows(), y0.ncols());
        let mut next: Vec<Option<Mat<c64>>> = Vec::with_capacity(steps + 1);
        let mut nonzero = false;
        next.push(None);
        for s in 1..=steps {
            if let Some(a) = &g[s - 1] {
                axpy_mat(&mut acc, c64::new(0.5 * h, 0.0), a);
                nonzero = true;
            }
            if let Some(b) = &g[s] {
                axpy_mat(&mut acc, c64::new(0.5 * h, 0.0), b);
                nonzero = true;
            }
            next.push(if nonzero { Some(acc.clone()) } else { None });
        }
        if let Some(last) = &next[steps] {
            axpy_mat(&mut total, ONE, last);
        }
        prev = next;
    }
    check_finite(&total)?;
    Ok(total)
}

/// Interaction-picture propagator T̃_{t_to,t_from} applied to a block of columns.
pub fn interaction_propagate(y: Mat<c64>, t_from: f64, t_to: f64, profile: &PotentialProfile, spectral: &SpectralData, integrator: &Integrator) -> Result<Mat<c64>> {
    integrator.validate()?;
    match integrator.method {
        IntegratorMethod::Rk4InteractionPicture => rk4_block(y, t_from, t_to, profile, spectral, integrator.dt),
        IntegratorMethod::Dyson => dyson_block(y, t_from, t_to, profile, spectral, integrator.dt, integrator.dyson_order),
    }
}

/// T^{(V)}_{t_to,t_from} applied to a block: e^{it_to H₀} T̃ e^{−it_from H₀}.
pub fn evolve_block(mut y: Mat<c64>, t_from: f64, t_to: f64, profile: &PotentialProfile, spectral: &SpectralData, integrator: &Integrator) -> Result<Mat<c64>> {
    spectral.free_columns(-t_from, &mut y);
    let mut y = interaction_propagate(y, t_from, t_to, profile, spectral, integrator)?;
    spectral.free_columns(t_to, &mut y);
    Ok(y)
}

pub fn evolve_vec(v: &[c64], t_from: f64, t_to: f64, profile: &PotentialProfile, spectral: &SpectralData, integrator: &Integrator) -> Result<Vec<c64>> {
    let y = Mat::from_fn(v.len(), 1, |i, _| v[i]);
    let out = evolve_block(y, t_from, t_to, profile, spectral, integrator)?;
    Ok(out.col_as_slice(0).to_vec())
}

pub fn evolve(v: &GridSpinor, t_from: f64, t_to: f64, profile: &PotentialProfile, spectral: &SpectralData, integrator: &Integrator) -> Result<GridSpinor> {
    if v.coeffs.len() != spectral.dim() {
        return Err(Error::Dimension { expected: spectral.dim(), got: v.coeffs.len() });
    }
    let coeffs = evolve_vec(&v.coeffs, t_from, t_to, profile, spectral, integrator)?;
    Ok(GridSpinor { grid: v.grid, n_spin: v.n_spin, coeffs })
}

pub fn evolution_operator(t_from: f64, t_to: f64, profile: &PotentialProfile, spectral: &SpectralData, integrator: &Integrator) -> Result<OneParticleOperator> {
    let y = evolve_block(linalg::identity(spectral.dim()), t_from, t_to, profile, spectral, integrator)?;
    Ok(OneParticleOperator::new(y, format!("T^V[{t_to}, {t_from}]")))
}

/// A spinor field sampled on the uniform time grid t_i = (start + i)·Δt.
#[derive(Clone, Debug, PartialEq)]
pub struct SpacetimeField {
    pub grid: SpatialGrid,
    pub n_spin: usize,
    pub dt: f64,
    pub start: i64,
    pub slices: Vec<Vec<c64>>,
}

impl SpacetimeField {
    /// Zero field on the anchored grid covering [t_min, t_max].
    pub fn window(grid: SpatialGrid, n_spin: usize, t_min: f64, t_max: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !(t_max > t_min) {
            return Err(Error::Window("need dt > 0 and t_max > t_min".into()));
        }
        let start = (t_min / dt).floor() as i64;
        let end = (t_max / dt).ceil() as i64;
        let n = (end - start + 1) as usize;
        Ok(Self { grid, n_spin, dt, start, slices: vec![vec![ZERO; grid.modes() * n_spin]; n] })
    }

    pub fn from_fn(grid: SpatialGrid, n_spin: usize, t_min: f64, t_max: f64, dt: f64, f: impl Fn(f64) -> Vec<c64>) -> Result<Self> {
        let mut field = Self::window(grid, n_spin, t_min, t_max, dt)?;
        for i in 0..field.len() {
            field.slices[i] = f(field.time(i));
        }
        Ok(field)
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        (self.start + i as i64) as f64 * self.dt
    }

    pub fn index_of(&self, t: f64) -> Option<usize> {
        let r = (t / self.dt).round() as i64 - self.start;
        if r < 0 || r as usize >= self.len() || ((r + self.start) as f64 * self.dt - t).abs() > 1e-9 * self.dt.max(1.0) {
            None
        } else {
            Some(r as usize)
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self { slices: vec![vec![ZERO; self.slices[0].len()]; self.len()], ..self.clone() }
    }

    /// First and last slice with a nonzero entry.
    pub fn time_support(&self) -> Option<(usize, usize)> {
        let nz: Vec<usize> = (0..self.len()).filter(|&i| self.slices[i].iter().any(|z| *z != ZERO)).collect();
        Some((*nz.first()?, *nz.last()?))
    }

    pub fn max_slice_norm(&self) -> f64 {
        let w = self.grid.momentum_cell().sqrt();
        self.slices.iter().map(|s| linalg::norm(s) * w).fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &SpacetimeField) -> SpacetimeField {
        let slices = self.slices.iter().zip(&other.slices).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect()).collect();
        Self { slices, ..self.clone() }
    }

    pub fn map_slices(&self, f: impl Fn(usize, &[c64]) -> Vec<c64>) -> SpacetimeField {
        let slices = (0..self.len()).map(|i| f(i, &self.slices[i])).collect();
        Self { slices, ..self.clone() }
    }

    fn check_compatible(&self, spectral: &SpectralData) -> Result<()> {
        if self.grid != spectral.grid || self.slices.first().map(|s| s.len()) != Some(spectral.dim()) {
            return Err(Error::GridMismatch("spacetime field does not match the spectral data".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Causal {
    Retarded,
    Advanced,
}

/// One time-slice step T^{(V)}_{t_to,t_from} v (free propagator when the potential is absent).
fn slice_step(v: &[c64], t_from: f64, t_to: f64, profile: Option<&PotentialProfile>, spectral: &SpectralData, integrator: &Integrator) -> Result<Vec<c64>> {
    if v.iter().all(|z| *z == ZERO) {
        return Ok(v.to_vec());
    }
    match profile {
        Some(p) if !p.is_zero() => evolve_vec(v, t_from, t_to, p, spectral, integrator),
        _ => {
            let mut out = v.to_vec();
            spectral.free_in_place(t_to - t_from, &mut out);
            Ok(out)
        }
    }
}

/// R±_V f(t) = ∓i ∫ θ(±(t−t')) T^{(V)}_{t,t'} γ⁰ f(t') dt' with trapezoid weights (θ(0) = ½).
pub fn fundamental_solution(sign: Causal, f: &SpacetimeField, profile: Option<&PotentialProfile>, spectral: &SpectralData, integrator: &Integrator) -> Result<SpacetimeField> {
    f.check_compatible(spectral)?;
    integrator.validate()?;
    if f.time_support().is_none() {
        return Err(Error::Window("source has empty time support".into()));
    }
    let dt = c64::new(f.dt, 0.0);
    let mut out = f.zeros_like();
    let n = f.len();
    let src: Vec<Vec<c64>> = f.slices.iter().map(|s| spectral.gamma0_apply(s)).collect();
    let mut acc = vec![ZERO; spectral.dim()];
    match sign {
        Causal::Retarded => {
            for i in 0..n {
                let mut cur = acc.clone();
                linalg::axpy(&mut cur, dt * 0.5, &src[i]);
                out.slices[i] = cur.iter().map(|z| -I * z).collect();
                if i + 1 < n {
                    linalg::axpy(&mut acc, dt, &src[i]);
                    acc = slice_step(&acc, f.time(i), f.time(i + 1), profile, spectral, integrator)?;
                }
            }
        }
        Causal::Advanced => {
            for i in (0..n).rev() {
                let mut cur = acc.clone();
                linalg::axpy(&mut cur, dt * 0.5, &src[i]);
                out.slices[i] = cur.iter().map(|z| I * z).collect();
                if i > 0 {
                    linalg::axpy(&mut acc, dt, &src[i]);
                    acc = slice_step(&acc, f.time(i), f.time(i - 1), profile, spectral, integrator)?;
                }
            }
        }
    }
    Ok(out)
}

/// R_V f = R⁺_V f − R⁻_V f.
pub fn causal_propagator(f: &SpacetimeField, profile: Option<&PotentialProfile>, spectral: &SpectralData, integrator: &Integrator) -> Result<SpacetimeField> {
    let r = fundamental_solution(Causal::Retarded, f, profile, spectral, integrator)?;
    let a = fundamental_solution(Causal::Advanced, f, profile, spectral, integrator)?;
    Ok(r.sub(&a))
}

/// ⟨f, h⟩ = ∫ dt Σ Δx^s f† γ⁰ h.
pub fn spacetime_pairing(f: &SpacetimeField, h: &SpacetimeField, spectral: &SpectralData) -> c64 {
    let w = spectral.grid.momentum_cell() * f.dt;
    f.slices
        .iter()
        .zip(&h.slices)
        .map(|(a, b)| linalg::dot(a, &spectral.gamma0_apply(b)))
        .sum::<c64>()
        * w
}

/// (f, h)_V = ⟨f, iR_V h⟩.
pub fn causal_pairing(f: &SpacetimeField, h: &SpacetimeField, profile: Option<&PotentialProfile>, spectral: &SpectralData, integrator: &Integrator) -> Result<c64> {
    let rh = causal_propagator(h, profile, spectral, integrator)?;
    let irh = rh.map_slices(|_, s| s.iter().map(|z| I * z).collect());
    Ok(spacetime_pairing(f, &irh, spectral))
}

/// Cauchy data at time t of R_V f: −i Σ_j Δt T_{t,t_j} γ⁰ f_j.
pub fn cauchy_data_at(t: f64, f: &SpacetimeField, profile: Option<&PotentialProfile>, spectral: &SpectralData, integrator: &Integrator) -> Result<Vec<c64>> {
    f.check_compatible(spectral)?;
    let n = f.len();
    let dt = c64::new(f.dt, 0.0);
    let mut acc = vec![ZERO; spectral.dim()];
    for i in (0..n).rev() {
        linalg::axpy(&mut acc, dt, &spectral.gamma0_apply(&f.slices[i]));
        if i > 0 {
            acc = slice_step(&acc, f.time(i), f.time(i - 1), profile, spectral, integrator)?;
        }
    }
    let acc = slice_step(&acc, f.time(0), t, profile, spectral, integrator)?;
    Ok(acc.iter().map(|z| -I * z).collect())
}

/// Q₀[f] = P₀R_V f.
pub fn cauchy_map(f: &SpacetimeField, profile: Option<&PotentialProfile>, spectral: &SpectralData, integrator: &Integrator) -> Result<Vec<c64>> {
    cauchy_data_at(0.0, f, profile, spectral, integrator)
}

/// D_V φ at interior slices: iγ⁰ ∂_t φ (centered) + γ⁰(Ĥ + ã𝗏)φ.
pub fn apply_dirac(phi: &SpacetimeField, profile: Option<&PotentialProfile>, spectral: &SpectralData) -> SpacetimeField {
    let n = phi.len();
    let mut out = phi.zeros_like();
    for i in 1..n.saturating_sub(1) {
        let t = phi.time(i);
        let mut hv = spectral.h0_apply(&phi.slices[i]);
        if let Some(p) = profile {
            let a = p.a_tilde(t);
            if a != 0.0 {
                let w = linalg::matvec(p.v.matrix.as_ref(), &phi.slices[i]);
                linalg::axpy(&mut hv, c64::new(a, 0.0), &w);
            }
        }
        let inv = 1.0 / (2.0 * phi.dt);
        for (h, (a, b)) in hv.iter_mut().zip(phi.slices[i + 1].iter().zip(&phi.slices[i - 1])) {
            *h += I * (a - b) * inv;
        }
        out.slices[i] = spectral.gamma0_apply(&hv);
    }
    out
}

/// max over interior slices of ‖(D_V φ)_i − f_i‖_𝒟.
pub fn dirac_residual(phi: &SpacetimeField, f: &SpacetimeField, profile: Option<&PotentialProfile>, spectral: &SpectralData) -> f64 {
    let d = apply_dirac(phi, profile, spectral);
    let w = spectral.grid.momentum_cell().sqrt();
    (1..phi.len().saturating_sub(1))
        .map(|i| linalg::diff_norm(&d.slices[i], &f.slices[i]) * w)
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (SpectralData, PotentialProfile) {
        let model = ModelParams::new(2, 0, 0.0, 1.0).unwrap();
        let dirac = DiracRep::build(&model).unwrap();
        let grid = SpatialGrid::new(16.0, 32, 1).unwrap();
        let spectral = SpectralData::new(&model, &dirac, &grid).unwrap();
        let b = GridFunction::gaussian(grid, 1.5, 1.0, [0.0, 0.0]);
        let bump = TimeBump { center: 0.0, half_width: 1.0, amplitude: 0.5 };
        let profile = PotentialProfile::new(PotentialKind::V0, bump, b, &model, &dirac).unwrap();
        (spectral, profile)
    }

    #[test]
    fn projector_identities() {
        let (s, _) = setup();
        let pp = s.p_plus();
        let pm = s.p_minus();
        let eps = s.sign();
        let d = s.dim();
        let sum = linalg::add(pp.matrix.as_ref(), pm.matrix.as_ref());
        assert!(linalg::max_abs_diff(sum.as_ref(), linalg::identity(d).as_ref()) < 1e-12);
        assert!(pp.compose(&pp).max_diff(&pp) < 1e-12);
        assert!(linalg::max_abs_diff(eps.compose(&eps).matrix.as_ref(), linalg::identity(d).as_ref()) < 1e-12);
        let diff = linalg::sub(pp.matrix.as_ref(), pm.matrix.as_ref());
        assert!(linalg::max_abs_diff(diff.as_ref(), eps.matrix.as_ref()) < 1e-12);
        assert!((0..s.grid.modes()).all(|m| s.energy(m) >= 1.0));
    }

    #[test]
    fn free_propagator_phases() {
        let (s, _) = setup();
        let t = 0.37;
        let u = s.free_propagator(t);
        assert!(u.unitarity_defect() < 1e-12);
        assert!(linalg::max_abs_diff(s.free_propagator(0.0).matrix.as_ref(), linalg::identity(s.dim()).as_ref()) == 0.0);
        let basis = s.range_basis(1.0);
        for mode in [0, 3, 17] {
            let v: Vec<c64> = basis.col_as_slice(mode).to_vec();
            let w = u.apply_vec(&v);
            let ph = linalg::cis(s.energy(mode) * t);
            let expected: Vec<c64> = v.iter().map(|z| z * ph).collect();
            assert!(linalg::diff_norm(&w, &expected) < 1e-13);
        }
    }

    #[test]
    fn free_right_matches_matrix_product() {
        let (s, _) = setup();
        let m = Mat::from_fn(s.dim(), 5, |i, j| c64::new((i * 3 + j) as f64 % 7.0, (i + 2 * j) as f64 % 5.0));
        let mt = linalg::adjoint(m.as_ref());
        let mut a = mt.clone();
        s.free_right(0.8, &mut a);
        let b = linalg::mul(mt.as_ref(), s.free_propagator(0.8).matrix.as_ref());
        assert!(linalg::max_abs_diff(a.as_ref(), b.as_ref()) < 1e-12);
    }

    #[test]
    fn zero_amplitude_is_free() {
        let (s, p) = setup();
        let p0 = p.with_coupling(0.0);
        let v: Vec<c64> = (0..s.dim()).map(|i| c64::new((i as f64 * 0.1).sin(), 0.0)).collect();
        let w = evolve_vec(&v, -1.3, 1.1, &p0, &s, &Integrator::rk4(1e-2)).unwrap();
        let mut x = v.clone();
        s.free_in_place(2.4, &mut x);
        assert!(linalg::diff_norm(&w, &x) < 1e-12);
    }

    #[test]
    fn integrator_validation() {
        let (s, p) = setup();
        let v = vec![ZERO; s.dim()];
        assert!(matches!(evolve_vec(&v, 0.0, 1.0, &p, &s, &Integrator::rk4(0.0)), Err(Error::Integrator(_))));
        assert!(matches!(evolve_vec(&v, 0.0, 1.0, &p, &s, &Integrator::dyson(0.1, -1)), Err(Error::Integrator(_))));
    }

    #[test]
    fn bump_support() {
        let b = TimeBump { center: 0.5, half_width: 1.0, amplitude: 2.0 };
        assert_eq!(b.value(-0.5), 0.0);
        assert_eq!(b.value(1.6), 0.0);
        assert!((b.value(0.5) - 2.0).abs() < 1e-15);
    }
}
