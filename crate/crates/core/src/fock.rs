//! Truncated fermionic Fock space over lowest-energy modes: CAR fields, normal-ordered bilinears,
//! the Wick-square derivation check and the implementer of a one-particle unitary.

use crate::dynamics::{cauchy_map, Integrator, PotentialProfile, SpacetimeField, SpectralData};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpinor};
use crate::linalg::{self, c64, ONE, ZERO, I};
use crate::operator::{Conjugation, OneParticleOperator};
use faer::Mat;
use serde::{Deserialize, Serialize};

pub const MAX_MODES: usize = 12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum CarNormalization {
    /// {ψ(v)*, ψ(w)} = 2(v,w)
    #[default]
    #[serde(rename = "self-dual-2")]
    SelfDual2,
    /// {ψ(v)*, ψ(w)} = (v,w)
    #[serde(rename = "standard-1")]
    Standard1,
}

impl CarNormalization {
    pub fn factor(self) -> f64 {
        match self {
            Self::SelfDual2 => 2.0,
            Self::Standard1 => 1.0,
        }
    }
}

/// χ⁺_j (lowest |Ĥ(k)| positive-energy modes) and χ⁻_j = Cχ⁺_j, normalized in (·,·)_𝒟.
/// Coordinates of a vector are ((χ⁺_1,v), …, (χ⁺_M,v), (χ⁻_1,v), …, (χ⁻_M,v)).
#[derive(Clone, Debug)]
pub struct ModeSelection {
    pub plus: Vec<Vec<c64>>,
    pub minus: Vec<Vec<c64>>,
    pub modes: Vec<usize>,
    weight: f64,
}

impl ModeSelection {
    pub fn lowest_modes(spectral: &SpectralData, num_modes: usize) -> Result<Self> {
        if num_modes == 0 || num_modes > MAX_MODES || num_modes % 2 != 0 {
            return Err(Error::Fock(format!("number of modes must be even and at most {MAX_MODES}")));
        }
        let weight = spectral.grid.momentum_cell();
        let conj = Conjugation::new(&spectral.dirac, spectral.grid);
        // rank by the true |k| so the Nyquist modes (symbol zeroed) come last
        let k2 = |i: usize| spectral.grid.momentum(i).iter().map(|x| x * x).sum::<f64>();
        let mut order: Vec<usize> = (0..spectral.grid.modes()).collect();
        order.sort_by(|&a, &b| k2(a).partial_cmp(&k2(b)).unwrap().then(a.cmp(&b)));
        let n = spectral.n_spin();
        let mut plus = Vec::new();
        let mut modes = Vec::new();
        'outer: for &mode in &order {
            for x in spectral.plus_vectors(mode) {
                if plus.len() == num_modes {
                    break 'outer;
                }
                let mut v = vec![ZERO; spectral.dim()];
                for a in 0..n {
                    v[mode * n + a] = x[a] / weight.sqrt();
                }
                plus.push(v);
                modes.push(mode);
            }
        }
        let minus = plus.iter().map(|v| conj.apply(v)).collect();
        Ok(Self { plus, minus, modes, weight })
    }

    pub fn num_modes(&self) -> usize {
        self.plus.len()
    }

    /// Basis vectors in coordinate order.
    pub fn basis(&self) -> Vec<&Vec<c64>> {
        self.plus.iter().chain(self.minus.iter()).collect()
    }

    pub fn inner(&self, a: &[c64], b: &[c64]) -> c64 {
        linalg::dot(a, b) * self.weight
    }

    pub fn coordinates(&self, v: &[c64]) -> Vec<c64> {
        self.basis().iter().map(|e| self.inner(e, v)).collect()
    }

    pub fn vector(&self, coords: &[c64]) -> Vec<c64> {
        let mut out = vec![ZERO; self.plus[0].len()];
        for (e, c) in self.basis().iter().zip(coords) {
            linalg::axpy(&mut out, *c, e);
        }
        out
    }

    /// max |(e_i,e_j) − δ_ij|.
    pub fn orthonormality_defect(&self) -> f64 {
        let b = self.basis();
        let mut m = 0.0f64;
        for (i, x) in b.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                let d = if i == j { ONE } else { ZERO };
                m = m.max((self.inner(x, y) - d).norm());
            }
        }
        m
    }

    /// max ‖ε χ^± ∓ χ^±‖.
    pub fn sign_invariance_defect(&self, spectral: &SpectralData) -> f64 {
        let mut m = 0.0f64;
        for (vs, s) in [(&self.plus, 1.0), (&self.minus, -1.0)] {
            for v in vs {
                let p = spectral.project(1.0, v);
                let q = spectral.project(-1.0, v);
                let ev: Vec<c64> = p.iter().zip(&q).map(|(a, b)| a - b).collect();
                let target: Vec<c64> = v.iter().map(|z| z * s).collect();
                m = m.max(linalg::diff_norm(&ev, &target) * self.weight.sqrt());
            }
        }
        m
    }

    /// Compressed matrix (e_i, A e_j) and the relative leakage ‖(1−P)AP‖_HS / ‖AP‖_HS.
    pub fn compress(&self, op: &OneParticleOperator) -> (Mat<c64>, f64) {
        let ae = linalg::mul(op.matrix.as_ref(), self.basis_matrix().as_ref());
        self.compress_columns(&ae)
    }

    /// Basis vectors χ⁺…, χ⁻… as columns.
    pub fn basis_matrix(&self) -> Mat<c64> {
        let b = self.basis();
        let d = self.plus[0].len();
        Mat::from_fn(d, b.len(), |i, j| b[j][i])
    }

    /// Same, from precomputed columns A e_j.
    pub fn compress_columns(&self, ae: &Mat<c64>) -> (Mat<c64>, f64) {
        let b = self.basis();
        let m2 = b.len();
        let compressed = Mat::from_fn(m2, m2, |i, j| self.inner(b[i], ae.col_as_slice(j)));
        let mut leak = 0.0;
        let mut total = 0.0;
        for j in 0..m2 {
            let col = ae.col_as_slice(j);
            let inside = self.vector(compressed.col_as_slice(j));
            leak += linalg::diff_norm(col, &inside).powi(2) * self.weight;
            total += linalg::norm(col).powi(2) * self.weight;
        }
        let residual = if total == 0.0 { 0.0 } else { (leak / total).sqrt() };
        (compressed, residual)
    }
}

/// Antilinear C on coordinates: swaps the χ⁺ and χ⁻ blocks and conjugates.
pub fn conj_coords(c: &[c64]) -> Vec<c64> {
    let m = c.len() / 2;
    (0..2 * m).map(|i| if i < m { c[i + m].conj() } else { c[i - m].conj() }).collect()
}

/// C A C in coordinates.
pub fn conj_sandwich_coords(a: &Mat<c64>) -> Mat<c64> {
    let m2 = a.nrows();
    let m = m2 / 2;
    let sw = |i: usize| if i < m { i + m } else { i - m };
    Mat::from_fn(m2, m2, |i, j| a[(sw(i), sw(j))].conj())
}

#[derive(Clone, Debug)]
pub struct FockSpace {
    pub num_modes: usize,
    pub normalization: CarNormalization,
}

impl FockSpace {
    pub fn build(num_modes: usize, normalization: CarNormalization) -> Result<Self> {
        if num_modes > MAX_MODES {
            return Err(Error::Fock(format!("{num_modes} modes exceed the size guard of {MAX_MODES}")));
        }
        Ok(Self { num_modes, normalization })
    }

    pub fn for_selection(sel: &ModeSelection, normalization: CarNormalization) -> Result<Self> {
        Self::build(sel.num_modes(), normalization)
    }

    pub fn dim(&self) -> usize {
        1 << self.num_modes
    }

    pub fn vacuum(&self) -> Vec<c64> {
        let mut v = vec![ZERO; self.dim()];
        v[0] = ONE;
        v
    }

    /// a_j or a_j† on an occupation state, Jordan–Wigner signs, unit normalization.
    fn ladder(state: usize, j: usize, dagger: bool) -> Option<(usize, f64)> {
        let bit = 1usize << j;
        let occupied = state & bit != 0;
        if occupied == dagger {
            return None;
        }
        let sign = if (state & (bit - 1)).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        Some((state ^ bit, sign))
    }

    fn scale(&self) -> f64 {
        self.normalization.factor().sqrt()
    }

    pub fn annihilator(&self, j: usize) -> Mat<c64> {
        let d = self.dim();
        let mut m = Mat::zeros(d, d);
        for s in 0..d {
            if let Some((t, sg)) = Self::ladder(s, j, false) {
                m[(t, s)] = c64::new(sg * self.scale(), 0.0);
            }
        }
        m
    }

    /// ψ(v) = Σ_j (χ⁻_j,v) a_j + (χ⁺_j,v) a_j† from coordinates.
    pub fn field(&self, coords: &[c64]) -> Mat<c64> {
        let d = self.dim();
        let m = self.num_modes;
        let mut out = Mat::zeros(d, d);
        let sc = self.scale();
        for s in 0..d {
            for j in 0..m {
                if let Some((t, sg)) = Self::ladder(s, j, false) {
                    out[(t, s)] += coords[m + j] * (sg * sc);
                }
                if let Some((t, sg)) = Self::ladder(s, j, true) {
                    out[(t, s)] += coords[j] * (sg * sc);
                }
            }
        }
        out
    }

    /// ψ(v)·x without forming the matrix.
    pub fn apply_field(&self, coords: &[c64], x: &[c64]) -> Vec<c64> {
        let m = self.num_modes;
        let sc = self.scale();
        let mut out = vec![ZERO; x.len()];
        for (s, &xs) in x.iter().enumerate() {
            if xs == ZERO {
                continue;
            }
            for j in 0..m {
                if let Some((t, sg)) = Self::ladder(s, j, false) {
                    out[t] += coords[m + j] * xs * (sg * sc);
                }
                if let Some((t, sg)) = Self::ladder(s, j, true) {
                    out[t] += coords[j] * xs * (sg * sc);
                }
            }
        }
        out
    }

    /// max over coordinate basis pairs of |{ψ(e_i)*, ψ(e_j)} − c δ_ij| and |ψ(e_i)* − ψ(Ce_i)|.
    pub fn car_residuals(&self) -> (f64, f64) {
        let m2 = 2 * self.num_modes;
        let unit = |i: usize| -> Vec<c64> { (0..m2).map(|k| if k == i { ONE } else { ZERO }).collect() };
        let fields: Vec<Mat<c64>> = (0..m2).map(|i| self.field(&unit(i))).collect();
        let id = linalg::identity(self.dim());
        let c = self.normalization.factor();
        let mut car = 0.0f64;
        let mut star = 0.0f64;
        for i in 0..m2 {
            let adj = linalg::adjoint(fields[i].as_ref());
            star = star.max(linalg::max_abs_diff(adj.as_ref(), self.field(&conj_coords(&unit(i))).as_ref()));
            for j in 0..m2 {
                let ac = linalg::add(linalg::mul(adj.as_ref(), fields[j].as_ref()).as_ref(), linalg::mul(fields[j].as_ref(), adj.as_ref()).as_ref());
                let target = if i == j { c } else { 0.0 };
                let t = linalg::scale(id.as_ref(), c64::new(target, 0.0));
                car = car.max(linalg::max_abs_diff(ac.as_ref(), t.as_ref()));
            }
        }
        (car, star)
    }

    /// ⟨Ω, ψ(v)*ψ(w)Ω⟩
    pub fn two_point(&self, v: &[c64], w: &[c64]) -> c64 {
        let om = self.vacuum();
        let pw = self.apply_field(w, &om);
        let pv = self.apply_field(v, &om);
        linalg::dot(&pv, &pw)
    }

    /// :G(A): = −(1/2c)(Σ_i ψ(Ae_i)*ψ(e_i) − vacuum expectation), normalized so that [:G(A):, ψ(v)] = ψ(Av)
    /// for hermitian A with CA = −AC.
    pub fn normal_ordered_bilinear(&self, a: &Mat<c64>) -> Result<Mat<c64>> {
        let m = self.num_modes;
        if a.nrows() != 2 * m || a.ncols() != 2 * m {
            return Err(Error::Fock("operator does not match the mode selection".into()));
        }
        let d = self.dim();
        let c = self.normalization.factor();
        let mut g = Mat::<c64>::zeros(d, d);
        // ψ(x)* = Σ conj(x⁻_j) a_j† + conj(x⁺_j) a_j ;  ψ(e_{+l}) = a_l†, ψ(e_{−l}) = a_l
        for s in 0..d {
            for l in 0..2 * m {
                let (lm, ldag) = if l < m { (l, true) } else { (l - m, false) };
                let Some((s1, g1)) = Self::ladder(s, lm, ldag) else { continue };
                for j in 0..m {
                    let cm = a[(m + j, l)].conj();
                    if cm != ZERO {
                        if let Some((s2, g2)) = Self::ladder(s1, j, true) {
                            g[(s2, s)] += cm * (g1 * g2 * c);
                        }
                    }
                    let cp = a[(j, l)].conj();
                    if cp != ZERO {
                        if let Some((s2, g2)) = Self::ladder(s1, j, false) {
                            g[(s2, s)] += cp * (g1 * g2 * c);
                        }
                    }
                }
            }
        }
        let vev = g[(0, 0)];
        for i in 0..d {
            g[(i, i)] -= vev;
        }
        let kappa = c64::new(-1.0 / (2.0 * c), 0.0);
        Ok(linalg::scale(g.as_ref(), kappa))
    }

    /// Same bilinear summed over an arbitrary orthonormal basis (columns of `basis`, in coordinates).
    pub fn normal_ordered_bilinear_in_basis(&self, a: &Mat<c64>, basis: &Mat<c64>) -> Result<Mat<c64>> {
        let m2 = 2 * self.num_modes;
        if a.nrows() != m2 || basis.nrows() != m2 {
            return Err(Error::Fock("operator does not match the mode selection".into()));
        }
        let d = self.dim();
        let mut g = Mat::<c64>::zeros(d, d);
        let ab = linalg::mul(a.as_ref(), basis.as_ref());
        for i in 0..basis.ncols() {
            let pa = self.field(ab.col_as_slice(i));
            let pe = self.field(basis.col_as_slice(i));
            g = linalg::add(g.as_ref(), linalg::mul(pa.as_ref().adjoint(), pe.as_ref()).as_ref());
        }
        let vev = g[(0, 0)];
        for i in 0..d {
            g[(i, i)] -= vev;
        }
        let c = self.normalization.factor();
        Ok(linalg::scale(g.as_ref(), c64::new(-1.0 / (2.0 * c), 0.0)))
    }

    /// max over basis v of ‖[G, ψ(v)] − ψ(Av)‖.
    pub fn derivation_residual(&self, g: &Mat<c64>, a: &Mat<c64>) -> f64 {
        let m2 = 2 * self.num_modes;
        let mut r = 0.0f64;
        for i in 0..m2 {
            let e: Vec<c64> = (0..m2).map(|k| if k == i { ONE } else { ZERO }).collect();
            let p = self.field(&e);
            let comm = linalg::sub(linalg::mul(g.as_ref(), p.as_ref()).as_ref(), linalg::mul(p.as_ref(), g.as_ref()).as_ref());
            let av: Vec<c64> = (0..m2).map(|k| a[(k, i)]).collect();
            r = r.max(linalg::max_abs_diff(comm.as_ref(), self.field(&av).as_ref()));
        }
        r
    }

    /// Unitary S with S ψ(v) S⁻¹ = ψ(Tv), phase fixed by ⟨Ω, SΩ⟩ ≥ 0.
    pub fn implementer(&self, t: &Mat<c64>) -> Result<Implementer> {
        let m = self.num_modes;
        if t.nrows() != 2 * m || t.ncols() != 2 * m {
            return Err(Error::Fock("operator does not match the mode selection".into()));
        }
        let unitarity = linalg::unitarity_defect(t.as_ref());
        if unitarity > 1e-8 {
            return Err(Error::Fock(format!("compressed operator not unitary (defect {unitarity:.3e})")));
        }
        let c_defect = linalg::max_abs_diff(conj_sandwich_coords(t).as_ref(), t.as_ref());
        if c_defect > 1e-8 {
            return Err(Error::Fock(format!("compressed operator does not commute with C (defect {c_defect:.3e})")));
        }
        let d = self.dim();
        let col = |j: usize| -> Vec<c64> { (0..2 * m).map(|k| t[(k, j)]).collect() };
        // the transformed annihilators ψ(Tχ⁻_j) must kill SΩ
        let mut q = Mat::<c64>::zeros(d, d);
        for j in 0..m {
            let f = self.field(&col(m + j));
            let ff = linalg::mul(f.as_ref().adjoint(), f.as_ref());
            q = linalg::add(q.as_ref(), ff.as_ref());
        }
        let (vals, vecs) = linalg::hermitian_eigen(q.as_ref());
        let scale = self.normalization.factor();
        if vals[0] > 1e-8 * scale {
            return Err(Error::Fock("empty solution space for the transformed vacuum".into()));
        }
        let gap = if vals.len() > 1 { vals[1] } else { f64::INFINITY };
        let null_dim = vals.iter().filter(|&&v| v <= 1e-8 * scale).count();
        let mut omega: Vec<c64> = vecs.col_as_slice(0).to_vec();
        if omega[0].norm() > 0.0 {
            let ph = omega[0].conj() / omega[0].norm();
            omega.iter_mut().for_each(|z| *z *= ph);
        }
        let mut s = Mat::<c64>::zeros(d, d);
        s.col_as_slice_mut(0).copy_from_slice(&omega);
        let sc = self.scale();
        for n in 1..d {
            let j = n.trailing_zeros() as usize;
            let prev = n ^ (1 << j);
            let x: Vec<c64> = s.col_as_slice(prev).to_vec();
            let y = self.apply_field(&col(j), &x);
            for (dst, v) in s.col_as_slice_mut(n).iter_mut().zip(y) {
                *dst = v / sc;
            }
        }
        Ok(Implementer { unitarity_defect: linalg::unitarity_defect(s.as_ref()), s, null_dim, gap })
    }

    /// max over basis v of ‖S ψ(v) S† − ψ(Tv)‖.
    pub fn intertwining_residual(&self, s: &Mat<c64>, t: &Mat<c64>) -> f64 {
        let m2 = 2 * self.num_modes;
        let sa = linalg::adjoint(s.as_ref());
        let mut r = 0.0f64;
        for i in 0..m2 {
            let e: Vec<c64> = (0..m2).map(|k| if k == i { ONE } else { ZERO }).collect();
            let lhs = linalg::mul(linalg::mul(s.as_ref(), self.field(&e).as_ref()).as_ref(), sa.as_ref());
            let tv: Vec<c64> = (0..m2).map(|k| t[(k, i)]).collect();
            r = r.max(linalg::max_abs_diff(lhs.as_ref(), self.field(&tv).as_ref()));
        }
        r
    }
}

#[derive(Clone, Debug)]
pub struct Implementer {
    pub s: Mat<c64>,
    pub unitarity_defect: f64,
    pub null_dim: usize,
    pub gap: f64,
}

/// Phase-aligned distance min_φ ‖S − e^{iφ}U‖_max.
pub fn phase_aligned_distance(s: &Mat<c64>, u: &Mat<c64>) -> f64 {
    let mut overlap = ZERO;
    for j in 0..s.ncols() {
        overlap += linalg::dot(u.col_as_slice(j), s.col_as_slice(j));
    }
    let ph = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { ONE };
    let aligned = linalg::scale(u.as_ref(), ph);
    linalg::max_abs_diff(s.as_ref(), aligned.as_ref())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExponentialCheck {
    pub scales: Vec<f64>,
    /// ‖S − e^{i:G(A):}‖ after phase alignment
    pub exp_defects: Vec<f64>,
    /// ‖S − (1 + i:G(A):)‖ after phase alignment
    pub linear_defects: Vec<f64>,
    pub linear_ratios: Vec<f64>,
    pub intertwining: Vec<f64>,
}

/// Implementer of e^{iσA} against e^{iσ:G(A):} for σ in `scales`.
pub fn exponential_check(fock: &FockSpace, a: &Mat<c64>, scales: &[f64]) -> Result<ExponentialCheck> {
    let mut out = ExponentialCheck { scales: scales.to_vec(), exp_defects: vec![], linear_defects: vec![], linear_ratios: vec![], intertwining: vec![] };
    for &sigma in scales {
        let asig = linalg::scale(a.as_ref(), c64::new(sigma, 0.0));
        let t = linalg::exp_i_hermitian(asig.as_ref());
        let imp = fock.implementer(&t)?;
        let g = fock.normal_ordered_bilinear(&asig)?;
        let eg = linalg::exp_i_hermitian(g.as_ref());
        let lin = linalg::add(linalg::identity(fock.dim()).as_ref(), linalg::scale(g.as_ref(), I).as_ref());
        out.exp_defects.push(phase_aligned_distance(&imp.s, &eg));
        out.linear_defects.push(phase_aligned_distance(&imp.s, &lin));
        out.intertwining.push(fock.intertwining_residual(&imp.s, &t));
    }
    out.linear_ratios = out.linear_defects.windows(2).map(|w| w[0] / w[1]).collect();
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WickReport {
    pub truncation_residual: f64,
    pub derivation_residual: f64,
    pub cross_check: Option<f64>,
    pub b_norm: f64,
}

/// B_c = −i·(v ↦ P₀R₀(c·R₀-lift of v)) on the selected basis, with c = a(t)b(x) multiplying
/// each spinor component in position space.
pub fn wick_generator_columns(profile: &PotentialProfile, sel: &ModeSelection, spectral: &SpectralData, dt: f64) -> Result<Mat<c64>> {
    let (lo, hi) = profile.support();
    let d = spectral.dim();
    let basis = sel.basis();
    let mut out = Mat::<c64>::zeros(d, basis.len());
    let n = spectral.n_spin();
    for (j, e) in basis.iter().enumerate() {
        let g = SpacetimeField::from_fn(spectral.grid, n, lo, hi, dt, |t| {
            let a = profile.a_tilde(t);
            if a == 0.0 {
                return vec![ZERO; d];
            }
            let mut phi = (*e).clone();
            spectral.free_in_place(t, &mut phi);
            let comps = GridSpinor { grid: spectral.grid, n_spin: n, coeffs: phi }.components();
            let c = GridFunction { grid: spectral.grid, values: profile.b.values.iter().map(|z| z * a).collect() };
            let prod: Vec<GridFunction> = comps.iter().map(|x| x.pointwise(&c)).collect();
            GridSpinor::from_components(&prod).expect("components share the grid").coeffs
        })?;
        let w = cauchy_map(&g, None, spectral, &Integrator::rk4(dt))?;
        for (dst, z) in out.col_as_slice_mut(j).iter_mut().zip(w) {
            *dst = -I * z;
        }
    }
    Ok(out)
}

/// Derivation property of :G(B_c): and, when given, the relative distance to a compressed reference.
/// `reference` holds the columns R·e_j of the reference operator on the selected basis.
pub fn wick_square_check(profile: &PotentialProfile, sel: &ModeSelection, fock: &FockSpace, spectral: &SpectralData, dt: f64, reference: Option<&Mat<c64>>) -> Result<WickReport> {
    let cols = wick_generator_columns(profile, sel, spectral, dt)?;
    let (b, truncation) = sel.compress_columns(&cols);
    if truncation > 0.1 {
        return Err(Error::Fock(format!("truncation residual {truncation:.3} exceeds 10%; refusing to certify")));
    }
    let g = fock.normal_ordered_bilinear(&b)?;
    let derivation = fock.derivation_residual(&g, &b);
    let b_norm = linalg::frobenius(b.as_ref());
    let cross_check = reference.map(|r| {
        let (rc, _) = sel.compress_columns(r);
        let diff = linalg::frobenius(linalg::sub(rc.as_ref(), b.as_ref()).as_ref());
        if b_norm == 0.0 {
            diff
        } else {
            diff / b_norm
        }
    });
    Ok(WickReport { truncation_residual: truncation, derivation_residual: derivation, cross_check, b_norm })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_mode_car() {
        let f = FockSpace::build(2, CarNormalization::SelfDual2).unwrap();
        assert_eq!(f.dim(), 4);
        let (car, star) = f.car_residuals();
        assert!(car < 1e-12 && star < 1e-14);
        let e_minus = [ZERO, ZERO, ONE, ZERO];
        assert_eq!(f.two_point(&e_minus, &e_minus), ZERO);
        let e_plus = [ONE, ZERO, ZERO, ZERO];
        assert!((f.two_point(&e_plus, &e_plus) - c64::new(2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn size_guard() {
        assert!(FockSpace::build(13, CarNormalization::SelfDual2).is_err());
    }

    #[test]
    fn zero_bilinear_and_identity_implementer() {
        let f = FockSpace::build(3, CarNormalization::SelfDual2).unwrap();
        let g = f.normal_ordered_bilinear(&Mat::zeros(6, 6)).unwrap();
        assert_eq!(linalg::max_abs(g.as_ref()), 0.0);
        let imp = f.implementer(&linalg::identity(6)).unwrap();
        assert!(linalg::max_abs_diff(imp.s.as_ref(), linalg::identity(8).as_ref()) < 1e-12);
        assert_eq!(imp.null_dim, 1);
    }

    #[test]
    fn vacuum_is_annihilated() {
        let f = FockSpace::build(3, CarNormalization::Standard1).unwrap();
        for j in 0..3 {
            let a = f.annihilator(j);
            assert!(linalg::matvec(a.as_ref(), &f.vacuum()).iter().all(|z| *z == ZERO));
        }
        let (car, _) = f.car_residuals();
        assert!(car < 1e-12);
    }
}
