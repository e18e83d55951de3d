//! Scattering operator, its derivative, Hilbert–Schmidt diagnostics and the Bogoliubov-formula check.

use crate::dynamics::{
    causal_propagator, cauchy_map, interaction_propagate, Integrator, PotentialProfile, SpacetimeField, SpectralData,
};
use crate::error::{Error, Result};
use crate::linalg::{self, c64, ZERO, I};
use crate::moyal::left_mult_operator;
use crate::operator::OneParticleOperator;
use faer::Mat;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const DEFAULT_MARGIN: f64 = 1.0;

/// T_sc with explicit dressing margins: the interaction-picture propagator from λ₊ + future to λ₋ − past.
pub fn scattering_block(y: Mat<c64>, profile: &PotentialProfile, spectral: &SpectralData, integrator: &Integrator, past: f64, future: f64) -> Result<Mat<c64>> {
    if !(past > 0.0 && future > 0.0) {
        return Err(Error::Window("evolution window must extend beyond the potential support".into()));
    }
    let (lo, hi) = profile.support();
    interaction_propagate(y, hi + future, lo - past, profile, spectral, integrator)
}

pub fn scattering_operator_with_margins(profile: &PotentialProfile, spectral: &SpectralData, integrator: &Integrator, past: f64, future: f64) -> Result<OneParticleOperator> {
    let m = scattering_block(linalg::identity(spectral.dim()), profile, spectral, integrator, past, future)?;
    Ok(OneParticleOperator::new(m, "T_sc"))
}

pub fn scattering_operator(profile: &PotentialProfile, spectral: &SpectralData, integrator: &Integrator) -> Result<OneParticleOperator> {
    scattering_operator_with_margins(profile, spectral, integrator, DEFAULT_MARGIN, DEFAULT_MARGIN)
}

pub fn scattering_apply(v: &[c64], profile: &PotentialProfile, spectral: &SpectralData, integrator: &Integrator) -> Result<Vec<c64>> {
    let y = Mat::from_fn(v.len(), 1, |i, _| v[i]);
    let out = scattering_block(y, profile, spectral, integrator, DEFAULT_MARGIN, DEFAULT_MARGIN)?;
    Ok(out.col_as_slice(0).to_vec())
}

/// dT_sc = −∫ ã(s) e^{−isH₀} 𝗏 e^{isH₀} ds by the trapezoid rule with step ≈ dt_quad.
pub fn d_scattering(profile: &PotentialProfile, spectral: &SpectralData, dt_quad: f64) -> Result<OneParticleOperator> {
    if !(dt_quad > 0.0) {
        return Err(Error::Argument("dt_quad must be positive".into()));
    }
    let d = spectral.dim();
    let mut acc = Mat::<c64>::zeros(d, d);
    let (lo, hi) = profile.support();
    let steps = ((hi - lo) / dt_quad).ceil().max(1.0) as usize;
    let h = (hi - lo) / steps as f64;
    for s in 0..=steps {
        let t = lo + s as f64 * h;
        let w = if s == 0 || s == steps { 0.5 * h } else { h };
        let a = profile.a_tilde(t);
        if a == 0.0 {
            continue;
        }
        let mut m = profile.v.matrix.clone();
        spectral.free_columns(-t, &mut m);
        spectral.free_right(t, &mut m);
        let f = c64::new(-w * a, 0.0);
        for j in 0..d {
            let src = m.col_as_slice(j);
            for (y, x) in acc.col_as_slice_mut(j).iter_mut().zip(src) {
                *y += f * x;
            }
        }
    }
    // symmetrize away round-off
    let herm = Mat::from_fn(d, d, |i, j| (acc[(i, j)] + acc[(j, i)].conj()) * 0.5);
    Ok(OneParticleOperator::new(herm, "dT_sc"))
}

/// dT_sc·Y without assembling dT_sc, same quadrature as [`d_scattering`].
pub fn d_scattering_columns(profile: &PotentialProfile, spectral: &SpectralData, dt_quad: f64, y: &Mat<c64>) -> Result<Mat<c64>> {
    if !(dt_quad > 0.0) {
        return Err(Error::Argument("dt_quad must be positive".into()));
    }
    let mut acc = Mat::<c64>::zeros(y.nrows(), y.ncols());
    let (lo, hi) = profile.support();
    let steps = ((hi - lo) / dt_quad).ceil().max(1.0) as usize;
    let h = (hi - lo) / steps as f64;
    for s in 0..=steps {
        let t = lo + s as f64 * h;
        let w = if s == 0 || s == steps { 0.5 * h } else { h };
        let a = profile.a_tilde(t);
        if a == 0.0 {
            continue;
        }
        let mut tmp = y.clone();
        spectral.free_columns(t, &mut tmp);
        let mut m = linalg::mul(profile.v.matrix.as_ref(), tmp.as_ref());
        spectral.free_columns(-t, &mut m);
        let f = c64::new(-w * a, 0.0);
        for j in 0..y.ncols() {
            let src = m.col_as_slice(j);
            for (z, x) in acc.col_as_slice_mut(j).iter_mut().zip(src) {
                *z += f * x;
            }
        }
    }
    Ok(acc)
}

/// ‖Y₊† A Y₋‖_F = ‖p₊ A p₋‖_HS, computed blockwise.
pub fn hs_plus_minus(a: &Mat<c64>, spectral: &SpectralData) -> f64 {
    let yp = spectral.range_basis(1.0);
    let ym = spectral.range_basis(-1.0);
    let ay = linalg::mul(a.as_ref(), ym.as_ref());
    hs_plus_rows(&ay, &yp)
}

fn hs_plus_rows(ay: &Mat<c64>, yp: &Mat<c64>) -> f64 {
    let p = linalg::mul(yp.as_ref().adjoint(), ay.as_ref());
    linalg::frobenius(p.as_ref())
}

/// ‖[p₊, T]‖_HS for a full matrix.
pub fn commutator_hs(t: &OneParticleOperator, spectral: &SpectralData) -> f64 {
    let p = spectral.p_plus();
    let c = linalg::sub(p.compose(t).matrix.as_ref(), t.compose(&p).matrix.as_ref());
    linalg::frobenius(c.as_ref())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScatteringSummary {
    pub points_per_dim: usize,
    pub box_length: f64,
    pub dt: f64,
    pub hs_offdiag: f64,
    pub hs_plus_minus: f64,
    pub hs_dt: f64,
    pub unitarity_defect: f64,
}

#[derive(Clone, Debug)]
pub struct ScatteringResult {
    pub t_sc: OneParticleOperator,
    pub d_t_sc: OneParticleOperator,
    pub summary: ScatteringSummary,
}

pub fn scatter(profile: &PotentialProfile, spectral: &SpectralData, integrator: &Integrator, dt_quad: f64) -> Result<ScatteringResult> {
    let t_sc = scattering_operator(profile, spectral, integrator)?;
    let d_t_sc = d_scattering(profile, spectral, dt_quad)?;
    let summary = ScatteringSummary {
        points_per_dim: spectral.grid.points_per_dim,
        box_length: spectral.grid.box_length,
        dt: integrator.dt,
        hs_offdiag: commutator_hs(&t_sc, spectral),
        hs_plus_minus: hs_plus_minus(&t_sc.matrix, spectral),
        hs_dt: hs_plus_minus(&d_t_sc.matrix, spectral),
        unitarity_defect: t_sc.unitarity_defect(),
    };
    Ok(ScatteringResult { t_sc, d_t_sc, summary })
}

/// HS diagnostics evolving only the range of p₋; C-symmetry gives ‖p₋Tp₊‖ = ‖p₊Tp₋‖,
/// so ‖[p₊,T]‖_HS = √2·‖p₊Tp₋‖_HS.
pub fn scatter_half(profile: &PotentialProfile, spectral: &SpectralData, integrator: &Integrator, dt_quad: f64) -> Result<ScatteringSummary> {
    let ym = spectral.range_basis(-1.0);
    let yp = spectral.range_basis(1.0);
    let ty = scattering_block(ym.clone(), profile, spectral, integrator, DEFAULT_MARGIN, DEFAULT_MARGIN)?;
    let hs_pm = hs_plus_rows(&ty, &yp);
    let gram = linalg::mul(ty.as_ref().adjoint(), ty.as_ref());
    let defect = linalg::max_abs_diff(gram.as_ref(), linalg::identity(gram.nrows()).as_ref());
    let dt = d_scattering(profile, spectral, dt_quad)?;
    Ok(ScatteringSummary {
        points_per_dim: spectral.grid.points_per_dim,
        box_length: spectral.grid.box_length,
        dt: integrator.dt,
        hs_offdiag: std::f64::consts::SQRT_2 * hs_pm,
        hs_plus_minus: hs_pm,
        hs_dt: hs_plus_minus(&dt.matrix, spectral),
        unitarity_defect: defect,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RefinementRow {
    pub points_per_dim: usize,
    pub hs_offdiag: f64,
    pub hs_dt: f64,
    pub rel_change_offdiag: Option<f64>,
    pub rel_change_dt: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ImplementabilityReport {
    pub rows: Vec<RefinementRow>,
    pub max_rel_change: f64,
    pub threshold: f64,
    pub implementable: bool,
    pub verdict: String,
}

fn rel_change(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

/// Cauchy-difference table across refinements; "implementable (numerically)" when successive values differ by < 5%.
pub fn implementability_report(results: &[ScatteringSummary]) -> Result<ImplementabilityReport> {
    if results.len() < 2 {
        return Err(Error::Argument("need at least two refinements".into()));
    }
    let threshold = 0.05;
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for (i, r) in results.iter().enumerate() {
        let (co, cd) = if i == 0 {
            (None, None)
        } else {
            let p = &results[i - 1];
            (Some(rel_change(r.hs_offdiag, p.hs_offdiag)), Some(rel_change(r.hs_dt, p.hs_dt)))
        };
        worst = worst.max(co.unwrap_or(0.0)).max(cd.unwrap_or(0.0));
        rows.push(RefinementRow { points_per_dim: r.points_per_dim, hs_offdiag: r.hs_offdiag, hs_dt: r.hs_dt, rel_change_offdiag: co, rel_change_dt: cd });
    }
    let ok = worst < threshold && results.iter().all(|r| r.hs_offdiag.is_finite() && r.hs_dt.is_finite());
    Ok(ImplementabilityReport {
        rows,
        max_rel_change: worst,
        threshold,
        implementable: ok,
        verdict: if ok { "implementable (numerically)".into() } else { "not certified".into() },
    })
}

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                let (mut q0, mut q1) = (1.0, z);
                for k in 2..=n {
                    let q2 = ((2 * k - 1) as f64 * z * q1 - (k - 1) as f64 * q0) / k as f64;
                    q0 = q1;
                    q1 = q2;
                }
                let dq = n as f64 * (z * q1 - q0) / (z * z - 1.0);
                x[i] = z;
                w[i] = 2.0 / ((1.0 - z * z) * dq * dq);
                break;
            }
        }
    }
    (x, w)
}

/// (Fã)(ω) = (2π)^{−1/2} ∫ ã(s) e^{−isω} ds by composite Gauss–Legendre.
pub fn time_fourier(profile: &PotentialProfile, omega: f64, panels: usize) -> c64 {
    let (lo, hi) = profile.support();
    let (x, w) = gauss_legendre(12);
    let h = (hi - lo) / panels as f64;
    let mut s = ZERO;
    for p in 0..panels {
        let a = lo + p as f64 * h;
        for (xi, wi) in x.iter().zip(&w) {
            let t = a + 0.5 * h * (xi + 1.0);
            s += linalg::cis(-t * omega) * (profile.a_tilde(t) * wi * 0.5 * h);
        }
    }
    s / (2.0 * PI).sqrt()
}

/// HS norm of p₊dT p₋ from the kernel −√(2π)(Fã)(|Ĥ(k)|+|Ĥ(u)|)·p̂₊(k)𝗏̂(k,u)p̂₋(u).
pub fn kernel_formula_hs(profile: &PotentialProfile, spectral: &SpectralData) -> f64 {
    let n = spectral.n_spin();
    let modes = spectral.grid.modes();
    let v = &profile.v.matrix;
    let mut total = 0.0;
    for k in 0..modes {
        for u in 0..modes {
            let ft = time_fourier(profile, spectral.energy(k) + spectral.energy(u), 64) * (2.0 * PI).sqrt();
            let mut block = 0.0;
            for xp in spectral.plus_vectors(k) {
                for xm in spectral.minus_vectors(u) {
                    let mut z = ZERO;
                    for a in 0..n {
                        for b in 0..n {
                            z += xp[a].conj() * v[(k * n + a, u * n + b)] * xm[b];
                        }
                    }
                    block += z.norm_sqr();
                }
            }
            total += block * ft.norm_sqr();
        }
    }
    total.sqrt()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LmEntry {
    pub points_per_dim: usize,
    pub n: usize,
    pub nu: usize,
    pub operator_norm: f64,
    pub hs_norm: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LmReport {
    pub entries: Vec<LmEntry>,
    pub kernel_residual: f64,
    pub alpha: Vec<f64>,
    pub beta: f64,
    pub bound_holds: bool,
    /// For each n, the smallest ν whose HS norm changes by < 5% over the last refinement.
    pub stable_nu: Vec<Option<usize>>,
    pub all_finite: bool,
}

/// Iterated commutators δ^n_{|H₀|}(L_b) and weighted HS norms over a sequence of refinements.
pub fn lm_condition_probe(b_profiles: &[(crate::grid::GridFunction, SpectralData)], nu_max: usize, n_max: usize) -> Result<LmReport> {
    if b_profiles.is_empty() {
        return Err(Error::Argument("need at least one grid".into()));
    }
    let mut entries = Vec::new();
    let mut kernel_residual = 0.0f64;
    let beta = 1.0;
    let mut alpha = vec![0.0f64; n_max + 1];
    let mut bound_holds = true;
    for (b, spectral) in b_profiles {
        let grid = spectral.grid;
        let lb = left_mult_operator(b, &spectral.model, &grid, &spectral.dirac)?;
        let nspin = spectral.n_spin();
        let e: Vec<f64> = (0..spectral.dim()).map(|i| spectral.energy(i / nspin)).collect();
        let mut delta = lb.matrix.clone();
        for n in 0..=n_max {
            if n > 0 {
                let prev = delta.clone();
                delta = Mat::from_fn(prev.nrows(), prev.ncols(), |i, j| prev[(i, j)] * (e[i] - e[j]));
                if n == 1 {
                    // entrywise kernel (|Ĥ(k)|−|Ĥ(u)|)·L_b(k,u)
                    let k = Mat::from_fn(prev.nrows(), prev.ncols(), |i, j| lb.matrix[(i, j)] * (spectral.energy(i / nspin) - spectral.energy(j / nspin)));
                    kernel_residual = kernel_residual.max(linalg::max_abs_diff(k.as_ref(), delta.as_ref()));
                }
            }
            let opn = linalg::operator_norm(delta.as_ref(), 300);
            for nu in 0..=nu_max {
                let hs = (0..delta.ncols())
                    .map(|j| (0..delta.nrows()).map(|i| (delta[(i, j)] * e[i].powf(-(nu as f64))).norm_sqr()).sum::<f64>())
                    .sum::<f64>()
                    .sqrt();
                entries.push(LmEntry { points_per_dim: grid.points_per_dim, n, nu, operator_norm: opn, hs_norm: hs });
            }
            // fit α with β fixed, then verify
            for k in 0..grid.modes() {
                for u in 0..grid.modes() {
                    let dk = grid.momentum_odd(k);
                    let du = grid.momentum_odd(u);
                    let q = ((dk[0] - du[0]).powi(2) + (dk[1] - du[1]).powi(2)).sqrt();
                    let lhs = (spectral.energy(k) - spectral.energy(u)).abs().powi(n as i32);
                    if q > 0.0 {
                        alpha[n] = alpha[n].max((lhs - beta).max(0.0) / q.powi(2 * n as i32));
                    } else if lhs > beta {
                        bound_holds = false;
                    }
                }
            }
        }
        for k in 0..grid.modes() {
            for u in 0..grid.modes() {
                let dk = grid.momentum_odd(k);
                let du = grid.momentum_odd(u);
                let q = ((dk[0] - du[0]).powi(2) + (dk[1] - du[1]).powi(2)).sqrt();
                for n in 0..=n_max {
                    let lhs = (spectral.energy(k) - spectral.energy(u)).abs().powi(n as i32);
                    if lhs > alpha[n] * q.powi(2 * n as i32) + beta + 1e-12 {
                        bound_holds = false;
                    }
                }
            }
        }
    }
    let all_finite = entries.iter().all(|e| e.operator_norm.is_finite() && e.hs_norm.is_finite());
    let levels: Vec<usize> = b_profiles.iter().map(|(_, s)| s.grid.points_per_dim).collect();
    let stable_nu = (0..=n_max)
        .map(|n| {
            if levels.len() < 2 {
                return None;
            }
            let (a, b) = (levels[levels.len() - 2], levels[levels.len() - 1]);
            (0..=nu_max).find(|&nu| {
                let get = |p: usize| entries.iter().find(|e| e.points_per_dim == p && e.n == n && e.nu == nu).map(|e| e.hs_norm).unwrap();
                rel_change(get(a), get(b)) < 0.05
            })
        })
        .collect();
    Ok(LmReport { entries, kernel_residual, alpha, beta, bound_holds, stable_nu, all_finite })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BogoliubovReport {
    pub lambdas: Vec<f64>,
    pub errors: Vec<f64>,
    pub rhs_norm: f64,
    pub ratio: Option<f64>,
    pub extrapolated: f64,
}

/// P₀R₀(V R₀ f) with the spacetime potential acting slice-wise on the free solution R₀f.
pub fn first_order_source(w: &[c64], profile: &PotentialProfile, spectral: &SpectralData, dt: f64) -> Result<Vec<c64>> {
    let (lo, hi) = profile.support();
    let g = SpacetimeField::from_fn(spectral.grid, spectral.n_spin(), lo, hi, dt, |t| {
        let a = profile.a_tilde(t);
        if a == 0.0 {
            return vec![ZERO; w.len()];
        }
        let mut phi = w.to_vec();
        spectral.free_in_place(t, &mut phi);
        // V = γ⁰𝗏 as the spacetime multiplication operator
        let vphi = linalg::matvec(profile.v.matrix.as_ref(), &phi);
        spectral.gamma0_apply(&vphi).into_iter().map(|z| z * a).collect()
    })?;
    cauchy_map(&g, None, spectral, &Integrator::rk4(dt))
}

pub fn bogoliubov_derivative_check(f: &SpacetimeField, profile: &PotentialProfile, spectral: &SpectralData, integrator: &Integrator, lambdas: &[f64]) -> Result<BogoliubovReport> {
    if lambdas.iter().any(|&l| l == 0.0) {
        return Err(Error::Argument("lambda = 0 is not allowed".into()));
    }
    let w = cauchy_map(f, None, spectral, integrator)?;
    let rhs = first_order_source(&w, profile, spectral, integrator.dt)?;
    let mut errors = Vec::new();
    for &l in lambdas {
        let tw = scattering_apply(&w, &profile.with_coupling(l), spectral, integrator)?;
        let diff: Vec<c64> = tw.iter().zip(&w).zip(&rhs).map(|((a, b), r)| (a - b) / l - r).collect();
        errors.push(linalg::norm(&diff) * spectral.grid.momentum_cell().sqrt());
    }
    let ratio = if lambdas.len() >= 2 && errors[0] > 0.0 {
        let imax = (0..lambdas.len()).max_by(|&a, &b| lambdas[a].abs().partial_cmp(&lambdas[b].abs()).unwrap()).unwrap();
        let imin = (0..lambdas.len()).min_by(|&a, &b| lambdas[a].abs().partial_cmp(&lambdas[b].abs()).unwrap()).unwrap();
        Some(errors[imax] / errors[imin])
    } else {
        None
    };
    let extrapolated = if lambdas.len() >= 2 {
        let (l1, l2, e1, e2) = (lambdas[0], lambdas[1], errors[0], errors[1]);
        ((l2 * e1 - l1 * e2) / (l2 - l1)).abs()
    } else {
        errors[0]
    };
    Ok(BogoliubovReport {
        lambdas: lambdas.to_vec(),
        errors,
        rhs_norm: linalg::norm(&rhs) * spectral.grid.momentum_cell().sqrt(),
        ratio,
        extrapolated,
    })
}

/// Smooth step rising from 0 (t ≤ start) to 1 (t ≥ end).
#[derive(Clone, Copy, Debug)]
pub struct SmoothStep {
    pub start: f64,
    pub end: f64,
}

impl SmoothStep {
    fn psi(x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            (-1.0 / x).exp()
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        let x = (t - self.start) / (self.end - self.start);
        let a = Self::psi(x);
        let b = Self::psi(1.0 - x);
        a / (a + b)
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let l = self.end - self.start;
        let x = (t - self.start) / l;
        if x <= 0.0 || x >= 1.0 {
            return 0.0;
        }
        let a = Self::psi(x);
        let b = Self::psi(1.0 - x);
        let da = a / (x * x);
        let db = -b / ((1.0 - x) * (1.0 - x));
        (da * (a + b) - a * (da + db)) / ((a + b) * (a + b)) / l
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainMapReport {
    pub relative_residual: f64,
    pub data_norm: f64,
}

/// Q₀∘U_V = T_sc∘Q₀: with f supported after λ₊ and φ = R_V f, the source h = iγ⁰χ'φ
/// (χ rising before λ₋) satisfies P₀R₀h = T_sc P₀R₀f.
pub fn chain_map_check(f: &SpacetimeField, step: SmoothStep, profile: &PotentialProfile, spectral: &SpectralData, integrator: &Integrator) -> Result<ChainMapReport> {
    let (lo, hi) = profile.support();
    if !(step.end < lo) || f.time(0) < hi {
        return Err(Error::Window("step must precede the potential and f must follow it".into()));
    }
    let t_last = f.time(f.len() - 1);
    let mut big = SpacetimeField::window(spectral.grid, spectral.n_spin(), step.start - f.dt, t_last, f.dt)?;
    for i in 0..f.len() {
        if let Some(j) = big.index_of(f.time(i)) {
            big.slices[j] = f.slices[i].clone();
        }
    }
    let phi = causal_propagator(&big, Some(profile), spectral, integrator)?;
    let h = phi.map_slices(|i, s| {
        let d = step.derivative(phi.time(i));
        if d == 0.0 {
            return vec![ZERO; s.len()];
        }
        spectral.gamma0_apply(s).into_iter().map(|z| I * z * d).collect()
    });
    let lhs = cauchy_map(&h, None, spectral, integrator)?;
    let w = cauchy_map(f, None, spectral, integrator)?;
    let rhs = scattering_apply(&w, profile, spectral, integrator)?;
    let n = linalg::norm(&rhs);
    Ok(ChainMapReport { relative_residual: linalg::diff_norm(&lhs, &rhs) / n, data_norm: n * spectral.grid.momentum_cell().sqrt() })
}
