//! Moyal star product as a twisted convolution, and the left/right Moyal multiplication operators.

use crate::clifford::{DiracRep, ModelParams};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, SpatialGrid};
use crate::linalg::{self, c64, cis, ZERO};
use crate::operator::OneParticleOperator;
use faer::Mat;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PotentialKind {
    V0,
    Vi,
    Vii,
}

impl std::str::FromStr for PotentialKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "V0" => Ok(Self::V0),
            "Vi" => Ok(Self::Vi),
            "Vii" => Ok(Self::Vii),
            other => Err(Error::Argument(format!("unknown potential kind `{other}`"))),
        }
    }
}

/// u·M̲k with odd-symbol momenta.
pub fn twist(model: &ModelParams, grid: &SpatialGrid, u: usize, k: usize) -> f64 {
    if model.p == 0 {
        return 0.0;
    }
    let m = model.spatial_moyal();
    let uu = grid.momentum_odd(u);
    let kk = grid.momentum_odd(k);
    let mut s = 0.0;
    for i in 0..grid.dimension {
        for j in 0..grid.dimension {
            s += uu[i] * m[i][j] * kk[j];
        }
    }
    s
}

/// e^{i·sign·u·M̲k} from per-axis tables: the phase is bilinear, so it factorizes over (i, j) pairs.
struct Twister {
    tables: Vec<(usize, usize, Vec<c64>)>,
    idx: Vec<[usize; 2]>,
    n1: usize,
}

impl Twister {
    fn new(model: &ModelParams, grid: &SpatialGrid, sign: f64) -> Self {
        let n1 = grid.points_per_dim;
        let idx: Vec<[usize; 2]> = (0..grid.modes()).map(|i| grid.unflatten(i)).collect();
        let mut tables = Vec::new();
        if model.p > 0 {
            let m = model.spatial_moyal();
            // 1D odd momenta along each axis
            let axis_mom = |axis: usize, a: usize| {
                let mut e = [0usize; 2];
                e[axis] = a;
                grid.momentum_odd(grid.flatten(e))[axis]
            };
            for i in 0..grid.dimension {
                for j in 0..grid.dimension {
                    if m[i][j] == 0.0 {
                        continue;
                    }
                    let t = (0..n1 * n1).map(|ab| cis(sign * axis_mom(i, ab / n1) * m[i][j] * axis_mom(j, ab % n1))).collect();
                    tables.push((i, j, t));
                }
            }
        }
        Self { tables, idx, n1 }
    }

    fn cis(&self, u: usize, k: usize) -> c64 {
        let (uu, kk) = (self.idx[u], self.idx[k]);
        let mut z = c64::new(1.0, 0.0);
        for (i, j, t) in &self.tables {
            z *= t[uu[*i] * self.n1 + kk[*j]];
        }
        z
    }
}

fn check_model_grid(model: &ModelParams, grid: &SpatialGrid) -> Result<()> {
    if model.s() != grid.dimension {
        return Err(Error::GridMismatch(format!(
            "model has s = {} but grid dimension is {}",
            model.s(),
            grid.dimension
        )));
    }
    Ok(())
}

/// Scalar kernel (2π)^{−s/2} f̂(k−u) e^{±iu·M̲k} Δk^s on modes × modes.
pub fn twisted_kernel(fhat: &[c64], model: &ModelParams, grid: &SpatialGrid, sign: f64) -> Mat<c64> {
    let pref = (2.0 * PI).powf(-(grid.dimension as f64) / 2.0) * grid.momentum_cell();
    let n = grid.modes();
    let tw = Twister::new(model, grid, sign);
    Mat::from_fn(n, n, |k, u| fhat[grid.difference(k, u)] * tw.cis(u, k) * pref)
}

pub fn star_product(f: &GridFunction, g: &GridFunction, model: &ModelParams, grid: &SpatialGrid) -> Result<GridFunction> {
    f.same_grid(g)?;
    if &f.grid != grid {
        return Err(Error::GridMismatch("inputs not sampled on the given grid".into()));
    }
    check_model_grid(model, grid)?;
    f.check_finite()?;
    g.check_finite()?;
    let fh = f.momentum();
    let gh = g.momentum();
    let pref = (2.0 * PI).powf(-(grid.dimension as f64) / 2.0) * grid.momentum_cell();
    let n = grid.modes();
    let tw = Twister::new(model, grid, 1.0);
    let out: Vec<c64> = (0..n)
        .map(|k| {
            let mut s = ZERO;
            for u in 0..n {
                s += fh[grid.difference(k, u)] * tw.cis(u, k) * gh[u];
            }
            s * pref
        })
        .collect();
    Ok(GridFunction::from_momentum(*grid, &out))
}

/// (f⋆g)(x) = (2π)^{−2} ∬ f(x−Mu) g(x+v) e^{−iu·v} d²u d²v, evaluated after u ↦ M⁻¹u as
/// (πθ)^{−2} ∬ f(x−u) g(x+v) e^{iu·M⁻¹v}: M is antisymmetric, so (M⁻¹u)·v = −u·M⁻¹v.
/// Trapezoid rule on [−R, R]^4 with `n` nodes per axis, s = 2. The phase splits over (u₁,v₂) and (u₂,v₁),
/// so the sum is reordered to O(n³). In the commutative case this is f(x)g(x).
pub fn quadrature_star(f: impl Fn([f64; 2]) -> c64, g: impl Fn([f64; 2]) -> c64, x: [f64; 2], model: &ModelParams, half_range: f64, n: usize) -> Result<c64> {
    if model.p == 0 {
        return Ok(f(x) * g(x));
    }
    if model.s() != 2 || n < 2 {
        return Err(Error::Argument("quadrature oracle needs s = 2 and at least two nodes".into()));
    }
    let m = model.spatial_moyal();
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    // M⁻¹ of an antisymmetric 2×2 block is off-diagonal
    let inv01 = -m[0][1] / det;
    let inv10 = -m[1][0] / det;
    let h = 2.0 * half_range / (n - 1) as f64;
    let t: Vec<f64> = (0..n).map(|i| -half_range + i as f64 * h).collect();
    let w: Vec<f64> = (0..n).map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h }).collect();
    let fu = Mat::from_fn(n, n, |a, b| f([x[0] - t[a], x[1] - t[b]]) * (w[a] * w[b]));
    let gv = Mat::from_fn(n, n, |a, b| g([x[0] + t[a], x[1] + t[b]]) * (w[a] * w[b]));
    // e^{i(inv01·u₁v₂ + inv10·u₂v₁)}
    let e01 = Mat::from_fn(n, n, |a, b| cis(inv01 * t[a] * t[b]));
    let e10 = Mat::from_fn(n, n, |a, b| cis(inv10 * t[a] * t[b]));
    // h1[v₁, u₁] = Σ_{v₂} g(v₁,v₂) e01[u₁,v₂]
    let h1 = linalg::mul(gv.as_ref(), e01.as_ref().transpose());
    // s[u₂, u₁] = Σ_{v₁} e10[u₂,v₁] h1[v₁,u₁]
    let s2 = linalg::mul(e10.as_ref(), h1.as_ref());
    let mut total = ZERO;
    for a in 0..n {
        for b in 0..n {
            total += fu[(a, b)] * s2[(b, a)];
        }
    }
    Ok(total / (PI * model.theta).powi(2))
}

/// Upper bound for ‖L_b‖: (2πθ)^{−p/2}‖b‖_{L²} when p > 0, sup|b| in the commutative case.
pub fn left_mult_bound(b: &GridFunction, model: &ModelParams) -> f64 {
    if model.p == 0 {
        return b.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    }
    (2.0 * PI * model.theta).powf(-(model.p as f64) / 2.0) * b.l2_norm()
}

fn spin_identity(dirac: &DiracRep) -> Mat<c64> {
    linalg::identity(dirac.n_spin)
}

pub fn left_mult_scalar(b: &GridFunction, model: &ModelParams, grid: &SpatialGrid) -> Result<Mat<c64>> {
    check_model_grid(model, grid)?;
    if &b.grid != grid {
        return Err(Error::GridMismatch("potential profile grid".into()));
    }
    Ok(twisted_kernel(&b.momentum(), model, grid, 1.0))
}

pub fn right_mult_scalar(b: &GridFunction, model: &ModelParams, grid: &SpatialGrid) -> Result<Mat<c64>> {
    check_model_grid(model, grid)?;
    if &b.grid != grid {
        return Err(Error::GridMismatch("potential profile grid".into()));
    }
    Ok(twisted_kernel(&b.momentum(), model, grid, -1.0))
}

/// Pointwise multiplication kernel (no twist).
pub fn multiplication_scalar(b: &GridFunction, grid: &SpatialGrid) -> Result<Mat<c64>> {
    if &b.grid != grid {
        return Err(Error::GridMismatch("potential profile grid".into()));
    }
    let flat = ModelParams { q: grid.dimension + 1, p: 0, theta: 0.0, mass: 1.0 };
    Ok(twisted_kernel(&b.momentum(), &flat, grid, 1.0))
}

pub fn left_mult_operator(b: &GridFunction, model: &ModelParams, grid: &SpatialGrid, dirac: &DiracRep) -> Result<OneParticleOperator> {
    let s = left_mult_scalar(b, model, grid)?;
    Ok(OneParticleOperator::new(linalg::kron_outer(s.as_ref(), spin_identity(dirac).as_ref()), "L_b"))
}

pub fn right_mult_operator(b: &GridFunction, model: &ModelParams, grid: &SpatialGrid, dirac: &DiracRep) -> Result<OneParticleOperator> {
    let s = right_mult_scalar(b, model, grid)?;
    Ok(OneParticleOperator::new(linalg::kron_outer(s.as_ref(), spin_identity(dirac).as_ref()), "R_b"))
}

/// Scalar part of the spatial potential (before the γ⁰ factor).
pub fn potential_scalar(kind: PotentialKind, b: &GridFunction, model: &ModelParams, grid: &SpatialGrid) -> Result<Mat<c64>> {
    check_model_grid(model, grid)?;
    Ok(match kind {
        PotentialKind::V0 => multiplication_scalar(b, grid)?,
        PotentialKind::Vi => {
            let l = left_mult_scalar(b, model, grid)?;
            let r = right_mult_scalar(b, model, grid)?;
            linalg::add(l.as_ref(), r.as_ref())
        }
        PotentialKind::Vii => {
            let l = left_mult_scalar(b, model, grid)?;
            let r = right_mult_scalar(b, model, grid)?;
            // L and R commute only up to wrap-around on the periodic grid
            let lr = linalg::mul(l.as_ref(), r.as_ref());
            let rl = linalg::mul(r.as_ref(), l.as_ref());
            linalg::scale(linalg::add(lr.as_ref(), rl.as_ref()).as_ref(), c64::new(0.5, 0.0))
        }
    })
}

/// 𝗏 = γ⁰ ⊗ (scalar potential).
pub fn potential_operator(kind: PotentialKind, b: &GridFunction, model: &ModelParams, grid: &SpatialGrid, dirac: &DiracRep) -> Result<OneParticleOperator> {
    let s = potential_scalar(kind, b, model, grid)?;
    let label = match kind {
        PotentialKind::V0 => "v0",
        PotentialKind::Vi => "v_i",
        PotentialKind::Vii => "v_ii",
    };
    Ok(OneParticleOperator::new(linalg::kron_outer(s.as_ref(), dirac.gamma0().as_ref()), label))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moyal_setup() -> (ModelParams, SpatialGrid) {
        (ModelParams::new(1, 2, 0.5, 1.0).unwrap(), SpatialGrid::new(12.0, 16, 2).unwrap())
    }

    #[test]
    fn commutative_star_is_pointwise() {
        let model = ModelParams::new(3, 0, 0.0, 1.0).unwrap();
        let grid = SpatialGrid::new(12.0, 16, 2).unwrap();
        let f = GridFunction::gaussian(grid, 1.2, 1.0, [0.5, -0.3]);
        let g = GridFunction::from_fn(grid, |x| c64::new((-(x[0] * x[0] + x[1] * x[1]) / 3.0).exp(), 0.2 * x[0] * (-(x[0] * x[0])).exp()));
        let h = star_product(&f, &g, &model, &grid).unwrap();
        assert!(h.sup_distance(&f.pointwise(&g)) < 1e-12);
    }

    #[test]
    fn left_and_right_agree_when_commutative() {
        let model = ModelParams::new(2, 0, 0.0, 1.0).unwrap();
        let grid = SpatialGrid::new(10.0, 16, 1).unwrap();
        let dirac = DiracRep::build(&model).unwrap();
        let b = GridFunction::gaussian(grid, 1.0, 0.7, [0.0, 0.0]);
        let l = left_mult_operator(&b, &model, &grid, &dirac).unwrap();
        let r = right_mult_operator(&b, &model, &grid, &dirac).unwrap();
        assert_eq!(l.max_diff(&r), 0.0);
        let vi = potential_operator(PotentialKind::Vi, &b, &model, &grid, &dirac).unwrap();
        let v0 = potential_operator(PotentialKind::V0, &b, &model, &grid, &dirac).unwrap();
        let two_v0 = linalg::scale(v0.matrix.as_ref(), c64::new(2.0, 0.0));
        assert!(linalg::max_abs_diff(vi.matrix.as_ref(), two_v0.as_ref()) < 1e-14);
    }

    #[test]
    fn zero_profile_gives_zero_operator() {
        let (model, grid) = moyal_setup();
        let dirac = DiracRep::build(&model).unwrap();
        let l = left_mult_operator(&GridFunction::zeros(grid), &model, &grid, &dirac).unwrap();
        assert_eq!(l.hs_norm(), 0.0);
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let (model, grid) = moyal_setup();
        let other = SpatialGrid::new(12.0, 8, 2).unwrap();
        let f = GridFunction::gaussian(grid, 1.0, 1.0, [0.0, 0.0]);
        let g = GridFunction::gaussian(other, 1.0, 1.0, [0.0, 0.0]);
        assert!(matches!(star_product(&f, &g, &model, &grid), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn potential_kind_parse() {
        assert_eq!("Vii".parse::<PotentialKind>().unwrap(), PotentialKind::Vii);
        assert!("V3".parse::<PotentialKind>().is_err());
    }
}
