//! Model parameters, gamma matrices and charge conjugation.

use crate::error::{Error, Result};
use crate::linalg::{c64, conj, identity, max_abs_diff, mul, ONE, ZERO, I};
use faer::Mat;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub q: usize,
    pub p: usize,
    pub theta: f64,
    pub mass: f64,
}

impl ModelParams {
    pub fn new(q: usize, p: usize, theta: f64, mass: f64) -> Result<Self> {
        if p % 2 != 0 {
            return Err(Error::Model("p must be even".into()));
        }
        if q < 1 {
            return Err(Error::Model("q must be at least 1 (time is commutative)".into()));
        }
        let n = q + p;
        if !(n == 2 || n == 3) {
            return Err(Error::Model(format!("unsupported spacetime dimension n = {n}")));
        }
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::Model("mass must be positive".into()));
        }
        if !theta.is_finite() || theta < 0.0 {
            return Err(Error::Model("theta must be finite and non-negative".into()));
        }
        if p > 0 && theta <= 0.0 {
            return Err(Error::Model("theta must be positive when p > 0".into()));
        }
        Ok(Self { q, p, theta, mass })
    }

    pub fn n(&self) -> usize {
        self.q + self.p
    }

    pub fn s(&self) -> usize {
        self.n() - 1
    }

    /// Full n×n Moyal matrix; the θ/2 symplectic block sits on the last p coordinates.
    pub fn moyal_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut m = vec![vec![0.0; n]; n];
        let l = self.p / 2;
        for i in 0..l {
            let a = self.q + i;
            let b = self.q + l + i;
            m[a][b] = self.theta / 2.0;
            m[b][a] = -self.theta / 2.0;
        }
        m
    }

    /// Spatial block M̲ (rows/cols 1..n).
    pub fn spatial_moyal(&self) -> Vec<Vec<f64>> {
        let m = self.moyal_matrix();
        m[1..].iter().map(|row| row[1..].to_vec()).collect()
    }

    pub fn is_commutative(&self) -> bool {
        self.p == 0
    }
}

fn pauli(k: usize) -> Mat<c64> {
    let e = |a: c64, b: c64, c: c64, d: c64| {
        let mut m = Mat::zeros(2, 2);
        m[(0, 0)] = a;
        m[(0, 1)] = b;
        m[(1, 0)] = c;
        m[(1, 1)] = d;
        m
    };
    match k {
        0 => e(ONE, ZERO, ZERO, ONE),
        1 => e(ZERO, ONE, ONE, ZERO),
        2 => e(ZERO, -I, I, ZERO),
        _ => e(ONE, ZERO, ZERO, -ONE),
    }
}

#[derive(Clone, Debug)]
pub struct DiracRep {
    pub n_spin: usize,
    pub gammas: Vec<Mat<c64>>,
    pub conj_matrix: Mat<c64>,
    pub metric: Vec<f64>,
}

impl DiracRep {
    pub fn build(model: &ModelParams) -> Result<Self> {
        let n = model.n();
        let scale = |m: Mat<c64>, s: c64| Mat::from_fn(2, 2, |i, j| m[(i, j)] * s);
        let mut gammas = vec![pauli(3), scale(pauli(1), I)];
        if n == 3 {
            gammas.push(scale(pauli(2), I));
        }
        let metric: Vec<f64> = (0..n).map(|mu| if mu == 0 { 1.0 } else { -1.0 }).collect();
        let conj_matrix = find_conjugation(&gammas)
            .ok_or_else(|| Error::Model("no charge conjugation among Pauli candidates".into()))?;
        Ok(Self { n_spin: 2, gammas, conj_matrix, metric })
    }

    pub fn gamma0(&self) -> &Mat<c64> {
        &self.gammas[0]
    }

    /// max |γ_μγ_ν + γ_νγ_μ − 2η_{μν}|.
    pub fn clifford_residual(&self) -> f64 {
        let id = identity(self.n_spin);
        let mut r = 0.0f64;
        for (mu, gm) in self.gammas.iter().enumerate() {
            for (nu, gn) in self.gammas.iter().enumerate() {
                let ac = &mul(gm.as_ref(), gn.as_ref()) + &mul(gn.as_ref(), gm.as_ref());
                let eta = if mu == nu { self.metric[mu] } else { 0.0 };
                let target = Mat::from_fn(self.n_spin, self.n_spin, |i, j| id[(i, j)] * (2.0 * eta));
                r = r.max(max_abs_diff(ac.as_ref(), target.as_ref()));
            }
        }
        r
    }

    /// γ₀ hermitian, γ_k antihermitian.
    pub fn hermiticity_residual(&self) -> f64 {
        self.gammas
            .iter()
            .enumerate()
            .map(|(mu, g)| {
                let adj = g.adjoint().to_owned();
                let sign = if mu == 0 { ONE } else { -ONE };
                let t = Mat::from_fn(self.n_spin, self.n_spin, |i, j| g[(i, j)] * sign);
                max_abs_diff(adj.as_ref(), t.as_ref())
            })
            .fold(0.0, f64::max)
    }

    /// C² − 1 residual: K·conj(K) − 1.
    pub fn involution_residual(&self) -> f64 {
        let kk = mul(self.conj_matrix.as_ref(), conj(self.conj_matrix.as_ref()).as_ref());
        max_abs_diff(kk.as_ref(), identity(self.n_spin).as_ref())
    }

    /// max over μ of |K·conj(γ_μ) + γ_μ·K|.
    pub fn conjugation_residual(&self) -> f64 {
        anticommutation_residual(&self.conj_matrix, &self.gammas)
    }

    /// ‖𝛄𝛄† − 1‖ for 𝛄 = γ₀γ₁…γ_s.
    pub fn orientation_unitarity_residual(&self) -> f64 {
        let mut o = identity(self.n_spin);
        for g in &self.gammas {
            o = mul(o.as_ref(), g.as_ref());
        }
        let oo = mul(o.as_ref(), o.adjoint());
        max_abs_diff(oo.as_ref(), identity(self.n_spin).as_ref())
    }
}

fn anticommutation_residual(k: &Mat<c64>, gammas: &[Mat<c64>]) -> f64 {
    gammas
        .iter()
        .map(|g| {
            let a = mul(k.as_ref(), conj(g.as_ref()).as_ref());
            let b = mul(g.as_ref(), k.as_ref());
            let s = &a + &b;
            crate::linalg::max_abs(s.as_ref())
        })
        .fold(0.0, f64::max)
}

/// Search phases × Pauli matrices for K with K·conj(K) = 1 and K·conj(γ_μ) = −γ_μ·K.
fn find_conjugation(gammas: &[Mat<c64>]) -> Option<Mat<c64>> {
    let phases = [ONE, I, -ONE, -I];
    for k in 0..4 {
        for &ph in &phases {
            let cand = Mat::from_fn(2, 2, |i, j| pauli(k)[(i, j)] * ph);
            let kk = mul(cand.as_ref(), conj(cand.as_ref()).as_ref());
            if max_abs_diff(kk.as_ref(), identity(2).as_ref()) < 1e-14
                && anticommutation_residual(&cand, gammas) < 1e-14
            {
                return Some(cand);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_models() {
        assert!(matches!(ModelParams::new(1, 1, 0.5, 1.0), Err(Error::Model(m)) if m.contains("p must be even")));
        assert!(ModelParams::new(2, 2, 0.5, 1.0).is_err());
        assert!(ModelParams::new(2, 0, 0.0, 0.0).is_err());
        assert!(ModelParams::new(1, 2, 0.0, 1.0).is_err());
    }

    #[test]
    fn moyal_block() {
        let m = ModelParams::new(1, 2, 0.5, 1.0).unwrap();
        assert_eq!(m.n(), 3);
        assert_eq!(m.s(), 2);
        assert_eq!(m.spatial_moyal(), vec![vec![0.0, 0.25], vec![-0.25, 0.0]]);
        let full = m.moyal_matrix();
        assert!(full[0].iter().all(|&x| x == 0.0));
        assert!(full.iter().all(|r| r[0] == 0.0));
        let c = ModelParams::new(2, 0, 0.0, 1.0).unwrap();
        assert!(c.moyal_matrix().iter().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn representations_satisfy_relations() {
        for (q, p) in [(2, 0), (3, 0), (1, 2)] {
            let m = ModelParams::new(q, p, 0.5, 1.0).unwrap();
            let d = DiracRep::build(&m).unwrap();
            assert_eq!(d.n_spin, 2);
            assert_eq!(d.gammas.len(), m.n());
            assert!(d.clifford_residual() < 1e-12);
            assert!(d.hermiticity_residual() < 1e-12);
            assert!(d.involution_residual() < 1e-14);
            assert!(d.conjugation_residual() < 1e-12);
            assert!(d.orientation_unitarity_residual() < 1e-12);
        }
    }
}
