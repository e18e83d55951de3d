//! Dense one-particle operators, the antilinear charge conjugation, and operator snapshots.

use crate::clifford::DiracRep;
use crate::error::{Error, Result};
use crate::grid::{GridSpinor, SpatialGrid};
use crate::linalg::{self, c64, ZERO};
use faer::Mat;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

#[derive(Clone, Debug)]
pub struct OneParticleOperator {
    pub matrix: Mat<c64>,
    pub label: String,
}

impl OneParticleOperator {
    pub fn new(matrix: Mat<c64>, label: impl Into<String>) -> Self {
        Self { matrix, label: label.into() }
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(linalg::identity(dim), "identity")
    }

    pub fn zeros(dim: usize) -> Self {
        Self::new(Mat::zeros(dim, dim), "zero")
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, v: &GridSpinor) -> Result<GridSpinor> {
        if v.coeffs.len() != self.matrix.ncols() {
            return Err(Error::Dimension { expected: self.matrix.ncols(), got: v.coeffs.len() });
        }
        Ok(GridSpinor { grid: v.grid, n_spin: v.n_spin, coeffs: linalg::matvec(self.matrix.as_ref(), &v.coeffs) })
    }

    pub fn apply_vec(&self, v: &[c64]) -> Vec<c64> {
        linalg::matvec(self.matrix.as_ref(), v)
    }

    pub fn compose(&self, other: &OneParticleOperator) -> OneParticleOperator {
        Self::new(linalg::mul(self.matrix.as_ref(), other.matrix.as_ref()), format!("{}∘{}", self.label, other.label))
    }

    pub fn adjoint(&self) -> OneParticleOperator {
        Self::new(linalg::adjoint(self.matrix.as_ref()), format!("{}†", self.label))
    }

    pub fn hs_norm(&self) -> f64 {
        linalg::frobenius(self.matrix.as_ref())
    }

    pub fn operator_norm(&self) -> f64 {
        linalg::operator_norm(self.matrix.as_ref(), 500)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        linalg::hermiticity_defect(self.matrix.as_ref())
    }

    pub fn unitarity_defect(&self) -> f64 {
        linalg::unitarity_defect(self.matrix.as_ref())
    }

    pub fn max_diff(&self, other: &OneParticleOperator) -> f64 {
        linalg::max_abs_diff(self.matrix.as_ref(), other.matrix.as_ref())
    }

    pub fn is_finite(&self) -> bool {
        (0..self.matrix.ncols()).all(|j| self.matrix.col_as_slice(j).iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }

    /// Writes `<stem>.bin` and `<stem>.json`.
    pub fn save(&self, stem: &Path, basis: &str) -> Result<()> {
        let rows = self.matrix.nrows();
        let cols = self.matrix.ncols();
        let mut buf = Vec::with_capacity(HEADER_LEN + 16 * rows * cols);
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(rows as u64).to_le_bytes());
        buf.extend_from_slice(&(cols as u64).to_le_bytes());
        buf.extend_from_slice(&DTYPE_COMPLEX128.to_le_bytes());
        buf.extend_from_slice(&LAYOUT_ROW_MAJOR.to_le_bytes());
        for i in 0..rows {
            for j in 0..cols {
                let z = self.matrix[(i, j)];
                buf.extend_from_slice(&z.re.to_le_bytes());
                buf.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        std::fs::File::create(stem.with_extension("bin"))?.write_all(&buf)?;
        let side = SnapshotSidecar {
            format: "moyal-scatter-operator".into(),
            version: FORMAT_VERSION,
            rows,
            cols,
            dtype: "complex128".into(),
            layout: "row-major".into(),
            byte_order: "little-endian".into(),
            header_bytes: HEADER_LEN,
            basis: basis.into(),
            label: self.label.clone(),
        };
        std::fs::write(stem.with_extension("json"), serde_json::to_string_pretty(&side)?)?;
        Ok(())
    }

    pub fn load(stem: &Path) -> Result<(Self, SnapshotSidecar)> {
        let side: SnapshotSidecar = serde_json::from_str(&std::fs::read_to_string(stem.with_extension("json"))?)?;
        let mut bytes = Vec::new();
        std::fs::File::open(stem.with_extension("bin"))?.read_to_end(&mut bytes)?;
        if bytes.len() < HEADER_LEN || &bytes[0..4] != MAGIC {
            return Err(Error::Snapshot("bad magic".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        if u32_at(4) != FORMAT_VERSION {
            return Err(Error::Snapshot("unsupported version".into()));
        }
        let rows = u64_at(8) as usize;
        let cols = u64_at(16) as usize;
        if u32_at(24) != DTYPE_COMPLEX128 || u32_at(28) != LAYOUT_ROW_MAJOR {
            return Err(Error::Snapshot("unsupported dtype or layout".into()));
        }
        if bytes.len() != HEADER_LEN + 16 * rows * cols {
            return Err(Error::Snapshot("payload length does not match header".into()));
        }
        if side.rows != rows || side.cols != cols {
            return Err(Error::Snapshot("sidecar dimensions disagree with header".into()));
        }
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let m = Mat::from_fn(rows, cols, |i, j| {
            let o = HEADER_LEN + 16 * (i * cols + j);
            c64::new(f64_at(o), f64_at(o + 8))
        });
        Ok((Self::new(m, side.label.clone()), side))
    }
}

const MAGIC: &[u8; 4] = b"MSOP";
const FORMAT_VERSION: u32 = 1;
const DTYPE_COMPLEX128: u32 = 1;
const LAYOUT_ROW_MAJOR: u32 = 0;
/// magic(4) version(4) rows(8) cols(8) dtype(4) layout(4)
pub const HEADER_LEN: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotSidecar {
    pub format: String,
    pub version: u32,
    pub rows: usize,
    pub cols: usize,
    pub dtype: String,
    pub layout: String,
    pub byte_order: String,
    pub header_bytes: usize,
    pub basis: String,
    pub label: String,
}

/// Charge conjugation on momentum coefficients: (Cv)^(k) = K·conj(v̂(−k)).
#[derive(Clone, Debug)]
pub struct Conjugation {
    pub k: Mat<c64>,
    pub grid: SpatialGrid,
    n_spin: usize,
}

impl Conjugation {
    pub fn new(dirac: &DiracRep, grid: SpatialGrid) -> Self {
        Self { k: dirac.conj_matrix.clone(), grid, n_spin: dirac.n_spin }
    }

    pub fn apply(&self, v: &[c64]) -> Vec<c64> {
        let n = self.n_spin;
        let mut out = vec![ZERO; v.len()];
        for mode in 0..self.grid.modes() {
            let src = self.grid.negate(mode);
            for a in 0..n {
                let mut s = ZERO;
                for b in 0..n {
                    s += self.k[(a, b)] * v[src * n + b].conj();
                }
                out[mode * n + a] = s;
            }
        }
        out
    }

    pub fn apply_spinor(&self, v: &GridSpinor) -> GridSpinor {
        GridSpinor { grid: v.grid, n_spin: v.n_spin, coeffs: self.apply(&v.coeffs) }
    }

    /// The linear matrix of C∘A∘C (C⁻¹ = C).
    pub fn sandwich(&self, a: &Mat<c64>) -> Mat<c64> {
        let n = self.n_spin;
        let dim = a.nrows();
        let kc = linalg::conj(self.k.as_ref());
        // C A C v = K̃ conj(A) conj(K̃) v with K̃ = P₋ ⊗ K
        Mat::from_fn(dim, dim, |i, j| {
            let (mi, ai) = (i / n, i % n);
            let (mj, bj) = (j / n, j % n);
            let li = self.grid.negate(mi);
            let lj = self.grid.negate(mj);
            let mut s = ZERO;
            for x in 0..n {
                for y in 0..n {
                    s += self.k[(ai, x)] * a[(li * n + x, lj * n + y)].conj() * kc[(y, bj)];
                }
            }
            s
        })
    }
}
