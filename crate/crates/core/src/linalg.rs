//! Small dense helpers on top of faer.

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatRef, Par, Side};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use faer::c64;

pub const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub const ONE: c64 = c64 { re: 1.0, im: 0.0 };
pub const I: c64 = c64 { re: 0.0, im: 1.0 };

pub fn cis(phase: f64) -> c64 {
    c64::new(phase.cos(), phase.sin())
}

static THREADS: std::sync::OnceLock<usize> = std::sync::OnceLock::new();

/// Parallelism for dense kernels, capped by `MOYAL_SCATTER_THREADS`.
pub fn par() -> Par {
    let n = *THREADS.get_or_init(|| {
        std::env::var("MOYAL_SCATTER_THREADS")
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .filter(|&n| n > 0)
            .unwrap_or(1)
    });
    if n <= 1 {
        Par::Seq
    } else {
        Par::rayon(n)
    }
}

pub fn mul<L, R>(a: MatRef<'_, L>, b: MatRef<'_, R>) -> Mat<c64>
where
    L: faer::traits::Conjugate<Canonical = c64>,
    R: faer::traits::Conjugate<Canonical = c64>,
{
    let mut out = Mat::zeros(a.nrows(), b.ncols());
    matmul(out.as_mut(), Accum::Replace, a, b, ONE, par());
    out
}

pub fn identity(n: usize) -> Mat<c64> {
    Mat::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
}

pub fn frobenius(a: MatRef<'_, c64>) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

pub fn max_abs(a: MatRef<'_, c64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

pub fn max_abs_diff(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    m
}

pub fn sub(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Mat<c64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] - b[(i, j)])
}

pub fn add(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Mat<c64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] + b[(i, j)])
}

pub fn scale(a: MatRef<'_, c64>, s: c64) -> Mat<c64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

pub fn adjoint(a: MatRef<'_, c64>) -> Mat<c64> {
    Mat::from_fn(a.ncols(), a.nrows(), |i, j| a[(j, i)].conj())
}

pub fn conj(a: MatRef<'_, c64>) -> Mat<c64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)].conj())
}

/// Largest deviation from hermiticity.
pub fn hermiticity_defect(a: MatRef<'_, c64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..=j.min(a.nrows() - 1) {
            m = m.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    m
}

/// Operator norm ‖A†A − 1‖ measured as max entry; cheap unitarity test.
pub fn unitarity_defect(a: MatRef<'_, c64>) -> f64 {
    let g = mul(a.adjoint(), a);
    max_abs_diff(g.as_ref(), identity(a.ncols()).as_ref())
}

pub fn matvec<L: faer::traits::Conjugate<Canonical = c64>>(a: MatRef<'_, L>, v: &[c64]) -> Vec<c64> {
    let x = MatRef::from_column_major_slice(v, v.len(), 1);
    let y = mul(a, x);
    y.col_as_slice(0).to_vec()
}

pub fn dot(u: &[c64], v: &[c64]) -> c64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm(v: &[c64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn axpy(y: &mut [c64], a: c64, x: &[c64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn diff_norm(u: &[c64], v: &[c64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
}

/// Operator 2-norm by power iteration on A†A with a deterministic start.
pub fn operator_norm(a: MatRef<'_, c64>, iterations: usize) -> f64 {
    let n = a.ncols();
    if n == 0 {
        return 0.0;
    }
    let mut v: Vec<c64> = (0..n)
        .map(|i| c64::new(1.0 + 0.37 * (i as f64).sin(), 0.21 * (1.3 * i as f64).cos()))
        .collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|z| *z /= nv);
    let mut sigma = 0.0;
    for _ in 0..iterations {
        let w = matvec(a, &v);
        let mut z = matvec(a.adjoint(), &w);
        let nz = norm(&z);
        if nz == 0.0 {
            return 0.0;
        }
        let next = nz.sqrt();
        z.iter_mut().for_each(|x| *x /= nz);
        v = z;
        if (next - sigma).abs() <= 1e-13 * next {
            sigma = next;
            break;
        }
        sigma = next;
    }
    sigma
}

/// Eigen-decomposition of a hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(a: MatRef<'_, c64>) -> (Vec<f64>, Mat<c64>) {
    let h = Mat::from_fn(a.nrows(), a.ncols(), |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5);
    let e = h
        .self_adjoint_eigen(Side::Lower)
        .expect("hermitian eigensolver failed");
    let s = e.S().column_vector();
    let vals = (0..s.nrows()).map(|i| s[i].re).collect();
    (vals, e.U().to_owned())
}

/// e^{iH} for hermitian H.
pub fn exp_i_hermitian(h: MatRef<'_, c64>) -> Mat<c64> {
    let (vals, u) = hermitian_eigen(h);
    let mut ud = u.clone();
    for (j, &l) in vals.iter().enumerate() {
        let p = cis(l);
        for i in 0..ud.nrows() {
            ud[(i, j)] *= p;
        }
    }
    mul(ud.as_ref(), u.as_ref().adjoint())
}

pub fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> Mat<c64> {
    let h = random_hermitian(n, rng);
    exp_i_hermitian(h.as_ref())
}

pub fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> Mat<c64> {
    let a = Mat::from_fn(n, n, |_, _| {
        c64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    Mat::from_fn(n, n, |i, j| a[(i, j)] + a[(j, i)].conj())
}

/// Kronecker product with the scalar factor on the outer index: (k·N+a, u·N+b) ↦ s[k,u]·g[a,b].
pub fn kron_outer(s: MatRef<'_, c64>, g: MatRef<'_, c64>) -> Mat<c64> {
    let n = g.nrows();
    Mat::from_fn(s.nrows() * n, s.ncols() * n, |i, j| {
        s[(i / n, j / n)] * g[(i % n, j % n)]
    })
}
