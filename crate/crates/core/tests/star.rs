use moyal_scatter::clifford::ModelParams;
use moyal_scatter::grid::{GridFunction, SpatialGrid};
use moyal_scatter::linalg::{self, c64};
use moyal_scatter::moyal::{left_mult_bound, left_mult_scalar, quadrature_star, star_product};
use proptest::prelude::*;
use std::f64::consts::PI;

fn plane(theta: f64) -> ModelParams {
    ModelParams::new(1, 2, theta, 1.0).unwrap()
}

fn gauss(c: [f64; 2], w: f64) -> impl Fn([f64; 2]) -> c64 {
    move |x| c64::new((-((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)) / (2.0 * w * w)).exp(), 0.0)
}

fn mixed(grid: SpatialGrid, w: f64, c: [f64; 2], d: [f64; 2]) -> GridFunction {
    let a = GridFunction::gaussian(grid, w, 1.0, c);
    let b = GridFunction::gaussian(grid, w, 0.5, d);
    GridFunction { grid, values: a.values.iter().zip(&b.values).map(|(x, y)| x + linalg::I * y).collect() }
}

// e^{-a|x|²} ⋆ e^{-b|x|²} = (1 + abθ²)^{-1} exp(-(a+b)|x|²/(1 + abθ²))
fn centered_closed_form(a: f64, b: f64, theta: f64, x: [f64; 2]) -> f64 {
    let d = 1.0 + a * b * theta * theta;
    (-(a + b) * (x[0] * x[0] + x[1] * x[1]) / d).exp() / d
}

/// Naive O(n⁴) trapezoid of the same integral, to pin the reordered sum.
fn naive_quadrature(f: impl Fn([f64; 2]) -> c64, g: impl Fn([f64; 2]) -> c64, x: [f64; 2], theta: f64, r: f64, n: usize) -> c64 {
    let h = 2.0 * r / (n - 1) as f64;
    let t: Vec<f64> = (0..n).map(|i| -r + i as f64 * h).collect();
    let w: Vec<f64> = (0..n).map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h }).collect();
    // M⁻¹ = (2/θ)[[0,-1],[1,0]], phase e^{+iu·M⁻¹v}
    let k = 2.0 / theta;
    let mut s = c64::new(0.0, 0.0);
    for a in 0..n {
        for b in 0..n {
            let fu = f([x[0] - t[a], x[1] - t[b]]) * (w[a] * w[b]);
            for c in 0..n {
                for d in 0..n {
                    let ph = k * (-t[a] * t[d] + t[b] * t[c]);
                    s += fu * g([x[0] + t[c], x[1] + t[d]]) * linalg::cis(ph) * (w[c] * w[d]);
                }
            }
        }
    }
    s / (PI * theta).powi(2)
}

#[test]
fn reordered_quadrature_matches_naive_sum() {
    let m = plane(0.5);
    let (f, g) = (gauss([0.3, 0.0], 1.0), gauss([0.0, -0.4], 1.0));
    let x = [0.2, 0.1];
    let fast = quadrature_star(&f, &g, x, &m, 5.0, 31).unwrap();
    let slow = naive_quadrature(&f, &g, x, 0.5, 5.0, 31);
    assert!((fast - slow).norm() < 1e-12 * slow.norm(), "{fast} vs {slow}");
}

#[test]
fn quadrature_matches_closed_form() {
    let m = plane(0.5);
    for x in [[0.0, 0.0], [0.7, -0.4], [1.5, 1.0]] {
        let q = quadrature_star(gauss([0.0; 2], 1.0), gauss([0.0; 2], 1.0), x, &m, 9.0, 241).unwrap();
        let exact = centered_closed_form(0.5, 0.5, 0.5, x);
        assert!((q.re - exact).abs() < 1e-10 * exact.max(1e-3) && q.im.abs() < 1e-12, "{x:?}: {q} vs {exact}");
    }
}

#[test]
fn grid_product_matches_closed_form() {
    let m = plane(0.5);
    let grid = SpatialGrid::new(12.0, 32, 2).unwrap();
    let f = GridFunction::from_fn(grid, gauss([0.0; 2], 1.0));
    let p = star_product(&f, &f, &m, &grid).unwrap();
    for i in 0..grid.modes() {
        let x = grid.position(i);
        let exact = centered_closed_form(0.5, 0.5, 0.5, x);
        assert!((p.values[i] - exact).norm() < 1e-8, "{x:?}");
    }
}

#[test]
fn coordinates_commute_to_i_theta() {
    // x₁⋆g − g⋆x₁ = iθ∂₂g, so [x₁, x₂]⋆ = iθ
    let theta = 0.5;
    let m = plane(theta);
    let grid = SpatialGrid::new(16.0, 64, 2).unwrap();
    let g = mixed(grid, 1.0, [0.3, -0.2], [-0.4, 0.1]);
    let xg = g.times_coordinate(0);
    // x₁(f⋆g) identities avoid the non-periodic x₁ itself
    let lhs = {
        let a = star_product(&g, &xg, &m, &grid).unwrap();
        let b = star_product(&g, &g, &m, &grid).unwrap().times_coordinate(0);
        GridFunction { grid, values: b.values.iter().zip(&a.values).map(|(p, q)| p - q).collect() }
    };
    let rhs = star_product(&g.derivative(1), &g, &m, &grid).unwrap();
    let want: Vec<c64> = rhs.values.iter().map(|z| z * c64::new(0.0, theta / 2.0)).collect();
    let err = lhs.values.iter().zip(&want).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(err < 1e-9, "{err}");
}

#[test]
fn offset_pair_grid_vs_quadrature() {
    let m = plane(0.5);
    let grid = SpatialGrid::new(12.0, 32, 2).unwrap();
    let (cf, cg) = ([0.5, 0.0], [0.0, -0.5]);
    let p = star_product(&GridFunction::from_fn(grid, gauss(cf, 1.0)), &GridFunction::from_fn(grid, gauss(cg, 1.0)), &m, &grid).unwrap();
    let idx = grid.flatten([12, 18]);
    let q = quadrature_star(gauss(cf, 1.0), gauss(cg, 1.0), grid.position(idx), &m, 9.0, 241).unwrap();
    assert!(q.im.abs() > 1e-3, "pair must probe the phase sign");
    assert!((p.values[idx] - q).norm() < 1e-4 * q.norm());
}

#[test]
fn gaussian_left_multiplication_norm() {
    // L_b for b = e^{-|x|²/(2σ²)} has norm 1/(1 + θ/(2σ²)), attained on the Moyal vacuum e^{-|x|²/θ}
    let theta = 0.5;
    let m = plane(theta);
    let grid = SpatialGrid::new(16.0, 24, 2).unwrap();
    for sigma in [1.5, 2.0] {
        let b = GridFunction::gaussian(grid, sigma, 1.0, [0.0, 0.0]);
        let l = left_mult_scalar(&b, &m, &grid).unwrap();
        let norm = linalg::operator_norm(l.as_ref(), 2000);
        let expect = 1.0 / (1.0 + theta / (2.0 * sigma * sigma));
        assert!((norm - expect).abs() < 1e-3, "σ={sigma}: {norm} vs {expect}");
        // dimensionally consistent constant (2πθ)^{-1/2}
        let gv = (2.0 * PI * theta).powf(-0.5) * b.l2_norm();
        assert!(norm <= gv);
        let literal = left_mult_bound(&b, &m);
        if sigma == 1.5 {
            assert!(norm > literal, "literal (2πθ)^(-p/2) constant is exceeded at σ = 1.5");
        } else {
            assert!(norm <= literal);
        }
    }
}

#[test]
fn commutative_bound_is_sup() {
    let m = ModelParams::new(2, 0, 0.0, 1.0).unwrap();
    let grid = SpatialGrid::new(16.0, 64, 1).unwrap();
    let b = GridFunction::gaussian(grid, 1.5, 0.7, [1.0, 0.0]);
    let l = left_mult_scalar(&b, &m, &grid).unwrap();
    let norm = linalg::operator_norm(l.as_ref(), 5000);
    assert!((norm - left_mult_bound(&b, &m)).abs() < 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn algebra_on_band_limited_samples(
        cx in -1.0f64..1.0, cy in -1.0f64..1.0, w in 2.2f64..3.0, theta in 0.1f64..1.0,
    ) {
        let m = plane(theta);
        let grid = SpatialGrid::new(8.0, 16, 2).unwrap();
        let f = mixed(grid, w, [cx, cy], [cy, -cx]);
        let g = mixed(grid, w * 1.05, [-cy, cx], [0.3, 0.2]);
        let h = mixed(grid, w * 1.1, [0.1, -0.3], [cx, 0.0]);
        let fg = star_product(&f, &g, &m, &grid).unwrap();
        let l = star_product(&fg, &h, &m, &grid).unwrap();
        let r = star_product(&f, &star_product(&g, &h, &m, &grid).unwrap(), &m, &grid).unwrap();
        prop_assert!(l.sup_distance(&r) < 1e-8);
        let inv = star_product(&g.conj(), &f.conj(), &m, &grid).unwrap();
        prop_assert!(fg.conj().sup_distance(&inv) < 1e-8);
        prop_assert!((fg.integral() - f.pointwise(&g).integral()).norm() < 1e-8);
    }

    #[test]
    fn theta_to_zero_is_pointwise(w in 1.5f64..2.0, cx in -0.5f64..0.5) {
        let grid = SpatialGrid::new(12.0, 32, 2).unwrap();
        let f = mixed(grid, w, [cx, 0.0], [0.0, cx]);
        let g = mixed(grid, w, [0.0, -cx], [0.2, 0.2]);
        let pw = f.pointwise(&g);
        let d: Vec<f64> = [0.04, 0.02, 0.01].iter().map(|&t| star_product(&f, &g, &plane(t), &grid).unwrap().sup_distance(&pw)).collect();
        prop_assert!(d[1] < d[0] && d[2] < d[1]);
        // first order in θ
        prop_assert!((d[0] / d[1] - 2.0).abs() < 0.2);
    }
}
