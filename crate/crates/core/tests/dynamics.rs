use moyal_scatter::clifford::{DiracRep, ModelParams};
use moyal_scatter::dynamics::*;
use moyal_scatter::grid::{GridFunction, GridSpinor, SpatialGrid};
use moyal_scatter::linalg::{self, c64};
use moyal_scatter::moyal::PotentialKind;
use moyal_scatter::operator::Conjugation;
use proptest::prelude::*;

struct Setup {
    spectral: SpectralData,
    dirac: DiracRep,
    model: ModelParams,
    grid: SpatialGrid,
}

fn line(points: usize, box_length: f64) -> Setup {
    let model = ModelParams::new(2, 0, 0.0, 1.0).unwrap();
    let dirac = DiracRep::build(&model).unwrap();
    let grid = SpatialGrid::new(box_length, points, 1).unwrap();
    let spectral = SpectralData::new(&model, &dirac, &grid).unwrap();
    Setup { spectral, dirac, model, grid }
}

fn profile(s: &Setup, amplitude: f64, kind: PotentialKind) -> PotentialProfile {
    let b = GridFunction::gaussian(s.grid, 1.5, 1.0, [0.0, 0.0]);
    PotentialProfile::new(kind, TimeBump { center: 0.0, half_width: 1.0, amplitude }, b, &s.model, &s.dirac).unwrap()
}

fn spinor(s: &Setup, c: f64) -> Vec<c64> {
    let u = GridFunction::gaussian(s.grid, 1.0, 1.0, [c, 0.0]);
    let w = GridFunction::gaussian(s.grid, 1.2, 0.4, [-c, 0.0]);
    GridSpinor::from_components(&[u, w.conj()]).unwrap().coeffs
}

fn source(s: &Setup, center: f64, x: f64, dt: f64) -> SpacetimeField {
    let v = spinor(s, x);
    let bump = TimeBump { center, half_width: 0.6, amplitude: 1.0 };
    SpacetimeField::from_fn(s.grid, 2, center - 1.0, center + 1.0, dt, |t| v.iter().map(|z| z * bump.value(t)).collect()).unwrap()
}

#[test]
fn rk4_agrees_with_dyson_at_weak_coupling() {
    let s = line(32, 16.0);
    let p = profile(&s, 0.1, PotentialKind::V0);
    let v = spinor(&s, 0.5);
    let a = evolve_vec(&v, -1.2, 1.2, &p, &s.spectral, &Integrator::rk4(1e-3)).unwrap();
    let b = evolve_vec(&v, -1.2, 1.2, &p, &s.spectral, &Integrator::dyson(1e-3, 6)).unwrap();
    assert!(linalg::diff_norm(&a, &b) / linalg::norm(&a) < 1e-6);
}

#[test]
fn retarded_and_advanced_solve_the_equation() {
    let s = line(64, 16.0);
    let p = profile(&s, 0.5, PotentialKind::V0);
    let f = source(&s, 0.2, 1.0, 1e-3);
    for c in [Causal::Retarded, Causal::Advanced] {
        let r = fundamental_solution(c, &f, Some(&p), &s.spectral, &Integrator::rk4(1e-3)).unwrap();
        assert!(dirac_residual(&r, &f, Some(&p), &s.spectral) / f.max_slice_norm() < 1e-4);
    }
}

#[test]
fn locality_for_causally_disjoint_supports() {
    let s = line(128, 32.0);
    let p = profile(&s, 0.5, PotentialKind::V0);
    let f = source(&s, 0.0, 16.0, 2e-3);
    let integ = Integrator::rk4(2e-3);
    let r0 = causal_propagator(&f, None, &s.spectral, &integ).unwrap();
    let rv = causal_propagator(&f, Some(&p), &s.spectral, &integ).unwrap();
    assert!(rv.sub(&r0).max_slice_norm() < 1e-4);
}

#[test]
fn pairing_is_conjugation_symmetric() {
    let s = line(32, 16.0);
    let p = profile(&s, 0.5, PotentialKind::V0);
    let integ = Integrator::rk4(5e-3);
    let f = source(&s, 0.0, 0.5, 5e-3);
    let h = source(&s, 0.0, -1.0, 5e-3);
    let k = Conjugation::new(&s.dirac, s.grid);
    let cf = f.map_slices(|_, x| k.apply(x));
    let ch = h.map_slices(|_, x| k.apply(x));
    let a = causal_pairing(&cf, &ch, Some(&p), &s.spectral, &integ).unwrap();
    let b = causal_pairing(&f, &h, Some(&p), &s.spectral, &integ).unwrap().conj();
    assert!((a - b).norm() < 1e-8 * b.norm().max(1.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn evolution_is_unitary_and_composes(amp in 0.0f64..1.0, t1 in -0.8f64..0.8, kind in 0usize..2) {
        let s = line(32, 16.0);
        let kind = [PotentialKind::V0, PotentialKind::Vi][kind];
        let p = profile(&s, amp, kind);
        let integ = Integrator::rk4(1e-2);
        let v = spinor(&s, 0.3);
        let whole = evolve_vec(&v, -1.5, 1.5, &p, &s.spectral, &integ).unwrap();
        prop_assert!((linalg::norm(&whole) - linalg::norm(&v)).abs() < 1e-8 * linalg::norm(&v));
        let half = evolve_vec(&v, -1.5, t1, &p, &s.spectral, &integ).unwrap();
        let two = evolve_vec(&half, t1, 1.5, &p, &s.spectral, &integ).unwrap();
        prop_assert!(linalg::diff_norm(&two, &whole) < 1e-7 * linalg::norm(&v));
    }
}
