use moyal_scatter::clifford::{DiracRep, ModelParams};
use moyal_scatter::dynamics::{Integrator, PotentialProfile, SpectralData, TimeBump};
use moyal_scatter::grid::{GridFunction, SpatialGrid};
use moyal_scatter::linalg::{self, c64};
use moyal_scatter::moyal::PotentialKind;
use moyal_scatter::operator::{Conjugation, OneParticleOperator};
use moyal_scatter::scattering::*;

fn setup(model: ModelParams, points: usize, l: f64, kind: PotentialKind, amp: f64) -> (SpectralData, PotentialProfile, DiracRep) {
    let dirac = DiracRep::build(&model).unwrap();
    let grid = SpatialGrid::new(l, points, model.s()).unwrap();
    let sp = SpectralData::new(&model, &dirac, &grid).unwrap();
    let b = GridFunction::gaussian(grid, 1.5, 1.0, [0.0, 0.0]);
    let prof = PotentialProfile::new(kind, TimeBump { center: 0.0, half_width: 1.0, amplitude: amp }, b, &model, &dirac).unwrap();
    (sp, prof, dirac)
}

fn line() -> ModelParams {
    ModelParams::new(2, 0, 0.0, 1.0).unwrap()
}

fn plane() -> ModelParams {
    ModelParams::new(1, 2, 0.5, 1.0).unwrap()
}

#[test]
fn zero_potential_scatters_trivially() {
    let (sp, prof, _) = setup(line(), 16, 8.0, PotentialKind::V0, 0.0);
    let s = scatter_half(&prof, &sp, &Integrator::rk4(0.05), 0.05).unwrap();
    assert!(s.hs_offdiag < 1e-12);
    assert!(s.hs_dt < 1e-12);
    let d = d_scattering(&prof, &sp, 0.05).unwrap();
    assert_eq!(linalg::max_abs(d.matrix.as_ref()), 0.0);
}

#[test]
fn derivative_is_hermitian_and_conjugation_odd() {
    for (model, kind) in [(line(), PotentialKind::V0), (plane(), PotentialKind::Vi), (plane(), PotentialKind::Vii)] {
        let (sp, prof, dirac) = setup(model, 8, 8.0, kind, 0.5);
        let d = d_scattering(&prof, &sp, 0.01).unwrap();
        assert!(d.hermiticity_defect() < 1e-10);
        let k = Conjugation::new(&dirac, sp.grid);
        let cdc = k.sandwich(&d.matrix);
        assert!(linalg::max_abs(linalg::add(cdc.as_ref(), d.matrix.as_ref()).as_ref()) < 1e-10, "{kind:?}");
    }
}

#[test]
fn derivative_matches_finite_difference() {
    let (sp, prof, _) = setup(plane(), 8, 8.0, PotentialKind::Vi, 0.5);
    let integ = Integrator::rk4(2e-3);
    let lam = 1e-3;
    let tp = scattering_operator(&prof.with_coupling(lam), &sp, &integ).unwrap();
    let tm = scattering_operator(&prof.with_coupling(-lam), &sp, &integ).unwrap();
    let d = d_scattering(&prof, &sp, 2e-3).unwrap();
    let fd = linalg::scale(linalg::sub(tp.matrix.as_ref(), tm.matrix.as_ref()).as_ref(), c64::new(1.0 / (2.0 * lam), 0.0));
    let id = linalg::scale(d.matrix.as_ref(), linalg::I);
    let err = linalg::frobenius(linalg::sub(fd.as_ref(), id.as_ref()).as_ref()) / linalg::frobenius(id.as_ref());
    assert!(err < 1e-4, "{err}");
}

#[test]
fn columns_match_full_derivative() {
    let (sp, prof, _) = setup(plane(), 8, 8.0, PotentialKind::Vii, 0.5);
    let d = d_scattering(&prof, &sp, 0.01).unwrap();
    let y = sp.range_basis(1.0);
    let cols = d_scattering_columns(&prof, &sp, 0.01, &y).unwrap();
    let full = linalg::mul(d.matrix.as_ref(), y.as_ref());
    assert!(linalg::max_abs_diff(cols.as_ref(), full.as_ref()) < 1e-12);
}

#[test]
fn kernel_formula_matches_quadrature() {
    let (sp, prof, _) = setup(plane(), 8, 8.0, PotentialKind::Vi, 0.5);
    let d = d_scattering(&prof, &sp, 0.005).unwrap();
    let a = hs_plus_minus(&d.matrix, &sp);
    let b = kernel_formula_hs(&prof, &sp);
    assert!((a - b).abs() < 1e-6 * b, "{a} vs {b}");
}

#[test]
fn half_scatter_agrees_with_full_commutator() {
    let (sp, prof, _) = setup(plane(), 8, 8.0, PotentialKind::Vi, 0.5);
    let integ = Integrator::rk4(0.05);
    let full = scatter(&prof, &sp, &integ, 0.05).unwrap();
    let half = scatter_half(&prof, &sp, &integ, 0.05).unwrap();
    assert!((full.summary.hs_offdiag - half.hs_offdiag).abs() < 1e-10 * full.summary.hs_offdiag);
    assert!((commutator_hs(&full.t_sc, &sp) - half.hs_offdiag).abs() < 1e-10 * half.hs_offdiag);
}

#[test]
fn snapshot_round_trip_is_bit_exact() {
    let (sp, prof, _) = setup(plane(), 8, 8.0, PotentialKind::Vi, 0.5);
    let d = d_scattering(&prof, &sp, 0.05).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("d_t_sc");
    d.save(&stem, "momentum modes x spinor").unwrap();
    let (back, side) = OneParticleOperator::load(&stem).unwrap();
    assert_eq!(side.rows, d.dim());
    assert_eq!(side.label, "dT_sc");
    for j in 0..d.dim() {
        for i in 0..d.dim() {
            let (a, b) = (d.matrix[(i, j)], back.matrix[(i, j)]);
            assert_eq!((a.re.to_bits(), a.im.to_bits()), (b.re.to_bits(), b.im.to_bits()));
        }
    }
    let bytes = std::fs::read(stem.with_extension("bin")).unwrap();
    std::fs::write(stem.with_extension("bin"), &bytes[..bytes.len() - 1]).unwrap();
    assert!(OneParticleOperator::load(&stem).is_err());
}

#[test]
fn refinement_report_flags_large_changes() {
    let mk = |n, v| ScatteringSummary { points_per_dim: n, box_length: 8.0, dt: 0.1, hs_offdiag: v, hs_plus_minus: v / 2f64.sqrt(), hs_dt: v, unitarity_defect: 0.0 };
    let ok = implementability_report(&[mk(8, 1.0), mk(12, 1.02), mk(16, 1.03)]).unwrap();
    assert!(ok.implementable);
    let bad = implementability_report(&[mk(8, 1.0), mk(12, 1.2)]).unwrap();
    assert!(!bad.implementable);
}
