use ahcc_core::curvature::*;
use ahcc_core::sample::{FieldSampler, Support};
use ahcc_core::tensor::SymLayout;
use ahcc_core::*;

fn flat(g: &FieldGrid) -> MetricField {
    let comps = SymTensor2Field::from_fn(g, Repr::Physical, |_, out| {
        let lay = SymLayout::new(3);
        for a in 0..3 {
            out[lay.slot(a, a)] = 1.0;
        }
    });
    MetricField::new(g, comps).unwrap()
}

fn perturbed(g: &FieldGrid, b: &BackgroundGeometry, amp: f64, seed: u64) -> MetricField {
    let mut h: SymTensor2Field = FieldSampler::new(seed).rescaled(g, Support::Gaussian(0.5));
    h.scale(amp);
    MetricField::perturbed(g, b, &h).unwrap()
}

fn bundle(g: &FieldGrid, m: &MetricField) -> CurvatureBundle {
    let chris = christoffel(m, g).unwrap();
    curvature_bundle(m, &chris, g).unwrap()
}

#[test]
fn flat_metric_has_no_curvature() {
    let g = FieldGrid::build(3, 13, 0.9, FdOrder::Fourth).unwrap();
    let m = flat(&g);
    let chris = christoffel(&m, &g).unwrap();
    for &p in g.region(chris.level()) {
        assert!(chris.at(p as usize).iter().all(|v| v.abs() < 1e-14));
    }
    let c = curvature_bundle(&m, &chris, &g).unwrap();
    let mut riem = vec![0.0; 81];
    for &p in g.region(c.level()) {
        let p = p as usize;
        assert!(c.ricci().at(p).iter().all(|v| v.abs() < 1e-12));
        assert!(c.scalar().at(p)[0].abs() < 1e-12);
        c.riemann_full(p, &mut riem);
        assert!(riem.iter().all(|v| v.abs() < 1e-12));
    }
}

#[test]
fn poincare_christoffel_symbols() {
    let g = FieldGrid::build(3, 37, 0.9, FdOrder::Fourth).unwrap();
    let b = BackgroundGeometry::new(3).unwrap();
    let chris = christoffel(&MetricField::background(&g, &b), &g).unwrap();
    let o = g.nearest_node(&[0.0; 3]);
    assert!(chris.at(o).iter().all(|v| v.abs() < 1e-12));
    let p = g.nearest_node(&[0.5, 0.0, 0.0]);
    assert!((g.coords(p)[0] - 0.5).abs() < 1e-15);
    let v = chris.get(p, 0, 0, 0);
    assert!((v - 4.0 / 3.0).abs() < 1e-10, "Γ^1_11 = {v}");
    for k in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(chris.get(p, k, i, j), chris.get(p, k, j, i));
            }
        }
    }
}

#[test]
fn hyperbolic_and_spherical_scalar_curvature() {
    let g = FieldGrid::build(3, 33, 0.9, FdOrder::Fourth).unwrap();
    let b = BackgroundGeometry::new(3).unwrap();
    let hyp = bundle(&g, &MetricField::background(&g, &b));
    let delta = SymTensor2Field::from_fn(&g, Repr::Rescaled, |_, out| {
        out[0] = 1.0;
        out[3] = 1.0;
        out[5] = 1.0;
    });
    let sphere_metric = MetricField::from_compact(&g, delta, ConformalFactor::RoundSphere).unwrap();
    let sph = bundle(&g, &sphere_metric);
    for &p in g.core_nodes() {
        let p = p as usize;
        assert!((hyp.scalar().at(p)[0] + 6.0).abs() <= 1e-4);
        assert!((sph.scalar().at(p)[0] - 6.0).abs() <= 1e-4);
    }
}

#[test]
fn scalar_curvature_is_the_trace_of_ricci() {
    let g = FieldGrid::build(3, 17, 0.9, FdOrder::Fourth).unwrap();
    let b = BackgroundGeometry::new(3).unwrap();
    let m = perturbed(&g, &b, 0.05, 7);
    let c = bundle(&g, &m);
    let tr = m.trace(&g, c.ricci()).unwrap();
    for &p in g.region(c.level()) {
        let p = p as usize;
        let r = c.scalar().at(p)[0];
        assert!((tr.at(p)[0] - r).abs() <= 1e-12 * r.abs().max(1.0));
    }
}

#[test]
fn inverse_metric_is_accurate() {
    let g = FieldGrid::build(3, 17, 0.9, FdOrder::Fourth).unwrap();
    let b = BackgroundGeometry::new(3).unwrap();
    let m = perturbed(&g, &b, 0.1, 2);
    let lay = SymLayout::new(3);
    for &p in g.region(0) {
        let p = p as usize;
        let (a, inv) = (m.comps().at(p), m.inverse_at(p));
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| a[lay.slot(i, k)] * inv[lay.slot(k, j)]).sum();
                let d = if i == j { 1.0 } else { 0.0 };
                assert!((v - d).abs() <= 1e-12, "node {p}");
            }
        }
    }
}

#[test]
fn indefinite_metric_is_rejected_with_its_location() {
    let g = FieldGrid::build(3, 9, 0.9, FdOrder::Second).unwrap();
    let comps = SymTensor2Field::from_fn(&g, Repr::Physical, |x, out| {
        out[0] = if x[0] > 0.3 { -1.0 } else { 1.0 };
        out[3] = 1.0;
        out[5] = 1.0;
    });
    match MetricField::new(&g, comps) {
        Err(Error::NotPositiveDefinite { coords, .. }) => assert!(coords[0] > 0.3),
        other => panic!("expected a positivity error, got {other:?}"),
    }
}

#[test]
fn covariant_derivative_on_flat_space() {
    let g = FieldGrid::build(3, 13, 0.9, FdOrder::Fourth).unwrap();
    let m = flat(&g);
    let chris = christoffel(&m, &g).unwrap();
    let w = OneFormField::from_fn(&g, Repr::Physical, |x, out| out[0] = x[0]);
    let dw = cov_deriv_oneform(&g, &m, &chris, &w).unwrap();
    let c = OneFormField::from_fn(&g, Repr::Physical, |_, out| out.copy_from_slice(&[0.3, -1.0, 2.0]));
    let dc = cov_deriv_oneform(&g, &m, &chris, &c).unwrap();
    for &p in g.region(dw.level()) {
        let p = p as usize;
        for i in 0..3 {
            for j in 0..3 {
                let e = if (i, j) == (0, 0) { 1.0 } else { 0.0 };
                assert!((dw.get(p, &[i, j]) - e).abs() < 1e-12);
                assert!(dc.get(p, &[i, j]).abs() < 1e-13);
            }
        }
    }
}

#[test]
fn metric_is_parallel() {
    let g = FieldGrid::build(3, 17, 0.9, FdOrder::Fourth).unwrap();
    let b = BackgroundGeometry::new(3).unwrap();
    for m in [MetricField::background(&g, &b), perturbed(&g, &b, 0.05, 4)] {
        let chris = christoffel(&m, &g).unwrap();
        let dg = cov_deriv_sym2(&g, &m, &chris, m.comps()).unwrap();
        for &p in g.core_nodes() {
            let p = p as usize;
            let scale = m.scale_at(p);
            assert!(dg.at(p).iter().all(|v| v.abs() <= 1e-3 * scale), "node {p}");
        }
    }
}

fn riemann_defects(points: usize) -> f64 {
    let g = FieldGrid::build(3, points, 0.9, FdOrder::Fourth).unwrap();
    let b = BackgroundGeometry::new(3).unwrap();
    let m = perturbed(&g, &b, 0.05, 9);
    let c = bundle(&g, &m);
    let mut r = vec![0.0; 81];
    let idx = |a: usize, b: usize, c: usize, d: usize| ((a * 3 + b) * 3 + c) * 3 + d;
    let (mut worst, mut size) = (0.0f64, 0.0f64);
    for &p in g.core_nodes() {
        c.riemann_full(p as usize, &mut r);
        size = size.max(r.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        for a in 0..3 {
            for bb in 0..3 {
                for cc in 0..3 {
                    for d in 0..3 {
                        let v = r[idx(a, bb, cc, d)];
                        worst = worst
                            .max((v + r[idx(bb, a, cc, d)]).abs())
                            .max((v + r[idx(a, bb, d, cc)]).abs())
                            .max((v - r[idx(cc, d, a, bb)]).abs())
                            .max((v + r[idx(a, cc, d, bb)] + r[idx(a, d, bb, cc)]).abs());
                    }
                }
            }
        }
    }
    worst / size
}

#[test]
fn riemann_symmetries_hold_to_truncation_error() {
    let coarse = riemann_defects(17);
    let fine = riemann_defects(33);
    assert!(fine <= 1e-3, "relative defect {fine:e}");
    assert!(fine <= coarse, "no improvement: {coarse:e} -> {fine:e}");
}
