use ahcc_core::curvature::MetricField;
use ahcc_core::operators::OperatorContext;
use ahcc_core::sample::{FieldSampler, Support};
use ahcc_core::verify::{gauge_identity_discrepancy, observed_order};
use ahcc_core::*;
use proptest::prelude::*;

fn flat_metric(g: &FieldGrid) -> MetricField {
    let comps = SymTensor2Field::from_fn(g, Repr::Physical, |_, out| {
        out[0] = 1.0;
        out[3] = 1.0;
        out[5] = 1.0;
    });
    MetricField::new(g, comps).unwrap()
}

fn small_grid() -> FieldGrid {
    FieldGrid::build(3, 13, 0.9, FdOrder::Fourth).unwrap()
}

fn assert_on_region<K: field::FieldKind>(
    g: &FieldGrid,
    f: &Field<K>,
    tol: f64,
    expected: impl Fn(&[f64], usize) -> f64,
) {
    for &p in g.region(f.level()) {
        let p = p as usize;
        let x = g.coords(p);
        for (c, v) in f.at(p).iter().enumerate() {
            let e = expected(&x[..3], c);
            assert!((v - e).abs() <= tol, "node {p} comp {c}: {v} vs {e}");
        }
    }
}

#[test]
fn flat_scalar_and_tensor_laplacians() {
    let g = small_grid();
    let ctx = OperatorContext::new(&g, flat_metric(&g)).unwrap();
    let f = ScalarField::from_fn(&g, Repr::Physical, |x, out| out[0] = x[0] * x[0]);
    assert_on_region(&g, &ctx.laplacian(&f).unwrap(), 1e-10, |_, _| -2.0);
    let c = ScalarField::from_fn(&g, Repr::Physical, |_, out| out[0] = 3.5);
    assert_on_region(&g, &ctx.laplacian(&c).unwrap(), 1e-10, |_, _| 0.0);
    let u = SymTensor2Field::from_fn(&g, Repr::Physical, |x, out| out[0] = x[0] * x[0]);
    let lu = ctx.laplacian(&u).unwrap();
    assert_on_region(&g, &lu, 1e-10, |_, c| if c == 0 { -2.0 } else { 0.0 });
    let ll = ctx.lichnerowicz(&u).unwrap();
    assert_on_region(&g, &ll, 1e-10, |_, c| if c == 0 { -2.0 } else { 0.0 });
}

#[test]
fn zero_inputs_give_zero() {
    let g = small_grid();
    let b = BackgroundGeometry::new(3).unwrap();
    let ctx = OperatorContext::background(&g, &b).unwrap();
    let u = SymTensor2Field::zeros(&g, Repr::Physical);
    let w = OneFormField::zeros(&g, Repr::Physical);
    let zero = |_: &[f64], _: usize| 0.0;
    assert_on_region(&g, &ctx.lichnerowicz(&u).unwrap(), 0.0, zero);
    assert_on_region(&g, &ctx.divergence_sym2(&u).unwrap(), 0.0, zero);
    assert_on_region(&g, &ctx.codifferential(&w).unwrap(), 0.0, zero);
    assert_on_region(&g, &ctx.killing_sym(&w).unwrap(), 0.0, zero);
    assert_on_region(&g, &ctx.conformal_killing(&w).unwrap(), 0.0, zero);
    assert_on_region(&g, &ctx.gauge_b(&u).unwrap(), 0.0, zero);
    assert_on_region(&g, &ctx.vector_laplacian(&w).unwrap(), 0.0, zero);
}

#[test]
fn flat_divergence_and_codifferential() {
    let g = small_grid();
    let ctx = OperatorContext::new(&g, flat_metric(&g)).unwrap();
    let u = SymTensor2Field::from_fn(&g, Repr::Physical, |x, out| out[0] = x[0] * x[0]);
    let div = ctx.divergence_sym2(&u).unwrap();
    assert_on_region(&g, &div, 1e-12, |x, c| if c == 0 { -2.0 * x[0] } else { 0.0 });
    let w = OneFormField::from_fn(&g, Repr::Physical, |x, out| out[0] = x[0]);
    assert_on_region(&g, &ctx.codifferential(&w).unwrap(), 1e-12, |_, _| -1.0);
}

#[test]
fn codifferential_at_the_origin_of_the_ball() {
    let g = FieldGrid::build(3, 17, 0.9, FdOrder::Fourth).unwrap();
    let b = BackgroundGeometry::new(3).unwrap();
    let ctx = OperatorContext::background(&g, &b).unwrap();
    let w = OneFormField::from_fn(&g, Repr::Physical, |x, out| out[0] = b.rho_at(x).powi(2));
    let d = ctx.codifferential(&w).unwrap();
    assert!(d.at(g.nearest_node(&[0.0; 3]))[0].abs() < 1e-12);
}

#[test]
fn flat_killing_operators() {
    let g = small_grid();
    let ctx = OperatorContext::new(&g, flat_metric(&g)).unwrap();
    let w = OneFormField::from_fn(&g, Repr::Physical, |x, out| out[0] = x[0]);
    assert_on_region(&g, &ctx.killing_sym(&w).unwrap(), 1e-12, |_, c| if c == 0 { 1.0 } else { 0.0 });
    let diag = [2.0 / 3.0, 0.0, 0.0, -1.0 / 3.0, 0.0, -1.0 / 3.0];
    assert_on_region(&g, &ctx.conformal_killing(&w).unwrap(), 1e-12, |_, c| diag[c]);
}

#[test]
fn flat_gauge_operator_of_a_linear_multiple_of_delta() {
    let g = small_grid();
    let ctx = OperatorContext::new(&g, flat_metric(&g)).unwrap();
    let h = SymTensor2Field::from_fn(&g, Repr::Physical, |x, out| {
        out[0] = x[0];
        out[3] = x[0];
        out[5] = x[0];
    });
    assert_on_region(&g, &ctx.gauge_b(&h).unwrap(), 1e-12, |_, c| if c == 0 { 0.5 } else { 0.0 });
}

#[test]
fn flat_vector_laplacian() {
    let g = small_grid();
    let ctx = OperatorContext::new(&g, flat_metric(&g)).unwrap();
    let w = OneFormField::from_fn(&g, Repr::Physical, |x, out| out[0] = x[0] * x[0]);
    assert_on_region(&g, &ctx.vector_laplacian(&w).unwrap(), 1e-10, |_, c| if c == 0 { -2.0 } else { 0.0 });
}

#[test]
fn metric_is_divergence_free_and_gauge_free() {
    let g = FieldGrid::build(3, 33, 0.9, FdOrder::Fourth).unwrap();
    let b = BackgroundGeometry::new(3).unwrap();
    let ctx = OperatorContext::background(&g, &b).unwrap();
    let div = ctx.divergence_sym2(ctx.metric_field()).unwrap();
    let gauge = ctx.gauge_b(ctx.metric_field()).unwrap();
    let core = WeightedNorm::new(0.0).on(Region::Core);
    assert!(core.eval(&div, &g, &b).unwrap() <= 1e-12);
    assert!(core.eval(&gauge, &g, &b).unwrap() <= 1e-5);
}

#[test]
fn gauge_identity_holds_exactly_on_flat_polynomials() {
    let g = small_grid();
    let b = BackgroundGeometry::new(3).unwrap();
    let ctx = OperatorContext::new(&g, flat_metric(&g)).unwrap();
    let w = OneFormField::from_fn(&g, Repr::Physical, |x, out| {
        out[0] = x[0] * x[1] + x[2] * x[2];
        out[1] = x[0] * x[0] - 0.5 * x[1] * x[2];
        out[2] = x[1] * x[1] * x[0];
    });
    assert!(gauge_identity_discrepancy(&ctx, &b, &w).unwrap() <= 1e-10);
}

fn gauge_identity_error(points: usize) -> f64 {
    let g = FieldGrid::build(3, points, 0.9, FdOrder::Fourth).unwrap();
    let b = BackgroundGeometry::new(3).unwrap();
    let ctx = OperatorContext::background(&g, &b).unwrap();
    let w: OneFormField = FieldSampler::new(21).physical(&g, &b, Support::Everywhere).unwrap();
    gauge_identity_discrepancy(&ctx, &b, &w).unwrap()
}

#[test]
fn gauge_identity_converges_on_the_ball() {
    let coarse = gauge_identity_error(17);
    let fine = gauge_identity_error(33);
    assert!(fine <= 1e-3, "{fine:e}");
    assert!(observed_order(coarse, fine) >= 3.5, "{coarse:e} -> {fine:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn conformal_killing_is_trace_free(seed in any::<u64>(), bandwidth in 0.5f64..3.0) {
        let g = small_grid();
        let b = BackgroundGeometry::new(3).unwrap();
        let ctx = OperatorContext::background(&g, &b).unwrap();
        let w: OneFormField = FieldSampler::new(seed)
            .with_bandwidth(bandwidth)
            .physical(&g, &b, Support::Everywhere)
            .unwrap();
        let lw = ctx.conformal_killing(&w).unwrap();
        let tr = ctx.metric().trace(&g, &lw).unwrap();
        for &p in g.region(lw.level()) {
            let p = p as usize;
            prop_assert!(tr.at(p)[0].abs() <= 1e-12 * ctx.metric().scale_at(p).max(1.0));
        }
    }

    #[test]
    fn operators_are_linear(seed in any::<u64>(), a in -3.0f64..3.0) {
        let g = small_grid();
        let b = BackgroundGeometry::new(3).unwrap();
        let ctx = OperatorContext::background(&g, &b).unwrap();
        let mut s = FieldSampler::new(seed);
        let u: SymTensor2Field = s.physical(&g, &b, Support::Everywhere).unwrap();
        let v: SymTensor2Field = s.physical(&g, &b, Support::Everywhere).unwrap();
        let mut comb = u.clone();
        comb.scale(a);
        comb.axpy(1.0, &v).unwrap();
        let lhs = ctx.lichnerowicz(&comb).unwrap();
        let mut rhs = ctx.lichnerowicz(&u).unwrap();
        rhs.scale(a);
        rhs.axpy(1.0, &ctx.lichnerowicz(&v).unwrap()).unwrap();
        let scale = lhs.data().iter().fold(1.0f64, |m, x| m.max(x.abs()));
        for (x, y) in lhs.data().iter().zip(rhs.data()) {
            prop_assert!((x - y).abs() <= 1e-11 * scale);
        }
    }
}
