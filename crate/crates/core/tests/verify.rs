use ahcc_core::constraint::*;
use ahcc_core::curvature::{ConformalFactor, MetricField};
use ahcc_core::operators::OperatorContext;
use ahcc_core::sample::{FieldSampler, Support};
use ahcc_core::verify::*;
use ahcc_core::*;
use proptest::prelude::*;

fn setup(points: usize) -> (FieldGrid, BackgroundGeometry) {
    (
        FieldGrid::build(3, points, 0.9, FdOrder::Fourth).unwrap(),
        BackgroundGeometry::new(3).unwrap(),
    )
}

fn radial_covector(g: &FieldGrid, b: &BackgroundGeometry, f: impl Fn(f64) -> f64) -> OneFormField {
    OneFormField::from_fn(g, Repr::Rescaled, |x, out| out[2] = f(b.rho_at(x)))
        .to_physical(g, b)
        .unwrap()
}

#[test]
fn decay_fit_recovers_a_pure_power() {
    let (g, b) = setup(33);
    let fit = decay_fit(&radial_covector(&g, &b, |rho| rho.powf(1.5)), &g, &b, 0.5).unwrap();
    assert!((fit.exponent - 1.5).abs() <= 1e-6, "{}", fit.exponent);
    assert!(fit.profile.len() >= 3);
    let flat = decay_fit(&radial_covector(&g, &b, |_| 0.25), &g, &b, 0.5).unwrap();
    assert!(flat.exponent.abs() <= 1e-6);
}

#[test]
fn decay_fit_refuses_a_vanishing_field() {
    let (g, b) = setup(17);
    let zero = SymTensor2Field::zeros(&g, Repr::Physical);
    assert!(matches!(decay_fit(&zero, &g, &b, 0.5), Err(Error::Fit(_))));
}

#[test]
fn background_passes_and_scaled_background_fails() {
    let (g, b) = setup(33);
    let ctx = OperatorContext::background(&g, &b).unwrap();
    assert!(check_constant_scalar(&ctx, 1e-4).unwrap().pass);
    assert!(check_einstein(&ctx, &b, 1e-4).unwrap().pass);
    assert!(check_gauge(&ctx, &b, 0.0, 1e-5).unwrap().pass);

    let compact = SymTensor2Field::from_fn(&g, Repr::Rescaled, |_, out| {
        out[0] = 1.1;
        out[3] = 1.1;
        out[5] = 1.1;
    });
    let scaled = MetricField::from_compact(&g, compact, ConformalFactor::PoincareBall).unwrap();
    let ctx = OperatorContext::new(&g, scaled).unwrap();
    let c = check_constant_scalar(&ctx, 1e-4).unwrap();
    assert!(!c.pass);
    assert!((c.value - 6.0 * (1.0 - 1.0 / 1.1)).abs() < 1e-4, "{}", c.value);
}

#[test]
fn non_solution_fails_the_gauge_check() {
    let (g, b) = setup(17);
    let mut st = ConstraintState::zeros(&g);
    let mut h: SymTensor2Field = FieldSampler::new(2).rescaled(&g, Support::Ball(0.6));
    h.scale(0.05);
    st.hbar = h;
    let ctx = OperatorContext::without_riemann(&g, st.metric(&g, &b).unwrap()).unwrap();
    assert!(!check_gauge(&ctx, &b, 0.0, 1e-4).unwrap().pass);
}

#[test]
fn trace_full_candidate_fails_the_trace_check() {
    let (g, b) = setup(13);
    let ctx = OperatorContext::background(&g, &b).unwrap();
    let mut s = ctx.metric_field().clone();
    s.scale(1e-3);
    let [trace, _] = check_candidate_s(&ctx, &b, &s, 1e-4).unwrap();
    assert!(!trace.pass);
    let xi: OneFormField = FieldSampler::new(5).physical(&g, &b, Support::Everywhere).unwrap();
    let [trace, _] = check_candidate_s(&ctx, &b, &ctx.conformal_killing(&xi).unwrap(), 1e-4).unwrap();
    assert!(trace.pass);
}

#[test]
fn nan_never_passes() {
    assert!(!CheckResult::at_most("x", f64::NAN, 1.0, "core").pass);
    assert!(!CheckResult::near("x", f64::NAN, 1.0, 0.5, "core").pass);
    assert!(!CheckResult::positive("x", f64::NAN, "core").pass);
    assert!(CheckResult::near("x", 1.2, 1.0, 0.3, "core").pass);
}

#[test]
fn observed_order_of_a_sixteenfold_drop() {
    assert!((observed_order(1.6e-3, 1e-4) - 4.0).abs() < 1e-12);
}

#[test]
fn bianchi_and_gauge_identities_on_the_ball() {
    let (g, b) = setup(25);
    let mut h: SymTensor2Field = FieldSampler::new(11).rescaled(&g, Support::Gaussian(0.5));
    h.scale(0.05);
    let ctx = OperatorContext::new(&g, MetricField::perturbed(&g, &b, &h).unwrap()).unwrap();
    assert!(check_bianchi(&ctx, &b, 1e-3).unwrap().pass);
    let ctx0 = OperatorContext::background(&g, &b).unwrap();
    let w: OneFormField = FieldSampler::new(3).physical(&g, &b, Support::Everywhere).unwrap();
    assert!(check_gauge_identity(&ctx0, &b, &w, 1e-2).unwrap().pass);
}

#[test]
fn adjointness_defect_shrinks_under_refinement() {
    let defect = |points| {
        let (g, b) = setup(points);
        let ctx = OperatorContext::background(&g, &b).unwrap();
        let mut s = FieldSampler::new(0);
        let u: SymTensor2Field = s.physical(&g, &b, Support::PolyBall(0.5, 4)).unwrap();
        let w: OneFormField = s.physical(&g, &b, Support::PolyBall(0.5, 4)).unwrap();
        adjointness_discrepancy(&ctx, &b, &u, &w).unwrap()
    };
    let (coarse, fine) = (defect(17), defect(33));
    assert!(observed_order(coarse, fine) >= 3.5, "{coarse:e} -> {fine:e}");
}

#[test]
fn probe_minimum_is_monotone_in_trials_and_positive() {
    let (g, b) = setup(17);
    let ctx = OperatorContext::background(&g, &b).unwrap();
    let one = nondegeneracy_probe(&ctx, &b, 1, 4).unwrap();
    let many = nondegeneracy_probe(&ctx, &b, 20, 4).unwrap();
    assert!(many <= one);
    assert!(many > 0.0);
    assert!(nondegeneracy_probe(&ctx, &b, 0, 4).is_err());
}

#[test]
fn battery_on_the_trivial_solution() {
    let (g, b) = setup(17);
    let st = ConstraintState::zeros(&g);
    let t = make_source(&SourceRecipe::rho_power(0.0, 1.5, 1), &g, &b).unwrap();
    let summary = battery(&st, &t, &b, &g, &BatteryTolerances::default()).unwrap();
    assert!(summary.pass, "{summary:?}");
    assert!(summary.get("decay_exponent").is_none());
    assert!(summary.get("gauge").is_some());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn rayleigh_quotient_is_scale_invariant(seed in any::<u64>(), scale in 0.01f64..100.0) {
        let (g, b) = setup(13);
        let ctx = OperatorContext::background(&g, &b).unwrap();
        let u: SymTensor2Field = FieldSampler::new(seed).physical(&g, &b, Support::Ball(0.55)).unwrap();
        let u = ctx.trace_free_part(&u).unwrap();
        let mut v = u.clone();
        v.scale(scale);
        let (a, c) = (rayleigh_quotient(&ctx, &b, &u).unwrap(), rayleigh_quotient(&ctx, &b, &v).unwrap());
        prop_assert!((a - c).abs() <= 1e-12 * a.abs());
    }
}
