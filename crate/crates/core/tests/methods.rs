use evalcomplexity::analysis::{
    check_malpha_membership, estimate_smoothness, matching_setup, verify_against, verify_lower_bound_run, ClassTrace,
    KappaLambda, MAlphaParams, MatchOptions, Sampling,
};
use evalcomplexity::generators::{gen_malpha, gen_sd, Family, MAlphaConfig};
use evalcomplexity::linalg::{SymMatrix, Vector};
use evalcomplexity::methods::{run, IterateTrace, MethodConfig, MethodKind, TerminationReason};
use evalcomplexity::objective::{Evaluation, Objective};
use evalcomplexity::parallel::Execution;
use evalcomplexity::{Error, Result};
use proptest::prelude::*;

/// `f(x) = c x²`.
struct Parabola(f64);

impl Objective for Parabola {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, x: &Vector) -> Result<f64> {
        Ok(self.0 * x.get(0) * x.get(0))
    }

    fn evaluate(&self, x: &Vector) -> Result<Evaluation> {
        Ok(Evaluation {
            value: self.value(x)?,
            gradient: Vector::new1(2.0 * self.0 * x.get(0)),
            hessian: SymMatrix::new1(2.0 * self.0),
        })
    }
}

fn assert_decreasing(trace: &IterateTrace) {
    for r in &trace.records {
        if r.success {
            assert!(r.actual_decrease > 0.0, "k={} accepted without decrease", r.k);
        }
    }
    for w in trace.records.windows(2) {
        let moved = w[1].x != w[0].x;
        assert_eq!(moved, w[0].success, "x must move exactly after a successful step (k={})", w[0].k);
    }
}

fn malpha_segment_midpoints(eps: f64, alpha: f64) -> (evalcomplexity::hermite::PiecewiseObjective, Vec<Vector>) {
    let (obj, _) = gen_malpha(&MAlphaConfig::new(eps, alpha)).unwrap();
    let knots = obj.knots();
    let starts = (1..knots.len() - 2).step_by(3).map(|i| Vector::new1(0.5 * (knots[i].x + knots[i + 1].x))).collect();
    (obj, starts)
}

#[test]
fn closed_form_counts() {
    for method in [MethodKind::Newton, MethodKind::TrustRegion, MethodKind::Gqt] {
        let report = verify_lower_bound_run(Family::MAlpha, method, 0.25, 1.0).unwrap();
        assert!(report.passed, "{report:?}");
        assert_eq!(report.termination_index, 8);
    }
}

#[test]
fn trust_region_takes_newton_steps() {
    let (obj, _) = gen_malpha(&MAlphaConfig::new(0.25, 1.0)).unwrap();
    let x0 = Vector::new1(0.0);
    let newton = run(&MethodConfig::new(MethodKind::Newton, 0.25), &obj, &x0).unwrap();
    let tr = run(&MethodConfig::new(MethodKind::TrustRegion, 0.25), &obj, &x0).unwrap();
    assert_eq!(newton.iterates(), tr.iterates());
    assert!(tr.records.iter().all(|r| r.multiplier == Some(0.0)));
}

#[test]
fn regularization_with_matching_weight() {
    let report = verify_lower_bound_run(Family::MAlpha, MethodKind::Reg2Alpha, 0.05, 1.0).unwrap();
    assert!(report.passed, "{report:?}");
    assert_eq!(report.termination_index, 90);
    assert_eq!(report.successful_iterations, 90);
    assert_eq!(report.evaluations, 90);
}

#[test]
fn regularization_weight_updates_and_step_bound() {
    for alpha in [0.5, 1.0] {
        let (obj, starts) = malpha_segment_midpoints(0.1, alpha);
        let lipschitz = estimate_smoothness(&obj, alpha, &Sampling::default(), Execution::Sequential).hessian_analytic_sup;
        let mut cfg = MethodConfig::new(MethodKind::Reg2Alpha, 0.1).with_alpha(alpha);
        cfg.reg.sigma0 = 1e-3;
        cfg.budget = 500;
        let mut failures = 0;
        for x0 in std::iter::once(Vector::new1(0.0)).chain(starts) {
            let trace = run(&cfg, &obj, &x0).unwrap();
            assert_decreasing(&trace);
            for w in trace.records.windows(2) {
                let (sigma, next) = (w[0].parameter.unwrap(), w[1].parameter.unwrap());
                let expected = if w[0].success { (sigma / cfg.reg.gamma_dec).max(cfg.reg.sigma_min) } else { cfg.reg.gamma_inc * sigma };
                assert_eq!(next, expected, "sigma update at k={}", w[0].k);
                failures += usize::from(!w[0].success);
            }
            for r in &trace.records {
                let sigma = r.parameter.unwrap();
                let c = 3.0 * (2.0 + alpha);
                let bound = (c * lipschitz / (4.0 * sigma)).powf(1.0 / alpha).max((c * r.g.norm() / sigma).powf(1.0 / (1.0 + alpha)));
                assert!(r.step.norm() <= bound * (1.0 + 1e-12), "k={}: |s|={} > {bound}", r.k, r.step.norm());
            }
        }
        assert!(failures > 0, "the small initial weight should cause rejections");
    }
}

#[test]
fn large_regularization_weight_forces_success() {
    let alpha = 1.0;
    let (obj, starts) = malpha_segment_midpoints(0.1, alpha);
    let holder = estimate_smoothness(&obj, alpha, &Sampling::default(), Execution::Sequential).holder_analytic_sup;
    let sigma = 0.5 * (2.0 + alpha) * holder * 1.01;
    let mut cfg = MethodConfig::new(MethodKind::Reg2Alpha, 0.1).with_alpha(alpha);
    cfg.reg.sigma0 = sigma;
    cfg.reg.sigma_min = sigma;
    cfg.budget = 300;
    for x0 in starts.into_iter().take(4) {
        let trace = run(&cfg, &obj, &x0).unwrap();
        assert!(trace.records.iter().all(|r| r.success), "rejection with sigma {sigma}");
    }
}

#[test]
fn gqt_weight_bound_and_multiplier_condition() {
    let alpha = 0.5;
    let (obj, starts) = malpha_segment_midpoints(0.1, alpha);
    let holder = estimate_smoothness(&obj, alpha, &Sampling::default(), Execution::Sequential).holder_analytic_sup;
    let cfg = MethodConfig::new(MethodKind::Gqt, 0.1).with_alpha(alpha);
    let p = cfg.gqt;
    let omega_bound = p.omega0.max(p.gamma1 * holder / (p.omega_min.powf(alpha) * (1.0 - p.eta1)));
    let params = MAlphaParams { kappa_lambda: KappaLambda::Fixed(omega_bound.max(1.0)), kappa_s: 1e6, ..MAlphaParams::default() };
    for x0 in starts {
        let trace = run(&cfg, &obj, &x0).unwrap();
        assert_decreasing(&trace);
        for r in &trace.records {
            let omega = r.parameter.unwrap();
            assert!(omega <= omega_bound, "omega {omega} above {omega_bound}");
            let shift = r.h.min_eigenvalue() + r.multiplier.unwrap();
            assert!(r.multiplier.unwrap() == 0.0 || (shift - omega * r.g.norm().powf(alpha / (1.0 + alpha))).abs() <= 1e-12);
        }
        let report = check_malpha_membership(&ClassTrace::from(&trace), alpha, &params).unwrap();
        assert!(report.passed, "first violation {:?} ({:?})", report.first_violation, report.first_violated);
    }
}

#[test]
fn goldstein_first_step_on_sd_family() {
    let setup = matching_setup(Family::SteepestDescent, MethodKind::SdGoldstein, 0.1, 0.0, &MatchOptions::default()).unwrap();
    let trace = run(&setup.config, &setup.objective, &setup.x0).unwrap();
    let first = &trace.records[0];
    assert_eq!(first.parameter, Some(0.25));
    assert!((first.step.get(0) - 0.05).abs() <= 1e-15);
    assert!((trace.records[1].f - 0.995).abs() <= 1e-15);
    assert_eq!(trace.termination_index, 100);
}

#[test]
fn zero_gradient_terminates_immediately() {
    let (obj, _) = gen_sd(0.1).unwrap();
    let x0 = Vector::new1(obj.domain().0 - 5.0);
    for method in [MethodKind::SdGoldstein, MethodKind::Newton, MethodKind::Reg2Alpha] {
        let trace = run(&MethodConfig::new(method, 0.1), &obj, &x0).unwrap();
        assert_eq!(trace.termination_index, 0);
        assert_eq!(trace.reason, TerminationReason::GradientTolerance);
    }
}

#[test]
fn budget_exhaustion_is_a_trace() {
    let (obj, _) = gen_malpha(&MAlphaConfig::new(0.1, 1.0)).unwrap();
    let mut cfg = MethodConfig::new(MethodKind::Newton, 0.1);
    cfg.budget = 3;
    let trace = run(&cfg, &obj, &Vector::new1(0.0)).unwrap();
    assert_eq!(trace.reason, TerminationReason::Budget);
    assert_eq!(trace.termination_index, 3);
}

#[test]
fn newton_rejects_negative_curvature() {
    let err = run(&MethodConfig::new(MethodKind::Newton, 1e-6), &Parabola(-0.5), &Vector::new1(1.0)).unwrap_err();
    assert!(matches!(err, Error::MethodInapplicable(_)), "{err}");
}

#[test]
fn goldstein_accepts_unit_step_on_parabola() {
    let trace = run(&MethodConfig::new(MethodKind::SdGoldstein, 1e-8), &Parabola(0.5), &Vector::new1(1.0)).unwrap();
    assert_eq!(trace.records[0].parameter, Some(1.0));
    assert_eq!(trace.final_x, Vector::new1(0.0));
    assert_eq!(trace.termination_index, 1);
}

#[test]
fn royer_wright_curvature_tolerance_validated() {
    let mut cfg = MethodConfig::new(MethodKind::RoyerWright, 0.25);
    cfg.royer_wright.eps_h = Some(0.6);
    assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
    cfg.royer_wright.eps_h = Some(0.5);
    assert!(cfg.validate().is_ok());
}

#[test]
fn mismatched_dimension_rejected() {
    let (obj, _) = gen_malpha(&MAlphaConfig::new(0.25, 1.0)).unwrap();
    let err = run(&MethodConfig::new(MethodKind::Newton, 0.25), &obj, &Vector::new2(0.0, 0.0)).unwrap_err();
    assert!(matches!(err, Error::DimensionMismatch { .. }));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn matching_runs_follow_the_knots(eps in 0.12..0.6f64, alpha in 0.05..=1.0f64, pick in 0..4usize) {
        let method = [MethodKind::Newton, MethodKind::TrustRegion, MethodKind::Gqt, MethodKind::Reg2Alpha][pick];
        let setup = matching_setup(Family::MAlpha, method, eps, alpha, &MatchOptions::default()).unwrap();
        let trace = run(&setup.config, &setup.objective, &setup.x0).unwrap();
        let report = verify_against(&setup, &trace);
        prop_assert!(report.passed, "{:?}", report);
        prop_assert!(report.max_knot_deviation <= 1e-12);
        prop_assert_eq!(trace.evaluations, trace.termination_index);
        assert_decreasing(&trace);
    }
}
