//! Iteration-count identities on the adversarial families and empirical
//! complexity slopes.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::generators::{
    gen_crs, gen_malpha, gen_newton2d, gen_sd, predict_iterations, CrsConfig, Family, GroundTruthTrace, MAlphaConfig,
    Newton2dConfig,
};
use crate::hermite::PiecewiseObjective;
use crate::linalg::Vector;
use crate::methods::{run, InitialStep, IterateTrace, MethodConfig, MethodKind};
use crate::numeric::gradient_converged;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlopeFit {
    /// Least-squares slope of `log count` against `log(1/ε)`.
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
    /// Extremes of `count / ⌈ε^{-(2+α)/(1+α)}⌉` over the inputs.
    pub max_ratio: f64,
    pub min_ratio: f64,
}

pub fn fit_complexity_slope(results: &[(f64, usize)], alpha: f64) -> Result<SlopeFit> {
    let mut distinct: Vec<f64> = results.iter().map(|r| r.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::TooFewPoints { found: distinct.len() });
    }
    if let Some(&(_, 0)) = results.iter().find(|r| r.1 == 0) {
        return Err(Error::InvalidInput("iteration counts must be positive".into()));
    }
    let mut max_ratio = f64::NEG_INFINITY;
    let mut min_ratio = f64::INFINITY;
    for &(eps, count) in results {
        let ratio = count as f64 / predict_iterations(eps, alpha)? as f64;
        max_ratio = max_ratio.max(ratio);
        min_ratio = min_ratio.min(ratio);
    }
    let n = results.len() as f64;
    let xs: Vec<f64> = results.iter().map(|r| (1.0 / r.0).ln()).collect();
    let ys: Vec<f64> = results.iter().map(|r| (r.1 as f64).ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    Ok(SlopeFit { slope, intercept: my - slope * mx, points: results.len(), max_ratio, min_ratio })
}

/// Options for building a matching family/method pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchOptions {
    /// Generate the M.α family with `λ_k = |g_k|^{α/(1+α)}/10` and run Newton
    /// with the same shift.
    pub figure_preset: bool,
    /// Fixed regularization weight for the reg2alpha pairing.
    pub sigma: f64,
    pub crs_sigma_bar: f64,
    pub crs_kappa_rg: f64,
    pub crs_eta: f64,
}

impl Default for MatchOptions {
    fn default() -> Self {
        Self { figure_preset: false, sigma: 1.0, crs_sigma_bar: 1.0, crs_kappa_rg: 0.0, crs_eta: 0.5 }
    }
}

/// A family, its ground truth, and the method configuration that must
/// follow it.
#[derive(Clone, Debug)]
pub struct MatchedRun {
    pub family: Family,
    pub eps: f64,
    pub alpha: f64,
    pub objective: PiecewiseObjective,
    pub ground_truth: GroundTruthTrace,
    pub config: MethodConfig,
    pub x0: Vector,
}

pub fn matching_setup(family: Family, method: MethodKind, eps: f64, alpha: f64, opts: &MatchOptions) -> Result<MatchedRun> {
    let alpha = family.effective_alpha(alpha);
    let unsupported = || Error::UnsupportedPairing { family: family.name().into(), method: method.name().into() };
    let mut config = MethodConfig::new(method, eps).with_alpha(alpha);
    let (objective, ground_truth) = match (family, method) {
        (Family::MAlpha, MethodKind::Newton) if opts.figure_preset => {
            config.newton.shift = 0.1;
            gen_malpha(&MAlphaConfig::figure_preset(eps, alpha))?
        }
        (Family::MAlpha, MethodKind::Newton | MethodKind::TrustRegion | MethodKind::RoyerWright | MethodKind::Gqt) => {
            gen_malpha(&MAlphaConfig::new(eps, alpha))?
        }
        (Family::MAlpha, MethodKind::Reg2Alpha) => {
            config.reg.sigma0 = opts.sigma;
            config.reg.gamma_dec = 1.0;
            config.reg.sigma_min = config.reg.sigma_min.min(opts.sigma);
            gen_malpha(&MAlphaConfig::regularization_preset(eps, alpha, opts.sigma))?
        }
        (Family::Newton2d, MethodKind::Newton) => {
            config.eps = family.termination_tolerance(eps);
            gen_newton2d(&Newton2dConfig::new(eps))?
        }
        (Family::SteepestDescent, MethodKind::SdGoldstein) => {
            config.goldstein.initial = InitialStep::Interpolated { first: 0.25 };
            gen_sd(eps)?
        }
        (Family::Crs, MethodKind::Newton) => {
            gen_crs(&CrsConfig::new(eps, opts.crs_sigma_bar, opts.crs_kappa_rg, opts.crs_eta))?
        }
        _ => return Err(unsupported()),
    };
    let x0 = Vector::zeros(objective.dim());
    Ok(MatchedRun { family, eps, alpha, objective, ground_truth, config, x0 })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LowerBoundReport {
    pub family: &'static str,
    pub method: &'static str,
    pub eps: f64,
    pub alpha: f64,
    pub tolerance: f64,
    pub predicted: usize,
    pub termination_index: usize,
    pub reason: &'static str,
    pub final_gradient_norm: f64,
    /// First accepted iterate before the last one with `‖g‖ ≤ tolerance`.
    pub early_convergence: Option<usize>,
    pub successful_iterations: usize,
    pub evaluations: usize,
    /// Largest `|x_k - x_k^{gt}| / max(1, |x_k^{gt}|)` over the knots
    /// (infinite when the iterate counts differ).
    pub max_knot_deviation: f64,
    pub passed: bool,
}

/// Checks a method trace against the count the construction predicts.
pub fn verify_against(setup: &MatchedRun, trace: &IterateTrace) -> LowerBoundReport {
    let gt = &setup.ground_truth;
    let tol = setup.config.eps;
    let records = &trace.records;
    let early_convergence =
        records.iter().filter(|r| r.success).position(|r| gradient_converged(r.g.norm(), tol));
    let final_ok = gradient_converged(trace.final_gradient_norm(), tol);

    let iterates = trace.iterates();
    let max_knot_deviation = if iterates.len() != gt.records.len() {
        f64::INFINITY
    } else {
        iterates
            .iter()
            .enumerate()
            .map(|(k, x)| {
                let expected = match &gt.partner {
                    Some(p) => Vector::new2(gt.records[k].x, p.records[k].x),
                    None => Vector::new1(gt.records[k].x),
                };
                (*x - expected).norm() / expected.norm().max(1.0)
            })
            .fold(0.0, f64::max)
    };

    let passed = trace.termination_index == gt.k_target && final_ok && early_convergence.is_none();
    LowerBoundReport {
        family: setup.family.name(),
        method: trace.method.name(),
        eps: setup.eps,
        alpha: setup.alpha,
        tolerance: tol,
        predicted: gt.k_target,
        termination_index: trace.termination_index,
        reason: trace.reason.name(),
        final_gradient_norm: trace.final_gradient_norm(),
        early_convergence,
        successful_iterations: trace.successful_iterations(),
        evaluations: trace.evaluations,
        max_knot_deviation,
        passed,
    }
}

/// Runs `method` on the matching `family` and checks that it stops exactly at
/// the predicted iteration.
pub fn verify_lower_bound_run(family: Family, method: MethodKind, eps: f64, alpha: f64) -> Result<LowerBoundReport> {
    verify_lower_bound_run_with(family, method, eps, alpha, &MatchOptions::default())
}

pub fn verify_lower_bound_run_with(
    family: Family,
    method: MethodKind,
    eps: f64,
    alpha: f64,
    opts: &MatchOptions,
) -> Result<LowerBoundReport> {
    let setup = matching_setup(family, method, eps, alpha, opts)?;
    let trace = run(&setup.config, &setup.objective, &setup.x0)?;
    Ok(verify_against(&setup, &trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_counts_have_zero_slope() {
        let fit = fit_complexity_slope(&[(0.2, 5), (0.1, 5), (0.05, 5)], 1.0).unwrap();
        assert_eq!(fit.slope, 0.0);
    }

    #[test]
    fn too_few_points() {
        let err = fit_complexity_slope(&[(0.1, 10), (0.1, 11), (0.05, 30)], 1.0).unwrap_err();
        assert!(matches!(err, Error::TooFewPoints { found: 2 }));
    }

    #[test]
    fn closed_form_run_passes() {
        let report = verify_lower_bound_run(Family::MAlpha, MethodKind::Newton, 0.25, 1.0).unwrap();
        assert!(report.passed, "{report:?}");
        assert_eq!((report.predicted, report.termination_index), (8, 8));
        assert_eq!(report.max_knot_deviation, 0.0);
    }

    #[test]
    fn unsupported_pairing() {
        let err = verify_lower_bound_run(Family::SteepestDescent, MethodKind::Newton, 0.1, 0.0).unwrap_err();
        assert!(matches!(err, Error::UnsupportedPairing { .. }));
    }
}
