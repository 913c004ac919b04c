//! Per-iteration checks of the conditions defining the M.α and CRS_a
//! method classes.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::generators::{GroundTruthRecord, GroundTruthTrace};
use crate::linalg::{SymMatrix, Vector};
use crate::methods::IterateTrace;

/// The step data a class check needs from one iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    pub g: Vector,
    pub h: SymMatrix,
    /// Scalar λ_k with `M_k = λ_k I`.
    pub multiplier: Option<f64>,
    pub step: Vector,
    /// `r_k` with `(H_k + M_k) s_k = -g_k + r_k`.
    pub residual: Option<Vector>,
    /// `f(x_k) - f(x_k + s_k)`.
    pub actual_decrease: Option<f64>,
    pub success: bool,
}

/// A method trace reduced to what the class checks consume.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ClassTrace {
    pub records: Vec<StepRecord>,
}

impl From<&IterateTrace> for ClassTrace {
    fn from(trace: &IterateTrace) -> Self {
        let records = trace
            .records
            .iter()
            .map(|r| StepRecord {
                k: r.k,
                g: r.g,
                h: r.h,
                multiplier: r.multiplier,
                step: r.step,
                // The driver stores (H + λI)s + g, which is -r in the class convention.
                residual: Some(-r.residual),
                actual_decrease: Some(r.actual_decrease),
                success: r.success,
            })
            .collect();
        Self { records }
    }
}

impl From<&GroundTruthTrace> for ClassTrace {
    fn from(trace: &GroundTruthTrace) -> Self {
        Self::from_ground_truth(&trace.records, trace.partner.as_deref().map(|p| p.records.as_slice()))
    }
}

impl ClassTrace {
    /// One record per step `k < k_target`. A 2-D family passes its second
    /// coordinate as `partner`; a multiplier is then recorded only when both
    /// coordinates share it.
    pub fn from_ground_truth(records: &[GroundTruthRecord], partner: Option<&[GroundTruthRecord]>) -> Self {
        let records = records
            .windows(2)
            .enumerate()
            .filter_map(|(i, w)| {
                let (cur, next) = (&w[0], &w[1]);
                let step = cur.step?;
                let mut rec = StepRecord {
                    k: cur.k,
                    g: Vector::new1(cur.g),
                    h: SymMatrix::new1(cur.h),
                    multiplier: step.lambda,
                    step: Vector::new1(step.s),
                    residual: step.residual.map(|r| Vector::new1(-r)),
                    actual_decrease: Some(cur.f - next.f),
                    success: true,
                };
                if let Some(p) = partner {
                    let (pc, pn) = (p.get(i)?, p.get(i + 1)?);
                    let ps = pc.step?;
                    rec.g = Vector::new2(cur.g, pc.g);
                    rec.h = SymMatrix::new2(cur.h, 0.0, pc.h);
                    rec.multiplier = match (step.lambda, ps.lambda) {
                        (Some(a), Some(b)) if a == b => Some(a),
                        _ => None,
                    };
                    rec.step = Vector::new2(step.s, ps.s);
                    rec.residual = match (step.residual, ps.residual) {
                        (Some(a), Some(b)) => Some(Vector::new2(-a, -b)),
                        _ => None,
                    };
                    rec.actual_decrease = Some((cur.f - next.f) + (pc.f - pn.f));
                }
                Some(rec)
            })
            .collect();
        Self { records }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// `‖r_k‖ ≤ min(κ_rg ‖g_k‖, κ_rs ‖M_k s_k‖)`.
    Residual,
    /// `M_k ⪰ 0` and `H_k + M_k ⪰ 0`.
    Curvature,
    /// `λ_min(H_k) + λ_min(M_k) ≤ κ_λ max(|λ_min(H_k)|, ‖g_k‖^{α/(1+α)})`.
    Multiplier,
    /// `‖s_k‖ ≤ κ_s`.
    StepBound,
    /// `σ^L ‖s_k‖ ≤ λ_k ≤ σ^U ‖s_k‖`.
    LambdaBounds,
    /// `s_kᵀ r_k ≤ ½ s_kᵀ(H_k + λ_k I)s_k + ½ κ1 ‖s_k‖³`.
    Slope,
    /// `‖r_k‖ ≤ min(κ_rg ‖g_k‖, λ_k ‖s_k‖ + κ2 ‖s_k‖²)`.
    AccurateResidual,
    /// Accepted iff `(f(x_k) - f(x_k + s_k)) / ‖s_k‖³ ≥ η`.
    Rho,
    /// `2 η (1 + κ_rg)³ ≤ 1`.
    EtaCondition,
}

impl Condition {
    pub fn name(self) -> &'static str {
        match self {
            Condition::Residual => "residual",
            Condition::Curvature => "curvature",
            Condition::Multiplier => "multiplier",
            Condition::StepBound => "step_bound",
            Condition::LambdaBounds => "lambda_bounds",
            Condition::Slope => "slope",
            Condition::AccurateResidual => "accurate_residual",
            Condition::Rho => "rho",
            Condition::EtaCondition => "eta_condition",
        }
    }
}

/// One condition evaluated as `value ≤ bound`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConditionVerdict {
    pub condition: Condition,
    pub value: f64,
    pub bound: f64,
    pub passed: bool,
}

impl ConditionVerdict {
    /// `value ≤ bound` up to `tol` relative to `max(1, |bound|, scale)`.
    fn le(condition: Condition, value: f64, bound: f64, scale: f64, tol: f64) -> Self {
        let slack = tol * 1f64.max(bound.abs()).max(scale);
        Self { condition, value, bound, passed: value <= bound + slack }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationVerdict {
    pub k: usize,
    pub checks: Vec<ConditionVerdict>,
    pub passed: bool,
}

impl IterationVerdict {
    fn new(k: usize, checks: Vec<ConditionVerdict>) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        Self { k, checks, passed }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MembershipReport {
    pub class: &'static str,
    pub iterations: Vec<IterationVerdict>,
    /// Parameter conditions that do not depend on the iteration.
    pub global: Vec<ConditionVerdict>,
    pub kappa_lambda: Option<f64>,
    /// Measured `sup λ_k / ‖s_k‖^α` (at least 1).
    pub kappa_bar: Option<f64>,
    pub passed: bool,
    pub first_violation: Option<usize>,
    pub first_violated: Option<Condition>,
}

impl MembershipReport {
    fn assemble(
        class: &'static str,
        iterations: Vec<IterationVerdict>,
        global: Vec<ConditionVerdict>,
        kappa_lambda: Option<f64>,
        kappa_bar: Option<f64>,
    ) -> Self {
        let first = iterations.iter().find(|v| !v.passed);
        let first_violation = first.map(|v| v.k);
        let first_violated = first.and_then(|v| v.checks.iter().find(|c| !c.passed)).map(|c| c.condition);
        let passed = first.is_none() && global.iter().all(|c| c.passed);
        Self { class, iterations, global, kappa_lambda, kappa_bar, passed, first_violation, first_violated }
    }

    /// Verdicts of one condition across all iterations.
    pub fn condition_passed(&self, condition: Condition) -> bool {
        self.iterations
            .iter()
            .flat_map(|v| v.checks.iter())
            .chain(self.global.iter())
            .filter(|c| c.condition == condition)
            .all(|c| c.passed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KappaLambda {
    Fixed(f64),
    /// `2 κ̄^{1/(1+α)} (1 + κ_rg)` with `κ̄ = max(1, sup_k λ_k / ‖s_k‖^α)`
    /// measured on the trace.
    FromTrace,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MAlphaParams {
    pub kappa_rg: f64,
    pub kappa_rs: f64,
    pub kappa_lambda: KappaLambda,
    pub kappa_s: f64,
    /// Relative slack on every inequality.
    pub tolerance: f64,
}

impl Default for MAlphaParams {
    fn default() -> Self {
        Self { kappa_rg: 0.0, kappa_rs: 1.0, kappa_lambda: KappaLambda::FromTrace, kappa_s: 1.0, tolerance: 1e-10 }
    }
}

fn complete(rec: &StepRecord) -> Result<(f64, Vector)> {
    let lambda = rec
        .multiplier
        .ok_or_else(|| Error::IncompleteTrace(format!("iteration {} has no multiplier M_k", rec.k)))?;
    let residual =
        rec.residual.ok_or_else(|| Error::IncompleteTrace(format!("iteration {} has no residual r_k", rec.k)))?;
    Ok((lambda, residual))
}

/// `sup λ_k / ‖s_k‖^α` over steps with `s_k ≠ 0`, floored at 1.
pub fn measured_kappa_bar(trace: &ClassTrace, alpha: f64) -> Result<f64> {
    let mut bar: f64 = 1.0;
    for rec in &trace.records {
        let (lambda, _) = complete(rec)?;
        let snorm = rec.step.norm();
        if snorm > 0.0 {
            bar = bar.max(lambda / snorm.powf(alpha));
        }
    }
    Ok(bar)
}

pub fn check_malpha_membership(trace: &ClassTrace, alpha: f64, params: &MAlphaParams) -> Result<MembershipReport> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidInput(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let (kappa_lambda, kappa_bar) = match params.kappa_lambda {
        KappaLambda::Fixed(v) => (v, None),
        KappaLambda::FromTrace => {
            let bar = measured_kappa_bar(trace, alpha)?;
            (2.0 * bar.powf(1.0 / (1.0 + alpha)) * (1.0 + params.kappa_rg), Some(bar))
        }
    };
    let tol = params.tolerance;
    let power = alpha / (1.0 + alpha);

    let mut iterations = Vec::with_capacity(trace.records.len());
    for rec in &trace.records {
        let (lambda, residual) = complete(rec)?;
        let gnorm = rec.g.norm();
        let snorm = rec.step.norm();
        let hmin = rec.h.min_eigenvalue();

        let rbound = (params.kappa_rg * gnorm).min(params.kappa_rs * lambda.abs() * snorm);
        let residual_check = ConditionVerdict::le(Condition::Residual, residual.norm(), rbound, gnorm, tol);
        // Both parts as one quantity: the most negative of λ_min(M) and λ_min(H + M).
        let curvature =
            ConditionVerdict::le(Condition::Curvature, -lambda.min(hmin + lambda), 0.0, hmin.abs(), tol);
        let multiplier = ConditionVerdict::le(
            Condition::Multiplier,
            hmin + lambda,
            kappa_lambda * hmin.abs().max(gnorm.powf(power)),
            0.0,
            tol,
        );
        let step_bound = ConditionVerdict::le(Condition::StepBound, snorm, params.kappa_s, 0.0, tol);
        iterations.push(IterationVerdict::new(rec.k, vec![residual_check, curvature, multiplier, step_bound]));
    }
    Ok(MembershipReport::assemble("malpha", iterations, Vec::new(), Some(kappa_lambda), kappa_bar))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrsParams {
    pub sigma_bar: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa_rg: f64,
    pub eta: f64,
    pub tolerance: f64,
}

impl CrsParams {
    pub fn new(sigma_bar: f64, kappa_rg: f64, eta: f64) -> Self {
        Self { sigma_bar, kappa1: 0.0, kappa2: 0.0, kappa_rg, eta, tolerance: 1e-10 }
    }
}

/// Checks the CRS_a conditions. The regularization thresholds are taken at
/// their reset values `σ^L = 0`, `σ^U = σ̄`.
pub fn check_crs_membership(trace: &ClassTrace, params: &CrsParams) -> Result<MembershipReport> {
    let tol = params.tolerance;
    let (sigma_lo, sigma_hi) = (0.0, params.sigma_bar);
    let mut iterations = Vec::with_capacity(trace.records.len());
    for rec in &trace.records {
        let (lambda, residual) = complete(rec)?;
        let decrease = rec
            .actual_decrease
            .ok_or_else(|| Error::IncompleteTrace(format!("iteration {} has no objective decrease", rec.k)))?;
        let gnorm = rec.g.norm();
        let snorm = rec.step.norm();
        let s = &rec.step;

        // Lower and upper bounds folded into one "distance outside" value.
        let outside = (sigma_lo * snorm - lambda).max(lambda - sigma_hi * snorm);
        let lambda_bounds = ConditionVerdict::le(Condition::LambdaBounds, outside, 0.0, lambda.abs(), tol);
        let curvature = rec.h.shifted(lambda).quad_form(s);
        let slope = ConditionVerdict::le(
            Condition::Slope,
            s.dot(&residual),
            0.5 * curvature + 0.5 * params.kappa1 * snorm.powi(3),
            gnorm * snorm,
            tol,
        );
        let rbound = (params.kappa_rg * gnorm).min(lambda * snorm + params.kappa2 * snorm * snorm);
        let accurate = ConditionVerdict::le(Condition::AccurateResidual, residual.norm(), rbound, gnorm, tol);
        let rho = decrease / snorm.powi(3);
        // Acceptance must agree with the ratio test.
        let agrees = rec.success == (rho >= params.eta);
        let rho_check = ConditionVerdict {
            condition: Condition::Rho,
            value: rho,
            bound: params.eta,
            passed: agrees,
        };
        iterations.push(IterationVerdict::new(rec.k, vec![lambda_bounds, slope, accurate, rho_check]));
    }
    let eta_value = 2.0 * params.eta * (1.0 + params.kappa_rg).powi(3);
    let eta = ConditionVerdict { condition: Condition::EtaCondition, value: eta_value, bound: 1.0, passed: eta_value <= 1.0 };
    Ok(MembershipReport::assemble("crs_a", iterations, vec![eta], None, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{gen_crs, gen_malpha, gen_sd, CrsConfig, MAlphaConfig};

    #[test]
    fn newton_ground_truth_passes() {
        let (_, gt) = gen_malpha(&MAlphaConfig::new(0.25, 1.0)).unwrap();
        let trace = ClassTrace::from(&gt);
        assert_eq!(trace.records.len(), 8);
        let report = check_malpha_membership(&trace, 1.0, &MAlphaParams::default()).unwrap();
        assert!(report.passed, "{report:?}");
        assert_eq!(report.kappa_bar, Some(1.0));
    }

    #[test]
    fn injected_multiplier_is_located() {
        let (_, gt) = gen_malpha(&MAlphaConfig::new(0.25, 1.0)).unwrap();
        let mut trace = ClassTrace::from(&gt);
        let kappa = 2.0;
        let rec = &mut trace.records[3];
        let scale = rec.h.min_eigenvalue().abs().max(rec.g.norm().sqrt());
        rec.multiplier = Some(10.0 * kappa * scale);
        let params = MAlphaParams { kappa_lambda: KappaLambda::Fixed(kappa), ..MAlphaParams::default() };
        let report = check_malpha_membership(&trace, 1.0, &params).unwrap();
        assert!(!report.passed);
        assert_eq!(report.first_violation, Some(3));
        assert_eq!(report.first_violated, Some(Condition::Multiplier));
    }

    #[test]
    fn missing_multiplier_is_incomplete() {
        let (_, gt) = gen_sd(0.2).unwrap();
        let err = check_malpha_membership(&ClassTrace::from(&gt), 0.0, &MAlphaParams::default()).unwrap_err();
        assert!(matches!(err, Error::IncompleteTrace(_)));
    }

    #[test]
    fn crs_ground_truth_and_eta() {
        let (_, gt) = gen_crs(&CrsConfig::new(0.25, 1.0, 0.0, 0.5)).unwrap();
        let trace = ClassTrace::from(&gt);
        let report = check_crs_membership(&trace, &CrsParams::new(1.0, 0.0, 0.5)).unwrap();
        assert!(report.passed, "{report:?}");
        let report = check_crs_membership(&trace, &CrsParams::new(1.0, 0.0, 0.7)).unwrap();
        assert!(!report.passed);
        assert!(!report.condition_passed(Condition::EtaCondition));
        assert_eq!(report.first_violation, None);
    }

    #[test]
    fn crs_accurate_residual_violation() {
        let (_, gt) = gen_crs(&CrsConfig::new(0.25, 1.0, 0.0, 0.5)).unwrap();
        let mut trace = ClassTrace::from(&gt);
        let g = trace.records[2].g;
        trace.records[2].residual = Some(0.5 * g);
        let report = check_crs_membership(&trace, &CrsParams::new(1.0, 0.1, 0.3)).unwrap();
        assert_eq!(report.first_violation, Some(2));
        assert_eq!(report.first_violated, Some(Condition::AccurateResidual));
    }
}
