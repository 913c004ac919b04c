//! Adversarial objective families and the iterate sequences they force.
//!
//! Each generator fixes the values, gradients and Hessians a method must see
//! along its iterates, chooses admissible steps between them, and
//! interpolates the resulting knots with quintic Hermite segments.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::hermite::{Knot, PiecewiseObjective};
use crate::linalg::{SymMatrix, Vector};
use crate::methods::solve_reg_subproblem;
use crate::numeric::{ceil_power, check_alpha, check_eps, gradient_converged, within, REL_SLACK};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    MAlpha,
    Newton2d,
    SteepestDescent,
    Crs,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::MAlpha, Family::Newton2d, Family::SteepestDescent, Family::Crs];

    pub fn name(self) -> &'static str {
        match self {
            Family::MAlpha => "malpha",
            Family::Newton2d => "newton2d",
            Family::SteepestDescent => "sd",
            Family::Crs => "crs",
        }
    }

    /// Smoothness exponent the family is built for; only `MAlpha` takes
    /// it from the caller.
    pub fn effective_alpha(self, alpha: f64) -> f64 {
        match self {
            Family::MAlpha => alpha,
            Family::Newton2d | Family::SteepestDescent => 0.0,
            Family::Crs => 1.0,
        }
    }

    /// Number of iterations the family forces.
    pub fn predicted_iterations(self, eps: f64, alpha: f64) -> Result<usize> {
        predict_iterations(eps, self.effective_alpha(alpha))
    }

    /// Gradient-norm threshold at which the family's iterations stop.
    pub fn termination_tolerance(self, eps: f64) -> f64 {
        match self {
            Family::Newton2d => eps * (1.0 + eps * eps).sqrt(),
            _ => eps,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown family `{s}`")))
    }
}

/// How the step length is chosen once the multiplier is known.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ThetaRule {
    /// Solve `(H_k + λ_k) s_k = -g_k` exactly, i.e. `r_k = 0`.
    ExactSolve,
    /// Fix `θ_k`, so `s_k = θ ε^{1/(1+α)} / (2 f_k)`.
    Constant(f64),
}

/// Multiplier `λ_k` attached to each generated step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LambdaRule {
    /// Plain Newton steps.
    Zero,
    /// `λ_k = scale · |g_k|^{α/(1+α)}`.
    GradientPower { scale: f64 },
    /// `λ_k = σ |s_k|^α`, the multiplier of a (2+α)-regularized model with
    /// fixed weight σ.
    Regularization { sigma: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MAlphaConfig {
    pub eps: f64,
    pub alpha: f64,
    pub kappa_rg: f64,
    pub kappa_lambda: f64,
    pub theta_rule: ThetaRule,
    pub lambda_rule: LambdaRule,
}

impl MAlphaConfig {
    /// Newton steps (`λ_k = 0`, `r_k = 0`) with `κ_rg = 0`, `κ_λ = 2`.
    pub fn new(eps: f64, alpha: f64) -> Self {
        Self {
            eps,
            alpha,
            kappa_rg: 0.0,
            kappa_lambda: 2.0,
            theta_rule: ThetaRule::ExactSolve,
            lambda_rule: LambdaRule::Zero,
        }
    }

    /// Shifted Newton steps with `λ_k = |g_k|^{α/(1+α)} / 10`.
    pub fn figure_preset(eps: f64, alpha: f64) -> Self {
        Self { lambda_rule: LambdaRule::GradientPower { scale: 0.1 }, ..Self::new(eps, alpha) }
    }

    /// Steps of a (2+α)-regularization method with fixed weight `sigma`.
    pub fn regularization_preset(eps: f64, alpha: f64, sigma: f64) -> Self {
        Self { lambda_rule: LambdaRule::Regularization { sigma }, ..Self::new(eps, alpha) }
    }

    pub fn validate(&self) -> Result<()> {
        check_eps(self.eps)?;
        check_alpha(self.alpha)?;
        if !(0.0..1.0).contains(&self.kappa_rg) {
            return Err(Error::InvalidConfig(format!("kappa_rg must lie in [0, 1), got {}", self.kappa_rg)));
        }
        if !(self.kappa_lambda > 1.0) || !self.kappa_lambda.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "kappa_lambda must exceed 1, got {}",
                self.kappa_lambda
            )));
        }
        match self.lambda_rule {
            LambdaRule::GradientPower { scale } if !(scale >= 0.0) || !scale.is_finite() => {
                Err(Error::InvalidConfig(format!("lambda scale must be non-negative, got {scale}")))
            }
            LambdaRule::Regularization { sigma } if !(sigma > 0.0) || !sigma.is_finite() => {
                Err(Error::InvalidConfig(format!("sigma must be positive, got {sigma}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NuRule {
    /// `s^u_k = -g^u_k / H^u_k`, which gives `ν_k = 1`.
    Newton,
    Constant(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Newton2dConfig {
    pub eps: f64,
    pub kappa_rg: f64,
    pub nu_rule: NuRule,
}

impl Newton2dConfig {
    pub fn new(eps: f64) -> Self {
        Self { eps, kappa_rg: 0.0, nu_rule: NuRule::Newton }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrsConfig {
    pub eps: f64,
    pub sigma_bar: f64,
    pub kappa_rg: f64,
    pub eta: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    /// `λ_k = lambda_fraction · σ̄ · |s_k|`, a point of the admissible range.
    pub lambda_fraction: f64,
    pub theta_rule: ThetaRule,
}

impl CrsConfig {
    pub fn new(eps: f64, sigma_bar: f64, kappa_rg: f64, eta: f64) -> Self {
        Self {
            eps,
            sigma_bar,
            kappa_rg,
            eta,
            kappa1: 0.0,
            kappa2: 0.0,
            lambda_fraction: 0.0,
            theta_rule: ThetaRule::ExactSolve,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_eps(self.eps)?;
        if !(self.sigma_bar > 0.0) || !self.sigma_bar.is_finite() {
            return Err(Error::InvalidConfig(format!("sigma_bar must be positive, got {}", self.sigma_bar)));
        }
        if !(0.0..1.0).contains(&self.kappa_rg) {
            return Err(Error::InvalidConfig(format!("kappa_rg must lie in [0, 1), got {}", self.kappa_rg)));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::InvalidConfig(format!("eta must lie in (0, 1), got {}", self.eta)));
        }
        if !(self.kappa1 >= 0.0) || !(self.kappa2 >= 0.0) {
            return Err(Error::InvalidConfig("kappa1 and kappa2 must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda_fraction) {
            return Err(Error::InvalidConfig(format!(
                "lambda_fraction must lie in [0, 1], got {}",
                self.lambda_fraction
            )));
        }
        let lhs = 2.0 * self.eta * (1.0 + self.kappa_rg).powi(3);
        if lhs > 1.0 {
            return Err(Error::InvalidConfig(format!(
                "2 eta (1 + kappa_rg)^3 = {lhs} exceeds 1"
            )));
        }
        Ok(())
    }
}

/// Step taken from a knot to the next one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepData {
    /// Multiplier `λ_k`; `None` for steepest descent.
    pub lambda: Option<f64>,
    /// Step scaling `θ_k` (`ν_k` for the second coordinate of the 2-D
    /// family, the stepsize `μ_k` for steepest descent).
    pub theta: f64,
    pub s: f64,
    /// `r_k = (H_k + λ_k) s_k + g_k`; `None` for steepest descent.
    pub residual: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroundTruthRecord {
    pub k: usize,
    pub x: f64,
    pub f: f64,
    pub g: f64,
    pub h: f64,
    /// `None` at the terminal knot.
    pub step: Option<StepData>,
}

/// The knot sequence a method is forced through, one record per iterate
/// `k = 0..=k_target`. A 2-D family stores its second coordinate in
/// `partner`.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruthTrace {
    pub family: Family,
    pub eps: f64,
    pub alpha: f64,
    pub tolerance: f64,
    pub k_target: usize,
    pub records: Vec<GroundTruthRecord>,
    pub partner: Option<Box<GroundTruthTrace>>,
}

impl GroundTruthTrace {
    pub fn knots(&self) -> Vec<Knot> {
        self.records.iter().map(|r| Knot::new(r.x, r.f, r.g, r.h)).collect()
    }

    /// Gradient norm at iterate `k`, combining both coordinates in 2-D.
    pub fn gradient_norm(&self, k: usize) -> f64 {
        let gx = self.records[k].g;
        match &self.partner {
            Some(p) => gx.hypot(p.records[k].g),
            None => gx.abs(),
        }
    }

    pub fn final_gradient_norm(&self) -> f64 {
        self.gradient_norm(self.k_target)
    }

    /// Smallest decrease ratio `(f_k - f_{k+1}) / (f_k - m_k(s_k))` over all
    /// steps, with `m_k(s) = f_k + g_k s + ½ s (H_k + β λ_k) s` evaluated at
    /// both extremes `β = 0` and `β = 1`.
    pub fn min_decrease_ratio(&self) -> f64 {
        self.records
            .windows(2)
            .filter_map(|w| {
                let (cur, next) = (&w[0], &w[1]);
                let step = cur.step?;
                let lambda = step.lambda.unwrap_or(0.0);
                let actual = cur.f - next.f;
                let ratio = |beta: f64| {
                    let predicted = -(cur.g * step.s + 0.5 * step.s * (cur.h + beta * lambda) * step.s);
                    actual / predicted
                };
                Some(ratio(0.0).min(ratio(1.0)))
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn check_termination(&self) -> Result<()> {
        for k in 0..=self.k_target {
            let converged = gradient_converged(self.gradient_norm(k), self.tolerance);
            if converged != (k == self.k_target) {
                return Err(Error::InvariantViolation(format!(
                    "{} trace: gradient norm {} at k={k} is {} the tolerance {}",
                    self.family,
                    self.gradient_norm(k),
                    if converged { "within" } else { "above" },
                    self.tolerance
                )));
            }
        }
        Ok(())
    }
}

/// `⌈eps^{-(2+α)/(1+α)}⌉`.
pub fn predict_iterations(eps: f64, alpha: f64) -> Result<usize> {
    check_eps(eps)?;
    check_alpha(alpha)?;
    Ok(ceil_power(eps, (2.0 + alpha) / (1.0 + alpha)))
}

/// Values `f_k = 1 - ½ k ε^{(2+α)/(1+α)}`, `g_k = -2 ε f_k`,
/// `H_k = 4 ε^{α/(1+α)} f_k²`.
#[derive(Clone, Copy)]
struct MAlphaSequence {
    eps: f64,
    decrement: f64,
    curvature: f64,
}

impl MAlphaSequence {
    fn new(eps: f64, alpha: f64) -> Self {
        Self {
            eps,
            decrement: eps.powf((2.0 + alpha) / (1.0 + alpha)),
            curvature: eps.powf(alpha / (1.0 + alpha)),
        }
    }

    fn at(&self, k: usize) -> (f64, f64, f64) {
        let f = 1.0 - 0.5 * k as f64 * self.decrement;
        (f, -2.0 * self.eps * f, 4.0 * self.curvature * f * f)
    }
}

fn build_records(
    k_target: usize,
    values: impl Fn(usize) -> (f64, f64, f64),
    mut step: impl FnMut(usize, f64, f64, f64) -> Result<StepData>,
) -> Result<Vec<GroundTruthRecord>> {
    let mut records = Vec::with_capacity(k_target + 1);
    let mut x = 0.0;
    for k in 0..=k_target {
        let (f, g, h) = values(k);
        let data = if k < k_target { Some(step(k, f, g, h)?) } else { None };
        records.push(GroundTruthRecord { k, x, f, g, h, step: data });
        if let Some(d) = data {
            x += d.s;
        }
    }
    Ok(records)
}

fn inconsistency(k: usize, quantity: &'static str, value: f64, lo: f64, hi: f64) -> Error {
    Error::GeneratorInconsistency { k, quantity, value, lo, hi }
}

fn require(k: usize, quantity: &'static str, value: f64, lo: f64, hi: f64) -> Result<()> {
    if within(value, lo, hi) {
        Ok(())
    } else {
        Err(inconsistency(k, quantity, value, lo, hi))
    }
}

/// `|r| ≤ bound`, with rounding slack relative to `|g|`.
fn require_residual(k: usize, r: f64, bound: f64, g: f64) -> Result<()> {
    if r.abs() <= bound + REL_SLACK * g.abs() {
        Ok(())
    } else {
        Err(inconsistency(k, "residual", r.abs(), 0.0, bound))
    }
}

pub fn gen_malpha(cfg: &MAlphaConfig) -> Result<(PiecewiseObjective, GroundTruthTrace)> {
    let trace = malpha_trace(cfg, Family::MAlpha)?;
    let objective = PiecewiseObjective::prolongated(&trace.knots())?;
    Ok((objective, trace))
}

fn malpha_trace(cfg: &MAlphaConfig, family: Family) -> Result<GroundTruthTrace> {
    cfg.validate()?;
    let (eps, alpha) = (cfg.eps, cfg.alpha);
    let k_target = predict_iterations(eps, alpha)?;
    let seq = MAlphaSequence::new(eps, alpha);
    let power = alpha / (1.0 + alpha);
    let step_scale = eps.powf(1.0 / (1.0 + alpha));
    let theta_lo = (1.0 - cfg.kappa_rg) / cfg.kappa_lambda;
    let theta_hi = 1.0 + cfg.kappa_rg;

    let records = build_records(k_target, |k| seq.at(k), |k, f, g, h| {
        let lambda_hi = 4.0 * (cfg.kappa_lambda - 1.0) * seq.curvature * f * f;
        let multiplier = |s: f64| match cfg.lambda_rule {
            LambdaRule::Zero => 0.0,
            LambdaRule::GradientPower { scale } => scale * g.abs().powf(power),
            LambdaRule::Regularization { sigma } => sigma * s.abs().powf(alpha),
        };
        let (lambda, s) = match cfg.theta_rule {
            ThetaRule::ExactSolve => {
                let lambda = match cfg.lambda_rule {
                    LambdaRule::Regularization { sigma } => {
                        solve_reg_subproblem(&Vector::new1(g), &SymMatrix::new1(h), sigma, alpha)?.lambda
                    }
                    _ => multiplier(0.0),
                };
                (lambda, -g / (h + lambda))
            }
            ThetaRule::Constant(theta) => {
                let s = theta * step_scale / (2.0 * f);
                (multiplier(s), s)
            }
        };
        require(k, "lambda", lambda, 0.0, lambda_hi)?;
        let theta = s * 2.0 * f / step_scale;
        require(k, "theta", theta, theta_lo, theta_hi)?;
        let residual = (h + lambda) * s + g;
        require_residual(k, residual, cfg.kappa_rg * g.abs(), g)?;
        Ok(StepData { lambda: Some(lambda), theta, s, residual: Some(residual) })
    })?;

    let trace = GroundTruthTrace {
        family,
        eps,
        alpha,
        tolerance: eps,
        k_target,
        records,
        partner: None,
    };
    trace.check_termination()?;
    let ratio_floor = 1.0 / ((1.0 + cfg.kappa_rg).powi(2) * cfg.kappa_lambda);
    let ratio = trace.min_decrease_ratio();
    if !(ratio >= ratio_floor * (1.0 - REL_SLACK)) {
        return Err(Error::InvariantViolation(format!(
            "decrease ratio {ratio} below {ratio_floor}"
        )));
    }
    Ok(trace)
}

/// Separable objective `f^{M.0}(x) + u(y)` on which Newton needs
/// `⌈ε^{-2}⌉` iterations to reach `‖∇h‖ ≤ ε √(1+ε²)`.
pub fn gen_newton2d(cfg: &Newton2dConfig) -> Result<(PiecewiseObjective, GroundTruthTrace)> {
    let eps = cfg.eps;
    check_eps(eps)?;
    if !(0.0..1.0).contains(&cfg.kappa_rg) {
        return Err(Error::InvalidConfig(format!("kappa_rg must lie in [0, 1), got {}", cfg.kappa_rg)));
    }
    let mut x_trace = malpha_trace(&MAlphaConfig::new(eps, 0.0), Family::Newton2d)?;
    let k_target = x_trace.k_target;
    let eps2 = eps * eps;

    let y_records = build_records(
        k_target,
        |k| {
            let u = 1.0 - 0.5 * k as f64 * eps2;
            (u, -2.0 * eps2 * u, 4.0 * eps2 * u * u)
        },
        |k, u, g, h| {
            let s = match cfg.nu_rule {
                NuRule::Newton => -g / h,
                NuRule::Constant(nu) => nu / (2.0 * u),
            };
            let nu = 2.0 * u * s;
            require(k, "nu", nu, 1.0 - cfg.kappa_rg, 1.0 + cfg.kappa_rg)?;
            let residual = h * s + g;
            require_residual(k, residual, cfg.kappa_rg * g.abs(), g)?;
            Ok(StepData { lambda: Some(0.0), theta: nu, s, residual: Some(residual) })
        },
    )?;

    let tolerance = Family::Newton2d.termination_tolerance(eps);
    let y_trace = GroundTruthTrace {
        family: Family::Newton2d,
        eps,
        alpha: 0.0,
        tolerance,
        k_target,
        records: y_records,
        partner: None,
    };
    let y_objective = PiecewiseObjective::prolongated(&y_trace.knots())?;
    let objective = PiecewiseObjective::prolongated(&x_trace.knots())?.with_partner(y_objective)?;
    x_trace.tolerance = tolerance;
    x_trace.partner = Some(Box::new(y_trace));
    x_trace.check_termination()?;
    Ok((objective, x_trace))
}

/// Objective on which steepest descent with a Goldstein linesearch needs
/// `⌈ε^{-2}⌉` iterations: `f_k = 1 - ½ k ε²`, `g_k = -2 ε f_k`, `H_k = 0`,
/// stepsize `μ_k = 1/(4 f_k²)`.
pub fn gen_sd(eps: f64) -> Result<(PiecewiseObjective, GroundTruthTrace)> {
    check_eps(eps)?;
    let k_target = ceil_power(eps, 2.0);
    let eps2 = eps * eps;
    let value = |k: usize| 1.0 - 0.5 * k as f64 * eps2;
    // Value the interpolant returns at knot k: c0 + base of segment k.
    let knot_value = |k: usize| if k < k_target { (value(k) - value(k + 1)) + value(k + 1) } else { value(k) };
    let records = build_records(
        k_target,
        |k| {
            let f = value(k);
            (f, -2.0 * eps * f, 0.0)
        },
        |k, f, g, _| {
            // μ_k = 1/(4 f_k²), written for k ≥ 1 as the quadratic-interpolation
            // estimate 2 (f_{k-1} - f_k) / g_k² so that a linesearch starting
            // from that estimate reproduces the knots in floating point.
            let mu = if k == 0 { 1.0 / (4.0 * f * f) } else { 2.0 * (knot_value(k - 1) - knot_value(k)) / (g * g) };
            require(k, "mu", mu, 0.25, 1.0)?;
            Ok(StepData { lambda: None, theta: mu, s: mu * -g, residual: None })
        },
    )?;
    for w in records.windows(2) {
        let s = w[0].step.map_or(0.0, |d| d.s);
        let midpoint = w[0].f + 0.5 * w[0].g * s;
        if (w[1].f - midpoint).abs() > 1e-12 {
            return Err(Error::InvariantViolation(format!(
                "Goldstein midpoint identity fails at k={}",
                w[0].k
            )));
        }
    }
    let trace = GroundTruthTrace {
        family: Family::SteepestDescent,
        eps,
        alpha: 0.0,
        tolerance: eps,
        k_target,
        records,
        partner: None,
    };
    trace.check_termination()?;
    let objective = PiecewiseObjective::prolongated(&trace.knots())?;
    Ok((objective, trace))
}

/// Objective forcing `⌈ε^{-3/2}⌉` successful iterations on a method of the
/// accurate CRS sub-class with the given parameters.
pub fn gen_crs(cfg: &CrsConfig) -> Result<(PiecewiseObjective, GroundTruthTrace)> {
    cfg.validate()?;
    let eps = cfg.eps;
    let k_target = predict_iterations(eps, 1.0)?;
    let seq = MAlphaSequence::new(eps, 1.0);
    let step_scale = eps.sqrt();
    let theta_lo = (1.0 - cfg.kappa_rg) / (1.0 + cfg.sigma_bar * (1.0 + cfg.kappa_rg));
    let theta_hi = 1.0 + cfg.kappa_rg;
    let c = cfg.lambda_fraction * cfg.sigma_bar;

    let records = build_records(k_target, |k| seq.at(k), |k, f, g, h| {
        let s = match cfg.theta_rule {
            ThetaRule::ExactSolve if c == 0.0 => -g / h,
            // positive root of c s² + H s + g = 0
            ThetaRule::ExactSolve => 2.0 * g.abs() / (h + (h * h + 4.0 * c * g.abs()).sqrt()),
            ThetaRule::Constant(theta) => theta * step_scale / (2.0 * f),
        };
        let lambda = c * s;
        require(k, "lambda", lambda, 0.0, cfg.sigma_bar * s)?;
        let theta = s * 2.0 * f / step_scale;
        require(k, "theta", theta, theta_lo, theta_hi)?;
        let residual = (h + lambda) * s + g;
        let bound = (cfg.kappa_rg * g.abs()).min(lambda * s + cfg.kappa2 * s * s);
        require_residual(k, residual, bound, g)?;
        let slope_hi = 0.5 * s * (h + lambda) * s + 0.5 * cfg.kappa1 * s.powi(3);
        require(k, "slope", s * residual, f64::NEG_INFINITY, slope_hi)?;
        let next = seq.at(k + 1).0;
        let rho = (f - next) / s.powi(3);
        require(k, "rho", rho, cfg.eta, f64::INFINITY)?;
        Ok(StepData { lambda: Some(lambda), theta, s, residual: Some(residual) })
    })?;

    let trace = GroundTruthTrace {
        family: Family::Crs,
        eps,
        alpha: 1.0,
        tolerance: eps,
        k_target,
        records,
        partner: None,
    };
    trace.check_termination()?;
    let objective = PiecewiseObjective::prolongated(&trace.knots())?;
    Ok((objective, trace))
}

/// Generates a family with its default configuration.
pub fn generate(family: Family, eps: f64, alpha: f64) -> Result<(PiecewiseObjective, GroundTruthTrace)> {
    match family {
        Family::MAlpha => gen_malpha(&MAlphaConfig::new(eps, alpha)),
        Family::Newton2d => gen_newton2d(&Newton2dConfig::new(eps)),
        Family::SteepestDescent => gen_sd(eps),
        Family::Crs => gen_crs(&CrsConfig::new(eps, 1.0, 0.0, 0.5)),
    }
}
