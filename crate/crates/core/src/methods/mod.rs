//! Reference implementations of the second-order (and steepest-descent)
//! methods, sharing one driver loop so evaluations are counted uniformly.

mod steps;
pub mod subproblem;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{SymMatrix, Vector};
use crate::numeric::gradient_converged;
use crate::objective::{Evaluation, Objective};

pub use steps::{
    gqt_multiplier, goldstein_verdict, newton_step, reg_step_bound, rw_direction, rw_sufficient_decrease,
    tr_update_radius, Direction, DirectionKind, GoldsteinVerdict,
};
pub use subproblem::{solve_reg_subproblem, solve_trs, SubproblemSolution};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MethodKind {
    Newton,
    Reg2Alpha,
    Gqt,
    TrustRegion,
    SdGoldstein,
    RoyerWright,
}

impl MethodKind {
    pub const ALL: [MethodKind; 6] = [
        MethodKind::Newton,
        MethodKind::Reg2Alpha,
        MethodKind::Gqt,
        MethodKind::TrustRegion,
        MethodKind::SdGoldstein,
        MethodKind::RoyerWright,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Newton => "newton",
            MethodKind::Reg2Alpha => "reg2alpha",
            MethodKind::Gqt => "gqt",
            MethodKind::TrustRegion => "trust_region",
            MethodKind::SdGoldstein => "sd_goldstein",
            MethodKind::RoyerWright => "royer_wright",
        }
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodKind::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonParams {
    /// Multiplier `λ_k = shift · ‖g_k‖^{α/(1+α)}`; zero gives pure Newton.
    pub shift: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegParams {
    pub sigma0: f64,
    pub sigma_min: f64,
    pub eta1: f64,
    pub gamma_inc: f64,
    pub gamma_dec: f64,
    /// Gradient Lipschitz constant used in the step-length bound; `None`
    /// uses `‖H_k‖`, which gives a tighter bound at every iteration.
    pub lipschitz_gradient: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GqtParams {
    pub omega0: f64,
    pub omega_min: f64,
    pub gamma1: f64,
    pub eta1: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrustRegionParams {
    pub delta0: f64,
    pub delta_max: f64,
    pub eta: f64,
    /// Expansion factor after very successful boundary steps.
    pub gamma1: f64,
    /// Contraction factor after rejected steps.
    pub gamma2: f64,
}

/// First stepsize tried by the Goldstein linesearch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialStep {
    /// Always start from `μ = 1`.
    Unit,
    /// Start from `first` at the first iteration, then from the quadratic
    /// interpolation estimate `2 (f_{k-1} - f_k) / ‖g_k‖²`.
    Interpolated { first: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GoldsteinParams {
    pub mu1: f64,
    pub mu2: f64,
    pub initial: InitialStep,
    pub max_trials: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoyerWrightParams {
    /// Curvature threshold; `None` means `√eps`.
    pub eps_h: Option<f64>,
    pub eta: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// Reject configurations with `eps_h > √eps`.
    pub enforce_eps_h_bound: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MethodConfig {
    pub method: MethodKind,
    /// Gradient-norm termination tolerance.
    pub eps: f64,
    pub budget: usize,
    pub alpha: f64,
    pub newton: NewtonParams,
    pub reg: RegParams,
    pub gqt: GqtParams,
    pub trust_region: TrustRegionParams,
    pub goldstein: GoldsteinParams,
    pub royer_wright: RoyerWrightParams,
}

impl MethodConfig {
    pub fn new(method: MethodKind, eps: f64) -> Self {
        Self {
            method,
            eps,
            budget: 100_000,
            alpha: 1.0,
            newton: NewtonParams { shift: 0.0 },
            reg: RegParams {
                sigma0: 1.0,
                sigma_min: 1e-8,
                eta1: 0.01,
                gamma_inc: 2.0,
                gamma_dec: 2.0,
                lipschitz_gradient: None,
            },
            gqt: GqtParams { omega0: 1.0, omega_min: 1e-4, gamma1: 2.0, eta1: 0.01 },
            trust_region: TrustRegionParams { delta0: 1.0, delta_max: 10.0, eta: 0.01, gamma1: 2.0, gamma2: 0.5 },
            goldstein: GoldsteinParams { mu1: 0.9, mu2: 0.1, initial: InitialStep::Unit, max_trials: 60 },
            royer_wright: RoyerWrightParams {
                eps_h: None,
                eta: 1.0,
                backtrack: 0.5,
                max_backtracks: 60,
                enforce_eps_h_bound: true,
            },
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn eps_h(&self) -> f64 {
        self.royer_wright.eps_h.unwrap_or_else(|| self.eps.sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha must lie in [0, 1], got {}", self.alpha));
        }
        match self.method {
            MethodKind::Newton => {
                if !(self.newton.shift >= 0.0) || !self.newton.shift.is_finite() {
                    return bad(format!("newton shift must be non-negative, got {}", self.newton.shift));
                }
            }
            MethodKind::Reg2Alpha => {
                let p = &self.reg;
                if !(p.sigma_min > 0.0) {
                    return bad(format!("sigma_min must be positive, got {}", p.sigma_min));
                }
                if !(p.sigma0 >= p.sigma_min) {
                    return bad(format!("sigma0 = {} is below sigma_min = {}", p.sigma0, p.sigma_min));
                }
                if !(p.eta1 > 0.0 && p.eta1 < 1.0) {
                    return bad(format!("eta1 must lie in (0, 1), got {}", p.eta1));
                }
                if !(p.gamma_inc > 1.0) || !(p.gamma_dec >= 1.0) {
                    return bad("need gamma_inc > 1 and gamma_dec >= 1".into());
                }
            }
            MethodKind::Gqt => {
                let p = &self.gqt;
                if self.alpha == 0.0 {
                    return bad("gqt needs alpha in (0, 1]".into());
                }
                if !(p.omega_min > 0.0) || !(p.omega0 >= p.omega_min) {
                    return bad(format!("need 0 < omega_min <= omega0, got {} and {}", p.omega_min, p.omega0));
                }
                if !(p.gamma1 > 1.0) {
                    return bad(format!("gamma1 must exceed 1, got {}", p.gamma1));
                }
                if !(p.eta1 > 0.0 && p.eta1 < 1.0) {
                    return bad(format!("eta1 must lie in (0, 1), got {}", p.eta1));
                }
            }
            MethodKind::TrustRegion => {
                let p = &self.trust_region;
                if !(p.delta0 > 0.0) || !(p.delta0 <= p.delta_max) {
                    return bad(format!("need 0 < delta0 <= delta_max, got {} and {}", p.delta0, p.delta_max));
                }
                if !(p.eta > 0.0 && p.eta < 1.0) {
                    return bad(format!("eta must lie in (0, 1), got {}", p.eta));
                }
                if !(p.gamma1 >= 1.0) || !(p.gamma2 > 0.0 && p.gamma2 < 1.0) {
                    return bad("need gamma1 >= 1 and gamma2 in (0, 1)".into());
                }
            }
            MethodKind::SdGoldstein => {
                let p = &self.goldstein;
                if !(0.0 < p.mu2 && p.mu2 < 0.5 && 0.5 < p.mu1 && p.mu1 < 1.0) {
                    return bad(format!("need 0 < mu2 < 1/2 < mu1 < 1, got mu1 = {}, mu2 = {}", p.mu1, p.mu2));
                }
                if let InitialStep::Interpolated { first } = p.initial {
                    if !(first > 0.0) {
                        return bad(format!("initial stepsize must be positive, got {first}"));
                    }
                }
            }
            MethodKind::RoyerWright => {
                let p = &self.royer_wright;
                let eps_h = self.eps_h();
                if !(eps_h > 0.0) {
                    return bad(format!("eps_h must be positive, got {eps_h}"));
                }
                if p.enforce_eps_h_bound && eps_h > self.eps.sqrt() {
                    return bad(format!("eps_h = {eps_h} exceeds sqrt(eps) = {}", self.eps.sqrt()));
                }
                if !(p.eta > 0.0) || !(p.backtrack > 0.0 && p.backtrack < 1.0) {
                    return bad("need eta > 0 and backtrack factor in (0, 1)".into());
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TerminationReason {
    GradientTolerance,
    Budget,
    Failure,
}

impl TerminationReason {
    pub fn name(self) -> &'static str {
        match self {
            TerminationReason::GradientTolerance => "gradient-tolerance",
            TerminationReason::Budget => "budget",
            TerminationReason::Failure => "failure",
        }
    }
}

/// One iteration: the state at `x_k` and the trial step taken from it.
#[derive(Clone, Copy, Debug)]
pub struct IterationRecord {
    pub k: usize,
    pub x: Vector,
    pub f: f64,
    pub g: Vector,
    pub h: SymMatrix,
    /// Scalar `λ_k` with `M_k = λ_k I`; `None` for methods without one.
    pub multiplier: Option<f64>,
    /// Adaptive parameter in force: σ_k, ω_k, Δ_k or the accepted μ_k.
    pub parameter: Option<f64>,
    pub step: Vector,
    /// `r_k = (H_k + M_k) s_k + g_k`.
    pub residual: Vector,
    pub model_decrease: f64,
    pub actual_decrease: f64,
    pub rho: f64,
    pub success: bool,
    pub negative_curvature: bool,
}

#[derive(Clone, Debug)]
pub struct IterateTrace {
    pub method: MethodKind,
    pub tolerance: f64,
    pub records: Vec<IterationRecord>,
    pub final_point: Evaluation,
    pub final_x: Vector,
    pub termination_index: usize,
    pub reason: TerminationReason,
    /// Objective evaluations at trial points (the starting point excluded).
    pub evaluations: usize,
    pub failure: Option<String>,
}

impl IterateTrace {
    pub fn final_gradient_norm(&self) -> f64 {
        self.final_point.gradient.norm()
    }

    pub fn successful_iterations(&self) -> usize {
        self.records.iter().filter(|r| r.success).count()
    }

    /// Accepted iterates `x_0, x_1, ...` including the final point.
    pub fn iterates(&self) -> Vec<Vector> {
        let mut xs: Vec<Vector> = self.records.iter().filter(|r| r.success).map(|r| r.x).collect();
        if let Some(first) = self.records.first() {
            if !first.success {
                xs.insert(0, first.x);
            }
        }
        if xs.is_empty() || xs.last() != Some(&self.final_x) {
            xs.push(self.final_x);
        }
        xs
    }
}

/// Counts objective evaluations at trial points.
pub(crate) struct Oracle<'a> {
    objective: &'a dyn Objective,
    pub(crate) evaluations: usize,
}

impl Oracle<'_> {
    pub(crate) fn value(&mut self, x: &Vector) -> Result<f64> {
        self.evaluations += 1;
        self.objective.value(x)
    }
}

/// What a method proposes at one iteration.
pub(crate) struct Proposal {
    pub step: Vector,
    pub multiplier: Option<f64>,
    pub parameter: Option<f64>,
    pub model_decrease: f64,
    pub trial_value: f64,
    pub rho: f64,
    pub success: bool,
    pub negative_curvature: bool,
    /// Set when the method cannot continue after this record.
    pub failure: Option<String>,
}

pub(crate) struct Iterate<'a> {
    pub k: usize,
    pub x: &'a Vector,
    pub eval: &'a Evaluation,
    /// Value at the previously accepted iterate, if any.
    pub previous_value: Option<f64>,
}

/// Runs `cfg.method` from `x0` until `‖g‖ ≤ eps`, the budget runs out, or
/// the method fails.
pub fn run(cfg: &MethodConfig, obj: &dyn Objective, x0: &Vector) -> Result<IterateTrace> {
    cfg.validate()?;
    if x0.dim() != obj.dim() {
        return Err(Error::DimensionMismatch { expected: obj.dim(), found: x0.dim() });
    }
    let mut stepper = steps::Stepper::start(cfg);
    let mut oracle = Oracle { objective: obj, evaluations: 0 };
    let mut x = *x0;
    let mut eval = obj.evaluate(&x)?;
    let mut previous_value = None;
    let mut records = Vec::new();
    let mut failure = None;

    let reason = loop {
        let k = records.len();
        if gradient_converged(eval.gradient.norm(), cfg.eps) {
            break TerminationReason::GradientTolerance;
        }
        if k >= cfg.budget {
            break TerminationReason::Budget;
        }
        let p = stepper.propose(&Iterate { k, x: &x, eval: &eval, previous_value }, &mut oracle)?;
        let lambda = p.multiplier.unwrap_or(0.0);
        let residual = eval.hessian.shifted(lambda).mul_vec(&p.step) + eval.gradient;
        let actual_decrease = eval.value - p.trial_value;
        let success = p.success && actual_decrease > 0.0 && p.failure.is_none();
        records.push(IterationRecord {
            k,
            x,
            f: eval.value,
            g: eval.gradient,
            h: eval.hessian,
            multiplier: p.multiplier,
            parameter: p.parameter,
            step: p.step,
            residual,
            model_decrease: p.model_decrease,
            actual_decrease,
            rho: p.rho,
            success,
            negative_curvature: p.negative_curvature,
        });
        if let Some(msg) = p.failure {
            failure = Some(msg);
            break TerminationReason::Failure;
        }
        if p.success && !success {
            failure = Some(format!("accepted step at k={k} does not decrease the objective"));
            break TerminationReason::Failure;
        }
        if success {
            previous_value = Some(eval.value);
            x = x + p.step;
            eval = obj.evaluate(&x)?;
        }
    };

    Ok(IterateTrace {
        method: cfg.method,
        tolerance: cfg.eps,
        termination_index: records.len(),
        records,
        final_point: eval,
        final_x: x,
        reason,
        evaluations: oracle.evaluations,
        failure,
    })
}
