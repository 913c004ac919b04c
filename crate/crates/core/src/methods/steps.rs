//! Per-method step computations and parameter updates.

use super::subproblem::{solve_reg_subproblem, solve_trs};
use super::{InitialStep, Iterate, MethodConfig, MethodKind, Oracle, Proposal};
use crate::error::{Error, Result};
use crate::linalg::{SymMatrix, Vector};

/// Step solving `(H + λI) s = -g`, defined only when `H + λI ≻ 0`.
pub fn newton_step(g: &Vector, h: &SymMatrix, lambda: f64) -> Result<Vector> {
    let shifted = h.shifted(lambda);
    let lmin = shifted.min_eigenvalue();
    if !(lmin > 0.0) {
        return Err(Error::MethodInapplicable(format!(
            "Newton system matrix is not positive definite (lambda_min = {lmin})"
        )));
    }
    shifted
        .solve(&-*g)
        .ok_or_else(|| Error::MethodInapplicable("singular Newton system".into()))
}

/// Multiplier of the Goldfeld-Quandt-Trotter shift: zero when
/// `λ_min(H) ≥ ω ‖g‖^{α/(1+α)}`, else `-λ_min(H) + ω ‖g‖^{α/(1+α)}`.
pub fn gqt_multiplier(g: &Vector, h: &SymMatrix, omega: f64, alpha: f64) -> f64 {
    let threshold = omega * g.norm().powf(alpha / (1.0 + alpha));
    let lmin = h.min_eigenvalue();
    if lmin >= threshold {
        0.0
    } else {
        threshold - lmin
    }
}

/// `max{(3(2+α) L/(4σ))^{1/α}, (3(2+α) ‖g‖/σ)^{1/(1+α)}}`. At `α = 0` the
/// first term is read as the limit of the power: 0, 1 or infinity.
pub fn reg_step_bound(gnorm: f64, lipschitz: f64, sigma: f64, alpha: f64) -> f64 {
    let c = 3.0 * (2.0 + alpha);
    let base = c * lipschitz / (4.0 * sigma);
    let first = if alpha > 0.0 {
        base.powf(1.0 / alpha)
    } else if base > 1.0 {
        f64::INFINITY
    } else if base == 1.0 {
        1.0
    } else {
        0.0
    };
    first.max((c * gnorm / sigma).powf(1.0 / (1.0 + alpha)))
}

/// Radius update: shrink by `gamma2` after a rejected step, expand by
/// `gamma1` (capped at `delta_max`) after a very successful step that hit
/// the boundary, keep it otherwise.
pub fn tr_update_radius(
    delta: f64,
    rho: f64,
    step_norm: f64,
    cfg: &super::TrustRegionParams,
) -> f64 {
    if rho < cfg.eta {
        cfg.gamma2 * delta
    } else if rho >= 0.75 && step_norm >= 0.99 * delta {
        (cfg.gamma1 * delta).min(cfg.delta_max)
    } else {
        delta
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GoldsteinVerdict {
    Accept,
    /// Not enough decrease: the step is too long.
    TooLong,
    /// Decrease beyond the lower Goldstein line: the step is too short.
    TooShort,
}

/// Goldstein test `f + μ1 g·s ≤ f(x+s) ≤ f + μ2 g·s` for a trial value.
pub fn goldstein_verdict(f: f64, slope: f64, trial: f64, mu1: f64, mu2: f64) -> GoldsteinVerdict {
    if trial > f + mu2 * slope {
        GoldsteinVerdict::TooLong
    } else if trial < f + mu1 * slope {
        GoldsteinVerdict::TooShort
    } else {
        GoldsteinVerdict::Accept
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DirectionKind {
    /// Negative curvature along the gradient.
    GradientCurvature,
    Newton,
    /// Leftmost eigenvector scaled by `|λ_min|`.
    NegativeEigen,
    /// Newton step on `H + 2 eps_h I`.
    Regularized,
}

#[derive(Clone, Copy, Debug)]
pub struct Direction {
    pub d: Vector,
    pub kind: DirectionKind,
    /// Multiplier in `(H + λI) d = -g`, when `d` solves such a system.
    pub multiplier: Option<f64>,
}

/// Search direction chosen by curvature: with `R = g·Hg / ‖g‖²`,
/// negative curvature along `g` when `R < -eps_h`; Newton when
/// `λ_min(H) ≥ eps_h` and `R > eps_g`; the leftmost eigenvector when
/// `λ_min(H) < -eps_h`; otherwise a regularized Newton step.
pub fn rw_direction(g: &Vector, h: &SymMatrix, eps_g: f64, eps_h: f64) -> Result<Direction> {
    let gnorm = g.norm();
    let curvature = h.quad_form(g) / (gnorm * gnorm);
    let eig = h.eigen();
    let lmin = eig.min_value();
    if curvature < -eps_h {
        return Ok(Direction {
            d: (curvature / gnorm) * *g,
            kind: DirectionKind::GradientCurvature,
            multiplier: None,
        });
    }
    if lmin >= eps_h && curvature > eps_g {
        return Ok(Direction { d: newton_step(g, h, 0.0)?, kind: DirectionKind::Newton, multiplier: Some(0.0) });
    }
    if lmin < -eps_h {
        let u = eig.min_vector();
        let sign = if g.dot(&u) > 0.0 { -1.0 } else { 1.0 };
        return Ok(Direction { d: (sign * lmin.abs()) * u, kind: DirectionKind::NegativeEigen, multiplier: None });
    }
    let lambda = 2.0 * eps_h;
    Ok(Direction { d: newton_step(g, h, lambda)?, kind: DirectionKind::Regularized, multiplier: Some(lambda) })
}

/// `f(x + a d) ≤ f(x) - (η/6) a³ ‖d‖³`.
pub fn rw_sufficient_decrease(f: f64, trial: f64, a: f64, dnorm: f64, eta: f64) -> bool {
    trial <= f - eta / 6.0 * (a * dnorm).powi(3)
}

fn quadratic_decrease(g: &Vector, h: &SymMatrix, s: &Vector) -> f64 {
    -(g.dot(s) + 0.5 * h.quad_form(s))
}

pub(crate) enum Stepper {
    Newton { shift: f64, alpha: f64 },
    Reg { sigma: f64 },
    Gqt { omega: f64 },
    TrustRegion { delta: f64 },
    Goldstein,
    RoyerWright,
}

pub(crate) struct StepContext<'c> {
    cfg: &'c MethodConfig,
    state: Stepper,
}

impl Stepper {
    pub(crate) fn start(cfg: &MethodConfig) -> StepContext<'_> {
        let state = match cfg.method {
            MethodKind::Newton => Stepper::Newton { shift: cfg.newton.shift, alpha: cfg.alpha },
            MethodKind::Reg2Alpha => Stepper::Reg { sigma: cfg.reg.sigma0 },
            MethodKind::Gqt => Stepper::Gqt { omega: cfg.gqt.omega0 },
            MethodKind::TrustRegion => Stepper::TrustRegion { delta: cfg.trust_region.delta0 },
            MethodKind::SdGoldstein => Stepper::Goldstein,
            MethodKind::RoyerWright => Stepper::RoyerWright,
        };
        StepContext { cfg, state }
    }
}

impl StepContext<'_> {
    pub(crate) fn propose(&mut self, it: &Iterate<'_>, oracle: &mut Oracle<'_>) -> Result<Proposal> {
        let cfg = self.cfg;
        let (g, h) = (&it.eval.gradient, &it.eval.hessian);
        let f = it.eval.value;
        match &mut self.state {
            Stepper::Newton { shift, alpha } => {
                let lambda = if *shift == 0.0 { 0.0 } else { *shift * g.norm().powf(*alpha / (1.0 + *alpha)) };
                let step = newton_step(g, h, lambda)?;
                let model_decrease = quadratic_decrease(g, h, &step);
                let trial_value = oracle.value(&(*it.x + step))?;
                let actual = f - trial_value;
                let failure = (!(actual > 0.0))
                    .then(|| format!("Newton step at k={} does not decrease the objective", it.k));
                Ok(Proposal {
                    step,
                    multiplier: Some(lambda),
                    parameter: None,
                    model_decrease,
                    trial_value,
                    rho: actual / model_decrease,
                    success: failure.is_none(),
                    negative_curvature: false,
                    failure,
                })
            }
            Stepper::Reg { sigma } => {
                let p = &cfg.reg;
                let alpha = cfg.alpha;
                let sol = solve_reg_subproblem(g, h, *sigma, alpha)?;
                let step = sol.s;
                let snorm = step.norm();
                let lipschitz = p.lipschitz_gradient.unwrap_or_else(|| h.norm());
                let bound = reg_step_bound(g.norm(), lipschitz, *sigma, alpha);
                if snorm > bound * (1.0 + 1e-12) {
                    return Err(Error::InvariantViolation(format!(
                        "regularized step norm {snorm} exceeds its bound {bound} at k={}",
                        it.k
                    )));
                }
                let model_decrease =
                    quadratic_decrease(g, h, &step) - *sigma / (2.0 + alpha) * snorm.powf(2.0 + alpha);
                let trial_value = oracle.value(&(*it.x + step))?;
                let rho = (f - trial_value) / model_decrease;
                let success = rho >= p.eta1;
                let used = *sigma;
                *sigma = if success { (used / p.gamma_dec).max(p.sigma_min) } else { p.gamma_inc * used };
                Ok(Proposal {
                    step,
                    multiplier: Some(sol.lambda),
                    parameter: Some(used),
                    model_decrease,
                    trial_value,
                    rho,
                    success,
                    negative_curvature: sol.hard_case,
                    failure: None,
                })
            }
            Stepper::Gqt { omega } => {
                let p = &cfg.gqt;
                let lambda = gqt_multiplier(g, h, *omega, cfg.alpha);
                let step = newton_step(g, h, lambda)?;
                let model_decrease = quadratic_decrease(g, h, &step);
                let trial_value = oracle.value(&(*it.x + step))?;
                let rho = (f - trial_value) / model_decrease;
                let success = rho > p.eta1;
                let used = *omega;
                *omega = if success { (used / p.gamma1).max(p.omega_min) } else { p.gamma1 * used };
                Ok(Proposal {
                    step,
                    multiplier: Some(lambda),
                    parameter: Some(used),
                    model_decrease,
                    trial_value,
                    rho,
                    success,
                    negative_curvature: h.min_eigenvalue() < 0.0,
                    failure: None,
                })
            }
            Stepper::TrustRegion { delta } => {
                let p = &cfg.trust_region;
                let sol = solve_trs(g, h, *delta)?;
                let step = sol.s;
                let model_decrease = quadratic_decrease(g, h, &step);
                let trial_value = oracle.value(&(*it.x + step))?;
                let rho = if model_decrease > 0.0 { (f - trial_value) / model_decrease } else { f64::NEG_INFINITY };
                let used = *delta;
                *delta = tr_update_radius(used, rho, step.norm(), p);
                Ok(Proposal {
                    step,
                    multiplier: Some(sol.lambda),
                    parameter: Some(used),
                    model_decrease,
                    trial_value,
                    rho,
                    success: rho >= p.eta,
                    negative_curvature: sol.hard_case,
                    failure: None,
                })
            }
            Stepper::Goldstein => goldstein_search(cfg, it, oracle),
            Stepper::RoyerWright => royer_wright_search(cfg, it, oracle),
        }
    }
}

fn goldstein_search(cfg: &MethodConfig, it: &Iterate<'_>, oracle: &mut Oracle<'_>) -> Result<Proposal> {
    let p = &cfg.goldstein;
    let (g, h) = (&it.eval.gradient, &it.eval.hessian);
    let f = it.eval.value;
    let gg = g.dot(g);
    let mut mu = match (p.initial, it.previous_value) {
        (InitialStep::Unit, _) => 1.0,
        (InitialStep::Interpolated { first }, None) => first,
        (InitialStep::Interpolated { first }, Some(prev)) => {
            let estimate = 2.0 * (prev - f) / gg;
            if estimate > 0.0 && estimate.is_finite() {
                estimate
            } else {
                first
            }
        }
    };
    let (mut lo, mut hi) = (0.0, f64::INFINITY);
    let mut last = None;
    for _ in 0..p.max_trials {
        let step = mu * -*g;
        let trial = oracle.value(&(*it.x + step))?;
        let verdict = goldstein_verdict(f, -mu * gg, trial, p.mu1, p.mu2);
        last = Some((step, trial, mu));
        match verdict {
            GoldsteinVerdict::Accept => {
                let model_decrease = quadratic_decrease(g, h, &step);
                return Ok(Proposal {
                    step,
                    multiplier: None,
                    parameter: Some(mu),
                    model_decrease,
                    trial_value: trial,
                    rho: (f - trial) / (mu * gg),
                    success: true,
                    negative_curvature: false,
                    failure: None,
                });
            }
            GoldsteinVerdict::TooLong => hi = mu,
            GoldsteinVerdict::TooShort => lo = mu,
        }
        mu = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * mu };
    }
    let (step, trial, mu) = last.unwrap_or((Vector::zeros(g.dim()), f, 0.0));
    Ok(Proposal {
        step,
        multiplier: None,
        parameter: Some(mu),
        model_decrease: quadratic_decrease(g, h, &step),
        trial_value: trial,
        rho: f64::NAN,
        success: false,
        negative_curvature: false,
        failure: Some(format!(
            "Goldstein linesearch found no acceptable stepsize in {} trials at k={}",
            p.max_trials, it.k
        )),
    })
}

fn royer_wright_search(cfg: &MethodConfig, it: &Iterate<'_>, oracle: &mut Oracle<'_>) -> Result<Proposal> {
    let p = &cfg.royer_wright;
    let (g, h) = (&it.eval.gradient, &it.eval.hessian);
    let f = it.eval.value;
    let dir = rw_direction(g, h, cfg.eps, cfg.eps_h())?;
    let dnorm = dir.d.norm();
    let negative_curvature =
        matches!(dir.kind, DirectionKind::GradientCurvature | DirectionKind::NegativeEigen);
    let mut a = 1.0;
    let mut last = (dir.d, f);
    for _ in 0..=p.max_backtracks {
        let step = a * dir.d;
        let trial = oracle.value(&(*it.x + step))?;
        last = (step, trial);
        if rw_sufficient_decrease(f, trial, a, dnorm, p.eta) {
            let model_decrease = quadratic_decrease(g, h, &step);
            return Ok(Proposal {
                step,
                multiplier: dir.multiplier,
                parameter: Some(a),
                model_decrease,
                trial_value: trial,
                rho: (f - trial) / (a * dnorm).powi(3),
                success: true,
                negative_curvature,
                failure: None,
            });
        }
        a *= p.backtrack;
    }
    let (step, trial) = last;
    Ok(Proposal {
        step,
        multiplier: dir.multiplier,
        parameter: Some(a),
        model_decrease: quadratic_decrease(g, h, &step),
        trial_value: trial,
        rho: f64::NAN,
        success: false,
        negative_curvature,
        failure: Some(format!(
            "linesearch found no acceptable step in {} backtracks at k={}",
            p.max_backtracks, it.k
        )),
    })
}
