//! Global solvers for the regularized and trust-region subproblems in one
//! or two dimensions, via the closed-form eigendecomposition and a scalar
//! secular equation in the multiplier.

use crate::error::{Error, Result};
use crate::linalg::{Eigen, SymMatrix, Vector};
use crate::numeric::bisect_increasing;

/// Relative size below which a gradient component along the leftmost
/// eigenvector is treated as zero (the hard case).
const HARD_CASE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug)]
pub struct SubproblemSolution {
    pub s: Vector,
    pub lambda: f64,
    pub hard_case: bool,
}

/// Step `s(λ) = -(H + λI)^{-1} g` in eigen-coordinates, skipping
/// components whose shifted eigenvalue vanishes (they must have zero
/// gradient component for this to be meaningful).
fn shifted_step(eig: &Eigen, ghat: &[f64; 2], lambda: f64) -> [f64; 2] {
    let mut out = [0.0; 2];
    for i in 0..eig.dim {
        let d = eig.values[i] + lambda;
        out[i] = if d == 0.0 { 0.0 } else { -ghat[i] / d };
    }
    out
}

fn coord_norm(c: &[f64; 2]) -> f64 {
    c[0].hypot(c[1])
}

/// Components with `d_i + λ_lo = 0` whose gradient part is negligible.
fn hard_case_possible(eig: &Eigen, ghat: &[f64; 2], lambda_lo: f64, gnorm: f64) -> bool {
    (0..eig.dim).all(|i| eig.values[i] + lambda_lo > 0.0 || ghat[i].abs() <= HARD_CASE_TOL * gnorm)
}

/// Moves from `sp` along the leftmost eigenvector until the norm is
/// `radius`, choosing the sign that does not increase `g·s`.
fn hard_case_step(eig: &Eigen, g: &Vector, sp: [f64; 2], radius: f64) -> Vector {
    let base = eig.combine(sp);
    let tau = (radius * radius - base.dot(&base)).max(0.0).sqrt();
    let u = eig.min_vector();
    let sign = if g.dot(&u) > 0.0 { -1.0 } else { 1.0 };
    base + (sign * tau) * u
}

/// Upper bracket for a decreasing secular function: doubles from `start`
/// until `phi` is non-positive.
fn upper_bracket(start: f64, phi: impl Fn(f64) -> f64) -> f64 {
    let mut hi = start.max(1.0);
    for _ in 0..2100 {
        if phi(hi) <= 0.0 {
            break;
        }
        hi *= 2.0;
    }
    hi
}

/// Global minimizer of `g·s + ½ s·Hs + σ/(2+α) ‖s‖^{2+α}` with multiplier
/// `λ = σ ‖s‖^α`.
pub fn solve_reg_subproblem(g: &Vector, h: &SymMatrix, sigma: f64, alpha: f64) -> Result<SubproblemSolution> {
    if g.dim() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), found: g.dim() });
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidInput(format!("sigma must be positive, got {sigma}")));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidInput(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    if !g.is_finite() || !h.is_finite() {
        return Err(Error::InvalidInput("subproblem data must be finite".into()));
    }

    if alpha == 0.0 {
        // The model is the quadratic with Hessian H + σI.
        let shifted = h.shifted(sigma);
        if shifted.min_eigenvalue() <= 0.0 {
            return Err(Error::HardCase(format!(
                "alpha = 0 and H + sigma I is not positive definite (lambda_min = {})",
                shifted.min_eigenvalue()
            )));
        }
        let s = shifted.solve(&-*g).ok_or_else(|| Error::HardCase("singular shifted Hessian".into()))?;
        return Ok(SubproblemSolution { s, lambda: sigma, hard_case: false });
    }

    let eig = h.eigen();
    let ghat = eig.project(g);
    let gnorm = g.norm();
    let lambda_lo = (-eig.min_value()).max(0.0);
    // ‖s(λ)‖ minus the norm the multiplier prescribes; decreasing in λ.
    let radius = |lambda: f64| (lambda / sigma).powf(1.0 / alpha);
    let phi = |lambda: f64| {
        let c = shifted_step(&eig, &ghat, lambda);
        let blown = (0..eig.dim).any(|i| eig.values[i] + lambda <= 0.0 && ghat[i] != 0.0);
        if blown {
            f64::INFINITY
        } else {
            coord_norm(&c) - radius(lambda)
        }
    };

    if hard_case_possible(&eig, &ghat, lambda_lo, gnorm) && lambda_lo > 0.0 {
        let sp = shifted_step(&eig, &ghat, lambda_lo);
        if coord_norm(&sp) <= radius(lambda_lo) {
            let s = hard_case_step(&eig, g, sp, radius(lambda_lo));
            return Ok(SubproblemSolution { s, lambda: lambda_lo, hard_case: true });
        }
    }
    if gnorm == 0.0 {
        return Ok(SubproblemSolution { s: Vector::zeros(g.dim()), lambda: 0.0, hard_case: false });
    }

    let hi = upper_bracket(lambda_lo + gnorm.powf(alpha / (1.0 + alpha)) * sigma.powf(1.0 / (1.0 + alpha)), phi);
    let lambda = bisect_increasing(lambda_lo, hi, |l| -phi(l));
    let s = eig.combine(shifted_step(&eig, &ghat, lambda));
    Ok(SubproblemSolution { s, lambda, hard_case: false })
}

/// Global minimizer of `g·s + ½ s·Hs` subject to `‖s‖ ≤ Δ`, with its
/// Lagrange multiplier.
pub fn solve_trs(g: &Vector, h: &SymMatrix, delta: f64) -> Result<SubproblemSolution> {
    if g.dim() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), found: g.dim() });
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidInput(format!("trust-region radius must be positive, got {delta}")));
    }
    if !g.is_finite() || !h.is_finite() {
        return Err(Error::InvalidInput("subproblem data must be finite".into()));
    }

    let eig = h.eigen();
    if eig.min_value() > 0.0 {
        if let Some(s) = h.solve(&-*g) {
            if s.norm() <= delta {
                return Ok(SubproblemSolution { s, lambda: 0.0, hard_case: false });
            }
        }
    }

    let ghat = eig.project(g);
    let gnorm = g.norm();
    let lambda_lo = (-eig.min_value()).max(0.0);
    let phi = |lambda: f64| {
        let blown = (0..eig.dim).any(|i| eig.values[i] + lambda <= 0.0 && ghat[i] != 0.0);
        if blown {
            f64::INFINITY
        } else {
            coord_norm(&shifted_step(&eig, &ghat, lambda)) - delta
        }
    };

    if hard_case_possible(&eig, &ghat, lambda_lo, gnorm) {
        let sp = shifted_step(&eig, &ghat, lambda_lo);
        if coord_norm(&sp) <= delta {
            let s = hard_case_step(&eig, g, sp, delta);
            return Ok(SubproblemSolution { s, lambda: lambda_lo, hard_case: true });
        }
    }

    let hi = upper_bracket(lambda_lo + gnorm / delta, phi);
    let lambda = bisect_increasing(lambda_lo, hi, |l| -phi(l));
    let s = eig.combine(shifted_step(&eig, &ghat, lambda));
    Ok(SubproblemSolution { s, lambda, hard_case: false })
}
