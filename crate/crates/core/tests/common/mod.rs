//! Oracles shared by the integration tests. The oracles use their own
//! arithmetic; only the `check_*` functions call into the library.

#![allow(dead_code)]

use evalcomplexity::analysis::{ClassTrace, Condition, MAlphaParams};
use evalcomplexity::linalg::{SymMatrix, Vector};
use evalcomplexity::methods::{solve_reg_subproblem, solve_trs};
use rand::Rng;

/// Symmetric matrix entries `[a]` or `[a, b, c]` for `[[a, b], [b, c]]`.
pub fn mat_vec(h: &[f64], s: &[f64]) -> Vec<f64> {
    match h {
        [a] => vec![a * s[0]],
        [a, b, c] => vec![a * s[0] + b * s[1], b * s[0] + c * s[1]],
        _ => panic!("bad matrix"),
    }
}

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn dist(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

pub fn quadratic_model(g: &[f64], h: &[f64], s: &[f64]) -> f64 {
    dot(g, s) + 0.5 * dot(s, &mat_vec(h, s))
}

pub fn reg_model(g: &[f64], h: &[f64], sigma: f64, alpha: f64, s: &[f64]) -> f64 {
    quadratic_model(g, h, s) + sigma / (2.0 + alpha) * norm(s).powf(2.0 + alpha)
}

/// Ascending eigenvalues with unit eigenvectors, from the characteristic
/// polynomial.
pub fn eigen(h: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    match h {
        [a] => (vec![*a], vec![vec![1.0]]),
        [a, b, c] => {
            if *b == 0.0 {
                return if a <= c {
                    (vec![*a, *c], vec![vec![1.0, 0.0], vec![0.0, 1.0]])
                } else {
                    (vec![*c, *a], vec![vec![0.0, 1.0], vec![1.0, 0.0]])
                };
            }
            let half_trace = 0.5 * (a + c);
            let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            let values = vec![half_trace - disc, half_trace + disc];
            let vectors = values
                .iter()
                .map(|&l| {
                    let v1 = [*b, l - a];
                    let v2 = [l - c, *b];
                    let v = if norm(&v1) >= norm(&v2) { v1 } else { v2 };
                    let n = norm(&v);
                    vec![v[0] / n, v[1] / n]
                })
                .collect();
            (values, vectors)
        }
        _ => panic!("bad matrix"),
    }
}

/// Values within this relative gap of the best are treated as ties.
const TIE: f64 = 1e-12;

fn ties(candidates: Vec<(f64, Vec<f64>)>) -> Vec<Vec<f64>> {
    let best = candidates.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    candidates
        .into_iter()
        .filter(|c| c.0 <= best + TIE * (1.0 + best.abs()))
        .map(|c| c.1)
        .collect()
}

/// Bisection for a sign change of `d` from negative to non-negative.
fn bisect_root(mut lo: f64, mut hi: f64, d: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if d(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Every global minimizer of the trust-region subproblem: interior Newton
/// point when the model is strictly convex and the point is feasible,
/// otherwise local minima on the boundary located by a dense angular scan
/// of the tangential derivative followed by bisection.
pub fn trs_oracle(g: &[f64], h: &[f64], delta: f64) -> Vec<Vec<f64>> {
    if let [a] = h {
        if *a > 0.0 && (g[0] / a).abs() <= delta {
            return vec![vec![-g[0] / a]];
        }
        let cands = [-delta, delta].iter().map(|&s| (quadratic_model(g, h, &[s]), vec![s])).collect();
        return ties(cands);
    }
    let (a, b, c) = (h[0], h[1], h[2]);
    let det = a * c - b * b;
    if a > 0.0 && det > 0.0 {
        let s = vec![(-g[0] * c + b * g[1]) / det, (-a * g[1] + b * g[0]) / det];
        if norm(&s) <= delta {
            return vec![s];
        }
    }
    let point = |t: f64| vec![delta * t.cos(), delta * t.sin()];
    let slope = |t: f64| {
        let s = point(t);
        let ds = [-delta * t.sin(), delta * t.cos()];
        dot(g, &ds) + dot(&s, &mat_vec(h, &ds))
    };
    let n = 4096;
    let step = std::f64::consts::TAU / n as f64;
    let mut cands = Vec::new();
    for i in 0..n {
        let (t0, t1) = (i as f64 * step, (i + 1) as f64 * step);
        if slope(t0) < 0.0 && slope(t1) >= 0.0 {
            let t = bisect_root(t0, t1, slope);
            let s = point(t);
            cands.push((quadratic_model(g, h, &s), s));
        }
    }
    if cands.is_empty() {
        let s = point(0.0);
        cands.push((quadratic_model(g, h, &s), s));
    }
    ties(cands)
}

/// Every global minimizer of the regularized model, from the scalar
/// equation `‖s(r)‖ = r` with `s(r) = -(H + σ r^α I)^{-1} g` solved by
/// bisection in `r`, plus the two symmetric points in the hard case.
pub fn reg_oracle(g: &[f64], h: &[f64], sigma: f64, alpha: f64) -> Vec<Vec<f64>> {
    let (values, vectors) = eigen(h);
    let ghat: Vec<f64> = vectors.iter().map(|v| dot(v, g)).collect();
    let combine = |coords: &[f64]| -> Vec<f64> {
        let mut s = vec![0.0; g.len()];
        for (c, v) in coords.iter().zip(&vectors) {
            for (si, vi) in s.iter_mut().zip(v) {
                *si += c * vi;
            }
        }
        s
    };
    let coords_at = |lambda: f64| -> Vec<f64> {
        ghat.iter()
            .zip(&values)
            .map(|(gi, d)| if d + lambda == 0.0 { 0.0 } else { -gi / (d + lambda) })
            .collect()
    };
    if alpha == 0.0 {
        assert!(values[0] + sigma > 0.0, "alpha = 0 needs H + sigma I positive definite");
        return vec![combine(&coords_at(sigma))];
    }
    let lambda_of = |r: f64| sigma * r.powf(alpha);
    let r_lo = ((-values[0]).max(0.0) / sigma).powf(1.0 / alpha);
    let gnorm = norm(g);
    if values[0] < 0.0 && ghat[0].abs() <= 1e-12 * gnorm {
        let mut p = coords_at(lambda_of(r_lo));
        p[0] = 0.0;
        if norm(&p) <= r_lo {
            let tau = (r_lo * r_lo - dot(&p, &p)).sqrt();
            let mut plus = p.clone();
            plus[0] = tau;
            let mut minus = p;
            minus[0] = -tau;
            return vec![combine(&plus), combine(&minus)];
        }
    }
    let psi = |r: f64| {
        let lambda = lambda_of(r);
        if values.iter().zip(&ghat).any(|(d, gi)| d + lambda <= 0.0 && *gi != 0.0) {
            return f64::INFINITY;
        }
        norm(&coords_at(lambda)) - r
    };
    let mut hi = r_lo.max(1.0);
    while psi(hi) > 0.0 {
        hi *= 2.0;
    }
    let r = bisect_root(r_lo, hi, |r| -psi(r));
    vec![combine(&coords_at(lambda_of(r)))]
}

/// Smallest sampled value of `model` on a polar grid over the ball of
/// radius `radius` (or a uniform grid of the interval in 1-D).
pub fn grid_min(dim: usize, radius: f64, model: impl Fn(&[f64]) -> f64) -> f64 {
    let mut best = model(&vec![0.0; dim]);
    if dim == 1 {
        let n = 20_000;
        for i in 0..=n {
            let s = -radius + 2.0 * radius * i as f64 / n as f64;
            best = best.min(model(&[s]));
        }
        return best;
    }
    let (nt, nr) = (360, 400);
    for i in 0..nt {
        let t = std::f64::consts::TAU * i as f64 / nt as f64;
        for j in 1..=nr {
            let r = radius * j as f64 / nr as f64;
            best = best.min(model(&[r * t.cos(), r * t.sin()]));
        }
    }
    best
}

/// Entries of `λ1 u uᵀ + λ2 v vᵀ` with `u = (cos φ, sin φ)`, `v ⟂ u`.
pub fn from_spectrum(l1: f64, l2: f64, phi: f64) -> (Vec<f64>, Vec<f64>) {
    let (s, c) = phi.sin_cos();
    (vec![l1 * c * c + l2 * s * s, (l1 - l2) * c * s, l1 * s * s + l2 * c * c], vec![-s, c])
}

/// A gradient with norm in `[0.1, 1.5]`.
pub fn random_gradient<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        if norm(&g) >= 0.1 {
            return g;
        }
    }
}

pub fn random_matrix<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    if dim == 1 {
        vec![rng.random_range(-2.0..2.0)]
    } else {
        (0..3).map(|_| rng.random_range(-2.0..2.0)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct TrsInstance {
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    pub delta: f64,
    pub hard: bool,
}

/// Random trust-region instance; `hard` builds a gradient orthogonal to
/// the leftmost eigenvector of an indefinite Hessian with the pseudo-step
/// strictly inside the region.
pub fn trs_instance<R: Rng>(rng: &mut R, dim: usize, hard: bool) -> TrsInstance {
    let delta = rng.random_range(0.1..2.0);
    if !hard {
        return TrsInstance { g: random_gradient(rng, dim), h: random_matrix(rng, dim), delta, hard };
    }
    let l1: f64 = rng.random_range(-2.0..-0.1);
    if dim == 1 {
        return TrsInstance { g: vec![0.0], h: vec![l1], delta, hard };
    }
    let l2 = rng.random_range(l1 + 0.2..2.5);
    let (h, v) = from_spectrum(l1, l2, rng.random_range(0.0..std::f64::consts::PI));
    let c = (l2 - l1) * delta * rng.random_range(0.1..0.9) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    TrsInstance { g: vec![c * v[0], c * v[1]], h, delta, hard }
}

#[derive(Clone, Debug)]
pub struct RegInstance {
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    pub sigma: f64,
    pub alpha: f64,
    pub hard: bool,
}

/// Random regularized instance. `alpha == 0` instances keep `H + σI`
/// positive definite; `hard` mirrors [`trs_instance`] with the radius
/// `(-λ_min/σ)^{1/α}`.
pub fn reg_instance<R: Rng>(rng: &mut R, dim: usize, alpha: f64, hard: bool) -> RegInstance {
    if hard {
        let sigma = rng.random_range(0.2..3.0);
        let l1: f64 = rng.random_range(-2.0..-0.1);
        let radius = (-l1 / sigma).powf(1.0 / alpha);
        if dim == 1 {
            return RegInstance { g: vec![0.0], h: vec![l1], sigma, alpha, hard };
        }
        let l2 = rng.random_range(l1 + 0.2..2.5);
        let (h, v) = from_spectrum(l1, l2, rng.random_range(0.0..std::f64::consts::PI));
        let c = (l2 - l1) * radius * rng.random_range(0.1..0.9) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        return RegInstance { g: vec![c * v[0], c * v[1]], h, sigma, alpha, hard };
    }
    let g = random_gradient(rng, dim);
    let h = random_matrix(rng, dim);
    let sigma = if alpha == 0.0 {
        (-eigen(&h).0[0]).max(0.0) + rng.random_range(0.2..2.0)
    } else {
        rng.random_range(0.1..3.0)
    };
    RegInstance { g, h, sigma, alpha, hard }
}

/// Distance from `s` to the nearest oracle minimizer.
pub fn nearest(s: &[f64], minimizers: &[Vec<f64>]) -> f64 {
    minimizers.iter().map(|m| dist(s, m)).fold(f64::INFINITY, f64::min)
}

/// Relative to `max(1, ‖s‖)`.
pub const STEP_TOL: f64 = 1e-8;
/// Relative to `max(1, ‖g‖, λ‖s‖)`.
pub const KKT_TOL: f64 = 1e-10;

fn to_lib(g: &[f64], h: &[f64]) -> (Vector, SymMatrix) {
    (Vector::from_slice(g).unwrap(), SymMatrix::from_entries(h).unwrap())
}

/// Solver step against the oracle, stationarity, complementarity and
/// second-order conditions, and a grid scan for global optimality.
pub fn check_trs(inst: &TrsInstance) -> Result<(), String> {
    let (g, h) = to_lib(&inst.g, &inst.h);
    let sol = solve_trs(&g, &h, inst.delta).map_err(|e| format!("{inst:?}: {e}"))?;
    let s = sol.s.as_slice().to_vec();
    let lambda = sol.lambda;
    let oracle = trs_oracle(&inst.g, &inst.h, inst.delta);
    let gap = nearest(&s, &oracle);
    if gap > STEP_TOL * norm(&s).max(1.0) {
        return Err(format!("{inst:?}: step {s:?} is {gap:e} from oracle {oracle:?}"));
    }
    let hs = mat_vec(&inst.h, &s);
    let stationarity = norm(&(0..s.len()).map(|i| hs[i] + lambda * s[i] + inst.g[i]).collect::<Vec<_>>());
    let complementarity = (lambda * (inst.delta - norm(&s))).abs();
    let curvature = eigen(&inst.h).0[0] + lambda;
    let scale = norm(&inst.g).max(lambda * norm(&s)).max(1.0);
    if stationarity > KKT_TOL * scale || complementarity > KKT_TOL * scale || lambda < 0.0 || curvature < -KKT_TOL {
        return Err(format!(
            "{inst:?}: KKT stationarity {stationarity:e}, complementarity {complementarity:e}, lambda {lambda}, curvature {curvature:e}"
        ));
    }
    if norm(&s) > inst.delta * (1.0 + 1e-12) {
        return Err(format!("{inst:?}: infeasible step norm {}", norm(&s)));
    }
    let value = quadratic_model(&inst.g, &inst.h, &s);
    let scan = grid_min(s.len(), inst.delta, |p| quadratic_model(&inst.g, &inst.h, p));
    if value > scan + 1e-12 {
        return Err(format!("{inst:?}: grid point beats the solver ({scan} < {value})"));
    }
    if inst.hard && !sol.hard_case {
        return Err(format!("{inst:?}: hard case not flagged"));
    }
    Ok(())
}

pub fn check_reg(inst: &RegInstance) -> Result<(), String> {
    let (g, h) = to_lib(&inst.g, &inst.h);
    let sol = solve_reg_subproblem(&g, &h, inst.sigma, inst.alpha).map_err(|e| format!("{inst:?}: {e}"))?;
    let s = sol.s.as_slice().to_vec();
    let lambda = sol.lambda;
    let oracle = reg_oracle(&inst.g, &inst.h, inst.sigma, inst.alpha);
    let gap = nearest(&s, &oracle);
    if gap > STEP_TOL * norm(&s).max(1.0) {
        return Err(format!("{inst:?}: step {s:?} is {gap:e} from oracle {oracle:?}"));
    }
    let hs = mat_vec(&inst.h, &s);
    let stationarity = norm(&(0..s.len()).map(|i| hs[i] + lambda * s[i] + inst.g[i]).collect::<Vec<_>>());
    let multiplier_gap = (lambda - inst.sigma * norm(&s).powf(inst.alpha)).abs();
    let curvature = eigen(&inst.h).0[0] + lambda;
    let scale = norm(&inst.g).max(lambda * norm(&s)).max(1.0);
    if stationarity > KKT_TOL * scale || multiplier_gap > KKT_TOL * lambda.max(1.0) || curvature < -KKT_TOL {
        return Err(format!(
            "{inst:?}: stationarity {stationarity:e}, multiplier gap {multiplier_gap:e}, curvature {curvature:e}"
        ));
    }
    let model = |p: &[f64]| reg_model(&inst.g, &inst.h, inst.sigma, inst.alpha, p);
    let value = model(&s);
    let scan = grid_min(s.len(), 1.5 * norm(&s) + 0.1, model);
    if value > scan + 1e-12 {
        return Err(format!("{inst:?}: grid point beats the solver ({scan} < {value})"));
    }
    if inst.hard && !sol.hard_case {
        return Err(format!("{inst:?}: hard case not flagged"));
    }
    Ok(())
}

/// Conditions the injection experiments target.
pub const BOUNDS: [Condition; 4] = [Condition::Residual, Condition::Curvature, Condition::Multiplier, Condition::StepBound];

/// Breaks `condition` at record `k` and leaves every other record alone.
pub fn inject(
    trace: &ClassTrace,
    k: usize,
    condition: Condition,
    alpha: f64,
    params: &MAlphaParams,
    kappa_lambda: f64,
) -> ClassTrace {
    let mut out = trace.clone();
    let rec = &mut out.records[k];
    let gnorm = rec.g.norm();
    let hmin = rec.h.min_eigenvalue();
    match condition {
        Condition::Residual => {
            let size = 2.0 * params.kappa_rg * gnorm + 0.5 * gnorm;
            rec.residual = Some(Vector::zeros(rec.g.dim()).map(|_| size / (rec.g.dim() as f64).sqrt()));
        }
        Condition::Curvature => rec.multiplier = Some(-hmin.abs() - 1.0),
        Condition::Multiplier => {
            let scale = hmin.abs().max(gnorm.powf(alpha / (1.0 + alpha)));
            rec.multiplier = Some(hmin.abs() + 2.0 * kappa_lambda * scale + 1.0);
        }
        Condition::StepBound => rec.step = (2.0 * params.kappa_s / rec.step.norm()) * rec.step,
        _ => unreachable!(),
    }
    out
}
