//! Piecewise quintic Hermite interpolation.
//!
//! Each segment `[x_k, x_{k+1}]` carries a quintic `p_k(s)` in the local
//! coordinate `s = x - x_k`, stored together with an additive base offset
//! so that the objective on the segment is `p_k(s) + base`. The quintic is
//! pinned down by value, slope and curvature at both ends. Outside the knot
//! range the objective is constant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{SymMatrix, Vector};
use crate::objective::{Evaluation, Objective};

/// Prescribed value, first and second derivative at one end of a segment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndConditions {
    pub f: f64,
    pub g: f64,
    pub h: f64,
}

impl EndConditions {
    pub fn new(f: f64, g: f64, h: f64) -> Self {
        Self { f, g, h }
    }

    fn is_finite(&self) -> bool {
        self.f.is_finite() && self.g.is_finite() && self.h.is_finite()
    }
}

/// An interpolation abscissa with its prescribed `(f, g, H)` triple.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Knot {
    pub x: f64,
    pub f: f64,
    pub g: f64,
    pub h: f64,
}

impl Knot {
    pub fn new(x: f64, f: f64, g: f64, h: f64) -> Self {
        Self { x, f, g, h }
    }

    pub fn conditions(&self) -> EndConditions {
        EndConditions::new(self.f, self.g, self.h)
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.conditions().is_finite()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuinticSegment {
    /// Coefficients of `p(s) = c0 + c1 s + ... + c5 s^5`.
    pub coeffs: [f64; 6],
    pub length: f64,
    /// Constant added to `p(s)`; the right end value of the segment.
    pub base: f64,
}

impl QuinticSegment {
    /// Derivative of order `order` (0..=3) of `p(s) + base`.
    pub fn derivative(&self, s: f64, order: usize) -> f64 {
        let c = &self.coeffs;
        match order {
            0 => {
                let p = ((((c[5] * s + c[4]) * s + c[3]) * s + c[2]) * s + c[1]) * s + c[0];
                p + self.base
            }
            1 => (((5.0 * c[5] * s + 4.0 * c[4]) * s + 3.0 * c[3]) * s + 2.0 * c[2]) * s + c[1],
            2 => ((20.0 * c[5] * s + 12.0 * c[4]) * s + 6.0 * c[3]) * s + 2.0 * c[2],
            3 => (60.0 * c[5] * s + 24.0 * c[4]) * s + 6.0 * c[3],
            _ => 0.0,
        }
    }

    /// Largest scaled mismatch between the segment's end values and the
    /// prescribed conditions; scaling is `max(1, |target|)`.
    pub fn interpolation_residual(&self, left: &EndConditions, right: &EndConditions) -> f64 {
        let targets = [
            (0.0, 0, left.f),
            (0.0, 1, left.g),
            (0.0, 2, left.h),
            (self.length, 0, right.f),
            (self.length, 1, right.g),
            (self.length, 2, right.h),
        ];
        targets
            .iter()
            .map(|&(s, order, target)| {
                (self.derivative(s, order) - target).abs() / target.abs().max(1.0)
            })
            .fold(0.0, f64::max)
    }

    /// `sup |p'''| s^{1-alpha}` bound on the segment, written as
    /// `(6|c3| s^2 + 24|c4| s^3 + 60|c5| s^4) / s^{1+alpha}`.
    pub fn holder_bound(&self, alpha: f64) -> f64 {
        let s = self.length;
        let c = &self.coeffs;
        let num = 6.0 * c[3].abs() * s * s + 24.0 * c[4].abs() * s.powi(3) + 60.0 * c[5].abs() * s.powi(4);
        num / s.powf(1.0 + alpha)
    }

    /// Upper bound on `sup |p''|` over the segment.
    pub fn hessian_bound(&self) -> f64 {
        let s = self.length;
        let c = &self.coeffs;
        let num = 6.0 * c[3].abs() * s * s + 12.0 * c[4].abs() * s.powi(3) + 20.0 * c[5].abs() * s.powi(4);
        2.0 * c[2].abs() + num / s
    }
}

/// Builds the quintic matching `left` at `s = 0` and `right` at `s = length`.
///
/// `c0..c2` come straight from the left end; `c3..c5` use the closed-form
/// solution of the 3×3 system for the right-end conditions.
pub fn solve_hermite(
    left: &EndConditions,
    right: &EndConditions,
    length: f64,
) -> Result<QuinticSegment> {
    if !left.is_finite() || !right.is_finite() || !length.is_finite() {
        return Err(Error::InvalidInput(
            "hermite end conditions and length must be finite".into(),
        ));
    }
    if length <= 0.0 {
        return Err(Error::InvalidSegment { length });
    }
    let s = length;
    let (s2, s3) = (s * s, s * s * s);
    let (s4, s5) = (s3 * s, s3 * s2);
    let df = right.f - left.f;
    let dg = right.g - left.g;
    let dh = right.h - left.h;
    let (g, h) = (left.g, left.h);

    let c3 = 10.0 * df / s3 - 4.0 * dg / s2 + dh / (2.0 * s) - 10.0 * g / s2 - h / s;
    let c4 = -15.0 * df / s4 + 7.0 * dg / s3 - dh / s2 + 15.0 * g / s3 + h / (2.0 * s2);
    let c5 = 6.0 * df / s5 - 3.0 * dg / s4 + dh / (2.0 * s3) - 6.0 * g / s4;

    Ok(QuinticSegment {
        coeffs: [left.f - right.f, g, 0.5 * h, c3, c4, c5],
        length,
        base: right.f,
    })
}

/// Piecewise quintic objective, optionally paired with a second 1-D
/// objective to form the separable sum `h(x, y) = f1(x) + f2(y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseObjective {
    knots: Vec<Knot>,
    segments: Vec<QuinticSegment>,
    left_tail: f64,
    right_tail: f64,
    partner: Option<Box<PiecewiseObjective>>,
}

impl PiecewiseObjective {
    /// Interpolates consecutive knots; the tails take the end knot values.
    pub fn from_knots(knots: Vec<Knot>) -> Result<Self> {
        validate_knots(&knots)?;
        let segments = knots
            .windows(2)
            .map(|w| solve_hermite(&w[0].conditions(), &w[1].conditions(), w[1].x - w[0].x))
            .collect::<Result<Vec<_>>>()?;
        let left_tail = knots[0].f;
        let right_tail = knots[knots.len() - 1].f;
        Ok(Self { knots, segments, left_tail, right_tail, partner: None })
    }

    /// Interpolates `core` and adds two unit-width flat prolongation
    /// segments: `[x_0 - 1, x_0]` starting from `(f_0, 0, 0)` and
    /// `[x_K, x_K + 1]` ending at `(f_K, 0, 0)`.
    pub fn prolongated(core: &[Knot]) -> Result<Self> {
        if core.is_empty() {
            return Err(Error::InvalidInput("no knots to interpolate".into()));
        }
        let first = core[0];
        let last = core[core.len() - 1];
        let mut knots = Vec::with_capacity(core.len() + 2);
        knots.push(Knot::new(first.x - 1.0, first.f, 0.0, 0.0));
        knots.extend_from_slice(core);
        knots.push(Knot::new(last.x + 1.0, last.f, 0.0, 0.0));
        Self::from_knots(knots)
    }

    /// Reassembles an objective from stored parts (used by deserialization).
    pub fn from_parts(
        knots: Vec<Knot>,
        segments: Vec<QuinticSegment>,
        left_tail: f64,
        right_tail: f64,
        partner: Option<PiecewiseObjective>,
    ) -> Result<Self> {
        validate_knots(&knots)?;
        if segments.len() + 1 != knots.len() {
            return Err(Error::InvalidInput(format!(
                "{} knots need {} segments, got {}",
                knots.len(),
                knots.len() - 1,
                segments.len()
            )));
        }
        for (k, (seg, w)) in segments.iter().zip(knots.windows(2)).enumerate() {
            let span = w[1].x - w[0].x;
            let finite = seg.coeffs.iter().all(|c| c.is_finite()) && seg.base.is_finite();
            if !finite || !(seg.length > 0.0) || (seg.length - span).abs() > 1e-12 * span.abs().max(1.0) {
                return Err(Error::InvalidInput(format!(
                    "segment {k} is inconsistent with knots (length {}, span {span})",
                    seg.length
                )));
            }
        }
        if !left_tail.is_finite() || !right_tail.is_finite() {
            return Err(Error::InvalidInput("tail values must be finite".into()));
        }
        let mut obj = Self { knots, segments, left_tail, right_tail, partner: None };
        if let Some(p) = partner {
            obj = obj.with_partner(p)?;
        }
        Ok(obj)
    }

    /// Turns a 1-D objective into the separable 2-D sum with `partner`.
    pub fn with_partner(mut self, partner: PiecewiseObjective) -> Result<Self> {
        if self.partner.is_some() || partner.partner.is_some() {
            return Err(Error::InvalidInput(
                "separable objectives combine exactly two 1-D parts".into(),
            ));
        }
        self.partner = Some(Box::new(partner));
        Ok(self)
    }

    pub fn knots(&self) -> &[Knot] {
        &self.knots
    }

    pub fn segments(&self) -> &[QuinticSegment] {
        &self.segments
    }

    pub fn segments_mut(&mut self) -> &mut [QuinticSegment] {
        &mut self.segments
    }

    pub fn left_tail(&self) -> f64 {
        self.left_tail
    }

    pub fn right_tail(&self) -> f64 {
        self.right_tail
    }

    pub fn partner(&self) -> Option<&PiecewiseObjective> {
        self.partner.as_deref()
    }

    pub fn dim(&self) -> usize {
        if self.partner.is_some() {
            2
        } else {
            1
        }
    }

    /// The 1-D coordinate functions: one, or two for separable objectives.
    pub fn parts(&self) -> Vec<&PiecewiseObjective> {
        let mut parts = vec![self];
        if let Some(p) = self.partner() {
            parts.push(p);
        }
        parts
    }

    /// Range `[x_first, x_last]` covered by segments.
    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0].x, self.knots[self.knots.len() - 1].x)
    }

    /// Index of the segment containing `x`, or `None` in the tails.
    /// A point exactly on a knot belongs to the segment on its right.
    pub fn locate(&self, x: f64) -> Option<usize> {
        let (lo, hi) = self.domain();
        if !(x >= lo) || x >= hi {
            return None;
        }
        Some(self.knots.partition_point(|k| k.x <= x) - 1)
    }

    /// Derivative of order 0..=3 of this 1-D coordinate function (the
    /// partner is ignored). Third derivatives are one-sided at knots.
    pub fn eval1(&self, x: f64, order: usize) -> f64 {
        match self.locate(x) {
            Some(k) => self.segments[k].derivative(x - self.knots[k].x, order),
            None if order > 0 => 0.0,
            None if x < self.knots[0].x => self.left_tail,
            None => self.right_tail,
        }
    }

    /// Derivative components of order 0..=3 at `point`.
    ///
    /// Order 0 returns `[value]`; higher orders return one entry per
    /// coordinate, the diagonal of the derivative tensor (off-diagonal
    /// terms of a separable sum vanish).
    pub fn eval(&self, point: &[f64], order: usize) -> Result<Vec<f64>> {
        if point.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: point.len() });
        }
        if order > 3 {
            return Err(Error::InvalidInput(format!("derivative order {order} not supported")));
        }
        let parts = self.parts();
        let comps: Vec<f64> = parts.iter().zip(point).map(|(p, &x)| p.eval1(x, order)).collect();
        Ok(if order == 0 { vec![comps.iter().sum()] } else { comps })
    }

    pub fn check_knot_continuity(&self, tol: f64) -> ContinuityReport {
        let mut max_mismatch = [0.0f64; 3];
        let mut worst_knot = [None; 3];
        let n = self.knots.len();
        for (i, knot) in self.knots.iter().enumerate() {
            for order in 0..3 {
                let left = if i == 0 {
                    self.tail_derivative(self.left_tail, order)
                } else {
                    let seg = &self.segments[i - 1];
                    seg.derivative(seg.length, order)
                };
                let right = if i + 1 == n {
                    self.tail_derivative(self.right_tail, order)
                } else {
                    self.segments[i].derivative(0.0, order)
                };
                let stored = [knot.f, knot.g, knot.h][order];
                let mismatch = [left - right, left - stored, right - stored]
                    .iter()
                    .map(|d| d.abs())
                    .fold(0.0, f64::max)
                    / left.abs().max(right.abs()).max(1.0);
                if mismatch > max_mismatch[order] {
                    max_mismatch[order] = mismatch;
                    worst_knot[order] = Some(i);
                }
            }
        }
        let partner = self.partner().map(|p| Box::new(p.check_knot_continuity(tol)));
        let passed = max_mismatch.iter().all(|&m| m <= tol)
            && partner.as_ref().is_none_or(|p| p.passed);
        ContinuityReport { max_mismatch, worst_knot, tol, passed, partner }
    }

    fn tail_derivative(&self, tail: f64, order: usize) -> f64 {
        if order == 0 {
            tail
        } else {
            0.0
        }
    }
}

fn validate_knots(knots: &[Knot]) -> Result<()> {
    if knots.len() < 2 {
        return Err(Error::InvalidInput("at least two knots are required".into()));
    }
    if let Some(k) = knots.iter().position(|k| !k.is_finite()) {
        return Err(Error::InvalidInput(format!("knot {k} has non-finite data")));
    }
    if let Some(k) = knots.windows(2).position(|w| !(w[1].x > w[0].x)) {
        return Err(Error::InvalidInput(format!(
            "knot abscissae must increase strictly (knots {k} and {})",
            k + 1
        )));
    }
    Ok(())
}

/// Per-order sup of the scaled jump `|left - right| / max(1, |left|, |right|)`
/// over all knots, also comparing both limits to the stored knot data.
#[derive(Clone, Debug, Serialize)]
pub struct ContinuityReport {
    pub max_mismatch: [f64; 3],
    pub worst_knot: [Option<usize>; 3],
    pub tol: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partner: Option<Box<ContinuityReport>>,
}

impl Objective for PiecewiseObjective {
    fn dim(&self) -> usize {
        PiecewiseObjective::dim(self)
    }

    fn value(&self, x: &Vector) -> Result<f64> {
        Ok(self.eval(x.as_slice(), 0)?[0])
    }

    fn evaluate(&self, x: &Vector) -> Result<Evaluation> {
        let value = self.value(x)?;
        let gradient = Vector::from_slice(&self.eval(x.as_slice(), 1)?)?;
        let hessian = SymMatrix::diag(&Vector::from_slice(&self.eval(x.as_slice(), 2)?)?);
        Ok(Evaluation { value, gradient, hessian })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Direct Gaussian elimination on the 3×3 system for (c3, c4, c5).
    fn linear_solve_oracle(left: &EndConditions, right: &EndConditions, s: f64) -> [f64; 3] {
        let mut a = [
            [s.powi(3), s.powi(4), s.powi(5), right.f - left.f - left.g * s - 0.5 * left.h * s * s],
            [3.0 * s * s, 4.0 * s.powi(3), 5.0 * s.powi(4), right.g - left.g - left.h * s],
            [6.0 * s, 12.0 * s * s, 20.0 * s.powi(3), right.h - left.h],
        ];
        for col in 0..3 {
            let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
            a.swap(col, piv);
            for row in col + 1..3 {
                let m = a[row][col] / a[col][col];
                for c in col..4 {
                    a[row][c] -= m * a[col][c];
                }
            }
        }
        let mut x = [0.0; 3];
        for row in (0..3).rev() {
            let mut acc = a[row][3];
            for c in row + 1..3 {
                acc -= a[row][c] * x[c];
            }
            x[row] = acc / a[row][row];
        }
        x
    }

    fn horner(c: &[f64; 6], s: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, &ci| acc * s + ci)
    }

    #[test]
    fn identical_ends_give_constant() {
        let e = EndConditions::new(1.0, 0.0, 0.0);
        let seg = solve_hermite(&e, &e, 1.0).unwrap();
        assert_eq!(seg.coeffs, [0.0; 6]);
        assert_eq!(seg.base, 1.0);
    }

    #[test]
    fn malpha_first_segment_coefficients() {
        // eps = 0.25, alpha = 1, theta = 1: first two knots of the family.
        let left = EndConditions::new(1.0, -0.5, 2.0);
        let right = EndConditions::new(0.9375, -0.46875, 1.7578125);
        let oracle = linear_solve_oracle(&left, &right, 0.25);
        let seg = solve_hermite(&left, &right, 0.25).unwrap();
        // frozen from the linear-solve oracle
        let expected = [0.0625, -0.5, 1.0, 29.515625, -206.125, 352.25];
        for (i, (&got, &want)) in seg.coeffs.iter().zip(&expected).enumerate() {
            assert_relative_eq!(got, want, max_relative = 1e-12);
            if i >= 3 {
                assert_relative_eq!(oracle[i - 3], want, max_relative = 1e-12);
            }
        }
        assert!(seg.interpolation_residual(&left, &right) < 1e-12);
    }

    #[test]
    fn steepest_descent_first_segment() {
        let left = EndConditions::new(1.0, -0.2, 0.0);
        let right = EndConditions::new(0.995, -0.199, 0.0);
        let seg = solve_hermite(&left, &right, 0.05).unwrap();
        assert_relative_eq!(seg.coeffs[0], 0.005, max_relative = 1e-12);
        assert_eq!(seg.coeffs[1], -0.2);
        assert_eq!(seg.coeffs[2], 0.0);
        // values frozen from linear_solve_oracle
        let oracle = linear_solve_oracle(&left, &right, 0.05);
        let frozen = [398.4, -11944.0, 95520.0];
        for i in 0..3 {
            assert_relative_eq!(seg.coeffs[3 + i], oracle[i], max_relative = 1e-9);
            assert_relative_eq!(oracle[i], frozen[i], max_relative = 1e-9);
        }
        assert!(seg.interpolation_residual(&left, &right) < 1e-12);
    }

    #[test]
    fn invalid_segments_rejected() {
        let e = EndConditions::new(1.0, 0.0, 0.0);
        assert!(matches!(solve_hermite(&e, &e, 0.0), Err(Error::InvalidSegment { .. })));
        assert!(matches!(solve_hermite(&e, &e, -1.0), Err(Error::InvalidSegment { .. })));
        let bad = EndConditions::new(f64::NAN, 0.0, 0.0);
        assert!(matches!(solve_hermite(&bad, &e, 1.0), Err(Error::InvalidInput(_))));
    }

    fn sample_objective() -> PiecewiseObjective {
        PiecewiseObjective::prolongated(&[
            Knot::new(0.0, 1.0, -0.5, 2.0),
            Knot::new(0.25, 0.9375, -0.46875, 1.7578125),
            Knot::new(0.6, 0.8, -0.3, -0.4),
        ])
        .unwrap()
    }

    #[test]
    fn knots_are_reproduced_and_tails_flat() {
        let obj = sample_objective();
        for k in obj.knots() {
            assert_relative_eq!(obj.eval1(k.x, 0), k.f, max_relative = 1e-15);
            assert_eq!(obj.eval1(k.x, 1), k.g);
            assert_eq!(obj.eval1(k.x, 2), k.h);
        }
        assert_eq!(obj.eval1(-5.0, 0), 1.0);
        assert_eq!(obj.eval1(-1.0 - 1e-9, 1), 0.0);
        assert_eq!(obj.eval1(10.0, 0), 0.8);
        assert_eq!(obj.eval1(10.0, 2), 0.0);
        assert_eq!(obj.segments().len(), 4);
    }

    #[test]
    fn midpoint_matches_explicit_quintic() {
        let obj = sample_objective();
        let c = [0.0625, -0.5, 1.0, 29.515625, -206.125, 352.25];
        assert_relative_eq!(obj.eval1(0.125, 0), horner(&c, 0.125) + 0.9375, max_relative = 1e-14);
    }

    #[test]
    fn third_derivative_takes_right_limit_at_knots() {
        let obj = sample_objective();
        let x = obj.knots()[2].x;
        assert_eq!(obj.eval1(x, 3), obj.segments()[2].derivative(0.0, 3));
    }

    #[test]
    fn dimension_mismatch() {
        let obj = sample_objective();
        assert!(matches!(obj.eval(&[0.0, 0.0], 0), Err(Error::DimensionMismatch { .. })));
        let two = sample_objective().with_partner(sample_objective()).unwrap();
        assert!(matches!(two.eval(&[0.0], 1), Err(Error::DimensionMismatch { .. })));
        assert_eq!(two.eval(&[0.0, 0.25], 1).unwrap(), vec![-0.5, -0.46875]);
        assert_relative_eq!(two.eval(&[0.0, 0.25], 0).unwrap()[0], 1.9375, max_relative = 1e-15);
    }

    #[test]
    fn continuity_detects_perturbation() {
        let obj = sample_objective();
        assert!(obj.check_knot_continuity(1e-10).passed);
        let mut bad = obj.clone();
        bad.segments_mut()[2].coeffs[3] += 1e-3;
        let report = bad.check_knot_continuity(1e-10);
        assert!(!report.passed);
        assert_eq!(report.worst_knot[0], Some(3));
    }

    #[test]
    fn continuity_checks_partner() {
        let mut partner = sample_objective();
        partner.segments_mut()[1].coeffs[5] += 1e-3;
        let two = sample_objective().with_partner(partner).unwrap();
        let report = two.check_knot_continuity(1e-10);
        assert!(!report.passed);
        assert!(report.max_mismatch.iter().all(|&m| m <= 1e-10));
        assert!(!report.partner.unwrap().passed);
    }

    proptest! {
        #[test]
        fn closed_form_matches_linear_solve(
            f0 in -2.0..2.0f64, g0 in -2.0..2.0f64, h0 in -5.0..5.0f64,
            f1 in -2.0..2.0f64, g1 in -2.0..2.0f64, h1 in -5.0..5.0f64,
            s in 0.05..2.0f64,
        ) {
            let (l, r) = (EndConditions::new(f0, g0, h0), EndConditions::new(f1, g1, h1));
            let seg = solve_hermite(&l, &r, s).unwrap();
            prop_assert!(seg.interpolation_residual(&l, &r) < 1e-10);
            let oracle = linear_solve_oracle(&l, &r, s);
            for i in 0..3 {
                let scale = oracle[i].abs().max(1.0 / s.powi(5 + i as i32));
                prop_assert!((seg.coeffs[3 + i] - oracle[i]).abs() <= 1e-9 * scale);
            }
        }
    }
}
