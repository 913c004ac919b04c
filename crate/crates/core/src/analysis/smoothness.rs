//! Measured smoothness surrogates of piecewise quintic objectives.

use serde::Serialize;

use crate::hermite::PiecewiseObjective;
use crate::parallel::Execution;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sampling {
    /// Equispaced points per segment, both endpoints included.
    pub points_per_segment: usize,
}

impl Default for Sampling {
    fn default() -> Self {
        Self { points_per_segment: 64 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmoothnessReport {
    pub alpha: f64,
    /// Largest sampled `|H(x) - H(y)| / |x - y|^α` over pairs within a
    /// segment or in adjacent segments.
    pub holder_sample_sup: f64,
    /// Largest per-segment bound `(6|c3|s² + 24|c4|s³ + 60|c5|s⁴) / s^{1+α}`.
    pub holder_analytic_sup: f64,
    pub segment_bounds: Vec<f64>,
    /// Largest sampled `|H|`.
    pub hessian_sample_sup: f64,
    /// Largest per-segment bound on `|H|`.
    pub hessian_analytic_sup: f64,
    /// `[min f, max f]` over the samples and tails.
    pub range: [f64; 2],
    /// Every sampled quotient lies below the analytic bound of its segment
    /// (or `2^{1-α}` times the larger of two adjacent bounds).
    pub certified: bool,
    pub partner: Option<Box<SmoothnessReport>>,
}

struct SegmentScan {
    within_sup: f64,
    adjacent_sup: f64,
    certified: bool,
    hessian_sup: f64,
    min_f: f64,
    max_f: f64,
}

fn samples(obj: &PiecewiseObjective, j: usize, n: usize) -> Vec<(f64, f64, f64)> {
    let seg = &obj.segments()[j];
    let x0 = obj.knots()[j].x;
    (0..n)
        .map(|i| {
            let s = seg.length * i as f64 / (n - 1) as f64;
            (x0 + s, seg.derivative(s, 0), seg.derivative(s, 2))
        })
        .collect()
}

fn quotient(a: &(f64, f64, f64), b: &(f64, f64, f64), alpha: f64) -> f64 {
    let dx = (a.0 - b.0).abs();
    if dx == 0.0 {
        0.0
    } else {
        (a.2 - b.2).abs() / dx.powf(alpha)
    }
}

/// Relative slack on the certificate comparison.
const CERT_SLACK: f64 = 1e-9;

fn scan_segment(obj: &PiecewiseObjective, j: usize, alpha: f64, bounds: &[f64], n: usize) -> SegmentScan {
    let here = samples(obj, j, n);
    let mut within_sup: f64 = 0.0;
    for (i, a) in here.iter().enumerate() {
        for b in &here[i + 1..] {
            within_sup = within_sup.max(quotient(a, b, alpha));
        }
    }
    let mut certified = within_sup <= bounds[j] * (1.0 + CERT_SLACK) + CERT_SLACK;
    let mut adjacent_sup: f64 = 0.0;
    if j + 1 < bounds.len() {
        let next = samples(obj, j + 1, n);
        // The last sample of this segment is the first of the next one.
        for a in &here[..n - 1] {
            for b in &next {
                adjacent_sup = adjacent_sup.max(quotient(a, b, alpha));
            }
        }
        let cap = 2f64.powf(1.0 - alpha) * bounds[j].max(bounds[j + 1]);
        certified &= adjacent_sup <= cap * (1.0 + CERT_SLACK) + CERT_SLACK;
    }
    let hessian_sup = here.iter().map(|p| p.2.abs()).fold(0.0, f64::max);
    let min_f = here.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let max_f = here.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    SegmentScan { within_sup, adjacent_sup, certified, hessian_sup, min_f, max_f }
}

fn estimate_part(obj: &PiecewiseObjective, alpha: f64, sampling: &Sampling, exec: Execution) -> SmoothnessReport {
    let n = sampling.points_per_segment.max(2);
    let segs = obj.segments();
    let segment_bounds: Vec<f64> = segs.iter().map(|s| s.holder_bound(alpha)).collect();
    let scans = exec.map_range(segs.len(), |j| scan_segment(obj, j, alpha, &segment_bounds, n));

    let mut report = SmoothnessReport {
        alpha,
        holder_sample_sup: 0.0,
        holder_analytic_sup: segment_bounds.iter().copied().fold(0.0, f64::max),
        segment_bounds,
        hessian_sample_sup: 0.0,
        hessian_analytic_sup: segs.iter().map(|s| s.hessian_bound()).fold(0.0, f64::max),
        range: [obj.left_tail().min(obj.right_tail()), obj.left_tail().max(obj.right_tail())],
        certified: true,
        partner: None,
    };
    for scan in &scans {
        report.holder_sample_sup = report.holder_sample_sup.max(scan.within_sup).max(scan.adjacent_sup);
        report.hessian_sample_sup = report.hessian_sample_sup.max(scan.hessian_sup);
        report.range[0] = report.range[0].min(scan.min_f);
        report.range[1] = report.range[1].max(scan.max_f);
        report.certified &= scan.certified;
    }
    report
}

/// Smoothness surrogates of `obj`; a 2-D objective reports its second
/// coordinate in `partner`.
pub fn estimate_smoothness(
    obj: &PiecewiseObjective,
    alpha: f64,
    sampling: &Sampling,
    exec: Execution,
) -> SmoothnessReport {
    let mut report = estimate_part(obj, alpha, sampling, exec);
    if let Some(p) = obj.partner() {
        let inner = estimate_part(p, alpha, sampling, exec);
        report.certified &= inner.certified;
        report.partner = Some(Box::new(inner));
    }
    report
}
