//! Geometric error norms and run-quality metrics.

use crate::curve::{GridCurve, Topology};
use crate::error::{Error, Result};
use crate::vec2::Vec2;

fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sq();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    (p - (a + t * ab)).norm()
}

fn point_polyline_distance(p: Vec2, poly: &[Vec2], closed: bool) -> f64 {
    let mut best = f64::INFINITY;
    for w in poly.windows(2) {
        best = best.min(point_segment_distance(p, w[0], w[1]));
    }
    if closed && poly.len() > 2 {
        best = best.min(point_segment_distance(p, poly[poly.len() - 1], poly[0]));
    }
    best
}

/// Parametrization-free distance from the nodes of `a` to the piecewise
/// linear interpolant of `b`: (root-mean-square, maximum).
pub fn curve_distance(a: &GridCurve, b: &GridCurve) -> Result<(f64, f64)> {
    if (a.topology() == Topology::Closed) != (b.topology() == Topology::Closed) {
        return Err(Error::TopologyMismatch);
    }
    let poly: Vec<Vec2> = b.interior().collect();
    let closed = b.topology() == Topology::Closed;
    let mut sum2 = 0.0;
    let mut max: f64 = 0.0;
    let mut count = 0usize;
    for p in a.interior() {
        let d = point_polyline_distance(p, &poly, closed);
        sum2 += d * d;
        max = max.max(d);
        count += 1;
    }
    Ok(((sum2 / count as f64).sqrt(), max))
}

/// Distance over a matched triple of curves: RMS over all nodes, max over
/// all nodes.
pub fn curves_distance(a: &[GridCurve; 3], b: &[GridCurve; 3]) -> Result<(f64, f64)> {
    let mut sum2 = 0.0;
    let mut count = 0usize;
    let mut max: f64 = 0.0;
    for (ca, cb) in a.iter().zip(b) {
        if (ca.topology() == Topology::Closed) != (cb.topology() == Topology::Closed) {
            return Err(Error::TopologyMismatch);
        }
        let poly: Vec<Vec2> = cb.interior().collect();
        let closed = cb.topology() == Topology::Closed;
        for p in ca.interior() {
            let d = point_polyline_distance(p, &poly, closed);
            sum2 += d * d;
            max = max.max(d);
            count += 1;
        }
    }
    Ok(((sum2 / count as f64).sqrt(), max))
}

/// True when the x coordinate fails to increase monotonically along the
/// curve: the signature of an overhanging (non-single-valued) profile.
/// `slack` absorbs rounding; motion toward negative x counts against
/// monotonicity after orientation normalization.
pub fn has_overhang(curve: &GridCurve, slack: f64) -> bool {
    let xs: Vec<f64> = curve.interior().map(|p| p.x).collect();
    if xs.len() < 2 {
        return false;
    }
    // normalize so the branch nominally runs toward +x
    let forward = xs[xs.len() - 1] >= xs[0];
    let mut worst: f64 = 0.0;
    for w in xs.windows(2) {
        let step = if forward { w[1] - w[0] } else { w[0] - w[1] };
        worst = worst.min(step);
    }
    worst < -slack
}

/// log2(e_coarse / e_fine): the observed order for a spacing halving.
pub fn refinement_rate(e_coarse: f64, e_fine: f64) -> f64 {
    (e_coarse / e_fine).log2()
}
