//! Staggered-grid planar curves and the finite-difference primitives shared by
//! every formulation.
//!
//! Node `j` approximates `X((j - 1/2) h)` with `h = 1/N`, so the ends of an
//! open curve (`sigma = 0` and `sigma = 1`) fall on cell faces, not on nodes.
//! Ghost slots at `j = -1, 0, N+1` live inside the curve so stencil code is
//! uniform; reading an unset ghost is an explicit error, never an
//! extrapolation. Closed curves index periodically and have no ghosts.

use crate::error::{Error, Result};
use crate::vec2::Vec2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Topology {
    /// Open curve whose `sigma = 0` face is a triple junction.
    OpenJunction,
    /// Open curve with no junction bookkeeping.
    Open,
    /// Periodic curve.
    Closed,
}

/// Relative threshold for the degenerate-parametrization guard:
/// `eps_len = DEGENERACY_REL_TOL * (bounding box diameter)`.
const DEGENERACY_REL_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct GridCurve {
    /// Slot k holds node j = k - 1 for open curves (j = -1 ..= N+1);
    /// for closed curves slot k holds node j = k + 1 (j = 1 ..= N).
    pts: Vec<Option<Vec2>>,
    n: usize,
    h: f64,
    topology: Topology,
    /// True when `sigma` increases away from the junction (the sign
    /// convention under which the junction conditions are written).
    sigma_away_from_junction: bool,
    eps_len: f64,
}

impl GridCurve {
    /// Open curve from interior nodes `X_1 ..= X_N`; ghost slots start unset.
    pub fn open(points: Vec<Vec2>, topology: Topology) -> Result<Self> {
        if topology == Topology::Closed {
            return Err(Error::NotOpen);
        }
        let n = points.len();
        if n < 4 {
            return Err(Error::TooFewNodes { needed: 4, got: n });
        }
        let mut pts = vec![None; n + 3];
        for (i, p) in points.into_iter().enumerate() {
            pts[i + 2] = Some(p);
        }
        let mut c = GridCurve {
            pts,
            n,
            h: 1.0 / n as f64,
            topology,
            sigma_away_from_junction: topology == Topology::OpenJunction,
            eps_len: 0.0,
        };
        c.refresh_degeneracy_threshold();
        Ok(c)
    }

    /// Closed curve from nodes `X_1 ..= X_N`, indexed periodically.
    pub fn closed(points: Vec<Vec2>) -> Result<Self> {
        let n = points.len();
        if n < 4 {
            return Err(Error::TooFewNodes { needed: 4, got: n });
        }
        let mut c = GridCurve {
            pts: points.into_iter().map(Some).collect(),
            n,
            h: 1.0 / n as f64,
            topology: Topology::Closed,
            sigma_away_from_junction: false,
            eps_len: 0.0,
        };
        c.refresh_degeneracy_threshold();
        Ok(c)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn sigma_away_from_junction(&self) -> bool {
        self.sigma_away_from_junction
    }

    pub fn eps_len(&self) -> f64 {
        self.eps_len
    }

    /// `sigma` of node `j` under the staggered convention.
    pub fn sigma(&self, j: i32) -> f64 {
        (j as f64 - 0.5) * self.h
    }

    fn slot(&self, j: i32) -> Option<usize> {
        match self.topology {
            Topology::Closed => {
                let n = self.n as i32;
                Some((j - 1).rem_euclid(n) as usize)
            }
            _ => {
                if j < -1 || j > self.n as i32 + 1 {
                    None
                } else {
                    Some((j + 1) as usize)
                }
            }
        }
    }

    pub fn point(&self, j: i32) -> Result<Vec2> {
        self.slot(j)
            .and_then(|k| self.pts[k])
            .ok_or(Error::UnsetNode { j })
    }

    pub fn try_point(&self, j: i32) -> Option<Vec2> {
        self.slot(j).and_then(|k| self.pts[k])
    }

    pub fn set_point(&mut self, j: i32, p: Vec2) {
        let k = self.slot(j).expect("node index out of slot range");
        self.pts[k] = Some(p);
    }

    pub fn clear_ghosts(&mut self) {
        if self.topology != Topology::Closed {
            let n = self.n as i32;
            for j in [-1, 0, n + 1] {
                let k = self.slot(j).unwrap();
                self.pts[k] = None;
            }
        }
    }

    /// Interior nodes `X_1 ..= X_N` in order.
    pub fn interior(&self) -> impl Iterator<Item = Vec2> + '_ {
        (1..=self.n as i32).map(|j| self.point(j).unwrap())
    }

    /// Recompute the degeneracy threshold from the current bounding box.
    pub fn refresh_degeneracy_threshold(&mut self) {
        let (mut lo, mut hi) = (
            Vec2::new(f64::INFINITY, f64::INFINITY),
            Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        );
        for p in self.pts.iter().flatten() {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        let diam = (hi - lo).norm();
        self.eps_len = DEGENERACY_REL_TOL * if diam > 0.0 { diam } else { 1.0 };
    }

    // ---- finite-difference primitives (second-order centered) ----

    /// D1 X_j = (X_{j+1} - X_{j-1}) / 2h
    pub fn d1(&self, j: i32) -> Result<Vec2> {
        Ok((self.point(j + 1)? - self.point(j - 1)?) / (2.0 * self.h))
    }

    /// D2 X_j = (X_{j+1} + X_{j-1} - 2 X_j) / h^2
    pub fn d2(&self, j: i32) -> Result<Vec2> {
        Ok((self.point(j + 1)? + self.point(j - 1)? - 2.0 * self.point(j)?) / (self.h * self.h))
    }

    /// D3 X_j = (D2 X_{j+1} - D2 X_{j-1}) / 2h
    pub fn d3(&self, j: i32) -> Result<Vec2> {
        Ok((self.d2(j + 1)? - self.d2(j - 1)?) / (2.0 * self.h))
    }

    /// D4 X_j = (D2 X_{j-1} + D2 X_{j+1} - 2 D2 X_j) / h^2
    pub fn d4(&self, j: i32) -> Result<Vec2> {
        Ok((self.d2(j - 1)? + self.d2(j + 1)? - 2.0 * self.d2(j)?) / (self.h * self.h))
    }

    pub fn fd_derivative(&self, j: i32, order: u32) -> Result<Vec2> {
        match order {
            1 => self.d1(j),
            2 => self.d2(j),
            3 => self.d3(j),
            4 => self.d4(j),
            _ => Err(Error::BadDerivativeOrder { order }),
        }
    }

    /// Forward difference and forward average:
    /// `D+ X_j = (X_{j+1} - X_j)/h`, `F X_j = (X_{j+1} + X_j)/2`.
    pub fn forward_ops(&self, j: i32) -> Result<(Vec2, Vec2)> {
        let a = self.point(j)?;
        let b = self.point(j + 1)?;
        Ok(((b - a) / self.h, (a + b) * 0.5))
    }

    pub fn dplus(&self, j: i32) -> Result<Vec2> {
        Ok(self.forward_ops(j)?.0)
    }

    pub fn favg(&self, j: i32) -> Result<Vec2> {
        Ok(self.forward_ops(j)?.1)
    }

    fn guarded_d1(&self, j: i32) -> Result<Vec2> {
        let d1 = self.d1(j)?;
        let len = d1.norm();
        if len <= self.eps_len {
            return Err(Error::DegenerateParametrization { j, len });
        }
        Ok(d1)
    }

    /// `(S_sigma, S_sigmasigma, S_sigmasigmasigma)` with every derivative of X
    /// replaced by its centered difference.
    pub fn arc_quantities(&self, j: i32) -> Result<(f64, f64, f64)> {
        let d1 = self.guarded_d1(j)?;
        let d2 = self.d2(j)?;
        let d3 = self.d3(j)?;
        let s1 = d1.norm();
        let s2 = d1.dot(d2) / s1;
        let s3 = -(d1.dot(d2)).powi(2) / s1.powi(3) + (d2.dot(d2) + d1.dot(d3)) / s1;
        Ok((s1, s2, s3))
    }

    /// kappa = D2 X . (D1 X)^perp / |D1 X|^3. Positive on a counterclockwise
    /// circle under the crate's perpendicular convention.
    pub fn curvature(&self, j: i32) -> Result<f64> {
        let d1 = self.guarded_d1(j)?;
        let d2 = self.d2(j)?;
        Ok(d2.dot(d1.perp()) / d1.norm().powi(3))
    }

    /// kappa_s = D3 X . (D1 X)^perp / |D1 X|^4
    ///           - 3 S_sigmasigma (D2 X . (D1 X)^perp) / |D1 X|^5.
    pub fn curvature_s(&self, j: i32) -> Result<f64> {
        let d1 = self.guarded_d1(j)?;
        let d2 = self.d2(j)?;
        let d3 = self.d3(j)?;
        let s1 = d1.norm();
        let s2 = d1.dot(d2) / s1;
        Ok(d3.dot(d1.perp()) / s1.powi(4) - 3.0 * s2 * d2.dot(d1.perp()) / s1.powi(5))
    }

    /// Unit tangent and unit normal (`normal = tangent^perp`).
    pub fn unit_frames(&self, j: i32) -> Result<(Vec2, Vec2)> {
        let d1 = self.guarded_d1(j)?;
        let t = d1.normalized();
        Ok((t, t.perp()))
    }

    /// Shoelace area of a closed curve; positive for counterclockwise
    /// orientation.
    pub fn polygon_area(&self) -> Result<f64> {
        if self.topology != Topology::Closed {
            return Err(Error::NotClosed);
        }
        if self.n < 3 {
            return Err(Error::TooFewNodes { needed: 3, got: self.n });
        }
        let mut twice = 0.0;
        for j in 1..=self.n as i32 {
            let a = self.point(j)?;
            let b = self.point(j + 1)?;
            twice += a.x * b.y - b.x * a.y;
        }
        Ok(0.5 * twice)
    }

    /// Total length of the interior polyline (closed curves include the wrap
    /// segment).
    pub fn chord_length(&self) -> f64 {
        let mut total = 0.0;
        let last = if self.topology == Topology::Closed {
            self.n as i32
        } else {
            self.n as i32 - 1
        };
        for j in 1..=last {
            total += (self.point(j + 1).unwrap() - self.point(j).unwrap()).norm();
        }
        total
    }

    /// Largest relative difference between adjacent chord lengths.
    pub fn chord_spread(&self) -> f64 {
        let last = if self.topology == Topology::Closed {
            self.n as i32
        } else {
            self.n as i32 - 1
        };
        let mut spread: f64 = 0.0;
        let mut prev = (self.point(2).unwrap() - self.point(1).unwrap()).norm();
        for j in 2..=last {
            let c = (self.point(j + 1).unwrap() - self.point(j).unwrap()).norm();
            let mid = 0.5 * (c + prev);
            if mid > 0.0 {
                spread = spread.max((c - prev).abs() / mid);
            }
            prev = c;
        }
        spread
    }

    /// Resample to `target_n` nodes equally spaced in cumulative chord length,
    /// interpolating with piecewise cubics (Catmull-Rom with chord
    /// parametrization) through the existing interior nodes. Open-curve
    /// endpoints are preserved; ghosts of the result start unset.
    pub fn regrid_uniform(&self, target_n: usize) -> Result<GridCurve> {
        if target_n < 4 {
            return Err(Error::TooFewNodes { needed: 4, got: target_n });
        }
        let spline = ChordSpline::new(self)?;
        let out = (0..target_n)
            .map(|k| {
                let tau = if spline.closed {
                    k as f64 * spline.total / target_n as f64
                } else {
                    k as f64 * spline.total / (target_n as f64 - 1.0)
                };
                spline.eval(tau)
            })
            .collect();
        self.rebuild_like(out)
    }

    /// Resample until the output chord spread drops below `spread_tol`,
    /// iterating the node parameters on one spline of `self` (no repeated
    /// re-interpolation, so no geometry loss). Returns the last iterate even
    /// if the tolerance was not reached within `max_passes`.
    pub fn regrid_until_uniform(
        &self,
        target_n: usize,
        spread_tol: f64,
        max_passes: usize,
    ) -> Result<GridCurve> {
        if target_n < 4 {
            return Err(Error::TooFewNodes { needed: 4, got: target_n });
        }
        let spline = ChordSpline::new(self)?;
        let closed = spline.closed;
        let slots = if closed { target_n + 1 } else { target_n };
        let mut taus: Vec<f64> = (0..slots)
            .map(|k| {
                if closed {
                    k as f64 * spline.total / target_n as f64
                } else {
                    k as f64 * spline.total / (target_n as f64 - 1.0)
                }
            })
            .collect();
        let mut pts: Vec<Vec2> = taus.iter().map(|&t| spline.eval(t)).collect();

        for _ in 0..max_passes.max(1) {
            // cumulative chord of the current samples (closed includes wrap
            // through the duplicated first node at taus.last)
            let mut cum = vec![0.0];
            for w in pts.windows(2) {
                cum.push(cum.last().unwrap() + (w[1] - w[0]).norm());
            }
            let total = *cum.last().unwrap();
            let mut spread: f64 = 0.0;
            for w in cum.windows(3) {
                let (a, b) = (w[1] - w[0], w[2] - w[1]);
                spread = spread.max((b - a).abs() / (0.5 * (a + b)));
            }
            if spread <= spread_tol {
                break;
            }
            // move each interior parameter to where the current cumulative
            // chord hits its equal-fraction target
            let denom = if closed { target_n } else { target_n - 1 } as f64;
            let mut seg = 0usize;
            let mut new_taus = taus.clone();
            for (k, nt) in new_taus.iter_mut().enumerate().take(slots).skip(1) {
                if !closed && k == target_n - 1 {
                    break; // keep the far endpoint
                }
                if closed && k == target_n {
                    break; // wrap slot stays at total
                }
                let target = k as f64 * total / denom;
                while seg + 1 < cum.len() - 1 && cum[seg + 1] < target {
                    seg += 1;
                }
                let f = (target - cum[seg]) / (cum[seg + 1] - cum[seg]);
                *nt = taus[seg] + f * (taus[seg + 1] - taus[seg]);
            }
            taus = new_taus;
            for (p, &t) in pts.iter_mut().zip(&taus) {
                *p = spline.eval(t);
            }
        }
        if closed {
            pts.pop();
        }
        self.rebuild_like(pts)
    }

    fn rebuild_like(&self, pts: Vec<Vec2>) -> Result<GridCurve> {
        if self.topology == Topology::Closed {
            let mut c = GridCurve::closed(pts)?;
            c.sigma_away_from_junction = self.sigma_away_from_junction;
            Ok(c)
        } else {
            let mut c = GridCurve::open(pts, self.topology)?;
            c.sigma_away_from_junction = self.sigma_away_from_junction;
            Ok(c)
        }
    }
}

/// Piecewise-cubic (Catmull-Rom) interpolant through a curve's interior
/// nodes, parameterized by cumulative chord length.
struct ChordSpline {
    nodes: Vec<Vec2>,
    t: Vec<f64>,
    total: f64,
    closed: bool,
}

impl ChordSpline {
    fn new(curve: &GridCurve) -> Result<Self> {
        let closed = curve.topology == Topology::Closed;
        let nodes: Vec<Vec2> = curve.interior().collect();
        let n = nodes.len();
        let mut t = Vec::with_capacity(n);
        t.push(0.0);
        for i in 1..n {
            let step = (nodes[i] - nodes[i - 1]).norm();
            if step <= curve.eps_len {
                return Err(Error::DegenerateParametrization {
                    j: i as i32 + 1,
                    len: step,
                });
            }
            t.push(t[i - 1] + step);
        }
        let total = if closed {
            t[n - 1] + (nodes[0] - nodes[n - 1]).norm()
        } else {
            t[n - 1]
        };
        Ok(ChordSpline { nodes, t, total, closed })
    }

    fn node(&self, i: i64) -> Vec2 {
        let n = self.nodes.len() as i64;
        if self.closed {
            self.nodes[i.rem_euclid(n) as usize]
        } else {
            self.nodes[i.clamp(0, n - 1) as usize]
        }
    }

    fn tval(&self, i: i64) -> f64 {
        let n = self.nodes.len() as i64;
        if self.closed {
            let wrap = i.div_euclid(n);
            self.t[i.rem_euclid(n) as usize] + wrap as f64 * self.total
        } else if i < 0 {
            self.t[0] - (self.t[1] - self.t[0])
        } else if i >= n {
            let last = self.t.len() - 1;
            self.t[last] + (self.t[last] - self.t[last - 1])
        } else {
            self.t[i as usize]
        }
    }

    fn eval(&self, tau: f64) -> Vec2 {
        let n = self.nodes.len();
        let tau = if self.closed {
            tau.rem_euclid(self.total)
        } else {
            tau.clamp(0.0, self.total)
        };
        // locate the segment by binary search on the node parameters
        let max_seg = if self.closed { n - 1 } else { n - 2 };
        let mut lo = 0usize;
        let mut hi = max_seg;
        while lo < hi {
            let mid = (lo + hi + 1) / 2;
            if self.t[mid.min(n - 1)] <= tau && mid <= max_seg {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        let seg = lo.min(max_seg);
        let i = seg as i64;
        let (p0, p1, p2, p3) = (
            self.node(i - 1),
            self.node(i),
            self.node(i + 1),
            self.node(i + 2),
        );
        let (t0, t1, t2, t3) = (self.tval(i - 1), self.tval(i), self.tval(i + 1), self.tval(i + 2));
        let dt = t2 - t1;
        let m1 = if !self.closed && seg == 0 {
            (p2 - p1) / dt
        } else {
            (p2 - p0) / (t2 - t0)
        };
        let m2 = if !self.closed && seg == n - 2 {
            (p2 - p1) / dt
        } else {
            (p3 - p1) / (t3 - t1)
        };
        let u = (tau - t1) / dt;
        let (u2, u3) = (u * u, u * u * u);
        let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
        let h10 = u3 - 2.0 * u2 + u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = u3 - u2;
        h00 * p1 + (h10 * dt) * m1 + h01 * p2 + (h11 * dt) * m2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::PI;

    fn line_curve(n: usize, h_pos: f64) -> GridCurve {
        // X_j = ((j - 1/2) c h, 2 (j - 1/2) c h) sampled uniformly, ghosts set
        let mut c = GridCurve::open(
            (1..=n)
                .map(|j| {
                    let s = (j as f64 - 0.5) * h_pos;
                    Vec2::new(s, 2.0 * s)
                })
                .collect(),
            Topology::Open,
        )
        .unwrap();
        for j in [-1, 0, n as i32 + 1] {
            let s = (j as f64 - 0.5) * h_pos;
            c.set_point(j, Vec2::new(s, 2.0 * s));
        }
        c
    }

    fn circle_curve(n: usize, r: f64) -> GridCurve {
        GridCurve::closed(
            (1..=n)
                .map(|j| {
                    let th = 2.0 * PI * (j as f64 - 0.5) / n as f64;
                    Vec2::new(r * th.cos(), r * th.sin())
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn d2_annihilates_linear_data() {
        let c = line_curve(8, 0.125);
        for j in 1..=8 {
            let d2 = c.d2(j).unwrap();
            assert_abs_diff_eq!(d2.x, 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(d2.y, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn d1_exact_on_quadratics() {
        // u_j = ((j-1/2) h)^2, v_j = 0
        let n = 10;
        let h = 1.0 / n as f64;
        let mut c = GridCurve::open(
            (1..=n)
                .map(|j| {
                    let s = (j as f64 - 0.5) * h;
                    Vec2::new(s * s, 0.0)
                })
                .collect(),
            Topology::Open,
        )
        .unwrap();
        for j in [-1, 0, n as i32 + 1] {
            let s = (j as f64 - 0.5) * h;
            c.set_point(j, Vec2::new(s * s, 0.0));
        }
        for j in 2..n as i32 {
            let s = (j as f64 - 0.5) * h;
            let d1 = c.d1(j).unwrap();
            assert_abs_diff_eq!(d1.x, 2.0 * s, epsilon = 1e-12);
            assert_abs_diff_eq!(d1.y, 0.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn d2_exact_on_cubics() {
        let n = 10;
        let h = 1.0 / n as f64;
        let cubic = |s: f64| Vec2::new(s * s * s, 0.0);
        let mut c = GridCurve::open(
            (1..=n).map(|j| cubic((j as f64 - 0.5) * h)).collect(),
            Topology::Open,
        )
        .unwrap();
        c.set_point(0, cubic(-0.5 * h));
        for j in 1..=n as i32 - 1 {
            let s = (j as f64 - 0.5) * h;
            assert_abs_diff_eq!(c.d2(j).unwrap().x, 6.0 * s, epsilon = 1e-9);
        }
    }

    #[test]
    fn first_derivative_matches_circle_analytics_at_second_order() {
        // Max error of D1 against the analytic X_sigma drops at slope ~2.
        let mut errs = Vec::new();
        for &n in &[32usize, 64, 128] {
            let c = circle_curve(n, 1.0);
            let mut emax: f64 = 0.0;
            for j in 1..=n as i32 {
                let th = 2.0 * PI * (j as f64 - 0.5) / n as f64;
                let exact = Vec2::new(-th.sin(), th.cos()) * (2.0 * PI);
                let got = c.d1(j).unwrap();
                emax = emax.max((got - exact).norm());
            }
            errs.push(emax);
        }
        for w in errs.windows(2) {
            let slope = (w[0] / w[1]).log2();
            assert!((slope - 2.0).abs() < 0.2, "slope {slope}");
        }
    }

    #[test]
    fn forward_ops_basics() {
        let mut c = GridCurve::open(
            vec![
                Vec2::ZERO,
                Vec2::new(1.0, 1.0),
                Vec2::new(2.0, 2.0),
                Vec2::new(3.0, 3.0),
            ],
            Topology::Open,
        )
        .unwrap();
        c.set_point(0, Vec2::new(-1.0, -1.0));
        let h = c.h();
        let (dplus, favg) = c.forward_ops(1).unwrap();
        assert_abs_diff_eq!(dplus.x, 1.0 / h, epsilon = 1e-14);
        assert_abs_diff_eq!(favg.x, 0.5, epsilon = 1e-14);

        // constant curve: dplus = 0, favg = the constant
        let k = GridCurve::open(vec![Vec2::new(2.0, -1.0); 4], Topology::Open).unwrap();
        let (dp, fa) = k.forward_ops(2).unwrap();
        assert_eq!(dp, Vec2::ZERO);
        assert_eq!(fa, Vec2::new(2.0, -1.0));
    }

    #[test]
    fn unset_ghost_is_an_error() {
        let c = GridCurve::open(
            vec![Vec2::ZERO, Vec2::new(1.0, 0.0), Vec2::new(2.0, 0.0), Vec2::new(3.0, 0.0)],
            Topology::Open,
        )
        .unwrap();
        assert!(matches!(c.d2(1), Err(Error::UnsetNode { j: 0 })));
        assert!(matches!(c.d1(4), Err(Error::UnsetNode { j: 5 })));
    }

    #[test]
    fn arc_quantities_on_uniform_line() {
        let c = line_curve(8, 0.25);
        // position spacing 0.25*sqrt(5) per node step, h = 1/8
        let expect_s1 = 0.25 * 5.0_f64.sqrt() / c.h();
        for j in 2..8 {
            let (s1, s2, s3) = c.arc_quantities(j).unwrap();
            assert_relative_eq!(s1, expect_s1, epsilon = 1e-12);
            assert_abs_diff_eq!(s2, 0.0, epsilon = 1e-9);
            assert_abs_diff_eq!(s3, 0.0, epsilon = 1e-7);
        }
    }

    #[test]
    fn arc_quantities_circle_s2_vanishes() {
        // uniform circle: D1 and D2 are exactly orthogonal by symmetry, so the
        // discrete S_sigmasigma sits at rounding level for every N
        for &n in &[32usize, 64, 128] {
            let c = circle_curve(n, 1.0);
            for j in 1..=n as i32 {
                let (_, s2, _) = c.arc_quantities(j).unwrap();
                assert!(s2.abs() < 1e-9, "n={n} j={j} s2={s2}");
            }
        }
    }

    #[test]
    fn arc_quantities_quadratic_reparametrized_line() {
        // X(sigma) = (q, 2q) with q = sigma + 0.3 sigma^2:
        // S_sigma = sqrt(5) q', S_ss = sqrt(5) * 0.6, S_sss = 0.
        let n = 64;
        let h = 1.0 / n as f64;
        let q = |s: f64| s + 0.3 * s * s;
        let mut c = GridCurve::open(
            (1..=n)
                .map(|j| {
                    let s = (j as f64 - 0.5) * h;
                    Vec2::new(q(s), 2.0 * q(s))
                })
                .collect(),
            Topology::Open,
        )
        .unwrap();
        for j in [-1i32, 0, n as i32 + 1] {
            let s = (j as f64 - 0.5) * h;
            c.set_point(j, Vec2::new(q(s), 2.0 * q(s)));
        }
        let root5 = 5.0_f64.sqrt();
        for j in [2, n as i32 / 2, n as i32 - 1] {
            let s = (j as f64 - 0.5) * h;
            let (s1, s2, s3) = c.arc_quantities(j).unwrap();
            assert_relative_eq!(s1, root5 * (1.0 + 0.6 * s), max_relative = 1e-3);
            assert_relative_eq!(s2, root5 * 0.6, max_relative = 1e-3);
            assert_abs_diff_eq!(s3, 0.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn curvature_circle_and_line() {
        let c = circle_curve(128, 2.0);
        for j in [1, 17, 40] {
            assert_relative_eq!(c.curvature(j).unwrap(), 0.5, max_relative = 2e-3);
        }
        let l = line_curve(8, 0.125);
        for j in 2..8 {
            assert_abs_diff_eq!(l.curvature(j).unwrap(), 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn curvature_ellipse_second_order() {
        // kappa = a b / (a^2 sin^2 t + b^2 cos^2 t)^(3/2), here evaluated at
        // the node nearest t = 0 for (2 cos t, sin t).
        let (a, b) = (2.0, 1.0);
        let mut errs = Vec::new();
        for &n in &[64usize, 128, 256] {
            let c = GridCurve::closed(
                (1..=n)
                    .map(|j| {
                        let t = 2.0 * PI * (j as f64 - 0.5) / n as f64;
                        Vec2::new(a * t.cos(), b * t.sin())
                    })
                    .collect(),
            )
            .unwrap();
            let mut emax: f64 = 0.0;
            for j in 1..=n as i32 {
                let t = 2.0 * PI * (j as f64 - 0.5) / n as f64;
                let exact = a * b / (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).powf(1.5);
                emax = emax.max((c.curvature(j).unwrap() - exact).abs());
            }
            errs.push(emax);
        }
        for w in errs.windows(2) {
            let slope = (w[0] / w[1]).log2();
            assert!((slope - 2.0).abs() < 0.2, "slope {slope}");
        }
    }

    #[test]
    fn curvature_s_matches_ellipse_analytics() {
        // d kappa / ds = kappa'(t) / |X'(t)|
        let (a, b): (f64, f64) = (2.0, 1.0);
        let mut errs = Vec::new();
        for &n in &[64usize, 128, 256] {
            let c = GridCurve::closed(
                (1..=n)
                    .map(|j| {
                        let t = 2.0 * PI * (j as f64 - 0.5) / n as f64;
                        Vec2::new(a * t.cos(), b * t.sin())
                    })
                    .collect(),
            )
            .unwrap();
            let mut emax: f64 = 0.0;
            for j in 1..=n as i32 {
                let t = 2.0 * PI * (j as f64 - 0.5) / n as f64;
                let w = a * a * t.sin().powi(2) + b * b * t.cos().powi(2);
                let dw = (a * a - b * b) * (2.0 * t).sin();
                let dkdt = -1.5 * a * b * dw / w.powf(2.5);
                let speed = w.sqrt();
                emax = emax.max((c.curvature_s(j).unwrap() - dkdt / speed).abs());
            }
            errs.push(emax);
        }
        for w in errs.windows(2) {
            let slope = (w[0] / w[1]).log2();
            assert!((slope - 2.0).abs() < 0.2, "slope {slope}");
        }
        // circle: kappa_s = 0
        let c = circle_curve(64, 1.5);
        for j in 1..=64 {
            assert_abs_diff_eq!(c.curvature_s(j).unwrap(), 0.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn frames_orthonormal_and_oriented() {
        let c = circle_curve(128, 1.0);
        for j in 1..=128 {
            let (t, n) = c.unit_frames(j).unwrap();
            assert_abs_diff_eq!(t.norm(), 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(n.norm(), 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(t.dot(n), 0.0, epsilon = 1e-14);
            // ccw circle: normal points inward (toward -X) under this
            // perpendicular convention
            let x = c.point(j).unwrap();
            assert!(n.dot(x) < 0.0);
        }
        // horizontal line left-to-right
        let mut l = GridCurve::open(
            (1..=4).map(|j| Vec2::new(j as f64, 0.0)).collect(),
            Topology::Open,
        )
        .unwrap();
        l.set_point(0, Vec2::new(0.0, 0.0));
        let (t, n) = l.unit_frames(1).unwrap();
        assert_abs_diff_eq!(t.x, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(n.y, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn polygon_area_basics() {
        let sq = GridCurve::closed(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ])
        .unwrap();
        assert_abs_diff_eq!(sq.polygon_area().unwrap(), 1.0, epsilon = 1e-15);

        let c = circle_curve(256, 1.0);
        assert_abs_diff_eq!(c.polygon_area().unwrap(), PI, epsilon = 1e-3);

        let mut reversed: Vec<Vec2> = c.interior().collect();
        reversed.reverse();
        let rev = GridCurve::closed(reversed).unwrap();
        assert_abs_diff_eq!(
            rev.polygon_area().unwrap(),
            -c.polygon_area().unwrap(),
            epsilon = 1e-12
        );

        let open = GridCurve::open(
            vec![Vec2::ZERO, Vec2::new(1.0, 0.0), Vec2::new(2.0, 0.0), Vec2::new(3.0, 0.0)],
            Topology::Open,
        )
        .unwrap();
        assert!(matches!(open.polygon_area(), Err(Error::NotClosed)));
    }

    #[test]
    fn polygon_area_translation_invariant() {
        let c = circle_curve(64, 1.0);
        let shifted = GridCurve::closed(
            c.interior().map(|p| p + Vec2::new(17.25, -3.5)).collect(),
        )
        .unwrap();
        assert_abs_diff_eq!(
            c.polygon_area().unwrap(),
            shifted.polygon_area().unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn regrid_identity_on_uniform_line() {
        let n = 16;
        let c = GridCurve::open(
            (1..=n).map(|j| Vec2::new(j as f64 * 0.5, j as f64)).collect(),
            Topology::Open,
        )
        .unwrap();
        let r = c.regrid_uniform(n as usize).unwrap();
        for j in 1..=n {
            let d = (r.point(j).unwrap() - c.point(j).unwrap()).norm();
            assert!(d < 1e-12, "node {j} moved by {d}");
        }
    }

    #[test]
    fn regrid_equalizes_geometric_spacing() {
        // geometric progression spacing along a line
        let mut xs = vec![0.0];
        let mut step = 1.0;
        for _ in 0..19 {
            let last = *xs.last().unwrap();
            xs.push(last + step);
            step *= 1.15;
        }
        let c = GridCurve::open(
            xs.iter().map(|&x| Vec2::new(x, -0.5 * x)).collect(),
            Topology::Open,
        )
        .unwrap();
        let r = c.regrid_uniform(20).unwrap();
        let mut chords = Vec::new();
        for j in 1..20 {
            chords.push((r.point(j + 1).unwrap() - r.point(j).unwrap()).norm());
        }
        let c0 = chords[0];
        for &ch in &chords {
            assert_abs_diff_eq!(ch, c0, epsilon = 1e-10);
        }
        // endpoints preserved
        assert!((r.point(1).unwrap() - c.point(1).unwrap()).norm() < 1e-12);
        assert!((r.point(20).unwrap() - c.point(20).unwrap()).norm() < 1e-12);
    }

    #[test]
    fn regrid_circle_preserves_area() {
        let c = circle_curve(128, 1.0);
        // perturb the parametrization, then regrid back to uniform
        let warped = GridCurve::closed(
            (1..=128)
                .map(|j| {
                    let t = 2.0 * PI * (j as f64 - 0.5) / 128.0;
                    let t2 = t + 0.3 * (t.sin() * t.cos());
                    Vec2::new(t2.cos(), t2.sin())
                })
                .collect(),
        )
        .unwrap();
        let r = warped.regrid_uniform(128).unwrap();
        let a0 = c.polygon_area().unwrap();
        let a1 = r.polygon_area().unwrap();
        assert!((a0 - a1).abs() < 5e-5, "area drift {}", (a0 - a1).abs());
        // one pass leaves O(h^2) spread; iterating contracts it
        assert!(r.chord_spread() < 2e-3);
        let r2 = warped.regrid_until_uniform(128, 1e-8, 6).unwrap();
        assert!(r2.chord_spread() < 1e-8, "spread {}", r2.chord_spread());
    }

    #[test]
    fn regrid_rejects_tiny_targets() {
        let c = circle_curve(16, 1.0);
        assert!(matches!(
            c.regrid_uniform(3),
            Err(Error::TooFewNodes { .. })
        ));
    }
}
