//! Pointwise evaluators for the two normal-motion laws in parametric form.
//!
//! Mean curvature motion uses the fully parabolic form `X_t = X_ss / |X_s|^2`
//! whose normal component is kappa. Surface diffusion uses the collected
//! fourth-order scheme whose normal component is `-kappa_ss`; the lower-order
//! terms are exactly the ones that cancel the tangential fourth derivative.

use crate::curve::GridCurve;
use crate::error::{Error, Result};
use crate::vec2::Vec2;

#[derive(Clone, Copy, Debug)]
pub struct MotionCoefficients {
    /// Mean-curvature mobility.
    pub a: f64,
    /// Surface-diffusion mobility.
    pub b: f64,
}

impl MotionCoefficients {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if a <= 0.0 {
            return Err(Error::NonpositiveCoefficient { name: "A", value: a });
        }
        if b <= 0.0 {
            return Err(Error::NonpositiveCoefficient { name: "B", value: b });
        }
        Ok(MotionCoefficients { a, b })
    }
}

/// Space and time rescaling factors `(R, T)` that map the laws
/// `V = A kappa`, `V = -B kappa_ss` to unit coefficients:
/// `X~ = R X`, `t~ = T t` with `R = sqrt(A/B)`, `T = A^2/B`.
pub fn normalize_coefficients(coeffs: MotionCoefficients) -> (f64, f64) {
    let r = (coeffs.a / coeffs.b).sqrt();
    let t = coeffs.a * coeffs.a / coeffs.b;
    (r, t)
}

/// `X_t = X_sigmasigma / |X_sigma|^2`; normal component approximates kappa.
pub fn mcf_velocity(curve: &GridCurve, j: i32) -> Result<Vec2> {
    let d1 = curve.d1(j)?;
    let len = d1.norm();
    if len <= curve.eps_len() {
        return Err(Error::DegenerateParametrization { j, len });
    }
    Ok(curve.d2(j)? / len.powi(2))
}

/// The collected surface-diffusion scheme
/// `X_t = -X_4s/|X_s|^4 + 6 S_ss X_3s/|X_s|^5
///        - (15 S_ss^2/|X_s|^4 - 4 S_sss/|X_s|^3 + kappa^2) X_2s/|X_s|^2`
/// (all derivatives in sigma); normal component approximates `-kappa_ss`.
pub fn sd_velocity(curve: &GridCurve, j: i32) -> Result<Vec2> {
    let d1 = curve.d1(j)?;
    let len = d1.norm();
    if len <= curve.eps_len() {
        return Err(Error::DegenerateParametrization { j, len });
    }
    let d2 = curve.d2(j)?;
    let d3 = curve.d3(j)?;
    let d4 = curve.d4(j)?;
    let (_, s2, s3) = curve.arc_quantities(j)?;
    let kappa = d2.dot(d1.perp()) / len.powi(3);
    let coeff = 15.0 * s2 * s2 / len.powi(4) - 4.0 * s3 / len.powi(3) + kappa * kappa;
    Ok(-1.0 * d4 / len.powi(4) + 6.0 * s2 * d3 / len.powi(5) - coeff * d2 / len.powi(2))
}

/// How the artificial tangential velocity term is formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TangentialMode {
    /// `alpha (X_4s/|X_s|^4 . t) t`; negative alpha (around -100) works well.
    FourthOrder,
    /// `alpha (X_2s/|X_s|^2 . t) t`; use positive alpha (around +100).
    SecondOrder,
}

/// Surface diffusion with the tangential adjustment term added. The normal
/// component is identical to `sd_velocity` up to rounding.
pub fn sd_velocity_adjusted(
    curve: &GridCurve,
    j: i32,
    alpha: f64,
    mode: TangentialMode,
) -> Result<Vec2> {
    let base = sd_velocity(curve, j)?;
    if alpha == 0.0 {
        return Ok(base);
    }
    let d1 = curve.d1(j)?;
    let len = d1.norm();
    let tangent = d1 / len;
    let probe = match mode {
        TangentialMode::FourthOrder => curve.d4(j)? / len.powi(4),
        TangentialMode::SecondOrder => curve.d2(j)? / len.powi(2),
    };
    Ok(base + alpha * probe.dot(tangent) * tangent)
}

/// Relative chord spread above which a curve no longer counts as arc-length
/// parameterized for the identity check.
const ARCLENGTH_SPREAD_TOL: f64 = 1e-6;

/// Gap in the identity `kappa_ss = (X_ssss + kappa^2 X_ss) . n`, measured
/// against a centered second difference of the nodal curvature. Requires an
/// (approximately) arc-length parameterized curve; regrid first.
pub fn kappa_ss_identity_gap(curve: &GridCurve, j: i32) -> Result<f64> {
    let spread = curve.chord_spread();
    if spread > ARCLENGTH_SPREAD_TOL {
        return Err(Error::NotArcLength { max_rel_spread: spread });
    }
    let d1 = curve.d1(j)?;
    let len = d1.norm();
    if len <= curve.eps_len() {
        return Err(Error::DegenerateParametrization { j, len });
    }
    let (_, normal) = curve.unit_frames(j)?;
    let kappa = curve.curvature(j)?;
    let lhs = (curve.d4(j)? / len.powi(4) + kappa * kappa * curve.d2(j)? / len.powi(2)).dot(normal);
    let ds = curve.h() * len;
    let kappa_ss_fd =
        (curve.curvature(j + 1)? + curve.curvature(j - 1)? - 2.0 * kappa) / (ds * ds);
    Ok((lhs - kappa_ss_fd).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::Topology;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn circle(n: usize, r: f64) -> GridCurve {
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

    fn ellipse(n: usize, a: f64, b: f64) -> GridCurve {
        GridCurve::closed(
            (1..=n)
                .map(|j| {
                    let t = 2.0 * PI * (j as f64 - 0.5) / n as f64;
                    Vec2::new(a * t.cos(), b * t.sin())
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn mcf_on_unit_circle_points_inward_with_unit_speed() {
        let c = circle(128, 1.0);
        for j in [1, 31, 77] {
            let v = mcf_velocity(&c, j).unwrap();
            let x = c.point(j).unwrap();
            assert!((v + x).norm() < 1e-3, "expected ~ -X, got {v:?}");
        }
    }

    #[test]
    fn mcf_zero_on_uniform_line_and_tangential_on_stretched_line() {
        let n = 16;
        let mk = |spacing: &dyn Fn(i32) -> f64| {
            let mut c = GridCurve::open(
                (1..=n).map(|j| Vec2::new(spacing(j), 0.3 * spacing(j))).collect(),
                Topology::Open,
            )
            .unwrap();
            c.set_point(0, Vec2::new(spacing(0), 0.3 * spacing(0)));
            c.set_point(-1, Vec2::new(spacing(-1), 0.3 * spacing(-1)));
            c.set_point(n + 1, Vec2::new(spacing(n + 1), 0.3 * spacing(n + 1)));
            c
        };
        let uniform = mk(&|j| j as f64 * 0.1);
        for j in 1..=n {
            assert!(mcf_velocity(&uniform, j).unwrap().norm() < 1e-12);
        }
        // quadratic stretch: velocity is purely tangential
        let stretched = mk(&|j| j as f64 * 0.1 + 0.002 * (j as f64).powi(2));
        for j in 2..n {
            let v = mcf_velocity(&stretched, j).unwrap();
            let (_, normal) = stretched.unit_frames(j).unwrap();
            assert!(v.norm() > 1e-6);
            assert_abs_diff_eq!(v.dot(normal), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn sd_vanishes_on_circles_and_lines() {
        // circles are surface-diffusion equilibria; discrete residual O(h^2)
        let mut prev = f64::INFINITY;
        for &n in &[32usize, 64, 128] {
            let c = circle(n, 1.0);
            let mut vmax: f64 = 0.0;
            for j in 1..=n as i32 {
                vmax = vmax.max(sd_velocity(&c, j).unwrap().norm());
            }
            assert!(vmax < prev);
            prev = vmax;
        }
        assert!(prev < 1e-2);

        let n = 12;
        let mut line = GridCurve::open(
            (1..=n).map(|j| Vec2::new(j as f64, -2.0 * j as f64)).collect(),
            Topology::Open,
        )
        .unwrap();
        for j in [-1, 0, n + 1] {
            line.set_point(j, Vec2::new(j as f64, -2.0 * j as f64));
        }
        // fourth-order stencil reaches j-2..j+2: valid through N-1
        for j in 1..n {
            assert!(sd_velocity(&line, j).unwrap().norm() < 1e-10);
        }
    }

    #[test]
    fn sd_normal_component_matches_minus_kappa_ss_on_ellipse() {
        // oracle: analytic kappa(t) differentiated twice w.r.t. arc length
        let (a, b): (f64, f64) = (2.0, 1.0);
        let kappa_ss = |t: f64| {
            let w = |t: f64| a * a * t.sin().powi(2) + b * b * t.cos().powi(2);
            let k = |t: f64| a * b / w(t).powf(1.5);
            // dk/ds = k'(t)/sqrt(w); d2k/ds2 = (k''(t) - k'(t) w'/(2w)) / w
            let dt = 1e-5;
            let kp = (k(t + dt) - k(t - dt)) / (2.0 * dt);
            let kpp = (k(t + dt) + k(t - dt) - 2.0 * k(t)) / (dt * dt);
            let wp = (w(t + dt) - w(t - dt)) / (2.0 * dt);
            (kpp - kp * wp / (2.0 * w(t))) / w(t)
        };
        let mut errs = Vec::new();
        for &n in &[64usize, 128, 256] {
            let c = ellipse(n, a, b);
            let mut emax: f64 = 0.0;
            for j in 1..=n as i32 {
                let t = 2.0 * PI * (j as f64 - 0.5) / n as f64;
                let v = sd_velocity(&c, j).unwrap();
                let (_, normal) = c.unit_frames(j).unwrap();
                emax = emax.max((v.dot(normal) + kappa_ss(t)).abs());
            }
            errs.push(emax);
        }
        for w in errs.windows(2) {
            let slope = (w[0] / w[1]).log2();
            assert!((slope - 2.0).abs() < 0.3, "slope {slope}");
        }
    }

    #[test]
    fn adjustment_is_tangential_and_alpha_zero_is_identity() {
        let c = ellipse(64, 2.0, 1.0);
        for j in [3, 20, 50] {
            let base = sd_velocity(&c, j).unwrap();
            assert_eq!(
                sd_velocity_adjusted(&c, j, 0.0, TangentialMode::FourthOrder).unwrap(),
                base
            );
            let (_, normal) = c.unit_frames(j).unwrap();
            for mode in [TangentialMode::FourthOrder, TangentialMode::SecondOrder] {
                for alpha in [-100.0, 3.5, 250.0] {
                    let adj = sd_velocity_adjusted(&c, j, alpha, mode).unwrap();
                    assert_abs_diff_eq!(
                        (adj - base).dot(normal),
                        0.0,
                        epsilon = 1e-13 * adj.norm().max(1.0)
                    );
                }
            }
        }
    }

    #[test]
    fn identity_gap_trivial_cases() {
        let c = circle(64, 1.0);
        for j in [1, 9, 40] {
            assert!(kappa_ss_identity_gap(&c, j).unwrap() < 1e-2);
        }
        let n = 12;
        let mut line = GridCurve::open(
            (1..=n).map(|j| Vec2::new(j as f64 * 0.25, 0.0)).collect(),
            Topology::Open,
        )
        .unwrap();
        for j in [-1, 0, n + 1] {
            line.set_point(j, Vec2::new(j as f64 * 0.25, 0.0));
        }
        for j in 2..n - 1 {
            assert_abs_diff_eq!(kappa_ss_identity_gap(&line, j).unwrap(), 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn identity_gap_refines_at_second_order_on_ellipse() {
        let mut errs = Vec::new();
        for &n in &[64usize, 128, 256] {
            // regrid to arc length first
            let e = ellipse(4 * n, 2.0, 1.0)
                .regrid_until_uniform(n, 1e-8, 8)
                .unwrap();
            let mut gmax: f64 = 0.0;
            for j in 1..=n as i32 {
                gmax = gmax.max(kappa_ss_identity_gap(&e, j).unwrap());
            }
            errs.push(gmax);
        }
        for w in errs.windows(2) {
            let slope = (w[0] / w[1]).log2();
            assert!((slope - 2.0).abs() < 0.3, "slope {slope}");
        }
    }

    #[test]
    fn identity_gap_rejects_non_arclength_input() {
        let c = ellipse(64, 2.0, 1.0); // uniform in t, not in arc length
        assert!(matches!(
            kappa_ss_identity_gap(&c, 5),
            Err(Error::NotArcLength { .. })
        ));
    }

    #[test]
    fn normalization_factors() {
        let (r, t) = normalize_coefficients(MotionCoefficients::new(1.0, 1.0).unwrap());
        assert_eq!((r, t), (1.0, 1.0));
        let (r, t) = normalize_coefficients(MotionCoefficients::new(4.0, 1.0).unwrap());
        assert_eq!((r, t), (2.0, 16.0));
        assert!(MotionCoefficients::new(-1.0, 1.0).is_err());
        assert!(MotionCoefficients::new(1.0, 0.0).is_err());
    }
}
