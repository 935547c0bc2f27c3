//! The PDAE formulation: scalar normal-motion equations per node coupled with
//! the algebraic equidistribution constraint `X_sigma . X_sigmasigma = 0`,
//! which keeps the nodes of each curve equally spaced.
//!
//! Discretely the constraint at node j is exactly proportional to
//! `|X_{j+1} - X_j|^2 - |X_j - X_{j-1}|^2`, so converged states have equal
//! adjacent chords. Surface diffusion uses the second difference of nodal
//! curvatures (valid under equidistribution), which is why the junction
//! closure only needs the three inner ghost points plus two extra unknowns:
//! the curvature values at the surface ghost nodes. Those two unknowns are
//! closed by the curvature-average and curvature-difference junction
//! conditions and feed the `j = 1` motion stencils.

use nalgebra::DVector;

use crate::curve::GridCurve;
use crate::error::{Error, Result};
use crate::newton::{newton_solve_cached, JacobianCache, NewtonConfig, StepReport};
use crate::parabolic::{QuarterLoopGeometry, QuarterLoopParabolicState};
use crate::vec2::Vec2;

#[derive(Clone, Debug)]
pub struct PdaeState {
    pub grain: GridCurve,
    pub surf_left: GridCurve,
    pub surf_right: GridCurve,
    /// Curvature unknowns at the surface ghost nodes: `kappa^2_0, kappa^3_0`.
    pub kappa_ghost: [f64; 2],
    pub m: f64,
    pub outer_anchors: [Vec2; 3],
}

impl PdaeState {
    /// Standard quarter-loop starting position (same geometry as the
    /// parabolic module), curvature ghosts seeded to zero.
    pub fn standard_initial(m: f64, ds: f64, geom: QuarterLoopGeometry) -> Result<Self> {
        let p = QuarterLoopParabolicState::standard_initial(m, ds, geom)?;
        Ok(PdaeState {
            grain: p.grain,
            surf_left: p.surf_left,
            surf_right: p.surf_right,
            kappa_ghost: [0.0, 0.0],
            m: p.m,
            outer_anchors: p.outer_anchors,
        })
    }

    /// Straight Young's-law configuration (exact discrete steady state).
    pub fn angle_exact_straight(m: f64, ds: f64, n: usize) -> Result<Self> {
        let p = QuarterLoopParabolicState::angle_exact_straight(m, ds, n)?;
        Ok(PdaeState {
            grain: p.grain,
            surf_left: p.surf_left,
            surf_right: p.surf_right,
            kappa_ghost: [0.0, 0.0],
            m: p.m,
            outer_anchors: p.outer_anchors,
        })
    }

    pub fn curves(&self) -> [&GridCurve; 3] {
        [&self.grain, &self.surf_left, &self.surf_right]
    }

    pub fn junction(&self) -> Result<Vec2> {
        self.grain.favg(0)
    }

    pub fn angle_cosine(&self) -> f64 {
        -self.m / 2.0
    }

    /// Strip solver-specific unknowns: the three curves plus the junction
    /// point, the common ground with the other formulations.
    pub fn to_common_form(&self) -> Result<([GridCurve; 3], Vec2)> {
        Ok((
            [
                self.grain.clone(),
                self.surf_left.clone(),
                self.surf_right.clone(),
            ],
            self.junction()?,
        ))
    }
}

/// Max over curves and interior nodes of `|D1 X . D2 X| / |D1 X|^2`, the
/// discrete violation of the equidistribution constraint. Degenerate nodes
/// report as infinite drift.
pub fn constraint_drift(state: &PdaeState) -> f64 {
    let mut worst: f64 = 0.0;
    for c in state.curves() {
        for j in 1..=c.n() as i32 {
            let (d1, d2) = match (c.d1(j), c.d2(j)) {
                (Ok(a), Ok(b)) => (a, b),
                _ => continue, // unset ghost: no constraint row there
            };
            let denom = d1.norm_sq();
            if denom <= c.eps_len() * c.eps_len() {
                return f64::INFINITY;
            }
            worst = worst.max((d1.dot(d2) / denom).abs());
        }
    }
    worst
}

/// Largest relative spread of adjacent chord lengths within any curve.
pub fn chord_spread(state: &PdaeState) -> f64 {
    state
        .curves()
        .iter()
        .map(|c| c.chord_spread())
        .fold(0.0, f64::max)
}

pub(crate) struct PdaeLayout {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
}

impl PdaeLayout {
    pub fn of(state: &PdaeState) -> Self {
        PdaeLayout {
            n1: state.grain.n(),
            n2: state.surf_left.n(),
            n3: state.surf_right.n(),
        }
    }

    pub fn dof(&self) -> usize {
        2 * (self.n1 + self.n2 + self.n3) + 14
    }

    pub fn pack(&self, s: &PdaeState) -> DVector<f64> {
        let mut v = Vec::with_capacity(self.dof());
        for c in s.curves() {
            for p in c.interior() {
                v.push(p.x);
                v.push(p.y);
            }
        }
        for p in [
            s.grain.point(0).unwrap(),
            s.surf_left.point(0).unwrap(),
            s.surf_right.point(0).unwrap(),
        ] {
            v.push(p.x);
            v.push(p.y);
        }
        v.push(s.kappa_ghost[0]);
        v.push(s.kappa_ghost[1]);
        for p in [
            s.grain.point(self.n1 as i32 + 1).unwrap(),
            s.surf_left.point(self.n2 as i32 + 1).unwrap(),
            s.surf_right.point(self.n3 as i32 + 1).unwrap(),
        ] {
            v.push(p.x);
            v.push(p.y);
        }
        DVector::from_vec(v)
    }

    pub fn unpack(&self, v: &DVector<f64>, into: &mut PdaeState) {
        fn take(v: &DVector<f64>, i: &mut usize) -> Vec2 {
            let p = Vec2::new(v[*i], v[*i + 1]);
            *i += 2;
            p
        }
        let mut i = 0;
        for k in 1..=self.n1 as i32 {
            into.grain.set_point(k, take(v, &mut i));
        }
        for k in 1..=self.n2 as i32 {
            into.surf_left.set_point(k, take(v, &mut i));
        }
        for k in 1..=self.n3 as i32 {
            into.surf_right.set_point(k, take(v, &mut i));
        }
        into.grain.set_point(0, take(v, &mut i));
        into.surf_left.set_point(0, take(v, &mut i));
        into.surf_right.set_point(0, take(v, &mut i));
        into.kappa_ghost = [v[i], v[i + 1]];
        i += 2;
        into.grain.set_point(self.n1 as i32 + 1, take(v, &mut i));
        into.surf_left.set_point(self.n2 as i32 + 1, take(v, &mut i));
        into.surf_right.set_point(self.n3 as i32 + 1, take(v, &mut i));
    }
}

fn unit_normal(c: &GridCurve, j: i32) -> Result<Vec2> {
    let (_, n) = c.unit_frames(j)?;
    Ok(n)
}

/// Second difference of nodal curvatures over the local arc spacing:
/// `kappa_ss ~ (k_{j-1} - 2 k_j + k_{j+1}) / (h |D1 X_j|)^2`, with the ghost
/// curvature substituted at `j = 1`.
fn kappa_ss_at(c: &GridCurve, j: i32, kappa_ghost: f64) -> Result<f64> {
    let km = if j == 1 { kappa_ghost } else { c.curvature(j - 1)? };
    let k0 = c.curvature(j)?;
    let kp = c.curvature(j + 1)?;
    let ds = c.h() * c.d1(j)?.norm();
    Ok((km - 2.0 * k0 + kp) / (ds * ds))
}

/// Stacked backward-Euler residual of the PDAE system. Rows per curve:
/// normal motion then equidistribution constraint on each stencil-valid
/// interior node (grain j = 1..N, surfaces j = 1..N-1); then the eight
/// junction rows and the ten outer-closure rows.
pub fn pdae_step_residual(prev: &PdaeState, cand: &PdaeState, dt: f64) -> Result<DVector<f64>> {
    if dt <= 0.0 || !dt.is_finite() {
        return Err(Error::BadTimeStep { dt });
    }
    let layout = PdaeLayout::of(cand);
    let mut r = Vec::with_capacity(layout.dof());

    // dimensionless equidistribution row: the relative difference of squared
    // adjacent chords. Same zero set as D1 X . D2 X = 0 but with a
    // rounding floor of ~1e-13 at every grid size.
    let constraint = |c: &GridCurve, j: i32| -> Result<f64> {
        let plus = (c.point(j + 1)? - c.point(j)?).norm_sq();
        let minus = (c.point(j)? - c.point(j - 1)?).norm_sq();
        let denom = plus + minus;
        if denom <= c.eps_len() * c.eps_len() {
            return Err(Error::DegenerateParametrization { j, len: denom.sqrt() });
        }
        Ok((plus - minus) / denom)
    };

    // grain: V . n = kappa
    for j in 1..=layout.n1 as i32 {
        let n = unit_normal(&cand.grain, j)?;
        let motion =
            (cand.grain.point(j)? - prev.grain.point(j)?).dot(n) - dt * cand.grain.curvature(j)?;
        r.push(motion);
        r.push(constraint(&cand.grain, j)?);
    }
    // surfaces: V . n = -kappa_ss
    for (idx, (pc, cc)) in [
        (&prev.surf_left, &cand.surf_left),
        (&prev.surf_right, &cand.surf_right),
    ]
    .into_iter()
    .enumerate()
    {
        let kg = cand.kappa_ghost[idx];
        for j in 1..cc.n() as i32 {
            let n = unit_normal(cc, j)?;
            let motion = (cc.point(j)? - pc.point(j)?).dot(n) + dt * kappa_ss_at(cc, j, kg)?;
            r.push(motion);
            r.push(constraint(cc, j)?);
        }
    }

    r.extend_from_slice(&junction_residual_pdae(cand)?);

    let push2 = |r: &mut Vec<f64>, v: Vec2| {
        r.push(v.x);
        r.push(v.y);
    };
    // the flatness rows are scaled by h^2 (pure stencil sums) so their
    // rounding floor stays far below the Newton tolerance
    let h2s = cand.surf_left.h() * cand.surf_left.h();
    let h3s = cand.surf_right.h() * cand.surf_right.h();
    push2(&mut r, cand.grain.favg(layout.n1 as i32)? - cand.outer_anchors[0]);
    push2(&mut r, cand.surf_left.favg(layout.n2 as i32)? - cand.outer_anchors[1]);
    push2(&mut r, h2s * cand.surf_left.d2(layout.n2 as i32)?);
    push2(&mut r, cand.surf_right.favg(layout.n3 as i32)? - cand.outer_anchors[2]);
    push2(&mut r, h3s * cand.surf_right.d2(layout.n3 as i32)?);
    debug_assert_eq!(r.len(), layout.dof());
    Ok(DVector::from_vec(r))
}

/// The eight junction rows: common point (4), angles (2), curvature average
/// `(k^2_0 + k^2_1)/2 = -(k^3_0 + k^3_1)/2` (1), curvature-difference flux
/// `(k^2_0 - k^2_1)/(h |D+ X^2_0|) = (k^3_0 - k^3_1)/(h |D+ X^3_0|)` (1).
/// The h factors make the one-sided differences arc-length derivatives, so
/// unequal per-curve grid counts stay consistent; for equal counts they
/// cancel as in the equal-h case. The flux row is carried in product form
/// (multiplied through by both arc spacings) to keep its rounding floor
/// below the Newton tolerance on fine grids.
pub fn junction_residual_pdae(state: &PdaeState) -> Result<[f64; 8]> {
    let f1 = state.grain.favg(0)?;
    let f2 = state.surf_left.favg(0)?;
    let f3 = state.surf_right.favg(0)?;
    let unit = |c: &GridCurve| -> Result<Vec2> {
        let d = c.dplus(0)?;
        let len = d.norm();
        if len <= c.eps_len() {
            return Err(Error::DegenerateParametrization { j: 0, len });
        }
        Ok(d / len)
    };
    let t1 = unit(&state.grain)?;
    let t2 = unit(&state.surf_left)?;
    let t3 = unit(&state.surf_right)?;
    let target = state.angle_cosine();
    let k20 = state.kappa_ghost[0];
    let k30 = state.kappa_ghost[1];
    let k21 = state.surf_left.curvature(1)?;
    let k31 = state.surf_right.curvature(1)?;
    let scale2 = state.surf_left.h() * state.surf_left.dplus(0)?.norm();
    let scale3 = state.surf_right.h() * state.surf_right.dplus(0)?.norm();
    Ok([
        f1.x - f2.x,
        f1.y - f2.y,
        f2.x - f3.x,
        f2.y - f3.y,
        t1.dot(t2) - target,
        t1.dot(t3) - target,
        0.5 * (k20 + k21) + 0.5 * (k30 + k31),
        (k20 - k21) * scale3 - (k30 - k31) * scale2,
    ])
}

/// Backward-Euler driver with cached Jacobian and the dt-continuation
/// fallback for stiff startup steps.
pub struct PdaeStepper {
    pub cfg: NewtonConfig,
    cache: JacobianCache,
}

impl PdaeStepper {
    pub fn new(cfg: NewtonConfig) -> Self {
        PdaeStepper {
            cfg,
            cache: JacobianCache::new(),
        }
    }

    pub fn factorizations(&self) -> usize {
        self.cache.factorizations
    }

    fn solve_once(
        &mut self,
        prev: &PdaeState,
        guess: &DVector<f64>,
        dt: f64,
    ) -> Result<(DVector<f64>, StepReport)> {
        let scratch = prev.clone();
        let residual = move |v: &DVector<f64>| -> DVector<f64> {
            let mut cand = scratch.clone();
            PdaeLayout::of(&cand).unpack(v, &mut cand);
            match pdae_step_residual(&scratch, &cand, dt) {
                Ok(r) => r,
                Err(_) => DVector::from_element(v.len(), f64::NAN),
            }
        };
        newton_solve_cached(residual, guess, &self.cfg, &mut self.cache, None)
    }

    pub fn step(&mut self, prev: &PdaeState, dt: f64) -> Result<(PdaeState, StepReport)> {
        if dt <= 0.0 || !dt.is_finite() {
            return Err(Error::BadTimeStep { dt });
        }
        let layout = PdaeLayout::of(prev);
        let x0 = layout.pack(prev);
        let solved = match self.solve_once(prev, &x0, dt) {
            Ok(out) => out,
            Err(Error::NewtonNoConvergence { .. }) => {
                let mut guess = x0.clone();
                let mut out = None;
                for frac in [64.0, 16.0, 4.0, 1.0] {
                    self.cache.invalidate();
                    let (sol, rep) = self.solve_once(prev, &guess, dt / frac)?;
                    guess = sol.clone();
                    out = Some((sol, rep));
                }
                out.unwrap()
            }
            Err(e) => return Err(e),
        };
        let (sol, mut report) = solved;
        report.dt = dt;
        let mut next = prev.clone();
        layout.unpack(&sol, &mut next);
        Ok((next, report))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::Topology;
    use crate::newton::{condition_estimate, fd_jacobian};
    use approx::assert_abs_diff_eq;

    #[test]
    fn steady_straight_configuration_has_zero_residual() {
        let s = PdaeState::angle_exact_straight(0.5, 0.1, 12).unwrap();
        let r = pdae_step_residual(&s, &s, 0.01).unwrap();
        assert!(r.amax() < 1e-11, "residual {}", r.amax());
    }

    #[test]
    fn constraint_drift_on_uniform_and_geometric_lines() {
        let mk = |xs: &[f64]| {
            let mut c = GridCurve::open(
                xs.iter().map(|&x| Vec2::new(x, 0.0)).collect(),
                Topology::Open,
            )
            .unwrap();
            c.set_point(0, Vec2::new(2.0 * xs[0] - xs[1], 0.0));
            let n = xs.len() as i32;
            c.set_point(
                n + 1,
                Vec2::new(2.0 * xs[n as usize - 1] - xs[n as usize - 2], 0.0),
            );
            c
        };
        // uniform line: zero drift
        let u = mk(&[0.0, 1.0, 2.0, 3.0, 4.0]);
        for j in 1..=5 {
            let d1 = u.d1(j).unwrap();
            assert_abs_diff_eq!(d1.dot(u.d2(j).unwrap()) / d1.norm_sq(), 0.0, epsilon = 1e-14);
        }
        // geometric spacing, ratio r = 1.1, five nodes:
        // drift = |D1.D2|/|D1|^2 = 2(r-1)/((1+r) h); at h = 1/4 this is
        // exactly 8/21 (hand calculation)
        let g = mk(&[0.0, 1.0, 2.1, 3.31, 4.641]);
        let expect = 2.0 * 0.1 / (2.1 * g.h());
        for j in 2..=4 {
            let d1 = g.d1(j).unwrap();
            let got = (d1.dot(g.d2(j).unwrap()) / d1.norm_sq()).abs();
            assert_abs_diff_eq!(got, expect, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(2.0 * 0.1 / (2.1 * 0.25), 8.0 / 21.0, epsilon = 1e-15);
    }

    #[test]
    fn system_is_square() {
        let s = PdaeState::angle_exact_straight(0.5, 0.1, 10).unwrap();
        let layout = PdaeLayout::of(&s);
        assert_eq!(layout.pack(&s).len(), layout.dof());
        let r = pdae_step_residual(&s, &s, 1e-3).unwrap();
        assert_eq!(r.len(), layout.dof());
    }

    #[test]
    fn first_step_from_flat_data_converges_and_equidistributes() {
        let s = PdaeState::standard_initial(0.5, 0.2, QuarterLoopGeometry::default()).unwrap();
        let mut stepper = PdaeStepper::new(NewtonConfig::default());
        let (next, rep) = stepper.step(&s, 4e-4).unwrap();
        assert!(rep.residual_norm <= 1e-10);
        assert!(
            constraint_drift(&next) <= 1e-9,
            "drift {}",
            constraint_drift(&next)
        );
        assert!(chord_spread(&next) <= 1e-6, "spread {}", chord_spread(&next));
        // groove forms: junction moves down
        assert!(next.junction().unwrap().y < 0.0);
        // junction curvature closure holds
        let k20 = next.kappa_ghost[0];
        let k30 = next.kappa_ghost[1];
        let k21 = next.surf_left.curvature(1).unwrap();
        let k31 = next.surf_right.curvature(1).unwrap();
        assert_abs_diff_eq!(0.5 * (k20 + k21), -0.5 * (k30 + k31), epsilon = 1e-9);
    }

    #[test]
    fn first_step_converges_in_the_steep_angle_regime() {
        let s = PdaeState::standard_initial(1.96, 0.2, QuarterLoopGeometry::default()).unwrap();
        let mut stepper = PdaeStepper::new(NewtonConfig::default());
        let (next, rep) = stepper.step(&s, 4e-4).unwrap();
        assert!(rep.residual_norm <= 1e-10);
        assert!(next.junction().unwrap().y < 0.0);
    }

    #[test]
    fn step_jacobian_is_nonsingular_at_consistent_states() {
        for n in [8usize, 14] {
            let s = PdaeState::angle_exact_straight(0.5, 0.1, n).unwrap();
            let layout = PdaeLayout::of(&s);
            let x = layout.pack(&s);
            let prev = s.clone();
            let f = move |v: &DVector<f64>| {
                let mut cand = prev.clone();
                PdaeLayout::of(&cand).unpack(v, &mut cand);
                pdae_step_residual(&prev, &cand, 1e-3)
                    .unwrap_or_else(|_| DVector::from_element(v.len(), f64::NAN))
            };
            let jac = fd_jacobian(&f, &x, 1e-7).unwrap();
            let lu = jac.clone().lu();
            let cond = condition_estimate(&jac, &lu);
            assert!(cond.is_finite() && cond > 0.0, "n={n} cond={cond}");
            assert!(lu.solve(&x).is_some(), "n={n}: singular step Jacobian");
        }
    }

    #[test]
    fn to_common_form_is_identity_on_curves() {
        let s = PdaeState::angle_exact_straight(0.5, 0.1, 10).unwrap();
        let (curves, junction) = s.to_common_form().unwrap();
        for (a, b) in curves[0].interior().zip(s.grain.interior()) {
            assert_eq!(a, b);
        }
        assert_eq!(junction, s.junction().unwrap());
        assert_eq!(junction, s.grain.favg(0).unwrap());
    }
}
