//! Height-function formulation in the frame moving with the junction:
//! an independent cross-check for the parametric solvers while both exterior
//! surfaces stay single-valued graphs.
//!
//! The junction is fixed at `xbar = 0` by the frame transform; the frame
//! speed `s_t` is an unknown of each implicit step, closed by the junction
//! condition count (the junction supplies one more condition than the
//! height-field closures consume). All three branches are stored
//! junction-first on staggered grids whose first cell face is the junction.
//!
//! The grain height equation uses the advection term `u_xbar s_t` (the frame
//! transform applied to the grain height). The variant printed with
//! `y_xbar s_t` instead is available behind `literal_advection` for
//! comparison.

use nalgebra::DVector;

use crate::curve::{GridCurve, Topology};
use crate::error::{Error, Result};
use crate::newton::{newton_solve_cached, JacobianCache, NewtonConfig, StepReport};
use crate::vec2::Vec2;

/// Heights on a staggered grid with node k at `xbar = dir * (k - 1/2) dx`,
/// k = 1..=n; ghost slots at k = -1, 0 (junction side) and k = n+1 (far
/// side).
#[derive(Clone, Debug)]
pub struct HeightBranch {
    vals: Vec<f64>,
    n: usize,
    pub dx: f64,
    /// +1 when xbar increases with the branch index, -1 for the left branch.
    pub dir: f64,
}

impl HeightBranch {
    fn new(n: usize, dx: f64, dir: f64, f: impl Fn(f64) -> f64) -> Self {
        let mut vals = vec![0.0; n + 3];
        for k in 1..=n {
            vals[k + 1] = f(dir * (k as f64 - 0.5) * dx);
        }
        HeightBranch { vals, n, dx, dir }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn val(&self, j: i32) -> f64 {
        self.vals[(j + 1) as usize]
    }

    pub fn set(&mut self, j: i32, v: f64) {
        self.vals[(j + 1) as usize] = v;
    }

    /// Physical xbar of node j.
    pub fn xbar(&self, j: i32) -> f64 {
        self.dir * (j as f64 - 0.5) * self.dx
    }

    fn d1(&self, j: i32) -> f64 {
        (self.val(j + 1) - self.val(j - 1)) / (2.0 * self.dx)
    }

    fn d2(&self, j: i32) -> f64 {
        (self.val(j + 1) + self.val(j - 1) - 2.0 * self.val(j)) / (self.dx * self.dx)
    }

    /// Graph curvature `y_xx (1 + y_x^2)^{-3/2}` at node j (direction-even).
    fn curv(&self, j: i32) -> f64 {
        let s = self.d1(j);
        self.d2(j) / (1.0 + s * s).powf(1.5)
    }

    /// Surface-diffusion flux `(1 + y_x^2)^{-1/2} G_x` at the face j+1/2,
    /// in branch-local coordinates.
    fn flux(&self, j: i32) -> f64 {
        let slope = (self.val(j + 1) - self.val(j)) / self.dx;
        (self.curv(j + 1) - self.curv(j)) / self.dx / (1.0 + slope * slope).sqrt()
    }

    /// Largest |dy/dxbar| over interior nodes.
    pub fn max_slope(&self) -> f64 {
        (1..=self.n as i32)
            .map(|j| self.d1(j).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct CartesianState {
    pub y_left: HeightBranch,
    pub y_right: HeightBranch,
    pub grain: HeightBranch,
    /// Junction abscissa s(t) in the lab frame (diagnostic; integrates s_vel).
    pub s_pos: f64,
    /// Frame speed s_t, an unknown of each implicit step.
    pub s_vel: f64,
    pub m: f64,
    /// Single-valued regime budget on |y_xbar|.
    pub slope_max: f64,
    /// Use the printed `y_xbar s_t` advection in the grain equation instead
    /// of the corrected `u_xbar s_t`.
    pub literal_advection: bool,
}

pub const DEFAULT_SLOPE_MAX: f64 = 2.0;

impl CartesianState {
    /// Standard starting position: flat surfaces at 0 over [x_min, 0] and
    /// [0, x_max], grain the unit quarter-circle height profile. Refuses
    /// energy ratios whose Young's-law junction slope already exceeds the
    /// single-valued budget.
    pub fn standard_initial(m: f64, dx: f64, x_min: f64, x_max: f64) -> Result<Self> {
        if !(m > 0.0 && m < 2.0) {
            return Err(Error::BadEnergyRatio { m });
        }
        let implied = ((m / 2.0).asin()).tan();
        if implied > DEFAULT_SLOPE_MAX {
            return Err(Error::CartesianRegime {
                max_slope: implied,
                limit: DEFAULT_SLOPE_MAX,
            });
        }
        let n_left = ((-x_min) / dx).round() as usize;
        let n_right = (x_max / dx).round() as usize;
        if n_left < 6 || n_right < 6 {
            return Err(Error::TooFewNodes {
                needed: 6,
                got: n_left.min(n_right),
            });
        }
        let y_left = HeightBranch::new(n_left, dx, -1.0, |_| 0.0);
        let y_right = HeightBranch::new(n_right, dx, 1.0, |_| 0.0);
        let mut grain = HeightBranch::new(n_right, dx, 1.0, |x| {
            if x < 1.0 {
                -(2.0 * x - x * x).max(0.0).sqrt()
            } else {
                -1.0
            }
        });
        // junction ghost antisymmetric (face value 0), far ghost pins -1
        grain.set(0, -grain.val(1));
        grain.set(-1, -grain.val(2));
        let nr = grain.n() as i32;
        grain.set(nr + 1, -2.0 - grain.val(nr));
        Ok(CartesianState {
            y_left,
            y_right,
            grain,
            s_pos: 0.0,
            s_vel: 0.0,
            m,
            slope_max: DEFAULT_SLOPE_MAX,
            literal_advection: false,
        })
    }

    pub fn dof(&self) -> usize {
        (self.y_left.n + 3) + (self.y_right.n + 3) + (self.grain.n + 2) + 1
    }

    /// Height of the junction (groove depth), read from the grain face value.
    pub fn junction_height(&self) -> f64 {
        0.5 * (self.grain.val(0) + self.grain.val(1))
    }

    pub fn max_surface_slope(&self) -> f64 {
        self.y_left.max_slope().max(self.y_right.max_slope())
    }

    fn pack(&self) -> DVector<f64> {
        let mut v = Vec::with_capacity(self.dof());
        v.extend_from_slice(&self.y_left.vals);
        v.extend_from_slice(&self.y_right.vals);
        // grain ghosts: 0 and n+1 only (second-order stencils); slot -1 is
        // carried but not an unknown
        v.extend_from_slice(&self.grain.vals[1..]);
        v.push(self.s_vel);
        DVector::from_vec(v)
    }

    fn unpack(&mut self, v: &DVector<f64>) {
        let mut i = 0;
        for k in 0..self.y_left.vals.len() {
            self.y_left.vals[k] = v[i];
            i += 1;
        }
        for k in 0..self.y_right.vals.len() {
            self.y_right.vals[k] = v[i];
            i += 1;
        }
        for k in 1..self.grain.vals.len() {
            self.grain.vals[k] = v[i];
            i += 1;
        }
        self.s_vel = v[i];
    }

    /// Sample the branches into parametric curves in the lab frame
    /// (junction-first, sigma away from the junction).
    pub fn to_parametric(&self) -> Result<[GridCurve; 3]> {
        let mk = |b: &HeightBranch, heights_of_grain: bool| -> Result<GridCurve> {
            let pts = (1..=b.n as i32)
                .map(|j| Vec2::new(b.xbar(j) + self.s_pos, b.val(j)))
                .collect();
            let _ = heights_of_grain;
            GridCurve::open(pts, Topology::OpenJunction)
        };
        Ok([
            mk(&self.grain, true)?,
            mk(&self.y_left, false)?,
            mk(&self.y_right, false)?,
        ])
    }
}

/// Backward-Euler residual of the moving-frame height system: fourth-order
/// flux form on both surface branches, the graph heat equation with frame
/// advection on the grain, seven junction conditions (with s_t closing the
/// count), and the far-field pins.
pub fn cartesian_step_residual(
    prev: &CartesianState,
    cand: &CartesianState,
    dt: f64,
) -> Result<DVector<f64>> {
    if dt <= 0.0 || !dt.is_finite() {
        return Err(Error::BadTimeStep { dt });
    }
    let mut r = Vec::with_capacity(cand.dof());
    let st = cand.s_vel;

    // surface PDE rows, j = 1 .. n-1
    for (pb, cb) in [(&prev.y_left, &cand.y_left), (&prev.y_right, &cand.y_right)] {
        for j in 1..cb.n as i32 {
            let rate = -(cb.flux(j) - cb.flux(j - 1)) / cb.dx + cb.dir * cb.d1(j) * st;
            r.push(cb.val(j) - pb.val(j) - dt * rate);
        }
    }
    // grain PDE rows, j = 1 .. n
    for j in 1..=cand.grain.n as i32 {
        let slope = cand.grain.d1(j);
        let adv = if cand.literal_advection {
            cand.y_right.dir * cand.y_right.d1(j) * st
        } else {
            cand.grain.dir * slope * st
        };
        let rate = cand.grain.d2(j) / (1.0 + slope * slope) + adv;
        r.push(cand.grain.val(j) - prev.grain.val(j) - dt * rate);
    }

    // junction rows
    let face = |b: &HeightBranch| 0.5 * (b.val(0) + b.val(1));
    let slope_local = |b: &HeightBranch| (b.val(1) - b.val(0)) / b.dx;
    let slope_xbar = |b: &HeightBranch| b.dir * slope_local(b);
    let g_face = |b: &HeightBranch| 0.5 * (b.curv(0) + b.curv(1));
    // H in xbar coordinates at the junction face = dir * local flux at face 0
    let h_xbar = |b: &HeightBranch| {
        let slope = slope_local(b);
        b.dir * (b.curv(1) - b.curv(0)) / b.dx / (1.0 + slope * slope).sqrt()
    };
    let sl = slope_xbar(&cand.y_left);
    let sr = slope_xbar(&cand.y_right);
    let su = slope_xbar(&cand.grain);
    r.push(face(&cand.y_left) - face(&cand.y_right));
    r.push(face(&cand.y_right) - face(&cand.grain));
    r.push(sr.atan() - sl.atan() - 2.0 * (cand.m / 2.0).asin());
    r.push(su.atan() - (-std::f64::consts::FRAC_PI_2 + 0.5 * (sr.atan() + sl.atan())));
    r.push(g_face(&cand.y_right) - g_face(&cand.y_left));
    r.push(h_xbar(&cand.y_right) - h_xbar(&cand.y_left));

    // far-field pins: y faces at 0 and flat; grain face at -1
    for b in [&cand.y_left, &cand.y_right] {
        let n = b.n as i32;
        r.push(0.5 * (b.val(n) + b.val(n + 1)));
        r.push(b.d2(n) * b.dx * b.dx);
    }
    let n = cand.grain.n as i32;
    r.push(0.5 * (cand.grain.val(n) + cand.grain.val(n + 1)) + 1.0);

    debug_assert_eq!(r.len(), cand.dof());
    Ok(DVector::from_vec(r))
}

pub struct CartesianStepper {
    pub cfg: NewtonConfig,
    cache: JacobianCache,
}

impl CartesianStepper {
    pub fn new(cfg: NewtonConfig) -> Self {
        CartesianStepper {
            cfg,
            cache: JacobianCache::new(),
        }
    }

    fn solve_once(
        &mut self,
        prev: &CartesianState,
        guess: &DVector<f64>,
        dt: f64,
    ) -> Result<(DVector<f64>, StepReport)> {
        let scratch = prev.clone();
        let residual = move |v: &DVector<f64>| -> DVector<f64> {
            let mut cand = scratch.clone();
            cand.unpack(v);
            match cartesian_step_residual(&scratch, &cand, dt) {
                Ok(r) => r,
                Err(_) => DVector::from_element(v.len(), f64::NAN),
            }
        };
        newton_solve_cached(residual, guess, &self.cfg, &mut self.cache, None)
    }

    /// One backward-Euler step; errors with the regime diagnostic when the
    /// accepted state leaves the single-valued slope budget.
    pub fn step(&mut self, prev: &CartesianState, dt: f64) -> Result<(CartesianState, StepReport)> {
        if dt <= 0.0 || !dt.is_finite() {
            return Err(Error::BadTimeStep { dt });
        }
        let x0 = prev.pack();
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
        next.unpack(&sol);
        next.s_pos = prev.s_pos + dt * next.s_vel;
        let max_slope = next.max_surface_slope();
        if max_slope > next.slope_max {
            return Err(Error::CartesianRegime {
                max_slope,
                limit: next.slope_max,
            });
        }
        Ok((next, report))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn flat_state_has_zero_interior_residual_and_angle_mismatch() {
        let s = CartesianState::standard_initial(0.5, 0.25, -6.0, 12.0).unwrap();
        let r = cartesian_step_residual(&s, &s, 1e-3).unwrap();
        let n_pde = (s.y_left.n - 1) + (s.y_right.n - 1);
        // surface rows vanish on the flat branches
        for (i, v) in r.iter().take(n_pde).enumerate() {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-12);
            let _ = i;
        }
        // the third junction row carries the full Young's-law mismatch
        let jrow = n_pde + s.grain.n + 2;
        assert_abs_diff_eq!(r[jrow], -2.0 * (0.25_f64).asin(), epsilon = 1e-12);
    }

    #[test]
    fn residual_of_previous_state_scales_linearly_in_dt() {
        let s = CartesianState::standard_initial(0.5, 0.25, -6.0, 12.0).unwrap();
        // use a state with junction rows satisfied? not needed: compare the
        // dt-dependent part on the PDE rows only
        let r1 = cartesian_step_residual(&s, &s, 1e-3).unwrap();
        let r2 = cartesian_step_residual(&s, &s, 2e-3).unwrap();
        let n_pde = (s.y_left.n - 1) + (s.y_right.n - 1) + s.grain.n;
        for i in 0..n_pde {
            assert_abs_diff_eq!(r2[i], 2.0 * r1[i], epsilon = 1e-12 * r1[i].abs().max(1.0));
        }
    }

    #[test]
    fn first_steps_form_a_groove_and_keep_far_pins() {
        let s = CartesianState::standard_initial(0.5, 0.2, -6.0, 12.0).unwrap();
        let mut stepper = CartesianStepper::new(NewtonConfig::default());
        let mut cur = s;
        for _ in 0..5 {
            cur = stepper.step(&cur, 4e-4).unwrap().0;
        }
        assert!(cur.junction_height() < -1e-4, "height {}", cur.junction_height());
        // far-field pins hold exactly at every step
        let nl = cur.y_left.n as i32;
        assert_abs_diff_eq!(
            0.5 * (cur.y_left.val(nl) + cur.y_left.val(nl + 1)),
            0.0,
            epsilon = 1e-11
        );
        let ng = cur.grain.n as i32;
        assert_abs_diff_eq!(
            0.5 * (cur.grain.val(ng) + cur.grain.val(ng + 1)),
            -1.0,
            epsilon = 1e-11
        );
        // junction conditions hold on the accepted state
        let r = cartesian_step_residual(&cur, &cur, 1e-9).unwrap();
        let jstart = (cur.y_left.n - 1) + (cur.y_right.n - 1) + cur.grain.n;
        for i in jstart..jstart + 6 {
            assert!(r[i].abs() < 1e-8, "junction row {i}: {}", r[i]);
        }
    }

    #[test]
    fn steep_energy_ratio_is_refused() {
        match CartesianState::standard_initial(1.96, 0.2, -6.0, 12.0) {
            Err(Error::CartesianRegime { max_slope, limit }) => {
                assert!(max_slope > limit);
            }
            other => panic!("expected regime refusal, got {other:?}"),
        }
    }

    #[test]
    fn to_parametric_maps_flat_state_to_straight_monotone_curves() {
        let s = CartesianState::standard_initial(0.5, 0.25, -6.0, 12.0).unwrap();
        let [grain, left, right] = s.to_parametric().unwrap();
        for c in [&left, &right] {
            for p in c.interior() {
                assert_eq!(p.y, 0.0);
            }
        }
        // x strictly monotone along each surface branch
        let mut prev = f64::NEG_INFINITY;
        for p in right.interior() {
            assert!(p.x > prev);
            prev = p.x;
        }
        // grain heights decrease to -1
        let last = grain.interior().last().unwrap();
        assert_abs_diff_eq!(last.y, -1.0, epsilon = 1e-12);
    }
}
