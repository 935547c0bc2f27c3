//! Batch front end: run configurations, the quarter-loop / star /
//! convergence / well-posedness runners, and file emission.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cartesian::{CartesianState, CartesianStepper};
use crate::closed::{
    isoperimetric_ratio, star_curve, ClosedFormulation, ClosedLaw, ClosedStepper,
};
use crate::curve::GridCurve;
use crate::error::{Error, Result};
use crate::metrics::{curves_distance, has_overhang, refinement_rate};
use crate::motion::TangentialMode;
use crate::newton::NewtonConfig;
use crate::par;
use crate::parabolic::{
    closure_solve, spacing_ratio, ArtificialCondition, ParabolicStepper, QuarterLoopGeometry,
    QuarterLoopParabolicState,
};
use crate::pdae::{chord_spread, constraint_drift, PdaeState, PdaeStepper};
use crate::snapshot::{
    write_manifest, write_quarterloop_snapshot, write_svg, Manifest, QuarterLoopSidecar, RunLog,
    StepLogEntry,
};
use crate::vec2::Vec2;
use crate::wellposed::{
    closed_form_parabolic_det, closed_form_pdae_det, junction_det, scan_min_abs_det, z_grid,
    AngleConfig, Formulation,
};

use crate::snapshot::CartesianSidecar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunFormulation {
    Parabolic,
    Pdae,
    Cartesian,
}

/// Flat run configuration; the CLI mirrors these fields one to one.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub formulation: RunFormulation,
    /// Energy ratio gamma_grain / gamma_exterior.
    pub m: f64,
    /// Tangential-adjustment strength (parabolic surfaces only).
    pub alpha: f64,
    /// Target spacing; per-curve node counts follow from curve lengths.
    /// Exactly one of `ds` and `n` must be set.
    pub ds: Option<f64>,
    /// Node count: per curve for the quarter loop, total for the star.
    pub n: Option<usize>,
    pub dt: f64,
    pub t_end: f64,
    pub x_min: f64,
    pub x_max: f64,
    /// Starting-position id; `flat-groove` is the standard one.
    pub initial_condition: String,
    pub out_dir: Option<PathBuf>,
    /// Write a snapshot every k steps (0: only initial and final).
    pub snapshot_every: usize,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            formulation: RunFormulation::Pdae,
            m: 0.5,
            alpha: -100.0,
            ds: Some(0.1),
            n: None,
            dt: 0.01,
            t_end: 0.02,
            x_min: -6.0,
            x_max: 12.0,
            initial_condition: "flat-groove".into(),
            out_dir: None,
            snapshot_every: 0,
            seed: 0,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.t_end < self.dt {
            return Err(Error::Config(format!(
                "t_end ({}) must be at least dt ({})",
                self.t_end, self.dt
            )));
        }
        if !(self.m > 0.0 && self.m < 2.0) {
            return Err(Error::Config(format!("m must lie in (0, 2), got {}", self.m)));
        }
        match (self.ds, self.n) {
            (Some(ds), None) if ds > 0.0 => Ok(()),
            (None, Some(n)) if n >= 6 => Ok(()),
            (Some(_), Some(_)) => Err(Error::Config("set either ds or n, not both".into())),
            _ => Err(Error::Config("set ds > 0 or n >= 6".into())),
        }
    }

    pub fn geometry(&self) -> QuarterLoopGeometry {
        QuarterLoopGeometry {
            x_min: self.x_min,
            x_max: self.x_max,
        }
    }

    /// Spacing for quarter-loop runs: `ds` directly, or derived from `n`
    /// nodes on the left surface.
    pub fn spacing(&self) -> f64 {
        match (self.ds, self.n) {
            (Some(ds), _) => ds,
            (None, Some(n)) => -self.x_min / n as f64,
            _ => 0.1,
        }
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round().max(1.0) as usize
    }
}

/// Everything a quarter-loop run leaves behind in memory.
pub struct QuarterLoopRun {
    pub curves: [GridCurve; 3],
    pub junction: Vec2,
    pub junction_path: Vec<(f64, Vec2)>,
    pub steps: usize,
    /// Max equidistribution drift over all accepted PDAE steps.
    pub max_constraint_drift: f64,
    /// Max intra-curve chord spread over all accepted PDAE steps.
    pub max_chord_spread: f64,
    /// Final max/min adjacent chord ratio (grid quality).
    pub spacing_ratio: f64,
    pub newton_iterations: usize,
    /// Cartesian runs only: junction height and frame position/speed.
    pub cartesian: Option<(f64, f64, f64)>,
}

fn emit_quarterloop_snapshot(
    cfg: &SimulationConfig,
    step: usize,
    t: f64,
    curves: &[GridCurve; 3],
    junction: Vec2,
    kappa_ghost: Option<[f64; 2]>,
) -> Result<()> {
    if let Some(dir) = &cfg.out_dir {
        let sidecar = QuarterLoopSidecar {
            t,
            m: cfg.m,
            alpha: cfg.alpha,
            junction: [junction.x, junction.y],
            kappa_ghost,
        };
        write_quarterloop_snapshot(dir, &format!("step{step:06}"), curves, &sidecar)?;
    }
    Ok(())
}

fn want_snapshot(cfg: &SimulationConfig, step: usize, total: usize) -> bool {
    if cfg.out_dir.is_none() {
        return false;
    }
    step == 0 || step == total || (cfg.snapshot_every > 0 && step % cfg.snapshot_every == 0)
}

/// Run the coupled quarter-loop problem under the configured formulation.
pub fn run_quarterloop(cfg: &SimulationConfig) -> Result<QuarterLoopRun> {
    cfg.validate()?;
    if cfg.initial_condition != "flat-groove" {
        return Err(Error::Config(format!(
            "unknown initial condition id: {}",
            cfg.initial_condition
        )));
    }
    let t0 = Instant::now();
    let out = match cfg.formulation {
        RunFormulation::Parabolic => run_quarterloop_parabolic(cfg)?,
        RunFormulation::Pdae => run_quarterloop_pdae(cfg)?,
        RunFormulation::Cartesian => run_quarterloop_cartesian(cfg)?,
    };
    if let Some(dir) = &cfg.out_dir {
        write_manifest(
            dir,
            &Manifest {
                tool: "gbflow",
                version: env!("CARGO_PKG_VERSION"),
                config: cfg,
                wall_seconds: t0.elapsed().as_secs_f64(),
            },
        )?;
        write_svg(
            &dir.join("final.svg"),
            &[&out.curves[0], &out.curves[1], &out.curves[2]],
            Some(out.junction),
        )?;
    }
    Ok(out)
}

fn run_quarterloop_parabolic(cfg: &SimulationConfig) -> Result<QuarterLoopRun> {
    let ds = cfg.spacing();
    let mut state = QuarterLoopParabolicState::standard_initial(cfg.m, ds, cfg.geometry())?;
    closure_solve(
        &mut state,
        &NewtonConfig::default(),
        ArtificialCondition::FaceTangential,
    )?;
    let mut stepper = ParabolicStepper::new(cfg.alpha, NewtonConfig::default());
    stepper.mode = TangentialMode::FourthOrder;
    let total = cfg.steps();
    let mut log = cfg
        .out_dir
        .as_ref()
        .map(|d| RunLog::create(d.join("steps.jsonl")));
    let mut path = vec![(0.0, state.junction()?)];
    let mut iterations = 0;
    emit_snapshot_parabolic(cfg, 0, 0.0, &state)?;
    for step in 1..=total {
        let t = step as f64 * cfg.dt;
        let (next, rep) = stepper
            .step(&state, cfg.dt)
            .map_err(|e| Error::SolverAtStep { step, source: Box::new(e) })?;
        state = next;
        iterations += rep.iterations;
        path.push((t, state.junction()?));
        if let Some(log) = log.as_mut() {
            log.append(&StepLogEntry {
                step,
                t,
                iters: rep.iterations,
                resid: rep.residual_norm,
                dt: cfg.dt,
            });
        }
        if want_snapshot(cfg, step, total) {
            emit_snapshot_parabolic(cfg, step, t, &state)?;
        }
    }
    if let Some(log) = log.as_mut() {
        log.flush()?;
    }
    let junction = state.junction()?;
    Ok(QuarterLoopRun {
        spacing_ratio: spacing_ratio(&state),
        curves: [state.grain, state.surf_left, state.surf_right],
        junction,
        junction_path: path,
        steps: total,
        max_constraint_drift: f64::NAN,
        max_chord_spread: f64::NAN,
        newton_iterations: iterations,
        cartesian: None,
    })
}

fn emit_snapshot_parabolic(
    cfg: &SimulationConfig,
    step: usize,
    t: f64,
    state: &QuarterLoopParabolicState,
) -> Result<()> {
    if want_snapshot(cfg, step, usize::MAX - 1) || (step == 0 && cfg.out_dir.is_some()) {
        let curves = [
            state.grain.clone(),
            state.surf_left.clone(),
            state.surf_right.clone(),
        ];
        emit_quarterloop_snapshot(cfg, step, t, &curves, state.junction()?, None)?;
    }
    Ok(())
}

fn run_quarterloop_pdae(cfg: &SimulationConfig) -> Result<QuarterLoopRun> {
    let ds = cfg.spacing();
    let mut state = PdaeState::standard_initial(cfg.m, ds, cfg.geometry())?;
    let mut stepper = PdaeStepper::new(NewtonConfig::default());
    let total = cfg.steps();
    let mut log = cfg
        .out_dir
        .as_ref()
        .map(|d| RunLog::create(d.join("steps.jsonl")));
    let mut path = vec![(0.0, state.junction()?)];
    let mut max_drift: f64 = 0.0;
    let mut max_spread: f64 = 0.0;
    let mut iterations = 0;
    for step in 1..=total {
        let t = step as f64 * cfg.dt;
        let (next, rep) = stepper
            .step(&state, cfg.dt)
            .map_err(|e| Error::SolverAtStep { step, source: Box::new(e) })?;
        state = next;
        iterations += rep.iterations;
        max_drift = max_drift.max(constraint_drift(&state));
        max_spread = max_spread.max(chord_spread(&state));
        path.push((t, state.junction()?));
        if let Some(log) = log.as_mut() {
            log.append(&StepLogEntry {
                step,
                t,
                iters: rep.iterations,
                resid: rep.residual_norm,
                dt: cfg.dt,
            });
        }
        if want_snapshot(cfg, step, total) {
            let (curves, junction) = state.to_common_form()?;
            emit_quarterloop_snapshot(cfg, step, t, &curves, junction, Some(state.kappa_ghost))?;
        }
    }
    if let Some(log) = log.as_mut() {
        log.flush()?;
    }
    let junction = state.junction()?;
    let p = QuarterLoopParabolicState {
        grain: state.grain.clone(),
        surf_left: state.surf_left.clone(),
        surf_right: state.surf_right.clone(),
        m: state.m,
        outer_anchors: state.outer_anchors,
    };
    Ok(QuarterLoopRun {
        spacing_ratio: spacing_ratio(&p),
        curves: [state.grain, state.surf_left, state.surf_right],
        junction,
        junction_path: path,
        steps: total,
        max_constraint_drift: max_drift,
        max_chord_spread: max_spread,
        newton_iterations: iterations,
        cartesian: None,
    })
}

fn run_quarterloop_cartesian(cfg: &SimulationConfig) -> Result<QuarterLoopRun> {
    let ds = cfg.spacing();
    let mut state = CartesianState::standard_initial(cfg.m, ds, cfg.x_min, cfg.x_max)?;
    let mut stepper = CartesianStepper::new(NewtonConfig::default());
    let total = cfg.steps();
    let mut path = vec![(0.0, Vec2::new(state.s_pos, state.junction_height()))];
    let mut iterations = 0;
    for step in 1..=total {
        let (next, rep) = stepper
            .step(&state, cfg.dt)
            .map_err(|e| Error::SolverAtStep { step, source: Box::new(e) })?;
        state = next;
        iterations += rep.iterations;
        path.push((
            step as f64 * cfg.dt,
            Vec2::new(state.s_pos, state.junction_height()),
        ));
    }
    if let Some(dir) = &cfg.out_dir {
        let branches = [
            ("left", branch_rows(&state, -1)),
            ("right", branch_rows(&state, 1)),
            ("grain", grain_rows(&state)),
        ];
        crate::snapshot::write_cartesian_snapshot(
            dir,
            &format!("step{total:06}"),
            &branches,
            &CartesianSidecar {
                t: cfg.t_end,
                s: state.s_pos,
                s_t: state.s_vel,
            },
        )?;
    }
    let junction = Vec2::new(state.s_pos, state.junction_height());
    let curves = state.to_parametric()?;
    Ok(QuarterLoopRun {
        curves,
        junction,
        junction_path: path,
        steps: total,
        max_constraint_drift: f64::NAN,
        max_chord_spread: f64::NAN,
        spacing_ratio: 1.0,
        newton_iterations: iterations,
        cartesian: Some((state.junction_height(), state.s_pos, state.s_vel)),
    })
}

fn branch_rows(state: &CartesianState, side: i32) -> Vec<(f64, f64)> {
    let b = if side < 0 { &state.y_left } else { &state.y_right };
    (1..=b.n() as i32).map(|j| (b.xbar(j), b.val(j))).collect()
}

fn grain_rows(state: &CartesianState) -> Vec<(f64, f64)> {
    let b = &state.grain;
    (1..=b.n() as i32).map(|j| (b.xbar(j), b.val(j))).collect()
}

/// Star run output: area history and final shape quality.
pub struct StarRun {
    pub curve: GridCurve,
    pub area_series: Vec<(f64, f64)>,
    pub max_rel_area_drift: f64,
    pub final_isoperimetric_ratio: f64,
}

/// Closed-curve surface diffusion on the six-lobed star; the PDAE
/// formulation with implicit stepping unless `explicit_dt` is given.
pub fn run_star(cfg: &SimulationConfig, amplitude: f64) -> Result<StarRun> {
    cfg.validate()?;
    let n = cfg.n.unwrap_or(256);
    let mut curve = star_curve(n, amplitude)?;
    let a0 = curve.polygon_area()?;
    let mut series = vec![(0.0, a0)];
    let mut max_drift: f64 = 0.0;
    let law = ClosedLaw::SurfaceDiffusion { mobility: 1.0 };
    let mut stepper = ClosedStepper::new(law, ClosedFormulation::Pdae, NewtonConfig::default());
    let total = cfg.steps();
    for step in 1..=total {
        let (next, _) = stepper
            .step(&curve, cfg.dt)
            .map_err(|e| Error::SolverAtStep { step, source: Box::new(e) })?;
        curve = next;
        let a = curve.polygon_area()?;
        max_drift = max_drift.max(((a - a0) / a0).abs());
        if step % 50 == 0 || step == total {
            series.push((step as f64 * cfg.dt, a));
        }
    }
    if let Some(dir) = &cfg.out_dir {
        crate::snapshot::write_curve_csv(&dir.join("star_final.csv"), &curve)?;
        write_svg(&dir.join("star_final.svg"), &[&curve], None)?;
    }
    Ok(StarRun {
        final_isoperimetric_ratio: isoperimetric_ratio(&curve)?,
        curve,
        area_series: series,
        max_rel_area_drift: max_drift,
    })
}

/// One refinement level of the convergence study.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub ds: f64,
    pub dt: f64,
    pub l2: f64,
    pub linf: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// log2(e_2h / e_h) between consecutive rows.
    pub l2_rates: Vec<f64>,
    pub linf_rates: Vec<f64>,
    pub reference: String,
}

/// Final curves of a single quarter-loop level (no file emission).
pub fn run_single_level(
    formulation: RunFormulation,
    m: f64,
    alpha: f64,
    ds: f64,
    dt: f64,
    t_end: f64,
) -> Result<[GridCurve; 3]> {
    let cfg = SimulationConfig {
        formulation,
        m,
        alpha,
        ds: Some(ds),
        n: None,
        dt,
        t_end,
        out_dir: None,
        ..Default::default()
    };
    Ok(run_quarterloop(&cfg)?.curves)
}

/// Self-convergence study. Each level's error is its distance to the next
/// finer solution; the finest listed level is paired with one extra run at
/// half its spacing (same `dt = 0.01 ds^2` pairing). Consecutive-pair
/// differencing keeps the fitted rates free of reference bias: measuring
/// everything against a single reference only one halving away inflates the
/// last rate toward log2(5).
pub fn run_convergence(
    formulation: RunFormulation,
    m: f64,
    alpha: f64,
    levels: &[(f64, f64)],
    t_end: f64,
) -> Result<ConvergenceReport> {
    if levels.len() < 2 {
        return Err(Error::Config("need at least two refinement levels".into()));
    }
    let mut jobs: Vec<(f64, f64)> = levels.to_vec();
    jobs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let finest = jobs.last().unwrap().0;
    let ref_ds = finest / 2.0;
    let ref_dt = 0.01 * ref_ds * ref_ds;
    jobs.push((ref_ds, ref_dt));

    let results = par::par_map(&jobs, |&(ds, dt)| {
        run_single_level(formulation, m, alpha, ds, dt, t_end)
    });
    let mut finals = Vec::new();
    for r in results {
        finals.push(r?);
    }

    let mut rows = Vec::new();
    for i in 0..jobs.len() - 1 {
        let (l2, linf) = curves_distance(&finals[i], &finals[i + 1])?;
        rows.push(ConvergenceRow {
            ds: jobs[i].0,
            dt: jobs[i].1,
            l2,
            linf,
        });
    }
    let l2_rates = rows
        .windows(2)
        .map(|w| refinement_rate(w[0].l2, w[1].l2))
        .collect();
    let linf_rates = rows
        .windows(2)
        .map(|w| refinement_rate(w[0].linf, w[1].linf))
        .collect();
    Ok(ConvergenceReport {
        rows,
        l2_rates,
        linf_rates,
        reference: format!(
            "self-convergence against the next finer level; extra level at ds = {ref_ds}, dt = {ref_dt}"
        ),
    })
}

/// JSON report of a determinant scan.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WellposednessReport {
    pub formulation: Formulation,
    pub theta12: f64,
    pub theta13: f64,
    pub grid: GridSpec,
    pub min_abs_det: f64,
    pub argmin: [f64; 2],
    pub closed_form_max_rel_err: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridSpec {
    pub re: (f64, f64),
    pub im: (f64, f64),
    pub n_re: usize,
    pub n_im: usize,
}

pub fn run_wellposedness(
    formulation: Formulation,
    angles: &AngleConfig,
    grid: &GridSpec,
    out_dir: Option<&Path>,
) -> Result<WellposednessReport> {
    let zs = z_grid(grid.re, grid.im, grid.n_re, grid.n_im);
    let (min_abs_det, argmin) = scan_min_abs_det(formulation, angles, &zs)?;
    let rel_errs = par::par_map(&zs, |&z| -> Result<f64> {
        let det = junction_det(formulation, angles, z)?;
        let cf = match formulation {
            Formulation::Parabolic => closed_form_parabolic_det(angles, z),
            Formulation::Pdae => closed_form_pdae_det(angles, z),
        };
        Ok((det - cf).norm() / cf.norm().max(1e-300))
    });
    let mut worst: f64 = 0.0;
    for e in rel_errs {
        worst = worst.max(e?);
    }
    let report = WellposednessReport {
        formulation,
        theta12: angles.theta12,
        theta13: angles.theta13,
        grid: grid.clone(),
        min_abs_det,
        argmin: [argmin.re, argmin.im],
        closed_form_max_rel_err: worst,
    };
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let json =
            serde_json::to_string_pretty(&report).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(dir.join("wellposedness.json"), json + "\n")?;
    }
    Ok(report)
}

/// Appendix-B identity sweep: max kappa_ss identity gap on arc-length
/// resampled ellipses per refinement level, with fitted slopes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IdentityCheckReport {
    pub sizes: Vec<usize>,
    pub gaps: Vec<f64>,
    pub slopes: Vec<f64>,
}

pub fn run_identity_check(sizes: &[usize], out_dir: Option<&Path>) -> Result<IdentityCheckReport> {
    let gaps_r = par::par_map(sizes, |&n| -> Result<f64> {
        let fine = GridCurve::closed(
            (1..=8 * n)
                .map(|j| {
                    let t = 2.0 * std::f64::consts::PI * (j as f64 - 0.5) / (8 * n) as f64;
                    Vec2::new(2.0 * t.cos(), t.sin())
                })
                .collect(),
        )?;
        let e = fine.regrid_until_uniform(n, 1e-8, 20)?;
        let mut gmax: f64 = 0.0;
        for j in 1..=n as i32 {
            gmax = gmax.max(crate::motion::kappa_ss_identity_gap(&e, j)?);
        }
        Ok(gmax)
    });
    let mut gaps = Vec::new();
    for g in gaps_r {
        gaps.push(g?);
    }
    let slopes = gaps
        .windows(2)
        .map(|w| refinement_rate(w[0], w[1]))
        .collect();
    let report = IdentityCheckReport {
        sizes: sizes.to_vec(),
        gaps,
        slopes,
    };
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let json =
            serde_json::to_string_pretty(&report).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(dir.join("identitycheck.json"), json + "\n")?;
    }
    Ok(report)
}

/// Overhang scan over the final exterior branches (the non-single-valued
/// regime detector).
pub fn overhang_on_surfaces(run: &QuarterLoopRun) -> bool {
    has_overhang(&run.curves[1], 1e-9) || has_overhang(&run.curves[2], 1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation_catches_bad_settings() {
        let mut cfg = SimulationConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.dt = -1.0;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        cfg.dt = 0.01;
        cfg.m = 2.5;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        cfg.m = 0.5;
        cfg.ds = None;
        cfg.n = None;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        cfg.n = Some(64);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn pdae_quarterloop_smoke_run() {
        let cfg = SimulationConfig {
            ds: Some(0.25),
            dt: 6.25e-4,
            t_end: 2.5e-3,
            ..Default::default()
        };
        let run = run_quarterloop(&cfg).unwrap();
        // groove forms and junction migrates right (toward the shrinking
        // grain side)
        assert!(run.junction.y < 0.0);
        assert!(run.max_constraint_drift < 1e-8);
        assert!(run.max_chord_spread < 1e-6);
        assert_eq!(run.junction_path.len(), run.steps + 1);
    }

    #[test]
    fn determinism_of_emitted_files() {
        let dir = std::env::temp_dir().join(format!("gbflow-det-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        let mk = |sub: &str| SimulationConfig {
            ds: Some(0.25),
            dt: 1e-3,
            t_end: 2e-3,
            out_dir: Some(dir.join(sub)),
            ..Default::default()
        };
        run_quarterloop(&mk("a")).unwrap();
        run_quarterloop(&mk("b")).unwrap();
        for f in [
            "step000002.grain.csv",
            "step000002.left.csv",
            "step000002.right.csv",
            "step000002.json",
            "steps.jsonl",
        ] {
            let a = std::fs::read(dir.join("a").join(f)).unwrap();
            let b = std::fs::read(dir.join("b").join(f)).unwrap();
            assert_eq!(a, b, "{f} not deterministic");
        }
        let _ = std::fs::remove_dir_all(&dir);
    }
}
