//! Batch front end for the coupled surface / grain-boundary motion solvers.
//!
//! Exit codes: 0 on success, 2 on solver failure, 3 on configuration errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gbflow::harness::{
    run_convergence, run_identity_check, run_quarterloop, run_star, run_wellposedness, GridSpec,
    RunFormulation, SimulationConfig,
};
use gbflow::wellposed::{AngleConfig, Formulation};
use gbflow::Error;

#[derive(Parser)]
#[command(name = "gbflow", version, about = "Coupled surface and grain-boundary motion")]
#[command(allow_negative_numbers = true)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evolve the quarter-loop bicrystal geometry.
    Quarterloop(RunArgs),
    /// Closed-curve surface diffusion on a six-lobed star.
    Star(StarArgs),
    /// Grid-refinement study with self-referenced errors at t_end.
    Convergence(ConvArgs),
    /// Laplace-domain determinant scan of the junction conditions.
    Wellposedness(WpArgs),
    /// Identity sweep: kappa_ss vs (X_ssss + kappa^2 X_ss) . n on ellipses.
    Identitycheck(IdArgs),
}

#[derive(Args, Clone)]
struct RunArgs {
    /// TOML file with flat key = value fields mirroring the run config;
    /// explicit flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// parabolic | pdae | cartesian
    #[arg(long)]
    formulation: Option<String>,
    #[arg(long)]
    m: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// Nodes per curve (quarter loop) or on the closed curve (star).
    #[arg(long)]
    n: Option<usize>,
    /// Target spacing; alternative to --n.
    #[arg(long)]
    ds: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    tend: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Snapshot cadence in steps (0: first and last only).
    #[arg(long)]
    snapshot_every: Option<usize>,
}

#[derive(Args)]
struct StarArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Lobe amplitude of r(theta) = 1 + amplitude cos(6 theta).
    #[arg(long, default_value_t = 0.3)]
    amplitude: f64,
}

#[derive(Args)]
struct ConvArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated spacings, e.g. 0.2,0.1,0.05; dt per level is
    /// 0.01 ds^2 unless --dt fixes one value for all levels.
    #[arg(long, default_value = "0.2,0.1,0.05")]
    levels: String,
}

#[derive(Args)]
struct WpArgs {
    /// parabolic | pdae
    #[arg(long, default_value = "parabolic")]
    formulation: String,
    /// Junction angles in radians; derived from --m when absent.
    #[arg(long)]
    theta12: Option<f64>,
    #[arg(long)]
    theta13: Option<f64>,
    #[arg(long)]
    m: Option<f64>,
    /// Real-part range of the z grid.
    #[arg(long, num_args = 2, default_values_t = [0.1, 10.0], allow_negative_numbers = true)]
    re: Vec<f64>,
    /// Imaginary-part range of the z grid.
    #[arg(long, num_args = 2, default_values_t = [-10.0, 10.0], allow_negative_numbers = true)]
    im: Vec<f64>,
    /// Grid points per axis.
    #[arg(long, default_value_t = 10)]
    grid: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct IdArgs {
    /// Comma-separated node counts.
    #[arg(long, default_value = "64,128,256")]
    sizes: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_formulation(s: &str) -> Result<RunFormulation, Error> {
    match s {
        "parabolic" => Ok(RunFormulation::Parabolic),
        "pdae" => Ok(RunFormulation::Pdae),
        "cartesian" => Ok(RunFormulation::Cartesian),
        other => Err(Error::Config(format!(
            "unknown formulation {other:?} (expected parabolic | pdae | cartesian)"
        ))),
    }
}

fn build_config(args: &RunArgs) -> Result<SimulationConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            toml::from_str::<SimulationConfig>(&text)
                .map_err(|e| Error::Config(format!("cannot parse {}: {e}", path.display())))?
        }
        None => SimulationConfig::default(),
    };
    if let Some(f) = &args.formulation {
        cfg.formulation = parse_formulation(f)?;
    }
    if let Some(v) = args.m {
        cfg.m = v;
    }
    if let Some(v) = args.alpha {
        cfg.alpha = v;
    }
    if args.n.is_some() || args.ds.is_some() {
        cfg.n = args.n;
        cfg.ds = args.ds;
    }
    if let Some(v) = args.dt {
        cfg.dt = v;
    }
    if let Some(v) = args.tend {
        cfg.t_end = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.snapshot_every {
        cfg.snapshot_every = v;
    }
    if args.out.is_some() {
        cfg.out_dir = args.out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn exit_for(err: &Error) -> ExitCode {
    match err {
        Error::Config(_)
        | Error::BadEnergyRatio { .. }
        | Error::BadAngles { .. }
        | Error::BadLaplaceVariable { .. } => ExitCode::from(3),
        _ => ExitCode::from(2),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.cmd {
        Cmd::Quarterloop(args) => cmd_quarterloop(args),
        Cmd::Star(args) => cmd_star(args),
        Cmd::Convergence(args) => cmd_convergence(args),
        Cmd::Wellposedness(args) => cmd_wellposedness(args),
        Cmd::Identitycheck(args) => cmd_identitycheck(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_for(&e)
        }
    }
}

fn cmd_quarterloop(args: RunArgs) -> Result<(), Error> {
    let cfg = build_config(&args)?;
    let run = run_quarterloop(&cfg)?;
    println!(
        "quarterloop: {:?}, m = {}, {} steps of dt = {}",
        cfg.formulation, cfg.m, run.steps, cfg.dt
    );
    println!(
        "junction: ({:.6}, {:.6}); spacing ratio {:.4}; Newton iterations {}",
        run.junction.x, run.junction.y, run.spacing_ratio, run.newton_iterations
    );
    if run.max_constraint_drift.is_finite() {
        println!(
            "constraint drift {:.3e}, chord spread {:.3e}",
            run.max_constraint_drift, run.max_chord_spread
        );
    }
    if let Some((height, s, s_t)) = run.cartesian {
        println!("cartesian: junction height {height:.6}, s = {s:.6}, s_t = {s_t:.6}");
    }
    Ok(())
}

fn cmd_star(args: StarArgs) -> Result<(), Error> {
    let cfg = build_config(&args.run)?;
    let run = run_star(&cfg, args.amplitude)?;
    let a0 = run.area_series.first().map(|p| p.1).unwrap_or(f64::NAN);
    println!(
        "star: N = {}, {} steps of dt = {}",
        cfg.n.unwrap_or(256),
        cfg.steps(),
        cfg.dt
    );
    println!(
        "area {:.9} -> {:.9} (max rel drift {:.3e}); isoperimetric ratio {:.6}",
        a0,
        run.area_series.last().map(|p| p.1).unwrap_or(f64::NAN),
        run.max_rel_area_drift,
        run.final_isoperimetric_ratio
    );
    Ok(())
}

fn cmd_convergence(args: ConvArgs) -> Result<(), Error> {
    let cfg = build_config(&args.run)?;
    let formulation = cfg.formulation;
    if formulation == RunFormulation::Cartesian {
        return Err(Error::Config(
            "the convergence study runs on the parametric formulations".into(),
        ));
    }
    let spacings = parse_list_f64(&args.levels)?;
    let levels: Vec<(f64, f64)> = spacings
        .iter()
        .map(|&ds| (ds, args.run.dt.unwrap_or(0.01 * ds * ds)))
        .collect();
    let report = run_convergence(formulation, cfg.m, cfg.alpha, &levels, cfg.t_end)?;
    println!("convergence, {:?}, m = {}, t = {}", formulation, cfg.m, cfg.t_end);
    println!("{:>8} {:>12} {:>12} {:>8} {:>12} {:>8}", "ds", "dt", "L2", "rate", "Linf", "rate");
    for (i, row) in report.rows.iter().enumerate() {
        let (r2, ri) = if i == 0 {
            (String::new(), String::new())
        } else {
            (
                format!("{:.4}", report.l2_rates[i - 1]),
                format!("{:.4}", report.linf_rates[i - 1]),
            )
        };
        println!(
            "{:>8} {:>12.3e} {:>12.4e} {:>8} {:>12.4e} {:>8}",
            row.ds, row.dt, row.l2, r2, row.linf, ri
        );
    }
    println!("reference: {}", report.reference);
    if let Some(out) = &cfg.out_dir {
        std::fs::create_dir_all(out)?;
        let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(out.join("convergence.json"), json + "\n")?;
    }
    Ok(())
}

fn cmd_wellposedness(args: WpArgs) -> Result<(), Error> {
    let formulation = match args.formulation.as_str() {
        "parabolic" => Formulation::Parabolic,
        "pdae" => Formulation::Pdae,
        other => {
            return Err(Error::Config(format!(
                "unknown formulation {other:?} (expected parabolic | pdae)"
            )))
        }
    };
    let angles = match (args.theta12, args.theta13, args.m) {
        (Some(a), Some(b), _) => AngleConfig::new(a, b)?,
        (None, None, Some(m)) => AngleConfig::from_energy_ratio(m)?,
        _ => {
            return Err(Error::Config(
                "give both --theta12 and --theta13, or --m".into(),
            ))
        }
    };
    let grid = GridSpec {
        re: (args.re[0], args.re[1]),
        im: (args.im[0], args.im[1]),
        n_re: args.grid,
        n_im: args.grid,
    };
    let report = run_wellposedness(formulation, &angles, &grid, args.out.as_deref())?;
    println!(
        "wellposedness {:?}: theta12 = {:.6}, theta13 = {:.6}",
        formulation, report.theta12, report.theta13
    );
    println!(
        "min |det| = {:.6e} at z = {:.4} + {:.4}i; closed-form max rel err = {:.3e}",
        report.min_abs_det, report.argmin[0], report.argmin[1], report.closed_form_max_rel_err
    );
    Ok(())
}

fn cmd_identitycheck(args: IdArgs) -> Result<(), Error> {
    let sizes: Vec<usize> = args
        .sizes
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|e| Error::Config(format!("bad size {s:?}: {e}")))
        })
        .collect::<Result<_, _>>()?;
    let report = run_identity_check(&sizes, args.out.as_deref())?;
    println!("{:>8} {:>14} {:>8}", "N", "max gap", "slope");
    for (i, (n, g)) in report.sizes.iter().zip(&report.gaps).enumerate() {
        let slope = if i == 0 {
            String::new()
        } else {
            format!("{:.4}", report.slopes[i - 1])
        };
        println!("{n:>8} {g:>14.6e} {slope:>8}");
    }
    Ok(())
}

fn parse_list_f64(s: &str) -> Result<Vec<f64>, Error> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("bad number {tok:?}: {e}")))
        })
        .collect()
}
