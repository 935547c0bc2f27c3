use gbflow::closed::*;
use gbflow::newton::NewtonConfig;

fn main() {
    let c = star_curve(256, 0.3).unwrap();
    let law = ClosedLaw::SurfaceDiffusion { mobility: 1.0 };
    let mut stepper = ClosedStepper::new(law, ClosedFormulation::Pdae, NewtonConfig::default());
    for dt in [1e-5 / 64.0, 1e-5] {
        match stepper.step(&c, dt) {
            Ok((_, rep)) => println!(
                "dt={dt:e}: ok, iters {}, resid {:e}\n history: {:?}",
                rep.iterations, rep.residual_norm,
                rep.history.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>()
            ),
            Err(e) => match e {
                gbflow::Error::NewtonNoConvergence { iterations, residual_norm, history } => {
                    println!("dt={dt:e}: FAILED after {iterations}, resid {residual_norm:e}");
                    println!(" history: {:?}", history.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>());
                }
                other => println!("dt={dt:e}: error {other}"),
            },
        }
    }
}
