use gbflow::harness::*;
use gbflow::metrics::has_overhang;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let tend: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(0.05);
    let ds: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(0.1);
    let dt: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(1e-4);
    let cfg = SimulationConfig {
        formulation: RunFormulation::Pdae,
        m: 1.96,
        ds: Some(ds),
        dt,
        t_end: tend,
        ..Default::default()
    };
    let run = run_quarterloop(&cfg).unwrap();
    println!(
        "t={tend} ds={ds} dt={dt}: junction=({:.4},{:.4}) overhang L={} R={}",
        run.junction.x,
        run.junction.y,
        has_overhang(&run.curves[1], 1e-9),
        has_overhang(&run.curves[2], 1e-9)
    );
    // print the first few nodes of the right surface to see the wall shape
    for (k, p) in run.curves[2].interior().take(8).enumerate() {
        println!("  right[{}] = ({:.4}, {:.4})", k + 1, p.x, p.y);
    }
}
