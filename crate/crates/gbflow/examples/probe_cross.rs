use gbflow::harness::*;

fn main() {
    for (ds, dt) in [(0.2, 4e-4), (0.1, 1e-4), (0.05, 2.5e-5)] {
        let mk = |f| SimulationConfig {
            formulation: f,
            m: 0.5,
            ds: Some(ds),
            dt,
            t_end: 0.02,
            ..Default::default()
        };
        let pdae = run_quarterloop(&mk(RunFormulation::Pdae)).unwrap();
        let cart = run_quarterloop(&mk(RunFormulation::Cartesian)).unwrap();
        let hp = pdae.junction.y;
        let hc = cart.cartesian.unwrap().0;
        println!(
            "ds={ds} dt={dt}: pdae height {hp:.6}, cartesian height {hc:.6}, diff {:.3e}; s_pdae {:.4} s_cart {:.4}",
            (hp - hc).abs(),
            pdae.junction.x,
            cart.cartesian.unwrap().1,
        );
    }
}
