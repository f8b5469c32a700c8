//! LQR design of the SAFE gain and its recovery from every hypercube vertex.

use tandem::config::ExperimentConfig;
use tandem::experiment::{design_safe, q_matrix};
use tandem::safe::{linearize, solve_lqr};

fn main() -> tandem::Result<()> {
    let cfg = ExperimentConfig::default();
    let model = linearize(&cfg.plant);
    println!("controllability rank: {}", model.controllability_rank());

    let lqr = solve_lqr(&model, &q_matrix(&cfg), cfg.r)?;
    println!("K = {:?}", lqr.gain.k);
    println!("riccati residual: {:.2e}", lqr.residual);

    let design = design_safe(&cfg)?;
    for ev in &design.eigenvalues {
        println!("closed-loop pole {:+.3} {:+.3}i", ev.re, ev.im);
    }
    for r in &design.recovery {
        let v = r.vertex;
        println!(
            "vertex p {:+.2} v {:+.2} th {:+.1}° om {:+.0}°/s -> {}",
            v.p,
            v.v,
            v.theta.to_degrees(),
            v.omega.to_degrees(),
            r.time.map_or("no recovery".into(), |t| format!("{t:.2} s"))
        );
    }
    println!("all vertices recovered: {}", design.passed());
    Ok(())
}
