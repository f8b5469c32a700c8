//! Sweep of the fitness weights with a reduced GA budget.

use tandem::config::ExperimentConfig;
use tandem::experiment::sweep_weights;

fn main() -> tandem::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.ga.pop_size = 16;
    cfg.ga.generations = 15;
    cfg.ga.selection_generations = 3;
    cfg.set_seed(5);

    let (rows, audit, _) = sweep_weights(&cfg, &mut |line| eprintln!("{line}"))?;
    println!("{:>6} {:>6} {:>10} {:>10}", "Pw cm", "Aw deg", "cart cm", "angle deg");
    for r in &rows {
        println!(
            "{:6.2} {:6.2} {:10.3} {:10.3}",
            r.pw_cm, r.aw_deg, r.cart_rms_cm, r.angle_rms_deg
        );
    }
    println!(
        "audit max|p| {:.3} m, max|theta| {:.3} rad",
        audit.max_abs_p, audit.max_abs_theta
    );
    Ok(())
}
