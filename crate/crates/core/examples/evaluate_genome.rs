//! Short optimization followed by a 30 s comparison against SAFE.

use tandem::config::ExperimentConfig;
use tandem::experiment::{evaluate_genome, optimize};

fn main() -> tandem::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.ga.pop_size = 20;
    cfg.ga.generations = 20;
    cfg.ga.selection_generations = 3;
    cfg.set_seed(3);

    let (tandem, result) = optimize(&cfg, &mut |_| {})?;
    let report = evaluate_genome(&tandem, &result.best.genome, cfg.rms_window)?;
    let (rp, ra) = report.reduction_pct();
    println!(
        "network: cart {:.3} cm, angle {:.3} deg rms{}",
        100.0 * report.learner_rms.0,
        report.learner_rms.1.to_degrees(),
        report
            .learner
            .switch_time
            .map_or(String::new(), |m| format!(" (SAFE took over at {m:.2} s)"))
    );
    println!(
        "SAFE:    cart {:.3} cm, angle {:.3} deg rms",
        100.0 * report.baseline_rms.0,
        report.baseline_rms.1.to_degrees()
    );
    println!("reduction: cart {rp:+.1}%, angle {ra:+.1}%");
    Ok(())
}
