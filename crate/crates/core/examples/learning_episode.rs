//! One supervised episode with a random network, then the same episode with
//! the SAFE law in the learner slot.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tandem::config::ExperimentConfig;
use tandem::experiment::prepare;
use tandem::ga::random_genome;
use tandem::neuro::decode_genome;

fn main() -> tandem::Result<()> {
    let tandem = prepare(&ExperimentConfig::default())?;
    let genome = random_genome(&mut ChaCha8Rng::seed_from_u64(42));
    let nn = tandem.neural(decode_genome(&genome));

    let r = tandem.run_episode(&nn, 0)?;
    println!("reset took {:.2} s", r.reset_time);
    match r.switch_time {
        Some(m) => println!("network left the hypercube at {m:.2} s; SAFE finished the episode"),
        None => println!("network stayed inside for the whole {} s", r.horizon),
    }
    println!("fitness {:.4e}", r.fitness);
    for s in r.trace.iter().take(8) {
        println!(
            "  t {:.2} p {:+.4} th {:+.4} u {:.2} {} {}",
            s.t,
            s.state.p,
            s.state.theta,
            s.voltage,
            s.controller.label(),
            if s.in_limits { "in" } else { "OUT" }
        );
    }

    let baseline = tandem.run_episode(&tandem.safe, 0)?;
    println!(
        "SAFE alone: fitness {:.4e}, switched: {}",
        baseline.fitness,
        baseline.switched()
    );
    Ok(())
}
