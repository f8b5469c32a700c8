//! Drops the rod from 10° with the motor idle and prints the fall until it
//! hits the stop.

use tandem::plant::{Plant, PlantParams, SimConfig, State};

fn main() -> tandem::Result<()> {
    let params = PlantParams::default();
    params.validate()?;
    let mut plant = Plant::new(
        params.clone(),
        SimConfig::default(),
        State::new(0.0, 0.0, 10f64.to_radians(), 0.0),
    );

    println!(
        "{:>6} {:>9} {:>9} {:>9} {:>10}",
        "t[s]", "p[m]", "v[m/s]", "th[deg]", "om[deg/s]"
    );
    for _ in 0..60 {
        let s = plant.state();
        println!(
            "{:6.2} {:9.4} {:9.4} {:9.3} {:10.2}",
            plant.time(),
            s.p,
            s.v,
            s.theta.to_degrees(),
            s.omega.to_degrees()
        );
        if plant.advance(params.v_neutral)?.saturated {
            println!("rod reached the {:.1}° stop", params.theta_max.to_degrees());
            break;
        }
    }
    println!("audit: max |theta| = {:.4} rad", plant.audit().max_abs_theta);
    Ok(())
}
