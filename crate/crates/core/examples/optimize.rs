//! Desk-scale genetic optimization under supervision.
//!
//! `cargo run --release --example optimize [config]`

use std::path::Path;

use tandem::config::ExperimentConfig;
use tandem::experiment::cmd_optimize;

fn main() -> tandem::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/desk.conf").into());
    let cfg = ExperimentConfig::from_file(Path::new(&path))?;
    let out = cmd_optimize(&cfg, &mut |line| println!("{line}"))?;
    println!("{}", out.summary);
    for f in &out.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
