//! End-to-end runs of the `tandem` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tandem::neuro::{Genome, GENOME_BYTES};

const TINY: &str = "\
ga.pop_size = 10
ga.generations = 6
ga.selection_generations = 2
ga.seed = 3
episode.horizon = 2
episode.rms_window = 5
";

fn tandem(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tandem"))
        .args(args)
        .arg("--quiet")
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn setup(text: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.conf");
    std::fs::write(&config, text).unwrap();
    (dir, config)
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn design_safe_writes_a_gain_row() {
    let (dir, config) = setup("");
    let out = dir.path().join("out");
    let run = tandem(&["design-safe"], &config, &out);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let gain = std::fs::read_to_string(out.join("safe_gain.txt")).unwrap();
    assert!(gain.starts_with("# config-digest: "));
    let rows = data_lines(&gain);
    assert_eq!(rows.len(), 1);
    let k: Vec<f64> = rows[0].split_whitespace().map(|t| t.parse().unwrap()).collect();
    assert_eq!(k.len(), 4);
    let report = std::fs::read_to_string(out.join("safe_report.txt")).unwrap();
    assert!(report.contains("recovery failures: 0 of 16"));
}

#[test]
fn inflated_hypercube_is_a_safety_failure() {
    let (dir, config) = setup(
        "limits.dp = 1.0\nlimits.dv = 2.0\nlimits.dtheta_deg = 57\nlimits.domega_deg = 1150\n\
         plant.rail_half = 5\nplant.theta_max_deg = 86\nweights.pm = 1.5\nweights.am_deg = 60\n",
    );
    let run = tandem(&["design-safe"], &config, &dir.path().join("out"));
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn config_errors_exit_one() {
    let (dir, config) = setup("ga.pop_sise = 10\n");
    let run = tandem(&["optimize"], &config, &dir.path().join("out"));
    assert_eq!(run.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&run.stderr).contains("line 1"));

    let run = tandem(&["optimize"], &dir.path().join("missing.conf"), &dir.path().join("out"));
    assert_eq!(run.status.code(), Some(1));

    let (dir, config) = setup("ga.elite_frac = 0.7\nga.reinit_frac = 0.7\n");
    let run = tandem(&["optimize"], &config, &dir.path().join("out"));
    assert_eq!(run.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_one() {
    let run = Command::new(env!("CARGO_BIN_EXE_tandem"))
        .arg("optimise")
        .output()
        .unwrap();
    assert_eq!(run.status.code(), Some(1));
    let run = Command::new(env!("CARGO_BIN_EXE_tandem"))
        .arg("optimize")
        .output()
        .unwrap();
    assert_eq!(run.status.code(), Some(1));
}

#[test]
fn optimize_then_evaluate() {
    let (dir, config) = setup(TINY);
    let out = dir.path().join("out");
    let run = tandem(&["optimize"], &config, &out);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));

    let bin = std::fs::read(out.join("best_genome.bin")).unwrap();
    assert_eq!(bin.len(), GENOME_BYTES);
    let hex = Genome::read_file(out.join("best_genome.hex")).unwrap();
    assert_eq!(hex.to_bytes(), bin);

    let history = std::fs::read_to_string(out.join("history.csv")).unwrap();
    let rows = data_lines(&history);
    assert_eq!(rows[0], "generation,best_fitness,mean_fitness,switch_count,elapsed_s");
    assert_eq!(rows.len(), 1 + 6);

    let audit = std::fs::read_to_string(out.join("safety_audit.txt")).unwrap();
    assert!(audit.contains("best_genome_sha256"));

    for genome in ["best_genome.bin", "best_genome.hex"] {
        let eval_out = dir.path().join(format!("eval-{genome}"));
        let run = Command::new(env!("CARGO_BIN_EXE_tandem"))
            .args(["evaluate", "--quiet", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&eval_out)
            .arg("--genome")
            .arg(out.join(genome))
            .output()
            .unwrap();
        assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
        let trace = std::fs::read_to_string(eval_out.join("trace_learning.csv")).unwrap();
        let rows = data_lines(&trace);
        assert_eq!(
            rows[0],
            "t_s,p_m,v_mps,theta_rad,omega_radps,voltage_V,controller,in_limits"
        );
        // 5 s window at 10 ms, both endpoints
        assert_eq!(rows.len(), 1 + 501);
        let safe = std::fs::read_to_string(eval_out.join("trace_safe.csv")).unwrap();
        assert_eq!(data_lines(&safe).len(), 1 + 501);
    }
}

#[test]
fn evaluate_without_a_genome_is_a_usage_error() {
    let (dir, config) = setup(TINY);
    let run = tandem(&["evaluate"], &config, &dir.path().join("out"));
    assert_eq!(run.status.code(), Some(1));
}

#[test]
fn seed_override_changes_the_digest() {
    let (dir, config) = setup(TINY);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(tandem(&["design-safe"], &config, &a).status.success());
    let run = Command::new(env!("CARGO_BIN_EXE_tandem"))
        .args(["design-safe", "--quiet", "--seed", "99", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&b)
        .output()
        .unwrap();
    assert!(run.status.success());
    let first = |p: &Path| {
        std::fs::read_to_string(p.join("safe_gain.txt"))
            .unwrap()
            .lines()
            .next()
            .unwrap()
            .to_string()
    };
    assert_ne!(first(&a), first(&b));
}

#[test]
fn noise_free_history_never_gets_worse() {
    let (dir, config) = setup(
        "ga.pop_size = 12\nga.generations = 40\nga.selection_generations = 1\nga.seed = 5\n\
         episode.horizon = 2\nsensors.noise_std_p = 0\nsensors.noise_std_theta_deg = 0\n",
    );
    let out = dir.path().join("out");
    assert!(tandem(&["optimize"], &config, &out).status.success());
    let history = std::fs::read_to_string(out.join("history.csv")).unwrap();
    let best: Vec<f64> = data_lines(&history)[1..]
        .iter()
        .map(|r| r.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(best.len(), 40);
    assert!(best.windows(2).all(|w| w[1] <= w[0]), "{best:?}");
}

#[test]
fn sweep_writes_one_row_per_pair() {
    let (dir, config) = setup(&format!("{TINY}sweep.pairs = 0.5:2, 2:0.5\n"));
    let out = dir.path().join("out");
    let run = tandem(&["sweep-weights"], &config, &out);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let text = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows = tandem::report::parse_sweep_csv(&text).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[0].pw_cm, rows[0].aw_deg), (0.5, 2.0));
}
