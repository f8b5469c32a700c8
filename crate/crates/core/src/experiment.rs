//! The four experiment commands behind the `tandem` binary.
//!
//! Each command validates the configuration, runs, writes its files into
//! `output.dir` and returns a short summary. Safety violations are not
//! errors: the command finishes, records them and reports `safe == false`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{Complex, Matrix4, Vector4};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::ga::{run_optimization_with, OptimizationResult};
use crate::neuro::{decode_genome, Genome};
use crate::plant::{SafetyAudit, State};
use crate::report::{self, sig9, SweepRow};
use crate::safe::{closed_loop_eigenvalues, is_stabilizing, linearize, solve_lqr, SafeGain};
use crate::supervisor::{compute_rms, EpisodeResult, SafeController, Tandem, VertexRecovery};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_SAFETY: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Process exit status for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err.root() {
        Error::ResetFailed { .. } => EXIT_SAFETY,
        Error::Blowup { .. } | Error::Uncontrollable { .. } | Error::Riccati(_) => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

#[derive(Clone, Debug)]
pub struct CommandOutput {
    pub files: Vec<PathBuf>,
    pub summary: String,
    /// False when a safety check failed; the process should exit with 2.
    pub safe: bool,
}

impl CommandOutput {
    pub fn exit_code(&self) -> i32 {
        if self.safe {
            EXIT_OK
        } else {
            EXIT_SAFETY
        }
    }
}

fn out_file(cfg: &ExperimentConfig, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    Ok(cfg.out_dir.join(name))
}

pub fn q_matrix(cfg: &ExperimentConfig) -> Matrix4<f64> {
    Matrix4::from_diagonal(&Vector4::from(cfg.q))
}

/// The pinned gain from `safe.gain_file`, or a fresh LQR design.
pub fn safe_gain(cfg: &ExperimentConfig) -> Result<SafeGain> {
    match &cfg.gain_file {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            SafeGain::from_text(&text)
        }
        None => Ok(solve_lqr(&linearize(&cfg.plant), &q_matrix(cfg), cfg.r)?.gain),
    }
}

pub fn build_tandem(cfg: &ExperimentConfig, gain: SafeGain) -> Tandem {
    Tandem {
        plant: cfg.plant.clone(),
        sensors: cfg.sensors.clone(),
        sim: cfg.sim.clone(),
        safe: SafeController {
            gain,
            target: cfg.s0,
            plant: cfg.plant.clone(),
        },
        s0: cfg.s0,
        start: cfg.start,
        limits: cfg.limits.clone(),
        weights: cfg.weights.clone(),
        horizon: cfg.horizon,
        reset: cfg.reset.clone(),
        view: cfg.view,
    }
}

/// Validated configuration turned into a ready supervisor.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Tandem> {
    cfg.validate()?;
    let tandem = build_tandem(cfg, safe_gain(cfg)?);
    tandem.validate()?;
    Ok(tandem)
}

#[derive(Clone, Debug)]
pub struct SafeDesign {
    pub gain: SafeGain,
    /// Riccati residual, absent for a pinned gain.
    pub residual: Option<f64>,
    pub eigenvalues: Vec<Complex<f64>>,
    pub stabilizing: bool,
    pub recovery: Vec<VertexRecovery>,
}

impl SafeDesign {
    pub fn passed(&self) -> bool {
        self.stabilizing && self.recovery.iter().all(VertexRecovery::passed)
    }
}

pub fn design_safe(cfg: &ExperimentConfig) -> Result<SafeDesign> {
    cfg.validate()?;
    let model = linearize(&cfg.plant);
    let (gain, residual) = match &cfg.gain_file {
        Some(_) => (safe_gain(cfg)?, None),
        None => {
            let sol = solve_lqr(&model, &q_matrix(cfg), cfg.r)?;
            (sol.gain, Some(sol.residual))
        }
    };
    let tandem = build_tandem(cfg, gain);
    Ok(SafeDesign {
        gain,
        residual,
        eigenvalues: closed_loop_eigenvalues(&model, &gain),
        stabilizing: is_stabilizing(&model, &gain),
        recovery: tandem.recovery_check(),
    })
}

fn state_line(s: &State) -> String {
    format!(
        "p={:+.3} m v={:+.3} m/s theta={:+.2} deg omega={:+.1} deg/s",
        s.p,
        s.v,
        s.theta.to_degrees(),
        s.omega.to_degrees()
    )
}

pub fn cmd_design_safe(cfg: &ExperimentConfig) -> Result<CommandOutput> {
    let design = design_safe(cfg)?;
    let header = cfg.header(&[]);

    let gain_path = out_file(cfg, "safe_gain.txt")?;
    report::write(
        &gain_path,
        &format!("{}{}\n", report::comment_block(&header), design.gain.to_text()),
    )?;

    let mut text = report::comment_block(&header);
    writeln!(
        text,
        "gain K (V per m, m/s, rad, rad/s): {}",
        design.gain.k.map(sig9).join(" ")
    )
    .unwrap();
    match design.residual {
        Some(r) => writeln!(text, "riccati residual: {}", sig9(r)).unwrap(),
        None => writeln!(text, "riccati residual: n/a (gain read from file)").unwrap(),
    }
    writeln!(text, "closed-loop eigenvalues:").unwrap();
    for ev in &design.eigenvalues {
        writeln!(text, "  {} {}i", sig9(ev.re), sig9(ev.im)).unwrap();
    }
    writeln!(text, "stabilizing: {}", design.stabilizing).unwrap();
    writeln!(text, "vertex recovery (budget {} s):", cfg.reset.budget).unwrap();
    for (i, r) in design.recovery.iter().enumerate() {
        let time = r.time.map_or("FAIL".to_string(), |t| format!("{t:.2} s"));
        writeln!(
            text,
            "  {i:2} {}  -> {time}, max|p| {:.4} m, max|theta| {:.4} rad{}",
            state_line(&r.vertex),
            r.audit.max_abs_p,
            r.audit.max_abs_theta,
            if r.safe { "" } else { ", HARD STOP" }
        )
        .unwrap();
    }
    let failed = design.recovery.iter().filter(|r| !r.passed()).count();
    writeln!(text, "recovery failures: {failed} of {}", design.recovery.len()).unwrap();
    let report_path = out_file(cfg, "safe_report.txt")?;
    report::write(&report_path, &text)?;

    let worst = design.recovery.iter().filter_map(|r| r.time).fold(0.0, f64::max);
    Ok(CommandOutput {
        files: vec![gain_path, report_path],
        summary: format!(
            "K = [{}], stabilizing: {}, recovery failures: {failed}/16, slowest recovery {worst:.2} s",
            design.gain.k.map(|k| format!("{k:.4}")).join(", "),
            design.stabilizing
        ),
        safe: design.passed(),
    })
}

/// Runs the GA against the configured supervisor.
pub fn optimize(cfg: &ExperimentConfig, log: &mut dyn FnMut(&str)) -> Result<(Tandem, OptimizationResult)> {
    let tandem = prepare(cfg)?;
    let result = run_optimization_with(&cfg.ga, None, &tandem, |r| {
        log(&format!(
            "generation {:4}  best {:.6e}  mean {:.6e}  switched {}",
            r.generation, r.best_fitness, r.mean_fitness, r.switch_count
        ))
    })?;
    Ok((tandem, result))
}

fn audit_text(audit: &SafetyAudit, tandem: &Tandem) -> String {
    format!(
        "max_abs_p_m: {}\nmax_abs_theta_rad: {}\nhard_stop_contacts: {}\nrail_half_m: {}\ntheta_max_rad: {}\nverdict: {}\n",
        sig9(audit.max_abs_p),
        sig9(audit.max_abs_theta),
        audit.contacts,
        tandem.plant.rail_half,
        tandem.plant.theta_max,
        if audit.is_safe(&tandem.plant) { "SAFE" } else { "VIOLATION" }
    )
}

pub fn cmd_optimize(cfg: &ExperimentConfig, log: &mut dyn FnMut(&str)) -> Result<CommandOutput> {
    let (tandem, result) = optimize(cfg, log)?;
    let header = cfg.header(&[]);
    let genome = &result.best.genome;

    let bin = out_file(cfg, "best_genome.bin")?;
    genome.write_binary(&bin)?;
    let hex = out_file(cfg, "best_genome.hex")?;
    genome.write_hex(&hex, &header)?;
    let history = out_file(cfg, "history.csv")?;
    report::write(&history, &report::history_csv(&result.history, &header))?;

    let best_fitness = result.best.fitness.unwrap_or(f64::NAN);
    let mut text = report::comment_block(&header);
    text.push_str(&audit_text(&result.audit, &tandem));
    writeln!(text, "simulated_s: {}", sig9(result.sim_time)).unwrap();
    writeln!(text, "best_fitness: {}", sig9(best_fitness)).unwrap();
    writeln!(
        text,
        "best_genome_sha256: {}",
        hex::encode(Sha256::digest(genome.to_bytes()))
    )
    .unwrap();
    let audit = out_file(cfg, "safety_audit.txt")?;
    report::write(&audit, &text)?;

    let safe = result.audit.is_safe(&tandem.plant);
    Ok(CommandOutput {
        files: vec![bin, hex, history, audit],
        summary: format!(
            "best fitness {best_fitness:.6e}; audit max|p| {:.4} m, max|theta| {:.4} rad: {}",
            result.audit.max_abs_p,
            result.audit.max_abs_theta,
            if safe { "safe" } else { "SAFETY VIOLATION" }
        ),
        safe,
    })
}

#[derive(Clone, Debug)]
pub struct EvaluationReport {
    pub learner: EpisodeResult,
    pub baseline: EpisodeResult,
    /// (cart m, angle rad)
    pub learner_rms: (f64, f64),
    pub baseline_rms: (f64, f64),
}

impl EvaluationReport {
    pub fn reduction_pct(&self) -> (f64, f64) {
        (
            report::reduction_pct(self.baseline_rms.0, self.learner_rms.0),
            report::reduction_pct(self.baseline_rms.1, self.learner_rms.1),
        )
    }
}

/// A `rms_window` run of the genome and of SAFE from the same reset and noise.
pub fn evaluate_genome(tandem: &Tandem, genome: &Genome, window: f64) -> Result<EvaluationReport> {
    let learner = tandem.run_episode_for(&tandem.neural(decode_genome(genome)), 0, window)?;
    let baseline = tandem.run_episode_for(&tandem.safe, 0, window)?;
    Ok(EvaluationReport {
        learner_rms: compute_rms(&learner.trace)?,
        baseline_rms: compute_rms(&baseline.trace)?,
        learner,
        baseline,
    })
}

pub fn cmd_evaluate(cfg: &ExperimentConfig, genome_path: Option<&Path>) -> Result<CommandOutput> {
    let tandem = prepare(cfg)?;
    let path = genome_path
        .map(Path::to_path_buf)
        .or_else(|| cfg.genome.clone())
        .ok_or_else(|| Error::Config {
            line: 0,
            msg: "no genome given (use --genome or evaluate.genome)".into(),
        })?;
    let genome = Genome::read_file(&path)?;
    let rep = evaluate_genome(&tandem, &genome, cfg.rms_window)?;
    let header = cfg.header(&[format!("genome: {}", genome.to_hex())]);

    let learner_csv = out_file(cfg, "trace_learning.csv")?;
    report::write(&learner_csv, &report::trace_csv(&rep.learner.trace, &header))?;
    let safe_csv = out_file(cfg, "trace_safe.csv")?;
    report::write(&safe_csv, &report::trace_csv(&rep.baseline.trace, &header))?;

    let (dp, da) = rep.reduction_pct();
    let mut text = report::comment_block(&header);
    writeln!(text, "window_s: {}", cfg.rms_window).unwrap();
    for (name, r, rms) in [
        ("learning", &rep.learner, rep.learner_rms),
        ("safe", &rep.baseline, rep.baseline_rms),
    ] {
        writeln!(text, "{name}_cart_rms_cm: {}", sig9(rms.0 * 100.0)).unwrap();
        writeln!(text, "{name}_angle_rms_deg: {}", sig9(rms.1.to_degrees())).unwrap();
        writeln!(text, "{name}_fitness: {}", sig9(r.fitness)).unwrap();
        writeln!(
            text,
            "{name}_switch_time_s: {}",
            r.switch_time.map_or("none".to_string(), sig9)
        )
        .unwrap();
    }
    writeln!(text, "reduction_p_pct: {}", sig9(dp)).unwrap();
    writeln!(text, "reduction_a_pct: {}", sig9(da)).unwrap();
    let mut audit = rep.learner.audit;
    audit.merge(&rep.baseline.audit);
    text.push_str(&audit_text(&audit, &tandem));
    let report_path = out_file(cfg, "evaluation.txt")?;
    report::write(&report_path, &text)?;

    let safe = audit.is_safe(&tandem.plant);
    Ok(CommandOutput {
        files: vec![report_path, learner_csv, safe_csv],
        summary: format!(
            "cart RMS {:.4} cm vs SAFE {:.4} cm ({dp:+.1}%), angle RMS {:.4} deg vs SAFE {:.4} deg ({da:+.1}%), switched: {}",
            rep.learner_rms.0 * 100.0,
            rep.baseline_rms.0 * 100.0,
            rep.learner_rms.1.to_degrees(),
            rep.baseline_rms.1.to_degrees(),
            rep.learner.switched()
        ),
        safe,
    })
}

/// One optimization per (pair, seed), RMS averaged over seeds.
pub fn sweep_weights(cfg: &ExperimentConfig, log: &mut dyn FnMut(&str)) -> Result<(Vec<SweepRow>, SafetyAudit, bool)> {
    let tandem = prepare(cfg)?;
    let baseline = tandem.run_episode_for(&tandem.safe, 0, cfg.rms_window)?;
    let (safe_p, safe_a) = compute_rms(&baseline.trace)?;
    let mut audit = baseline.audit;
    let mut rows = Vec::with_capacity(cfg.sweep_pairs.len());
    for &(pw_cm, aw_deg) in &cfg.sweep_pairs {
        let mut sub = cfg.clone();
        sub.weights.pw = pw_cm / 100.0;
        sub.weights.aw = aw_deg.to_radians();
        let (mut sum_p, mut sum_a) = (0.0, 0.0);
        for j in 0..cfg.sweep_seeds {
            sub.ga.seed = cfg.ga.seed.wrapping_add(j as u64);
            log(&format!("Pw {pw_cm} cm, Aw {aw_deg} deg, GA seed {}", sub.ga.seed));
            let (t, result) = optimize(&sub, &mut |_| {})?;
            audit.merge(&result.audit);
            let rep = evaluate_genome(&t, &result.best.genome, cfg.rms_window)?;
            audit.merge(&rep.learner.audit);
            sum_p += rep.learner_rms.0;
            sum_a += rep.learner_rms.1;
        }
        let n = cfg.sweep_seeds as f64;
        let (p, a) = (sum_p / n, sum_a / n);
        rows.push(SweepRow {
            pw_cm,
            aw_deg,
            cart_rms_cm: p * 100.0,
            angle_rms_deg: a.to_degrees(),
            reduction_p_pct: report::reduction_pct(safe_p, p),
            reduction_a_pct: report::reduction_pct(safe_a, a),
        });
    }
    let safe = audit.is_safe(&tandem.plant);
    Ok((rows, audit, safe))
}

pub fn cmd_sweep_weights(cfg: &ExperimentConfig, log: &mut dyn FnMut(&str)) -> Result<CommandOutput> {
    let (rows, audit, safe) = sweep_weights(cfg, log)?;
    let last = cfg.ga.seed.wrapping_add(cfg.sweep_seeds as u64 - 1);
    let header = cfg.header(&[
        format!(
            "seed policy: every pair runs GA seeds {}..={last} with sensor seed {}; RMS averaged over seeds",
            cfg.ga.seed, cfg.sim.seed
        ),
        format!(
            "evaluation: {} s from the SAFE reset, episode 0, reductions vs SAFE on the same run",
            cfg.rms_window
        ),
        format!(
            "audit: max|p| {} m, max|theta| {} rad, contacts {}",
            sig9(audit.max_abs_p),
            sig9(audit.max_abs_theta),
            audit.contacts
        ),
    ]);
    let path = out_file(cfg, "sweep.csv")?;
    report::write(&path, &report::sweep_csv(&rows, &header))?;
    let summary = rows
        .iter()
        .map(|r| {
            format!(
                "Pw {} cm / Aw {} deg: cart {:.4} cm, angle {:.4} deg",
                r.pw_cm, r.aw_deg, r.cart_rms_cm, r.angle_rms_deg
            )
        })
        .collect::<Vec<_>>()
        .join("\n");
    Ok(CommandOutput {
        files: vec![path],
        summary,
        safe,
    })
}
