//! Experiment configuration files.
//!
//! Flat, line-based `section.key = value` text. `#` starts a comment, blank
//! lines are ignored, unknown keys are errors and later lines override
//! earlier ones. Angles are given in degrees (keys ending in `_deg`) and
//! stored in radians.
//!
//! ```text
//! ga.pop_size = 30
//! ga.generations = 40
//! limits.dtheta_deg = 5.7
//! sweep.pairs = 0.5:2.0, 0.5:1.0
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ga::{GaConfig, MutationMode};
use crate::plant::{PlantParams, SensorParams, SimConfig, State};
use crate::supervisor::{default_start, FitnessWeights, HypercubeLimits, ResetSpec, StateView};

/// The five (Pw cm, Aw deg) pairs of the weight sweep table.
pub const STANDARD_WEIGHT_PAIRS: [(f64, f64); 5] = [(0.5, 2.0), (0.5, 1.0), (0.5, 0.5), (1.0, 0.5), (2.0, 0.5)];

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub plant: PlantParams,
    pub sensors: SensorParams,
    pub sim: SimConfig,
    pub ga: GaConfig,
    pub limits: HypercubeLimits,
    pub weights: FitnessWeights,
    /// LQR state cost diagonal.
    pub q: [f64; 4],
    pub r: f64,
    /// Pinned SAFE gain; designed from `q`, `r` when absent.
    pub gain_file: Option<PathBuf>,
    pub s0: State,
    pub start: State,
    /// Training episode length `T` (s).
    pub horizon: f64,
    /// Length of the evaluation run (s).
    pub rms_window: f64,
    pub reset: ResetSpec,
    pub view: StateView,
    /// (Pw cm, Aw deg) pairs.
    pub sweep_pairs: Vec<(f64, f64)>,
    /// Optimizations per pair, seeds `ga.seed`, `ga.seed + 1`, ...
    pub sweep_seeds: usize,
    pub genome: Option<PathBuf>,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            plant: PlantParams::default(),
            sensors: SensorParams::default(),
            sim: SimConfig::default(),
            ga: GaConfig::default(),
            limits: HypercubeLimits::default(),
            weights: FitnessWeights::default(),
            q: [100.0, 1.0, 100.0, 1.0],
            r: 1.0,
            gain_file: None,
            s0: State::ORIGIN,
            start: default_start(),
            horizon: 10.0,
            rms_window: 30.0,
            reset: ResetSpec::default(),
            view: StateView::Measured,
            sweep_pairs: STANDARD_WEIGHT_PAIRS.to_vec(),
            sweep_seeds: 1,
            genome: None,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn parse_f64(value: &str) -> std::result::Result<f64, String> {
    let x: f64 = value.parse().map_err(|_| format!("expected a number, got `{value}`"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("expected a finite number, got `{value}`"))
    }
}

fn parse_deg(value: &str) -> std::result::Result<f64, String> {
    parse_f64(value).map(f64::to_radians)
}

fn parse_usize(value: &str) -> std::result::Result<usize, String> {
    value
        .parse()
        .map_err(|_| format!("expected a non-negative integer, got `{value}`"))
}

fn parse_u64(value: &str) -> std::result::Result<u64, String> {
    value
        .parse()
        .map_err(|_| format!("expected a 64-bit unsigned integer, got `{value}`"))
}

fn parse_bool(value: &str) -> std::result::Result<bool, String> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got `{value}`")),
    }
}

fn parse_list(value: &str) -> std::result::Result<Vec<f64>, String> {
    value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(parse_f64)
        .collect()
}

fn parse_pairs(value: &str) -> std::result::Result<Vec<(f64, f64)>, String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|pair| {
            let (a, b) = pair
                .split_once(':')
                .ok_or_else(|| format!("expected `Pw_cm:Aw_deg`, got `{pair}`"))?;
            Ok((parse_f64(a.trim())?, parse_f64(b.trim())?))
        })
        .collect()
}

fn deg(x: f64) -> String {
    x.to_degrees().to_string()
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        // relative paths inside the file are relative to the file
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.gain_file, &mut cfg.genome].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if cfg.out_dir.is_relative() && text.lines().any(|l| l.trim_start().starts_with("output.dir")) {
            cfg.out_dir = base.join(&cfg.out_dir);
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Config { line: i + 1, msg };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            cfg.set(key.trim(), value.trim()).map_err(err)?;
        }
        Ok(cfg)
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let f = parse_f64;
        match key {
            "plant.cart_mass" => self.plant.cart_mass = f(value)?,
            "plant.rod_mass" => self.plant.rod_mass = f(value)?,
            "plant.rod_length" => self.plant.rod_length = f(value)?,
            "plant.gravity" => self.plant.gravity = f(value)?,
            "plant.cv" => self.plant.cv = f(value)?,
            "plant.cf" => self.plant.cf = f(value)?,
            "plant.v_neutral" => self.plant.v_neutral = f(value)?,
            "plant.v_deadzone" => self.plant.v_deadzone = f(value)?,
            "plant.v_min" => self.plant.v_min = f(value)?,
            "plant.v_max" => self.plant.v_max = f(value)?,
            "plant.f_max" => self.plant.f_max = f(value)?,
            "plant.rail_half" => self.plant.rail_half = f(value)?,
            "plant.theta_max_deg" => self.plant.theta_max = parse_deg(value)?,

            "sensors.offset_p" => self.sensors.offset_p = f(value)?,
            "sensors.offset_theta_deg" => self.sensors.offset_theta = parse_deg(value)?,
            "sensors.quant_p" => self.sensors.quant_p = f(value)?,
            "sensors.quant_theta_deg" => self.sensors.quant_theta = parse_deg(value)?,
            "sensors.noise_std_p" => self.sensors.noise_std_p = f(value)?,
            "sensors.noise_std_theta_deg" => self.sensors.noise_std_theta = parse_deg(value)?,

            "sim.dt_sample" => self.sim.dt_sample = f(value)?,
            "sim.dt_internal" => self.sim.dt_internal = f(value)?,
            "sim.seed" => self.sim.seed = parse_u64(value)?,

            "ga.pop_size" => self.ga.pop_size = parse_usize(value)?,
            "ga.generations" => self.ga.generations = parse_usize(value)?,
            "ga.selection_generations" => self.ga.selection_generations = parse_usize(value)?,
            "ga.elite_frac" => self.ga.elite_frac = f(value)?,
            "ga.reinit_frac" => self.ga.reinit_frac = f(value)?,
            "ga.p_crossover" => self.ga.p_crossover = f(value)?,
            "ga.p_mutation" => self.ga.p_mutation = f(value)?,
            "ga.mutation_mode" => {
                self.ga.mutation_mode = match value {
                    "per_specimen" => MutationMode::PerSpecimen,
                    "per_bit" => MutationMode::PerBit,
                    _ => return Err(format!("expected per_specimen or per_bit, got `{value}`")),
                }
            }
            "ga.tournament_size" => self.ga.tournament_size = parse_usize(value)?,
            "ga.seed" => self.ga.seed = parse_u64(value)?,
            "ga.parallel" => self.ga.parallel = parse_bool(value)?,

            "limits.dp" => self.limits.dp = f(value)?,
            "limits.dv" => self.limits.dv = f(value)?,
            "limits.dtheta_deg" => self.limits.dtheta = parse_deg(value)?,
            "limits.domega_deg" => self.limits.domega = parse_deg(value)?,

            "weights.pw" => self.weights.pw = f(value)?,
            "weights.aw_deg" => self.weights.aw = parse_deg(value)?,
            "weights.pm" => self.weights.pm = f(value)?,
            "weights.am_deg" => self.weights.am = parse_deg(value)?,

            "safe.q" => {
                let q = parse_list(value)?;
                self.q = q
                    .try_into()
                    .map_err(|q: Vec<f64>| format!("safe.q needs 4 values, got {}", q.len()))?;
            }
            "safe.r" => self.r = f(value)?,
            "safe.gain_file" => self.gain_file = (!value.is_empty()).then(|| PathBuf::from(value)),

            "episode.horizon" => self.horizon = f(value)?,
            "episode.rms_window" => self.rms_window = f(value)?,
            "episode.reset_budget" => self.reset.budget = f(value)?,
            "episode.view" => {
                self.view = match value {
                    "measured" => StateView::Measured,
                    "ideal" => StateView::Ideal,
                    _ => return Err(format!("expected measured or ideal, got `{value}`")),
                }
            }
            "episode.s0_p" => self.s0.p = f(value)?,
            "episode.s0_theta_deg" => self.s0.theta = parse_deg(value)?,
            "episode.start_p" => self.start.p = f(value)?,
            "episode.start_v" => self.start.v = f(value)?,
            "episode.start_theta_deg" => self.start.theta = parse_deg(value)?,
            "episode.start_omega_deg" => self.start.omega = parse_deg(value)?,

            "sweep.pairs" => self.sweep_pairs = parse_pairs(value)?,
            "sweep.seeds" => self.sweep_seeds = parse_usize(value)?,

            "evaluate.genome" => self.genome = (!value.is_empty()).then(|| PathBuf::from(value)),
            "output.dir" => self.out_dir = PathBuf::from(value),
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Every effective setting as `(key, value)`, sorted by key. The output
    /// directory is left out so moving a run does not change its digest.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let s = |x: f64| x.to_string();
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let mut e = vec![
            ("plant.cart_mass", s(self.plant.cart_mass)),
            ("plant.rod_mass", s(self.plant.rod_mass)),
            ("plant.rod_length", s(self.plant.rod_length)),
            ("plant.gravity", s(self.plant.gravity)),
            ("plant.cv", s(self.plant.cv)),
            ("plant.cf", s(self.plant.cf)),
            ("plant.v_neutral", s(self.plant.v_neutral)),
            ("plant.v_deadzone", s(self.plant.v_deadzone)),
            ("plant.v_min", s(self.plant.v_min)),
            ("plant.v_max", s(self.plant.v_max)),
            ("plant.f_max", s(self.plant.f_max)),
            ("plant.rail_half", s(self.plant.rail_half)),
            ("plant.theta_max_deg", deg(self.plant.theta_max)),
            ("sensors.offset_p", s(self.sensors.offset_p)),
            ("sensors.offset_theta_deg", deg(self.sensors.offset_theta)),
            ("sensors.quant_p", s(self.sensors.quant_p)),
            ("sensors.quant_theta_deg", deg(self.sensors.quant_theta)),
            ("sensors.noise_std_p", s(self.sensors.noise_std_p)),
            ("sensors.noise_std_theta_deg", deg(self.sensors.noise_std_theta)),
            ("sim.dt_sample", s(self.sim.dt_sample)),
            ("sim.dt_internal", s(self.sim.dt_internal)),
            ("sim.seed", self.sim.seed.to_string()),
            ("ga.pop_size", self.ga.pop_size.to_string()),
            ("ga.generations", self.ga.generations.to_string()),
            ("ga.selection_generations", self.ga.selection_generations.to_string()),
            ("ga.elite_frac", s(self.ga.elite_frac)),
            ("ga.reinit_frac", s(self.ga.reinit_frac)),
            ("ga.p_crossover", s(self.ga.p_crossover)),
            ("ga.p_mutation", s(self.ga.p_mutation)),
            (
                "ga.mutation_mode",
                match self.ga.mutation_mode {
                    MutationMode::PerSpecimen => "per_specimen",
                    MutationMode::PerBit => "per_bit",
                }
                .into(),
            ),
            ("ga.tournament_size", self.ga.tournament_size.to_string()),
            ("ga.seed", self.ga.seed.to_string()),
            ("ga.parallel", self.ga.parallel.to_string()),
            ("limits.dp", s(self.limits.dp)),
            ("limits.dv", s(self.limits.dv)),
            ("limits.dtheta_deg", deg(self.limits.dtheta)),
            ("limits.domega_deg", deg(self.limits.domega)),
            ("weights.pw", s(self.weights.pw)),
            ("weights.aw_deg", deg(self.weights.aw)),
            ("weights.pm", s(self.weights.pm)),
            ("weights.am_deg", deg(self.weights.am)),
            ("safe.q", self.q.map(s).join(", ")),
            ("safe.r", s(self.r)),
            ("safe.gain_file", path(&self.gain_file)),
            ("episode.horizon", s(self.horizon)),
            ("episode.rms_window", s(self.rms_window)),
            ("episode.reset_budget", s(self.reset.budget)),
            (
                "episode.view",
                match self.view {
                    StateView::Measured => "measured",
                    StateView::Ideal => "ideal",
                }
                .into(),
            ),
            ("episode.s0_p", s(self.s0.p)),
            ("episode.s0_theta_deg", deg(self.s0.theta)),
            ("episode.start_p", s(self.start.p)),
            ("episode.start_v", s(self.start.v)),
            ("episode.start_theta_deg", deg(self.start.theta)),
            ("episode.start_omega_deg", deg(self.start.omega)),
            (
                "sweep.pairs",
                self.sweep_pairs
                    .iter()
                    .map(|(p, a)| format!("{p}:{a}"))
                    .collect::<Vec<_>>()
                    .join(", "),
            ),
            ("sweep.seeds", self.sweep_seeds.to_string()),
            ("evaluate.genome", path(&self.genome)),
        ];
        e.sort_by_key(|(k, _)| *k);
        e
    }

    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            writeln!(out, "{k} = {v}").unwrap();
        }
        out
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    /// `# config-digest: ...` plus extra header lines, ready for an output file.
    pub fn header(&self, extra: &[String]) -> Vec<String> {
        let mut lines = vec![format!("config-digest: {}", self.digest())];
        lines.extend(extra.iter().cloned());
        lines
    }

    /// `--seed` override: drives both the GA and the sensor noise.
    pub fn set_seed(&mut self, seed: u64) {
        self.ga.seed = seed;
        self.sim.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        self.plant.validate()?;
        self.sensors.validate()?;
        self.sim.validate()?;
        self.ga.validate()?;
        self.limits.validate(&self.s0, &self.plant)?;
        self.weights.validate(&self.limits)?;
        if !(self.r > 0.0) || self.q.iter().any(|q| !(*q >= 0.0)) {
            return Err(Error::InvalidParams(
                "safe.q must be non-negative and safe.r positive".into(),
            ));
        }
        if !(self.rms_window > 0.0) {
            return Err(Error::InvalidParams("episode.rms_window must be positive".into()));
        }
        if !(self.reset.budget > 0.0) {
            return Err(Error::InvalidParams("episode.reset_budget must be positive".into()));
        }
        if self.sweep_pairs.iter().any(|(p, a)| !(*p > 0.0 && *a > 0.0)) {
            return Err(Error::InvalidParams("sweep weights must be positive".into()));
        }
        if self.sweep_seeds == 0 {
            return Err(Error::InvalidParams("sweep.seeds must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(
            ExperimentConfig::parse("# nothing\n\n").unwrap(),
            ExperimentConfig::default()
        );
    }

    #[test]
    fn values_and_units() {
        let cfg = ExperimentConfig::parse(
            "ga.pop_size = 30  # desk scale\n\
             limits.dtheta_deg = 90\n\
             safe.q = 1, 2, 3, 4\n\
             episode.view = ideal\n\
             sweep.pairs = 0.5:2, 1:0.5\n\
             ga.mutation_mode = per_bit\n",
        )
        .unwrap();
        assert_eq!(cfg.ga.pop_size, 30);
        assert_eq!(cfg.limits.dtheta, std::f64::consts::FRAC_PI_2);
        assert_eq!(cfg.q, [1.0, 2.0, 3.0, 4.0]);
        assert_eq!(cfg.view, StateView::Ideal);
        assert_eq!(cfg.sweep_pairs, vec![(0.5, 2.0), (1.0, 0.5)]);
        assert_eq!(cfg.ga.mutation_mode, MutationMode::PerBit);
    }

    #[test]
    fn errors_name_the_line() {
        for (text, line) in [
            ("ga.pop_size = 30\nga.bogus = 1\n", 2),
            ("\n\nplant.cv = fast\n", 3),
            ("no equals sign\n", 1),
            ("safe.q = 1, 2\n", 1),
            ("plant.cv = inf\n", 1),
        ] {
            match ExperimentConfig::parse(text) {
                Err(Error::Config { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn canonical_roundtrips() {
        let mut cfg = ExperimentConfig::default();
        cfg.ga.parallel = true;
        cfg.sweep_pairs = vec![(0.25, 3.0)];
        cfg.gain_file = Some("gain.txt".into());
        let again = ExperimentConfig::parse(&cfg.canonical()).unwrap();
        assert_eq!(again.canonical(), cfg.canonical());
        assert_eq!(again.digest(), cfg.digest());
    }

    #[test]
    fn every_entry_is_a_settable_key() {
        let mut cfg = ExperimentConfig::default();
        for (k, v) in ExperimentConfig::default().entries() {
            cfg.set(k, &v).unwrap_or_else(|e| panic!("{k}: {e}"));
        }
    }

    #[test]
    fn digest_tracks_settings_not_output_dir() {
        let base = ExperimentConfig::default();
        let mut moved = base.clone();
        moved.out_dir = "elsewhere".into();
        assert_eq!(base.digest(), moved.digest());
        let mut reseeded = base.clone();
        reseeded.set_seed(9);
        assert_ne!(base.digest(), reseeded.digest());
        assert_eq!(base.digest().len(), 64);
    }

    #[test]
    fn defaults_validate() {
        ExperimentConfig::default().validate().unwrap();
        let cfg = ExperimentConfig::parse("ga.pop_size = 2\n").unwrap();
        assert!(cfg.validate().is_err());
    }
}
