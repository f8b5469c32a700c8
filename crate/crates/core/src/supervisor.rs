//! The switching block.
//!
//! Every specimen evaluation starts from a fresh plant at the configured
//! start state, lets SAFE bring it near `s0` within the reset budget, then
//! hands control to the LEARNING controller. The supervisor samples the
//! state every ΔT; the first sample found outside the hypercube records the
//! switch time `M` and is the last one acted on by LEARNING. SAFE holds the
//! plant for the rest of the episode.

use crate::error::{Error, Result};
use crate::ga::{Evaluation, Evaluator};
use crate::neuro::{decode_genome, forward, output_to_voltage, Genome, MlpParams};
use crate::plant::{Plant, PlantParams, SafetyAudit, Sensor, SensorParams, SimConfig, State};
use crate::safe::{safe_action, SafeGain};

/// Half-widths of the LEARNING operating region around `s0`.
#[derive(Clone, Debug, PartialEq)]
pub struct HypercubeLimits {
    pub dp: f64,
    pub dv: f64,
    pub dtheta: f64,
    pub domega: f64,
}

impl Default for HypercubeLimits {
    /// ±10 cm, ±20 cm/s, ±5.7°, ±115°/s.
    fn default() -> Self {
        Self {
            dp: 0.10,
            dv: 0.20,
            dtheta: 5.7f64.to_radians(),
            domega: 115f64.to_radians(),
        }
    }
}

impl HypercubeLimits {
    pub fn as_state(&self) -> State {
        State::new(self.dp, self.dv, self.dtheta, self.domega)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dp: self.dp * factor,
            dv: self.dv * factor,
            dtheta: self.dtheta * factor,
            domega: self.domega * factor,
        }
    }

    /// The 16 corners around `s0`.
    pub fn vertices(&self, s0: &State) -> Vec<State> {
        let half = self.as_state().to_array();
        let center = s0.to_array();
        (0..16u32)
            .map(|mask| {
                State::from_array(std::array::from_fn(|i| {
                    let sign = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
                    center[i] + sign * half[i]
                }))
            })
            .collect()
    }

    pub fn validate(&self, s0: &State, plant: &PlantParams) -> Result<()> {
        let half = self.as_state().to_array();
        if half.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return Err(Error::InvalidParams(format!(
                "hypercube half-widths must be positive, got {half:?}"
            )));
        }
        if s0.p.abs() + self.dp >= plant.rail_half {
            return Err(Error::InvalidParams("hypercube reaches the rail end stop".into()));
        }
        if s0.theta.abs() + self.dtheta >= plant.theta_max {
            return Err(Error::InvalidParams("hypercube reaches the rod angle stop".into()));
        }
        Ok(())
    }
}

/// Inclusive box test on all four components.
pub fn in_limits(state: &State, s0: &State, limits: &HypercubeLimits) -> bool {
    let d = (*state - *s0).to_array();
    let h = limits.as_state().to_array();
    d.iter().zip(h).all(|(d, h)| d.abs() <= h)
}

/// Normalizers of the fitness integrand.
#[derive(Clone, Debug, PartialEq)]
pub struct FitnessWeights {
    /// Position weight (m).
    pub pw: f64,
    /// Angle weight (rad).
    pub aw: f64,
    /// Largest possible cart displacement (m).
    pub pm: f64,
    /// Largest possible rod angle (rad).
    pub am: f64,
}

impl Default for FitnessWeights {
    /// 0.5 cm and 0.5°, worst case at the plant hard stops.
    fn default() -> Self {
        Self {
            pw: 0.005,
            aw: 0.5f64.to_radians(),
            pm: 0.5,
            am: 0.5,
        }
    }
}

impl FitnessWeights {
    pub fn validate(&self, limits: &HypercubeLimits) -> Result<()> {
        for (name, v) in [("pw", self.pw), ("aw", self.aw), ("pm", self.pm), ("am", self.am)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "weights.{name} must be positive, got {v}"
                )));
            }
        }
        if self.pm < limits.dp || self.am < limits.dtheta {
            return Err(Error::InvalidParams(
                "worst-case displacement/angle must cover the hypercube".into(),
            ));
        }
        Ok(())
    }

    /// `(P/Pw)² + (A/Aw)²`
    pub fn integrand(&self, p: f64, a: f64) -> f64 {
        (p / self.pw).powi(2) + (a / self.aw).powi(2)
    }

    /// Integrand at the worst-case state, `(P_M/Pw)² + (A_M/Aw)²`.
    pub fn worst_case_rate(&self) -> f64 {
        self.integrand(self.pm, self.am)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ActiveController {
    Safe,
    Learning,
}

impl ActiveController {
    pub fn label(self) -> &'static str {
        match self {
            ActiveController::Safe => "SAFE",
            ActiveController::Learning => "LEARNING",
        }
    }
}

/// Which state the supervisor and LEARNING controller act on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum StateView {
    /// Sensor model applied, velocities by finite differences.
    #[default]
    Measured,
    /// True simulator state.
    Ideal,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub measured: State,
    pub truth: State,
}

impl Observation {
    pub fn view(&self, view: StateView) -> State {
        match view {
            StateView::Measured => self.measured,
            StateView::Ideal => self.truth,
        }
    }
}

pub trait Controller {
    fn voltage(&self, obs: &Observation) -> f64;
}

/// LQR recovery law acting on the true state.
#[derive(Clone, Debug)]
pub struct SafeController {
    pub gain: SafeGain,
    pub target: State,
    pub plant: PlantParams,
}

impl Controller for SafeController {
    fn voltage(&self, obs: &Observation) -> f64 {
        safe_action(&self.gain, &obs.truth, &self.target, &self.plant)
    }
}

#[derive(Clone, Debug)]
pub struct NeuralController {
    pub params: MlpParams,
    pub view: StateView,
}

impl Controller for NeuralController {
    fn voltage(&self, obs: &Observation) -> f64 {
        output_to_voltage(forward(&self.params, &obs.view(self.view)))
    }
}

impl<C: Controller + ?Sized> Controller for &C {
    fn voltage(&self, obs: &Observation) -> f64 {
        (**self).voltage(obs)
    }
}

/// One supervisor sample. The voltage is the command held over the following ΔT.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub t: f64,
    /// State as seen by the supervisor.
    pub state: State,
    pub truth: State,
    pub voltage: f64,
    pub controller: ActiveController,
    pub in_limits: bool,
}

impl Sample {
    /// A bare (t, P, A) sample for working with the fitness functions directly.
    pub fn synthetic(t: f64, p: f64, theta: f64) -> Self {
        let state = State::new(p, 0.0, theta, 0.0);
        Self {
            t,
            state,
            truth: state,
            voltage: 0.0,
            controller: ActiveController::Learning,
            in_limits: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EpisodeResult {
    pub trace: Vec<Sample>,
    /// Switch time `M`, if LEARNING left the hypercube.
    pub switch_time: Option<f64>,
    pub fitness: f64,
    /// Episode length `T`.
    pub horizon: f64,
    /// Time SAFE needed to reach the reset tolerance.
    pub reset_time: f64,
    pub audit: SafetyAudit,
    /// Simulated seconds, reset included.
    pub sim_time: f64,
}

impl EpisodeResult {
    pub fn switched(&self) -> bool {
        self.switch_time.is_some()
    }
}

/// Budget and success box of the SAFE reset.
#[derive(Clone, Debug, PartialEq)]
pub struct ResetSpec {
    pub budget: f64,
    /// Per-component tolerance around `s0`.
    pub tolerance: State,
}

impl Default for ResetSpec {
    fn default() -> Self {
        Self {
            budget: 5.0,
            tolerance: State::new(0.01, 0.02, 0.01, 0.02),
        }
    }
}

impl ResetSpec {
    pub fn is_settled(&self, state: &State, s0: &State) -> bool {
        let d = (*state - *s0).to_array();
        let tol = self.tolerance.to_array();
        d.iter().zip(tol).all(|(d, t)| d.abs() < t)
    }
}

/// Runs SAFE until the true state settles near `s0`. Returns the time taken.
/// The plant is left where it settled.
pub fn reset_phase(
    plant: &mut Plant,
    sensor: &mut Sensor,
    safe: &SafeController,
    s0: &State,
    reset: &ResetSpec,
) -> Result<f64> {
    let dt = plant.sim_config().dt_sample;
    let steps = (reset.budget / dt).round() as usize;
    for k in 0..=steps {
        let truth = plant.state();
        let measured = sensor.read(&truth);
        if reset.is_settled(&truth, s0) {
            return Ok(k as f64 * dt);
        }
        if k == steps {
            break;
        }
        let obs = Observation { measured, truth };
        plant.advance(safe.voltage(&obs))?;
    }
    Err(Error::ResetFailed {
        state: plant.state().to_array(),
        budget: reset.budget,
    })
}

fn check_trace(trace: &[Sample]) -> Result<()> {
    let first = trace
        .first()
        .ok_or_else(|| Error::MalformedTrace("empty trace".into()))?;
    if first.t.abs() > 1e-12 {
        return Err(Error::MalformedTrace(format!(
            "trace starts at t = {}, expected 0",
            first.t
        )));
    }
    if trace.windows(2).any(|w| !(w[1].t > w[0].t)) {
        return Err(Error::MalformedTrace("sample times not increasing".into()));
    }
    Ok(())
}

/// Trapezoid integral of the weighted squared error over the samples.
fn weighted_error_integral(trace: &[Sample], weights: &FitnessWeights) -> f64 {
    trace
        .windows(2)
        .map(|w| {
            let f0 = weights.integrand(w[0].state.p, w[0].state.theta);
            let f1 = weights.integrand(w[1].state.p, w[1].state.theta);
            0.5 * (f0 + f1) * (w[1].t - w[0].t)
        })
        .sum()
}

/// Fitness of an episode without a switch: `∫₀ᵀ (P/Pw)² + (A/Aw)² dt`.
pub fn fitness_success(trace: &[Sample], weights: &FitnessWeights, horizon: f64) -> Result<f64> {
    check_trace(trace)?;
    let last = trace.last().unwrap().t;
    if (last - horizon).abs() > 1e-9 * horizon.max(1.0) {
        return Err(Error::MalformedTrace(format!(
            "trace ends at {last}, expected T = {horizon}"
        )));
    }
    Ok(weighted_error_integral(trace, weights))
}

/// Fitness after a switch at `M`: the integral up to `M` plus
/// `(0.1·T + T − M)·[(P_M/Pw)² + (A_M/Aw)²]`. Samples after `M` are ignored.
pub fn fitness_failure(trace: &[Sample], switch_time: f64, weights: &FitnessWeights, horizon: f64) -> Result<f64> {
    if switch_time > horizon + 1e-9 * horizon.max(1.0) {
        return Err(Error::SwitchAfterHorizon { switch_time, horizon });
    }
    check_trace(trace)?;
    let cutoff = switch_time + 1e-9 * horizon.max(1.0);
    let span = trace.partition_point(|s| s.t <= cutoff);
    let integral = weighted_error_integral(&trace[..span.max(1)], weights);
    Ok(integral + (0.1 * horizon + horizon - switch_time) * weights.worst_case_rate())
}

/// RMS of cart position and rod angle over the samples.
pub fn compute_rms(trace: &[Sample]) -> Result<(f64, f64)> {
    if trace.is_empty() {
        return Err(Error::MalformedTrace("empty trace".into()));
    }
    let n = trace.len() as f64;
    let (sp, sa) = trace.iter().fold((0.0, 0.0), |(sp, sa), s| {
        (sp + s.state.p * s.state.p, sa + s.state.theta * s.state.theta)
    });
    Ok(((sp / n).sqrt(), (sa / n).sqrt()))
}

/// Everything the switching block needs to run episodes.
#[derive(Clone, Debug)]
pub struct Tandem {
    pub plant: PlantParams,
    pub sensors: SensorParams,
    pub sim: SimConfig,
    pub safe: SafeController,
    /// Initial state `S₀`: hypercube center and reset target.
    pub s0: State,
    /// Plant state before the reset phase of every episode.
    pub start: State,
    pub limits: HypercubeLimits,
    pub weights: FitnessWeights,
    /// Episode length `T` (s).
    pub horizon: f64,
    pub reset: ResetSpec,
    pub view: StateView,
}

impl Tandem {
    pub fn new(plant: PlantParams, gain: SafeGain) -> Self {
        let s0 = State::ORIGIN;
        Self {
            safe: SafeController {
                gain,
                target: s0,
                plant: plant.clone(),
            },
            plant,
            sensors: SensorParams::default(),
            sim: SimConfig::default(),
            s0,
            start: default_start(),
            limits: HypercubeLimits::default(),
            weights: FitnessWeights::default(),
            horizon: 10.0,
            reset: ResetSpec::default(),
            view: StateView::Measured,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.plant.validate()?;
        self.sensors.validate()?;
        self.sim.validate()?;
        self.limits.validate(&self.s0, &self.plant)?;
        self.weights.validate(&self.limits)?;
        if !(self.horizon > 0.0) {
            return Err(Error::InvalidParams(format!(
                "episode length must be positive, got {}",
                self.horizon
            )));
        }
        let n = self.horizon / self.sim.dt_sample;
        if (n - n.round()).abs() > 1e-9 * n {
            return Err(Error::InvalidParams(
                "episode length must be a whole number of sampling intervals".into(),
            ));
        }
        if !self.start.is_finite()
            || self.start.p.abs() >= self.plant.rail_half
            || self.start.theta.abs() >= self.plant.theta_max
        {
            return Err(Error::InvalidParams(
                "start state must lie inside the hard stops".into(),
            ));
        }
        Ok(())
    }

    pub fn neural(&self, params: MlpParams) -> NeuralController {
        NeuralController {
            params,
            view: self.view,
        }
    }

    pub fn fresh_plant(&self, episode: u64) -> (Plant, Sensor) {
        let plant = Plant::new(self.plant.clone(), self.sim.clone(), self.start);
        let sensor = Sensor::new(self.sensors.clone(), self.sim.dt_sample, self.sim.seed, episode);
        (plant, sensor)
    }

    /// Reset followed by one LEARNING episode of length `T`.
    pub fn run_episode(&self, learner: &dyn Controller, episode: u64) -> Result<EpisodeResult> {
        self.run_episode_for(learner, episode, self.horizon)
    }

    pub fn run_episode_for(&self, learner: &dyn Controller, episode: u64, horizon: f64) -> Result<EpisodeResult> {
        let (mut plant, mut sensor) = self.fresh_plant(episode);
        let reset_time = reset_phase(&mut plant, &mut sensor, &self.safe, &self.s0, &self.reset)?;
        let mut result = run_learning_episode(&mut plant, &mut sensor, learner, self, horizon)?;
        result.reset_time = reset_time;
        Ok(result)
    }

    /// SAFE recovery from every hypercube vertex.
    pub fn recovery_check(&self) -> Vec<VertexRecovery> {
        self.limits
            .vertices(&self.s0)
            .into_iter()
            .map(|vertex| {
                let mut plant = Plant::new(self.plant.clone(), self.sim.clone(), vertex);
                let mut sensor = Sensor::new(self.sensors.clone(), self.sim.dt_sample, self.sim.seed, 0);
                let outcome = reset_phase(&mut plant, &mut sensor, &self.safe, &self.s0, &self.reset);
                VertexRecovery {
                    vertex,
                    time: outcome.ok(),
                    audit: *plant.audit(),
                    safe: plant.audit().is_safe(&self.plant),
                }
            })
            .collect()
    }
}

/// Plant state each episode starts from before the SAFE reset.
pub fn default_start() -> State {
    State::new(0.05, 0.0, 3f64.to_radians(), 0.0)
}

#[derive(Clone, Debug)]
pub struct VertexRecovery {
    pub vertex: State,
    /// Time to reach the reset tolerance, `None` if the budget ran out.
    pub time: Option<f64>,
    pub audit: SafetyAudit,
    /// Hard stops never touched.
    pub safe: bool,
}

impl VertexRecovery {
    pub fn passed(&self) -> bool {
        self.time.is_some() && self.safe
    }
}

/// Runs LEARNING from the plant's current state for `horizon` seconds,
/// switching to SAFE on the first out-of-limits sample.
pub fn run_learning_episode(
    plant: &mut Plant,
    sensor: &mut Sensor,
    learner: &dyn Controller,
    tandem: &Tandem,
    horizon: f64,
) -> Result<EpisodeResult> {
    let dt = plant.sim_config().dt_sample;
    let n = (horizon / dt).round() as usize;
    let mut trace = Vec::with_capacity(n + 1);
    let mut switch_time = None;
    for k in 0..=n {
        let t = k as f64 * dt;
        let truth = plant.state();
        let measured = sensor.read(&truth);
        let obs = Observation { measured, truth };
        let seen = obs.view(tandem.view);
        let inside = in_limits(&seen, &tandem.s0, &tandem.limits);
        let (controller, voltage) = if switch_time.is_some() {
            (ActiveController::Safe, tandem.safe.voltage(&obs))
        } else {
            if !inside {
                switch_time = Some(t);
            }
            (ActiveController::Learning, learner.voltage(&obs))
        };
        trace.push(Sample {
            t,
            state: seen,
            truth,
            voltage,
            controller,
            in_limits: inside,
        });
        if k < n {
            plant.advance(voltage)?;
        }
    }
    let fitness = match switch_time {
        Some(m) => fitness_failure(&trace, m, &tandem.weights, horizon)?,
        None => fitness_success(&trace, &tandem.weights, horizon)?,
    };
    Ok(EpisodeResult {
        trace,
        switch_time,
        fitness,
        horizon,
        reset_time: 0.0,
        audit: *plant.audit(),
        sim_time: plant.time(),
    })
}

impl Evaluator for Tandem {
    fn evaluate(&self, genome: &Genome, episode: u64) -> Result<Evaluation> {
        let learner = self.neural(decode_genome(genome));
        let result = self.run_episode(&learner, episode)?;
        Ok(Evaluation {
            fitness: result.fitness,
            switched: result.switched(),
            sim_time: result.sim_time,
            audit: result.audit,
        })
    }

    fn deterministic(&self) -> bool {
        !self.sensors.is_noisy()
    }
}
