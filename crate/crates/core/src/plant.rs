//! Nonlinear inverted pendulum on a cart.
//!
//! The cart is driven by a DC motor with a dead zone and saturation around a
//! neutral command voltage. The rod is a uniform bar pivoted on the cart:
//!
//! ```text
//! (M + m)·p̈ + (m·l/2)·(θ̈·cosθ − θ̇²·sinθ) = F − Cf·ṗ
//! (m·l/2)·p̈·cosθ + (m·l²/3)·θ̈ − (m·g·l/2)·sinθ = 0
//! ```
//!
//! Integration is fixed-step RK4 with the command held constant over one
//! sampling interval. Position and angle hit hard stops at the rail ends and
//! at the angle limit.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Cart/rod state. Also used for its time derivative.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct State {
    /// Cart position from the rail center (m).
    pub p: f64,
    /// Cart velocity (m/s).
    pub v: f64,
    /// Rod angle from vertical (rad).
    pub theta: f64,
    /// Rod angular velocity (rad/s).
    pub omega: f64,
}

impl State {
    pub const ORIGIN: State = State::new(0.0, 0.0, 0.0, 0.0);

    pub const fn new(p: f64, v: f64, theta: f64, omega: f64) -> Self {
        Self { p, v, theta, omega }
    }

    pub const fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub const fn to_array(self) -> [f64; 4] {
        [self.p, self.v, self.theta, self.omega]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }

    /// `self + h·d`
    fn axpy(self, h: f64, d: State) -> State {
        State::new(
            self.p + h * d.p,
            self.v + h * d.v,
            self.theta + h * d.theta,
            self.omega + h * d.omega,
        )
    }
}

impl std::ops::Add for State {
    type Output = State;
    fn add(self, o: State) -> State {
        self.axpy(1.0, o)
    }
}

impl std::ops::Sub for State {
    type Output = State;
    fn sub(self, o: State) -> State {
        self.axpy(-1.0, o)
    }
}

impl std::ops::Neg for State {
    type Output = State;
    fn neg(self) -> State {
        State::new(-self.p, -self.v, -self.theta, -self.omega)
    }
}

impl std::ops::Mul<State> for f64 {
    type Output = State;
    fn mul(self, s: State) -> State {
        State::ORIGIN.axpy(self, s)
    }
}

/// Physical constants of the cart, rod and motor drive.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantParams {
    /// Cart mass (kg).
    pub cart_mass: f64,
    /// Rod mass (kg).
    pub rod_mass: f64,
    /// Rod length (m).
    pub rod_length: f64,
    pub gravity: f64,
    /// Motor force constant (N/V).
    pub cv: f64,
    /// Combined dynamic + static friction coefficient (N·s/m).
    pub cf: f64,
    pub v_neutral: f64,
    /// Dead-zone half-width around `v_neutral` (V).
    pub v_deadzone: f64,
    pub v_min: f64,
    pub v_max: f64,
    /// Force saturation (N).
    pub f_max: f64,
    /// Rail half-length (m).
    pub rail_half: f64,
    /// Rod angle hard stop (rad).
    pub theta_max: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            cart_mass: 1.0,
            rod_mass: 0.1,
            rod_length: 0.25,
            gravity: 9.81,
            cv: 4.0,
            cf: 5.0,
            v_neutral: 2.5,
            v_deadzone: 0.1,
            v_min: 0.0,
            v_max: 5.0,
            f_max: 10.0,
            rail_half: 0.5,
            theta_max: 0.5,
        }
    }
}

impl PlantParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("cart_mass", self.cart_mass),
            ("rod_mass", self.rod_mass),
            ("rod_length", self.rod_length),
            ("gravity", self.gravity),
            ("cv", self.cv),
            ("f_max", self.f_max),
            ("rail_half", self.rail_half),
            ("theta_max", self.theta_max),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "plant.{name} must be positive and finite, got {value}"
                )));
            }
        }
        if !(self.cf >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "plant.cf must be non-negative, got {}",
                self.cf
            )));
        }
        if !(self.v_min < self.v_neutral && self.v_neutral < self.v_max) {
            return Err(Error::InvalidParams(format!(
                "voltages must satisfy v_min < v_neutral < v_max, got {} / {} / {}",
                self.v_min, self.v_neutral, self.v_max
            )));
        }
        if !(self.v_deadzone >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "plant.v_deadzone must be non-negative, got {}",
                self.v_deadzone
            )));
        }
        Ok(())
    }

    pub fn clamp_voltage(&self, voltage: f64) -> f64 {
        voltage.clamp(self.v_min, self.v_max)
    }
}

/// Sensor imperfections applied to position and angle readings.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorParams {
    pub offset_p: f64,
    pub offset_theta: f64,
    /// Position quantization step (m). Zero disables.
    pub quant_p: f64,
    /// Angle quantization step (rad). Zero disables.
    pub quant_theta: f64,
    pub noise_std_p: f64,
    pub noise_std_theta: f64,
}

impl Default for SensorParams {
    /// A 0.1 mm linear encoder and a 4096-count angle encoder with light noise.
    fn default() -> Self {
        Self {
            offset_p: 0.0,
            offset_theta: 0.0,
            quant_p: 1e-4,
            quant_theta: std::f64::consts::TAU / 4096.0,
            noise_std_p: 1e-4,
            noise_std_theta: 5e-4,
        }
    }
}

impl SensorParams {
    /// Perfect sensors: `measure` is the identity on position and angle.
    pub fn ideal() -> Self {
        Self {
            offset_p: 0.0,
            offset_theta: 0.0,
            quant_p: 0.0,
            quant_theta: 0.0,
            noise_std_p: 0.0,
            noise_std_theta: 0.0,
        }
    }

    /// Same quantization and offsets, noise removed.
    pub fn without_noise(&self) -> Self {
        Self {
            noise_std_p: 0.0,
            noise_std_theta: 0.0,
            ..self.clone()
        }
    }

    pub fn is_noisy(&self) -> bool {
        self.noise_std_p > 0.0 || self.noise_std_theta > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let non_negative = [
            ("quant_p", self.quant_p),
            ("quant_theta", self.quant_theta),
            ("noise_std_p", self.noise_std_p),
            ("noise_std_theta", self.noise_std_theta),
        ];
        for (name, value) in non_negative {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "sensors.{name} must be non-negative, got {value}"
                )));
            }
        }
        if !(self.offset_p.is_finite() && self.offset_theta.is_finite()) {
            return Err(Error::InvalidParams("sensor offsets must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    /// Supervisor sampling interval ΔT (s).
    pub dt_sample: f64,
    /// RK4 substep (s).
    pub dt_internal: f64,
    /// Seed for measurement noise.
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt_sample: 0.01,
            dt_internal: 0.001,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_internal > 0.0 && self.dt_internal <= self.dt_sample) {
            return Err(Error::InvalidParams(format!(
                "need 0 < dt_internal <= dt_sample, got {} / {}",
                self.dt_internal, self.dt_sample
            )));
        }
        let ratio = self.dt_sample / self.dt_internal;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio {
            return Err(Error::InvalidParams(format!(
                "dt_sample {} is not an integer multiple of dt_internal {}",
                self.dt_sample, self.dt_internal
            )));
        }
        Ok(())
    }

    /// RK4 substeps per sampling interval.
    pub fn substeps(&self) -> usize {
        (self.dt_sample / self.dt_internal).round() as usize
    }

    /// Number of sampling intervals in `duration` seconds.
    pub fn samples_in(&self, duration: f64) -> usize {
        (duration / self.dt_sample).round() as usize
    }
}

/// Force delivered by the motor for a command voltage.
pub fn motor_force(voltage: f64, params: &PlantParams) -> f64 {
    let u = params.clamp_voltage(voltage) - params.v_neutral;
    if u.abs() < params.v_deadzone {
        return 0.0;
    }
    (params.cv * u).clamp(-params.f_max, params.f_max)
}

/// Time derivative of the state under a constant cart force.
pub fn derivatives(state: &State, force: f64, params: &PlantParams) -> State {
    let (big_m, m, l, g) = (params.cart_mass, params.rod_mass, params.rod_length, params.gravity);
    let (s, c) = state.theta.sin_cos();
    let half_ml = 0.5 * m * l;
    let inertia = m * l * l / 3.0;

    // [M+m, ml/2·c; ml/2·c, ml²/3] · [p̈; θ̈] = [r1; r2]
    let r1 = force - params.cf * state.v + half_ml * state.omega * state.omega * s;
    let r2 = half_ml * g * s;
    let det = (big_m + m) * inertia - half_ml * half_ml * c * c;
    assert!(!(det <= 0.0), "singular mass matrix (det = {det})");

    let p_acc = (inertia * r1 - half_ml * c * r2) / det;
    let theta_acc = ((big_m + m) * r2 - half_ml * c * r1) / det;
    State::new(state.v, p_acc, state.omega, theta_acc)
}

/// Total mechanical energy (kinetic + rod potential), zero potential at the pivot height.
pub fn mechanical_energy(state: &State, params: &PlantParams) -> f64 {
    let (m, l) = (params.rod_mass, params.rod_length);
    let c = state.theta.cos();
    0.5 * (params.cart_mass + m) * state.v * state.v
        + 0.5 * m * l * state.v * state.omega * c
        + 0.5 * (m * l * l / 3.0) * state.omega * state.omega
        + 0.5 * m * params.gravity * l * c
}

fn rk4(state: State, force: f64, params: &PlantParams, h: f64) -> State {
    let k1 = derivatives(&state, force, params);
    let k2 = derivatives(&state.axpy(0.5 * h, k1), force, params);
    let k3 = derivatives(&state.axpy(0.5 * h, k2), force, params);
    let k4 = derivatives(&state.axpy(h, k3), force, params);
    let slope = State::new(
        k1.p + 2.0 * k2.p + 2.0 * k3.p + k4.p,
        k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v,
        k1.theta + 2.0 * k2.theta + 2.0 * k3.theta + k4.theta,
        k1.omega + 2.0 * k2.omega + 2.0 * k3.omega + k4.omega,
    );
    state.axpy(h / 6.0, slope)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub state: State,
    /// A hard stop was hit during this interval.
    pub saturated: bool,
}

/// Advances one sampling interval with the voltage held constant.
pub fn step(state: &State, voltage: f64, params: &PlantParams, cfg: &SimConfig) -> Result<StepOutcome> {
    step_with_substeps(state, voltage, params, cfg, |_| {})
}

/// Like [`step`], calling `on_substep` with the unclamped state after every RK4 substep.
pub fn step_with_substeps(
    state: &State,
    voltage: f64,
    params: &PlantParams,
    cfg: &SimConfig,
    mut on_substep: impl FnMut(&State),
) -> Result<StepOutcome> {
    let force = motor_force(voltage, params);
    let mut x = *state;
    for i in 0..cfg.substeps() {
        x = rk4(x, force, params, cfg.dt_internal);
        if !x.is_finite() {
            return Err(Error::Blowup {
                time: (i + 1) as f64 * cfg.dt_internal,
            });
        }
        on_substep(&x);
    }
    let mut saturated = false;
    if x.p.abs() >= params.rail_half {
        saturated = true;
        x.p = params.rail_half.copysign(x.p);
        if x.v * x.p > 0.0 {
            x.v = 0.0;
        }
    }
    if x.theta.abs() >= params.theta_max {
        saturated = true;
        x.theta = params.theta_max.copysign(x.theta);
        if x.omega * x.theta > 0.0 {
            x.omega = 0.0;
        }
    }
    Ok(StepOutcome { state: x, saturated })
}

/// Largest excursions of the true state, taken over every integration substep.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SafetyAudit {
    pub max_abs_p: f64,
    pub max_abs_theta: f64,
    /// Sampling intervals that ended on a hard stop.
    pub contacts: u64,
}

impl SafetyAudit {
    pub fn record(&mut self, state: &State) {
        self.max_abs_p = self.max_abs_p.max(state.p.abs());
        self.max_abs_theta = self.max_abs_theta.max(state.theta.abs());
    }

    pub fn merge(&mut self, other: &SafetyAudit) {
        self.max_abs_p = self.max_abs_p.max(other.max_abs_p);
        self.max_abs_theta = self.max_abs_theta.max(other.max_abs_theta);
        self.contacts += other.contacts;
    }

    /// True when the state stayed strictly inside both hard stops.
    pub fn is_safe(&self, params: &PlantParams) -> bool {
        self.contacts == 0 && self.max_abs_p < params.rail_half && self.max_abs_theta < params.theta_max
    }
}

/// A simulated plant instance: state, clock and safety audit.
#[derive(Clone, Debug)]
pub struct Plant {
    params: PlantParams,
    cfg: SimConfig,
    state: State,
    time: f64,
    steps: u64,
    audit: SafetyAudit,
}

impl Plant {
    pub fn new(params: PlantParams, cfg: SimConfig, initial: State) -> Self {
        let mut audit = SafetyAudit::default();
        audit.record(&initial);
        Self {
            params,
            cfg,
            state: initial,
            time: 0.0,
            steps: 0,
            audit,
        }
    }

    pub fn state(&self) -> State {
        self.state
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn params(&self) -> &PlantParams {
        &self.params
    }

    pub fn sim_config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn audit(&self) -> &SafetyAudit {
        &self.audit
    }

    /// Holds `voltage` for one sampling interval.
    pub fn advance(&mut self, voltage: f64) -> Result<StepOutcome> {
        let audit = &mut self.audit;
        let outcome = step_with_substeps(&self.state, voltage, &self.params, &self.cfg, |x| audit.record(x)).map_err(
            |e| match e {
                Error::Blowup { time } => Error::Blowup { time: self.time + time },
                other => other,
            },
        )?;
        if outcome.saturated {
            self.audit.contacts += 1;
        }
        self.state = outcome.state;
        self.steps += 1;
        self.time = self.steps as f64 * self.cfg.dt_sample;
        Ok(outcome)
    }
}

/// Counter-based Gaussian noise keyed by (seed, episode, step).
#[derive(Clone, Debug)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
}

/// 32-bit words reserved per sample step.
const WORDS_PER_STEP: u128 = 64;

impl NoiseStream {
    pub fn new(seed: u64, episode: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(episode);
        Self { rng }
    }

    /// Generator positioned at the start of `step`'s block.
    pub fn at(&mut self, step: u64) -> &mut ChaCha8Rng {
        self.rng.set_word_pos(step as u128 * WORDS_PER_STEP);
        &mut self.rng
    }
}

fn quantize(x: f64, q: f64) -> f64 {
    if q > 0.0 {
        (x / q).round() * q
    } else {
        x
    }
}

/// Sensor reading of cart position and rod angle: offset, then noise, then quantization.
pub fn measure_positions<R: Rng + ?Sized>(state: &State, sensors: &SensorParams, rng: &mut R) -> (f64, f64) {
    let mut p = state.p + sensors.offset_p;
    let mut theta = state.theta + sensors.offset_theta;
    if sensors.noise_std_p > 0.0 {
        p += sensors.noise_std_p * rng.sample::<f64, _>(StandardNormal);
    }
    if sensors.noise_std_theta > 0.0 {
        theta += sensors.noise_std_theta * rng.sample::<f64, _>(StandardNormal);
    }
    (quantize(p, sensors.quant_p), quantize(theta, sensors.quant_theta))
}

/// Full measured state. Velocities are backward differences against the
/// previous measured `(p, theta)` sample; without one they read zero.
pub fn measure<R: Rng + ?Sized>(
    state: &State,
    previous: Option<(f64, f64)>,
    sensors: &SensorParams,
    dt_sample: f64,
    rng: &mut R,
) -> State {
    let (p, theta) = measure_positions(state, sensors, rng);
    let (v, omega) = match previous {
        Some((p0, theta0)) => ((p - p0) / dt_sample, (theta - theta0) / dt_sample),
        None => (0.0, 0.0),
    };
    State::new(p, v, theta, omega)
}

/// Stateful sensor front end that remembers the previous sample.
#[derive(Clone, Debug)]
pub struct Sensor {
    params: SensorParams,
    dt_sample: f64,
    noise: NoiseStream,
    previous: Option<(f64, f64)>,
    step: u64,
}

impl Sensor {
    pub fn new(params: SensorParams, dt_sample: f64, seed: u64, episode: u64) -> Self {
        Self {
            params,
            dt_sample,
            noise: NoiseStream::new(seed, episode),
            previous: None,
            step: 0,
        }
    }

    pub fn read(&mut self, state: &State) -> State {
        let rng = self.noise.at(self.step);
        let measured = measure(state, self.previous, &self.params, self.dt_sample, rng);
        self.previous = Some((measured.p, measured.theta));
        self.step += 1;
        measured
    }
}
