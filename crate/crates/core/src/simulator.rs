//! Hybrid closed-loop plant.
//!
//! The COM is integrated in Cartesian coordinates, which stay regular at
//! the grasp point where the polar equations are singular. While the
//! contact slips the cycle-averaged force `F_eff` pushes the COM along the
//! world direction `φ + θ` and exerts the torque `r·F_eff·sin θ`; otherwise
//! kinetic friction brakes the object to rest.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::controller::{ControlError, Controller, GoalState, Phase, PhaseEvent};
use crate::model::{
    effective_net_force, slip_feasible, static_normal_load, ModelError, PlantParams,
};
use crate::scalar::Scalar;
use crate::state::{ActuatorCommand, ObjectState, OriginSingularity, SteeringFrame};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("integration produced a non-finite state at t = {t} s")]
    NonFiniteState { t: f64 },
    #[error("slip infeasible: margin {margin:.6} N at {hz:.3} Hz, r = {r} m")]
    Infeasible { hz: f64, r: f64, margin: f64 },
    #[error("grasp point left the object footprint at r = {r} m")]
    GraspLost { r: f64 },
    #[error("invalid simulation parameter `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Origin(#[from] OriginSingularity),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig<T> {
    /// Control and integration step (s).
    pub dt: T,
    pub sensor_pos_noise_std: T,
    pub sensor_ang_noise_std: T,
    /// Std of the per-step Gaussian torque applied while slipping (N·m),
    /// referenced to a net slip force equal to the kinetic friction load;
    /// see [`Plant::perturbation_std`].
    pub perturbation_torque_std: T,
    pub rng_seed: u64,
    pub r_origin_epsilon: T,
    pub max_sim_time: T,
}

/// Calibrated so that continuous-drive translations on the bundled disk
/// drift by a few degrees.
pub const DEFAULT_PERTURBATION_TORQUE_STD: f64 = 6e-2;

impl<T: Scalar> Default for SimConfig<T> {
    fn default() -> Self {
        Self {
            dt: T::lit(1e-3),
            sensor_pos_noise_std: T::lit(1.5e-3),
            sensor_ang_noise_std: T::lit(1.0f64.to_radians()),
            perturbation_torque_std: T::lit(DEFAULT_PERTURBATION_TORQUE_STD),
            rng_seed: 0,
            r_origin_epsilon: T::lit(2e-4),
            max_sim_time: T::lit(300.0),
        }
    }
}

impl<T: Scalar> SimConfig<T> {
    /// Same configuration with sensor noise and perturbation switched off.
    pub fn noise_free(mut self) -> Self {
        self.sensor_pos_noise_std = T::zero();
        self.sensor_ang_noise_std = T::zero();
        self.perturbation_torque_std = T::zero();
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |field, reason: &str| {
            Err(SimError::InvalidConfig {
                field,
                reason: reason.to_string(),
            })
        };
        if !(self.dt > T::zero() && self.dt.is_finite()) {
            return bad("sim.dt", "must be > 0");
        }
        if !(self.sensor_pos_noise_std >= T::zero()) {
            return bad("sim.sensor_pos_noise_std", "must be >= 0");
        }
        if !(self.sensor_ang_noise_std >= T::zero()) {
            return bad("sim.sensor_ang_noise_std", "must be >= 0");
        }
        if !(self.perturbation_torque_std >= T::zero()) {
            return bad("sim.perturbation_torque_std", "must be >= 0");
        }
        if !(self.r_origin_epsilon > T::zero()) {
            return bad("sim.r_origin_epsilon", "must be > 0");
        }
        if !(self.max_sim_time > T::zero()) {
            return bad("sim.max_sim_time", "must be > 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult<T> {
    pub state: ObjectState<T>,
    /// Whether the contact slipped (drive on and feasible) during the step.
    pub slipping: bool,
}

/// The plant together with the last well-defined polar angle, which orients
/// radial commands while the COM sits on the grasp point.
#[derive(Debug, Clone)]
pub struct Plant<T> {
    pub params: PlantParams<T>,
    heading: T,
}

impl<T: Scalar> Plant<T> {
    pub fn new(params: PlantParams<T>) -> Self {
        Self {
            params,
            heading: T::zero(),
        }
    }

    /// Plant whose radial frame starts aligned with `state` when it is off the origin.
    pub fn starting_at(params: PlantParams<T>, state: &ObjectState<T>, eps: T) -> Self {
        let mut plant = Self::new(params);
        if let Some(phi) = state.phi(eps) {
            plant.heading = phi;
        }
        plant
    }

    pub fn heading(&self) -> T {
        self.heading
    }

    /// Advances the state by `cfg.dt`. `perturbation` is the torque applied
    /// for the whole step if the contact slips.
    pub fn step_with_torque(
        &mut self,
        state: &ObjectState<T>,
        cmd: &ActuatorCommand<T>,
        cfg: &SimConfig<T>,
        perturbation: T,
    ) -> Result<StepResult<T>, SimError> {
        let p = &self.params;
        let eps = cfg.r_origin_epsilon;
        let r0 = state.radius();
        if let Some(phi) = state.phi(eps) {
            self.heading = phi;
        }
        let grip_dir = (-state.y).atan2(-state.x) - state.psi;
        if !p.object.contains_grasp(r0, grip_dir) {
            return Err(SimError::GraspLost { r: r0.as_f64() });
        }

        let erm = p.erm.with_frequency(cmd.frequency);
        let slipping = cmd.is_driving() && slip_feasible(&erm, &p.contact, &p.object, r0).feasible;
        let next = if slipping {
            let heading = self.heading;
            let deriv = |s: &[T; 6]| -> [T; 6] {
                let (x, y) = (s[0], s[1]);
                let r = x.hypot(y);
                let force = effective_net_force(&erm, &p.contact, &p.object, r);
                let dir = match cmd.frame {
                    SteeringFrame::World => cmd.steering_angle,
                    SteeringFrame::Radial if r > eps => y.atan2(x) + cmd.steering_angle,
                    SteeringFrame::Radial => heading + cmd.steering_angle,
                };
                let (fy, fx) = {
                    let (s, c) = dir.sin_cos();
                    (force * s, force * c)
                };
                // r·F·sin(dir − φ) written as a cross product, regular at r = 0
                let torque = x * fy - y * fx + perturbation;
                [
                    s[3],
                    s[4],
                    s[5],
                    fx / p.object.mass,
                    fy / p.object.mass,
                    torque / p.object.inertia,
                ]
            };
            rk4(deriv, as_array(state), cfg.dt)
        } else {
            brake(state, p, r0, cfg.dt)
        };
        let out = from_array(&next);
        if !out.is_finite() {
            return Err(SimError::NonFiniteState { t: f64::NAN });
        }
        Ok(StepResult {
            state: out,
            slipping,
        })
    }

    /// Std of the slip perturbation torque at radius `r`:
    /// `σ·(F_eff/(μ_k·C))²`, so it is `σ` when the net slip force equals the
    /// kinetic friction load and negligible for drives barely above threshold.
    pub fn perturbation_std(&self, r: T, cmd: &ActuatorCommand<T>, cfg: &SimConfig<T>) -> T {
        let p = &self.params;
        let erm = p.erm.with_frequency(cmd.frequency);
        let friction = p.contact.mu_kinetic * static_normal_load(&p.contact, &p.object, r);
        let ratio = effective_net_force(&erm, &p.contact, &p.object, r) / friction;
        cfg.perturbation_torque_std * ratio * ratio
    }

    /// One plant step, drawing the perturbation torque from `rng` while slipping.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        state: &ObjectState<T>,
        cmd: &ActuatorCommand<T>,
        cfg: &SimConfig<T>,
        rng: &mut R,
    ) -> Result<StepResult<T>, SimError> {
        let torque = if cfg.perturbation_torque_std > T::zero() && cmd.is_driving() {
            let z: f64 = rng.sample(StandardNormal);
            self.perturbation_std(state.radius(), cmd, cfg) * T::lit(z)
        } else {
            T::zero()
        };
        self.step_with_torque(state, cmd, cfg, torque)
    }
}

fn as_array<T: Scalar>(s: &ObjectState<T>) -> [T; 6] {
    [s.x, s.y, s.psi, s.vx, s.vy, s.psi_dot]
}

fn from_array<T: Scalar>(a: &[T; 6]) -> ObjectState<T> {
    ObjectState {
        x: a[0],
        y: a[1],
        psi: a[2],
        vx: a[3],
        vy: a[4],
        psi_dot: a[5],
    }
}

fn rk4<T: Scalar, F: Fn(&[T; 6]) -> [T; 6]>(f: F, y: [T; 6], h: T) -> [T; 6] {
    let axpy = |a: T, k: &[T; 6]| -> [T; 6] { std::array::from_fn(|i| y[i] + a * k[i]) };
    let half = h * T::half();
    let k1 = f(&y);
    let k2 = f(&axpy(half, &k1));
    let k3 = f(&axpy(half, &k2));
    let k4 = f(&axpy(h, &k3));
    let sixth = h / T::lit(6.0);
    std::array::from_fn(|i| y[i] + sixth * (k1[i] + T::two() * (k2[i] + k3[i]) + k4[i]))
}

/// Exact constant-deceleration stop: kinetic friction `μ_k·(f_b + M·g + f_d)`
/// opposes the COM velocity, and the same load acting at the finger radius
/// opposes the spin. Each motion clamps to zero at its own stopping time.
fn brake<T: Scalar>(state: &ObjectState<T>, p: &PlantParams<T>, r: T, dt: T) -> [T; 6] {
    let friction = p.contact.mu_kinetic * static_normal_load(&p.contact, &p.object, r);
    let decel = friction / p.object.mass;
    let spin_decel = friction * p.contact.finger_radius / p.object.inertia;

    let mut out = as_array(state);
    let v = state.speed();
    if v > T::zero() {
        let tau = (v / decel).min(dt);
        let travelled = v * tau - T::half() * decel * tau * tau;
        let (ux, uy) = (state.vx / v, state.vy / v);
        out[0] = state.x + ux * travelled;
        out[1] = state.y + uy * travelled;
        let v_next = if tau < dt { T::zero() } else { v - decel * dt };
        out[3] = ux * v_next;
        out[4] = uy * v_next;
    }
    let w = state.psi_dot.abs();
    if w > T::zero() {
        let sign = state.psi_dot.signum();
        let tau = (w / spin_decel).min(dt);
        out[2] = state.psi + sign * (w * tau - T::half() * spin_decel * tau * tau);
        out[5] = if tau < dt {
            T::zero()
        } else {
            sign * (w - spin_decel * dt)
        };
    }
    out
}

/// Overhead-camera emulation: Gaussian noise on the pose, velocities passed through.
///
/// Always draws three normals so the stream layout does not depend on the stds.
pub fn sense<T: Scalar, R: Rng + ?Sized>(
    state: &ObjectState<T>,
    cfg: &SimConfig<T>,
    rng: &mut R,
) -> ObjectState<T> {
    let nx: f64 = rng.sample(StandardNormal);
    let ny: f64 = rng.sample(StandardNormal);
    let npsi: f64 = rng.sample(StandardNormal);
    ObjectState {
        x: state.x + cfg.sensor_pos_noise_std * T::lit(nx),
        y: state.y + cfg.sensor_pos_noise_std * T::lit(ny),
        psi: state.psi + cfg.sensor_ang_noise_std * T::lit(npsi),
        ..*state
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample<T> {
    pub t: T,
    pub truth: ObjectState<T>,
    pub measured: ObjectState<T>,
    pub command: ActuatorCommand<T>,
    pub slipping: bool,
    pub phase: Phase,
}

pub const TRAJECTORY_HEADER: &str =
    "t,x,y,psi,r,phi,meas_x,meas_y,meas_psi,theta,omega,gate,slip,phase";

/// Formats a value with 9 significant digits.
pub fn fmt_sig9(v: f64) -> String {
    format!("{v:.8e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub dt: T,
    pub r_origin_epsilon: T,
    pub samples: Vec<Sample<T>>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn new(dt: T, r_origin_epsilon: T) -> Self {
        Self {
            dt,
            r_origin_epsilon,
            samples: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{TRAJECTORY_HEADER}")?;
        for s in &self.samples {
            let phi = s
                .truth
                .phi(self.r_origin_epsilon)
                .map_or(f64::NAN, |p| p.as_f64());
            let cols = [
                s.t.as_f64(),
                s.truth.x.as_f64(),
                s.truth.y.as_f64(),
                s.truth.psi.as_f64(),
                s.truth.radius().as_f64(),
                phi,
                s.measured.x.as_f64(),
                s.measured.y.as_f64(),
                s.measured.psi.as_f64(),
                s.command.steering_angle.as_f64(),
                s.command.frequency.as_f64(),
            ];
            for c in cols {
                write!(w, "{},", fmt_sig9(c))?;
            }
            writeln!(
                w,
                "{},{},{}",
                u8::from(s.command.duty_gate_open),
                u8::from(s.slipping),
                s.phase
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Reached,
    Timeout,
    Fault(SimError),
}

impl Outcome {
    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Reached => "reached",
            Outcome::Timeout => "timeout",
            Outcome::Fault(_) => "fault",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary<T> {
    pub outcome: Outcome,
    pub final_state: ObjectState<T>,
    pub events: Vec<PhaseEvent<T>>,
    pub sim_time: T,
    pub steps: usize,
    /// Simulated time spent in each phase, indexed by [`Phase::index`].
    pub phase_time: [T; 8],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode<T> {
    pub trajectory: Trajectory<T>,
    pub summary: RunSummary<T>,
}

/// Checks that the contact can slip at the rotation frequency out to `r_c`
/// and at the translation frequency across the travel range.
pub fn check_feasibility<T: Scalar>(
    controller: &Controller<T>,
    initial: &ObjectState<T>,
    goal: &GoalState<T>,
    plant: &PlantParams<T>,
) -> Result<(), SimError> {
    let cp = &controller.params;
    let r_travel = initial.radius().max(goal.r_g);
    for (omega, r) in [(cp.omega_rotate, cp.r_c), (cp.omega_translate, r_travel)] {
        let erm = plant.erm.with_frequency(omega);
        let f = slip_feasible(&erm, &plant.contact, &plant.object, r);
        if !f.feasible {
            return Err(SimError::Infeasible {
                hz: omega.as_f64() / std::f64::consts::TAU,
                r: r.as_f64(),
                margin: f.margin.as_f64(),
            });
        }
    }
    Ok(())
}

/// Closed loop `sense → controller → plant` at period `cfg.dt`, calling
/// `observer` with every sample. The controller is reset first.
pub fn run_observed<T: Scalar, F: FnMut(&Sample<T>)>(
    controller: &mut Controller<T>,
    initial: ObjectState<T>,
    goal: &GoalState<T>,
    plant: &PlantParams<T>,
    cfg: &SimConfig<T>,
    mut observer: F,
) -> RunSummary<T> {
    controller.reset();
    let mut summary = RunSummary {
        outcome: Outcome::Reached,
        final_state: initial,
        events: Vec::new(),
        sim_time: T::zero(),
        steps: 0,
        phase_time: [T::zero(); 8],
    };
    let fault = |mut summary: RunSummary<T>, e: SimError, controller: &mut Controller<T>| {
        summary.outcome = Outcome::Fault(e);
        summary.events = controller.take_events();
        summary
    };
    if let Err(e) = cfg
        .validate()
        .and_then(|_| plant.validate().map_err(SimError::from))
        .and_then(|_| check_feasibility(controller, &initial, goal, plant))
    {
        return fault(summary, e, controller);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut plant_state = Plant::starting_at(*plant, &initial, cfg.r_origin_epsilon);
    let mut state = initial;
    let mut k: usize = 0;
    loop {
        let t = cfg.dt * T::lit(k as f64);
        summary.sim_time = t;
        summary.final_state = state;
        if t > cfg.max_sim_time {
            summary.outcome = Outcome::Timeout;
            break;
        }
        let measured = sense(&state, cfg, &mut rng);
        let command = match controller.step(&measured, goal, t) {
            Ok(c) => c,
            Err(e) => return fault(summary, e.into(), controller),
        };
        let phase = controller.phase();
        if controller.is_done() {
            observer(&Sample {
                t,
                truth: state,
                measured,
                command,
                slipping: false,
                phase,
            });
            summary.outcome = Outcome::Reached;
            break;
        }
        let result = match plant_state.step(&state, &command, cfg, &mut rng) {
            Ok(r) => r,
            Err(SimError::NonFiniteState { .. }) => {
                return fault(
                    summary,
                    SimError::NonFiniteState { t: t.as_f64() },
                    controller,
                )
            }
            Err(e) => return fault(summary, e, controller),
        };
        observer(&Sample {
            t,
            truth: state,
            measured,
            command,
            slipping: result.slipping,
            phase,
        });
        summary.phase_time[phase.index()] = summary.phase_time[phase.index()] + cfg.dt;
        summary.steps += 1;
        state = result.state;
        k += 1;
    }
    summary.events = controller.take_events();
    summary
}

/// [`run_observed`] recording every sample into a [`Trajectory`].
pub fn run<T: Scalar>(
    controller: &mut Controller<T>,
    initial: ObjectState<T>,
    goal: &GoalState<T>,
    plant: &PlantParams<T>,
    cfg: &SimConfig<T>,
) -> Episode<T> {
    let mut trajectory = Trajectory::new(cfg.dt, cfg.r_origin_epsilon);
    let summary = run_observed(controller, initial, goal, plant, cfg, |s| {
        trajectory.samples.push(*s)
    });
    Episode {
        trajectory,
        summary,
    }
}

/// Simulated steady orbit at `θ = π`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitMeasurement<T> {
    /// Analytic rate `√(F_eff/(M·r_c))` used to seed the orbit (rad/s).
    pub analytic_rate: T,
    /// Mean `φ̇` over the measured revolutions (rad/s).
    pub simulated_rate: T,
    /// Largest relative radius deviation from `r_c` seen.
    pub max_radius_deviation: T,
    /// Largest `|φ̈|/φ̇²` seen, from central differences of the sampled `φ̇`.
    pub max_phi_ddot_ratio: T,
}

/// Starts the COM on the circle `r = r_c` with the analytic orbit rate,
/// commands `θ = π` at `omega` without noise or perturbation, and measures
/// the orbit over `revolutions` turns.
pub fn measure_orbit<T: Scalar>(
    plant: &PlantParams<T>,
    r_c: T,
    omega: T,
    dt: T,
    revolutions: T,
) -> Result<OrbitMeasurement<T>, SimError> {
    let mut params = *plant;
    params.erm = params.erm.with_frequency(omega);
    let analytic = crate::controller::steady_spin_rate(r_c, &params)?;
    let cfg = SimConfig {
        dt,
        ..SimConfig::default().noise_free()
    };
    let cmd = ActuatorCommand::radial(T::PI(), omega, true);
    let mut state = ObjectState::on_circle(r_c, T::zero(), analytic, T::zero(), T::zero());
    let mut sim = Plant::starting_at(params, &state, cfg.r_origin_epsilon);
    let steps = (revolutions * T::TAU() / (analytic * dt)).ceil().as_f64() as usize;

    let (mut unwrapped, mut prev_phi) = (T::zero(), T::zero());
    let mut max_dev = T::zero();
    let mut rates: [T; 3] = [analytic; 3];
    let mut max_ratio = T::zero();
    for k in 0..steps {
        state = sim.step_with_torque(&state, &cmd, &cfg, T::zero())?.state;
        let pv = crate::state::polar_view(&state, cfg.r_origin_epsilon)?;
        unwrapped = unwrapped + crate::scalar::wrap_angle(pv.phi - prev_phi);
        prev_phi = pv.phi;
        max_dev = max_dev.max(((pv.r - r_c) / r_c).abs());
        rates = [rates[1], rates[2], pv.phi_dot];
        if k >= 2 {
            let phi_ddot = (rates[2] - rates[0]) / (T::two() * dt);
            max_ratio = max_ratio.max((phi_ddot / (rates[1] * rates[1])).abs());
        }
    }
    Ok(OrbitMeasurement {
        analytic_rate: analytic,
        simulated_rate: unwrapped / (dt * T::lit(steps as f64)),
        max_radius_deviation: max_dev,
        max_phi_ddot_ratio: max_ratio,
    })
}
