//! Full-state manipulation controller.
//!
//! Position is driven by the pursuit law `θ = atan2(k₂, k₁) − φ`. Orientation
//! cannot be steered directly, so the controller runs a fixed phase
//! sequence: bring the COM onto the grasp point, push it out to a small
//! radius, kick it sideways to start it spinning, keep it orbiting with
//! `θ = π` until `ψ` reaches the goal, bring it back to the grasp point and
//! finally translate it along `r̂` to the goal position.
//!
//! Phase exits that depend on a pose threshold switch the motor off, hold
//! it off for `settle_time` and re-check the threshold on a fresh
//! measurement before committing; the phase resumes if the object coasted
//! back out of tolerance. The end of the kick and the departure from the
//! origin switch steering with the motor running.

use std::fmt;

use thiserror::Error;

use crate::model::{effective_net_force, PlantParams};
use crate::scalar::{sign_or_one, wrap_angle, Scalar};
use crate::state::{ActuatorCommand, ObjectState, SteeringFrame};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("phase {phase} exceeded its time budget ({elapsed:.3} s)")]
    PhaseTimeout { phase: Phase, elapsed: f64 },
    #[error("target coincides with the current position")]
    DegenerateTarget,
    #[error("angular velocity is zero; steering rule undefined")]
    ZeroAngularVelocity,
    #[error("no slip at r = {r} m: effective drive force is zero")]
    Infeasible { r: f64 },
    #[error("invalid controller parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
}

fn invalid(field: &'static str, reason: &str) -> ControlError {
    ControlError::InvalidParameter {
        field,
        reason: reason.to_string(),
    }
}

/// Desired final pose `(r_g, φ_g, ψ_g)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoalState<T> {
    pub r_g: T,
    pub phi_g: T,
    pub psi_g: T,
}

impl<T: Scalar> GoalState<T> {
    pub fn new(r_g: T, phi_g: T, psi_g: T) -> Result<Self, ControlError> {
        if !(r_g >= T::zero()) || !r_g.is_finite() {
            return Err(invalid("goal.r", "must be finite and >= 0"));
        }
        Ok(Self {
            r_g,
            phi_g: wrap_angle(phi_g),
            psi_g: wrap_angle(psi_g),
        })
    }

    pub fn position(&self) -> (T, T) {
        let (s, c) = self.phi_g.sin_cos();
        (self.r_g * c, self.r_g * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerParams<T> {
    /// Position tolerance ε_r (m).
    pub eps_r: T,
    /// Orientation tolerance ε_ψ (rad).
    pub eps_psi: T,
    /// Orbit radius used for rotation (m).
    pub r_c: T,
    /// Orientation error at which rotation is stopped (rad); the stop is
    /// then confirmed against `eps_psi`.
    pub rotate_stop_band: T,
    /// Rotation is abandoned and re-kicked when the orientation error has not
    /// shrunk by `eps_psi` within this time (s).
    pub rotate_stall_time: T,
    /// Steering angle applied during the kick (rad); its sign is chosen per rotation.
    pub theta_kick: T,
    /// Kick duration Δt (s).
    pub kick_duration: T,
    /// Constant drive frequency while rotating (rad/s).
    pub omega_rotate: T,
    /// Drive frequency while translating (rad/s).
    pub omega_translate: T,
    /// Fraction of each duty period with the drive on, in (0, 1].
    pub duty_fraction: T,
    /// Duty period (s).
    pub duty_period: T,
    /// Motor-off hold before a threshold exit is confirmed (s).
    pub settle_time: T,
    /// Per-tick gain α of the exponential smoother applied to the measured
    /// orientation; 1 uses the raw measurement.
    pub psi_filter_gain: T,
    /// Maximum time spent in any single phase (s).
    pub phase_budget: T,
    /// Below this radius `r̂` is undefined (m).
    pub r_origin_epsilon: T,
}

impl<T: Scalar> Default for ControllerParams<T> {
    fn default() -> Self {
        Self {
            eps_r: T::lit(1e-3),
            eps_psi: T::lit(1.0f64.to_radians()),
            rotate_stop_band: T::lit(0.5f64.to_radians()),
            rotate_stall_time: T::lit(2.0),
            r_c: T::lit(7.75e-3),
            theta_kick: T::PI() / T::lit(5.0),
            kick_duration: T::lit(0.1),
            omega_rotate: T::TAU() * T::lit(168.0),
            omega_translate: T::TAU() * T::lit(240.0),
            duty_fraction: T::half(),
            duty_period: T::lit(0.05),
            settle_time: T::lit(0.15),
            psi_filter_gain: T::lit(0.05),
            phase_budget: T::lit(60.0),
            r_origin_epsilon: T::lit(2e-4),
        }
    }
}

impl<T: Scalar> ControllerParams<T> {
    pub fn validate(&self) -> Result<(), ControlError> {
        let pos = |v: T| v > T::zero() && v.is_finite();
        if !pos(self.eps_r) {
            return Err(invalid("controller.eps_r", "must be > 0"));
        }
        if !pos(self.eps_psi) {
            return Err(invalid("controller.eps_psi", "must be > 0"));
        }
        if !(pos(self.rotate_stop_band) && self.rotate_stop_band <= self.eps_psi) {
            return Err(invalid(
                "controller.rotate_stop_band",
                "must be in (0, eps_psi]",
            ));
        }
        if !pos(self.rotate_stall_time) {
            return Err(invalid("controller.rotate_stall_time", "must be > 0"));
        }
        if !pos(self.r_c) {
            return Err(invalid("controller.r_c", "must be > 0"));
        }
        if !pos(self.kick_duration) {
            return Err(invalid("controller.kick_duration", "must be > 0"));
        }
        if !(self.theta_kick.sin().abs() > T::lit(1e-6)) {
            return Err(invalid("controller.theta_kick", "must not be 0 or π"));
        }
        if !pos(self.omega_rotate) {
            return Err(invalid("controller.omega_rotate", "must be > 0"));
        }
        if !pos(self.omega_translate) {
            return Err(invalid("controller.omega_translate", "must be > 0"));
        }
        if !(self.duty_fraction > T::zero() && self.duty_fraction <= T::one()) {
            return Err(invalid("controller.duty_fraction", "must be in (0, 1]"));
        }
        if !pos(self.duty_period) {
            return Err(invalid("controller.duty_period", "must be > 0"));
        }
        if !(self.settle_time >= T::zero()) {
            return Err(invalid("controller.settle_time", "must be >= 0"));
        }
        if !(self.psi_filter_gain > T::zero() && self.psi_filter_gain <= T::one()) {
            return Err(invalid("controller.psi_filter_gain", "must be in (0, 1]"));
        }
        if !pos(self.phase_budget) {
            return Err(invalid("controller.phase_budget", "must be > 0"));
        }
        if !pos(self.r_origin_epsilon) {
            return Err(invalid("controller.r_origin_epsilon", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    ToCom,
    SpinUpRadius,
    Kick,
    Rotate,
    ReturnToCom,
    DepartOrigin,
    ToGoal,
    Done,
}

impl Phase {
    pub const ALL: [Phase; 8] = [
        Phase::ToCom,
        Phase::SpinUpRadius,
        Phase::Kick,
        Phase::Rotate,
        Phase::ReturnToCom,
        Phase::DepartOrigin,
        Phase::ToGoal,
        Phase::Done,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Phase::ToCom => "to_com",
            Phase::SpinUpRadius => "spin_up_radius",
            Phase::Kick => "kick",
            Phase::Rotate => "rotate",
            Phase::ReturnToCom => "return_to_com",
            Phase::DepartOrigin => "depart_origin",
            Phase::ToGoal => "to_goal",
            Phase::Done => "done",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Phases that translate the COM, which use duty-gated drive.
    pub fn is_translation(self) -> bool {
        matches!(
            self,
            Phase::ToCom | Phase::ReturnToCom | Phase::DepartOrigin | Phase::ToGoal
        )
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum HaltIntent {
    /// Re-check the current phase's exit condition once the object is at rest.
    Confirm,
    Goto(Phase),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerState<T> {
    pub phase: Phase,
    /// Time at which the current phase was entered (s).
    pub phase_started: T,
    /// `+1` or `−1`: sign of the kick and hence of the spin.
    pub rotation_direction: T,
    halt: Option<(T, HaltIntent)>,
    drive_started: Option<T>,
    /// World-frame pursuit direction when the current drive segment began.
    segment_heading: Option<T>,
    /// Best orientation error seen while rotating and when it was reached.
    rotate_progress: Option<(T, T)>,
    /// Smoothed orientation measurement.
    psi_estimate: Option<T>,
    started: bool,
}

impl<T: Scalar> Default for ControllerState<T> {
    fn default() -> Self {
        Self {
            phase: Phase::ToCom,
            phase_started: T::zero(),
            rotation_direction: T::one(),
            halt: None,
            drive_started: None,
            segment_heading: None,
            rotate_progress: None,
            psi_estimate: None,
            started: false,
        }
    }
}

impl<T: Scalar> ControllerState<T> {
    pub fn phase_clock(&self, t: T) -> T {
        t - self.phase_started
    }

    /// Whether the motor is being held off ahead of a phase decision.
    pub fn is_halting(&self) -> bool {
        self.halt.is_some()
    }

    fn enter(&mut self, phase: Phase, t: T) {
        self.phase = phase;
        self.phase_started = t;
        self.halt = None;
        self.drive_started = None;
        self.segment_heading = None;
        self.rotate_progress = None;
    }

    fn begin_halt(&mut self, t: T, hold: T, intent: HaltIntent) {
        self.halt = Some((t + hold, intent));
        self.drive_started = None;
        self.segment_heading = None;
    }

    /// Filtered orientation, if any measurement has been seen.
    pub fn psi_estimate(&self) -> Option<T> {
        self.psi_estimate
    }

    /// Exponential smoothing `ψ̂ ← ψ̂ + α·wrap(ψ − ψ̂)`.
    fn observe_psi(&mut self, psi: T, alpha: T) -> T {
        let next = match self.psi_estimate {
            Some(est) => wrap_angle(est + alpha * wrap_angle(psi - est)),
            None => psi,
        };
        self.psi_estimate = Some(next);
        next
    }

    fn drive_clock(&mut self, t: T) -> T {
        t - *self.drive_started.get_or_insert(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseEvent<T> {
    pub t: T,
    pub from: Phase,
    pub to: Phase,
}

/// Steering angle with the frame it is expressed in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Steering<T> {
    pub angle: T,
    pub frame: SteeringFrame,
}

/// Pursuit steering toward a polar target.
///
/// Returns `θ = atan2(k₂, k₁) − φ` relative to `r̂`, with
/// `k = target − position`. When the measured COM is within
/// `origin_epsilon` of the grasp point `r̂` is undefined and the world-frame
/// heading `atan2(k₂, k₁)` is returned instead.
pub fn position_steering<T: Scalar>(
    measured: &ObjectState<T>,
    target_r: T,
    target_phi: T,
    origin_epsilon: T,
) -> Result<Steering<T>, ControlError> {
    let (s, c) = target_phi.sin_cos();
    let k1 = target_r * c - measured.x;
    let k2 = target_r * s - measured.y;
    if k1 == T::zero() && k2 == T::zero() {
        return Err(ControlError::DegenerateTarget);
    }
    let heading = k2.atan2(k1);
    Ok(match measured.phi(origin_epsilon) {
        Some(phi) => Steering {
            angle: wrap_angle(heading - phi),
            frame: SteeringFrame::Radial,
        },
        None => Steering {
            angle: wrap_angle(heading),
            frame: SteeringFrame::World,
        },
    })
}

/// Duty-cycle gate: open during the first `duty_fraction` of every period.
pub fn duty_gate<T: Scalar>(t: T, params: &ControllerParams<T>) -> bool {
    if params.duty_fraction >= T::one() {
        return true;
    }
    let period = params.duty_period;
    let into = t - period * (t / period).floor();
    into < params.duty_fraction * period
}

/// Steering angle that keeps the COM on a circle given `φ̇` and `φ̈`:
/// `tan θ = −φ̈/φ̇²`, taking the branch `atan2(−φ̈, φ̇²)`.
pub fn required_steering_for_circle<T: Scalar>(phi_dot: T, phi_ddot: T) -> Result<T, ControlError> {
    if phi_dot == T::zero() {
        return Err(ControlError::ZeroAngularVelocity);
    }
    Ok((-phi_ddot).atan2(phi_dot * phi_dot))
}

/// Orbit rate `φ̇ = √(F_eff/(M·r_c))` of a COM circling at radius `r_c`
/// with `θ = π`, using the motor frequency stored in `plant.erm`.
pub fn steady_spin_rate<T: Scalar>(r_c: T, plant: &PlantParams<T>) -> Result<T, ControlError> {
    if !(r_c > T::zero()) {
        return Err(invalid("r_c", "must be > 0"));
    }
    let force = effective_net_force(&plant.erm, &plant.contact, &plant.object, r_c);
    if !(force > T::zero()) {
        return Err(ControlError::Infeasible { r: r_c.as_f64() });
    }
    Ok((force / (plant.object.mass * r_c)).sqrt())
}

/// Result of one controller tick.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision<T> {
    pub command: ActuatorCommand<T>,
    pub state: ControllerState<T>,
    /// Phase changes taken during the tick, in order.
    pub events: Vec<PhaseEvent<T>>,
}

fn at_goal<T: Scalar>(m: &ObjectState<T>, goal: &GoalState<T>, p: &ControllerParams<T>) -> bool {
    m.distance_to(goal.r_g, goal.phi_g) <= p.eps_r
        && wrap_angle(m.psi - goal.psi_g).abs() <= p.eps_psi
}

/// Pursuit command toward a target, or `None` after opening a halt because
/// the pursuit direction turned by more than a right angle since the drive
/// segment began, meaning the object went past the target.
fn translate<T: Scalar>(
    st: &mut ControllerState<T>,
    m: &ObjectState<T>,
    target_r: T,
    target_phi: T,
    p: &ControllerParams<T>,
    t: T,
) -> Result<Option<ActuatorCommand<T>>, ControlError> {
    let steer = position_steering(m, target_r, target_phi, p.r_origin_epsilon)?;
    let heading = match steer.frame {
        SteeringFrame::World => steer.angle,
        SteeringFrame::Radial => steer.angle + m.y.atan2(m.x),
    };
    let start = *st.segment_heading.get_or_insert(heading);
    if (heading - start).cos() < T::zero() {
        st.begin_halt(t, p.settle_time, HaltIntent::Confirm);
        return Ok(None);
    }
    let gate = duty_gate(st.drive_clock(t), p);
    Ok(Some(ActuatorCommand {
        steering_angle: steer.angle,
        frequency: p.omega_translate,
        duty_gate_open: gate,
        frame: steer.frame,
    }))
}

/// One tick of the phase machine.
///
/// Pure: the caller owns the returned state. Uses poses only; the velocity
/// fields of `measured` are ignored.
pub fn algorithm_step<T: Scalar>(
    prev: &ControllerState<T>,
    measured: &ObjectState<T>,
    goal: &GoalState<T>,
    p: &ControllerParams<T>,
    t: T,
) -> Result<Decision<T>, ControlError> {
    let mut st = *prev;
    let mut events = Vec::new();
    let m = measured;
    let off = ActuatorCommand::off();
    if !st.started {
        st.started = true;
        st.phase_started = t;
    }
    let psi_hat = st.observe_psi(m.psi, p.psi_filter_gain);
    let psi_err = wrap_angle(goal.psi_g - psi_hat);
    let r_m = m.radius();

    // at most a couple of resolutions happen in one tick; the bound guards the loop
    for _ in 0..4 {
        if let Some((until, intent)) = st.halt {
            if t < until {
                return Ok(Decision {
                    command: off,
                    state: st,
                    events,
                });
            }
            st.halt = None;
            let next = match intent {
                HaltIntent::Goto(phase) => Some(phase),
                HaltIntent::Confirm => match st.phase {
                    Phase::ToCom if r_m <= p.eps_r => Some(if psi_err.abs() <= p.eps_psi {
                        Phase::DepartOrigin
                    } else {
                        Phase::SpinUpRadius
                    }),
                    Phase::Rotate if psi_err.abs() <= p.eps_psi => Some(Phase::ReturnToCom),
                    // missed or overshot: spin up again with a fresh kick
                    Phase::Rotate if r_m < p.r_c => Some(Phase::SpinUpRadius),
                    Phase::Rotate => Some(Phase::Kick),
                    Phase::ReturnToCom if r_m <= p.eps_r => Some(Phase::DepartOrigin),
                    Phase::ToGoal if m.distance_to(goal.r_g, goal.phi_g) <= p.eps_r => {
                        Some(Phase::Done)
                    }
                    _ => None,
                },
            };
            if let Some(next) = next {
                events.push(PhaseEvent {
                    t,
                    from: st.phase,
                    to: next,
                });
                st.enter(next, t);
                if next == Phase::Kick {
                    st.rotation_direction = sign_or_one(psi_err);
                }
            }
        }

        if st.phase == Phase::Done {
            return Ok(Decision {
                command: off,
                state: st,
                events,
            });
        }
        let elapsed = st.phase_clock(t);
        if elapsed > p.phase_budget {
            return Err(ControlError::PhaseTimeout {
                phase: st.phase,
                elapsed: elapsed.as_f64(),
            });
        }

        let command = match st.phase {
            Phase::ToCom | Phase::ReturnToCom => {
                if st.phase == Phase::ToCom && elapsed == T::zero() && at_goal(m, goal, p) {
                    st.begin_halt(t, T::zero(), HaltIntent::Goto(Phase::Done));
                    None
                } else if r_m <= p.eps_r {
                    st.begin_halt(t, p.settle_time, HaltIntent::Confirm);
                    None
                } else {
                    translate(&mut st, m, T::zero(), T::zero(), p, t)?
                }
            }
            Phase::SpinUpRadius => {
                if r_m >= p.r_c {
                    st.begin_halt(t, p.settle_time, HaltIntent::Goto(Phase::Kick));
                    None
                } else {
                    Some(ActuatorCommand::radial(T::zero(), p.omega_rotate, true))
                }
            }
            Phase::Kick => {
                if elapsed >= p.kick_duration {
                    // the steering swings to π with the motor running
                    events.push(PhaseEvent {
                        t,
                        from: st.phase,
                        to: Phase::Rotate,
                    });
                    st.enter(Phase::Rotate, t);
                    None
                } else {
                    let theta = st.rotation_direction * p.theta_kick.abs();
                    Some(ActuatorCommand::radial(theta, p.omega_rotate, true))
                }
            }
            Phase::Rotate => {
                let err = psi_err.abs();
                let (best, since) = *st.rotate_progress.get_or_insert((err, t));
                let stalled = if err < best - p.eps_psi {
                    st.rotate_progress = Some((err, t));
                    false
                } else {
                    t - since > p.rotate_stall_time
                };
                if err <= p.rotate_stop_band
                    || psi_err * st.rotation_direction < -p.eps_psi
                    || stalled
                {
                    st.begin_halt(t, p.settle_time, HaltIntent::Confirm);
                    None
                } else {
                    Some(ActuatorCommand::radial(T::PI(), p.omega_rotate, true))
                }
            }
            Phase::DepartOrigin => {
                if r_m <= p.r_origin_epsilon {
                    let gate = duty_gate(st.drive_clock(t), p);
                    Some(ActuatorCommand::world(goal.phi_g, p.omega_translate, gate))
                } else {
                    events.push(PhaseEvent {
                        t,
                        from: st.phase,
                        to: Phase::ToGoal,
                    });
                    st.enter(Phase::ToGoal, t);
                    None
                }
            }
            Phase::ToGoal => {
                if m.distance_to(goal.r_g, goal.phi_g) <= p.eps_r {
                    st.begin_halt(t, p.settle_time, HaltIntent::Confirm);
                    None
                } else {
                    translate(&mut st, m, goal.r_g, goal.phi_g, p, t)?
                }
            }
            Phase::Done => None,
        };
        match command {
            Some(command) => {
                return Ok(Decision {
                    command,
                    state: st,
                    events,
                })
            }
            // a halt that was just opened always emits at least one motor-off tick
            None if st.halt.is_some() => {
                return Ok(Decision {
                    command: off,
                    state: st,
                    events,
                })
            }
            None => {}
        }
    }
    Ok(Decision {
        command: off,
        state: st,
        events,
    })
}

/// Stateful wrapper around [`algorithm_step`] that records phase events.
#[derive(Debug, Clone)]
pub struct Controller<T> {
    pub params: ControllerParams<T>,
    state: ControllerState<T>,
    events: Vec<PhaseEvent<T>>,
}

impl<T: Scalar> Controller<T> {
    pub fn new(params: ControllerParams<T>) -> Result<Self, ControlError> {
        params.validate()?;
        Ok(Self {
            params,
            state: ControllerState::default(),
            events: Vec::new(),
        })
    }

    pub fn reset(&mut self) {
        self.state = ControllerState::default();
        self.events.clear();
    }

    pub fn step(
        &mut self,
        measured: &ObjectState<T>,
        goal: &GoalState<T>,
        t: T,
    ) -> Result<ActuatorCommand<T>, ControlError> {
        let d = algorithm_step(&self.state, measured, goal, &self.params, t)?;
        self.state = d.state;
        self.events.extend_from_slice(&d.events);
        Ok(d.command)
    }

    pub fn phase(&self) -> Phase {
        self.state.phase
    }

    pub fn state(&self) -> &ControllerState<T> {
        &self.state
    }

    pub fn is_done(&self) -> bool {
        self.state.phase == Phase::Done
    }

    pub fn events(&self) -> &[PhaseEvent<T>] {
        &self.events
    }

    pub fn take_events(&mut self) -> Vec<PhaseEvent<T>> {
        std::mem::take(&mut self.events)
    }
}
