//! Vibratory finger manipulation: a stick-slip force model for a thin
//! object held between two fingers, one of which carries an eccentric
//! rotating mass on a steerable shaft; a hybrid plant integrating the
//! object's planar motion; and the controller that drives the object to a
//! full goal pose.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`). The `*64`
//! and `*32` aliases below fix the scalar type.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod model;
pub mod quadrature;
pub mod scalar;
pub mod simulator;
pub mod state;

pub use controller::{
    algorithm_step, duty_gate, position_steering, required_steering_for_circle, steady_spin_rate,
    ControlError, Controller, ControllerParams, ControllerState, Decision, GoalState, Phase,
    PhaseEvent, Steering,
};
pub use model::{
    effective_net_force, mass_split, min_slip_frequency, net_normal_force, slip_active,
    slip_feasible, static_normal_load, tilt_force, tilt_force_at, vibration_normal_force,
    vibration_tangential_force, ContactParams, ErmParams, MassSplit, ModelError, ObjectGeometry,
    PlantParams, Shape, SlipFeasibility,
};
pub use scalar::{wrap_angle, Scalar};
pub use simulator::{
    check_feasibility, fmt_sig9, measure_orbit, run, run_observed, sense, Episode,
    OrbitMeasurement, Outcome, Plant, RunSummary, Sample, SimConfig, SimError, StepResult,
    Trajectory, DEFAULT_PERTURBATION_TORQUE_STD, TRAJECTORY_HEADER,
};
pub use state::{
    polar_view, ActuatorCommand, ObjectState, OriginSingularity, PolarView, SteeringFrame,
};

pub type ObjectState64 = ObjectState<f64>;
pub type ObjectState32 = ObjectState<f32>;
pub type PlantParams64 = PlantParams<f64>;
pub type PlantParams32 = PlantParams<f32>;
pub type ControllerParams64 = ControllerParams<f64>;
pub type ControllerParams32 = ControllerParams<f32>;
pub type SimConfig64 = SimConfig<f64>;
pub type SimConfig32 = SimConfig<f32>;
pub type GoalState64 = GoalState<f64>;
pub type GoalState32 = GoalState<f32>;
pub type Controller64 = Controller<f64>;
pub type Controller32 = Controller<f32>;
