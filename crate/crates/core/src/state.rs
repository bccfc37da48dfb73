//! Object kinematic state and actuator commands.

use thiserror::Error;

use crate::scalar::{wrap_angle, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("polar angle undefined at r = {r} m (within the origin tolerance)")]
pub struct OriginSingularity {
    pub r: f64,
}

/// Pose and velocity of the grasped object.
///
/// `(x, y)` is the COM in the finger frame, whose origin is the grasp point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ObjectState<T> {
    pub x: T,
    pub y: T,
    pub psi: T,
    pub vx: T,
    pub vy: T,
    pub psi_dot: T,
}

/// Polar view `(r, φ, ṙ, φ̇)` of the COM.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarView<T> {
    pub r: T,
    pub phi: T,
    pub r_dot: T,
    pub phi_dot: T,
}

impl<T: Scalar> ObjectState<T> {
    pub fn at_rest(x: T, y: T, psi: T) -> Self {
        Self {
            x,
            y,
            psi,
            ..Self::default()
        }
    }

    /// Resting state at polar position `(r, φ)`.
    pub fn from_polar(r: T, phi: T, psi: T) -> Self {
        let (s, c) = phi.sin_cos();
        Self::at_rest(r * c, r * s, psi)
    }

    /// State on a circle of radius `r` at angle `phi` moving with angular
    /// rate `phi_dot` about the origin.
    pub fn on_circle(r: T, phi: T, phi_dot: T, psi: T, psi_dot: T) -> Self {
        let (s, c) = phi.sin_cos();
        Self {
            x: r * c,
            y: r * s,
            psi,
            vx: -r * phi_dot * s,
            vy: r * phi_dot * c,
            psi_dot,
        }
    }

    #[inline]
    pub fn radius(&self) -> T {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn speed(&self) -> T {
        self.vx.hypot(self.vy)
    }

    /// Polar angle of the COM, or `None` within `eps` of the origin.
    pub fn phi(&self, eps: T) -> Option<T> {
        (self.radius() > eps).then(|| self.y.atan2(self.x))
    }

    pub fn is_finite(&self) -> bool {
        [self.x, self.y, self.psi, self.vx, self.vy, self.psi_dot]
            .iter()
            .all(|v| v.is_finite())
    }

    /// Euclidean distance from the COM to the polar point `(r, φ)`.
    pub fn distance_to(&self, r: T, phi: T) -> T {
        let (s, c) = phi.sin_cos();
        (self.x - r * c).hypot(self.y - r * s)
    }
}

/// Polar coordinates and their rates.
///
/// `ṙ = (x·vx + y·vy)/r` and `φ̇ = (x·vy − y·vx)/r²`; undefined at the origin.
pub fn polar_view<T: Scalar>(
    state: &ObjectState<T>,
    eps: T,
) -> Result<PolarView<T>, OriginSingularity> {
    let r = state.radius();
    if !(r > eps) {
        return Err(OriginSingularity { r: r.as_f64() });
    }
    Ok(PolarView {
        r,
        phi: state.y.atan2(state.x),
        r_dot: (state.x * state.vx + state.y * state.vy) / r,
        phi_dot: (state.x * state.vy - state.y * state.vx) / (r * r),
    })
}

/// Frame in which [`ActuatorCommand::steering_angle`] is expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SteeringFrame {
    /// Relative to the radial unit vector `r̂` (the usual case).
    #[default]
    Radial,
    /// Absolute world angle; used to leave the origin where `r̂` is undefined.
    World,
}

/// Steering angle, drive frequency and duty-gate state for one control tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatorCommand<T> {
    pub steering_angle: T,
    /// Drive frequency ω (rad/s); zero switches the motor off.
    pub frequency: T,
    pub duty_gate_open: bool,
    pub frame: SteeringFrame,
}

impl<T: Scalar> ActuatorCommand<T> {
    pub fn off() -> Self {
        Self {
            steering_angle: T::zero(),
            frequency: T::zero(),
            duty_gate_open: false,
            frame: SteeringFrame::Radial,
        }
    }

    pub fn radial(theta: T, frequency: T, gate: bool) -> Self {
        Self {
            steering_angle: wrap_angle(theta),
            frequency,
            duty_gate_open: gate,
            frame: SteeringFrame::Radial,
        }
    }

    pub fn world(angle: T, frequency: T, gate: bool) -> Self {
        Self {
            steering_angle: wrap_angle(angle),
            frequency,
            duty_gate_open: gate,
            frame: SteeringFrame::World,
        }
    }

    /// Whether the motor actually drives during this tick.
    pub fn is_driving(&self) -> bool {
        self.frequency > T::zero() && self.duty_gate_open
    }
}
