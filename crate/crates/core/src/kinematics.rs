//! Discrete kinematic single-track (bicycle) model.
//!
//! Both planners advance the vehicle with the same forward Euler update:
//!
//! ```text
//! x'     = x + v * dt * cos(theta)
//! y'     = y + v * dt * sin(theta)
//! theta' = wrap(theta + v * dt * tan(delta) / L)
//! ```
//!
//! The position update uses the heading *before* the step. `L` is the wheelbase.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinematicsError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("velocity {v} outside [0, {max}]")]
    VelocityOutOfBounds { v: f64, max: f64 },
    #[error("steering angle {delta} outside [{min}, {max}]")]
    SteeringOutOfBounds { delta: f64, min: f64, max: f64 },
    #[error("invalid vehicle parameters: {0}")]
    InvalidParams(String),
    #[error("turning radius is infinite for zero steering")]
    ZeroSteering,
}

/// Maps an angle into the half-open interval `(-pi, pi]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let r = angle.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Pose of the vehicle. The heading is kept normalized to `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct VehicleState {
    x: f64,
    y: f64,
    theta: f64,
}

impl VehicleState {
    /// Builds a state, wrapping `theta`. Fails on non-finite components.
    pub fn new(x: f64, y: f64, theta: f64) -> Result<Self, KinematicsError> {
        if !(x.is_finite() && y.is_finite() && theta.is_finite()) {
            return Err(KinematicsError::NonFinite("state"));
        }
        Ok(Self {
            x,
            y,
            theta: wrap_angle(theta),
        })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn position(&self) -> (f64, f64) {
        (self.x, self.y)
    }

    /// Euclidean distance between the positions of two states.
    pub fn distance_to(&self, other: &VehicleState) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn distance_to_point(&self, x: f64, y: f64) -> f64 {
        (self.x - x).hypot(self.y - y)
    }
}

impl TryFrom<[f64; 3]> for VehicleState {
    type Error = KinematicsError;

    fn try_from(v: [f64; 3]) -> Result<Self, Self::Error> {
        VehicleState::new(v[0], v[1], v[2])
    }
}

impl From<VehicleState> for [f64; 3] {
    fn from(s: VehicleState) -> Self {
        [s.x, s.y, s.theta]
    }
}

/// Velocity and front-wheel steering command.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    pub v: f64,
    pub delta: f64,
}

impl ControlInput {
    pub const fn new(v: f64, delta: f64) -> Self {
        Self { v, delta }
    }
}

/// Physical limits of the vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawVehicleParams")]
pub struct VehicleParams {
    wheelbase: f64,
    max_velocity: f64,
    min_steering_angle: f64,
    max_steering_angle: f64,
}

#[derive(Deserialize)]
struct RawVehicleParams {
    wheelbase: f64,
    max_velocity: f64,
    min_steering_angle: f64,
    max_steering_angle: f64,
}

impl TryFrom<RawVehicleParams> for VehicleParams {
    type Error = KinematicsError;

    fn try_from(r: RawVehicleParams) -> Result<Self, Self::Error> {
        VehicleParams::new(
            r.wheelbase,
            r.max_velocity,
            r.min_steering_angle,
            r.max_steering_angle,
        )
    }
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            wheelbase: 1.53,
            max_velocity: 1.0,
            min_steering_angle: -0.5,
            max_steering_angle: 0.5,
        }
    }
}

impl VehicleParams {
    pub fn new(
        wheelbase: f64,
        max_velocity: f64,
        min_steering_angle: f64,
        max_steering_angle: f64,
    ) -> Result<Self, KinematicsError> {
        let all = [wheelbase, max_velocity, min_steering_angle, max_steering_angle];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(KinematicsError::NonFinite("vehicle parameters"));
        }
        if wheelbase <= 0.0 {
            return Err(KinematicsError::InvalidParams(format!(
                "wheelbase must be positive, got {wheelbase}"
            )));
        }
        if max_velocity <= 0.0 {
            return Err(KinematicsError::InvalidParams(format!(
                "max_velocity must be positive, got {max_velocity}"
            )));
        }
        if min_steering_angle >= max_steering_angle {
            return Err(KinematicsError::InvalidParams(format!(
                "min_steering_angle {min_steering_angle} must be below max_steering_angle {max_steering_angle}"
            )));
        }
        if min_steering_angle <= -FRAC_PI_2 || max_steering_angle >= FRAC_PI_2 {
            return Err(KinematicsError::InvalidParams(
                "steering limits must lie strictly inside (-pi/2, pi/2)".into(),
            ));
        }
        Ok(Self {
            wheelbase,
            max_velocity,
            min_steering_angle,
            max_steering_angle,
        })
    }

    pub fn wheelbase(&self) -> f64 {
        self.wheelbase
    }

    pub fn max_velocity(&self) -> f64 {
        self.max_velocity
    }

    pub fn min_steering_angle(&self) -> f64 {
        self.min_steering_angle
    }

    pub fn max_steering_angle(&self) -> f64 {
        self.max_steering_angle
    }

    pub fn steering_range(&self) -> f64 {
        self.max_steering_angle - self.min_steering_angle
    }

    /// Checks a command against the velocity and steering box.
    pub fn check(&self, control: &ControlInput) -> Result<(), KinematicsError> {
        if !(control.v.is_finite() && control.delta.is_finite()) {
            return Err(KinematicsError::NonFinite("control"));
        }
        if control.v < 0.0 || control.v > self.max_velocity {
            return Err(KinematicsError::VelocityOutOfBounds {
                v: control.v,
                max: self.max_velocity,
            });
        }
        if control.delta < self.min_steering_angle || control.delta > self.max_steering_angle {
            return Err(KinematicsError::SteeringOutOfBounds {
                delta: control.delta,
                min: self.min_steering_angle,
                max: self.max_steering_angle,
            });
        }
        Ok(())
    }

    /// Clamps a command into the box.
    pub fn clamp(&self, control: ControlInput) -> ControlInput {
        ControlInput {
            v: control.v.clamp(0.0, self.max_velocity),
            delta: control
                .delta
                .clamp(self.min_steering_angle, self.max_steering_angle),
        }
    }
}

/// Advances `state` by one Euler step of length `dt`.
pub fn step(
    state: &VehicleState,
    control: &ControlInput,
    dt: f64,
    params: &VehicleParams,
) -> Result<VehicleState, KinematicsError> {
    if !dt.is_finite() {
        return Err(KinematicsError::NonFinite("dt"));
    }
    if dt <= 0.0 {
        return Err(KinematicsError::NonPositiveStep(dt));
    }
    params.check(control)?;
    Ok(step_unchecked(state, control, dt, params.wheelbase))
}

/// Euler step without validation. Callers guarantee the inputs are admissible.
#[inline]
pub(crate) fn step_unchecked(
    state: &VehicleState,
    control: &ControlInput,
    dt: f64,
    wheelbase: f64,
) -> VehicleState {
    let travel = control.v * dt;
    let (sin, cos) = state.theta.sin_cos();
    VehicleState {
        x: state.x + travel * cos,
        y: state.y + travel * sin,
        theta: wrap_angle(state.theta + travel * control.delta.tan() / wheelbase),
    }
}

/// Number of integration steps used to cover `duration`, tolerant to
/// round-off in `duration / integration_step`.
pub(crate) fn arc_step_count(duration: f64, integration_step: f64) -> usize {
    let ratio = duration / integration_step;
    let n = (ratio - 1e-9 * ratio.max(1.0)).ceil();
    (n as usize).max(1)
}

/// Integrates a constant command for `duration` seconds.
///
/// Returns the intermediate states (the start state excluded). The final step
/// may be shorter than `integration_step` so that the last state lies exactly
/// `duration` seconds ahead.
pub fn integrate_arc(
    state: &VehicleState,
    control: &ControlInput,
    duration: f64,
    integration_step: f64,
    params: &VehicleParams,
) -> Result<Vec<VehicleState>, KinematicsError> {
    if !(duration.is_finite() && integration_step.is_finite()) {
        return Err(KinematicsError::NonFinite("duration"));
    }
    if duration <= 0.0 {
        return Err(KinematicsError::NonPositiveStep(duration));
    }
    if integration_step <= 0.0 || integration_step > duration {
        return Err(KinematicsError::NonPositiveStep(integration_step));
    }
    params.check(control)?;

    let n = arc_step_count(duration, integration_step);
    let mut out = Vec::with_capacity(n);
    let mut current = *state;
    for i in 0..n {
        let dt = if i + 1 == n {
            duration - integration_step * (n - 1) as f64
        } else {
            integration_step
        };
        current = step_unchecked(&current, control, dt, params.wheelbase);
        out.push(current);
    }
    Ok(out)
}

/// Turning radius `L / tan(|delta|)` for a non-zero steering angle.
pub fn turning_radius(delta: f64, params: &VehicleParams) -> Result<f64, KinematicsError> {
    if !delta.is_finite() {
        return Err(KinematicsError::NonFinite("delta"));
    }
    if delta == 0.0 {
        return Err(KinematicsError::ZeroSteering);
    }
    Ok(params.wheelbase / delta.abs().tan())
}
