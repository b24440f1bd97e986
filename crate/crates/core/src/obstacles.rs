//! Dynamic obstacles and the proximity penalty used by the local planner.

use serde::{Deserialize, Serialize};

use crate::kinematics::VehicleState;

/// Disc-shaped obstacle moving with constant velocity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub id: u32,
    pub center: (f64, f64),
    pub velocity: (f64, f64),
    pub radius: f64,
}

impl Obstacle {
    pub fn new(id: u32, center: (f64, f64), velocity: (f64, f64), radius: f64) -> Self {
        Self {
            id,
            center,
            velocity,
            radius,
        }
    }

    pub fn stationary(id: u32, center: (f64, f64), radius: f64) -> Self {
        Self::new(id, center, (0.0, 0.0), radius)
    }
}

/// Predicts where an obstacle is `t` seconds after the snapshot.
pub trait MotionModel {
    fn predict(&self, obstacle: &Obstacle, t: f64) -> (f64, f64);
}

/// Straight-line extrapolation at the snapshot velocity.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConstantVelocity;

impl MotionModel for ConstantVelocity {
    fn predict(&self, obstacle: &Obstacle, t: f64) -> (f64, f64) {
        predict(obstacle, t)
    }
}

pub fn predict(obstacle: &Obstacle, t: f64) -> (f64, f64) {
    (
        obstacle.center.0 + obstacle.velocity.0 * t,
        obstacle.center.1 + obstacle.velocity.1 * t,
    )
}

/// Shape of the penalty `phi(d) = min(phi_max, 1 / d)` for `d < cutoff_distance`, 0 beyond.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhiParams {
    pub phi_max: f64,
    pub cutoff_distance: f64,
}

impl Default for PhiParams {
    fn default() -> Self {
        Self {
            phi_max: 10.0,
            cutoff_distance: 3.0,
        }
    }
}

pub fn phi(distance: f64, params: &PhiParams) -> f64 {
    if distance >= params.cutoff_distance {
        0.0
    } else if distance * params.phi_max <= 1.0 {
        params.phi_max
    } else {
        1.0 / distance
    }
}

/// Sum of `phi` over all obstacles predicted at `k * dt`, measured from the
/// obstacle surface (center distance minus radius, clamped at 0).
pub fn obstacle_cost(
    state: &VehicleState,
    obstacles: &[Obstacle],
    k: usize,
    dt: f64,
    params: &PhiParams,
) -> f64 {
    obstacle_cost_with(&ConstantVelocity, state, obstacles, k, dt, params)
}

pub fn obstacle_cost_with<M: MotionModel + ?Sized>(
    model: &M,
    state: &VehicleState,
    obstacles: &[Obstacle],
    k: usize,
    dt: f64,
    params: &PhiParams,
) -> f64 {
    let t = k as f64 * dt;
    obstacles
        .iter()
        .map(|o| {
            let (ox, oy) = model.predict(o, t);
            let d = (state.distance_to_point(ox, oy) - o.radius).max(0.0);
            phi(d, params)
        })
        .sum()
}

/// Smallest surface distance from a point to any obstacle at its snapshot position.
pub fn min_clearance(x: f64, y: f64, obstacles: &[Obstacle]) -> Option<f64> {
    obstacles
        .iter()
        .map(|o| (x - o.center.0).hypot(y - o.center.1) - o.radius)
        .min_by(f64::total_cmp)
}
