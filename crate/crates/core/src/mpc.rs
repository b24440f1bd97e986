//! Receding-horizon local planner.
//!
//! Each cycle minimizes, over a sequence of `N` commands applied for `dt` seconds each,
//!
//! ```text
//! J(u) = sum_k gamma(x_k, u_k) * dt
//!      + c_smooth * sum_k |u_{k+1} - u_k|_1
//!      + c_terminal * (dx^2 + dy^2 + heading_weight * wrap(dtheta)^2)
//!
//! gamma(x, u) = c_length * v * dt + c_map * m(x, y) + c_obstacle * o(x, k)
//! ```
//!
//! where states come from forward rollout of the single-track model, `m` is the
//! interpolated costmap and `o` the summed obstacle penalty at time `k * dt`.
//! The length term therefore carries `dt` twice.
//!
//! The solver is single-shooting projected gradient descent: central finite
//! differences for the gradient, backtracking line search that only accepts
//! strict improvements, and a box projection after each step.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::costmap::{OccupancyGrid, OCCUPIED};
use crate::kinematics::{step_unchecked, wrap_angle, ControlInput, KinematicsError, VehicleParams, VehicleState};
use crate::obstacles::{obstacle_cost, Obstacle, PhiParams};
use crate::rrt::GlobalPath;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MpcError {
    #[error("control sequence must hold at least one command")]
    EmptySequence,
    #[error("step duration must be positive, got {0}")]
    NonPositiveDt(f64),
    #[error("command {index}: {source}")]
    Command {
        index: usize,
        #[source]
        source: KinematicsError,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Commands applied for `dt` seconds each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSequence {
    commands: Vec<ControlInput>,
    dt: f64,
}

impl ControlSequence {
    pub fn new(commands: Vec<ControlInput>, dt: f64) -> Result<Self, MpcError> {
        if commands.is_empty() {
            return Err(MpcError::EmptySequence);
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(MpcError::NonPositiveDt(dt));
        }
        Ok(Self { commands, dt })
    }

    pub fn zeros(horizon: usize, dt: f64) -> Result<Self, MpcError> {
        Self::new(vec![ControlInput::default(); horizon], dt)
    }

    pub fn constant(command: ControlInput, horizon: usize, dt: f64) -> Result<Self, MpcError> {
        Self::new(vec![command; horizon], dt)
    }

    pub fn commands(&self) -> &[ControlInput] {
        &self.commands
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.commands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commands.is_empty()
    }

    /// Planning horizon `N * dt`.
    pub fn horizon(&self) -> f64 {
        self.commands.len() as f64 * self.dt
    }

    pub fn first(&self) -> ControlInput {
        self.commands[0]
    }

    pub fn validate(&self, vehicle: &VehicleParams) -> Result<(), MpcError> {
        for (index, c) in self.commands.iter().enumerate() {
            vehicle
                .check(c)
                .map_err(|source| MpcError::Command { index, source })?;
        }
        Ok(())
    }

    /// Drops the first command and repeats the last, resized to `horizon`.
    pub fn shifted(&self, horizon: usize) -> ControlSequence {
        let last = *self.commands.last().expect("sequence is never empty");
        let mut commands: Vec<ControlInput> = self.commands.iter().skip(1).copied().collect();
        commands.resize(horizon.max(1), last);
        ControlSequence {
            commands,
            dt: self.dt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MpcWeights {
    pub c_terminal: f64,
    pub c_length: f64,
    pub c_map: f64,
    pub c_obstacle: f64,
    pub c_smooth: f64,
    pub heading_weight: f64,
}

impl Default for MpcWeights {
    fn default() -> Self {
        Self {
            c_terminal: 1.0,
            c_length: 1.0,
            c_map: 0.02,
            c_obstacle: 1.0,
            c_smooth: 0.1,
            heading_weight: 1.0,
        }
    }
}

impl MpcWeights {
    fn validate(&self) -> Result<(), MpcError> {
        let all = [
            self.c_terminal,
            self.c_length,
            self.c_map,
            self.c_obstacle,
            self.c_smooth,
            self.heading_weight,
        ];
        if all.iter().all(|w| w.is_finite() && *w >= 0.0) {
            Ok(())
        } else {
            Err(MpcError::InvalidConfig("weights must be finite and non-negative".into()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MpcConfig {
    pub horizon_steps: usize,
    pub dt: f64,
    pub global_lookahead_distance: f64,
    /// Largest obstacle penalty tolerated at any state of an accepted trajectory.
    pub max_obstacle_cost: f64,
    pub optimizer_iterations: usize,
    pub fd_epsilon: f64,
    pub initial_step_length: f64,
    pub step_shrink_factor: f64,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            horizon_steps: 25,
            dt: 0.2,
            global_lookahead_distance: 3.0,
            max_obstacle_cost: 2.0,
            optimizer_iterations: 40,
            fd_epsilon: 1e-5,
            initial_step_length: 0.5,
            step_shrink_factor: 0.5,
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<(), MpcError> {
        let bad = |m: &str| Err(MpcError::InvalidConfig(m.into()));
        if self.horizon_steps == 0 {
            return bad("horizon_steps must be >= 1");
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if !(self.global_lookahead_distance > 0.0) {
            return bad("global_lookahead_distance must be positive");
        }
        if !(self.max_obstacle_cost > 0.0) {
            return bad("max_obstacle_cost must be positive");
        }
        if !(self.fd_epsilon > 0.0 && self.initial_step_length > 0.0) {
            return bad("fd_epsilon and initial_step_length must be positive");
        }
        if !(self.step_shrink_factor > 0.0 && self.step_shrink_factor < 1.0) {
            return bad("step_shrink_factor must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Environment the objective is evaluated in.
#[derive(Debug, Clone, Copy)]
pub struct CostContext<'a> {
    pub grid: &'a OccupancyGrid,
    pub obstacles: &'a [Obstacle],
    pub weights: &'a MpcWeights,
    pub phi: &'a PhiParams,
    pub vehicle: &'a VehicleParams,
}

/// Advances the target index along `path` while the vehicle is within the
/// lookahead distance of the indexed state. Never moves backwards.
pub fn select_target(
    path: &GlobalPath,
    pose: &VehicleState,
    config: &MpcConfig,
    previous_target_index: usize,
) -> (VehicleState, usize) {
    assert!(!path.is_empty(), "path must not be empty");
    let last = path.len() - 1;
    let mut i = previous_target_index.min(last);
    while i < last && pose.distance_to(&path.states[i]) <= config.global_lookahead_distance {
        i += 1;
    }
    (path.states[i], i)
}

/// States `x_0 ..= x_N` obtained by applying `u` from `x0`.
pub fn rollout(
    x0: &VehicleState,
    u: &ControlSequence,
    vehicle: &VehicleParams,
) -> Result<Vec<VehicleState>, MpcError> {
    u.validate(vehicle)?;
    Ok(rollout_unchecked(x0, &u.commands, u.dt, vehicle))
}

fn rollout_unchecked(
    x0: &VehicleState,
    commands: &[ControlInput],
    dt: f64,
    vehicle: &VehicleParams,
) -> Vec<VehicleState> {
    let mut states = Vec::with_capacity(commands.len() + 1);
    states.push(*x0);
    let mut x = *x0;
    for c in commands {
        x = step_unchecked(&x, c, dt, vehicle.wheelbase());
        states.push(x);
    }
    states
}

pub fn terminal_cost(x_n: &VehicleState, target: &VehicleState, weights: &MpcWeights) -> f64 {
    let dx = target.x() - x_n.x();
    let dy = target.y() - x_n.y();
    let dtheta = wrap_angle(target.theta() - x_n.theta());
    weights.c_terminal * (dx * dx + dy * dy + weights.heading_weight * dtheta * dtheta)
}

pub fn running_cost(
    x_k: &VehicleState,
    u_k: &ControlInput,
    k: usize,
    dt: f64,
    ctx: &CostContext<'_>,
) -> f64 {
    let w = ctx.weights;
    let length = w.c_length * u_k.v * dt;
    let map = w.c_map * ctx.grid.interpolated_cost(x_k.x(), x_k.y());
    let obstacle = if w.c_obstacle == 0.0 {
        0.0
    } else {
        w.c_obstacle * obstacle_cost(x_k, ctx.obstacles, k, dt, ctx.phi)
    };
    length + map + obstacle
}

fn smoothness(commands: &[ControlInput]) -> f64 {
    commands
        .windows(2)
        .map(|w| (w[1].v - w[0].v).abs() + (w[1].delta - w[0].delta).abs())
        .sum()
}

/// Objective value of `u` from `x0`.
pub fn total_cost(
    x0: &VehicleState,
    u: &ControlSequence,
    target: &VehicleState,
    ctx: &CostContext<'_>,
) -> Result<f64, MpcError> {
    u.validate(ctx.vehicle)?;
    Ok(cost_unchecked(x0, &u.commands, u.dt, target, ctx))
}

fn cost_unchecked(
    x0: &VehicleState,
    commands: &[ControlInput],
    dt: f64,
    target: &VehicleState,
    ctx: &CostContext<'_>,
) -> f64 {
    let mut x = *x0;
    let mut running = 0.0;
    for (k, c) in commands.iter().enumerate() {
        running += running_cost(&x, c, k, dt, ctx) * dt;
        x = step_unchecked(&x, c, dt, ctx.vehicle.wheelbase());
    }
    running + ctx.weights.c_smooth * smoothness(commands) + terminal_cost(&x, target, ctx.weights)
}

fn project(commands: &mut [ControlInput], vehicle: &VehicleParams) {
    for c in commands {
        *c = vehicle.clamp(*c);
    }
}

/// Finite-difference gradient of the objective with respect to the flattened
/// commands `[v_0, delta_0, v_1, delta_1, ...]`.
///
/// Central differences in the interior of the box; one-sided differences when a
/// perturbation would leave it.
pub fn fd_gradient(
    x0: &VehicleState,
    u: &ControlSequence,
    target: &VehicleState,
    ctx: &CostContext<'_>,
    epsilon: f64,
) -> Vec<f64> {
    let dt = u.dt;
    let n = u.commands.len();
    // Perturbing command k leaves x_0..=x_k and the running cost before k untouched.
    let states = rollout_unchecked(x0, &u.commands, dt, ctx.vehicle);
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for (k, c) in u.commands.iter().enumerate() {
        prefix.push(prefix[k] + running_cost(&states[k], c, k, dt, ctx) * dt);
    }
    let mut work = u.commands.clone();
    let mut grad = vec![0.0; 2 * n];
    let vehicle = ctx.vehicle;
    for i in 0..grad.len() {
        let k = i / 2;
        let (lo, hi) = if i % 2 == 0 {
            (0.0, vehicle.max_velocity())
        } else {
            (vehicle.min_steering_angle(), vehicle.max_steering_angle())
        };
        let original = component(&work, i);
        let can_up = original + epsilon <= hi;
        let can_down = original - epsilon >= lo;
        let mut eval = |value: f64| {
            set_component(&mut work, i, value);
            let c = prefix[k]
                + suffix_cost(&states[k], &work, k, dt, target, ctx)
                + ctx.weights.c_smooth * smoothness(&work);
            set_component(&mut work, i, original);
            c
        };
        grad[i] = match (can_up, can_down) {
            (true, true) => (eval(original + epsilon) - eval(original - epsilon)) / (2.0 * epsilon),
            (true, false) => (eval(original + epsilon) - eval(original)) / epsilon,
            (false, true) => (eval(original) - eval(original - epsilon)) / epsilon,
            (false, false) => 0.0,
        };
    }
    grad
}

/// Running cost from step `from` onwards, starting at `x_from`, plus the terminal cost.
fn suffix_cost(
    x_from: &VehicleState,
    commands: &[ControlInput],
    from: usize,
    dt: f64,
    target: &VehicleState,
    ctx: &CostContext<'_>,
) -> f64 {
    let mut x = *x_from;
    let mut running = 0.0;
    for (k, c) in commands.iter().enumerate().skip(from) {
        running += running_cost(&x, c, k, dt, ctx) * dt;
        x = step_unchecked(&x, c, dt, ctx.vehicle.wheelbase());
    }
    running + terminal_cost(&x, target, ctx.weights)
}

fn component(commands: &[ControlInput], i: usize) -> f64 {
    let c = &commands[i / 2];
    if i % 2 == 0 {
        c.v
    } else {
        c.delta
    }
}

fn set_component(commands: &mut [ControlInput], i: usize, value: f64) {
    let c = &mut commands[i / 2];
    if i % 2 == 0 {
        c.v = value;
    } else {
        c.delta = value;
    }
}

/// Result of [`optimize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Optimized {
    pub sequence: ControlSequence,
    pub cost: f64,
    pub initial_cost: f64,
    pub iterations: usize,
}

/// Projected gradient descent from `u_init`.
///
/// The returned cost never exceeds the cost of `u_init`; every returned command
/// lies inside the vehicle's box.
pub fn optimize(
    x0: &VehicleState,
    u_init: &ControlSequence,
    target: &VehicleState,
    ctx: &CostContext<'_>,
    config: &MpcConfig,
) -> Result<Optimized, MpcError> {
    u_init.validate(ctx.vehicle)?;
    let dt = u_init.dt;
    let mut best = u_init.clone();
    let initial_cost = cost_unchecked(x0, &best.commands, dt, target, ctx);
    let mut cost = initial_cost;
    let mut iterations = 0;
    let mut candidate = best.commands.clone();
    for _ in 0..config.optimizer_iterations {
        iterations += 1;
        let grad = fd_gradient(x0, &best, target, ctx, config.fd_epsilon);
        if grad.iter().all(|g| *g == 0.0) {
            break;
        }
        let mut alpha = config.initial_step_length;
        let mut accepted = None;
        for _ in 0..60 {
            for (i, g) in grad.iter().enumerate() {
                set_component(&mut candidate, i, component(&best.commands, i) - alpha * g);
            }
            project(&mut candidate, ctx.vehicle);
            let c = cost_unchecked(x0, &candidate, dt, target, ctx);
            if c < cost {
                accepted = Some(c);
                break;
            }
            alpha *= config.step_shrink_factor;
        }
        let Some(new_cost) = accepted else {
            break;
        };
        best.commands.copy_from_slice(&candidate);
        let improvement = (cost - new_cost) / cost.abs().max(f64::MIN_POSITIVE);
        cost = new_cost;
        if improvement < 1e-6 {
            break;
        }
    }
    Ok(Optimized {
        sequence: best,
        cost,
        initial_cost,
        iterations,
    })
}

/// Accepts a trajectory when no state touches occupied or out-of-map space and
/// the obstacle penalty stays within `config.max_obstacle_cost` everywhere.
pub fn validate_trajectory(
    states: &[VehicleState],
    u: &ControlSequence,
    grid: &OccupancyGrid,
    obstacles: &[Obstacle],
    config: &MpcConfig,
    phi: &PhiParams,
) -> bool {
    states.iter().enumerate().all(|(k, x)| {
        grid.interpolated_cost(x.x(), x.y()) < OCCUPIED as f64
            && obstacle_cost(x, obstacles, k, u.dt, phi) <= config.max_obstacle_cost
    })
}

/// Output of one local planning cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanStep {
    /// Command to execute now. A stop command when the trajectory is invalid.
    pub command: ControlInput,
    pub sequence: ControlSequence,
    pub valid: bool,
    pub cost: f64,
    pub target: VehicleState,
    pub target_index: usize,
}

/// Stateful receding-horizon planner: keeps the warm start, the target index
/// along the current global path and the last executed steering angle.
#[derive(Debug, Clone)]
pub struct LocalPlanner {
    config: MpcConfig,
    weights: MpcWeights,
    phi: PhiParams,
    vehicle: VehicleParams,
    warm_start: Option<ControlSequence>,
    target_index: usize,
    last_delta: f64,
}

impl LocalPlanner {
    pub fn new(
        config: MpcConfig,
        weights: MpcWeights,
        phi: PhiParams,
        vehicle: VehicleParams,
    ) -> Result<Self, MpcError> {
        config.validate()?;
        weights.validate()?;
        Ok(Self {
            config,
            weights,
            phi,
            vehicle,
            warm_start: None,
            target_index: 0,
            last_delta: 0.0,
        })
    }

    pub fn config(&self) -> &MpcConfig {
        &self.config
    }

    pub fn target_index(&self) -> usize {
        self.target_index
    }

    /// Forgets the target index, for use after the global path changes.
    pub fn reset_path(&mut self) {
        self.target_index = 0;
    }

    pub fn plan_step(
        &mut self,
        pose: &VehicleState,
        path: &GlobalPath,
        grid: &OccupancyGrid,
        obstacles: &[Obstacle],
    ) -> PlanStep {
        let (target, target_index) = select_target(path, pose, &self.config, self.target_index);
        self.target_index = target_index;

        let n = self.config.horizon_steps;
        let init = match &self.warm_start {
            Some(prev) if prev.dt == self.config.dt => prev.shifted(n),
            _ => ControlSequence::zeros(n, self.config.dt).expect("validated config"),
        };
        let ctx = CostContext {
            grid,
            obstacles,
            weights: &self.weights,
            phi: &self.phi,
            vehicle: &self.vehicle,
        };
        let result = optimize(pose, &init, &target, &ctx, &self.config)
            .expect("warm start stays inside the box");
        let states = rollout_unchecked(pose, &result.sequence.commands, result.sequence.dt, &self.vehicle);
        let valid =
            validate_trajectory(&states, &result.sequence, grid, obstacles, &self.config, &self.phi);
        let command = if valid {
            result.sequence.first()
        } else {
            ControlInput::new(0.0, self.last_delta)
        };
        self.last_delta = command.delta;
        self.warm_start = Some(result.sequence.clone());
        PlanStep {
            command,
            sequence: result.sequence,
            valid,
            cost: result.cost,
            target,
            target_index,
        }
    }
}
