//! Closed-loop simulation: global plan, local planner at a fixed control rate,
//! scripted pedestrians, replanning and run logs.

mod metrics;
mod render;
mod scenario;

pub use metrics::{export_metrics, export_path, parse_metrics, MetricsRow, METRICS_HEADER};
pub use render::render;
pub use scenario::{PedestrianSpec, Scenario, ScenarioSpec};

use std::fmt;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::costmap::{MapError, OCCUPIED};
use crate::kinematics::{step, ControlInput, KinematicsError, VehicleState};
use crate::mpc::{LocalPlanner, MpcError};
use crate::obstacles::{obstacle_cost, Obstacle};
use crate::rrt::{GlobalPath, RrtError, RrtPlanner};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario: {0}")]
    Scenario(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Rrt(#[from] RrtError),
    #[error(transparent)]
    Mpc(#[from] MpcError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error("metrics: {0}")]
    Metrics(String),
}

/// Consecutive invalid local plans that trigger a global replan.
pub const REPLAN_AFTER_INVALID: usize = 3;

/// Distance at which a pedestrian switches to its next waypoint.
pub const WAYPOINT_SWITCH_DISTANCE: f64 = 0.2;

/// Scripted disc agent walking its waypoints at constant speed.
#[derive(Debug, Clone, PartialEq)]
pub struct Pedestrian {
    pub position: (f64, f64),
    pub waypoints: Vec<(f64, f64)>,
    pub speed: f64,
    pub radius: f64,
    /// Index of the active waypoint; equal to `waypoints.len()` once done.
    pub current: usize,
}

impl Pedestrian {
    pub fn new(position: (f64, f64), waypoints: Vec<(f64, f64)>, speed: f64, radius: f64) -> Self {
        Self {
            position,
            waypoints,
            speed,
            radius,
            current: 0,
        }
    }
}

/// Moves `agent` toward its active waypoint by at most `speed * dt`. A waypoint
/// other than the last is retired once the agent is within
/// [`WAYPOINT_SWITCH_DISTANCE`] of it; the last one is walked to exactly and held.
pub fn pedestrian_step(agent: &Pedestrian, dt: f64) -> Pedestrian {
    let mut next = agent.clone();
    let Some(&(wx, wy)) = agent.waypoints.get(agent.current) else {
        return next;
    };
    let (px, py) = agent.position;
    let d = (wx - px).hypot(wy - py);
    let travel = agent.speed * dt;
    next.position = if d <= travel {
        (wx, wy)
    } else {
        (px + (wx - px) * travel / d, py + (wy - py) * travel / d)
    };
    let is_last = agent.current + 1 == agent.waypoints.len();
    let remaining = (wx - next.position.0).hypot(wy - next.position.1);
    if !is_last && remaining <= WAYPOINT_SWITCH_DISTANCE {
        next.current += 1;
    }
    next
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    GoalReached,
    Timeout,
    Collision,
    PlanningFailed,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::GoalReached => "goal_reached",
            Outcome::Timeout => "timeout",
            Outcome::Collision => "collision",
            Outcome::PlanningFailed => "planning_failed",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One control cycle. The command is the one applied from `t` to `t + dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tick {
    pub t: f64,
    pub state: VehicleState,
    pub command: ControlInput,
    /// Local plan validity; `true` on the final tick, which does not plan.
    pub valid: bool,
    pub cycle_ms: f64,
    /// Smallest distance from the vehicle position to a pedestrian's edge;
    /// infinite without pedestrians, negative when inside one.
    pub min_obstacle_dist: f64,
    /// Obstacle penalty at the current position.
    pub obstacle_cost: f64,
    /// A global replan was triggered at this tick.
    pub replan: bool,
    /// Vehicle position is on an occupied or out-of-map cell.
    pub occupied: bool,
    pub pedestrians: Vec<(f64, f64)>,
}

impl Tick {
    /// The clearance rule used to declare a collision.
    pub fn in_collision(&self) -> bool {
        self.occupied || self.min_obstacle_dist < 0.0
    }
}

#[derive(Debug, Clone)]
pub struct RunLog {
    pub ticks: Vec<Tick>,
    pub outcome: Outcome,
    /// Every global path used, the initial plan first.
    pub paths: Vec<GlobalPath>,
    /// Error of the failed global plan when the outcome is `PlanningFailed`.
    pub planning_error: Option<RrtError>,
    pub dt: f64,
}

/// Time source for planner cycle measurements.
pub trait Clock {
    fn now(&self) -> Duration;
}

/// Monotonic wall clock.
#[derive(Debug, Clone, Copy)]
pub struct WallClock(Instant);

impl WallClock {
    pub fn new() -> Self {
        Self(Instant::now())
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WallClock {
    fn now(&self) -> Duration {
        self.0.elapsed()
    }
}

/// Clock that never advances: every cycle measures 0 ms, so logs are reproducible byte for byte.
#[derive(Debug, Clone, Copy, Default)]
pub struct FrozenClock;

impl Clock for FrozenClock {
    fn now(&self) -> Duration {
        Duration::ZERO
    }
}

/// Runs `scenario` with wall-clock cycle timing.
pub fn run(scenario: &Scenario) -> Result<RunLog, SimError> {
    run_with_clock(scenario, &WallClock::new())
}

pub fn run_with_clock(scenario: &Scenario, clock: &dyn Clock) -> Result<RunLog, SimError> {
    scenario.validate()?;
    let dt = scenario.dt();
    let grid = scenario.map.inflate(&scenario.inflation);
    let threshold = scenario.rrt.occupied_threshold;
    for (name, s) in [("start", &scenario.start), ("goal", &scenario.goal)] {
        if grid.cost_at(s.x(), s.y()) >= threshold {
            return Err(SimError::Invalid(format!("{name} is not on a free cell")));
        }
    }

    let mut log = RunLog {
        ticks: Vec::new(),
        outcome: Outcome::PlanningFailed,
        paths: Vec::new(),
        planning_error: None,
        dt,
    };
    let global = |from: &VehicleState, seed_offset: u64| {
        let mut params = scenario.rrt;
        params.rng_seed = params.rng_seed.wrapping_add(seed_offset);
        RrtPlanner::new(&grid, params, scenario.vehicle)?.plan(from, &scenario.goal)
    };
    let mut tracked = match global(&scenario.start, 0) {
        Ok(path) => {
            let tracked = track_to_goal(&path, &scenario.goal);
            log.paths.push(path);
            tracked
        }
        Err(e) => {
            log.planning_error = Some(e);
            return Ok(log);
        }
    };

    let mut planner = LocalPlanner::new(
        scenario.mpc_config(),
        scenario.weights,
        scenario.phi,
        scenario.vehicle,
    )?;
    let mut state = scenario.start;
    let mut pedestrians = scenario.pedestrians.clone();
    let mut previous: Vec<(f64, f64)> = pedestrians.iter().map(|p| p.position).collect();
    let mut invalid_streak = 0;
    let mut replans = 0u64;
    let mut last_delta = 0.0;

    for k in 0u64.. {
        let t = k as f64 * dt;
        let positions: Vec<(f64, f64)> = pedestrians.iter().map(|p| p.position).collect();
        let obstacles: Vec<Obstacle> = pedestrians
            .iter()
            .zip(&previous)
            .enumerate()
            .map(|(i, (p, prev))| {
                let velocity = ((p.position.0 - prev.0) / dt, (p.position.1 - prev.1) / dt);
                Obstacle::new(i as u32, p.position, velocity, p.radius)
            })
            .collect();
        let mut tick = Tick {
            t,
            state,
            command: ControlInput::new(0.0, last_delta),
            valid: true,
            cycle_ms: 0.0,
            min_obstacle_dist: obstacles
                .iter()
                .map(|o| state.distance_to_point(o.center.0, o.center.1) - o.radius)
                .fold(f64::INFINITY, f64::min),
            obstacle_cost: obstacle_cost(&state, &obstacles, 0, dt, &scenario.phi),
            replan: false,
            occupied: grid.cost_at(state.x(), state.y()) == OCCUPIED,
            pedestrians: positions.clone(),
        };

        let terminal = if tick.in_collision() {
            Some(Outcome::Collision)
        } else if state.distance_to(&scenario.goal) <= scenario.goal_tolerance {
            Some(Outcome::GoalReached)
        } else if t >= scenario.sim_duration_limit - 1e-9 {
            Some(Outcome::Timeout)
        } else {
            None
        };
        if let Some(outcome) = terminal {
            log.ticks.push(tick);
            log.outcome = outcome;
            break;
        }

        let started = clock.now();
        let planned = planner.plan_step(&state, &tracked, &grid, &obstacles);
        tick.cycle_ms = clock.now().saturating_sub(started).as_secs_f64() * 1e3;
        tick.command = planned.command;
        tick.valid = planned.valid;
        invalid_streak = if planned.valid { 0 } else { invalid_streak + 1 };

        if invalid_streak >= REPLAN_AFTER_INVALID {
            invalid_streak = 0;
            replans += 1;
            tick.replan = true;
            match global(&state, replans) {
                Ok(path) => {
                    tracked = track_to_goal(&path, &scenario.goal);
                    log.paths.push(path);
                    planner.reset_path();
                }
                Err(e) => {
                    tick.command = ControlInput::new(0.0, last_delta);
                    log.ticks.push(tick);
                    log.planning_error = Some(e);
                    log.outcome = Outcome::PlanningFailed;
                    break;
                }
            }
        }

        last_delta = tick.command.delta;
        state = step(&state, &tick.command, dt, &scenario.vehicle)?;
        log.ticks.push(tick);
        previous = positions;
        pedestrians = pedestrians.iter().map(|p| pedestrian_step(p, dt)).collect();
    }
    Ok(log)
}

/// The planner's path with the exact goal appended, so the local planner
/// converges on the goal rather than on the last tree node.
fn track_to_goal(path: &GlobalPath, goal: &VehicleState) -> GlobalPath {
    let mut states = path.states.clone();
    if states.last() != Some(goal) {
        states.push(*goal);
    }
    GlobalPath::from_states(states)
}
