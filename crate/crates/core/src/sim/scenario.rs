use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::costmap::{load_map_file, InflationParams, OccupancyGrid};
use crate::kinematics::{VehicleParams, VehicleState};
use crate::mpc::{MpcConfig, MpcWeights};
use crate::obstacles::PhiParams;
use crate::rrt::RrtParams;

use super::{Pedestrian, SimError};

/// Everything needed to run one closed-loop simulation.
#[derive(Debug, Clone)]
pub struct Scenario {
    /// Map before inflation.
    pub map: OccupancyGrid,
    pub start: VehicleState,
    pub goal: VehicleState,
    /// Distance to the goal position at which the run counts as a success.
    pub goal_tolerance: f64,
    pub vehicle: VehicleParams,
    pub rrt: RrtParams,
    /// `dt` is ignored: the loop always plans with `1 / control_frequency`.
    pub mpc: MpcConfig,
    pub weights: MpcWeights,
    pub phi: PhiParams,
    pub inflation: InflationParams,
    pub pedestrians: Vec<Pedestrian>,
    pub sim_duration_limit: f64,
    pub control_frequency: f64,
}

impl Scenario {
    /// Scenario with default parameters and no pedestrians.
    pub fn new(map: OccupancyGrid, start: VehicleState, goal: VehicleState) -> Self {
        let control_frequency = default_frequency();
        Self {
            map,
            start,
            goal,
            goal_tolerance: default_goal_tolerance(),
            vehicle: VehicleParams::default(),
            rrt: RrtParams::default(),
            mpc: MpcConfig {
                dt: 1.0 / control_frequency,
                ..MpcConfig::default()
            },
            weights: MpcWeights::default(),
            phi: PhiParams::default(),
            inflation: InflationParams::default(),
            pedestrians: Vec::new(),
            sim_duration_limit: default_duration(),
            control_frequency,
        }
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.control_frequency
    }

    /// Planner configuration with `dt` tied to the control frequency.
    pub fn mpc_config(&self) -> MpcConfig {
        MpcConfig {
            dt: self.dt(),
            ..self.mpc
        }
    }

    /// Checks rates, limits and pedestrians. Start and goal clearance is checked
    /// against the inflated map when the run begins.
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Invalid(m));
        if !(self.control_frequency.is_finite() && self.control_frequency > 0.0) {
            return bad(format!("control_frequency must be positive, got {}", self.control_frequency));
        }
        if !(self.sim_duration_limit.is_finite() && self.sim_duration_limit > 0.0) {
            return bad(format!("sim_duration_limit must be positive, got {}", self.sim_duration_limit));
        }
        if !(self.goal_tolerance.is_finite() && self.goal_tolerance > 0.0) {
            return bad(format!("goal_tolerance must be positive, got {}", self.goal_tolerance));
        }
        if !(self.inflation.inflation_radius.is_finite() && self.inflation.inflation_radius >= 0.0) {
            return bad("inflation_radius must be non-negative".into());
        }
        self.rrt.validate(&self.vehicle)?;
        self.mpc_config().validate()?;
        for (i, p) in self.pedestrians.iter().enumerate() {
            let finite = [p.position.0, p.position.1, p.speed, p.radius]
                .iter()
                .chain(p.waypoints.iter().flat_map(|w| [&w.0, &w.1]))
                .all(|v| v.is_finite());
            if !finite || p.speed < 0.0 || p.radius <= 0.0 {
                return bad(format!("pedestrian {i}: needs finite values, speed >= 0 and radius > 0"));
            }
        }
        Ok(())
    }

    /// Reads a scenario file; the map path inside it is resolved relative to the file.
    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|source| SimError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let spec = ScenarioSpec::parse(&text)?;
        spec.resolve(path.parent().unwrap_or(Path::new(".")))
    }
}

fn default_goal_tolerance() -> f64 {
    0.5
}

fn default_duration() -> f64 {
    60.0
}

fn default_frequency() -> f64 {
    5.0
}

fn default_radius() -> f64 {
    0.3
}

/// Serialized form of a pedestrian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PedestrianSpec {
    pub position: [f64; 2],
    #[serde(default)]
    pub waypoints: Vec<[f64; 2]>,
    #[serde(default)]
    pub speed: f64,
    #[serde(default = "default_radius")]
    pub radius: f64,
}

/// Scenario file contents before the map is loaded.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    /// Map metadata YAML, relative to the scenario file.
    pub map: PathBuf,
    pub start: VehicleState,
    pub goal: VehicleState,
    #[serde(default = "default_goal_tolerance")]
    pub goal_tolerance: f64,
    #[serde(default)]
    pub vehicle: VehicleParams,
    #[serde(default)]
    pub rrt: RrtParams,
    #[serde(default)]
    pub mpc: MpcConfig,
    #[serde(default)]
    pub weights: MpcWeights,
    #[serde(default)]
    pub phi: PhiParams,
    #[serde(default)]
    pub inflation: InflationParams,
    #[serde(default)]
    pub pedestrians: Vec<PedestrianSpec>,
    #[serde(default = "default_duration")]
    pub sim_duration_limit: f64,
    #[serde(default = "default_frequency")]
    pub control_frequency: f64,
}

impl ScenarioSpec {
    pub fn parse(text: &str) -> Result<Self, SimError> {
        serde_yaml::from_str(text).map_err(|e| SimError::Scenario(e.to_string()))
    }

    /// Loads the referenced map and builds a validated [`Scenario`].
    pub fn resolve(self, base_dir: &Path) -> Result<Scenario, SimError> {
        let map = load_map_file(&base_dir.join(&self.map))?;
        self.with_map(map)
    }

    pub fn with_map(self, map: OccupancyGrid) -> Result<Scenario, SimError> {
        let scenario = Scenario {
            map,
            start: self.start,
            goal: self.goal,
            goal_tolerance: self.goal_tolerance,
            vehicle: self.vehicle,
            rrt: self.rrt,
            mpc: MpcConfig {
                dt: 1.0 / self.control_frequency,
                ..self.mpc
            },
            weights: self.weights,
            phi: self.phi,
            inflation: self.inflation,
            pedestrians: self
                .pedestrians
                .into_iter()
                .map(|p| {
                    Pedestrian::new(
                        (p.position[0], p.position[1]),
                        p.waypoints.into_iter().map(|w| (w[0], w[1])).collect(),
                        p.speed,
                        p.radius,
                    )
                })
                .collect(),
            sim_duration_limit: self.sim_duration_limit,
            control_frequency: self.control_frequency,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costmap::MapOrigin;

    const MINIMAL: &str = "map: maps/empty.yaml\nstart: [1.0, 2.0, 0.0]\ngoal: [8.0, 2.0, 0.0]\n";

    fn grid() -> OccupancyGrid {
        OccupancyGrid::filled(100, 50, 0.1, MapOrigin::default(), 0).unwrap()
    }

    #[test]
    fn minimal_file_uses_defaults() {
        let spec = ScenarioSpec::parse(MINIMAL).unwrap();
        assert_eq!(spec.map, PathBuf::from("maps/empty.yaml"));
        let s = spec.with_map(grid()).unwrap();
        assert_eq!(s.control_frequency, 5.0);
        assert_eq!(s.mpc_config().dt, 0.2);
        assert_eq!(s.rrt, RrtParams::default());
        assert!(s.pedestrians.is_empty());
    }

    #[test]
    fn full_file() {
        let text = r#"
map: m.yaml
start: [1.0, 2.0, 0.0]
goal: [8.0, 2.0, 0.5]
goal_tolerance: 0.3
vehicle: {wheelbase: 1.2, max_velocity: 0.8, min_steering_angle: -0.4, max_steering_angle: 0.4}
rrt: {rng_seed: 9, steering_samples: 9, expansion_velocity: 0.8}
mpc: {horizon_steps: 30}
weights: {c_obstacle: 2.0}
phi: {phi_max: 5.0}
inflation: {inflation_radius: 1.0}
pedestrians:
  - position: [4.0, 0.0]
    waypoints: [[4.0, 4.0], [4.0, 0.0]]
    speed: 0.7
sim_duration_limit: 30
control_frequency: 10
"#;
        let s = ScenarioSpec::parse(text).unwrap().with_map(grid()).unwrap();
        assert_eq!(s.vehicle.wheelbase(), 1.2);
        assert_eq!(s.rrt.rng_seed, 9);
        assert_eq!(s.rrt.steering_samples, 9);
        assert_eq!(s.rrt.step_size, RrtParams::default().step_size);
        assert_eq!(s.mpc.horizon_steps, 30);
        assert_eq!(s.mpc_config().dt, 0.1);
        assert_eq!(s.weights.c_obstacle, 2.0);
        assert_eq!(s.weights.c_length, 1.0);
        assert_eq!(s.phi.cutoff_distance, 3.0);
        assert_eq!(s.inflation.occupied_threshold, 170);
        assert_eq!(s.pedestrians[0].radius, 0.3);
        assert_eq!(s.pedestrians[0].waypoints.len(), 2);
        assert_eq!(s.sim_duration_limit, 30.0);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(ScenarioSpec::parse("start: [0, 0, 0]\ngoal: [1, 1, 0]\n").is_err());
        assert!(ScenarioSpec::parse(&format!("{MINIMAL}bogus: 1\n")).is_err());
        assert!(ScenarioSpec::parse("map: a\nstart: [0, 0]\ngoal: [1, 1, 0]\n").is_err());
        let bad_vehicle = format!(
            "{MINIMAL}vehicle: {{wheelbase: -1, max_velocity: 1, min_steering_angle: -0.5, max_steering_angle: 0.5}}\n"
        );
        assert!(ScenarioSpec::parse(&bad_vehicle).is_err());
        let zero_rate = ScenarioSpec::parse(&format!("{MINIMAL}control_frequency: 0\n")).unwrap();
        assert!(matches!(zero_rate.with_map(grid()), Err(SimError::Invalid(_))));
        let ped = format!("{MINIMAL}pedestrians:\n  - position: [1, 1]\n    radius: 0\n");
        assert!(ScenarioSpec::parse(&ped).unwrap().with_map(grid()).is_err());
    }
}
