//! Motion planning for a non-holonomic single-track vehicle.
//!
//! The crate is split into the pieces a planning stack needs:
//!
//! * [`kinematics`]: discrete kinematic single-track model shared by both planners.
//! * [`costmap`]: occupancy grid, obstacle inflation and map-server file I/O.
//! * [`rrt`]: global planner growing a tree of kinematically feasible arcs,
//!   with dead-end node pruning.
//! * [`obstacles`]: dynamic obstacles and their proximity penalty.
//! * [`mpc`]: receding-horizon local planner.
//! * [`sim`]: closed-loop simulator with scripted pedestrians, metrics and rendering.

pub mod costmap;
pub mod kinematics;
pub mod mpc;
pub mod obstacles;
pub mod rrt;
pub mod sim;

pub use costmap::{InflationParams, OccupancyGrid};
pub use kinematics::{ControlInput, VehicleParams, VehicleState};
pub use mpc::{ControlSequence, LocalPlanner, MpcConfig, MpcWeights};
pub use obstacles::{Obstacle, PhiParams};
pub use rrt::{GlobalPath, RrtParams, RrtPlanner};
pub use sim::{Outcome, RunLog, Scenario};
