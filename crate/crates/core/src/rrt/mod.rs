//! Non-holonomic RRT global planner.
//!
//! Each expansion fans a fixed number of constant-steering arcs out of the
//! selected node (a cone of reachable states in front of the vehicle). Nodes
//! that cannot spawn any collision-free child are marked dead-end, and so is
//! every expanded ancestor whose children have all died. With pruning enabled,
//! dead-end nodes are never returned by the nearest-neighbor search.
//!
//! The steering sweep is `min + (i / steering_samples) * range` for
//! `i in 0..steering_samples`, so the upper steering limit itself is never
//! sampled.

mod sampler;
mod tree;

pub use sampler::{sample_free, ConstantSampler, FreeSpaceSampler, Sampler};
pub use tree::{NodeId, Tree, TreeNode};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::costmap::OccupancyGrid;
use crate::kinematics::{integrate_arc, wrap_angle, ControlInput, KinematicsError, VehicleParams, VehicleState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RrtError {
    #[error("start state lies in occupied space")]
    StartInCollision,
    #[error("goal state lies in occupied space")]
    GoalInCollision,
    #[error("search tree exhausted after {iterations} iterations: every node is a dead end")]
    Exhausted { iterations: usize },
    #[error("no path within {iterations} iterations")]
    IterationBudget { iterations: usize },
    #[error("every node in the tree is a dead end")]
    NoLiveNodes,
    #[error("map has no free space to sample")]
    NoFreeSpace,
    #[error("node {0} was already expanded")]
    AlreadyExpanded(NodeId),
    #[error("node {0} is a dead end")]
    DeadEnd(NodeId),
    #[error("invalid planner parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RrtParams {
    /// Number of steering angles tried per expansion.
    pub steering_samples: usize,
    /// Duration of each tree edge in seconds.
    pub step_size: f64,
    pub integration_step_size: f64,
    pub expansion_velocity: f64,
    pub goal_position_tolerance: f64,
    pub goal_heading_tolerance: f64,
    pub goal_bias: f64,
    pub max_iterations: usize,
    pub rng_seed: u64,
    /// Cells at or above this cost block tree edges.
    pub occupied_threshold: u8,
    /// Exclude dead-end nodes from nearest-neighbor search.
    pub dead_end_pruning: bool,
}

impl Default for RrtParams {
    fn default() -> Self {
        Self {
            steering_samples: 7,
            step_size: 2.5,
            integration_step_size: 0.1,
            expansion_velocity: 1.0,
            goal_position_tolerance: 1.0,
            goal_heading_tolerance: 0.6,
            goal_bias: 0.1,
            max_iterations: 50_000,
            rng_seed: 0,
            occupied_threshold: 170,
            dead_end_pruning: true,
        }
    }
}

impl RrtParams {
    pub fn validate(&self, vehicle: &VehicleParams) -> Result<(), RrtError> {
        let bad = |m: String| Err(RrtError::InvalidParams(m));
        if self.steering_samples < 2 {
            return bad(format!("steering_samples must be >= 2, got {}", self.steering_samples));
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return bad(format!("step_size must be positive, got {}", self.step_size));
        }
        if !(self.integration_step_size > 0.0 && self.integration_step_size <= self.step_size) {
            return bad(format!(
                "integration_step_size must lie in (0, step_size], got {}",
                self.integration_step_size
            ));
        }
        if !(self.expansion_velocity > 0.0 && self.expansion_velocity <= vehicle.max_velocity()) {
            return bad(format!(
                "expansion_velocity must lie in (0, max_velocity], got {}",
                self.expansion_velocity
            ));
        }
        if !(self.goal_position_tolerance > 0.0 && self.goal_heading_tolerance > 0.0) {
            return bad("goal tolerances must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.goal_bias) {
            return bad(format!("goal_bias must lie in [0, 1], got {}", self.goal_bias));
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be >= 1".into());
        }
        Ok(())
    }

    /// Steering angle of sample `i`.
    pub fn steering_angle(&self, i: usize, vehicle: &VehicleParams) -> f64 {
        vehicle.min_steering_angle()
            + (i as f64 / self.steering_samples as f64) * vehicle.steering_range()
    }
}

/// Constant command and integration settings shared by every edge of a path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub velocity: f64,
    pub duration: f64,
    pub integration_step: f64,
}

/// Ordered states from the start to the goal region.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GlobalPath {
    pub states: Vec<VehicleState>,
    /// Steering of edge `i` (from `states[i]` to `states[i + 1]`), when known.
    pub steering: Vec<f64>,
    pub edge: Option<EdgeSpec>,
}

impl GlobalPath {
    /// A path from bare states, without edge information.
    pub fn from_states(states: Vec<VehicleState>) -> Self {
        Self {
            states,
            steering: Vec::new(),
            edge: None,
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Polyline length through the states.
    pub fn length(&self) -> f64 {
        self.states.windows(2).map(|w| w[0].distance_to(&w[1])).sum()
    }
}

/// Receives planner events; used for instrumentation.
pub trait PlanObserver {
    fn nearest_selected(&mut self, _tree: &Tree, _id: NodeId) {}
    fn expanded(&mut self, _tree: &Tree, _parent: NodeId, _children: &[NodeId]) {}
}

impl PlanObserver for () {}

/// Full record of a planning run.
#[derive(Debug)]
pub struct PlanReport {
    pub result: Result<GlobalPath, RrtError>,
    pub tree: Tree,
    pub iterations: usize,
}

/// Expands `parent` with one arc per steering sample.
///
/// A child is inserted only if every intermediate integration state lies on a
/// cell below `params.occupied_threshold` and no existing node sits within half
/// a cell with a similar heading. The parent is marked expanded either way.
pub fn extend_children(
    tree: &mut Tree,
    parent: NodeId,
    grid: &OccupancyGrid,
    params: &RrtParams,
    vehicle: &VehicleParams,
) -> Result<Vec<NodeId>, RrtError> {
    let node = tree.node(parent);
    if node.dead_end {
        return Err(RrtError::DeadEnd(parent));
    }
    if node.expanded {
        return Err(RrtError::AlreadyExpanded(parent));
    }
    let origin = node.state;
    let duplicate_radius = 0.5 * grid.resolution();
    let mut inserted = Vec::new();
    for i in 0..params.steering_samples {
        let delta = params.steering_angle(i, vehicle);
        let control = ControlInput::new(params.expansion_velocity, delta);
        let arc = integrate_arc(
            &origin,
            &control,
            params.step_size,
            params.integration_step_size,
            vehicle,
        )?;
        if arc
            .iter()
            .any(|s| grid.cost_at(s.x(), s.y()) >= params.occupied_threshold)
        {
            continue;
        }
        let end = *arc.last().expect("arc is never empty");
        if tree.has_duplicate(&end, duplicate_radius, params.goal_heading_tolerance) {
            continue;
        }
        inserted.push(tree.insert_child(parent, end, delta));
    }
    tree.set_expanded(parent);
    Ok(inserted)
}

/// Follows parent links from `id` to the root.
pub fn extract_path(tree: &Tree, id: NodeId, params: &RrtParams) -> GlobalPath {
    let (states, steering) = tree.branch(id);
    GlobalPath {
        states,
        steering,
        edge: Some(EdgeSpec {
            velocity: params.expansion_velocity,
            duration: params.step_size,
            integration_step: params.integration_step_size,
        }),
    }
}

fn reaches_goal(state: &VehicleState, goal: &VehicleState, params: &RrtParams) -> bool {
    state.distance_to(goal) <= params.goal_position_tolerance
        && wrap_angle(state.theta() - goal.theta()).abs() <= params.goal_heading_tolerance
}

/// Global planner bound to one map and vehicle.
#[derive(Debug, Clone)]
pub struct RrtPlanner<'g> {
    grid: &'g OccupancyGrid,
    params: RrtParams,
    vehicle: VehicleParams,
}

impl<'g> RrtPlanner<'g> {
    pub fn new(
        grid: &'g OccupancyGrid,
        params: RrtParams,
        vehicle: VehicleParams,
    ) -> Result<Self, RrtError> {
        params.validate(&vehicle)?;
        Ok(Self {
            grid,
            params,
            vehicle,
        })
    }

    pub fn params(&self) -> &RrtParams {
        &self.params
    }

    /// Plans with the seeded free-space sampler.
    pub fn plan(&self, start: &VehicleState, goal: &VehicleState) -> Result<GlobalPath, RrtError> {
        self.plan_report(start, goal).result
    }

    pub fn plan_report(&self, start: &VehicleState, goal: &VehicleState) -> PlanReport {
        match FreeSpaceSampler::new(self.grid, goal, &self.params) {
            Ok(mut sampler) => self.plan_with(start, goal, &mut sampler, &mut ()),
            Err(e) => PlanReport {
                result: Err(e),
                tree: Tree::new(*start, self.grid.resolution()),
                iterations: 0,
            },
        }
    }

    /// Runs the sample / nearest / extend loop with a caller-supplied sampler.
    ///
    /// Re-selecting a node that was already expanded skips the extension but
    /// still consumes an iteration.
    pub fn plan_with<S: Sampler + ?Sized, O: PlanObserver + ?Sized>(
        &self,
        start: &VehicleState,
        goal: &VehicleState,
        sampler: &mut S,
        observer: &mut O,
    ) -> PlanReport {
        let mut tree = Tree::new(*start, self.grid.resolution());
        let mut iterations = 0;
        let result = self.grow(&mut tree, &mut iterations, goal, sampler, observer);
        PlanReport {
            result,
            tree,
            iterations,
        }
    }

    fn grow<S: Sampler + ?Sized, O: PlanObserver + ?Sized>(
        &self,
        tree: &mut Tree,
        iterations: &mut usize,
        goal: &VehicleState,
        sampler: &mut S,
        observer: &mut O,
    ) -> Result<GlobalPath, RrtError> {
        let p = &self.params;
        let start = tree.node(tree.root()).state;
        if self.grid.cost_at(start.x(), start.y()) >= p.occupied_threshold {
            return Err(RrtError::StartInCollision);
        }
        if self.grid.cost_at(goal.x(), goal.y()) >= p.occupied_threshold {
            return Err(RrtError::GoalInCollision);
        }
        if reaches_goal(&start, goal, p) {
            return Ok(extract_path(tree, tree.root(), p));
        }
        while *iterations < p.max_iterations {
            if tree.is_exhausted() {
                return Err(RrtError::Exhausted {
                    iterations: *iterations,
                });
            }
            *iterations += 1;
            let q_rand = sampler.sample()?;
            let nearest = tree.nearest(q_rand, p.dead_end_pruning)?;
            observer.nearest_selected(tree, nearest);
            if tree.node(nearest).expanded {
                continue;
            }
            let children = extend_children(tree, nearest, self.grid, p, &self.vehicle)?;
            observer.expanded(tree, nearest, &children);
            if children.is_empty() {
                tree.mark_dead_ends(nearest);
                continue;
            }
            if let Some(&hit) = children
                .iter()
                .find(|&&c| reaches_goal(&tree.node(c).state, goal, p))
            {
                return Ok(extract_path(tree, hit, p));
            }
        }
        if tree.is_exhausted() {
            return Err(RrtError::Exhausted {
                iterations: *iterations,
            });
        }
        Err(RrtError::IterationBudget {
            iterations: *iterations,
        })
    }
}

/// Convenience wrapper around [`RrtPlanner::plan`].
pub fn plan(
    start: &VehicleState,
    goal: &VehicleState,
    grid: &OccupancyGrid,
    params: &RrtParams,
    vehicle: &VehicleParams,
) -> Result<GlobalPath, RrtError> {
    RrtPlanner::new(grid, *params, *vehicle)?.plan(start, goal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costmap::{MapOrigin, OCCUPIED};

    fn st(x: f64, y: f64, t: f64) -> VehicleState {
        VehicleState::new(x, y, t).unwrap()
    }

    fn open_map() -> OccupancyGrid {
        OccupancyGrid::filled(200, 200, 0.1, MapOrigin::default(), 0).unwrap()
    }

    fn vehicle() -> VehicleParams {
        VehicleParams::new(1.53, 1.0, -0.5, 0.5).unwrap()
    }

    #[test]
    fn five_children_in_a_cone() {
        let grid = open_map();
        let params = RrtParams {
            steering_samples: 5,
            ..RrtParams::default()
        };
        let v = vehicle();
        let mut tree = Tree::new(st(5.0, 10.0, 0.0), grid.resolution());
        let ids = extend_children(&mut tree, 0, &grid, &params, &v).unwrap();
        assert_eq!(ids.len(), 5);
        assert!(tree.node(0).expanded);
        assert_eq!(tree.node(0).live_children, 5);
        for (i, &id) in ids.iter().enumerate() {
            let delta = -0.5 + (i as f64 / 5.0) * 1.0;
            let expect = *integrate_arc(
                &st(5.0, 10.0, 0.0),
                &ControlInput::new(1.0, delta),
                params.step_size,
                0.1,
                &v,
            )
            .unwrap()
            .last()
            .unwrap();
            let node = tree.node(id);
            assert_eq!(node.state, expect);
            assert_eq!(node.steering_used, delta);
            assert!(node.state.x() > 5.0);
        }
        // y ordered from right turn to left turn
        let ys: Vec<f64> = ids.iter().map(|&i| tree.node(i).state.y()).collect();
        assert!(ys.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn two_samples_use_extremes() {
        let grid = open_map();
        let params = RrtParams {
            steering_samples: 2,
            ..RrtParams::default()
        };
        let mut tree = Tree::new(st(5.0, 10.0, 0.0), grid.resolution());
        let ids = extend_children(&mut tree, 0, &grid, &params, &vehicle()).unwrap();
        assert_eq!(ids.len(), 2);
        assert_eq!(tree.node(ids[0]).steering_used, -0.5);
        assert_eq!(tree.node(ids[1]).steering_used, 0.0);
    }

    #[test]
    fn wall_blocks_all_children() {
        let mut grid = open_map();
        grid.fill_rect(5.5, 0.0, 6.0, 20.0, OCCUPIED);
        let mut tree = Tree::new(st(5.0, 10.0, 0.0), grid.resolution());
        let ids = extend_children(&mut tree, 0, &grid, &RrtParams::default(), &vehicle()).unwrap();
        assert!(ids.is_empty());
        assert!(tree.node(0).expanded);
        tree.mark_dead_ends(0);
        assert!(tree.is_exhausted());
    }

    #[test]
    fn extend_rejects_expanded_or_dead() {
        let grid = open_map();
        let mut tree = Tree::new(st(5.0, 10.0, 0.0), grid.resolution());
        extend_children(&mut tree, 0, &grid, &RrtParams::default(), &vehicle()).unwrap();
        assert_eq!(
            extend_children(&mut tree, 0, &grid, &RrtParams::default(), &vehicle()),
            Err(RrtError::AlreadyExpanded(0))
        );
    }

    #[test]
    fn duplicates_are_discarded() {
        let grid = open_map();
        let params = RrtParams::default();
        let mut tree = Tree::new(st(5.0, 10.0, 0.0), grid.resolution());
        // a node already sitting where the straight child will land
        let straight = params.steering_angle(3, &vehicle());
        assert!(straight.abs() < 0.1);
        let end = *integrate_arc(
            &st(5.0, 10.0, 0.0),
            &ControlInput::new(1.0, straight),
            params.step_size,
            0.1,
            &vehicle(),
        )
        .unwrap()
        .last()
        .unwrap();
        tree.insert_child(0, end, 0.0);
        let other = tree.insert_child(0, st(5.0, 12.0, 0.0), 0.0);
        let ids = extend_children(&mut tree, other, &grid, &params, &vehicle()).unwrap();
        assert_eq!(ids.len(), 7);
        let mut t2 = Tree::new(st(5.0, 10.0, 0.0), grid.resolution());
        t2.insert_child(0, end, 0.0);
        // root is not expanded yet; expanding it again must skip the duplicate
        let ids = extend_children(&mut t2, 0, &grid, &params, &vehicle()).unwrap();
        assert_eq!(ids.len(), 6);
    }

    #[test]
    fn goal_within_one_arc() {
        let grid = open_map();
        let v = vehicle();
        let params = RrtParams {
            goal_bias: 0.5,
            ..RrtParams::default()
        };
        let start = st(5.0, 10.0, 0.0);
        let goal = st(5.0 + params.step_size, 10.0, 0.0);
        let report = RrtPlanner::new(&grid, params, v).unwrap().plan_report(&start, &goal);
        let path = report.result.unwrap();
        assert!(path.len() <= 2);
        assert!(report.iterations <= 3);
        assert_eq!(path.states[0], start);
    }

    #[test]
    fn start_at_goal_is_single_state() {
        let grid = open_map();
        let start = st(5.0, 10.0, 0.0);
        let path = plan(&start, &start, &grid, &RrtParams::default(), &vehicle()).unwrap();
        assert_eq!(path.states, vec![start]);
        assert!(path.steering.is_empty());
    }

    #[test]
    fn collisions_reported() {
        let mut grid = open_map();
        grid.fill_rect(0.0, 0.0, 2.0, 2.0, OCCUPIED);
        let p = RrtParams::default();
        assert_eq!(
            plan(&st(1.0, 1.0, 0.0), &st(10.0, 10.0, 0.0), &grid, &p, &vehicle()),
            Err(RrtError::StartInCollision)
        );
        assert_eq!(
            plan(&st(10.0, 10.0, 0.0), &st(1.0, 1.0, 0.0), &grid, &p, &vehicle()),
            Err(RrtError::GoalInCollision)
        );
    }

    #[test]
    fn params_validation() {
        let v = vehicle();
        let ok = RrtParams::default();
        assert!(ok.validate(&v).is_ok());
        for bad in [
            RrtParams { steering_samples: 1, ..ok },
            RrtParams { step_size: 0.0, ..ok },
            RrtParams { integration_step_size: ok.step_size + 0.5, ..ok },
            RrtParams { expansion_velocity: 3.0, ..ok },
            RrtParams { goal_bias: 1.5, ..ok },
            RrtParams { max_iterations: 0, ..ok },
            RrtParams { goal_heading_tolerance: 0.0, ..ok },
        ] {
            assert!(bad.validate(&v).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn budget_exceeded() {
        let grid = open_map();
        let params = RrtParams {
            max_iterations: 3,
            goal_bias: 0.0,
            ..RrtParams::default()
        };
        let r = plan(&st(1.0, 1.0, 0.0), &st(19.0, 19.0, 3.0), &grid, &params, &vehicle());
        assert_eq!(r, Err(RrtError::IterationBudget { iterations: 3 }));
    }
}
