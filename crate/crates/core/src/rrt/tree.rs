use std::collections::HashMap;

use crate::kinematics::{wrap_angle, VehicleState};

use super::RrtError;

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub state: VehicleState,
    pub parent: Option<NodeId>,
    /// Steering angle of the arc from the parent; 0 for the root.
    pub steering_used: f64,
    pub children: Vec<NodeId>,
    /// Children not (yet) marked dead-end.
    pub live_children: usize,
    pub expanded: bool,
    pub dead_end: bool,
}

/// Search tree grown by the global planner.
///
/// Nodes are never removed. Dead-end nodes stay in the tree but are excluded from
/// nearest-neighbor queries when pruning is enabled.
#[derive(Debug, Clone)]
pub struct Tree {
    nodes: Vec<TreeNode>,
    bucket_size: f64,
    buckets: HashMap<(i64, i64), Vec<NodeId>>,
    // coarse index for nearest-neighbor queries
    coarse: HashMap<(i64, i64), Vec<NodeId>>,
    coarse_min: (i64, i64),
    coarse_max: (i64, i64),
}

/// Cell size of the nearest-neighbor index in meters.
const COARSE_CELL: f64 = 2.0;

impl Tree {
    /// Creates a tree holding only `root`. `bucket_size` sizes the spatial hash
    /// used for duplicate detection.
    pub fn new(root: VehicleState, bucket_size: f64) -> Self {
        let mut tree = Self {
            nodes: Vec::new(),
            bucket_size,
            buckets: HashMap::new(),
            coarse: HashMap::new(),
            coarse_min: (i64::MAX, i64::MAX),
            coarse_max: (i64::MIN, i64::MIN),
        };
        tree.push(TreeNode {
            state: root,
            parent: None,
            steering_used: 0.0,
            children: Vec::new(),
            live_children: 0,
            expanded: false,
            dead_end: false,
        });
        tree
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    /// True once the root has been marked dead-end: nothing is left to expand.
    pub fn is_exhausted(&self) -> bool {
        self.nodes[0].dead_end
    }

    fn bucket_of(&self, x: f64, y: f64) -> (i64, i64) {
        (
            (x / self.bucket_size).floor() as i64,
            (y / self.bucket_size).floor() as i64,
        )
    }

    fn push(&mut self, node: TreeNode) -> NodeId {
        let id = self.nodes.len();
        let key = self.bucket_of(node.state.x(), node.state.y());
        self.buckets.entry(key).or_default().push(id);
        let c = coarse_cell(node.state.x(), node.state.y());
        self.coarse.entry(c).or_default().push(id);
        self.coarse_min = (self.coarse_min.0.min(c.0), self.coarse_min.1.min(c.1));
        self.coarse_max = (self.coarse_max.0.max(c.0), self.coarse_max.1.max(c.1));
        self.nodes.push(node);
        id
    }

    /// Inserts `state` as a child of `parent` and returns its id.
    pub fn insert_child(&mut self, parent: NodeId, state: VehicleState, steering: f64) -> NodeId {
        let id = self.push(TreeNode {
            state,
            parent: Some(parent),
            steering_used: steering,
            children: Vec::new(),
            live_children: 0,
            expanded: false,
            dead_end: false,
        });
        let p = &mut self.nodes[parent];
        p.children.push(id);
        p.live_children += 1;
        id
    }

    pub(crate) fn set_expanded(&mut self, id: NodeId) {
        self.nodes[id].expanded = true;
    }

    /// Whether a node already sits within `radius` of `state` with a heading
    /// closer than `heading_tolerance`.
    pub fn has_duplicate(&self, state: &VehicleState, radius: f64, heading_tolerance: f64) -> bool {
        let (bx, by) = self.bucket_of(state.x(), state.y());
        let reach = (radius / self.bucket_size).ceil() as i64;
        for dx in -reach..=reach {
            for dy in -reach..=reach {
                let Some(ids) = self.buckets.get(&(bx + dx, by + dy)) else {
                    continue;
                };
                for &id in ids {
                    let other = &self.nodes[id].state;
                    if other.distance_to(state) <= radius
                        && wrap_angle(other.theta() - state.theta()).abs() < heading_tolerance
                    {
                        return true;
                    }
                }
            }
        }
        false
    }

    /// Node closest in `(x, y)` to `point`. Ties go to the lowest id.
    ///
    /// With `skip_dead_ends`, dead-end nodes are not candidates and an error is
    /// returned when every node is dead. Searches rings of index cells outward
    /// from the point; the answer always equals [`Tree::nearest_linear`].
    pub fn nearest(&self, point: (f64, f64), skip_dead_ends: bool) -> Result<NodeId, RrtError> {
        let (cx, cy) = coarse_cell(point.0, point.1);
        let (lo, hi) = (self.coarse_min, self.coarse_max);
        // rings beyond this one lie outside the occupied index range
        let last_ring = [cx - lo.0, hi.0 - cx, cy - lo.1, hi.1 - cy]
            .into_iter()
            .max()
            .unwrap_or(0)
            .max(0);
        let mut best: Option<(f64, NodeId)> = None;
        for r in 0..=last_ring {
            for (bx, by) in ring(cx, cy, r) {
                if bx < lo.0 || bx > hi.0 || by < lo.1 || by > hi.1 {
                    continue;
                }
                let Some(ids) = self.coarse.get(&(bx, by)) else {
                    continue;
                };
                for &id in ids {
                    let node = &self.nodes[id];
                    if skip_dead_ends && node.dead_end {
                        continue;
                    }
                    let d2 = squared_distance(node, point);
                    if best.is_none_or(|(b, bid)| d2 < b || (d2 == b && id < bid)) {
                        best = Some((d2, id));
                    }
                }
            }
            // every cell in ring r + 1 is at least r cells away from the point
            if let Some((b, _)) = best {
                let bound = r as f64 * COARSE_CELL;
                if b < bound * bound {
                    break;
                }
            }
        }
        best.map(|(_, id)| id).ok_or(RrtError::NoLiveNodes)
    }

    /// Reference linear-scan version of [`Tree::nearest`].
    pub fn nearest_linear(&self, point: (f64, f64), skip_dead_ends: bool) -> Result<NodeId, RrtError> {
        let mut best: Option<(f64, NodeId)> = None;
        for (id, node) in self.nodes.iter().enumerate() {
            if skip_dead_ends && node.dead_end {
                continue;
            }
            let d2 = squared_distance(node, point);
            if best.is_none_or(|(b, _)| d2 < b) {
                best = Some((d2, id));
            }
        }
        best.map(|(_, id)| id).ok_or(RrtError::NoLiveNodes)
    }

    /// Marks `id` dead-end and walks up the tree: every expanded ancestor left
    /// without live children is marked as well.
    ///
    /// Does nothing unless `id` is expanded with zero live children.
    pub fn mark_dead_ends(&mut self, id: NodeId) {
        let mut current = id;
        loop {
            let node = &mut self.nodes[current];
            if node.dead_end || !node.expanded || node.live_children > 0 {
                return;
            }
            node.dead_end = true;
            let Some(parent) = node.parent else {
                return;
            };
            let p = &mut self.nodes[parent];
            p.live_children -= 1;
            current = parent;
        }
    }

    /// States from the root to `id`, with the steering of each edge.
    pub fn branch(&self, id: NodeId) -> (Vec<VehicleState>, Vec<f64>) {
        let mut states = Vec::new();
        let mut steering = Vec::new();
        let mut current = Some(id);
        while let Some(c) = current {
            let node = &self.nodes[c];
            states.push(node.state);
            if node.parent.is_some() {
                steering.push(node.steering_used);
            }
            current = node.parent;
        }
        states.reverse();
        steering.reverse();
        (states, steering)
    }
}

fn coarse_cell(x: f64, y: f64) -> (i64, i64) {
    (
        (x / COARSE_CELL).floor() as i64,
        (y / COARSE_CELL).floor() as i64,
    )
}

fn squared_distance(node: &TreeNode, point: (f64, f64)) -> f64 {
    let dx = node.state.x() - point.0;
    let dy = node.state.y() - point.1;
    dx * dx + dy * dy
}

/// Cells at Chebyshev distance exactly `r` from `(cx, cy)`.
fn ring(cx: i64, cy: i64, r: i64) -> impl Iterator<Item = (i64, i64)> {
    let side = (-r..=r).flat_map(move |i| [(cx + i, cy - r), (cx + i, cy + r)]);
    let inner = (-r + 1..r).flat_map(move |j| [(cx - r, cy + j), (cx + r, cy + j)]);
    let single = (r == 0).then_some((cx, cy));
    single
        .into_iter()
        .chain(side.filter(move |_| r > 0))
        .chain(inner)
}
