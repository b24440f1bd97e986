#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trikeplan::costmap::{MapOrigin, OCCUPIED};
use trikeplan::sim::Pedestrian;
use trikeplan::{InflationParams, OccupancyGrid, Scenario, VehicleState};

pub fn st(x: f64, y: f64, theta: f64) -> VehicleState {
    VehicleState::new(x, y, theta).unwrap()
}

pub fn blank(width: usize, height: usize) -> OccupancyGrid {
    OccupancyGrid::filled(width, height, 0.1, MapOrigin::default(), 0).unwrap()
}

/// 50 x 50 m map with 25 random rectangles, plus a start and goal at least
/// 25 m apart that sit in open space.
pub fn random_map(seed: u64) -> (OccupancyGrid, VehicleState, VehicleState) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut map = blank(500, 500);
    for _ in 0..25 {
        let (x, y) = (rng.gen_range(0.0..50.0), rng.gen_range(0.0..50.0));
        let (w, h) = (rng.gen_range(1.0..6.0), rng.gen_range(1.0..6.0));
        map.fill_rect(x, y, x + w, y + h, OCCUPIED);
    }
    let grid = map.inflate(&InflationParams::default());
    let open = |s: &VehicleState| {
        grid.cost_at(s.x(), s.y()) == 0
            && (0..12).all(|k| {
                let a = k as f64 * std::f64::consts::PI / 6.0;
                grid.cost_at(s.x() + 3.0 * a.cos(), s.y() + 3.0 * a.sin()) == 0
            })
    };
    let mut pick = || loop {
        let s = st(
            rng.gen_range(2.0..48.0),
            rng.gen_range(2.0..48.0),
            rng.gen_range(-3.1..3.1),
        );
        if open(&s) {
            return s;
        }
    };
    loop {
        let (a, b) = (pick(), pick());
        if a.distance_to(&b) > 25.0 {
            return (grid, a, b);
        }
    }
}

/// Straight corridor `length` m long and 6 m wide, walls 0.3 m thick.
pub fn long_corridor(length: f64) -> OccupancyGrid {
    let mut map = blank((length * 10.0).round() as usize, 60);
    map.fill_rect(0.0, 0.0, length, 0.3, OCCUPIED);
    map.fill_rect(0.0, 5.7, length, 6.0, OCCUPIED);
    map
}

/// Corridor 30 x 8 m used by the closed-loop scenarios.
pub fn corridor_scenario() -> Scenario {
    let mut map = blank(300, 80);
    map.fill_rect(0.0, 0.0, 30.0, 0.5, OCCUPIED);
    map.fill_rect(0.0, 7.5, 30.0, 8.0, OCCUPIED);
    Scenario::new(map, st(2.0, 4.0, 0.0), st(27.0, 4.0, 0.0))
}

pub fn empty_scenario() -> Scenario {
    Scenario::new(blank(200, 200), st(2.0, 3.0, 0.0), st(17.0, 15.0, 1.2))
}

/// Corridor with one pedestrian crossing it ahead of the vehicle.
pub fn crossing_scenario() -> Scenario {
    let mut s = corridor_scenario();
    s.pedestrians = vec![Pedestrian::new((12.0, -4.0), vec![(12.0, 12.0)], 0.5, 0.3)];
    s
}

/// Eight pedestrians close the corridor at x = 16 from both sides.
pub fn wall_scenario() -> Scenario {
    let mut s = corridor_scenario();
    s.sim_duration_limit = 30.0;
    s.pedestrians = (0..8)
        .map(|i| {
            let y = 0.9 + i as f64 * 6.2 / 7.0;
            let from = if i < 4 { y - 8.0 } else { y + 12.0 };
            Pedestrian::new((16.0, from), vec![(16.0, y)], 1.0, 0.3)
        })
        .collect();
    s
}

/// Cup open toward the start, directly between start and goal.
pub fn cup_map() -> (OccupancyGrid, VehicleState, VehicleState) {
    let mut map = blank(400, 300);
    map.fill_rect(8.0, 17.0, 20.0, 17.3, OCCUPIED);
    map.fill_rect(8.0, 12.7, 20.0, 13.0, OCCUPIED);
    map.fill_rect(20.0, 12.7, 20.3, 17.3, OCCUPIED);
    (
        map.inflate(&InflationParams::default()),
        st(4.0, 15.0, 0.0),
        st(34.0, 15.0, 0.0),
    )
}

pub fn in_cup(s: &VehicleState) -> bool {
    (8.0..20.0).contains(&s.x()) && (13.0..17.0).contains(&s.y())
}

/// Sealed box around x in [0.5, 11.5], y in [0.5, 5.5] with the start inside.
pub fn sealed_box() -> (OccupancyGrid, VehicleState, VehicleState) {
    let mut map = blank(200, 120);
    map.fill_rect(0.5, 0.5, 11.5, 1.0, OCCUPIED);
    map.fill_rect(0.5, 5.0, 11.5, 5.5, OCCUPIED);
    map.fill_rect(0.5, 0.5, 1.0, 5.5, OCCUPIED);
    map.fill_rect(11.0, 0.5, 11.5, 5.5, OCCUPIED);
    (
        map.inflate(&InflationParams::default()),
        st(2.5, 3.0, 0.0),
        st(16.0, 9.0, 0.0),
    )
}
