mod common;

use common::*;
use proptest::prelude::*;
use trikeplan::kinematics::step;
use trikeplan::mpc::{optimize, rollout, CostContext};
use trikeplan::{
    ControlSequence, GlobalPath, LocalPlanner, MpcConfig, MpcWeights, Obstacle, PhiParams,
    VehicleParams,
};

#[test]
fn replanning_follows_the_open_loop_trajectory() {
    let grid = blank(400, 400);
    let vehicle = VehicleParams::default();
    let config = MpcConfig {
        horizon_steps: 15,
        optimizer_iterations: 400,
        ..MpcConfig::default()
    };
    let weights = MpcWeights {
        c_map: 0.0,
        ..MpcWeights::default()
    };
    let goal = GlobalPath::from_states(vec![st(30.0, 22.0, 0.0)]);
    let mut planner = LocalPlanner::new(config, weights, PhiParams::default(), vehicle).unwrap();

    let x0 = st(10.0, 20.0, 0.0);
    let first = planner.plan_step(&x0, &goal, &grid, &[]);
    let open_loop = rollout(&x0, &first.sequence, &vehicle).unwrap();

    let mut x = step(&x0, &first.command, config.dt, &vehicle).unwrap();
    for (k, expected) in open_loop.iter().enumerate().skip(1).take(5) {
        assert!(
            x.distance_to(expected) <= 1e-3,
            "cycle {k}: {x:?} vs {expected:?}"
        );
        let planned = planner.plan_step(&x, &goal, &grid, &[]);
        x = step(&x, &planned.command, config.dt, &vehicle).unwrap();
    }
}

fn ctx<'a>(
    grid: &'a trikeplan::OccupancyGrid,
    obstacles: &'a [Obstacle],
    weights: &'a MpcWeights,
    phi: &'a PhiParams,
    vehicle: &'a VehicleParams,
) -> CostContext<'a> {
    CostContext {
        grid,
        obstacles,
        weights,
        phi,
        vehicle,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn obstacles_are_ignored_at_zero_weight(
        ox in 2.0f64..12.0,
        oy in -3.0f64..3.0,
        vx in -1.0f64..1.0,
        tx in 3.0f64..12.0,
        ty in -4.0f64..4.0,
        n in 2usize..12,
    ) {
        let grid = blank(200, 200);
        let vehicle = VehicleParams::default();
        let weights = MpcWeights { c_obstacle: 0.0, ..MpcWeights::default() };
        let phi = PhiParams::default();
        let obstacles = [Obstacle::new(0, (ox, oy), (vx, 0.0), 0.4)];
        let (x0, target) = (st(1.0, 0.0, 0.2), st(tx, ty, 0.0));
        let u = ControlSequence::zeros(n, 0.2).unwrap();
        let config = MpcConfig::default();
        let with = optimize(&x0, &u, &target, &ctx(&grid, &obstacles, &weights, &phi, &vehicle), &config).unwrap();
        let without = optimize(&x0, &u, &target, &ctx(&grid, &[], &weights, &phi, &vehicle), &config).unwrap();
        prop_assert_eq!(with.sequence, without.sequence);
    }

    #[test]
    fn emitted_commands_respect_the_box(
        ox in 3.0f64..10.0,
        oy in -2.0f64..2.0,
        speed in 0.0f64..1.0,
    ) {
        let grid = blank(200, 200).inflate(&Default::default());
        let vehicle = VehicleParams::default();
        let path = GlobalPath::from_states((0..12).map(|i| st(1.0 + i as f64, 10.0, 0.0)).collect());
        let mut planner = LocalPlanner::new(
            MpcConfig::default(),
            MpcWeights::default(),
            PhiParams::default(),
            vehicle,
        )
        .unwrap();
        let obstacles = [Obstacle::new(0, (ox, 10.0 + oy), (0.0, speed), 0.3)];
        let mut x = path.states[0];
        for _ in 0..5 {
            let planned = planner.plan_step(&x, &path, &grid, &obstacles);
            prop_assert!(planned.sequence.validate(&vehicle).is_ok());
            prop_assert!(vehicle.check(&planned.command).is_ok());
            x = step(&x, &planned.command, 0.2, &vehicle).unwrap();
        }
    }
}
