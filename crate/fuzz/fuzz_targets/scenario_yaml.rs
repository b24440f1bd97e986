#![no_main]

use libfuzzer_sys::fuzz_target;
use trikeplan::costmap::MapOrigin;
use trikeplan::sim::ScenarioSpec;
use trikeplan::OccupancyGrid;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(spec) = ScenarioSpec::parse(s) {
        let map = OccupancyGrid::filled(8, 8, 0.5, MapOrigin::default(), 0).unwrap();
        let _ = spec.with_map(map);
    }
});
