//! Replays the checked-in fuzz corpus through the parser entry points.

use std::path::PathBuf;

use trikeplan::costmap::{decode_pgm, encode_pgm, load_map, MapMetadata, MapOrigin};
use trikeplan::sim::{parse_metrics, ScenarioSpec};
use trikeplan::OccupancyGrid;

fn seeds(target: &str) -> Vec<Vec<u8>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<Vec<u8>> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|entry| std::fs::read(entry.unwrap().path()).unwrap())
        .collect();
    assert!(!out.is_empty(), "no seeds for {target}");
    out.sort();
    out
}

#[test]
fn pgm_seeds() {
    let mut decoded = 0;
    for data in seeds("pgm_decode") {
        if let Ok(pgm) = decode_pgm(&data) {
            decoded += 1;
            assert_eq!(decode_pgm(&encode_pgm(&pgm)).unwrap(), pgm);
        }
    }
    assert!(decoded > 0);
}

#[test]
fn metadata_seeds() {
    let parsed = seeds("map_metadata")
        .iter()
        .filter(|d| MapMetadata::parse(std::str::from_utf8(d).unwrap()).is_ok())
        .count();
    assert!(parsed > 0);
}

#[test]
fn load_map_seeds() {
    for data in seeds("load_map") {
        let split = data.iter().position(|&b| b == 0).unwrap();
        let meta = std::str::from_utf8(&data[..split]).unwrap();
        let grid = load_map(&data[split + 1..], meta).unwrap();
        assert_eq!(grid.cells().len(), grid.width() * grid.height());
    }
}

#[test]
fn scenario_seeds() {
    let mut accepted = 0;
    for data in seeds("scenario_yaml") {
        if let Ok(spec) = ScenarioSpec::parse(std::str::from_utf8(&data).unwrap()) {
            let map = OccupancyGrid::filled(8, 8, 0.5, MapOrigin::default(), 0).unwrap();
            accepted += spec.with_map(map).is_ok() as usize;
        }
    }
    assert!(accepted > 0);
}

#[test]
fn metrics_seeds() {
    let results: Vec<bool> = seeds("metrics_csv")
        .iter()
        .map(|d| parse_metrics(std::str::from_utf8(d).unwrap()).is_ok())
        .collect();
    assert!(results.contains(&true) && results.contains(&false));
}
