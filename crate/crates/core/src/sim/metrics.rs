use serde::Deserialize;

use crate::rrt::GlobalPath;

use super::{RunLog, SimError};

pub const METRICS_HEADER: [&str; 10] = [
    "t",
    "x",
    "y",
    "theta",
    "v",
    "delta",
    "cycle_ms",
    "min_obstacle_dist",
    "obstacle_cost",
    "replan",
];

/// One parsed line of a metrics CSV.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct MetricsRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub delta: f64,
    pub cycle_ms: f64,
    pub min_obstacle_dist: f64,
    pub obstacle_cost: f64,
    pub replan: u8,
}

fn fixed(value: f64, places: usize) -> String {
    if value.is_infinite() {
        return if value > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let s = format!("{value:.places$}");
    // avoid "-0.000000" so equal values always print identically
    if s.trim_start_matches('-').bytes().all(|b| b == b'0' || b == b'.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

fn to_string(buf: Vec<u8>) -> String {
    String::from_utf8(buf).expect("csv output is ascii")
}

/// Per-tick metrics as CSV: six decimals for state and command, three for timing.
pub fn export_metrics(log: &RunLog) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(METRICS_HEADER).expect("in-memory write");
    for tick in &log.ticks {
        w.write_record([
            fixed(tick.t, 6),
            fixed(tick.state.x(), 6),
            fixed(tick.state.y(), 6),
            fixed(tick.state.theta(), 6),
            fixed(tick.command.v, 6),
            fixed(tick.command.delta, 6),
            fixed(tick.cycle_ms, 3),
            fixed(tick.min_obstacle_dist, 6),
            fixed(tick.obstacle_cost, 6),
            u8::from(tick.replan).to_string(),
        ])
        .expect("in-memory write");
    }
    to_string(w.into_inner().expect("in-memory flush"))
}

pub fn parse_metrics(text: &str) -> Result<Vec<MetricsRow>, SimError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| SimError::Metrics(e.to_string()))?;
    if header.iter().ne(METRICS_HEADER) {
        return Err(SimError::Metrics(format!("unexpected header {header:?}")));
    }
    r.deserialize()
        .map(|row| row.map_err(|e| SimError::Metrics(e.to_string())))
        .collect()
}

/// Global path states as `x,y,theta` CSV.
pub fn export_path(path: &GlobalPath) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["x", "y", "theta"]).expect("in-memory write");
    for s in &path.states {
        w.write_record([fixed(s.x(), 6), fixed(s.y(), 6), fixed(s.theta(), 6)])
            .expect("in-memory write");
    }
    to_string(w.into_inner().expect("in-memory flush"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{ControlInput, VehicleState};
    use crate::sim::{Outcome, Tick};

    fn log(n: usize) -> RunLog {
        RunLog {
            ticks: (0..n)
                .map(|k| Tick {
                    t: k as f64 * 0.2,
                    state: VehicleState::new(k as f64 / 3.0, -1.25, 0.1 * k as f64).unwrap(),
                    command: ControlInput::new(0.5, -0.123_456_789),
                    valid: true,
                    cycle_ms: 12.345_678,
                    min_obstacle_dist: if k == 0 { f64::INFINITY } else { 1.5 },
                    obstacle_cost: 0.25,
                    replan: k == 3,
                    occupied: false,
                    pedestrians: vec![],
                })
                .collect(),
            outcome: Outcome::Timeout,
            paths: vec![],
            planning_error: None,
            dt: 0.2,
        }
    }

    #[test]
    fn empty_log_is_header_only() {
        let csv = export_metrics(&log(0));
        assert_eq!(csv, format!("{}\n", METRICS_HEADER.join(",")));
        assert!(parse_metrics(&csv).unwrap().is_empty());
    }

    #[test]
    fn ten_ticks_eleven_lines() {
        assert_eq!(export_metrics(&log(10)).lines().count(), 11);
    }

    #[test]
    fn round_trip_to_printed_precision() {
        let l = log(10);
        let rows = parse_metrics(&export_metrics(&l)).unwrap();
        assert_eq!(rows.len(), 10);
        for (row, tick) in rows.iter().zip(&l.ticks) {
            assert!((row.t - tick.t).abs() <= 5e-7);
            assert!((row.x - tick.state.x()).abs() <= 5e-7);
            assert!((row.theta - tick.state.theta()).abs() <= 5e-7);
            assert!((row.delta - tick.command.delta).abs() <= 5e-7);
            assert!((row.cycle_ms - tick.cycle_ms).abs() <= 5e-4);
            assert_eq!(row.min_obstacle_dist, tick.min_obstacle_dist);
            assert_eq!(row.replan == 1, tick.replan);
        }
    }

    #[test]
    fn fixed_formatting() {
        assert_eq!(fixed(-0.0000001, 6), "0.000000");
        assert_eq!(fixed(1.0 / 3.0, 6), "0.333333");
        assert_eq!(fixed(-2.5, 3), "-2.500");
        assert_eq!(fixed(f64::INFINITY, 6), "inf");
    }

    #[test]
    fn rejects_wrong_header() {
        assert!(parse_metrics("a,b\n1,2\n").is_err());
        let bad_row = format!("{}\n1,2\n", METRICS_HEADER.join(","));
        assert!(parse_metrics(&bad_row).is_err());
    }

    #[test]
    fn path_csv() {
        let p = GlobalPath::from_states(vec![
            VehicleState::new(0.0, 0.0, 0.0).unwrap(),
            VehicleState::new(1.5, 0.25, 0.5).unwrap(),
        ]);
        assert_eq!(
            export_path(&p),
            "x,y,theta\n0.000000,0.000000,0.000000\n1.500000,0.250000,0.500000\n"
        );
    }
}
