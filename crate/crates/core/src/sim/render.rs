use std::fmt::Write;

use crate::costmap::OCCUPIED;

use super::{RunLog, Scenario};

const PIXELS_PER_METER: f64 = 20.0;
const MAX_PIXELS: f64 = 2000.0;

struct Bounds {
    min_x: f64,
    min_y: f64,
    max_x: f64,
    max_y: f64,
}

impl Bounds {
    fn add(&mut self, (x, y): (f64, f64)) {
        self.min_x = self.min_x.min(x);
        self.min_y = self.min_y.min(y);
        self.max_x = self.max_x.max(x);
        self.max_y = self.max_y.max(y);
    }
}

fn points<I: IntoIterator<Item = (f64, f64)>>(pts: I) -> String {
    let mut s = String::new();
    for (i, (x, y)) in pts.into_iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{x:.3},{y:.3}");
    }
    s
}

/// SVG of a run. Drawing coordinates are world meters; the y axis is flipped
/// by a top-level transform so north is up.
pub fn render(log: &RunLog, scenario: &Scenario) -> String {
    let map = &scenario.map;
    let res = map.resolution();
    let origin = map.origin();
    let (w, h) = map.extent();

    let mut b = Bounds {
        min_x: f64::INFINITY,
        min_y: f64::INFINITY,
        max_x: f64::NEG_INFINITY,
        max_y: f64::NEG_INFINITY,
    };
    let (s, c) = origin.yaw.sin_cos();
    for (lx, ly) in [(0.0, 0.0), (w, 0.0), (0.0, h), (w, h)] {
        b.add((origin.x + c * lx - s * ly, origin.y + s * lx + c * ly));
    }
    for t in &log.ticks {
        b.add(t.state.position());
        t.pedestrians.iter().for_each(|p| b.add(*p));
    }
    b.add(scenario.goal.position());
    let margin = 0.5;
    let (vx, vy) = (b.min_x - margin, b.min_y - margin);
    let (vw, vh) = (b.max_x - b.min_x + 2.0 * margin, b.max_y - b.min_y + 2.0 * margin);
    let scale = PIXELS_PER_METER.min(MAX_PIXELS / vw.max(vh));

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="{:.3} {:.3} {:.3} {:.3}">"#,
        vw * scale,
        vh * scale,
        vx,
        -(vy + vh),
        vw,
        vh
    );
    let _ = writeln!(
        out,
        "<style>.occupied{{fill:#222}} .global-path{{fill:none;stroke:#3465a4;stroke-width:0.06}} \
         .vehicle-trace{{fill:none;stroke:#cc0000;stroke-width:0.08}} \
         .pedestrian-trace{{fill:none;stroke:#4e9a06;stroke-width:0.05;stroke-dasharray:0.2 0.1}}</style>"
    );
    let _ = writeln!(out, r#"<g transform="scale(1,-1)">"#);
    let _ = writeln!(
        out,
        r#"<rect x="{vx:.3}" y="{vy:.3}" width="{vw:.3}" height="{vh:.3}" fill="white"/>"#
    );

    // occupied cells, merged into horizontal runs
    let _ = writeln!(
        out,
        r#"<g id="map" transform="translate({:.6},{:.6}) rotate({:.6})">"#,
        origin.x,
        origin.y,
        origin.yaw.to_degrees()
    );
    for row in 0..map.height() {
        let mut col = 0;
        while col < map.width() {
            if map.cell(col, row) != Some(OCCUPIED) {
                col += 1;
                continue;
            }
            let start = col;
            while col < map.width() && map.cell(col, row) == Some(OCCUPIED) {
                col += 1;
            }
            let _ = writeln!(
                out,
                r#"<rect class="occupied" x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}"/>"#,
                start as f64 * res,
                row as f64 * res,
                (col - start) as f64 * res,
                res
            );
        }
    }
    let _ = writeln!(out, "</g>");

    for path in &log.paths {
        let _ = writeln!(
            out,
            r#"<polyline class="global-path" points="{}"/>"#,
            points(path.states.iter().map(|s| s.position()))
        );
    }

    let n_peds = log.ticks.first().map_or(0, |t| t.pedestrians.len());
    for i in 0..n_peds {
        let _ = writeln!(
            out,
            r#"<polyline class="pedestrian-trace" points="{}"/>"#,
            points(log.ticks.iter().filter_map(|t| t.pedestrians.get(i).copied()))
        );
    }
    if let Some(last) = log.ticks.last() {
        for (p, agent) in last.pedestrians.iter().zip(&scenario.pedestrians) {
            let _ = writeln!(
                out,
                r##"<circle class="pedestrian" cx="{:.3}" cy="{:.3}" r="{:.3}" fill="#73d216"/>"##,
                p.0, p.1, agent.radius
            );
        }
    }

    let _ = writeln!(
        out,
        r#"<polyline class="vehicle-trace" points="{}"/>"#,
        points(log.ticks.iter().map(|t| t.state.position()))
    );
    for t in log.ticks.iter().filter(|t| t.replan) {
        let _ = writeln!(
            out,
            r##"<circle class="replan" cx="{:.3}" cy="{:.3}" r="0.25" fill="none" stroke="#f57900" stroke-width="0.08"/>"##,
            t.state.x(),
            t.state.y()
        );
    }
    let (gx, gy) = scenario.goal.position();
    let _ = writeln!(
        out,
        r##"<circle class="goal" cx="{gx:.3}" cy="{gy:.3}" r="{:.3}" fill="none" stroke="#75507b" stroke-width="0.06"/>"##,
        scenario.goal_tolerance
    );
    if let Some(last) = log.ticks.last() {
        let (x, y) = last.state.position();
        let heading = (x + 0.6 * last.state.theta().cos(), y + 0.6 * last.state.theta().sin());
        let _ = writeln!(
            out,
            r##"<g class="vehicle"><circle cx="{x:.3}" cy="{y:.3}" r="0.3" fill="#cc0000"/><line x1="{x:.3}" y1="{y:.3}" x2="{:.3}" y2="{:.3}" stroke="#cc0000" stroke-width="0.08"/></g>"##,
            heading.0,
            heading.1
        );
    }
    let _ = writeln!(out, "</g>\n</svg>");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costmap::{MapOrigin, OccupancyGrid};
    use crate::kinematics::{ControlInput, VehicleState};
    use crate::sim::{Outcome, Pedestrian, Tick};

    fn tick(t: f64, x: f64, replan: bool) -> Tick {
        Tick {
            t,
            state: VehicleState::new(x, 2.0, 0.0).unwrap(),
            command: ControlInput::default(),
            valid: true,
            cycle_ms: 0.0,
            min_obstacle_dist: 1.0,
            obstacle_cost: 0.0,
            replan,
            occupied: false,
            pedestrians: vec![(4.0, 1.0 + t)],
        }
    }

    fn scenario() -> Scenario {
        let mut map = OccupancyGrid::filled(80, 40, 0.1, MapOrigin::default(), 0).unwrap();
        map.fill_rect(0.0, 0.0, 8.0, 0.25, OCCUPIED);
        let mut s = Scenario::new(
            map,
            VehicleState::new(1.0, 2.0, 0.0).unwrap(),
            VehicleState::new(7.0, 2.0, 0.0).unwrap(),
        );
        s.pedestrians = vec![Pedestrian::new((4.0, 1.0), vec![], 0.0, 0.3)];
        s
    }

    fn log(ticks: Vec<Tick>) -> RunLog {
        RunLog {
            ticks,
            outcome: Outcome::Timeout,
            paths: vec![],
            planning_error: None,
            dt: 0.2,
        }
    }

    fn count_class(doc: &roxmltree::Document, class: &str) -> usize {
        doc.descendants()
            .filter(|n| n.attribute("class") == Some(class))
            .count()
    }

    #[test]
    fn single_tick_has_one_vehicle_marker() {
        let svg = render(&log(vec![tick(0.0, 1.0, false)]), &scenario());
        let doc = roxmltree::Document::parse(&svg).unwrap();
        assert_eq!(count_class(&doc, "vehicle"), 1);
        assert_eq!(count_class(&doc, "replan"), 0);
    }

    #[test]
    fn rows_are_merged_and_replans_marked() {
        let ticks = vec![tick(0.0, 1.0, false), tick(0.2, 1.2, true), tick(0.4, 1.4, false)];
        let svg = render(&log(ticks), &scenario());
        let doc = roxmltree::Document::parse(&svg).unwrap();
        // three occupied rows (centers 0.05, 0.15, 0.25), one run each
        assert_eq!(count_class(&doc, "occupied"), 3);
        assert_eq!(count_class(&doc, "replan"), 1);
        assert_eq!(count_class(&doc, "pedestrian-trace"), 1);
        let trace = doc
            .descendants()
            .find(|n| n.attribute("class") == Some("vehicle-trace"))
            .unwrap();
        assert_eq!(trace.attribute("points"), Some("1.000,2.000 1.200,2.000 1.400,2.000"));
    }

    #[test]
    fn empty_log_is_well_formed() {
        let svg = render(&log(vec![]), &scenario());
        let doc = roxmltree::Document::parse(&svg).unwrap();
        assert_eq!(count_class(&doc, "vehicle"), 0);
    }
}
