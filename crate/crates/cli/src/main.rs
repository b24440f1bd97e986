use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use trikeplan::costmap::{load_map_file, write_map};
use trikeplan::sim::{self, export_metrics, export_path, render};
use trikeplan::{InflationParams, Outcome, RrtPlanner, Scenario};

#[derive(Parser)]
#[command(name = "trikeplan", version, about = "Global and local planning for a single-track vehicle")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan a global path only and report its length and the planning time.
    PlanGlobal {
        scenario: PathBuf,
        /// Overrides the planner seed from the scenario.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the path states as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the closed loop until the goal, a collision, a planning failure or the time limit.
    Simulate {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Per-tick metrics.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Inflate a map and write the cost grid as a PGM image.
    InflateMap {
        map: PathBuf,
        #[arg(long)]
        radius: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), String> {
    std::fs::write(path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn load(path: &Path, seed: Option<u64>) -> Result<Scenario, String> {
    let mut scenario = Scenario::load(path).map_err(|e| e.to_string())?;
    if let Some(seed) = seed {
        scenario.rrt.rng_seed = seed;
    }
    Ok(scenario)
}

fn plan_global(path: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<Outcome, String> {
    let scenario = load(path, seed)?;
    let grid = scenario.map.inflate(&scenario.inflation);
    let planner =
        RrtPlanner::new(&grid, scenario.rrt, scenario.vehicle).map_err(|e| e.to_string())?;
    let started = Instant::now();
    let report = planner.plan_report(&scenario.start, &scenario.goal);
    let elapsed = started.elapsed();
    match report.result {
        Ok(global) => {
            println!(
                "path length: {:.3} m ({} states)\nwall time: {:.3} ms ({} iterations, {} nodes)",
                global.length(),
                global.len(),
                elapsed.as_secs_f64() * 1e3,
                report.iterations,
                report.tree.len()
            );
            if let Some(out) = out {
                write(out, export_path(&global))?;
            }
            Ok(Outcome::GoalReached)
        }
        Err(e) => {
            println!("wall time: {:.3} ms", elapsed.as_secs_f64() * 1e3);
            eprintln!("{e}");
            Ok(Outcome::PlanningFailed)
        }
    }
}

fn simulate(
    path: &Path,
    seed: Option<u64>,
    svg: Option<&Path>,
    csv: Option<&Path>,
) -> Result<Outcome, String> {
    let scenario = load(path, seed)?;
    let log = sim::run(&scenario).map_err(|e| e.to_string())?;
    if let Some(svg) = svg {
        write(svg, render(&log, &scenario))?;
    }
    if let Some(csv) = csv {
        write(csv, export_metrics(&log))?;
    }
    let mut cycles: Vec<f64> = log.ticks.iter().map(|t| t.cycle_ms).filter(|&c| c > 0.0).collect();
    cycles.sort_by(f64::total_cmp);
    let end = log.ticks.last().map_or(0.0, |t| t.t);
    println!(
        "outcome: {} after {end:.1} s simulated, {} ticks, {} replans",
        log.outcome,
        log.ticks.len(),
        log.ticks.iter().filter(|t| t.replan).count()
    );
    if !cycles.is_empty() {
        println!(
            "cycle ms: median {:.1}, max {:.1}",
            cycles[cycles.len() / 2],
            cycles[cycles.len() - 1]
        );
    }
    if let Some(e) = &log.planning_error {
        eprintln!("{e}");
    }
    Ok(log.outcome)
}

fn inflate_map(map: &Path, radius: f64, out: &Path) -> Result<Outcome, String> {
    if !(radius.is_finite() && radius >= 0.0) {
        return Err(format!("radius must be non-negative, got {radius}"));
    }
    let grid = load_map_file(map).map_err(|e| e.to_string())?;
    let inflated = grid.inflate(&InflationParams {
        inflation_radius: radius,
        ..InflationParams::default()
    });
    let name = out.file_name().map_or("map.pgm".into(), |n| n.to_string_lossy());
    let (pgm, _) = write_map(&inflated, &name);
    write(out, pgm)?;
    println!("{} x {} cells written to {}", inflated.width(), inflated.height(), out.display());
    Ok(Outcome::GoalReached)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::PlanGlobal { scenario, seed, out } => plan_global(scenario, *seed, out.as_deref()),
        Command::Simulate {
            scenario,
            seed,
            svg,
            csv,
        } => simulate(scenario, *seed, svg.as_deref(), csv.as_deref()),
        Command::InflateMap { map, radius, out } => inflate_map(map, *radius, out),
    };
    match result {
        Ok(Outcome::GoalReached) => ExitCode::SUCCESS,
        Ok(outcome) => {
            eprintln!("{outcome}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
