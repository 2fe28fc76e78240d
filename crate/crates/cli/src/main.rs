use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use coprl_core::env::{load_map, sample_start_goal, MazeMap};
use coprl_core::geometry::Point;
use coprl_core::harness::{self, emit_plot, ExperimentConfig, PlotKind};
use coprl_core::lower::{Backend, OracleBackend, TabularBackend, TabularConfig, ValueBackend, DEFAULT_ETA};
use coprl_core::planner::{plan, PlanRecord, PlannerConfig};

#[derive(Parser)]
#[command(
    name = "coprl",
    version,
    about = "Constrained planning over goal-conditioned local estimators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Oracle,
    Tabular,
}

#[derive(Subcommand)]
enum Command {
    /// Build or train a backend and write a snapshot.
    TrainBackend {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, value_enum)]
        backend: BackendArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ETA)]
        eta: f64,
        #[arg(long, default_value_t = 1.0)]
        grid_res: f64,
    },
    /// Plan one start/goal pair and write the plan record as JSON.
    Plan {
        #[arg(long)]
        map: PathBuf,
        /// Backend snapshot written by `train-backend`.
        #[arg(long)]
        backend: PathBuf,
        /// Cost limit; omit for an unconstrained run.
        #[arg(long)]
        k: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 1000)]
        iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Start as `x,y`; sampled from the difficulty when omitted.
        #[arg(long, value_parser = parse_point, requires = "goal")]
        start: Option<Point>,
        #[arg(long, value_parser = parse_point, requires = "start")]
        goal: Option<Point>,
        #[arg(long, default_value_t = 0.5)]
        difficulty: f64,
        #[arg(long)]
        out: PathBuf,
        /// Record wall time (makes the output run-dependent).
        #[arg(long)]
        timing: bool,
        /// Include the tree edge list in the output.
        #[arg(long)]
        tree: bool,
    },
    /// Run an experiment grid and write trials.csv and summary.csv.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a figure from a trials CSV.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_parser = parse_kind)]
        kind: PlotKind,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_point(s: &str) -> Result<Point> {
    let (x, y) = s.split_once(',').ok_or("expected x,y")?;
    let x = x.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let y = y.trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok(Point::new(x, y))
}

fn parse_kind(s: &str) -> Result<PlotKind> {
    PlotKind::parse(s).ok_or_else(|| {
        let names: Vec<_> = PlotKind::ALL.iter().map(|k| k.name()).collect();
        format!("unknown plot kind; expected one of {}", names.join(", "))
    })
}

type Result<T> = std::result::Result<T, String>;

fn read_map(path: &Path) -> Result<MazeMap> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    load_map(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    std::fs::write(path, contents).map_err(|e| format!("{}: {e}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::TrainBackend {
            map,
            backend,
            out,
            eta,
            grid_res,
        } => {
            let map = read_map(&map)?;
            let b = match backend {
                BackendArg::Oracle => {
                    Backend::Oracle(OracleBackend::build(&map, grid_res, eta).map_err(|e| e.to_string())?)
                }
                BackendArg::Tabular => {
                    let cfg = TabularConfig {
                        grid_res,
                        eta,
                        ..TabularConfig::default()
                    };
                    let t = TabularBackend::train(&map, &cfg).map_err(|e| e.to_string())?;
                    eprintln!("trained in {} sweeps", t.report().sweeps);
                    Backend::Tabular(t)
                }
            };
            b.save(&out).map_err(|e| format!("{}: {e}", out.display()))
        }
        Command::Plan {
            map,
            backend,
            k,
            alpha,
            iters,
            seed,
            start,
            goal,
            difficulty,
            out,
            timing,
            tree,
        } => {
            let map = read_map(&map)?;
            let b = Backend::load(&backend).map_err(|e| format!("{}: {e}", backend.display()))?;
            if *b.map() != map {
                return Err("the backend snapshot was built for a different map".into());
            }
            let (start, goal) = match (start, goal) {
                (Some(s), Some(g)) => (s, g),
                _ => sample_start_goal(&map, b.grid(), difficulty, seed).map_err(|e| e.to_string())?,
            };
            let cfg = PlannerConfig::constrained(k.unwrap_or(f64::INFINITY), alpha, iters, seed);
            let t0 = Instant::now();
            let outcome = plan(&b, start, goal, &cfg).map_err(|e| e.to_string())?;
            let elapsed = t0.elapsed();
            let mut record = PlanRecord::new(start, goal, outcome.best.as_ref(), &cfg);
            if timing {
                record.wall_time_ms = Some(elapsed.as_secs_f64() * 1e3);
            }
            if tree {
                record.tree = Some(outcome.tree.edges());
            }
            write_file(&out, &(record.to_json() + "\n"))?;
            if outcome.best.is_none() {
                eprintln!("no feasible path found in {iters} iterations");
            }
            Ok(())
        }
        Command::Eval { config, out } => {
            let cfg = ExperimentConfig::load(&config).map_err(|e| e.to_string())?;
            let result = harness::run_experiment(&cfg).map_err(|e| e.to_string())?;
            harness::write_results(&result, &out).map_err(|e| e.to_string())
        }
        Command::Plot { input, kind, out } => {
            let rows = harness::read_rows(&input).map_err(|e| e.to_string())?;
            let svg = emit_plot(&rows, kind).map_err(|e| e.to_string())?;
            write_file(&out, &svg)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
