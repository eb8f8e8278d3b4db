use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use cejulia::julia::JuliaMethod;
use cejulia_cli::commands::{self, OccupancySource};
use cejulia_cli::config::{DBound, MapSpec, RunConfig, ScheduleSpec};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "cejulia", version, about = "Porosity and dimension experiments for Collet-Eckmann Julia sets")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Map as numerator@denominator coefficients in ascending order, e.g. `-2,0,1` for z^2-2.
    #[arg(long, global = true, allow_hyphen_values = true)]
    map: Option<MapSpec>,
    #[arg(long, global = true, default_value_t = 0.05)]
    delta: f64,
    /// Critical-point bound for good times: `auto` (nu N_f) or an integer.
    #[arg(long = "D", global = true, default_value = "auto")]
    d: DBound,
    #[arg(long, global = true)]
    nmax: Option<usize>,
    #[arg(long, global = true, default_value_t = 10)]
    depth: u32,
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Shrinking schedule `a,p` for b_j = a / j^p.
    #[arg(long, global = true, default_value = "0.25,2")]
    schedule: ScheduleSpec,
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Inverse,
    Escape,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Mean,
    Directional,
    Box,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the Julia set; write a point list and a PBM occupancy grid.
    Render {
        #[arg(long, default_value_t = 200_000)]
        count: usize,
        #[arg(long, value_enum, default_value = "inverse")]
        method: Method,
        /// Point list path (`-` for stdout).
        #[arg(long)]
        points: Option<PathBuf>,
        #[arg(long)]
        pbm: Option<PathBuf>,
    },
    /// Collet-Eckmann rate at each critical point.
    Ce,
    /// Shadow density, good times and diameter halving along sampled orbits.
    Goodtimes {
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 2000)]
        shadow_n: usize,
        /// Comma-separated deltas tried in order; defaults to --delta.
        #[arg(long, value_delimiter = ',')]
        deltas: Vec<f64>,
        #[arg(long, default_value_t = 150)]
        diam_nmax: usize,
        /// Pull back complement holes with this tau.
        #[arg(long)]
        holes: Option<f64>,
    },
    /// Mean, directional or box porosity of a rendered or supplied set.
    Porosity {
        #[arg(long, value_enum, default_value = "box")]
        mode: Mode,
        /// PBM file or point list (`-` for stdin); defaults to rendering --map.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 200_000)]
        count: usize,
        #[arg(long, default_value_t = 400)]
        points: usize,
        #[arg(long, default_value_t = 0.125)]
        p2: f64,
        #[arg(long, default_value_t = 0.25)]
        alpha: f64,
        #[arg(long = "N")]
        big_n: Option<u32>,
    },
    /// Box counts, Minkowski fit and the porosity bound.
    Dimension {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 200_000)]
        count: usize,
        #[arg(long)]
        fit_min: Option<u32>,
        #[arg(long)]
        fit_max: Option<u32>,
        #[arg(long, default_value_t = 0.1)]
        tolerance: f64,
    },
    /// Escape time against distance to the Julia set.
    Holder {
        #[arg(long, default_value_t = 500)]
        samples: usize,
        #[arg(long, default_value_t = 200_000)]
        count: usize,
    },
    /// Blaschke-product and box-tree oracles.
    Verify {
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 5)]
        max_degree: usize,
        #[arg(long, default_value_t = 1e-2)]
        grid_step: f64,
        #[arg(long, default_value_t = 8)]
        tree_depth: u32,
        /// Test hook: lower the Blaschke bound by this much.
        #[arg(long, default_value_t = 0.0, hide = true)]
        corrupt_bound: f64,
    },
}

fn run(cli: Cli) -> Result<bool> {
    let g = cli.global;
    let cfg = RunConfig {
        map: g.map,
        delta: g.delta,
        d: g.d,
        n_max: g.nmax,
        depth: g.depth,
        seed: g.seed,
        schedule: g.schedule,
        out: g.out,
    };
    cfg.validate()?;
    let report = match cli.command {
        Command::Render { count, method, points, pbm } => {
            let method = match method {
                Method::Inverse => JuliaMethod::InverseIteration,
                Method::Escape => JuliaMethod::EscapeBoundary,
            };
            commands::render(&cfg, &commands::RenderArgs { count, method, points_path: points, pbm_path: pbm })?
        }
        Command::Ce => commands::ce(&cfg)?,
        Command::Goodtimes { samples, shadow_n, deltas, diam_nmax, holes } => {
            let args = commands::GoodTimesArgs {
                samples,
                shadow_n,
                deltas,
                diam_n_max: diam_nmax,
                holes,
                ..Default::default()
            };
            commands::goodtimes(&cfg, &args)?
        }
        Command::Porosity { mode, input, count, points, p2, alpha, big_n } => {
            let mode = match mode {
                Mode::Mean => commands::PorosityMode::Mean,
                Mode::Directional => commands::PorosityMode::Directional,
                Mode::Box => commands::PorosityMode::Box,
            };
            let source = OccupancySource::from_input(input, count);
            commands::porosity(&cfg, &commands::PorosityArgs { mode, source, points, p2, alpha, big_n })?
        }
        Command::Dimension { input, count, fit_min, fit_max, tolerance } => {
            let args = commands::DimensionArgs {
                source: OccupancySource::from_input(input, count),
                n_min: fit_min,
                n_max: fit_max,
                tolerance,
                ..Default::default()
            };
            commands::dimension(&cfg, &args)?
        }
        Command::Holder { samples, count } => commands::holder(&cfg, &commands::HolderArgs { samples, count })?,
        Command::Verify { trials, max_degree, grid_step, tree_depth, corrupt_bound } => {
            let args = commands::VerifyArgs { trials, max_degree, grid_step, tree_depth, corrupt_bound, ..Default::default() };
            commands::verify(&cfg, &args)?
        }
    };
    let (csv, json) = report.write(&cfg.out)?;
    eprintln!("wrote {} and {}", csv.display(), json.display());
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for v in &report.violations {
        eprintln!("violation: {v}");
    }
    Ok(report.ok())
}

fn main() -> ExitCode {
    if let Some(n) = std::env::var("CEJULIA_WORKERS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // only fails if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
