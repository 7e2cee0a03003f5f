//! `warpgeo`: distances, volumes, convergence and Hausdorff experiments on
//! the warped products `S² ×_f S¹`.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver error, 4 invariant
//! failure (the report lists the witnesses).

mod commands;
mod config;
mod pairs;
mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use commands::{DistArgs, Failure};
use config::{parse_grid, ExperimentConfig, Format, Preset};

#[derive(Debug, Parser)]
#[command(name = "warpgeo", version, about = "Numerical experiments on degenerating warped products S2 x_f S1")]
struct Cli {
    /// TOML or JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Lattice size `NxNxN`.
    #[arg(long, global = true)]
    grid: Option<String>,
    #[arg(long, global = true)]
    beta: Option<f64>,
    #[arg(long, global = true)]
    a0: Option<f64>,
    #[arg(long, global = true)]
    jmax: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Distance brackets for pairs of points.
    Dist(DistArgs),
    /// Limit volume and the volumes along the schedule.
    Volume,
    /// Pointwise, uniform and Gromov-Hausdorff convergence scan.
    Converge {
        #[arg(long, value_enum)]
        preset: Option<Preset>,
    },
    /// Covering estimates, fiber-point checks and partition sums.
    Hausdorff,
    /// λ estimates on tube complements and the diameter audit.
    Bounds,
    /// Plot-ready table of volumes, fiber lengths and brackets over the schedule.
    Sweep(DistArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Dist(_) => "dist",
            Command::Volume => "volume",
            Command::Converge { .. } => "converge",
            Command::Hausdorff => "hausdorff",
            Command::Bounds => "bounds",
            Command::Sweep(_) => "sweep",
        }
    }
}

/// File config, then preset, then flags; validated once at the end.
fn resolve_config(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Command::Converge { preset: Some(p) } = &cli.command {
        cfg.apply_preset(*p);
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output.path = Some(o.clone());
    }
    if let Some(f) = cli.format {
        cfg.output.format = f;
    }
    if let Some(g) = &cli.grid {
        let (a, b, c) = parse_grid(g)?;
        cfg.grid.n_r = a;
        cfg.grid.n_theta = b;
        cfg.grid.n_phi = c;
    }
    if let Some(b) = cli.beta {
        cfg.beta = b;
    }
    if let Some(a) = cli.a0 {
        cfg.schedule.a0 = a;
        cfg.schedule.explicit = None;
    }
    if let Some(j) = cli.jmax {
        cfg.schedule.jmax = j;
        cfg.schedule.explicit = None;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Caps rayon's pool at `WARPGEO_THREADS` when set.
fn init_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("WARPGEO_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| Failure::config(format!("WARPGEO_THREADS must be a positive integer, got \"{v}\"")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::config(format!("thread pool: {e}")))
}

fn run(cli: &Cli) -> Result<bool, Failure> {
    init_threads()?;
    let cfg = resolve_config(cli).map_err(|e| Failure::Config {
        message: format!("{e:#}"),
        witness: json!({ "config": cli.config }),
    })?;
    let outcome = match &cli.command {
        Command::Dist(args) => commands::dist(&cfg, args)?,
        Command::Volume => commands::volume_cmd(&cfg)?,
        Command::Converge { .. } => commands::converge(&cfg)?,
        Command::Hausdorff => commands::hausdorff(&cfg)?,
        Command::Bounds => commands::bounds(&cfg)?,
        Command::Sweep(args) => commands::sweep(&cfg, args)?,
    };
    let text = report::render(cli.command.name(), &cfg, &outcome, cfg.output.format);
    match &cfg.output.path {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::config(format!("writing {}: {e}", path.display())))?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Failure::config(format!("writing stdout: {e}")))?;
        }
    }
    Ok(outcome.witnesses.is_empty())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(4),
        Err(f) => {
            let (code, kind, message, witness) = match f {
                Failure::Config { message, witness } => (2, "config_error", message, witness),
                Failure::Solver { message, witness } => (3, "solver_error", message, witness),
            };
            eprintln!("warpgeo: {message}");
            eprintln!("{}", report::error_report(kind, &message, witness));
            ExitCode::from(code)
        }
    }
}
