//! Command-line front end: run scenarios, sweep axes, precompute OP tables,
//! and join sweep bundles into comparison tables.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use opshare::op::{build_op_table, suggest_grids};
use opshare::report;
use opshare::scenario::{parse_scenario, ScenarioConfig};
use opshare::sim::{self, SweepAxis};
use opshare::{rng, Error};

/// Default output directory when neither `--out` nor `OPSHARE_OUT` is set.
const DEFAULT_OUT: &str = "opshare-out";
const OUT_ENV: &str = "OPSHARE_OUT";

#[derive(Parser)]
#[command(name = "opshare", version, about = "OP-driven spectrum-sharing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario file (TOML).
    scenario: PathBuf,
    /// Root seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Config overrides, e.g. --set policy.kind=deterministic.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<ScenarioConfig, Error> {
        let mut cfg = parse_scenario(&self.scenario, &self.overrides)?;
        if let Some(seed) = self.seed {
            cfg.run.seed = seed;
        }
        Ok(cfg)
    }
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.unwrap_or_else(|| {
        std::env::var_os(OUT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    })
}

#[derive(Subcommand)]
enum Command {
    /// Execute one scenario and emit a result bundle.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Output bundle directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the per-slot log (slots.csv).
        #[arg(long)]
        slot_log: bool,
    },
    /// Run one independent seeded run per axis value.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Axis: access_threshold, deterministic_tau, si_residual, or
        /// mutual_interference.
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values (dB for access_threshold).
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        values: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Precompute an OP lookup table for a scenario.
    OpTable {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Grid size as IxD (interference points x distance points).
        #[arg(long, default_value = "16x8")]
        grid: String,
        /// Output table file (JSON).
        #[arg(long)]
        out: PathBuf,
    },
    /// Join sweep bundles into one comparison table.
    Report {
        /// Bundle directories emitted by `sweep`.
        bundles: Vec<PathBuf>,
        /// Write the joined CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_grid(spec: &str) -> Result<(usize, usize), Error> {
    let (a, b) = spec
        .split_once(['x', 'X'])
        .ok_or_else(|| Error::Config(format!("--grid '{spec}' must look like 16x8")))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|e| Error::Config(format!("--grid '{spec}': {e}")))
    };
    Ok((parse(a)?, parse(b)?))
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run {
            scenario,
            out,
            slot_log,
        } => {
            let cfg = scenario.load()?;
            let output = sim::run(&cfg)?;
            let bundle = report::emit_run(&out_dir(out), &output, slot_log)?;
            let m = &output.metrics;
            println!(
                "run complete: {} slots, seed {}",
                cfg.run.slots, cfg.run.seed
            );
            println!(
                "  system {:.4e} bps | secondary {:.4e} bps | primary {:.4e} bps",
                m.system_throughput_bps, m.secondary_throughput_bps, m.primary_throughput_bps
            );
            println!(
                "  success rates: secondary {:.4}, primary {:.4} | fd/hd/silence {:.3}/{:.3}/{:.3}",
                m.secondary_success_rate,
                m.primary_success_rate,
                m.fd_fraction,
                m.hd_fraction,
                m.silence_fraction
            );
            println!("  bundle: {}", bundle.dir.display());
        }
        Command::Sweep {
            scenario,
            axis,
            values,
            out,
        } => {
            let cfg = scenario.load()?;
            let axis = SweepAxis::parse(&axis)?;
            let points = sim::sweep(&cfg, axis, &values)?;
            let bundle = report::emit_sweep(&out_dir(out), &cfg, axis, &points)?;
            println!(
                "sweep complete: {} over {} points, bundle: {}",
                axis.name(),
                points.len(),
                bundle.dir.display()
            );
        }
        Command::OpTable {
            scenario,
            grid,
            out,
        } => {
            let cfg = scenario.load()?;
            let (n_i, n_d) = parse_grid(&grid)?;
            let mut grid_rng = rng::stream(cfg.run.seed, "op-grid", 0);
            let (interference_grid, distance_grid) =
                suggest_grids(&cfg.field, &cfg.channel, n_i, n_d, &mut grid_rng)?;
            let table = build_op_table(
                &interference_grid,
                &distance_grid,
                &cfg.field,
                &cfg.channel,
                cfg.access_threshold_linear(),
                cfg.op.link_distance,
                &cfg.op.conditioning,
                cfg.run.seed,
            )?;
            table.save(&out)?;
            println!(
                "op table built: {}x{} cells ({} absent), saved to {}",
                n_i,
                n_d,
                table.absent_cells.len(),
                out.display()
            );
        }
        Command::Report { bundles, out } => {
            let table = report::report(&bundles)?;
            match out {
                Some(path) => std::fs::write(path, table)?,
                None => print!("{table}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
