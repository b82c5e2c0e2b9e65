//! `turbench` — command-line front end for the turbulence-mitigation
//! benchmark. Simulates degraded sequences, runs stabilizers and
//! deconvolution, scores restorations, and aggregates reports.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 run finished
//! but some rows failed, 3 fatal runtime error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{
    cmd_deblur, cmd_report, cmd_run, cmd_simulate, cmd_stabilize, cmd_validate_config, DeblurArgs,
    GlobalOpts, ReportArgs, SimulateArgs, StabilizeArgs,
};
use turbench::Error;

#[derive(Parser)]
#[command(name = "turbench", version, about = "Turbulence-mitigation benchmark runner")]
struct Cli {
    /// JSON config file (required by run/validate-config, optional elsewhere)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads; overrides the config, defaults to all cores
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Master seed; overrides the config
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Log filter (error|warn|info|debug|trace, or any env_logger spec)
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Synthesize degraded sequences for every (scene, grid cell) pair
    Simulate {
        /// Directory of ground-truth images
        #[arg(long)]
        gt_dir: Option<PathBuf>,
        /// Where to write the dataset tree
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Sweep override, e.g. "L=1,2;a=5;b=15,16" (omitted axes keep defaults)
        #[arg(long)]
        grid: Option<String>,
    },

    /// Fuse one sequence directory into a single stabilized image
    Stabilize {
        /// Sequence directory (frames + params.json)
        #[arg(long = "in")]
        input: PathBuf,
        /// mean | median | mg
        #[arg(long)]
        method: String,
        /// Fusion regularizer for mg: tv | nltv
        #[arg(long, default_value = "tv")]
        reg: String,
        /// Optical flow for mg: lk | tvl1
        #[arg(long, default_value = "lk")]
        flow: String,
        /// Output image (stabilize.json lands next to it)
        #[arg(long)]
        out: PathBuf,
    },

    /// Deconvolve one image against its scenario's long-exposure blur
    Deblur {
        /// Input image
        #[arg(long = "in")]
        input: PathBuf,
        /// wiener | lr | tv
        #[arg(long)]
        method: String,
        /// Noise-to-signal ratio (wiener)
        #[arg(long)]
        nsr: Option<f64>,
        /// Iteration count (lr or tv)
        #[arg(long)]
        iters: Option<usize>,
        /// Smoothness weight (tv)
        #[arg(long)]
        lambda: Option<f64>,
        /// Pick the blur strength by grid search instead of trusting params
        #[arg(long)]
        semiblind: bool,
        /// Candidate r0 values in meters, e.g. 0.01,0.02,0.04
        #[arg(long, value_delimiter = ',')]
        r0_grid: Vec<f64>,
        /// Scenario parameters (a sequence's params.json works as-is)
        #[arg(long)]
        params: PathBuf,
        /// Output image
        #[arg(long)]
        out: PathBuf,
    },

    /// Simulate (if needed), evaluate every configured pipeline, score
    Run,

    /// Aggregate a results CSV into per-group tables and a text summary
    Report {
        /// Results CSV (defaults to <results_dir>/results.csv from the config)
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Where to write the tables (defaults next to the CSV)
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Single grouping instead of all four: overall | distance | cn2 | stabilizer
        #[arg(long)]
        by: Option<String>,
    },

    /// Parse the config, build its pipelines, and exit
    ValidateConfig,
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) => 1,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp(None)
        .init();

    let global = GlobalOpts {
        config: cli.config,
        workers: cli.workers,
        seed: cli.seed,
    };

    let outcome = match cli.cmd {
        Cmd::Simulate {
            gt_dir,
            out_dir,
            grid,
        } => cmd_simulate(
            &SimulateArgs {
                gt_dir,
                out_dir,
                grid,
            },
            &global,
        ),
        Cmd::Stabilize {
            input,
            method,
            reg,
            flow,
            out,
        } => cmd_stabilize(
            &StabilizeArgs {
                input,
                method,
                reg,
                flow,
                out,
            },
            &global,
        ),
        Cmd::Deblur {
            input,
            method,
            nsr,
            iters,
            lambda,
            semiblind,
            r0_grid,
            params,
            out,
        } => cmd_deblur(
            &DeblurArgs {
                input,
                method,
                nsr,
                iters,
                lambda,
                semiblind,
                r0_grid,
                params,
                out,
            },
            &global,
        ),
        Cmd::Run => cmd_run(&global),
        Cmd::Report { csv, out_dir, by } => cmd_report(&ReportArgs { csv, out_dir, by }, &global),
        Cmd::ValidateConfig => cmd_validate_config(&global),
    };

    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
