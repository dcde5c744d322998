use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use urllc_sim::sweep::{run_sweep, write_outputs, SweepOptions};
use urllc_sim::{parse_config, Scheme};

/// Run a Wi-Fi URLLC scenario sweep and write a CSV summary.
#[derive(Debug, Parser)]
#[command(name = "simulate", version)]
struct Args {
    /// Scenario file (`key = value` lines with sections; empty file = defaults).
    #[arg(long)]
    config: PathBuf,

    /// CSV output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Directory for per-run JSONL traces.
    #[arg(long)]
    trace_dir: Option<PathBuf>,

    /// Directory for gnuplot-ready `M value` series.
    #[arg(long)]
    plot_dir: Option<PathBuf>,

    /// Restrict the sweep to one scheme.
    #[arg(long, value_parser = ["legacy", "proposed"])]
    scheme: Option<String>,

    /// Restrict the sweep to one URLLC station count.
    #[arg(long)]
    m: Option<u32>,

    /// Restrict the sweep to one seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads (runs are independent).
    #[arg(long)]
    jobs: Option<usize>,
}

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

fn main() -> ExitCode {
    let args = Args::parse();

    let text = match fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let mut config = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprint!("error: {}: {e}", args.config.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(s) = args.scheme.as_deref().and_then(Scheme::parse) {
        config.schemes = vec![s];
    }
    if let Some(m) = args.m {
        if config.n_regular == 0 && m == 0 {
            eprintln!("error: N = 0 and M = 0 leaves no stations");
            return ExitCode::from(EXIT_CONFIG);
        }
        config.m_list = vec![m];
    }
    if let Some(seed) = args.seed {
        config.seeds = vec![seed];
    }

    let trace_dir = args
        .trace_dir
        .clone()
        .or_else(|| config.trace_enabled.then(|| PathBuf::from("traces")));
    let opts = SweepOptions {
        jobs: args.jobs,
        trace_dir,
    };
    let summaries = match run_sweep(&config, &opts) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    };
    if let Err(e) = write_outputs(&summaries, args.out.as_deref(), args.plot_dir.as_deref()) {
        eprintln!("error: cannot write outputs: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    ExitCode::SUCCESS
}
