//! `hom`: analytic curves, simulated time-tag records and their analysis
//! for time-resolved two-photon interference.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hom_core::ScenarioKind;

use commands::Output;
use config::{OutputFormat, RunConfig};
use error::CliError;

#[derive(Parser)]
#[command(
    name = "hom",
    version,
    about = "Time-resolved two-photon interference toolkit"
)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true, env = "HOM_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Analytic P_joint(τ)/P_same(τ) curves and time-bin outcome probabilities.
    Theory {
        /// a|b|c|d; all four when omitted and absent from the config.
        #[arg(long, short)]
        scenario: Option<String>,
    },
    /// Simulated C/D timestamp streams plus the ground-truth log.
    Simulate {
        #[arg(long, short)]
        scenario: Option<String>,
        #[arg(long, short = 'n')]
        cycles: Option<u64>,
    },
    /// Gate fit, coincidence histogram, cross-bin matrix and visibilities.
    Analyze {
        /// Timestamp CSVs, each optionally prefixed with its scenario: `c=path.csv`.
        #[arg(required = true)]
        inputs: Vec<String>,
        /// Cycles in each record; inferred from the last click otherwise.
        #[arg(long, short = 'n')]
        cycles: Option<u64>,
    },
    /// Feedback error rate over a range of dead-time fractions.
    SweepErrorRate {
        #[arg(long, default_value_t = 0.0)]
        from: f64,
        #[arg(long, default_value_t = 0.5)]
        to: f64,
        #[arg(long, default_value_t = 101)]
        steps: usize,
    },
    /// Theory, simulation and analysis for all four scenarios.
    ReproduceAll {
        #[arg(long, short = 'n')]
        cycles: Option<u64>,
    },
}

fn kinds(
    cfg: &RunConfig,
    arg: Option<&str>,
    from_file: bool,
) -> Result<Vec<ScenarioKind>, CliError> {
    match arg {
        Some(s) => Ok(vec![s.parse()?]),
        None if from_file => Ok(vec![cfg.scenario_kind()?]),
        None => Ok(ScenarioKind::ALL.to_vec()),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let from_file = cli.config.is_some();
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(d) = cli.output_dir {
        cfg.output_dir = d;
    }
    if let Some(f) = cli.format {
        cfg.output_format = f;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let out = Output::new(cfg.output_dir.clone(), cfg.output_format)?;

    match cli.cmd {
        Cmd::Theory { scenario } => {
            for kind in kinds(&cfg, scenario.as_deref(), from_file)? {
                let t = commands::theory(&cfg, kind, &out)?;
                println!(
                    "{kind}: ∫(P_joint + P_same) dτ = {:.8}  ({:.3} s)",
                    t.normalization, t.seconds
                );
            }
        }
        Cmd::Simulate { scenario, cycles } => {
            let n = cycles.unwrap_or(cfg.n_cycles);
            for kind in kinds(&cfg, scenario.as_deref(), from_file)? {
                let (rec, path) = commands::simulate(&cfg, kind, n, &out)?;
                println!(
                    "{kind}: {} C, {} D clicks -> {}",
                    rec.c.len(),
                    rec.d.len(),
                    path.display()
                );
            }
        }
        Cmd::Analyze { inputs, cycles } => {
            let default_kind = cfg.scenario_kind()?;
            let mut results = Vec::new();
            for input in &inputs {
                let (kind, path) = match input.split_once('=') {
                    Some((k, p)) => (k.parse()?, PathBuf::from(p)),
                    None => (default_kind, PathBuf::from(input)),
                };
                let rec = commands::read_recording(&path, cfg.tdc_ps())?;
                let res = commands::analyze_one(&cfg, kind, &rec, cycles, &out)?;
                println!(
                    "{kind}: {} coincidences, {:.1} accidentals, {:.0} pair experiments, SNR {}",
                    res.coincidences,
                    res.accidentals,
                    res.pair_experiments,
                    res.snr.map_or("undefined".into(), |s| format!("{s:.3}"))
                );
                results.push((kind, res));
            }
            let refs: Vec<_> = results.iter().map(|(k, r)| (*k, r)).collect();
            let vis = commands::visibilities(&refs);
            out.write_json("visibilities.json", &vis)?;
            println!("{vis}");
        }
        Cmd::SweepErrorRate { from, to, steps } => {
            let rows =
                commands::sweep_error_rate(from, to, steps, cfg.photon_length_ns * 1e-9, &out)?;
            let latency = cfg.latency().total() / (cfg.photon_length_ns * 1e-9);
            println!(
                "{} points; error rate at t̃ = {latency:.4}: {:.6}",
                rows.len(),
                hom_core::feedback::error_rate(latency)?
            );
        }
        Cmd::ReproduceAll { cycles } => {
            let n = cycles.unwrap_or(cfg.n_cycles);
            let summary = commands::reproduce_all(&cfg, n, &out)?;
            println!("{}", serde_json::to_string_pretty(&summary).unwrap());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(1);
        }
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
