use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Parser;

use etpmb_sim::config::{load_config, Mode};
use etpmb_sim::experiment::run_experiment;
use etpmb_sim::report::{emit_csv, emit_truth_csv};

/// Multi-sensor extended-target tracking simulator.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    /// Scenario description (TOML).
    #[arg(long)]
    scenario: PathBuf,

    /// Override the scenario's filter mode.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,

    /// Override the fusion interval (steps between fusion epochs).
    #[arg(long)]
    fusion_interval: Option<usize>,

    /// Override the number of Monte-Carlo runs.
    #[arg(long)]
    mc_runs: Option<usize>,

    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Output CSV with per-step metrics and estimates.
    #[arg(long)]
    out: PathBuf,

    /// Optional CSV with ground-truth states and true detection counts.
    #[arg(long)]
    truth_out: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse::<Mode>().map_err(|e| e.to_string())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let mut cfg = load_config(&cli.scenario)?;
    if let Some(mode) = cli.mode {
        cfg.mode = mode;
    }
    if let Some(n) = cli.fusion_interval {
        cfg.fusion_interval = n;
    }
    if let Some(n) = cli.mc_runs {
        cfg.mc_runs = n;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;

    let output = run_experiment(&cfg)?;

    let file = File::create(&cli.out)
        .with_context(|| format!("creating output file {}", cli.out.display()))?;
    emit_csv(&output.records, &mut BufWriter::new(file))?;
    if let Some(path) = &cli.truth_out {
        let file = File::create(path)
            .with_context(|| format!("creating truth output file {}", path.display()))?;
        emit_truth_csv(&output.truth, &mut BufWriter::new(file))?;
    }

    // Quick console summary: time-averaged GOSPA per filter.
    let mut ids: Vec<String> = output.records.iter().map(|r| r.filter_id.clone()).collect();
    ids.sort();
    ids.dedup();
    for id in ids {
        let vals: Vec<f64> = output
            .records
            .iter()
            .filter(|r| r.filter_id == id)
            .map(|r| r.gospa)
            .collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        println!("{id}: mean GOSPA {mean:.3} over {} records", vals.len());
    }
    Ok(())
}
