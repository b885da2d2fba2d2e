//! Command-line front end for the Monte Carlo campaign driver: loads or
//! synthesizes a campaign configuration, applies flag overrides, runs every
//! requested reduction scheme and prints the aggregate comparison table.

use std::path::PathBuf;

use anyhow::Context;
use clap::Parser;
use mixtrack::campaign::{
    run_campaign, write_per_run, write_report, write_traces, CampaignConfig,
};

#[derive(Parser, Debug)]
#[command(
    name = "mixtrack",
    version,
    about = "Monte Carlo comparison of Gaussian mixture reduction schemes \
             for single-target tracking in clutter"
)]
struct Args {
    /// Campaign configuration JSON; omitted fields use the built-in
    /// reference setup.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Override the mean clutter count per scan.
    #[arg(long)]
    clutter_rate: Option<f64>,

    /// Override the number of Monte Carlo runs per scheme.
    #[arg(long)]
    runs: Option<usize>,

    /// Override the base seed for the per-run random substreams.
    #[arg(long)]
    seed: Option<u64>,

    /// Comma-separated scheme names, e.g. capping-30,runnalls-5,adaptive-30.
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<String>>,

    /// Override the standard-pruning threshold (0 keeps every component).
    #[arg(long)]
    sp: Option<f64>,

    /// Override the normalized-weight pruning threshold (0 keeps every
    /// component).
    #[arg(long)]
    nwp: Option<f64>,

    /// Override the adaptive relative-loss threshold.
    #[arg(long)]
    alpha: Option<f64>,

    /// Write the aggregate report CSV here.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Write one per-step trace CSV per scheme into this directory.
    #[arg(long)]
    trace: Option<PathBuf>,

    /// Write the per-run CSV here.
    #[arg(long)]
    per_run: Option<PathBuf>,
}

fn main() -> anyhow::Result<()> {
    let args = Args::parse();

    let mut cfg = match &args.config {
        Some(path) => CampaignConfig::from_path(path)
            .with_context(|| format!("loading campaign config {}", path.display()))?,
        None => CampaignConfig::default(),
    };
    if let Some(v) = args.clutter_rate {
        cfg.scenario.clutter_rate = v;
    }
    if let Some(v) = args.runs {
        cfg.runs = v;
    }
    if let Some(v) = args.seed {
        cfg.base_seed = v;
    }
    if let Some(v) = args.schemes {
        cfg.schemes = v;
    }
    if let Some(v) = args.sp {
        cfg.sp_threshold = Some(v);
    }
    if let Some(v) = args.nwp {
        cfg.nwp_threshold = Some(v);
    }
    if let Some(v) = args.alpha {
        cfg.loss_threshold = v;
    }
    cfg.validate().context("invalid campaign configuration")?;

    println!(
        "clutter rate {} | {} runs | {} steps | seed {}",
        cfg.scenario.clutter_rate, cfg.runs, cfg.scenario.steps, cfg.base_seed
    );
    let report = run_campaign(&cfg).context("campaign failed")?;
    print!("{report}");

    if let Some(path) = &args.out {
        write_report(&report, path).context("writing report CSV")?;
    }
    if let Some(path) = &args.per_run {
        write_per_run(&report, path).context("writing per-run CSV")?;
    }
    if let Some(dir) = &args.trace {
        write_traces(&report, dir).context("writing trace CSVs")?;
    }
    Ok(())
}
