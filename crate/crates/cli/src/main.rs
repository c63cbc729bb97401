//! `outerspace`: run routing experiments from a config file or flags.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, ValueEnum};

use config::{Command, Entries};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProtocolArg {
    Geo,
    Outer,
    Both,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

/// Greedy geographic and outer-space routing experiments.
///
/// Settings come from `--config` (flat `section.key = value` lines) and are
/// overridden by flags. Seeds are mandatory.
#[derive(Debug, Parser)]
#[command(name = "outerspace", version)]
struct Cli {
    /// Config file with `section.key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// One of: generate, route, congestion, energy, lifetime-first-death,
    /// lifetime-threshold, stretch, symmetry, validate.
    #[arg(long, value_parser = parse_command)]
    command: Option<Command>,
    /// Seed; repeat for several independent runs.
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    /// Fixed node count.
    #[arg(long, conflicts_with = "density")]
    nodes: Option<usize>,
    /// Poisson mean node count.
    #[arg(long)]
    density: Option<f64>,
    /// Transmission range.
    #[arg(long)]
    range: Option<f64>,
    /// Messages in the traffic stream.
    #[arg(long)]
    messages: Option<usize>,
    /// Initial battery per node, in transmissions.
    #[arg(long)]
    battery: Option<u64>,
    /// Delivery-ratio threshold for `lifetime-threshold`.
    #[arg(long)]
    threshold: Option<f64>,
    /// Sliding window, in messages, for `lifetime-threshold`.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long, value_enum)]
    protocol: Option<ProtocolArg>,
    /// Output directory. Without it the aggregate goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Any config key, as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

fn parse_command(s: &str) -> Result<Command, String> {
    s.parse()
}

fn entries(cli: &Cli) -> Result<Entries> {
    let mut e = match &cli.config {
        Some(path) => Entries::load(path)?,
        None => Entries::default(),
    };
    for s in &cli.sets {
        let (k, v) = s
            .split_once('=')
            .with_context(|| format!("--set expects KEY=VALUE, got `{s}`"))?;
        e.override_with(k.trim(), v.trim().to_string())?;
    }
    let mut flag = |key: &str, value: Option<String>| match value {
        Some(v) => e.override_with(key, v),
        None => Ok(()),
    };
    flag("run.command", cli.command.map(|c| c.to_string()))?;
    let seeds: Vec<String> = cli.seeds.iter().map(u64::to_string).collect();
    flag("run.seeds", (!seeds.is_empty()).then(|| seeds.join(", ")))?;
    flag("network.nodes", cli.nodes.map(|v| v.to_string()))?;
    flag("network.density", cli.density.map(|v| v.to_string()))?;
    flag("network.range", cli.range.map(|v| v.to_string()))?;
    flag("traffic.messages", cli.messages.map(|v| v.to_string()))?;
    flag("network.battery", cli.battery.map(|v| v.to_string()))?;
    flag("lifetime.threshold", cli.threshold.map(|v| v.to_string()))?;
    flag("lifetime.window", cli.window.map(|v| v.to_string()))?;
    flag(
        "run.protocol",
        cli.protocol.map(|p| match p {
            ProtocolArg::Geo => "geo".to_string(),
            ProtocolArg::Outer => "outer".to_string(),
            ProtocolArg::Both => "both".to_string(),
        }),
    )?;
    flag("run.out", cli.out.as_ref().map(|p| p.display().to_string()))?;
    flag(
        "run.format",
        cli.format.map(|f| match f {
            FormatArg::Json => "json".to_string(),
            FormatArg::Csv => "csv".to_string(),
        }),
    )?;
    Ok(e)
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("OUTERSPACE_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .with_context(|| format!("OUTERSPACE_THREADS must be a positive integer, got `{v}`"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn real_main() -> Result<ExitCode> {
    let cli = Cli::parse();
    configure_threads()?;
    let cfg = entries(&cli)?.resolve()?;
    let summary = run::execute(&cfg, &mut std::io::stdout().lock())?;
    for (seed, err) in &summary.failed_seeds {
        eprintln!("error: seed {seed}: {err}");
    }
    Ok(if !summary.failed_seeds.is_empty() {
        ExitCode::from(2)
    } else if summary.checks_failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
