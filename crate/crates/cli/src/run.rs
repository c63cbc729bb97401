//! Runs the configured command over every seed and writes the results.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use outerspace_core::experiments::{
    mean_stddev, run_congestion, run_energy, run_lifetime_delivery_threshold,
    run_lifetime_first_death, run_stretch, run_symmetry_check, run_traces, CongestionOptions,
    CongestionReport, LifetimeComparison, LifetimeOptions, StretchConfig, SymmetryConfig,
    TrafficConfig,
};
use outerspace_core::validation::standard_suite;
use outerspace_core::{Network, NetworkConfig};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{Command, Format, NetworkSource, RunConfig};

/// A flat CSV table. `suffix` is appended to the per-seed file stem.
pub struct Table {
    pub suffix: &'static str,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(suffix: &'static str, header: &[&'static str]) -> Self {
        Self {
            suffix,
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

/// Results of one seed.
pub struct SeedOutput {
    pub seed: u64,
    pub report: Value,
    pub tables: Vec<Table>,
    pub metrics: Vec<(String, f64)>,
    /// Extra files written verbatim next to the reports.
    pub files: Vec<(String, String)>,
    /// `false` when a validation check failed.
    pub ok: bool,
}

impl SeedOutput {
    fn new(seed: u64, report: Value) -> Self {
        Self {
            seed,
            report,
            tables: Vec::new(),
            metrics: Vec::new(),
            files: Vec::new(),
            ok: true,
        }
    }

    fn metric(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.push((name.into(), value));
    }
}

fn network_config(cfg: &RunConfig, seed: u64) -> NetworkConfig {
    let base = match cfg.network {
        NetworkSource::Density(rho) => NetworkConfig::poisson(rho, seed),
        NetworkSource::Nodes(n) => NetworkConfig::fixed(n, seed),
        // rejected at config time for commands that need a generator
        NetworkSource::File(_) => NetworkConfig::fixed(0, seed),
    };
    base.with_range(cfg.range).with_battery(cfg.battery)
}

fn network(cfg: &RunConfig, seed: u64) -> Result<Network> {
    match &cfg.network {
        NetworkSource::File(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Network::from_json(&text, cfg.battery).with_context(|| format!("loading {}", path.display()))
        }
        _ => Ok(Network::generate(&network_config(cfg, seed))?),
    }
}

fn traffic(cfg: &RunConfig, seed: u64) -> TrafficConfig {
    TrafficConfig::for_network(cfg.messages, seed)
}

pub fn run_seed(cfg: &RunConfig, seed: u64) -> Result<SeedOutput> {
    match cfg.command {
        Command::Generate => generate(cfg, seed),
        Command::Route => route(cfg, seed),
        Command::Congestion => congestion(cfg, seed),
        Command::Energy => energy(cfg, seed),
        Command::LifetimeFirstDeath | Command::LifetimeThreshold => lifetime(cfg, seed),
        Command::Stretch => stretch(cfg, seed),
        Command::Symmetry => symmetry(cfg, seed),
        Command::Validate => validate(seed),
    }
}

fn generate(cfg: &RunConfig, seed: u64) -> Result<SeedOutput> {
    let net = network(cfg, seed)?;
    let file = net.to_file();
    let mut out = SeedOutput::new(
        seed,
        json!({ "nodes": net.len(), "mean_degree": net.mean_degree(), "network": file }),
    );
    let mut table = Table::new("", &["id", "x", "y"]);
    for node in net.nodes() {
        table.push(vec![node.id.to_string(), node.pos.x.to_string(), node.pos.y.to_string()]);
    }
    out.tables.push(table);
    out.files.push((format!("network-seed-{seed}.json"), net.to_json()? + "\n"));
    out.metric("nodes", net.len() as f64);
    out.metric("mean_degree", net.mean_degree());
    Ok(out)
}

fn route(cfg: &RunConfig, seed: u64) -> Result<SeedOutput> {
    let net = network(cfg, seed)?;
    let traffic = traffic(cfg, seed);
    let mut table = Table::new("", &["msg_id", "protocol", "src", "dst", "status", "hops", "path"]);
    let mut traces = Vec::new();
    let mut metrics = Vec::new();
    for &protocol in cfg.protocol.protocols() {
        let run = run_traces(&net, &traffic, protocol, cfg.relay_images)?;
        let delivered = run.iter().filter(|t| t.outcome.delivered()).count();
        let hops: usize = run.iter().map(|t| t.outcome.hops()).sum();
        metrics.push((format!("{}.delivery_ratio", protocol.as_str()), delivered as f64 / run.len() as f64));
        metrics.push((format!("{}.mean_hops", protocol.as_str()), hops as f64 / run.len() as f64));
        for t in &run {
            let path: Vec<String> = t.outcome.path.iter().map(|n| n.to_string()).collect();
            table.push(vec![
                t.msg_id.to_string(),
                protocol.as_str().to_string(),
                t.src.to_string(),
                t.dst.to_string(),
                t.outcome.status.as_str().to_string(),
                t.outcome.hops().to_string(),
                path.join(";"),
            ]);
        }
        traces.extend(run);
    }
    let mut out = SeedOutput::new(seed, json!({ "nodes": net.len(), "traces": traces }));
    out.tables.push(table);
    out.metrics = metrics;
    Ok(out)
}

fn heatmap_table(suffix: &'static str, rep: &CongestionReport) -> Table {
    let mut t = Table::new(suffix, &["row", "col", "count"]);
    for row in 0..rep.heatmap.size {
        for col in 0..rep.heatmap.size {
            t.push(vec![row.to_string(), col.to_string(), rep.heatmap.cell(row, col).to_string()]);
        }
    }
    t
}

fn congestion(cfg: &RunConfig, seed: u64) -> Result<SeedOutput> {
    let net = network(cfg, seed)?;
    let traffic = traffic(cfg, seed);
    let opts = CongestionOptions {
        sub_areas: cfg.sub_areas.clone(),
        heatmap_grid: cfg.heatmap_grid,
        relay_images: cfg.relay_images,
        count_endpoints: cfg.count_endpoints,
    };
    let reports = cfg
        .protocol
        .protocols()
        .iter()
        .map(|&p| run_congestion(&net, &traffic, p, &opts))
        .collect::<Result<Vec<_>, _>>()?;

    let mut out = SeedOutput::new(seed, json!({ "nodes": net.len(), "protocols": reports }));
    let mut areas = Table::new(
        "",
        &["protocol", "area", "x", "y", "radius", "traversing", "messages", "fraction"],
    );
    for rep in &reports {
        let name = rep.protocol.as_str();
        for (i, a) in rep.sub_areas.iter().enumerate() {
            areas.push(vec![
                name.to_string(),
                i.to_string(),
                a.area.center.x.to_string(),
                a.area.center.y.to_string(),
                a.area.radius.to_string(),
                a.traversing.to_string(),
                rep.messages.to_string(),
                a.fraction.to_string(),
            ]);
            out.metric(format!("{name}.fraction.{i}"), a.fraction);
        }
        out.metric(format!("{name}.delivery_ratio"), rep.delivered as f64 / rep.messages as f64);
        out.metric(format!("{name}.transmissions"), rep.transmissions as f64);
        out.metric(format!("{name}.relay_cv"), rep.relay_cv());
    }
    out.tables.push(areas);
    for rep in &reports {
        let suffix = match rep.protocol {
            outerspace_core::Protocol::Geographic => "heatmap-geographic",
            outerspace_core::Protocol::OuterSpace => "heatmap-outer_space",
        };
        out.tables.push(heatmap_table(suffix, rep));
    }
    Ok(out)
}

fn energy(cfg: &RunConfig, seed: u64) -> Result<SeedOutput> {
    let net = network(cfg, seed)?;
    let rep = run_energy(&net, &traffic(cfg, seed), cfg.relay_images)?;
    let mut table = Table::new("", &["protocol", "transmissions", "delivered", "dead_ends"]);
    for p in [&rep.geographic, &rep.outer_space] {
        table.push(vec![
            p.protocol.as_str().to_string(),
            p.transmissions.to_string(),
            p.delivered.to_string(),
            p.dead_ends.to_string(),
        ]);
    }
    let mut out = SeedOutput::new(seed, json!({ "nodes": net.len(), "energy": rep }));
    out.tables.push(table);
    out.metric("geographic.transmissions", rep.geographic.transmissions as f64);
    out.metric("outer_space.transmissions", rep.outer_space.transmissions as f64);
    if let Some(r) = rep.ratio {
        out.metric("ratio", r);
    }
    Ok(out)
}

fn lifetime(cfg: &RunConfig, seed: u64) -> Result<SeedOutput> {
    let net_cfg = network_config(cfg, seed);
    let opts = LifetimeOptions {
        threshold: cfg.threshold,
        window: cfg.window,
        relay_images: cfg.relay_images,
    };
    let rep: LifetimeComparison = if cfg.command == Command::LifetimeFirstDeath {
        run_lifetime_first_death(&net_cfg, &traffic(cfg, seed), &opts)?
    } else {
        run_lifetime_delivery_threshold(&net_cfg, &traffic(cfg, seed), &opts)?
    };
    let mut table = Table::new(
        "",
        &[
            "protocol",
            "stop_cause",
            "messages_delivered",
            "messages_injected",
            "messages_skipped",
            "transmissions",
            "alive_at_stop",
            "first_dead",
        ],
    );
    let mut curve = Table::new("alive", &["protocol", "messages", "alive"]);
    for p in [&rep.geographic, &rep.outer_space] {
        let cause = serde_json::to_value(p.stop_cause)?;
        table.push(vec![
            p.protocol.as_str().to_string(),
            cause.as_str().unwrap_or_default().to_string(),
            p.messages_delivered.to_string(),
            p.messages_injected.to_string(),
            p.messages_skipped.to_string(),
            p.transmissions.to_string(),
            p.alive_at_stop.to_string(),
            p.first_dead.map(|n| n.to_string()).unwrap_or_default(),
        ]);
        for (i, alive) in p.alive_curve.iter().enumerate() {
            let messages = (i + 1) * outerspace_core::experiments::ALIVE_SAMPLE_INTERVAL;
            curve.push(vec![p.protocol.as_str().to_string(), messages.to_string(), alive.to_string()]);
        }
    }
    let mut out = SeedOutput::new(seed, serde_json::to_value(&rep)?);
    out.tables.push(table);
    out.tables.push(curve);
    out.metric("geographic.messages_delivered", rep.geographic.messages_delivered as f64);
    out.metric("outer_space.messages_delivered", rep.outer_space.messages_delivered as f64);
    if let Some(r) = rep.ratio {
        out.metric("ratio", r);
    }
    Ok(out)
}

fn stretch(cfg: &RunConfig, seed: u64) -> Result<SeedOutput> {
    let rep = run_stretch(&StretchConfig {
        samples: cfg.stretch_samples,
        seed,
        network: (cfg.stretch_messages > 0).then(|| network_config(cfg, seed)),
        messages: cfg.stretch_messages,
        relay_images: cfg.relay_images,
    })?;
    let mut table = Table::new("", &["metric", "value"]);
    let mut out = SeedOutput::new(seed, serde_json::to_value(&rep)?);
    let mut values = vec![
        ("mean_square_distance", rep.mean_square_distance),
        ("mean_torus_distance", rep.mean_torus_distance),
        ("ratio", rep.ratio),
    ];
    if let Some(h) = rep.hop_ratio {
        values.push(("hop_ratio", h));
    }
    for (name, v) in values {
        table.push(vec![name.to_string(), v.to_string()]);
        out.metric(name, v);
    }
    out.tables.push(table);
    Ok(out)
}

fn symmetry(cfg: &RunConfig, seed: u64) -> Result<SeedOutput> {
    let rep = run_symmetry_check(&SymmetryConfig {
        surface: cfg.symmetry_surface,
        nodes: cfg.symmetry_nodes,
        range: cfg.range,
        regions: cfg.symmetry_regions,
        paths: cfg.symmetry_paths,
        deployments: cfg.symmetry_deployments,
        seed,
        weight: cfg.symmetry_weight,
    })?;
    let mut table = Table::new("", &["row", "col", "frequency"]);
    for (i, f) in rep.region_frequency.iter().enumerate() {
        table.push(vec![(i / rep.regions).to_string(), (i % rep.regions).to_string(), f.to_string()]);
    }
    let mut out = SeedOutput::new(seed, serde_json::to_value(&rep)?);
    out.tables.push(table);
    out.metric("max_min_ratio", rep.max_min_ratio);
    if let Some(r) = rep.center_corner_ratio {
        out.metric("center_corner_ratio", r);
    }
    Ok(out)
}

fn validate(seed: u64) -> Result<SeedOutput> {
    let checks = standard_suite(seed)?;
    let mut table = Table::new("", &["check", "passed", "detail"]);
    for c in &checks {
        table.push(vec![c.name.clone(), c.passed.to_string(), c.detail.clone()]);
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    let mut out = SeedOutput::new(seed, json!({ "checks": checks }));
    out.tables.push(table);
    out.metric("failed", failed as f64);
    out.ok = failed == 0;
    Ok(out)
}

/// Mean and sample standard deviation of every metric across seeds.
pub fn aggregate(cfg: &RunConfig, outputs: &[SeedOutput]) -> Value {
    let mut names: Vec<&str> = Vec::new();
    for o in outputs {
        for (n, _) in &o.metrics {
            if !names.contains(&n.as_str()) {
                names.push(n);
            }
        }
    }
    let metrics: serde_json::Map<String, Value> = names
        .iter()
        .map(|&name| {
            let values: Vec<f64> = outputs
                .iter()
                .filter_map(|o| o.metrics.iter().find(|(n, _)| n == name).map(|&(_, v)| v))
                .collect();
            let (mean, stddev) = mean_stddev(&values);
            (name.to_string(), json!({ "mean": mean, "stddev": stddev, "n": values.len(), "values": values }))
        })
        .collect();
    json!({
        "command": cfg.command.as_str(),
        "config": cfg.to_json(),
        "seeds": outputs.iter().map(|o| o.seed).collect::<Vec<_>>(),
        "metrics": metrics,
    })
}

fn seed_document(cfg: &RunConfig, o: &SeedOutput) -> Value {
    json!({
        "command": cfg.command.as_str(),
        "seed": o.seed,
        "config": cfg.to_json(),
        "report": o.report,
    })
}

fn csv_text(cfg: &RunConfig, seed: Option<u64>, table: &Table) -> Result<String> {
    let mut text = String::new();
    for (k, v) in cfg.pairs() {
        text.push_str(&format!("# {k} = {v}\n"));
    }
    if let Some(seed) = seed {
        text.push_str(&format!("# seed = {seed}\n"));
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    text.push_str(&String::from_utf8(w.into_inner()?)?);
    Ok(text)
}

fn aggregate_table(doc: &Value) -> Table {
    let mut t = Table::new("", &["metric", "mean", "stddev", "n"]);
    if let Some(metrics) = doc["metrics"].as_object() {
        for (name, m) in metrics {
            let num = |v: &Value| v.as_f64().map(|x| x.to_string()).unwrap_or_else(|| "NaN".into());
            t.push(vec![name.clone(), num(&m["mean"]), num(&m["stddev"]), m["n"].to_string()]);
        }
    }
    t
}

fn pretty(v: &Value) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_seed(cfg: &RunConfig, dir: &Path, o: &SeedOutput) -> Result<()> {
    let stem = format!("{}-seed-{}", cfg.command, o.seed);
    match cfg.format {
        Format::Json => write_file(dir, &format!("{stem}.json"), &pretty(&seed_document(cfg, o))?)?,
        Format::Csv => {
            for t in o.tables.iter().filter(|t| t.suffix.is_empty()) {
                write_file(dir, &format!("{stem}.csv"), &csv_text(cfg, Some(o.seed), t)?)?;
            }
        }
    }
    // heatmaps, alive curves and similar side tables are CSV in both formats
    for t in o.tables.iter().filter(|t| !t.suffix.is_empty()) {
        write_file(dir, &format!("{stem}-{}.csv", t.suffix), &csv_text(cfg, Some(o.seed), t)?)?;
    }
    for (name, text) in &o.files {
        write_file(dir, name, text)?;
    }
    Ok(())
}

/// Outcome of a whole run, for the exit code.
pub struct Summary {
    pub failed_seeds: Vec<(u64, String)>,
    pub checks_failed: bool,
}

pub fn execute(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<Summary> {
    let results: Vec<(u64, Result<SeedOutput>)> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            log::info!("{} seed {seed}: started", cfg.command);
            let r = run_seed(cfg, seed);
            log::info!("{} seed {seed}: finished", cfg.command);
            (seed, r)
        })
        .collect();

    let mut outputs = Vec::new();
    let mut failed_seeds = Vec::new();
    for (seed, r) in results {
        match r {
            Ok(o) => outputs.push(o),
            Err(e) => failed_seeds.push((seed, format!("{e:#}"))),
        }
    }
    let checks_failed = outputs.iter().any(|o| !o.ok);

    if cfg.command == Command::Validate {
        for o in &outputs {
            writeln!(stdout, "seed {}", o.seed)?;
            for row in &o.tables[0].rows {
                let mark = if row[1] == "true" { "PASS" } else { "FAIL" };
                writeln!(stdout, "  {mark}  {:<32} {}", row[0], row[2])?;
            }
        }
    }

    let doc = aggregate(cfg, &outputs);
    match &cfg.out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            for o in &outputs {
                write_seed(cfg, dir, o)?;
            }
            if failed_seeds.is_empty() {
                let name = format!("{}-aggregate.{}", cfg.command, cfg.format.extension());
                let text = match cfg.format {
                    Format::Json => pretty(&doc)?,
                    Format::Csv => csv_text(cfg, None, &aggregate_table(&doc))?,
                };
                write_file(dir, &name, &text)?;
            }
        }
        None if cfg.command != Command::Validate => match cfg.format {
            Format::Json => {
                let mut doc = doc;
                doc["reports"] = Value::Array(outputs.iter().map(|o| o.report.clone()).collect());
                stdout.write_all(pretty(&doc)?.as_bytes())?;
            }
            Format::Csv => stdout.write_all(csv_text(cfg, None, &aggregate_table(&doc))?.as_bytes())?,
        },
        None => {}
    }
    Ok(Summary {
        failed_seeds,
        checks_failed,
    })
}
