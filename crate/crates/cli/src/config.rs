//! Flat `section.key = value` configuration with every default materialized.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use outerspace_core::experiments::SubArea;
use outerspace_core::routing::PathWeight;
use outerspace_core::{Protocol, RelayImages, Surface};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Generate,
    Route,
    Congestion,
    Energy,
    LifetimeFirstDeath,
    LifetimeThreshold,
    Stretch,
    Symmetry,
    Validate,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::Generate,
        Command::Route,
        Command::Congestion,
        Command::Energy,
        Command::LifetimeFirstDeath,
        Command::LifetimeThreshold,
        Command::Stretch,
        Command::Symmetry,
        Command::Validate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Route => "route",
            Command::Congestion => "congestion",
            Command::Energy => "energy",
            Command::LifetimeFirstDeath => "lifetime-first-death",
            Command::LifetimeThreshold => "lifetime-threshold",
            Command::Stretch => "stretch",
            Command::Symmetry => "symmetry",
            Command::Validate => "validate",
        }
    }

    fn is_lifetime(self) -> bool {
        matches!(self, Command::LifetimeFirstDeath | Command::LifetimeThreshold)
    }
}

impl FromStr for Command {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Command::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Command::ALL.iter().map(|c| c.as_str()).collect();
                format!("expected one of {}", names.join(", "))
            })
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolSelector {
    Geo,
    Outer,
    Both,
}

impl ProtocolSelector {
    pub fn protocols(self) -> &'static [Protocol] {
        match self {
            ProtocolSelector::Geo => &[Protocol::Geographic],
            ProtocolSelector::Outer => &[Protocol::OuterSpace],
            ProtocolSelector::Both => &Protocol::BOTH,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            ProtocolSelector::Geo => "geo",
            ProtocolSelector::Outer => "outer",
            ProtocolSelector::Both => "both",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NetworkSource {
    Nodes(usize),
    Density(f64),
    File(PathBuf),
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub seeds: Vec<u64>,
    pub protocol: ProtocolSelector,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub network: NetworkSource,
    pub range: f64,
    pub battery: u64,
    pub messages: usize,
    pub relay_images: RelayImages,
    pub sub_areas: Vec<SubArea>,
    pub heatmap_grid: usize,
    pub count_endpoints: bool,
    pub threshold: f64,
    pub window: usize,
    pub stretch_samples: usize,
    pub stretch_messages: usize,
    pub symmetry_surface: Surface,
    pub symmetry_nodes: usize,
    pub symmetry_regions: usize,
    pub symmetry_paths: usize,
    pub symmetry_deployments: usize,
    pub symmetry_weight: PathWeight,
}

/// Every accepted key.
pub const KEYS: [&str; 25] = [
    "run.command",
    "run.seeds",
    "run.protocol",
    "run.format",
    "run.out",
    "network.nodes",
    "network.density",
    "network.file",
    "network.range",
    "network.battery",
    "traffic.messages",
    "routing.relay_images",
    "congestion.sub_areas",
    "congestion.heatmap_grid",
    "congestion.count_endpoints",
    "lifetime.threshold",
    "lifetime.window",
    "stretch.samples",
    "stretch.messages",
    "symmetry.surface",
    "symmetry.nodes",
    "symmetry.regions",
    "symmetry.paths",
    "symmetry.deployments",
    "symmetry.weight",
];

fn is_known(key: &str) -> bool {
    KEYS.contains(&key)
}

/// Raw `key = value` entries, sorted by key.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Entries(BTreeMap<String, String>);

impl Entries {
    /// Parses a config file body. `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", i + 1))?;
            let (key, value) = (key.trim(), value.trim());
            if !is_known(key) {
                bail!("line {}: unknown key `{key}`", i + 1);
            }
            if map.insert(key.to_string(), value.to_string()).is_some() {
                bail!("line {}: key `{key}` set twice", i + 1);
            }
        }
        Ok(Self(map))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    /// Applies a flag value. A differing file value is overridden and logged.
    pub fn override_with(&mut self, key: &str, value: String) -> Result<()> {
        if !is_known(key) {
            bail!("unknown key `{key}`");
        }
        if let Some(old) = self.0.get(key) {
            if *old != value {
                log::warn!("`{key}`: command-line value `{value}` overrides config value `{old}`");
            }
        }
        // a flag choosing the node count replaces the file's choice
        let rivals: &[&str] = match key {
            "network.nodes" => &["network.density", "network.file"],
            "network.density" => &["network.nodes", "network.file"],
            "network.file" => &["network.nodes", "network.density"],
            _ => &[],
        };
        for rival in rivals {
            if let Some(old) = self.0.remove(*rival) {
                log::warn!("`{key}` from the command line replaces config `{rival} = {old}`");
            }
        }
        self.0.insert(key.to_string(), value);
        Ok(())
    }

    pub fn resolve(&self) -> Result<RunConfig> {
        RunConfig::from_entries(self)
    }
}

fn parse<T: FromStr>(entries: &Entries, key: &str, default: T) -> Result<T>
where
    T::Err: fmt::Display,
{
    match entries.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|e| anyhow!("invalid value `{v}` for `{key}`: {e}")),
    }
}

fn parse_with<T>(entries: &Entries, key: &str, default: T, f: impl Fn(&str) -> Option<T>, expected: &str) -> Result<T> {
    match entries.get(key) {
        None => Ok(default),
        Some(v) => f(v).ok_or_else(|| anyhow!("invalid value `{v}` for `{key}`: expected {expected}")),
    }
}

fn ensure(ok: bool, key: &str, reason: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        bail!("invalid value for `{key}`: {reason}")
    }
}

fn parse_sub_areas(text: &str) -> Option<Vec<SubArea>> {
    text.split(',')
        .map(|item| {
            let parts: Vec<f64> = item
                .trim()
                .split(':')
                .map(|p| p.trim().parse().ok())
                .collect::<Option<_>>()?;
            match parts[..] {
                [x, y, r] => Some(SubArea::new(x, y, r)),
                _ => None,
            }
        })
        .collect()
}

impl RunConfig {
    fn from_entries(e: &Entries) -> Result<Self> {
        let command: Command = match e.get("run.command") {
            Some(v) => v.parse().map_err(|err| anyhow!("invalid value `{v}` for `run.command`: {err}"))?,
            None => bail!("missing `run.command` (use --command)"),
        };
        let seeds: Vec<u64> = match e.get("run.seeds") {
            Some(v) => v
                .split(',')
                .map(|s| s.trim().parse::<u64>())
                .collect::<Result<_, _>>()
                .map_err(|err| anyhow!("invalid value `{v}` for `run.seeds`: {err}"))?,
            None => bail!("missing `run.seeds`: seeds must be given explicitly (use --seed)"),
        };
        ensure(!seeds.is_empty(), "run.seeds", "need at least one seed")?;
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        ensure(sorted.len() == seeds.len(), "run.seeds", "seeds must be distinct")?;

        let protocol = parse_with(
            e,
            "run.protocol",
            ProtocolSelector::Both,
            |v| match v {
                "geo" => Some(ProtocolSelector::Geo),
                "outer" => Some(ProtocolSelector::Outer),
                "both" => Some(ProtocolSelector::Both),
                _ => None,
            },
            "geo, outer or both",
        )?;
        let format = parse_with(
            e,
            "run.format",
            Format::Json,
            |v| match v {
                "json" => Some(Format::Json),
                "csv" => Some(Format::Csv),
                _ => None,
            },
            "json or csv",
        )?;
        let out = e.get("run.out").map(PathBuf::from);

        let given: Vec<&str> = ["network.nodes", "network.density", "network.file"]
            .into_iter()
            .filter(|k| e.get(k).is_some())
            .collect();
        ensure(given.len() <= 1, given.first().copied().unwrap_or(""), &format!("conflicts with `{}`", given.last().unwrap_or(&"")))?;
        let default_nodes = match command {
            Command::Energy | Command::LifetimeFirstDeath | Command::LifetimeThreshold => 1625,
            _ => 1336,
        };
        let network = if let Some(path) = e.get("network.file") {
            let path = PathBuf::from(path);
            ensure(path.is_file(), "network.file", &format!("{} does not exist", path.display()))?;
            ensure(
                matches!(command, Command::Route | Command::Congestion | Command::Energy),
                "network.file",
                "only route, congestion and energy run on a loaded network",
            )?;
            ensure(e.get("network.range").is_none(), "network.range", "a loaded network keeps the range stored in its file")?;
            NetworkSource::File(path)
        } else if e.get("network.density").is_some() {
            let rho: f64 = parse(e, "network.density", 0.0)?;
            ensure(rho.is_finite() && rho >= 2.0, "network.density", "must be at least 2")?;
            NetworkSource::Density(rho)
        } else {
            let n: usize = parse(e, "network.nodes", default_nodes)?;
            ensure(n >= 2, "network.nodes", "must be at least 2")?;
            NetworkSource::Nodes(n)
        };
        let range: f64 = parse(e, "network.range", outerspace_core::network::DEFAULT_RANGE)?;
        ensure(range > 0.0 && range.is_finite(), "network.range", "must be positive")?;
        let battery: u64 = parse(e, "network.battery", outerspace_core::network::DEFAULT_BATTERY)?;
        ensure(battery > 0, "network.battery", "must be positive")?;

        let default_messages = if command.is_lifetime() { 1_000_000 } else { 50_000 };
        let messages: usize = parse(e, "traffic.messages", default_messages)?;
        ensure(messages >= 1, "traffic.messages", "must be at least 1")?;

        let relay_images = parse_with(
            e,
            "routing.relay_images",
            RelayImages::Unfolded,
            |v| match v {
                "unfolded" => Some(RelayImages::Unfolded),
                "fixed" => Some(RelayImages::Fixed),
                _ => None,
            },
            "unfolded or fixed",
        )?;

        let sub_areas = parse_with(e, "congestion.sub_areas", SubArea::defaults(), parse_sub_areas, "comma-separated x:y:radius")?;
        ensure(!sub_areas.is_empty() && sub_areas.len() <= 64, "congestion.sub_areas", "need 1 to 64 areas")?;
        ensure(sub_areas.iter().all(|a| a.radius > 0.0), "congestion.sub_areas", "radius must be positive")?;
        let heatmap_grid: usize = parse(e, "congestion.heatmap_grid", 30)?;
        ensure(heatmap_grid > 0, "congestion.heatmap_grid", "must be positive")?;
        let count_endpoints: bool = parse(e, "congestion.count_endpoints", true)?;

        let threshold: f64 = parse(e, "lifetime.threshold", 0.95)?;
        ensure((0.0..=1.0).contains(&threshold), "lifetime.threshold", "must lie in [0, 1]")?;
        let window: usize = parse(e, "lifetime.window", 1000)?;
        ensure(window > 0, "lifetime.window", "must be positive")?;

        let stretch_samples: usize = parse(e, "stretch.samples", 1_000_000)?;
        ensure(stretch_samples >= 100_000, "stretch.samples", "must be at least 100000")?;
        let stretch_messages: usize = parse(e, "stretch.messages", 10_000)?;

        let symmetry_surface = parse_with(
            e,
            "symmetry.surface",
            Surface::UnitTorus,
            |v| match v {
                "torus" => Some(Surface::UnitTorus),
                "square" => Some(Surface::Square),
                _ => None,
            },
            "torus or square",
        )?;
        let symmetry_nodes: usize = parse(e, "symmetry.nodes", 1000)?;
        ensure(symmetry_nodes >= 2, "symmetry.nodes", "must be at least 2")?;
        let symmetry_regions: usize = parse(e, "symmetry.regions", 4)?;
        ensure(symmetry_regions > 0, "symmetry.regions", "must be positive")?;
        let symmetry_paths: usize = parse(e, "symmetry.paths", 100_000)?;
        let symmetry_deployments: usize = parse(e, "symmetry.deployments", 20)?;
        ensure(
            symmetry_deployments > 0 && symmetry_paths >= symmetry_deployments,
            "symmetry.deployments",
            "need at least one path per deployment",
        )?;
        let symmetry_weight = parse_with(
            e,
            "symmetry.weight",
            PathWeight::Euclidean,
            |v| match v {
                "euclidean" => Some(PathWeight::Euclidean),
                "hops" => Some(PathWeight::Hops),
                _ => None,
            },
            "euclidean or hops",
        )?;

        Ok(Self {
            command,
            seeds,
            protocol,
            format,
            out,
            network,
            range,
            battery,
            messages,
            relay_images,
            sub_areas,
            heatmap_grid,
            count_endpoints,
            threshold,
            window,
            stretch_samples,
            stretch_messages,
            symmetry_surface,
            symmetry_nodes,
            symmetry_regions,
            symmetry_paths,
            symmetry_deployments,
            symmetry_weight,
        })
    }

    /// The resolved config as `key = value` pairs; feeding them back as a
    /// config file reproduces the run.
    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        let join = |v: &[String]| v.join(", ");
        let mut p = vec![
            ("run.command", self.command.to_string()),
            ("run.seeds", join(&self.seeds.iter().map(u64::to_string).collect::<Vec<_>>())),
            ("run.protocol", self.protocol.as_str().to_string()),
            ("run.format", self.format.extension().to_string()),
        ];
        if let Some(out) = &self.out {
            p.push(("run.out", out.display().to_string()));
        }
        p.push(match &self.network {
            NetworkSource::Nodes(n) => ("network.nodes", n.to_string()),
            NetworkSource::Density(d) => ("network.density", d.to_string()),
            NetworkSource::File(f) => ("network.file", f.display().to_string()),
        });
        let areas: Vec<String> = self
            .sub_areas
            .iter()
            .map(|a| format!("{}:{}:{}", a.center.x, a.center.y, a.radius))
            .collect();
        if !matches!(self.network, NetworkSource::File(_)) {
            p.push(("network.range", self.range.to_string()));
        }
        p.extend([
            ("network.battery", self.battery.to_string()),
            ("traffic.messages", self.messages.to_string()),
            (
                "routing.relay_images",
                match self.relay_images {
                    RelayImages::Unfolded => "unfolded",
                    RelayImages::Fixed => "fixed",
                }
                .to_string(),
            ),
            ("congestion.sub_areas", join(&areas)),
            ("congestion.heatmap_grid", self.heatmap_grid.to_string()),
            ("congestion.count_endpoints", self.count_endpoints.to_string()),
            ("lifetime.threshold", self.threshold.to_string()),
            ("lifetime.window", self.window.to_string()),
            ("stretch.samples", self.stretch_samples.to_string()),
            ("stretch.messages", self.stretch_messages.to_string()),
            (
                "symmetry.surface",
                match self.symmetry_surface {
                    Surface::UnitTorus => "torus",
                    Surface::Square => "square",
                }
                .to_string(),
            ),
            ("symmetry.nodes", self.symmetry_nodes.to_string()),
            ("symmetry.regions", self.symmetry_regions.to_string()),
            ("symmetry.paths", self.symmetry_paths.to_string()),
            ("symmetry.deployments", self.symmetry_deployments.to_string()),
            (
                "symmetry.weight",
                match self.symmetry_weight {
                    PathWeight::Euclidean => "euclidean",
                    PathWeight::Hops => "hops",
                }
                .to_string(),
            ),
        ]);
        p
    }

    /// Echo of the config as an ordered JSON object of strings.
    pub fn to_json(&self) -> serde_json::Value {
        let map: serde_json::Map<String, serde_json::Value> = self
            .pairs()
            .into_iter()
            .map(|(k, v)| (k.to_string(), serde_json::Value::String(v)))
            .collect();
        serde_json::Value::Object(map)
    }
}
