use serde::{Deserialize, Serialize};

use super::{generate_traffic, traffic_digest, Driver, ExperimentError, TrafficConfig};
use crate::geometry::{square_distance, SquarePoint};
use crate::network::{Network, NodeId, UNLIMITED_BATTERY};
use crate::routing::{Protocol, RelayImages, RouteOutcome};

/// A circular probe region on the square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubArea {
    pub center: SquarePoint,
    pub radius: f64,
}

impl SubArea {
    pub const DEFAULT_RADIUS: f64 = 0.1;

    pub fn new(x: f64, y: f64, radius: f64) -> Self {
        Self {
            center: SquarePoint { x, y },
            radius,
        }
    }

    /// The centre of the square and the four middle-half-diagonal points.
    pub fn defaults() -> Vec<SubArea> {
        [(0.5, 0.5), (0.25, 0.25), (0.25, 0.75), (0.75, 0.25), (0.75, 0.75)]
            .into_iter()
            .map(|(x, y)| SubArea::new(x, y, Self::DEFAULT_RADIUS))
            .collect()
    }

    pub fn contains(&self, p: SquarePoint) -> bool {
        square_distance(self.center, p) <= self.radius
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CongestionOptions {
    pub sub_areas: Vec<SubArea>,
    pub heatmap_grid: usize,
    pub relay_images: RelayImages,
    /// Count a message for an area when its source or terminal node lies
    /// there, not only when a relay does.
    pub count_endpoints: bool,
}

impl Default for CongestionOptions {
    fn default() -> Self {
        Self {
            sub_areas: SubArea::defaults(),
            heatmap_grid: 30,
            relay_images: RelayImages::default(),
            count_endpoints: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubAreaReport {
    pub area: SubArea,
    /// Messages with at least one path node (endpoints included) in the area.
    pub traversing: u64,
    pub fraction: f64,
}

/// Relay counts binned on a `size x size` grid over the square.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub size: usize,
    /// Row-major; row indexes y, column indexes x.
    pub counts: Vec<u64>,
}

impl Heatmap {
    pub fn cell(&self, row: usize, col: usize) -> u64 {
        self.counts[row * self.size + col]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CongestionReport {
    pub protocol: Protocol,
    pub messages: u64,
    pub delivered: u64,
    pub dead_ends: u64,
    pub transmissions: u64,
    pub traffic_digest: String,
    pub sub_areas: Vec<SubAreaReport>,
    /// Per node: messages it forwarded as an intermediate relay.
    pub relay_counts: Vec<u64>,
    pub heatmap: Heatmap,
}

impl CongestionReport {
    pub fn fractions(&self) -> Vec<f64> {
        self.sub_areas.iter().map(|a| a.fraction).collect()
    }

    /// Coefficient of variation of per-node relay counts.
    pub fn relay_cv(&self) -> f64 {
        let v: Vec<f64> = self.relay_counts.iter().map(|&c| c as f64).collect();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        var.sqrt() / mean
    }
}

/// Routes the traffic once with `protocol` and measures where it goes.
///
/// Batteries are lifted to unlimited first so no node dies mid-measurement.
pub fn run_congestion(
    net: &Network,
    traffic: &TrafficConfig,
    protocol: Protocol,
    opts: &CongestionOptions,
) -> Result<CongestionReport, ExperimentError> {
    if opts.sub_areas.len() > 64 {
        return Err(ExperimentError::InvalidConfig {
            key: "sub_areas",
            reason: "at most 64 sub-areas".into(),
        });
    }
    if opts.heatmap_grid == 0 {
        return Err(ExperimentError::InvalidConfig {
            key: "heatmap_grid",
            reason: "must be positive".into(),
        });
    }
    let pairs = generate_traffic(net, traffic)?;
    measure(net, &pairs, traffic.seed, protocol, opts)
}

fn measure(
    net: &Network,
    pairs: &[(NodeId, NodeId)],
    traffic_seed: u64,
    protocol: Protocol,
    opts: &CongestionOptions,
) -> Result<CongestionReport, ExperimentError> {
    let mut fresh = net.clone();
    fresh.set_all_batteries(UNLIMITED_BATTERY);

    let membership: Vec<u64> = net
        .nodes()
        .iter()
        .map(|n| {
            opts.sub_areas
                .iter()
                .enumerate()
                .filter(|(_, a)| a.contains(n.pos))
                .fold(0u64, |m, (i, _)| m | 1 << i)
        })
        .collect();

    let mut driver = Driver::new(fresh, protocol, opts.relay_images, traffic_seed);
    let mut tally = Tally::new(net.len(), opts.sub_areas.len());
    for &(src, dst) in pairs {
        if let Some(out) = driver.send(src, dst)? {
            tally.record(&out, &membership, opts.count_endpoints);
        }
    }

    let transmissions = driver.net.nodes().iter().map(|n| UNLIMITED_BATTERY - n.battery).sum();
    let messages = pairs.len() as u64;
    let grid = opts.heatmap_grid;
    let mut heatmap = vec![0u64; grid * grid];
    for (node, &count) in net.nodes().iter().zip(&tally.relays) {
        let cell = |v: f64| ((v * grid as f64) as usize).min(grid - 1);
        heatmap[cell(node.pos.y) * grid + cell(node.pos.x)] += count;
    }
    Ok(CongestionReport {
        protocol,
        messages,
        delivered: tally.delivered,
        dead_ends: messages - tally.delivered,
        transmissions,
        traffic_digest: traffic_digest(pairs),
        sub_areas: opts
            .sub_areas
            .iter()
            .zip(&tally.traversing)
            .map(|(&area, &traversing)| SubAreaReport {
                area,
                traversing,
                fraction: traversing as f64 / messages as f64,
            })
            .collect(),
        relay_counts: tally.relays,
        heatmap: Heatmap {
            size: grid,
            counts: heatmap,
        },
    })
}

struct Tally {
    delivered: u64,
    traversing: Vec<u64>,
    relays: Vec<u64>,
}

impl Tally {
    fn new(nodes: usize, areas: usize) -> Self {
        Self {
            delivered: 0,
            traversing: vec![0; areas],
            relays: vec![0; nodes],
        }
    }

    fn record(&mut self, out: &RouteOutcome, membership: &[u64], count_endpoints: bool) {
        self.delivered += u64::from(out.delivered());
        let members = if count_endpoints { &out.path[..] } else { out.relays() };
        let mask = members.iter().fold(0u64, |m, n| m | membership[n.index()]);
        for (i, t) in self.traversing.iter_mut().enumerate() {
            *t += mask >> i & 1;
        }
        for r in out.relays() {
            self.relays[r.index()] += 1;
        }
    }
}
