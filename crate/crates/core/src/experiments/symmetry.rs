use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::geometry::splitmix64;
use crate::network::{uniform_positions, unit_disk_adjacency, NodeId, Surface};
use crate::routing::{PathWeight, ShortestPathTree};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryConfig {
    pub surface: Surface,
    pub nodes: usize,
    pub range: f64,
    /// The surface is split into `regions x regions` cells.
    pub regions: usize,
    /// Shortest paths routed in total, split evenly across deployments.
    pub paths: usize,
    /// Independent uniform deployments averaged together.
    pub deployments: usize,
    pub seed: u64,
    pub weight: PathWeight,
}

impl SymmetryConfig {
    pub fn new(surface: Surface, seed: u64) -> Self {
        Self {
            surface,
            nodes: 1000,
            range: 0.1,
            regions: 4,
            paths: 100_000,
            deployments: 20,
            seed,
            weight: PathWeight::Euclidean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub surface: Surface,
    pub regions: usize,
    /// Row-major: mean number of times a node of the region relays a path,
    /// per routed path.
    pub region_frequency: Vec<f64>,
    /// Largest over smallest regional frequency.
    pub max_min_ratio: f64,
    /// Mean of regions not touching the border over mean of the four corner
    /// regions; needs at least 3 regions per side.
    pub center_corner_ratio: Option<f64>,
    pub paths_routed: u64,
    pub unreachable: u64,
}

/// Measures how evenly oracle shortest paths load the surface.
///
/// A symmetric surface gives every region the same relay frequency.
pub fn run_symmetry_check(cfg: &SymmetryConfig) -> Result<SymmetryReport, ExperimentError> {
    let invalid = |key, reason: &str| ExperimentError::InvalidConfig {
        key,
        reason: reason.into(),
    };
    if cfg.nodes < 2 {
        return Err(invalid("nodes", "need at least 2"));
    }
    if cfg.regions == 0 {
        return Err(invalid("regions", "must be positive"));
    }
    if cfg.deployments == 0 || cfg.paths < cfg.deployments {
        return Err(invalid("deployments", "need at least one path per deployment"));
    }
    if !(cfg.range > 0.0) {
        return Err(invalid("range", "must be positive"));
    }

    let k = cfg.regions;
    let mut relays = vec![0u64; k * k];
    let mut members = vec![0u64; k * k];
    let mut routed = 0u64;
    let mut unreachable = 0u64;
    let per = cfg.paths / cfg.deployments;

    for d in 0..cfg.deployments {
        let count = if d + 1 == cfg.deployments { cfg.paths - per * d } else { per };
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(cfg.seed.wrapping_add(d as u64)));
        let pos = uniform_positions(&mut rng, cfg.nodes);
        let adjacency = unit_disk_adjacency(&pos, cfg.range, cfg.surface);

        let n = cfg.nodes as u32;
        let mut by_source: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        for _ in 0..count {
            let s = rng.random_range(0..n);
            let mut t = rng.random_range(0..n - 1);
            if t >= s {
                t += 1;
            }
            by_source.entry(s).or_default().push(t);
        }

        let mut load = vec![0u64; cfg.nodes];
        for (s, targets) in by_source {
            let tree = ShortestPathTree::compute(
                &adjacency,
                NodeId(s),
                |u, v| match cfg.weight {
                    PathWeight::Hops => 1.0,
                    PathWeight::Euclidean => cfg.surface.distance(pos[u.index()], pos[v.index()]),
                },
                |_| true,
            );
            for t in targets {
                match tree.path_to(NodeId(t)) {
                    Some(path) => {
                        routed += 1;
                        for r in &path[1..path.len() - 1] {
                            load[r.index()] += 1;
                        }
                    }
                    None => unreachable += 1,
                }
            }
        }
        let cell = |v: f64| ((v * k as f64) as usize).min(k - 1);
        for (p, l) in pos.iter().zip(load) {
            let region = cell(p.y) * k + cell(p.x);
            relays[region] += l;
            members[region] += 1;
        }
    }

    let total = (routed + unreachable) as f64;
    let region_frequency: Vec<f64> = relays
        .iter()
        .zip(&members)
        .map(|(&r, &m)| if m == 0 { f64::NAN } else { r as f64 / m as f64 / total })
        .collect();
    let populated = region_frequency.iter().copied().filter(|f| !f.is_nan());
    let max = populated.clone().fold(f64::NEG_INFINITY, f64::max);
    let min = populated.fold(f64::INFINITY, f64::min);
    let center_corner_ratio = (k >= 3).then(|| {
        let inner: Vec<f64> = (1..k - 1)
            .flat_map(|r| (1..k - 1).map(move |c| (r, c)))
            .map(|(r, c)| region_frequency[r * k + c])
            .collect();
        let corners = [0, k - 1, k * (k - 1), k * k - 1].map(|i| region_frequency[i]);
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        mean(&inner) / mean(&corners)
    });
    Ok(SymmetryReport {
        surface: cfg.surface,
        regions: k,
        region_frequency,
        max_min_ratio: max / min,
        center_corner_ratio,
        paths_routed: routed,
        unreachable,
    })
}
