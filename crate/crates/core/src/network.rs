//! Node deployment, unit-disk adjacency and battery bookkeeping.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    map_point, square_distance, wrap, FairMapper, GeometryError, ImageChoice, SquarePoint,
    TorusPoint,
};

/// Default radio range, as a fraction of the square side.
pub const DEFAULT_RANGE: f64 = 0.1;
/// Default per-node transmission budget for lifetime experiments.
pub const DEFAULT_BATTERY: u64 = 500;
/// Battery used when an experiment must not see any node death.
pub const UNLIMITED_BATTERY: u64 = u64::MAX;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("invalid network config `{key}`: {reason}")]
    InvalidConfig { key: &'static str, reason: String },
    #[error("network needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("node {0} is dead and cannot transmit")]
    DeadNode(NodeId),
    #[error("no alive node in the network")]
    NoAliveNodes,
    #[error("node ids must be dense and ordered: expected {expected}, found {found}")]
    NonDenseIds { expected: u32, found: u32 },
    #[error("network file side must be 1.0, got {0}")]
    UnsupportedSide(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub pos: SquarePoint,
    pub image_choice: ImageChoice,
    /// `pos` mapped through `image_choice`.
    pub image: TorusPoint,
    pub battery: u64,
}

impl Node {
    pub fn is_alive(&self) -> bool {
        self.battery > 0
    }
}

/// How many nodes to deploy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Deployment {
    /// Node count drawn from a Poisson law with the given mean.
    Poisson { density: f64 },
    Fixed { nodes: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub deployment: Deployment,
    pub range: f64,
    pub seed: u64,
    pub initial_battery: u64,
}

impl NetworkConfig {
    /// `nodes` uniform nodes with the default range and battery.
    pub fn fixed(nodes: usize, seed: u64) -> Self {
        Self {
            deployment: Deployment::Fixed { nodes },
            range: DEFAULT_RANGE,
            seed,
            initial_battery: DEFAULT_BATTERY,
        }
    }

    pub fn poisson(density: f64, seed: u64) -> Self {
        Self {
            deployment: Deployment::Poisson { density },
            ..Self::fixed(0, seed)
        }
    }

    pub fn with_battery(mut self, battery: u64) -> Self {
        self.initial_battery = battery;
        self
    }

    pub fn with_range(mut self, range: f64) -> Self {
        self.range = range;
        self
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        if !(self.range.is_finite() && self.range > 0.0) {
            return Err(NetworkError::InvalidConfig {
                key: "range",
                reason: format!("must be a positive number, got {}", self.range),
            });
        }
        if self.initial_battery == 0 {
            return Err(NetworkError::InvalidConfig {
                key: "initial_battery",
                reason: "must be positive".into(),
            });
        }
        match self.deployment {
            Deployment::Fixed { nodes } if nodes < 2 => Err(NetworkError::InvalidConfig {
                key: "nodes",
                reason: format!("must be at least 2, got {nodes}"),
            }),
            Deployment::Poisson { density } if !(density.is_finite() && density >= 2.0) => {
                Err(NetworkError::InvalidConfig {
                    key: "density",
                    reason: format!("expected node count must be at least 2, got {density}"),
                })
            }
            _ => Ok(()),
        }
    }
}

/// Where nodes live when building unit-disk adjacency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Surface {
    /// The unit square with Euclidean distance.
    Square,
    /// The unit square with opposite sides glued (side-1 torus).
    UnitTorus,
}

impl Surface {
    pub fn distance(self, a: SquarePoint, b: SquarePoint) -> f64 {
        match self {
            Surface::Square => square_distance(a, b),
            Surface::UnitTorus => {
                let dx = (a.x - b.x).abs();
                let dy = (a.y - b.y).abs();
                dx.min(1.0 - dx).hypot(dy.min(1.0 - dy))
            }
        }
    }
}

/// Builds unit-disk adjacency lists (ascending ids) using a uniform grid of
/// cells no smaller than `range`.
pub fn unit_disk_adjacency(
    positions: &[SquarePoint],
    range: f64,
    surface: Surface,
) -> Vec<Vec<NodeId>> {
    let cells = ((1.0 / range).floor() as usize).clamp(1, 4096);
    let cell_of = |v: f64| ((v * cells as f64) as usize).min(cells - 1);
    let mut grid: Vec<Vec<u32>> = vec![Vec::new(); cells * cells];
    for (i, p) in positions.iter().enumerate() {
        let (x, y) = match surface {
            Surface::Square => (p.x, p.y),
            Surface::UnitTorus => (wrap(p.x, 1.0), wrap(p.y, 1.0)),
        };
        grid[cell_of(y) * cells + cell_of(x)].push(i as u32);
    }

    let offsets = |c: usize| -> Vec<usize> {
        let mut out = Vec::with_capacity(3);
        for d in [-1i64, 0, 1] {
            let n = c as i64 + d;
            let n = match surface {
                Surface::Square if n < 0 || n >= cells as i64 => continue,
                Surface::Square => n as usize,
                Surface::UnitTorus => n.rem_euclid(cells as i64) as usize,
            };
            if !out.contains(&n) {
                out.push(n);
            }
        }
        out
    };

    let mut adjacency = vec![Vec::new(); positions.len()];
    for cy in 0..cells {
        let rows = offsets(cy);
        for cx in 0..cells {
            let cols = offsets(cx);
            for &i in &grid[cy * cells + cx] {
                let list: &mut Vec<NodeId> = &mut adjacency[i as usize];
                for &ny in &rows {
                    for &nx in &cols {
                        for &j in &grid[ny * cells + nx] {
                            if j != i
                                && surface.distance(positions[i as usize], positions[j as usize])
                                    <= range
                            {
                                list.push(NodeId(j));
                            }
                        }
                    }
                }
                list.sort_unstable();
            }
        }
    }
    adjacency
}

/// A deployed network on the unit square.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    config: NetworkConfig,
    mapper: FairMapper,
    nodes: Vec<Node>,
    adjacency: Vec<Vec<NodeId>>,
}

impl Network {
    pub fn generate(config: &NetworkConfig) -> Result<Self, NetworkError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let count = match config.deployment {
            Deployment::Fixed { nodes } => nodes,
            Deployment::Poisson { density } => {
                let poisson = Poisson::new(density).map_err(|e| NetworkError::InvalidConfig {
                    key: "density",
                    reason: e.to_string(),
                })?;
                poisson.sample(&mut rng) as usize
            }
        };
        if count < 2 {
            return Err(NetworkError::TooFewNodes(count));
        }
        let positions: Vec<_> = (0..count).map(|_| SquarePoint::random(&mut rng)).collect();
        Ok(Self::build(*config, positions))
    }

    /// Builds a network from explicit positions; node `i` gets id `i`.
    pub fn from_positions(
        positions: Vec<SquarePoint>,
        range: f64,
        seed: u64,
        initial_battery: u64,
    ) -> Result<Self, NetworkError> {
        let config = NetworkConfig {
            deployment: Deployment::Fixed {
                nodes: positions.len(),
            },
            range,
            seed,
            initial_battery,
        };
        config.validate()?;
        for p in &positions {
            SquarePoint::new(p.x, p.y)?;
        }
        Ok(Self::build(config, positions))
    }

    fn build(config: NetworkConfig, positions: Vec<SquarePoint>) -> Self {
        let mapper = FairMapper::new(config.seed);
        let adjacency = unit_disk_adjacency(&positions, config.range, Surface::Square);
        let nodes = positions
            .into_iter()
            .enumerate()
            .map(|(i, pos)| {
                let image_choice = mapper.node_image_choice(i as u32);
                Node {
                    id: NodeId(i as u32),
                    pos,
                    image_choice,
                    image: map_point(pos, image_choice),
                    battery: config.initial_battery,
                }
            })
            .collect();
        Self {
            config,
            mapper,
            nodes,
            adjacency,
        }
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn mapper(&self) -> FairMapper {
        self.mapper
    }

    pub fn range(&self) -> f64 {
        self.config.range
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Result<&Node, NetworkError> {
        self.nodes.get(id.index()).ok_or(NetworkError::UnknownNode(id))
    }

    /// All unit-disk neighbors, dead or alive.
    pub fn neighbors(&self, id: NodeId) -> Result<&[NodeId], NetworkError> {
        self.adjacency
            .get(id.index())
            .map(Vec::as_slice)
            .ok_or(NetworkError::UnknownNode(id))
    }

    pub fn adjacency(&self) -> &[Vec<NodeId>] {
        &self.adjacency
    }

    pub fn alive_neighbors(&self, id: NodeId) -> Result<Vec<NodeId>, NetworkError> {
        Ok(self
            .neighbors(id)?
            .iter()
            .copied()
            .filter(|n| self.nodes[n.index()].is_alive())
            .collect())
    }

    /// Charges one transmission to `id` and returns the remaining battery.
    pub fn consume_transmission(&mut self, id: NodeId) -> Result<u64, NetworkError> {
        let node = self
            .nodes
            .get_mut(id.index())
            .ok_or(NetworkError::UnknownNode(id))?;
        if node.battery == 0 {
            return Err(NetworkError::DeadNode(id));
        }
        node.battery -= 1;
        Ok(node.battery)
    }

    /// The alive node closest to `p`; ties go to the smaller id.
    pub fn nearest_node(&self, p: SquarePoint) -> Result<NodeId, NetworkError> {
        let mut best: Option<(f64, NodeId)> = None;
        for n in self.nodes.iter().filter(|n| n.is_alive()) {
            let d = square_distance(n.pos, p);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, n.id));
            }
        }
        best.map(|(_, id)| id).ok_or(NetworkError::NoAliveNodes)
    }

    pub fn set_all_batteries(&mut self, battery: u64) {
        for n in &mut self.nodes {
            n.battery = battery;
        }
    }

    pub fn alive_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_alive()).count()
    }

    /// Transmissions charged since deployment, summed over all nodes.
    pub fn total_consumed(&self) -> u64 {
        self.nodes
            .iter()
            .map(|n| self.config.initial_battery.saturating_sub(n.battery))
            .sum()
    }

    pub fn mean_degree(&self) -> f64 {
        let edges: usize = self.adjacency.iter().map(Vec::len).sum();
        edges as f64 / self.nodes.len() as f64
    }

    pub fn to_file(&self) -> NetworkFile {
        NetworkFile {
            side: 1.0,
            range: self.config.range,
            seed: self.config.seed,
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeRecord {
                    id: n.id.0,
                    x: n.pos.x,
                    y: n.pos.y,
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> Result<String, NetworkError> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_file(file: &NetworkFile, initial_battery: u64) -> Result<Self, NetworkError> {
        if file.side != 1.0 {
            return Err(NetworkError::UnsupportedSide(file.side));
        }
        let mut positions = Vec::with_capacity(file.nodes.len());
        for (i, rec) in file.nodes.iter().enumerate() {
            if rec.id != i as u32 {
                return Err(NetworkError::NonDenseIds {
                    expected: i as u32,
                    found: rec.id,
                });
            }
            positions.push(SquarePoint::new(rec.x, rec.y)?);
        }
        Self::from_positions(positions, file.range, file.seed, initial_battery)
    }

    pub fn from_json(json: &str, initial_battery: u64) -> Result<Self, NetworkError> {
        Self::from_file(&serde_json::from_str(json)?, initial_battery)
    }
}

/// On-disk network layout. Batteries and images are rebuilt on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub side: f64,
    pub range: f64,
    pub seed: u64,
    pub nodes: Vec<NodeRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRecord {
    pub id: u32,
    pub x: f64,
    pub y: f64,
}

/// Draws `count` uniform points on the unit square from `rng`.
pub fn uniform_positions<R: Rng + ?Sized>(rng: &mut R, count: usize) -> Vec<SquarePoint> {
    (0..count).map(|_| SquarePoint::random(rng)).collect()
}
