//! Greedy geographic routing, its outer-space counterpart, and an exact
//! shortest-path oracle used to validate both.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    all_images, map_point, random_image_choice, square_distance, torus_distance, ImageChoice,
    SquarePoint, TorusPoint,
};
use crate::network::{Network, NetworkError, NodeId};

#[derive(Debug, Error)]
pub enum RoutingError {
    #[error("message source and destination are both node {0}")]
    SameEndpoints(NodeId),
    #[error("source node {0} is dead")]
    DeadSource(NodeId),
    #[error("outer-space routing needs a destination image")]
    MissingDestImage,
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Geographic,
    OuterSpace,
}

impl Protocol {
    pub const BOTH: [Protocol; 2] = [Protocol::Geographic, Protocol::OuterSpace];

    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Geographic => "geographic",
            Protocol::OuterSpace => "outer_space",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which torus images a relay may occupy under outer-space routing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelayImages {
    /// The message tracks the image it currently sits at; any image of any
    /// alive neighbor within range of it on the torus is a candidate.
    #[default]
    Unfolded,
    /// Relays only ever sit at their own seeded image, and only neighbors
    /// whose image is within range on the torus are candidates.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub source: NodeId,
    pub dest: NodeId,
    pub dest_pos: SquarePoint,
    /// Destination as seen in outer space; set only for outer-space messages.
    pub dest_image: Option<TorusPoint>,
}

impl Message {
    pub fn geographic(net: &Network, source: NodeId, dest: NodeId) -> Result<Self, RoutingError> {
        if source == dest {
            return Err(RoutingError::SameEndpoints(source));
        }
        net.node(source)?;
        Ok(Self {
            source,
            dest,
            dest_pos: net.node(dest)?.pos,
            dest_image: None,
        })
    }

    /// An outer-space message whose destination image uses `choice`.
    pub fn outer_space(
        net: &Network,
        source: NodeId,
        dest: NodeId,
        choice: ImageChoice,
    ) -> Result<Self, RoutingError> {
        let mut msg = Self::geographic(net, source, dest)?;
        msg.dest_image = Some(map_point(msg.dest_pos, choice));
        Ok(msg)
    }
}

/// Builds an outer-space message with a destination image drawn from `rng`.
pub fn make_outer_space_message<R: Rng + ?Sized>(
    net: &Network,
    source: NodeId,
    dest: NodeId,
    rng: &mut R,
) -> Result<Message, RoutingError> {
    Message::outer_space(net, source, dest, random_image_choice(rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteStatus {
    Delivered,
    DeadEnd,
}

impl RouteStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RouteStatus::Delivered => "delivered",
            RouteStatus::DeadEnd => "dead_end",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteOutcome {
    pub path: Vec<NodeId>,
    pub status: RouteStatus,
    /// Distance to the target (square or torus) at each path node.
    pub distances: Vec<f64>,
}

impl RouteOutcome {
    pub fn hops(&self) -> usize {
        self.path.len() - 1
    }

    pub fn delivered(&self) -> bool {
        self.status == RouteStatus::Delivered
    }

    /// Nodes that forwarded the message without being its source.
    pub fn relays(&self) -> &[NodeId] {
        let end = self.path.len().saturating_sub(1);
        &self.path[1.min(end)..end]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouteRequest {
    pub protocol: Protocol,
    pub message: Message,
}

pub fn route(net: &mut Network, req: &RouteRequest) -> Result<RouteOutcome, RoutingError> {
    match req.protocol {
        Protocol::Geographic => route_geographic(net, &req.message),
        Protocol::OuterSpace => route_outer_space(net, &req.message),
    }
}

fn check_source(net: &Network, msg: &Message) -> Result<(), RoutingError> {
    if msg.source == msg.dest {
        return Err(RoutingError::SameEndpoints(msg.source));
    }
    net.node(msg.dest)?;
    if !net.node(msg.source)?.is_alive() {
        return Err(RoutingError::DeadSource(msg.source));
    }
    Ok(())
}

/// Greedy forwarding on the square towards `msg.dest_pos`.
pub fn route_geographic(net: &mut Network, msg: &Message) -> Result<RouteOutcome, RoutingError> {
    check_source(net, msg)?;
    let target = msg.dest_pos;
    let mut current = msg.source;
    let mut current_dist = square_distance(net.node(current)?.pos, target);
    let mut path = vec![current];
    let mut distances = vec![current_dist];

    while current != msg.dest {
        let mut best: Option<(f64, NodeId)> = None;
        for &w in net.neighbors(current)? {
            let node = &net.nodes()[w.index()];
            if !node.is_alive() {
                continue;
            }
            let d = square_distance(node.pos, target);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, w));
            }
        }
        match best {
            Some((d, w)) if d < current_dist => {
                net.consume_transmission(current)?;
                current = w;
                current_dist = d;
                path.push(w);
                distances.push(d);
            }
            _ => return Ok(dead_end(path, distances)),
        }
    }
    Ok(RouteOutcome {
        path,
        status: RouteStatus::Delivered,
        distances,
    })
}

fn dead_end(path: Vec<NodeId>, distances: Vec<f64>) -> RouteOutcome {
    RouteOutcome {
        path,
        status: RouteStatus::DeadEnd,
        distances,
    }
}

/// Greedy forwarding in outer space with the default relay rule.
pub fn route_outer_space(net: &mut Network, msg: &Message) -> Result<RouteOutcome, RoutingError> {
    route_outer_space_with(net, msg, RelayImages::Unfolded)
}

/// Greedy forwarding on the torus towards `msg.dest_image`.
///
/// Transmission stays physical: every hop goes to an alive unit-disk
/// neighbor on the square. A candidate image must lie within the radio range
/// of the message's current image on the torus, which by domination implies
/// the physical link exists.
pub fn route_outer_space_with(
    net: &mut Network,
    msg: &Message,
    relays: RelayImages,
) -> Result<RouteOutcome, RoutingError> {
    check_source(net, msg)?;
    let target = msg.dest_image.ok_or(RoutingError::MissingDestImage)?;
    let range = net.range();
    let mut current = msg.source;
    let mut current_image = net.node(current)?.image;
    let mut current_dist = torus_distance(current_image, target);
    let mut path = vec![current];
    let mut distances = vec![current_dist];

    while current != msg.dest {
        let mut best: Option<(f64, NodeId, TorusPoint)> = None;
        let mut consider = |w: NodeId, image: TorusPoint| {
            if torus_distance(image, current_image) > range {
                return;
            }
            let d = torus_distance(image, target);
            if best.is_none_or(|(bd, _, _)| d < bd) {
                best = Some((d, w, image));
            }
        };
        for &w in net.neighbors(current)? {
            let node = &net.nodes()[w.index()];
            if !node.is_alive() || path.contains(&w) {
                continue;
            }
            match relays {
                RelayImages::Unfolded => {
                    for image in all_images(node.pos) {
                        consider(w, image);
                    }
                }
                RelayImages::Fixed if w == msg.dest => consider(w, target),
                RelayImages::Fixed => consider(w, node.image),
            }
        }
        match best {
            Some((d, w, image)) if d < current_dist => {
                net.consume_transmission(current)?;
                current = w;
                current_image = image;
                current_dist = d;
                path.push(w);
                distances.push(d);
            }
            _ => return Ok(dead_end(path, distances)),
        }
    }
    Ok(RouteOutcome {
        path,
        status: RouteStatus::Delivered,
        distances,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathWeight {
    Hops,
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cost(f64);

impl Eq for Cost {}

impl PartialOrd for Cost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cost {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Single-source shortest paths (Dijkstra) over an adjacency list.
///
/// Among equal-cost predecessors the smallest id wins, so trees are fully
/// deterministic.
#[derive(Debug, Clone)]
pub struct ShortestPathTree {
    source: NodeId,
    dist: Vec<f64>,
    parent: Vec<Option<NodeId>>,
}

impl ShortestPathTree {
    pub fn compute(
        adjacency: &[Vec<NodeId>],
        source: NodeId,
        weight: impl Fn(NodeId, NodeId) -> f64,
        usable: impl Fn(NodeId) -> bool,
    ) -> Self {
        let n = adjacency.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut parent = vec![None; n];
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        if source.index() < n && usable(source) {
            dist[source.index()] = 0.0;
            heap.push(Reverse((Cost(0.0), source)));
        }
        while let Some(Reverse((Cost(d), u))) = heap.pop() {
            if done[u.index()] {
                continue;
            }
            done[u.index()] = true;
            for &v in &adjacency[u.index()] {
                if done[v.index()] || !usable(v) {
                    continue;
                }
                let nd = d + weight(u, v);
                let slot = &mut dist[v.index()];
                if nd < *slot {
                    *slot = nd;
                    parent[v.index()] = Some(u);
                    heap.push(Reverse((Cost(nd), v)));
                } else if nd == *slot && parent[v.index()].is_some_and(|p| u < p) {
                    parent[v.index()] = Some(u);
                }
            }
        }
        Self {
            source,
            dist,
            parent,
        }
    }

    pub fn distance(&self, dst: NodeId) -> Option<f64> {
        self.dist.get(dst.index()).copied().filter(|d| d.is_finite())
    }

    pub fn path_to(&self, dst: NodeId) -> Option<Vec<NodeId>> {
        self.distance(dst)?;
        let mut path = vec![dst];
        let mut at = dst;
        while at != self.source {
            at = self.parent[at.index()]?;
            path.push(at);
        }
        path.reverse();
        Some(path)
    }
}

/// Exact shortest path between two alive nodes, or `None` if unreachable.
pub fn oracle_shortest_path(
    net: &Network,
    src: NodeId,
    dst: NodeId,
    weight: PathWeight,
) -> Result<Option<Vec<NodeId>>, RoutingError> {
    net.node(src)?;
    net.node(dst)?;
    let nodes = net.nodes();
    let tree = ShortestPathTree::compute(
        net.adjacency(),
        src,
        |u, v| match weight {
            PathWeight::Hops => 1.0,
            PathWeight::Euclidean => square_distance(nodes[u.index()].pos, nodes[v.index()].pos),
        },
        |u| nodes[u.index()].is_alive(),
    );
    Ok(tree.path_to(dst))
}
