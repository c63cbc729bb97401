//! Measurement harnesses.
//!
//! Every harness is a pure function of its network/traffic configuration, so
//! reruns with the same seeds produce identical reports. Both protocols are
//! always fed the same network and the same `(source, destination)` stream.

mod congestion;
mod energy;
mod lifetime;
mod stretch;
mod symmetry;
mod traces;

pub use congestion::{run_congestion, CongestionOptions, CongestionReport, Heatmap, SubArea, SubAreaReport};
pub use energy::{run_energy, run_energy_on, EnergyReport, ProtocolEnergy};
pub use lifetime::{
    run_lifetime_delivery_threshold, run_lifetime_first_death, LifetimeComparison, ALIVE_SAMPLE_INTERVAL,
    LifetimeOptions, LifetimeReport, StopCause,
};
pub use stretch::{run_stretch, StretchConfig, StretchReport};
pub use symmetry::{run_symmetry_check, SymmetryConfig, SymmetryReport};
pub use traces::{run_traces, RouteTrace};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::{random_image_choice, splitmix64};
use crate::network::{Network, NetworkError, NodeId};
use crate::routing::{
    route_geographic, route_outer_space_with, Message, Protocol, RelayImages, RouteOutcome,
    RoutingError,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment parameter `{key}`: {reason}")]
    InvalidConfig { key: &'static str, reason: String },
    #[error(
        "{protocol} traffic exhausted after {injected} messages without the stop condition; \
         raise the message count or lower the battery"
    )]
    TrafficExhausted { protocol: Protocol, injected: usize },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Routing(#[from] RoutingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrafficConfig {
    pub message_count: usize,
    pub seed: u64,
}

impl TrafficConfig {
    pub fn new(message_count: usize, seed: u64) -> Self {
        Self {
            message_count,
            seed,
        }
    }

    /// Traffic seeded independently of the network built from `network_seed`.
    pub fn for_network(message_count: usize, network_seed: u64) -> Self {
        Self::new(message_count, splitmix64(network_seed))
    }
}

/// Uniform traffic: ordered pairs of distinct nodes, drawn independently.
pub fn generate_traffic(
    net: &Network,
    cfg: &TrafficConfig,
) -> Result<Vec<(NodeId, NodeId)>, ExperimentError> {
    if cfg.message_count == 0 {
        return Err(ExperimentError::InvalidConfig {
            key: "message_count",
            reason: "must be at least 1".into(),
        });
    }
    let n = net.len() as u32;
    if n < 2 {
        return Err(NetworkError::TooFewNodes(net.len()).into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok((0..cfg.message_count)
        .map(|_| {
            let src = rng.random_range(0..n);
            let mut dst = rng.random_range(0..n - 1);
            if dst >= src {
                dst += 1;
            }
            (NodeId(src), NodeId(dst))
        })
        .collect())
}

/// SHA-256 over the little-endian `(src, dst)` ids.
pub fn traffic_digest(pairs: &[(NodeId, NodeId)]) -> String {
    let mut h = Sha256::new();
    for (s, d) in pairs {
        h.update(s.0.to_le_bytes());
        h.update(d.0.to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// Routes one traffic stream with a single protocol, owning its network copy.
pub(crate) struct Driver {
    pub net: Network,
    protocol: Protocol,
    relay_images: RelayImages,
    // destination images come from their own stream so geographic and
    // outer-space runs consume identical (src, dst) sequences
    image_rng: ChaCha8Rng,
}

impl Driver {
    pub fn new(net: Network, protocol: Protocol, relay_images: RelayImages, traffic_seed: u64) -> Self {
        let mut image_rng = ChaCha8Rng::seed_from_u64(traffic_seed);
        image_rng.set_stream(1);
        Self {
            net,
            protocol,
            relay_images,
            image_rng,
        }
    }

    /// Routes one message. Returns `None` when either endpoint is already
    /// dead: nothing is transmitted and the message counts as lost.
    pub fn send(&mut self, src: NodeId, dst: NodeId) -> Result<Option<RouteOutcome>, ExperimentError> {
        let choice = random_image_choice(&mut self.image_rng);
        if !self.net.node(src)?.is_alive() || !self.net.node(dst)?.is_alive() {
            return Ok(None);
        }
        let outcome = match self.protocol {
            Protocol::Geographic => {
                let msg = Message::geographic(&self.net, src, dst)?;
                route_geographic(&mut self.net, &msg)?
            }
            Protocol::OuterSpace => {
                let msg = Message::outer_space(&self.net, src, dst, choice)?;
                route_outer_space_with(&mut self.net, &msg, self.relay_images)?
            }
        };
        Ok(Some(outcome))
    }
}

/// Mean and sample standard deviation.
pub fn mean_stddev(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NetworkConfig;

    #[test]
    fn traffic_replays_under_seed() {
        let net = Network::generate(&NetworkConfig::fixed(100, 1)).unwrap();
        let cfg = TrafficConfig::new(1000, 5);
        let a = generate_traffic(&net, &cfg).unwrap();
        assert_eq!(a, generate_traffic(&net, &cfg).unwrap());
        assert_eq!(traffic_digest(&a), traffic_digest(&a.clone()));
        assert_ne!(a, generate_traffic(&net, &TrafficConfig::new(1000, 6)).unwrap());
        assert!(a.iter().all(|(s, d)| s != d));
    }

    #[test]
    fn traffic_sources_are_uniform() {
        let net = Network::generate(&NetworkConfig::fixed(100, 1)).unwrap();
        let pairs = generate_traffic(&net, &TrafficConfig::new(100_000, 8)).unwrap();
        let mut src = [0usize; 100];
        let mut dst = [0usize; 100];
        for (s, d) in &pairs {
            src[s.index()] += 1;
            dst[d.index()] += 1;
        }
        for c in src.iter().chain(&dst) {
            assert!((850..=1150).contains(c), "{c}");
        }
    }

    #[test]
    fn two_node_traffic() {
        let net = Network::generate(&NetworkConfig::fixed(2, 1)).unwrap();
        let pairs = generate_traffic(&net, &TrafficConfig::new(50, 2)).unwrap();
        assert!(pairs
            .iter()
            .all(|&p| p == (NodeId(0), NodeId(1)) || p == (NodeId(1), NodeId(0))));
    }

    #[test]
    fn zero_messages_rejected() {
        let net = Network::generate(&NetworkConfig::fixed(2, 1)).unwrap();
        assert!(generate_traffic(&net, &TrafficConfig::new(0, 2)).is_err());
    }

    #[test]
    fn mean_stddev_basics() {
        let (m, s) = mean_stddev(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - 1.2909944487358056).abs() < 1e-12);
        assert_eq!(mean_stddev(&[7.0]), (7.0, 0.0));
    }
}
