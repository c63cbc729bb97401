use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{generate_traffic, Driver, ExperimentError, TrafficConfig};
use crate::geometry::{map_point, random_image_choice, square_distance, torus_distance, SquarePoint};
use crate::network::{Network, NetworkConfig, UNLIMITED_BATTERY};
use crate::routing::{Protocol, RelayImages};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StretchConfig {
    /// Monte-Carlo point pairs.
    pub samples: usize,
    pub seed: u64,
    /// Network on which realized hop counts are compared, if any.
    pub network: Option<NetworkConfig>,
    pub messages: usize,
    pub relay_images: RelayImages,
}

impl StretchConfig {
    pub const MIN_SAMPLES: usize = 100_000;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StretchReport {
    pub samples: u64,
    /// Mean Euclidean distance between two uniform points of the square.
    pub mean_square_distance: f64,
    pub mean_torus_distance: f64,
    pub ratio: f64,
    /// Mean outer-space hops over mean geographic hops, on messages both
    /// protocols delivered.
    pub hop_ratio: Option<f64>,
    pub hop_pairs: u64,
}

/// Expected distance stretch of the torus mapping, plus realized hop stretch.
pub fn run_stretch(cfg: &StretchConfig) -> Result<StretchReport, ExperimentError> {
    if cfg.samples < StretchConfig::MIN_SAMPLES {
        return Err(ExperimentError::InvalidConfig {
            key: "samples",
            reason: format!("need at least {}, got {}", StretchConfig::MIN_SAMPLES, cfg.samples),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut sum_s, mut sum_t) = (0.0, 0.0);
    for _ in 0..cfg.samples {
        let u = SquarePoint::random(&mut rng);
        let v = SquarePoint::random(&mut rng);
        let cu = random_image_choice(&mut rng);
        let cv = random_image_choice(&mut rng);
        sum_s += square_distance(u, v);
        sum_t += torus_distance(map_point(u, cu), map_point(v, cv));
    }
    let n = cfg.samples as f64;
    let (mean_s, mean_t) = (sum_s / n, sum_t / n);

    let (hop_ratio, hop_pairs) = match &cfg.network {
        Some(net_cfg) => hop_stretch(net_cfg, cfg)?,
        None => (None, 0),
    };
    Ok(StretchReport {
        samples: cfg.samples as u64,
        mean_square_distance: mean_s,
        mean_torus_distance: mean_t,
        ratio: mean_t / mean_s,
        hop_ratio,
        hop_pairs,
    })
}

fn hop_stretch(net_cfg: &NetworkConfig, cfg: &StretchConfig) -> Result<(Option<f64>, u64), ExperimentError> {
    let mut net = Network::generate(net_cfg)?;
    net.set_all_batteries(UNLIMITED_BATTERY);
    let traffic = TrafficConfig::for_network(cfg.messages, net_cfg.seed);
    let pairs = generate_traffic(&net, &traffic)?;
    let mut geo = Driver::new(net.clone(), Protocol::Geographic, cfg.relay_images, traffic.seed);
    let mut outer = Driver::new(net, Protocol::OuterSpace, cfg.relay_images, traffic.seed);
    let (mut hops_geo, mut hops_outer, mut both) = (0u64, 0u64, 0u64);
    for &(src, dst) in &pairs {
        let g = geo.send(src, dst)?;
        let o = outer.send(src, dst)?;
        if let (Some(g), Some(o)) = (g, o) {
            if g.delivered() && o.delivered() {
                hops_geo += g.hops() as u64;
                hops_outer += o.hops() as u64;
                both += 1;
            }
        }
    }
    let ratio = (hops_geo > 0).then(|| hops_outer as f64 / hops_geo as f64);
    Ok((ratio, both))
}
