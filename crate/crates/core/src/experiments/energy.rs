use serde::{Deserialize, Serialize};

use super::{generate_traffic, traffic_digest, Driver, ExperimentError, TrafficConfig};
use crate::network::{Network, NodeId, UNLIMITED_BATTERY};
use crate::routing::{Protocol, RelayImages};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolEnergy {
    pub protocol: Protocol,
    /// One unit per hop, dead-end hops included.
    pub transmissions: u64,
    pub delivered: u64,
    pub dead_ends: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub messages: u64,
    pub traffic_digest: String,
    pub geographic: ProtocolEnergy,
    pub outer_space: ProtocolEnergy,
    /// Outer-space over geographic transmissions; `None` when nothing moved.
    pub ratio: Option<f64>,
}

/// Total radio transmissions of both protocols over the same traffic.
pub fn run_energy(
    net: &Network,
    traffic: &TrafficConfig,
    relay_images: RelayImages,
) -> Result<EnergyReport, ExperimentError> {
    let pairs = generate_traffic(net, traffic)?;
    run_energy_on(net, &pairs, traffic.seed, relay_images)
}

/// Like [`run_energy`] over an explicit `(src, dst)` list.
pub fn run_energy_on(
    net: &Network,
    pairs: &[(NodeId, NodeId)],
    traffic_seed: u64,
    relay_images: RelayImages,
) -> Result<EnergyReport, ExperimentError> {
    let mut fresh = net.clone();
    fresh.set_all_batteries(UNLIMITED_BATTERY);
    let run = |protocol| -> Result<ProtocolEnergy, ExperimentError> {
        let mut driver = Driver::new(fresh.clone(), protocol, relay_images, traffic_seed);
        let (mut transmissions, mut delivered) = (0u64, 0u64);
        for &(src, dst) in pairs {
            if let Some(out) = driver.send(src, dst)? {
                transmissions += out.hops() as u64;
                delivered += u64::from(out.delivered());
            }
        }
        let charged: u64 = driver.net.nodes().iter().map(|n| UNLIMITED_BATTERY - n.battery).sum();
        debug_assert_eq!(charged, transmissions);
        Ok(ProtocolEnergy {
            protocol,
            transmissions,
            delivered,
            dead_ends: pairs.len() as u64 - delivered,
        })
    };
    let geographic = run(Protocol::Geographic)?;
    let outer_space = run(Protocol::OuterSpace)?;
    let ratio = (geographic.transmissions > 0)
        .then(|| outer_space.transmissions as f64 / geographic.transmissions as f64);
    Ok(EnergyReport {
        messages: pairs.len() as u64,
        traffic_digest: traffic_digest(pairs),
        geographic,
        outer_space,
        ratio,
    })
}
