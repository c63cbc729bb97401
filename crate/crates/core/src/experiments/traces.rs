use serde::{Deserialize, Serialize};

use super::{generate_traffic, Driver, ExperimentError, TrafficConfig};
use crate::network::{Network, NodeId, UNLIMITED_BATTERY};
use crate::routing::{Protocol, RelayImages, RouteOutcome};

/// One routed message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteTrace {
    pub msg_id: u64,
    pub protocol: Protocol,
    pub src: NodeId,
    pub dst: NodeId,
    pub outcome: RouteOutcome,
}

/// Routes the traffic stream with `protocol` on unlimited batteries and
/// keeps every path.
pub fn run_traces(
    net: &Network,
    traffic: &TrafficConfig,
    protocol: Protocol,
    relay_images: RelayImages,
) -> Result<Vec<RouteTrace>, ExperimentError> {
    let pairs = generate_traffic(net, traffic)?;
    let mut fresh = net.clone();
    fresh.set_all_batteries(UNLIMITED_BATTERY);
    let mut driver = Driver::new(fresh, protocol, relay_images, traffic.seed);
    let mut out = Vec::with_capacity(pairs.len());
    for (i, &(src, dst)) in pairs.iter().enumerate() {
        let outcome = driver
            .send(src, dst)?
            .expect("batteries are unlimited");
        out.push(RouteTrace {
            msg_id: i as u64,
            protocol,
            src,
            dst,
            outcome,
        });
    }
    Ok(out)
}
