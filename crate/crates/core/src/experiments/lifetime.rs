use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{generate_traffic, traffic_digest, Driver, ExperimentError, TrafficConfig};
use crate::network::{Network, NetworkConfig, NodeId};
use crate::routing::{Protocol, RelayImages};

/// Alive-node count is sampled after every this many messages.
pub const ALIVE_SAMPLE_INTERVAL: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifetimeOptions {
    /// Delivery ratio below which the network counts as dead.
    pub threshold: f64,
    /// Sliding window, in messages, for the delivery ratio.
    pub window: usize,
    pub relay_images: RelayImages,
}

impl Default for LifetimeOptions {
    fn default() -> Self {
        Self {
            threshold: 0.95,
            window: 1000,
            relay_images: RelayImages::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopCause {
    FirstNodeDeath,
    DeliveryBelowThreshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifetimeReport {
    pub protocol: Protocol,
    pub stop_cause: StopCause,
    pub messages_delivered: u64,
    /// Messages injected up to and including the one that triggered the stop.
    pub messages_injected: u64,
    /// Stream entries dropped because their source or destination was dead.
    pub messages_skipped: u64,
    pub transmissions: u64,
    pub alive_at_stop: usize,
    pub first_dead: Option<NodeId>,
    pub threshold: Option<f64>,
    pub window: Option<usize>,
    /// Alive nodes after every [`ALIVE_SAMPLE_INTERVAL`] messages.
    pub alive_curve: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifetimeComparison {
    pub network: NetworkConfig,
    pub nodes: usize,
    pub traffic: TrafficConfig,
    pub traffic_digest: String,
    pub geographic: LifetimeReport,
    pub outer_space: LifetimeReport,
    /// Outer-space over geographic delivered messages.
    pub ratio: Option<f64>,
}

/// Messages delivered before any node exhausts its battery, per protocol.
///
/// The message during which the first node dies is not counted.
pub fn run_lifetime_first_death(
    net_cfg: &NetworkConfig,
    traffic: &TrafficConfig,
    opts: &LifetimeOptions,
) -> Result<LifetimeComparison, ExperimentError> {
    compare(net_cfg, traffic, opts, Stop::FirstDeath)
}

/// Messages delivered until the windowed delivery ratio drops below
/// `opts.threshold`, per protocol. The ratio is only checked once the window
/// is full.
pub fn run_lifetime_delivery_threshold(
    net_cfg: &NetworkConfig,
    traffic: &TrafficConfig,
    opts: &LifetimeOptions,
) -> Result<LifetimeComparison, ExperimentError> {
    if !(0.0..=1.0).contains(&opts.threshold) {
        return Err(ExperimentError::InvalidConfig {
            key: "threshold",
            reason: format!("must lie in [0, 1], got {}", opts.threshold),
        });
    }
    if opts.window == 0 {
        return Err(ExperimentError::InvalidConfig {
            key: "window",
            reason: "must be positive".into(),
        });
    }
    compare(net_cfg, traffic, opts, Stop::Threshold)
}

#[derive(Clone, Copy, PartialEq)]
enum Stop {
    FirstDeath,
    Threshold,
}

fn compare(
    net_cfg: &NetworkConfig,
    traffic: &TrafficConfig,
    opts: &LifetimeOptions,
    stop: Stop,
) -> Result<LifetimeComparison, ExperimentError> {
    let net = Network::generate(net_cfg)?;
    let pairs = generate_traffic(&net, traffic)?;
    let geographic = run_one(&net, &pairs, traffic.seed, Protocol::Geographic, opts, stop)?;
    let outer_space = run_one(&net, &pairs, traffic.seed, Protocol::OuterSpace, opts, stop)?;
    let ratio = (geographic.messages_delivered > 0)
        .then(|| outer_space.messages_delivered as f64 / geographic.messages_delivered as f64);
    Ok(LifetimeComparison {
        network: *net_cfg,
        nodes: net.len(),
        traffic: *traffic,
        traffic_digest: traffic_digest(&pairs),
        geographic,
        outer_space,
        ratio,
    })
}

fn run_one(
    net: &Network,
    pairs: &[(NodeId, NodeId)],
    traffic_seed: u64,
    protocol: Protocol,
    opts: &LifetimeOptions,
    stop: Stop,
) -> Result<LifetimeReport, ExperimentError> {
    let mut driver = Driver::new(net.clone(), protocol, opts.relay_images, traffic_seed);
    let mut alive = net.alive_count();
    let mut first_dead = None;
    let mut delivered = 0u64;
    let mut transmissions = 0u64;
    let mut window: VecDeque<bool> = VecDeque::with_capacity(opts.window + 1);
    let mut window_hits = 0usize;
    let mut alive_curve = Vec::new();
    let mut skipped = 0u64;

    for (i, &(src, dst)) in pairs.iter().enumerate() {
        if (i + 1) % ALIVE_SAMPLE_INTERVAL == 0 {
            alive_curve.push(alive);
        }
        let Some(out) = driver.send(src, dst)? else {
            skipped += 1;
            continue;
        };
        let ok = out.delivered();
        let mut died = false;
        transmissions += out.hops() as u64;
        for &sender in &out.path[..out.hops()] {
            if !driver.net.nodes()[sender.index()].is_alive() {
                alive -= 1;
                died = true;
                first_dead.get_or_insert(sender);
            }
        }
        let report = |cause, delivered| LifetimeReport {
            protocol,
            stop_cause: cause,
            messages_delivered: delivered,
            messages_injected: i as u64 + 1 - skipped,
            messages_skipped: skipped,
            transmissions,
            alive_at_stop: alive,
            first_dead,
            threshold: (stop == Stop::Threshold).then_some(opts.threshold),
            window: (stop == Stop::Threshold).then_some(opts.window),
            alive_curve: alive_curve.clone(),
        };
        match stop {
            Stop::FirstDeath if died => return Ok(report(StopCause::FirstNodeDeath, delivered)),
            Stop::FirstDeath => delivered += u64::from(ok),
            Stop::Threshold => {
                delivered += u64::from(ok);
                window.push_back(ok);
                window_hits += usize::from(ok);
                if window.len() > opts.window {
                    window_hits -= usize::from(window.pop_front().unwrap_or(false));
                }
                if window.len() == opts.window
                    && (window_hits as f64) < opts.threshold * opts.window as f64
                {
                    return Ok(report(StopCause::DeliveryBelowThreshold, delivered));
                }
            }
        }
    }
    Err(ExperimentError::TrafficExhausted {
        protocol,
        injected: pairs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn battery_one_dies_on_first_message() {
        let cfg = NetworkConfig::fixed(400, 3).with_battery(1);
        let rep =
            run_lifetime_first_death(&cfg, &TrafficConfig::new(100, 1), &LifetimeOptions::default())
                .unwrap();
        for r in [&rep.geographic, &rep.outer_space] {
            assert_eq!(r.stop_cause, StopCause::FirstNodeDeath);
            assert!(r.messages_delivered <= 1);
            assert!(r.first_dead.is_some());
        }
        // the source transmits first, so it is the first to die
        let net = Network::generate(&cfg).unwrap();
        let (src, _) = generate_traffic(&net, &TrafficConfig::new(1, 1)).unwrap()[0];
        assert_eq!(rep.geographic.first_dead, Some(src));
        assert_eq!(rep.geographic.messages_injected, 1);
    }

    #[test]
    fn first_death_is_deterministic() {
        let cfg = NetworkConfig::fixed(500, 8).with_battery(20);
        let t = TrafficConfig::new(20_000, 2);
        let a = run_lifetime_first_death(&cfg, &t, &LifetimeOptions::default()).unwrap();
        let b = run_lifetime_first_death(&cfg, &t, &LifetimeOptions::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.geographic.alive_at_stop < 500);
    }

    #[test]
    fn zero_threshold_exhausts_traffic() {
        let cfg = NetworkConfig::fixed(300, 8).with_battery(5);
        let opts = LifetimeOptions {
            threshold: 0.0,
            window: 50,
            ..Default::default()
        };
        let err = run_lifetime_delivery_threshold(&cfg, &TrafficConfig::new(2000, 2), &opts)
            .unwrap_err();
        assert!(matches!(err, ExperimentError::TrafficExhausted { .. }));
        assert!(err.to_string().contains("raise the message count"));
    }

    #[test]
    fn first_death_exhaustion_errors() {
        let cfg = NetworkConfig::fixed(300, 8).with_battery(10_000);
        let err = run_lifetime_first_death(&cfg, &TrafficConfig::new(100, 2), &LifetimeOptions::default())
            .unwrap_err();
        assert!(matches!(err, ExperimentError::TrafficExhausted { .. }));
    }

    #[test]
    fn threshold_run_degrades_monotonically() {
        let cfg = NetworkConfig::fixed(800, 4).with_battery(30);
        let opts = LifetimeOptions {
            window: 200,
            ..Default::default()
        };
        let rep = run_lifetime_delivery_threshold(&cfg, &TrafficConfig::new(200_000, 5), &opts).unwrap();
        for r in [&rep.geographic, &rep.outer_space] {
            assert_eq!(r.stop_cause, StopCause::DeliveryBelowThreshold);
            assert!(r.messages_injected > 200, "stopped immediately");
            assert!(r.alive_curve.windows(2).all(|w| w[1] <= w[0]));
            assert!(r.messages_delivered <= r.messages_injected);
        }
    }

    #[test]
    fn rejects_bad_options() {
        let cfg = NetworkConfig::fixed(50, 1);
        let t = TrafficConfig::new(10, 1);
        let bad = LifetimeOptions { threshold: 1.5, ..Default::default() };
        assert!(run_lifetime_delivery_threshold(&cfg, &t, &bad).is_err());
        let bad = LifetimeOptions { window: 0, ..Default::default() };
        assert!(run_lifetime_delivery_threshold(&cfg, &t, &bad).is_err());
    }
}
