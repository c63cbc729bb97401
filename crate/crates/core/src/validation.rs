//! Runtime property checks shared by the `validate` command and the test
//! suites. Each check draws its own samples from a seed and reports a
//! pass/fail line with the measured statistic.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::experiments::{
    generate_traffic, run_congestion, CongestionOptions, ExperimentError, SubArea, TrafficConfig,
};
use crate::geometry::{
    map_point, random_image_choice, square_distance, torus_distance, FairMapper, ImageChoice,
    SquarePoint, TorusPoint, TORUS_SIDE,
};
use crate::network::{
    uniform_positions, unit_disk_adjacency, Network, NetworkConfig, NodeId, Surface,
    UNLIMITED_BATTERY,
};
use crate::routing::{
    oracle_shortest_path, route_geographic, route_outer_space, Message, PathWeight, Protocol,
    RouteOutcome,
};

/// 99th percentile of chi-square with 99 degrees of freedom.
pub const CHI2_99_DF_P01: f64 = 134.641_616_855_789_15;
/// 99th percentile of chi-square with 3 degrees of freedom.
pub const CHI2_3_DF_P01: f64 = 11.344_866_730_144_373;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{mark}  {:<32} {}", self.name, self.detail)
    }
}

fn chi_square(counts: &[u64], expected: f64) -> f64 {
    counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum()
}

/// `d_S(u, v) <= d_T(image(u), image(v))` for all 16 image pairs.
pub fn check_domination(pairs: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0usize;
    let mut tightest = f64::INFINITY;
    for _ in 0..pairs {
        let u = SquarePoint::random(&mut rng);
        let v = SquarePoint::random(&mut rng);
        let ds = square_distance(u, v);
        for cu in ImageChoice::ALL {
            for cv in ImageChoice::ALL {
                let slack = torus_distance(map_point(u, cu), map_point(v, cv)) - ds;
                tightest = tightest.min(slack);
                if slack < -1e-12 {
                    violations += 1;
                }
            }
        }
    }
    CheckResult::new(
        "domination d_S <= d_T",
        violations == 0,
        format!("{pairs} pairs x 16 image pairs, {violations} violations, min slack {tightest:.3e}"),
    )
}

/// Symmetry (exact) and triangle inequality (1e-12) of the torus metric.
pub fn check_torus_metric(triples: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut point = || TorusPoint::new(rng.random::<f64>() * TORUS_SIDE, rng.random::<f64>() * TORUS_SIDE);
    let mut bad_sym = 0usize;
    let mut bad_tri = 0usize;
    for _ in 0..triples {
        let (a, b, c) = (point(), point(), point());
        let (ab, bc, ac) = (torus_distance(a, b), torus_distance(b, c), torus_distance(a, c));
        if ab != torus_distance(b, a) {
            bad_sym += 1;
        }
        if ac > ab + bc + 1e-12 {
            bad_tri += 1;
        }
    }
    CheckResult::new(
        "torus metric axioms",
        bad_sym == 0 && bad_tri == 0,
        format!("{triples} triples, {bad_sym} asymmetric, {bad_tri} triangle violations"),
    )
}

/// Uniform square points through uniform image choices land uniformly on
/// the torus: chi-square over a 10x10 grid at significance 0.01.
pub fn check_mapped_uniformity(points: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = [0u64; 100];
    for _ in 0..points {
        let p = map_point(SquarePoint::random(&mut rng), random_image_choice(&mut rng));
        let cell = |v: f64| ((v / TORUS_SIDE * 10.0) as usize).min(9);
        counts[cell(p.y) * 10 + cell(p.x)] += 1;
    }
    let stat = chi_square(&counts, points as f64 / 100.0);
    CheckResult::new(
        "mapped points uniform on torus",
        stat < CHI2_99_DF_P01,
        format!("chi2 = {stat:.2} (99 df, critical {CHI2_99_DF_P01:.2})"),
    )
}

/// Seeded per-node image choices are equidistributed over node ids.
pub fn check_node_image_choices(ids: u32, seed: u64) -> CheckResult {
    let mapper = FairMapper::new(seed);
    let mut counts = [0u64; 4];
    for id in 0..ids {
        counts[mapper.node_image_choice(id).index()] += 1;
    }
    let stat = chi_square(&counts, f64::from(ids) / 4.0);
    let worst = counts
        .iter()
        .map(|&c| (c as f64 / f64::from(ids) - 0.25).abs())
        .fold(0.0, f64::max);
    CheckResult::new(
        "node image choices equidistributed",
        stat < CHI2_3_DF_P01 && worst <= 0.01,
        format!("counts {counts:?}, chi2 = {stat:.2}, max |f - 1/4| = {worst:.4}"),
    )
}

/// Grid-built adjacency equals the O(N^2) recomputation.
pub fn check_adjacency(networks: usize, max_nodes: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mismatches = 0usize;
    for _ in 0..networks {
        let n = rng.random_range(2..=max_nodes);
        let range = rng.random_range(0.02..0.3);
        let pos = uniform_positions(&mut rng, n);
        let grid = unit_disk_adjacency(&pos, range, Surface::Square);
        let brute: Vec<Vec<NodeId>> = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i && square_distance(pos[i], pos[j]) <= range)
                    .map(|j| NodeId(j as u32))
                    .collect()
            })
            .collect();
        let symmetric = grid
            .iter()
            .enumerate()
            .all(|(i, l)| l.iter().all(|j| grid[j.index()].contains(&NodeId(i as u32))));
        if grid != brute || !symmetric {
            mismatches += 1;
        }
    }
    CheckResult::new(
        "adjacency = brute force",
        mismatches == 0,
        format!("{networks} networks (N <= {max_nodes}), {mismatches} mismatches"),
    )
}

/// Problems with a single route: repeated nodes, non-decreasing distance
/// trace, hops longer than the range, or inconsistent status.
pub fn route_defects(net: &Network, msg: &Message, out: &RouteOutcome) -> Vec<String> {
    let mut defects = Vec::new();
    let mut seen = out.path.clone();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != out.path.len() {
        defects.push("repeated node".to_string());
    }
    if out.distances.windows(2).any(|w| w[1] >= w[0]) {
        defects.push("distance trace not strictly decreasing".to_string());
    }
    let nodes = net.nodes();
    if out
        .path
        .windows(2)
        .any(|w| square_distance(nodes[w[0].index()].pos, nodes[w[1].index()].pos) > net.range())
    {
        defects.push("hop longer than range".to_string());
    }
    if out.delivered() != (out.path.last() == Some(&msg.dest)) {
        defects.push("status disagrees with last node".to_string());
    }
    if out.path.first() != Some(&msg.source) || out.path.len() != out.distances.len() {
        defects.push("malformed path".to_string());
    }
    defects
}

/// Loop freedom, strict monotonicity and physical validity of both greedy
/// protocols on a dense network.
pub fn check_greedy_invariants(messages: usize, seed: u64) -> Result<CheckResult, ExperimentError> {
    let mut net = Network::generate(&NetworkConfig::fixed(1336, seed))?;
    net.set_all_batteries(UNLIMITED_BATTERY);
    let pairs = generate_traffic(&net, &TrafficConfig::for_network(messages, seed))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut bad = 0usize;
    let mut first = None;
    for &(s, d) in &pairs {
        let geo = Message::geographic(&net, s, d)?;
        let out = route_geographic(&mut net, &geo)?;
        let mut defects = route_defects(&net, &geo, &out);
        let outer = Message::outer_space(&net, s, d, random_image_choice(&mut rng))?;
        let out = route_outer_space(&mut net, &outer)?;
        defects.extend(route_defects(&net, &outer, &out));
        if !defects.is_empty() {
            bad += 1;
            first.get_or_insert(format!("{s}->{d}: {}", defects.join(", ")));
        }
    }
    Ok(CheckResult::new(
        "greedy loop-free and monotone",
        bad == 0,
        format!(
            "{} routes, {bad} defective{}",
            2 * messages,
            first.map(|f| format!(" (first: {f})")).unwrap_or_default()
        ),
    ))
}

/// Each node is a source `expected +- 15%` times under uniform traffic.
pub fn check_traffic_uniformity(seed: u64) -> Result<CheckResult, ExperimentError> {
    let net = Network::generate(&NetworkConfig::fixed(100, seed))?;
    let pairs = generate_traffic(&net, &TrafficConfig::for_network(100_000, seed))?;
    let mut counts = vec![0u64; 100];
    for (s, _) in &pairs {
        counts[s.index()] += 1;
    }
    let (lo, hi) = (*counts.iter().min().unwrap_or(&0), *counts.iter().max().unwrap_or(&0));
    Ok(CheckResult::new(
        "uniform traffic sources",
        lo >= 850 && hi <= 1150,
        format!("N=100, 1e5 pairs, source counts in [{lo}, {hi}] (allowed [850, 1150])"),
    ))
}

/// Geographic routing on a dense network delivers at least 99% of messages
/// and its hop count stays within 1.3x of the exact shortest path.
pub fn check_dense_geographic(messages: usize, seed: u64) -> Result<Vec<CheckResult>, ExperimentError> {
    let mut net = Network::generate(&NetworkConfig::fixed(1336, seed))?;
    net.set_all_batteries(UNLIMITED_BATTERY);
    let pairs = generate_traffic(&net, &TrafficConfig::for_network(messages, seed))?;
    let (mut delivered, mut geo_hops, mut oracle_hops) = (0usize, 0usize, 0usize);
    for &(s, d) in &pairs {
        let msg = Message::geographic(&net, s, d)?;
        let out = route_geographic(&mut net, &msg)?;
        if out.delivered() {
            delivered += 1;
            geo_hops += out.hops();
            let best = oracle_shortest_path(&net, s, d, PathWeight::Hops)?
                .expect("delivered pair must be connected");
            oracle_hops += best.len() - 1;
        }
    }
    let rate = delivered as f64 / messages as f64;
    let stretch = geo_hops as f64 / oracle_hops as f64;
    Ok(vec![
        CheckResult::new(
            "dense geographic delivery",
            rate >= 0.99,
            format!("{delivered}/{messages} delivered ({:.2}%)", 100.0 * rate),
        ),
        CheckResult::new(
            "geographic near-shortest",
            stretch <= 1.3,
            format!("mean hops / oracle hops = {stretch:.4} (allowed 1.3)"),
        ),
    ])
}

/// Under outer-space routing the central sub-area's nodes relay about as
/// much as the four off-centre sub-areas' nodes (within 10%).
pub fn check_relay_uniformity(messages: usize, seed: u64) -> Result<CheckResult, ExperimentError> {
    let net = Network::generate(&NetworkConfig::fixed(1336, seed))?;
    let rep = run_congestion(
        &net,
        &TrafficConfig::for_network(messages, seed),
        Protocol::OuterSpace,
        &CongestionOptions::default(),
    )?;
    let areas = SubArea::defaults();
    let mean_in = |area: &[SubArea]| {
        let (sum, n) = net
            .nodes()
            .iter()
            .filter(|n| area.iter().any(|a| a.contains(n.pos)))
            .fold((0u64, 0u64), |(s, c), n| (s + rep.relay_counts[n.id.index()], c + 1));
        sum as f64 / n as f64
    };
    let centre = mean_in(&areas[..1]);
    let off = mean_in(&areas[1..]);
    let rel = (centre - off).abs() / off;
    Ok(CheckResult::new(
        "outer-space relay load uniform",
        rel < 0.10,
        format!("central {centre:.2} vs off-centre {off:.2} relays/node ({:.1}% apart)", 100.0 * rel),
    ))
}

/// The suite run by the `validate` command.
pub fn standard_suite(seed: u64) -> Result<Vec<CheckResult>, ExperimentError> {
    let mut out = vec![
        check_domination(100_000, seed),
        check_torus_metric(100_000, seed),
        check_mapped_uniformity(100_000, seed),
        check_node_image_choices(100_000, seed),
        check_adjacency(50, 200, seed),
        check_greedy_invariants(10_000, seed)?,
        check_traffic_uniformity(seed)?,
    ];
    out.extend(check_dense_geographic(10_000, seed)?);
    out.push(check_relay_uniformity(50_000, seed)?);
    Ok(out)
}
