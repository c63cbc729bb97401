use outerspace_core::validation::route_defects;
use outerspace_core::{
    oracle_shortest_path, route_geographic, route_outer_space, route_outer_space_with,
    ImageChoice, Message, Network, NetworkConfig, NodeId, PathWeight, RelayImages,
};
use proptest::prelude::*;

fn small_network(nodes: usize, range: f64, seed: u64) -> Network {
    Network::generate(&NetworkConfig::fixed(nodes, seed).with_range(range)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn greedy_routes_are_loop_free_monotone_and_physical(
        nodes in 20usize..200,
        range in 0.08f64..0.4,
        seed in any::<u64>(),
        pairs in prop::collection::vec((any::<u32>(), any::<u32>(), 0u8..4), 1..20),
    ) {
        let mut net = small_network(nodes, range, seed);
        let n = net.len() as u32;
        for (a, b, bits) in pairs {
            let (s, d) = (NodeId(a % n), NodeId(b % n));
            if s == d {
                continue;
            }
            let geo = Message::geographic(&net, s, d).unwrap();
            let out = route_geographic(&mut net, &geo).unwrap();
            prop_assert!(route_defects(&net, &geo, &out).is_empty());

            let choice = ImageChoice::from_bits(bits);
            let outer = Message::outer_space(&net, s, d, choice).unwrap();
            for relays in [RelayImages::Unfolded, RelayImages::Fixed] {
                let out = route_outer_space_with(&mut net, &outer, relays).unwrap();
                prop_assert!(route_defects(&net, &outer, &out).is_empty(), "{relays:?}");
            }
        }
    }

    #[test]
    fn each_hop_costs_the_sender_one_unit(
        nodes in 20usize..150,
        seed in any::<u64>(),
        a in any::<u32>(),
        b in any::<u32>(),
        bits in 0u8..4,
    ) {
        let mut net = small_network(nodes, 0.25, seed);
        let n = net.len() as u32;
        let (s, d) = (NodeId(a % n), NodeId(b % n));
        prop_assume!(s != d);
        let before: Vec<u64> = net.nodes().iter().map(|x| x.battery).collect();
        let msg = Message::outer_space(&net, s, d, ImageChoice::from_bits(bits)).unwrap();
        let out = route_outer_space(&mut net, &msg).unwrap();
        let senders = &out.path[..out.path.len() - 1];
        for node in net.nodes() {
            let spent = before[node.id.index()] - node.battery;
            prop_assert_eq!(spent, u64::from(senders.contains(&node.id)));
        }
        prop_assert_eq!(net.total_consumed(), out.hops() as u64);
    }

    #[test]
    fn delivered_geographic_routes_are_no_shorter_than_the_oracle(
        nodes in 30usize..200,
        seed in any::<u64>(),
        a in any::<u32>(),
        b in any::<u32>(),
    ) {
        let mut net = small_network(nodes, 0.2, seed);
        let n = net.len() as u32;
        let (s, d) = (NodeId(a % n), NodeId(b % n));
        prop_assume!(s != d);
        let oracle = oracle_shortest_path(&net, s, d, PathWeight::Hops).unwrap();
        let msg = Message::geographic(&net, s, d).unwrap();
        let out = route_geographic(&mut net, &msg).unwrap();
        if out.delivered() {
            let best = oracle.expect("delivered pair must be connected");
            prop_assert!(out.hops() >= best.len() - 1);
        }
    }
}
