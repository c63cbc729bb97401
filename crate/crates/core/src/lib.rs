//! Geographic and outer-space greedy routing on the unit square.
//!
//! The crate is organised bottom-up: [`geometry`] holds the square and torus
//! metrics and the square-to-torus mapping, [`network`] deploys nodes and
//! tracks batteries, [`routing`] forwards messages, and [`experiments`] runs
//! the congestion, energy, lifetime, stretch and symmetry harnesses.

pub mod experiments;
pub mod geometry;
pub mod network;
pub mod routing;
pub mod validation;

pub use geometry::{
    map_point, random_image_choice, square_distance, torus_distance, FairMapper, FairMapping,
    ImageChoice, SquarePoint, TorusPoint, TORUS_SIDE,
};
pub use network::{Deployment, Network, NetworkConfig, NetworkError, Node, NodeId, Surface};
pub use routing::{
    make_outer_space_message, oracle_shortest_path, route, route_geographic, route_outer_space,
    route_outer_space_with, Message, PathWeight, Protocol, RelayImages, RouteOutcome,
    RouteRequest, RouteStatus, RoutingError,
};
