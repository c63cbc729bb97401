//! Metric spaces used by the simulator.
//!
//! Nodes live on the unit square `S = [0,1]²` with Euclidean distance. Routes
//! in outer space are computed on the torus `T = [0,2]²`, where each square
//! point has four candidate images obtained by optionally reflecting each
//! coordinate (`x -> 2 - x`). Torus coordinates are always stored reduced
//! modulo the side length.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Side length of the outer-space torus.
pub const TORUS_SIDE: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("point ({x}, {y}) lies outside the unit square")]
    OutsideSquare { x: f64, y: f64 },
}

/// A position on the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SquarePoint {
    pub x: f64,
    pub y: f64,
}

impl SquarePoint {
    pub fn new(x: f64, y: f64) -> Result<Self, GeometryError> {
        if (0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y) {
            Ok(Self { x, y })
        } else {
            Err(GeometryError::OutsideSquare { x, y })
        }
    }

    /// Draws a point uniformly at random on the square.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            x: rng.random::<f64>(),
            y: rng.random::<f64>(),
        }
    }
}

/// A position on the torus `[0,2)²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    pub x: f64,
    pub y: f64,
}

impl TorusPoint {
    /// Builds a torus point, wrapping both coordinates into `[0, 2)`.
    pub fn new(x: f64, y: f64) -> Self {
        Self {
            x: wrap(x, TORUS_SIDE),
            y: wrap(y, TORUS_SIDE),
        }
    }
}

/// Reduces `v` into `[0, side)`.
pub(crate) fn wrap(v: f64, side: f64) -> f64 {
    let r = v.rem_euclid(side);
    // rem_euclid can round up to `side` for tiny negative inputs
    if r >= side {
        0.0
    } else {
        r
    }
}

/// Which coordinates get reflected when mapping a square point onto the torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ImageChoice {
    pub reflect_x: bool,
    pub reflect_y: bool,
}

impl ImageChoice {
    pub const IDENTITY: Self = Self::from_bits(0);

    /// All four choices, in index order.
    pub const ALL: [Self; 4] = [
        Self::from_bits(0),
        Self::from_bits(1),
        Self::from_bits(2),
        Self::from_bits(3),
    ];

    /// Bit 0 reflects x, bit 1 reflects y.
    pub const fn from_bits(bits: u8) -> Self {
        Self {
            reflect_x: bits & 1 != 0,
            reflect_y: bits & 2 != 0,
        }
    }

    pub const fn index(self) -> usize {
        self.reflect_x as usize | (self.reflect_y as usize) << 1
    }
}

/// Euclidean distance on the square.
pub fn square_distance(a: SquarePoint, b: SquarePoint) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

fn torus_axis_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    d.min(TORUS_SIDE - d)
}

/// Distance on the torus: Euclidean distance with per-coordinate wraparound.
pub fn torus_distance(a: TorusPoint, b: TorusPoint) -> f64 {
    torus_axis_distance(a.x, b.x).hypot(torus_axis_distance(a.y, b.y))
}

/// Image of `p` on the torus under the given reflection choice.
pub fn map_point(p: SquarePoint, choice: ImageChoice) -> TorusPoint {
    let x = if choice.reflect_x { TORUS_SIDE - p.x } else { p.x };
    let y = if choice.reflect_y { TORUS_SIDE - p.y } else { p.y };
    TorusPoint::new(x, y)
}

/// The four torus images of `p`, indexed like [`ImageChoice::ALL`].
pub fn all_images(p: SquarePoint) -> [TorusPoint; 4] {
    ImageChoice::ALL.map(|c| map_point(p, c))
}

/// Draws one of the four image choices uniformly.
pub fn random_image_choice<R: Rng + ?Sized>(rng: &mut R) -> ImageChoice {
    ImageChoice::from_bits(rng.random_range(0..4u8))
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A mapping from the deployment square onto some symmetric outer space.
pub trait FairMapping {
    type Image: Copy;

    /// Image of the node `node_id` located at `pos`.
    fn image(&self, node_id: u32, pos: SquarePoint) -> Self::Image;

    fn distance(&self, a: Self::Image, b: Self::Image) -> f64;
}

/// Square-to-torus mapping with a deterministic image per node id.
///
/// Every node derives its reflection choice from `(seed, node_id)` alone, so
/// any two parties holding the seed agree on every node's image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FairMapper {
    pub seed: u64,
}

impl FairMapper {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn node_image_choice(&self, node_id: u32) -> ImageChoice {
        let h = splitmix64(self.seed ^ splitmix64(u64::from(node_id)));
        ImageChoice::from_bits((h >> 62) as u8)
    }
}

impl FairMapping for FairMapper {
    type Image = TorusPoint;

    fn image(&self, node_id: u32, pos: SquarePoint) -> TorusPoint {
        map_point(pos, self.node_image_choice(node_id))
    }

    fn distance(&self, a: TorusPoint, b: TorusPoint) -> f64 {
        torus_distance(a, b)
    }
}
