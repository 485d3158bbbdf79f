use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::geometry::{Aabb, Rect, Vec3};
use super::{Scene, StreetAxis};
use crate::rng::{derive_seed, Stream};

/// Temporary street blockers (people, vehicles).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleConfig {
    /// Expected obstacles per square meter of street.
    #[serde(default = "default_density")]
    pub density: f64,
    #[serde(default = "default_heights")]
    pub heights: Vec<f64>,
    #[serde(default = "default_widths")]
    pub widths: Vec<f64>,
    /// Extent along the street axis.
    #[serde(default = "default_thickness")]
    pub thickness: f64,
    /// Penetration loss is drawn uniformly from `[lo, hi]` dB per obstacle;
    /// equal bounds give a fixed loss.
    #[serde(default = "default_loss")]
    pub loss_db: [f64; 2],
    /// Minimum gap between an obstacle and the walking line.
    #[serde(default = "default_clearance")]
    pub clearance: f64,
}

impl Default for ObstacleConfig {
    fn default() -> Self {
        Self {
            density: default_density(),
            heights: default_heights(),
            widths: default_widths(),
            thickness: default_thickness(),
            loss_db: default_loss(),
            clearance: default_clearance(),
        }
    }
}

fn default_density() -> f64 {
    1e-2
}
fn default_heights() -> Vec<f64> {
    vec![1.0, 3.0]
}
fn default_widths() -> Vec<f64> {
    vec![2.0, 4.0]
}
fn default_thickness() -> f64 {
    0.5
}
fn default_loss() -> [f64; 2] {
    [20.0, 20.0]
}
fn default_clearance() -> f64 {
    0.5
}

/// A vertical slab standing across the street.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: [f64; 2],
    /// Extent across the street.
    pub width: f64,
    pub height: f64,
    pub thickness: f64,
    /// Axis of the street the obstacle stands in.
    pub street_axis: StreetAxis,
    pub penetration_loss_db: f64,
}

impl Obstacle {
    pub fn footprint(&self) -> Rect {
        let (hx, hy) = match self.street_axis {
            StreetAxis::X => (self.thickness / 2.0, self.width / 2.0),
            StreetAxis::Y => (self.width / 2.0, self.thickness / 2.0),
        };
        Rect::new(
            [self.center[0] - hx, self.center[1] - hy],
            [self.center[0] + hx, self.center[1] + hy],
        )
    }

    pub fn aabb(&self) -> Aabb {
        let f = self.footprint();
        Aabb::new(Vec3::new(f.min[0], f.min[1], 0.0), Vec3::new(f.max[0], f.max[1], self.height))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleSet {
    pub obstacles: Vec<Obstacle>,
    pub seed: u64,
}

impl ObstacleSet {
    pub fn empty() -> Self {
        Self { obstacles: Vec::new(), seed: 0 }
    }

    /// Obstacles of realization `realization` under master seed `master`.
    pub fn for_realization(scene: &Scene, cfg: &ObstacleConfig, master: u64, realization: u64) -> Self {
        let seed = derive_seed(master, Stream::Obstacles, &[realization]);
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let mut set = sample_obstacles(scene, cfg, &mut rng);
        set.seed = seed;
        set
    }
}

const PLACEMENT_ATTEMPTS: usize = 1000;

/// Draw a Poisson number of obstacles (mean `density × street area`) placed
/// uniformly over the street, clear of the walking line.
pub fn sample_obstacles<R: Rng + ?Sized>(scene: &Scene, cfg: &ObstacleConfig, rng: &mut R) -> ObstacleSet {
    let area = scene.street_area();
    let mean = cfg.density.max(0.0) * area;
    if mean <= 0.0 || cfg.heights.is_empty() || cfg.widths.is_empty() {
        return ObstacleSet::empty();
    }
    let count = Poisson::new(mean).map(|p| p.sample(rng) as usize).unwrap_or(0);
    let rects = scene.street_rects();
    let weights: Vec<f64> = rects.iter().map(Rect::area).collect();
    let total: f64 = weights.iter().sum();
    let mut obstacles = Vec::with_capacity(count);
    for _ in 0..count {
        let height = *cfg.heights.choose(rng).expect("non-empty");
        let width = *cfg.widths.choose(rng).expect("non-empty");
        let loss = if cfg.loss_db[1] > cfg.loss_db[0] {
            rng.random_range(cfg.loss_db[0]..=cfg.loss_db[1])
        } else {
            cfg.loss_db[0]
        };
        for _ in 0..PLACEMENT_ATTEMPTS {
            // uniform over the union: pick by area, thin by multiplicity
            let mut u = rng.random::<f64>() * total;
            let mut k = 0;
            while k + 1 < rects.len() && u >= weights[k] {
                u -= weights[k];
                k += 1;
            }
            let r = rects[k];
            let p = [
                rng.random_range(r.min[0]..=r.max[0]),
                rng.random_range(r.min[1]..=r.max[1]),
            ];
            let covering = rects.iter().filter(|q| q.contains(p)).count().max(1);
            if covering > 1 && rng.random::<f64>() >= 1.0 / covering as f64 {
                continue;
            }
            let o = Obstacle {
                center: p,
                width,
                height,
                thickness: cfg.thickness,
                street_axis: scene.street[k].axis,
                penetration_loss_db: loss,
            };
            let keep_out = o.footprint().inflate(cfg.clearance);
            if scene.street.iter().any(|s| keep_out.intersects_segment(s.start, s.end)) {
                continue;
            }
            obstacles.push(o);
            break;
        }
    }
    ObstacleSet { obstacles, seed: 0 }
}
