use serde::{Deserialize, Serialize};

use super::geometry::{Aabb, Vec3};
use super::{BsSite, ObstacleSet, Scene};
use crate::channel::Direction;

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagationConfig {
    #[serde(default = "default_carrier")]
    pub carrier_hz: f64,
    #[serde(default = "default_ue_height")]
    pub ue_height: f64,
    /// Paths weaker than the strongest by more than this are dropped.
    #[serde(default = "default_drop")]
    pub drop_threshold_db: f64,
    #[serde(default = "default_max_paths")]
    pub max_paths: usize,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self {
            carrier_hz: default_carrier(),
            ue_height: default_ue_height(),
            drop_threshold_db: default_drop(),
            max_paths: default_max_paths(),
        }
    }
}

fn default_carrier() -> f64 {
    28e9
}
fn default_ue_height() -> f64 {
    1.5
}
fn default_drop() -> f64 {
    60.0
}
fn default_max_paths() -> usize {
    5
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathKind {
    LineOfSight,
    /// Face index: 0 = −x, 1 = +x, 2 = −y, 3 = +y.
    Reflected { building: usize, face: u8 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationPath {
    pub kind: PathKind,
    /// Unfolded geometric length, meters.
    pub length: f64,
    /// Departure direction relative to the BS array broadside.
    pub aod: Direction,
    pub loss_db: f64,
    pub penetration_db: f64,
}

pub fn free_space_path_loss_db(distance: f64, carrier_hz: f64) -> f64 {
    20.0 * (4.0 * std::f64::consts::PI * distance.max(1e-3) * carrier_hz / SPEED_OF_LIGHT).log10()
}

/// Departure direction of `v` seen from an array whose broadside points at
/// world azimuth `broadside_deg`.
pub(crate) fn departure(v: Vec3, broadside_deg: f64) -> Direction {
    let az = v.y.atan2(v.x).to_degrees() - broadside_deg;
    let el = v.z.atan2(v.horizontal_norm()).to_degrees();
    Direction::new(wrap_degrees(az), el)
}

/// Wrap to `[-180, 180)`.
pub(crate) fn wrap_degrees(a: f64) -> f64 {
    let w = (a + 180.0).rem_euclid(360.0) - 180.0;
    if w >= 180.0 {
        w - 360.0
    } else {
        w
    }
}

struct Blocker {
    aabb: Aabb,
    loss_db: f64,
    building: Option<usize>,
}

fn blockers(scene: &Scene, obstacles: &ObstacleSet) -> Vec<Blocker> {
    scene
        .buildings
        .iter()
        .enumerate()
        .map(|(i, b)| Blocker { aabb: b.aabb(), loss_db: b.penetration_loss_db, building: Some(i) })
        .chain(obstacles.obstacles.iter().map(|o| Blocker {
            aabb: o.aabb(),
            loss_db: o.penetration_loss_db,
            building: None,
        }))
        .collect()
}

fn penetration(blockers: &[Blocker], a: Vec3, b: Vec3, skip: Option<usize>) -> f64 {
    blockers
        .iter()
        .filter(|k| k.building.is_none() || k.building != skip)
        .filter(|k| k.aabb.blocks(a, b))
        .map(|k| k.loss_db)
        .sum()
}

/// Accumulated penetration loss along the straight segment `a → b`.
pub fn segment_penetration_db(scene: &Scene, obstacles: &ObstacleSet, a: Vec3, b: Vec3) -> f64 {
    penetration(&blockers(scene, obstacles), a, b, None)
}

/// Direct path plus first-order specular reflections off vertical building
/// faces, sorted by ascending loss, pruned to the drop threshold and
/// `max_paths`.
pub fn trace_paths(
    scene: &Scene,
    obstacles: &ObstacleSet,
    bs: &BsSite,
    ue: Vec3,
    cfg: &PropagationConfig,
) -> Vec<PropagationPath> {
    let blockers = blockers(scene, obstacles);
    let tx = bs.position;
    let mut paths = Vec::new();

    let d = ue - tx;
    let pen = penetration(&blockers, tx, ue, None);
    let length = d.norm();
    paths.push(PropagationPath {
        kind: PathKind::LineOfSight,
        length,
        aod: departure(d, bs.broadside_deg),
        loss_db: free_space_path_loss_db(length, cfg.carrier_hz) + pen,
        penetration_db: pen,
    });

    for (bi, b) in scene.buildings.iter().enumerate() {
        let faces = [
            (0usize, b.footprint.min[0], -1.0),
            (0, b.footprint.max[0], 1.0),
            (1, b.footprint.min[1], -1.0),
            (1, b.footprint.max[1], 1.0),
        ];
        for (fi, &(axis, plane, outward)) in faces.iter().enumerate() {
            let side_tx = (tx.axis(axis) - plane) * outward;
            let side_ue = (ue.axis(axis) - plane) * outward;
            if side_tx <= 0.0 || side_ue <= 0.0 {
                continue;
            }
            let image = ue.with_axis(axis, 2.0 * plane - ue.axis(axis));
            let dir = image - tx;
            let t = (plane - tx.axis(axis)) / dir.axis(axis);
            let hit = tx + dir * t;
            let other = 1 - axis;
            let (lo, hi) = (b.footprint.min[other], b.footprint.max[other]);
            if hit.axis(other) < lo || hit.axis(other) > hi || hit.z < 0.0 || hit.z > b.height {
                continue;
            }
            let hit = hit.with_axis(axis, plane);
            let pen = penetration(&blockers, tx, hit, Some(bi))
                + penetration(&blockers, hit, ue, Some(bi));
            let length = dir.norm();
            paths.push(PropagationPath {
                kind: PathKind::Reflected { building: bi, face: fi as u8 },
                length,
                aod: departure(dir, bs.broadside_deg),
                loss_db: free_space_path_loss_db(length, cfg.carrier_hz)
                    + pen
                    + scene.reflection_loss_db,
                penetration_db: pen,
            });
        }
    }

    paths.sort_by(|a, b| a.loss_db.total_cmp(&b.loss_db));
    let best = paths[0].loss_db;
    paths.retain(|p| p.loss_db <= best + cfg.drop_threshold_db);
    paths.truncate(cfg.max_paths.max(1));
    paths
}
