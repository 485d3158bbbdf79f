//! Synthetic urban geometry: buildings, street corridor, BS sites and the UE
//! trajectory, plus random street obstacles and the path tracer.

mod geometry;
mod obstacles;
mod paths;

pub use geometry::{union_area, Aabb, Rect, Vec3, GRAZING_TOLERANCE_M};
pub use obstacles::{sample_obstacles, Obstacle, ObstacleConfig, ObstacleSet};
pub use paths::{free_space_path_loss_db, segment_penetration_db, trace_paths, PathKind, PropagationConfig, PropagationPath};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{substream, Stream};
use crate::scenario::ScenarioConfig;

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("street corridor {corridor:?} is not contained in world bounds {world:?}")]
    CorridorOutsideWorld { corridor: Rect, world: Rect },
    #[error("street segment {index} from {from:?} to {to:?} is not axis-aligned")]
    SkewedStreet { index: usize, from: [f64; 2], to: [f64; 2] },
    #[error("building {index} is invalid: {reason}")]
    InvalidBuilding { index: usize, reason: String },
    #[error("could only place {placed} of {requested} random buildings")]
    BuildingPlacement { placed: usize, requested: usize },
    #[error("trajectory needs {needed:.3} m of street but the waypoints span {available:.3} m")]
    TrajectoryTooShort { needed: f64, available: f64 },
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
}

/// Direction of travel of a street segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StreetAxis {
    X,
    Y,
}

/// One straight, axis-aligned stretch of the trajectory corridor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreetSegment {
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub axis: StreetAxis,
    /// Footprint of the segment, extended by half the width past both ends.
    pub rect: Rect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Building {
    pub footprint: Rect,
    pub height: f64,
    pub penetration_loss_db: f64,
}

impl Building {
    pub fn aabb(&self) -> Aabb {
        Aabb::new(
            Vec3::new(self.footprint.min[0], self.footprint.min[1], 0.0),
            Vec3::new(self.footprint.max[0], self.footprint.max[1], self.height),
        )
    }
}

/// Static geometry of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub bounds: Rect,
    pub buildings: Vec<Building>,
    pub street: Vec<StreetSegment>,
    /// Loss of one specular bounce off a building face.
    pub reflection_loss_db: f64,
}

impl Scene {
    pub fn street_rects(&self) -> Vec<Rect> {
        self.street.iter().map(|s| s.rect).collect()
    }

    pub fn street_area(&self) -> f64 {
        union_area(&self.street_rects())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsSite {
    /// 1-based, contiguous.
    pub id: usize,
    /// `z` is the mast height.
    pub position: Vec3,
    /// Azimuth of the array broadside in the world frame, degrees.
    pub broadside_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// One UE ground position per association slot.
    pub waypoints: Vec<[f64; 2]>,
    pub speed: f64,
    pub association_interval: f64,
}

impl Trajectory {
    pub fn slots(&self) -> usize {
        self.waypoints.len()
    }

    pub fn spacing(&self) -> f64 {
        self.speed * self.association_interval
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreetConfig {
    /// Corner points of the walk; consecutive points must share x or y.
    pub waypoints: Vec<[f64; 2]>,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildingSpec {
    pub min: [f64; 2],
    pub max: [f64; 2],
    pub height: f64,
    #[serde(default)]
    pub penetration_loss_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomBuildings {
    pub count: usize,
    /// Smallest footprint side lengths (x, y).
    pub size_min: [f64; 2],
    pub size_max: [f64; 2],
    pub height: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildingConfig {
    #[serde(default)]
    pub explicit: Vec<BuildingSpec>,
    #[serde(default)]
    pub random: Option<RandomBuildings>,
    /// Brick wall default.
    #[serde(default = "default_brick_loss")]
    pub penetration_loss_db: f64,
}

impl Default for BuildingConfig {
    fn default() -> Self {
        Self {
            explicit: Vec::new(),
            random: None,
            penetration_loss_db: default_brick_loss(),
        }
    }
}

fn default_brick_loss() -> f64 {
    40.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteSpec {
    pub position: [f64; 2],
    /// Defaults to facing the closest trajectory point.
    #[serde(default)]
    pub broadside_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSites {
    pub count: usize,
    /// Distance kept from the corridor edge, meters.
    #[serde(default = "default_wall_inset")]
    pub inset: f64,
}

fn default_wall_inset() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteConfig {
    #[serde(default = "default_bs_height")]
    pub height: f64,
    #[serde(default)]
    pub explicit: Vec<SiteSpec>,
    #[serde(default)]
    pub random: Option<RandomSites>,
}

fn default_bs_height() -> f64 {
    6.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    #[serde(default = "default_speed")]
    pub speed: f64,
    #[serde(default = "default_interval")]
    pub association_interval: f64,
    #[serde(default = "default_slots")]
    pub slots: usize,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            speed: default_speed(),
            association_interval: default_interval(),
            slots: default_slots(),
        }
    }
}

fn default_speed() -> f64 {
    1.0
}
fn default_interval() -> f64 {
    1.0
}
fn default_slots() -> usize {
    100
}

/// Build the corridor from the street polyline.
pub fn street_segments(cfg: &StreetConfig) -> Result<Vec<StreetSegment>, SceneError> {
    if cfg.waypoints.len() < 2 {
        return Err(SceneError::InvalidParameter {
            field: "street.waypoints",
            reason: "need at least two points".into(),
        });
    }
    if !(cfg.width > 0.0) {
        return Err(SceneError::InvalidParameter {
            field: "street.width",
            reason: format!("must be positive, got {}", cfg.width),
        });
    }
    let h = cfg.width / 2.0;
    cfg.waypoints
        .windows(2)
        .enumerate()
        .map(|(index, w)| {
            let (a, b) = (w[0], w[1]);
            let axis = if a[1] == b[1] && a[0] != b[0] {
                StreetAxis::X
            } else if a[0] == b[0] && a[1] != b[1] {
                StreetAxis::Y
            } else {
                return Err(SceneError::SkewedStreet { index, from: a, to: b });
            };
            let rect = Rect::new(
                [a[0].min(b[0]) - h, a[1].min(b[1]) - h],
                [a[0].max(b[0]) + h, a[1].max(b[1]) + h],
            );
            Ok(StreetSegment { start: a, end: b, axis, rect })
        })
        .collect()
}

/// Buildings plus corridor for `config`; deterministic in `(config, seed)`.
pub fn generate_scene(config: &ScenarioConfig, seed: u64) -> Result<Scene, SceneError> {
    let world = config.world;
    if !(world.min[0] < world.max[0] && world.min[1] < world.max[1]) {
        return Err(SceneError::InvalidParameter {
            field: "world",
            reason: "min must be below max on both axes".into(),
        });
    }
    let street = street_segments(&config.street)?;
    for s in &street {
        if !world.contains_rect(&s.rect) {
            return Err(SceneError::CorridorOutsideWorld { corridor: s.rect, world });
        }
    }
    let bc = &config.buildings;
    let mut buildings = Vec::new();
    for (index, spec) in bc.explicit.iter().enumerate() {
        let footprint = Rect::new(spec.min, spec.max);
        let loss = spec.penetration_loss_db.unwrap_or(bc.penetration_loss_db);
        let invalid = |reason: &str| SceneError::InvalidBuilding { index, reason: reason.into() };
        if !(spec.min[0] < spec.max[0] && spec.min[1] < spec.max[1] && spec.height > 0.0) {
            return Err(invalid("min must be below max and height positive"));
        }
        if !world.contains_rect(&footprint) {
            return Err(invalid("outside world bounds"));
        }
        if loss < 0.0 {
            return Err(invalid("negative penetration loss"));
        }
        if street.iter().any(|s| s.rect.overlaps(&footprint)) {
            return Err(invalid("intersects the street corridor"));
        }
        buildings.push(Building { footprint, height: spec.height, penetration_loss_db: loss });
    }

    if let Some(rb) = &bc.random {
        let mut rng = substream(seed, Stream::Scene, &[0]);
        let mut placed = 0;
        let mut attempts = 0;
        let budget = 10_000 * rb.count.max(1);
        while placed < rb.count && attempts < budget {
            attempts += 1;
            let sx = sample_range(&mut rng, rb.size_min[0], rb.size_max[0]);
            let sy = sample_range(&mut rng, rb.size_min[1], rb.size_max[1]);
            if sx >= world.max[0] - world.min[0] || sy >= world.max[1] - world.min[1] {
                continue;
            }
            let x0 = sample_range(&mut rng, world.min[0], world.max[0] - sx);
            let y0 = sample_range(&mut rng, world.min[1], world.max[1] - sy);
            let footprint = Rect::new([x0, y0], [x0 + sx, y0 + sy]);
            let height = sample_range(&mut rng, rb.height[0], rb.height[1]);
            if street.iter().any(|s| s.rect.overlaps(&footprint))
                || buildings.iter().any(|b: &Building| b.footprint.overlaps(&footprint))
            {
                continue;
            }
            buildings.push(Building {
                footprint,
                height,
                penetration_loss_db: bc.penetration_loss_db,
            });
            placed += 1;
        }
        if placed < rb.count {
            return Err(SceneError::BuildingPlacement { placed, requested: rb.count });
        }
    }

    Ok(Scene {
        bounds: world,
        buildings,
        street,
        reflection_loss_db: config.reflection_loss_db,
    })
}

fn sample_range<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn polyline_length(points: &[[f64; 2]]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]))
        .sum()
}

/// Point at arclength `s` along the polyline, with the index of its segment.
fn point_at(points: &[[f64; 2]], mut s: f64) -> ([f64; 2], usize) {
    for (i, w) in points.windows(2).enumerate() {
        let len = (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]);
        if s <= len || i + 2 == points.len() {
            let t = if len > 0.0 { (s / len).min(1.0) } else { 0.0 };
            return (
                [w[0][0] + t * (w[1][0] - w[0][0]), w[0][1] + t * (w[1][1] - w[0][1])],
                i,
            );
        }
        s -= len;
    }
    (points[0], 0)
}

/// Closest point on segment `a → b` to `p`.
fn closest_on_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    [a[0] + t * d[0], a[1] + t * d[1]]
}

/// Sample `slots` UE positions walking the polyline at constant speed: every
/// consecutive pair is exactly `speed * association_interval` apart.
pub fn build_trajectory(
    street: &StreetConfig,
    cfg: &TrajectoryConfig,
) -> Result<Trajectory, SceneError> {
    let spacing = cfg.speed * cfg.association_interval;
    if !(spacing > 0.0) {
        return Err(SceneError::InvalidParameter {
            field: "trajectory",
            reason: "speed and association interval must be positive".into(),
        });
    }
    if cfg.slots == 0 {
        return Err(SceneError::InvalidParameter {
            field: "trajectory.slots",
            reason: "must be at least 1".into(),
        });
    }
    let pts = &street.waypoints;
    if pts.len() < 2 {
        return Err(SceneError::InvalidParameter {
            field: "street.waypoints",
            reason: "need at least two points".into(),
        });
    }
    let mut waypoints = vec![pts[0]];
    let mut seg = 0;
    let mut cur = pts[0];
    while waypoints.len() < cfg.slots {
        // first point further along the polyline at chord distance `spacing`
        let mut found = None;
        for (i, w) in pts.windows(2).enumerate().skip(seg) {
            let start = if i == seg { cur } else { w[0] };
            let end = w[1];
            if (end[0] - cur[0]).hypot(end[1] - cur[1]) >= spacing {
                // |start + t (end - start) - cur| = spacing, t in [0, 1]
                let d = [end[0] - start[0], end[1] - start[1]];
                let f = [start[0] - cur[0], start[1] - cur[1]];
                let a = d[0] * d[0] + d[1] * d[1];
                let b = 2.0 * (f[0] * d[0] + f[1] * d[1]);
                let c = f[0] * f[0] + f[1] * f[1] - spacing * spacing;
                let t = (-b + (b * b - 4.0 * a * c).max(0.0).sqrt()) / (2.0 * a);
                let t = t.clamp(0.0, 1.0);
                found = Some(([start[0] + t * d[0], start[1] + t * d[1]], i));
                break;
            }
        }
        match found {
            Some((p, i)) => {
                waypoints.push(p);
                cur = p;
                seg = i;
            }
            None => {
                return Err(SceneError::TrajectoryTooShort {
                    needed: spacing * (cfg.slots - 1) as f64,
                    available: polyline_length(pts),
                })
            }
        }
    }
    Ok(Trajectory { waypoints, speed: cfg.speed, association_interval: cfg.association_interval })
}

/// Place BS sites from explicit specs followed by random wall-mounted ones.
pub fn build_sites(
    scene: &Scene,
    street: &StreetConfig,
    cfg: &SiteConfig,
    seed: u64,
) -> Result<Vec<BsSite>, SceneError> {
    if !(cfg.height > 0.0) {
        return Err(SceneError::InvalidParameter {
            field: "sites.height",
            reason: "BS height must be positive".into(),
        });
    }
    let pts = &street.waypoints;
    let mut sites = Vec::new();
    for spec in &cfg.explicit {
        let p = spec.position;
        if !scene.bounds.contains(p) {
            return Err(SceneError::InvalidParameter {
                field: "sites.explicit",
                reason: format!("site {p:?} outside world bounds"),
            });
        }
        let broadside = spec.broadside_deg.unwrap_or_else(|| {
            let target = pts
                .windows(2)
                .map(|w| closest_on_segment(p, w[0], w[1]))
                .min_by(|a, b| {
                    let da = (a[0] - p[0]).hypot(a[1] - p[1]);
                    let db = (b[0] - p[0]).hypot(b[1] - p[1]);
                    da.total_cmp(&db)
                })
                .unwrap_or(pts[0]);
            (target[1] - p[1]).atan2(target[0] - p[0]).to_degrees()
        });
        sites.push(BsSite {
            id: sites.len() + 1,
            position: Vec3::new(p[0], p[1], cfg.height),
            broadside_deg: broadside,
        });
    }
    if let Some(rs) = &cfg.random {
        let mut rng = substream(seed, Stream::Scene, &[1]);
        let total = polyline_length(pts);
        let offset = street.width / 2.0 - rs.inset;
        for k in 0..rs.count {
            let s = (k as f64 + rng.random::<f64>()) / rs.count as f64 * total;
            let (p, i) = point_at(pts, s);
            let (a, b) = (pts[i], pts[i + 1]);
            let len = (b[0] - a[0]).hypot(b[1] - a[1]);
            let dir = [(b[0] - a[0]) / len, (b[1] - a[1]) / len];
            let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let normal = [-dir[1] * side, dir[0] * side];
            let pos = [p[0] + normal[0] * offset, p[1] + normal[1] * offset];
            sites.push(BsSite {
                id: sites.len() + 1,
                position: Vec3::new(pos[0], pos[1], cfg.height),
                broadside_deg: (-normal[1]).atan2(-normal[0]).to_degrees(),
            });
        }
    }
    if sites.is_empty() {
        return Err(SceneError::InvalidParameter {
            field: "sites",
            reason: "at least one BS is required".into(),
        });
    }
    Ok(sites)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioConfig;

    fn base_config() -> ScenarioConfig {
        ScenarioConfig::from_json_str(
            r#"{
                "world": {"min": [0, 0], "max": [200, 200]},
                "street": {"waypoints": [[20, 100], [180, 100]], "width": 16},
                "sites": {"explicit": [{"position": [100, 108]}]}
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn empty_building_list() {
        let scene = generate_scene(&base_config(), 1).unwrap();
        assert!(scene.buildings.is_empty());
    }

    #[test]
    fn deterministic_for_seed() {
        let mut cfg = base_config();
        cfg.buildings.random = Some(RandomBuildings {
            count: 12,
            size_min: [10.0, 10.0],
            size_max: [30.0, 30.0],
            height: [10.0, 30.0],
        });
        let a = generate_scene(&cfg, 7).unwrap();
        let b = generate_scene(&cfg, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_scene(&cfg, 8).unwrap());
    }

    #[test]
    fn random_buildings_avoid_corridor() {
        let mut cfg = base_config();
        cfg.buildings.random = Some(RandomBuildings {
            count: 12,
            size_min: [10.0, 10.0],
            size_max: [30.0, 30.0],
            height: [10.0, 30.0],
        });
        let scene = generate_scene(&cfg, 3).unwrap();
        assert_eq!(scene.buildings.len(), 12);
        // every corridor centerline segment misses every building box at UE
        // height, and no box overlaps the corridor footprint
        for b in &scene.buildings {
            let bx = b.aabb();
            for s in &scene.street {
                assert!(!s.rect.overlaps(&b.footprint));
                let a = Vec3::new(s.start[0], s.start[1], 1.5);
                let e = Vec3::new(s.end[0], s.end[1], 1.5);
                assert!(!bx.blocks(a, e));
            }
        }
    }

    #[test]
    fn corridor_wider_than_world_is_rejected() {
        let mut cfg = base_config();
        cfg.street.width = 500.0;
        assert!(matches!(
            generate_scene(&cfg, 0),
            Err(SceneError::CorridorOutsideWorld { .. })
        ));
    }

    #[test]
    fn skewed_street_is_rejected() {
        let mut cfg = base_config();
        cfg.street.waypoints = vec![[20.0, 20.0], [100.0, 90.0]];
        assert!(matches!(generate_scene(&cfg, 0), Err(SceneError::SkewedStreet { .. })));
    }

    #[test]
    fn trajectory_spacing_is_constant_through_corners() {
        let street = StreetConfig {
            waypoints: vec![[0.0, 0.0], [10.3, 0.0], [10.3, 20.0], [30.0, 20.0]],
            width: 10.0,
        };
        let cfg = TrajectoryConfig { speed: 1.0, association_interval: 1.0, slots: 35 };
        let t = build_trajectory(&street, &cfg).unwrap();
        assert_eq!(t.slots(), 35);
        for w in t.waypoints.windows(2) {
            let d = (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]);
            assert!((d - 1.0).abs() < 1e-9, "spacing {d}");
        }
    }

    #[test]
    fn trajectory_too_short() {
        let street = StreetConfig { waypoints: vec![[0.0, 0.0], [10.0, 0.0]], width: 4.0 };
        let cfg = TrajectoryConfig { speed: 1.0, association_interval: 1.0, slots: 12 };
        assert!(matches!(
            build_trajectory(&street, &cfg),
            Err(SceneError::TrajectoryTooShort { .. })
        ));
    }

    #[test]
    fn random_sites_cover_trajectory() {
        let mut cfg = base_config();
        cfg.sites.explicit.clear();
        cfg.sites.random = Some(RandomSites { count: 4, inset: 0.5 });
        let scene = generate_scene(&cfg, 0).unwrap();
        let sites = build_sites(&scene, &cfg.street, &cfg.sites, 5).unwrap();
        assert_eq!(sites.iter().map(|s| s.id).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
        for (k, s) in sites.iter().enumerate() {
            assert_eq!(s.position.z, 6.0);
            // stratified: site k lies in the k-th quarter of the street
            let lo = 20.0 + 40.0 * k as f64;
            assert!(s.position.x >= lo && s.position.x <= lo + 40.0);
            assert!(((s.position.y - 100.0).abs() - 7.5).abs() < 1e-9);
        }
    }

    #[test]
    fn explicit_site_faces_street() {
        let cfg = base_config();
        let scene = generate_scene(&cfg, 0).unwrap();
        let sites = build_sites(&scene, &cfg.street, &cfg.sites, 0).unwrap();
        assert!((sites[0].broadside_deg - (-90.0)).abs() < 1e-9);
    }
}
