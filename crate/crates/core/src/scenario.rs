//! Scenario files: everything needed to rebuild an environment from JSON.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beamforming::{build_codebook, BeamformingError, Codebook, CodebookConfig};
use crate::channel::{ArrayGeometry, LinkBudget};
use crate::env::{EnvConfig, EnvError, HandoverEnv, RayLinkModel};
use crate::scene::{
    build_sites, build_trajectory, generate_scene, BsSite, BuildingConfig, ObstacleConfig, PropagationConfig, Rect,
    Scene, SceneError, SiteConfig, StreetConfig, Trajectory, TrajectoryConfig,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed scenario: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Beamforming(#[from] BeamformingError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("requested {requested} BSs but the scenario has {available}")]
    NotEnoughSites { requested: usize, available: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub world: Rect,
    pub street: StreetConfig,
    #[serde(default)]
    pub buildings: BuildingConfig,
    #[serde(default = "default_reflection_loss")]
    pub reflection_loss_db: f64,
    pub sites: SiteConfig,
    #[serde(default)]
    pub trajectory: TrajectoryConfig,
    #[serde(default)]
    pub obstacles: ObstacleConfig,
    #[serde(default)]
    pub propagation: PropagationConfig,
    #[serde(default)]
    pub link: LinkBudget,
    #[serde(default)]
    pub array: ArrayGeometry,
    #[serde(default)]
    pub codebook: CodebookConfig,
    #[serde(default)]
    pub env: EnvConfig,
    /// Master seed for scene layout and every random stream.
    #[serde(default)]
    pub seed: u64,
}

fn default_reflection_loss() -> f64 {
    10.0
}

impl ScenarioConfig {
    pub fn from_json_str(s: &str) -> Result<Self, ScenarioError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn from_file(path: &Path) -> Result<Self, ScenarioError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// Canonical JSON used for hashing.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("scenario config serializes")
    }
}

/// Realization indices reserved for evaluation start here, far above any
/// training episode count, so evaluation never replays a training draw.
pub const EVALUATION_OFFSET: u64 = 1 << 40;

/// The `n` evaluation realizations shared by every method in a comparison.
pub fn evaluation_realizations(n: usize) -> Vec<u64> {
    (0..n as u64).map(|r| EVALUATION_OFFSET + r).collect()
}

/// The static part of a scenario, resolved from its config.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub scene: Arc<Scene>,
    pub sites: Arc<Vec<BsSite>>,
    pub trajectory: Arc<Trajectory>,
    pub codebook: Arc<Codebook>,
}

/// Serialised form of a generated scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    pub scene: Scene,
    pub sites: Vec<BsSite>,
    pub trajectory: Trajectory,
}

impl Scenario {
    pub fn build(config: ScenarioConfig) -> Result<Self, ScenarioError> {
        config.env.validate()?;
        let scene = generate_scene(&config, config.seed)?;
        let trajectory = build_trajectory(&config.street, &config.trajectory)?;
        let sites = build_sites(&scene, &config.street, &config.sites, config.seed)?;
        let codebook = build_codebook(&config.array, &config.codebook)?;
        Ok(Self {
            config,
            scene: Arc::new(scene),
            sites: Arc::new(sites),
            trajectory: Arc::new(trajectory),
            codebook: Arc::new(codebook),
        })
    }

    pub fn num_bs(&self) -> usize {
        self.sites.len()
    }

    pub fn scene_file(&self) -> SceneFile {
        SceneFile {
            scene: (*self.scene).clone(),
            sites: (*self.sites).clone(),
            trajectory: (*self.trajectory).clone(),
        }
    }

    /// Environment over the first `num_bs` sites and the first `slots`
    /// trajectory points (all of them when `None`).
    pub fn env(&self, num_bs: Option<usize>, slots: Option<usize>) -> Result<HandoverEnv<RayLinkModel>, ScenarioError> {
        let available = self.sites.len();
        let b = num_bs.unwrap_or(available);
        if b == 0 || b > available {
            return Err(ScenarioError::NotEnoughSites { requested: b, available });
        }
        let sites = if b == available { Arc::clone(&self.sites) } else { Arc::new(self.sites[..b].to_vec()) };
        let trajectory = match slots {
            Some(m) if m != self.trajectory.slots() => {
                if m == 0 || m > self.trajectory.slots() {
                    return Err(SceneError::InvalidParameter {
                        field: "trajectory.slots",
                        reason: format!("override {m} outside 1..={}", self.trajectory.slots()),
                    }
                    .into());
                }
                let mut t = (*self.trajectory).clone();
                t.waypoints.truncate(m);
                Arc::new(t)
            }
            _ => Arc::clone(&self.trajectory),
        };
        let c = &self.config;
        let link = RayLinkModel::new(
            Arc::clone(&self.scene),
            sites,
            trajectory,
            c.propagation.clone(),
            c.obstacles.clone(),
            c.array,
            c.link,
            Arc::clone(&self.codebook),
            c.seed,
        );
        Ok(HandoverEnv::new(link, c.env)?)
    }
}
