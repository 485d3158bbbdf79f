//! Sources of per-slot link measurements.

use std::sync::Arc;

use crate::beamforming::{initial_beam_training, Codebook, TrainingResult};
use crate::channel::{
    assemble_faded_channel, beam_vector, snr_db, ArrayGeometry, ChannelVector, Direction, LinkBudget, Path,
};
use crate::rng::{substream, Stream};
use crate::scene::{trace_paths, BsSite, ObstacleConfig, ObstacleSet, PropagationConfig, Scene, Trajectory, Vec3};

/// Positions of the UE and the BSs. Slots and BSs are 0-based here.
pub trait SiteView {
    fn num_bs(&self) -> usize;
    fn num_slots(&self) -> usize;
    fn ue_position(&self, slot: usize) -> [f64; 2];
    fn bs_position(&self, bs: usize) -> [f64; 3];
}

/// Measurement oracle consumed by the environment.
pub trait LinkModel: SiteView {
    /// Draw the random state (obstacles, fading) of a realization.
    fn begin_realization(&mut self, realization: u64);
    /// SNR in dB at `slot` from BS `bs` with a beam synthesised toward `dir`.
    fn measure(&mut self, slot: usize, bs: usize, dir: Direction) -> f64;
    /// Exhaustive codebook sweep at `slot` from BS `bs`.
    fn train(&mut self, slot: usize, bs: usize, slot_duration: f64) -> TrainingResult;
}

/// Geometry-driven links: traced paths, per-slot fading, planar array.
#[derive(Debug, Clone)]
pub struct RayLinkModel {
    scene: Arc<Scene>,
    sites: Arc<Vec<BsSite>>,
    trajectory: Arc<Trajectory>,
    propagation: PropagationConfig,
    obstacle_config: ObstacleConfig,
    geometry: ArrayGeometry,
    budget: LinkBudget,
    codebook: Arc<Codebook>,
    seed: u64,
    realization: u64,
    obstacles: Arc<ObstacleSet>,
    channels: Vec<Option<ChannelVector>>,
}

impl RayLinkModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        scene: Arc<Scene>,
        sites: Arc<Vec<BsSite>>,
        trajectory: Arc<Trajectory>,
        propagation: PropagationConfig,
        obstacle_config: ObstacleConfig,
        geometry: ArrayGeometry,
        budget: LinkBudget,
        codebook: Arc<Codebook>,
        seed: u64,
    ) -> Self {
        let n = sites.len() * trajectory.slots();
        Self {
            scene,
            sites,
            trajectory,
            propagation,
            obstacle_config,
            geometry,
            budget,
            codebook,
            seed,
            realization: 0,
            obstacles: Arc::new(ObstacleSet::empty()),
            channels: vec![None; n],
        }
    }

    pub fn obstacles(&self) -> &ObstacleSet {
        &self.obstacles
    }

    pub fn sites(&self) -> &[BsSite] {
        &self.sites
    }

    pub fn budget(&self) -> &LinkBudget {
        &self.budget
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    fn ue_point(&self, slot: usize) -> Vec3 {
        let p = self.trajectory.waypoints[slot];
        Vec3::new(p[0], p[1], self.propagation.ue_height)
    }

    /// Faded channel of the current realization at `(slot, bs)`.
    pub fn channel(&mut self, slot: usize, bs: usize) -> &ChannelVector {
        let idx = slot * self.sites.len() + bs;
        if self.channels[idx].is_none() {
            let ue = self.ue_point(slot);
            let paths: Vec<Path> =
                trace_paths(&self.scene, &self.obstacles, &self.sites[bs], ue, &self.propagation)
                    .iter()
                    .map(|p| Path::from_loss_db(p.loss_db, p.aod))
                    .collect();
            let mut rng = substream(self.seed, Stream::Fading, &[self.realization, slot as u64, bs as u64]);
            let h = assemble_faded_channel(&paths, &self.geometry, &mut rng)
                .unwrap_or_else(|_| ChannelVector(vec![Default::default(); self.geometry.elements()]));
            self.channels[idx] = Some(h);
        }
        self.channels[idx].as_ref().expect("filled above")
    }
}

impl SiteView for RayLinkModel {
    fn num_bs(&self) -> usize {
        self.sites.len()
    }

    fn num_slots(&self) -> usize {
        self.trajectory.slots()
    }

    fn ue_position(&self, slot: usize) -> [f64; 2] {
        self.trajectory.waypoints[slot]
    }

    fn bs_position(&self, bs: usize) -> [f64; 3] {
        let p = self.sites[bs].position;
        [p.x, p.y, p.z]
    }
}

impl LinkModel for RayLinkModel {
    fn begin_realization(&mut self, realization: u64) {
        self.realization = realization;
        self.obstacles = Arc::new(ObstacleSet::for_realization(
            &self.scene,
            &self.obstacle_config,
            self.seed,
            realization,
        ));
        self.channels.iter_mut().for_each(|c| *c = None);
    }

    fn measure(&mut self, slot: usize, bs: usize, dir: Direction) -> f64 {
        let f = beam_vector(dir, &self.geometry);
        let budget = self.budget;
        snr_db(self.channel(slot, bs), &f, &budget)
    }

    fn train(&mut self, slot: usize, bs: usize, slot_duration: f64) -> TrainingResult {
        let budget = self.budget;
        let codebook = Arc::clone(&self.codebook);
        let h = self.channel(slot, bs);
        initial_beam_training(&codebook, slot_duration, |b| snr_db(h, &b.weights, &budget))
    }
}

/// Hand-scripted link quality: at each `(slot, bs)` the SNR peaks at a given
/// AoD and falls off linearly with angular distance. Deterministic.
#[derive(Debug, Clone)]
pub struct ScriptedLinks {
    /// `links[slot][bs]`.
    pub links: Vec<Vec<ScriptedLink>>,
    pub slope_db_per_deg: f64,
    /// Directions swept by initial training.
    pub codebook: Vec<Direction>,
    pub ue_positions: Vec<[f64; 2]>,
    pub bs_positions: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScriptedLink {
    pub peak_snr_db: f64,
    pub aod: Direction,
}

impl ScriptedLink {
    pub fn new(peak_snr_db: f64, aod: Direction) -> Self {
        Self { peak_snr_db, aod }
    }
}

impl ScriptedLinks {
    /// UE walks the x axis at 1 m per slot; BS `j` sits at `(10 j, 10, 6)`.
    pub fn new(links: Vec<Vec<ScriptedLink>>, slope_db_per_deg: f64, codebook: Vec<Direction>) -> Self {
        let slots = links.len();
        let num_bs = links.first().map_or(0, Vec::len);
        assert!(links.iter().all(|row| row.len() == num_bs), "ragged link script");
        Self {
            links,
            slope_db_per_deg,
            codebook,
            ue_positions: (0..slots).map(|i| [i as f64, 0.0]).collect(),
            bs_positions: (0..num_bs).map(|j| [10.0 * j as f64, 10.0, 6.0]).collect(),
        }
    }

    pub fn with_bs_positions(mut self, positions: Vec<[f64; 3]>) -> Self {
        assert_eq!(positions.len(), self.bs_positions.len());
        self.bs_positions = positions;
        self
    }
}

impl SiteView for ScriptedLinks {
    fn num_bs(&self) -> usize {
        self.bs_positions.len()
    }

    fn num_slots(&self) -> usize {
        self.links.len()
    }

    fn ue_position(&self, slot: usize) -> [f64; 2] {
        self.ue_positions[slot]
    }

    fn bs_position(&self, bs: usize) -> [f64; 3] {
        self.bs_positions[bs]
    }
}

impl LinkModel for ScriptedLinks {
    fn begin_realization(&mut self, _realization: u64) {}

    fn measure(&mut self, slot: usize, bs: usize, dir: Direction) -> f64 {
        let l = self.links[slot][bs];
        l.peak_snr_db - self.slope_db_per_deg * dir.distance(l.aod)
    }

    fn train(&mut self, slot: usize, bs: usize, slot_duration: f64) -> TrainingResult {
        let l = self.links[slot][bs];
        let mut best = (0, f64::NEG_INFINITY);
        for (i, &d) in self.codebook.iter().enumerate() {
            let s = l.peak_snr_db - self.slope_db_per_deg * d.distance(l.aod);
            if s > best.1 {
                best = (i, s);
            }
        }
        TrainingResult {
            index: best.0,
            direction: self.codebook[best.0],
            snr_db: best.1,
            tau_b: crate::beamforming::handover_training_duration(slot_duration),
        }
    }
}
