//! The per-slot association process.
//!
//! At the start of every slot the UE has moved to its next waypoint and the
//! serving BS still uses last slot's beam. If that stale link clears the SNR
//! threshold nothing is retrained. Otherwise the agent either tracks (sweeps
//! the sorted neighbourhood of the current beam, `β` per beam) or hands over
//! to a BS of its choice (full codebook training, `τ_c / 3`). A tracking sweep
//! that misses the SNR threshold and leaves the slot at or below the
//! throughput threshold triggers a reactive re-association to the best BS.

mod link;
mod trace;

pub use link::{LinkModel, RayLinkModel, ScriptedLink, ScriptedLinks, SiteView};
pub use trace::{EpisodeTrace, TraceRow};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beamforming::{handover_training_duration, sorted_neighborhood, track_beam, BeamformingError, NeighborhoodSpec};
use crate::channel::{rate, Direction};

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("episode finished: step called after the last slot")]
    EpisodeFinished,
    #[error("step called before reset")]
    NotReset,
    #[error("action {action} outside 0..={num_bs}")]
    InvalidAction { action: usize, num_bs: usize },
    #[error("training time {tau_b} s exceeds the slot duration {tau_c} s")]
    TrainingExceedsSlot { tau_b: f64, tau_c: f64 },
    #[error("invalid environment configuration: {0}")]
    Config(String),
}

impl From<BeamformingError> for EnvError {
    fn from(e: BeamformingError) -> Self {
        EnvError::Config(e.to_string())
    }
}

/// What the agent observes at slot entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    /// Location index, 1-based.
    pub slot: usize,
    /// Serving BS, 1-based.
    pub serving: usize,
    pub snr_db: f64,
    /// Whether the previous slot ran a tracking sweep.
    pub tracking: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Track,
    /// Hand over to the given 1-based BS.
    Handover(usize),
}

impl Action {
    /// `0` tracks, `j ≥ 1` hands over to BS `j`.
    pub fn from_index(a: usize, num_bs: usize) -> Result<Self, EnvError> {
        match a {
            0 => Ok(Action::Track),
            j if j <= num_bs => Ok(Action::Handover(j)),
            _ => Err(EnvError::InvalidAction { action: a, num_bs }),
        }
    }

    pub fn index(self) -> usize {
        match self {
            Action::Track => 0,
            Action::Handover(j) => j,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    /// τ_c, seconds.
    #[serde(default = "default_slot_duration")]
    pub slot_duration: f64,
    /// β, seconds per tracked beam.
    #[serde(default = "default_beta")]
    pub beam_test_duration: f64,
    #[serde(default = "default_snr_thr")]
    pub snr_threshold_db: f64,
    /// Γ_thr, bit/Hz.
    #[serde(default = "default_gamma_thr")]
    pub throughput_threshold: f64,
    /// λ.
    #[serde(default = "default_penalty")]
    pub penalty: f64,
    #[serde(default)]
    pub neighborhood: NeighborhoodSpec,
}

fn default_slot_duration() -> f64 {
    10e-3
}
fn default_beta() -> f64 {
    10e-6
}
fn default_snr_thr() -> f64 {
    2.0
}
fn default_gamma_thr() -> f64 {
    1.0
}
fn default_penalty() -> f64 {
    100.0
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            slot_duration: default_slot_duration(),
            beam_test_duration: default_beta(),
            snr_threshold_db: default_snr_thr(),
            throughput_threshold: default_gamma_thr(),
            penalty: default_penalty(),
            neighborhood: NeighborhoodSpec::default(),
        }
    }
}

impl EnvConfig {
    pub fn handover_training(&self) -> f64 {
        handover_training_duration(self.slot_duration)
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        self.neighborhood.validate()?;
        if !(self.slot_duration > 0.0 && self.beam_test_duration > 0.0) {
            return Err(EnvError::Config("slot and beam test durations must be positive".into()));
        }
        if !(self.penalty > 0.0) {
            return Err(EnvError::Config("penalty λ must be positive".into()));
        }
        let worst = self.handover_training() + self.beam_test_duration * self.neighborhood.size() as f64;
        if worst > self.slot_duration {
            return Err(EnvError::TrainingExceedsSlot { tau_b: worst, tau_c: self.slot_duration });
        }
        Ok(())
    }
}

/// `Γ = (1 − τ_b / τ_c) R`.
pub fn throughput(rate: f64, tau_b: f64, tau_c: f64) -> Result<f64, EnvError> {
    if tau_b > tau_c {
        return Err(EnvError::TrainingExceedsSlot { tau_b, tau_c });
    }
    Ok((1.0 - tau_b / tau_c) * rate)
}

/// `r = Γ − λ·1{Γ ≤ Γ_thr}`.
pub fn reward(throughput: f64, threshold: f64, penalty: f64) -> f64 {
    if throughput <= threshold {
        throughput - penalty
    } else {
        throughput
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: State,
    pub reward: f64,
    /// Γ, bit/Hz.
    pub throughput: f64,
    /// R, bit/s/Hz.
    pub rate: f64,
    /// SNR achieved during data transmission.
    pub snr_db: f64,
    pub tau_b: f64,
    /// Beams measured by tracking (0 when no sweep ran).
    pub cnt: usize,
    /// Whether the entry SNR was below threshold, i.e. the action mattered.
    pub decision: bool,
    pub action: Option<Action>,
    pub serving: usize,
    /// The serving BS changed, by choice or by reactive fallback.
    pub handover_executed: bool,
    pub reactive_fallback: bool,
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct HandoverEnv<L> {
    link: L,
    config: EnvConfig,
    slot: usize,
    serving: usize,
    beam: Direction,
    snr_db: f64,
    tracking: bool,
    started: bool,
    done: bool,
}

impl<L: LinkModel> HandoverEnv<L> {
    pub fn new(link: L, config: EnvConfig) -> Result<Self, EnvError> {
        config.validate()?;
        if link.num_bs() == 0 || link.num_slots() == 0 {
            return Err(EnvError::Config("need at least one BS and one slot".into()));
        }
        Ok(Self {
            link,
            config,
            slot: 0,
            serving: 1,
            beam: Direction::default(),
            snr_db: 0.0,
            tracking: false,
            started: false,
            done: false,
        })
    }

    pub fn link(&self) -> &L {
        &self.link
    }

    pub fn link_mut(&mut self) -> &mut L {
        &mut self.link
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn num_bs(&self) -> usize {
        self.link.num_bs()
    }

    pub fn num_slots(&self) -> usize {
        self.link.num_slots()
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Current beam of the serving BS.
    pub fn beam(&self) -> Direction {
        self.beam
    }

    pub fn state(&self) -> State {
        State { slot: self.slot + 1, serving: self.serving, snr_db: self.snr_db, tracking: self.tracking }
    }

    /// Start a realization at the first location, served by BS 1 after a
    /// full beam training.
    pub fn reset(&mut self, realization: u64) -> State {
        self.link.begin_realization(realization);
        self.slot = 0;
        self.serving = 1;
        let t = self.link.train(0, 0, self.config.slot_duration);
        self.beam = t.direction;
        self.snr_db = t.snr_db;
        self.tracking = false;
        self.started = true;
        self.done = false;
        self.state()
    }

    fn best_bs(&mut self) -> (usize, Direction, f64) {
        let mut best = (1, Direction::default(), f64::NEG_INFINITY);
        for bs in 0..self.link.num_bs() {
            let t = self.link.train(self.slot, bs, self.config.slot_duration);
            if t.snr_db > best.2 {
                best = (bs + 1, t.direction, t.snr_db);
            }
        }
        best
    }

    pub fn step(&mut self, action: Action) -> Result<StepOutcome, EnvError> {
        if !self.started {
            return Err(EnvError::NotReset);
        }
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        let num_bs = self.link.num_bs();
        if let Action::Handover(j) = action {
            if j == 0 || j > num_bs {
                return Err(EnvError::InvalidAction { action: j, num_bs });
            }
        }
        let cfg = self.config;
        let decision = self.snr_db < cfg.snr_threshold_db;
        let mut tau_b = 0.0;
        let mut cnt = 0;
        let mut handover_executed = false;
        let mut reactive_fallback = false;
        let mut snr = self.snr_db;
        let mut tracking = false;

        if decision {
            match action {
                Action::Handover(j) => {
                    let t = self.link.train(self.slot, j - 1, cfg.slot_duration);
                    handover_executed = j != self.serving;
                    self.serving = j;
                    self.beam = t.direction;
                    snr = t.snr_db;
                    tau_b = t.tau_b;
                }
                Action::Track => {
                    tracking = true;
                    let dirs = sorted_neighborhood(self.beam, &cfg.neighborhood);
                    let (slot, bs) = (self.slot, self.serving - 1);
                    let link = &mut self.link;
                    let r = track_beam(&dirs, cfg.snr_threshold_db, cfg.beam_test_duration, |d| {
                        link.measure(slot, bs, d)
                    });
                    self.beam = r.direction;
                    snr = r.snr_db;
                    tau_b = r.tau_b;
                    cnt = r.cnt;
                    if !r.met_threshold
                        && throughput(rate(snr), tau_b, cfg.slot_duration)? <= cfg.throughput_threshold
                    {
                        let (bs, dir, s) = self.best_bs();
                        handover_executed = bs != self.serving;
                        reactive_fallback = true;
                        self.serving = bs;
                        self.beam = dir;
                        snr = s;
                        tau_b += cfg.handover_training();
                    }
                }
            }
        }

        let r = rate(snr);
        let gamma = throughput(r, tau_b, cfg.slot_duration)?;
        let rew = reward(gamma, cfg.throughput_threshold, cfg.penalty);
        let served_by = self.serving;

        self.tracking = tracking;
        if self.slot + 1 >= self.link.num_slots() {
            self.done = true;
            self.snr_db = snr;
        } else {
            self.slot += 1;
            self.snr_db = self.link.measure(self.slot, self.serving - 1, self.beam);
        }

        Ok(StepOutcome {
            state: self.state(),
            reward: rew,
            throughput: gamma,
            rate: r,
            snr_db: snr,
            tau_b,
            cnt,
            decision,
            action: decision.then_some(action),
            serving: served_by,
            handover_executed,
            reactive_fallback,
            done: self.done,
        })
    }
}

/// Chooses an action when the stale link is below threshold.
pub trait Policy {
    fn act(&mut self, state: &State, sites: &dyn SiteView) -> Action;
}

/// Adapter for closures.
pub struct FnPolicy<F>(pub F);

impl<F: FnMut(&State, &dyn SiteView) -> Action> Policy for FnPolicy<F> {
    fn act(&mut self, state: &State, sites: &dyn SiteView) -> Action {
        (self.0)(state, sites)
    }
}

/// Always-track policy.
pub struct AlwaysTrack;

impl Policy for AlwaysTrack {
    fn act(&mut self, _: &State, _: &dyn SiteView) -> Action {
        Action::Track
    }
}

/// Play one realization to the end. The policy is only consulted in slots
/// whose entry SNR is below threshold.
pub fn run_episode<L, P>(env: &mut HandoverEnv<L>, policy: &mut P, realization: u64) -> Result<EpisodeTrace, EnvError>
where
    L: LinkModel,
    P: Policy + ?Sized,
{
    let mut state = env.reset(realization);
    let mut rows = Vec::with_capacity(env.num_slots());
    loop {
        let action = if state.snr_db < env.config().snr_threshold_db {
            policy.act(&state, env.link())
        } else {
            Action::Track
        };
        let pos = env.link().ue_position(state.slot - 1);
        let out = env.step(action)?;
        rows.push(TraceRow::new(state.slot, pos, &out));
        if out.done {
            break;
        }
        state = out.state;
    }
    Ok(EpisodeTrace { realization, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dir(a: f64) -> Direction {
        Direction::new(a, 0.0)
    }

    fn grid() -> Vec<Direction> {
        (-12..=12).map(|k| dir(5.0 * k as f64)).collect()
    }

    /// Steady strong BS 1 and weaker BS 2.
    fn steady(slots: usize, peak1: f64, peak2: f64) -> ScriptedLinks {
        ScriptedLinks::new(
            (0..slots).map(|_| vec![ScriptedLink::new(peak1, dir(0.0)), ScriptedLink::new(peak2, dir(10.0))]).collect(),
            3.0,
            grid(),
        )
    }

    fn env(links: ScriptedLinks) -> HandoverEnv<ScriptedLinks> {
        HandoverEnv::new(links, EnvConfig::default()).unwrap()
    }

    #[test]
    fn throughput_examples() {
        assert_eq!(throughput(4.2, 0.0, 10e-3).unwrap(), 4.2);
        assert!((throughput(3.0, 10e-3 / 3.0, 10e-3).unwrap() - 2.0).abs() < 1e-12);
        assert!((throughput(5.0, 250e-6, 10e-3).unwrap() - 4.875).abs() < 1e-12);
        assert!(throughput(1.0, 11e-3, 10e-3).is_err());
    }

    #[test]
    fn reward_examples() {
        assert_eq!(reward(2.0, 1.0, 100.0), 2.0);
        assert_eq!(reward(0.5, 1.0, 100.0), -99.5);
        assert_eq!(reward(1.0, 1.0, 100.0), -99.0);
    }

    #[test]
    fn reset_starts_at_bs_one() {
        let mut e = env(steady(5, 5.0, 20.0));
        let s = e.reset(3);
        assert_eq!((s.slot, s.serving), (1, 1));
        assert_eq!(s.snr_db, 5.0);
        assert_eq!(e.reset(3), s);
    }

    #[test]
    fn above_threshold_keeps_association_for_free() {
        let mut e = env(steady(3, 10.0, 20.0));
        e.reset(0);
        let out = e.step(Action::Handover(2)).unwrap();
        assert_eq!(out.tau_b, 0.0);
        assert_eq!(out.serving, 1);
        assert!(!out.decision && !out.handover_executed && !out.state.tracking);
        assert!((out.rate - (1.0 + 10f64).log2()).abs() < 1e-12);
    }

    #[test]
    fn handover_pays_a_third_of_the_slot() {
        let mut e = env(steady(3, -5.0, 20.0));
        e.reset(0);
        let out = e.step(Action::Handover(2)).unwrap();
        assert!(out.handover_executed);
        assert_eq!(out.serving, 2);
        assert!((out.tau_b - 10e-3 / 3.0).abs() < 1e-15);
        assert!((out.throughput - 2.0 / 3.0 * rate(20.0)).abs() < 1e-12);
    }

    #[test]
    fn retraining_same_bs_is_not_a_handover() {
        let mut e = env(steady(3, -5.0, 20.0));
        e.reset(0);
        let out = e.step(Action::Handover(1)).unwrap();
        assert!(!out.handover_executed);
        assert!((out.tau_b - 10e-3 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn tracking_follows_a_moving_aod() {
        // BS 1's AoD moves 5° per slot; the stale beam loses 15 dB
        let links = ScriptedLinks::new(
            (0..4).map(|i| vec![ScriptedLink::new(12.0, dir(5.0 * i as f64)), ScriptedLink::new(0.0, dir(0.0))]).collect(),
            3.0,
            grid(),
        );
        let mut e = env(links);
        e.reset(0);
        let o1 = e.step(Action::Track).unwrap();
        assert!(!o1.decision);
        assert_eq!(o1.state.snr_db, -3.0);
        let o2 = e.step(Action::Track).unwrap();
        assert!(o2.decision && o2.state.tracking);
        // sorted order: (0,0), (-5,0), (0,-5), (0,5), (5,0) → cnt 5
        assert_eq!(o2.cnt, 5);
        assert!((o2.tau_b - 50e-6).abs() < 1e-15);
        assert_eq!(o2.snr_db, 12.0);
        assert!(!o2.reactive_fallback);
    }

    #[test]
    fn failed_tracking_with_low_throughput_falls_back() {
        let mut e = env(steady(3, -5.0, 20.0));
        e.reset(0);
        let out = e.step(Action::Track).unwrap();
        assert!(out.reactive_fallback && out.handover_executed);
        assert_eq!(out.cnt, 25);
        assert_eq!(out.serving, 2);
        assert!((out.tau_b - (250e-6 + 10e-3 / 3.0)).abs() < 1e-15);
        assert_eq!(out.snr_db, 20.0);
    }

    #[test]
    fn failed_tracking_with_enough_throughput_stays() {
        // 1.5 dB misses the SNR threshold but log2(1 + 1.41) · 0.975 > 1
        let mut e = env(steady(3, 1.5, 20.0));
        e.reset(0);
        let out = e.step(Action::Track).unwrap();
        assert!(!out.reactive_fallback);
        assert_eq!(out.serving, 1);
        assert!(out.throughput > 1.0);
    }

    #[test]
    fn episode_ends_after_m_slots() {
        let mut e = env(steady(2, 10.0, 0.0));
        e.reset(0);
        assert!(!e.step(Action::Track).unwrap().done);
        assert!(e.step(Action::Track).unwrap().done);
        assert_eq!(e.step(Action::Track), Err(EnvError::EpisodeFinished));
    }

    #[test]
    fn invalid_action() {
        let mut e = env(steady(2, 10.0, 0.0));
        e.reset(0);
        assert!(matches!(e.step(Action::Handover(3)), Err(EnvError::InvalidAction { .. })));
        assert!(Action::from_index(3, 2).is_err());
    }

    #[test]
    fn single_slot_episode() {
        let mut e = env(steady(1, 10.0, 0.0));
        let t = run_episode(&mut e, &mut AlwaysTrack, 0).unwrap();
        assert_eq!(t.rows.len(), 1);
    }

    #[test]
    fn always_track_single_bs_has_no_handovers() {
        let links = ScriptedLinks::new(
            (0..20).map(|i| vec![ScriptedLink::new(if i % 3 == 0 { 1.0 } else { 8.0 }, dir(5.0 * (i % 4) as f64))]).collect(),
            3.0,
            grid(),
        );
        let mut e = env(links);
        let t = run_episode(&mut e, &mut AlwaysTrack, 0).unwrap();
        assert_eq!(t.rows.len(), 20);
        assert_eq!(t.handovers(), 0);
        assert_eq!(t.rows.iter().filter(|r| r.serving_bs != 1).count(), 0);
    }

    #[test]
    fn tracked_slot_dominates_handover_with_same_snr() {
        let tr = throughput(5.0, 10e-6, 10e-3).unwrap();
        let ho = throughput(5.0, 10e-3 / 3.0, 10e-3).unwrap();
        assert!(tr >= ho);
    }

    proptest! {
        #[test]
        fn reward_identity_holds_over_episodes(seed in 0u64..1000, peaks in proptest::collection::vec(-10.0..15.0f64, 20)) {
            let links = ScriptedLinks::new(
                (0..10).map(|i| vec![
                    ScriptedLink::new(peaks[2 * i], dir(5.0 * (i % 3) as f64)),
                    ScriptedLink::new(peaks[2 * i + 1], dir(-5.0 * (i % 2) as f64)),
                ]).collect(),
                3.0,
                grid(),
            );
            let mut e = env(links);
            let mut s = e.reset(seed);
            let mut k = seed;
            let mut entry_serving = s.serving;
            loop {
                k = k.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let a = Action::from_index((k >> 33) as usize % 3, 2).unwrap();
                let entry_snr = s.snr_db;
                let out = e.step(a).unwrap();
                prop_assert_eq!(out.reward, reward(out.throughput, 1.0, 100.0));
                prop_assert!(out.throughput >= 0.0);
                if entry_snr >= 2.0 {
                    prop_assert_eq!(out.tau_b, 0.0);
                    prop_assert_eq!(out.serving, entry_serving);
                }
                if out.done { break; }
                s = out.state;
                entry_serving = s.serving;
            }
        }
    }
}
