//! Comparison policies.
//!
//! Baseline 1 keeps the nearest other BS as a ready backup and switches to it
//! whenever the serving link misses the SNR threshold; it never tracks.
//! Baseline 2 learns handover targets with the same deep Q-learning machinery
//! but is rewarded by the link rate, so it is blind to training overhead.

use thiserror::Error;

use crate::agent::{train, ActionSpace, AgentError, Environment, Feedback, TrainConfig, TrainOutcome};
use crate::env::{run_episode, Action, EnvError, EpisodeTrace, HandoverEnv, LinkModel, Policy, SiteView, State};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("baseline 1 needs at least two BSs, scenario has {0}")]
    SingleBs(usize),
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// Switch to the nearest other BS (2-D distance from the UE's previous
/// position) on every threshold violation.
#[derive(Debug, Clone, Copy)]
pub struct MultiConnectivity {
    _private: (),
}

impl MultiConnectivity {
    pub fn new(num_bs: usize) -> Result<Self, BaselineError> {
        if num_bs < 2 {
            return Err(BaselineError::SingleBs(num_bs));
        }
        Ok(Self { _private: () })
    }

    /// Backup of `serving` (1-based) as seen from `slot` (1-based).
    pub fn backup(state: &State, sites: &dyn SiteView) -> usize {
        let ue = sites.ue_position(state.slot.saturating_sub(2));
        let mut best = (0, f64::INFINITY);
        for bs in 0..sites.num_bs() {
            if bs + 1 == state.serving {
                continue;
            }
            let p = sites.bs_position(bs);
            let d = (p[0] - ue[0]).hypot(p[1] - ue[1]);
            if d < best.1 {
                best = (bs + 1, d);
            }
        }
        best.0
    }
}

impl Policy for MultiConnectivity {
    fn act(&mut self, state: &State, sites: &dyn SiteView) -> Action {
        Action::Handover(Self::backup(state, sites))
    }
}

pub fn baseline_multiconnectivity<L: LinkModel>(
    env: &mut HandoverEnv<L>,
    realization: u64,
) -> Result<EpisodeTrace, BaselineError> {
    let mut p = MultiConnectivity::new(env.num_bs())?;
    Ok(run_episode(env, &mut p, realization)?)
}

/// Handover-only view of the environment with the link rate as reward.
pub struct RateRewardEnv<'a, L> {
    inner: &'a mut HandoverEnv<L>,
}

impl<'a, L: LinkModel> RateRewardEnv<'a, L> {
    pub fn new(inner: &'a mut HandoverEnv<L>) -> Self {
        Self { inner }
    }
}

impl<L: LinkModel> Environment for RateRewardEnv<'_, L> {
    fn num_actions(&self) -> usize {
        self.inner.num_bs()
    }

    fn num_bs(&self) -> usize {
        self.inner.num_bs()
    }

    fn num_slots(&self) -> usize {
        self.inner.num_slots()
    }

    fn reset(&mut self, realization: u64) -> State {
        self.inner.reset(realization)
    }

    fn step(&mut self, action: usize) -> Result<Feedback, EnvError> {
        let out = self.inner.step(Action::Handover(action + 1))?;
        Ok(Feedback { next: out.state, reward: out.rate, done: out.done })
    }
}

pub fn train_learned_handover<L: LinkModel>(
    env: &mut HandoverEnv<L>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, AgentError> {
    train(&mut RateRewardEnv::new(env), cfg, ActionSpace::HandoverOnly)
}
