//! Learning agents: deep Q-learning over the association MDP and a tabular
//! Q-learning mode for small, fully enumerable instances.

mod dqn;
mod network;
mod policy;
mod replay;
mod tabular;

pub use dqn::{mse_loss_and_grad, td_targets, td_update, train, CurvePoint, EpsilonSchedule, TrainConfig, TrainOutcome};
pub use network::{Adam, Mlp};
pub use policy::{
    greedy_index, select_action, ActionSpace, Checkpoint, QFunction, QPolicy, StateEncoder, CHECKPOINT_VERSION,
};
pub use replay::{ReplayBuffer, Transition};
pub use tabular::{tabular_q_learning, QTable, StateKey, TabularConfig};

use thiserror::Error;

use crate::env::{Action, EnvError, HandoverEnv, LinkModel, State};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("training diverged at episode {episode}: {detail}")]
    Diverged { episode: usize, detail: String },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("checkpoint mismatch: {0}")]
    Mismatch(String),
}

/// What an environment returns after one action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feedback {
    pub next: State,
    pub reward: f64,
    pub done: bool,
}

/// Episodic environment with integer actions, as seen by a learner.
pub trait Environment {
    fn num_actions(&self) -> usize;
    fn num_bs(&self) -> usize;
    fn num_slots(&self) -> usize;
    fn reset(&mut self, realization: u64) -> State;
    fn step(&mut self, action: usize) -> Result<Feedback, EnvError>;
}

impl<L: LinkModel> Environment for HandoverEnv<L> {
    fn num_actions(&self) -> usize {
        HandoverEnv::num_bs(self) + 1
    }

    fn num_bs(&self) -> usize {
        HandoverEnv::num_bs(self)
    }

    fn num_slots(&self) -> usize {
        HandoverEnv::num_slots(self)
    }

    fn reset(&mut self, realization: u64) -> State {
        HandoverEnv::reset(self, realization)
    }

    fn step(&mut self, action: usize) -> Result<Feedback, EnvError> {
        let a = Action::from_index(action, HandoverEnv::num_bs(self))?;
        let out = HandoverEnv::step(self, a)?;
        Ok(Feedback { next: out.state, reward: out.reward, done: out.done })
    }
}
