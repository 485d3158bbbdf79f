use serde::{Deserialize, Serialize};

use super::{
    select_action, ActionSpace, Adam, AgentError, Environment, Mlp, QFunction, QPolicy, ReplayBuffer, StateEncoder,
    Transition,
};
use crate::rng::{substream, Stream};

/// Exponential decay from `start` to `end`, reached after `decay_fraction`
/// of the episodes and held afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_fraction: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self { start: 1.0, end: 0.05, decay_fraction: 0.5 }
    }
}

impl EpsilonSchedule {
    pub fn validate(&self) -> Result<(), AgentError> {
        let unit = 0.0..=1.0;
        if unit.contains(&self.start) && unit.contains(&self.end) && self.decay_fraction > 0.0 {
            Ok(())
        } else {
            Err(AgentError::Config("ε must lie in [0,1] with a positive decay fraction".into()))
        }
    }

    pub fn value(&self, episode: usize, episodes: usize) -> f64 {
        let horizon = self.decay_fraction * episodes as f64;
        let progress = if horizon > 0.0 { (episode as f64 / horizon).min(1.0) } else { 1.0 };
        if self.start == self.end || self.end == 0.0 || self.start == 0.0 {
            return self.start + (self.end - self.start) * progress;
        }
        self.start * (self.end / self.start).powf(progress)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// η.
    #[serde(default = "default_discount")]
    pub discount: f64,
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    #[serde(default)]
    pub epsilon: EpsilonSchedule,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_capacity")]
    pub replay_capacity: usize,
    /// Environment steps between target network copies.
    #[serde(default = "default_sync")]
    pub target_sync: usize,
    /// Environment steps between gradient updates.
    #[serde(default = "default_train_every")]
    pub train_every: usize,
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    /// Rewards are multiplied by this before learning; the greedy policy is
    /// unaffected, the value targets stay in a range MSE copes with.
    #[serde(default = "default_reward_scale")]
    pub reward_scale: f64,
    #[serde(default)]
    pub seed: u64,
    /// Episode `e` runs realization `realization_offset + e`.
    #[serde(default)]
    pub realization_offset: u64,
}

fn default_discount() -> f64 {
    0.99
}
fn default_episodes() -> usize {
    10_000
}
fn default_lr() -> f64 {
    1e-3
}
fn default_batch() -> usize {
    64
}
fn default_capacity() -> usize {
    50_000
}
fn default_sync() -> usize {
    500
}
fn default_train_every() -> usize {
    1
}
fn default_hidden() -> Vec<usize> {
    vec![64, 64]
}
fn default_reward_scale() -> f64 {
    0.01
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            discount: default_discount(),
            episodes: default_episodes(),
            epsilon: EpsilonSchedule::default(),
            learning_rate: default_lr(),
            batch_size: default_batch(),
            replay_capacity: default_capacity(),
            target_sync: default_sync(),
            train_every: default_train_every(),
            hidden: default_hidden(),
            reward_scale: default_reward_scale(),
            seed: 0,
            realization_offset: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        self.epsilon.validate()?;
        let bad = |m: &str| Err(AgentError::Config(m.into()));
        if !(0.0..=1.0).contains(&self.discount) {
            return bad("discount must lie in [0,1]");
        }
        if !(self.learning_rate > 0.0 && self.reward_scale > 0.0) {
            return bad("learning rate and reward scale must be positive");
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return bad("batch size must be positive and fit the replay buffer");
        }
        if self.target_sync == 0 || self.train_every == 0 || self.hidden.contains(&0) {
            return bad("sync period, update period and hidden widths must be positive");
        }
        Ok(())
    }
}

/// `y = r + η max_a′ Q_target(s′, a′)`, or `y = r` at a terminal step.
pub fn td_targets(batch: &[&Transition], target: &Mlp, discount: f64) -> Vec<f64> {
    let n = batch.len();
    let next: Vec<f64> = batch.iter().flat_map(|t| t.next.iter().copied()).collect();
    let q = target.forward_batch(&next, n).pop().expect("output layer");
    let k = target.outputs();
    batch
        .iter()
        .enumerate()
        .map(|(i, t)| {
            if t.terminal {
                t.reward
            } else {
                let best = q[i * k..(i + 1) * k].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                t.reward + discount * best
            }
        })
        .collect()
}

/// Mean squared error between `Q(s_i, a_i)` and `y_i` over a row-major batch
/// of inputs, with its gradient with respect to the network parameters.
pub fn mse_loss_and_grad(net: &Mlp, states: &[f64], actions: &[usize], targets: &[f64]) -> (f64, Vec<f64>) {
    let n = actions.len();
    let acts = net.forward_batch(states, n);
    let q = acts.last().expect("output layer");
    let k = net.outputs();
    let mut d_out = vec![0.0; n * k];
    let mut loss = 0.0;
    for i in 0..n {
        let err = q[i * k + actions[i]] - targets[i];
        loss += err * err;
        d_out[i * k + actions[i]] = 2.0 * err / n as f64;
    }
    (loss / n as f64, net.backward(&acts, &d_out, n))
}

/// One Adam step on the mean squared TD error of the taken actions.
/// Returns the loss before the step.
pub fn td_update(
    batch: &[&Transition],
    online: &mut Mlp,
    target: &Mlp,
    opt: &mut Adam,
    discount: f64,
) -> Result<f64, AgentError> {
    if batch.is_empty() {
        return Err(AgentError::Config("empty batch".into()));
    }
    let y = td_targets(batch, target, discount);
    let x: Vec<f64> = batch.iter().flat_map(|t| t.state.iter().copied()).collect();
    let a: Vec<usize> = batch.iter().map(|t| t.action).collect();
    let (loss, grad) = mse_loss_and_grad(online, &x, &a, &y);
    if !loss.is_finite() {
        return Err(AgentError::Diverged { episode: 0, detail: format!("non-finite TD loss {loss}") });
    }
    opt.step(online.params_mut(), &grad);
    Ok(loss)
}

/// One row of the learning curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub episode: usize,
    /// Undiscounted episode return in reward units.
    #[serde(rename = "return")]
    pub episode_return: f64,
    pub epsilon: f64,
    /// Mean TD loss over the episode's updates (empty before learning starts).
    pub loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub policy: QPolicy,
    pub curve: Vec<CurvePoint>,
}

/// Deep Q-learning with experience replay and a periodically synced target
/// network. Deterministic given `cfg.seed` and the environment.
pub fn train<E: Environment>(env: &mut E, cfg: &TrainConfig, actions: ActionSpace) -> Result<TrainOutcome, AgentError> {
    cfg.validate()?;
    let num_bs = env.num_bs();
    let k = env.num_actions();
    if k != actions.size(num_bs) {
        return Err(AgentError::Config(format!("environment exposes {k} actions, policy expects {}", actions.size(num_bs))));
    }
    let encoder = StateEncoder::new(num_bs, env.num_slots());
    let mut sizes = vec![encoder.dim()];
    sizes.extend(&cfg.hidden);
    sizes.push(k);
    let mut online = Mlp::new(&sizes, &mut substream(cfg.seed, Stream::Init, &[0]));
    let mut target = online.clone();
    let mut opt = Adam::new(online.params().len(), cfg.learning_rate);
    let mut replay = ReplayBuffer::new(cfg.replay_capacity);
    let mut explore = substream(cfg.seed, Stream::Exploration, &[0]);
    let mut sampler = substream(cfg.seed, Stream::Replay, &[0]);
    let mut curve = Vec::with_capacity(cfg.episodes);
    let mut steps = 0usize;

    for e in 0..cfg.episodes {
        let eps = cfg.epsilon.value(e, cfg.episodes);
        let mut x = encoder.encode(&env.reset(cfg.realization_offset + e as u64));
        let (mut ret, mut loss_sum, mut updates) = (0.0, 0.0, 0usize);
        loop {
            let a = select_action(&online.forward(&x), eps, &mut explore);
            let fb = env.step(a)?;
            let x2 = encoder.encode(&fb.next);
            ret += fb.reward;
            replay.push(Transition {
                state: std::mem::replace(&mut x, x2.clone()),
                action: a,
                reward: cfg.reward_scale * fb.reward,
                next: x2,
                terminal: fb.done,
            });
            steps += 1;
            if steps % cfg.train_every == 0 && replay.len() >= cfg.batch_size {
                let batch = replay.sample(cfg.batch_size, &mut sampler);
                let loss = td_update(&batch, &mut online, &target, &mut opt, cfg.discount).map_err(|err| match err {
                    AgentError::Diverged { detail, .. } => AgentError::Diverged { episode: e, detail },
                    other => other,
                })?;
                loss_sum += loss;
                updates += 1;
            }
            if steps % cfg.target_sync == 0 {
                target.clone_from(&online);
            }
            if fb.done {
                break;
            }
        }
        if !ret.is_finite() || !online.is_finite() {
            return Err(AgentError::Diverged { episode: e, detail: format!("return {ret}, weights finite: {}", online.is_finite()) });
        }
        curve.push(CurvePoint {
            episode: e,
            episode_return: ret,
            epsilon: eps,
            loss: (updates > 0).then(|| loss_sum / updates as f64),
        });
    }
    Ok(TrainOutcome { policy: QPolicy { q: QFunction::Network(online), encoder, actions }, curve })
}
