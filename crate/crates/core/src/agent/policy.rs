use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AgentError, Mlp, QTable};
use crate::env::{Action, Policy, SiteView, State};

/// Feature map `[ℓ/M, one-hot(j_S), clamp((SNR − min)/(max − min)), I]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateEncoder {
    pub num_bs: usize,
    pub num_slots: usize,
    pub snr_min_db: f64,
    pub snr_max_db: f64,
}

impl StateEncoder {
    pub fn new(num_bs: usize, num_slots: usize) -> Self {
        Self { num_bs, num_slots, snr_min_db: -20.0, snr_max_db: 60.0 }
    }

    pub fn dim(&self) -> usize {
        self.num_bs + 3
    }

    pub fn encode_into(&self, s: &State, out: &mut Vec<f64>) {
        out.push(s.slot as f64 / self.num_slots as f64);
        out.extend((1..=self.num_bs).map(|j| if j == s.serving { 1.0 } else { 0.0 }));
        out.push(((s.snr_db - self.snr_min_db) / (self.snr_max_db - self.snr_min_db)).clamp(0.0, 1.0));
        out.push(if s.tracking { 1.0 } else { 0.0 });
    }

    pub fn encode(&self, s: &State) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        self.encode_into(s, &mut v);
        v
    }
}

/// How network output indices map to environment actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActionSpace {
    /// `0` tracks, `j` hands over to BS `j`.
    TrackOrHandover,
    /// Index `a` hands over to BS `a + 1`.
    HandoverOnly,
}

impl ActionSpace {
    pub fn size(self, num_bs: usize) -> usize {
        match self {
            ActionSpace::TrackOrHandover => num_bs + 1,
            ActionSpace::HandoverOnly => num_bs,
        }
    }

    pub fn action(self, index: usize) -> Action {
        match (self, index) {
            (ActionSpace::TrackOrHandover, 0) => Action::Track,
            (ActionSpace::TrackOrHandover, j) => Action::Handover(j),
            (ActionSpace::HandoverOnly, a) => Action::Handover(a + 1),
        }
    }
}

/// Lowest-index argmax.
pub fn greedy_index(q: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in q.iter().enumerate().skip(1) {
        if *v > q[best] {
            best = i;
        }
    }
    best
}

/// ε-greedy: with probability ε a uniform action, else the greedy one.
pub fn select_action<R: Rng + ?Sized>(q: &[f64], epsilon: f64, rng: &mut R) -> usize {
    debug_assert!((0.0..=1.0).contains(&epsilon));
    if rng.random::<f64>() < epsilon {
        rng.random_range(0..q.len())
    } else {
        greedy_index(q)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QFunction {
    Network(Mlp),
    Table(QTable),
}

/// Greedy policy over learned action values.
#[derive(Debug, Clone, PartialEq)]
pub struct QPolicy {
    pub q: QFunction,
    pub encoder: StateEncoder,
    pub actions: ActionSpace,
}

impl QPolicy {
    pub fn values(&self, s: &State) -> Vec<f64> {
        match &self.q {
            QFunction::Network(net) => net.forward(&self.encoder.encode(s)),
            QFunction::Table(t) => t.values(s),
        }
    }

    pub fn greedy(&self, s: &State) -> Action {
        self.actions.action(greedy_index(&self.values(s)))
    }

    pub fn num_bs(&self) -> usize {
        self.encoder.num_bs
    }
}

impl Policy for QPolicy {
    fn act(&mut self, state: &State, _: &dyn SiteView) -> Action {
        self.greedy(state)
    }
}

pub const CHECKPOINT_VERSION: u32 = 1;

/// JSON weight dump of a network policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub actions: ActionSpace,
    pub encoder: StateEncoder,
    pub layer_sizes: Vec<usize>,
    /// Per layer: row-major weights (`out × in`) then biases.
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn from_policy(p: &QPolicy) -> Result<Self, AgentError> {
        match &p.q {
            QFunction::Network(net) => Ok(Self {
                version: CHECKPOINT_VERSION,
                actions: p.actions,
                encoder: p.encoder,
                layer_sizes: net.sizes().to_vec(),
                params: net.params().to_vec(),
            }),
            QFunction::Table(_) => Err(AgentError::Mismatch("tabular policies are not checkpointed".into())),
        }
    }

    pub fn into_policy(self) -> Result<QPolicy, AgentError> {
        if self.version != CHECKPOINT_VERSION {
            return Err(AgentError::Mismatch(format!("unsupported checkpoint version {}", self.version)));
        }
        let inputs = self.layer_sizes.first().copied().unwrap_or(0);
        let outputs = self.layer_sizes.last().copied().unwrap_or(0);
        if inputs != self.encoder.dim() || outputs != self.actions.size(self.encoder.num_bs) {
            return Err(AgentError::Mismatch(format!(
                "layer sizes {:?} do not fit {} BSs",
                self.layer_sizes, self.encoder.num_bs
            )));
        }
        let net = Mlp::from_params(self.layer_sizes, self.params)
            .ok_or_else(|| AgentError::Mismatch("parameter count does not match layer sizes".into()))?;
        if !net.is_finite() {
            return Err(AgentError::Mismatch("non-finite weights".into()));
        }
        Ok(QPolicy { q: QFunction::Network(net), encoder: self.encoder, actions: self.actions })
    }
}
