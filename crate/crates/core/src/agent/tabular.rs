use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{select_action, AgentError, EpsilonSchedule, Environment};
use crate::env::State;
use crate::rng::{substream, Stream};

/// Discretised state: SNR rounded to a multiple of the bucket width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StateKey {
    pub slot: usize,
    pub serving: usize,
    pub snr_bucket: i64,
    pub tracking: bool,
}

impl StateKey {
    pub fn new(s: &State, bucket_db: f64) -> Self {
        Self {
            slot: s.slot,
            serving: s.serving,
            snr_bucket: (s.snr_db / bucket_db).round() as i64,
            tracking: s.tracking,
        }
    }
}

/// Action values per discretised state; unseen states read as zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    pub bucket_db: f64,
    pub num_actions: usize,
    pub entries: BTreeMap<StateKey, Vec<f64>>,
}

impl QTable {
    pub fn new(num_actions: usize, bucket_db: f64) -> Self {
        Self { bucket_db, num_actions, entries: BTreeMap::new() }
    }

    pub fn key(&self, s: &State) -> StateKey {
        StateKey::new(s, self.bucket_db)
    }

    pub fn values(&self, s: &State) -> Vec<f64> {
        self.entries.get(&self.key(s)).cloned().unwrap_or_else(|| vec![0.0; self.num_actions])
    }

    fn values_mut(&mut self, s: &State) -> &mut Vec<f64> {
        let n = self.num_actions;
        self.entries.entry(self.key(s)).or_insert_with(|| vec![0.0; n])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabularConfig {
    pub episodes: usize,
    pub discount: f64,
    /// Step size; 1 is exact on deterministic environments.
    pub alpha: f64,
    pub epsilon: EpsilonSchedule,
    pub bucket_db: f64,
    pub seed: u64,
}

impl Default for TabularConfig {
    fn default() -> Self {
        Self {
            episodes: 5000,
            discount: 0.99,
            alpha: 0.1,
            epsilon: EpsilonSchedule::default(),
            bucket_db: 1.0,
            seed: 0,
        }
    }
}

/// Standard one-step Q-learning; episode `e` runs realization `e`.
pub fn tabular_q_learning<E: Environment>(env: &mut E, cfg: &TabularConfig) -> Result<QTable, AgentError> {
    if !(0.0..=1.0).contains(&cfg.discount) || !(cfg.alpha > 0.0 && cfg.alpha <= 1.0) || !(cfg.bucket_db > 0.0) {
        return Err(AgentError::Config("discount in [0,1], alpha in (0,1], bucket width > 0".into()));
    }
    cfg.epsilon.validate()?;
    let mut q = QTable::new(env.num_actions(), cfg.bucket_db);
    let mut rng = substream(cfg.seed, Stream::Exploration, &[1]);
    for e in 0..cfg.episodes {
        let eps = cfg.epsilon.value(e, cfg.episodes);
        let mut s = env.reset(e as u64);
        loop {
            let a = select_action(&q.values(&s), eps, &mut rng);
            let fb = env.step(a)?;
            let future = if fb.done {
                0.0
            } else {
                q.values(&fb.next).iter().copied().fold(f64::NEG_INFINITY, f64::max)
            };
            let target = fb.reward + cfg.discount * future;
            let v = &mut q.values_mut(&s)[a];
            *v += cfg.alpha * (target - *v);
            if fb.done {
                break;
            }
            s = fb.next;
        }
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::Feedback;
    use crate::env::EnvError;

    /// Three states in a row. Action 0 pays 1 and moves on; action 1 pays 2
    /// in the last state and 0 elsewhere. The episode ends after state 3.
    struct Chain {
        at: usize,
    }

    impl Environment for Chain {
        fn num_actions(&self) -> usize {
            2
        }
        fn num_bs(&self) -> usize {
            1
        }
        fn num_slots(&self) -> usize {
            3
        }
        fn reset(&mut self, _: u64) -> State {
            self.at = 1;
            st(1)
        }
        fn step(&mut self, a: usize) -> Result<Feedback, EnvError> {
            let reward = match (a, self.at) {
                (0, _) => 1.0,
                (_, 3) => 2.0,
                _ => 0.0,
            };
            let done = self.at == 3;
            if !done {
                self.at += 1;
            }
            Ok(Feedback { next: st(self.at), reward, done })
        }
    }

    fn st(slot: usize) -> State {
        State { slot, serving: 1, snr_db: 0.0, tracking: false }
    }

    fn cfg(discount: f64) -> TabularConfig {
        TabularConfig {
            episodes: 500,
            discount,
            alpha: 1.0,
            epsilon: EpsilonSchedule { start: 1.0, end: 1.0, decay_fraction: 0.5 },
            bucket_db: 1.0,
            seed: 4,
        }
    }

    #[test]
    fn chain_matches_closed_form() {
        let q = tabular_q_learning(&mut Chain { at: 1 }, &cfg(0.9)).unwrap();
        // V3 = 2, Q2 = (1 + 0.9·2, 0.9·2), V2 = 2.8, Q1 = (1 + 0.9·2.8, 0.9·2.8)
        let expect = [(1, [3.52, 2.52]), (2, [2.8, 1.8]), (3, [1.0, 2.0])];
        for (slot, v) in expect {
            let got = q.values(&st(slot));
            assert!((got[0] - v[0]).abs() < 1e-6 && (got[1] - v[1]).abs() < 1e-6, "{slot}: {got:?}");
        }
    }

    #[test]
    fn zero_discount_learns_immediate_reward() {
        let q = tabular_q_learning(&mut Chain { at: 1 }, &cfg(0.0)).unwrap();
        assert_eq!(q.values(&st(1)), vec![1.0, 0.0]);
        assert_eq!(q.values(&st(3)), vec![1.0, 2.0]);
    }

    #[test]
    fn bucketing() {
        let a = State { slot: 1, serving: 1, snr_db: 2.4, tracking: false };
        let b = State { snr_db: 1.6, ..a };
        assert_eq!(StateKey::new(&a, 1.0), StateKey::new(&b, 1.0));
        assert_ne!(StateKey::new(&a, 0.5), StateKey::new(&b, 0.5));
    }
}
