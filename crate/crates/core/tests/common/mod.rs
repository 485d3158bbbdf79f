//! Exhaustive value iteration over small scripted environments, and the toy
//! instances used to check the learners against it.

#![allow(dead_code)]

use std::collections::BTreeMap;

use beamtrack::channel::Direction;
use beamtrack::env::{Action, EnvConfig, HandoverEnv, ScriptedLink, ScriptedLinks, State, StepOutcome};

/// Exact state identity: SNR compared bit for bit.
pub type Key = (usize, usize, u64, bool);

pub fn key(s: &State) -> Key {
    (s.slot, s.serving, s.snr_db.to_bits(), s.tracking)
}

/// Optimal action values of every state reachable from the reset state.
pub struct Oracle {
    pub q: BTreeMap<Key, Vec<f64>>,
    pub states: BTreeMap<Key, State>,
    /// Whether the action mattered in that state.
    pub decision: BTreeMap<Key, bool>,
    beams: BTreeMap<Key, (u64, u64)>,
    pub start: State,
}

impl Oracle {
    pub fn value(&self, s: &State) -> f64 {
        self.q[&key(s)].iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Indices whose value is within `tol` of the best.
    pub fn optimal(&self, s: &State, tol: f64) -> Vec<usize> {
        let q = &self.q[&key(s)];
        let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (0..q.len()).filter(|&a| q[a] >= best - tol).collect()
    }

    pub fn decision_states(&self) -> impl Iterator<Item = &State> {
        self.states.iter().filter(|(k, _)| self.decision[*k]).map(|(_, s)| s)
    }
}

/// Backward induction by depth-first enumeration. `actions[i]` is what index
/// `i` means, `reward` extracts the learner's reward from a step.
pub fn solve(
    env: &HandoverEnv<ScriptedLinks>,
    actions: &[Action],
    reward: fn(&StepOutcome) -> f64,
    discount: f64,
) -> Oracle {
    let mut root = env.clone();
    let start = root.reset(0);
    let mut o = Oracle {
        q: BTreeMap::new(),
        states: BTreeMap::new(),
        decision: BTreeMap::new(),
        beams: BTreeMap::new(),
        start,
    };
    visit(&root, actions, reward, discount, &mut o);
    o
}

fn visit(
    env: &HandoverEnv<ScriptedLinks>,
    actions: &[Action],
    reward: fn(&StepOutcome) -> f64,
    discount: f64,
    o: &mut Oracle,
) -> f64 {
    let s = env.state();
    let k = key(&s);
    let beam = (env.beam().azimuth.to_bits(), env.beam().elevation.to_bits());
    if let Some(q) = o.q.get(&k) {
        // the observation must pin down the hidden beam for the MDP to be Markov
        assert_eq!(o.beams[&k], beam, "state {s:?} reached with two different beams");
        return q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    }
    let mut q = Vec::with_capacity(actions.len());
    let mut decision = false;
    for &a in actions {
        let mut next = env.clone();
        let out = next.step(a).expect("valid action");
        decision = out.decision;
        let future = if out.done { 0.0 } else { visit(&next, actions, reward, discount, o) };
        q.push(reward(&out) + discount * future);
    }
    let v = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    o.q.insert(k, q);
    o.states.insert(k, s);
    o.decision.insert(k, decision);
    o.beams.insert(k, beam);
    v
}

pub fn full_actions(num_bs: usize) -> Vec<Action> {
    std::iter::once(Action::Track).chain((1..=num_bs).map(Action::Handover)).collect()
}

pub fn handover_actions(num_bs: usize) -> Vec<Action> {
    (1..=num_bs).map(Action::Handover).collect()
}

pub fn env_reward(o: &StepOutcome) -> f64 {
    o.reward
}

pub fn rate_reward(o: &StepOutcome) -> f64 {
    o.rate
}

fn az(a: f64) -> Direction {
    Direction::new(a, 0.0)
}

fn grid() -> Vec<Direction> {
    (-12..=12).map(|k| az(5.0 * k as f64)).collect()
}

/// Two BSs over ten slots. BS 1's departure angle drifts (tracking
/// recovers it cheaply), then BS 1 fades while BS 2 comes up strong.
pub fn toy_links() -> ScriptedLinks {
    let bs1 = [(12.0, 0.0), (12.0, 0.0), (12.0, 5.0), (12.0, 10.0), (12.0, 10.0), (12.0, 10.0), (1.0, 30.0), (1.0, 30.0), (1.0, 30.0), (1.0, 30.0)];
    let bs2 = [-10.0, -10.0, -10.0, -10.0, 25.0, 25.0, 25.0, 25.0, 25.0, 25.0];
    let links = bs1
        .iter()
        .zip(bs2)
        .map(|(&(p1, a1), p2)| vec![ScriptedLink::new(p1, az(a1)), ScriptedLink::new(p2, az(0.0))])
        .collect();
    ScriptedLinks::new(links, 3.0, grid())
}

pub fn toy_env() -> HandoverEnv<ScriptedLinks> {
    HandoverEnv::new(toy_links(), EnvConfig::default()).expect("valid toy")
}

/// Two slots, two BSs: BS 1's beam is stale in slot 2 and tracking fails;
/// handing over to BS 2 directly is cheaper than the reactive fallback.
pub fn two_slot_env() -> HandoverEnv<ScriptedLinks> {
    let links = vec![
        vec![ScriptedLink::new(10.0, az(0.0)), ScriptedLink::new(5.0, az(0.0))],
        vec![ScriptedLink::new(10.0, az(40.0)), ScriptedLink::new(20.0, az(0.0))],
    ];
    HandoverEnv::new(ScriptedLinks::new(links, 3.0, grid()), EnvConfig::default()).expect("valid toy")
}
