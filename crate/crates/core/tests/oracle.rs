//! Learners against exhaustive value iteration on small scripted instances.

mod common;

use beamtrack::agent::{tabular_q_learning, train, ActionSpace, EpsilonSchedule, TabularConfig, TrainConfig};
use beamtrack::baselines::train_learned_handover;
use beamtrack::env::Action;
use common::*;

fn dqn_config(episodes: usize) -> TrainConfig {
    TrainConfig { episodes, batch_size: 32, target_sync: 100, seed: 3, ..Default::default() }
}

#[test]
fn oracle_on_two_slot_toy() {
    let env = two_slot_env();
    let o = solve(&env, &full_actions(2), env_reward, 0.99);
    let decisions: Vec<_> = o.decision_states().collect();
    assert_eq!(decisions.len(), 1);
    // handing over directly beats tracking into a fallback
    assert_eq!(o.optimal(decisions[0], 1e-9), vec![2]);
}

#[test]
fn dqn_matches_oracle_on_two_slot_toy() {
    let mut env = two_slot_env();
    let o = solve(&env, &full_actions(2), env_reward, 0.99);
    let out = train(&mut env, &dqn_config(300), ActionSpace::TrackOrHandover).unwrap();
    for s in o.decision_states() {
        assert_eq!(out.policy.greedy(s), Action::Handover(2), "{s:?}");
    }
}

#[test]
fn learned_handover_matches_rate_oracle() {
    let mut env = two_slot_env();
    let o = solve(&env, &handover_actions(2), rate_reward, 0.99);
    let out = train_learned_handover(&mut env, &dqn_config(300)).unwrap();
    for s in o.decision_states() {
        let a = match out.policy.greedy(s) {
            Action::Handover(j) => j - 1,
            Action::Track => panic!("handover-only policy tracked"),
        };
        assert!(o.optimal(s, 1e-9).contains(&a), "{s:?}");
    }
}

#[test]
fn identical_seeds_give_identical_learning_curves() {
    let cfg = dqn_config(40);
    let a = train(&mut toy_env(), &cfg, ActionSpace::TrackOrHandover).unwrap();
    let b = train(&mut toy_env(), &cfg, ActionSpace::TrackOrHandover).unwrap();
    assert_eq!(a.curve, b.curve);
    assert_eq!(a.policy, b.policy);
    let a2 = train_learned_handover(&mut toy_env(), &cfg).unwrap();
    let b2 = train_learned_handover(&mut toy_env(), &cfg).unwrap();
    assert_eq!(a2.policy, b2.policy);
}

#[test]
fn zero_episodes_returns_untrained_policy() {
    let out = train(&mut toy_env(), &dqn_config(0), ActionSpace::TrackOrHandover).unwrap();
    assert!(out.curve.is_empty());
}

#[test]
fn tabular_greedy_policy_is_optimal_on_toy() {
    let mut env = toy_env();
    let o = solve(&env, &full_actions(2), env_reward, 0.99);
    let cfg = TabularConfig {
        episodes: 4000,
        discount: 0.99,
        alpha: 1.0,
        epsilon: EpsilonSchedule { start: 1.0, end: 1.0, decay_fraction: 1.0 },
        bucket_db: 1e-6,
        seed: 1,
    };
    let q = tabular_q_learning(&mut env, &cfg).unwrap();
    for s in o.decision_states() {
        let a = beamtrack::agent::greedy_index(&q.values(s));
        assert!(o.optimal(s, 1e-9).contains(&a), "{s:?}");
    }
}
