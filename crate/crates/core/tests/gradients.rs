mod common;

use common::*;
use hrlgym::action_space::Action;
use hrlgym::agents::losses::{a2c_loss, dqn_loss, ppo_loss, PgCoefs, PgSample};
use hrlgym::agents::policy::Structure;
use hrlgym::agents::{random_action, Transition};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STRUCTURES: [Structure; 3] = [Structure::Hierarchical, Structure::Flat, Structure::MultiStepMouse];

fn mouse_heavy_actions(rng: &mut ChaCha8Rng, n: usize) -> Vec<Action> {
    (0..n).map(|_| random_action(rng)).collect()
}

#[test]
fn dqn_td_gradient() {
    for structure in STRUCTURES {
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let policy = tiny_policy(structure, false, seed);
            let batch: Vec<Transition> = mouse_heavy_actions(&mut rng, 5)
                .into_iter()
                .map(|action| Transition {
                    obs: random_obs(&mut rng),
                    action,
                    reward: rng.gen_range(-3.0..3.0),
                    next_obs: random_obs(&mut rng),
                    done: rng.gen_bool(0.3),
                })
                .collect();
            let refs: Vec<&Transition> = batch.iter().collect();
            let targets: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let loss = |p: &hrlgym::agents::Policy, g: Option<&mut hrlgym::agents::Policy>| {
                dqn_loss(p, &refs, &targets, g).unwrap()
            };
            let err = gradient_rel_error(&policy, &loss, 40, seed);
            assert!(err < 1e-4, "{structure:?} seed {seed}: {err}");
        }
    }
}

fn pg_samples(rng: &mut ChaCha8Rng, n: usize) -> Vec<PgSample> {
    mouse_heavy_actions(rng, n)
        .into_iter()
        .map(|action| PgSample {
            obs: random_obs(rng),
            action,
            old_log_prob: rng.gen_range(-8.0..-2.0),
            advantage: rng.gen_range(-2.0..2.0),
            ret: rng.gen_range(-2.0..2.0),
        })
        .collect()
}

#[test]
fn ppo_and_a2c_gradients() {
    let coefs = PgCoefs { value: 0.5, entropy: 0.01 };
    for structure in STRUCTURES {
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let policy = tiny_policy(structure, true, seed);
            let mut samples = pg_samples(&mut rng, 6);
            // anchor old log-probs near the current ones so both clip branches occur
            let obs: Vec<_> = samples.iter().map(|s| &s.obs).collect();
            let actions: Vec<Action> = samples.iter().map(|s| s.action).collect();
            let lp = hrlgym::agents::losses::log_probs(&policy, &obs, &actions).unwrap();
            for (s, l) in samples.iter_mut().zip(lp) {
                s.old_log_prob = l + rng.gen_range(-0.4..0.4);
            }
            let ppo = |p: &hrlgym::agents::Policy, g: Option<&mut hrlgym::agents::Policy>| {
                ppo_loss(p, &samples, 0.2, coefs, g).unwrap()
            };
            let err = gradient_rel_error(&policy, &ppo, 40, seed);
            assert!(err < 1e-4, "ppo {structure:?} seed {seed}: {err}");
            let a2c = |p: &hrlgym::agents::Policy, g: Option<&mut hrlgym::agents::Policy>| {
                a2c_loss(p, &samples, coefs, g).unwrap()
            };
            let err = gradient_rel_error(&policy, &a2c, 40, seed);
            assert!(err < 1e-4, "a2c {structure:?} seed {seed}: {err}");
        }
    }
}
