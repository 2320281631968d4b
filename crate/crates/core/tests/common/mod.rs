#![allow(dead_code)]

use std::sync::Arc;

use hrlgym::agents::policy::{NetConfig, Policy, PolicySpec, Structure};
use hrlgym::state_encoder::{Observation, VISION_DIM};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const EMBED: usize = 4;
pub const NUMERIC: usize = 6;
pub const TASKS: usize = 3;

pub fn tiny_spec(structure: Structure, value_head: bool) -> PolicySpec {
    PolicySpec {
        structure,
        net: NetConfig {
            vision_hidden: 6,
            task_id_dim: 3,
            description_hidden: 4,
            numeric_hidden: 5,
            trunk: vec![7, 6],
        },
        embed_dim: EMBED,
        numeric_len: NUMERIC,
        num_tasks: TASKS,
        value_head,
    }
}

pub fn tiny_policy(structure: Structure, value_head: bool, seed: u64) -> Policy {
    Policy::new(tiny_spec(structure, value_head), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

pub fn random_obs<R: Rng>(rng: &mut R) -> Observation {
    Observation {
        vision: Arc::from((0..VISION_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>()),
        task_vec: Arc::from((0..EMBED).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>()),
        numeric: (0..NUMERIC).map(|_| rng.gen_range(0.0..4.0)).collect(),
        task_id: rng.gen_range(0..TASKS as u32),
    }
}

/// Relative error `|a - n| / (|a| + |n|)` between the analytic gradient and
/// central differences (h = 1e-5), over a sample of parameters: the `k`
/// largest analytic entries plus `k` uniformly drawn ones.
pub fn gradient_rel_error(
    policy: &Policy,
    loss: &dyn Fn(&Policy, Option<&mut Policy>) -> f64,
    k: usize,
    seed: u64,
) -> f64 {
    let h = 1e-5;
    let mut grads = policy.zeros_like();
    loss(policy, Some(&mut grads));
    let analytic = grads.to_flat();
    let base = policy.to_flat();
    let mut idx: Vec<usize> = (0..analytic.len()).collect();
    idx.sort_by(|&a, &b| analytic[b].abs().total_cmp(&analytic[a].abs()));
    let mut picked: Vec<usize> = idx[..k.min(idx.len())].to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..k {
        picked.push(rng.gen_range(0..analytic.len()));
    }
    let mut probe = policy.clone();
    let (mut diff, mut na, mut nn) = (0.0, 0.0, 0.0);
    for &i in &picked {
        let mut p = base.clone();
        p[i] += h;
        probe.load_flat(&p).unwrap();
        let up = loss(&probe, None);
        p[i] -= 2.0 * h;
        probe.load_flat(&p).unwrap();
        let down = loss(&probe, None);
        let numeric = (up - down) / (2.0 * h);
        diff += (analytic[i] - numeric).powi(2);
        na += analytic[i].powi(2);
        nn += numeric.powi(2);
    }
    let denom = na.sqrt() + nn.sqrt();
    if denom == 0.0 {
        0.0
    } else {
        diff.sqrt() / denom
    }
}
