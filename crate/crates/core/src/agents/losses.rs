//! Losses and their analytic gradients.
//!
//! Each loss takes an optional gradient accumulator. Targets, advantages and
//! returns are inputs, so the loss is a plain function of the parameters and
//! can be checked against finite differences.

use ndarray::Array2;

use super::net::{log_softmax, softmax};
use super::policy::{Encoded, HeadEval, HeadKind, Policy};
use super::replay::Transition;
use crate::action_space::Action;
use crate::error::Result;
use crate::state_encoder::Observation;

/// Greedy bootstrap targets `r + gamma (1 - done) Q_target(s', a*)`, where
/// `a*` is picked by argmax of the manager head followed by argmax of the
/// matching content head(s) and `Q` sums the chosen head outputs.
pub fn dqn_targets(target: &Policy, batch: &[&Transition], gamma: f64) -> Result<Vec<f64>> {
    let next: Vec<&Observation> = batch.iter().map(|t| &t.next_obs).collect();
    let enc = target.encode(&next)?;
    let mut pick = |_: usize, _: HeadKind, v: &[f64]| super::net::argmax(v);
    let walks = target.walk(&enc, &mut pick);
    Ok(batch
        .iter()
        .zip(walks)
        .map(|(t, w)| {
            if t.done {
                t.reward
            } else {
                t.reward + gamma * w.score
            }
        })
        .collect())
}

/// `Q(s, a)` for each row: the sum of the head outputs at the decisions
/// composing `a`.
pub fn q_values(policy: &Policy, obs: &[&Observation], actions: &[Action]) -> Result<Vec<f64>> {
    let enc = policy.encode(obs)?;
    let evals = policy.evaluate(&enc, actions);
    Ok(sum_selected(&evals, obs.len()))
}

fn sum_selected(evals: &[HeadEval], n: usize) -> Vec<f64> {
    let mut q = vec![0.0; n];
    for e in evals {
        let out = e.pass.output();
        for (j, &r) in e.pass.rows.iter().enumerate() {
            q[r] += out[[j, e.indices[j]]];
        }
    }
    q
}

fn backprop(policy: &Policy, enc: &Encoded, parts: Vec<(&super::policy::HeadPass, Array2<f64>)>, grads: &mut Policy) {
    let mut d_features = Array2::<f64>::zeros(enc.features.dim());
    for (pass, d_out) in parts {
        policy.head_backward(pass, d_out, grads, &mut d_features);
    }
    policy.encode_backward(enc, &d_features, grads);
}

/// Mean squared TD error against fixed `targets`.
pub fn dqn_loss(
    policy: &Policy,
    batch: &[&Transition],
    targets: &[f64],
    grads: Option<&mut Policy>,
) -> Result<f64> {
    let n = batch.len();
    let obs: Vec<&Observation> = batch.iter().map(|t| &t.obs).collect();
    let actions: Vec<Action> = batch.iter().map(|t| t.action).collect();
    let enc = policy.encode(&obs)?;
    let evals = policy.evaluate(&enc, &actions);
    let q = sum_selected(&evals, n);
    let delta: Vec<f64> = q.iter().zip(targets).map(|(q, y)| q - y).collect();
    let loss = delta.iter().map(|d| d * d).sum::<f64>() / n as f64;
    if let Some(grads) = grads {
        let parts = evals
            .iter()
            .map(|e| {
                let mut d = Array2::<f64>::zeros(e.pass.output().dim());
                for (j, &r) in e.pass.rows.iter().enumerate() {
                    d[[j, e.indices[j]]] = 2.0 * delta[r] / n as f64;
                }
                (&e.pass, d)
            })
            .collect();
        backprop(policy, &enc, parts, grads);
    }
    Ok(loss)
}

/// One on-policy sample with its precomputed advantage and return.
#[derive(Clone, Debug)]
pub struct PgSample {
    pub obs: Observation,
    pub action: Action,
    /// Log-probability under the policy that collected the sample.
    pub old_log_prob: f64,
    pub advantage: f64,
    pub ret: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PgCoefs {
    pub value: f64,
    pub entropy: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Surrogate {
    Clipped(f64),
    Plain,
}

/// Per-row log-probability, entropy and value, plus what the backward pass needs.
struct PgForward {
    enc: Encoded,
    evals: Vec<HeadEval>,
    probs: Vec<Array2<f64>>,
    value: Option<super::policy::HeadPass>,
    log_prob: Vec<f64>,
    entropy: Vec<f64>,
}

fn pg_forward(policy: &Policy, samples: &[PgSample]) -> Result<PgForward> {
    let n = samples.len();
    let obs: Vec<&Observation> = samples.iter().map(|s| &s.obs).collect();
    let actions: Vec<Action> = samples.iter().map(|s| s.action).collect();
    let enc = policy.encode(&obs)?;
    let evals = policy.evaluate(&enc, &actions);
    let mut log_prob = vec![0.0; n];
    let mut entropy = vec![0.0; n];
    let mut probs = Vec::with_capacity(evals.len());
    for e in &evals {
        let out = e.pass.output();
        let mut p = Array2::<f64>::zeros(out.dim());
        for (j, &r) in e.pass.rows.iter().enumerate() {
            let logits = out.row(j).to_vec();
            log_prob[r] += log_softmax(&logits)[e.indices[j]];
            let row = softmax(&logits);
            entropy[r] -= row.iter().filter(|x| **x > 0.0).map(|x| x * x.ln()).sum::<f64>();
            p.row_mut(j).assign(&ndarray::Array1::from(row));
        }
        probs.push(p);
    }
    let value = policy.has_value_head().then(|| policy.value_forward(&enc));
    Ok(PgForward {
        enc,
        evals,
        probs,
        value,
        log_prob,
        entropy,
    })
}

fn pg_loss(
    policy: &Policy,
    samples: &[PgSample],
    surrogate: Surrogate,
    coefs: PgCoefs,
    grads: Option<&mut Policy>,
) -> Result<f64> {
    let n = samples.len() as f64;
    let f = pg_forward(policy, samples)?;
    let mut loss = 0.0;
    let mut d_log_prob = vec![0.0; samples.len()];
    let mut d_value = Array2::<f64>::zeros((samples.len(), 1));
    for (i, s) in samples.iter().enumerate() {
        let a = s.advantage;
        let policy_term = match surrogate {
            Surrogate::Plain => {
                d_log_prob[i] = -a / n;
                -f.log_prob[i] * a
            }
            Surrogate::Clipped(eps) => {
                let ratio = (f.log_prob[i] - s.old_log_prob).exp();
                let unclipped = ratio * a;
                let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * a;
                if unclipped <= clipped {
                    d_log_prob[i] = -ratio * a / n;
                    -unclipped
                } else {
                    -clipped
                }
            }
        };
        let value_term = match &f.value {
            Some(pass) => {
                let v = pass.output()[[i, 0]];
                d_value[[i, 0]] = 2.0 * coefs.value * (v - s.ret) / n;
                coefs.value * (v - s.ret).powi(2)
            }
            None => 0.0,
        };
        loss += policy_term + value_term - coefs.entropy * f.entropy[i];
    }
    loss /= n;
    if let Some(grads) = grads {
        let mut parts = Vec::with_capacity(f.evals.len() + 1);
        for (e, p) in f.evals.iter().zip(&f.probs) {
            let mut d = Array2::<f64>::zeros(p.dim());
            for (j, &r) in e.pass.rows.iter().enumerate() {
                let row = p.row(j);
                let h: f64 = -row.iter().filter(|x| **x > 0.0).map(|x| x * x.ln()).sum::<f64>();
                for (k, &pk) in row.iter().enumerate() {
                    let onehot = if k == e.indices[j] { 1.0 } else { 0.0 };
                    let d_logp = d_log_prob[r] * (onehot - pk);
                    let d_ent = if pk > 0.0 { -pk * (pk.ln() + h) } else { 0.0 };
                    d[[j, k]] = d_logp - coefs.entropy / n * d_ent;
                }
            }
            parts.push((&e.pass, d));
        }
        if let Some(pass) = &f.value {
            parts.push((pass, d_value));
        }
        backprop(policy, &f.enc, parts, grads);
    }
    Ok(loss)
}

/// `-mean(min(rho A, clip(rho, 1-eps, 1+eps) A)) + c_v mean((V-R)^2) - c_e mean(H)`.
pub fn ppo_loss(
    policy: &Policy,
    samples: &[PgSample],
    clip: f64,
    coefs: PgCoefs,
    grads: Option<&mut Policy>,
) -> Result<f64> {
    pg_loss(policy, samples, Surrogate::Clipped(clip), coefs, grads)
}

/// `mean(-log pi(a|s) A) + c_v mean((V-R)^2) - c_e mean(H)`.
pub fn a2c_loss(
    policy: &Policy,
    samples: &[PgSample],
    coefs: PgCoefs,
    grads: Option<&mut Policy>,
) -> Result<f64> {
    pg_loss(policy, samples, Surrogate::Plain, coefs, grads)
}

/// Sum of decision log-probabilities of each action.
pub fn log_probs(policy: &Policy, obs: &[&Observation], actions: &[Action]) -> Result<Vec<f64>> {
    let samples: Vec<PgSample> = obs
        .iter()
        .zip(actions)
        .map(|(o, a)| PgSample {
            obs: (*o).clone(),
            action: *a,
            old_log_prob: 0.0,
            advantage: 0.0,
            ret: 0.0,
        })
        .collect();
    Ok(pg_forward(policy, &samples)?.log_prob)
}

pub fn values(policy: &Policy, obs: &[&Observation]) -> Result<Vec<f64>> {
    let enc = policy.encode(obs)?;
    Ok(policy.value_forward(&enc).output().column(0).to_vec())
}

/// Discounted returns over a segment, bootstrapping from `bootstrap` after the
/// last step. A `done` step cuts the sum.
pub fn n_step_returns(rewards: &[f64], dones: &[bool], bootstrap: f64, gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = bootstrap;
    for t in (0..rewards.len()).rev() {
        if dones[t] {
            acc = 0.0;
        }
        acc = rewards[t] + gamma * acc;
        out[t] = acc;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn n_step_matches_hand_sums() {
        let r = [1.0, -2.0, 0.5, 3.0, 4.0];
        let g: f64 = 0.9;
        let v = 10.0;
        let got = n_step_returns(&r, &[false; 5], v, g);
        let want0 = 1.0 - 2.0 * g + 0.5 * g.powi(2) + 3.0 * g.powi(3) + 4.0 * g.powi(4) + v * g.powi(5);
        assert!((got[0] - want0).abs() < 1e-12);
        assert!((got[4] - (4.0 + g * v)).abs() < 1e-12);
        let cut = n_step_returns(&r, &[false, false, true, false, false], v, g);
        assert!((cut[2] - 0.5).abs() < 1e-12);
        assert!((cut[0] - (1.0 - 2.0 * g + 0.5 * g * g)).abs() < 1e-12);
        assert_eq!(n_step_returns(&[2.5], &[false], 7.0, 0.0), vec![2.5]);
    }
}
