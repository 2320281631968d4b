//! Trainable agents: DQN, PPO and A2C over hierarchical or flat policies.

pub mod adam;
pub mod checkpoint;
pub mod losses;
pub mod net;
pub mod policy;
pub mod replay;
pub mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use adam::Adam;
pub use losses::{a2c_loss, dqn_loss, dqn_targets, n_step_returns, ppo_loss, PgCoefs, PgSample};
pub use policy::{decisions, HeadKind, NetConfig, Policy, PolicySpec, Structure};
pub use replay::{ReplayBuffer, Transition};
pub use train::{evaluate_policy, oracle_totals, train, TrainOutcome};

use crate::action_space::{Action, NUM_ACTIONS};
use crate::error::{Error, Result};
use crate::state_encoder::Observation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Dqn,
    Ppo,
    A2c,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Dqn => "dqn",
            Algorithm::Ppo => "ppo",
            Algorithm::A2c => "a2c",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "dqn" => Ok(Algorithm::Dqn),
            "ppo" => Ok(Algorithm::Ppo),
            "a2c" => Ok(Algorithm::A2c),
            other => Err(Error::Config(format!("unknown agent.algorithm {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentConfig {
    pub algorithm: Algorithm,
    pub structure: Structure,
    pub net: NetConfig,
    pub gamma: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay: f64,
    /// Episodes between target-network syncs.
    pub target_update_interval: u64,
    pub replay_capacity: usize,
    /// Environment steps between DQN updates.
    pub train_every: u64,
    pub ppo_clip: f64,
    pub ppo_epochs: usize,
    pub rollout_length: usize,
    pub n_step: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Dqn,
            structure: Structure::Hierarchical,
            net: NetConfig::default(),
            gamma: 0.99,
            learning_rate: 3e-4,
            batch_size: 64,
            epsilon_start: 1.0,
            epsilon_end: 0.007,
            epsilon_decay: 8000.0,
            target_update_interval: 50,
            replay_capacity: 50_000,
            train_every: 1,
            ppo_clip: 0.2,
            ppo_epochs: 4,
            rollout_length: 256,
            n_step: 5,
            value_coef: 0.5,
            entropy_coef: 0.01,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return fail(format!("agent.gamma must be in (0, 1], got {}", self.gamma));
        }
        if !(self.epsilon_end >= 0.0 && self.epsilon_end <= self.epsilon_start && self.epsilon_start <= 1.0) {
            return fail("need 0 <= agent.epsilon_end <= agent.epsilon_start <= 1".into());
        }
        if !(self.epsilon_decay > 0.0) {
            return fail("agent.epsilon_decay must be > 0".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("agent.learning_rate must be > 0".into());
        }
        if !(self.ppo_clip > 0.0 && self.ppo_clip < 1.0) {
            return fail("agent.ppo_clip must be in (0, 1)".into());
        }
        if self.value_coef < 0.0 || self.entropy_coef < 0.0 {
            return fail("loss coefficients must be >= 0".into());
        }
        let counts = [
            ("batch_size", self.batch_size as u64),
            ("target_update_interval", self.target_update_interval),
            ("replay_capacity", self.replay_capacity as u64),
            ("train_every", self.train_every),
            ("ppo_epochs", self.ppo_epochs as u64),
            ("rollout_length", self.rollout_length as u64),
            ("n_step", self.n_step as u64),
        ];
        for (name, v) in counts {
            if v == 0 {
                return fail(format!("agent.{name} must be >= 1"));
            }
        }
        self.net.validate()
    }

    pub fn coefs(&self) -> PgCoefs {
        PgCoefs {
            value: self.value_coef,
            entropy: self.entropy_coef,
        }
    }
}

/// `end + (start - end) exp(-step / decay)`.
pub fn epsilon(step: u64, cfg: &AgentConfig) -> f64 {
    cfg.epsilon_end + (cfg.epsilon_start - cfg.epsilon_end) * (-(step as f64) / cfg.epsilon_decay).exp()
}

/// Uniform over all 822 actions.
pub fn random_action<R: Rng + ?Sized>(rng: &mut R) -> Action {
    Action::unflatten(rng.gen_range(0..NUM_ACTIONS)).expect("index in range")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActMode {
    /// Epsilon-greedy for DQN, sampling for actor-critic.
    Explore,
    Greedy,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Act {
    pub action: Action,
    pub log_prob: f64,
}

#[derive(Clone, Debug)]
struct RolloutStep {
    obs: Observation,
    action: Action,
    reward: f64,
    next_obs: Observation,
    done: bool,
    log_prob: f64,
}

/// Policy, optimiser and experience storage for one training loop.
pub struct Agent {
    cfg: AgentConfig,
    policy: Policy,
    target: Option<Policy>,
    adam: Adam,
    replay: ReplayBuffer,
    rollout: Vec<RolloutStep>,
    rng: ChaCha8Rng,
    grads: Option<Policy>,
    env_steps: u64,
    episodes: u64,
    updates: u64,
    last_loss: Option<f64>,
}

impl Agent {
    pub fn new(cfg: AgentConfig, embed_dim: usize, numeric_len: usize, num_tasks: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let spec = PolicySpec {
            structure: cfg.structure,
            net: cfg.net.clone(),
            embed_dim,
            numeric_len,
            num_tasks,
            value_head: cfg.algorithm != Algorithm::Dqn,
        };
        let mut init = ChaCha8Rng::seed_from_u64(seed);
        let policy = Policy::new(spec, &mut init)?;
        Ok(Self::with_policy(cfg, policy, seed))
    }

    pub fn with_policy(cfg: AgentConfig, policy: Policy, seed: u64) -> Self {
        let target = (cfg.algorithm == Algorithm::Dqn).then(|| policy.clone());
        Self {
            adam: Adam::new(cfg.learning_rate),
            replay: ReplayBuffer::new(if cfg.algorithm == Algorithm::Dqn { cfg.replay_capacity } else { 1 }),
            rollout: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_a9e7),
            grads: None,
            env_steps: 0,
            episodes: 0,
            updates: 0,
            last_loss: None,
            cfg,
            policy,
            target,
        }
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn target(&self) -> Option<&Policy> {
        self.target.as_ref()
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn last_loss(&self) -> Option<f64> {
        self.last_loss
    }

    /// Restores progress counters after loading a checkpoint.
    pub fn set_counters(&mut self, episodes: u64, env_steps: u64) {
        self.episodes = episodes;
        self.env_steps = env_steps;
    }

    pub fn current_epsilon(&self) -> f64 {
        epsilon(self.env_steps, &self.cfg)
    }

    pub fn act(&mut self, obs: &Observation, mode: ActMode) -> Result<Act> {
        if mode == ActMode::Greedy {
            let w = self.policy.greedy(obs)?;
            return Ok(Act { action: w.action, log_prob: w.log_prob });
        }
        match self.cfg.algorithm {
            Algorithm::Dqn => {
                if self.rng.gen::<f64>() < self.current_epsilon() {
                    self.policy.check_observation(obs)?;
                    Ok(Act { action: random_action(&mut self.rng), log_prob: 0.0 })
                } else {
                    let w = self.policy.greedy(obs)?;
                    Ok(Act { action: w.action, log_prob: w.log_prob })
                }
            }
            Algorithm::Ppo | Algorithm::A2c => {
                let enc = self.policy.encode(&[obs])?;
                let rng = &mut self.rng;
                let mut sample = |_: usize, _: HeadKind, v: &[f64]| {
                    let p = net::softmax(v);
                    let mut x = rng.gen::<f64>();
                    for (i, pi) in p.iter().enumerate() {
                        x -= pi;
                        if x < 0.0 {
                            return i;
                        }
                    }
                    p.len() - 1
                };
                let w = self.policy.walk(&enc, &mut sample).remove(0);
                Ok(Act { action: w.action, log_prob: w.log_prob })
            }
        }
    }

    /// Stores one transition and runs any update that is due. Returns the
    /// loss when an update ran.
    pub fn observe(&mut self, obs: Observation, act: Act, reward: f64, next_obs: Observation, done: bool) -> Result<Option<f64>> {
        self.env_steps += 1;
        let loss = match self.cfg.algorithm {
            Algorithm::Dqn => {
                self.replay.push(Transition { obs, action: act.action, reward, next_obs, done });
                if self.replay.len() >= self.cfg.batch_size && self.env_steps % self.cfg.train_every == 0 {
                    Some(self.dqn_step()?)
                } else {
                    None
                }
            }
            Algorithm::Ppo => {
                self.rollout.push(RolloutStep { obs, action: act.action, reward, next_obs, done, log_prob: act.log_prob });
                if self.rollout.len() >= self.cfg.rollout_length {
                    Some(self.ppo_step()?)
                } else {
                    None
                }
            }
            Algorithm::A2c => {
                self.rollout.push(RolloutStep { obs, action: act.action, reward, next_obs, done, log_prob: act.log_prob });
                if done || self.rollout.len() >= self.cfg.n_step {
                    Some(self.a2c_step()?)
                } else {
                    None
                }
            }
        };
        if loss.is_some() {
            self.updates += 1;
            self.last_loss = loss;
        }
        Ok(loss)
    }

    /// Counts a finished episode and syncs the target network when due.
    pub fn end_episode(&mut self) {
        self.episodes += 1;
        if self.episodes % self.cfg.target_update_interval == 0 {
            self.sync_target();
        }
    }

    pub fn sync_target(&mut self) {
        if let Some(t) = &mut self.target {
            t.clone_from(&self.policy);
        }
    }

    fn take_grads(&mut self) -> Policy {
        match self.grads.take() {
            Some(mut g) => {
                g.fill_zero();
                g
            }
            None => self.policy.zeros_like(),
        }
    }

    fn apply(&mut self, grads: Policy) {
        self.adam.step(&mut self.policy, &grads);
        self.grads = Some(grads);
    }

    fn dqn_step(&mut self) -> Result<f64> {
        let mut grads = self.take_grads();
        let batch = self.replay.sample(self.cfg.batch_size, &mut self.rng);
        let target = self.target.as_ref().expect("dqn keeps a target network");
        let loss = dqn_targets(target, &batch, self.cfg.gamma)
            .and_then(|y| dqn_loss(&self.policy, &batch, &y, Some(&mut grads)));
        self.apply(grads);
        loss
    }

    /// Advantages `r + gamma V(s') (1 - done) - V(s)` under the current
    /// critic, with returns `A + V(s)`.
    fn td_samples(&self, steps: &[RolloutStep]) -> Result<Vec<PgSample>> {
        let obs: Vec<&Observation> = steps.iter().map(|s| &s.obs).collect();
        let next: Vec<&Observation> = steps.iter().map(|s| &s.next_obs).collect();
        let v = losses::values(&self.policy, &obs)?;
        let v_next = losses::values(&self.policy, &next)?;
        Ok(steps
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let ret = s.reward + if s.done { 0.0 } else { self.cfg.gamma * v_next[i] };
                PgSample {
                    obs: s.obs.clone(),
                    action: s.action,
                    old_log_prob: s.log_prob,
                    advantage: ret - v[i],
                    ret,
                }
            })
            .collect())
    }

    fn ppo_step(&mut self) -> Result<f64> {
        let steps = std::mem::take(&mut self.rollout);
        let samples = self.td_samples(&steps)?;
        let mut order: Vec<usize> = (0..samples.len()).collect();
        let mut total = 0.0;
        let mut count = 0;
        for _ in 0..self.cfg.ppo_epochs {
            rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut self.rng);
            for chunk in order.chunks(self.cfg.batch_size) {
                let batch: Vec<PgSample> = chunk.iter().map(|&i| samples[i].clone()).collect();
                let mut grads = self.take_grads();
                let loss = ppo_loss(&self.policy, &batch, self.cfg.ppo_clip, self.cfg.coefs(), Some(&mut grads));
                self.apply(grads);
                total += loss?;
                count += 1;
            }
        }
        Ok(total / count as f64)
    }

    fn a2c_step(&mut self) -> Result<f64> {
        let steps = std::mem::take(&mut self.rollout);
        let obs: Vec<&Observation> = steps.iter().map(|s| &s.obs).collect();
        let v = losses::values(&self.policy, &obs)?;
        let last = steps.last().expect("rollout non-empty");
        let bootstrap = if last.done {
            0.0
        } else {
            losses::values(&self.policy, &[&last.next_obs])?[0]
        };
        let rewards: Vec<f64> = steps.iter().map(|s| s.reward).collect();
        let dones: Vec<bool> = steps.iter().map(|s| s.done).collect();
        let returns = n_step_returns(&rewards, &dones, bootstrap, self.cfg.gamma);
        let samples: Vec<PgSample> = steps
            .iter()
            .enumerate()
            .map(|(i, s)| PgSample {
                obs: s.obs.clone(),
                action: s.action,
                old_log_prob: s.log_prob,
                advantage: returns[i] - v[i],
                ret: returns[i],
            })
            .collect();
        let mut grads = self.take_grads();
        let loss = a2c_loss(&self.policy, &samples, self.cfg.coefs(), Some(&mut grads));
        self.apply(grads);
        loss
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_schedule() {
        let cfg = AgentConfig::default();
        assert_eq!(epsilon(0, &cfg), 1.0);
        assert!((epsilon(8000, &cfg) - (0.007 + 0.993 * (-1.0f64).exp())).abs() < 1e-15);
        assert!((epsilon(8000, &cfg) - 0.3723).abs() < 1e-4);
        assert!((epsilon(10_000_000, &cfg) - 0.007).abs() < 1e-12);
        let mut prev = 2.0;
        for s in (0..50_000).step_by(997) {
            let e = epsilon(s, &cfg);
            assert!(e < prev);
            prev = e;
        }
    }

    #[test]
    fn config_validation() {
        assert!(AgentConfig::default().validate().is_ok());
        let bad = [
            AgentConfig { gamma: 0.0, ..Default::default() },
            AgentConfig { gamma: 1.5, ..Default::default() },
            AgentConfig { epsilon_end: 0.5, epsilon_start: 0.1, ..Default::default() },
            AgentConfig { batch_size: 0, ..Default::default() },
        ];
        for b in bad {
            assert!(b.validate().is_err());
        }
    }

    #[test]
    fn names_round_trip() {
        for a in [Algorithm::Dqn, Algorithm::Ppo, Algorithm::A2c] {
            assert_eq!(Algorithm::from_name(a.as_str()).unwrap(), a);
        }
        for s in [Structure::Hierarchical, Structure::Flat, Structure::MultiStepMouse] {
            assert_eq!(Structure::from_name(s.as_str()).unwrap(), s);
        }
    }
}
