use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ActMode, Agent};
use crate::curriculum::TaskSampler;
use crate::environment::{oracle_rollout, EnvConfig, GuiEnv};
use crate::error::Result;
use crate::metrics::{score_episode, EpisodeRecord};
use crate::task_suite::TaskSuite;

/// Oracle episode reward for every task, indexed by task id.
pub fn oracle_totals(suite: &TaskSuite, cfg: &EnvConfig) -> Result<Vec<f64>> {
    suite
        .tasks()
        .iter()
        .map(|t| oracle_rollout(t, cfg).map(|o| o.total_reward))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub records: Vec<EpisodeRecord>,
}

impl TrainOutcome {
    /// Mean normalized reward over records `range`.
    pub fn mean_norm_reward(&self, range: std::ops::Range<usize>) -> f64 {
        let slice = &self.records[range];
        slice.iter().map(|r| r.norm_reward).sum::<f64>() / slice.len().max(1) as f64
    }
}

/// Runs `episodes` training episodes, continuing from the agent's episode
/// counter. `on_episode` sees every record as it is produced.
pub fn train(
    suite: &TaskSuite,
    env: &mut GuiEnv,
    sampler: &mut TaskSampler,
    agent: &mut Agent,
    episodes: usize,
    seed: u64,
    on_episode: &mut dyn FnMut(&EpisodeRecord, &Agent) -> Result<()>,
) -> Result<TrainOutcome> {
    let oracle = oracle_totals(suite, env.config())?;
    let start = agent.episodes();
    let mut task_rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ start);
    let mut records = Vec::with_capacity(episodes);
    for k in 0..episodes as u64 {
        let index = start + k;
        let task = sampler.sample(index as usize, suite, &mut task_rng);
        let mut obs = env.reset(task);
        loop {
            let act = agent.act(&obs, ActMode::Explore)?;
            let out = env.step(act.action)?;
            let next = out.observation.clone();
            agent.observe(obs, act, out.reward, out.observation, out.done)?;
            obs = next;
            if out.done {
                break;
            }
        }
        agent.end_episode();
        let mut rec = score_episode(env.trace(), task, oracle[task.id() as usize], env.config())?;
        rec.episode_index = index;
        sampler.record_outcome(task.id(), rec.success);
        on_episode(&rec, agent)?;
        records.push(rec);
    }
    Ok(TrainOutcome { records })
}

/// One greedy rollout per task, in task order.
pub fn evaluate_policy(suite: &TaskSuite, env: &mut GuiEnv, agent: &mut Agent) -> Result<Vec<EpisodeRecord>> {
    let oracle = oracle_totals(suite, env.config())?;
    let mut out = Vec::with_capacity(suite.len());
    for (i, task) in suite.tasks().iter().enumerate() {
        let mut obs = env.reset(task);
        loop {
            let act = agent.act(&obs, ActMode::Greedy)?;
            let step = env.step(act.action)?;
            obs = step.observation;
            if step.done {
                break;
            }
        }
        let mut rec = score_episode(env.trace(), task, oracle[i], env.config())?;
        rec.episode_index = i as u64;
        out.push(rec);
    }
    Ok(out)
}
