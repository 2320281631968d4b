//! Run configuration: `key = value` lines with dotted namespaces.
//!
//! Every key has a default. Files and flags only override; unknown or
//! repeated keys are errors. [`RunConfig::to_text`] lists every key so a
//! dumped file reproduces the run on its own.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::agents::{AgentConfig, Algorithm, Structure};
use crate::curriculum::{CurriculumConfig, SamplingMode};
use crate::environment::EnvConfig;
use crate::error::{Error, Result};
use crate::reward_engine::{RewardConfig, RewardPreset};
use crate::state_encoder::EncoderConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteSource {
    /// Read the suite from here instead of generating it.
    pub path: Option<PathBuf>,
    pub simple: usize,
    pub hard: usize,
}

impl Default for SuiteSource {
    fn default() -> Self {
        Self { path: None, simple: 90, hard: 45 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub suite: SuiteSource,
    pub env: EnvConfig,
    pub embed_dim: usize,
    pub state_size: usize,
    pub curriculum_alpha: Option<f64>,
    pub curriculum_mode: SamplingMode,
    pub failure_bias: bool,
    pub agent: AgentConfig,
    pub seed: u64,
    pub episodes: usize,
    /// Episodes between greedy evaluation passes; 0 disables them.
    pub eval_interval: usize,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let enc = EncoderConfig::default();
        let cur = CurriculumConfig::default();
        Self {
            suite: SuiteSource::default(),
            env: EnvConfig::default(),
            embed_dim: enc.embed_dim,
            state_size: enc.state_size,
            curriculum_alpha: cur.alpha,
            curriculum_mode: cur.mode,
            failure_bias: cur.failure_bias,
            agent: AgentConfig::default(),
            seed: 0,
            episodes: cur.total_episodes,
            eval_interval: 1000,
            out_dir: PathBuf::from("runs"),
        }
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

fn float(key: &str, v: &str) -> Result<f64> {
    let x: f64 = num(key, v)?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Config(format!("{key}: value must be finite")))
    }
}

/// Penalties may be written with their sign, as they appear in reward tables.
fn magnitude(key: &str, v: &str) -> Result<f64> {
    float(key, v).map(f64::abs)
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got {v:?}"))),
    }
}

fn widths(key: &str, v: &str) -> Result<Vec<usize>> {
    v.split(',').map(|p| num(key, p.trim())).collect()
}

impl RunConfig {
    /// Applies one `key = value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let r = &mut self.env.reward;
        let a = &mut self.agent;
        match key {
            "suite.path" => self.suite.path = (!v.is_empty()).then(|| PathBuf::from(v)),
            "suite.simple" => self.suite.simple = num(key, v)?,
            "suite.hard" => self.suite.hard = num(key, v)?,

            "reward.preset" => *r = RewardConfig::preset(RewardPreset::from_name(v)?),
            "reward.alpha" => r.alpha = float(key, v)?,
            "reward.manager_correct_reward" => r.manager_correct_reward = float(key, v)?,
            "reward.manager_streak_bonus" => r.manager_streak_bonus = float(key, v)?,
            "reward.subpolicy_correct_reward" => r.subpolicy_correct_reward = float(key, v)?,
            "reward.subpolicy_streak_bonus" => r.subpolicy_streak_bonus = float(key, v)?,
            "reward.mouse_region_reward" => r.mouse_region_reward = float(key, v)?,
            "reward.mouse_interaction_reward" => r.mouse_interaction_reward = float(key, v)?,
            "reward.distance_threshold" => r.distance_threshold = float(key, v)?,
            "reward.base_step_penalty" => r.base_step_penalty = magnitude(key, v)?,
            "reward.repeat_threshold" => r.repeat_threshold = num(key, v)?,
            "reward.repeat_exp_base" => r.repeat_exp_base = magnitude(key, v)?,
            "reward.repeat_exp_factor" => r.repeat_exp_factor = float(key, v)?,
            "reward.pointer_unchanged_threshold" => r.pointer_unchanged_threshold = num(key, v)?,
            "reward.pointer_unchanged_penalty" => r.pointer_unchanged_penalty = magnitude(key, v)?,
            "reward.short_ending_penalty" => r.short_ending_penalty = magnitude(key, v)?,
            "reward.exp_penalty_base" => r.exp_penalty_base = magnitude(key, v)?,
            "reward.exp_penalty_factor" => r.exp_penalty_factor = float(key, v)?,
            "reward.negative_stop_threshold" => r.negative_stop_threshold = float(key, v)?,
            "reward.shaping_on_mismatch" => r.shaping_on_mismatch = boolean(key, v)?,
            "reward.streaks" => {
                if !boolean(key, v)? {
                    *r = r.without_streaks();
                }
            }

            "env.max_steps" => self.env.max_steps = num(key, v)?,
            "encoder.embed_dim" => self.embed_dim = num(key, v)?,
            "encoder.state_size" => self.state_size = num(key, v)?,

            "curriculum.alpha" => {
                self.curriculum_alpha = if v == "auto" { None } else { Some(float(key, v)?) }
            }
            "curriculum.mode" => self.curriculum_mode = SamplingMode::from_name(v)?,
            "curriculum.failure_bias" => self.failure_bias = boolean(key, v)?,

            "agent.algorithm" => a.algorithm = Algorithm::from_name(v)?,
            "agent.structure" => a.structure = Structure::from_name(v)?,
            "agent.vision_hidden" => a.net.vision_hidden = num(key, v)?,
            "agent.task_id_dim" => a.net.task_id_dim = num(key, v)?,
            "agent.description_hidden" => a.net.description_hidden = num(key, v)?,
            "agent.numeric_hidden" => a.net.numeric_hidden = num(key, v)?,
            "agent.trunk" => a.net.trunk = widths(key, v)?,
            "agent.gamma" => a.gamma = float(key, v)?,
            "agent.learning_rate" => a.learning_rate = float(key, v)?,
            "agent.batch_size" => a.batch_size = num(key, v)?,
            "agent.epsilon_start" => a.epsilon_start = float(key, v)?,
            "agent.epsilon_end" => a.epsilon_end = float(key, v)?,
            "agent.epsilon_decay" => a.epsilon_decay = float(key, v)?,
            "agent.target_update_interval" => a.target_update_interval = num(key, v)?,
            "agent.replay_capacity" => a.replay_capacity = num(key, v)?,
            "agent.train_every" => a.train_every = num(key, v)?,
            "agent.ppo_clip" => a.ppo_clip = float(key, v)?,
            "agent.ppo_epochs" => a.ppo_epochs = num(key, v)?,
            "agent.rollout_length" => a.rollout_length = num(key, v)?,
            "agent.n_step" => a.n_step = num(key, v)?,
            "agent.value_coef" => a.value_coef = float(key, v)?,
            "agent.entropy_coef" => a.entropy_coef = float(key, v)?,

            "run.seed" => self.seed = num(key, v)?,
            "run.episodes" | "curriculum.total_episodes" => self.episodes = num(key, v)?,
            "run.eval_interval" => self.eval_interval = num(key, v)?,
            "run.out_dir" => self.out_dir = PathBuf::from(v),
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Every key with its current value, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let r = &self.env.reward;
        let a = &self.agent;
        let trunk: Vec<String> = a.net.trunk.iter().map(|w| w.to_string()).collect();
        vec![
            ("suite.path", self.suite.path.as_ref().map(|p| p.display().to_string()).unwrap_or_default()),
            ("suite.simple", self.suite.simple.to_string()),
            ("suite.hard", self.suite.hard.to_string()),
            ("reward.alpha", r.alpha.to_string()),
            ("reward.manager_correct_reward", r.manager_correct_reward.to_string()),
            ("reward.manager_streak_bonus", r.manager_streak_bonus.to_string()),
            ("reward.subpolicy_correct_reward", r.subpolicy_correct_reward.to_string()),
            ("reward.subpolicy_streak_bonus", r.subpolicy_streak_bonus.to_string()),
            ("reward.mouse_region_reward", r.mouse_region_reward.to_string()),
            ("reward.mouse_interaction_reward", r.mouse_interaction_reward.to_string()),
            ("reward.distance_threshold", r.distance_threshold.to_string()),
            ("reward.base_step_penalty", r.base_step_penalty.to_string()),
            ("reward.repeat_threshold", r.repeat_threshold.to_string()),
            ("reward.repeat_exp_base", r.repeat_exp_base.to_string()),
            ("reward.repeat_exp_factor", r.repeat_exp_factor.to_string()),
            ("reward.pointer_unchanged_threshold", r.pointer_unchanged_threshold.to_string()),
            ("reward.pointer_unchanged_penalty", r.pointer_unchanged_penalty.to_string()),
            ("reward.short_ending_penalty", r.short_ending_penalty.to_string()),
            ("reward.exp_penalty_base", r.exp_penalty_base.to_string()),
            ("reward.exp_penalty_factor", r.exp_penalty_factor.to_string()),
            ("reward.negative_stop_threshold", r.negative_stop_threshold.to_string()),
            ("reward.shaping_on_mismatch", r.shaping_on_mismatch.to_string()),
            ("env.max_steps", self.env.max_steps.to_string()),
            ("encoder.embed_dim", self.embed_dim.to_string()),
            ("encoder.state_size", self.state_size.to_string()),
            ("curriculum.alpha", self.curriculum_alpha.map_or("auto".into(), |x| x.to_string())),
            ("curriculum.mode", self.curriculum_mode.as_str().into()),
            ("curriculum.failure_bias", self.failure_bias.to_string()),
            ("agent.algorithm", a.algorithm.as_str().into()),
            ("agent.structure", a.structure.as_str().into()),
            ("agent.vision_hidden", a.net.vision_hidden.to_string()),
            ("agent.task_id_dim", a.net.task_id_dim.to_string()),
            ("agent.description_hidden", a.net.description_hidden.to_string()),
            ("agent.numeric_hidden", a.net.numeric_hidden.to_string()),
            ("agent.trunk", trunk.join(",")),
            ("agent.gamma", a.gamma.to_string()),
            ("agent.learning_rate", a.learning_rate.to_string()),
            ("agent.batch_size", a.batch_size.to_string()),
            ("agent.epsilon_start", a.epsilon_start.to_string()),
            ("agent.epsilon_end", a.epsilon_end.to_string()),
            ("agent.epsilon_decay", a.epsilon_decay.to_string()),
            ("agent.target_update_interval", a.target_update_interval.to_string()),
            ("agent.replay_capacity", a.replay_capacity.to_string()),
            ("agent.train_every", a.train_every.to_string()),
            ("agent.ppo_clip", a.ppo_clip.to_string()),
            ("agent.ppo_epochs", a.ppo_epochs.to_string()),
            ("agent.rollout_length", a.rollout_length.to_string()),
            ("agent.n_step", a.n_step.to_string()),
            ("agent.value_coef", a.value_coef.to_string()),
            ("agent.entropy_coef", a.entropy_coef.to_string()),
            ("run.seed", self.seed.to_string()),
            ("run.episodes", self.episodes.to_string()),
            ("run.eval_interval", self.eval_interval.to_string()),
            ("run.out_dir", self.out_dir.display().to_string()),
        ]
    }

    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// Parses `text` into `(line, key, value)` triples without applying them.
    pub fn parse_pairs(text: &str) -> Result<Vec<(usize, String, String)>> {
        let mut out: Vec<(usize, String, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::schema(i + 1, "expected `key = value`"))?;
            let k = k.trim();
            if out.iter().any(|(_, prev, _)| prev == k) {
                return Err(Error::schema(i + 1, format!("duplicate key {k:?}")));
            }
            out.push((i + 1, k.to_string(), v.trim().to_string()));
        }
        Ok(out)
    }

    /// Applies overrides in order, except that `reward.preset` goes first
    /// so explicit reward keys in the same batch win over it.
    pub fn apply<'a, I>(&mut self, pairs: I) -> Result<()>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let pairs: Vec<(&str, &str)> = pairs.into_iter().collect();
        let (preset, rest): (Vec<_>, Vec<_>) = pairs.into_iter().partition(|(k, _)| *k == "reward.preset");
        for (k, v) in preset.into_iter().chain(rest) {
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let pairs = Self::parse_pairs(text)?;
        if let Some((line, k, v)) = pairs.iter().find(|(_, k, _)| k == "reward.preset") {
            self.set(k, v).map_err(|e| Error::schema(*line, e.to_string()))?;
        }
        for (line, k, v) in pairs.iter().filter(|(_, k, _)| k != "reward.preset") {
            self.set(k, v).map_err(|e| Error::schema(*line, e.to_string()))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn encoder(&self) -> EncoderConfig {
        EncoderConfig { embed_dim: self.embed_dim, state_size: self.state_size, seed: self.seed }
    }

    pub fn curriculum(&self) -> CurriculumConfig {
        CurriculumConfig {
            total_episodes: self.episodes,
            alpha: self.curriculum_alpha,
            mode: self.curriculum_mode,
            failure_bias: self.failure_bias,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.env.reward.validate()?;
        if self.env.max_steps == 0 {
            return Err(Error::Config("env.max_steps must be >= 1".into()));
        }
        self.encoder().validate()?;
        self.curriculum().validate()?;
        self.agent.validate()
    }
}
