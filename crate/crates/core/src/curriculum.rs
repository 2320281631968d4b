//! Easy-to-hard task sampling.
//!
//! In curriculum mode episode `i` of `T` draws a simple task with probability
//! `1 - (i/T)^alpha`. The expected share of hard episodes is `1/(alpha + 1)`,
//! so `alpha = Ns/Nh` gives each group episodes in proportion to its size.

use log::info;
use rand::Rng;

use crate::error::{Error, Result};
use crate::task_suite::{Difficulty, Task, TaskSuite};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplingMode {
    Curriculum,
    Random,
}

impl SamplingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SamplingMode::Curriculum => "curriculum",
            SamplingMode::Random => "random",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "curriculum" => Ok(SamplingMode::Curriculum),
            "random" => Ok(SamplingMode::Random),
            other => Err(Error::Config(format!("unknown curriculum.mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurriculumConfig {
    pub total_episodes: usize,
    /// `None` derives `Ns/Nh` from the suite.
    pub alpha: Option<f64>,
    pub mode: SamplingMode,
    /// Double a task's weight after each failure, reset on success.
    pub failure_bias: bool,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        Self {
            total_episodes: 100_000,
            alpha: None,
            mode: SamplingMode::Curriculum,
            failure_bias: false,
        }
    }
}

impl CurriculumConfig {
    pub fn validate(&self) -> Result<()> {
        if self.total_episodes == 0 {
            return Err(Error::Config("curriculum.total_episodes must be >= 1".into()));
        }
        if let Some(a) = self.alpha {
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::Config(format!("curriculum.alpha must be > 0, got {a}")));
            }
        }
        Ok(())
    }
}

pub fn alpha_from_counts(n_simple: usize, n_hard: usize) -> Result<f64> {
    if n_hard == 0 {
        return Err(Error::DegenerateSuite);
    }
    Ok(n_simple as f64 / n_hard as f64)
}

pub fn p_simple(t_norm: f64, alpha: f64) -> f64 {
    1.0 - t_norm.clamp(0.0, 1.0).powf(alpha)
}

pub fn p_hard(t_norm: f64, alpha: f64) -> f64 {
    1.0 - p_simple(t_norm, alpha)
}

pub fn expected_hard_fraction(alpha: f64) -> f64 {
    1.0 / (alpha + 1.0)
}

/// Stateful sampler for one training loop.
#[derive(Clone, Debug)]
pub struct TaskSampler {
    cfg: CurriculumConfig,
    mode: SamplingMode,
    alpha: f64,
    simple: Vec<u32>,
    hard: Vec<u32>,
    weights: Vec<f64>,
}

impl TaskSampler {
    /// Falls back to random mode (with a log notice) when the suite has no
    /// hard tasks and alpha is left to be derived.
    pub fn new(suite: &TaskSuite, cfg: CurriculumConfig) -> Result<Self> {
        cfg.validate()?;
        if suite.is_empty() {
            return Err(Error::Config("cannot sample from an empty suite".into()));
        }
        let mut mode = cfg.mode;
        let alpha = match cfg.alpha {
            Some(a) => a,
            None => match alpha_from_counts(suite.n_simple(), suite.n_hard()) {
                Ok(a) => a,
                Err(_) => {
                    if mode == SamplingMode::Curriculum {
                        info!("suite lacks one difficulty group; sampling uniformly");
                    }
                    mode = SamplingMode::Random;
                    1.0
                }
            },
        };
        Ok(Self {
            mode,
            alpha,
            simple: suite.ids_with(Difficulty::Simple),
            hard: suite.ids_with(Difficulty::Hard),
            weights: vec![1.0; suite.len()],
            cfg,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn mode(&self) -> SamplingMode {
        self.mode
    }

    /// Difficulty group to draw from for this episode (curriculum mode).
    pub fn sample_difficulty<R: Rng + ?Sized>(&self, episode_index: usize, rng: &mut R) -> Difficulty {
        let t_norm = episode_index as f64 / self.cfg.total_episodes as f64;
        if rng.gen::<f64>() < p_simple(t_norm, self.alpha) {
            Difficulty::Simple
        } else {
            Difficulty::Hard
        }
    }

    pub fn sample<'a, R: Rng + ?Sized>(
        &self,
        episode_index: usize,
        suite: &'a TaskSuite,
        rng: &mut R,
    ) -> &'a Task {
        let id = match self.mode {
            SamplingMode::Random => {
                let all: Vec<u32> = (0..suite.len() as u32).collect();
                self.pick(&all, rng)
            }
            SamplingMode::Curriculum => {
                let want = self.sample_difficulty(episode_index, rng);
                let (group, other) = match want {
                    Difficulty::Simple => (&self.simple, &self.hard),
                    Difficulty::Hard => (&self.hard, &self.simple),
                };
                if group.is_empty() {
                    info!("no {want} tasks; drawing from the other group");
                    self.pick(other, rng)
                } else {
                    self.pick(group, rng)
                }
            }
        };
        suite.get(id).expect("sampler ids come from the suite")
    }

    fn pick<R: Rng + ?Sized>(&self, ids: &[u32], rng: &mut R) -> u32 {
        if !self.cfg.failure_bias {
            return ids[rng.gen_range(0..ids.len())];
        }
        let total: f64 = ids.iter().map(|&i| self.weights[i as usize]).sum();
        let mut x = rng.gen::<f64>() * total;
        for &i in ids {
            x -= self.weights[i as usize];
            if x < 0.0 {
                return i;
            }
        }
        *ids.last().expect("non-empty group")
    }

    /// Feeds an episode result back for failure-biased resampling.
    pub fn record_outcome(&mut self, task_id: u32, success: bool) {
        if !self.cfg.failure_bias {
            return;
        }
        if let Some(w) = self.weights.get_mut(task_id as usize) {
            *w = if success { 1.0 } else { (*w * 2.0).min(1e6) };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action_space::ActionRegistry;
    use crate::task_suite::generate_synthetic_suite;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn alpha_examples() {
        assert_eq!(alpha_from_counts(90, 45).unwrap(), 2.0);
        assert_eq!(alpha_from_counts(45, 45).unwrap(), 1.0);
        assert_eq!(alpha_from_counts(0, 45).unwrap(), 0.0);
        assert!(matches!(alpha_from_counts(3, 0), Err(Error::DegenerateSuite)));
    }

    #[test]
    fn schedule_examples() {
        assert_eq!(p_simple(0.0, 2.0), 1.0);
        assert_eq!(p_simple(1.0, 2.0), 0.0);
        assert_eq!(p_simple(0.5, 2.0), 0.75);
        assert_eq!(p_hard(0.5, 2.0), 0.25);
        assert!((expected_hard_fraction(2.0) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(expected_hard_fraction(1.0), 0.5);
        assert!((expected_hard_fraction(1e-9) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn first_episode_is_simple() {
        let reg = ActionRegistry::builtin();
        let suite = generate_synthetic_suite(0, 9, 3, &reg);
        let s = TaskSampler::new(&suite, CurriculumConfig { total_episodes: 10, ..Default::default() }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            assert_eq!(s.sample(0, &suite, &mut rng).difficulty(), Difficulty::Simple);
        }
    }

    #[test]
    fn degenerate_suite_falls_back() {
        let reg = ActionRegistry::builtin();
        let suite = generate_synthetic_suite(0, 4, 0, &reg);
        let s = TaskSampler::new(&suite, CurriculumConfig::default()).unwrap();
        assert_eq!(s.mode(), SamplingMode::Random);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let _ = s.sample(99_999, &suite, &mut rng);

        // explicit alpha with an empty hard group: late episodes fall back to simple
        let cfg = CurriculumConfig { alpha: Some(1.0), total_episodes: 10, ..Default::default() };
        let s = TaskSampler::new(&suite, cfg).unwrap();
        assert_eq!(s.mode(), SamplingMode::Curriculum);
        assert_eq!(s.sample(9, &suite, &mut rng).difficulty(), Difficulty::Simple);
    }

    #[test]
    fn failure_bias_shifts_weight() {
        let reg = ActionRegistry::builtin();
        let suite = generate_synthetic_suite(0, 2, 0, &reg);
        let cfg = CurriculumConfig { failure_bias: true, mode: SamplingMode::Random, ..Default::default() };
        let mut s = TaskSampler::new(&suite, cfg).unwrap();
        for _ in 0..5 {
            s.record_outcome(1, false);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let hits = (0..3300).filter(|_| s.sample(0, &suite, &mut rng).id() == 1).count();
        // weight 32 vs 1
        assert!((3000..3300).contains(&hits), "{hits}");
        s.record_outcome(1, true);
        let hits = (0..4000).filter(|_| s.sample(0, &suite, &mut rng).id() == 1).count();
        assert!((1800..2200).contains(&hits), "{hits}");
    }
}
