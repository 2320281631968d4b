//! Triple-modal observations: a placeholder vision embedding, a PCA-compressed
//! description embedding and the raw numeric execution state.
//!
//! Both embeddings are deterministic pseudo-random stand-ins seeded by stable
//! hashes, so every observation is reproducible bit for bit.

mod eigen;
pub mod pca;

use std::collections::HashMap;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use eigen::symmetric_eigen;
pub use pca::{fit_pca, fit_pca_with_spectrum, project, PcaFit, PcaModel};

use crate::environment::EnvState;
use crate::error::{Error, Result};
use crate::task_suite::{Task, TaskSuite};

pub const VISION_DIM: usize = 1024;
pub const DESCRIPTION_DIM: usize = 1536;
pub const BASE_NUMERIC: usize = 5;
pub const MAX_NUMERIC: usize = 12;
pub const EMBED_DIMS: [usize; 4] = [0, 64, 128, 1536];

/// 64-bit FNV-1a.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Placeholder screen embedding for a task at a given progress index.
/// Components are uniform in [-1, 1).
pub fn vision_embed(task_id: u32, progress: usize, seed: u64) -> Vec<f64> {
    let key = mix(mix(mix(seed) ^ u64::from(task_id)) ^ progress as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    (0..VISION_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Unit-norm pseudo-embedding of a description string.
pub fn description_embed(description: &str) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(description.as_bytes()));
    let mut v: Vec<f64> = (0..DESCRIPTION_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderConfig {
    /// Projected description size `d_t`.
    pub embed_dim: usize,
    /// Numeric state length, 5 to 12.
    pub state_size: usize,
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            embed_dim: 64,
            state_size: BASE_NUMERIC,
            seed: 0,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if !EMBED_DIMS.contains(&self.embed_dim) {
            return Err(Error::Config(format!(
                "encoder.embed_dim must be one of {EMBED_DIMS:?}, got {}",
                self.embed_dim
            )));
        }
        if !(BASE_NUMERIC..=MAX_NUMERIC).contains(&self.state_size) {
            return Err(Error::Config(format!(
                "encoder.state_size must be in [{BASE_NUMERIC}, {MAX_NUMERIC}], got {}",
                self.state_size
            )));
        }
        Ok(())
    }

    pub fn observation_len(&self) -> usize {
        VISION_DIM + self.embed_dim + self.state_size
    }
}

/// Raw execution state: progress, step count, region, subregion, press state,
/// then up to seven extras in a fixed order.
#[derive(Clone, Debug, PartialEq)]
pub struct NumericState {
    pub progress: usize,
    pub step: u32,
    pub region: u8,
    pub subregion: u8,
    pub press: u8,
    pub extras: Vec<f64>,
}

impl NumericState {
    pub const EXTRA_NAMES: [&'static str; 7] = [
        "repeat_streak",
        "stagnation",
        "manager_streak",
        "subpolicy_streak",
        "remaining_steps",
        "last_macro",
        "reward_sign",
    ];

    pub fn from_env(state: &EnvState, max_steps: u32, size: usize) -> Self {
        let all_extras = [
            f64::from(state.repeat_streak),
            f64::from(state.stagnation),
            f64::from(state.manager_streak),
            f64::from(state.subpolicy_streak),
            f64::from(max_steps.saturating_sub(state.step)),
            state.last_action.map_or(4.0, |a| a.macro_action().index() as f64),
            if state.cumulative_reward > 0.0 {
                1.0
            } else if state.cumulative_reward < 0.0 {
                -1.0
            } else {
                0.0
            },
        ];
        let extra = size.saturating_sub(BASE_NUMERIC).min(all_extras.len());
        Self {
            progress: state.progress,
            step: state.step,
            region: state.region,
            subregion: state.subregion,
            press: state.press,
            extras: all_extras[..extra].to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        BASE_NUMERIC + self.extras.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![
            self.progress as f64,
            f64::from(self.step),
            f64::from(self.region),
            f64::from(self.subregion),
            f64::from(self.press),
        ];
        v.extend_from_slice(&self.extras);
        v
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub vision: Arc<[f64]>,
    pub task_vec: Arc<[f64]>,
    pub numeric: Vec<f64>,
    pub task_id: u32,
}

impl Observation {
    pub fn len(&self) -> usize {
        self.vision.len() + self.task_vec.len() + self.numeric.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `vision ++ task_vec ++ numeric`.
    pub fn features(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend_from_slice(&self.vision);
        v.extend_from_slice(&self.task_vec);
        v.extend_from_slice(&self.numeric);
        v
    }
}

/// Fitted encoder for one suite. Immutable after construction.
#[derive(Debug)]
pub struct StateEncoder {
    config: EncoderConfig,
    pca: PcaModel,
    task_vecs: HashMap<u32, Arc<[f64]>>,
    vision: HashMap<(u32, usize), Arc<[f64]>>,
}

impl StateEncoder {
    /// Fits PCA on the suite's description embeddings and caches every
    /// (task, progress) vision vector.
    pub fn fit(suite: &TaskSuite, config: EncoderConfig) -> Result<Self> {
        config.validate()?;
        let n = suite.len();
        let mut rows = Array2::<f64>::zeros((n, DESCRIPTION_DIM));
        for (i, t) in suite.tasks().iter().enumerate() {
            rows.row_mut(i).assign(&Array1::from(description_embed(t.description())));
        }
        let pca = fit_pca(&rows, config.embed_dim)?;
        let mut task_vecs = HashMap::new();
        let mut vision = HashMap::new();
        for (i, t) in suite.tasks().iter().enumerate() {
            let p = project(&pca, rows.row(i))?;
            task_vecs.insert(t.id(), Arc::from(p.to_vec()));
            for progress in 0..=t.len() {
                vision.insert(
                    (t.id(), progress),
                    Arc::from(vision_embed(t.id(), progress, config.seed)),
                );
            }
        }
        Ok(Self {
            config,
            pca,
            task_vecs,
            vision,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn pca(&self) -> &PcaModel {
        &self.pca
    }

    pub fn observation_len(&self) -> usize {
        self.config.observation_len()
    }

    pub fn task_vec(&self, task: &Task) -> Arc<[f64]> {
        if let Some(v) = self.task_vecs.get(&task.id()) {
            return v.clone();
        }
        let z = Array1::from(description_embed(task.description()));
        Arc::from(project(&self.pca, z.view()).expect("dimension fixed").to_vec())
    }

    fn vision_vec(&self, task_id: u32, progress: usize) -> Arc<[f64]> {
        self.vision
            .get(&(task_id, progress))
            .cloned()
            .unwrap_or_else(|| Arc::from(vision_embed(task_id, progress, self.config.seed)))
    }

    /// Assembles `vision ++ task ++ numeric` for the current episode state.
    pub fn build_observation(&self, task: &Task, state: &EnvState, max_steps: u32) -> Observation {
        let numeric = NumericState::from_env(state, max_steps, self.config.state_size);
        Observation {
            vision: self.vision_vec(task.id(), state.progress),
            task_vec: self.task_vec(task),
            numeric: numeric.to_vec(),
            task_id: task.id(),
        }
    }
}
