//! Per-step reward: manager guidance plus scaled subpolicy feedback minus an
//! additive penalty, `r = R_mgr + alpha * R_sub - P`.
//!
//! All coefficients live in [`RewardConfig`]. Penalty coefficients are stored
//! as non-negative magnitudes and subtracted.

use crate::action_space::{Action, MacroAction, MouseTarget};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RewardPreset {
    /// Default coefficients.
    Standard,
    /// Penalty instantiation with step 0.05 and stagnation 2.0.
    LightPenalty,
    /// Manager streak bonus 5, subpolicy streak bonus 1.
    TextStreaks,
}

impl RewardPreset {
    pub fn name(self) -> &'static str {
        match self {
            RewardPreset::Standard => "standard",
            RewardPreset::LightPenalty => "light-penalty",
            RewardPreset::TextStreaks => "text-streaks",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "standard" => Ok(RewardPreset::Standard),
            "light-penalty" => Ok(RewardPreset::LightPenalty),
            "text-streaks" => Ok(RewardPreset::TextStreaks),
            other => Err(Error::Config(format!("unknown reward preset {other:?}"))),
        }
    }
}

/// Which exploration penalty form is active.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExploreForm {
    /// `base * factor^max(0, t - T*)`.
    TimeBased,
    /// Distance-to-nearest-target form. Reserved; rejected by [`RewardConfig::validate`].
    DistanceBased,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RewardConfig {
    pub alpha: f64,
    pub manager_correct_reward: f64,
    pub manager_streak_bonus: f64,
    pub subpolicy_correct_reward: f64,
    pub subpolicy_streak_bonus: f64,
    pub mouse_region_reward: f64,
    pub mouse_interaction_reward: f64,
    pub distance_threshold: f64,
    pub base_step_penalty: f64,
    pub repeat_threshold: u32,
    pub repeat_exp_base: f64,
    pub repeat_exp_factor: f64,
    pub pointer_unchanged_threshold: u32,
    pub pointer_unchanged_penalty: f64,
    pub short_ending_penalty: f64,
    pub exp_penalty_base: f64,
    pub exp_penalty_factor: f64,
    pub negative_stop_threshold: f64,
    /// Grant the positional mouse reward on steps that do not match the script.
    pub shaping_on_mismatch: bool,
    pub explore_form: ExploreForm,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self::preset(RewardPreset::Standard)
    }
}

impl RewardConfig {
    pub fn preset(preset: RewardPreset) -> Self {
        let standard = Self {
            alpha: 1.2,
            manager_correct_reward: 2.0,
            manager_streak_bonus: 2.0,
            subpolicy_correct_reward: 6.0,
            subpolicy_streak_bonus: 2.0,
            mouse_region_reward: 3.0,
            mouse_interaction_reward: 3.0,
            distance_threshold: 3.0,
            base_step_penalty: 0.5,
            repeat_threshold: 2,
            repeat_exp_base: 3.0,
            repeat_exp_factor: 2.0,
            pointer_unchanged_threshold: 3,
            pointer_unchanged_penalty: 4.0,
            short_ending_penalty: 2.0,
            exp_penalty_base: 0.2,
            exp_penalty_factor: 1.1,
            negative_stop_threshold: -200.0,
            shaping_on_mismatch: true,
            explore_form: ExploreForm::TimeBased,
        };
        match preset {
            RewardPreset::Standard => standard,
            RewardPreset::LightPenalty => Self {
                base_step_penalty: 0.05,
                pointer_unchanged_penalty: 2.0,
                ..standard
            },
            RewardPreset::TextStreaks => Self {
                manager_streak_bonus: 5.0,
                subpolicy_streak_bonus: 1.0,
                ..standard
            },
        }
    }

    /// Same config with both streak bonuses switched off.
    pub fn without_streaks(&self) -> Self {
        Self {
            manager_streak_bonus: 0.0,
            subpolicy_streak_bonus: 0.0,
            ..self.clone()
        }
    }

    /// Multiplies every reward and penalty magnitude by `k`. Thresholds,
    /// growth factors and `alpha` are left unchanged.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            manager_correct_reward: self.manager_correct_reward * k,
            manager_streak_bonus: self.manager_streak_bonus * k,
            subpolicy_correct_reward: self.subpolicy_correct_reward * k,
            subpolicy_streak_bonus: self.subpolicy_streak_bonus * k,
            mouse_region_reward: self.mouse_region_reward * k,
            mouse_interaction_reward: self.mouse_interaction_reward * k,
            base_step_penalty: self.base_step_penalty * k,
            repeat_exp_base: self.repeat_exp_base * k,
            pointer_unchanged_penalty: self.pointer_unchanged_penalty * k,
            short_ending_penalty: self.short_ending_penalty * k,
            exp_penalty_base: self.exp_penalty_base * k,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let magnitudes = [
            ("alpha", self.alpha),
            ("manager_correct_reward", self.manager_correct_reward),
            ("manager_streak_bonus", self.manager_streak_bonus),
            ("subpolicy_correct_reward", self.subpolicy_correct_reward),
            ("subpolicy_streak_bonus", self.subpolicy_streak_bonus),
            ("mouse_region_reward", self.mouse_region_reward),
            ("mouse_interaction_reward", self.mouse_interaction_reward),
            ("base_step_penalty", self.base_step_penalty),
            ("repeat_exp_base", self.repeat_exp_base),
            ("repeat_exp_factor", self.repeat_exp_factor),
            ("pointer_unchanged_penalty", self.pointer_unchanged_penalty),
            ("short_ending_penalty", self.short_ending_penalty),
            ("exp_penalty_base", self.exp_penalty_base),
            ("exp_penalty_factor", self.exp_penalty_factor),
        ];
        for (name, v) in magnitudes {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be a finite value >= 0, got {v}")));
            }
        }
        if !(self.distance_threshold.is_finite() && self.distance_threshold > 0.0) {
            return Err(Error::Config("distance_threshold must be > 0".into()));
        }
        if !(self.negative_stop_threshold.is_finite() && self.negative_stop_threshold < 0.0) {
            return Err(Error::Config("negative_stop_threshold must be < 0".into()));
        }
        if self.explore_form == ExploreForm::DistanceBased {
            return Err(Error::Config(
                "explore_form = distance is reserved but not implemented".into(),
            ));
        }
        Ok(())
    }
}

/// Everything the reward needs about one transition, with counters already
/// advanced to include the current step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepContext {
    pub action: Action,
    /// Ground-truth action at the progress index before the step.
    pub target: Action,
    /// Consecutive correct macro selections, including this step when correct.
    pub manager_streak: u32,
    /// Consecutive exact matches, including this step when matched.
    pub subpolicy_streak: u32,
    /// Length of the current run of identical actions (1 when this differs from the last).
    pub repeat_streak: u32,
    /// Consecutive steps without progress.
    pub stagnation: u32,
    /// 1-based timestep of this action.
    pub step: u32,
    /// Nominal horizon T*, the ground-truth length.
    pub horizon: u32,
    pub progress_after: u32,
    pub length: u32,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Penalties {
    pub repeat: f64,
    pub stagnation: f64,
    pub step: f64,
    pub early: f64,
    pub explore: f64,
}

impl Penalties {
    pub fn sum(&self) -> f64 {
        self.repeat + self.stagnation + self.step + self.early + self.explore
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RewardBreakdown {
    pub manager: f64,
    pub subpolicy: f64,
    pub p_repeat: f64,
    pub p_stagnation: f64,
    pub p_step: f64,
    pub p_early: f64,
    pub p_explore: f64,
    pub total: f64,
}

impl RewardBreakdown {
    pub fn penalties(&self) -> Penalties {
        Penalties {
            repeat: self.p_repeat,
            stagnation: self.p_stagnation,
            step: self.p_step,
            early: self.p_early,
            explore: self.p_explore,
        }
    }

    /// Re-derives the total from the parts under `alpha`.
    pub fn recomposed(&self, alpha: f64) -> f64 {
        compose(self.manager, self.subpolicy, &self.penalties(), alpha)
    }
}

fn compose(manager: f64, subpolicy: f64, p: &Penalties, alpha: f64) -> f64 {
    manager + alpha * subpolicy - p.sum()
}

pub fn manager_reward(chosen: MacroAction, target: MacroAction, streak: u32, cfg: &RewardConfig) -> f64 {
    if chosen != target {
        return 0.0;
    }
    cfg.manager_correct_reward + cfg.manager_streak_bonus * streak as f64
}

/// Positional reward decaying linearly to zero at `distance_threshold`, plus
/// the interaction reward.
pub fn mouse_subreward(chosen: MouseTarget, target: MouseTarget, cfg: &RewardConfig) -> f64 {
    let d = chosen.distance(target);
    let positional = (1.0 - d / cfg.distance_threshold).max(0.0) * cfg.mouse_region_reward;
    let interaction = if chosen.interaction() == target.interaction() {
        cfg.mouse_interaction_reward
    } else {
        0.0
    };
    positional + interaction
}

pub fn key_subreward(chosen: &Action, target: &Action, cfg: &RewardConfig) -> f64 {
    if chosen == target {
        cfg.subpolicy_correct_reward
    } else {
        0.0
    }
}

/// Subpolicy reward for a transition, including the streak bonus on exact matches.
/// Zero when the macro differs from the target's.
pub fn subpolicy_reward(ctx: &StepContext, cfg: &RewardConfig) -> f64 {
    let exact = ctx.action == ctx.target;
    let base = match (ctx.action, ctx.target) {
        (Action::Mouse(c), Action::Mouse(t)) => {
            if exact || cfg.shaping_on_mismatch {
                mouse_subreward(c, t, cfg)
            } else {
                0.0
            }
        }
        (a, t) if a.macro_action() == t.macro_action() => key_subreward(&a, &t, cfg),
        _ => return 0.0,
    };
    if exact {
        base + cfg.subpolicy_streak_bonus * ctx.subpolicy_streak as f64
    } else {
        base
    }
}

pub fn penalty(ctx: &StepContext, cfg: &RewardConfig) -> Penalties {
    let repeat = if ctx.repeat_streak > cfg.repeat_threshold {
        let excess = (ctx.repeat_streak - cfg.repeat_threshold) as i32;
        cfg.repeat_exp_base * (cfg.repeat_exp_factor.powi(excess) - 1.0)
    } else {
        0.0
    };
    let stagnation = if ctx.stagnation > cfg.pointer_unchanged_threshold {
        cfg.pointer_unchanged_penalty
    } else {
        0.0
    };
    let early = if ctx.action.is_stop() && ctx.progress_after < ctx.length {
        cfg.short_ending_penalty
    } else {
        0.0
    };
    let overrun = ctx.step.saturating_sub(ctx.horizon) as i32;
    let explore = cfg.exp_penalty_base * cfg.exp_penalty_factor.powi(overrun);
    Penalties {
        repeat,
        stagnation,
        step: cfg.base_step_penalty,
        early,
        explore,
    }
}

pub fn total_reward(manager: f64, subpolicy: f64, penalties: Penalties, cfg: &RewardConfig) -> RewardBreakdown {
    RewardBreakdown {
        manager,
        subpolicy,
        p_repeat: penalties.repeat,
        p_stagnation: penalties.stagnation,
        p_step: penalties.step,
        p_early: penalties.early,
        p_explore: penalties.explore,
        total: compose(manager, subpolicy, &penalties, cfg.alpha),
    }
}

/// Full reward for one transition.
pub fn evaluate(ctx: &StepContext, cfg: &RewardConfig) -> RewardBreakdown {
    let manager = manager_reward(
        ctx.action.macro_action(),
        ctx.target.macro_action(),
        ctx.manager_streak,
        cfg,
    );
    let sub = subpolicy_reward(ctx, cfg);
    total_reward(manager, sub, penalty(ctx, cfg), cfg)
}

/// Episode reward relative to the ground-truth replay, clamped to [0, 1].
pub fn normalized_reward(episode_total: f64, oracle_total: f64) -> Result<f64> {
    if !(oracle_total > 0.0) {
        return Err(Error::NonPositiveOracle(oracle_total));
    }
    Ok((episode_total / oracle_total).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action_space::KeyIndex;

    fn key(i: usize) -> Action {
        Action::Single(KeyIndex::new(i).unwrap())
    }

    fn ctx(action: Action, target: Action) -> StepContext {
        let hit = action == target;
        StepContext {
            action,
            target,
            manager_streak: u32::from(action.macro_action() == target.macro_action()),
            subpolicy_streak: u32::from(hit),
            repeat_streak: 1,
            stagnation: u32::from(!hit),
            step: 1,
            horizon: 5,
            progress_after: u32::from(hit),
            length: 5,
        }
    }

    #[test]
    fn manager_reward_examples() {
        let cfg = RewardConfig::default();
        assert_eq!(manager_reward(MacroAction::Mouse, MacroAction::Meta, 3, &cfg), 0.0);
        assert_eq!(manager_reward(MacroAction::Meta, MacroAction::Meta, 1, &cfg), 4.0);
        assert_eq!(manager_reward(MacroAction::Meta, MacroAction::Meta, 3, &cfg), 8.0);
    }

    #[test]
    fn mouse_reward_examples() {
        let cfg = RewardConfig::default();
        let t = MouseTarget::new(4, 4, 2).unwrap();
        assert_eq!(mouse_subreward(t, t, &cfg), 6.0);
        // (4,4) -> (4,4); (8,8) -> (8,8): distance > 3, wrong interaction
        let far = MouseTarget::new(8, 8, 0).unwrap();
        assert_eq!(mouse_subreward(far, t, &cfg), 0.0);
        // d = 1.5 needs half-cells; use d_th = 2 and an adjacent cell instead
        let cfg2 = RewardConfig {
            distance_threshold: 2.0,
            ..RewardConfig::default()
        };
        let near = MouseTarget::new(4, 5, 2).unwrap();
        assert_eq!(mouse_subreward(near, t, &cfg2), 0.5 * 3.0 + 3.0);
    }

    #[test]
    fn key_reward_examples() {
        let cfg = RewardConfig::default();
        assert_eq!(key_subreward(&key(0), &key(0), &cfg), 6.0);
        assert_eq!(key_subreward(&key(1), &key(0), &cfg), 0.0);
        let mut c = ctx(key(0), key(0));
        c.subpolicy_streak = 3;
        assert_eq!(subpolicy_reward(&c, &cfg), 6.0 + 2.0 * 3.0);
    }

    #[test]
    fn cross_macro_subreward_is_zero() {
        let cfg = RewardConfig::default();
        let m = Action::Mouse(MouseTarget::new(0, 0, 0).unwrap());
        assert_eq!(subpolicy_reward(&ctx(m, key(0)), &cfg), 0.0);
        assert_eq!(subpolicy_reward(&ctx(key(0), m), &cfg), 0.0);
    }

    #[test]
    fn shaping_switch() {
        let mut cfg = RewardConfig::default();
        let t = Action::Mouse(MouseTarget::new(0, 0, 0).unwrap());
        let near = Action::Mouse(MouseTarget::new(0, 1, 0).unwrap());
        assert_eq!(subpolicy_reward(&ctx(near, t), &cfg), 2.0 + 3.0);
        cfg.shaping_on_mismatch = false;
        assert_eq!(subpolicy_reward(&ctx(near, t), &cfg), 0.0);
    }

    #[test]
    fn penalty_examples() {
        let cfg = RewardConfig::default();
        let mut c = ctx(key(1), key(0));
        c.repeat_streak = 4;
        assert_eq!(penalty(&c, &cfg).repeat, 9.0);
        c.repeat_streak = 2;
        assert_eq!(penalty(&c, &cfg).repeat, 0.0);
        let fresh = ctx(key(0), key(0));
        let p = penalty(&fresh, &cfg);
        assert_eq!(p, Penalties { step: 0.5, explore: 0.2, ..Default::default() });
    }

    #[test]
    fn first_step_composition() {
        let cfg = RewardConfig::default();
        let b = evaluate(&ctx(key(0), key(0)), &cfg);
        assert!((b.total - 12.9).abs() < 1e-12, "{}", b.total);
        assert_eq!(b.total, b.recomposed(cfg.alpha));
    }

    #[test]
    fn alpha_zero_drops_subpolicy() {
        let cfg = RewardConfig { alpha: 0.0, ..Default::default() };
        let b = evaluate(&ctx(key(0), key(0)), &cfg);
        assert_eq!(b.total, 4.0 - 0.7);
    }

    #[test]
    fn normalization() {
        assert_eq!(normalized_reward(10.0, 10.0).unwrap(), 1.0);
        assert_eq!(normalized_reward(-3.0, 10.0).unwrap(), 0.0);
        assert_eq!(normalized_reward(5.0, 10.0).unwrap(), 0.5);
        assert_eq!(normalized_reward(50.0, 10.0).unwrap(), 1.0);
        assert!(matches!(normalized_reward(1.0, 0.0), Err(Error::NonPositiveOracle(_))));
    }

    #[test]
    fn presets() {
        let d = RewardConfig::preset(RewardPreset::LightPenalty);
        assert_eq!(d.base_step_penalty, 0.05);
        assert_eq!(d.pointer_unchanged_penalty, 2.0);
        let s = RewardConfig::preset(RewardPreset::TextStreaks);
        assert_eq!((s.manager_streak_bonus, s.subpolicy_streak_bonus), (5.0, 1.0));
        for p in [RewardPreset::Standard, RewardPreset::LightPenalty, RewardPreset::TextStreaks] {
            assert_eq!(RewardPreset::from_name(p.name()).unwrap(), p);
            RewardConfig::preset(p).validate().unwrap();
        }
        let bad = RewardConfig { explore_form: ExploreForm::DistanceBased, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
