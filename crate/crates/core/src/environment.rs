//! Scripted GUI task episodes.
//!
//! [`Episode`] is the bare state machine: it matches actions against the
//! ground-truth script, tracks the counters the reward needs and decides
//! termination. [`GuiEnv`] wraps it with observation encoding and a step trace.

use std::fmt;
use std::sync::Arc;

use crate::action_space::{Action, ActionRegistry, MouseTarget};
use crate::error::{Error, Result};
use crate::reward_engine::{self, RewardBreakdown, RewardConfig, StepContext};
use crate::state_encoder::{Observation, StateEncoder};
use crate::task_suite::Task;

pub const DEFAULT_MAX_STEPS: u32 = 100;
/// Press state before any mouse action: all buttons released.
pub const PRESS_NEUTRAL: u8 = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct EnvConfig {
    pub reward: RewardConfig,
    pub max_steps: u32,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            reward: RewardConfig::default(),
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Termination {
    Stopped,
    MaxSteps,
    RewardFloor,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Stopped => "stopped",
            Termination::MaxSteps => "max_steps",
            Termination::RewardFloor => "reward_floor",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "stopped" => Some(Termination::Stopped),
            "max_steps" => Some(Termination::MaxSteps),
            "reward_floor" => Some(Termination::RewardFloor),
            _ => None,
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvState {
    pub progress: usize,
    pub step: u32,
    pub cumulative_reward: f64,
    pub region: u8,
    pub subregion: u8,
    pub press: u8,
    pub repeat_streak: u32,
    pub stagnation: u32,
    pub manager_streak: u32,
    pub subpolicy_streak: u32,
    pub last_action: Option<Action>,
    pub done: bool,
    pub termination: Option<Termination>,
}

impl Default for EnvState {
    fn default() -> Self {
        Self {
            progress: 0,
            step: 0,
            cumulative_reward: 0.0,
            region: 0,
            subregion: 0,
            press: PRESS_NEUTRAL,
            repeat_streak: 1,
            stagnation: 0,
            manager_streak: 0,
            subpolicy_streak: 0,
            last_action: None,
            done: false,
            termination: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub breakdown: RewardBreakdown,
    pub matched: bool,
    pub done: bool,
}

#[derive(Clone, Debug)]
pub struct Episode {
    task: Task,
    cfg: EnvConfig,
    state: EnvState,
}

impl Episode {
    pub fn new(task: &Task, cfg: &EnvConfig) -> Self {
        Self {
            task: task.clone(),
            cfg: cfg.clone(),
            state: EnvState::default(),
        }
    }

    pub fn task(&self) -> &Task {
        &self.task
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    /// The ground-truth action the script expects next.
    pub fn target(&self) -> Option<Action> {
        self.task.actions().get(self.state.progress).copied()
    }

    /// Reward inputs for taking `action` from the current state, with every
    /// counter advanced to include that step.
    pub fn context_for(&self, action: Action) -> Result<StepContext> {
        let st = &self.state;
        if st.done {
            return Err(Error::StepAfterDone);
        }
        let target = self.target().ok_or(Error::StepAfterDone)?;
        let matched = action == target;
        Ok(StepContext {
            action,
            target,
            manager_streak: if action.macro_action() == target.macro_action() {
                st.manager_streak + 1
            } else {
                0
            },
            subpolicy_streak: if matched { st.subpolicy_streak + 1 } else { 0 },
            repeat_streak: if st.last_action == Some(action) {
                st.repeat_streak + 1
            } else {
                1
            },
            stagnation: if matched { 0 } else { st.stagnation + 1 },
            step: st.step + 1,
            horizon: self.task.len() as u32,
            progress_after: (st.progress + usize::from(matched)) as u32,
            length: self.task.len() as u32,
        })
    }

    pub fn step(&mut self, action: Action) -> Result<Transition> {
        let ctx = self.context_for(action)?;
        let breakdown = reward_engine::evaluate(&ctx, &self.cfg.reward);
        let matched = ctx.action == ctx.target;

        let st = &mut self.state;
        st.progress = ctx.progress_after as usize;
        st.step = ctx.step;
        st.repeat_streak = ctx.repeat_streak;
        st.stagnation = ctx.stagnation;
        st.manager_streak = ctx.manager_streak;
        st.subpolicy_streak = ctx.subpolicy_streak;
        st.last_action = Some(action);
        if let Action::Mouse(m) = action {
            set_mouse(st, m);
        }
        st.cumulative_reward += breakdown.total;

        let termination = if action.is_stop() {
            Some(Termination::Stopped)
        } else if st.cumulative_reward < self.cfg.reward.negative_stop_threshold {
            Some(Termination::RewardFloor)
        } else if st.step >= self.cfg.max_steps {
            Some(Termination::MaxSteps)
        } else {
            None
        };
        st.done = termination.is_some();
        st.termination = termination;
        Ok(Transition {
            breakdown,
            matched,
            done: st.done,
        })
    }

    pub fn is_success(&self) -> Result<bool> {
        is_success(&self.state, self.task.len())
    }
}

fn set_mouse(st: &mut EnvState, m: MouseTarget) {
    st.region = m.region() as u8;
    st.subregion = m.subregion() as u8;
    st.press = m.interaction() as u8;
}

/// Success means the whole script was matched and the episode ended on `meta:stop`.
pub fn is_success(state: &EnvState, length: usize) -> Result<bool> {
    if !state.done {
        return Err(Error::CalledBeforeDone);
    }
    Ok(state.progress == length && state.termination == Some(Termination::Stopped))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleOutcome {
    pub total_reward: f64,
    pub steps: u32,
}

/// Replays the ground truth verbatim. Fails if the replay does not succeed.
pub fn oracle_rollout(task: &Task, cfg: &EnvConfig) -> Result<OracleOutcome> {
    let mut ep = Episode::new(task, cfg);
    for a in task.actions() {
        if ep.state.done {
            break;
        }
        ep.step(*a)?;
    }
    if !ep.state.done || !ep.is_success()? {
        return Err(Error::InvalidTask {
            task: task.id(),
            issues: format!(
                "ground-truth replay failed at progress {}/{}",
                ep.state.progress,
                task.len()
            ),
        });
    }
    Ok(OracleOutcome {
        total_reward: ep.state.cumulative_reward,
        steps: ep.state.step,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub step: u32,
    pub action: Action,
    pub matched: bool,
    pub breakdown: RewardBreakdown,
    pub progress: usize,
}

/// Header line for trace exports.
pub const TRACE_HEADER: &str =
    "t\taction\tmatched\tmanager\tsubpolicy\tp_repeat\tp_stagnation\tp_step\tp_early\tp_explore\ttotal\tprogress";

impl TraceRow {
    pub fn to_line(&self, registry: &ActionRegistry) -> String {
        let b = &self.breakdown;
        format!(
            "{}\t{}\t{}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}\t{}",
            self.step,
            registry.format_action(&self.action),
            u8::from(self.matched),
            b.manager,
            b.subpolicy,
            b.p_repeat,
            b.p_stagnation,
            b.p_step,
            b.p_early,
            b.p_explore,
            b.total,
            self.progress
        )
    }

    pub fn parse_line(line: &str, registry: &ActionRegistry) -> Result<Self> {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 12 {
            return Err(Error::Parse(format!("trace row has {} fields, expected 12", fields.len())));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::Parse(s.to_string()))
        };
        let matched = match fields[2] {
            "0" => false,
            "1" => true,
            other => return Err(Error::Parse(other.to_string())),
        };
        Ok(Self {
            step: fields[0].parse().map_err(|_| Error::Parse(fields[0].to_string()))?,
            action: registry.parse_action(fields[1])?,
            matched,
            breakdown: RewardBreakdown {
                manager: num(fields[3])?,
                subpolicy: num(fields[4])?,
                p_repeat: num(fields[5])?,
                p_stagnation: num(fields[6])?,
                p_step: num(fields[7])?,
                p_early: num(fields[8])?,
                p_explore: num(fields[9])?,
                total: num(fields[10])?,
            },
            progress: fields[11].parse().map_err(|_| Error::Parse(fields[11].to_string()))?,
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub fn total_reward(&self) -> f64 {
        self.rows.iter().map(|r| r.breakdown.total).sum()
    }

    /// Termination implied by the rows under `cfg`, or `None` if the episode
    /// could still continue.
    pub fn termination(&self, cfg: &EnvConfig) -> Option<Termination> {
        let last = self.rows.last()?;
        if last.action.is_stop() {
            return Some(Termination::Stopped);
        }
        if self.total_reward() < cfg.reward.negative_stop_threshold {
            return Some(Termination::RewardFloor);
        }
        if last.step >= cfg.max_steps {
            return Some(Termination::MaxSteps);
        }
        None
    }

    pub fn to_text(&self, registry: &ActionRegistry) -> String {
        let mut out = String::from(TRACE_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.to_line(registry));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str, registry: &ActionRegistry) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if i == 0 && line == TRACE_HEADER {
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let row = TraceRow::parse_line(line, registry)
                .map_err(|e| Error::schema(i + 1, e.to_string()))?;
            rows.push(row);
        }
        Ok(Self { rows })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub breakdown: RewardBreakdown,
    pub done: bool,
    pub matched: bool,
}

/// Episode plus observation encoding and a trace of every step.
pub struct GuiEnv {
    encoder: Arc<StateEncoder>,
    cfg: EnvConfig,
    episode: Option<Episode>,
    trace: Trace,
}

impl GuiEnv {
    pub fn new(encoder: Arc<StateEncoder>, cfg: EnvConfig) -> Self {
        Self {
            encoder,
            cfg,
            episode: None,
            trace: Trace::default(),
        }
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn encoder(&self) -> &StateEncoder {
        &self.encoder
    }

    pub fn reset(&mut self, task: &Task) -> Observation {
        let ep = Episode::new(task, &self.cfg);
        let obs = self.observe(&ep);
        self.episode = Some(ep);
        self.trace = Trace::default();
        obs
    }

    fn observe(&self, ep: &Episode) -> Observation {
        self.encoder
            .build_observation(ep.task(), ep.state(), self.cfg.max_steps)
    }

    pub fn episode(&self) -> Option<&Episode> {
        self.episode.as_ref()
    }

    pub fn state(&self) -> Option<&EnvState> {
        self.episode.as_ref().map(Episode::state)
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn step(&mut self, action: Action) -> Result<StepOutcome> {
        let ep = self.episode.as_mut().ok_or(Error::StepAfterDone)?;
        let tr = ep.step(action)?;
        self.trace.rows.push(TraceRow {
            step: ep.state().step,
            action,
            matched: tr.matched,
            breakdown: tr.breakdown,
            progress: ep.state().progress,
        });
        let ep = self.episode.as_ref().expect("episode present");
        Ok(StepOutcome {
            observation: self.observe(ep),
            reward: tr.breakdown.total,
            breakdown: tr.breakdown,
            done: tr.done,
            matched: tr.matched,
        })
    }
}
