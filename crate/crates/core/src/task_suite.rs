//! Tasks, suites, the suite file format and the replay validator.
//!
//! Suite files hold one record per task, separated by blank lines:
//!
//! ```text
//! task 0
//! desc open the menu and stop
//! act mouse:0:0:left_press
//! act meta:stop
//! ```

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::action_space::{Action, ActionRegistry, NUM_ACTIONS};
use crate::environment::{Episode, EnvConfig};
use crate::error::{Error, Result};

/// Sequences at least this long are hard.
pub const HARD_LENGTH: usize = 8;
pub const MIN_TASK_LENGTH: usize = 2;
pub const SIMPLE_LENGTHS: (usize, usize) = (2, 7);
pub const HARD_LENGTHS: (usize, usize) = (8, 20);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Difficulty {
    Simple,
    Hard,
}

impl Difficulty {
    pub fn for_length(len: usize) -> Self {
        if len < HARD_LENGTH {
            Difficulty::Simple
        } else {
            Difficulty::Hard
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Difficulty::Simple => "simple",
            Difficulty::Hard => "hard",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "simple" => Some(Difficulty::Simple),
            "hard" => Some(Difficulty::Hard),
            _ => None,
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Task {
    id: u32,
    description: String,
    actions: Vec<Action>,
}

impl Task {
    /// Builds a task; the sequence must have at least two actions and end with `meta:stop`.
    pub fn new(id: u32, description: impl Into<String>, actions: Vec<Action>) -> Result<Self> {
        if actions.len() < MIN_TASK_LENGTH {
            return Err(Error::InvalidTask {
                task: id,
                issues: format!("{} action(s), need at least {MIN_TASK_LENGTH}", actions.len()),
            });
        }
        if !actions.last().is_some_and(Action::is_stop) {
            return Err(Error::InvalidTask {
                task: id,
                issues: "no terminal stop".into(),
            });
        }
        Ok(Self {
            id,
            description: description.into(),
            actions,
        })
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn difficulty(&self) -> Difficulty {
        classify_difficulty(self)
    }
}

pub fn classify_difficulty(task: &Task) -> Difficulty {
    Difficulty::for_length(task.len())
}

/// A task as written in a file, before any action is parsed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaskDraft {
    pub id: u32,
    pub description: String,
    pub steps: Vec<String>,
    /// Line of the `task` header.
    pub line: usize,
    /// Line of each `act` entry.
    pub step_lines: Vec<usize>,
}

impl TaskDraft {
    pub fn from_task(task: &Task, registry: &ActionRegistry) -> Self {
        Self {
            id: task.id,
            description: task.description.clone(),
            steps: task.actions.iter().map(|a| registry.format_action(a)).collect(),
            line: 0,
            step_lines: vec![0; task.len()],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Issue {
    /// Zero-based step index, when the issue belongs to one step.
    pub step: Option<usize>,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.step {
            Some(s) => write!(f, "step {s}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidationReport {
    pub task_id: u32,
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Checks a draft: every step parses, the sequence ends with `meta:stop`, and a
/// verbatim replay through a fresh episode succeeds.
pub fn validate_task(draft: &TaskDraft, registry: &ActionRegistry) -> ValidationReport {
    let mut issues = Vec::new();
    let mut actions = Vec::with_capacity(draft.steps.len());
    for (i, text) in draft.steps.iter().enumerate() {
        match registry.parse_action(text) {
            Ok(a) => actions.push(a),
            Err(e) => issues.push(Issue {
                step: Some(i),
                message: format!("{text:?}: {e}"),
            }),
        }
    }
    if draft.steps.is_empty() {
        issues.push(Issue { step: None, message: "no actions".into() });
    } else if draft.steps.len() < MIN_TASK_LENGTH {
        issues.push(Issue {
            step: None,
            message: format!("fewer than {MIN_TASK_LENGTH} actions"),
        });
    }
    if !draft.steps.is_empty() && draft.steps.last().map(String::as_str) != Some("meta:stop") {
        issues.push(Issue { step: None, message: "no terminal stop".into() });
    }
    if issues.is_empty() {
        match Task::new(draft.id, draft.description.clone(), actions) {
            Ok(task) => {
                if let Err(msg) = replay(&task) {
                    issues.push(Issue { step: None, message: msg });
                }
            }
            Err(e) => issues.push(Issue { step: None, message: e.to_string() }),
        }
    }
    ValidationReport {
        task_id: draft.id,
        issues,
    }
}

fn replay(task: &Task) -> std::result::Result<(), String> {
    let cfg = EnvConfig::default();
    let mut ep = Episode::new(task, &cfg);
    for (i, a) in task.actions().iter().enumerate() {
        if ep.state().done {
            return Err(format!("replay ended early before step {i}"));
        }
        ep.step(*a).map_err(|e| e.to_string())?;
    }
    let st = ep.state();
    if st.done && st.progress == task.len() && ep.is_success().unwrap_or(false) {
        Ok(())
    } else {
        Err(format!(
            "replay did not succeed (progress {}/{}, termination {:?})",
            st.progress,
            task.len(),
            st.termination
        ))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct TaskSuite {
    tasks: Vec<Task>,
}

impl TaskSuite {
    /// Ids must be unique and contiguous from zero, in order.
    pub fn new(tasks: Vec<Task>) -> Result<Self> {
        for (i, t) in tasks.iter().enumerate() {
            if t.id as usize != i {
                return Err(Error::Config(format!(
                    "task ids must be contiguous from 0; position {i} has id {}",
                    t.id
                )));
            }
        }
        Ok(Self { tasks })
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn get(&self, id: u32) -> Option<&Task> {
        self.tasks.get(id as usize)
    }

    pub fn n_simple(&self) -> usize {
        self.count(Difficulty::Simple)
    }

    pub fn n_hard(&self) -> usize {
        self.count(Difficulty::Hard)
    }

    fn count(&self, d: Difficulty) -> usize {
        self.tasks.iter().filter(|t| t.difficulty() == d).count()
    }

    pub fn ids_with(&self, d: Difficulty) -> Vec<u32> {
        self.tasks
            .iter()
            .filter(|t| t.difficulty() == d)
            .map(|t| t.id)
            .collect()
    }

    pub fn to_file_string(&self, registry: &ActionRegistry) -> String {
        let mut out = String::new();
        for (i, t) in self.tasks.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            out.push_str(&format!("task {}\ndesc {}\n", t.id, t.description));
            for a in &t.actions {
                out.push_str("act ");
                out.push_str(&registry.format_action(a));
                out.push('\n');
            }
        }
        out
    }

    /// Strict parse: any structural or task-invariant violation is a schema error.
    pub fn parse(text: &str, registry: &ActionRegistry) -> Result<Self> {
        let drafts = parse_suite_drafts(text)?;
        Self::from_drafts(&drafts, registry)
    }

    pub fn from_drafts(drafts: &[TaskDraft], registry: &ActionRegistry) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut tasks = Vec::with_capacity(drafts.len());
        for (pos, d) in drafts.iter().enumerate() {
            if !seen.insert(d.id) {
                return Err(Error::schema(d.line, format!("duplicate task id {}", d.id)));
            }
            if d.id as usize != pos {
                return Err(Error::schema(
                    d.line,
                    format!("task id {} out of order (expected {pos})", d.id),
                ));
            }
            if d.steps.len() < MIN_TASK_LENGTH {
                return Err(Error::schema(
                    d.line,
                    format!("task {} has {} action(s), need at least {MIN_TASK_LENGTH}", d.id, d.steps.len()),
                ));
            }
            let mut actions = Vec::with_capacity(d.steps.len());
            for (text, &line) in d.steps.iter().zip(&d.step_lines) {
                let a = registry
                    .parse_action(text)
                    .map_err(|e| Error::schema(line, e.to_string()))?;
                actions.push(a);
            }
            let task = Task::new(d.id, d.description.clone(), actions)
                .map_err(|e| Error::schema(d.line, e.to_string()))?;
            tasks.push(task);
        }
        Ok(Self { tasks })
    }
}

/// Structural parse of a suite file. Action strings are kept as text.
pub fn parse_suite_drafts(text: &str) -> Result<Vec<TaskDraft>> {
    let mut drafts: Vec<TaskDraft> = Vec::new();
    let mut open = false;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            open = false;
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let (keyword, rest) = line.split_once(' ').unwrap_or((line, ""));
        match keyword {
            "task" => {
                if open {
                    return Err(Error::schema(line_no, "missing blank line before task record"));
                }
                let id: u32 = rest
                    .trim()
                    .parse()
                    .map_err(|_| Error::schema(line_no, format!("invalid task id {rest:?}")))?;
                drafts.push(TaskDraft {
                    id,
                    description: String::new(),
                    steps: Vec::new(),
                    line: line_no,
                    step_lines: Vec::new(),
                });
                open = true;
            }
            "desc" | "act" if !open => {
                return Err(Error::schema(line_no, format!("{keyword} outside a task record")));
            }
            "desc" => {
                let d = drafts.last_mut().expect("open record");
                if !d.steps.is_empty() || !d.description.is_empty() {
                    return Err(Error::schema(line_no, "desc must directly follow the task line"));
                }
                d.description = rest.to_string();
            }
            "act" => {
                let d = drafts.last_mut().expect("open record");
                d.steps.push(rest.trim().to_string());
                d.step_lines.push(line_no);
            }
            other => return Err(Error::schema(line_no, format!("unknown keyword {other:?}"))),
        }
    }
    Ok(drafts)
}

pub fn load_suite(path: impl AsRef<Path>, registry: &ActionRegistry) -> Result<TaskSuite> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    TaskSuite::parse(&text, registry)
}

pub fn save_suite(suite: &TaskSuite, path: impl AsRef<Path>, registry: &ActionRegistry) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, suite.to_file_string(registry)).map_err(|e| Error::io(path, e))
}

/// Deterministic synthetic suite: `n_simple` tasks with lengths in [2, 7]
/// followed by `n_hard` tasks with lengths in [8, 20]. Each sequence is drawn
/// uniformly over the action space (no `meta:stop`, no immediate repeats) and
/// closed with `meta:stop`.
pub fn generate_synthetic_suite(seed: u64, n_simple: usize, n_hard: usize, registry: &ActionRegistry) -> TaskSuite {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tasks = Vec::with_capacity(n_simple + n_hard);
    let plan = std::iter::repeat(SIMPLE_LENGTHS)
        .take(n_simple)
        .chain(std::iter::repeat(HARD_LENGTHS).take(n_hard));
    for (id, (lo, hi)) in plan.enumerate() {
        let len = rng.gen_range(lo..=hi);
        let mut actions: Vec<Action> = Vec::with_capacity(len);
        while actions.len() < len - 1 {
            let a = Action::unflatten(rng.gen_range(0..NUM_ACTIONS)).expect("index in range");
            if a.is_stop() || actions.last() == Some(&a) {
                continue;
            }
            actions.push(a);
        }
        actions.push(Action::STOP);
        let description = describe(id, &actions, registry);
        tasks.push(Task::new(id as u32, description, actions).expect("generated task is valid"));
    }
    TaskSuite { tasks }
}

fn describe(id: usize, actions: &[Action], registry: &ActionRegistry) -> String {
    let steps: Vec<String> = actions.iter().map(|a| registry.format_action(a)).collect();
    format!("task {id}: {}", steps.join(" then "))
}
