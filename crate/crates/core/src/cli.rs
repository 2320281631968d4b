//! Command-line front end for the `hrlgym` binary.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::action_space::ActionRegistry;
use crate::agents::checkpoint::Checkpoint;
use crate::agents::{evaluate_policy, oracle_totals, train, Agent};
use crate::config::RunConfig;
use crate::curriculum::TaskSampler;
use crate::environment::{oracle_rollout, Episode, GuiEnv, Trace, TraceRow};
use crate::error::{Error, Result};
use crate::metrics::{aggregate, load_csv, score_episode, EpisodeRecord, RecordWriter, REPORT_HEADER};
use crate::plot::render_curve;
use crate::state_encoder::StateEncoder;
use crate::task_suite::{generate_synthetic_suite, load_suite, parse_suite_drafts, save_suite, validate_task, Difficulty, TaskSuite};

pub const SEED_ENV: &str = "HRLGYM_SEED";

#[derive(Parser, Debug)]
#[command(name = "hrlgym", version, about = "Hierarchical RL gym for scripted GUI tasks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a synthetic task suite.
    Generate {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 90)]
        simple: usize,
        #[arg(long, default_value_t = 45)]
        hard: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Check every task of a suite file; exit 1 if any is invalid.
    Validate { suite: PathBuf },
    /// Train an agent and write checkpoint, per-episode CSV and eval rows.
    Train(TrainArgs),
    /// Greedy evaluation of a checkpoint, or of the ground-truth scripts.
    Eval(EvalArgs),
    /// Render a training CSV as an SVG learning curve.
    Plot {
        csv: PathBuf,
        #[arg(long, default_value_t = 100)]
        window: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Replay every ground-truth script and print its reward.
    Oracle {
        #[command(flatten)]
        source: SuiteArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Default)]
pub struct SuiteArgs {
    /// Suite file; a synthetic suite is generated when absent.
    #[arg(long)]
    pub suite: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `key=value` override; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub source: SuiteArgs,
    #[arg(long)]
    pub algo: Option<String>,
    #[arg(long)]
    pub structure: Option<String>,
    /// Total episodes; a resumed run continues up to this count.
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub eval_interval: Option<usize>,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub source: SuiteArgs,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Score the ground-truth scripts instead of a policy.
    #[arg(long)]
    pub oracle: bool,
    /// all, simple or hard.
    #[arg(long, default_value = "all")]
    pub split: String,
    /// Report CSV path.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Per-episode CSV path.
    #[arg(long)]
    pub episodes_csv: Option<PathBuf>,
}

/// Exit status for an error: 2 for usage, configuration and IO problems,
/// 1 for failures inside a well-formed run.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. }
        | Error::Config(_)
        | Error::Schema { .. }
        | Error::Parse(_)
        | Error::Csv { .. }
        | Error::Checkpoint(_) => 2,
        _ => 1,
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    match run(cli.command, &mut stdout.lock()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Runs one command, writing its report to `out`. Returns the exit status
/// for outcomes that are not errors, such as a suite with invalid tasks.
pub fn run(command: Command, out: &mut dyn Write) -> Result<u8> {
    match command {
        Command::Generate { seed, simple, hard, output } => cmd_generate(seed, simple, hard, &output, out),
        Command::Validate { suite } => cmd_validate(&suite, out),
        Command::Train(args) => cmd_train(&args, out),
        Command::Eval(args) => cmd_eval(&args, out),
        Command::Plot { csv, window, output } => cmd_plot(&csv, window, &output, out),
        Command::Oracle { source, output } => cmd_oracle(&source, output.as_deref(), out),
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

fn say(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(io(Path::new("<stdout>")))
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{SEED_ENV}: cannot parse {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn cmd_generate(seed: Option<u64>, simple: usize, hard: usize, output: &Path, out: &mut dyn Write) -> Result<u8> {
    let seed = match seed {
        Some(s) => s,
        None => env_seed()?.unwrap_or(0),
    };
    if hard == 0 {
        eprintln!("warning: --hard 0 gives a suite with only simple tasks");
    }
    let reg = ActionRegistry::builtin();
    let suite = generate_synthetic_suite(seed, simple, hard, &reg);
    save_suite(&suite, output, &reg)?;
    say(out, &format!("wrote {} tasks ({} simple, {} hard) to {}\n", suite.len(), suite.n_simple(), suite.n_hard(), output.display()))?;
    Ok(0)
}

fn cmd_validate(path: &Path, out: &mut dyn Write) -> Result<u8> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    let reg = ActionRegistry::builtin();
    let drafts = parse_suite_drafts(&text)?;
    let mut bad = 0;
    for d in &drafts {
        let report = validate_task(d, &reg);
        for issue in &report.issues {
            let line = issue.step.and_then(|s| d.step_lines.get(s).copied()).unwrap_or(d.line);
            say(out, &format!("task {} (line {line}): {issue}\n", report.task_id))?;
        }
        if !report.is_valid() {
            bad += 1;
        }
    }
    say(out, &format!("{} tasks, {} invalid\n", drafts.len(), bad))?;
    Ok(if bad == 0 { 0 } else { 1 })
}

/// Defaults, then the seed environment variable, then `base` (a config file
/// or checkpoint), then flags.
fn resolve_config(source: &SuiteArgs, base: Option<&str>, flags: &[(&str, String)]) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(seed) = env_seed()? {
        cfg.seed = seed;
    }
    if let Some(text) = base {
        cfg.apply_text(text)?;
    }
    if let Some(path) = &source.config {
        let text = fs::read_to_string(path).map_err(io(path))?;
        cfg.apply_text(&text)?;
    }
    let mut pairs: Vec<(String, String)> = Vec::new();
    for s in &source.set {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {s:?}")))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    if let Some(p) = &source.suite {
        pairs.push(("suite.path".into(), p.display().to_string()));
    }
    if let Some(s) = source.seed {
        pairs.push(("run.seed".into(), s.to_string()));
    }
    for (k, v) in flags {
        pairs.push((k.to_string(), v.clone()));
    }
    cfg.apply(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
    cfg.validate()?;
    Ok(cfg)
}

fn build_suite(cfg: &RunConfig, reg: &ActionRegistry) -> Result<TaskSuite> {
    match &cfg.suite.path {
        Some(p) => load_suite(p, reg),
        None => Ok(generate_synthetic_suite(cfg.seed, cfg.suite.simple, cfg.suite.hard, reg)),
    }
}

fn build_env(cfg: &RunConfig, suite: &TaskSuite) -> Result<GuiEnv> {
    let enc = StateEncoder::fit(suite, cfg.encoder())?;
    Ok(GuiEnv::new(Arc::new(enc), cfg.env.clone()))
}

fn fresh_agent(cfg: &RunConfig, suite: &TaskSuite) -> Result<Agent> {
    Agent::new(cfg.agent.clone(), cfg.embed_dim, cfg.state_size, suite.len(), cfg.seed)
}

/// Agent rebuilt from a checkpoint after checking it fits `cfg` and `suite`.
fn restored_agent(cfg: &RunConfig, suite: &TaskSuite, ckpt: &Checkpoint) -> Result<Agent> {
    let fresh = fresh_agent(cfg, suite)?;
    if fresh.policy().spec() != &ckpt.spec {
        return Err(Error::Checkpoint("network shape does not match the configured run".into()));
    }
    let mut agent = Agent::with_policy(cfg.agent.clone(), ckpt.to_policy()?, cfg.seed);
    agent.set_counters(ckpt.episodes, ckpt.env_steps);
    Ok(agent)
}

fn eval_rows(records: &[EpisodeRecord], episode: u64, w: &mut csv::Writer<fs::File>) -> Result<()> {
    let report = aggregate(records)?;
    let err = |e: csv::Error| Error::Csv { row: 0, message: e.to_string() };
    for (name, g) in report.rows() {
        w.write_record([
            episode.to_string(),
            name.to_string(),
            g.episodes.to_string(),
            g.tp.to_string(),
            g.fp.to_string(),
            g.fn_.to_string(),
            format!("{:?}", g.micro.precision),
            format!("{:?}", g.micro.recall),
            format!("{:?}", g.micro.f1),
            format!("{:?}", g.macro_avg.f1),
            format!("{:?}", g.mean_norm_reward),
            format!("{:?}", g.success_rate),
            g.np_nt.map_or_else(String::new, |x| format!("{x:?}")),
        ])
        .map_err(err)?;
    }
    Ok(())
}

fn cmd_train(args: &TrainArgs, out: &mut dyn Write) -> Result<u8> {
    let ckpt = args.resume.as_ref().map(Checkpoint::load).transpose()?;
    let mut flags: Vec<(&str, String)> = Vec::new();
    if let Some(a) = &args.algo {
        flags.push(("agent.algorithm", a.clone()));
    }
    if let Some(s) = &args.structure {
        flags.push(("agent.structure", s.clone()));
    }
    if let Some(e) = args.episodes {
        flags.push(("run.episodes", e.to_string()));
    }
    if let Some(e) = args.eval_interval {
        flags.push(("run.eval_interval", e.to_string()));
    }
    if let Some(o) = &args.out {
        flags.push(("run.out_dir", o.display().to_string()));
    }
    let cfg = resolve_config(&args.source, ckpt.as_ref().map(|c| c.config.as_str()), &flags)?;
    let reg = ActionRegistry::builtin();
    let suite = build_suite(&cfg, &reg)?;
    let mut env = build_env(&cfg, &suite)?;
    let mut sampler = TaskSampler::new(&suite, cfg.curriculum())?;
    let mut agent = match &ckpt {
        Some(c) => restored_agent(&cfg, &suite, c)?,
        None => fresh_agent(&cfg, &suite)?,
    };

    let dir = &cfg.out_dir;
    fs::create_dir_all(dir).map_err(io(dir))?;
    let config_path = dir.join("config.txt");
    fs::write(&config_path, cfg.to_text()).map_err(io(&config_path))?;

    let start = agent.episodes();
    let episodes_path = dir.join("episodes.csv");
    let mut kept = Vec::new();
    if ckpt.is_some() && episodes_path.exists() {
        kept = load_csv(&episodes_path)?;
        kept.retain(|r| r.episode_index < start);
    }
    let file = fs::File::create(&episodes_path).map_err(io(&episodes_path))?;
    let mut writer = RecordWriter::new(std::io::BufWriter::new(file))?;
    for r in &kept {
        writer.write(r)?;
    }
    let eval_path = dir.join("eval.csv");
    let mut eval_csv = csv::Writer::from_writer(fs::File::create(&eval_path).map_err(io(&eval_path))?);
    let mut header = vec!["episode"];
    header.extend(REPORT_HEADER);
    eval_csv
        .write_record(&header)
        .map_err(|e| Error::Csv { row: 0, message: e.to_string() })?;

    let total = cfg.episodes as u64;
    let mut recent: Vec<f64> = kept.iter().map(|r| r.norm_reward).collect();
    while agent.episodes() < total {
        let done = agent.episodes();
        let chunk = match cfg.eval_interval {
            0 => total - done,
            k => (k as u64 - done % k as u64).min(total - done),
        };
        let outcome = train(&suite, &mut env, &mut sampler, &mut agent, chunk as usize, cfg.seed, &mut |rec, _| writer.write(rec))?;
        recent.extend(outcome.records.iter().map(|r| r.norm_reward));
        if cfg.eval_interval > 0 && agent.episodes() % cfg.eval_interval as u64 == 0 {
            let records = evaluate_policy(&suite, &mut env, &mut agent)?;
            eval_rows(&records, agent.episodes(), &mut eval_csv)?;
        }
    }
    writer.flush()?;
    eval_csv.flush().map_err(io(&eval_path))?;

    let ckpt_path = dir.join("checkpoint.bin");
    Checkpoint::capture(agent.policy(), &cfg.to_text(), agent.episodes(), agent.env_steps()).save(&ckpt_path)?;
    let tail = &recent[recent.len().saturating_sub(100)..];
    let mean = if tail.is_empty() { 0.0 } else { tail.iter().sum::<f64>() / tail.len() as f64 };
    say(
        out,
        &format!(
            "trained {} episodes ({} env steps); last-100 mean normalized reward {mean:.4}\nwrote {}\n",
            agent.episodes(),
            agent.env_steps(),
            dir.display()
        ),
    )?;
    Ok(0)
}

fn split_filter(split: &str) -> Result<Option<Difficulty>> {
    match split {
        "all" => Ok(None),
        other => Difficulty::from_name(other)
            .map(Some)
            .ok_or_else(|| Error::Config(format!("--split must be all, simple or hard, got {other:?}"))),
    }
}

/// Ground-truth replays scored like policy episodes. No observations are
/// built, so no encoder is fitted.
fn oracle_records(suite: &TaskSuite, cfg: &RunConfig) -> Result<Vec<EpisodeRecord>> {
    let totals = oracle_totals(suite, &cfg.env)?;
    let mut out = Vec::with_capacity(suite.len());
    for (i, task) in suite.tasks().iter().enumerate() {
        let mut ep = Episode::new(task, &cfg.env);
        let mut trace = Trace::default();
        for &action in task.actions() {
            let tr = ep.step(action)?;
            trace.rows.push(TraceRow {
                step: ep.state().step,
                action,
                matched: tr.matched,
                breakdown: tr.breakdown,
                progress: ep.state().progress,
            });
            if tr.done {
                break;
            }
        }
        let mut rec = score_episode(&trace, task, totals[i], &cfg.env)?;
        rec.episode_index = i as u64;
        out.push(rec);
    }
    Ok(out)
}

fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> Result<u8> {
    let split = split_filter(&args.split)?;
    let ckpt = match (&args.checkpoint, args.oracle) {
        (Some(p), false) => Some(Checkpoint::load(p)?),
        (_, true) => None,
        (None, false) => return Err(Error::Config("eval needs --checkpoint or --oracle".into())),
    };
    let cfg = resolve_config(&args.source, ckpt.as_ref().map(|c| c.config.as_str()), &[])?;
    let reg = ActionRegistry::builtin();
    let full = build_suite(&cfg, &reg)?;
    let mut records = match &ckpt {
        Some(c) => {
            let mut agent = restored_agent(&cfg, &full, c)?;
            let mut env = build_env(&cfg, &full)?;
            evaluate_policy(&full, &mut env, &mut agent)?
        }
        None => oracle_records(&full, &cfg)?,
    };
    if let Some(d) = split {
        records.retain(|r| r.difficulty == d);
    }
    let report = aggregate(&records)?;
    say(out, &report.to_table())?;
    if let Some(p) = &args.output {
        let f = fs::File::create(p).map_err(io(p))?;
        report.write_csv(f)?;
    }
    if let Some(p) = &args.episodes_csv {
        crate::metrics::export_csv(&records, p)?;
    }
    Ok(0)
}

fn cmd_plot(csv: &Path, window: usize, output: &Path, out: &mut dyn Write) -> Result<u8> {
    let records = load_csv(csv)?;
    let episodes: Vec<u64> = records.iter().map(|r| r.episode_index).collect();
    let values: Vec<f64> = records.iter().map(|r| r.norm_reward).collect();
    let title = format!("normalized reward: {}", csv.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned()));
    let svg = render_curve(&episodes, &values, window, &title)?;
    fs::write(output, svg).map_err(io(output))?;
    say(out, &format!("plotted {} episodes to {}\n", records.len(), output.display()))?;
    Ok(0)
}

fn cmd_oracle(source: &SuiteArgs, output: Option<&Path>, out: &mut dyn Write) -> Result<u8> {
    let cfg = resolve_config(source, None, &[])?;
    let reg = ActionRegistry::builtin();
    let suite = build_suite(&cfg, &reg)?;
    let mut text = String::from("task_id,difficulty,steps,total_reward\n");
    for task in suite.tasks() {
        let o = oracle_rollout(task, &cfg.env)?;
        text.push_str(&format!("{},{},{},{:?}\n", task.id(), task.difficulty().as_str(), o.steps, o.total_reward));
    }
    match output {
        Some(p) => {
            fs::write(p, &text).map_err(io(p))?;
            say(out, &format!("wrote oracle rewards for {} tasks to {}\n", suite.len(), p.display()))?;
        }
        None => say(out, &text)?,
    }
    Ok(0)
}
