//! Episode scoring over issued GUI actions and aggregate reports.
//!
//! Every issued action is a true positive if it matched the next ground-truth
//! action and a false positive otherwise; ground-truth actions never matched
//! are false negatives.

use std::io::{Read, Write};
use std::path::Path;

use crate::environment::{EnvConfig, Termination, Trace};
use crate::error::{Error, Result};
use crate::reward_engine::normalized_reward;
use crate::task_suite::{Difficulty, Task};

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRecord {
    pub episode_index: u64,
    pub task_id: u32,
    pub difficulty: Difficulty,
    pub steps: u32,
    /// Actions issued.
    pub np: u32,
    pub tp: u32,
    pub fp: u32,
    pub fn_: u32,
    pub reward: f64,
    pub norm_reward: f64,
    pub success: bool,
    pub termination: Termination,
}

impl EpisodeRecord {
    pub fn scores(&self) -> Scores {
        precision_recall_f1(self.tp, self.fp, self.fn_)
    }

    /// Ground-truth length.
    pub fn length(&self) -> u32 {
        self.tp + self.fn_
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Zero denominators give zero.
pub fn precision_recall_f1(tp: u32, fp: u32, fn_: u32) -> Scores {
    scores_from(f64::from(tp), f64::from(fp), f64::from(fn_))
}

fn scores_from(tp: f64, fp: f64, fn_: f64) -> Scores {
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    Scores {
        precision,
        recall,
        f1: ratio(2.0 * precision * recall, precision + recall),
    }
}

pub fn score_episode(
    trace: &Trace,
    task: &Task,
    oracle_total: f64,
    cfg: &EnvConfig,
) -> Result<EpisodeRecord> {
    let termination = trace.termination(cfg).ok_or(Error::IncompleteTrace)?;
    let np = trace.rows.len() as u32;
    let tp = trace.rows.iter().filter(|r| r.matched).count() as u32;
    let length = task.len() as u32;
    if tp > length {
        return Err(Error::Parse(format!(
            "trace matches {tp} actions but the task has {length}"
        )));
    }
    let progress = trace.rows.last().map_or(0, |r| r.progress);
    let reward = trace.total_reward();
    Ok(EpisodeRecord {
        episode_index: 0,
        task_id: task.id(),
        difficulty: task.difficulty(),
        steps: trace.rows.last().map_or(0, |r| r.step),
        np,
        tp,
        fp: np - tp,
        fn_: length - tp,
        reward,
        norm_reward: normalized_reward(reward, oracle_total)?,
        success: progress == task.len() && termination == Termination::Stopped,
        termination,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupReport {
    pub episodes: usize,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    /// Computed from summed counts.
    pub micro: Scores,
    /// Mean of per-episode scores.
    pub macro_avg: Scores,
    pub mean_norm_reward: f64,
    pub success_rate: f64,
    /// Mean issued/ground-truth ratio over successful episodes.
    pub np_nt: Option<f64>,
}

impl GroupReport {
    fn from_records<'a>(records: impl IntoIterator<Item = &'a EpisodeRecord>) -> Option<Self> {
        let records: Vec<&EpisodeRecord> = records.into_iter().collect();
        if records.is_empty() {
            return None;
        }
        let n = records.len() as f64;
        let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
        let (mut p, mut r, mut f) = (0.0, 0.0, 0.0);
        let (mut norm, mut successes) = (0.0, 0usize);
        let mut ratios = Vec::new();
        for rec in &records {
            tp += u64::from(rec.tp);
            fp += u64::from(rec.fp);
            fn_ += u64::from(rec.fn_);
            let s = rec.scores();
            p += s.precision;
            r += s.recall;
            f += s.f1;
            norm += rec.norm_reward;
            if rec.success {
                successes += 1;
                ratios.push(ratio(f64::from(rec.np), f64::from(rec.length())));
            }
        }
        Some(Self {
            episodes: records.len(),
            tp,
            fp,
            fn_,
            micro: scores_from(tp as f64, fp as f64, fn_ as f64),
            macro_avg: Scores {
                precision: p / n,
                recall: r / n,
                f1: f / n,
            },
            mean_norm_reward: norm / n,
            success_rate: successes as f64 / n,
            np_nt: (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateReport {
    pub overall: GroupReport,
    pub simple: Option<GroupReport>,
    pub hard: Option<GroupReport>,
}

pub fn aggregate(records: &[EpisodeRecord]) -> Result<AggregateReport> {
    let overall = GroupReport::from_records(records).ok_or(Error::EmptyInput)?;
    let by = |d: Difficulty| GroupReport::from_records(records.iter().filter(|r| r.difficulty == d));
    Ok(AggregateReport {
        overall,
        simple: by(Difficulty::Simple),
        hard: by(Difficulty::Hard),
    })
}

pub const REPORT_HEADER: [&str; 12] = [
    "split",
    "episodes",
    "tp",
    "fp",
    "fn",
    "precision",
    "recall",
    "f1",
    "macro_f1",
    "norm_reward",
    "success_rate",
    "np_nt",
];

impl AggregateReport {
    pub fn rows(&self) -> Vec<(&'static str, &GroupReport)> {
        let mut out = vec![("overall", &self.overall)];
        if let Some(s) = &self.simple {
            out.push(("simple", s));
        }
        if let Some(h) = &self.hard {
            out.push(("hard", h));
        }
        out
    }

    /// Fixed-width table for terminals.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<8} {:>8} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}\n",
            "split", "episodes", "precision", "recall", "f1", "norm_rew", "success", "np/nt"
        );
        for (name, g) in self.rows() {
            let np_nt = g.np_nt.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"));
            out.push_str(&format!(
                "{:<8} {:>8} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9}\n",
                name,
                g.episodes,
                g.micro.precision,
                g.micro.recall,
                g.micro.f1,
                g.mean_norm_reward,
                g.success_rate,
                np_nt
            ));
        }
        out
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Csv { row: 0, message: e.to_string() };
        w.write_record(REPORT_HEADER).map_err(err)?;
        for (name, g) in self.rows() {
            w.write_record([
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
        w.flush().map_err(|e| Error::Csv { row: 0, message: e.to_string() })
    }
}

pub const CSV_HEADER: [&str; 15] = [
    "episode_index",
    "task_id",
    "difficulty",
    "steps",
    "np",
    "tp",
    "fp",
    "fn",
    "precision",
    "recall",
    "f1",
    "reward",
    "norm_reward",
    "success",
    "termination",
];

fn record_fields(r: &EpisodeRecord) -> [String; 15] {
    let s = r.scores();
    [
        r.episode_index.to_string(),
        r.task_id.to_string(),
        r.difficulty.as_str().to_string(),
        r.steps.to_string(),
        r.np.to_string(),
        r.tp.to_string(),
        r.fp.to_string(),
        r.fn_.to_string(),
        format!("{:?}", s.precision),
        format!("{:?}", s.recall),
        format!("{:?}", s.f1),
        format!("{:?}", r.reward),
        format!("{:?}", r.norm_reward),
        u8::from(r.success).to_string(),
        r.termination.as_str().to_string(),
    ]
}

/// Streams records as CSV rows; the header is written on construction.
pub struct RecordWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> RecordWriter<W> {
    pub fn new(out: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        inner
            .write_record(CSV_HEADER)
            .map_err(|e| Error::Csv { row: 0, message: e.to_string() })?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, r: &EpisodeRecord) -> Result<()> {
        self.inner
            .write_record(record_fields(r))
            .map_err(|e| Error::Csv { row: r.episode_index as usize + 1, message: e.to_string() })
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner
            .flush()
            .map_err(|e| Error::Csv { row: 0, message: e.to_string() })
    }
}

pub fn write_records<W: Write>(records: &[EpisodeRecord], out: W) -> Result<()> {
    let mut w = RecordWriter::new(out)?;
    for r in records {
        w.write(r)?;
    }
    w.flush()
}

pub fn export_csv(records: &[EpisodeRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_records(records, std::io::BufWriter::new(file))
}

/// Parses records written by [`write_records`]. Row numbers in errors are
/// 1-based file lines.
pub fn read_records<R: Read>(input: R) -> Result<Vec<EpisodeRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 1;
        let row = row.map_err(|e| Error::Csv { row: line, message: e.to_string() })?;
        if i == 0 {
            if row.iter().ne(CSV_HEADER.iter().copied()) {
                return Err(Error::Csv { row: 1, message: "unexpected header".into() });
            }
            continue;
        }
        out.push(parse_row(&row).map_err(|message| Error::Csv { row: line, message })?);
    }
    Ok(out)
}

fn parse_row(row: &csv::StringRecord) -> std::result::Result<EpisodeRecord, String> {
    if row.len() != CSV_HEADER.len() {
        return Err(format!("expected {} fields, found {}", CSV_HEADER.len(), row.len()));
    }
    fn int<T: std::str::FromStr>(s: &str, name: &str) -> std::result::Result<T, String> {
        s.parse().map_err(|_| format!("invalid {name} {s:?}"))
    }
    fn real(s: &str, name: &str) -> std::result::Result<f64, String> {
        s.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| format!("invalid {name} {s:?}"))
    }
    let rec = EpisodeRecord {
        episode_index: int(&row[0], "episode_index")?,
        task_id: int(&row[1], "task_id")?,
        difficulty: Difficulty::from_name(&row[2]).ok_or_else(|| format!("invalid difficulty {:?}", &row[2]))?,
        steps: int(&row[3], "steps")?,
        np: int(&row[4], "np")?,
        tp: int(&row[5], "tp")?,
        fp: int(&row[6], "fp")?,
        fn_: int(&row[7], "fn")?,
        reward: real(&row[11], "reward")?,
        norm_reward: real(&row[12], "norm_reward")?,
        success: match &row[13] {
            "0" => false,
            "1" => true,
            other => return Err(format!("invalid success {other:?}")),
        },
        termination: Termination::from_name(&row[14])
            .ok_or_else(|| format!("invalid termination {:?}", &row[14]))?,
    };
    for (i, name) in [(8, "precision"), (9, "recall"), (10, "f1")] {
        real(&row[i], name)?;
    }
    if rec.tp.checked_add(rec.fp) != Some(rec.np) {
        return Err("tp + fp must equal np".into());
    }
    Ok(rec)
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Vec<EpisodeRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_records(file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action_space::{Action, ActionRegistry, KeyIndex};
    use crate::environment::{oracle_rollout, GuiEnv};
    use crate::state_encoder::{EncoderConfig, StateEncoder};
    use crate::task_suite::generate_synthetic_suite;
    use std::sync::Arc;

    fn rec(tp: u32, fp: u32, fn_: u32, d: Difficulty, success: bool) -> EpisodeRecord {
        EpisodeRecord {
            episode_index: 0,
            task_id: 0,
            difficulty: d,
            steps: tp + fp,
            np: tp + fp,
            tp,
            fp,
            fn_,
            reward: 1.5,
            norm_reward: 0.5,
            success,
            termination: Termination::Stopped,
        }
    }

    #[test]
    fn formula_fixtures() {
        let s = precision_recall_f1(6, 4, 2);
        assert!((s.precision - 0.6).abs() < 1e-15);
        assert!((s.recall - 0.75).abs() < 1e-15);
        assert!((s.f1 - 2.0 * 0.45 / 1.35).abs() < 1e-12);
        let s = precision_recall_f1(5, 0, 0);
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
        let s = precision_recall_f1(0, 5, 5);
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
        let s = precision_recall_f1(0, 0, 0);
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
    }

    fn run(env: &mut GuiEnv, task: &Task, actions: &[Action]) -> Trace {
        env.reset(task);
        for a in actions {
            if env.step(*a).unwrap().done {
                break;
            }
        }
        env.trace().clone()
    }

    #[test]
    fn oracle_and_partial_traces() {
        let reg = ActionRegistry::builtin();
        let suite = generate_synthetic_suite(2, 4, 2, &reg);
        let enc = Arc::new(StateEncoder::fit(&suite, EncoderConfig { embed_dim: 0, ..Default::default() }).unwrap());
        let cfg = EnvConfig::default();
        let mut env = GuiEnv::new(enc, cfg.clone());
        for task in suite.tasks() {
            let oracle = oracle_rollout(task, &cfg).unwrap();
            let trace = run(&mut env, task, task.actions());
            let r = score_episode(&trace, task, oracle.total_reward, &cfg).unwrap();
            assert_eq!((r.tp, r.fp, r.fn_), (task.len() as u32, 0, 0));
            assert_eq!(r.norm_reward, 1.0);
            assert!(r.success);
        }
        let task = &suite.tasks()[0];
        let wrong = Action::Single(KeyIndex::new(0).unwrap());
        let wrong = if task.actions()[0] == wrong { Action::WAIT } else { wrong };
        let trace = run(&mut env, task, &[wrong, Action::STOP]);
        let r = score_episode(&trace, task, 10.0, &cfg).unwrap();
        assert_eq!((r.np, r.tp, r.fp, r.fn_), (2, 0, 2, task.len() as u32));
        assert!(!r.success);
        assert_eq!(r.norm_reward, 0.0);

        let mut partial = run(&mut env, task, task.actions());
        partial.rows.pop();
        assert!(matches!(
            score_episode(&partial, task, 10.0, &cfg),
            Err(Error::IncompleteTrace)
        ));
    }

    #[test]
    fn aggregate_splits() {
        assert!(matches!(aggregate(&[]), Err(Error::EmptyInput)));
        let records = vec![
            rec(3, 1, 0, Difficulty::Simple, true),
            rec(2, 4, 6, Difficulty::Hard, false),
            rec(8, 0, 0, Difficulty::Hard, true),
        ];
        let a = aggregate(&records).unwrap();
        let (s, h) = (a.simple.as_ref().unwrap(), a.hard.as_ref().unwrap());
        assert_eq!(s.tp + h.tp, a.overall.tp);
        assert_eq!(s.fp + h.fp, a.overall.fp);
        assert_eq!(s.fn_ + h.fn_, a.overall.fn_);
        assert_eq!(s.episodes + h.episodes, 3);
        assert_eq!(a.overall.micro.precision, 13.0 / 18.0);
        assert_eq!(a.overall.micro.recall, 13.0 / 19.0);
        // successful episodes only: 4/3 and 8/8
        assert!((a.overall.np_nt.unwrap() - (4.0 / 3.0 + 1.0) / 2.0).abs() < 1e-15);
        assert!((h.success_rate - 0.5).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip() {
        let mut records = vec![
            rec(3, 1, 0, Difficulty::Simple, true),
            rec(2, 4, 6, Difficulty::Hard, false),
        ];
        records[1].reward = -123.456_789_012_345_6;
        records[1].norm_reward = 1.0 / 3.0;
        records[1].episode_index = 7;
        records[1].termination = Termination::RewardFloor;
        let mut buf = Vec::new();
        write_records(&records, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(&CSV_HEADER.join(",")));
        assert_eq!(read_records(buf.as_slice()).unwrap(), records);

        let mut empty = Vec::new();
        write_records(&[], &mut empty).unwrap();
        assert_eq!(String::from_utf8(empty.clone()).unwrap().lines().count(), 1);
        assert!(read_records(empty.as_slice()).unwrap().is_empty());

        let bad = text.replace("stopped", "exploded");
        assert!(matches!(read_records(bad.as_bytes()), Err(Error::Csv { row: 2, .. })));
    }

    #[test]
    fn report_csv_has_split_rows() {
        let a = aggregate(&[rec(1, 1, 1, Difficulty::Simple, false)]).unwrap();
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(a.to_table().contains("n/a"));
    }
}
