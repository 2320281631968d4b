use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &[&str] = &[
    "--set",
    "suite.simple=3",
    "--set",
    "suite.hard=1",
    "--set",
    "encoder.embed_dim=0",
    "--set",
    "agent.vision_hidden=8",
    "--set",
    "agent.trunk=8",
    "--set",
    "agent.batch_size=4",
];

fn hrlgym(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hrlgym"))
        .current_dir(dir)
        .env_remove("HRLGYM_SEED")
        .args(args)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn csv_rows(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn validate_reports_the_broken_step() {
    let dir = tempfile::tempdir().unwrap();
    let ok = hrlgym(dir.path(), &["generate", "--seed", "1", "--simple", "2", "--hard", "1", "-o", "s.txt"]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(hrlgym(dir.path(), &["validate", "s.txt"]).status.code(), Some(0));

    let text = fs::read_to_string(dir.path().join("s.txt")).unwrap();
    let first_act = text.lines().position(|l| l.starts_with("act ")).unwrap();
    let broken: Vec<String> = text
        .lines()
        .enumerate()
        .map(|(i, l)| if i == first_act { "act mouse:4:9:left_press".to_string() } else { l.to_string() })
        .collect();
    fs::write(dir.path().join("bad.txt"), broken.join("\n") + "\n").unwrap();
    let out = hrlgym(dir.path(), &["validate", "bad.txt"]);
    assert_eq!(out.status.code(), Some(1));
    let report = stdout(&out);
    assert!(report.contains("task 0"), "{report}");
    assert!(report.contains(&format!("line {}", first_act + 1)), "{report}");
    assert!(report.contains("step 0"), "{report}");
}

#[test]
fn missing_inputs_exit_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["validate", "nope.txt"][..],
        &["plot", "nope.csv", "-o", "p.svg"],
        &["train", "--suite", "nope.txt", "--episodes", "1", "-o", "r"],
        &["train", "--config", "nope.cfg", "--episodes", "1", "-o", "r"],
    ] {
        let out = hrlgym(dir.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", stderr(&out));
        assert!(stderr(&out).contains("nope"), "{args:?}");
    }
}

#[test]
fn bad_overrides_and_flags_exit_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["train", "--set", "no.such.key=1", "-o", "r"][..],
        &["train", "--set", "agent.gamma", "-o", "r"],
        &["train", "--algo", "sarsa", "-o", "r"],
        &["frobnicate"],
    ] {
        assert_eq!(hrlgym(dir.path(), args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn hard_zero_warns() {
    let dir = tempfile::tempdir().unwrap();
    let out = hrlgym(dir.path(), &["generate", "--seed", "2", "--simple", "3", "--hard", "0", "-o", "s.txt"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stderr(&out).contains("warning"), "{}", stderr(&out));
}

#[test]
fn train_writes_one_row_per_episode_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["train", "--seed", "4", "--episodes", "7", "--eval-interval", "5", "-o", "run"];
    args.extend_from_slice(SMALL);
    let out = hrlgym(dir.path(), &args);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let run = dir.path().join("run");
    assert_eq!(csv_rows(&run.join("episodes.csv")), 7);
    for f in ["checkpoint.bin", "config.txt", "eval.csv"] {
        assert!(run.join(f).exists(), "{f}");
    }

    let out = hrlgym(dir.path(), &["train", "--resume", "run/checkpoint.bin", "--episodes", "12", "-o", "run"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = fs::read_to_string(run.join("episodes.csv")).unwrap();
    let indices: Vec<u64> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(indices, (0..12).collect::<Vec<_>>());
}

#[test]
fn eval_of_missing_or_corrupt_checkpoint_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = hrlgym(dir.path(), &["eval", "--checkpoint", "missing.bin"]);
    assert_eq!(out.status.code(), Some(2));
    fs::write(dir.path().join("junk.bin"), b"not a checkpoint").unwrap();
    let out = hrlgym(dir.path(), &["eval", "--checkpoint", "junk.bin"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("error"));
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let run = |env_seed: Option<&str>, flag: Option<&str>, name: &str| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_hrlgym"));
        cmd.current_dir(dir.path()).env_remove("HRLGYM_SEED").args(["generate", "--simple", "3", "--hard", "1", "-o", name]);
        if let Some(s) = env_seed {
            cmd.env("HRLGYM_SEED", s);
        }
        if let Some(s) = flag {
            cmd.args(["--seed", s]);
        }
        assert!(cmd.output().unwrap().status.success());
        fs::read_to_string(dir.path().join(name)).unwrap()
    };
    let by_flag = run(None, Some("17"), "a.txt");
    let by_env = run(Some("17"), None, "b.txt");
    let flag_wins = run(Some("99"), Some("17"), "c.txt");
    let other = run(Some("18"), None, "d.txt");
    assert_eq!(by_flag, by_env);
    assert_eq!(by_flag, flag_wins);
    assert_ne!(by_flag, other);
}

#[test]
fn malformed_training_csv_names_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["train", "--seed", "5", "--episodes", "4", "-o", "run"];
    args.extend_from_slice(SMALL);
    assert_eq!(hrlgym(dir.path(), &args).status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("run/episodes.csv")).unwrap();
    let mut lines: Vec<String> = csv.lines().map(str::to_string).collect();
    lines[3] = lines[3].replacen(',', ",oops,", 1);
    fs::write(dir.path().join("bad.csv"), lines.join("\n") + "\n").unwrap();

    let out = hrlgym(dir.path(), &["plot", "bad.csv", "--window", "2", "-o", "p.svg"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("row 4"), "{}", stderr(&out));

    let out = hrlgym(dir.path(), &["plot", "run/episodes.csv", "--window", "2", "-o", "p.svg"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(fs::read_to_string(dir.path().join("p.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn oracle_eval_scores_every_task_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let out = hrlgym(dir.path(), &["eval", "--oracle", "--seed", "6", "--set", "suite.simple=4", "--set", "suite.hard=2"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let overall = stdout(&out).lines().find(|l| l.starts_with("overall")).unwrap().to_string();
    let fields: Vec<&str> = overall.split_whitespace().collect();
    assert_eq!(fields[1], "6");
    assert!(fields[2..].iter().all(|v| *v == "1.0000"), "{overall}");
    let out = hrlgym(dir.path(), &["oracle", "--seed", "6", "--set", "suite.simple=4", "--set", "suite.hard=2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.starts_with("task_id,difficulty,steps,total_reward"));
    assert_eq!(text.lines().count(), 7);
}
