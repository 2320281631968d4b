use std::sync::Arc;

use hrlgym::action_space::{grid_coords, mouse_distance, Action, ActionRegistry, MouseTarget, NUM_ACTIONS};
use hrlgym::agents::checkpoint::Checkpoint;
use hrlgym::agents::policy::Structure;
use hrlgym::config::RunConfig;
use hrlgym::curriculum::{p_hard, p_simple};
use hrlgym::environment::{EnvConfig, GuiEnv, Termination};
use hrlgym::metrics::{aggregate, precision_recall_f1, read_records, score_episode, write_records, EpisodeRecord};
use hrlgym::reward_engine::{evaluate, mouse_subreward, normalized_reward, RewardConfig, StepContext};
use hrlgym::state_encoder::{EncoderConfig, StateEncoder};
use hrlgym::task_suite::{generate_synthetic_suite, Difficulty, TaskSuite};
use proptest::prelude::*;

mod common;

fn action() -> impl Strategy<Value = Action> {
    (0..NUM_ACTIONS).prop_map(|i| Action::unflatten(i).unwrap())
}

fn context() -> impl Strategy<Value = StepContext> {
    (action(), action(), 0u32..20, 0u32..20, 1u32..12, 0u32..20, 1u32..100, 2u32..21, 0u32..21).prop_map(
        |(action, target, m, s, n, c, t, h, p)| StepContext {
            action,
            target,
            manager_streak: m,
            subpolicy_streak: s,
            repeat_streak: n,
            stagnation: c,
            step: t,
            horizon: h,
            progress_after: p.min(h),
            length: h,
        },
    )
}

fn reward_config() -> impl Strategy<Value = RewardConfig> {
    (0.0..3.0f64, 0.0..10.0f64, 0.0..10.0f64, 0.5..6.0f64, any::<bool>()).prop_map(|(alpha, a, b, d_th, shaping)| RewardConfig {
        alpha,
        manager_correct_reward: a,
        subpolicy_correct_reward: b,
        distance_threshold: d_th,
        shaping_on_mismatch: shaping,
        ..RewardConfig::default()
    })
}

proptest! {
    #[test]
    fn flatten_round_trip(i in 0..NUM_ACTIONS) {
        let a = Action::unflatten(i).unwrap();
        prop_assert_eq!(a.flatten(), i);
        prop_assert_eq!(Action::from_parts(a.macro_action(), a.content_index()).unwrap(), a);
    }

    #[test]
    fn format_parse_round_trip(a in action()) {
        let reg = ActionRegistry::builtin();
        prop_assert_eq!(reg.parse_action(&reg.format_action(&a)).unwrap(), a);
    }

    #[test]
    fn grid_is_a_bijection(r1 in 0..9usize, s1 in 0..9usize, r2 in 0..9usize, s2 in 0..9usize) {
        let a = grid_coords(r1, s1).unwrap();
        let b = grid_coords(r2, s2).unwrap();
        prop_assert!(a.0 < 9 && a.1 < 9);
        prop_assert_eq!(a == b, (r1, s1) == (r2, s2));
        let d = mouse_distance((r1, s1), (r2, s2)).unwrap();
        prop_assert_eq!(d, mouse_distance((r2, s2), (r1, s1)).unwrap());
        prop_assert_eq!(d == 0.0, a == b);
    }

    #[test]
    fn breakdown_is_additive(c in context(), cfg in reward_config()) {
        let b = evaluate(&c, &cfg);
        let parts = [b.p_repeat, b.p_stagnation, b.p_step, b.p_early, b.p_explore];
        prop_assert!(parts.iter().all(|&p| p >= 0.0));
        let resum = b.manager + cfg.alpha * b.subpolicy - parts.iter().sum::<f64>();
        prop_assert!((resum - b.total).abs() <= 1e-12 * (1.0 + b.total.abs()));
        prop_assert_eq!(b.manager == 0.0, c.action.macro_action() != c.target.macro_action() || cfg.manager_correct_reward + cfg.manager_streak_bonus * c.manager_streak as f64 == 0.0);
    }

    #[test]
    fn scaling_scales_totals(c in context(), k in 0.1..10.0f64) {
        let cfg = RewardConfig::default();
        let base = evaluate(&c, &cfg).total;
        let scaled = evaluate(&c, &cfg.scaled(k)).total;
        prop_assert!((scaled - k * base).abs() <= 1e-9 * (1.0 + (k * base).abs()));
    }

    #[test]
    fn mouse_reward_falls_with_distance(r in 0..9usize, s in 0..9usize, i in 0..8usize, r2 in 0..9usize, s2 in 0..9usize, r3 in 0..9usize, s3 in 0..9usize) {
        let cfg = RewardConfig::default();
        let t = MouseTarget::new(r, s, i).unwrap();
        let a = MouseTarget::new(r2, s2, i).unwrap();
        let b = MouseTarget::new(r3, s3, i).unwrap();
        if a.distance(t) <= b.distance(t) {
            prop_assert!(mouse_subreward(a, t, &cfg) >= mouse_subreward(b, t, &cfg));
        }
    }

    #[test]
    fn streak_free_rewards_do_not_grow(c in context(), extra in 1u32..10) {
        let cfg = RewardConfig::default().without_streaks();
        let later = StepContext { manager_streak: c.manager_streak + extra, subpolicy_streak: c.subpolicy_streak + extra, ..c };
        prop_assert_eq!(evaluate(&c, &cfg).total, evaluate(&later, &cfg).total);
    }

    #[test]
    fn normalized_reward_is_clamped(total in -500.0..500.0f64, oracle in 0.01..500.0f64) {
        let n = normalized_reward(total, oracle).unwrap();
        prop_assert!((0.0..=1.0).contains(&n));
    }

    #[test]
    fn scores_are_bounded(tp in 0u32..1000, fp in 0u32..1000, fn_ in 0u32..1000) {
        let s = precision_recall_f1(tp, fp, fn_);
        for v in [s.precision, s.recall, s.f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        if s.f1 > 0.0 {
            prop_assert!(s.f1 <= s.precision.max(s.recall) + 1e-12);
            prop_assert!(s.f1 >= s.precision.min(s.recall) - 1e-12);
        }
    }

    #[test]
    fn curriculum_probabilities_sum_to_one(t in 0.0..=1.0f64, alpha in 0.05..20.0f64) {
        prop_assert!((p_simple(t, alpha) + p_hard(t, alpha) - 1.0).abs() < 1e-12);
        prop_assert!(p_hard(t, alpha) >= p_hard(t * 0.5, alpha));
    }

    #[test]
    fn suite_text_round_trip(seed in any::<u64>(), simple in 1usize..8, hard in 0usize..4) {
        let reg = ActionRegistry::builtin();
        let suite = generate_synthetic_suite(seed, simple, hard, &reg);
        prop_assert_eq!(suite.n_simple(), simple);
        prop_assert_eq!(suite.n_hard(), hard);
        prop_assert_eq!(TaskSuite::parse(&suite.to_file_string(&reg), &reg).unwrap(), suite);
    }

    #[test]
    fn config_dump_round_trip(seed in any::<u64>(), lr in 1e-6..1.0f64, alpha in 0.0..3.0f64, trunk in proptest::collection::vec(1usize..600, 1..4), structure in 0..3usize) {
        let mut cfg = RunConfig::default();
        cfg.seed = seed;
        cfg.agent.learning_rate = lr;
        cfg.env.reward.alpha = alpha;
        cfg.agent.net.trunk = trunk;
        cfg.agent.structure = [Structure::Hierarchical, Structure::Flat, Structure::MultiStepMouse][structure];
        prop_assert_eq!(RunConfig::from_text(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn episode_counts_are_consistent(seed in any::<u64>(), picks in proptest::collection::vec(0..NUM_ACTIONS, 1..120), cheat in proptest::collection::vec(any::<bool>(), 1..120)) {
        let reg = ActionRegistry::builtin();
        let suite = generate_synthetic_suite(seed, 2, 1, &reg);
        let cfg = EnvConfig::default();
        let enc = Arc::new(StateEncoder::fit(&suite, EncoderConfig { embed_dim: 0, state_size: 5, seed }).unwrap());
        let mut env = GuiEnv::new(enc, cfg.clone());
        let task = &suite.tasks()[(seed % 3) as usize];
        let oracle = hrlgym::environment::oracle_rollout(task, &cfg).unwrap().total_reward;
        env.reset(task);
        let mut done = false;
        for (k, i) in picks.iter().enumerate() {
            // Mix ground-truth moves with arbitrary ones.
            let a = match (cheat[k % cheat.len()], env.episode().and_then(|e| e.target())) {
                (true, Some(t)) => t,
                _ => Action::unflatten(*i).unwrap(),
            };
            if env.step(a).unwrap().done {
                done = true;
                break;
            }
        }
        if done {
            let rec = score_episode(env.trace(), task, oracle, &cfg).unwrap();
            prop_assert_eq!(rec.tp + rec.fp, rec.np);
            prop_assert_eq!(rec.tp + rec.fn_, task.len() as u32);
            prop_assert!((0.0..=1.0).contains(&rec.norm_reward));
            prop_assert_eq!(rec.success, rec.termination == Termination::Stopped && rec.tp == task.len() as u32);
        } else {
            prop_assert!(score_episode(env.trace(), task, oracle, &cfg).is_err());
        }
    }

    #[test]
    fn record_csv_round_trip(rows in proptest::collection::vec((any::<u32>(), 0u32..200, 0u32..100, -300.0..300.0f64, 0.0..=1.0f64, any::<bool>(), 0..3usize), 1..20)) {
        let records: Vec<EpisodeRecord> = rows
            .iter()
            .enumerate()
            .map(|(i, &(task_id, np, tp, reward, norm, hard, term))| EpisodeRecord {
                episode_index: i as u64,
                task_id,
                difficulty: if hard { Difficulty::Hard } else { Difficulty::Simple },
                steps: np,
                np,
                tp: tp.min(np),
                fp: np - tp.min(np),
                fn_: 3,
                reward,
                norm_reward: norm,
                success: false,
                termination: [Termination::Stopped, Termination::MaxSteps, Termination::RewardFloor][term],
            })
            .collect();
        let mut buf = Vec::new();
        write_records(&records, &mut buf).unwrap();
        prop_assert_eq!(read_records(buf.as_slice()).unwrap(), records.clone());
        let report = aggregate(&records).unwrap();
        prop_assert_eq!(report.overall.episodes as usize, records.len());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn checkpoint_round_trip(seed in any::<u64>(), structure in 0..3usize, value in any::<bool>()) {
        let s = [Structure::Hierarchical, Structure::Flat, Structure::MultiStepMouse][structure];
        let p = common::tiny_policy(s, value, seed);
        let c = Checkpoint::capture(&p, "run.seed = 1\n", seed % 1000, seed % 7);
        let back = Checkpoint::from_bytes(&c.to_bytes().unwrap()).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.to_policy().unwrap().to_flat(), p.to_flat());
    }
}
