mod common;

use std::fs;

use common::small_task;
use dcmcts::harness::{
    budget_sweep, compare_budgets, compare_runs, evaluate, evaluate_outcomes, render_plan, run_experiment,
    subgoal_depths, validate_file, wilson_interval, EvalConfig, ExperimentConfig, FileKind, Method, RunDir, RunEvent,
    TOKEN_WIDTH,
};
use dcmcts::heuristics::{HerParserKind, HeuristicPair};
use dcmcts::par::Execution;
use dcmcts::planner::{run_search, Mode, PlannerConfig};
use dcmcts::SubGoal;

fn small_config(dir: &std::path::Path, episodes: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    for (k, v) in [
        ("width", "7"),
        ("height", "7"),
        ("budget", "15"),
        ("batch_size", "8"),
        ("buffer_capacity", "64"),
        ("hidden", "6"),
        ("eval_every", "5"),
        ("eval_tasks", "6"),
        ("checkpoint_every", "4"),
        ("seed", "3"),
    ] {
        c.set(k, v).unwrap();
    }
    c.episodes = episodes;
    c.out_dir = dir.to_path_buf();
    c
}

#[test]
fn config_text_round_trips_and_env_overrides() {
    let mut c = ExperimentConfig::default();
    c.set("mode", "sequential").unwrap();
    c.set("step_limit", "2x").unwrap();
    let back = ExperimentConfig::from_text(&c.to_text()).unwrap();
    assert_eq!(back, c);
    assert_eq!(back.parser(), HerParserKind::LeftFirst);
    c.apply_env([("DCMCTS_BUDGET", "77"), ("OTHER", "1")]).unwrap();
    assert_eq!(c.planner.budget, 77);
    let err = ExperimentConfig::from_text("width = 9\nbogus = 1\n").unwrap_err().to_string();
    assert!(err.contains("line 2"), "{err}");
    assert!(c.set("density", "1.5").and_then(|_| c.validate()).is_err());
}

#[test]
fn resumed_run_reproduces_records_and_checkpoints() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let full = small_config(a.path(), 12);
    let mut events = 0;
    let out = run_experiment(&full, Execution::default(), false, |e| {
        if let RunEvent::Episode(_) = e {
            events += 1;
        }
    })
    .unwrap();
    assert_eq!(events, 12);
    assert_eq!(out.episodes, 12);

    // Losing the final checkpoint leaves records past the last surviving one (8);
    // resuming discards and regenerates them.
    run_experiment(&small_config(b.path(), 12), Execution::default(), false, |_| {}).unwrap();
    let (ra, rb) = (RunDir::new(a.path()), RunDir::new(b.path()));
    fs::remove_file(rb.model_at(12)).unwrap();
    fs::remove_file(rb.buffer_at(12)).unwrap();
    fs::write(rb.model_at(12), "partial").unwrap();
    assert_eq!(rb.latest_checkpoint().unwrap(), Some(8));
    run_experiment(&small_config(b.path(), 12), Execution::default(), true, |_| {}).unwrap();

    assert_eq!(fs::read(ra.metrics()).unwrap(), fs::read(rb.metrics()).unwrap());
    assert_eq!(fs::read(ra.eval()).unwrap(), fs::read(rb.eval()).unwrap());
    assert_eq!(fs::read(ra.model_at(12)).unwrap(), fs::read(rb.model_at(12)).unwrap());
    assert_eq!(fs::read(ra.buffer_at(12)).unwrap(), fs::read(rb.buffer_at(12)).unwrap());
    assert_eq!(ra.checkpoint_episodes().unwrap(), vec![4, 8, 12]);
    assert_eq!(validate_file(&ra.metrics()).unwrap(), FileKind::Metrics);
    assert_eq!(validate_file(&ra.eval()).unwrap(), FileKind::Eval);
    assert_eq!(validate_file(&ra.model_at(4)).unwrap(), FileKind::Model);
    assert_eq!(validate_file(&ra.buffer_at(4)).unwrap(), FileKind::Buffer);
    assert_eq!(validate_file(&ra.config()).unwrap(), FileKind::Config);

    assert!(run_experiment(&full, Execution::default(), false, |_| {}).is_err());
    let mut other = small_config(a.path(), 14);
    other.planner.budget = 16;
    assert!(run_experiment(&other, Execution::default(), true, |_| {}).is_err());
}

#[test]
fn compare_of_a_run_with_itself_has_identical_columns() {
    let root = tempfile::tempdir().unwrap();
    let (d1, d2) = (root.path().join("one"), root.path().join("two"));
    run_experiment(&small_config(&d1, 10), Execution::default(), false, |_| {}).unwrap();
    run_experiment(&small_config(&d2, 10), Execution::default(), false, |_| {}).unwrap();
    let t = compare_runs(&[&d1, &d2]).unwrap();
    assert_eq!(t.column("one").unwrap(), t.column("two").unwrap());
    assert_eq!(t.rows.iter().map(|r| r.0).collect::<Vec<_>>(), vec![0, 5, 10]);
}

#[test]
fn execution_strategies_agree() {
    let eval = EvalConfig { width: 9, height: 9, tasks: 12, ..EvalConfig::default() };
    let planner = PlannerConfig { budget: 30, ..PlannerConfig::default() };
    let a = evaluate_outcomes(Execution::Parallel, None, &planner, &eval).unwrap();
    let b = evaluate_outcomes(Execution::Sequential, None, &planner, &eval).unwrap();
    assert_eq!(a, b);
}

#[test]
fn budget_sweep_is_monotone_within_confidence() {
    let eval = EvalConfig { width: 9, height: 9, tasks: 60, ..EvalConfig::default() };
    let planner = PlannerConfig::default();
    let sums = budget_sweep(Execution::default(), None, &planner, &eval, &[5, 20, 80]).unwrap();
    for w in sums.windows(2) {
        assert!(w[1].ci_high >= w[0].ci_low, "{} then {}", w[0].fraction, w[1].fraction);
    }
    for s in &sums {
        let (lo, hi) = wilson_interval(s.solved, s.tasks, 1.96);
        assert_eq!((s.ci_low, s.ci_high), (lo, hi));
    }
}

#[test]
fn compare_budgets_shares_tasks() {
    let eval = EvalConfig { width: 7, height: 7, tasks: 10, ..EvalConfig::default() };
    let planner = PlannerConfig::default();
    let methods = [
        Method { name: "a".into(), model: None, planner: planner.clone() },
        Method { name: "b".into(), model: None, planner: planner.clone() },
        Method { name: "seq".into(), model: None, planner: PlannerConfig { mode: Mode::SequentialRight, ..planner } },
    ];
    let (table, sums) = compare_budgets(Execution::default(), &methods, &eval, &[10, 40]).unwrap();
    assert_eq!(table.column("a"), table.column("b"));
    assert_eq!(sums.len(), 3);
    assert_eq!(sums[2][0].mode, "sequential");
    let direct = evaluate(Execution::default(), None, &PlannerConfig { budget: 40, ..PlannerConfig::default() }, &eval).unwrap();
    assert_eq!(sums[0][1], direct);
}

#[test]
fn rendering_marks_each_subgoal_with_its_depth() {
    for seed in 0..10 {
        let task = small_task(9, 9, 0.5, seed);
        let r = run_search(&task, HeuristicPair::untrained(), &PlannerConfig { budget: 60, seed, ..PlannerConfig::default() }).unwrap();
        let text = render_plan(&task, &r.solution_tree);
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows.len(), task.maze.height());
        assert!(rows.iter().all(|l| l.len() == TOKEN_WIDTH * task.maze.width()));
        let token = |s: dcmcts::StateId| &rows[s.row()][s.col() * TOKEN_WIDTH..(s.col() + 1) * TOKEN_WIDTH];
        let depths = subgoal_depths(&r.solution_tree);
        let chosen: Vec<_> = r.solution_tree.nodes.iter().filter_map(|n| n.subgoal.state()).collect();
        assert_eq!(depths.len(), chosen.iter().collect::<std::collections::BTreeSet<_>>().len());
        for (s, d) in &depths {
            assert_eq!(token(*s).trim(), d.to_string());
        }
        if !depths.contains_key(&task.start) {
            assert_eq!(token(task.start), " S ");
        }
        if !depths.contains_key(&task.goal) {
            assert_eq!(token(task.goal), " G ");
        }
        let walls = rows.iter().map(|l| l.matches("###").count()).sum::<usize>();
        assert_eq!(walls, task.maze.wall_count());
        assert!(r.solution_tree.nodes.iter().all(|n| n.subgoal != SubGoal::Null || n.is_leaf()));
    }
}
