use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dcmcts::grid::{Maze, Pi0, StateId, Task};
use dcmcts::harness::{evaluate, EvalConfig};
use dcmcts::oracle::{exact_value_table_with, monte_carlo_success_with, StochasticTestPolicy};
use dcmcts::par::Execution;
use dcmcts::planner::PlannerConfig;
use dcmcts::rng::rng_from_seed;

const STRATEGIES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn eval_sweep(c: &mut Criterion) {
    let mut g = c.benchmark_group("evaluate");
    g.sample_size(10);
    let eval = EvalConfig { width: 11, height: 11, tasks: 32, ..EvalConfig::default() };
    let planner = PlannerConfig { budget: 100, ..PlannerConfig::default() };
    for (name, exec) in STRATEGIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| evaluate(exec, None, &planner, &eval).unwrap())
        });
    }
    g.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let mut g = c.benchmark_group("monte_carlo_success");
    let maze = Maze::open(8, 8);
    let policy = StochasticTestPolicy::new(&maze, 0.3).unwrap();
    let task = Task::new(maze.clone(), StateId::new(0, 0), StateId::new(7, 7)).unwrap();
    let sigma = [task.start, StateId::new(3, 4), task.goal];
    for (name, exec) in STRATEGIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| monte_carlo_success_with(exec, &mut rng_from_seed(0), &task, &sigma, &policy, 10_000, 64))
        });
    }
    g.finish();
}

fn value_table(c: &mut Criterion) {
    let mut g = c.benchmark_group("exact_value_table");
    g.sample_size(10);
    let maze = Maze::open(13, 13);
    for (name, exec) in STRATEGIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| exact_value_table_with(exec, &maze, &Pi0).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, eval_sweep, monte_carlo, value_table);
criterion_main!(benches);
