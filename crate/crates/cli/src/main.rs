use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{error::ErrorKind, Args, Parser, Subcommand};
use dcmcts::grid::{generate_maze, parse_maze_text, sample_task, MazeFile, StateId, StepLimit, Task};
use dcmcts::harness::{
    c_puct_samples, compare_budgets, compare_runs, evaluate, metrics, render_plan, run_experiment, validate_file,
    EvalConfig, ExperimentConfig, Method, RunDir, RunEvent,
};
use dcmcts::heuristics::{HeuristicPair, TrainableModel};
use dcmcts::par::Execution;
use dcmcts::planner::{run_search, Mode, PlannerConfig};

#[derive(Parser)]
#[command(name = "dcmcts", version, about = "Divide-and-conquer MCTS planner for grid mazes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a maze, optionally with a sampled start and goal.
    Gen(GenArgs),
    /// Plan in a maze file and print the plan.
    Plan(PlanArgs),
    /// Train heuristics from an experiment config.
    Train(TrainArgs),
    /// Evaluate solve fraction over fresh tasks.
    Eval(EvalArgs),
    /// Tabulate learning curves of run directories, or solve fraction by budget.
    Compare(CompareArgs),
    /// Train one run per sampled exploration constant.
    Sweep(SweepArgs),
    /// Check files written by this tool.
    Validate(ValidateArgs),
}

fn density(s: &str) -> Result<f64, String> {
    let d: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&d) {
        Ok(d)
    } else {
        Err(format!("density must lie in [0, 1], got {d}"))
    }
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

fn step_limit(s: &str) -> Result<StepLimit, String> {
    s.parse().map_err(|e: dcmcts::Error| e.to_string())
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 11, value_parser = positive)]
    width: usize,
    #[arg(long, default_value_t = 11, value_parser = positive)]
    height: usize,
    #[arg(long, default_value_t = 0.75, value_parser = density)]
    density: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also mark a start and goal sampled from this seed.
    #[arg(long)]
    task: bool,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlannerArgs {
    #[arg(long, default_value_t = 200, value_parser = positive)]
    budget: usize,
    #[arg(long, default_value = "dc")]
    mode: Mode,
    #[arg(long, default_value_t = 8, value_parser = positive)]
    max_depth: usize,
    #[arg(long, default_value_t = 5.0)]
    c_puct: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Prefetch heuristics of both halves of a fresh split concurrently.
    #[arg(long)]
    parallel_and: bool,
}

impl PlannerArgs {
    fn config(&self) -> PlannerConfig {
        PlannerConfig {
            budget: self.budget,
            mode: self.mode,
            max_depth: self.max_depth,
            c_puct: self.c_puct,
            seed: self.seed,
            parallel_and: self.parallel_and,
            ..PlannerConfig::default()
        }
    }
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    maze: PathBuf,
    /// Start cell `row,col`; overrides the maze file's `S`.
    #[arg(long)]
    start: Option<StateId>,
    /// Goal cell `row,col`; overrides the maze file's `G`.
    #[arg(long)]
    goal: Option<StateId>,
    #[command(flatten)]
    planner: PlannerArgs,
    /// Model checkpoint; the uniform prior and zero value when omitted.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Print the maze with numbered sub-goals.
    #[arg(long)]
    render: bool,
    /// Write the search tree dump to this file.
    #[arg(long)]
    dump_tree: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    /// Continue from the latest checkpoint in the output directory.
    #[arg(long)]
    resume: bool,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, value_parser = positive)]
    episodes: Option<usize>,
    /// Only print evaluations and the final summary.
    #[arg(long)]
    quiet: bool,
    /// Run evaluations sequentially.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct TaskArgs {
    /// Square maze side; overridden by --width/--height.
    #[arg(long, value_parser = positive)]
    size: Option<usize>,
    #[arg(long, value_parser = positive)]
    width: Option<usize>,
    #[arg(long, value_parser = positive)]
    height: Option<usize>,
    #[arg(long, default_value_t = 0.75, value_parser = density)]
    density: f64,
    #[arg(long, default_value_t = 200, value_parser = positive)]
    tasks: usize,
    /// Seed of the evaluation task stream.
    #[arg(long, default_value_t = 1_000_003)]
    eval_seed: u64,
    /// Execution step limit: `N` steps, or `Fx` times the shortest distance.
    #[arg(long, default_value = "1.5x", value_parser = step_limit)]
    step_limit: StepLimit,
    /// Run tasks sequentially.
    #[arg(long)]
    sequential: bool,
}

impl TaskArgs {
    fn eval_config(&self) -> EvalConfig {
        let side = self.size.unwrap_or(11);
        EvalConfig {
            width: self.width.unwrap_or(side),
            height: self.height.unwrap_or(side),
            density: self.density,
            tasks: self.tasks,
            seed: self.eval_seed,
            step_limit: self.step_limit,
        }
    }

    fn exec(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, conflicts_with = "untrained")]
    model: Option<PathBuf>,
    #[arg(long)]
    untrained: bool,
    #[command(flatten)]
    planner: PlannerArgs,
    #[command(flatten)]
    tasks: TaskArgs,
    /// Also write the summary as a JSON line to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Run directories whose learning curves to align.
    #[arg(long, num_args = 1.., conflicts_with_all = ["modes", "budgets"])]
    runs: Vec<PathBuf>,
    /// Planner modes for a budget comparison.
    #[arg(long, value_delimiter = ',')]
    modes: Vec<Mode>,
    /// One checkpoint per mode, or `untrained`.
    #[arg(long, value_delimiter = ',')]
    models: Vec<String>,
    #[arg(long, value_delimiter = ',', default_values_t = [50usize, 100, 200, 400])]
    budgets: Vec<usize>,
    #[arg(long, default_value_t = 5.0)]
    c_puct: f64,
    #[arg(long, default_value_t = 8, value_parser = positive)]
    max_depth: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    tasks: TaskArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Number of exploration constants drawn from [3, 7].
    #[arg(long, default_value_t = 20, value_parser = positive)]
    samples: usize,
    /// Seed for drawing the constants.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(required = true)]
    files: Vec<PathBuf>,
}

enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<dcmcts::Error> for Failure {
    fn from(e: dcmcts::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

type CmdResult = Result<(), Failure>;

fn write_output(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
            println!("{}", p.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn load_model(path: &Path) -> anyhow::Result<TrainableModel> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    TrainableModel::from_text(&text).with_context(|| format!("loading {}", path.display()))
}

fn gen(a: GenArgs) -> CmdResult {
    let maze = generate_maze(a.width, a.height, a.density, a.seed)?;
    let (start, goal) = if a.task {
        let t = sample_task(&maze, a.seed)?;
        (Some(t.start), Some(t.goal))
    } else {
        (None, None)
    };
    let file = MazeFile { maze, start, goal };
    write_output(a.out.as_deref(), &file.to_text())?;
    Ok(())
}

fn plan(a: PlanArgs) -> CmdResult {
    let text = fs::read_to_string(&a.maze).with_context(|| format!("reading {}", a.maze.display()))?;
    let file = parse_maze_text(&text).with_context(|| format!("parsing {}", a.maze.display()))?;
    let (Some(start), Some(goal)) = (a.start.or(file.start), a.goal.or(file.goal)) else {
        return Err(Failure::Usage("start and goal are required: mark S and G in the maze or pass --start/--goal".into()));
    };
    let task = Task::new(file.maze, start, goal)?;
    let model = a.model.as_deref().map(load_model).transpose()?;
    let heuristics = match &model {
        Some(m) => HeuristicPair::from_model(m),
        None => HeuristicPair::untrained(),
    };
    let result = run_search(&task, heuristics, &a.planner.config())?;
    if a.json {
        println!("{}", result.to_json());
    } else {
        let states: Vec<String> = result.plan.sigma.iter().map(|s| s.to_string()).collect();
        println!("mode {}", result.mode);
        println!("plan {}", states.join(" "));
        println!("plan_length {}", result.plan.len());
        println!("L {}", result.plan.objective_l);
        println!("G {}", result.root_g());
        println!("budget_used {}", result.budget_used);
    }
    if a.render {
        print!("{}", render_plan(&task, &result.solution_tree));
    }
    if let Some(p) = &a.dump_tree {
        fs::write(p, result.tree.dump()).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn load_config(path: &Path) -> anyhow::Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut config = ExperimentConfig::from_text(&text).with_context(|| format!("parsing {}", path.display()))?;
    config.apply_env(std::env::vars())?;
    Ok(config)
}

fn print_event(ev: RunEvent<'_>, quiet: bool) {
    match ev {
        RunEvent::Episode(r) if !quiet => {
            println!(
                "episode {} solved {} L {:.4} budget {}",
                r.episode, r.solved, r.l, r.budget
            );
        }
        RunEvent::Eval(r) => println!("eval episode {} {}", r.episode, r.summary.to_text()),
        _ => {}
    }
}

fn train(a: TrainArgs) -> CmdResult {
    let mut config = load_config(&a.config)?;
    if let Some(d) = a.out_dir {
        config.out_dir = d;
    }
    if let Some(n) = a.episodes {
        config.episodes = n;
    }
    let exec = if a.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let outcome = run_experiment(&config, exec, a.resume, |ev| print_event(ev, a.quiet))?;
    println!("trained {} episodes into {}", outcome.episodes, config.out_dir.display());
    Ok(())
}

fn eval(a: EvalArgs) -> CmdResult {
    let model = match (&a.model, a.untrained) {
        (Some(p), _) => Some(load_model(p)?),
        (None, true) => None,
        (None, false) => return Err(Failure::Usage("pass --model <checkpoint> or --untrained".into())),
    };
    let eval = a.tasks.eval_config();
    let summary = evaluate(a.tasks.exec(), model.as_ref(), &a.planner.config(), &eval)?;
    println!("{}", summary.to_text());
    if let Some(p) = &a.out {
        fs::write(p, metrics::to_json_line(&summary)).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn compare(a: CompareArgs) -> CmdResult {
    let table = if !a.runs.is_empty() {
        if a.runs.len() < 2 {
            return Err(Failure::Usage("--runs needs at least two directories".into()));
        }
        let dirs: Vec<&Path> = a.runs.iter().map(PathBuf::as_path).collect();
        compare_runs(&dirs)?
    } else {
        if a.modes.is_empty() {
            return Err(Failure::Usage("pass --runs <dirs> or --modes <list>".into()));
        }
        if !a.models.is_empty() && a.models.len() != a.modes.len() {
            return Err(Failure::Usage("--models needs one entry per mode".into()));
        }
        if a.budgets.contains(&0) {
            return Err(Failure::Usage("budgets must be positive".into()));
        }
        let models: Vec<Option<TrainableModel>> = a
            .models
            .iter()
            .map(|m| match m.as_str() {
                "untrained" => Ok(None),
                p => load_model(Path::new(p)).map(Some),
            })
            .collect::<anyhow::Result<_>>()?;
        let methods: Vec<Method<'_>> = a
            .modes
            .iter()
            .enumerate()
            .map(|(i, &mode)| Method {
                name: match a.models.get(i) {
                    Some(m) if m != "untrained" => format!("{mode}:{i}"),
                    _ => mode.to_string(),
                },
                model: models.get(i).and_then(Option::as_ref),
                planner: PlannerConfig {
                    mode,
                    c_puct: a.c_puct,
                    max_depth: a.max_depth,
                    seed: a.seed,
                    ..PlannerConfig::default()
                },
            })
            .collect();
        compare_budgets(a.tasks.exec(), &methods, &a.tasks.eval_config(), &a.budgets)?.0
    };
    write_output(a.out.as_deref(), &table.to_text())?;
    Ok(())
}

fn sweep(a: SweepArgs) -> CmdResult {
    let base = load_config(&a.config)?;
    let mut finals = Vec::new();
    for (i, c) in c_puct_samples(a.seed, a.samples).into_iter().enumerate() {
        let mut config = base.clone();
        config.planner.c_puct = c;
        config.out_dir = base.out_dir.join(format!("cpuct-{i:02}"));
        println!("run {i} c_puct {c:.4} -> {}", config.out_dir.display());
        let outcome = run_experiment(&config, Execution::Parallel, false, |ev| print_event(ev, a.quiet))?;
        if let Some(e) = outcome.last_eval {
            finals.push(e.summary.fraction);
        }
    }
    if !finals.is_empty() {
        let mean = finals.iter().sum::<f64>() / finals.len() as f64;
        println!("mean final solve fraction {mean:.4} over {} runs", finals.len());
    }
    Ok(())
}

fn validate(a: ValidateArgs) -> CmdResult {
    let mut bad = 0;
    for f in &a.files {
        let target = if f.is_dir() { RunDir::new(f).metrics() } else { f.clone() };
        match validate_file(&target) {
            Ok(kind) => println!("ok {} {kind:?}", target.display()),
            Err(e) => {
                bad += 1;
                eprintln!("invalid {}: {e}", target.display());
            }
        }
    }
    if bad > 0 {
        return Err(Failure::Runtime(anyhow!("{bad} invalid file(s)")));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Plan(a) => plan(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Compare(a) => compare(a),
        Command::Sweep(a) => sweep(a),
        Command::Validate(a) => validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
