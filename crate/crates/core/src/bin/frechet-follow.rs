//! Command-line front end: plan, benchmark, score, generate and draw.
//!
//! Exit codes: 0 success, 2 no feasible path found, 1 any error. Errors are
//! printed to stderr as a JSON object `{"kind": ..., "message": ...}`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use frechet_follow::bench::{run_bench, run_planner, BenchConfig, PlannerKind};
use frechet_follow::densify::{Budget, Strategy};
use frechet_follow::frechet::{bottleneck_index, discrete_frechet};
use frechet_follow::geometry::{MetricWeights, TaskPose};
use frechet_follow::io::{self, load_scenario, save_run_output, save_scenario, save_trace, RunOutput, Solution};
use frechet_follow::render::render_svg;
use frechet_follow::scenario_gen::{generate, GenOptions};
use frechet_follow::{Error, Result};

#[derive(Parser)]
#[command(name = "frechet-follow", version, about = "Reference-path following for redundant planar arms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan one scenario and write solution.json, trace.csv and render.svg.
    Plan(PlanArgs),
    /// Run planners over a directory of scenarios and aggregate their traces.
    Bench(BenchArgs),
    /// Discrete Fréchet distance between two pose sequences.
    EvalFrechet(EvalArgs),
    /// Write a reproducible corpus of random scenarios.
    GenScenarios(GenArgs),
    /// Draw a scenario and, optionally, a solution as SVG.
    Render(RenderArgs),
}

#[derive(Args)]
struct BudgetArgs {
    /// Maximum densification iterations (overrides the scenario's budget).
    #[arg(long)]
    budget_iters: Option<usize>,
    /// Maximum wall-clock seconds (overrides the scenario's budget).
    #[arg(long)]
    budget_secs: Option<f64>,
}

impl BudgetArgs {
    fn budget(&self) -> Result<Option<Budget>> {
        if self.budget_iters.is_none() && self.budget_secs.is_none() {
            return Ok(None);
        }
        let b = Budget {
            max_iterations: self.budget_iters,
            max_seconds: self.budget_secs,
        };
        b.validate()?;
        Ok(Some(b))
    }
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// frechet, greedy-ik or vector-field.
    #[arg(long, default_value = "frechet")]
    planner: PlannerKind,
    /// hybrid:p=<prob> or ltg:m=<int>; defaults to the scenario's strategy.
    #[arg(long)]
    strategy: Option<Strategy>,
    #[command(flatten)]
    budget: BudgetArgs,
    /// Overrides the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    scenario_dir: PathBuf,
    /// Comma-separated planner names.
    #[arg(long, value_delimiter = ',', default_value = "frechet,greedy-ik,vector-field")]
    planners: Vec<PlannerKind>,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// Repeat r of every cell runs with seed seed_base + r.
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
    #[arg(long)]
    strategy: Option<Strategy>,
    #[command(flatten)]
    budget: BudgetArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Pose list (JSON array) or a run output with a solution.
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    /// Rotation weight of the task-space metric.
    #[arg(long, default_value_t = MetricWeights::default().w_rot)]
    w_rot: f64,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = GenOptions::default().obstacles)]
    obstacles: usize,
    /// Comma-separated link lengths of the generated arms.
    #[arg(long, value_delimiter = ',')]
    links: Option<Vec<f64>>,
    /// Random control points of each reference before smoothing.
    #[arg(long, default_value_t = GenOptions::default().control_points)]
    control_points: usize,
    /// Corner-cutting passes applied to the control polygon.
    #[arg(long, default_value_t = GenOptions::default().smoothing_passes)]
    smoothing_passes: usize,
    /// Minimum gap between boxes and the reference path (metres).
    #[arg(long, default_value_t = GenOptions::default().clearance)]
    clearance: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Run output (as written by `plan`) or bare solution JSON.
    #[arg(long)]
    solution: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn read_poses(path: &Path) -> Result<Vec<TaskPose>> {
    let text = io::read_text(path)?;
    let name = path.display().to_string();
    // A bare pose list is an array; anything else is read as a run output.
    if text.trim_start().starts_with('[') {
        return io::parse_json(&text, &name);
    }
    let run: RunOutput = io::parse_json(&text, &name)?;
    run.solution
        .map(|s| s.poses)
        .ok_or_else(|| Error::Input(format!("{name} holds no solution")))
}

fn read_solution(path: &Path) -> Result<Option<Solution>> {
    let text = io::read_text(path)?;
    let name = path.display().to_string();
    let value: serde_json::Value = io::parse_json(&text, &name)?;
    // Bare solutions carry `configs` at the top level; run outputs nest them.
    if value.get("configs").is_some() {
        return io::parse_json(&text, &name).map(Some);
    }
    let run: RunOutput = io::parse_json(&text, &name)?;
    Ok(run.solution)
}

fn plan(args: &PlanArgs) -> Result<ExitCode> {
    let mut scenario = load_scenario(&args.scenario)?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    let out = run_planner(&scenario, args.planner, args.strategy, args.budget.budget()?)?;
    fs::create_dir_all(&args.out)?;
    save_run_output(args.out.join("solution.json"), &out)?;
    save_trace(args.out.join("trace.csv"), &out.trace)?;
    fs::write(args.out.join("render.svg"), render_svg(&scenario, out.solution.as_ref())?)?;
    match &out.solution {
        Some(sol) => {
            println!("feasible frechet {} report {}", sol.frechet_cost, sol.report_frechet);
            Ok(ExitCode::SUCCESS)
        }
        None => {
            println!("infeasible {}", out.failure.as_deref().unwrap_or("no path"));
            Ok(ExitCode::from(2))
        }
    }
}

fn bench(args: &BenchArgs) -> Result<ExitCode> {
    let cfg = BenchConfig {
        scenario_dir: args.scenario_dir.clone(),
        planners: args.planners.clone(),
        repeats: args.repeats,
        seed_base: args.seed_base,
        out: args.out.clone(),
        strategy: args.strategy,
        budget: args.budget.budget()?,
    };
    let runs = run_bench(&cfg)?;
    println!("{} runs written to {}", runs.len(), args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn eval_frechet(args: &EvalArgs) -> Result<ExitCode> {
    let w = MetricWeights { w_rot: args.w_rot };
    w.validate()?;
    let (a, b) = (read_poses(&args.a)?, read_poses(&args.b)?);
    let (cost, coupling) = discrete_frechet(&a, &b, &w)?;
    let (i, j) = bottleneck_index(&coupling, &a, &b, &w)?;
    println!("cost {cost}");
    println!("bottleneck_index {i} {j}");
    Ok(ExitCode::SUCCESS)
}

fn gen_scenarios(args: &GenArgs) -> Result<ExitCode> {
    let defaults = GenOptions::default();
    let opts = GenOptions {
        link_lengths: args.links.clone().unwrap_or(defaults.link_lengths.clone()),
        obstacles: args.obstacles,
        control_points: args.control_points,
        smoothing_passes: args.smoothing_passes,
        clearance: args.clearance,
        ..defaults
    };
    let scenarios = generate(args.count, args.seed, &opts)?;
    fs::create_dir_all(&args.out)?;
    for (i, sc) in scenarios.iter().enumerate() {
        save_scenario(args.out.join(format!("scenario_{i:03}.json")), sc)?;
    }
    println!("{} scenarios written to {}", scenarios.len(), args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn render(args: &RenderArgs) -> Result<ExitCode> {
    let scenario = load_scenario(&args.scenario)?;
    let solution = match &args.solution {
        Some(p) => read_solution(p)?,
        None => None,
    };
    fs::write(&args.out, render_svg(&scenario, solution.as_ref())?)?;
    Ok(ExitCode::SUCCESS)
}

fn report(kind: &str, message: &str) -> ExitCode {
    eprintln!("{}", serde_json::json!({ "kind": kind, "message": message }));
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => return report("usage", e.to_string().trim_end()),
    };
    let result = match &cli.command {
        Command::Plan(a) => plan(a),
        Command::Bench(a) => bench(a),
        Command::EvalFrechet(a) => eval_frechet(a),
        Command::GenScenarios(a) => gen_scenarios(a),
        Command::Render(a) => render(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => report(e.kind(), &e.to_string()),
    }
}
