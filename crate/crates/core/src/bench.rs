//! Running planners on scenarios, singly or as a benchmark sweep.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{greedy_ik_plan, report_cost, vector_field_plan, BaselineResult};
use crate::densify::{anytime_plan, Budget, Method, Strategy, TraceRow, UpdateKind};
use crate::error::{Error, Result};
use crate::io::{load_scenario, save_trace, RunOutput, Scenario, Solution};
use crate::rng;

/// Environment variable capping benchmark parallelism.
pub const THREADS_ENV: &str = "FRECHET_FOLLOW_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlannerKind {
    Frechet,
    GreedyIk,
    VectorField,
}

impl PlannerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PlannerKind::Frechet => "frechet",
            PlannerKind::GreedyIk => "greedy-ik",
            PlannerKind::VectorField => "vector-field",
        }
    }
}

impl fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlannerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "frechet" => Ok(PlannerKind::Frechet),
            "greedy-ik" => Ok(PlannerKind::GreedyIk),
            "vector-field" => Ok(PlannerKind::VectorField),
            other => Err(Error::input(format!(
                "unknown planner `{other}` (expected frechet, greedy-ik or vector-field)"
            ))),
        }
    }
}

/// Runs one planner. `strategy` and `budget` apply to the anytime planner
/// and default to the scenario's own settings.
pub fn run_planner(scenario: &Scenario, kind: PlannerKind, strategy: Option<Strategy>, budget: Option<Budget>) -> Result<RunOutput> {
    scenario.validate()?;
    match kind {
        PlannerKind::Frechet => {
            let strategy = strategy.unwrap_or(scenario.planner.strategy);
            let budget = budget.unwrap_or(scenario.planner.budget);
            let out = anytime_plan(scenario, strategy, budget)?;
            let st = &out.state;
            let solution = match &st.best {
                Some(best) => {
                    let report = report_cost(&st.arm, &scenario.reference_path, &best.configs, &st.weights)?;
                    let snapshots = best.lg_vertices.iter().map(|&v| st.lg.vertex(v).config.clone()).collect();
                    Some(Solution::new(
                        &st.arm,
                        best.configs.clone(),
                        best.reference_points.clone(),
                        &st.weights,
                        report,
                        st.max_resolution(),
                        snapshots,
                    )?)
                }
                None => None,
            };
            Ok(RunOutput {
                planner: kind.to_string(),
                strategy: Some(strategy.to_string()),
                seed: scenario.seed,
                failure: solution.is_none().then(|| "infeasible".to_string()),
                solution,
                trace: out.trace.rows,
            })
        }
        PlannerKind::GreedyIk | PlannerKind::VectorField => {
            let res = if kind == PlannerKind::GreedyIk {
                greedy_ik_plan(scenario, &mut rng::stream(scenario.seed, rng::GREEDY_IK), false)?
            } else {
                let step = scenario.planner.vector_field_step;
                vector_field_plan(scenario, step, &mut rng::stream(scenario.seed, rng::VECTOR_FIELD))?
            };
            baseline_output(scenario, kind, res)
        }
    }
}

fn baseline_output(scenario: &Scenario, kind: PlannerKind, res: BaselineResult) -> Result<RunOutput> {
    let (solution, failure) = match &res.path {
        Ok(path) => {
            let configs = crate::baselines::subdivide_configs(path, crate::baselines::REPORT_SPACING);
            let reference = crate::baselines::resample_reference(&scenario.reference_path, crate::baselines::REPORT_SPACING);
            let stride = (path.len() / 12).max(1);
            let mut snapshots: Vec<_> = path.iter().step_by(stride).cloned().collect();
            if path.len() > 1 && (path.len() - 1) % stride != 0 {
                snapshots.push(path[path.len() - 1].clone());
            }
            let sol = Solution::new(&scenario.arm, configs, reference, &scenario.metric, res.frechet_cost, 0, snapshots)?;
            (Some(sol), None)
        }
        Err(reason) => (None, Some(reason.to_string())),
    };
    let row = TraceRow {
        iteration: 0,
        wall_seconds: res.wall_seconds,
        best_frechet: res.frechet_cost,
        n_layers: 0,
        total_ik: 0,
        max_resolution: 0,
        update_kind: UpdateKind::None,
        method: Method::Init,
        collision_checks_cum: 0,
    };
    Ok(RunOutput {
        planner: kind.to_string(),
        strategy: None,
        seed: scenario.seed,
        solution,
        failure,
        trace: vec![row],
    })
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub scenario_dir: PathBuf,
    pub planners: Vec<PlannerKind>,
    pub repeats: usize,
    pub seed_base: u64,
    pub out: PathBuf,
    pub strategy: Option<Strategy>,
    pub budget: Option<Budget>,
}

/// One finished benchmark cell.
#[derive(Debug, Clone)]
pub struct BenchRun {
    pub scenario: String,
    pub planner: PlannerKind,
    pub repeat: usize,
    pub trace: Vec<TraceRow>,
}

/// Scenario files (`*.json`) in a directory, sorted by name.
pub fn scenario_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::input(format!("no scenario files in {}", dir.display())));
    }
    Ok(files)
}

fn thread_count() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::input(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Runs every scenario x planner x repeat cell (in parallel), writes one
/// trace CSV per run plus `aggregate.csv` (by iteration, deterministic) and
/// `aggregate_time.csv` (by wall time).
pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRun>> {
    if cfg.repeats == 0 || cfg.planners.is_empty() {
        return Err(Error::input("bench needs at least one planner and one repeat"));
    }
    let files = scenario_files(&cfg.scenario_dir)?;
    let scenarios = files
        .iter()
        .map(|f| {
            let stem = f.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            load_scenario(f).map(|s| (stem, s))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut cells = Vec::new();
    for (name, sc) in &scenarios {
        for &planner in &cfg.planners {
            for repeat in 0..cfg.repeats {
                cells.push((name.clone(), sc, planner, repeat));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count()?)
        .build()
        .map_err(|e| Error::Internal(e.to_string()))?;
    let runs: Vec<BenchRun> = pool.install(|| {
        cells
            .par_iter()
            .map(|(name, sc, planner, repeat)| {
                let mut sc = (*sc).clone();
                sc.seed = cfg.seed_base.wrapping_add(*repeat as u64);
                let out = run_planner(&sc, *planner, cfg.strategy, cfg.budget)?;
                Ok(BenchRun {
                    scenario: name.clone(),
                    planner: *planner,
                    repeat: *repeat,
                    trace: out.trace,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let run_dir = cfg.out.join("runs");
    fs::create_dir_all(&run_dir)?;
    for r in &runs {
        save_trace(run_dir.join(format!("{}__{}__r{}.csv", r.scenario, r.planner, r.repeat)), &r.trace)?;
    }
    write_aggregate(&cfg.out.join("aggregate.csv"), &runs)?;
    write_aggregate_time(&cfg.out.join("aggregate_time.csv"), &runs)?;
    Ok(runs)
}

/// Mean, median and quartiles (linear interpolation) of finite values.
fn summary(values: &[f64]) -> Option<[f64; 5]> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (v.len() - 1) as f64;
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    Some([mean, q(0.5), q(0.25), q(0.75), q(0.9)])
}

const AGG_COLUMNS: [&str; 9] = ["planner", "x", "runs", "feasible", "mean", "median", "q25", "q75", "q90"];

fn write_rows(path: &Path, x_name: &str, rows: Vec<(PlannerKind, String, Vec<f64>)>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = AGG_COLUMNS.map(String::from);
    header[1] = x_name.to_string();
    w.write_record(&header)?;
    for (planner, x, values) in rows {
        let feasible = values.iter().filter(|v| v.is_finite()).count();
        let stats = summary(&values)
            .map(|s| s.map(|x| x.to_string()))
            .unwrap_or_else(|| ["inf".to_string(), "inf".into(), "inf".into(), "inf".into(), "inf".into()]);
        let mut rec = vec![planner.to_string(), x, values.len().to_string(), feasible.to_string()];
        rec.extend(stats);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn planners_of(runs: &[BenchRun]) -> Vec<PlannerKind> {
    let mut p: Vec<PlannerKind> = runs.iter().map(|r| r.planner).collect();
    p.sort();
    p.dedup();
    p
}

/// Best cost at each iteration, over runs of each planner; a run's last
/// value carries forward once its trace ends. Statistics cover feasible runs.
pub fn write_aggregate(path: &Path, runs: &[BenchRun]) -> Result<()> {
    let mut rows = Vec::new();
    for planner in planners_of(runs) {
        let mine: Vec<&BenchRun> = runs.iter().filter(|r| r.planner == planner).collect();
        let last = mine.iter().map(|r| r.trace.last().map_or(0, |t| t.iteration)).max().unwrap_or(0);
        for it in 0..=last {
            let values = mine
                .iter()
                .map(|r| {
                    r.trace
                        .iter()
                        .take_while(|t| t.iteration <= it)
                        .last()
                        .map_or(f64::INFINITY, |t| t.best_frechet)
                })
                .collect();
            rows.push((planner, it.to_string(), values));
        }
    }
    write_rows(path, "iteration", rows)
}

/// Best cost over a 21-point wall-time grid. Depends on timing, so it is
/// not reproducible run to run.
pub fn write_aggregate_time(path: &Path, runs: &[BenchRun]) -> Result<()> {
    let horizon = runs
        .iter()
        .flat_map(|r| r.trace.iter().map(|t| t.wall_seconds))
        .fold(0.0f64, f64::max);
    let mut rows = Vec::new();
    for planner in planners_of(runs) {
        let mine: Vec<&BenchRun> = runs.iter().filter(|r| r.planner == planner).collect();
        for i in 0..=20 {
            let t = horizon * i as f64 / 20.0;
            let values = mine
                .iter()
                .map(|r| {
                    r.trace
                        .iter()
                        .take_while(|row| row.wall_seconds <= t)
                        .last()
                        .map_or(f64::INFINITY, |row| row.best_frechet)
                })
                .collect();
            rows.push((planner, format!("{t:.6}"), values));
        }
    }
    write_rows(path, "wall_seconds", rows)
}
