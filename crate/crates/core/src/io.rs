//! Scenario and run-output files (JSON) and planner traces (CSV).

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::densify::{PlannerParams, Trace, TraceRow};
use crate::error::{Error, Result};
use crate::frechet::discrete_frechet_cost;
use crate::geometry::{MetricWeights, Polyline, TaskPose};
use crate::kinematics::{ArmModel, Config};
use crate::world::World;

/// A planning problem plus the planner settings and seed to run it with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub arm: ArmModel,
    #[serde(default)]
    pub world: World,
    pub reference_path: Polyline,
    #[serde(default)]
    pub metric: MetricWeights,
    #[serde(default)]
    pub planner: PlannerParams,
    #[serde(default)]
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.arm.validate()?;
        self.world.validate()?;
        self.metric.validate()?;
        self.planner.validate()
    }
}

/// Serializes non-finite floats as the strings `"inf"`, `"-inf"`, `"nan"`,
/// which JSON cannot represent natively.
pub mod inf_float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_str(&x.to_string())
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => t
                .parse::<f64>()
                .map_err(|_| serde::de::Error::custom(format!("expected a number or inf, got `{t}`"))),
        }
    }
}

/// A planned path with the data needed to re-score it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Solution {
    pub configs: Vec<Config>,
    /// FK pose of each entry of `configs`.
    pub poses: Vec<TaskPose>,
    /// The discretised reference the cost was measured against.
    pub reference_points: Vec<TaskPose>,
    /// Discrete Fréchet distance between `poses` and `reference_points`.
    pub frechet_cost: f64,
    /// Cost at the common reporting resolution shared by all planners.
    pub report_frechet: f64,
    /// Largest subsample resolution in effect when the path was found.
    pub resolution: usize,
    /// Configurations drawn as arm snapshots (one per layer or waypoint).
    pub snapshots: Vec<Config>,
}

impl Solution {
    pub fn new(
        arm: &ArmModel,
        configs: Vec<Config>,
        reference_points: Vec<TaskPose>,
        w: &MetricWeights,
        report_frechet: f64,
        resolution: usize,
        snapshots: Vec<Config>,
    ) -> Result<Self> {
        let poses = configs.iter().map(|q| arm.fk(q)).collect::<Result<Vec<_>>>()?;
        let frechet_cost = discrete_frechet_cost(&poses, &reference_points, w)?;
        Ok(Solution {
            configs,
            poses,
            reference_points,
            frechet_cost,
            report_frechet,
            resolution,
            snapshots,
        })
    }

    /// Recomputes the Fréchet cost from the stored configurations.
    pub fn evaluate(&self, arm: &ArmModel, w: &MetricWeights) -> Result<f64> {
        let poses = self.configs.iter().map(|q| arm.fk(q)).collect::<Result<Vec<_>>>()?;
        discrete_frechet_cost(&poses, &self.reference_points, w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunOutput {
    pub planner: String,
    #[serde(default)]
    pub strategy: Option<String>,
    pub seed: u64,
    pub solution: Option<Solution>,
    /// Why no solution was produced.
    #[serde(default)]
    pub failure: Option<String>,
    pub trace: Vec<TraceRow>,
}

impl RunOutput {
    pub fn trace(&self) -> Trace {
        Trace { rows: self.trace.clone() }
    }
}

/// Reads a UTF-8 file, naming the path in any I/O error.
pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    parse_json(&text, &path.display().to_string())
}

/// Parses JSON, reporting line and column on failure.
pub fn parse_json<T: DeserializeOwned>(text: &str, source_name: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        source_name: source_name.to_string(),
        message: e.to_string(),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Internal(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn parse_scenario(text: &str, source_name: &str) -> Result<Scenario> {
    let s: Scenario = parse_json(text, source_name)?;
    s.validate()?;
    Ok(s)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let s: Scenario = read_json(path.as_ref())?;
    s.validate()?;
    Ok(s)
}

pub fn save_scenario(path: impl AsRef<Path>, s: &Scenario) -> Result<()> {
    write_json(path.as_ref(), s)
}

pub fn scenario_to_string(s: &Scenario) -> String {
    serde_json::to_string_pretty(s).expect("scenario serializes")
}

pub fn run_output_to_string(out: &RunOutput) -> String {
    serde_json::to_string_pretty(out).expect("run output serializes")
}

pub fn load_run_output(path: impl AsRef<Path>) -> Result<RunOutput> {
    read_json(path.as_ref())
}

pub fn save_run_output(path: impl AsRef<Path>, out: &RunOutput) -> Result<()> {
    write_json(path.as_ref(), out)
}

/// Reads a bare JSON array of poses.
pub fn load_poses(path: impl AsRef<Path>) -> Result<Vec<TaskPose>> {
    read_json(path.as_ref())
}

pub const TRACE_COLUMNS: [&str; 9] = [
    "iteration",
    "wall_seconds",
    "best_frechet",
    "n_layers",
    "total_ik",
    "max_resolution",
    "update_kind",
    "method",
    "collision_checks_cum",
];

fn trace_record(r: &TraceRow) -> [String; 9] {
    [
        r.iteration.to_string(),
        format!("{:.6}", r.wall_seconds),
        r.best_frechet.to_string(),
        r.n_layers.to_string(),
        r.total_ik.to_string(),
        r.max_resolution.to_string(),
        r.update_kind.as_str().to_string(),
        r.method.as_str().to_string(),
        r.collision_checks_cum.to_string(),
    ]
}

pub fn write_trace<W: std::io::Write>(w: W, rows: &[TraceRow]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(TRACE_COLUMNS)?;
    for r in rows {
        csv.write_record(trace_record(r))?;
    }
    csv.flush()?;
    Ok(())
}

pub fn trace_to_string(rows: &[TraceRow]) -> String {
    let mut buf = Vec::new();
    write_trace(&mut buf, rows).expect("writing to memory");
    String::from_utf8(buf).expect("csv is utf-8")
}

pub fn save_trace(path: impl AsRef<Path>, rows: &[TraceRow]) -> Result<()> {
    write_trace(fs::File::create(path)?, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densify::{Method, UpdateKind};

    const MINIMAL: &str = r#"{
        "arm": {"link_lengths": [1, 1, 1, 1], "joint_limits": [
            {"lo": -3.14, "hi": 3.14}, {"lo": -3.14, "hi": 3.14},
            {"lo": -3.14, "hi": 3.14}, {"lo": -3.14, "hi": 3.14}]},
        "reference_path": [{"x": 2, "y": -1, "theta": 0}, {"x": 2, "y": 1, "theta": 0}]
    }"#;

    #[test]
    fn minimal_scenario_loads_and_roundtrips() {
        let s = parse_scenario(MINIMAL, "minimal").unwrap();
        assert_eq!(s.planner, PlannerParams::default());
        let text = scenario_to_string(&s);
        let again = parse_scenario(&text, "again").unwrap();
        assert_eq!(again, s);
        assert_eq!(scenario_to_string(&again), text);
    }

    #[test]
    fn three_link_arm_names_redundancy() {
        let text = MINIMAL.replace("[1, 1, 1, 1]", "[1, 1, 1]").replace(r#", {"lo": -3.14, "hi": 3.14}]"#, "]");
        let err = parse_scenario(&text, "three").unwrap_err();
        assert_eq!(err.kind(), "invariant");
        assert!(err.to_string().contains("redundant"), "{err}");
    }

    #[test]
    fn unknown_fields_rejected_with_location() {
        let text = MINIMAL.replacen('{', r#"{"bogus": 1,"#, 1);
        let err = parse_scenario(&text, "bad").unwrap_err();
        assert_eq!(err.kind(), "parse");
        let msg = err.to_string();
        assert!(msg.contains("bogus") && msg.contains("line"), "{msg}");
    }

    #[test]
    fn trace_csv_columns_and_infinity() {
        let row = TraceRow {
            iteration: 0,
            wall_seconds: 0.5,
            best_frechet: f64::INFINITY,
            n_layers: 4,
            total_ik: 16,
            max_resolution: 1,
            update_kind: UpdateKind::None,
            method: Method::Init,
            collision_checks_cum: 3,
        };
        let text = trace_to_string(&[row.clone()]);
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "iteration,wall_seconds,best_frechet,n_layers,total_ik,max_resolution,update_kind,method,collision_checks_cum"
        );
        assert_eq!(lines.next().unwrap(), "0,0.500000,inf,4,16,1,none,init,3");
        let out = RunOutput {
            planner: "frechet".into(),
            strategy: None,
            seed: 0,
            solution: None,
            failure: Some("infeasible".into()),
            trace: vec![row],
        };
        let json = serde_json::to_string(&out).unwrap();
        let back: RunOutput = serde_json::from_str(&json).unwrap();
        assert_eq!(back, out);
    }
}
