//! Comparison planners: greedy IK chaining and Jacobian pseudo-inverse
//! vector-field following. Both are scored with [`report_cost`], which the
//! main planner's results are also measured with.

use std::f64::consts::TAU;
use std::fmt;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frechet::discrete_frechet_cost;
use crate::geometry::{signed_angle_delta, MetricWeights, Polyline, TaskPose};
use crate::io::Scenario;
use crate::kinematics::{sample_ik, ArmModel, Config};

/// Spacing (metres, radians) used to resample paths before scoring.
pub const REPORT_SPACING: f64 = 0.01;
/// Damping of the least-squares pseudo-inverse.
pub const VF_DAMPING: f64 = 1e-6;
/// Success tolerance on the final pose.
pub const VF_GOAL_TOLERANCE: f64 = 1e-3;
/// Steps without at least this much error reduction count towards a stall.
pub const VF_STALL_EPS: f64 = 1e-9;
pub const VF_STALL_STEPS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "reason", content = "index")]
pub enum FailureReason {
    /// No IK solution at waypoint `j`.
    IkEmpty(usize),
    /// The straight edge leaving waypoint `j` collides.
    EdgeCollision(usize),
    Collision,
    JointLimit,
    Stall,
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailureReason::IkEmpty(j) => write!(f, "ik_empty({j})"),
            FailureReason::EdgeCollision(j) => write!(f, "edge_collision({j})"),
            FailureReason::Collision => f.write_str("collision"),
            FailureReason::JointLimit => f.write_str("joint_limit"),
            FailureReason::Stall => f.write_str("stall"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    /// Configurations in order, on success.
    pub path: Result<Vec<Config>, FailureReason>,
    /// [`report_cost`] of the path; infinite on failure.
    pub frechet_cost: f64,
    pub wall_seconds: f64,
}

impl BaselineResult {
    pub fn succeeded(&self) -> bool {
        self.path.is_ok()
    }
}

/// Poses along the reference spaced at most `spacing` apart, both in
/// position and heading.
pub fn resample_reference(path: &Polyline, spacing: f64) -> Vec<TaskPose> {
    let pts = path.points();
    let mut out = vec![pts[0]];
    for w in pts.windows(2) {
        let span = w[0]
            .position_distance(&w[1])
            .max(signed_angle_delta(w[0].theta, w[1].theta).abs());
        let pieces = ((span / spacing).ceil() as usize).max(1);
        for i in 1..=pieces {
            out.push(w[0].interpolate(&w[1], i as f64 / pieces as f64));
        }
    }
    out
}

/// Configurations along the piecewise-linear C-space path, no joint moving
/// more than `spacing` between consecutive entries.
pub fn subdivide_configs(path: &[Config], spacing: f64) -> Vec<Config> {
    let Some(first) = path.first() else {
        return Vec::new();
    };
    let mut out = vec![first.clone()];
    for w in path.windows(2) {
        let pieces = ((w[0].max_norm_distance(&w[1]) / spacing).ceil() as usize).max(1);
        for i in 1..=pieces {
            out.push(w[0].lerp(&w[1], i as f64 / pieces as f64));
        }
    }
    out
}

/// Discrete Fréchet distance between the finely resampled reference and the
/// FK image of the finely subdivided C-space path.
pub fn report_cost(arm: &ArmModel, reference: &Polyline, path: &[Config], w: &MetricWeights) -> Result<f64> {
    if path.is_empty() {
        return Err(Error::input("cannot score an empty path"));
    }
    let fine = subdivide_configs(path, REPORT_SPACING);
    let poses = fine.iter().map(|q| arm.fk(q)).collect::<Result<Vec<_>>>()?;
    discrete_frechet_cost(&poses, &resample_reference(reference, REPORT_SPACING), w)
}

fn finish(scenario: &Scenario, path: Result<Vec<Config>, FailureReason>, start: Instant) -> Result<BaselineResult> {
    let frechet_cost = match &path {
        Ok(p) => report_cost(&scenario.arm, &scenario.reference_path, p, &scenario.metric)?,
        Err(_) => f64::INFINITY,
    };
    Ok(BaselineResult {
        path,
        frechet_cost,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// One IK sample per waypoint, chained by straight C-space edges, no
/// backtracking. With `nearest` the sample closest to the previous
/// configuration (out of `k0` draws) is taken instead of the first.
pub fn greedy_ik_plan<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R, nearest: bool) -> Result<BaselineResult> {
    scenario.validate()?;
    let start = Instant::now();
    let n = scenario.planner.baseline_waypoints;
    let arm = &scenario.arm;
    let mut path: Vec<Config> = Vec::with_capacity(n);
    for j in 0..n {
        let pose = scenario.reference_path.point_at(j as f64 / (n - 1) as f64);
        let draws = if nearest && j > 0 { scenario.planner.k0 } else { 1 };
        let sols = sample_ik(arm, &pose, draws, rng);
        let chosen = match path.last() {
            Some(prev) if nearest => sols
                .into_iter()
                .min_by(|a, b| prev.distance(a).total_cmp(&prev.distance(b))),
            _ => sols.into_iter().next(),
        };
        let Some(q) = chosen else {
            return finish(scenario, Err(FailureReason::IkEmpty(j)), start);
        };
        let hit = match path.last() {
            Some(prev) => scenario.world.edge_in_collision(arm, prev, &q, scenario.planner.edge_step)?,
            None => scenario.world.config_in_collision(arm, &q)?,
        };
        if hit {
            return finish(scenario, Err(FailureReason::EdgeCollision(j.saturating_sub(1))), start);
        }
        path.push(q);
    }
    finish(scenario, Ok(path), start)
}

/// Tracks a target sliding along the reference with damped least-squares
/// steps clipped to `step_size` per joint. The target advances `step_size`
/// metres of arc length per step.
pub fn vector_field_plan<R: Rng + ?Sized>(scenario: &Scenario, step_size: f64, rng: &mut R) -> Result<BaselineResult> {
    scenario.validate()?;
    if !(step_size > 0.0 && step_size.is_finite()) {
        return Err(Error::input(format!("step size must be positive, got {step_size}")));
    }
    let start = Instant::now();
    let arm = &scenario.arm;
    let reference = &scenario.reference_path;
    let w = &scenario.metric;
    let Some(mut q) = sample_ik(arm, &reference.first(), 1, rng).into_iter().next() else {
        return finish(scenario, Err(FailureReason::IkEmpty(0)), start);
    };
    if scenario.world.config_in_collision(arm, &q)? {
        return finish(scenario, Err(FailureReason::Collision), start);
    }
    let length = reference.length();
    let mut s = 0.0f64;
    let mut path = vec![q.clone()];
    let mut best_err = f64::INFINITY;
    let mut stalled = 0usize;
    let max_steps = (length / step_size).ceil() as usize + 100_000;
    for _ in 0..max_steps {
        s = (s + step_size).min(length);
        let alpha = if length > 0.0 { s / length } else { 1.0 };
        let target = reference.point_at(alpha);
        let at_end = alpha >= 1.0;
        let pose = arm.fk(&q)?;
        let err = [
            target.x - pose.x,
            target.y - pose.y,
            signed_angle_delta(pose.theta, target.theta),
        ];
        let err_norm = crate::geometry::task_distance(&pose, &target, w);
        if at_end {
            if err_norm <= VF_GOAL_TOLERANCE {
                return finish(scenario, Ok(path), start);
            }
            if err_norm < best_err - VF_STALL_EPS {
                best_err = err_norm;
                stalled = 0;
            } else {
                stalled += 1;
                if stalled >= VF_STALL_STEPS {
                    return finish(scenario, Err(FailureReason::Stall), start);
                }
            }
        }
        let mut dq = arm.jacobian(&q)?.damped_pinv_apply(err, VF_DAMPING);
        let biggest = dq.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        if biggest > step_size {
            for d in &mut dq {
                *d *= step_size / biggest;
            }
        }
        // Joints move continuously: a limited joint may not leave its range,
        // a full-turn joint may wind freely.
        let next = Config(q.angles().iter().zip(&dq).map(|(a, d)| a + d).collect());
        let violates = next.angles().iter().zip(&arm.joint_limits).any(|(a, l)| l.hi - l.lo < TAU && !l.contains(*a));
        if violates {
            return finish(scenario, Err(FailureReason::JointLimit), start);
        }
        if scenario.world.edge_in_collision(arm, &q, &next, scenario.planner.edge_step)? {
            return finish(scenario, Err(FailureReason::Collision), start);
        }
        q = next;
        path.push(q.clone());
    }
    finish(scenario, Err(FailureReason::Stall), start)
}
