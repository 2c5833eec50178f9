//! Reproducible random scenario corpus: smoothed random reference paths
//! within reach of a planar arm, plus random boxes near the arm that keep
//! clear of the reference.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::densify::PlannerParams;
use crate::error::{Error, Result};
use crate::geometry::{MetricWeights, Polyline, TaskPose};
use crate::io::Scenario;
use crate::kinematics::{sample_ik, ArmModel};
use crate::rng;
use crate::world::{Obstacle, Segment, World};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenOptions {
    pub link_lengths: Vec<f64>,
    pub obstacles: usize,
    /// Random control points before smoothing.
    pub control_points: usize,
    /// Chaikin corner-cutting passes applied to the control polygon.
    pub smoothing_passes: usize,
    /// Control-point distance from the base, as fractions of the reach.
    pub radius_range: (f64, f64),
    /// Box half-widths (metres).
    pub box_half_range: (f64, f64),
    /// Minimum gap between any box and the reference or the base.
    pub clearance: f64,
    pub planner: PlannerParams,
}

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions {
            link_lengths: vec![1.0; 4],
            obstacles: 3,
            control_points: 4,
            smoothing_passes: 2,
            radius_range: (0.4, 0.8),
            box_half_range: (0.1, 0.25),
            clearance: 0.15,
            planner: PlannerParams::default(),
        }
    }
}

fn chaikin(points: &[TaskPose]) -> Vec<TaskPose> {
    let mut out = vec![points[0]];
    for w in points.windows(2) {
        out.push(w[0].interpolate(&w[1], 0.25));
        out.push(w[0].interpolate(&w[1], 0.75));
    }
    out.push(points[points.len() - 1]);
    out
}

fn random_reference<R: Rng + ?Sized>(rng: &mut R, reach: f64, opts: &GenOptions) -> Result<Polyline> {
    let mut phi = rng.gen_range(-PI..PI);
    let mut pts = Vec::with_capacity(opts.control_points);
    for _ in 0..opts.control_points {
        let r = reach * rng.gen_range(opts.radius_range.0..opts.radius_range.1);
        let theta = phi + rng.gen_range(-0.6..0.6);
        pts.push(TaskPose::new(r * phi.cos(), r * phi.sin(), theta));
        phi += rng.gen_range(-0.6..0.6);
    }
    for _ in 0..opts.smoothing_passes {
        pts = chaikin(&pts);
    }
    pts.dedup_by(|a, b| a.position_distance(b) < 1e-9 && a.theta == b.theta);
    Polyline::new(pts)
}

fn has_free_ik<R: Rng + ?Sized>(arm: &ArmModel, world: &World, pose: &TaskPose, rng: &mut R) -> Result<bool> {
    for q in sample_ik(arm, pose, 16, rng) {
        if !world.config_in_collision(arm, &q)? {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Draws one scenario, retrying until its endpoints have collision-free IK
/// and every densely sampled reference pose has some IK solution.
pub fn generate_one<R: Rng + ?Sized>(rng: &mut R, opts: &GenOptions) -> Result<Scenario> {
    let arm = ArmModel::unlimited(opts.link_lengths.clone())?;
    let reach = arm.reach();
    for _ in 0..1000 {
        let reference = random_reference(rng, reach, opts)?;
        let reachable = (0..=20).all(|i| !sample_ik(&arm, &reference.point_at(i as f64 / 20.0), 1, rng).is_empty());
        if !reachable {
            continue;
        }
        let ref_segments: Vec<Segment> = reference
            .points()
            .windows(2)
            .map(|w| Segment::new([w[0].x, w[0].y], [w[1].x, w[1].y]))
            .collect();
        let mut obstacles = Vec::with_capacity(opts.obstacles);
        let mut tries = 0;
        while obstacles.len() < opts.obstacles && tries < 1000 {
            tries += 1;
            let phi = rng.gen_range(-PI..PI);
            let r = rng.gen_range(0.25 * reach..reach);
            let (hx, hy) = (
                rng.gen_range(opts.box_half_range.0..opts.box_half_range.1),
                rng.gen_range(opts.box_half_range.0..opts.box_half_range.1),
            );
            let (cx, cy) = (r * phi.cos(), r * phi.sin());
            let b = Obstacle::aabb([cx - hx, cy - hy], [cx + hx, cy + hy])?;
            let near_ref = ref_segments.iter().any(|s| b.distance_to_segment(s) < opts.clearance);
            let near_base = b.distance_to_segment(&Segment::new([0.0, 0.0], [0.0, 0.0])) < opts.clearance + 0.3;
            if !near_ref && !near_base {
                obstacles.push(b);
            }
        }
        if obstacles.len() < opts.obstacles {
            continue;
        }
        let world = World::new(obstacles)?;
        if !has_free_ik(&arm, &world, &reference.first(), rng)? || !has_free_ik(&arm, &world, &reference.last(), rng)? {
            continue;
        }
        let sc = Scenario {
            arm: arm.clone(),
            world,
            reference_path: reference,
            metric: MetricWeights::default(),
            planner: opts.planner,
            seed: rng.gen(),
        };
        sc.validate()?;
        return Ok(sc);
    }
    Err(Error::Construction("could not generate a scenario satisfying the constraints".into()))
}

/// `count` scenarios from `seed`; the same inputs always give the same corpus.
pub fn generate(count: usize, seed: u64, opts: &GenOptions) -> Result<Vec<Scenario>> {
    let mut rng = rng::stream(seed, rng::SCENARIOS);
    (0..count).map(|_| generate_one(&mut rng, opts)).collect()
}
