//! Planar task-space poses, the weighted pose metric, and reference polylines.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wraps an angle into (-pi, pi].
pub fn normalize_angle(theta: f64) -> f64 {
    let mut a = theta.rem_euclid(TAU);
    if a > PI {
        a -= TAU;
    }
    a
}

/// Signed shortest rotation taking `from` to `to`, in (-pi, pi].
///
/// A half-turn resolves to +pi, so interpolation across an exact antipode
/// always rotates counter-clockwise.
pub fn signed_angle_delta(from: f64, to: f64) -> f64 {
    normalize_angle(to - from)
}

/// Shortest angular separation on the circle, in [0, pi]. Exactly
/// symmetric in its arguments, so distances do not depend on argument order.
pub fn angle_diff(t1: f64, t2: f64) -> f64 {
    let d = (t1 - t2).abs() % TAU;
    d.min(TAU - d)
}

/// End-effector pose in the plane. `theta` is kept in (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawPose")]
pub struct TaskPose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPose {
    x: f64,
    y: f64,
    theta: f64,
}

impl From<RawPose> for TaskPose {
    fn from(raw: RawPose) -> Self {
        TaskPose::new(raw.x, raw.y, raw.theta)
    }
}

impl TaskPose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        TaskPose {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn origin() -> Self {
        TaskPose::new(0.0, 0.0, 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }

    pub fn position_distance(&self, other: &TaskPose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Pose reached by moving `t` of the way from `self` to `other`:
    /// positions linearly, heading along the shortest arc.
    pub fn interpolate(&self, other: &TaskPose, t: f64) -> TaskPose {
        let dtheta = signed_angle_delta(self.theta, other.theta);
        TaskPose::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
            self.theta + dtheta * t,
        )
    }

    /// Rigid-body composition `self * local`.
    pub fn compose(&self, local: &TaskPose) -> TaskPose {
        let (s, c) = self.theta.sin_cos();
        TaskPose::new(
            self.x + c * local.x - s * local.y,
            self.y + s * local.x + c * local.y,
            self.theta + local.theta,
        )
    }

    /// Expresses `world` in the frame of `self`.
    pub fn inverse_transform(&self, world: &TaskPose) -> TaskPose {
        let (s, c) = self.theta.sin_cos();
        let dx = world.x - self.x;
        let dy = world.y - self.y;
        TaskPose::new(c * dx + s * dy, -s * dx + c * dy, world.theta - self.theta)
    }
}

/// Weighting between translational and rotational error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricWeights {
    /// Meters charged per radian of heading error.
    pub w_rot: f64,
}

impl Default for MetricWeights {
    fn default() -> Self {
        MetricWeights { w_rot: 0.17 }
    }
}

impl MetricWeights {
    pub fn new(w_rot: f64) -> Result<Self> {
        let w = MetricWeights { w_rot };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w_rot.is_finite() && self.w_rot >= 0.0) {
            return Err(Error::invariant(
                "w_rot >= 0",
                format!("rotation weight must be finite and nonnegative, got {}", self.w_rot),
            ));
        }
        Ok(())
    }
}

/// Euclidean position distance plus weighted heading separation.
pub fn task_distance(a: &TaskPose, b: &TaskPose, w: &MetricWeights) -> f64 {
    a.position_distance(b) + w.w_rot * angle_diff(a.theta, b.theta)
}

const DUPLICATE_TOL: f64 = 1e-12;

/// Ordered sequence of at least two poses with no consecutive duplicates.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Polyline {
    points: Vec<TaskPose>,
}

impl<'de> Deserialize<'de> for Polyline {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let points = Vec::<TaskPose>::deserialize(d)?;
        Polyline::new(points).map_err(serde::de::Error::custom)
    }
}

impl Polyline {
    pub fn new(points: Vec<TaskPose>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invariant(
                "polyline has >= 2 points",
                format!("got {} point(s)", points.len()),
            ));
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::invariant("finite poses", format!("point {i} is not finite")));
        }
        for (i, pair) in points.windows(2).enumerate() {
            let sep = pair[0].position_distance(&pair[1]) + angle_diff(pair[0].theta, pair[1].theta);
            if sep <= DUPLICATE_TOL {
                return Err(Error::invariant(
                    "no consecutive duplicate points",
                    format!("points {} and {} coincide", i, i + 1),
                ));
            }
        }
        Ok(Polyline { points })
    }

    pub fn points(&self) -> &[TaskPose] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> TaskPose {
        self.points[0]
    }

    pub fn last(&self) -> TaskPose {
        self.points[self.points.len() - 1]
    }

    /// Cumulative positional arc length at each point.
    pub fn cumulative_lengths(&self) -> Vec<f64> {
        let mut acc = Vec::with_capacity(self.points.len());
        let mut total = 0.0;
        acc.push(0.0);
        for pair in self.points.windows(2) {
            total += pair[0].position_distance(&pair[1]);
            acc.push(total);
        }
        acc
    }

    pub fn length(&self) -> f64 {
        self.points
            .windows(2)
            .map(|p| p[0].position_distance(&p[1]))
            .sum()
    }

    /// Pose at normalized positional arc-length parameter `alpha` in [0, 1].
    ///
    /// A path with zero positional length (pure rotation) falls back to a
    /// uniform parameterization over its segments.
    pub fn point_at(&self, alpha: f64) -> TaskPose {
        let alpha = alpha.clamp(0.0, 1.0);
        if alpha <= 0.0 {
            return self.first();
        }
        if alpha >= 1.0 {
            return self.last();
        }
        let cum = self.cumulative_lengths();
        let total = cum[cum.len() - 1];
        let segs = self.points.len() - 1;
        if total <= 0.0 {
            let s = alpha * segs as f64;
            let i = (s.floor() as usize).min(segs - 1);
            return self.points[i].interpolate(&self.points[i + 1], s - i as f64);
        }
        let target = alpha * total;
        let i = match cum.iter().position(|&c| c > target) {
            Some(j) => j - 1,
            None => segs - 1,
        };
        let seg_len = cum[i + 1] - cum[i];
        let t = if seg_len > 0.0 { (target - cum[i]) / seg_len } else { 0.0 };
        self.points[i].interpolate(&self.points[i + 1], t)
    }
}

/// Inserts `r` evenly spaced interior poses into every segment.
pub fn subdivide(poly: &Polyline, r: usize) -> Polyline {
    if r == 0 {
        return poly.clone();
    }
    let pts = poly.points();
    let mut out = Vec::with_capacity(pts.len() + r * (pts.len() - 1));
    for pair in pts.windows(2) {
        out.push(pair[0]);
        out.extend(interior_points(&pair[0], &pair[1], r));
    }
    out.push(pts[pts.len() - 1]);
    Polyline { points: out }
}

/// The `r` interior poses of segment `a`-`b` at parameters i/(r+1).
pub fn interior_points(a: &TaskPose, b: &TaskPose, r: usize) -> impl Iterator<Item = TaskPose> {
    let (a, b) = (*a, *b);
    (1..=r).map(move |i| a.interpolate(&b, i as f64 / (r + 1) as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn w() -> MetricWeights {
        MetricWeights::default()
    }

    #[test]
    fn distance_examples() {
        let o = TaskPose::origin();
        assert_eq!(task_distance(&o, &o, &w()), 0.0);
        assert!((task_distance(&o, &TaskPose::new(3.0, 4.0, 0.0), &w()) - 5.0).abs() < 1e-15);
        let d = task_distance(&o, &TaskPose::new(0.0, 0.0, PI), &w());
        assert!((d - 0.17 * PI).abs() < 1e-15);
        assert!((d - 0.5341).abs() < 1e-4);
    }

    #[test]
    fn angle_diff_examples() {
        assert!(angle_diff(0.0, TAU).abs() < 1e-15);
        assert!((angle_diff(0.0, PI) - PI).abs() < 1e-15);
        assert!((angle_diff(-3.0 * PI / 4.0, 3.0 * PI / 4.0) - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn angle_diff_periodic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let t: f64 = rng.gen_range(-10.0..10.0);
            let k: i32 = rng.gen_range(-5..=5);
            assert!(angle_diff(t, t + TAU * k as f64) < 1e-9);
            assert_eq!(angle_diff(t, t), 0.0);
            let u: f64 = rng.gen_range(-10.0..10.0);
            assert_eq!(angle_diff(t, u), angle_diff(u, t));
            assert!((0.0..=PI).contains(&angle_diff(t, u)));
        }
    }

    #[test]
    fn theta_normalized_on_construction() {
        assert_eq!(TaskPose::new(0.0, 0.0, -PI).theta, PI);
        assert!((TaskPose::new(0.0, 0.0, 3.0 * PI).theta - PI).abs() < 1e-12);
        let p: TaskPose = serde_json::from_str(r#"{"x":1,"y":2,"theta":7.0}"#).unwrap();
        assert!(p.theta > -PI && p.theta <= PI);
    }

    #[test]
    fn triangle_inequality_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pose = |rng: &mut ChaCha8Rng| {
            TaskPose::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-PI..PI))
        };
        let wt = MetricWeights::new(0.17).unwrap();
        for _ in 0..1000 {
            let (a, b, c) = (pose(&mut rng), pose(&mut rng), pose(&mut rng));
            let ac = task_distance(&a, &c, &wt);
            assert!(ac <= task_distance(&a, &b, &wt) + task_distance(&b, &c, &wt) + 1e-9);
            assert!((task_distance(&a, &b, &wt) - task_distance(&b, &a, &wt)).abs() < 1e-15);
        }
    }

    #[test]
    fn subdivide_counts_and_midpoint() {
        let seg = Polyline::new(vec![TaskPose::origin(), TaskPose::new(2.0, 0.0, 1.0)]).unwrap();
        let s = subdivide(&seg, 1);
        assert_eq!(s.len(), 3);
        assert_eq!(s.points()[1], TaskPose::new(1.0, 0.0, 0.5));
        assert_eq!(subdivide(&seg, 0), seg);

        let three = Polyline::new(vec![
            TaskPose::origin(),
            TaskPose::new(1.0, 0.0, 0.0),
            TaskPose::new(1.0, 1.0, 0.0),
        ])
        .unwrap();
        let s = subdivide(&three, 2);
        assert_eq!(s.len(), 7);
        assert_eq!(s.points()[0], three.points()[0]);
        assert_eq!(s.points()[3], three.points()[1]);
        assert_eq!(s.points()[6], three.points()[2]);
    }

    #[test]
    fn subdivide_uniform_position_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let pts: Vec<TaskPose> = (0..4)
                .map(|_| TaskPose::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-PI..PI)))
                .collect();
            let poly = Polyline::new(pts.clone()).unwrap();
            let r = rng.gen_range(0..6usize);
            let sub = subdivide(&poly, r);
            for (s, pair) in pts.windows(2).enumerate() {
                let chord = pair[0].position_distance(&pair[1]) / (r + 1) as f64;
                for k in 0..=r {
                    let i = s * (r + 1) + k;
                    let step = sub.points()[i].position_distance(&sub.points()[i + 1]);
                    assert!((step - chord).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn antipodal_interpolation_turns_positive() {
        let a = TaskPose::new(0.0, 0.0, 0.0);
        let b = TaskPose::new(1.0, 0.0, PI);
        assert!((a.interpolate(&b, 0.5).theta - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn polyline_rejects_bad_input() {
        assert!(Polyline::new(vec![TaskPose::origin()]).is_err());
        assert!(Polyline::new(vec![TaskPose::origin(), TaskPose::origin()]).is_err());
        assert!(serde_json::from_str::<Polyline>(r#"[{"x":0,"y":0,"theta":0}]"#).is_err());
    }

    #[test]
    fn point_at_uses_positional_arc_length() {
        let poly = Polyline::new(vec![
            TaskPose::origin(),
            TaskPose::new(1.0, 0.0, 0.0),
            TaskPose::new(1.0, 3.0, 0.0),
        ])
        .unwrap();
        let p = poly.point_at(0.5);
        assert!((p.x - 1.0).abs() < 1e-12 && (p.y - 1.0).abs() < 1e-12);
        assert_eq!(poly.point_at(0.0), poly.first());
        assert_eq!(poly.point_at(1.0), poly.last());
    }

    #[test]
    fn compose_and_inverse_roundtrip() {
        let frame = TaskPose::new(0.3, -1.2, 0.7);
        let p = TaskPose::new(2.0, 0.5, -2.9);
        let local = frame.inverse_transform(&p);
        let back = frame.compose(&local);
        assert!(task_distance(&back, &p, &MetricWeights { w_rot: 1.0 }) < 1e-12);
    }
}
