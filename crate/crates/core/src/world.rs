//! Obstacle environment and collision queries for the arm.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{ArmModel, Config};

const SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: [f64; 2],
    pub b: [f64; 2],
}

fn sub(p: [f64; 2], q: [f64; 2]) -> [f64; 2] {
    [p[0] - q[0], p[1] - q[1]]
}

fn cross(u: [f64; 2], v: [f64; 2]) -> f64 {
    u[0] * v[1] - u[1] * v[0]
}

fn dot(u: [f64; 2], v: [f64; 2]) -> f64 {
    u[0] * v[0] + u[1] * v[1]
}

impl Segment {
    pub fn new(a: [f64; 2], b: [f64; 2]) -> Self {
        Segment { a, b }
    }

    pub fn distance_to_point(&self, p: [f64; 2]) -> f64 {
        let d = sub(self.b, self.a);
        let len2 = dot(d, d);
        let t = if len2 > 0.0 {
            (dot(sub(p, self.a), d) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let c = [self.a[0] + t * d[0], self.a[1] + t * d[1]];
        (p[0] - c[0]).hypot(p[1] - c[1])
    }

    /// Closed-segment intersection; touching counts.
    pub fn intersects(&self, other: &Segment) -> bool {
        let (p, r) = (self.a, sub(self.b, self.a));
        let (q, s) = (other.a, sub(other.b, other.a));
        let o1 = cross(r, sub(q, p));
        let o2 = cross(r, sub(other.b, p));
        let o3 = cross(s, sub(p, q));
        let o4 = cross(s, sub(self.b, q));
        let straddle = |u: f64, v: f64| (u <= SLACK && v >= -SLACK) || (u >= -SLACK && v <= SLACK);
        if straddle(o1, o2) && straddle(o3, o4) {
            // Collinear segments pass the straddle test trivially; check overlap.
            if o1.abs() <= SLACK && o2.abs() <= SLACK {
                return self.distance_to_point(other.a) <= SLACK
                    || self.distance_to_point(other.b) <= SLACK
                    || other.distance_to_point(self.a) <= SLACK
                    || other.distance_to_point(self.b) <= SLACK;
            }
            return true;
        }
        false
    }

    pub fn distance_to_segment(&self, other: &Segment) -> f64 {
        if self.intersects(other) {
            return 0.0;
        }
        self.distance_to_point(other.a)
            .min(self.distance_to_point(other.b))
            .min(other.distance_to_point(self.a))
            .min(other.distance_to_point(self.b))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Obstacle {
    Circle { center: [f64; 2], radius: f64 },
    /// Convex polygon with counter-clockwise vertices.
    Polygon { vertices: Vec<[f64; 2]> },
}

impl Obstacle {
    pub fn circle(center: [f64; 2], radius: f64) -> Result<Self> {
        let o = Obstacle::Circle { center, radius };
        o.validate()?;
        Ok(o)
    }

    pub fn polygon(vertices: Vec<[f64; 2]>) -> Result<Self> {
        let o = Obstacle::Polygon { vertices };
        o.validate()?;
        Ok(o)
    }

    /// Axis-aligned box given by its min and max corners.
    pub fn aabb(min: [f64; 2], max: [f64; 2]) -> Result<Self> {
        Self::polygon(vec![min, [max[0], min[1]], max, [min[0], max[1]]])
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Obstacle::Circle { center, radius } => {
                if !(radius.is_finite() && *radius > 0.0) || !center.iter().all(|c| c.is_finite()) {
                    return Err(Error::invariant("circle radius > 0", format!("radius {radius}")));
                }
            }
            Obstacle::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return Err(Error::invariant("polygon has >= 3 vertices", format!("{} vertices", vertices.len())));
                }
                let n = vertices.len();
                for i in 0..n {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    let c = vertices[(i + 2) % n];
                    if !(a[0].is_finite() && a[1].is_finite()) {
                        return Err(Error::invariant("finite polygon vertices", format!("vertex {i}")));
                    }
                    if cross(sub(b, a), sub(c, b)) <= 0.0 {
                        return Err(Error::invariant(
                            "polygon convex and counter-clockwise",
                            format!("turn at vertex {} is not a strict left turn", (i + 1) % n),
                        ));
                    }
                }
                // Strict left turns everywhere still admit star polygons; total turning must be one revolution.
                let area: f64 = (0..n).map(|i| cross(vertices[i], vertices[(i + 1) % n])).sum();
                let winding: f64 = (0..n)
                    .map(|i| {
                        let a = vertices[i];
                        let b = vertices[(i + 1) % n];
                        let c = vertices[(i + 2) % n];
                        let u = sub(b, a);
                        let v = sub(c, b);
                        cross(u, v).atan2(dot(u, v))
                    })
                    .sum();
                if area <= 0.0 || (winding - std::f64::consts::TAU).abs() > 1e-6 {
                    return Err(Error::invariant("polygon convex and counter-clockwise", "polygon winds more than once"));
                }
            }
        }
        Ok(())
    }

    pub fn contains_point(&self, p: [f64; 2]) -> bool {
        match self {
            Obstacle::Circle { center, radius } => (p[0] - center[0]).hypot(p[1] - center[1]) <= radius + SLACK,
            Obstacle::Polygon { vertices } => {
                let n = vertices.len();
                (0..n).all(|i| {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    let e = sub(b, a);
                    cross(e, sub(p, a)) / (e[0].hypot(e[1])) >= -SLACK
                })
            }
        }
    }

    pub fn intersects_segment(&self, seg: &Segment) -> bool {
        match self {
            Obstacle::Circle { center, radius } => seg.distance_to_point(*center) <= radius + SLACK,
            Obstacle::Polygon { vertices } => {
                if self.contains_point(seg.a) || self.contains_point(seg.b) {
                    return true;
                }
                let n = vertices.len();
                (0..n).any(|i| seg.intersects(&Segment::new(vertices[i], vertices[(i + 1) % n])))
            }
        }
    }

    /// Euclidean distance from the obstacle boundary/interior to a segment (0 when touching).
    pub fn distance_to_segment(&self, seg: &Segment) -> f64 {
        match self {
            Obstacle::Circle { center, radius } => (seg.distance_to_point(*center) - radius).max(0.0),
            Obstacle::Polygon { vertices } => {
                if self.intersects_segment(seg) {
                    return 0.0;
                }
                let n = vertices.len();
                (0..n)
                    .map(|i| seg.distance_to_segment(&Segment::new(vertices[i], vertices[(i + 1) % n])))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct World {
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default)]
    pub self_collision: bool,
}

impl World {
    pub fn new(obstacles: Vec<Obstacle>) -> Result<Self> {
        let w = World {
            obstacles,
            self_collision: false,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn empty() -> Self {
        World::default()
    }

    pub fn validate(&self) -> Result<()> {
        self.obstacles.iter().try_for_each(Obstacle::validate)
    }

    pub fn config_in_collision(&self, arm: &ArmModel, q: &Config) -> Result<bool> {
        let links = arm.fk_links(q)?;
        Ok(self.links_in_collision(&links))
    }

    fn links_in_collision(&self, links: &[Segment]) -> bool {
        if links
            .iter()
            .any(|l| self.obstacles.iter().any(|o| o.intersects_segment(l)))
        {
            return true;
        }
        if self.self_collision {
            for i in 0..links.len() {
                for j in i + 2..links.len() {
                    if links[i].intersects(&links[j]) {
                        return true;
                    }
                }
            }
        }
        false
    }

    /// Checks the straight C-space segment from `a` to `b`.
    ///
    /// The segment is cut into a power-of-two number of pieces so that
    /// consecutive samples differ by at most `step` in max-norm; halving
    /// `step` therefore yields a superset of the same samples.
    pub fn edge_in_collision(&self, arm: &ArmModel, a: &Config, b: &Config, step: f64) -> Result<bool> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::input(format!("edge step must be positive, got {step}")));
        }
        if a.dim() != arm.dof() || b.dim() != arm.dof() {
            return Err(Error::input("edge endpoint dimension does not match arm"));
        }
        let pieces = edge_pieces(a, b, step);
        // Endpoints first: they are the most likely to already be known bad.
        if self.links_in_collision(&arm.fk_links_unchecked(a)) || self.links_in_collision(&arm.fk_links_unchecked(b)) {
            return Ok(true);
        }
        for i in 1..pieces {
            let q = a.lerp(b, i as f64 / pieces as f64);
            if self.links_in_collision(&arm.fk_links_unchecked(&q)) {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

/// Number of equal pieces used to sample an edge at the given step.
pub fn edge_pieces(a: &Config, b: &Config, step: f64) -> usize {
    let span = a.max_norm_distance(b);
    let mut pieces = 1usize;
    while span / pieces as f64 > step {
        pieces *= 2;
    }
    pieces
}
