//! Layered C-space graph over IK solutions of reference waypoints, and the
//! path graph over the waypoints themselves.
//!
//! Layer `j` holds IK configurations of waypoint `w_j`. Every vertex is joined
//! to every vertex of the next layer and to every other vertex of its own
//! layer. Each edge carries a subsample resolution (interior points inserted
//! for the Fréchet evaluation) and a lazily determined collision status.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{angle_diff, Polyline, TaskPose};
use crate::kinematics::{sample_ik_with, ArmModel, Config, IkOptions};

pub type LayerId = usize;
pub type VertexId = usize;
pub type EdgeId = usize;

/// Refinement rule for subsample resolution; old samples stay a subset.
pub fn refined_resolution(r: usize) -> usize {
    2 * r + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Unknown,
    Free,
    Blocked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    /// Between consecutive layers; `a` lies in the lower layer.
    Inter,
    /// Within one layer; `a < b`.
    Intra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub id: LayerId,
    pub alpha: f64,
    pub pose: TaskPose,
    pub vertices: Vec<VertexId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub id: VertexId,
    pub layer: LayerId,
    pub config: Config,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub id: EdgeId,
    pub a: VertexId,
    pub b: VertexId,
    pub kind: EdgeKind,
    pub resolution: usize,
    pub status: Status,
    pub alive: bool,
}

impl Edge {
    pub fn other(&self, v: VertexId) -> VertexId {
        if self.a == v {
            self.b
        } else {
            self.a
        }
    }
}

/// Everything a mutation touched, consumed by the product graph update.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChangeReport {
    pub added_layer: Option<LayerId>,
    /// Set when a requested layer insertion found no IK solution.
    pub layer_failed: bool,
    pub added_vertices: Vec<VertexId>,
    pub added_edges: Vec<EdgeId>,
    pub removed_edges: Vec<EdgeId>,
    pub refined_edges: Vec<EdgeId>,
    pub blocked_edges: Vec<EdgeId>,
    pub blocked_vertices: Vec<VertexId>,
    pub split_segments: Vec<SegmentSplit>,
    /// Reference segments whose resolution changed, by endpoint ids.
    pub refined_segments: Vec<(LayerId, LayerId)>,
}

impl ChangeReport {
    pub fn is_empty(&self) -> bool {
        self.added_vertices.is_empty()
            && self.added_edges.is_empty()
            && self.removed_edges.is_empty()
            && self.refined_edges.is_empty()
            && self.blocked_edges.is_empty()
            && self.blocked_vertices.is_empty()
            && self.split_segments.is_empty()
            && self.refined_segments.is_empty()
    }

    pub fn merge(&mut self, other: ChangeReport) {
        self.added_layer = self.added_layer.or(other.added_layer);
        self.layer_failed |= other.layer_failed;
        self.added_vertices.extend(other.added_vertices);
        self.added_edges.extend(other.added_edges);
        self.removed_edges.extend(other.removed_edges);
        self.refined_edges.extend(other.refined_edges);
        self.blocked_edges.extend(other.blocked_edges);
        self.blocked_vertices.extend(other.blocked_vertices);
        self.split_segments.extend(other.split_segments);
        self.refined_segments.extend(other.refined_segments);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentSplit {
    pub from: LayerId,
    pub to: LayerId,
    pub mid: LayerId,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildOptions {
    /// Initial subsample resolution of every new edge and segment.
    pub initial_resolution: usize,
    pub ik: IkOptions,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            initial_resolution: 1,
            ik: IkOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayeredGraph {
    layers: Vec<Layer>,
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    incident: Vec<Vec<EdgeId>>,
    next_layer_id: LayerId,
    default_resolution: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefWaypoint {
    pub id: LayerId,
    pub alpha: f64,
    pub pose: TaskPose,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefSegment {
    pub from: LayerId,
    pub to: LayerId,
    pub resolution: usize,
}

/// Path graph over the sampled reference waypoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefGraph {
    path: Polyline,
    waypoints: Vec<RefWaypoint>,
    /// `segments[i]` joins `waypoints[i]` and `waypoints[i + 1]`.
    segments: Vec<RefSegment>,
}

impl RefGraph {
    pub fn path(&self) -> &Polyline {
        &self.path
    }

    pub fn waypoints(&self) -> &[RefWaypoint] {
        &self.waypoints
    }

    pub fn segments(&self) -> &[RefSegment] {
        &self.segments
    }

    pub fn segment_index(&self, from: LayerId, to: LayerId) -> Option<usize> {
        self.segments.iter().position(|s| s.from == from && s.to == to)
    }

    pub fn max_resolution(&self) -> usize {
        self.segments.iter().map(|s| s.resolution).max().unwrap_or(0)
    }

    /// Waypoint poses with every segment subdivided at its resolution.
    pub fn subdivided_points(&self) -> Vec<TaskPose> {
        let mut out = vec![self.waypoints[0].pose];
        for (i, seg) in self.segments.iter().enumerate() {
            let a = self.waypoints[i].pose;
            let b = self.waypoints[i + 1].pose;
            out.extend(crate::geometry::interior_points(&a, &b, seg.resolution));
            out.push(b);
        }
        out
    }

    pub fn refine_segment(&mut self, index: usize) -> Result<ChangeReport> {
        let seg = self
            .segments
            .get_mut(index)
            .ok_or_else(|| Error::input(format!("no reference segment {index}")))?;
        seg.resolution = refined_resolution(seg.resolution);
        Ok(ChangeReport {
            refined_segments: vec![(seg.from, seg.to)],
            ..Default::default()
        })
    }
}

impl LayeredGraph {
    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer(&self, index: usize) -> &Layer {
        &self.layers[index]
    }

    pub fn layer_index(&self, id: LayerId) -> Option<usize> {
        self.layers.iter().position(|l| l.id == id)
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn vertex(&self, id: VertexId) -> &Vertex {
        &self.vertices[id]
    }

    /// All edges ever created, including dead ones (`alive == false`).
    pub fn all_edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(|e| e.alive)
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id]
    }

    pub fn incident_edges(&self, v: VertexId) -> impl Iterator<Item = &Edge> {
        self.incident[v].iter().map(|&e| &self.edges[e]).filter(|e| e.alive)
    }

    pub fn find_edge(&self, u: VertexId, v: VertexId) -> Option<EdgeId> {
        self.incident_edges(u).find(|e| e.other(u) == v).map(|e| e.id)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn inter_edge_count(&self) -> usize {
        self.edges().filter(|e| e.kind == EdgeKind::Inter).count()
    }

    pub fn intra_edge_count(&self) -> usize {
        self.edges().filter(|e| e.kind == EdgeKind::Intra).count()
    }

    pub fn max_resolution(&self) -> usize {
        self.edges().map(|e| e.resolution).max().unwrap_or(0)
    }

    pub fn default_resolution(&self) -> usize {
        self.default_resolution
    }

    /// Position of a vertex's layer in the sorted layer list.
    pub fn layer_position_of(&self, v: VertexId) -> usize {
        self.layer_index(self.vertices[v].layer).expect("vertex layer exists")
    }

    fn new_vertex(&mut self, layer: LayerId, config: Config) -> VertexId {
        let id = self.vertices.len();
        self.vertices.push(Vertex {
            id,
            layer,
            config,
            status: Status::Unknown,
        });
        self.incident.push(Vec::new());
        id
    }

    fn new_edge(&mut self, a: VertexId, b: VertexId, kind: EdgeKind) -> EdgeId {
        let (a, b) = match kind {
            EdgeKind::Intra if a > b => (b, a),
            _ => (a, b),
        };
        let id = self.edges.len();
        self.edges.push(Edge {
            id,
            a,
            b,
            kind,
            resolution: self.default_resolution,
            status: Status::Unknown,
            alive: true,
        });
        self.incident[a].push(id);
        self.incident[b].push(id);
        id
    }

    fn kill_edge(&mut self, id: EdgeId) {
        self.edges[id].alive = false;
        let (a, b) = (self.edges[id].a, self.edges[id].b);
        self.incident[a].retain(|&e| e != id);
        self.incident[b].retain(|&e| e != id);
    }

    /// Wires a new vertex to both neighbouring layers and its own layer.
    fn wire_vertex(&mut self, v: VertexId, report: &mut ChangeReport) {
        let pos = self.layer_position_of(v);
        let mut plan: Vec<(VertexId, VertexId, EdgeKind)> = Vec::new();
        if pos > 0 {
            for &u in &self.layers[pos - 1].vertices {
                plan.push((u, v, EdgeKind::Inter));
            }
        }
        if pos + 1 < self.layers.len() {
            for &u in &self.layers[pos + 1].vertices {
                plan.push((v, u, EdgeKind::Inter));
            }
        }
        for &u in &self.layers[pos].vertices {
            if u != v {
                plan.push((u, v, EdgeKind::Intra));
            }
        }
        for (a, b, kind) in plan {
            let e = self.new_edge(a, b, kind);
            report.added_edges.push(e);
        }
    }

    /// Appends `extra` fresh IK samples to a layer. Candidates already
    /// present in the layer are dropped, so replaying the same generator
    /// state adds nothing.
    pub fn add_ik_samples<R: Rng + ?Sized>(
        &mut self,
        layer_index: usize,
        extra: usize,
        arm: &ArmModel,
        rng: &mut R,
        ik: &IkOptions,
    ) -> Result<ChangeReport> {
        let layer = self
            .layers
            .get(layer_index)
            .ok_or_else(|| Error::input(format!("no layer at index {layer_index}")))?;
        let (layer_id, pose) = (layer.id, layer.pose);
        let candidates = sample_ik_with(arm, &pose, extra, rng, &[], ik);
        let mut report = ChangeReport::default();
        for q in candidates {
            let dup = self.layers[layer_index]
                .vertices
                .iter()
                .any(|&v| self.vertices[v].config.distance(&q) <= ik.distinct_threshold);
            if dup {
                continue;
            }
            let v = self.new_vertex(layer_id, q);
            self.layers[layer_index].vertices.push(v);
            report.added_vertices.push(v);
            self.wire_vertex(v, &mut report);
        }
        Ok(report)
    }

    /// Inserts a layer for the reference pose at `alpha`, replacing the
    /// direct edges between its neighbours and splitting the reference
    /// segment it falls in. Finding no IK solution is reported, not an error.
    #[allow(clippy::too_many_arguments)]
    pub fn add_layer<R: Rng + ?Sized>(
        &mut self,
        ref_graph: &mut RefGraph,
        alpha: f64,
        k: usize,
        arm: &ArmModel,
        rng: &mut R,
        ik: &IkOptions,
    ) -> Result<ChangeReport> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::input(format!("layer parameter {alpha} must lie strictly inside (0, 1)")));
        }
        if self.layers.iter().any(|l| l.alpha == alpha) {
            return Err(Error::input(format!("a layer already exists at parameter {alpha}")));
        }
        let pos = self.layers.iter().position(|l| l.alpha > alpha).expect("last layer has alpha 1");
        let pose = ref_graph.path.point_at(alpha);
        let configs = sample_ik_with(arm, &pose, k, rng, &[], ik);
        let mut report = ChangeReport::default();
        if configs.is_empty() {
            report.layer_failed = true;
            return Ok(report);
        }
        let (below, above) = (self.layers[pos - 1].id, self.layers[pos].id);
        let bypassed: Vec<EdgeId> = self.layers[pos - 1]
            .vertices
            .iter()
            .flat_map(|&v| self.incident[v].iter().copied())
            .filter(|&e| {
                let edge = &self.edges[e];
                edge.alive && edge.kind == EdgeKind::Inter && self.vertices[edge.b].layer == above
            })
            .collect();
        for e in bypassed {
            self.kill_edge(e);
            report.removed_edges.push(e);
        }
        let id = self.next_layer_id;
        self.next_layer_id += 1;
        self.layers.insert(
            pos,
            Layer {
                id,
                alpha,
                pose,
                vertices: Vec::new(),
            },
        );
        report.added_layer = Some(id);
        for q in configs {
            let v = self.new_vertex(id, q);
            self.layers[pos].vertices.push(v);
            report.added_vertices.push(v);
            self.wire_vertex(v, &mut report);
        }

        let seg_index = ref_graph
            .segment_index(below, above)
            .ok_or_else(|| Error::Internal("reference graph out of sync with layers".into()))?;
        let resolution = ref_graph.segments[seg_index].resolution;
        ref_graph.waypoints.insert(seg_index + 1, RefWaypoint { id, alpha, pose });
        ref_graph.segments.splice(
            seg_index..=seg_index,
            [
                RefSegment { from: below, to: id, resolution },
                RefSegment { from: id, to: above, resolution },
            ],
        );
        report.split_segments.push(SegmentSplit {
            from: below,
            to: above,
            mid: id,
        });
        Ok(report)
    }

    /// Refines edge `id`. Bypassed edges may be refined too: a path found
    /// before the bypass can still be the best one and is scored along them.
    pub fn refine_edge(&mut self, id: EdgeId) -> Result<ChangeReport> {
        let edge = self
            .edges
            .get_mut(id)
            .ok_or_else(|| Error::input(format!("no edge {id}")))?;
        edge.resolution = refined_resolution(edge.resolution);
        Ok(ChangeReport {
            refined_edges: vec![id],
            ..Default::default()
        })
    }

    /// Records a collision verdict. Blocking is reported so the product
    /// graph can drop the edge; a verdict is never revised.
    pub fn set_edge_status(&mut self, id: EdgeId, status: Status) -> ChangeReport {
        let edge = &mut self.edges[id];
        let mut report = ChangeReport::default();
        if edge.status == Status::Unknown {
            edge.status = status;
            if status == Status::Blocked {
                report.blocked_edges.push(id);
            }
        }
        report
    }

    pub fn set_vertex_status(&mut self, id: VertexId, status: Status) -> ChangeReport {
        let v = &mut self.vertices[id];
        let mut report = ChangeReport::default();
        if v.status == Status::Unknown {
            v.status = status;
            if status == Status::Blocked {
                report.blocked_vertices.push(id);
            }
        }
        report
    }

    /// Full structural audit: layer order, the exact edge set, and IK
    /// round trips of every stored configuration.
    pub fn check_invariants(&self, arm: &ArmModel, ref_graph: &RefGraph, ik_tolerance: f64) -> Result<()> {
        let fail = |msg: String| Err(Error::Internal(msg));
        for pair in self.layers.windows(2) {
            if pair[0].alpha >= pair[1].alpha {
                return fail(format!("layer parameters not increasing: {} then {}", pair[0].alpha, pair[1].alpha));
            }
        }
        for layer in &self.layers {
            for &v in &layer.vertices {
                let vert = &self.vertices[v];
                if vert.layer != layer.id {
                    return fail(format!("vertex {v} filed under the wrong layer"));
                }
                let pose = arm.fk(&vert.config)?;
                let err = pose.position_distance(&layer.pose) + angle_diff(pose.theta, layer.pose.theta);
                if err > ik_tolerance {
                    return fail(format!("vertex {v} misses its waypoint by {err}"));
                }
            }
        }
        let mut expected: Vec<(VertexId, VertexId, EdgeKind)> = Vec::new();
        for (j, layer) in self.layers.iter().enumerate() {
            for (i, &a) in layer.vertices.iter().enumerate() {
                for &b in &layer.vertices[i + 1..] {
                    expected.push((a.min(b), a.max(b), EdgeKind::Intra));
                }
                if let Some(next) = self.layers.get(j + 1) {
                    for &b in &next.vertices {
                        expected.push((a, b, EdgeKind::Inter));
                    }
                }
            }
        }
        let mut actual: Vec<(VertexId, VertexId, EdgeKind)> = self.edges().map(|e| (e.a, e.b, e.kind)).collect();
        let key = |t: &(VertexId, VertexId, EdgeKind)| (t.0, t.1, t.2 == EdgeKind::Inter);
        expected.sort_by_key(key);
        actual.sort_by_key(key);
        if expected != actual {
            return fail(format!(
                "edge set mismatch: expected {} edges, found {}",
                expected.len(),
                actual.len()
            ));
        }
        for (v, list) in self.incident.iter().enumerate() {
            if list.iter().any(|&e| !self.edges[e].alive || (self.edges[e].a != v && self.edges[e].b != v)) {
                return fail(format!("stale incidence list at vertex {v}"));
            }
        }
        if ref_graph.waypoints.len() != self.layers.len()
            || ref_graph
                .waypoints
                .iter()
                .zip(&self.layers)
                .any(|(w, l)| w.id != l.id || w.alpha != l.alpha || w.pose != l.pose)
        {
            return fail("reference waypoints out of sync with layers".into());
        }
        if ref_graph.segments.len() + 1 != ref_graph.waypoints.len()
            || ref_graph
                .segments
                .iter()
                .zip(ref_graph.waypoints.windows(2))
                .any(|(s, w)| s.from != w[0].id || s.to != w[1].id)
        {
            return fail("reference segments do not form the waypoint path".into());
        }
        Ok(())
    }
}

/// Samples `n` arc-length-uniform waypoints (endpoints included) and up to
/// `k` IK solutions at each.
pub fn build<R: Rng + ?Sized>(
    reference: &Polyline,
    n: usize,
    k: usize,
    arm: &ArmModel,
    rng: &mut R,
    opts: &BuildOptions,
) -> Result<(LayeredGraph, RefGraph)> {
    if n < 2 {
        return Err(Error::input(format!("need at least 2 layers, got {n}")));
    }
    if k < 1 {
        return Err(Error::input("need at least 1 IK sample per layer"));
    }
    let mut lg = LayeredGraph {
        layers: Vec::with_capacity(n),
        vertices: Vec::new(),
        edges: Vec::new(),
        incident: Vec::new(),
        next_layer_id: n,
        default_resolution: opts.initial_resolution,
    };
    let mut waypoints = Vec::with_capacity(n);
    for j in 0..n {
        let alpha = j as f64 / (n - 1) as f64;
        let pose = reference.point_at(alpha);
        let configs = sample_ik_with(arm, &pose, k, rng, &[], &opts.ik);
        if configs.is_empty() && (j == 0 || j + 1 == n) {
            let which = if j == 0 { "first" } else { "last" };
            return Err(Error::Construction(format!(
                "no IK solution at the {which} waypoint ({:.4}, {:.4}, {:.4})",
                pose.x, pose.y, pose.theta
            )));
        }
        let mut ids = Vec::with_capacity(configs.len());
        for q in configs {
            ids.push(lg.new_vertex(j, q));
        }
        lg.layers.push(Layer {
            id: j,
            alpha,
            pose,
            vertices: ids,
        });
        waypoints.push(RefWaypoint { id: j, alpha, pose });
    }
    for j in 0..n {
        let here = lg.layers[j].vertices.clone();
        for (i, &a) in here.iter().enumerate() {
            for &b in &here[i + 1..] {
                lg.new_edge(a, b, EdgeKind::Intra);
            }
        }
        if j + 1 < n {
            let next = lg.layers[j + 1].vertices.clone();
            for &a in &here {
                for &b in &next {
                    lg.new_edge(a, b, EdgeKind::Inter);
                }
            }
        }
    }
    let segments = (0..n - 1)
        .map(|j| RefSegment {
            from: j,
            to: j + 1,
            resolution: opts.initial_resolution,
        })
        .collect();
    let ref_graph = RefGraph {
        path: reference.clone(),
        waypoints,
        segments,
    };
    Ok((lg, ref_graph))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn arm() -> ArmModel {
        ArmModel::unlimited(vec![1.0; 4]).unwrap()
    }

    fn line() -> Polyline {
        Polyline::new(vec![TaskPose::new(2.0, -1.0, 0.0), TaskPose::new(2.0, 1.0, 0.0)]).unwrap()
    }

    fn opts() -> BuildOptions {
        BuildOptions::default()
    }

    #[test]
    fn two_layers_one_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (lg, rg) = build(&line(), 2, 1, &arm(), &mut rng, &opts()).unwrap();
        assert_eq!(lg.inter_edge_count(), 1);
        assert_eq!(lg.intra_edge_count(), 0);
        assert_eq!(rg.segments().len(), 1);
        lg.check_invariants(&arm(), &rg, 1e-9).unwrap();
    }

    #[test]
    fn three_layers_two_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (lg, rg) = build(&line(), 3, 2, &arm(), &mut rng, &opts()).unwrap();
        assert!(lg.layers().iter().all(|l| l.vertices.len() == 2));
        assert_eq!(lg.inter_edge_count(), 8);
        assert_eq!(lg.intra_edge_count(), 3);
        assert_eq!(lg.layers()[1].alpha, 0.5);
        assert!(rg.segments().iter().all(|s| s.resolution == 1));
        assert!(lg.edges().all(|e| e.status == Status::Unknown && e.resolution == 1));
    }

    #[test]
    fn unreachable_endpoint_fails() {
        let far = Polyline::new(vec![TaskPose::new(9.0, 0.0, 0.0), TaskPose::new(2.0, 0.0, 0.0)]).unwrap();
        let err = build(&far, 3, 2, &arm(), &mut ChaCha8Rng::seed_from_u64(0), &opts()).unwrap_err();
        assert!(matches!(err, Error::Construction(_)));
    }

    #[test]
    fn add_layer_rewires_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (mut lg, mut rg) = build(&line(), 3, 2, &arm(), &mut rng, &opts()).unwrap();
        let k1 = lg.layers()[1].vertices.len();
        let k2 = lg.layers()[2].vertices.len();
        let before_inter = lg.inter_edge_count();
        let before_intra = lg.intra_edge_count();
        let rep = lg.add_layer(&mut rg, 0.75, 3, &arm(), &mut rng, &IkOptions::default()).unwrap();
        let k3 = rep.added_vertices.len();
        assert_eq!(k3, 3);
        assert_eq!(rep.removed_edges.len(), k1 * k2);
        assert_eq!(rep.added_edges.len(), k1 * k3 + k3 * k2 + k3 * (k3 - 1) / 2);
        assert_eq!(lg.inter_edge_count(), before_inter - k1 * k2 + k1 * k3 + k3 * k2);
        assert_eq!(lg.intra_edge_count(), before_intra + 3);
        assert_eq!(lg.layers()[2].alpha, 0.75);
        assert_eq!(rg.waypoints().len(), 4);
        assert_eq!(rep.split_segments.len(), 1);
        lg.check_invariants(&arm(), &rg, 1e-9).unwrap();

        assert!(lg.add_layer(&mut rg, 0.75, 2, &arm(), &mut rng, &IkOptions::default()).is_err());
        assert!(lg.add_layer(&mut rg, 1.0, 2, &arm(), &mut rng, &IkOptions::default()).is_err());
    }

    #[test]
    fn random_mutations_keep_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (mut lg, mut rg) = build(&line(), 3, 2, &arm(), &mut rng, &opts()).unwrap();
        let ik = IkOptions::default();
        for _ in 0..40 {
            let before_v = lg.vertex_count();
            match rng.gen_range(0..4) {
                0 => {
                    let alpha = rng.gen_range(0.01..0.99);
                    let removed_ok = lg.add_layer(&mut rg, alpha, 2, &arm(), &mut rng, &ik).unwrap();
                    assert!(removed_ok.removed_edges.iter().all(|&e| lg.edge(e).kind == EdgeKind::Inter));
                }
                1 => {
                    let j = rng.gen_range(0..lg.layers().len());
                    let edges_before = lg.edges().count();
                    let rep = lg.add_ik_samples(j, 2, &arm(), &mut rng, &ik).unwrap();
                    assert!(rep.removed_edges.is_empty());
                    assert!(lg.edges().count() >= edges_before);
                    assert!(lg.vertex_count() >= before_v);
                }
                2 => {
                    let live: Vec<EdgeId> = lg.edges().map(|e| e.id).collect();
                    let e = live[rng.gen_range(0..live.len())];
                    let r = lg.edge(e).resolution;
                    lg.refine_edge(e).unwrap();
                    assert_eq!(lg.edge(e).resolution, 2 * r + 1);
                }
                _ => {
                    let s = rng.gen_range(0..rg.segments().len());
                    rg.refine_segment(s).unwrap();
                }
            }
            lg.check_invariants(&arm(), &rg, 1e-9).unwrap();
            let sizes: Vec<usize> = lg.layers().iter().map(|l| l.vertices.len()).collect();
            let inter: usize = sizes.windows(2).map(|w| w[0] * w[1]).sum();
            let intra: usize = sizes.iter().map(|k| k * k.saturating_sub(1) / 2).sum();
            assert_eq!(lg.vertex_count(), sizes.iter().sum::<usize>());
            assert_eq!(lg.inter_edge_count(), inter);
            assert_eq!(lg.intra_edge_count(), intra);
        }
    }

    #[test]
    fn add_ik_wiring_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (mut lg, _) = build(&line(), 3, 2, &arm(), &mut rng, &opts()).unwrap();
        let rep = lg.add_ik_samples(1, 1, &arm(), &mut rng, &IkOptions::default()).unwrap();
        assert_eq!(rep.added_vertices.len(), 1);
        assert_eq!(rep.added_edges.len(), 2 + 2 + 2);
        let rep = lg.add_ik_samples(0, 1, &arm(), &mut rng, &IkOptions::default()).unwrap();
        assert_eq!(rep.added_edges.len(), 3 + 2);
    }

    #[test]
    fn add_ik_same_seed_adds_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (mut lg, _) = build(&line(), 3, 2, &arm(), &mut rng, &opts()).unwrap();
        let first = lg.add_ik_samples(1, 3, &arm(), &mut ChaCha8Rng::seed_from_u64(42), &IkOptions::default()).unwrap();
        assert_eq!(first.added_vertices.len(), 3);
        let again = lg.add_ik_samples(1, 3, &arm(), &mut ChaCha8Rng::seed_from_u64(42), &IkOptions::default()).unwrap();
        assert!(again.added_vertices.is_empty());
        assert!(again.is_empty());
    }

    #[test]
    fn refinement_rule() {
        assert_eq!(refined_resolution(1), 3);
        assert_eq!(refined_resolution(0), 1);
        assert_eq!(refined_resolution(refined_resolution(1)), 7);
    }

    #[test]
    fn statuses_are_sticky() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (mut lg, _) = build(&line(), 2, 2, &arm(), &mut rng, &opts()).unwrap();
        let e = lg.edges().next().unwrap().id;
        assert_eq!(lg.set_edge_status(e, Status::Blocked).blocked_edges, vec![e]);
        assert!(lg.set_edge_status(e, Status::Free).is_empty());
        assert_eq!(lg.edge(e).status, Status::Blocked);
    }

    #[test]
    fn serde_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (lg, rg) = build(&line(), 3, 2, &arm(), &mut rng, &opts()).unwrap();
        let s = serde_json::to_string(&(&lg, &rg)).unwrap();
        let (lg2, rg2): (LayeredGraph, RefGraph) = serde_json::from_str(&s).unwrap();
        assert_eq!(lg, lg2);
        assert_eq!(rg, rg2);
    }
}
