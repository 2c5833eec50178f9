//! Cross product of the reference path complex and the layered graph, with
//! bottleneck-cost search, lazy collision evaluation and incremental updates.
//!
//! Both factors are one-dimensional complexes whose edges are subdivided at
//! their current resolution; subdivision points are complex vertices. A product
//! vertex `(w, q)` costs `d_TS(w, FK(q))` and a product edge costs the larger of
//! its endpoint costs. Two product vertices are adjacent when their factors
//! are equal-and-adjacent, adjacent-and-equal, or adjacent-and-adjacent.
//!
//! Search walks edges forward only: the reference component never moves
//! backwards and inter-layer chains are walked from the lower layer to the
//! upper one. Intra-layer chains may be walked either way. A path thus pairs
//! a layer-monotone C-space walk with a monotone traversal of the reference,
//! which is exactly a discrete Fréchet coupling.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{task_distance, MetricWeights, TaskPose};
use crate::kinematics::{ArmModel, Config};
use crate::layered_graph::{ChangeReport, EdgeId, EdgeKind, LayerId, LayeredGraph, RefGraph, Status, VertexId};
use crate::world::World;

/// Node of the subdivided reference complex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RefKey {
    Waypoint(LayerId),
    /// Point at parameter `num/den` (reduced) on the segment `from -> to`.
    Interior { from: LayerId, to: LayerId, num: usize, den: usize },
}

/// Node of the subdivided layered complex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LgKey {
    Vertex(VertexId),
    /// Configuration at parameter `num/den` (reduced) along edge `a -> b`.
    Interior { edge: EdgeId, num: usize, den: usize },
}

impl LgKey {
    pub fn parameter(&self) -> f64 {
        match self {
            LgKey::Vertex(_) => 0.0,
            LgKey::Interior { num, den, .. } => *num as f64 / *den as f64,
        }
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub(crate) fn reduced(num: usize, den: usize) -> (usize, usize) {
    let g = gcd(num, den);
    (num / g, den / g)
}

pub type ProductKey = (RefKey, LgKey);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductVertex {
    pub ref_node: RefKey,
    pub lg_node: LgKey,
    /// Position of `ref_node` along the subdivided reference.
    pub ref_index: usize,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub product_path: Vec<ProductVertex>,
    pub bottleneck_cost: f64,
    /// Layered-complex configurations along the path, consecutive repeats collapsed.
    pub extracted: Vec<Config>,
    pub extracted_poses: Vec<TaskPose>,
    /// Every node of the subdivided reference, in order.
    pub reference_points: Vec<TaskPose>,
    /// Layered-graph vertices visited, in order, consecutive repeats collapsed.
    pub lg_vertices: Vec<VertexId>,
    /// Layered-graph edges whose chain the path touches, in order.
    pub lg_edges: Vec<EdgeId>,
    /// Layered-complex nodes along the path, consecutive repeats collapsed.
    pub lg_nodes: Vec<LgKey>,
    /// Edge whose chain carries each move `lg_nodes[i] -> lg_nodes[i + 1]`.
    pub lg_moves: Vec<EdgeId>,
}

impl SearchResult {
    /// Cost of each product edge along the path.
    pub fn edge_costs(&self) -> Vec<f64> {
        self.product_path
            .windows(2)
            .map(|w| w[0].cost.max(w[1].cost))
            .collect()
    }
}

#[derive(Debug, Clone)]
struct RefNode {
    key: RefKey,
    pose: TaskPose,
    alive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Place {
    Vertex(VertexId),
    Interior { edge: EdgeId, pos: usize },
}

#[derive(Debug, Clone)]
struct LgNode {
    key: LgKey,
    config: Config,
    pose: TaskPose,
    place: Place,
    alive: bool,
    blocked: bool,
}

#[derive(Debug, Clone)]
struct Chain {
    a: VertexId,
    b: VertexId,
    /// Inter-layer chains are only walked from `a` towards `b`.
    directed: bool,
    /// Slots from `a` to `b`, endpoints included.
    nodes: Vec<usize>,
    blocked: bool,
}

#[derive(Clone, Copy, PartialEq)]
struct HeapItem(f64, u32, u32);

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .total_cmp(&other.0)
            .then(self.1.cmp(&other.1))
            .then(self.2.cmp(&other.2))
    }
}

/// The cross-product graph. Product edges are implicit in the two factor
/// complexes; vertex costs are cached densely per (layered node, ref node).
#[derive(Debug, Clone)]
pub struct ProductGraph {
    arm: ArmModel,
    weights: MetricWeights,

    ref_nodes: Vec<RefNode>,
    ref_slot_of: HashMap<RefKey, usize>,
    ref_order: Vec<usize>,
    ref_next: Vec<Option<usize>>,
    ref_pos: Vec<usize>,

    lg_nodes: Vec<LgNode>,
    lg_slot_of: HashMap<LgKey, usize>,
    vertex_slot: Vec<Option<usize>>,
    chains: Vec<Option<Chain>>,
    vertex_chains: Vec<Vec<EdgeId>>,
    sources: Vec<usize>,
    targets: Vec<usize>,

    /// `costs[lg_slot][ref_slot]`.
    costs: Vec<Vec<f64>>,
    /// Final labels of vertices settled by the last search; infinity otherwise.
    labels: Vec<Vec<f64>>,
    /// Cached labels strictly below this value survive the pending changes.
    reuse_below: f64,
    cache_valid: bool,
}

impl ProductGraph {
    /// Builds the product from scratch at the current edge resolutions.
    pub fn build(lg: &LayeredGraph, rg: &RefGraph, arm: &ArmModel, weights: &MetricWeights) -> Result<Self> {
        if lg.layers().is_empty() || lg.layers()[0].vertices.is_empty() || lg.layers()[lg.layers().len() - 1].vertices.is_empty() {
            return Err(Error::Construction("first and last layers must be nonempty".into()));
        }
        let mut pg = ProductGraph {
            arm: arm.clone(),
            weights: *weights,
            ref_nodes: Vec::new(),
            ref_slot_of: HashMap::new(),
            ref_order: Vec::new(),
            ref_next: Vec::new(),
            ref_pos: Vec::new(),
            lg_nodes: Vec::new(),
            lg_slot_of: HashMap::new(),
            vertex_slot: Vec::new(),
            chains: Vec::new(),
            vertex_chains: Vec::new(),
            sources: Vec::new(),
            targets: Vec::new(),
            costs: Vec::new(),
            labels: Vec::new(),
            reuse_below: f64::INFINITY,
            cache_valid: false,
        };
        for (key, pose) in ref_complex(rg) {
            let slot = pg.push_ref_node(key, pose);
            pg.ref_order.push(slot);
        }
        pg.relink_ref();
        for v in lg.vertices() {
            pg.push_vertex_node(v.id, &v.config, v.status == Status::Blocked);
        }
        for e in lg.edges() {
            pg.sync_chain(lg, e.id, &mut Vec::new());
        }
        pg.refresh_endpoints(lg);
        Ok(pg)
    }

    pub fn weights(&self) -> &MetricWeights {
        &self.weights
    }

    fn ref_alive(&self) -> impl Iterator<Item = usize> + '_ {
        self.ref_order.iter().copied()
    }

    fn lg_alive(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.lg_nodes.len()).filter(|&s| self.lg_nodes[s].alive)
    }

    pub fn ref_node_count(&self) -> usize {
        self.ref_order.len()
    }

    pub fn lg_node_count(&self) -> usize {
        self.lg_alive().count()
    }

    pub fn vertex_count(&self) -> usize {
        self.ref_node_count() * self.lg_node_count()
    }

    /// Subdivided reference, in order.
    pub fn reference_points(&self) -> Vec<TaskPose> {
        self.ref_order.iter().map(|&r| self.ref_nodes[r].pose).collect()
    }

    fn push_ref_node(&mut self, key: RefKey, pose: TaskPose) -> usize {
        let slot = self.ref_nodes.len();
        self.ref_nodes.push(RefNode { key, pose, alive: true });
        self.ref_slot_of.insert(key, slot);
        self.ref_next.push(None);
        self.ref_pos.push(usize::MAX);
        for (l, row) in self.costs.iter_mut().enumerate() {
            let node = &self.lg_nodes[l];
            row.push(if node.alive {
                task_distance(&pose, &node.pose, &self.weights)
            } else {
                f64::INFINITY
            });
        }
        for row in &mut self.labels {
            row.push(f64::INFINITY);
        }
        slot
    }

    fn push_lg_node(&mut self, key: LgKey, config: Config, place: Place, blocked: bool) -> usize {
        let slot = self.lg_nodes.len();
        let pose = self.arm.fk_unchecked(&config);
        let row = self
            .ref_nodes
            .iter()
            .map(|r| {
                if r.alive {
                    task_distance(&r.pose, &pose, &self.weights)
                } else {
                    f64::INFINITY
                }
            })
            .collect();
        self.costs.push(row);
        self.labels.push(vec![f64::INFINITY; self.ref_nodes.len()]);
        self.lg_nodes.push(LgNode {
            key,
            config,
            pose,
            place,
            alive: true,
            blocked,
        });
        self.lg_slot_of.insert(key, slot);
        slot
    }

    fn push_vertex_node(&mut self, v: VertexId, config: &Config, blocked: bool) -> usize {
        let slot = self.push_lg_node(LgKey::Vertex(v), config.clone(), Place::Vertex(v), blocked);
        if self.vertex_slot.len() <= v {
            self.vertex_slot.resize(v + 1, None);
            self.vertex_chains.resize(v + 1, Vec::new());
        }
        self.vertex_slot[v] = Some(slot);
        slot
    }

    fn relink_ref(&mut self) {
        // Waypoint/interior keys do not sort geometrically, so order is
        // recovered from the live nodes' stored order list.
        for n in &mut self.ref_next {
            *n = None;
        }
        for (i, &s) in self.ref_order.iter().enumerate() {
            self.ref_pos[s] = i;
            if i + 1 < self.ref_order.len() {
                self.ref_next[s] = Some(self.ref_order[i + 1]);
            }
        }
    }

    /// Makes the chain for `edge` match the layered graph. Touched layered
    /// slots (endpoints and any interior node whose neighbours change) are
    /// appended to `touched`.
    fn sync_chain(&mut self, lg: &LayeredGraph, edge: EdgeId, touched: &mut Vec<usize>) {
        if self.chains.len() <= edge {
            self.chains.resize(edge + 1, None);
        }
        let e = lg.edge(edge);
        let old = self.chains[edge].take();
        if let Some(ch) = &old {
            touched.extend(ch.nodes.iter().copied());
        }
        if !e.alive {
            if let Some(ch) = old {
                for &s in &ch.nodes[1..ch.nodes.len() - 1] {
                    self.lg_nodes[s].alive = false;
                }
                self.vertex_chains[ch.a].retain(|&x| x != edge);
                self.vertex_chains[ch.b].retain(|&x| x != edge);
            }
            return;
        }
        let sa = self.vertex_slot[e.a].expect("edge endpoint has a node");
        let sb = self.vertex_slot[e.b].expect("edge endpoint has a node");
        let den = e.resolution + 1;
        let mut nodes = Vec::with_capacity(den + 1);
        nodes.push(sa);
        let (qa, qb) = (lg.vertex(e.a).config.clone(), lg.vertex(e.b).config.clone());
        for i in 1..den {
            let (num, d) = reduced(i, den);
            let key = LgKey::Interior { edge, num, den: d };
            let slot = match self.lg_slot_of.get(&key) {
                Some(&s) if self.lg_nodes[s].alive => s,
                _ => {
                    let q = qa.lerp(&qb, num as f64 / d as f64);
                    let s = self.push_lg_node(key, q, Place::Interior { edge, pos: 0 }, false);
                    touched.push(s);
                    s
                }
            };
            self.lg_nodes[slot].place = Place::Interior { edge, pos: i };
            nodes.push(slot);
        }
        nodes.push(sb);
        if let Some(ch) = &old {
            for &s in &ch.nodes[1..ch.nodes.len() - 1] {
                if !nodes.contains(&s) {
                    self.lg_nodes[s].alive = false;
                }
            }
        } else {
            self.vertex_chains[e.a].push(edge);
            self.vertex_chains[e.b].push(edge);
        }
        touched.push(sa);
        touched.push(sb);
        self.chains[edge] = Some(Chain {
            a: e.a,
            b: e.b,
            directed: e.kind == EdgeKind::Inter,
            nodes,
            blocked: e.status == Status::Blocked,
        });
    }

    fn refresh_endpoints(&mut self, lg: &LayeredGraph) {
        let layers = lg.layers();
        let slots = |vs: &[VertexId]| -> Vec<usize> { vs.iter().filter_map(|&v| self.vertex_slot[v]).collect() };
        self.sources = slots(&layers[0].vertices);
        self.targets = slots(&layers[layers.len() - 1].vertices);
    }

    /// Brings the product in line with a layered/reference graph mutation
    /// and narrows the range of reusable search labels.
    pub fn apply_change(&mut self, report: &ChangeReport, lg: &LayeredGraph, rg: &RefGraph) -> Result<()> {
        let mut touched_lg: Vec<usize> = Vec::new();
        let mut touched_ref: Vec<usize> = Vec::new();
        let mut new_sources: Vec<usize> = Vec::new();

        if !report.split_segments.is_empty() || !report.refined_segments.is_empty() {
            self.sync_ref(rg, &mut touched_ref)?;
        }

        for &v in &report.added_vertices {
            if v >= lg.vertex_count() {
                return Err(Error::Internal(format!("change report names unknown vertex {v}")));
            }
            if self.vertex_slot.get(v).copied().flatten().is_some() {
                return Err(Error::Internal(format!("vertex {v} added twice")));
            }
            let vert = lg.vertex(v);
            let s = self.push_vertex_node(v, &vert.config, vert.status == Status::Blocked);
            touched_lg.push(s);
            if lg.layer_position_of(v) == 0 {
                new_sources.push(s);
            }
        }
        for &e in report
            .removed_edges
            .iter()
            .chain(&report.added_edges)
            .chain(&report.refined_edges)
        {
            if e >= lg.all_edges().len() {
                return Err(Error::Internal(format!("change report names unknown edge {e}")));
            }
            self.sync_chain(lg, e, &mut touched_lg);
        }
        for &e in &report.blocked_edges {
            let ch = self
                .chains
                .get_mut(e)
                .and_then(|c| c.as_mut())
                .ok_or_else(|| Error::Internal(format!("blocked edge {e} has no chain")))?;
            ch.blocked = true;
            touched_lg.extend(ch.nodes.iter().copied());
        }
        for &v in &report.blocked_vertices {
            let s = self
                .vertex_slot
                .get(v)
                .copied()
                .flatten()
                .ok_or_else(|| Error::Internal(format!("blocked vertex {v} has no node")))?;
            self.lg_nodes[s].blocked = true;
            touched_lg.push(s);
        }
        self.refresh_endpoints(lg);

        let mut delta = f64::INFINITY;
        for &l in &touched_lg {
            for &x in &self.labels[l] {
                delta = delta.min(x);
            }
        }
        for &r in &touched_ref {
            for row in &self.labels {
                delta = delta.min(row[r]);
            }
        }
        if let Some(&first) = self.ref_order.first() {
            for &s in &new_sources {
                delta = delta.min(self.costs[s][first]);
            }
        }
        self.reuse_below = self.reuse_below.min(delta);
        Ok(())
    }

    fn sync_ref(&mut self, rg: &RefGraph, touched: &mut Vec<usize>) -> Result<()> {
        let desired = ref_complex(rg);
        let old_order = std::mem::take(&mut self.ref_order);
        let mut order = Vec::with_capacity(desired.len());
        for (key, pose) in desired {
            let slot = match self.ref_slot_of.get(&key) {
                Some(&s) if self.ref_nodes[s].alive => s,
                Some(_) => return Err(Error::Internal(format!("reference node {key:?} revived"))),
                None => {
                    let s = self.push_ref_node(key, pose);
                    touched.push(s);
                    s
                }
            };
            order.push(slot);
        }
        let keep: BTreeSet<usize> = order.iter().copied().collect();
        for &s in &old_order {
            if !keep.contains(&s) {
                self.ref_nodes[s].alive = false;
                touched.push(s);
            }
        }
        // Any surviving node whose successor changed is touched too.
        let old_next: HashMap<usize, Option<usize>> = old_order
            .iter()
            .enumerate()
            .map(|(i, &s)| (s, old_order.get(i + 1).copied()))
            .collect();
        for (i, &s) in order.iter().enumerate() {
            let next = order.get(i + 1).copied();
            if let Some(prev_next) = old_next.get(&s) {
                if *prev_next != next {
                    touched.push(s);
                }
            }
        }
        self.ref_order = order;
        self.relink_ref();
        Ok(())
    }

    fn chain_of(&self, edge: EdgeId) -> &Chain {
        self.chains[edge].as_ref().expect("live chain")
    }

    /// Forward moves of the layered component from slot `l`.
    fn lg_forward(&self, l: usize, out: &mut Vec<usize>) {
        out.clear();
        let node = &self.lg_nodes[l];
        if node.blocked {
            return;
        }
        match node.place {
            Place::Vertex(v) => {
                for &e in &self.vertex_chains[v] {
                    let ch = self.chain_of(e);
                    if ch.blocked {
                        continue;
                    }
                    if ch.a == v {
                        out.push(ch.nodes[1]);
                    } else if !ch.directed {
                        out.push(ch.nodes[ch.nodes.len() - 2]);
                    }
                }
            }
            Place::Interior { edge, pos } => {
                let ch = self.chain_of(edge);
                if !ch.blocked {
                    out.push(ch.nodes[pos + 1]);
                    if !ch.directed {
                        out.push(ch.nodes[pos - 1]);
                    }
                }
            }
        }
        out.retain(|&s| !self.lg_nodes[s].blocked);
    }

    /// Undirected neighbours in the subdivided layered complex.
    fn lg_adjacent(&self, l: usize) -> Vec<usize> {
        match self.lg_nodes[l].place {
            Place::Vertex(v) => self.vertex_chains[v]
                .iter()
                .map(|&e| {
                    let ch = self.chain_of(e);
                    if ch.a == v {
                        ch.nodes[1]
                    } else {
                        ch.nodes[ch.nodes.len() - 2]
                    }
                })
                .collect(),
            Place::Interior { edge, pos } => {
                let ch = self.chain_of(edge);
                vec![ch.nodes[pos - 1], ch.nodes[pos + 1]]
            }
        }
    }

    fn product_key(&self, l: usize, r: usize) -> ProductKey {
        (self.ref_nodes[r].key, self.lg_nodes[l].key)
    }

    /// Forward product neighbours of `(l, r)`.
    fn for_each_forward(&self, l: usize, r: usize, scratch: &mut Vec<usize>, mut f: impl FnMut(usize, usize)) {
        self.lg_forward(l, scratch);
        for &l2 in scratch.iter() {
            f(l2, r);
        }
        if let Some(r2) = self.ref_next[r] {
            f(l, r2);
            for &l2 in scratch.iter() {
                f(l2, r2);
            }
        }
    }

    /// Minimum bottleneck over source-target paths if it is below `bound`,
    /// reusing cached labels that pending changes cannot have affected.
    /// Labels at or above the cut-off stay unsettled, so the settled set is
    /// always a prefix by label and remains reusable.
    fn bottleneck_value(&mut self, bound: f64) -> Option<f64> {
        let (nl, nr) = (self.lg_nodes.len(), self.ref_nodes.len());
        let idx = |l: usize, r: usize| l * nr + r;
        let first = *self.ref_order.first()?;
        let last = *self.ref_order.last()?;
        let threshold = if self.cache_valid { self.reuse_below } else { f64::NEG_INFINITY };
        let mut tent = vec![f64::INFINITY; nl * nr];
        let mut settled = vec![false; nl * nr];
        let mut is_target = vec![false; nl];
        for &t in &self.targets {
            is_target[t] = true;
        }
        let mut best = f64::INFINITY;
        let mut heap: BinaryHeap<Reverse<HeapItem>> = BinaryHeap::new();
        let mut scratch = Vec::new();

        let mut reused = Vec::new();
        if threshold > f64::NEG_INFINITY {
            for l in self.lg_alive() {
                for r in self.ref_alive() {
                    let lab = self.labels[l][r];
                    if lab < threshold {
                        settled[idx(l, r)] = true;
                        tent[idx(l, r)] = lab;
                        reused.push((l, r));
                        if r == last && is_target[l] {
                            best = best.min(lab);
                        }
                    }
                }
            }
        }
        for &(l, r) in &reused {
            let lab = tent[idx(l, r)];
            self.for_each_forward(l, r, &mut scratch, |l2, r2| {
                let i = idx(l2, r2);
                if !settled[i] {
                    let cand = lab.max(self.costs[l2][r2]);
                    if cand < tent[i] {
                        tent[i] = cand;
                        heap.push(Reverse(HeapItem(cand, l2 as u32, r2 as u32)));
                    }
                }
            });
        }
        for &s in &self.sources {
            let i = idx(s, first);
            if !settled[i] && !self.lg_nodes[s].blocked {
                let c = self.costs[s][first];
                if c < tent[i] {
                    tent[i] = c;
                    heap.push(Reverse(HeapItem(c, s as u32, first as u32)));
                }
            }
        }
        while let Some(Reverse(HeapItem(lab, l, r))) = heap.pop() {
            let (l, r) = (l as usize, r as usize);
            let i = idx(l, r);
            if settled[i] || lab > tent[i] {
                continue;
            }
            if lab >= best.min(bound) {
                break;
            }
            settled[i] = true;
            if r == last && is_target[l] {
                best = lab;
                break;
            }
            self.for_each_forward(l, r, &mut scratch, |l2, r2| {
                let j = idx(l2, r2);
                if !settled[j] {
                    let cand = lab.max(self.costs[l2][r2]);
                    if cand < tent[j] {
                        tent[j] = cand;
                        heap.push(Reverse(HeapItem(cand, l2 as u32, r2 as u32)));
                    }
                }
            });
        }
        for l in 0..nl {
            for r in 0..nr {
                let i = idx(l, r);
                self.labels[l][r] = if settled[i] { tent[i] } else { f64::INFINITY };
            }
        }
        self.cache_valid = true;
        self.reuse_below = f64::INFINITY;
        (best < bound).then_some(best)
    }

    /// Forgets cached labels so the next search runs from scratch.
    pub fn invalidate_cache(&mut self) {
        self.cache_valid = false;
    }

    /// Minimum-bottleneck source-to-target path, or `None` when no
    /// unblocked path exists. Among optimal paths the one with fewest edges
    /// is returned; remaining ties pick the smallest predecessor key.
    pub fn bottleneck_search(&mut self) -> Option<SearchResult> {
        self.bottleneck_search_below(f64::INFINITY)
    }

    /// [`Self::bottleneck_search`] restricted to paths cheaper than `bound`;
    /// the search stops as soon as no such path can exist.
    pub fn bottleneck_search_below(&mut self, bound: f64) -> Option<SearchResult> {
        let best = self.bottleneck_value(bound)?;
        let path = self.fewest_hops_path(best);
        Some(self.make_result(&path, best))
    }

    fn fewest_hops_path(&self, bound: f64) -> Vec<(usize, usize)> {
        let nr = self.ref_nodes.len();
        let idx = |l: usize, r: usize| l * nr + r;
        let first = self.ref_order[0];
        let last = self.ref_order[self.ref_order.len() - 1];
        let mut level = vec![u32::MAX; self.lg_nodes.len() * nr];
        let mut parent = vec![usize::MAX; self.lg_nodes.len() * nr];
        let mut frontier: Vec<(usize, usize)> = self
            .sources
            .iter()
            .filter(|&&s| !self.lg_nodes[s].blocked && self.costs[s][first] <= bound)
            .map(|&s| (s, first))
            .collect();
        for &(l, r) in &frontier {
            level[idx(l, r)] = 0;
        }
        let mut scratch = Vec::new();
        let mut depth = 0u32;
        let goal = loop {
            let mut next = Vec::new();
            for &(l, r) in &frontier {
                let u = idx(l, r);
                let ukey = self.product_key(l, r);
                self.for_each_forward(l, r, &mut scratch, |l2, r2| {
                    if self.costs[l2][r2] > bound {
                        return;
                    }
                    let v = idx(l2, r2);
                    if level[v] == u32::MAX {
                        level[v] = depth + 1;
                        parent[v] = u;
                        next.push((l2, r2));
                    } else if level[v] == depth + 1 {
                        let (pl, pr) = (parent[v] / nr, parent[v] % nr);
                        if ukey < self.product_key(pl, pr) {
                            parent[v] = u;
                        }
                    }
                });
            }
            depth += 1;
            let goal = next
                .iter()
                .filter(|&&(l, r)| r == last && self.targets.contains(&l))
                .min_by_key(|&&(l, r)| self.product_key(l, r))
                .copied();
            if let Some(g) = goal {
                break g;
            }
            assert!(!next.is_empty(), "bottleneck value without a witnessing path");
            frontier = next;
        };
        let mut path = vec![goal];
        let mut cur = idx(goal.0, goal.1);
        while parent[cur] != usize::MAX {
            cur = parent[cur];
            path.push((cur / nr, cur % nr));
        }
        path.reverse();
        path
    }

    fn make_result(&self, path: &[(usize, usize)], best: f64) -> SearchResult {
        let product_path: Vec<ProductVertex> = path
            .iter()
            .map(|&(l, r)| ProductVertex {
                ref_node: self.ref_nodes[r].key,
                lg_node: self.lg_nodes[l].key,
                ref_index: self.ref_pos[r],
                cost: self.costs[l][r],
            })
            .collect();
        let mut lg_path: Vec<usize> = path.iter().map(|&(l, _)| l).collect();
        lg_path.dedup();
        let extracted: Vec<Config> = lg_path.iter().map(|&l| self.lg_nodes[l].config.clone()).collect();
        let extracted_poses = lg_path.iter().map(|&l| self.lg_nodes[l].pose).collect();
        let mut lg_vertices: Vec<VertexId> = lg_path
            .iter()
            .filter_map(|&l| match self.lg_nodes[l].place {
                Place::Vertex(v) => Some(v),
                Place::Interior { .. } => None,
            })
            .collect();
        lg_vertices.dedup();
        let mut lg_edges: Vec<EdgeId> = Vec::new();
        let mut lg_moves: Vec<EdgeId> = Vec::new();
        for pair in lg_path.windows(2) {
            let e = match (self.lg_nodes[pair[0]].place, self.lg_nodes[pair[1]].place) {
                (Place::Interior { edge, .. }, _) | (_, Place::Interior { edge, .. }) => edge,
                (Place::Vertex(a), Place::Vertex(b)) => *self.vertex_chains[a]
                    .iter()
                    .find(|&&e| {
                        let ch = self.chain_of(e);
                        ch.nodes.len() == 2 && (ch.a == b || ch.b == b)
                    })
                    .expect("adjacent vertices share a chain"),
            };
            lg_moves.push(e);
            if lg_edges.last() != Some(&e) {
                lg_edges.push(e);
            }
        }
        let lg_nodes = lg_path.iter().map(|&l| self.lg_nodes[l].key).collect();
        SearchResult {
            product_path,
            bottleneck_cost: best,
            extracted,
            extracted_poses,
            reference_points: self.reference_points(),
            lg_vertices,
            lg_edges,
            lg_nodes,
            lg_moves,
        }
    }

    /// Every live product vertex with its cost, keyed canonically.
    pub fn vertex_costs(&self) -> BTreeMap<ProductKey, f64> {
        let mut out = BTreeMap::new();
        for l in self.lg_alive() {
            for r in self.ref_alive() {
                out.insert(self.product_key(l, r), self.costs[l][r]);
            }
        }
        out
    }

    /// Every product edge (undirected, unordered pair) whether blocked or not.
    pub fn edge_keys(&self) -> BTreeSet<(ProductKey, ProductKey)> {
        let mut out = BTreeSet::new();
        let mut put = |a: ProductKey, b: ProductKey| {
            out.insert(if a <= b { (a, b) } else { (b, a) });
        };
        for l in self.lg_alive() {
            let adj = self.lg_adjacent(l);
            for r in self.ref_alive() {
                for &l2 in &adj {
                    put(self.product_key(l, r), self.product_key(l2, r));
                }
                if let Some(r2) = self.ref_next[r] {
                    put(self.product_key(l, r), self.product_key(l, r2));
                    for &l2 in &adj {
                        put(self.product_key(l, r), self.product_key(l2, r2));
                    }
                }
            }
        }
        out
    }

    /// Source product vertices: first reference node paired with first-layer vertices.
    pub fn source_keys(&self) -> Vec<ProductKey> {
        let first = self.ref_order[0];
        self.sources.iter().map(|&s| self.product_key(s, first)).collect()
    }

    pub fn target_keys(&self) -> Vec<ProductKey> {
        let last = self.ref_order[self.ref_order.len() - 1];
        self.targets.iter().map(|&s| self.product_key(s, last)).collect()
    }
}

/// Subdivided reference complex as (key, pose) in path order.
pub fn ref_complex(rg: &RefGraph) -> Vec<(RefKey, TaskPose)> {
    let wps = rg.waypoints();
    let mut out = vec![(RefKey::Waypoint(wps[0].id), wps[0].pose)];
    for (i, seg) in rg.segments().iter().enumerate() {
        let (a, b) = (&wps[i], &wps[i + 1]);
        let den = seg.resolution + 1;
        for k in 1..den {
            let (num, d) = reduced(k, den);
            let key = RefKey::Interior {
                from: a.id,
                to: b.id,
                num,
                den: d,
            };
            out.push((key, a.pose.interpolate(&b.pose, num as f64 / d as f64)));
        }
        out.push((RefKey::Waypoint(b.id), b.pose));
    }
    out
}

/// Counters accumulated by [`lazy_plan`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CollisionStats {
    pub vertex_checks: u64,
    pub edge_checks: u64,
    pub searches: u64,
}

impl CollisionStats {
    pub fn total_checks(&self) -> u64 {
        self.vertex_checks + self.edge_checks
    }
}

/// Search, then collision-check the extracted path in order; block the first
/// colliding vertex or edge and search again until a verified path is found
/// or none remains. Only paths cheaper than `bound` are considered, so no
/// collision checks are spent on paths that could not be used. Verdicts
/// persist in the layered graph.
#[allow(clippy::too_many_arguments)]
pub fn lazy_plan(
    pg: &mut ProductGraph,
    lg: &mut LayeredGraph,
    rg: &RefGraph,
    world: &World,
    arm: &ArmModel,
    edge_step: f64,
    bound: f64,
    stats: &mut CollisionStats,
) -> Result<Option<SearchResult>> {
    'search: loop {
        stats.searches += 1;
        let Some(result) = pg.bottleneck_search_below(bound) else {
            return Ok(None);
        };
        let mut vi = 0;
        // Walk vertices and edges in path order: v0, e0, v1, e1, ...
        let mut order: Vec<Result<VertexId, EdgeId>> = Vec::new();
        for (i, &e) in result.lg_edges.iter().enumerate() {
            let edge = lg.edge(e);
            while vi < result.lg_vertices.len() && (result.lg_vertices[vi] == edge.a || result.lg_vertices[vi] == edge.b) {
                order.push(Ok(result.lg_vertices[vi]));
                vi += 1;
                if i + 1 < result.lg_edges.len() {
                    break;
                }
            }
            order.push(Err(e));
        }
        order.extend(result.lg_vertices[vi..].iter().map(|&v| Ok(v)));
        for item in order {
            let report = match item {
                Ok(v) => {
                    if lg.vertex(v).status != Status::Unknown {
                        continue;
                    }
                    stats.vertex_checks += 1;
                    let hit = world.config_in_collision(arm, &lg.vertex(v).config)?;
                    lg.set_vertex_status(v, if hit { Status::Blocked } else { Status::Free })
                }
                Err(e) => {
                    if lg.edge(e).status != Status::Unknown {
                        continue;
                    }
                    stats.edge_checks += 1;
                    let edge = lg.edge(e);
                    let hit = world.edge_in_collision(arm, &lg.vertex(edge.a).config, &lg.vertex(edge.b).config, edge_step)?;
                    lg.set_edge_status(e, if hit { Status::Blocked } else { Status::Free })
                }
            };
            if !report.is_empty() {
                pg.apply_change(&report, lg, rg)?;
                continue 'search;
            }
        }
        return Ok(Some(result));
    }
}
