//! The LCA-map, the auxiliary graph `A(T,S)`, maximal topological sorts,
//! the time-consistency test for a fixed gene/species tree pair, and
//! construction plus verification of time-consistent reconciliations.
//!
//! Species trees are treated as planted: a duplication or transfer mapped
//! above the species root sits on the stem edge entering the root, written
//! `Placement::Edge { parent: None, .. }`.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gene::{EventLabel, GeneTree, SpeciesId, ValidGeneTree};
use crate::triplet::{missing_triplets, Triplet};
use crate::tree::{RootedTree, VertexId};

pub type SpeciesTree = RootedTree<SpeciesId>;

/// Leaf vertex of `s` for every species of `g`, indexed by [`SpeciesId`].
/// The leaf set of `s` must be exactly the species set of `g`.
pub fn species_leaves(g: &GeneTree, s: &SpeciesTree) -> Result<Vec<VertexId>> {
    let mut out = vec![None; g.species_count()];
    for v in s.leaves() {
        let sp = *s.label(v).expect("leaf");
        let slot = out.get_mut(sp.index()).ok_or_else(|| {
            Error::LeafSetMismatch(format!("species tree leaf {} is unknown", sp.0))
        })?;
        if slot.is_some() {
            return Err(Error::LeafSetMismatch(format!(
                "species {} appears twice",
                g.species_name(sp)
            )));
        }
        *slot = Some(v);
    }
    out.into_iter()
        .enumerate()
        .map(|(i, v)| {
            v.ok_or_else(|| {
                Error::LeafSetMismatch(format!(
                    "species {} is missing from the species tree",
                    g.species_name(SpeciesId(i as u32))
                ))
            })
        })
        .collect()
}

/// `μ̂(v) = lca_S(σ_{T_Ē}(v))` for every gene vertex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LcaMap {
    map: Vec<VertexId>,
}

impl LcaMap {
    pub fn get(&self, v: VertexId) -> VertexId {
        self.map[v.index()]
    }

    pub fn as_slice(&self) -> &[VertexId] {
        &self.map
    }
}

pub fn lca_map(g: &ValidGeneTree, s: &SpeciesTree) -> Result<LcaMap> {
    let leaves = species_leaves(g, s)?;
    Ok(lca_map_with(g, s, &leaves))
}

/// Bottom-up: the forest leaf set of `v` is the union over its vertical
/// children, so `μ̂(v)` is the lca of their images.
pub(crate) fn lca_map_with(g: &ValidGeneTree, s: &SpeciesTree, leaves: &[VertexId]) -> LcaMap {
    let t = g.tree();
    let idx = s.lca_index();
    let mut map = vec![VertexId(0); t.len()];
    for v in t.postorder() {
        map[v.index()] = match g.species_of(v) {
            Some(sp) => leaves[sp.index()],
            None => g
                .forest_children(v)
                .map(|c| map[c.index()])
                .reduce(|a, b| idx.lca(a, b))
                .expect("O2 guarantees a vertical child"),
        };
    }
    LcaMap { map }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum AuxVertex {
    Gene(VertexId),
    Species(VertexId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EdgeClass {
    A1,
    A2,
    A3,
    A4,
}

impl fmt::Display for EdgeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuxEdge {
    pub from: AuxVertex,
    pub to: AuxVertex,
    pub class: EdgeClass,
}

/// `A(T,S)` on `V(T) ⊎ V(S)`. Parallel edges of different classes are kept.
#[derive(Clone, Debug)]
pub struct AuxGraph {
    gene_count: usize,
    species_count: usize,
    edges: Vec<AuxEdge>,
}

impl AuxGraph {
    pub fn edges(&self) -> &[AuxEdge] {
        &self.edges
    }

    pub fn gene_count(&self) -> usize {
        self.gene_count
    }

    pub fn species_vertex_count(&self) -> usize {
        self.species_count
    }

    pub fn vertex_count(&self) -> usize {
        self.gene_count + self.species_count
    }

    /// Dense index: gene vertices first, then species vertices.
    pub fn index_of(&self, v: AuxVertex) -> usize {
        match v {
            AuxVertex::Gene(x) => x.index(),
            AuxVertex::Species(x) => self.gene_count + x.index(),
        }
    }

    pub fn vertex_at(&self, i: usize) -> AuxVertex {
        if i < self.gene_count {
            AuxVertex::Gene(VertexId::from(i))
        } else {
            AuxVertex::Species(VertexId::from(i - self.gene_count))
        }
    }

    pub fn digraph(&self) -> Digraph {
        let mut d = Digraph::new(self.vertex_count());
        for e in &self.edges {
            d.add_edge(self.index_of(e.from), self.index_of(e.to));
        }
        d
    }

    pub fn in_neighbors(&self, v: AuxVertex) -> Vec<AuxVertex> {
        let mut out: Vec<AuxVertex> = self
            .edges
            .iter()
            .filter(|e| e.to == v)
            .map(|e| e.from)
            .collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn has_self_loop(&self, v: AuxVertex) -> bool {
        self.edges.iter().any(|e| e.from == v && e.to == v)
    }

    pub fn topological_sort(&self) -> TopoSort {
        maximal_topological_sort(&self.digraph())
    }
}

pub fn build_aux_graph(g: &ValidGeneTree, s: &SpeciesTree, mu: &LcaMap) -> AuxGraph {
    let t = g.tree();
    let idx = s.lca_index();
    let image = |u: VertexId| match g.event(u) {
        EventLabel::Leaf | EventLabel::Speciation => AuxVertex::Species(mu.get(u)),
        _ => AuxVertex::Gene(u),
    };
    let mut edges = Vec::with_capacity(t.len() * 2 + s.len());
    for (u, v) in t.edges() {
        edges.push(AuxEdge {
            from: image(u),
            to: image(v),
            class: EdgeClass::A1,
        });
    }
    for (x, y) in s.edges() {
        edges.push(AuxEdge {
            from: AuxVertex::Species(x),
            to: AuxVertex::Species(y),
            class: EdgeClass::A2,
        });
    }
    for u in t.vertices() {
        if g.event(u).is_edge_event() {
            edges.push(AuxEdge {
                from: AuxVertex::Gene(u),
                to: AuxVertex::Species(mu.get(u)),
                class: EdgeClass::A3,
            });
        }
    }
    for (u, v) in g.transfer_edges() {
        edges.push(AuxEdge {
            from: AuxVertex::Species(idx.lca(mu.get(u), mu.get(v))),
            to: AuxVertex::Gene(u),
            class: EdgeClass::A4,
        });
    }
    AuxGraph {
        gene_count: t.len(),
        species_count: s.len(),
        edges,
    }
}

/// Plain adjacency-list digraph on `0..n`; self-loops and multi-edges allowed.
#[derive(Clone, Debug)]
pub struct Digraph {
    out: Vec<Vec<usize>>,
    indeg: Vec<usize>,
}

impl Digraph {
    pub fn new(n: usize) -> Self {
        Self {
            out: vec![Vec::new(); n],
            indeg: vec![0; n],
        }
    }

    pub fn add_edge(&mut self, a: usize, b: usize) {
        self.out[a].push(b);
        self.indeg[b] += 1;
    }

    pub fn len(&self) -> usize {
        self.out.len()
    }

    pub fn is_empty(&self) -> bool {
        self.out.is_empty()
    }

    pub fn successors(&self, v: usize) -> &[usize] {
        &self.out[v]
    }

    fn predecessors(&self) -> Vec<Vec<usize>> {
        let mut pred = vec![Vec::new(); self.len()];
        for (a, outs) in self.out.iter().enumerate() {
            for &b in outs {
                pred[b].push(a);
            }
        }
        pred
    }
}

/// A maximal topological sort `Q` together with its member set `M(Q)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TopoSort {
    pub sequence: Vec<usize>,
    member: Vec<bool>,
}

impl TopoSort {
    pub fn contains(&self, v: usize) -> bool {
        self.member[v]
    }

    pub fn member_count(&self) -> usize {
        self.sequence.len()
    }

    pub fn is_complete(&self) -> bool {
        self.sequence.len() == self.member.len()
    }

    pub fn members(&self) -> &[bool] {
        &self.member
    }
}

/// Kahn-style peeling, taking the smallest available vertex first.
pub fn maximal_topological_sort(g: &Digraph) -> TopoSort {
    let identity: Vec<u64> = (0..g.len() as u64).collect();
    maximal_topological_sort_by_priority(g, &identity)
}

/// Peeling with ties broken by the smallest `priority[v]`. The member set is
/// the same for every priority; only the order differs.
pub fn maximal_topological_sort_by_priority(g: &Digraph, priority: &[u64]) -> TopoSort {
    let n = g.len();
    let mut indeg = g.indeg.clone();
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> = (0..n)
        .filter(|&v| indeg[v] == 0)
        .map(|v| Reverse((priority[v], v)))
        .collect();
    let mut sequence = Vec::with_capacity(n);
    let mut member = vec![false; n];
    while let Some(Reverse((_, v))) = heap.pop() {
        sequence.push(v);
        member[v] = true;
        for &w in &g.out[v] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                heap.push(Reverse((priority[w], w)));
            }
        }
    }
    TopoSort { sequence, member }
}

/// A directed cycle among the vertices left outside `M(Q)`, if any. Every
/// such vertex has an in-neighbor outside `M(Q)`, so walking backwards must
/// revisit a vertex.
pub fn find_cycle(g: &Digraph, q: &TopoSort) -> Option<Vec<usize>> {
    let start = (0..g.len()).find(|&v| !q.contains(v))?;
    let pred = g.predecessors();
    let mut pos = vec![usize::MAX; g.len()];
    let mut walk = Vec::new();
    let mut v = start;
    loop {
        if pos[v] != usize::MAX {
            let mut cycle: Vec<usize> = walk[pos[v]..].to_vec();
            cycle.reverse();
            return Some(cycle);
        }
        pos[v] = walk.len();
        walk.push(v);
        v = *pred[v]
            .iter()
            .find(|&&p| !q.contains(p))
            .expect("vertex outside M(Q) has a predecessor outside M(Q)");
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PairVerdict {
    Consistent,
    /// Triplets of `R(T;t,σ)` the species tree fails to display.
    MissingTriplets(Vec<Triplet<SpeciesId>>),
    /// A directed cycle of `A(T,S)`, each vertex followed by its successor.
    Cyclic(Vec<AuxVertex>),
}

impl PairVerdict {
    pub fn is_consistent(&self) -> bool {
        matches!(self, PairVerdict::Consistent)
    }
}

/// Time-consistency of a fixed pair: `S` displays `R(T;t,σ)` and `A(T,S)` is
/// acyclic. Missing triplets are reported before cycles.
pub fn check_pair(g: &ValidGeneTree, s: &SpeciesTree) -> Result<PairVerdict> {
    let leaves = species_leaves(g, s)?;
    let missing = missing_triplets(s, g.triplets())?;
    if !missing.is_empty() {
        return Ok(PairVerdict::MissingTriplets(missing));
    }
    let mu = lca_map_with(g, s, &leaves);
    let aux = build_aux_graph(g, s, &mu);
    Ok(acyclicity_verdict(&aux))
}

pub(crate) fn acyclicity_verdict(aux: &AuxGraph) -> PairVerdict {
    let d = aux.digraph();
    let q = maximal_topological_sort(&d);
    match find_cycle(&d, &q) {
        None => PairVerdict::Consistent,
        Some(c) => PairVerdict::Cyclic(c.into_iter().map(|i| aux.vertex_at(i)).collect()),
    }
}

/// Image of a gene vertex under a reconciliation map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    Vertex(VertexId),
    /// The edge entering `child`; `parent` is `None` for the root stem.
    Edge {
        parent: Option<VertexId>,
        child: VertexId,
    },
}

/// `a ⪯_S b`, extended to edges: an edge lies just above its child vertex.
fn below_or_equal(s: &SpeciesTree, a: Placement, b: Placement) -> bool {
    use Placement::*;
    match (a, b) {
        (Vertex(x), Vertex(y)) => s.is_ancestor_or_self(y, x),
        (Vertex(x), Edge { child, .. }) => s.is_ancestor_or_self(child, x),
        (Edge { parent, .. }, Vertex(y)) => match parent {
            Some(p) => s.is_ancestor_or_self(y, p),
            None => false,
        },
        (Edge { child: c1, .. }, Edge { child: c2, .. }) => s.is_ancestor_or_self(c2, c1),
    }
}

fn comparable(s: &SpeciesTree, a: Placement, b: Placement) -> bool {
    below_or_equal(s, a, b) || below_or_equal(s, b, a)
}

/// A reconciliation map with integer time maps for both trees.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reconciliation {
    pub placement: Vec<Placement>,
    pub gene_time: Vec<i64>,
    pub species_time: Vec<i64>,
}

/// Builds a time-consistent reconciliation for a consistent pair.
///
/// Times are positions in a topological order of `A(T,S)` that takes
/// available species vertices before gene vertices, so each duplication or
/// transfer happens as late as its constraints allow. Leaves and speciations
/// sit on `μ̂`; a duplication or transfer `u` sits on the edge into the
/// highest ancestor of `μ̂(u)` that is still younger than `u`. The result is
/// checked with [`verify_reconciliation`].
pub fn build_reconciliation(g: &ValidGeneTree, s: &SpeciesTree) -> Result<Reconciliation> {
    match check_pair(g, s)? {
        PairVerdict::Consistent => {}
        other => {
            return Err(Error::Precondition(format!(
                "pair is not time-consistent: {other:?}"
            )))
        }
    }
    let t = g.tree();
    let mu = lca_map(g, s)?;
    let aux = build_aux_graph(g, s, &mu);
    let n = aux.vertex_count();
    let priority: Vec<u64> = (0..n)
        .map(|i| match aux.vertex_at(i) {
            AuxVertex::Species(_) => i as u64,
            AuxVertex::Gene(_) => (n + i) as u64,
        })
        .collect();
    let order = maximal_topological_sort_by_priority(&aux.digraph(), &priority);
    if !order.is_complete() {
        return Err(Error::Internal("auxiliary graph of a consistent pair is cyclic".into()));
    }
    let mut rank = vec![0i64; n];
    for (i, &v) in order.sequence.iter().enumerate() {
        rank[v] = i as i64;
    }
    let species_time: Vec<i64> = s
        .vertices()
        .map(|w| rank[aux.index_of(AuxVertex::Species(w))])
        .collect();
    let mut gene_time = Vec::with_capacity(t.len());
    let mut placement = Vec::with_capacity(t.len());
    for u in t.vertices() {
        if g.event(u).is_edge_event() {
            let tu = rank[aux.index_of(AuxVertex::Gene(u))];
            let mut y = mu.get(u);
            while let Some(p) = s.parent(y) {
                if species_time[p.index()] < tu {
                    break;
                }
                y = p;
            }
            gene_time.push(tu);
            placement.push(Placement::Edge {
                parent: s.parent(y),
                child: y,
            });
        } else {
            gene_time.push(species_time[mu.get(u).index()]);
            placement.push(Placement::Vertex(mu.get(u)));
        }
    }
    let rec = Reconciliation {
        placement,
        gene_time,
        species_time,
    };
    let report = verify_reconciliation(g, s, &rec)?;
    if !report.ok() {
        return Err(Error::Internal(format!(
            "constructed reconciliation fails verification: {:?}",
            report.violations
        )));
    }
    Ok(rec)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Clause {
    Shape,
    M1,
    M2i,
    M2ii,
    M2iii,
    M2iv,
    M3i,
    M3ii,
    GeneTimeMap,
    SpeciesTimeMap,
    B1,
    B2,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClauseViolation {
    pub clause: Clause,
    /// Witnessing gene vertices (species vertices for `SpeciesTimeMap`).
    pub vertices: Vec<VertexId>,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReconciliationReport {
    pub violations: Vec<ClauseViolation>,
}

impl ReconciliationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, clause: Clause) -> bool {
        self.violations.iter().any(|v| v.clause == clause)
    }
}

/// Checks a reconciliation against the leaf, event and ancestor constraints
/// of a reconciliation map, the time-map property of both time maps, and
/// the two time-consistency conditions. Every failed clause is reported.
pub fn verify_reconciliation(
    g: &ValidGeneTree,
    s: &SpeciesTree,
    r: &Reconciliation,
) -> Result<ReconciliationReport> {
    let leaves = species_leaves(g, s)?;
    let t = g.tree();
    let f = g.forest();
    let mut out = Vec::new();
    let mut fail = |clause, vertices: Vec<VertexId>, detail: String| {
        out.push(ClauseViolation {
            clause,
            vertices,
            detail,
        })
    };
    if r.placement.len() != t.len() || r.gene_time.len() != t.len() || r.species_time.len() != s.len()
    {
        fail(Clause::Shape, vec![], "table sizes do not match the trees".into());
        return Ok(ReconciliationReport { violations: out });
    }
    for &p in &r.placement {
        let ok = match p {
            Placement::Vertex(v) => s.contains(v),
            Placement::Edge { parent, child } => s.contains(child) && s.parent(child) == parent,
        };
        if !ok {
            fail(Clause::Shape, vec![], format!("{p:?} is not a vertex or edge of S"));
            return Ok(ReconciliationReport { violations: out });
        }
    }
    let idx = s.lca_index();
    let lca_below = |u: VertexId| {
        f.species_below(u)
            .iter()
            .map(|sp| leaves[sp.index()])
            .reduce(|a, b| idx.lca(a, b))
            .expect("non-empty species set")
    };
    let at = |u: VertexId| r.placement[u.index()];

    for u in t.vertices() {
        match g.event(u) {
            EventLabel::Leaf => {
                let want = leaves[g.species_of(u).expect("leaf").index()];
                if at(u) != Placement::Vertex(want) {
                    fail(Clause::M1, vec![u], "leaf is not mapped to its species".into());
                }
            }
            EventLabel::Speciation => {
                if at(u) != Placement::Vertex(lca_below(u)) {
                    fail(Clause::M2i, vec![u], "speciation is not mapped to the lca of its species".into());
                }
                let ch = t.children(u);
                for i in 0..ch.len() {
                    for j in i + 1..ch.len() {
                        if comparable(s, at(ch[i]), at(ch[j])) {
                            fail(
                                Clause::M2iv,
                                vec![u, ch[i], ch[j]],
                                "children of a speciation map to comparable places".into(),
                            );
                        }
                    }
                }
            }
            EventLabel::Duplication | EventLabel::Transfer => {
                if !matches!(at(u), Placement::Edge { .. }) {
                    fail(Clause::M2ii, vec![u], "edge event is not mapped to an edge".into());
                }
            }
        }
    }
    for (x, y) in g.transfer_edges() {
        if comparable(s, at(x), at(y)) {
            fail(
                Clause::M2iii,
                vec![x, y],
                "transfer endpoints map to comparable places".into(),
            );
        }
    }
    // ancestor constraint along vertical paths
    for x in t.vertices() {
        let mut cur = x;
        while let Some(y) = t.parent(cur) {
            if g.is_transfer_edge(cur) {
                break;
            }
            let both_edge_events = g.event(x).is_edge_event() && g.event(y).is_edge_event();
            let holds = below_or_equal(s, at(x), at(y)) && (both_edge_events || at(x) != at(y));
            if !holds {
                let clause = if both_edge_events { Clause::M3i } else { Clause::M3ii };
                fail(clause, vec![x, y], "ancestor order is not preserved".into());
            }
            cur = y;
        }
    }
    for (p, c) in t.edges() {
        if r.gene_time[p.index()] >= r.gene_time[c.index()] {
            fail(Clause::GeneTimeMap, vec![p, c], "gene time does not increase along an edge".into());
        }
    }
    for (p, c) in s.edges() {
        if r.species_time[p.index()] >= r.species_time[c.index()] {
            fail(
                Clause::SpeciesTimeMap,
                vec![p, c],
                "species time does not increase along an edge".into(),
            );
        }
    }
    for u in t.vertices() {
        let tu = r.gene_time[u.index()];
        match at(u) {
            Placement::Vertex(v) => {
                if !g.event(u).is_edge_event() && tu != r.species_time[v.index()] {
                    fail(Clause::B1, vec![u], "time differs from its species vertex".into());
                }
            }
            Placement::Edge { parent, child } => {
                let above = parent.map_or(true, |p| r.species_time[p.index()] < tu);
                if !(above && tu < r.species_time[child.index()]) {
                    fail(Clause::B2, vec![u], "time lies outside its species edge".into());
                }
            }
        }
    }
    Ok(ReconciliationReport { violations: out })
}
