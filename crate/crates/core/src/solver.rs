//! Good-split graphs and the refinement loop that builds a time-consistent
//! binary species tree, or proves that none exists.
//!
//! The loop starts from a star (or a given almost-binary tree) and applies
//! one good split refinement per iteration. Whether two sibling species must
//! stay together is tracked incrementally per pair in [`LSets`]; a debug
//! option cross-checks it against a from-scratch evaluation.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aux::{
    build_aux_graph, check_pair, lca_map_with, maximal_topological_sort, species_leaves, AuxVertex,
    LcaMap, PairVerdict, SpeciesTree, TopoSort,
};
use crate::error::{Error, Result};
use crate::gene::{EventLabel, SpeciesId, ValidGeneTree};
use crate::triplet::{agrees, Triplet};
use crate::tree::{RootedTree, VertexId};

/// The four reasons two siblings may not be separated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Condition {
    /// A triplet `ab|c` with `c` another sibling.
    C1,
    /// A duplication/transfer outside the sort above a speciation covering both.
    C2,
    /// A speciation at the cherry with a speciation child covering both.
    C3,
    /// A duplication/transfer outside the sort covering both.
    C4,
}

const CONDITIONS: [Condition; 4] = [Condition::C1, Condition::C2, Condition::C3, Condition::C4];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitEdge {
    pub a: SpeciesId,
    pub b: SpeciesId,
    pub conditions: Vec<Condition>,
}

/// Undirected graph on the leaf children of a cherry.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoodSplitGraph {
    pub cherry: VertexId,
    /// Sorted.
    pub vertices: Vec<SpeciesId>,
    /// Sorted by `(a, b)` with `a < b`.
    pub edges: Vec<SplitEdge>,
}

impl GoodSplitGraph {
    /// Connected components, each sorted, ordered by their smallest member.
    pub fn components(&self) -> Vec<Vec<SpeciesId>> {
        let pos = |s: SpeciesId| self.vertices.binary_search(&s).expect("edge endpoint is a vertex");
        let mut dsu: Vec<usize> = (0..self.vertices.len()).collect();
        fn find(d: &mut [usize], mut x: usize) -> usize {
            while d[x] != x {
                d[x] = d[d[x]];
                x = d[x];
            }
            x
        }
        for e in &self.edges {
            let (ra, rb) = (find(&mut dsu, pos(e.a)), find(&mut dsu, pos(e.b)));
            if ra != rb {
                dsu[ra.max(rb)] = ra.min(rb);
            }
        }
        let mut comps: Vec<Vec<SpeciesId>> = Vec::new();
        let mut slot = vec![usize::MAX; self.vertices.len()];
        for i in 0..self.vertices.len() {
            let r = find(&mut dsu, i);
            if slot[r] == usize::MAX {
                slot[r] = comps.len();
                comps.push(Vec::new());
            }
            comps[slot[r]].push(self.vertices[i]);
        }
        comps
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }
}

/// Two disjoint non-empty parts with no graph edge between them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bipartition {
    pub part_a: Vec<SpeciesId>,
    pub part_b: Vec<SpeciesId>,
}

/// The component holding the smallest species against everything else.
pub fn find_disconnected_bipartition(gsg: &GoodSplitGraph) -> Option<Bipartition> {
    let comps = gsg.components();
    if comps.len() < 2 {
        return None;
    }
    let mut rest: Vec<SpeciesId> = comps[1..].iter().flatten().copied().collect();
    rest.sort();
    Some(Bipartition {
        part_a: comps[0].clone(),
        part_b: rest,
    })
}

fn pair_key(n: usize, a: SpeciesId, b: SpeciesId) -> usize {
    let (a, b) = if a < b { (a, b) } else { (b, a) };
    a.index() * n + b.index()
}

/// Per-gene-vertex view of the quantities the conditions depend on.
struct Ctx<'a> {
    g: &'a ValidGeneTree,
    gene_count: usize,
}

impl<'a> Ctx<'a> {
    fn new(g: &'a ValidGeneTree) -> Self {
        Ctx {
            g,
            gene_count: g.tree().len(),
        }
    }

    fn sigma(&self, u: VertexId) -> &'a [SpeciesId] {
        self.g.forest().species_below(u)
    }

    fn is_spec(&self, u: VertexId) -> bool {
        self.g.event(u) == EventLabel::Speciation
    }

    fn speciation_children(&self, u: VertexId) -> impl Iterator<Item = VertexId> + 'a {
        let g = self.g;
        g.tree()
            .children(u)
            .iter()
            .copied()
            .filter(move |&v| g.event(v) == EventLabel::Speciation)
    }

    fn gene_sorted(&self, q: &TopoSort, u: VertexId) -> bool {
        q.contains(u.index())
    }

    fn species_sorted(&self, q: &TopoSort, v: VertexId) -> bool {
        q.contains(self.gene_count + v.index())
    }
}

/// Visits each unordered pair of `items` once.
fn for_pairs(items: &[SpeciesId], mut f: impl FnMut(SpeciesId, SpeciesId)) {
    for i in 0..items.len() {
        for j in i + 1..items.len() {
            f(items[i], items[j]);
        }
    }
}

/// Pair marks that reset in O(1) by bumping a stamp.
struct PairStamps {
    n: usize,
    stamp: Vec<u32>,
    now: u32,
}

impl PairStamps {
    fn new(n: usize) -> Self {
        Self {
            n,
            stamp: vec![0; n * n],
            now: 0,
        }
    }

    fn next(&mut self) {
        self.now += 1;
    }

    /// True the first time a pair is seen since the last `next`.
    fn first(&mut self, a: SpeciesId, b: SpeciesId) -> bool {
        let k = pair_key(self.n, a, b);
        if self.stamp[k] == self.now {
            false
        } else {
            self.stamp[k] = self.now;
            true
        }
    }
}

/// Union over the speciation children `v` of `u` of the pairs inside
/// `σ(v) ∩ keep`, each pair once.
fn covered_pairs(
    ctx: &Ctx,
    stamps: &mut PairStamps,
    u: VertexId,
    keep: impl Fn(SpeciesId) -> bool,
    mut f: impl FnMut(SpeciesId, SpeciesId),
) {
    stamps.next();
    let mut buf = Vec::new();
    for v in ctx.speciation_children(u) {
        buf.clear();
        buf.extend(ctx.sigma(v).iter().copied().filter(|&s| keep(s)));
        for_pairs(&buf, |a, b| {
            if stamps.first(a, b) {
                f(a, b)
            }
        });
    }
}

/// The good-split graph at cherry `x`, evaluated from scratch.
pub fn good_split_graph(
    g: &ValidGeneTree,
    s: &SpeciesTree,
    x: VertexId,
    q: &TopoSort,
    mu: &LcaMap,
) -> Result<GoodSplitGraph> {
    if !s.contains(x) {
        return Err(Error::UnknownVertex(x));
    }
    if !s.is_cherry(x) {
        return Err(Error::NotCherry(x));
    }
    let ctx = Ctx::new(g);
    let n = g.species_count();
    let t = g.tree();
    let mut vertices: Vec<SpeciesId> = s.children(x).iter().map(|&c| *s.label(c).expect("leaf")).collect();
    vertices.sort();
    let mut inside = vec![false; n];
    for &v in &vertices {
        inside[v.index()] = true;
    }
    let mut tags = vec![0u8; n * n];
    let mut mark = |set: &[SpeciesId], c: Condition| {
        let sub: Vec<SpeciesId> = set.iter().copied().filter(|s| inside[s.index()]).collect();
        for_pairs(&sub, |a, b| tags[pair_key(n, a, b)] |= 1 << c as u8);
    };
    for tr in g.triplets().iter() {
        if inside[tr.a.index()] && inside[tr.b.index()] && inside[tr.c.index()] {
            mark(&[tr.a, tr.b], Condition::C1);
        }
    }
    for u in t.vertices() {
        let edge_event = g.event(u).is_edge_event();
        if edge_event && !ctx.gene_sorted(q, u) {
            mark(ctx.sigma(u), Condition::C4);
            for v in ctx.speciation_children(u) {
                mark(ctx.sigma(v), Condition::C2);
            }
        }
        if ctx.is_spec(u) && mu.get(u) == x {
            for v in ctx.speciation_children(u) {
                mark(ctx.sigma(v), Condition::C3);
            }
        }
    }
    Ok(graph_from_tags(x, vertices, |a, b| tags[pair_key(n, a, b)]))
}

fn graph_from_tags(x: VertexId, vertices: Vec<SpeciesId>, tag: impl Fn(SpeciesId, SpeciesId) -> u8) -> GoodSplitGraph {
    let mut edges = Vec::new();
    for_pairs(&vertices, |a, b| {
        let m = tag(a, b);
        if m != 0 {
            edges.push(SplitEdge {
                a,
                b,
                conditions: CONDITIONS.iter().copied().filter(|&c| m & (1 << c as u8) != 0).collect(),
            });
        }
    });
    GoodSplitGraph {
        cherry: x,
        vertices,
        edges,
    }
}

/// Non-binary cherries all of whose strict ancestors are in `M(Q)`, by id.
fn eligible_cherries(ctx: &Ctx, s: &SpeciesTree, q: &TopoSort) -> Vec<VertexId> {
    s.vertices()
        .filter(|&x| s.is_cherry(x) && s.children(x).len() > 2)
        .filter(|&x| {
            let mut cur = s.parent(x);
            while let Some(y) = cur {
                if !ctx.species_sorted(q, y) {
                    return false;
                }
                cur = s.parent(y);
            }
            true
        })
        .collect()
}

/// The first eligible cherry (by vertex id) with a disconnected good-split
/// graph, together with its bipartition. All graphs are built from scratch.
pub fn find_good_split(
    g: &ValidGeneTree,
    s: &SpeciesTree,
    q: &TopoSort,
    mu: &LcaMap,
) -> Result<Option<(VertexId, Bipartition)>> {
    let ctx = Ctx::new(g);
    for x in eligible_cherries(&ctx, s, q) {
        if let Some(bp) = find_disconnected_bipartition(&good_split_graph(g, s, x, q, mu)?) {
            return Ok(Some((x, bp)));
        }
    }
    Ok(None)
}

/// A split refinement as seen by the incremental bookkeeping.
#[derive(Clone, Debug)]
pub struct RefinementEvent {
    pub cherry: VertexId,
    /// Vertex above part A: the new internal vertex, or the leaf itself.
    pub child_a: VertexId,
    pub child_b: VertexId,
    pub part_a: Vec<SpeciesId>,
    pub part_b: Vec<SpeciesId>,
}

/// For every unordered species pair, how many witnesses each condition has.
/// Only pairs of siblings are meaningful; counts for separated pairs are
/// left stale.
#[derive(Clone, Debug)]
pub struct LSets {
    n: usize,
    counts: [Vec<u32>; 4],
}

impl LSets {
    /// Builds the witness counts for the current tree `s`.
    pub fn init(g: &ValidGeneTree, s: &SpeciesTree, q: &TopoSort, mu: &LcaMap) -> Result<Self> {
        let ctx = Ctx::new(g);
        let n = g.species_count();
        let leaves = species_leaves(g, s)?;
        let parent_of = |sp: SpeciesId| s.parent(leaves[sp.index()]);
        let mut counts: [Vec<u32>; 4] = std::array::from_fn(|_| vec![0; n * n]);
        let mut stamps = PairStamps::new(n);

        for tr in g.triplets().iter() {
            let p = parent_of(tr.a);
            if p.is_some() && parent_of(tr.b) == p && parent_of(tr.c) == p {
                counts[0][pair_key(n, tr.a, tr.b)] += 1;
            }
        }
        for u in g.tree().vertices() {
            if g.event(u).is_edge_event() && !ctx.gene_sorted(q, u) {
                covered_pairs(&ctx, &mut stamps, u, |_| true, |a, b| counts[1][pair_key(n, a, b)] += 1);
                for_pairs(ctx.sigma(u), |a, b| counts[3][pair_key(n, a, b)] += 1);
            }
            if ctx.is_spec(u) {
                let x = Some(mu.get(u));
                covered_pairs(
                    &ctx,
                    &mut stamps,
                    u,
                    |sp| parent_of(sp) == x,
                    |a, b| counts[2][pair_key(n, a, b)] += 1,
                );
            }
        }
        Ok(LSets { n, counts })
    }

    pub fn count(&self, c: Condition, a: SpeciesId, b: SpeciesId) -> u32 {
        self.counts[c as usize][pair_key(self.n, a, b)]
    }

    fn tags(&self, a: SpeciesId, b: SpeciesId) -> u8 {
        let k = pair_key(self.n, a, b);
        (0..4).fold(0, |m, i| if self.counts[i][k] > 0 { m | 1 << i } else { m })
    }

    /// Good-split graph at cherry `x` read off the counts.
    pub fn graph(&self, s: &SpeciesTree, x: VertexId) -> GoodSplitGraph {
        let mut vertices: Vec<SpeciesId> = s.children(x).iter().map(|&c| *s.label(c).expect("leaf")).collect();
        vertices.sort();
        graph_from_tags(x, vertices, |a, b| self.tags(a, b))
    }

    /// Brings the counts in line with the refined tree `s_new`, whose LCA-map
    /// and sort are `mu_new` and `q_new`.
    #[allow(clippy::too_many_arguments)]
    pub fn update(
        &mut self,
        g: &ValidGeneTree,
        ev: &RefinementEvent,
        mu_old: &LcaMap,
        mu_new: &LcaMap,
        q_old: &TopoSort,
        q_new: &TopoSort,
    ) {
        let ctx = Ctx::new(g);
        let n = self.n;
        let mut side = vec![0u8; n];
        for &a in &ev.part_a {
            side[a.index()] = 1;
        }
        for &b in &ev.part_b {
            side[b.index()] = 2;
        }
        let triplets = g.triplets();
        // separated from a former sibling
        for (mine, other) in [(&ev.part_a, &ev.part_b), (&ev.part_b, &ev.part_a)] {
            for_pairs(mine, |a, b| {
                for &c in other.iter() {
                    if let Some(t) = Triplet::new(a, b, c) {
                        if triplets.contains(&t) {
                            self.counts[0][pair_key(n, a, b)] -= 1;
                        }
                    }
                }
            });
        }
        let mut stamps = PairStamps::new(n);
        // newly sorted gene vertices stop witnessing
        for u in g.tree().vertices() {
            if g.event(u).is_edge_event() && q_new.contains(u.index()) && !q_old.contains(u.index()) {
                let counts = &mut self.counts;
                covered_pairs(&ctx, &mut stamps, u, |_| true, |a, b| counts[1][pair_key(n, a, b)] -= 1);
                for_pairs(ctx.sigma(u), |a, b| counts[3][pair_key(n, a, b)] -= 1);
            }
        }
        // speciations at the refined cherry
        for u in g.tree().vertices() {
            if !ctx.is_spec(u) || mu_old.get(u) != ev.cherry {
                continue;
            }
            let now = mu_new.get(u);
            let drop: u8 = if now == ev.child_a {
                2
            } else if now == ev.child_b {
                1
            } else {
                3
            };
            let counts = &mut self.counts;
            covered_pairs(
                &ctx,
                &mut stamps,
                u,
                |sp| side[sp.index()] & drop != 0,
                |a, b| {
                    if side[a.index()] == side[b.index()] {
                        counts[2][pair_key(n, a, b)] -= 1
                    }
                },
            );
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Policy {
    /// Smallest cherry id; the component of the smallest species vs the rest.
    #[default]
    Deterministic,
    /// Random cherry order and a random union of components as one part.
    Randomized { seed: u64 },
}

#[derive(Clone, Debug, Default)]
pub struct SolveOptions {
    pub policy: Policy,
    /// Compare the incremental graphs with from-scratch ones at every step.
    pub verify_incremental: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub cherry: VertexId,
    pub part_a: Vec<SpeciesId>,
    pub part_b: Vec<SpeciesId>,
    /// `|M(Q)|` after the refinement.
    pub sorted_after: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveTrace {
    /// `|M(Q)|` for the start tree.
    pub sorted_initial: usize,
    pub steps: Vec<TraceStep>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FailureReason {
    /// Every eligible cherry has a connected good-split graph.
    NoGoodSplit,
    /// No non-binary cherry has all strict ancestors in `M(Q)`.
    NoEligibleCherry,
    /// The start tree is binary but not time-consistent.
    InconsistentStart { verdict: PairVerdictSummary },
    /// The start tree resolves some triplets the other way.
    StartDisagrees { conflicts: Vec<Triplet<SpeciesId>> },
    /// A species leaf of the start tree carries a self-loop.
    LeafSelfLoop { leaf: SpeciesId },
}

/// Serializable form of a negative [`PairVerdict`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PairVerdictSummary {
    MissingTriplets { triplets: Vec<Triplet<SpeciesId>> },
    Cyclic { cycle: Vec<AuxVertex> },
}

/// Why the search stopped, with the tree it stopped at.
#[derive(Clone, Debug)]
pub struct FailureExplanation {
    pub reason: FailureReason,
    pub tree: SpeciesTree,
    /// Vertices of the auxiliary graph left outside `M(Q)`.
    pub unsorted: Vec<AuxVertex>,
    /// Good-split graphs of the eligible cherries, all connected.
    pub graphs: Vec<GoodSplitGraph>,
}

#[derive(Clone, Debug)]
pub enum SolveOutcome {
    Solved { tree: SpeciesTree, trace: SolveTrace },
    NoSolution { trace: SolveTrace, explanation: Box<FailureExplanation> },
}

impl SolveOutcome {
    pub fn tree(&self) -> Option<&SpeciesTree> {
        match self {
            SolveOutcome::Solved { tree, .. } => Some(tree),
            SolveOutcome::NoSolution { .. } => None,
        }
    }

    pub fn trace(&self) -> &SolveTrace {
        match self {
            SolveOutcome::Solved { trace, .. } | SolveOutcome::NoSolution { trace, .. } => trace,
        }
    }

    pub fn is_solved(&self) -> bool {
        matches!(self, SolveOutcome::Solved { .. })
    }
}

pub fn star_species_tree(g: &ValidGeneTree) -> SpeciesTree {
    RootedTree::star(g.all_species()).expect("a gene tree has at least one species")
}

pub fn solve(g: &ValidGeneTree) -> Result<SolveOutcome> {
    solve_with(g, &SolveOptions::default())
}

pub fn solve_with(g: &ValidGeneTree, opts: &SolveOptions) -> Result<SolveOutcome> {
    run(g, star_species_tree(g), opts)
}

/// Searches for a time-consistent binary refinement of `s0`.
pub fn solve_gtc(g: &ValidGeneTree, s0: &SpeciesTree) -> Result<SolveOutcome> {
    solve_gtc_with(g, s0, &SolveOptions::default())
}

pub fn solve_gtc_with(g: &ValidGeneTree, s0: &SpeciesTree, opts: &SolveOptions) -> Result<SolveOutcome> {
    if !s0.is_almost_binary() {
        return Err(Error::NotAlmostBinary);
    }
    let leaves = species_leaves(g, s0)?;
    let fail = |reason| {
        let mu = lca_map_with(g, s0, &leaves);
        let aux = build_aux_graph(g, s0, &mu);
        let q = aux.topological_sort();
        Ok(SolveOutcome::NoSolution {
            trace: SolveTrace {
                sorted_initial: q.member_count(),
                steps: vec![],
            },
            explanation: Box::new(FailureExplanation {
                reason,
                tree: s0.clone(),
                unsorted: unsorted(&aux, &q),
                graphs: vec![],
            }),
        })
    };
    if !agrees(s0, g.triplets())? {
        let index = s0.leaf_index()?;
        let mut conflicts: Vec<_> = g
            .triplets()
            .iter()
            .filter(|t| {
                let [x, y] = t.alternatives();
                crate::triplet::displays_triplet(s0, &index, &x).unwrap_or(false)
                    || crate::triplet::displays_triplet(s0, &index, &y).unwrap_or(false)
            })
            .copied()
            .collect();
        conflicts.sort();
        return fail(FailureReason::StartDisagrees { conflicts });
    }
    let mu = lca_map_with(g, s0, &leaves);
    let aux = build_aux_graph(g, s0, &mu);
    for sp in g.all_species() {
        if aux.has_self_loop(AuxVertex::Species(leaves[sp.index()])) {
            return fail(FailureReason::LeafSelfLoop { leaf: sp });
        }
    }
    run(g, s0.clone(), opts)
}

fn unsorted(aux: &crate::aux::AuxGraph, q: &TopoSort) -> Vec<AuxVertex> {
    (0..aux.vertex_count())
        .filter(|&i| !q.contains(i))
        .map(|i| aux.vertex_at(i))
        .collect()
}

fn summarize(v: PairVerdict) -> Option<PairVerdictSummary> {
    match v {
        PairVerdict::Consistent => None,
        PairVerdict::MissingTriplets(triplets) => Some(PairVerdictSummary::MissingTriplets { triplets }),
        PairVerdict::Cyclic(cycle) => Some(PairVerdictSummary::Cyclic { cycle }),
    }
}

fn choose_split(
    ctx: &Ctx,
    lsets: &LSets,
    s: &SpeciesTree,
    q: &TopoSort,
    rng: &mut Option<ChaCha8Rng>,
    graphs: &mut Vec<GoodSplitGraph>,
) -> Option<(VertexId, Bipartition)> {
    let mut cherries = eligible_cherries(ctx, s, q);
    if let Some(rng) = rng.as_mut() {
        cherries.shuffle(rng);
    }
    for x in cherries {
        let gsg = lsets.graph(s, x);
        let comps = gsg.components();
        if comps.len() < 2 {
            graphs.push(gsg);
            continue;
        }
        let bp = match rng.as_mut() {
            None => find_disconnected_bipartition(&gsg).expect("disconnected"),
            Some(rng) => random_bipartition(&comps, rng),
        };
        return Some((x, bp));
    }
    None
}

/// A uniformly random proper non-empty union of components against the rest.
fn random_bipartition(comps: &[Vec<SpeciesId>], rng: &mut ChaCha8Rng) -> Bipartition {
    loop {
        let pick: Vec<bool> = comps.iter().map(|_| rng.gen()).collect();
        if pick.iter().all(|&b| b) || pick.iter().all(|&b| !b) {
            continue;
        }
        let mut a = Vec::new();
        let mut b = Vec::new();
        for (c, &p) in comps.iter().zip(&pick) {
            if p { &mut a } else { &mut b }.extend_from_slice(c);
        }
        a.sort();
        b.sort();
        return Bipartition { part_a: a, part_b: b };
    }
}

fn run(g: &ValidGeneTree, start: SpeciesTree, opts: &SolveOptions) -> Result<SolveOutcome> {
    let ctx = Ctx::new(g);
    let leaves = species_leaves(g, &start)?;
    let mut rng = match opts.policy {
        Policy::Deterministic => None,
        Policy::Randomized { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
    };
    let mut s = start;
    let mut trace = SolveTrace::default();
    let mut state: Option<(LSets, LcaMap, TopoSort)> = None;
    let mut pending: Option<RefinementEvent> = None;
    loop {
        let mu = lca_map_with(g, &s, &leaves);
        let aux = build_aux_graph(g, &s, &mu);
        let q = maximal_topological_sort(&aux.digraph());
        let lsets = match (state.take(), pending.take()) {
            (Some((mut l, mu_old, q_old)), Some(ev)) => {
                l.update(g, &ev, &mu_old, &mu, &q_old, &q);
                l
            }
            _ => LSets::init(g, &s, &q, &mu)?,
        };
        match trace.steps.last_mut() {
            Some(step) => step.sorted_after = q.member_count(),
            None => trace.sorted_initial = q.member_count(),
        }
        if opts.verify_incremental {
            for x in s.cherries() {
                let fast = lsets.graph(&s, x);
                let slow = good_split_graph(g, &s, x, &q, &mu)?;
                if fast != slow {
                    return Err(Error::Internal(format!(
                        "incremental good-split graph at {x:?} differs: {fast:?} vs {slow:?}"
                    )));
                }
            }
        }
        if s.is_binary() {
            let verdict = check_pair(g, &s)?;
            if verdict.is_consistent() {
                return Ok(SolveOutcome::Solved { tree: s, trace });
            }
            if !trace.steps.is_empty() {
                return Err(Error::Internal(format!(
                    "refined binary tree is not time-consistent: {verdict:?}"
                )));
            }
            return Ok(SolveOutcome::NoSolution {
                explanation: Box::new(FailureExplanation {
                    reason: FailureReason::InconsistentStart {
                        verdict: summarize(verdict).expect("negative verdict"),
                    },
                    tree: s,
                    unsorted: unsorted(&aux, &q),
                    graphs: vec![],
                }),
                trace,
            });
        }
        let mut graphs = Vec::new();
        let Some((x, bp)) = choose_split(&ctx, &lsets, &s, &q, &mut rng, &mut graphs) else {
            let reason = if graphs.is_empty() {
                FailureReason::NoEligibleCherry
            } else {
                FailureReason::NoGoodSplit
            };
            return Ok(SolveOutcome::NoSolution {
                explanation: Box::new(FailureExplanation {
                    reason,
                    tree: s,
                    unsorted: unsorted(&aux, &q),
                    graphs,
                }),
                trace,
            });
        };
        let to_vertices = |part: &[SpeciesId]| part.iter().map(|sp| leaves[sp.index()]).collect::<Vec<_>>();
        let refined = s.split_refinement(x, &to_vertices(&bp.part_a), &to_vertices(&bp.part_b))?;
        pending = Some(RefinementEvent {
            cherry: x,
            child_a: refined.child_a,
            child_b: refined.child_b,
            part_a: bp.part_a.clone(),
            part_b: bp.part_b.clone(),
        });
        trace.steps.push(TraceStep {
            cherry: x,
            part_a: bp.part_a,
            part_b: bp.part_b,
            sorted_after: 0,
        });
        state = Some((lsets, mu, q));
        s = refined.tree;
    }
}
