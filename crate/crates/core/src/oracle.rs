//! Ground truth for small inputs: exhaustive enumeration of rooted binary
//! trees, brute-force search for a time-consistent species tree, the BUILD
//! algorithm for triplet compatibility, and a forward-simulation instance
//! generator.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aux::{build_aux_graph, lca_map, SpeciesTree};
use crate::error::{Error, Result};
use crate::gene::{validate_axioms, Axiom, EventLabel, GeneTree, SpeciesId, ValidGeneTree};
use crate::tree::{Label, RootedTree, TreeBuilder, VertexId};
use crate::triplet::{displays, TripletSet};

pub const DEFAULT_LIMIT: usize = 8;

/// `(2n-3)!!`, the number of rooted binary trees on `n >= 2` labelled leaves.
pub fn binary_tree_count(n: usize) -> u128 {
    (2..=n).fold(1u128, |acc, k| acc * (2 * k as u128 - 3))
}

/// Streams every rooted binary tree on a label set exactly once.
///
/// Leaf `k` (0-based, `k >= 1`) is attached above one of the `2k - 1`
/// vertices of the tree on the first `k` leaves; the choice vector is
/// advanced like an odometer.
pub struct BinaryTrees<L> {
    labels: Vec<L>,
    choice: Vec<usize>,
    done: bool,
}

pub fn enumerate_binary_species_trees<L: Label>(labels: &[L], limit: usize) -> Result<BinaryTrees<L>> {
    if labels.is_empty() {
        return Err(Error::EmptySet);
    }
    if labels.len() > limit {
        return Err(Error::LimitExceeded {
            what: "number of species",
            limit,
        });
    }
    let mut sorted = labels.to_vec();
    sorted.sort();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::DuplicateLabel(format!("{:?}", sorted.windows(2).find(|w| w[0] == w[1]).unwrap()[0])));
    }
    Ok(BinaryTrees {
        choice: vec![0; labels.len()],
        labels: sorted,
        done: false,
    })
}

impl<L: Label> BinaryTrees<L> {
    fn build(&self) -> RootedTree<L> {
        let n = self.labels.len();
        let mut children: Vec<Vec<VertexId>> = Vec::with_capacity(2 * n);
        let mut labels: Vec<Option<L>> = Vec::with_capacity(2 * n);
        let mut parent: Vec<Option<usize>> = Vec::with_capacity(2 * n);
        // insertion order of vertices, which the choices index into
        let mut order: Vec<usize> = Vec::with_capacity(2 * n);
        children.push(vec![]);
        labels.push(Some(self.labels[0].clone()));
        parent.push(None);
        order.push(0);
        let mut root = 0;
        for k in 1..n {
            let target = order[self.choice[k]];
            let leaf = children.len();
            children.push(vec![]);
            labels.push(Some(self.labels[k].clone()));
            parent.push(None);
            let w = children.len();
            children.push(vec![VertexId::from(target), VertexId::from(leaf)]);
            labels.push(None);
            parent.push(parent[target]);
            match parent[target] {
                Some(p) => {
                    for c in children[p].iter_mut() {
                        if c.index() == target {
                            *c = VertexId::from(w);
                        }
                    }
                }
                None => root = w,
            }
            parent[target] = Some(w);
            parent[leaf] = Some(w);
            order.push(leaf);
            order.push(w);
        }
        RootedTree::from_parts(VertexId::from(root), children, labels).expect("well-formed by construction")
    }

    fn advance(&mut self) {
        for k in (1..self.labels.len()).rev() {
            self.choice[k] += 1;
            if self.choice[k] < 2 * k - 1 {
                return;
            }
            self.choice[k] = 0;
        }
        self.done = true;
    }
}

impl<L: Label> Iterator for BinaryTrees<L> {
    type Item = RootedTree<L>;

    fn next(&mut self) -> Option<RootedTree<L>> {
        if self.done {
            return None;
        }
        let t = self.build();
        self.advance();
        Some(t)
    }
}

/// The first enumerated binary species tree that displays `R` and has an
/// acyclic auxiliary graph.
pub fn brute_force_solve(g: &ValidGeneTree, limit: usize) -> Result<Option<SpeciesTree>> {
    let species: Vec<SpeciesId> = g.all_species().collect();
    for s in enumerate_binary_species_trees(&species, limit)? {
        if is_time_consistent(g, &s)? {
            return Ok(Some(s));
        }
    }
    Ok(None)
}

/// Same test as [`check_pair`] without building certificates.
fn is_time_consistent(g: &ValidGeneTree, s: &SpeciesTree) -> Result<bool> {
    if !displays(s, g.triplets())? {
        return Ok(false);
    }
    let mu = lca_map(g, s)?;
    Ok(build_aux_graph(g, s, &mu).topological_sort().is_complete())
}

/// Same answer as [`brute_force_solve`], with the checks spread over `jobs`
/// threads.
pub fn brute_force_solve_parallel(g: &ValidGeneTree, limit: usize, jobs: usize) -> Result<Option<SpeciesTree>> {
    let jobs = jobs.max(1);
    if jobs == 1 {
        return brute_force_solve(g, limit);
    }
    let species: Vec<SpeciesId> = g.all_species().collect();
    enumerate_binary_species_trees(&species, limit)?;
    let best = AtomicUsize::new(usize::MAX);
    let results: Vec<Result<Option<(usize, SpeciesTree)>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..jobs)
            .map(|j| {
                let species = &species;
                let best = &best;
                scope.spawn(move || -> Result<Option<(usize, SpeciesTree)>> {
                    let trees = enumerate_binary_species_trees(species, limit)?;
                    for (i, s) in trees.enumerate().skip(j).step_by(jobs) {
                        if i > best.load(AtomicOrdering::Relaxed) {
                            break;
                        }
                        if is_time_consistent(g, &s)? {
                            best.fetch_min(i, AtomicOrdering::Relaxed);
                            return Ok(Some((i, s)));
                        }
                    }
                    Ok(None)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut found: Option<(usize, SpeciesTree)> = None;
    for r in results {
        if let Some((i, s)) = r? {
            if found.as_ref().map_or(true, |(j, _)| i < *j) {
                found = Some((i, s));
            }
        }
    }
    Ok(found.map(|(_, s)| s))
}

/// BUILD: a tree displaying `r` on `leaves`, or `None` if `r` is incompatible.
pub fn aho_build<L: Label>(r: &TripletSet<L>, leaves: &[L]) -> Option<RootedTree<L>> {
    let mut sorted = leaves.to_vec();
    sorted.sort();
    sorted.dedup();
    if sorted.is_empty() {
        return None;
    }
    let triplets: Vec<(usize, usize, usize)> = r
        .iter()
        .filter_map(|t| {
            let f = |l: &L| sorted.binary_search(l).ok();
            Some((f(&t.a)?, f(&t.b)?, f(&t.c)?))
        })
        .collect();
    let mut b = TreeBuilder::new();
    let all: Vec<usize> = (0..sorted.len()).collect();
    let root = build_rec(&sorted, &triplets, &all, &mut b)?;
    Some(b.finish(root).expect("BUILD output is well-formed"))
}

fn build_rec<L: Label>(
    labels: &[L],
    triplets: &[(usize, usize, usize)],
    set: &[usize],
    b: &mut TreeBuilder<L>,
) -> Option<VertexId> {
    if set.len() == 1 {
        return Some(b.add_leaf(labels[set[0]].clone()));
    }
    let mut pos = vec![usize::MAX; labels.len()];
    for (i, &x) in set.iter().enumerate() {
        pos[x] = i;
    }
    let mut dsu: Vec<usize> = (0..set.len()).collect();
    fn find(d: &mut [usize], mut x: usize) -> usize {
        while d[x] != x {
            d[x] = d[d[x]];
            x = d[x];
        }
        x
    }
    let inside: Vec<(usize, usize, usize)> = triplets
        .iter()
        .copied()
        .filter(|&(a, b, c)| pos[a] != usize::MAX && pos[b] != usize::MAX && pos[c] != usize::MAX)
        .collect();
    for &(a, bb, _) in &inside {
        let (ra, rb) = (find(&mut dsu, pos[a]), find(&mut dsu, pos[bb]));
        if ra != rb {
            dsu[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut comps: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; set.len()];
    for i in 0..set.len() {
        let r = find(&mut dsu, i);
        if slot[r] == usize::MAX {
            slot[r] = comps.len();
            comps.push(Vec::new());
        }
        comps[slot[r]].push(set[i]);
    }
    if comps.len() == 1 {
        return None;
    }
    let mut kids = Vec::with_capacity(comps.len());
    for c in &comps {
        kids.push(build_rec(labels, &inside, c, b)?);
    }
    Some(b.add_internal(kids))
}

/// Knobs of the instance generator. Rates are per gene lineage per unit of
/// time on a species tree of height one; `gene_count_hint` caps the number
/// of simultaneously living gene lineages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceGenConfig {
    pub species_count: usize,
    pub gene_count_hint: usize,
    pub dup_rate: f64,
    pub hgt_rate: f64,
    pub loss_rate: f64,
    pub seed: u64,
}

impl Default for InstanceGenConfig {
    fn default() -> Self {
        Self {
            species_count: 5,
            gene_count_hint: 20,
            dup_rate: 0.3,
            hgt_rate: 0.3,
            loss_rate: 0.1,
            seed: 0,
        }
    }
}

impl InstanceGenConfig {
    fn check(&self) -> Result<()> {
        if self.species_count == 0 {
            return Err(Error::Config("species_count must be positive".into()));
        }
        if self.gene_count_hint == 0 {
            return Err(Error::Config("gene_count_hint must be positive".into()));
        }
        for (name, r) in [("dup_rate", self.dup_rate), ("hgt_rate", self.hgt_rate), ("loss_rate", self.loss_rate)] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {r}")));
            }
        }
        Ok(())
    }
}

/// A generated gene tree together with the species tree it evolved in.
#[derive(Clone, Debug)]
pub struct Instance {
    pub gene: ValidGeneTree,
    /// The simulated species tree over all species, including any that lost
    /// every gene.
    pub species_tree: RootedTree<String>,
}

const MAX_ATTEMPTS: u64 = 64;

pub fn generate_instance(cfg: &InstanceGenConfig) -> Result<Instance> {
    cfg.check()?;
    let mut seeder = ChaCha8Rng::seed_from_u64(cfg.seed);
    for attempt in 0..MAX_ATTEMPTS {
        let seed = if attempt == 0 { cfg.seed } else { seeder.gen() };
        if let Some(inst) = simulate(cfg, seed)? {
            return Ok(inst);
        }
    }
    Err(Error::Config(format!(
        "every gene was lost in {MAX_ATTEMPTS} attempts; lower loss_rate"
    )))
}

struct Species {
    children: Vec<usize>,
    start: f64,
    end: f64,
    name: Option<String>,
}

/// Yule-like forward process with uniform split times on `[0, 1)`; the root
/// split sits below a stem starting at time 0.
fn simulate_species(n: usize, rng: &mut ChaCha8Rng) -> (Vec<Species>, usize) {
    let mut sp = vec![Species {
        children: vec![],
        start: 0.0,
        end: 1.0,
        name: None,
    }];
    let mut open = vec![0usize];
    let mut times: Vec<f64> = (1..n).map(|_| rng.gen::<f64>()).collect();
    times.sort_by(f64::total_cmp);
    for t in times {
        let i = rng.gen_range(0..open.len());
        let v = open[i];
        sp[v].end = t;
        let c1 = sp.len();
        let c2 = c1 + 1;
        for _ in 0..2 {
            sp.push(Species {
                children: vec![],
                start: t,
                end: 1.0,
                name: None,
            });
        }
        sp[v].children = vec![c1, c2];
        open[i] = c1;
        open.push(c2);
    }
    for (k, &v) in open.iter().enumerate() {
        sp[v].name = Some(format!("S{}", k + 1));
    }
    (sp, 0)
}

fn species_to_tree(sp: &[Species], root: usize) -> RootedTree<String> {
    fn rec(sp: &[Species], v: usize, b: &mut TreeBuilder<String>) -> VertexId {
        match &sp[v].name {
            Some(n) => b.add_leaf(n.clone()),
            None => {
                let kids = sp[v].children.iter().map(|&c| rec(sp, c, b)).collect();
                b.add_internal(kids)
            }
        }
    }
    let mut b = TreeBuilder::new();
    let r = rec(sp, root, &mut b);
    b.finish(r).expect("simulated species tree is well-formed")
}

struct GNode {
    event: EventLabel,
    children: Vec<usize>,
    transfer_in: bool,
    species: Option<usize>,
    lost: bool,
}

struct Lineage {
    parent: Option<usize>,
    transfer_in: bool,
    edge: usize,
}

#[derive(PartialEq)]
struct Pending {
    time: f64,
    seq: u64,
    lineage: usize,
}

impl Eq for Pending {}

impl Ord for Pending {
    // min-heap on (time, seq)
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then(other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn simulate(cfg: &InstanceGenConfig, seed: u64) -> Result<Option<Instance>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (sp, sroot) = simulate_species(cfg.species_count, &mut rng);
    let rate = cfg.dup_rate + cfg.hgt_rate + cfg.loss_rate;
    let mut nodes: Vec<GNode> = Vec::new();
    let mut lineages: Vec<Lineage> = vec![Lineage {
        parent: None,
        transfer_in: false,
        edge: sroot,
    }];
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    let mut live = 1usize;
    let mut schedule = |heap: &mut BinaryHeap<Pending>, rng: &mut ChaCha8Rng, l: usize, from: f64, edge: usize| {
        let wait = if rate > 0.0 {
            -(1.0 - rng.gen::<f64>()).ln() / rate
        } else {
            f64::INFINITY
        };
        seq += 1;
        heap.push(Pending {
            time: (from + wait).min(sp[edge].end),
            seq,
            lineage: l,
        });
    };
    schedule(&mut heap, &mut rng, 0, 0.0, sroot);
    while let Some(Pending { time, lineage, .. }) = heap.pop() {
        let (parent, transfer_in, edge) = {
            let l = &lineages[lineage];
            (l.parent, l.transfer_in, l.edge)
        };
        let node = |nodes: &mut Vec<GNode>, event, species, lost| {
            let id = nodes.len();
            nodes.push(GNode {
                event,
                children: vec![],
                transfer_in,
                species,
                lost,
            });
            if let Some(p) = parent {
                nodes[p].children.push(id);
            }
            id
        };
        let spawn = |lineages: &mut Vec<Lineage>, parent, transfer_in, edge| {
            lineages.push(Lineage {
                parent: Some(parent),
                transfer_in,
                edge,
            });
            lineages.len() - 1
        };
        if time >= sp[edge].end {
            if sp[edge].children.is_empty() {
                node(&mut nodes, EventLabel::Leaf, Some(edge), false);
            } else {
                let n = node(&mut nodes, EventLabel::Speciation, None, false);
                live += sp[edge].children.len() - 1;
                for &c in &sp[edge].children {
                    let l = spawn(&mut lineages, n, false, c);
                    schedule(&mut heap, &mut rng, l, time, c);
                }
            }
            continue;
        }
        let u = rng.gen::<f64>() * rate;
        let capped = live >= cfg.gene_count_hint;
        if u < cfg.loss_rate {
            node(&mut nodes, EventLabel::Leaf, None, true);
            live -= 1;
        } else if u < cfg.loss_rate + cfg.dup_rate && !capped {
            let n = node(&mut nodes, EventLabel::Duplication, None, false);
            live += 1;
            for _ in 0..2 {
                let l = spawn(&mut lineages, n, false, edge);
                schedule(&mut heap, &mut rng, l, time, edge);
            }
        } else if u >= cfg.loss_rate + cfg.dup_rate && !capped {
            let targets: Vec<usize> = (0..sp.len())
                .filter(|&c| c != edge && sp[c].start < time && time < sp[c].end)
                .collect();
            match targets.choose(&mut rng) {
                None => schedule(&mut heap, &mut rng, lineage, time, edge),
                Some(&target) => {
                    let n = node(&mut nodes, EventLabel::Transfer, None, false);
                    live += 1;
                    let l = spawn(&mut lineages, n, false, edge);
                    schedule(&mut heap, &mut rng, l, time, edge);
                    let l = spawn(&mut lineages, n, true, target);
                    schedule(&mut heap, &mut rng, l, time, target);
                }
            }
        } else {
            schedule(&mut heap, &mut rng, lineage, time, edge);
        }
    }
    let species_tree = species_to_tree(&sp, sroot);
    Ok(finish_gene_tree(&nodes, &sp)?.map(|gene| Instance { gene, species_tree }))
}

/// Prunes lost lineages, suppresses unary vertices, then repairs event labels
/// and transfer marks until the axioms hold.
fn finish_gene_tree(nodes: &[GNode], sp: &[Species]) -> Result<Option<ValidGeneTree>> {
    let mut survive = vec![false; nodes.len()];
    for v in (0..nodes.len()).rev() {
        // children are created after their parent
        survive[v] = if nodes[v].event == EventLabel::Leaf {
            !nodes[v].lost
        } else {
            nodes[v].children.iter().any(|&c| survive[c])
        };
    }
    if nodes.is_empty() || !survive[0] {
        return Ok(None);
    }
    let mut children: Vec<Vec<VertexId>> = Vec::new();
    let mut events = Vec::new();
    let mut transfer = Vec::new();
    let mut species: Vec<Option<String>> = Vec::new();
    let mut labels: Vec<Option<String>> = Vec::new();
    let mut leaf_no = 0usize;
    // iterative build: (source node, incoming transfer flag, slot in parent)
    let mut stack: Vec<(usize, bool, Option<usize>)> = vec![(0, false, None)];
    while let Some((mut v, mut flag, parent_slot)) = stack.pop() {
        loop {
            let kept: Vec<usize> = nodes[v].children.iter().copied().filter(|&c| survive[c]).collect();
            if kept.len() == 1 {
                v = kept[0];
                flag |= nodes[v].transfer_in;
                continue;
            }
            let id = children.len();
            children.push(vec![]);
            events.push(nodes[v].event);
            transfer.push(flag && parent_slot.is_some());
            if let Some(p) = parent_slot {
                children[p].push(VertexId::from(id));
            }
            match nodes[v].species {
                Some(s) => {
                    leaf_no += 1;
                    labels.push(Some(format!("g{leaf_no}")));
                    species.push(sp[s].name.clone());
                }
                None => {
                    labels.push(None);
                    species.push(None);
                }
            }
            // reversed so the first child is built first
            for &c in kept.iter().rev() {
                stack.push((c, nodes[c].transfer_in, Some(id)));
            }
            break;
        }
    }
    repair_axioms(VertexId(0), children, labels, events, transfer, species).map(Some)
}

/// Relabels events and drops transfer marks until the axioms hold: a
/// transfer edge out of a duplication turns it into a transfer vertex, one
/// out of a speciation is unmarked; an unbalanced transfer vertex loses a
/// mark or becomes a duplication; a speciation with overlapping children
/// becomes a duplication; an overlapping transfer edge is unmarked.
fn repair_axioms(
    root: VertexId,
    children: Vec<Vec<VertexId>>,
    labels: Vec<Option<String>>,
    mut events: Vec<EventLabel>,
    mut transfer: Vec<bool>,
    species: Vec<Option<String>>,
) -> Result<ValidGeneTree> {
    let mut parent = vec![None; children.len()];
    for (v, ch) in children.iter().enumerate() {
        for c in ch {
            parent[c.index()] = Some(v);
        }
    }
    for v in 0..children.len() {
        if transfer[v] {
            match parent[v].map(|p| (p, events[p])) {
                Some((_, EventLabel::Transfer)) => {}
                Some((p, EventLabel::Duplication)) => events[p] = EventLabel::Transfer,
                _ => transfer[v] = false,
            }
        }
    }
    loop {
        let tree = RootedTree::from_parts(root, children.clone(), labels.clone())?;
        let g = GeneTree::new(tree, events.clone(), transfer.clone(), species.clone())?;
        let report = validate_axioms(&g);
        if report.ok() {
            return g.validate();
        }
        for viol in report.violations {
            let v = viol.vertex.index();
            match viol.axiom {
                Axiom::O1 => return Err(Error::InvalidGeneTree("unary vertex cannot be repaired".into())),
                Axiom::O2 => {
                    let ch = &children[v];
                    match ch.iter().find(|c| transfer[c.index()]) {
                        Some(c) if ch.iter().all(|c| transfer[c.index()]) => transfer[c.index()] = false,
                        _ => events[v] = EventLabel::Duplication,
                    }
                }
                Axiom::O3a => events[parent[v].expect("speciation child")] = EventLabel::Duplication,
                Axiom::O3b => transfer[viol.other.expect("transfer target").index()] = false,
            }
        }
    }
}

/// Swaps the species of `swaps` random leaf pairs, then repairs the axioms.
/// Turns simulated (and therefore feasible) instances into inputs that may
/// have no time-consistent species tree.
pub fn perturb_species(g: &ValidGeneTree, swaps: usize, seed: u64) -> Result<ValidGeneTree> {
    let t = g.tree();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut species: Vec<Option<String>> = t
        .vertices()
        .map(|v| g.species_of(v).map(|s| g.species_name(s).to_string()))
        .collect();
    let leaves: Vec<usize> = t.leaves().map(|v| v.index()).collect();
    if leaves.len() >= 2 {
        for _ in 0..swaps {
            let pick: Vec<&usize> = leaves.choose_multiple(&mut rng, 2).collect();
            species.swap(*pick[0], *pick[1]);
        }
    }
    repair_axioms(
        t.root(),
        t.vertices().map(|v| t.children(v).to_vec()).collect(),
        t.vertices().map(|v| t.label(v).cloned()).collect(),
        g.events().to_vec(),
        t.vertices().map(|v| g.is_transfer_edge(v)).collect(),
        species,
    )
}
