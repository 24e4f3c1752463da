//! Event-labeled gene trees: structure, observability axioms, the transfer
//! forest obtained by deleting transfer edges, and informative triplets.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::triplet::{Triplet, TripletSet};
use crate::tree::{RootedTree, VertexId};

/// Dense species index into the gene tree's species table (sorted by name).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpeciesId(pub u32);

impl SpeciesId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventLabel {
    Leaf,
    Speciation,
    Duplication,
    Transfer,
}

impl EventLabel {
    /// Duplications and transfer origins sit on species-tree edges.
    pub fn is_edge_event(self) -> bool {
        matches!(self, EventLabel::Duplication | EventLabel::Transfer)
    }

    pub fn code(self) -> Option<char> {
        match self {
            EventLabel::Leaf => None,
            EventLabel::Speciation => Some('s'),
            EventLabel::Duplication => Some('d'),
            EventLabel::Transfer => Some('t'),
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "s" => Some(EventLabel::Speciation),
            "d" => Some(EventLabel::Duplication),
            "t" => Some(EventLabel::Transfer),
            _ => None,
        }
    }
}

/// A gene tree `(T; t, σ)`. Transfer edges are stored on their child vertex:
/// `transfer[v]` marks the edge from `parent(v)` to `v`.
#[derive(Clone, Debug)]
pub struct GeneTree {
    tree: RootedTree<String>,
    events: Vec<EventLabel>,
    transfer: Vec<bool>,
    sigma: Vec<Option<SpeciesId>>,
    species: Vec<String>,
}

impl GeneTree {
    /// `leaf_species[v]` names the species of leaf `v` and must be `None` on
    /// internal vertices. The species table is exactly the image of σ.
    pub fn new(
        tree: RootedTree<String>,
        events: Vec<EventLabel>,
        transfer: Vec<bool>,
        leaf_species: Vec<Option<String>>,
    ) -> Result<Self> {
        let n = tree.len();
        if events.len() != n || transfer.len() != n || leaf_species.len() != n {
            return Err(Error::InvalidGeneTree("per-vertex tables must match the tree size".into()));
        }
        tree.leaf_index()?;
        let mut table: Vec<String> = leaf_species.iter().flatten().cloned().collect();
        table.sort();
        table.dedup();
        let ids: BTreeMap<&str, SpeciesId> = table
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), SpeciesId(i as u32)))
            .collect();
        let mut sigma = vec![None; n];
        for v in tree.vertices() {
            let leaf = tree.is_leaf(v);
            let name = tree.label(v).cloned().unwrap_or_else(|| format!("#{}", v.0));
            if leaf != (events[v.index()] == EventLabel::Leaf) {
                return Err(Error::InvalidGeneTree(format!(
                    "vertex {name}: the leaf event label is reserved for leaves"
                )));
            }
            match (&leaf_species[v.index()], leaf) {
                (Some(s), true) => sigma[v.index()] = Some(ids[s.as_str()]),
                (None, true) => {
                    return Err(Error::InvalidGeneTree(format!("leaf {name} has no species")))
                }
                (Some(_), false) => {
                    return Err(Error::InvalidGeneTree(format!(
                        "internal vertex {name} carries a species"
                    )))
                }
                (None, false) => {}
            }
            if transfer[v.index()] {
                match tree.parent(v) {
                    None => {
                        return Err(Error::InvalidGeneTree("the root cannot be a transfer target".into()))
                    }
                    Some(p) if events[p.index()] != EventLabel::Transfer => {
                        return Err(Error::InvalidGeneTree(format!(
                            "transfer edge into {name} does not start at a transfer vertex"
                        )))
                    }
                    _ => {}
                }
            }
        }
        Ok(Self {
            tree,
            events,
            transfer,
            sigma,
            species: table,
        })
    }

    pub fn tree(&self) -> &RootedTree<String> {
        &self.tree
    }

    pub fn event(&self, v: VertexId) -> EventLabel {
        self.events[v.index()]
    }

    pub fn events(&self) -> &[EventLabel] {
        &self.events
    }

    /// Whether the edge `(parent(v), v)` is a transfer edge.
    pub fn is_transfer_edge(&self, v: VertexId) -> bool {
        self.transfer[v.index()]
    }

    pub fn transfer_edges(&self) -> Vec<(VertexId, VertexId)> {
        self.tree
            .edges()
            .filter(|&(_, c)| self.transfer[c.index()])
            .collect()
    }

    pub fn species_of(&self, leaf: VertexId) -> Option<SpeciesId> {
        self.sigma[leaf.index()]
    }

    pub fn species_names(&self) -> &[String] {
        &self.species
    }

    pub fn species_name(&self, s: SpeciesId) -> &str {
        &self.species[s.index()]
    }

    pub fn species_id(&self, name: &str) -> Option<SpeciesId> {
        self.species
            .binary_search_by(|s| s.as_str().cmp(name))
            .ok()
            .map(|i| SpeciesId(i as u32))
    }

    pub fn species_count(&self) -> usize {
        self.species.len()
    }

    pub fn all_species(&self) -> impl Iterator<Item = SpeciesId> {
        (0..self.species.len() as u32).map(SpeciesId)
    }

    /// Children reached without crossing a transfer edge.
    pub fn forest_children(&self, v: VertexId) -> impl Iterator<Item = VertexId> + '_ {
        self.tree
            .children(v)
            .iter()
            .copied()
            .filter(move |c| !self.transfer[c.index()])
    }

    pub fn validate(self) -> Result<ValidGeneTree> {
        let forest = TransferForest::new(&self);
        let report = validate_axioms_with(&self, &forest);
        if !report.ok() {
            return Err(Error::Axioms(report));
        }
        Ok(ValidGeneTree {
            gene: self,
            forest,
            triplets: OnceLock::new(),
        })
    }
}

/// The forest `T_Ē` with per-vertex leaf and species sets.
#[derive(Clone, Debug)]
pub struct TransferForest {
    component: Vec<u32>,
    roots: Vec<VertexId>,
    leaves_below: Vec<Vec<VertexId>>,
    species_below: Vec<Vec<SpeciesId>>,
}

impl TransferForest {
    pub fn new(g: &GeneTree) -> Self {
        let t = g.tree();
        let n = t.len();
        let mut component = vec![0u32; n];
        let mut roots = vec![t.root()];
        let mut stack = vec![t.root()];
        while let Some(v) = stack.pop() {
            for &c in t.children(v).iter().rev() {
                if g.is_transfer_edge(c) {
                    component[c.index()] = roots.len() as u32;
                    roots.push(c);
                } else {
                    component[c.index()] = component[v.index()];
                }
                stack.push(c);
            }
        }
        let mut leaves_below: Vec<Vec<VertexId>> = vec![Vec::new(); n];
        let mut species_below: Vec<Vec<SpeciesId>> = vec![Vec::new(); n];
        for v in t.postorder() {
            if t.is_leaf(v) {
                leaves_below[v.index()] = vec![v];
                species_below[v.index()] = g.species_of(v).into_iter().collect();
                continue;
            }
            let mut leaves = Vec::new();
            let mut species = Vec::new();
            for c in g.forest_children(v) {
                leaves.extend_from_slice(&leaves_below[c.index()]);
                species.extend_from_slice(&species_below[c.index()]);
            }
            species.sort();
            species.dedup();
            leaves_below[v.index()] = leaves;
            species_below[v.index()] = species;
        }
        Self {
            component,
            roots,
            leaves_below,
            species_below,
        }
    }

    pub fn component(&self, v: VertexId) -> usize {
        self.component[v.index()] as usize
    }

    pub fn component_count(&self) -> usize {
        self.roots.len()
    }

    pub fn component_root(&self, comp: usize) -> VertexId {
        self.roots[comp]
    }

    /// `L_{T_Ē}(v)`: leaves reachable from `v` without crossing transfer edges.
    pub fn leaves_below(&self, v: VertexId) -> &[VertexId] {
        &self.leaves_below[v.index()]
    }

    /// `σ_{T_Ē}(v)`, sorted.
    pub fn species_below(&self, v: VertexId) -> &[SpeciesId] {
        &self.species_below[v.index()]
    }

    pub fn has_species(&self, v: VertexId, s: SpeciesId) -> bool {
        self.species_below[v.index()].binary_search(&s).is_ok()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Axiom {
    O1,
    O2,
    O3a,
    O3b,
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Axiom::O1 => "O1",
            Axiom::O2 => "O2",
            Axiom::O3a => "O3a",
            Axiom::O3b => "O3b",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxiomViolation {
    pub axiom: Axiom,
    pub vertex: VertexId,
    /// Second witness: the other child for O3a, the transfer target for O3b.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub other: Option<VertexId>,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub violations: Vec<AxiomViolation>,
}

impl AxiomReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_axioms(g: &GeneTree) -> AxiomReport {
    validate_axioms_with(g, &TransferForest::new(g))
}

fn validate_axioms_with(g: &GeneTree, f: &TransferForest) -> AxiomReport {
    let t = g.tree();
    let name = |v: VertexId| t.label(v).cloned().unwrap_or_else(|| format!("#{}", v.0));
    let mut violations = Vec::new();
    let disjoint = |x: &[SpeciesId], y: &[SpeciesId]| !x.iter().any(|s| y.binary_search(s).is_ok());
    for v in t.vertices() {
        let ch = t.children(v);
        if !ch.is_empty() && ch.len() < 2 {
            violations.push(AxiomViolation {
                axiom: Axiom::O1,
                vertex: v,
                other: None,
                detail: format!("internal vertex {} has out-degree {}", name(v), ch.len()),
            });
        }
        match g.event(v) {
            EventLabel::Transfer => {
                let transfers = ch.iter().filter(|c| g.is_transfer_edge(**c)).count();
                if transfers == 0 || transfers == ch.len() {
                    violations.push(AxiomViolation {
                        axiom: Axiom::O2,
                        vertex: v,
                        other: None,
                        detail: format!(
                            "transfer vertex {} has {} transfer and {} vertical out-edges",
                            name(v),
                            transfers,
                            ch.len() - transfers
                        ),
                    });
                }
            }
            EventLabel::Speciation => {
                for i in 0..ch.len() {
                    for j in i + 1..ch.len() {
                        if !disjoint(f.species_below(ch[i]), f.species_below(ch[j])) {
                            violations.push(AxiomViolation {
                                axiom: Axiom::O3a,
                                vertex: ch[i],
                                other: Some(ch[j]),
                                detail: format!(
                                    "children {} and {} of speciation {} share a species",
                                    name(ch[i]),
                                    name(ch[j]),
                                    name(v)
                                ),
                            });
                        }
                    }
                }
            }
            _ => {}
        }
        if let Some(p) = t.parent(v) {
            if g.is_transfer_edge(v) && !disjoint(f.species_below(p), f.species_below(v)) {
                violations.push(AxiomViolation {
                    axiom: Axiom::O3b,
                    vertex: p,
                    other: Some(v),
                    detail: format!(
                        "transfer edge {} -> {} joins overlapping species sets",
                        name(p),
                        name(v)
                    ),
                });
            }
        }
    }
    AxiomReport { violations }
}

/// A gene tree that passed the axioms, with its transfer forest.
#[derive(Clone, Debug)]
pub struct ValidGeneTree {
    gene: GeneTree,
    forest: TransferForest,
    triplets: OnceLock<TripletSet<SpeciesId>>,
}

impl ValidGeneTree {
    pub fn gene(&self) -> &GeneTree {
        &self.gene
    }

    pub fn forest(&self) -> &TransferForest {
        &self.forest
    }

    pub fn tree(&self) -> &RootedTree<String> {
        self.gene.tree()
    }

    /// `R(T; t, σ)`, computed on first use.
    pub fn triplets(&self) -> &TripletSet<SpeciesId> {
        self.triplets
            .get_or_init(|| informative_triplets(&self.gene, &self.forest))
    }

    pub fn into_inner(self) -> GeneTree {
        self.gene
    }
}

impl std::ops::Deref for ValidGeneTree {
    type Target = GeneTree;

    fn deref(&self) -> &GeneTree {
        &self.gene
    }
}

/// `R(T; t, σ)`: species triplets forced by speciation vertices inside the
/// transfer forest and by the separation across each transfer edge.
pub fn informative_triplets(g: &GeneTree, f: &TransferForest) -> TripletSet<SpeciesId> {
    let t = g.tree();
    let idx = t.lca_index();
    let mut seen = SeenTriplets::new(g.species_count());

    for comp in 0..f.component_count() {
        let leaves = f.leaves_below(f.component_root(comp));
        let m = leaves.len();
        if m < 3 {
            continue;
        }
        let sp: Vec<SpeciesId> = leaves.iter().map(|&l| g.species_of(l).expect("leaf")).collect();
        // pairwise lca depth, and whether that lca is a speciation; lcas of
        // leaves in one component stay inside it
        let mut depth = vec![0u32; m * m];
        let mut spec = vec![false; m * m];
        for i in 0..m {
            for j in i + 1..m {
                let w = idx.lca(leaves[i], leaves[j]);
                let d = idx.depth(w) as u32;
                let s = g.event(w) == EventLabel::Speciation;
                depth[i * m + j] = d;
                depth[j * m + i] = d;
                spec[i * m + j] = s;
                spec[j * m + i] = s;
            }
        }
        for i in 0..m {
            for j in i + 1..m {
                if sp[i] == sp[j] {
                    continue;
                }
                let d_ij = depth[i * m + j];
                let (row_i, row_j) = (&depth[i * m..(i + 1) * m], &depth[j * m..(j + 1) * m]);
                for k in j + 1..m {
                    if sp[k] == sp[i] || sp[k] == sp[j] {
                        continue;
                    }
                    let (d_ik, d_jk) = (row_i[k], row_j[k]);
                    // two of the three depths coincide; the deeper one names the cherry
                    let (x, y, z, top) = if d_ij > d_ik {
                        (i, j, k, i * m + k)
                    } else if d_ik > d_ij {
                        (i, k, j, i * m + j)
                    } else if d_jk > d_ij {
                        (j, k, i, i * m + j)
                    } else {
                        continue;
                    };
                    if spec[top] {
                        seen.insert(sp[x], sp[y], sp[z]);
                    }
                }
            }
        }
    }
    let mut out = seen.finish();

    for (x, y) in g.transfer_edges() {
        for (pair_side, single_side) in [(x, y), (y, x)] {
            let pairs = f.species_below(pair_side);
            let singles = f.species_below(single_side);
            for i in 0..pairs.len() {
                for j in i + 1..pairs.len() {
                    for &c in singles {
                        if let Some(tr) = Triplet::new(pairs[i], pairs[j], c) {
                            out.insert(tr);
                        }
                    }
                }
            }
        }
    }
    out
}

/// Deduplicates species triplets, densely when the cube of the species count
/// is small enough.
enum SeenTriplets {
    Dense { n: usize, bits: Vec<u64> },
    Sparse(TripletSet<SpeciesId>),
}

impl SeenTriplets {
    const DENSE_MAX_BITS: usize = 1 << 27;

    fn new(n: usize) -> Self {
        match n.checked_pow(3) {
            Some(cube) if cube <= Self::DENSE_MAX_BITS => SeenTriplets::Dense {
                n,
                bits: vec![0; cube.div_ceil(64)],
            },
            _ => SeenTriplets::Sparse(TripletSet::new()),
        }
    }

    fn insert(&mut self, a: SpeciesId, b: SpeciesId, c: SpeciesId) {
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        match self {
            SeenTriplets::Dense { n, bits } => {
                let k = (a.index() * *n + b.index()) * *n + c.index();
                bits[k / 64] |= 1 << (k % 64);
            }
            SeenTriplets::Sparse(set) => {
                set.insert(Triplet { a, b, c });
            }
        }
    }

    fn finish(self) -> TripletSet<SpeciesId> {
        match self {
            SeenTriplets::Sparse(set) => set,
            SeenTriplets::Dense { n, bits } => {
                let mut out = TripletSet::new();
                for (w, &word) in bits.iter().enumerate() {
                    let mut rest = word;
                    while rest != 0 {
                        let k = w * 64 + rest.trailing_zeros() as usize;
                        rest &= rest - 1;
                        let id = |x: usize| SpeciesId(x as u32);
                        out.insert(Triplet {
                            a: id(k / (n * n)),
                            b: id(k / n % n),
                            c: id(k % n),
                        });
                    }
                }
                out
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::TreeBuilder;

    struct Spec {
        b: TreeBuilder<String>,
        events: Vec<EventLabel>,
        transfer: Vec<bool>,
        species: Vec<Option<String>>,
    }

    impl Spec {
        fn new() -> Self {
            Self {
                b: TreeBuilder::new(),
                events: vec![],
                transfer: vec![],
                species: vec![],
            }
        }
        fn leaf(&mut self, name: &str, sp: &str) -> VertexId {
            self.events.push(EventLabel::Leaf);
            self.transfer.push(false);
            self.species.push(Some(sp.into()));
            self.b.add_leaf(name.into())
        }
        fn node(&mut self, ev: EventLabel, ch: Vec<VertexId>) -> VertexId {
            self.events.push(ev);
            self.transfer.push(false);
            self.species.push(None);
            self.b.add_internal(ch)
        }
        fn mark(&mut self, v: VertexId) {
            self.transfer[v.index()] = true;
        }
        fn finish(self, root: VertexId) -> GeneTree {
            GeneTree::new(self.b.finish(root).unwrap(), self.events, self.transfer, self.species)
                .unwrap()
        }
    }

    fn single_transfer() -> GeneTree {
        let mut s = Spec::new();
        let a = s.leaf("a", "A");
        let b = s.leaf("b", "B");
        let r = s.node(EventLabel::Transfer, vec![a, b]);
        s.mark(b);
        s.finish(r)
    }

    #[test]
    fn single_transfer_is_valid() {
        let g = single_transfer();
        assert!(validate_axioms(&g).ok());
        let f = TransferForest::new(&g);
        assert_eq!(f.component_count(), 2);
    }

    #[test]
    fn speciation_with_shared_species_violates_o3a() {
        let mut s = Spec::new();
        let a = s.leaf("a1", "A");
        let b = s.leaf("a2", "A");
        let r = s.node(EventLabel::Speciation, vec![a, b]);
        let report = validate_axioms(&s.finish(r));
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].axiom, Axiom::O3a);
    }

    #[test]
    fn transfer_without_vertical_edge_violates_o2() {
        let mut s = Spec::new();
        let a = s.leaf("a", "A");
        let b = s.leaf("b", "B");
        let r = s.node(EventLabel::Transfer, vec![a, b]);
        s.mark(a);
        s.mark(b);
        let report = validate_axioms(&s.finish(r));
        assert!(report.violations.iter().any(|v| v.axiom == Axiom::O2));
    }

    #[test]
    fn all_violations_reported() {
        // unary duplication above a transfer with two transfer edges into the
        // same species as its vertical side
        let mut s = Spec::new();
        let a = s.leaf("a", "A");
        let b = s.leaf("b", "A");
        let t = s.node(EventLabel::Transfer, vec![a, b]);
        s.mark(a);
        s.mark(b);
        let r = s.node(EventLabel::Duplication, vec![t]);
        let report = validate_axioms(&s.finish(r));
        let kinds: Vec<_> = report.violations.iter().map(|v| v.axiom).collect();
        assert!(kinds.contains(&Axiom::O1));
        assert!(kinds.contains(&Axiom::O2));
    }

    #[test]
    fn structural_errors() {
        let mut s = Spec::new();
        let a = s.leaf("a", "A");
        let b = s.leaf("b", "B");
        let r = s.node(EventLabel::Speciation, vec![a, b]);
        s.mark(b);
        let tree = s.b.finish(r).unwrap();
        assert!(GeneTree::new(tree, s.events, s.transfer, s.species).is_err());
    }

    #[test]
    fn no_transfer_single_component() {
        let mut s = Spec::new();
        let a = s.leaf("a", "A");
        let b = s.leaf("b", "B");
        let c = s.leaf("c", "C");
        let ab = s.node(EventLabel::Speciation, vec![a, b]);
        let r = s.node(EventLabel::Speciation, vec![ab, c]);
        let g = s.finish(r);
        let f = TransferForest::new(&g);
        assert_eq!(f.component_count(), 1);
        assert_eq!(f.species_below(g.tree().root()).len(), 3);
        let r = informative_triplets(&g, &f);
        assert_eq!(r.len(), 1);
    }

    #[test]
    fn duplications_only_give_no_triplets() {
        let mut s = Spec::new();
        let a = s.leaf("a", "A");
        let b = s.leaf("b", "B");
        let c = s.leaf("c", "C");
        let ab = s.node(EventLabel::Duplication, vec![a, b]);
        let r = s.node(EventLabel::Duplication, vec![ab, c]);
        let g = s.finish(r);
        assert!(informative_triplets(&g, &TransferForest::new(&g)).is_empty());
    }

    #[test]
    fn species_table_is_sorted_image() {
        let g = single_transfer();
        assert_eq!(g.species_names(), &["A".to_string(), "B".to_string()]);
        assert_eq!(g.species_id("B"), Some(SpeciesId(1)));
        assert_eq!(g.species_id("Z"), None);
    }
}
