//! Rooted, leaf-labeled trees and the purely topological operations on them.
//!
//! Trees are immutable values. Refinements (extensions and split refinements)
//! build a new tree in which every existing [`VertexId`] keeps its meaning and
//! freshly created vertices receive the next free ids, so bookkeeping keyed by
//! vertex id carries over from a tree to its refinement unchanged.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Debug;
use std::hash::Hash;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense vertex index, unique within one tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexId(pub u32);

impl VertexId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for VertexId {
    fn from(i: usize) -> Self {
        VertexId(i as u32)
    }
}

/// Bound for anything used as a leaf label.
pub trait Label: Clone + Eq + Ord + Hash + Debug {}

impl<T: Clone + Eq + Ord + Hash + Debug> Label for T {}

#[derive(Clone, Debug)]
pub struct RootedTree<L> {
    root: VertexId,
    parent: Vec<Option<VertexId>>,
    children: Vec<Vec<VertexId>>,
    labels: Vec<Option<L>>,
    lca: OnceLock<LcaIndex>,
}

/// Incremental construction of a [`RootedTree`], children before parents.
#[derive(Debug)]
pub struct TreeBuilder<L> {
    children: Vec<Vec<VertexId>>,
    labels: Vec<Option<L>>,
}

impl<L> Default for TreeBuilder<L> {
    fn default() -> Self {
        Self {
            children: Vec::new(),
            labels: Vec::new(),
        }
    }
}

impl<L: Label> TreeBuilder<L> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_leaf(&mut self, label: L) -> VertexId {
        self.children.push(Vec::new());
        self.labels.push(Some(label));
        VertexId::from(self.children.len() - 1)
    }

    pub fn add_internal(&mut self, children: Vec<VertexId>) -> VertexId {
        self.children.push(children);
        self.labels.push(None);
        VertexId::from(self.children.len() - 1)
    }

    pub fn finish(self, root: VertexId) -> Result<RootedTree<L>> {
        RootedTree::from_parts(root, self.children, self.labels)
    }
}

impl<L: Label> RootedTree<L> {
    /// Builds a tree from child lists and labels, checking every structural
    /// invariant: a single root, one parent per non-root vertex, connectivity,
    /// and labels exactly on the leaves.
    pub fn from_parts(
        root: VertexId,
        children: Vec<Vec<VertexId>>,
        labels: Vec<Option<L>>,
    ) -> Result<Self> {
        let n = children.len();
        if n == 0 {
            return Err(Error::EmptySet);
        }
        if labels.len() != n {
            return Err(Error::MalformedTree("label table length differs from vertex count".into()));
        }
        if root.index() >= n {
            return Err(Error::UnknownVertex(root));
        }
        let mut parent = vec![None; n];
        for (v, ch) in children.iter().enumerate() {
            for &c in ch {
                if c.index() >= n {
                    return Err(Error::UnknownVertex(c));
                }
                if c == root {
                    return Err(Error::MalformedTree("root has a parent".into()));
                }
                if parent[c.index()].is_some() {
                    return Err(Error::MalformedTree(format!("vertex {} has two parents", c.0)));
                }
                parent[c.index()] = Some(VertexId::from(v));
            }
        }
        // every vertex must be reachable from the root
        let mut seen = vec![false; n];
        let mut stack = vec![root];
        let mut count = 0;
        while let Some(v) = stack.pop() {
            if seen[v.index()] {
                return Err(Error::MalformedTree("cycle".into()));
            }
            seen[v.index()] = true;
            count += 1;
            stack.extend(children[v.index()].iter().copied());
        }
        if count != n {
            return Err(Error::MalformedTree("tree is not connected".into()));
        }
        for v in 0..n {
            let leaf = children[v].is_empty();
            if leaf != labels[v].is_some() {
                return Err(Error::MalformedTree(format!(
                    "vertex {v} must carry a label iff it is a leaf"
                )));
            }
        }
        Ok(Self {
            root,
            parent,
            children,
            labels,
            lca: OnceLock::new(),
        })
    }

    pub fn single_leaf(label: L) -> Self {
        let mut b = TreeBuilder::new();
        let r = b.add_leaf(label);
        b.finish(r).expect("single leaf tree is valid")
    }

    /// Star tree: one internal vertex adjacent to all leaves. A single label
    /// yields the one-vertex tree.
    pub fn star<I: IntoIterator<Item = L>>(labels: I) -> Result<Self> {
        let mut b = TreeBuilder::new();
        let leaves: Vec<_> = labels.into_iter().map(|l| b.add_leaf(l)).collect();
        match leaves.len() {
            0 => Err(Error::EmptySet),
            1 => b.finish(leaves[0]),
            _ => {
                let r = b.add_internal(leaves);
                b.finish(r)
            }
        }
    }

    pub fn root(&self) -> VertexId {
        self.root
    }

    pub fn len(&self) -> usize {
        self.children.len()
    }

    pub fn is_empty(&self) -> bool {
        self.children.is_empty()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.len()).map(VertexId::from)
    }

    pub fn contains(&self, v: VertexId) -> bool {
        v.index() < self.len()
    }

    pub fn children(&self, v: VertexId) -> &[VertexId] {
        &self.children[v.index()]
    }

    pub fn parent(&self, v: VertexId) -> Option<VertexId> {
        self.parent[v.index()]
    }

    pub fn label(&self, v: VertexId) -> Option<&L> {
        self.labels[v.index()].as_ref()
    }

    pub fn is_leaf(&self, v: VertexId) -> bool {
        self.children[v.index()].is_empty()
    }

    pub fn leaves(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.vertices().filter(move |&v| self.is_leaf(v))
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().count()
    }

    pub fn leaf_labels(&self) -> Vec<L> {
        let mut out: Vec<L> = self.leaves().filter_map(|v| self.label(v).cloned()).collect();
        out.sort();
        out
    }

    /// Map from leaf label to leaf vertex; fails on duplicate labels.
    pub fn leaf_index(&self) -> Result<HashMap<L, VertexId>> {
        let mut map = HashMap::with_capacity(self.len());
        for v in self.leaves() {
            let l = self.label(v).expect("leaves are labeled").clone();
            if map.insert(l.clone(), v).is_some() {
                return Err(Error::DuplicateLabel(format!("{l:?}")));
            }
        }
        Ok(map)
    }

    /// Edges `(parent, child)` in vertex-id order of the child.
    pub fn edges(&self) -> impl Iterator<Item = (VertexId, VertexId)> + '_ {
        self.vertices()
            .filter_map(move |v| self.parent(v).map(|p| (p, v)))
    }

    /// Vertices in an order where every child precedes its parent.
    pub fn postorder(&self) -> Vec<VertexId> {
        let mut out = Vec::with_capacity(self.len());
        let mut stack = vec![(self.root, false)];
        while let Some((v, expanded)) = stack.pop() {
            if expanded {
                out.push(v);
            } else {
                stack.push((v, true));
                for &c in self.children(v).iter().rev() {
                    stack.push((c, false));
                }
            }
        }
        out
    }

    pub fn lca_index(&self) -> &LcaIndex {
        self.lca.get_or_init(|| LcaIndex::new(self))
    }

    pub fn depth(&self, v: VertexId) -> usize {
        self.lca_index().depth(v)
    }

    /// `true` iff `anc` lies on the path from the root to `v` (`v ⪯ anc`).
    pub fn is_ancestor_or_self(&self, anc: VertexId, v: VertexId) -> bool {
        self.lca_index().is_ancestor_or_self(anc, v)
    }

    pub fn lca2(&self, a: VertexId, b: VertexId) -> VertexId {
        self.lca_index().lca(a, b)
    }

    /// Lowest common ancestor of a non-empty vertex set.
    pub fn lca(&self, xs: &[VertexId]) -> Result<VertexId> {
        let (&first, rest) = xs.split_first().ok_or(Error::EmptySet)?;
        for &x in xs {
            if !self.contains(x) {
                return Err(Error::UnknownVertex(x));
            }
        }
        let idx = self.lca_index();
        Ok(rest.iter().fold(first, |acc, &x| idx.lca(acc, x)))
    }

    /// Leaf vertices of the subtree rooted at `v`.
    pub fn leaves_below(&self, v: VertexId) -> Vec<VertexId> {
        let mut out = Vec::new();
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            if self.is_leaf(u) {
                out.push(u);
            } else {
                stack.extend(self.children(u).iter().rev().copied());
            }
        }
        out
    }

    pub fn is_binary(&self) -> bool {
        self.vertices()
            .all(|v| self.is_leaf(v) || self.children(v).len() == 2)
    }

    pub fn is_cherry(&self, v: VertexId) -> bool {
        !self.is_leaf(v) && self.children(v).iter().all(|&c| self.is_leaf(c))
    }

    /// Every non-binary vertex is a cherry.
    pub fn is_almost_binary(&self) -> bool {
        self.vertices()
            .all(|v| self.is_leaf(v) || self.children(v).len() == 2 || self.is_cherry(v))
    }

    pub fn cherries(&self) -> Vec<VertexId> {
        self.vertices().filter(|&v| self.is_cherry(v)).collect()
    }

    /// The set of leaf-label clusters of all vertices. Two trees without
    /// out-degree-1 vertices have the same topology iff their clusters agree.
    pub fn clusters(&self) -> BTreeSet<BTreeSet<L>> {
        let mut below: Vec<BTreeSet<L>> = vec![BTreeSet::new(); self.len()];
        for v in self.postorder() {
            let set = if let Some(l) = self.label(v) {
                std::iter::once(l.clone()).collect()
            } else {
                self.children(v)
                    .iter()
                    .flat_map(|c| below[c.index()].iter().cloned())
                    .collect()
            };
            below[v.index()] = set;
        }
        below.into_iter().collect()
    }

    pub fn same_topology(&self, other: &RootedTree<L>) -> bool {
        self.clusters() == other.clusters()
    }

    /// Restriction `T|X`: the minimal subtree connecting the leaves labeled by
    /// `keep`, with out-degree-1 vertices suppressed.
    pub fn restrict(&self, keep: &[L]) -> Result<RootedTree<L>> {
        if keep.is_empty() {
            return Err(Error::EmptySet);
        }
        let index = self.leaf_index()?;
        let mut marked = vec![false; self.len()];
        for l in keep {
            let v = index
                .get(l)
                .ok_or_else(|| Error::UnknownLabel(format!("{l:?}")))?;
            marked[v.index()] = true;
        }
        for v in self.postorder() {
            if self.children(v).iter().any(|c| marked[c.index()]) {
                marked[v.index()] = true;
            }
        }
        let mut b = TreeBuilder::new();
        let mut image: Vec<Option<VertexId>> = vec![None; self.len()];
        for v in self.postorder() {
            if !marked[v.index()] {
                continue;
            }
            if let Some(l) = self.label(v) {
                image[v.index()] = Some(b.add_leaf(l.clone()));
                continue;
            }
            let kept: Vec<VertexId> = self
                .children(v)
                .iter()
                .filter_map(|c| image[c.index()])
                .collect();
            image[v.index()] = Some(if kept.len() == 1 {
                kept[0]
            } else {
                b.add_internal(kept)
            });
        }
        let root = image[self.root.index()].expect("root is marked");
        b.finish(root)
    }

    /// The `(x, X')` extension: a new vertex becomes the parent of `X'` and a
    /// child of `x`. With `|X'| <= 1` the tree is returned unchanged.
    pub fn apply_extension(&self, x: VertexId, subset: &[VertexId]) -> Result<Extension<L>> {
        if !self.contains(x) {
            return Err(Error::UnknownVertex(x));
        }
        let ch = self.children(x);
        let mut uniq: Vec<VertexId> = subset.to_vec();
        uniq.sort();
        uniq.dedup();
        if uniq.len() != subset.len() {
            return Err(Error::InvalidExtension {
                vertex: x,
                reason: "repeated vertex in subset".into(),
            });
        }
        if let Some(bad) = uniq.iter().find(|v| !ch.contains(v)) {
            return Err(Error::InvalidExtension {
                vertex: x,
                reason: format!("{} is not a child", bad.0),
            });
        }
        if uniq.len() <= 1 {
            return Ok(Extension {
                tree: self.clone(),
                new_vertex: None,
            });
        }
        if uniq.len() == ch.len() {
            return Err(Error::InvalidExtension {
                vertex: x,
                reason: "subset must be a strict subset of the children".into(),
            });
        }
        let y = VertexId::from(self.len());
        let mut children = self.children.clone();
        let mut labels = self.labels.clone();
        let mut parent = self.parent.clone();
        children[x.index()].retain(|c| !uniq.contains(c));
        children[x.index()].push(y);
        let moved: Vec<VertexId> = ch.iter().copied().filter(|c| uniq.contains(c)).collect();
        for &c in &moved {
            parent[c.index()] = Some(y);
        }
        children.push(moved);
        labels.push(None);
        parent.push(Some(x));
        Ok(Extension {
            tree: RootedTree {
                root: self.root,
                parent,
                children,
                labels,
                lca: OnceLock::new(),
            },
            new_vertex: Some(y),
        })
    }

    /// Split refinement at cherry `x`: extensions `(x, A)` then `(x, B)`.
    pub fn split_refinement(
        &self,
        x: VertexId,
        part_a: &[VertexId],
        part_b: &[VertexId],
    ) -> Result<SplitRefinement<L>> {
        if !self.contains(x) {
            return Err(Error::UnknownVertex(x));
        }
        if !self.is_cherry(x) {
            return Err(Error::NotCherry(x));
        }
        if part_a.is_empty() || part_b.is_empty() {
            return Err(Error::InvalidPartition("both parts must be non-empty".into()));
        }
        let mut all: Vec<VertexId> = part_a.iter().chain(part_b).copied().collect();
        all.sort();
        let before = all.len();
        all.dedup();
        if all.len() != before {
            return Err(Error::InvalidPartition("parts overlap".into()));
        }
        let mut ch = self.children(x).to_vec();
        ch.sort();
        if all != ch {
            return Err(Error::InvalidPartition(
                "parts must cover exactly the children of the cherry".into(),
            ));
        }
        let first = self.apply_extension(x, part_a)?;
        let rep_a = first.new_vertex.unwrap_or(part_a[0]);
        let second = first.tree.apply_extension(x, part_b)?;
        let rep_b = second.new_vertex.unwrap_or(part_b[0]);
        Ok(SplitRefinement {
            tree: second.tree,
            cherry: x,
            child_a: rep_a,
            child_b: rep_b,
        })
    }

    /// Contracts the edge above `y`, reattaching its children to its parent.
    /// Vertex ids above `y` shift down by one.
    pub fn contract_edge(&self, y: VertexId) -> Result<RootedTree<L>> {
        if !self.contains(y) {
            return Err(Error::UnknownVertex(y));
        }
        if self.parent(y).is_none() {
            return Err(Error::InvalidExtension {
                vertex: y,
                reason: "the root has no incoming edge".into(),
            });
        }
        if self.is_leaf(y) {
            return Err(Error::InvalidExtension {
                vertex: y,
                reason: "cannot contract a pendant edge".into(),
            });
        }
        let shift = |v: VertexId| if v > y { VertexId(v.0 - 1) } else { v };
        let mut children = Vec::with_capacity(self.len() - 1);
        let mut labels = Vec::with_capacity(self.len() - 1);
        for v in self.vertices() {
            if v == y {
                continue;
            }
            let mut ch = Vec::new();
            for &c in self.children(v) {
                if c == y {
                    ch.extend(self.children(y).iter().map(|&g| shift(g)));
                } else {
                    ch.push(shift(c));
                }
            }
            children.push(ch);
            labels.push(self.labels[v.index()].clone());
        }
        RootedTree::from_parts(shift(self.root), children, labels)
    }

    /// Relabels leaves through `f`, keeping the topology and vertex ids.
    pub fn map_labels<M: Label>(&self, mut f: impl FnMut(&L) -> M) -> RootedTree<M> {
        RootedTree {
            root: self.root,
            parent: self.parent.clone(),
            children: self.children.clone(),
            labels: self
                .labels
                .iter()
                .map(|l| l.as_ref().map(&mut f))
                .collect(),
            lca: OnceLock::new(),
        }
    }
}

impl<L: PartialEq> PartialEq for RootedTree<L> {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root && self.children == other.children && self.labels == other.labels
    }
}

impl<L: Eq> Eq for RootedTree<L> {}

#[derive(Clone, Debug)]
pub struct Extension<L> {
    pub tree: RootedTree<L>,
    /// The inserted vertex, absent when the extension was the identity.
    pub new_vertex: Option<VertexId>,
}

#[derive(Clone, Debug)]
pub struct SplitRefinement<L> {
    pub tree: RootedTree<L>,
    pub cherry: VertexId,
    /// Representative of part A under the cherry: the leaf itself for a
    /// singleton part, otherwise the new internal vertex.
    pub child_a: VertexId,
    pub child_b: VertexId,
}

/// Constant-time LCA queries via an Euler tour and a sparse table over depths.
#[derive(Clone, Debug)]
pub struct LcaIndex {
    depth: Vec<u32>,
    first: Vec<u32>,
    tin: Vec<u32>,
    tout: Vec<u32>,
    euler: Vec<u32>,
    table: Vec<Vec<u32>>,
}

impl LcaIndex {
    pub fn new<L: Label>(tree: &RootedTree<L>) -> Self {
        let n = tree.len();
        let mut depth = vec![0u32; n];
        let mut first = vec![0u32; n];
        let mut tin = vec![0u32; n];
        let mut tout = vec![0u32; n];
        let mut euler = Vec::with_capacity(2 * n);
        let mut clock = 0u32;
        // (vertex, next child position)
        let mut stack: Vec<(VertexId, usize)> = vec![(tree.root(), 0)];
        first[tree.root().index()] = 0;
        euler.push(tree.root().0);
        tin[tree.root().index()] = clock;
        clock += 1;
        while let Some(&mut (v, ref mut pos)) = stack.last_mut() {
            let ch = tree.children(v);
            if *pos < ch.len() {
                let c = ch[*pos];
                *pos += 1;
                depth[c.index()] = depth[v.index()] + 1;
                first[c.index()] = euler.len() as u32;
                euler.push(c.0);
                tin[c.index()] = clock;
                clock += 1;
                stack.push((c, 0));
            } else {
                tout[v.index()] = clock;
                stack.pop();
                if let Some(&(p, _)) = stack.last() {
                    euler.push(p.0);
                }
            }
        }
        let m = euler.len();
        let mut table = vec![euler.clone()];
        let mut k = 1;
        while (1 << k) <= m {
            let prev = &table[k - 1];
            let half = 1 << (k - 1);
            let row: Vec<u32> = (0..=m - (1 << k))
                .map(|i| {
                    let (a, b) = (prev[i], prev[i + half]);
                    if depth[a as usize] <= depth[b as usize] {
                        a
                    } else {
                        b
                    }
                })
                .collect();
            table.push(row);
            k += 1;
        }
        Self {
            depth,
            first,
            tin,
            tout,
            euler,
            table,
        }
    }

    pub fn depth(&self, v: VertexId) -> usize {
        self.depth[v.index()] as usize
    }

    pub fn is_ancestor_or_self(&self, anc: VertexId, v: VertexId) -> bool {
        self.tin[anc.index()] <= self.tin[v.index()] && self.tout[v.index()] <= self.tout[anc.index()]
    }

    pub fn lca(&self, a: VertexId, b: VertexId) -> VertexId {
        let (mut l, mut r) = (self.first[a.index()] as usize, self.first[b.index()] as usize);
        if l > r {
            std::mem::swap(&mut l, &mut r);
        }
        let len = r - l + 1;
        let k = (usize::BITS - 1 - len.leading_zeros()) as usize;
        let (x, y) = (self.table[k][l], self.table[k][r + 1 - (1 << k)]);
        debug_assert!(self.euler.len() >= r);
        VertexId(if self.depth[x as usize] <= self.depth[y as usize] {
            x
        } else {
            y
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn caterpillar(n: usize) -> RootedTree<String> {
        let mut b = TreeBuilder::new();
        let mut acc = b.add_leaf("L0".to_string());
        for i in 1..n {
            let leaf = b.add_leaf(format!("L{i}"));
            acc = b.add_internal(vec![acc, leaf]);
        }
        b.finish(acc).unwrap()
    }

    fn by_label(t: &RootedTree<String>, l: &str) -> VertexId {
        t.leaf_index().unwrap()[l]
    }

    #[test]
    fn lca_singleton_and_root() {
        let t = caterpillar(5);
        let leaf = by_label(&t, "L2");
        assert_eq!(t.lca(&[leaf]).unwrap(), leaf);
        assert_eq!(t.lca(&[leaf, t.root()]).unwrap(), t.root());
    }

    #[test]
    fn lca_errors() {
        let t = caterpillar(3);
        assert!(matches!(t.lca(&[]), Err(Error::EmptySet)));
        assert!(matches!(t.lca(&[VertexId(99)]), Err(Error::UnknownVertex(_))));
    }

    #[test]
    fn single_leaf_is_binary() {
        let t = RootedTree::single_leaf("A");
        assert!(t.is_binary());
        assert!(t.cherries().is_empty());
        assert_eq!(t.root(), VertexId(0));
    }

    #[test]
    fn star_shapes() {
        let two = RootedTree::star(["A", "B"]).unwrap();
        assert!(two.is_binary());
        let four = RootedTree::star(["A", "B", "C", "D"]).unwrap();
        assert!(!four.is_binary());
        assert!(four.is_almost_binary());
        assert_eq!(four.cherries(), vec![four.root()]);
    }

    #[test]
    fn almost_binary_nested_cherry() {
        // ((A,B,C),D)
        let mut b = TreeBuilder::new();
        let a = b.add_leaf("A");
        let bb = b.add_leaf("B");
        let c = b.add_leaf("C");
        let d = b.add_leaf("D");
        let abc = b.add_internal(vec![a, bb, c]);
        let r = b.add_internal(vec![abc, d]);
        let t = b.finish(r).unwrap();
        assert!(t.is_almost_binary());
        assert!(!t.is_binary());
        assert_eq!(t.cherries(), vec![abc]);
    }

    #[test]
    fn not_almost_binary() {
        // ((A,B),C,D): root non-binary but not a cherry
        let mut b = TreeBuilder::new();
        let a = b.add_leaf("A");
        let bb = b.add_leaf("B");
        let c = b.add_leaf("C");
        let d = b.add_leaf("D");
        let ab = b.add_internal(vec![a, bb]);
        let r = b.add_internal(vec![ab, c, d]);
        let t = b.finish(r).unwrap();
        assert!(!t.is_almost_binary());
    }

    #[test]
    fn malformed_trees_rejected() {
        let two_parents = RootedTree::from_parts(
            VertexId(2),
            vec![vec![], vec![VertexId(0)], vec![VertexId(0), VertexId(1)]],
            vec![Some("a"), None, None],
        );
        assert!(two_parents.is_err());
        let unlabeled_leaf =
            RootedTree::<&str>::from_parts(VertexId(0), vec![vec![]], vec![None]);
        assert!(unlabeled_leaf.is_err());
        let disconnected = RootedTree::from_parts(
            VertexId(0),
            vec![vec![], vec![]],
            vec![Some("a"), Some("b")],
        );
        assert!(disconnected.is_err());
    }

    #[test]
    fn restrict_suppresses_unary() {
        // ((a,b),c) restricted to {a,c} is (a,c)
        let mut b = TreeBuilder::new();
        let a = b.add_leaf("a");
        let bb = b.add_leaf("b");
        let c = b.add_leaf("c");
        let ab = b.add_internal(vec![a, bb]);
        let r = b.add_internal(vec![ab, c]);
        let t = b.finish(r).unwrap();
        let got = t.restrict(&["a", "c"]).unwrap();
        let want = RootedTree::star(["a", "c"]).unwrap();
        assert!(got.same_topology(&want));
        assert_eq!(got.len(), 3);
        let all = t.restrict(&["a", "b", "c"]).unwrap();
        assert!(all.same_topology(&t));
        assert!(t.restrict(&[]).is_err());
        assert!(matches!(t.restrict(&["zz"]), Err(Error::UnknownLabel(_))));
    }

    #[test]
    fn extension_small_subset_is_identity() {
        let t = RootedTree::star(["A", "B", "C", "D"]).unwrap();
        let leaf = by_label(&t.map_labels(|s| s.to_string()), "A");
        let e = t.apply_extension(t.root(), &[leaf]).unwrap();
        assert_eq!(e.tree, t);
        assert!(e.new_vertex.is_none());
    }

    #[test]
    fn extension_builds_new_parent_and_contracts_back() {
        let t = RootedTree::star(["A", "B", "C", "D"].map(String::from)).unwrap();
        let (a, b) = (by_label(&t, "A"), by_label(&t, "B"));
        let e = t.apply_extension(t.root(), &[a, b]).unwrap();
        let y = e.new_vertex.unwrap();
        assert_eq!(e.tree.parent(a), Some(y));
        assert_eq!(e.tree.parent(y), Some(t.root()));
        assert_eq!(e.tree.leaf_labels(), t.leaf_labels());
        let mut want = TreeBuilder::new();
        let la = want.add_leaf("A".to_string());
        let lb = want.add_leaf("B".to_string());
        let lc = want.add_leaf("C".to_string());
        let ld = want.add_leaf("D".to_string());
        let ab = want.add_internal(vec![la, lb]);
        let r = want.add_internal(vec![ab, lc, ld]);
        assert!(e.tree.same_topology(&want.finish(r).unwrap()));
        let back = e.tree.contract_edge(y).unwrap();
        assert!(back.same_topology(&t));
    }

    #[test]
    fn extension_errors() {
        let t = RootedTree::star(["A", "B", "C"].map(String::from)).unwrap();
        let all: Vec<_> = t.children(t.root()).to_vec();
        assert!(t.apply_extension(t.root(), &all).is_err());
        assert!(t.apply_extension(t.root(), &[all[0], t.root()]).is_err());
    }

    #[test]
    fn split_refinement_examples() {
        let t = RootedTree::star(["A", "B", "C", "D"].map(String::from)).unwrap();
        let ids: Vec<_> = ["A", "B", "C", "D"].iter().map(|l| by_label(&t, l)).collect();
        let s = t
            .split_refinement(t.root(), &ids[..3], &ids[3..])
            .unwrap();
        assert_eq!(s.child_b, ids[3]);
        assert_eq!(s.tree.children(t.root()).len(), 2);
        assert!(s.tree.is_almost_binary());
        assert_eq!(s.tree.cherries(), vec![s.child_a]);

        let two = RootedTree::star(["A", "B"].map(String::from)).unwrap();
        let (a, b) = (by_label(&two, "A"), by_label(&two, "B"));
        let same = two.split_refinement(two.root(), &[a], &[b]).unwrap();
        assert_eq!(same.tree, two);
    }

    #[test]
    fn split_refinement_errors() {
        let t = RootedTree::star(["A", "B", "C"].map(String::from)).unwrap();
        let ids: Vec<_> = t.children(t.root()).to_vec();
        assert!(t.split_refinement(ids[0], &[], &[]).is_err());
        assert!(t.split_refinement(t.root(), &ids[..2], &ids[1..]).is_err());
        assert!(t.split_refinement(t.root(), &ids[..1], &ids[1..2]).is_err());
        assert!(t.split_refinement(t.root(), &[], &ids).is_err());
    }
}
