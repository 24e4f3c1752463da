//! Rooted triplets `ab|c`, triplet sets, display and agreement.

use std::collections::HashMap;

use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::{Label, RootedTree, VertexId};

/// The rooted triplet `ab|c`, stored with the pair sorted so `ab|c == ba|c`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triplet<L> {
    pub a: L,
    pub b: L,
    pub c: L,
}

impl<L: Label> Triplet<L> {
    /// Returns `None` unless the three labels are pairwise distinct.
    pub fn new(a: L, b: L, c: L) -> Option<Self> {
        if a == b || a == c || b == c {
            return None;
        }
        Some(if a <= b {
            Triplet { a, b, c }
        } else {
            Triplet { a: b, b: a, c }
        })
    }

    /// The two other resolutions on the same leaf set: `ac|b` and `bc|a`.
    pub fn alternatives(&self) -> [Triplet<L>; 2] {
        [
            Triplet::new(self.a.clone(), self.c.clone(), self.b.clone()).expect("distinct"),
            Triplet::new(self.b.clone(), self.c.clone(), self.a.clone()).expect("distinct"),
        ]
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TripletSet<L: Label> {
    set: FxHashSet<Triplet<L>>,
}

impl<L: Label> TripletSet<L> {
    pub fn new() -> Self {
        Self {
            set: FxHashSet::default(),
        }
    }

    pub fn insert(&mut self, t: Triplet<L>) -> bool {
        self.set.insert(t)
    }

    pub fn contains(&self, t: &Triplet<L>) -> bool {
        self.set.contains(t)
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Triplet<L>> {
        self.set.iter()
    }

    pub fn sorted(&self) -> Vec<Triplet<L>> {
        let mut v: Vec<_> = self.set.iter().cloned().collect();
        v.sort();
        v
    }

    pub fn is_subset(&self, other: &TripletSet<L>) -> bool {
        self.set.iter().all(|t| other.contains(t))
    }
}

impl<L: Label> FromIterator<Triplet<L>> for TripletSet<L> {
    fn from_iter<I: IntoIterator<Item = Triplet<L>>>(iter: I) -> Self {
        Self {
            set: iter.into_iter().collect(),
        }
    }
}

impl<L: Label> Extend<Triplet<L>> for TripletSet<L> {
    fn extend<I: IntoIterator<Item = Triplet<L>>>(&mut self, iter: I) {
        self.set.extend(iter)
    }
}

/// Which pair of three leaves forms the cherry of the induced triplet, if any.
/// Returns `Some((x, y, z))` meaning `xy|z` is displayed.
pub(crate) fn resolve<L: Label>(
    tree: &RootedTree<L>,
    a: VertexId,
    b: VertexId,
    c: VertexId,
) -> Option<(VertexId, VertexId, VertexId)> {
    let idx = tree.lca_index();
    let dab = idx.depth(idx.lca(a, b));
    let dac = idx.depth(idx.lca(a, c));
    let dbc = idx.depth(idx.lca(b, c));
    if dab > dac {
        Some((a, b, c))
    } else if dac > dab {
        Some((a, c, b))
    } else if dbc > dab {
        Some((b, c, a))
    } else {
        None
    }
}

/// `rt(T)`: every triplet displayed by the tree.
pub fn displayed_triplets<L: Label>(tree: &RootedTree<L>) -> Result<TripletSet<L>> {
    tree.leaf_index()?;
    let leaves: Vec<VertexId> = tree.leaves().collect();
    let label = |v: VertexId| tree.label(v).expect("leaf").clone();
    let mut out = TripletSet::new();
    for i in 0..leaves.len() {
        for j in i + 1..leaves.len() {
            for k in j + 1..leaves.len() {
                if let Some((x, y, z)) = resolve(tree, leaves[i], leaves[j], leaves[k]) {
                    out.insert(Triplet::new(label(x), label(y), label(z)).expect("distinct leaves"));
                }
            }
        }
    }
    Ok(out)
}

fn lookup<L: Label>(index: &HashMap<L, VertexId>, l: &L) -> Result<VertexId> {
    index
        .get(l)
        .copied()
        .ok_or_else(|| Error::UnknownLabel(format!("{l:?}")))
}

/// Whether `tree` displays the single triplet `t`.
pub fn displays_triplet<L: Label>(
    tree: &RootedTree<L>,
    index: &HashMap<L, VertexId>,
    t: &Triplet<L>,
) -> Result<bool> {
    let (a, b, c) = (lookup(index, &t.a)?, lookup(index, &t.b)?, lookup(index, &t.c)?);
    Ok(matches!(resolve(tree, a, b, c), Some((x, y, _)) if (x, y) == (a, b) || (x, y) == (b, a)))
}

/// Triplets of `r` that the tree does not display, in sorted order.
pub fn missing_triplets<L: Label>(tree: &RootedTree<L>, r: &TripletSet<L>) -> Result<Vec<Triplet<L>>> {
    let index = tree.leaf_index()?;
    let mut out = Vec::new();
    for t in r.iter() {
        if !displays_triplet(tree, &index, t)? {
            out.push(t.clone());
        }
    }
    out.sort();
    Ok(out)
}

pub fn displays<L: Label>(tree: &RootedTree<L>, r: &TripletSet<L>) -> Result<bool> {
    let index = tree.leaf_index()?;
    for t in r.iter() {
        if !displays_triplet(tree, &index, t)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `T` agrees with `R`: no triplet of `R` is contradicted by a displayed one.
/// A tree that leaves `{a,b,c}` unresolved agrees with any triplet on it.
pub fn agrees<L: Label>(tree: &RootedTree<L>, r: &TripletSet<L>) -> Result<bool> {
    let index = tree.leaf_index()?;
    for t in r.iter() {
        let (a, b, c) = (lookup(&index, &t.a)?, lookup(&index, &t.b)?, lookup(&index, &t.c)?);
        if let Some((x, y, _)) = resolve(tree, a, b, c) {
            if !((x, y) == (a, b) || (x, y) == (b, a)) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
