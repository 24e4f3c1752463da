#![allow(dead_code)]

use gtc_core::oracle::{generate_instance, perturb_species, InstanceGenConfig};
use gtc_core::{RootedTree, TreeBuilder, ValidGeneTree, VertexId};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("L{i}")).collect()
}

/// Random tree on `labels` by repeatedly merging 2..=max_arity subtrees.
pub fn random_tree(labels: &[String], max_arity: usize, seed: u64) -> RootedTree<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = TreeBuilder::new();
    let mut pool: Vec<VertexId> = labels.iter().map(|l| b.add_leaf(l.clone())).collect();
    while pool.len() > 1 {
        pool.shuffle(&mut rng);
        let k = rng.gen_range(2..=max_arity.max(2).min(pool.len()));
        let kids = pool.split_off(pool.len() - k);
        pool.push(b.add_internal(kids));
    }
    b.finish(pool[0]).unwrap()
}

pub fn random_binary_tree(labels: &[String], seed: u64) -> RootedTree<String> {
    random_tree(labels, 2, seed)
}

/// Simulated instances with mixed rates; `swaps` of them are perturbed.
pub fn mixed_instance(seed: u64, max_species: usize) -> ValidGeneTree {
    let cfg = InstanceGenConfig {
        species_count: 2 + (seed as usize % (max_species - 1)),
        gene_count_hint: 8 + (seed as usize / 7 % 4) * 8,
        dup_rate: [0.0, 0.3, 0.6, 1.0][(seed / 5 % 4) as usize],
        hgt_rate: [0.2, 0.5, 1.0][(seed / 20 % 3) as usize],
        loss_rate: [0.0, 0.3, 0.6][(seed / 60 % 3) as usize],
        seed,
    };
    let inst = generate_instance(&cfg).unwrap();
    perturb_species(&inst.gene, (seed % 6) as usize, seed).unwrap()
}

/// Strict ancestors of `v`, root last.
pub fn ancestors<L: gtc_core::tree::Label>(t: &RootedTree<L>, v: VertexId) -> Vec<VertexId> {
    let mut out = vec![];
    let mut cur = t.parent(v);
    while let Some(p) = cur {
        out.push(p);
        cur = t.parent(p);
    }
    out
}

/// Lowest common ancestor by intersecting root paths.
pub fn naive_lca<L: gtc_core::tree::Label>(t: &RootedTree<L>, a: VertexId, b: VertexId) -> VertexId {
    let mut pa = vec![a];
    pa.extend(ancestors(t, a));
    let mut cur = Some(b);
    while let Some(v) = cur {
        if pa.contains(&v) {
            return v;
        }
        cur = t.parent(v);
    }
    unreachable!("trees are connected")
}

/// The species trees visited by a trace, starting with `start`.
pub fn replay(
    g: &ValidGeneTree,
    start: &gtc_core::SpeciesTree,
    trace: &gtc_core::solver::SolveTrace,
) -> Vec<(gtc_core::SpeciesTree, Option<gtc_core::solver::RefinementEvent>)> {
    let leaves = gtc_core::aux::species_leaves(g, start).unwrap();
    let to_v = |p: &[gtc_core::SpeciesId]| p.iter().map(|s| leaves[s.index()]).collect::<Vec<_>>();
    let mut out = vec![(start.clone(), None)];
    for step in &trace.steps {
        let s = &out.last().unwrap().0;
        let r = s.split_refinement(step.cherry, &to_v(&step.part_a), &to_v(&step.part_b)).unwrap();
        let ev = gtc_core::solver::RefinementEvent {
            cherry: step.cherry,
            child_a: r.child_a,
            child_b: r.child_b,
            part_a: step.part_a.clone(),
            part_b: step.part_b.clone(),
        };
        out.push((r.tree, Some(ev)));
    }
    out
}

pub const WORKED: &str =
    "(((((g1@C,g2@A)[&ev=s,tr=1],g3@D)[&ev=t,tr=1],(g4@B,g5@B)[&ev=d])[&ev=t],g6@A)[&ev=s],g7@D)[&ev=s];";
