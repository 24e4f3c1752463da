mod common;

use common::*;
use gtc_core::gene::{validate_axioms, Axiom, TransferForest};
use gtc_core::newick::{parse_gene_tree, parse_gene_tree_lenient};
use gtc_core::{EventLabel, GeneTree, Triplet, TripletSet, VertexId};
use proptest::prelude::*;

/// Leaves reachable from `v` without crossing transfer edges.
fn forest_leaves(g: &GeneTree, v: VertexId) -> Vec<VertexId> {
    let t = g.tree();
    if t.is_leaf(v) {
        return vec![v];
    }
    t.children(v)
        .iter()
        .filter(|&&c| !g.is_transfer_edge(c))
        .flat_map(|&c| forest_leaves(g, c))
        .collect()
}

fn component_root(g: &GeneTree, mut v: VertexId) -> VertexId {
    while !g.is_transfer_edge(v) {
        match g.tree().parent(v) {
            Some(p) => v = p,
            None => break,
        }
    }
    v
}

/// Enumerates all leaf triples and all (transfer edge, leaf pair, leaf) combinations.
fn naive_triplets(g: &GeneTree) -> (TripletSet<gtc_core::SpeciesId>, TripletSet<gtc_core::SpeciesId>) {
    let t = g.tree();
    let sp = |v: VertexId| g.species_of(v).unwrap();
    let leaves: Vec<VertexId> = t.leaves().collect();
    let mut rule1 = TripletSet::new();
    for &a in &leaves {
        for &b in &leaves {
            for &c in &leaves {
                if a >= b || c == a || c == b {
                    continue;
                }
                let ra = component_root(g, a);
                if component_root(g, b) != ra || component_root(g, c) != ra {
                    continue;
                }
                let ab = naive_lca(t, a, b);
                let abc = naive_lca(t, ab, c);
                if ab != abc && g.event(abc) == EventLabel::Speciation {
                    if let Some(x) = Triplet::new(sp(a), sp(b), sp(c)) {
                        rule1.insert(x);
                    }
                }
            }
        }
    }
    let mut all = rule1.clone();
    for (x, y) in t.edges().filter(|&(_, y)| g.is_transfer_edge(y)) {
        for (one, other) in [(x, y), (y, x)] {
            let near = forest_leaves(g, one);
            let far = forest_leaves(g, other);
            for &a in &near {
                for &b in &near {
                    for &c in &far {
                        if let Some(tr) = Triplet::new(sp(a), sp(b), sp(c)) {
                            all.insert(tr);
                        }
                    }
                }
            }
        }
    }
    (rule1, all)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn triplets_match_naive_enumeration(seed in 0u64..1_000_000) {
        let g = mixed_instance(seed, 7);
        let (_, all) = naive_triplets(&g);
        prop_assert_eq!(g.triplets(), &all);
    }

    #[test]
    fn forest_structure(seed in 0u64..1_000_000) {
        let g = mixed_instance(seed, 7);
        let f = TransferForest::new(&g);
        prop_assert_eq!(f.component_count(), 1 + g.transfer_edges().len());
        // component leaf sets partition the leaves
        let mut seen: Vec<VertexId> = (0..f.component_count()).flat_map(|c| f.leaves_below(f.component_root(c)).to_vec()).collect();
        seen.sort();
        let mut leaves: Vec<VertexId> = g.tree().leaves().collect();
        leaves.sort();
        prop_assert_eq!(seen, leaves);
        for v in g.tree().vertices() {
            prop_assert_eq!(component_root(&g, v), f.component_root(f.component(v)));
            if g.event(v) == EventLabel::Speciation {
                prop_assert!(f.species_below(v).len() >= 2);
            }
        }
    }

    #[test]
    fn rule_one_triplets_come_from_the_forest(seed in 0u64..1_000_000) {
        // without transfer edges only rule-1 triplets exist
        let g = mixed_instance(seed, 7);
        let (rule1, _) = naive_triplets(&g);
        prop_assert!(rule1.is_subset(g.triplets()));
        if g.transfer_edges().is_empty() {
            prop_assert_eq!(rule1.len(), g.triplets().len());
        }
    }
}

#[test]
fn axiom_examples() {
    let ok = "(a@A,b@B[&tr=1])[&ev=t];";
    assert!(parse_gene_tree(ok, None).is_ok());
    let (_, r) = parse_gene_tree_lenient("(a@A,b@A)[&ev=s];", None).unwrap();
    assert_eq!(r.violations.iter().map(|v| v.axiom).collect::<Vec<_>>(), vec![Axiom::O3a]);
    let (_, r) = parse_gene_tree_lenient("(a@A[&tr=1],b@B[&tr=1])[&ev=t];", None).unwrap();
    assert!(r.violations.iter().any(|v| v.axiom == Axiom::O2));
    let (_, r) = parse_gene_tree_lenient("((a@A,c@C)[&ev=s],b@A[&tr=1])[&ev=t];", None).unwrap();
    assert!(r.violations.iter().any(|v| v.axiom == Axiom::O3b));
    // every violation is reported, not just the first
    let (g, r) = parse_gene_tree_lenient("((a@A,b@A)[&ev=s],(c@B)[&ev=d],d@C[&tr=1],e@D[&tr=1])[&ev=t];", None).unwrap();
    let axioms: Vec<Axiom> = r.violations.iter().map(|v| v.axiom).collect();
    assert!(axioms.contains(&Axiom::O1) && axioms.contains(&Axiom::O3a));
    assert_eq!(validate_axioms(&g), r);
}

#[test]
fn all_speciation_five_leaves() {
    let g = parse_gene_tree("(((a@A,b@B)[&ev=s],c@C)[&ev=s],(d@D,e@E)[&ev=s])[&ev=s];", None).unwrap();
    assert_eq!(g.triplets().len(), 10);
}

#[test]
fn duplications_only_give_nothing() {
    let g = parse_gene_tree("(((a@A,b@B)[&ev=d],c@C)[&ev=d],(d@D,e@E)[&ev=d])[&ev=d];", None).unwrap();
    assert!(g.triplets().is_empty());
}

#[test]
fn species_are_the_leaf_image() {
    let g = parse_gene_tree("((x@B,y@A)[&ev=s],z@B)[&ev=d];", None).unwrap();
    assert_eq!(g.species_names(), &["A".to_string(), "B".to_string()]);
}
