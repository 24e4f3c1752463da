mod common;

use common::*;
use gtc_core::triplet::{agrees, displayed_triplets, displays};
use gtc_core::{RootedTree, Triplet, TripletSet, VertexId};
use proptest::prelude::*;

fn binom3(n: usize) -> usize {
    n * n.saturating_sub(1) * n.saturating_sub(2) / 6
}

#[test]
fn lca_matches_path_oracle_on_fifty_leaves() {
    let t = random_tree(&names(50), 4, 7);
    let vs: Vec<VertexId> = t.vertices().collect();
    for &a in &vs {
        for &b in &vs {
            assert_eq!(t.lca2(a, b), naive_lca(&t, a, b));
        }
    }
}

#[test]
fn restrict_examples() {
    let t = random_tree(&names(6), 3, 1);
    let all = t.leaf_labels();
    assert!(t.restrict(&all).unwrap().same_topology(&t));
    assert!(t.restrict(&[]).is_err());
    assert!(t.restrict(&["nope".to_string()]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lca_matches_path_oracle(n in 1usize..=12, arity in 2usize..=4, seed in any::<u64>()) {
        let t = random_tree(&names(n), arity, seed);
        let vs: Vec<VertexId> = t.vertices().collect();
        for &a in &vs {
            for &b in &vs {
                prop_assert_eq!(t.lca2(a, b), naive_lca(&t, a, b));
            }
        }
    }

    #[test]
    fn binary_trees_display_all_triples(n in 1usize..=10, seed in any::<u64>()) {
        let t = random_binary_tree(&names(n), seed);
        prop_assert!(t.is_binary());
        prop_assert_eq!(displayed_triplets(&t).unwrap().len(), binom3(n));
    }

    #[test]
    fn restriction_keeps_exactly_the_inner_triplets(n in 3usize..=10, arity in 2usize..=4, seed in any::<u64>(), mask in any::<u16>()) {
        let labels = names(n);
        let t = random_tree(&labels, arity, seed);
        let keep: Vec<String> = labels.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, l)| l.clone()).collect();
        prop_assume!(!keep.is_empty());
        let r = t.restrict(&keep).unwrap();
        let mut got = r.leaf_labels();
        got.sort();
        let mut want = keep.clone();
        want.sort();
        prop_assert_eq!(got, want);
        let expected: TripletSet<String> = displayed_triplets(&t)
            .unwrap()
            .iter()
            .filter(|x| keep.contains(&x.a) && keep.contains(&x.b) && keep.contains(&x.c))
            .cloned()
            .collect();
        prop_assert_eq!(displayed_triplets(&r).unwrap(), expected);
        prop_assert!(r.vertices().all(|v| r.is_leaf(v) || r.children(v).len() >= 2));
    }

    #[test]
    fn displaying_implies_agreeing(n in 3usize..=9, arity in 2usize..=4, seed in any::<u64>(), keep in any::<u64>()) {
        let t = random_tree(&names(n), arity, seed);
        let rt = displayed_triplets(&t).unwrap();
        let r: TripletSet<String> = rt.sorted().into_iter().enumerate().filter(|(i, _)| keep >> (i % 64) & 1 == 1).map(|(_, x)| x).collect();
        prop_assert!(displays(&t, &r).unwrap());
        prop_assert!(agrees(&t, &r).unwrap());
    }

    #[test]
    fn refinement_chains_only_add_triplets(n in 3usize..=9, seed in any::<u64>()) {
        // refine a star into a binary tree by random splits of cherries
        use rand::{Rng, SeedableRng, seq::SliceRandom};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut t = RootedTree::star(names(n)).unwrap();
        let mut prev = displayed_triplets(&t).unwrap();
        while !t.is_binary() {
            prop_assert!(t.is_almost_binary());
            let cherries: Vec<VertexId> = t.cherries().into_iter().filter(|&x| t.children(x).len() > 2).collect();
            let x = *cherries.choose(&mut rng).unwrap();
            let mut kids = t.children(x).to_vec();
            kids.shuffle(&mut rng);
            let cut = rng.gen_range(1..kids.len());
            let binary_before = t.vertices().filter(|&v| t.children(v).len() == 2).count();
            let split = t.split_refinement(x, &kids[..cut], &kids[cut..]).unwrap();
            let leaves_before = t.leaf_labels();
            t = split.tree;
            prop_assert_eq!(t.leaf_labels(), leaves_before);
            // x itself becomes binary, and so does each new vertex over exactly two leaves
            let pairs = [cut, kids.len() - cut].iter().filter(|&&k| k == 2).count();
            prop_assert_eq!(t.children(x).len(), 2);
            prop_assert_eq!(t.vertices().filter(|&v| t.children(v).len() == 2).count(), binary_before + 1 + pairs);
            let now = displayed_triplets(&t).unwrap();
            prop_assert!(prev.is_subset(&now));
            prev = now;
        }
        prop_assert_eq!(prev.len(), binom3(n));
    }

    #[test]
    fn extension_preserves_leaves_and_contracts_back(n in 3usize..=9, seed in any::<u64>(), pick in any::<u32>()) {
        let t = RootedTree::star(names(n)).unwrap();
        let x = t.root();
        let kids = t.children(x).to_vec();
        let subset: Vec<VertexId> = kids.iter().enumerate().filter(|(i, _)| pick >> i & 1 == 1).map(|(_, &v)| v).collect();
        prop_assume!(subset.len() < kids.len());
        let _ = seed;
        let ext = t.apply_extension(x, &subset).unwrap();
        prop_assert_eq!(ext.tree.leaf_labels(), t.leaf_labels());
        if subset.len() >= 2 {
            let back = ext.tree.contract_edge(ext.new_vertex.unwrap()).unwrap();
            prop_assert!(back.same_topology(&t));
        } else {
            prop_assert!(ext.tree.same_topology(&t));
        }
    }
}

#[test]
fn agreement_examples() {
    let t = RootedTree::star(["A", "B", "C"].map(String::from)).unwrap();
    let tr = |a: &str, b: &str, c: &str| Triplet::new(a.to_string(), b.to_string(), c.to_string()).unwrap();
    let r: TripletSet<String> = [tr("A", "B", "C"), tr("B", "C", "A")].into_iter().collect();
    assert!(agrees(&t, &r).unwrap());
    let mut b = gtc_core::TreeBuilder::new();
    let (a, c, bb) = (b.add_leaf("A".to_string()), b.add_leaf("C".to_string()), b.add_leaf("B".to_string()));
    let ac = b.add_internal(vec![a, c]);
    let root = b.add_internal(vec![ac, bb]);
    let t2 = b.finish(root).unwrap();
    let r2: TripletSet<String> = [tr("A", "B", "C")].into_iter().collect();
    assert!(!agrees(&t2, &r2).unwrap());
}
