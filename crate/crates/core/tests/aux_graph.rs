mod common;

use std::collections::HashSet;

use common::*;
use gtc_core::aux::*;
use gtc_core::newick::{parse_gene_tree, parse_species_tree, species_tree_for};
use gtc_core::triplet::displays;
use gtc_core::{EventLabel, RootedTree, ValidGeneTree, VertexId};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn species_tree(g: &ValidGeneTree, text: &str) -> SpeciesTree {
    species_tree_for(g, &parse_species_tree(text).unwrap()).unwrap()
}

fn random_species_tree(g: &ValidGeneTree, arity: usize, seed: u64) -> SpeciesTree {
    let t: RootedTree<String> = random_tree(g.species_names(), arity, seed);
    species_tree_for(g, &t).unwrap()
}

fn has_cycle_dfs(d: &Digraph) -> bool {
    // 0 = new, 1 = on stack, 2 = done
    fn visit(d: &Digraph, v: usize, state: &mut [u8]) -> bool {
        state[v] = 1;
        for &w in d.successors(v) {
            if state[w] == 1 || (state[w] == 0 && visit(d, w, state)) {
                return true;
            }
        }
        state[v] = 2;
        false
    }
    let mut state = vec![0u8; d.len()];
    (0..d.len()).any(|v| state[v] == 0 && visit(d, v, &mut state))
}

fn members(aux: &AuxGraph) -> HashSet<AuxVertex> {
    let q = aux.topological_sort();
    (0..aux.vertex_count()).filter(|&i| q.contains(i)).map(|i| aux.vertex_at(i)).collect()
}

#[test]
fn single_transfer_graph() {
    let g = parse_gene_tree("(a@A,b@B[&tr=1])[&ev=t];", None).unwrap();
    let s = species_tree(&g, "(A,B);");
    let mu = lca_map(&g, &s).unwrap();
    let aux = build_aux_graph(&g, &s, &mu);
    let t = g.tree();
    let tau = t.root();
    let leaf = |name: &str| s.leaves().find(|&x| g.species_name(*s.label(x).unwrap()) == name).unwrap();
    let (a, b, rho) = (leaf("A"), leaf("B"), s.root());
    let edges: HashSet<(AuxVertex, AuxVertex, EdgeClass)> = aux.edges().iter().map(|e| (e.from, e.to, e.class)).collect();
    use AuxVertex::{Gene, Species};
    let want: HashSet<_> = [
        (Gene(tau), Species(a), EdgeClass::A1),
        (Gene(tau), Species(b), EdgeClass::A1),
        (Species(rho), Species(a), EdgeClass::A2),
        (Species(rho), Species(b), EdgeClass::A2),
        (Gene(tau), Species(a), EdgeClass::A3),
        (Species(rho), Gene(tau), EdgeClass::A4),
    ]
    .into_iter()
    .collect();
    assert_eq!(edges, want);
    assert_eq!(aux.edges().len(), 6);
    assert!(aux.topological_sort().is_complete());

    let rec = build_reconciliation(&g, &s).unwrap();
    assert_eq!(rec.placement[tau.index()], Placement::Edge { parent: Some(rho), child: a });
    let (ts_a, tt, ts_rho) = (rec.species_time[a.index()], rec.gene_time[tau.index()], rec.species_time[rho.index()]);
    assert!(ts_rho < tt && tt < ts_a);
    assert!(verify_reconciliation(&g, &s, &rec).unwrap().ok());
}

#[test]
fn lca_map_examples() {
    let g = parse_gene_tree("((a@A,b@B)[&ev=s],(c@C,d@A)[&ev=d])[&ev=d];", None).unwrap();
    let star = species_tree(&g, "(A,B,C);");
    let mu = lca_map(&g, &star).unwrap();
    for v in g.tree().vertices() {
        if g.tree().is_leaf(v) {
            assert_eq!(star.label(mu.get(v)), g.species_of(v).as_ref());
        } else {
            assert_eq!(mu.get(v), star.root());
        }
    }
    let missing = species_tree_for(&g, &parse_species_tree("(A,B);").unwrap());
    assert!(missing.is_err());
}

#[test]
fn topological_sort_examples() {
    let mut dag = Digraph::new(4);
    dag.add_edge(0, 1);
    dag.add_edge(1, 2);
    dag.add_edge(0, 3);
    let q = maximal_topological_sort(&dag);
    assert!(q.is_complete());
    assert_eq!(q.sequence, vec![0, 1, 2, 3]);

    let mut two = Digraph::new(2);
    two.add_edge(0, 1);
    two.add_edge(1, 0);
    let q = maximal_topological_sort(&two);
    assert_eq!(q.member_count(), 0);
    assert_eq!(find_cycle(&two, &q).unwrap().len(), 2);

    // 3 hangs below the cycle 1 <-> 2; 0 and 4 are free
    let mut g = Digraph::new(5);
    g.add_edge(0, 1);
    g.add_edge(1, 2);
    g.add_edge(2, 1);
    g.add_edge(2, 3);
    let q = maximal_topological_sort(&g);
    assert_eq!(q.members(), &[true, false, false, false, true]);
}

#[test]
fn reconciliation_perturbations_are_caught() {
    let g = parse_gene_tree("(((a@A,b@B)[&ev=s],c@C)[&ev=s],(d@A,e@B)[&ev=s])[&ev=d];", None).unwrap();
    let s = species_tree(&g, "((A,B),C);");
    let rec = build_reconciliation(&g, &s).unwrap();
    assert!(verify_reconciliation(&g, &s, &rec).unwrap().ok());
    let t = g.tree();
    for v in t.leaves() {
        let Placement::Vertex(x) = rec.placement[v.index()] else { panic!("leaf on an edge") };
        assert_eq!(s.label(x), g.species_of(v).as_ref());
    }
    let dup = t.root();
    assert_eq!(g.event(dup), EventLabel::Duplication);

    // a duplication timed after its edge ends
    let mut bad = rec.clone();
    bad.gene_time[dup.index()] = rec.species_time.iter().max().unwrap() + 1;
    assert!(verify_reconciliation(&g, &s, &bad).unwrap().has(Clause::B2));

    // a speciation moved off its lca
    let spec = t.vertices().find(|&v| g.event(v) == EventLabel::Speciation && t.children(v).iter().all(|&c| t.is_leaf(c))).unwrap();
    let mut bad = rec.clone();
    bad.placement[spec.index()] = Placement::Vertex(s.root());
    assert!(verify_reconciliation(&g, &s, &bad).unwrap().has(Clause::M2i));

    // a species tree missing a triplet is refused
    let wrong = species_tree(&g, "((A,C),B);");
    assert!(matches!(check_pair(&g, &wrong).unwrap(), PairVerdict::MissingTriplets(_)));
    assert!(build_reconciliation(&g, &wrong).is_err());
}

#[test]
fn all_speciation_image_is_consistent() {
    let g = parse_gene_tree("(((a@A,b@B)[&ev=s],c@C)[&ev=s],(d@D,e@E)[&ev=s])[&ev=s];", None).unwrap();
    let s = species_tree(&g, "(((A,B),C),(D,E));");
    assert_eq!(check_pair(&g, &s).unwrap(), PairVerdict::Consistent);
    // species-species A1 edges point strictly downwards
    let aux = build_aux_graph(&g, &s, &lca_map(&g, &s).unwrap());
    for e in aux.edges().iter().filter(|e| e.class == EdgeClass::A1) {
        if let (AuxVertex::Species(x), AuxVertex::Species(y)) = (e.from, e.to) {
            assert!(x != y && s.is_ancestor_or_self(x, y));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn member_set_ignores_tie_breaking(n in 1usize..30, density in 0.0f64..0.3, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut d = Digraph::new(n);
        for a in 0..n {
            for b in 0..n {
                if rng.gen_bool(density) {
                    d.add_edge(a, b);
                }
            }
        }
        let base = maximal_topological_sort(&d);
        prop_assert_eq!(base.is_complete(), !has_cycle_dfs(&d));
        for _ in 0..5 {
            let prio: Vec<u64> = (0..n).map(|_| rng.gen()).collect();
            let q = maximal_topological_sort_by_priority(&d, &prio);
            prop_assert_eq!(q.members(), base.members());
        }
        // maximal: nothing outside has all in-neighbours inside
        if let Some(c) = find_cycle(&d, &base) {
            for w in 0..c.len() {
                prop_assert!(d.successors(c[w]).contains(&c[(w + 1) % c.len()]));
                prop_assert!(!base.contains(c[w]));
            }
        }
    }

    #[test]
    fn pair_check_matches_independent_oracle(seed in 0u64..1_000_000, arity in 2usize..=3) {
        let g = mixed_instance(seed, 7);
        let s = random_species_tree(&g, arity, seed ^ 0x5eed);
        let mu = lca_map(&g, &s).unwrap();
        let t = g.tree();
        // μ̂ is the lca of the species below, in S
        let f = gtc_core::gene::TransferForest::new(&g);
        let leaves = species_leaves(&g, &s).unwrap();
        for v in t.vertices() {
            let xs: Vec<VertexId> = f.species_below(v).iter().map(|sp| leaves[sp.index()]).collect();
            let naive = xs.iter().skip(1).fold(xs[0], |acc, &x| naive_lca(&s, acc, x));
            prop_assert_eq!(mu.get(v), naive);
        }
        let aux = build_aux_graph(&g, &s, &mu);
        let transfers = g.transfer_edges().len();
        prop_assert!(aux.edges().len() <= (t.len() - 1) + (s.len() - 1) + t.len() + transfers);
        for x in s.leaves() {
            prop_assert!(!aux.has_self_loop(AuxVertex::Species(x)));
        }
        let consistent = displays(&s, g.triplets()).unwrap() && !has_cycle_dfs(&aux.digraph());
        let verdict = check_pair(&g, &s).unwrap();
        prop_assert_eq!(verdict.is_consistent(), consistent);
        if let PairVerdict::Cyclic(c) = &verdict {
            let set: HashSet<(AuxVertex, AuxVertex)> = aux.edges().iter().map(|e| (e.from, e.to)).collect();
            for w in 0..c.len() {
                prop_assert!(set.contains(&(c[w], c[(w + 1) % c.len()])));
            }
        }
        if consistent {
            let rec = build_reconciliation(&g, &s).unwrap();
            let report = verify_reconciliation(&g, &s, &rec).unwrap();
            prop_assert!(report.ok(), "{:?}", report);
        }
    }

    #[test]
    fn refinement_keeps_outer_in_neighbourhoods(seed in 0u64..1_000_000) {
        let g = mixed_instance(seed, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = gtc_core::solver::star_species_tree(&g);
        while !s.is_binary() {
            let cherries: Vec<VertexId> = s.cherries().into_iter().filter(|&x| s.children(x).len() > 2).collect();
            let x = cherries[rng.gen_range(0..cherries.len())];
            let kids = s.children(x).to_vec();
            let cut = rng.gen_range(1..kids.len());
            let next = s.split_refinement(x, &kids[..cut], &kids[cut..]).unwrap().tree;
            let before = build_aux_graph(&g, &s, &lca_map(&g, &s).unwrap());
            let after = build_aux_graph(&g, &next, &lca_map(&g, &next).unwrap());
            for y in s.vertices().filter(|&y| !s.is_ancestor_or_self(x, y)) {
                prop_assert_eq!(before.in_neighbors(AuxVertex::Species(y)), after.in_neighbors(AuxVertex::Species(y)));
            }
            let (m0, m1) = (members(&before), members(&after));
            prop_assert!(m0.is_subset(&m1), "lost {:?}", m0.difference(&m1).collect::<Vec<_>>());
            s = next;
        }
    }
}
