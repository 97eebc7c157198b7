//! Property tests for the graph layer and the parsers' closure
//! properties: permutation equivalence is an equivalence relation,
//! acceptance is closed under node renaming and literal permutation.

mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hrg_core::analysis::analyze;
use hrg_core::dcfa::build_dcfa;
use hrg_core::graph::{Graph, Literal, Name};
use hrg_core::runtime::{psr_parse, ParseOptions};
use hrg_core::sampling::{random_renaming, random_tree, shuffle_literals};

/// A random small graph over labels a/1, b/2, c/3 with nodes from a pool
/// of eight, node slots pairwise distinct within a literal.
fn arb_graph() -> impl Strategy<Value = Graph> {
    let arb_lit = (0usize..3, proptest::sample::subsequence((0..8usize).collect::<Vec<_>>(), 3))
        .prop_filter_map("arity needs enough distinct nodes", |(kind, pool)| {
            let (label, arity) = [("a", 1), ("b", 2), ("c", 3)][kind];
            if pool.len() < arity {
                return None;
            }
            let nodes: Vec<Name> = pool[..arity]
                .iter()
                .map(|i| Name::new(&i.to_string()))
                .collect();
            Some(Literal::new(Name::new(label), nodes).unwrap())
        });
    proptest::collection::vec(arb_lit, 0..6).prop_map(|lits| Graph::from_lits(lits))
}

proptest! {
    #[test]
    fn equivalence_is_reflexive(g in arb_graph()) {
        prop_assert!(g.equivalent(&g));
    }

    #[test]
    fn equivalence_is_symmetric_and_transitive(g in arb_graph(), s1 in any::<u64>(), s2 in any::<u64>()) {
        let mut r1 = ChaCha8Rng::seed_from_u64(s1);
        let mut r2 = ChaCha8Rng::seed_from_u64(s2);
        let h = shuffle_literals(&mut r1, &g);
        let k = shuffle_literals(&mut r2, &h);
        prop_assert!(g.equivalent(&h));
        prop_assert!(h.equivalent(&g));
        prop_assert!(h.equivalent(&k));
        prop_assert!(g.equivalent(&k));
    }

    #[test]
    fn shuffling_preserves_inequivalence(g in arb_graph(), s in any::<u64>()) {
        // Dropping a literal leaves the classes disjoint no matter the order.
        prop_assume!(!g.lits.is_empty());
        let mut shorter = g.lits.clone();
        shorter.pop();
        let h = Graph { nodes: g.nodes.clone(), lits: shorter };
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let hs = shuffle_literals(&mut rng, &h);
        prop_assert!(!g.equivalent(&hs));
    }

    #[test]
    fn tree_acceptance_closed_under_renaming_and_permutation(
        edges in 0usize..12,
        seed in any::<u64>(),
    ) {
        let g = common::trees();
        let dcfa = build_dcfa(&g);
        let tables = analyze(&g, &dcfa);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_tree(&mut rng, edges);
        let accept = |input: &Graph| {
            psr_parse(&g, &dcfa, &tables, input, ParseOptions::default()).is_accept()
        };
        prop_assert!(accept(&t));
        let renamed = t.rename(&random_renaming(&mut rng, &t)).unwrap();
        prop_assert!(accept(&renamed));
        let shuffled = shuffle_literals(&mut rng, &renamed);
        prop_assert!(accept(&shuffled));
    }
}
