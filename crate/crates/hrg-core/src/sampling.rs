//! Seeded random generators for test corpora: random rightmost
//! derivations, large random trees built directly, random injective
//! renamings, and literal permutations. All generators take an explicit
//! RNG so corpora are reproducible from a seed.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::grammar::{apply_rule_fresh, start_graph, DerivationStep, HRGrammar};
use crate::graph::{Graph, Literal, Name, Renaming};

/// Draws a random rightmost derivation of the grammar, steering toward
/// termination once the sentential form holds at least `target_lits`
/// terminal literals: from then on only rules with the fewest
/// right-hand-side nonterminals are drawn. Returns the derivation from the
/// start literal together with the derived terminal graph.
pub fn random_derivation(
    g: &HRGrammar,
    rng: &mut impl Rng,
    target_lits: usize,
) -> (Vec<DerivationStep>, Graph) {
    let mut host = start_graph(g);
    let mut steps = Vec::new();
    while g.rightmost_nt(&host).is_some() {
        let terminal_count = host
            .lits
            .iter()
            .filter(|l| g.is_terminal(&l.label))
            .count();
        let mut candidates: Vec<(usize, usize)> = Vec::new();
        for ri in 0..g.rules.len() {
            if apply_rule_fresh(g, &host, ri).is_some() {
                let nts = g.rules[ri]
                    .rhs
                    .lits
                    .iter()
                    .filter(|l| g.is_nonterminal(&l.label))
                    .count();
                candidates.push((nts, ri));
            }
        }
        assert!(!candidates.is_empty(), "reduced grammar always applies");
        let pool: Vec<usize> = if terminal_count >= target_lits {
            let min_nts = candidates.iter().map(|(n, _)| *n).min().unwrap();
            candidates
                .iter()
                .filter(|(n, _)| *n == min_nts)
                .map(|(_, ri)| *ri)
                .collect()
        } else {
            candidates.iter().map(|(_, ri)| *ri).collect()
        };
        let ri = *pool.choose(rng).unwrap();
        let (step, next) = apply_rule_fresh(g, &host, ri).unwrap();
        steps.push(step);
        host = next;
    }
    (steps, host)
}

/// Builds a random rooted tree with `edges` edges directly: node 1 is the
/// root, and node i+1 hangs off a uniformly chosen earlier node. Much
/// faster than the derivation engine for large sizes.
pub fn random_tree(rng: &mut impl Rng, edges: usize) -> Graph {
    let mut lits = Vec::with_capacity(edges + 1);
    lits.push(Literal::new(Name::new("root"), vec![Name::new("1")]).unwrap());
    for i in 0..edges {
        let parent = rng.gen_range(1..=i + 1);
        let child = i + 2;
        lits.push(
            Literal::new(
                Name::new("e"),
                vec![Name::new(&parent.to_string()), Name::new(&child.to_string())],
            )
            .unwrap(),
        );
    }
    Graph::from_lits(lits)
}

/// Draws a random injective renaming of the graph's nodes onto fresh names
/// `r1, r2, ...` in shuffled order.
pub fn random_renaming(rng: &mut impl Rng, g: &Graph) -> Renaming {
    let nodes: Vec<Name> = g.nodes.iter().cloned().collect();
    let mut images: Vec<Name> = (1..=nodes.len())
        .map(|i| Name::new(&format!("r{i}")))
        .collect();
    images.shuffle(rng);
    Renaming::from_pairs(nodes.into_iter().zip(images)).unwrap()
}

/// Returns the graph with its literal sequence shuffled; the node set is
/// unchanged.
pub fn shuffle_literals(rng: &mut impl Rng, g: &Graph) -> Graph {
    let mut lits = g.lits.clone();
    lits.shuffle(rng);
    Graph {
        nodes: g.nodes.clone(),
        lits,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::fixtures::{persuade, trees};
    use crate::grammar::{derive_step, is_member};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn derivations_replay_and_are_members() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for g in [trees(), persuade()] {
            for _ in 0..20 {
                let (steps, result) = random_derivation(&g, &mut rng, 6);
                let mut host = start_graph(&g);
                for s in &steps {
                    host = derive_step(&g, &host, s).unwrap();
                }
                assert!(host.equivalent(&result));
                assert!(is_member(&g, &result, 2_000_000).unwrap());
            }
        }
    }

    #[test]
    fn trees_built_directly_are_members() {
        let g = trees();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let t = random_tree(&mut rng, 4);
            assert!(is_member(&g, &t, 2_000_000).unwrap());
        }
        let big = random_tree(&mut rng, 1000);
        assert_eq!(big.lits.len(), 1001);
        assert_eq!(big.nodes.len(), 1001);
    }

    #[test]
    fn renaming_and_shuffle_preserve_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = random_tree(&mut rng, 6);
        let r = random_renaming(&mut rng, &t);
        let renamed = t.rename(&r).unwrap();
        assert_eq!(renamed.lits.len(), t.lits.len());
        assert_eq!(renamed.nodes.len(), t.nodes.len());
        let shuffled = shuffle_literals(&mut rng, &t);
        assert!(shuffled.equivalent(&t));
    }
}
