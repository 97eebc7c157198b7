//! The acceptance gate: ten end-to-end criteria, one test each, every
//! test printing a single PASS line (visible with --nocapture) after its
//! assertions hold.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hrg_cli::{analyze_grammar, enumerate_terminal_graphs, render_tables, AnalysisSummary};
use hrg_core::analysis::{check_fec, FecMode, FecOptions, FecVerdict};
use hrg_core::grammar::{
    apply_rule_fresh, derive_step, enumerate_language, start_graph, HRGrammar,
};
use hrg_core::graph::Graph;
use hrg_core::dcfa::dcfa_approves;
use hrg_core::ncfa::{build_ncfa, ncfa_approves};
use hrg_core::oracle::{naive_parse_cached, viable_prefix_check, NaiveResult};
use hrg_core::runtime::{
    psr_parse, reduce_enabling_asr, reduce_enabling_naive, select_on_node, AsrExplorer,
    ParseOptions, PsrResult,
};
use hrg_core::sampling::{random_derivation, random_tree, shuffle_literals};

fn load(name: &str) -> HRGrammar {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../grammars")
        .join(name);
    hrg_cli::parse_grammar_text(&fs::read_to_string(path).unwrap()).unwrap()
}

fn accepts(g: &HRGrammar, s: &AnalysisSummary, input: &Graph) -> bool {
    psr_parse(g, &s.dcfa, &s.tables, input, ParseOptions::default()).is_accept()
}

#[test]
fn criterion_01_trees_table_reproduction() {
    let start = Instant::now();
    let g = load("trees.hrg");
    let s = analyze_grammar(&g, FecMode::Dynamic);
    let elapsed = start.elapsed();
    assert_eq!((s.states, s.items, s.transitions), (4, 10, 4));
    assert_eq!(s.conflicts, 0);
    assert_eq!(s.fec, FecVerdict::Holds);
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    println!(
        "PASS criterion 1: trees states=4 items=10 transitions=4 conflicts=0 fec=yes in {elapsed:?}"
    );
}

#[test]
fn criterion_02_persuade_table_reproduction() {
    let start = Instant::now();
    let g = load("persuade.hrg");
    let s = analyze_grammar(&g, FecMode::Dynamic);
    let elapsed = start.elapsed();
    assert_eq!((s.states, s.items, s.transitions), (9, 36, 20));
    assert_eq!(s.conflicts, 0);
    assert_eq!(s.fec, FecVerdict::Holds);
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    println!(
        "PASS criterion 2: persuade states=9 items=36 transitions=20 conflicts=0 fec=yes in {elapsed:?}"
    );
}

#[test]
fn criterion_03_follow_set_anchors() {
    let g = load("trees.hrg");
    let s = analyze_grammar(&g, FecMode::Assume);
    let dump = render_tables(&g, &s.dcfa, &s.tables);
    let expected = [
        "follow={e(b,_)}",
        "follow*={e(*,_),e(_,_),e(b,_)}",
        "follow={$,e(*,_),e(a,_)}",
        "follow*={$,e(*,_),e(_,_),e(a,_)}",
    ];
    // All four sets must appear inside one and the same state block.
    let block = dump
        .split("\nstate ")
        .find(|b| expected.iter().all(|e| b.contains(e)))
        .unwrap_or_else(|| panic!("no state block holds all anchors:\n{dump}"));
    assert!(block.contains("shift e(b,_)"));
    println!("PASS criterion 3: all four Follow/Follow* anchor sets byte-exact in the dump");
}

/// The exhaustive corpus: every graph over {root/1, e/2} with at most one
/// root literal, at most four e literals, and at most six nodes. Node
/// names are drawn from 1..=6, which keeps the corpus finite while still
/// covering every graph up to renaming (usually many times over).
fn tree_corpus(g: &HRGrammar) -> Vec<Graph> {
    enumerate_terminal_graphs(g, 5, 6)
        .into_iter()
        .filter(|gr| {
            let roots = gr.lits.iter().filter(|l| l.label.as_str() == "root").count();
            let edges = gr.lits.iter().filter(|l| l.label.as_str() == "e").count();
            roots <= 1 && edges <= 4
        })
        .collect()
}

#[test]
fn criterion_04_exhaustive_oracle_equivalence() {
    let start = Instant::now();
    let g = load("trees.hrg");
    let s = analyze_grammar(&g, FecMode::Assume);
    let members = enumerate_language(&g, 5, 6, 5_000_000).unwrap();
    let corpus = tree_corpus(&g);
    // The naive verdict is invariant under injective node renaming: every
    // move rule, prune criterion, and the acceptance condition commute
    // with renaming, and memoization order affects time only. One naive
    // run therefore decides a whole renaming class. Every 250th repeat is
    // re-parsed directly to keep the shortcut honest.
    let mut viable_cache: HashMap<String, bool> = HashMap::new();
    let mut class_verdicts: HashMap<IsoKey, bool> = HashMap::new();
    let mut accepted = 0usize;
    let mut spot_checks = 0usize;
    for (i, input) in corpus.iter().enumerate() {
        let psr = accepts(&g, &s, input);
        let run_naive = |cache: &mut HashMap<String, bool>| {
            let r = naive_parse_cached(&g, input, 2_000_000, cache);
            assert!(
                !matches!(r, NaiveResult::BudgetExceeded),
                "naive budget exceeded on {input}"
            );
            matches!(r, NaiveResult::Accept(_))
        };
        let naive = match class_verdicts.get(&iso_class_key(input)) {
            Some(&v) => {
                if i % 250 == 0 {
                    assert_eq!(
                        run_naive(&mut viable_cache),
                        v,
                        "renaming invariance broken on {input}"
                    );
                    spot_checks += 1;
                }
                v
            }
            None => {
                let v = run_naive(&mut viable_cache);
                class_verdicts.insert(iso_class_key(input), v);
                v
            }
        };
        let mut ex = AsrExplorer::new(&g, &s.dcfa, input, 400_000);
        let initial = ex.initial();
        let asr = ex.can_accept(&initial);
        assert!(!ex.exceeded, "search budget exceeded on {input}");
        let member = members.iter().any(|m| m.graph.iso_matches(input));
        assert!(
            psr == naive && naive == asr && asr == member,
            "disagreement on {input}: psr={psr} naive={naive} asr={asr} member={member}"
        );
        accepted += usize::from(psr);
    }
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(300), "took {elapsed:?}");
    println!(
        "PASS criterion 4: {} graphs in {} renaming classes, {accepted} accepted, \
         {spot_checks} invariance spot checks, four-way agreement in {elapsed:?}",
        corpus.len(),
        class_verdicts.len()
    );
}

type IsoKey = (Vec<String>, Vec<Vec<u8>>);

/// A canonical form of a graph under injective node renaming: the sorted
/// distinct labels plus the least sorted literal encoding over all node
/// permutations (Heap's algorithm). Two graphs get equal keys exactly when
/// some renaming maps one onto the other.
fn iso_class_key(gr: &Graph) -> IsoKey {
    let labels: Vec<String> = {
        let set: BTreeSet<&str> = gr.lits.iter().map(|l| l.label.as_str()).collect();
        set.into_iter().map(str::to_string).collect()
    };
    let label_id: BTreeMap<&str, u8> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i as u8))
        .collect();
    let node_id: BTreeMap<&str, u8> = gr
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i as u8))
        .collect();
    let lits: Vec<(u8, Vec<u8>)> = gr
        .lits
        .iter()
        .map(|l| {
            (
                label_id[l.label.as_str()],
                l.nodes.iter().map(|n| node_id[n.as_str()]).collect(),
            )
        })
        .collect();
    let n = node_id.len();
    let mut perm: Vec<u8> = (0..n as u8).collect();
    let mut counters = vec![0usize; n];
    let mut best: Option<Vec<Vec<u8>>> = None;
    let consider = |perm: &[u8], best: &mut Option<Vec<Vec<u8>>>| {
        let mut rendered: Vec<Vec<u8>> = lits
            .iter()
            .map(|(lab, ns)| {
                let mut v = Vec::with_capacity(ns.len() + 1);
                v.push(*lab);
                v.extend(ns.iter().map(|i| perm[*i as usize]));
                v
            })
            .collect();
        rendered.sort();
        if best.as_ref().map_or(true, |b| rendered < *b) {
            *best = Some(rendered);
        }
    };
    consider(&perm, &mut best);
    let mut i = 0;
    while i < n {
        if counters[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(counters[i], i);
            }
            consider(&perm, &mut best);
            counters[i] += 1;
            i = 0;
        } else {
            counters[i] = 0;
            i += 1;
        }
    }
    (labels, best.unwrap_or_default())
}

/// All sentential forms reachable in at most `depth` rightmost steps,
/// with canonical fresh node naming.
fn forms_up_to(g: &HRGrammar, depth: usize) -> Vec<Graph> {
    let mut level = vec![start_graph(g)];
    let mut out = level.clone();
    for _ in 0..depth {
        let mut next = Vec::new();
        for form in &level {
            for ri in 0..g.rules.len() {
                if ri == g.wrapper_rule {
                    continue;
                }
                if let Some((_, derived)) = apply_rule_fresh(g, form, ri) {
                    next.push(derived);
                }
            }
        }
        out.extend(next.iter().cloned());
        level = next;
    }
    out
}

#[test]
fn criterion_05_viable_prefix_characterizations() {
    let mut checked = 0usize;
    for g in [load("trees.hrg"), load("persuade.hrg")] {
        let ncfa = build_ncfa(&g);
        let s = analyze_grammar(&g, FecMode::Assume);
        let mut seen: BTreeSet<String> = BTreeSet::new();
        for form in forms_up_to(&g, 6) {
            for k in 0..=form.lits.len() {
                let prefix = Graph::from_lits(form.lits[..k].to_vec());
                if !seen.insert(format!("{prefix}")) {
                    continue;
                }
                let n = ncfa_approves(&g, &ncfa, &prefix);
                let d = dcfa_approves(&s.dcfa, &prefix);
                let v = viable_prefix_check(&g, &prefix, 12);
                assert!(
                    n == d && d == v,
                    "disagreement on prefix {prefix}: ncfa={n} dcfa={d} definitional={v}"
                );
                checked += 1;
            }
        }
    }
    println!("PASS criterion 5: {checked} distinct prefixes, three-way agreement");
}

#[test]
fn criterion_06_derivation_validity() {
    let trees = load("trees.hrg");
    let persuade = load("persuade.hrg");
    let st = analyze_grammar(&trees, FecMode::Assume);
    let sp = analyze_grammar(&persuade, FecMode::Assume);
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut accepted = 0usize;
    for i in 0..500 {
        let (g, s, input) = if i % 2 == 0 {
            let edges = rng.gen_range(0..30);
            let t = random_tree(&mut rng, edges);
            (&trees, &st, shuffle_literals(&mut rng, &t))
        } else {
            let (_, m) = random_derivation(&persuade, &mut rng, 6);
            (&persuade, &sp, shuffle_literals(&mut rng, &m))
        };
        let result = psr_parse(g, &s.dcfa, &s.tables, &input, ParseOptions::default());
        if let PsrResult::Accept { derivation, .. } = result {
            accepted += 1;
            let mut host = start_graph(g);
            for step in &derivation {
                host = derive_step(g, &host, step).unwrap_or_else(|e| {
                    panic!("replay failed on {input}: {e}");
                });
            }
            assert!(
                host.equivalent(&input),
                "replayed graph differs from input {input}"
            );
        }
    }
    assert!(accepted >= 300, "only {accepted} of 500 accepted");
    println!("PASS criterion 6: 500 graphs, {accepted} accepts, every derivation replays");
}

#[test]
fn criterion_07_permutation_invariance() {
    let trees = load("trees.hrg");
    let persuade = load("persuade.hrg");
    let st = analyze_grammar(&trees, FecMode::Assume);
    let sp = analyze_grammar(&persuade, FecMode::Assume);
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut graphs: Vec<(&HRGrammar, &AnalysisSummary, Graph)> = Vec::new();
    for _ in 0..25 {
        let edges = rng.gen_range(1..20);
        graphs.push((&trees, &st, random_tree(&mut rng, edges)));
    }
    let mut tries = 0;
    while graphs.len() < 50 {
        let (_, m) = random_derivation(&persuade, &mut rng, 5);
        tries += 1;
        assert!(tries < 2000, "could not sample 25 accepted inputs");
        if accepts(&persuade, &sp, &m) {
            graphs.push((&persuade, &sp, m));
        }
    }
    for (g, s, input) in &graphs {
        assert!(accepts(g, s, input));
        for _ in 0..10 {
            let perm = shuffle_literals(&mut rng, input);
            assert!(accepts(g, s, &perm), "verdict changed under permutation of {input}");
        }
    }
    println!("PASS criterion 7: 50 accepted graphs x 10 permutations, verdicts identical");
}

#[test]
fn criterion_08_linear_move_and_time_bounds() {
    let g = load("trees.hrg");
    let s = analyze_grammar(&g, FecMode::Assume);
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let moves_of = |input: &Graph| {
        let r = psr_parse(&g, &s.dcfa, &s.tables, input, ParseOptions::default());
        assert!(r.is_accept());
        r.moves()
    };
    // Fit the smallest integer c with moves <= c * |g| + c on 10^3-edge trees.
    let mut c = 0usize;
    for _ in 0..5 {
        let t = random_tree(&mut rng, 1_000);
        let m = moves_of(&t);
        while m > c * t.lits.len() + c {
            c += 1;
        }
    }
    assert!(c > 0);
    let timed = |edges: usize, rng: &mut ChaCha8Rng| {
        let t = random_tree(rng, edges);
        let start = Instant::now();
        let m = moves_of(&t);
        (m, t.lits.len(), start.elapsed())
    };
    // Warm-up parse so allocator state does not skew the 10^4 sample.
    let _ = timed(10_000, &mut rng);
    let mut t4 = Duration::MAX;
    for _ in 0..3 {
        let (m, len, d) = timed(10_000, &mut rng);
        assert!(m <= c * len + c, "bound c={c} violated at 10^4: {m} moves");
        t4 = t4.min(d);
    }
    let mut t5 = Duration::MAX;
    for _ in 0..2 {
        let (m, len, d) = timed(100_000, &mut rng);
        assert!(m <= c * len + c, "bound c={c} violated at 10^5: {m} moves");
        t5 = t5.min(d);
    }
    assert!(
        t5 <= t4 * 15,
        "10^5 parse took {t5:?}, more than 15x the 10^4 parse {t4:?}"
    );
    println!("PASS criterion 8: c={c}, bound holds at 10^4 and 10^5; {t4:?} -> {t5:?} (<= 15x)");
}

#[test]
fn criterion_09_series_parallel_not_psr_parsable() {
    let g = load("series-parallel.hrg");
    let s = analyze_grammar(&g, FecMode::Assume);
    assert!(
        !s.tables.conflicts.is_empty(),
        "expected at least one conflicting trigger set"
    );
    let fec = check_fec(&g, &s.dcfa, &s.tables, FecMode::Dynamic, FecOptions::default());
    let FecVerdict::Refuted(witness) = fec else {
        panic!("expected dynamic free-edge-choice refutation, got {fec:?}");
    };
    println!(
        "PASS criterion 9: series-parallel has {} conflicting sets (recorded), fec refuted: {witness}",
        s.tables.conflicts.len()
    );
}

#[test]
fn criterion_10_reduce_enabling_equivalence() {
    let g = load("trees.hrg");
    let s = analyze_grammar(&g, FecMode::Assume);
    let corpus = tree_corpus(&g);
    let mut configs = 0usize;
    for input in &corpus {
        // Walk the predictive trace inside the search representation and
        // compare, at every configuration, the automaton-side enabled
        // reductions against the definitional ones on the stack graph.
        let ex = AsrExplorer::new(&g, &s.dcfa, input, 1_000_000);
        let mut node = ex.initial();
        loop {
            assert_eq!(
                reduce_enabling_asr(&s.dcfa, &ex, &node),
                reduce_enabling_naive(&g, &s.dcfa, &node),
                "enabled reductions differ on {input} at state {}",
                node.top().state
            );
            configs += 1;
            if ex.is_accepting(&node) {
                break;
            }
            let Some((ti, lit_idx)) = select_on_node(&s.tables, &ex, &node) else {
                break;
            };
            let next = match &s.tables.triggers[node.top().state][ti] {
                hrg_core::analysis::Trigger::Shift { .. } => {
                    match lit_idx.and_then(|i| ex.shift_move(&node, i)) {
                        Some((_, n)) => n,
                        None => break,
                    }
                }
                hrg_core::analysis::Trigger::Reduce { item } => {
                    match ex.reduce_move(&node, item) {
                        Some(n) => n,
                        None => break,
                    }
                }
            };
            node = next;
        }
    }
    println!(
        "PASS criterion 10: {} graphs, {configs} trace configurations, enabled-reduce sets equal",
        corpus.len()
    );
}
