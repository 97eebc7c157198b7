use std::time::Instant;
use hrg_cli::*;
use hrg_core::analysis::FecMode;
use hrg_core::runtime::{psr_parse, EdgeIndex, ParseOptions};
use hrg_core::sampling::random_tree;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let text = std::fs::read_to_string("grammars/trees.hrg").unwrap();
    let g = parse_grammar_text(&text).unwrap();
    let s = analyze_grammar(&g, FecMode::Assume);
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let edges: usize = std::env::args().nth(1).unwrap().parse().unwrap();
    let t = random_tree(&mut rng, edges);
    let t0 = Instant::now();
    let mut lits = t.lits.clone();
    lits.sort();
    let sort_t = t0.elapsed();
    let t1 = Instant::now();
    let idx = EdgeIndex::build(lits);
    let build_t = t1.elapsed();
    std::hint::black_box(&idx);
    let start = Instant::now();
    let r = psr_parse(&g, &s.dcfa, &s.tables, &t, ParseOptions::default());
    assert!(r.is_accept());
    eprintln!("edges={edges} moves={} sort={sort_t:?} build={build_t:?} total={:?}", r.moves(), start.elapsed());
}
