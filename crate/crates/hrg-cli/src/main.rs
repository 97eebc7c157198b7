//! The `hrg` command: grammar analysis, table dumps, parsing, DOT export,
//! and the parser-vs-oracle cross-check.
//!
//! Exit codes: 0 accept/clean, 1 reject or grammar not predictively
//! parsable, 2 usage or input errors, 3 internal invariant violation.

use std::fs;
use std::panic;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hrg_cli::{
    analyze_grammar, dot_dcfa, dot_ncfa, oracle_crosscheck, parse_grammar_text, parse_graph_text,
    render_derivation, render_tables,
};
use hrg_core::analysis::{FecMode, FecVerdict};
use hrg_core::grammar::HRGrammar;
use hrg_core::runtime::{psr_parse, ParseOptions, PsrResult};

#[derive(Parser)]
#[command(name = "hrg", about = "Graph grammar analysis and predictive shift-reduce parsing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a grammar: automaton sizes, conflicts, free-edge-choice.
    Analyze {
        grammar: String,
    },
    /// Dump the full analysis tables deterministically.
    Tables {
        grammar: String,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        output: Option<String>,
    },
    /// Parse a graph file with the predictive parser.
    Parse {
        grammar: String,
        graph: String,
        /// Print one line per parser move to stderr.
        #[arg(long)]
        trace: bool,
        #[command(flatten)]
        fec: FecFlag,
    },
    /// Emit one of the automata as DOT text.
    Dot {
        grammar: String,
        /// The nondeterministic automaton over dotted rules.
        #[arg(long, conflicts_with = "dcfa")]
        ncfa: bool,
        /// The deterministic automaton (default).
        #[arg(long)]
        dcfa: bool,
    },
    /// Exhaustively cross-check the predictive parser against the naive
    /// reference parser on all small inputs.
    Oracle {
        grammar: String,
        /// Maximum number of literals per input graph.
        #[arg(long, default_value_t = 3)]
        max_lits: usize,
        /// Maximum number of nodes; defaults to max-lits times the widest
        /// terminal arity.
        #[arg(long)]
        max_nodes: Option<usize>,
        /// Search budget for the naive parser per input.
        #[arg(long, default_value_t = 1_000_000)]
        budget: usize,
    },
}

#[derive(Args)]
struct FecFlag {
    /// How to treat the free-edge-choice precondition: `assume` records
    /// the assumption, `check-dynamic` verifies it on small inputs first.
    #[arg(long, default_value = "assume", value_parser = ["assume", "check-dynamic"])]
    fec: String,
}

fn fail(code: u8, diagnostic: String) -> ExitCode {
    eprintln!("{diagnostic}");
    ExitCode::from(code)
}

fn read_file(path: &str) -> Result<String, ExitCode> {
    fs::read_to_string(path).map_err(|e| fail(2, format!("error=io file={path} msg={e}")))
}

fn load_grammar(path: &str) -> Result<HRGrammar, ExitCode> {
    let text = read_file(path)?;
    parse_grammar_text(&text).map_err(|e| fail(2, format!("error=grammar file={path} {e}")))
}

fn run(cli: Cli) -> ExitCode {
    match cli.command {
        Command::Analyze { grammar } => {
            let g = match load_grammar(&grammar) {
                Ok(g) => g,
                Err(c) => return c,
            };
            let s = analyze_grammar(&g, FecMode::Dynamic);
            println!("{}", s.summary_line());
            for c in &s.tables.conflicts {
                let ids: Vec<String> = c.triggers.iter().map(|t| t.to_string()).collect();
                println!("conflict state={} triggers={}", c.state, ids.join(","));
            }
            if let FecVerdict::Refuted(w) = &s.fec {
                println!("fec-witness {w}");
            }
            if s.psr_parsable() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Command::Tables { grammar, output } => {
            let g = match load_grammar(&grammar) {
                Ok(g) => g,
                Err(c) => return c,
            };
            let s = analyze_grammar(&g, FecMode::Assume);
            let dump = render_tables(&g, &s.dcfa, &s.tables);
            match output {
                Some(path) => {
                    if let Err(e) = fs::write(&path, dump) {
                        return fail(2, format!("error=io file={path} msg={e}"));
                    }
                }
                None => print!("{dump}"),
            }
            ExitCode::SUCCESS
        }
        Command::Parse {
            grammar,
            graph,
            trace,
            fec,
        } => {
            let g = match load_grammar(&grammar) {
                Ok(g) => g,
                Err(c) => return c,
            };
            let text = match read_file(&graph) {
                Ok(t) => t,
                Err(c) => return c,
            };
            let input = match parse_graph_text(&text, &g) {
                Ok(i) => i,
                Err(e) => return fail(2, format!("error=graph file={graph} {e}")),
            };
            if !g.is_terminal_graph(&input) {
                return fail(2, format!("error=graph file={graph} msg=input contains nonterminal literals"));
            }
            let mode = if fec.fec == "check-dynamic" {
                FecMode::Dynamic
            } else {
                FecMode::Assume
            };
            let s = analyze_grammar(&g, mode);
            if !s.psr_parsable() {
                return fail(1, format!("error=not-psr-parsable {}", s.summary_line()));
            }
            let opts = ParseOptions {
                trace,
                ..ParseOptions::default()
            };
            let result = psr_parse(&g, &s.dcfa, &s.tables, &input, opts);
            if trace {
                let (PsrResult::Accept { trace: t, .. } | PsrResult::Reject { trace: t, .. }) =
                    &result;
                for line in t {
                    eprintln!("trace {line}");
                }
            }
            match render_derivation(&g, &result) {
                Ok(lines) => {
                    for l in lines {
                        println!("{l}");
                    }
                    ExitCode::SUCCESS
                }
                Err(reason) => fail(1, format!("result=reject reason={reason}")),
            }
        }
        Command::Dot { grammar, ncfa, dcfa: _ } => {
            let g = match load_grammar(&grammar) {
                Ok(g) => g,
                Err(c) => return c,
            };
            if ncfa {
                print!("{}", dot_ncfa(&g, &hrg_core::ncfa::build_ncfa(&g)));
            } else {
                let s = analyze_grammar(&g, FecMode::Assume);
                print!("{}", dot_dcfa(&g, &s.dcfa));
            }
            ExitCode::SUCCESS
        }
        Command::Oracle {
            grammar,
            max_lits,
            max_nodes,
            budget,
        } => {
            let g = match load_grammar(&grammar) {
                Ok(g) => g,
                Err(c) => return c,
            };
            let s = analyze_grammar(&g, FecMode::Assume);
            if !s.psr_parsable() {
                return fail(1, format!("error=not-psr-parsable {}", s.summary_line()));
            }
            let widest = g.terminals.values().copied().max().unwrap_or(0);
            let max_nodes = max_nodes.unwrap_or(max_lits * widest);
            match oracle_crosscheck(&g, &s.dcfa, &s.tables, max_lits, max_nodes, budget) {
                Ok(n) => {
                    println!("checked={n} disagreements=0");
                    ExitCode::SUCCESS
                }
                Err(m) => fail(
                    1,
                    format!(
                        "error=oracle-mismatch psr={} naive={} input={}",
                        if m.psr_accepts { "accept" } else { "reject" },
                        m.naive,
                        m.input
                    ),
                ),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match panic::catch_unwind(panic::AssertUnwindSafe(|| run(cli))) {
        Ok(code) => code,
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .map(|s| s.as_str())
                .or_else(|| e.downcast_ref::<&str>().copied())
                .unwrap_or("panic");
            fail(3, format!("error=internal msg={msg}"))
        }
    }
}
