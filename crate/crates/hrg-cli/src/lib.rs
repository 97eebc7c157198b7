//! Text formats and command logic for the `hrg` binary: grammar and graph
//! file parsing with positioned diagnostics, the deterministic analysis
//! table dump, DOT export of both automata, and the exhaustive
//! parser-vs-oracle cross-check.

use std::collections::BTreeSet;
use std::fmt;

use hrg_core::analysis::{
    analyze, check_fec, transition_pseudo, AnalysisTables, FecMode, FecOptions, FecVerdict,
    FollowEntry, FollowSet, Trigger,
};
use hrg_core::dcfa::{build_dcfa, Dcfa};
use hrg_core::grammar::{validate_and_augment, HRGrammar, Rule};
use hrg_core::graph::{Graph, Literal, Name, PseudoLiteral, Slot};
use hrg_core::ncfa::Ncfa;
use hrg_core::oracle::{naive_parse, NaiveResult};
use hrg_core::runtime::{psr_parse, ParseOptions, PsrResult};

/// A diagnostic tied to a position in an input file. Line and column are
/// 1-based; 0 marks whole-file problems (e.g. grammar validation).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl fmt::Display for TextError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line={} col={} msg={}", self.line, self.col, self.msg)
    }
}

impl std::error::Error for TextError {}

fn err(line: usize, col: usize, msg: impl Into<String>) -> TextError {
    TextError {
        line,
        col,
        msg: msg.into(),
    }
}

/// Splits a line into (column, token) pairs; `#` starts a comment.
fn tokens(line: &str) -> Vec<(usize, &str)> {
    let line = match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    };
    let mut out = Vec::new();
    let mut rest = line;
    let mut offset = 0usize;
    loop {
        let trimmed = rest.trim_start();
        let skipped = rest.len() - trimmed.len();
        offset += skipped;
        if trimmed.is_empty() {
            return out;
        }
        let end = trimmed
            .find(char::is_whitespace)
            .unwrap_or(trimmed.len());
        out.push((offset + 1, &trimmed[..end]));
        offset += end;
        rest = &trimmed[end..];
    }
}

fn check_ident(tok: &str, line: usize, col: usize, what: &str) -> Result<(), TextError> {
    if tok.is_empty() {
        return Err(err(line, col, format!("empty {what}")));
    }
    if tok.starts_with('%') {
        return Err(err(line, col, format!("{what} `{tok}` uses the reserved `%` prefix")));
    }
    if tok.chars().any(|c| "(),#".contains(c) || c.is_whitespace()) {
        return Err(err(line, col, format!("{what} `{tok}` contains punctuation")));
    }
    Ok(())
}

/// Parses a literal term `label(n1,...,nk)`; `label()` has zero nodes.
fn parse_term(tok: &str, line: usize, col: usize) -> Result<(Name, Vec<Name>), TextError> {
    let open = tok
        .find('(')
        .ok_or_else(|| err(line, col, format!("expected `label(...)`, got `{tok}`")))?;
    if !tok.ends_with(')') {
        return Err(err(line, col, format!("unterminated literal `{tok}`")));
    }
    let label = &tok[..open];
    check_ident(label, line, col, "label")?;
    let inner = &tok[open + 1..tok.len() - 1];
    let mut nodes = Vec::new();
    if !inner.is_empty() {
        for part in inner.split(',') {
            check_ident(part, line, col, "node")?;
            nodes.push(Name::new(part));
        }
    }
    Ok((Name::new(label), nodes))
}

fn make_literal(
    label: Name,
    nodes: Vec<Name>,
    line: usize,
    col: usize,
) -> Result<Literal, TextError> {
    Literal::new(label, nodes).map_err(|e| err(line, col, e.to_string()))
}

/// Parses the grammar file format: `start N`, `term name arity`,
/// `nonterm name arity`, `rule Lhs(args) -> lit ...` (empty right-hand
/// side permitted), `#` comments. The result is validated and augmented
/// with the wrapper rule.
pub fn parse_grammar_text(text: &str) -> Result<HRGrammar, TextError> {
    let mut terminals: Vec<(Name, usize)> = Vec::new();
    let mut nonterminals: Vec<(Name, usize)> = Vec::new();
    let mut start: Option<Name> = None;
    let mut rules: Vec<Rule> = Vec::new();
    for (li, raw) in text.lines().enumerate() {
        let line = li + 1;
        let toks = tokens(raw);
        if toks.is_empty() {
            continue;
        }
        let (c0, head) = toks[0];
        match head {
            "start" => {
                if toks.len() != 2 {
                    return Err(err(line, c0, "expected `start <nonterminal>`"));
                }
                if start.is_some() {
                    return Err(err(line, c0, "duplicate start directive"));
                }
                check_ident(toks[1].1, line, toks[1].0, "start symbol")?;
                start = Some(Name::new(toks[1].1));
            }
            "term" | "nonterm" => {
                if toks.len() != 3 {
                    return Err(err(line, c0, format!("expected `{head} <name> <arity>`")));
                }
                check_ident(toks[1].1, line, toks[1].0, "symbol")?;
                let arity: usize = toks[2]
                    .1
                    .parse()
                    .map_err(|_| err(line, toks[2].0, "arity must be a number"))?;
                let entry = (Name::new(toks[1].1), arity);
                if head == "term" {
                    terminals.push(entry);
                } else {
                    nonterminals.push(entry);
                }
            }
            "rule" => {
                if toks.len() < 3 || toks[2].1 != "->" {
                    return Err(err(line, c0, "expected `rule Lhs(args) -> lit ...`"));
                }
                let (lc, ltok) = toks[1];
                let (llabel, lnodes) = parse_term(ltok, line, lc)?;
                if !nonterminals.iter().any(|(n, _)| *n == llabel) {
                    return Err(err(line, lc, format!("undeclared nonterminal `{llabel}`")));
                }
                let lhs = make_literal(llabel, lnodes, line, lc)?;
                let mut lits = Vec::new();
                for &(tc, tok) in &toks[3..] {
                    let (label, nodes) = parse_term(tok, line, tc)?;
                    let declared = terminals
                        .iter()
                        .chain(nonterminals.iter())
                        .find(|(n, _)| *n == label);
                    match declared {
                        None => {
                            return Err(err(line, tc, format!("undeclared symbol `{label}`")))
                        }
                        Some((_, a)) if *a != nodes.len() => {
                            return Err(err(
                                line,
                                tc,
                                format!("`{label}` declared with arity {a}, used with {}", nodes.len()),
                            ))
                        }
                        Some(_) => {}
                    }
                    lits.push(make_literal(label, nodes, line, tc)?);
                }
                rules.push(Rule {
                    lhs,
                    rhs: Graph::from_lits(lits),
                });
            }
            other => {
                return Err(err(line, c0, format!("unknown directive `{other}`")));
            }
        }
    }
    let start = start.ok_or_else(|| err(0, 0, "missing start directive"))?;
    validate_and_augment(&terminals, &nonterminals, start, rules)
        .map_err(|e| err(0, 0, e.to_string()))
}

/// Parses the graph file format: lines of literal terms, plus optional
/// `node <id>...` lines declaring extra (possibly isolated) nodes.
/// Literal labels and arities are checked against the grammar.
pub fn parse_graph_text(text: &str, g: &HRGrammar) -> Result<Graph, TextError> {
    let mut lits: Vec<Literal> = Vec::new();
    let mut extra: BTreeSet<Name> = BTreeSet::new();
    for (li, raw) in text.lines().enumerate() {
        let line = li + 1;
        let toks = tokens(raw);
        if toks.is_empty() {
            continue;
        }
        if toks[0].1 == "node" {
            for &(tc, tok) in &toks[1..] {
                check_ident(tok, line, tc, "node")?;
                extra.insert(Name::new(tok));
            }
            continue;
        }
        for &(tc, tok) in &toks {
            let (label, nodes) = parse_term(tok, line, tc)?;
            match g.arity(&label) {
                None => return Err(err(line, tc, format!("undeclared label `{label}`"))),
                Some(a) if a != nodes.len() => {
                    return Err(err(
                        line,
                        tc,
                        format!("`{label}` declared with arity {a}, used with {}", nodes.len()),
                    ))
                }
                Some(_) => {}
            }
            lits.push(make_literal(label, nodes, line, tc)?);
        }
    }
    Ok(Graph::from_lits(lits).with_extra_nodes(extra))
}

/// Renders a state parameter as a letter by its position in the state's
/// creation-ordered parameter list (`a`, `b`, ..., then `p26`, `p27`, ...).
fn param_letter(i: usize) -> String {
    if i < 26 {
        ((b'a' + i as u8) as char).to_string()
    } else {
        format!("p{i}")
    }
}

fn render_name(n: &Name, params: &[Name]) -> String {
    match params.iter().position(|p| p == n) {
        Some(i) => param_letter(i),
        None => n.to_string(),
    }
}

/// Renders a pseudo-literal with parameters as letters, Dash as `_`,
/// Bullet as `*`.
pub fn render_pseudo(pl: &PseudoLiteral, params: &[Name]) -> String {
    let slots: Vec<String> = pl
        .slots
        .iter()
        .map(|s| match s {
            Slot::Node(n) => render_name(n, params),
            Slot::Dash => "_".to_string(),
            Slot::Bullet => "*".to_string(),
        })
        .collect();
    format!("{}({})", pl.label, slots.join(","))
}

/// Renders a Follow set as `{...}` with entries sorted by their rendered
/// text; the end marker prints as `$`.
pub fn render_follow_set(set: &FollowSet, params: &[Name]) -> String {
    let mut v: Vec<String> = set
        .iter()
        .map(|e| match e {
            FollowEntry::End => "$".to_string(),
            FollowEntry::Pseudo(pl) => render_pseudo(pl, params),
        })
        .collect();
    v.sort();
    format!("{{{}}}", v.join(","))
}

fn render_rule(g: &HRGrammar, r: usize, dot: Option<usize>) -> String {
    let rule = &g.rules[r];
    let mut rhs: Vec<String> = rule.rhs.lits.iter().map(|l| l.to_string()).collect();
    if let Some(d) = dot {
        rhs.insert(d, ".".to_string());
    }
    if rhs.is_empty() {
        rhs.push("<empty>".to_string());
    }
    format!("{} -> {}", rule.lhs, rhs.join(" "))
}

/// The deterministic analysis dump: counting convention, sizes, states
/// with items and parameters, transitions with literal and parameter map,
/// and per-state triggers in decision order with Follow and Follow* sets.
pub fn render_tables(g: &HRGrammar, dcfa: &Dcfa, tables: &AnalysisTables) -> String {
    let mut out = String::new();
    let mut push = |s: String| {
        out.push_str(&s);
        out.push('\n');
    };
    push("# Counting convention: `reported` sizes drop the augmentation".into());
    push("# bookkeeping: wrapper items, the accept state, and the transition".into());
    push("# over the start literal are not counted, and an initial state left".into());
    push("# with a single core item is elided together with its outgoing".into());
    push("# transitions (the first move is forced). `full` sizes count".into());
    push("# everything the implementation materializes.".into());
    let (rs, ri, rt) = dcfa.reported_counts(g);
    let (fs, fi, ft) = dcfa.full_counts();
    push(format!("reported states={rs} items={ri} transitions={rt}"));
    push(format!("full states={fs} items={fi} transitions={ft}"));
    push(format!("conflicts={}", tables.conflicts.len()));
    for c in &tables.conflicts {
        let ids: Vec<String> = c.triggers.iter().map(|t| t.to_string()).collect();
        push(format!("conflict state={} triggers={}", c.state, ids.join(",")));
    }
    for s in &dcfa.states {
        let letters: Vec<String> = (0..s.params.len()).map(param_letter).collect();
        push(format!("state {} params={}", s.id, letters.join(",")));
        for it in &s.items {
            let map: Vec<String> = it
                .sigma
                .iter()
                .map(|(k, v)| format!("{k}={}", render_name(v, &s.params)))
                .collect();
            push(format!(
                "  item {} [{}]",
                render_rule(g, it.rule, Some(it.dot)),
                map.join(" ")
            ));
        }
        for (ti, t) in dcfa.transitions.iter().enumerate() {
            if t.src != s.id {
                continue;
            }
            let lit_nodes: Vec<String> = t
                .lit
                .nodes
                .iter()
                .map(|n| render_name(n, &s.params))
                .collect();
            let mu: Vec<String> = t
                .mu
                .iter()
                .map(|(d, v)| {
                    format!(
                        "{}={}",
                        render_name(d, &dcfa.states[t.dst].params),
                        render_name(v, &s.params)
                    )
                })
                .collect();
            push(format!(
                "  transition {} {}({}) -> state {} [{}]",
                ti,
                t.lit.label,
                lit_nodes.join(","),
                t.dst,
                mu.join(" ")
            ));
        }
        for (pos, &ti) in tables.order[s.id].iter().enumerate() {
            let head = match &tables.triggers[s.id][ti] {
                Trigger::Shift { transition } => format!(
                    "shift {}",
                    render_pseudo(&transition_pseudo(dcfa, *transition), &s.params)
                ),
                Trigger::Reduce { item } => {
                    format!("reduce {}", render_rule(g, item.rule, Some(item.dot)))
                }
            };
            push(format!(
                "  trigger pos={pos} {head} follow={} follow*={}",
                render_follow_set(&tables.follow[s.id][ti], &s.params),
                render_follow_set(&tables.follow_star[s.id][ti], &s.params)
            ));
        }
    }
    out
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// DOT text for the nondeterministic automaton over dotted rules.
pub fn dot_ncfa(g: &HRGrammar, ncfa: &Ncfa) -> String {
    let mut out = String::from("digraph ncfa {\n  rankdir=LR;\n");
    for (i, s) in ncfa.states.iter().enumerate() {
        let label = render_rule(g, s.rule, Some(s.dot));
        out.push_str(&format!("  n{i} [label=\"{}\"];\n", dot_escape(&label)));
        if i == ncfa.q0 {
            out.push_str(&format!("  n{i} [shape=box];\n"));
        }
    }
    for (src, lit, dst) in &ncfa.gotos {
        out.push_str(&format!(
            "  n{src} -> n{dst} [label=\"{}\"];\n",
            dot_escape(&lit.to_string())
        ));
    }
    for (src, dst) in &ncfa.closures {
        out.push_str(&format!("  n{src} -> n{dst} [style=dashed];\n"));
    }
    out.push_str("}\n");
    out
}

/// DOT text for the deterministic automaton: one node per state listing
/// its items, edges labeled with the transition literal in the source
/// state's parameter letters.
pub fn dot_dcfa(g: &HRGrammar, dcfa: &Dcfa) -> String {
    let mut out = String::from("digraph dcfa {\n  rankdir=LR;\n");
    for s in &dcfa.states {
        let items: Vec<String> = s
            .items
            .iter()
            .map(|it| dot_escape(&render_rule(g, it.rule, Some(it.dot))))
            .collect();
        let shape = if s.id == dcfa.accept { "doublecircle" } else { "box" };
        out.push_str(&format!(
            "  q{} [shape={shape} label=\"Q{}\\n{}\"];\n",
            s.id,
            s.id,
            items.join("\\n")
        ));
    }
    for t in &dcfa.transitions {
        let nodes: Vec<String> = t
            .lit
            .nodes
            .iter()
            .map(|n| render_name(n, &dcfa.states[t.src].params))
            .collect();
        out.push_str(&format!(
            "  q{} -> q{} [label=\"{}({})\"];\n",
            t.src,
            t.dst,
            dot_escape(t.lit.label.as_str()),
            nodes.join(",")
        ));
    }
    out.push_str("}\n");
    out
}

/// Everything the `analyze` command reports.
pub struct AnalysisSummary {
    pub states: usize,
    pub items: usize,
    pub transitions: usize,
    pub conflicts: usize,
    pub fec: FecVerdict,
    pub tables: AnalysisTables,
    pub dcfa: Dcfa,
}

impl AnalysisSummary {
    /// PSR parsing is available when no trigger conflicts exist and the
    /// free-edge-choice check did not refute.
    pub fn psr_parsable(&self) -> bool {
        self.conflicts == 0 && matches!(self.fec, FecVerdict::Holds | FecVerdict::Assumed)
    }

    pub fn summary_line(&self) -> String {
        let fec = match &self.fec {
            FecVerdict::Holds => "yes",
            FecVerdict::Assumed => "assumed",
            FecVerdict::Refuted(_) => "no",
            FecVerdict::Unknown => "unknown",
        };
        format!(
            "states={} items={} transitions={} conflicts={} fec={}",
            self.states, self.items, self.transitions, self.conflicts, fec
        )
    }
}

/// Builds the automaton, runs the static analysis, and checks the
/// free-edge-choice property in the given mode.
pub fn analyze_grammar(g: &HRGrammar, fec_mode: FecMode) -> AnalysisSummary {
    let dcfa = build_dcfa(g);
    let tables = analyze(g, &dcfa);
    let fec = check_fec(g, &dcfa, &tables, fec_mode, FecOptions::default());
    let (states, items, transitions) = dcfa.reported_counts(g);
    AnalysisSummary {
        states,
        items,
        transitions,
        conflicts: tables.conflicts.len(),
        fec,
        tables,
        dcfa,
    }
}

/// Enumerates, up to node renaming, every graph over the grammar's
/// terminal alphabet with at most `max_lits` literals and at most
/// `max_nodes` nodes: literal sequences are non-decreasing over node names
/// `1..=max_nodes`, and only graphs whose node set is a contiguous
/// `{1..u}` are kept (every renaming class has such a representative).
pub fn enumerate_terminal_graphs(g: &HRGrammar, max_lits: usize, max_nodes: usize) -> Vec<Graph> {
    let labels: Vec<(Name, usize)> = g
        .terminals
        .iter()
        .map(|(n, a)| (n.clone(), *a))
        .collect();
    let node_names: Vec<Name> = (1..=max_nodes).map(|i| Name::new(&i.to_string())).collect();
    let mut universe: Vec<Literal> = Vec::new();
    for (label, arity) in &labels {
        let mut tuple: Vec<usize> = Vec::new();
        build_tuples(&mut tuple, *arity, max_nodes, &mut |t| {
            let nodes: Vec<Name> = t.iter().map(|&i| node_names[i].clone()).collect();
            universe.push(Literal::new(label.clone(), nodes).unwrap());
        });
    }
    universe.sort();
    let mut out = vec![Graph::empty()];
    let mut stack: Vec<Literal> = Vec::new();
    enumerate_rec(&universe, 0, max_lits, &mut stack, &mut out);
    out.retain(|gr| {
        let n = gr.nodes.len();
        gr.nodes.iter().eq(node_names[..n].iter())
    });
    out
}

fn build_tuples(tuple: &mut Vec<usize>, left: usize, n: usize, f: &mut impl FnMut(&[usize])) {
    if left == 0 {
        f(tuple);
        return;
    }
    for i in 0..n {
        if tuple.contains(&i) {
            continue;
        }
        tuple.push(i);
        build_tuples(tuple, left - 1, n, f);
        tuple.pop();
    }
}

fn enumerate_rec(
    universe: &[Literal],
    from: usize,
    left: usize,
    stack: &mut Vec<Literal>,
    out: &mut Vec<Graph>,
) {
    if left == 0 {
        return;
    }
    for i in from..universe.len() {
        stack.push(universe[i].clone());
        out.push(Graph::from_lits(stack.clone()));
        // `from = i` keeps the sequence non-decreasing while allowing
        // repeated literals.
        enumerate_rec(universe, i, left - 1, stack, out);
        stack.pop();
    }
}

/// One disagreement between the predictive parser and the naive oracle.
#[derive(Debug)]
pub struct OracleMismatch {
    pub input: Graph,
    pub psr_accepts: bool,
    pub naive: String,
}

/// Cross-checks the predictive parser against the naive reference parser
/// on the exhaustive corpus. Returns the number of graphs checked, or the
/// first mismatch.
pub fn oracle_crosscheck(
    g: &HRGrammar,
    dcfa: &Dcfa,
    tables: &AnalysisTables,
    max_lits: usize,
    max_nodes: usize,
    naive_budget: usize,
) -> Result<usize, Box<OracleMismatch>> {
    let corpus = enumerate_terminal_graphs(g, max_lits, max_nodes);
    let total = corpus.len();
    for input in corpus {
        let psr = psr_parse(g, dcfa, tables, &input, ParseOptions::default()).is_accept();
        let naive = naive_parse(g, &input, naive_budget);
        let agree = match &naive {
            NaiveResult::Accept(_) => psr,
            NaiveResult::Reject => !psr,
            NaiveResult::BudgetExceeded => false,
        };
        if !agree {
            return Err(Box::new(OracleMismatch {
                psr_accepts: psr,
                naive: match naive {
                    NaiveResult::Accept(_) => "accept".into(),
                    NaiveResult::Reject => "reject".into(),
                    NaiveResult::BudgetExceeded => "budget-exceeded".into(),
                },
                input,
            }));
        }
    }
    Ok(total)
}

/// Renders an accepted parse's derivation, one instantiated rule per
/// line, by replaying it from the start literal.
pub fn render_derivation(g: &HRGrammar, result: &PsrResult) -> Result<Vec<String>, String> {
    let steps = match result {
        PsrResult::Accept { derivation, .. } => derivation,
        PsrResult::Reject { reason, .. } => return Err(reason.clone()),
    };
    let mut host = hrg_core::grammar::start_graph(g);
    let mut lines = Vec::new();
    for s in steps {
        let lhs = g.rules[s.rule_index].lhs.rename(&s.mat);
        let rhs = g.rules[s.rule_index]
            .rhs
            .rename(&s.mat)
            .map_err(|e| e.to_string())?;
        let rhs_text = if rhs.lits.is_empty() {
            "<empty>".to_string()
        } else {
            rhs.lits
                .iter()
                .map(|l| l.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        lines.push(format!(
            "rule={} position={} {} => {}",
            s.rule_index, s.position, lhs, rhs_text
        ));
        host = hrg_core::grammar::derive_step(g, &host, s).map_err(|e| e.to_string())?;
    }
    Ok(lines)
}
