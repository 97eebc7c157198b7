//! HR grammars, rightmost derivations, and bounded language enumeration.
//!
//! A rule `A(x..) -> rhs` replaces a nonterminal literal by a graph whose
//! node set contains the left-hand side's nodes. Validation checks arities,
//! reservedness, and reducedness (every nonterminal reachable and
//! productive), then augments the grammar with a wrapper rule
//! `%start() -> S()` so that downstream automata have a unique initial and
//! accepting item.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::graph::{Graph, GraphError, Literal, Name, Renaming};

/// The reserved label of the wrapper nonterminal added during augmentation.
pub fn wrapper_label() -> Name {
    Name::new("%start")
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SymbolKind {
    Terminal,
    Nonterminal,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Rule {
    pub lhs: Literal,
    pub rhs: Graph,
}

impl Rule {
    /// Nodes of the right-hand side that do not occur on the left-hand side.
    pub fn fresh_nodes(&self) -> BTreeSet<Name> {
        self.rhs
            .nodes
            .iter()
            .filter(|n| !self.lhs.nodes.contains(n))
            .cloned()
            .collect()
    }
}

impl std::fmt::Display for Rule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} -> {}", self.lhs, self.rhs)
    }
}

#[derive(Clone, Debug)]
pub struct HRGrammar {
    pub terminals: BTreeMap<Name, usize>,
    pub nonterminals: BTreeMap<Name, usize>,
    /// The user-declared start nonterminal (arity 0).
    pub start: Name,
    /// User rules in declaration order, followed by the wrapper rule.
    pub rules: Vec<Rule>,
    /// Index of the wrapper rule `%start() -> S()`.
    pub wrapper_rule: usize,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GrammarError {
    #[error("symbol {label} used with arity {found}, declared with arity {expected}")]
    ArityMismatch {
        label: Name,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    DuplicateNodesInLiteral(#[from] GraphError),
    #[error("rule {rule}: left-hand side node {node} does not occur in the right-hand side")]
    LhsNodeNotInRhs { rule: usize, node: Name },
    #[error("grammar is not reduced: unreachable {unreachable:?}, unproductive {unproductive:?}")]
    NotReduced {
        unreachable: Vec<Name>,
        unproductive: Vec<Name>,
    },
    #[error("start symbol {label} has arity {arity}, expected 0")]
    StartArityNonzero { label: Name, arity: usize },
    #[error("symbol {label} is not declared")]
    UndeclaredSymbol { label: Name },
    #[error("symbol {label} declared more than once")]
    DuplicateSymbol { label: Name },
    #[error("rule {rule}: left-hand side label {label} is not a nonterminal")]
    LhsNotNonterminal { rule: usize, label: Name },
    #[error("name {name} uses the reserved '%' prefix")]
    ReservedName { name: Name },
}

impl HRGrammar {
    pub fn kind_of(&self, label: &Name) -> Option<SymbolKind> {
        if self.terminals.contains_key(label) {
            Some(SymbolKind::Terminal)
        } else if self.nonterminals.contains_key(label) {
            Some(SymbolKind::Nonterminal)
        } else {
            None
        }
    }

    pub fn is_terminal(&self, label: &Name) -> bool {
        self.terminals.contains_key(label)
    }

    pub fn is_nonterminal(&self, label: &Name) -> bool {
        self.nonterminals.contains_key(label)
    }

    pub fn arity(&self, label: &Name) -> Option<usize> {
        self.terminals
            .get(label)
            .or_else(|| self.nonterminals.get(label))
            .copied()
    }

    /// Indices of rules whose left-hand side carries the given label.
    pub fn rules_for(&self, label: &Name) -> Vec<usize> {
        (0..self.rules.len())
            .filter(|&i| self.rules[i].lhs.label == *label)
            .collect()
    }

    pub fn is_terminal_graph(&self, g: &Graph) -> bool {
        g.lits.iter().all(|l| self.is_terminal(&l.label))
    }

    /// Index of the rightmost nonterminal literal, if any.
    pub fn rightmost_nt(&self, g: &Graph) -> Option<usize> {
        g.lits.iter().rposition(|l| self.is_nonterminal(&l.label))
    }
}

/// Validates symbols and rules, checks reducedness, and adds the wrapper
/// rule. Rule right-hand-side node sets are extended with the left-hand
/// side's nodes so ε-rules keep their isolated nodes.
pub fn validate_and_augment(
    terminals: &[(Name, usize)],
    nonterminals: &[(Name, usize)],
    start: Name,
    rules: Vec<Rule>,
) -> Result<HRGrammar, GrammarError> {
    let mut term_map = BTreeMap::new();
    let mut nt_map = BTreeMap::new();
    for (n, a) in terminals {
        if n.is_reserved() {
            return Err(GrammarError::ReservedName { name: n.clone() });
        }
        if term_map.insert(n.clone(), *a).is_some() {
            return Err(GrammarError::DuplicateSymbol { label: n.clone() });
        }
    }
    for (n, a) in nonterminals {
        if n.is_reserved() {
            return Err(GrammarError::ReservedName { name: n.clone() });
        }
        if term_map.contains_key(n) || nt_map.insert(n.clone(), *a).is_some() {
            return Err(GrammarError::DuplicateSymbol { label: n.clone() });
        }
    }
    match nt_map.get(&start) {
        None => return Err(GrammarError::UndeclaredSymbol { label: start }),
        Some(&a) if a != 0 => {
            return Err(GrammarError::StartArityNonzero {
                label: start,
                arity: a,
            })
        }
        Some(_) => {}
    }

    let mut rules = rules;
    for (i, rule) in rules.iter_mut().enumerate() {
        let lhs_arity = match nt_map.get(&rule.lhs.label) {
            Some(&a) => a,
            None => {
                if term_map.contains_key(&rule.lhs.label) {
                    return Err(GrammarError::LhsNotNonterminal {
                        rule: i,
                        label: rule.lhs.label.clone(),
                    });
                }
                return Err(GrammarError::UndeclaredSymbol {
                    label: rule.lhs.label.clone(),
                });
            }
        };
        if rule.lhs.arity() != lhs_arity {
            return Err(GrammarError::ArityMismatch {
                label: rule.lhs.label.clone(),
                expected: lhs_arity,
                found: rule.lhs.arity(),
            });
        }
        for lit in &rule.rhs.lits {
            let a = term_map
                .get(&lit.label)
                .or_else(|| nt_map.get(&lit.label))
                .copied()
                .ok_or_else(|| GrammarError::UndeclaredSymbol {
                    label: lit.label.clone(),
                })?;
            if lit.arity() != a {
                return Err(GrammarError::ArityMismatch {
                    label: lit.label.clone(),
                    expected: a,
                    found: lit.arity(),
                });
            }
        }
        for n in rule
            .lhs
            .nodes
            .iter()
            .chain(rule.rhs.nodes.iter())
        {
            if n.is_reserved() {
                return Err(GrammarError::ReservedName { name: n.clone() });
            }
        }
        // ε-rules are written with an empty literal list; their graph still
        // carries the left-hand side's nodes.
        rule.rhs.nodes.extend(rule.lhs.nodes.iter().cloned());
        if let Some(n) = rule.lhs.nodes.iter().find(|n| !rule.rhs.nodes.contains(n)) {
            return Err(GrammarError::LhsNodeNotInRhs {
                rule: i,
                node: n.clone(),
            });
        }
    }

    let mut g = HRGrammar {
        terminals: term_map,
        nonterminals: nt_map,
        start: start.clone(),
        rules,
        wrapper_rule: 0,
    };

    let report = check_reduced(&g);
    let unreachable: Vec<Name> = g
        .nonterminals
        .keys()
        .filter(|n| !report.reachable.contains(*n))
        .cloned()
        .collect();
    let unproductive: Vec<Name> = g
        .nonterminals
        .keys()
        .filter(|n| !report.productive.contains(*n))
        .cloned()
        .collect();
    if !unreachable.is_empty() || !unproductive.is_empty() {
        return Err(GrammarError::NotReduced {
            unreachable,
            unproductive,
        });
    }

    let wrapper = wrapper_label();
    g.nonterminals.insert(wrapper.clone(), 0);
    g.rules.push(Rule {
        lhs: Literal::new(wrapper, vec![]).unwrap(),
        rhs: Graph::from_lit(Literal::new(start, vec![]).unwrap()),
    });
    g.wrapper_rule = g.rules.len() - 1;
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReducedReport {
    pub reachable: BTreeSet<Name>,
    pub productive: BTreeSet<Name>,
}

/// Per-nonterminal reachability from the start symbol and productivity
/// (derives some terminal graph), each via a fixpoint over the rules.
/// Runs on the pre-augmentation grammar view, so the wrapper (if present)
/// is ignored.
pub fn check_reduced(g: &HRGrammar) -> ReducedReport {
    let mut productive: BTreeSet<Name> = BTreeSet::new();
    loop {
        let mut changed = false;
        for rule in &g.rules {
            if productive.contains(&rule.lhs.label) {
                continue;
            }
            let ok = rule.rhs.lits.iter().all(|l| {
                g.is_terminal(&l.label) || productive.contains(&l.label)
            });
            if ok {
                productive.insert(rule.lhs.label.clone());
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut reachable: BTreeSet<Name> = BTreeSet::new();
    reachable.insert(g.start.clone());
    loop {
        let mut changed = false;
        for rule in &g.rules {
            if !reachable.contains(&rule.lhs.label) {
                continue;
            }
            for l in &rule.rhs.lits {
                if g.nonterminals.contains_key(&l.label) && reachable.insert(l.label.clone()) {
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    reachable.remove(&wrapper_label());
    productive.remove(&wrapper_label());
    ReducedReport {
        reachable,
        productive,
    }
}

/// One rightmost derivation step: which rule was applied, at which literal
/// position, under which node match.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DerivationStep {
    pub rule_index: usize,
    pub mat: Renaming,
    pub position: usize,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DeriveError {
    #[error("literal at position {position} is not the rightmost nonterminal")]
    NotRightmost { position: usize },
    #[error("match maps a fresh right-hand-side node onto a node already in the host graph")]
    MatchClash,
    #[error("match does not turn the rule's left-hand side into the literal at the position")]
    LhsMismatch,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Applies one rule at the given position under the given match. The
/// position must hold the rightmost nonterminal literal, the match must send
/// the rule's left-hand side exactly onto that literal, and nodes introduced
/// by the right-hand side must be fresh for the host graph.
pub fn derive_step(
    g: &HRGrammar,
    host: &Graph,
    step: &DerivationStep,
) -> Result<Graph, DeriveError> {
    let rule = &g.rules[step.rule_index];
    if step.position >= host.lits.len()
        || g.rightmost_nt(host) != Some(step.position)
    {
        return Err(DeriveError::NotRightmost {
            position: step.position,
        });
    }
    if rule.lhs.rename(&step.mat) != host.lits[step.position] {
        return Err(DeriveError::LhsMismatch);
    }
    let rhs = rule.rhs.rename(&step.mat)?;
    let lhs_img: BTreeSet<Name> = host.lits[step.position].nodes.iter().cloned().collect();
    if rhs
        .nodes
        .iter()
        .any(|n| host.nodes.contains(n) && !lhs_img.contains(n))
    {
        return Err(DeriveError::MatchClash);
    }
    let mut nodes = host.nodes.clone();
    nodes.extend(rhs.nodes.iter().cloned());
    let mut lits = host.lits[..step.position].to_vec();
    lits.extend(rhs.lits.iter().cloned());
    lits.extend(host.lits[step.position + 1..].iter().cloned());
    Ok(Graph { nodes, lits })
}

/// Builds the canonical rightmost step applying `rule_index` to `host`,
/// naming each fresh right-hand-side node with the smallest unused positive
/// integer. Returns the step and the derived graph.
pub fn apply_rule_fresh(
    g: &HRGrammar,
    host: &Graph,
    rule_index: usize,
) -> Option<(DerivationStep, Graph)> {
    let position = g.rightmost_nt(host)?;
    let rule = &g.rules[rule_index];
    let target = &host.lits[position];
    if rule.lhs.label != target.label {
        return None;
    }
    let mut mat = Renaming::identity();
    for (from, to) in rule.lhs.nodes.iter().zip(target.nodes.iter()) {
        mat.insert(from.clone(), to.clone());
    }
    let mut counter: u64 = 1;
    let mut taken: BTreeSet<Name> = host.nodes.clone();
    for n in &rule.rhs.nodes {
        if rule.lhs.nodes.contains(n) {
            continue;
        }
        let fresh = loop {
            let cand = Name::new(&counter.to_string());
            counter += 1;
            if !taken.contains(&cand) {
                break cand;
            }
        };
        taken.insert(fresh.clone());
        mat.insert(n.clone(), fresh);
    }
    let step = DerivationStep {
        rule_index,
        mat,
        position,
    };
    derive_step(g, host, &step).ok().map(|next| (step, next))
}

/// The start graph of user derivations: the start literal alone.
pub fn start_graph(g: &HRGrammar) -> Graph {
    Graph::from_lit(Literal::new(g.start.clone(), vec![]).unwrap())
}

#[derive(Clone, Debug)]
pub struct LanguageMember {
    pub graph: Graph,
    pub derivation: Vec<DerivationStep>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EnumerateError {
    #[error("language enumeration frontier exceeded the cap of {cap} sentential forms")]
    BoundExceeded { cap: usize },
}

/// Minimal number of terminal literals each nonterminal needs to terminate,
/// used to prune enumeration.
fn min_yields(g: &HRGrammar) -> BTreeMap<Name, usize> {
    let mut out: BTreeMap<Name, usize> = BTreeMap::new();
    loop {
        let mut changed = false;
        for rule in &g.rules {
            let mut total = 0usize;
            let mut ok = true;
            for l in &rule.rhs.lits {
                if g.is_terminal(&l.label) {
                    total += 1;
                } else if let Some(&y) = out.get(&l.label) {
                    total += y;
                } else {
                    ok = false;
                    break;
                }
            }
            if ok {
                let e = out.entry(rule.lhs.label.clone()).or_insert(usize::MAX);
                if total < *e {
                    *e = total;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    out
}

/// All terminal graphs derivable from the start symbol within the literal
/// and node bounds, with their recorded rightmost derivations. Members are
/// deduplicated up to permutation equivalence. The cap bounds the number of
/// explored sentential forms.
pub fn enumerate_language(
    g: &HRGrammar,
    max_lits: usize,
    max_nodes: usize,
    cap: usize,
) -> Result<Vec<LanguageMember>, EnumerateError> {
    let yields = min_yields(g);
    let mut out: Vec<LanguageMember> = Vec::new();
    let mut queue: VecDeque<(Graph, Vec<DerivationStep>)> = VecDeque::new();
    let mut seen: BTreeSet<Vec<u8>> = BTreeSet::new();
    let mut explored = 0usize;
    queue.push_back((start_graph(g), Vec::new()));
    while let Some((form, steps)) = queue.pop_front() {
        explored += 1;
        if explored > cap {
            return Err(EnumerateError::BoundExceeded { cap });
        }
        match g.rightmost_nt(&form) {
            None => {
                if form.lits.len() <= max_lits
                    && form.nodes.len() <= max_nodes
                    && !out.iter().any(|m| m.graph.equivalent(&form))
                {
                    out.push(LanguageMember {
                        graph: form,
                        derivation: steps,
                    });
                }
            }
            Some(_) => {
                let mut terminal_count = 0usize;
                let mut floor = 0usize;
                for l in &form.lits {
                    if g.is_terminal(&l.label) {
                        terminal_count += 1;
                    } else {
                        floor += yields.get(&l.label).copied().unwrap_or(usize::MAX);
                    }
                }
                if terminal_count.saturating_add(floor) > max_lits
                    || form.nodes.len() > max_nodes
                {
                    continue;
                }
                for ri in 0..g.rules.len() {
                    if ri == g.wrapper_rule {
                        continue;
                    }
                    if let Some((step, next)) = apply_rule_fresh(g, &form, ri) {
                        let key = format!("{next}").into_bytes();
                        if seen.insert(key) {
                            let mut steps2 = steps.clone();
                            steps2.push(step);
                            queue.push_back((next, steps2));
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Membership oracle: true iff some enumerated language member is
/// isomorphic to `input` (label-preserving node bijection plus literal
/// multiset equality).
pub fn is_member(g: &HRGrammar, input: &Graph, cap: usize) -> Result<bool, EnumerateError> {
    let members = enumerate_language(g, input.lits.len(), input.nodes.len().max(1), cap)?;
    Ok(members.iter().any(|m| m.graph.iso_matches(input)))
}

#[cfg(test)]
pub mod fixtures {
    use super::*;
    use crate::graph::lit;

    /// The tree grammar: Z() -> root(x) T(x); T(y) -> T(y) e(y,z) T(z); T(y) -> ε.
    pub fn trees() -> HRGrammar {
        validate_and_augment(
            &[(Name::new("root"), 1), (Name::new("e"), 2)],
            &[(Name::new("Z"), 0), (Name::new("T"), 1)],
            Name::new("Z"),
            vec![
                Rule {
                    lhs: lit("Z", &[]),
                    rhs: Graph::from_lits(vec![lit("root", &["x"]), lit("T", &["x"])]),
                },
                Rule {
                    lhs: lit("T", &["y"]),
                    rhs: Graph::from_lits(vec![
                        lit("T", &["y"]),
                        lit("e", &["y", "z"]),
                        lit("T", &["z"]),
                    ]),
                },
                Rule {
                    lhs: lit("T", &["y"]),
                    rhs: Graph::empty(),
                },
            ],
        )
        .unwrap()
    }

    /// The modal-verb grammar: Z() -> M(r,x) with five M-alternatives over
    /// per/4, try/3, bel/3.
    pub fn persuade() -> HRGrammar {
        validate_and_augment(
            &[
                (Name::new("per"), 4),
                (Name::new("try"), 3),
                (Name::new("bel"), 3),
            ],
            &[(Name::new("Z"), 0), (Name::new("M"), 2)],
            Name::new("Z"),
            vec![
                Rule {
                    lhs: lit("Z", &[]),
                    rhs: Graph::from_lits(vec![lit("M", &["r", "x"])]),
                },
                Rule {
                    lhs: lit("M", &["r", "x"]),
                    rhs: Graph::from_lits(vec![
                        lit("per", &["r", "x", "y", "z"]),
                        lit("M", &["z", "y"]),
                    ]),
                },
                Rule {
                    lhs: lit("M", &["r", "x"]),
                    rhs: Graph::from_lits(vec![
                        lit("try", &["r", "x", "z"]),
                        lit("M", &["z", "x"]),
                    ]),
                },
                Rule {
                    lhs: lit("M", &["r", "x"]),
                    rhs: Graph::from_lits(vec![lit("bel", &["r", "x", "y"])]),
                },
                Rule {
                    lhs: lit("M", &["r", "x"]),
                    rhs: Graph::from_lits(vec![
                        lit("bel", &["r", "x", "y"]),
                        lit("M", &["y", "z"]),
                    ]),
                },
                Rule {
                    lhs: lit("M", &["r", "x"]),
                    rhs: Graph::from_lits(vec![
                        lit("bel", &["r", "x", "y"]),
                        lit("M", &["y", "x"]),
                    ]),
                },
            ],
        )
        .unwrap()
    }

    /// Series-parallel graphs: Z() -> G(x,y); G -> series | parallel | edge.
    pub fn series_parallel() -> HRGrammar {
        validate_and_augment(
            &[(Name::new("e"), 2)],
            &[(Name::new("Z"), 0), (Name::new("G"), 2)],
            Name::new("Z"),
            vec![
                Rule {
                    lhs: lit("Z", &[]),
                    rhs: Graph::from_lits(vec![lit("G", &["x", "y"])]),
                },
                Rule {
                    lhs: lit("G", &["x", "y"]),
                    rhs: Graph::from_lits(vec![lit("G", &["x", "z"]), lit("G", &["z", "y"])]),
                },
                Rule {
                    lhs: lit("G", &["x", "y"]),
                    rhs: Graph::from_lits(vec![lit("G", &["x", "y"]), lit("G", &["x", "y"])]),
                },
                Rule {
                    lhs: lit("G", &["x", "y"]),
                    rhs: Graph::from_lits(vec![lit("e", &["x", "y"])]),
                },
            ],
        )
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use crate::graph::{graph, lit};

    #[test]
    fn augmentation_adds_wrapper() {
        let g = trees();
        assert_eq!(g.rules.len(), 4);
        assert_eq!(g.rules[g.wrapper_rule].lhs.label, wrapper_label());
        assert_eq!(g.rules[g.wrapper_rule].rhs.lits[0].label, Name::new("Z"));
        let p = persuade();
        assert_eq!(p.rules.len(), 7);
        assert_eq!(p.wrapper_rule, 6);
    }

    #[test]
    fn unproductive_nonterminal_rejected() {
        let err = validate_and_augment(
            &[(Name::new("e"), 2)],
            &[(Name::new("Z"), 0), (Name::new("T"), 1)],
            Name::new("Z"),
            vec![
                Rule {
                    lhs: lit("Z", &[]),
                    rhs: Graph::from_lits(vec![lit("T", &["x"])]),
                },
                Rule {
                    lhs: lit("T", &["y"]),
                    rhs: Graph::from_lits(vec![
                        lit("T", &["y"]),
                        lit("e", &["y", "z"]),
                        lit("T", &["z"]),
                    ]),
                },
            ],
        )
        .unwrap_err();
        match err {
            GrammarError::NotReduced { unproductive, .. } => {
                assert_eq!(unproductive, vec![Name::new("T"), Name::new("Z")]);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn unreachable_nonterminal_rejected() {
        let err = validate_and_augment(
            &[(Name::new("e"), 2)],
            &[(Name::new("Z"), 0), (Name::new("U"), 0)],
            Name::new("Z"),
            vec![
                Rule {
                    lhs: lit("Z", &[]),
                    rhs: Graph::from_lits(vec![lit("e", &["x", "y"])]),
                },
                Rule {
                    lhs: lit("U", &[]),
                    rhs: Graph::from_lits(vec![lit("e", &["x", "y"])]),
                },
            ],
        )
        .unwrap_err();
        match err {
            GrammarError::NotReduced { unreachable, .. } => {
                assert_eq!(unreachable, vec![Name::new("U")]);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn start_arity_must_be_zero() {
        let err = validate_and_augment(
            &[(Name::new("e"), 2)],
            &[(Name::new("Z"), 1)],
            Name::new("Z"),
            vec![Rule {
                lhs: lit("Z", &["x"]),
                rhs: Graph::from_lits(vec![lit("e", &["x", "y"])]),
            }],
        )
        .unwrap_err();
        assert!(matches!(err, GrammarError::StartArityNonzero { .. }));
    }

    #[test]
    fn derive_steps_follow_rightmost_discipline() {
        let g = trees();
        let z = start_graph(&g);
        let (s1, g1) = apply_rule_fresh(&g, &z, 0).unwrap();
        assert_eq!(g1, graph(&[lit("root", &["1"]), lit("T", &["1"])]));
        assert_eq!(s1.position, 0);
        let (_, g2) = apply_rule_fresh(&g, &g1, 1).unwrap();
        assert_eq!(
            g2,
            graph(&[
                lit("root", &["1"]),
                lit("T", &["1"]),
                lit("e", &["1", "2"]),
                lit("T", &["2"]),
            ])
        );
        // Replaying the recorded step on a non-rightmost position fails.
        let bad = DerivationStep {
            rule_index: 1,
            mat: Renaming::from_pairs([
                (Name::new("y"), Name::new("1")),
                (Name::new("z"), Name::new("3")),
            ])
            .unwrap(),
            position: 0,
        };
        assert!(matches!(
            derive_step(&g, &g2, &bad),
            Err(DeriveError::NotRightmost { .. })
        ));
    }

    #[test]
    fn match_clash_on_stale_fresh_node() {
        let p = persuade();
        // per(1,2,4,3) M(3,4): mapping the new node of the try-rule onto an
        // existing node must be refused.
        let host = graph(&[
            lit("per", &["1", "2", "4", "3"]),
            lit("M", &["3", "4"]),
        ]);
        let step = DerivationStep {
            rule_index: 2,
            mat: Renaming::from_pairs([
                (Name::new("r"), Name::new("3")),
                (Name::new("x"), Name::new("4")),
                (Name::new("z"), Name::new("1")),
            ])
            .unwrap(),
            position: 1,
        };
        assert_eq!(derive_step(&p, &host, &step), Err(DeriveError::MatchClash));
        let ok = DerivationStep {
            rule_index: 2,
            mat: Renaming::from_pairs([
                (Name::new("r"), Name::new("3")),
                (Name::new("x"), Name::new("4")),
                (Name::new("z"), Name::new("5")),
            ])
            .unwrap(),
            position: 1,
        };
        assert!(derive_step(&p, &host, &ok).is_ok());
    }

    #[test]
    fn small_tree_language() {
        let g = trees();
        let l1 = enumerate_language(&g, 1, 8, 100_000).unwrap();
        assert_eq!(l1.len(), 1);
        assert!(l1[0].graph.equivalent(&graph(&[lit("root", &["1"])])));
        let l2 = enumerate_language(&g, 2, 8, 100_000).unwrap();
        let mut shapes: Vec<String> = l2.iter().map(|m| format!("{}", m.graph)).collect();
        shapes.sort();
        assert_eq!(shapes, vec!["root(1)", "root(1) e(1,2)"]);
    }

    #[test]
    fn derivations_replay() {
        let g = trees();
        for m in enumerate_language(&g, 4, 10, 1_000_000).unwrap() {
            let mut form = start_graph(&g);
            for s in &m.derivation {
                form = derive_step(&g, &form, s).unwrap();
            }
            assert_eq!(form, m.graph);
        }
    }

    #[test]
    fn membership() {
        let g = trees();
        let t = graph(&[
            lit("root", &["1"]),
            lit("e", &["1", "3"]),
            lit("e", &["1", "2"]),
            lit("e", &["2", "4"]),
        ]);
        assert!(is_member(&g, &t, 1_000_000).unwrap());
        let two_roots = graph(&[lit("root", &["1"]), lit("root", &["2"])]);
        assert!(!is_member(&g, &two_roots, 1_000_000).unwrap());
    }

    #[test]
    fn bound_exceeded_is_reported() {
        let g = persuade();
        assert!(matches!(
            enumerate_language(&g, 12, 40, 10),
            Err(EnumerateError::BoundExceeded { .. })
        ));
    }
}
