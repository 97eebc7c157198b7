//! The nondeterministic characteristic finite automaton over dotted rules.
//!
//! States are dotted rules of the augmented grammar. A goto transition
//! moves the dot over one right-hand-side literal; a closure transition
//! jumps from a dot before a nonterminal to every dot-initial rule of that
//! nonterminal. Running the automaton with partial node bindings recognizes
//! exactly the viable prefixes.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use crate::grammar::HRGrammar;
use crate::graph::{Graph, Literal, Name};

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct DottedRule {
    pub rule: usize,
    pub dot: usize,
}

pub struct Ncfa {
    pub states: Vec<DottedRule>,
    /// The dotted wrapper rule with the dot at the start.
    pub q0: usize,
    /// (source state, literal the dot moves over, target state).
    pub gotos: Vec<(usize, Literal, usize)>,
    /// (source state, target dot-initial state).
    pub closures: Vec<(usize, usize)>,
}

impl Ncfa {
    pub fn state_index(&self, q: DottedRule) -> usize {
        self.states.iter().position(|s| *s == q).unwrap()
    }
}

pub fn build_ncfa(g: &HRGrammar) -> Ncfa {
    let mut states = Vec::new();
    for (ri, rule) in g.rules.iter().enumerate() {
        for dot in 0..=rule.rhs.lits.len() {
            states.push(DottedRule { rule: ri, dot });
        }
    }
    let q0 = states
        .iter()
        .position(|s| s.rule == g.wrapper_rule && s.dot == 0)
        .unwrap();
    let mut gotos = Vec::new();
    let mut closures = Vec::new();
    for (si, s) in states.iter().enumerate() {
        let rule = &g.rules[s.rule];
        if s.dot >= rule.rhs.lits.len() {
            continue;
        }
        let lit = &rule.rhs.lits[s.dot];
        let target = states
            .iter()
            .position(|t| t.rule == s.rule && t.dot == s.dot + 1)
            .unwrap();
        gotos.push((si, lit.clone(), target));
        if g.is_nonterminal(&lit.label) {
            for ri in g.rules_for(&lit.label) {
                let t0 = states
                    .iter()
                    .position(|t| t.rule == ri && t.dot == 0)
                    .unwrap();
                closures.push((si, t0));
            }
        }
    }
    Ncfa {
        states,
        q0,
        gotos,
        closures,
    }
}

type Binding = BTreeMap<Name, Name>;

/// Runs the automaton over the literal sequence of `phi` with partial node
/// bindings. A goto move may bind fresh rule nodes only to nodes that do
/// not occur in the part of `phi` consumed so far; a closure move restricts
/// the binding to the callee's left-hand-side nodes. Approval means some
/// move sequence consumes all of `phi`.
pub fn ncfa_approves(g: &HRGrammar, ncfa: &Ncfa, phi: &Graph) -> bool {
    if phi.nodes != phi.lit_nodes() {
        return false;
    }
    // consumed[i] = nodes occurring in the first i literals.
    let mut consumed: Vec<BTreeSet<Name>> = vec![BTreeSet::new()];
    for l in &phi.lits {
        let mut s = consumed.last().unwrap().clone();
        s.extend(l.nodes.iter().cloned());
        consumed.push(s);
    }
    let mut queue: VecDeque<(usize, Binding, usize)> = VecDeque::new();
    let mut seen: HashSet<(usize, Vec<(Name, Name)>, usize)> = HashSet::new();
    queue.push_back((ncfa.q0, Binding::new(), 0));
    while let Some((si, mu, pos)) = queue.pop_front() {
        if pos == phi.lits.len() {
            return true;
        }
        let key = (
            si,
            mu.iter().map(|(a, b)| (a.clone(), b.clone())).collect(),
            pos,
        );
        if !seen.insert(key) {
            continue;
        }
        let s = ncfa.states[si];
        let rule = &g.rules[s.rule];
        if s.dot < rule.rhs.lits.len() {
            let lit = &rule.rhs.lits[s.dot];
            let target = &phi.lits[pos];
            if lit.label == target.label {
                if let Some(nu) = extend_goto(lit, target, &mu, &consumed[pos]) {
                    let next = ncfa
                        .states
                        .iter()
                        .position(|t| t.rule == s.rule && t.dot == s.dot + 1)
                        .unwrap();
                    queue.push_back((next, nu, pos + 1));
                }
            }
            if g.is_nonterminal(&lit.label) {
                for ri in g.rules_for(&lit.label) {
                    let callee = &g.rules[ri];
                    let mut nu = Binding::new();
                    for (b, c) in lit.nodes.iter().zip(callee.lhs.nodes.iter()) {
                        if let Some(v) = mu.get(b) {
                            nu.insert(c.clone(), v.clone());
                        }
                    }
                    let next = ncfa
                        .states
                        .iter()
                        .position(|t| t.rule == ri && t.dot == 0)
                        .unwrap();
                    queue.push_back((next, nu, pos));
                }
            }
        }
    }
    false
}

/// Extends `mu` so the dotted literal maps onto `target`. Nodes bound by
/// `mu` must agree; newly bound nodes must be fresh for the consumed part
/// of the input and keep the binding injective.
fn extend_goto(
    lit: &Literal,
    target: &Literal,
    mu: &Binding,
    consumed: &BTreeSet<Name>,
) -> Option<Binding> {
    let mut nu = mu.clone();
    let images: BTreeSet<&Name> = mu.values().collect();
    let mut new_images: BTreeSet<Name> = BTreeSet::new();
    for (x, y) in lit.nodes.iter().zip(target.nodes.iter()) {
        match nu.get(x) {
            Some(v) => {
                if v != y {
                    return None;
                }
            }
            None => {
                if consumed.contains(y) || images.contains(y) || !new_images.insert(y.clone()) {
                    return None;
                }
                nu.insert(x.clone(), y.clone());
            }
        }
    }
    Some(nu)
}
