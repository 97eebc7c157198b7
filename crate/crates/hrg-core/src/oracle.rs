//! Reference implementations used as ground truth by the test suites.
//!
//! The naive shift-reduce parser explores every shift and reduce choice by
//! exhaustive backtracking with failure memoization. The viable-prefix
//! check decides by bounded derivation search whether a graph can appear as
//! a stack of some successful parse. Both are written for clarity, not
//! speed.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use thiserror::Error;

use crate::grammar::{wrapper_label, DerivationStep, HRGrammar};
use crate::graph::{Graph, Literal, Name, Renaming};

/// A naive parser configuration: the stack graph (mixed terminal and
/// nonterminal literals) and the graph read so far.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct NaiveConfig {
    pub stack: Graph,
    pub read: Graph,
}

impl NaiveConfig {
    pub fn initial() -> NaiveConfig {
        NaiveConfig {
            stack: Graph::empty(),
            read: Graph::empty(),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NaiveMoveError {
    #[error("shift blocked: node {node} was read earlier but is no longer on the stack")]
    ShiftBlocked { node: Name },
    #[error("stack does not end with the rule's right-hand side under the given match")]
    NoMatch,
    #[error("node {node} below the handle would be lost by the reduction")]
    SideCondition { node: Name },
}

/// Shifts one unread literal: every node of the literal that was already
/// read must still be on the stack.
pub fn naive_shift(c: &NaiveConfig, lit: &Literal) -> Result<NaiveConfig, NaiveMoveError> {
    for n in &lit.nodes {
        if c.read.nodes.contains(n) && !c.stack.nodes.contains(n) {
            return Err(NaiveMoveError::ShiftBlocked { node: n.clone() });
        }
    }
    let l = Graph::from_lit(lit.clone());
    Ok(NaiveConfig {
        stack: c.stack.concat(&l),
        read: c.read.concat(&l),
    })
}

/// Reduces the stack suffix matching the rule's right-hand side under `mu`
/// to the left-hand side literal. The part kept below the handle retains
/// exactly the stack nodes outside the handle image, so a node that only
/// lived in the handle disappears unless the left-hand side keeps it.
pub fn naive_reduce(
    g: &HRGrammar,
    c: &NaiveConfig,
    rule_index: usize,
    mu: &Renaming,
) -> Result<NaiveConfig, NaiveMoveError> {
    let rule = &g.rules[rule_index];
    let rho = rule.rhs.rename(mu).map_err(|_| NaiveMoveError::NoMatch)?;
    let n = rho.lits.len();
    if c.stack.lits.len() < n || c.stack.lits[c.stack.lits.len() - n..] != rho.lits[..] {
        return Err(NaiveMoveError::NoMatch);
    }
    if !rho.nodes.iter().all(|x| c.stack.nodes.contains(x)) {
        return Err(NaiveMoveError::NoMatch);
    }
    let alpha_lits = c.stack.lits[..c.stack.lits.len() - n].to_vec();
    let mut alpha = Graph::from_lits(alpha_lits);
    for x in &c.stack.nodes {
        if !rho.nodes.contains(x) {
            alpha.nodes.insert(x.clone());
        }
    }
    let lhs = rule.lhs.rename(mu);
    for x in alpha.nodes.intersection(&rho.nodes) {
        if !lhs.nodes.contains(x) {
            return Err(NaiveMoveError::SideCondition { node: x.clone() });
        }
    }
    Ok(NaiveConfig {
        stack: alpha.concat(&Graph::from_lit(lhs)),
        read: c.read.clone(),
    })
}

/// All (rule, match) pairs for which `naive_reduce` succeeds on the stack.
/// Rule nodes not occurring in the right-hand side literals (isolated
/// ε-rule nodes) may be matched to any stack node, so every injective
/// completion is enumerated.
pub fn reduce_candidates(g: &HRGrammar, stack: &Graph) -> Vec<(usize, Renaming)> {
    let mut out = Vec::new();
    for ri in 0..g.rules.len() {
        if ri == g.wrapper_rule {
            continue;
        }
        let rule = &g.rules[ri];
        let n = rule.rhs.lits.len();
        if stack.lits.len() < n {
            continue;
        }
        let tail = &stack.lits[stack.lits.len() - n..];
        let mut mu = Renaming::identity();
        let mut img: BTreeSet<Name> = BTreeSet::new();
        let mut ok = true;
        for (pat, lit) in rule.rhs.lits.iter().zip(tail.iter()) {
            if pat.label != lit.label {
                ok = false;
                break;
            }
            for (x, y) in pat.nodes.iter().zip(lit.nodes.iter()) {
                match mu.get(x) {
                    Some(prev) if prev == y => {}
                    Some(_) => {
                        ok = false;
                        break;
                    }
                    None => {
                        if !img.insert(y.clone()) {
                            ok = false;
                            break;
                        }
                        mu.insert(x.clone(), y.clone());
                    }
                }
            }
            if !ok {
                break;
            }
        }
        if !ok {
            continue;
        }
        let unmapped: Vec<Name> = rule
            .rhs
            .nodes
            .iter()
            .chain(rule.lhs.nodes.iter())
            .filter(|x| mu.get(x).is_none())
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let free: Vec<Name> = stack
            .nodes
            .iter()
            .filter(|y| !img.contains(*y))
            .cloned()
            .collect();
        let mut completions: Vec<Renaming> = Vec::new();
        assign_free(&unmapped, &free, &mu, &mut completions);
        // Side condition without building configurations: nodes shared
        // between the handle image and the literals below it must survive
        // on the left-hand side.
        let below: BTreeSet<&Name> = stack.lits[..stack.lits.len() - n]
            .iter()
            .flat_map(|l| l.nodes.iter())
            .collect();
        for cand in completions {
            let lhs_img: BTreeSet<Name> =
                rule.lhs.nodes.iter().map(|x| cand.apply(x)).collect();
            let ok = rule
                .rhs
                .nodes
                .iter()
                .map(|x| cand.apply(x))
                .all(|y| !below.contains(&y) || lhs_img.contains(&y));
            if ok {
                out.push((ri, cand));
            }
        }
    }
    out
}

fn assign_free(rest: &[Name], free: &[Name], mu: &Renaming, out: &mut Vec<Renaming>) {
    match rest.split_first() {
        None => out.push(mu.clone()),
        Some((x, more)) => {
            for y in free {
                if mu.iter().any(|(_, v)| v == y) {
                    continue;
                }
                let mut mu2 = mu.clone();
                mu2.insert(x.clone(), y.clone());
                assign_free(more, free, &mu2, out);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NaiveResult {
    Accept(Vec<DerivationStep>),
    Reject,
    BudgetExceeded,
}

/// Label pairs that can occur adjacently in some sentential form derivable
/// from the start symbol, plus the possible first labels. Any stack of a
/// successful parse is a prefix of a sentential form, so stacks violating
/// these are dead ends; in particular this stops ε-reduces from pumping
/// nonterminal literals forever.
pub struct AdjacencyFilter {
    pairs: BTreeSet<(Name, Name)>,
    firsts: BTreeSet<Name>,
}

impl AdjacencyFilter {
    pub fn new(g: &HRGrammar) -> AdjacencyFilter {
        let mut nullable: BTreeSet<Name> = BTreeSet::new();
        loop {
            let mut changed = false;
            for (ri, rule) in g.rules.iter().enumerate() {
                if ri == g.wrapper_rule || nullable.contains(&rule.lhs.label) {
                    continue;
                }
                if rule.rhs.lits.iter().all(|l| nullable.contains(&l.label)) {
                    nullable.insert(rule.lhs.label.clone());
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        // first_sets[A] / last_sets[A]: labels that can begin / end a literal
        // sequence derived from A, including A itself.
        let set_fix = |front: bool| -> BTreeMap<Name, BTreeSet<Name>> {
            let mut sets: BTreeMap<Name, BTreeSet<Name>> = BTreeMap::new();
            for n in g.nonterminals.keys().chain(g.terminals.keys()) {
                sets.insert(n.clone(), BTreeSet::from([n.clone()]));
            }
            loop {
                let mut changed = false;
                for (ri, rule) in g.rules.iter().enumerate() {
                    if ri == g.wrapper_rule {
                        continue;
                    }
                    let lits: Vec<&Name> = if front {
                        rule.rhs.lits.iter().map(|l| &l.label).collect()
                    } else {
                        rule.rhs.lits.iter().rev().map(|l| &l.label).collect()
                    };
                    for label in lits.iter() {
                        let add: BTreeSet<Name> = sets[*label].clone();
                        let target = sets.get_mut(&rule.lhs.label).unwrap();
                        let before = target.len();
                        target.extend(add);
                        changed |= target.len() != before;
                        if !nullable.contains(*label) {
                            break;
                        }
                    }
                }
                if !changed {
                    break;
                }
            }
            sets
        };
        let firsts_of = set_fix(true);
        let lasts_of = set_fix(false);
        let mut pairs: BTreeSet<(Name, Name)> = BTreeSet::new();
        for (ri, rule) in g.rules.iter().enumerate() {
            if ri == g.wrapper_rule {
                continue;
            }
            let labels: Vec<&Name> = rule.rhs.lits.iter().map(|l| &l.label).collect();
            for i in 0..labels.len() {
                for j in i + 1..labels.len() {
                    if labels[i + 1..j].iter().all(|l| nullable.contains(*l)) {
                        for a in &lasts_of[labels[i]] {
                            for b in &firsts_of[labels[j]] {
                                pairs.insert((a.clone(), b.clone()));
                            }
                        }
                    }
                }
            }
        }
        AdjacencyFilter {
            pairs,
            firsts: firsts_of[&g.start].clone(),
        }
    }

    /// True if `next` may follow `prev` (None = start of stack) in some
    /// sentential form.
    pub fn allows(&self, prev: Option<&Name>, next: &Name) -> bool {
        match prev {
            None => self.firsts.contains(next),
            Some(p) => self.pairs.contains(&(p.clone(), next.clone())),
        }
    }
}

/// Exhaustive backtracking parse: at each configuration tries every reduce
/// candidate and every eligible unread literal (in canonical order), with
/// failed configurations memoized. Accepting means the stack is the single
/// start literal and all input literals and nodes have been read.
pub fn naive_parse(g: &HRGrammar, input: &Graph, budget: usize) -> NaiveResult {
    naive_parse_cached(g, input, budget, &mut HashMap::new())
}

/// Like [`naive_parse`], but reuses a caller-held viability cache across
/// inputs. Cache entries are keyed by witness depth and rendered stack, so
/// one cache serves inputs of different sizes over the same grammar. Do not
/// share a cache between grammars.
pub fn naive_parse_cached(
    g: &HRGrammar,
    input: &Graph,
    budget: usize,
    viable_cache: &mut HashMap<String, bool>,
) -> NaiveResult {
    let mut lits = input.lits.clone();
    lits.sort();
    let mut search = NaiveSearch {
        g,
        adj: AdjacencyFilter::new(g),
        input_nodes: &input.nodes,
        lits: &lits,
        budget,
        viability_depth: viability_depth(g, lits.len()),
        viable: viable_cache,
        failed: HashSet::new(),
        visiting: HashSet::new(),
        reduces: Vec::new(),
        exceeded: false,
    };
    let mut unread: Vec<bool> = vec![true; lits.len()];
    let c = NaiveConfig::initial();
    if search.run(&c, &mut unread) {
        NaiveResult::Accept(search.into_derivation())
    } else if search.exceeded {
        NaiveResult::BudgetExceeded
    } else {
        NaiveResult::Reject
    }
}

/// On an accepting run the stack is at every point a prefix of a sentential
/// form of that run's own derivation, so restricting the search to viable
/// stacks loses no accepting path, provided the viability search looks deep
/// enough to find the witness derivation. When every rule other than the
/// start wrapper either emits a terminal literal or erases its left-hand
/// side outright, a derivation of an `n`-literal graph rewrites at most
/// `2 + max_rhs_nonterminals * n` nonterminal occurrences, which bounds the
/// witness depth. Returns `None` (pruning disabled) when the bound does not
/// apply.
fn viability_depth(g: &HRGrammar, input_lits: usize) -> Option<usize> {
    let mut max_nts = 0;
    for rule in &g.rules {
        if rule.lhs.label == wrapper_label() {
            continue;
        }
        let nts = rule
            .rhs
            .lits
            .iter()
            .filter(|l| g.is_nonterminal(&l.label))
            .count();
        let terminals = rule.rhs.lits.len() - nts;
        if terminals == 0 && nts > 0 {
            return None;
        }
        max_nts = max_nts.max(nts);
    }
    Some(2 + max_nts * input_lits)
}

struct NaiveSearch<'a> {
    g: &'a HRGrammar,
    adj: AdjacencyFilter,
    input_nodes: &'a BTreeSet<Name>,
    lits: &'a [Literal],
    budget: usize,
    /// Witness depth for viable-stack pruning, or `None` to disable it.
    viability_depth: Option<usize>,
    /// Verdict cache for `viable_prefix_check`, keyed by depth and stack.
    viable: &'a mut HashMap<String, bool>,
    failed: HashSet<String>,
    visiting: HashSet<String>,
    /// Reduce moves of the current search path: (rule, match, literals below
    /// the handle).
    reduces: Vec<(usize, Renaming, usize)>,
    exceeded: bool,
}

impl NaiveSearch<'_> {
    fn run(&mut self, c: &NaiveConfig, unread: &mut Vec<bool>) -> bool {
        if self.budget == 0 {
            self.exceeded = true;
            return false;
        }
        self.budget -= 1;
        if unread.iter().all(|u| !u)
            && c.stack.lits.len() == 1
            && c.stack.lits[0].label == self.g.start
            && c.read.nodes == *self.input_nodes
        {
            return true;
        }
        let stack_text = c.stack.to_string();
        let mut key = String::with_capacity(stack_text.len() + unread.len() + 1);
        key.push_str(&stack_text);
        key.push('|');
        key.extend(unread.iter().map(|u| if *u { '1' } else { '0' }));
        if self.failed.contains(&key) || !self.visiting.insert(key.clone()) {
            return false;
        }
        // A node that has been read but no longer sits on the stack can
        // never return (shifts demand read nodes be on the stack, reduces
        // add none), so an unread literal touching such a node is
        // unshiftable forever and this branch is hopeless.
        for (i, lit) in self.lits.iter().enumerate() {
            if unread[i]
                && lit
                    .nodes
                    .iter()
                    .any(|n| c.read.nodes.contains(n) && !c.stack.nodes.contains(n))
            {
                self.visiting.remove(&key);
                self.failed.insert(key);
                return false;
            }
        }
        if let Some(depth) = self.viability_depth {
            let vkey = format!("{depth}|{stack_text}");
            let ok = match self.viable.get(&vkey) {
                Some(v) => *v,
                None => {
                    let v = viable_prefix_check(self.g, &c.stack, depth);
                    self.viable.insert(vkey, v);
                    v
                }
            };
            if !ok {
                self.visiting.remove(&key);
                self.failed.insert(key);
                return false;
            }
        }
        for (ri, mu) in reduce_candidates(self.g, &c.stack) {
            let below = c.stack.lits.len() - self.g.rules[ri].rhs.lits.len();
            let prev = below.checked_sub(1).map(|i| &c.stack.lits[i].label);
            if !self.adj.allows(prev, &self.g.rules[ri].lhs.label) {
                continue;
            }
            if let Ok(next) = naive_reduce(self.g, c, ri, &mu) {
                self.reduces.push((ri, mu, below));
                if self.run(&next, unread) {
                    self.visiting.remove(&key);
                    return true;
                }
                self.reduces.pop();
            }
        }
        let top = c.stack.lits.last().map(|l| &l.label);
        let mut tried: BTreeSet<&Literal> = BTreeSet::new();
        for i in 0..self.lits.len() {
            if !unread[i] || !tried.insert(&self.lits[i]) {
                continue;
            }
            if !self.adj.allows(top, &self.lits[i].label) {
                continue;
            }
            if let Ok(next) = naive_shift(c, &self.lits[i]) {
                unread[i] = false;
                if self.run(&next, unread) {
                    self.visiting.remove(&key);
                    return true;
                }
                unread[i] = true;
            }
        }
        self.visiting.remove(&key);
        self.failed.insert(key);
        false
    }

    /// The reduce sequence of an accepted parse, reversed, is a rightmost
    /// derivation of the read graph from the start literal.
    fn into_derivation(self) -> Vec<DerivationStep> {
        self.reduces
            .into_iter()
            .rev()
            .map(|(rule_index, mat, position)| DerivationStep {
                rule_index,
                mat,
                position,
            })
            .collect()
    }
}

/// Decides by bounded search over rightmost derivations of the augmented
/// grammar whether `gamma` can occur as a prefix of `alpha · beta` for some
/// step `alpha A z  =>  alpha beta z`. Matching is up to an injective node
/// renaming, which is sound because derivations are closed under renaming.
pub fn viable_prefix_check(g: &HRGrammar, gamma: &Graph, depth: usize) -> bool {
    let k = gamma.lits.len();
    let start = Graph::from_lit(Literal::new(wrapper_label(), vec![]).unwrap());
    let mut queue: VecDeque<(Graph, usize)> = VecDeque::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    queue.push_back((start, 0));
    while let Some((form, steps)) = queue.pop_front() {
        // The part before the leftmost nonterminal never changes again; a
        // mismatch there rules out all descendants, and a full match plus
        // the node-count check certifies viability (the next rightmost step
        // exists because the grammar is reduced).
        let has_nt = g.rightmost_nt(&form).is_some();
        let stable = form
            .lits
            .iter()
            .position(|l| g.is_nonterminal(&l.label))
            .unwrap_or(form.lits.len());
        let m = stable.min(k);
        let Some(map) = forced_prefix_map(&form.lits[..m], &gamma.lits[..m]) else {
            continue;
        };
        // If the whole candidate lies in the stable part and a nonterminal
        // remains, the next rightmost step (which exists because the grammar
        // is reduced) inserts at a position past the candidate.
        if has_nt && stable >= k && count_check(gamma, &form, &map) {
            return true;
        }
        if steps >= depth {
            continue;
        }
        for ri in 0..g.rules.len() {
            if let Some((step, next)) = crate::grammar::apply_rule_fresh(g, &form, ri) {
                let end = step.position + g.rules[ri].rhs.lits.len();
                if end >= k && next.lits.len() >= k {
                    if let Some(map) = forced_prefix_map(&next.lits[..k], &gamma.lits) {
                        if count_check(gamma, &next, &map) {
                            return true;
                        }
                    }
                }
                if g.rightmost_nt(&next).is_some() && seen.insert(format!("{next}")) {
                    queue.push_back((next, steps + 1));
                }
            }
        }
    }
    false
}

/// The positional literal-by-literal unification of two equal-length
/// literal slices into an injective node map, if one exists.
fn forced_prefix_map(form: &[Literal], gamma: &[Literal]) -> Option<BTreeMap<Name, Name>> {
    if form.len() != gamma.len() {
        return None;
    }
    let mut map: BTreeMap<Name, Name> = BTreeMap::new();
    let mut img: BTreeSet<Name> = BTreeSet::new();
    for (a, b) in form.iter().zip(gamma.iter()) {
        if a.label != b.label {
            return None;
        }
        for (x, y) in a.nodes.iter().zip(b.nodes.iter()) {
            match map.get(x) {
                Some(prev) if prev == y => {}
                Some(_) => return None,
                None => {
                    if !img.insert(y.clone()) {
                        return None;
                    }
                    map.insert(x.clone(), y.clone());
                }
            }
        }
    }
    Some(map)
}

/// Checks that the extra isolated nodes of `gamma` (not hit by the literal
/// match) can be covered injectively by unmatched nodes of the form.
fn count_check(gamma: &Graph, form: &Graph, map: &BTreeMap<Name, Name>) -> bool {
    let matched_imgs: BTreeSet<&Name> = map.values().collect();
    let extra_gamma = gamma
        .nodes
        .iter()
        .filter(|n| !matched_imgs.contains(*n))
        .count();
    let free_form = form.nodes.iter().filter(|n| !map.contains_key(*n)).count();
    extra_gamma <= free_form
}
