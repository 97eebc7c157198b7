//! Static parser analysis over the deterministic automaton: triggers,
//! Follow and Follow* pseudo-literal sets, the precedes relation, conflict
//! detection, trigger ordering, and the free-edge-choice check.
//!
//! Follow(Q,t) abstracts the first literal processed in any successful
//! continuation after trigger t fires in state Q; Follow*(Q,t) abstracts
//! every literal processed eventually. Both are least fixpoints over the
//! automaton. Slots are state parameters when the node is tracked by the
//! binding, Bullet when it has been read but is no longer tracked, and Dash
//! when it is unread at decision time.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::dcfa::{Dcfa, Item};
use crate::grammar::HRGrammar;
use crate::graph::{Name, PseudoLiteral, Slot};

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Trigger {
    /// A transition with a terminal label (index into `dcfa.transitions`).
    Shift { transition: usize },
    /// An item with the dot at the end of the right-hand side.
    Reduce { item: Item },
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum FollowEntry {
    Pseudo(PseudoLiteral),
    /// The end marker $: some continuation performs no further shift.
    End,
}

pub type FollowSet = BTreeSet<FollowEntry>;

#[derive(Clone, Debug)]
pub struct ConflictSet {
    pub state: usize,
    /// Trigger indices forming one elementary cycle of the precedes
    /// relation.
    pub triggers: Vec<usize>,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("state {state} has conflicting triggers")]
pub struct ConflictPresent {
    pub state: usize,
}

#[derive(Clone, Debug)]
pub struct AnalysisTables {
    /// Per state: shift triggers in transition order, then reduce items.
    pub triggers: Vec<Vec<Trigger>>,
    pub follow: Vec<Vec<FollowSet>>,
    pub follow_star: Vec<Vec<FollowSet>>,
    pub conflicts: Vec<ConflictSet>,
    /// Per state: trigger indices in decision order. For conflicted states
    /// this is the lenient order used only by diagnostics and the dynamic
    /// free-edge-choice refutation.
    pub order: Vec<Vec<usize>>,
}

impl AnalysisTables {
    pub fn conflict_free(&self) -> bool {
        self.conflicts.is_empty()
    }
}

/// Runs the complete static analysis.
pub fn analyze(g: &HRGrammar, dcfa: &Dcfa) -> AnalysisTables {
    let triggers = state_triggers(g, dcfa);
    let follow = compute_follow(g, dcfa, &triggers);
    let follow_star = compute_follow_star(g, dcfa, &triggers, &follow);
    let conflicts = find_conflicts(dcfa, &triggers, &follow, &follow_star);
    let conflicted: BTreeSet<usize> = conflicts.iter().map(|c| c.state).collect();
    let mut order = Vec::new();
    for s in 0..dcfa.states.len() {
        if conflicted.contains(&s) {
            order.push(lenient_order(&triggers[s], &follow[&s], &follow_star[&s]));
        } else {
            order.push(
                order_triggers(s, &triggers[s], &follow[&s], &follow_star[&s])
                    .expect("conflict-free state must order"),
            );
        }
    }
    AnalysisTables {
        triggers,
        follow: (0..dcfa.states.len()).map(|s| follow[&s].clone()).collect(),
        follow_star: (0..dcfa.states.len())
            .map(|s| follow_star[&s].clone())
            .collect(),
        conflicts,
        order,
    }
}

/// The triggers of every state: terminal transitions and reduce items.
/// Nonterminal transitions never cause parser decisions (they are taken as
/// the second half of a reduce). Shift triggers are listed by the earliest
/// grammar rule whose dotted item feeds the transition, so that ties left
/// open by the precedes relation default to rule order.
pub fn state_triggers(g: &HRGrammar, dcfa: &Dcfa) -> Vec<Vec<Trigger>> {
    let mut out = Vec::new();
    for s in &dcfa.states {
        let mut shifts = Vec::new();
        for (ti, t) in dcfa.transitions.iter().enumerate() {
            if t.src == s.id && g.is_terminal(&t.lit.label) {
                let rank = s
                    .items
                    .iter()
                    .filter(|it| {
                        let rhs = &g.rules[it.rule].rhs.lits;
                        it.dot < rhs.len() && rhs[it.dot].label == t.lit.label && {
                            rhs[it.dot].nodes.iter().zip(t.lit.nodes.iter()).all(
                                |(x, y)| match it.sigma.get(x) {
                                    Some(p) => p == y,
                                    None => !s.params.contains(y),
                                },
                            )
                        }
                    })
                    .map(|it| (it.rule, it.dot))
                    .min()
                    .unwrap_or((usize::MAX, usize::MAX));
                shifts.push((rank, ti));
            }
        }
        shifts.sort();
        let mut ts: Vec<Trigger> = shifts
            .into_iter()
            .map(|(_, ti)| Trigger::Shift { transition: ti })
            .collect();
        for it in &s.items {
            if it.dot == g.rules[it.rule].rhs.lits.len() {
                ts.push(Trigger::Reduce { item: it.clone() });
            }
        }
        out.push(ts);
    }
    out
}

/// The pseudo-literal of a transition as seen from its source state:
/// source parameters stay, nodes first visited by the literal become Dash.
pub fn transition_pseudo(dcfa: &Dcfa, ti: usize) -> PseudoLiteral {
    let t = &dcfa.transitions[ti];
    let params = &dcfa.states[t.src].params;
    PseudoLiteral::new(
        t.lit.label.clone(),
        t.lit
            .nodes
            .iter()
            .map(|n| {
                if params.contains(n) {
                    Slot::Node(n.clone())
                } else {
                    Slot::Dash
                }
            })
            .collect(),
    )
}

/// A place a reduce returns to: state R holding the dot-initial item of the
/// reduced rule, R's transition over the rule's left-hand-side literal, and
/// the correspondence from R's parameters to the parameters of the reducing
/// state that still track the same node.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct ReturnContext {
    pub origin: usize,
    pub transition: usize,
    pub carry: BTreeMap<Name, Name>,
}

/// Walks the lineage of a reduce item backward over the automaton: one
/// incoming transition per right-hand-side literal, re-deriving the
/// predecessor items, down to the dot-initial closure items. For each
/// origin state the unique transition over the instantiated left-hand-side
/// literal is returned.
pub fn return_contexts(g: &HRGrammar, dcfa: &Dcfa, state: usize, item: &Item) -> Vec<ReturnContext> {
    let rule = &g.rules[item.rule];
    let identity: BTreeMap<Name, Name> = dcfa.states[state]
        .params
        .iter()
        .map(|p| (p.clone(), p.clone()))
        .collect();
    let mut frontier: BTreeSet<(usize, Item, BTreeMap<Name, Name>)> =
        BTreeSet::from([(state, item.clone(), identity)]);
    for back in 0..rule.rhs.lits.len() {
        let d = rule.rhs.lits.len() - back;
        let lit = &rule.rhs.lits[d - 1];
        let mut prev = BTreeSet::new();
        for (s, it, carry) in &frontier {
            for t in dcfa.transitions.iter().filter(|t| t.dst == *s) {
                if t.lit.label != lit.label {
                    continue;
                }
                // The dotted literal, pushed through the transition map,
                // must be the transition literal itself.
                let spelled = lit
                    .nodes
                    .iter()
                    .zip(t.lit.nodes.iter())
                    .all(|(x, y)| t.mu.get(&it.sigma[x]) == Some(y));
                if !spelled {
                    continue;
                }
                let pushed: BTreeMap<Name, Name> = it
                    .sigma
                    .iter()
                    .map(|(x, p)| (x.clone(), t.mu[p].clone()))
                    .collect();
                for pit in &dcfa.states[t.src].items {
                    if pit.rule != item.rule || pit.dot != d - 1 {
                        continue;
                    }
                    let dom_ok = {
                        let mut dom: BTreeSet<&Name> = pit.sigma.keys().collect();
                        dom.extend(lit.nodes.iter());
                        dom == pushed.keys().collect()
                    };
                    if dom_ok
                        && pit.sigma.iter().all(|(x, p)| pushed.get(x) == Some(p))
                    {
                        // Compose the parameter correspondence one step
                        // further back: a predecessor parameter stays
                        // tracked if some parameter of the current state
                        // reads back to it.
                        let carried: BTreeMap<Name, Name> = dcfa.states[t.src]
                            .params
                            .iter()
                            .filter_map(|p| {
                                dcfa.states[*s]
                                    .params
                                    .iter()
                                    .find(|q| t.mu.get(*q) == Some(p))
                                    .and_then(|q| carry.get(q))
                                    .map(|end| (p.clone(), end.clone()))
                            })
                            .collect();
                        prev.insert((t.src, pit.clone(), carried));
                    }
                }
            }
        }
        frontier = prev;
    }
    let mut out: BTreeSet<ReturnContext> = BTreeSet::new();
    for (r, it0, carry) in &frontier {
        let params = &dcfa.states[*r].params;
        for (ti, t) in dcfa.transitions.iter().enumerate() {
            if t.src != *r || t.lit.label != rule.lhs.label {
                continue;
            }
            let matches = rule
                .lhs
                .nodes
                .iter()
                .zip(t.lit.nodes.iter())
                .all(|(x, y)| match it0.sigma.get(x) {
                    Some(p) => p == y,
                    None => !params.contains(y),
                });
            if matches {
                out.insert(ReturnContext {
                    origin: *r,
                    transition: ti,
                    carry: carry.clone(),
                });
            }
        }
    }
    out.into_iter().collect()
}

/// Translates a follow entry of the state after the return transition into
/// the parameter space of the reducing state. A parameter visible through
/// the left-hand-side literal becomes the reduce item's binding of the
/// matching rule node; a parameter of the origin state still tracked by the
/// reducing state follows the lineage correspondence; anything else denotes
/// a node that has been read but is no longer tracked (Bullet).
fn translate_return(
    g: &HRGrammar,
    dcfa: &Dcfa,
    ctx: &ReturnContext,
    item: &Item,
    entry: &FollowEntry,
) -> FollowEntry {
    let FollowEntry::Pseudo(pl) = entry else {
        return FollowEntry::End;
    };
    let t = &dcfa.transitions[ctx.transition];
    let lhs = &g.rules[item.rule].lhs;
    let slots = pl
        .slots
        .iter()
        .map(|s| match s {
            Slot::Node(p) => {
                let x = &t.mu[p];
                match t.lit.nodes.iter().position(|n| n == x) {
                    Some(i) => Slot::Node(item.sigma[&lhs.nodes[i]].clone()),
                    None => match ctx.carry.get(x) {
                        Some(q) => Slot::Node(q.clone()),
                        None => Slot::Bullet,
                    },
                }
            }
            other => other.clone(),
        })
        .collect();
    FollowEntry::Pseudo(PseudoLiteral::new(pl.label.clone(), slots))
}

/// Translates a follow entry of a transition's target state back to the
/// source: target parameters that read back to source parameters stay;
/// those bound to nodes first visited by the transition literal are unread
/// at decision time (Dash).
fn translate_shift(dcfa: &Dcfa, ti: usize, entry: &FollowEntry) -> FollowEntry {
    let FollowEntry::Pseudo(pl) = entry else {
        return FollowEntry::End;
    };
    let t = &dcfa.transitions[ti];
    let src_params = &dcfa.states[t.src].params;
    let slots = pl
        .slots
        .iter()
        .map(|s| match s {
            Slot::Node(p) => {
                let x = &t.mu[p];
                if src_params.contains(x) {
                    Slot::Node(x.clone())
                } else {
                    Slot::Dash
                }
            }
            other => other.clone(),
        })
        .collect();
    FollowEntry::Pseudo(PseudoLiteral::new(pl.label.clone(), slots))
}

type StateSets = BTreeMap<usize, Vec<FollowSet>>;

/// Least fixpoint of the Follow sets: a shift trigger contributes its own
/// pseudo-literal; a reduce trigger collects, over every return context,
/// the Follow sets of the triggers of the state after the return
/// transition, translated into its own parameter space. The wrapper reduce
/// item gets the end marker.
pub fn compute_follow(g: &HRGrammar, dcfa: &Dcfa, triggers: &[Vec<Trigger>]) -> StateSets {
    let contexts = all_contexts(g, dcfa, triggers);
    let mut sets: StateSets = init_sets(dcfa, triggers);
    loop {
        let mut changed = false;
        for (s, ts) in triggers.iter().enumerate() {
            for (i, tr) in ts.iter().enumerate() {
                let new: FollowSet = match tr {
                    Trigger::Shift { transition } => {
                        BTreeSet::from([FollowEntry::Pseudo(transition_pseudo(dcfa, *transition))])
                    }
                    Trigger::Reduce { item } => {
                        if item.rule == g.wrapper_rule {
                            BTreeSet::from([FollowEntry::End])
                        } else {
                            let mut acc = FollowSet::new();
                            for ctx in &contexts[&(s, i)] {
                                let dst = dcfa.transitions[ctx.transition].dst;
                                for (j, _) in triggers[dst].iter().enumerate() {
                                    for e in &sets[&dst][j] {
                                        acc.insert(translate_return(g, dcfa, ctx, item, e));
                                    }
                                }
                            }
                            acc
                        }
                    }
                };
                if new != sets[&s][i] {
                    sets.get_mut(&s).unwrap()[i] = new;
                    changed = true;
                }
            }
        }
        if !changed {
            return sets;
        }
    }
}

/// Least fixpoint of the Follow* sets. A shift trigger contributes its own
/// pseudo-literal plus, translated back through the transition, whatever
/// can be processed once the target state returns, i.e. the Follow* sets
/// of the target's reduce triggers; the end marker is dropped because the
/// continuation did shift. A reduce trigger translates everything
/// processed after the return.
pub fn compute_follow_star(
    g: &HRGrammar,
    dcfa: &Dcfa,
    triggers: &[Vec<Trigger>],
    _follow: &StateSets,
) -> StateSets {
    let contexts = all_contexts(g, dcfa, triggers);
    let mut sets: StateSets = init_sets(dcfa, triggers);
    let any = |sets: &StateSets, s: usize| -> FollowSet {
        sets[&s].iter().flatten().cloned().collect()
    };
    let returns = |sets: &StateSets, s: usize| -> FollowSet {
        triggers[s]
            .iter()
            .zip(sets[&s].iter())
            .filter(|(t, _)| matches!(t, Trigger::Reduce { .. }))
            .flat_map(|(_, set)| set.iter().cloned())
            .collect()
    };
    loop {
        let mut changed = false;
        for (s, ts) in triggers.iter().enumerate() {
            for (i, tr) in ts.iter().enumerate() {
                let new: FollowSet = match tr {
                    Trigger::Shift { transition } => {
                        let t = &dcfa.transitions[*transition];
                        let mut acc =
                            BTreeSet::from([FollowEntry::Pseudo(transition_pseudo(dcfa, *transition))]);
                        for e in returns(&sets, t.dst) {
                            if e != FollowEntry::End {
                                acc.insert(translate_shift(dcfa, *transition, &e));
                            }
                        }
                        acc
                    }
                    Trigger::Reduce { item } => {
                        if item.rule == g.wrapper_rule {
                            BTreeSet::from([FollowEntry::End])
                        } else {
                            let mut acc = FollowSet::new();
                            for ctx in &contexts[&(s, i)] {
                                let dst = dcfa.transitions[ctx.transition].dst;
                                for e in any(&sets, dst) {
                                    acc.insert(translate_return(g, dcfa, ctx, item, &e));
                                }
                            }
                            acc
                        }
                    }
                };
                if new != sets[&s][i] {
                    sets.get_mut(&s).unwrap()[i] = new;
                    changed = true;
                }
            }
        }
        if !changed {
            return sets;
        }
    }
}

fn init_sets(dcfa: &Dcfa, triggers: &[Vec<Trigger>]) -> StateSets {
    (0..dcfa.states.len())
        .map(|s| (s, vec![FollowSet::new(); triggers[s].len()]))
        .collect()
}

fn all_contexts(
    g: &HRGrammar,
    dcfa: &Dcfa,
    triggers: &[Vec<Trigger>],
) -> BTreeMap<(usize, usize), Vec<ReturnContext>> {
    let mut out = BTreeMap::new();
    for (s, ts) in triggers.iter().enumerate() {
        for (i, tr) in ts.iter().enumerate() {
            if let Trigger::Reduce { item } = tr {
                if item.rule != g.wrapper_rule {
                    out.insert((s, i), return_contexts(g, dcfa, s, item));
                }
            } else {
                out.insert((s, i), Vec::new());
            }
        }
    }
    out
}

/// The precedes relation of one state: t precedes t' when some literal
/// processed eventually after t could also be the first literal after t'.
pub fn precedes_edges(
    triggers: &[Trigger],
    follow: &[FollowSet],
    follow_star: &[FollowSet],
) -> Vec<(usize, usize)> {
    let n = triggers.len();
    let mut edges = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a != b && follow_star[a].intersection(&follow[b]).next().is_some() {
                edges.push((a, b));
            }
        }
    }
    edges
}

/// Every elementary cycle of every state's precedes digraph, reported as a
/// conflicting trigger set.
pub fn find_conflicts(
    dcfa: &Dcfa,
    triggers: &[Vec<Trigger>],
    follow: &StateSets,
    follow_star: &StateSets,
) -> Vec<ConflictSet> {
    let mut out = Vec::new();
    for s in 0..dcfa.states.len() {
        let edges = precedes_edges(&triggers[s], &follow[&s], &follow_star[&s]);
        for cycle in elementary_cycles(triggers[s].len(), &edges) {
            out.push(ConflictSet {
                state: s,
                triggers: cycle,
            });
        }
    }
    out
}

/// Enumerates elementary cycles by DFS from each root, visiting only
/// vertices at least the root, so each cycle is found exactly once
/// (rooted at its smallest vertex).
fn elementary_cycles(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let succ = |v: usize| edges.iter().filter(move |(a, _)| *a == v).map(|(_, b)| *b);
    let mut out = Vec::new();
    for root in 0..n {
        let mut path = vec![root];
        let mut on_path = vec![false; n];
        on_path[root] = true;
        dfs_cycles(root, root, &mut path, &mut on_path, &succ, &mut out);
    }
    out
}

fn dfs_cycles<S, I>(
    root: usize,
    v: usize,
    path: &mut Vec<usize>,
    on_path: &mut Vec<bool>,
    succ: &S,
    out: &mut Vec<Vec<usize>>,
) where
    S: Fn(usize) -> I,
    I: Iterator<Item = usize>,
{
    for w in succ(v) {
        if w == root {
            out.push(path.clone());
        } else if w > root && !on_path[w] {
            on_path[w] = true;
            path.push(w);
            dfs_cycles(root, w, path, on_path, succ, out);
            path.pop();
            on_path[w] = false;
        }
    }
}

/// Topological order of the precedes digraph with smallest-index
/// tie-breaks. The resulting sequence satisfies
/// Follow(t_i) ∩ Follow*(t_j) = ∅ for i < j.
pub fn order_triggers(
    state: usize,
    triggers: &[Trigger],
    follow: &[FollowSet],
    follow_star: &[FollowSet],
) -> Result<Vec<usize>, ConflictPresent> {
    let n = triggers.len();
    let edges = precedes_edges(triggers, follow, follow_star);
    let mut indeg = vec![0usize; n];
    for (_, b) in &edges {
        indeg[*b] += 1;
    }
    let mut order = Vec::new();
    let mut done = vec![false; n];
    while order.len() < n {
        let Some(next) = (0..n).find(|&v| !done[v] && indeg[v] == 0) else {
            return Err(ConflictPresent { state });
        };
        done[next] = true;
        order.push(next);
        for (a, b) in &edges {
            if *a == next {
                indeg[*b] -= 1;
            }
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            debug_assert!(
                follow[order[i]]
                    .intersection(&follow_star[order[j]])
                    .next()
                    .is_none(),
                "trigger order of state {state} violates the disjointness property"
            );
        }
    }
    Ok(order)
}

/// A best-effort order for conflicted states: condense strongly connected
/// components, order the condensation topologically, and list each
/// component's triggers by index. Used only for diagnostics and the
/// dynamic free-edge-choice refutation.
pub fn lenient_order(
    triggers: &[Trigger],
    follow: &[FollowSet],
    follow_star: &[FollowSet],
) -> Vec<usize> {
    let n = triggers.len();
    let edges = precedes_edges(triggers, follow, follow_star);
    // Repeatedly peel the set of vertices whose remaining predecessors are
    // all inside their own strongly connected component.
    let mut remaining: BTreeSet<usize> = (0..n).collect();
    let mut order = Vec::new();
    while !remaining.is_empty() {
        let reach = |from: usize| -> BTreeSet<usize> {
            let mut seen = BTreeSet::from([from]);
            let mut stack = vec![from];
            while let Some(v) = stack.pop() {
                for (a, b) in &edges {
                    if *a == v && remaining.contains(b) && seen.insert(*b) {
                        stack.push(*b);
                    }
                }
            }
            seen
        };
        let mut picked = None;
        for &v in &remaining {
            let fwd = reach(v);
            let scc: BTreeSet<usize> = fwd
                .iter()
                .copied()
                .filter(|&w| reach(w).contains(&v))
                .collect();
            let has_outside_pred = edges.iter().any(|(a, b)| {
                remaining.contains(a) && scc.contains(b) && !scc.contains(a)
            });
            if !has_outside_pred {
                picked = Some(scc);
                break;
            }
        }
        let scc = picked.unwrap_or_else(|| remaining.clone());
        for v in &scc {
            order.push(*v);
            remaining.remove(v);
        }
    }
    order
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FecVerdict {
    Holds,
    Assumed,
    Refuted(String),
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FecMode {
    Static,
    Dynamic,
    Assume,
}

#[derive(Clone, Copy, Debug)]
pub struct FecOptions {
    pub max_lits: usize,
    pub max_nodes: usize,
    pub enumeration_cap: usize,
    pub search_budget: usize,
}

impl Default for FecOptions {
    fn default() -> FecOptions {
        FecOptions {
            max_lits: 5,
            max_nodes: 10,
            enumeration_cap: 500_000,
            search_budget: 2_000_000,
        }
    }
}

/// Checks the free-edge-choice property. Static mode is conservative: it
/// answers Holds only when no Bullet slot occurs anywhere and the bounded
/// simulation never sees two distinct unread literals fitting the same
/// entry; otherwise Unknown. Dynamic mode tests the usefulness clauses on
/// every automaton-reachable configuration of every enumerated language
/// member and reports a witness on refutation.
pub fn check_fec(
    g: &HRGrammar,
    dcfa: &Dcfa,
    tables: &AnalysisTables,
    mode: FecMode,
    opts: FecOptions,
) -> FecVerdict {
    match mode {
        FecMode::Assume => FecVerdict::Assumed,
        FecMode::Dynamic => crate::runtime::fec_dynamic(g, dcfa, tables, opts),
        FecMode::Static => {
            let bullet_free = tables.follow.iter().flatten().flatten().all(|e| match e {
                FollowEntry::Pseudo(pl) => pl.slots.iter().all(|s| *s != Slot::Bullet),
                FollowEntry::End => true,
            });
            if !bullet_free {
                return FecVerdict::Unknown;
            }
            if crate::runtime::fec_unique_fit(g, dcfa, tables, opts) {
                FecVerdict::Holds
            } else {
                FecVerdict::Unknown
            }
        }
    }
}
