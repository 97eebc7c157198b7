//! The automaton-assisted shift-reduce parser, the predictive parse loop,
//! and the exhaustive configuration search used by tests and the dynamic
//! free-edge-choice check.
//!
//! A parse stack alternates concrete states (state id plus parameter
//! binding) with the literals that moved between them. Shifting consumes an
//! unread input literal; reducing pops one literal per right-hand-side
//! literal of the completed rule and follows the nonterminal transition
//! from the exposed state. The predictive loop never backtracks: each step
//! asks SelectTrigger which trigger fires and, for shifts, which unread
//! literal to read.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use thiserror::Error;

use crate::analysis::{
    AnalysisTables, FecOptions, FecVerdict, FollowEntry, Trigger,
};
use crate::dcfa::{Dcfa, Item, TauBinding};
use crate::grammar::{enumerate_language, DerivationStep, HRGrammar};
use crate::graph::{Graph, Literal, Name, PseudoLiteral, Renaming, Slot};

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ConcreteState {
    pub state: usize,
    pub tau: TauBinding,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MoveError {
    #[error("no transition of state {state} matches the literal")]
    NoTransition { state: usize },
    #[error("node {node} was read earlier and is no longer on the stack")]
    NodeReuse { node: Name },
    #[error("state {state} has no completed item for the requested rule")]
    NoReduceItem { state: usize },
    #[error("no nonterminal transition from state {state} after the reduce")]
    NoGotoAfterReduce { state: usize },
    #[error("left-hand-side node {node} has no binding at reduce time")]
    UnboundReduceNode { node: Name },
}

/// Finds the unique transition of `state` matching `lit` under `tau`.
/// Parameter slots must agree with the binding; slots for first-visited
/// nodes may only take nodes for which `blocked` is false, injectively.
pub fn find_transition(
    dcfa: &Dcfa,
    state: usize,
    tau: &TauBinding,
    lit: &Literal,
    blocked: &dyn Fn(&Name) -> bool,
) -> Option<(usize, usize, TauBinding)> {
    let src = &dcfa.states[state];
    let taken: BTreeSet<&Name> = tau.values().collect();
    let mut found = None;
    for (ti, t) in dcfa.transitions.iter().enumerate() {
        if t.src != state || t.lit.label != lit.label {
            continue;
        }
        // Fresh bindings extend tau; the few pairs per literal make a
        // small vector cheaper than cloning the whole binding.
        let mut fresh: Vec<(&Name, &Name)> = Vec::new();
        let mut ok = true;
        for (p, y) in t.lit.nodes.iter().zip(lit.nodes.iter()) {
            if src.params.contains(p) {
                if tau.get(p) != Some(y) {
                    ok = false;
                    break;
                }
            } else {
                if blocked(y) || taken.contains(y) || fresh.iter().any(|(_, v)| *v == y) {
                    ok = false;
                    break;
                }
                if let Some(slot) = fresh.iter_mut().find(|(q, _)| *q == p) {
                    slot.1 = y;
                } else {
                    fresh.push((p, y));
                }
            }
        }
        if !ok {
            continue;
        }
        let nu = |x: &Name| -> &Name {
            fresh
                .iter()
                .find(|(q, _)| *q == x)
                .map(|(_, v)| *v)
                .unwrap_or_else(|| &tau[x])
        };
        let tau2: TauBinding = dcfa.states[t.dst]
            .params
            .iter()
            .map(|q| (q.clone(), nu(&t.mu[q]).clone()))
            .collect();
        debug_assert!(
            found.is_none(),
            "two transitions of state {state} match one literal"
        );
        found = Some((ti, t.dst, tau2));
        if !cfg!(debug_assertions) {
            break;
        }
    }
    found
}

/// A live parser configuration with incremental stack-node bookkeeping.
#[derive(Clone, Debug)]
pub struct AsrConfig {
    pub states: Vec<ConcreteState>,
    pub lits: Vec<Literal>,
    pub read_nodes: BTreeSet<Name>,
    stack_count: HashMap<Name, usize>,
}

impl AsrConfig {
    pub fn initial(dcfa: &Dcfa) -> AsrConfig {
        AsrConfig {
            states: vec![ConcreteState {
                state: dcfa.initial,
                tau: TauBinding::new(),
            }],
            lits: Vec::new(),
            read_nodes: BTreeSet::new(),
            stack_count: HashMap::new(),
        }
    }

    pub fn top(&self) -> &ConcreteState {
        self.states.last().unwrap()
    }

    pub fn stack_graph(&self) -> Graph {
        Graph::from_lits(self.lits.clone())
    }

    pub fn on_stack(&self, n: &Name) -> bool {
        self.stack_count.get(n).copied().unwrap_or(0) > 0
    }

    fn push_lit(&mut self, lit: Literal, next: ConcreteState) {
        for n in &lit.nodes {
            *self.stack_count.entry(n.clone()).or_insert(0) += 1;
        }
        self.lits.push(lit);
        self.states.push(next);
    }

    fn pop_lits(&mut self, k: usize) {
        for _ in 0..k {
            let lit = self.lits.pop().unwrap();
            self.states.pop();
            for n in &lit.nodes {
                *self.stack_count.get_mut(n).unwrap() -= 1;
            }
        }
    }
}

/// Shifts one unread literal: nodes read earlier must still be on the
/// stack, and the top state must have a matching transition whose
/// first-visited slots take unread nodes.
pub fn asr_shift(dcfa: &Dcfa, c: &mut AsrConfig, lit: &Literal) -> Result<usize, MoveError> {
    for n in &lit.nodes {
        if c.read_nodes.contains(n) && !c.on_stack(n) {
            return Err(MoveError::NodeReuse { node: n.clone() });
        }
    }
    let top = c.top();
    let read = &c.read_nodes;
    let (ti, dst, tau2) = find_transition(dcfa, top.state, &top.tau, lit, &|n| read.contains(n))
        .ok_or(MoveError::NoTransition { state: top.state })?;
    c.read_nodes.extend(lit.nodes.iter().cloned());
    c.push_lit(lit.clone(), ConcreteState { state: dst, tau: tau2 });
    Ok(ti)
}

/// One recorded reduce, convertible into a derivation step.
#[derive(Clone, Debug)]
pub struct ReduceRecord {
    pub rule_index: usize,
    pub mat: Renaming,
    /// Stack literals below the handle, which equals the literal position
    /// of the reduced nonterminal in the corresponding sentential form.
    pub position: usize,
}

/// Reduces by a completed item of the top state: pops one stack literal
/// per right-hand-side literal, instantiates the left-hand side through
/// the item binding, and follows the nonterminal transition from the
/// exposed state. First-visited slots of that transition may only take
/// nodes no longer on the remaining stack.
pub fn asr_reduce(
    g: &HRGrammar,
    dcfa: &Dcfa,
    c: &mut AsrConfig,
    item: &Item,
) -> Result<ReduceRecord, MoveError> {
    let top = c.top().clone();
    let rule = &g.rules[item.rule];
    let k = rule.rhs.lits.len();
    if item.dot != k || !dcfa.states[top.state].items.contains(item) || c.lits.len() < k {
        return Err(MoveError::NoReduceItem { state: top.state });
    }
    let mut mu = Renaming::identity();
    for (x, p) in &item.sigma {
        mu.insert(x.clone(), top.tau[p].clone());
    }
    for n in &rule.lhs.nodes {
        if mu.get(n).is_none() {
            return Err(MoveError::UnboundReduceNode { node: n.clone() });
        }
    }
    let lhs_lit = rule.lhs.rename(&mu);
    // Occurrence counts of the nodes inside the handle, to judge which
    // nodes remain on the stack after popping.
    let mut popped: HashMap<&Name, usize> = HashMap::new();
    for lit in &c.lits[c.lits.len() - k..] {
        for n in &lit.nodes {
            *popped.entry(n).or_insert(0) += 1;
        }
    }
    let exposed = &c.states[c.states.len() - 1 - k];
    let still_on_stack = |n: &Name| {
        c.stack_count.get(n).copied().unwrap_or(0) > popped.get(n).copied().unwrap_or(0)
    };
    let (_, dst, tau2) = find_transition(dcfa, exposed.state, &exposed.tau, &lhs_lit, &|n| {
        still_on_stack(n)
    })
    .ok_or(MoveError::NoGotoAfterReduce {
        state: exposed.state,
    })?;
    let record = ReduceRecord {
        rule_index: item.rule,
        mat: mu,
        position: c.lits.len() - k,
    };
    c.pop_lits(k);
    c.push_lit(lhs_lit, ConcreteState { state: dst, tau: tau2 });
    Ok(record)
}

/// Decision-time abstraction of a literal: each node becomes its parameter
/// when the binding tracks it, Dash when unread, Bullet when read but no
/// longer tracked.
pub fn abstract_lit(lit: &Literal, tau: &TauBinding, read: &BTreeSet<Name>) -> PseudoLiteral {
    let inv: BTreeMap<&Name, &Name> = tau.iter().map(|(p, n)| (n, p)).collect();
    let slots = lit
        .nodes
        .iter()
        .map(|n| match inv.get(n) {
            Some(p) => Slot::Node((*p).clone()),
            None if read.contains(n) => Slot::Bullet,
            None => Slot::Dash,
        })
        .collect();
    PseudoLiteral::new(lit.label.clone(), slots)
}

/// Whether a literal fits a follow pseudo-literal: labels equal and every
/// parameter slot agrees with the binding. Dash and Bullet slots are
/// unconstrained.
pub fn fits(lit: &Literal, pseudo: &PseudoLiteral, tau: &TauBinding) -> bool {
    lit.label == pseudo.label
        && lit.nodes.len() == pseudo.slots.len()
        && lit.nodes.iter().zip(pseudo.slots.iter()).all(|(n, s)| match s {
            Slot::Node(p) => tau.get(p) == Some(n),
            Slot::Dash | Slot::Bullet => true,
        })
}

/// Associative views over the unread input literals: for every label and
/// every subset of anchored slot positions, the set of literal ids carrying
/// the given nodes at those positions. Ids follow the canonical literal
/// order, so the smallest id in a view is the canonically least fit.
pub struct EdgeIndex {
    lits: Vec<Literal>,
    /// Distinct labels and node names interned to dense ids in sort order
    /// (`names` inverts the map); per literal, its label id and the span
    /// of its node ids in `node_pool`, so the parse loop runs on flat
    /// arrays.
    names: Vec<Name>,
    labels: Vec<Name>,
    lit_labels: Vec<u8>,
    node_pool: Vec<u32>,
    node_span: Vec<u32>,
    /// Ascending literal ids per label.
    label_lits: Vec<Vec<u32>>,
    /// Per-pattern subindexes, materialized on first query. Only anchor
    /// patterns appearing in follow sets are ever queried, a handful per
    /// grammar, so building all node-subset views up front would waste
    /// nearly all of the work.
    patterns: std::cell::RefCell<Vec<((u8, u32), SubIndex)>>,
    read: Vec<bool>,
    unread: usize,
}

/// The views of one (label, anchored-position-set) pattern: literal ids in
/// ascending order, grouped by anchor tuple in one pool. Each slot holds
/// pool start, length, and a skip cursor; queries move cursors past read
/// ids, so every pool position is passed at most once per parse.
struct SubIndex {
    slots: Vec<[u32; 3]>,
    pool: Vec<u32>,
    /// Single-anchor patterns index `slots` directly by the anchor's node
    /// id; other patterns go through this map.
    by_tuple: HashMap<Vec<u32>, u32>,
    single: bool,
}

impl EdgeIndex {
    /// Builds the index, bringing the literals into canonical order first.
    /// The distinct names are sorted once and literals are then compared by
    /// integer name ranks, which doubles as the interning pass.
    pub fn build(mut lits: Vec<Literal>) -> EdgeIndex {
        const WIDTH: usize = 8;
        let mut name_refs: Vec<&Name> = Vec::with_capacity(lits.len() * 3);
        for l in &lits {
            name_refs.push(&l.label);
            name_refs.extend(l.nodes.iter());
        }
        name_refs.sort_unstable();
        name_refs.dedup();
        let names: Vec<Name> = name_refs.iter().map(|n| (*n).clone()).collect();
        let id_of: HashMap<&Name, u32> = name_refs.iter().copied().zip(0u32..).collect();
        let mut node_pool: Vec<u32> = Vec::new();
        let mut node_span: Vec<u32> = Vec::with_capacity(lits.len() + 1);
        node_span.push(0);
        if lits.iter().any(|l| l.nodes.len() > WIDTH) {
            lits.sort();
            for lit in &lits {
                node_pool.extend(lit.nodes.iter().map(|n| id_of[n]));
                node_span.push(node_pool.len() as u32);
            }
        } else {
            // Rank 0 pads missing slots, keeping shorter literals first
            // like the lexicographic order on node lists.
            let mut keyed: Vec<([u32; WIDTH + 1], Literal)> = std::mem::take(&mut lits)
                .into_iter()
                .map(|l| {
                    let mut key = [0u32; WIDTH + 1];
                    key[0] = id_of[&l.label] + 1;
                    for (i, n) in l.nodes.iter().enumerate() {
                        key[i + 1] = id_of[n] + 1;
                    }
                    (key, l)
                })
                .collect();
            keyed.sort_unstable_by(|a, b| a.0.cmp(&b.0));
            lits.reserve(keyed.len());
            for (key, lit) in keyed {
                node_pool.extend(key[1..=lit.nodes.len()].iter().map(|r| r - 1));
                node_span.push(node_pool.len() as u32);
                lits.push(lit);
            }
        }
        let mut labels: Vec<Name> = Vec::new();
        let mut label_lits: Vec<Vec<u32>> = Vec::new();
        let mut lit_labels: Vec<u8> = Vec::with_capacity(lits.len());
        for (id, lit) in lits.iter().enumerate() {
            let label = match labels.iter().position(|l| *l == lit.label) {
                Some(i) => i,
                None => {
                    labels.push(lit.label.clone());
                    label_lits.push(Vec::new());
                    labels.len() - 1
                }
            };
            lit_labels.push(label as u8);
            label_lits[label].push(id as u32);
        }
        EdgeIndex {
            unread: lits.len(),
            read: vec![false; lits.len()],
            patterns: std::cell::RefCell::new(Vec::new()),
            lits,
            names,
            labels,
            lit_labels,
            node_pool,
            node_span,
            label_lits,
        }
    }

    /// Groups the label's literals by their anchor tuple at the masked
    /// positions. Literals too short for some masked position cannot fit
    /// any query of this pattern and are left out.
    fn materialize(&self, label: u8, mask: u32) -> SubIndex {
        let lit_ids = &self.label_lits[label as usize];
        let positions: Vec<usize> = (0..32).filter(|i| mask & (1 << i) != 0).collect();
        if let [p] = positions[..] {
            // Dense layout: anchor node id -> slot, counting pass first.
            let mut slots = vec![[0u32; 3]; self.names.len()];
            for &id in lit_ids {
                if let Some(&y) = self.node_ids(id).get(p) {
                    slots[y as usize][1] += 1;
                }
            }
            let mut start = 0u32;
            for s in &mut slots {
                s[0] = start;
                start += s[1];
                s[1] = 0;
            }
            let mut pool = vec![0u32; start as usize];
            for &id in lit_ids {
                if let Some(&y) = self.node_ids(id).get(p) {
                    let s = &mut slots[y as usize];
                    pool[(s[0] + s[1]) as usize] = id;
                    s[1] += 1;
                }
            }
            return SubIndex {
                slots,
                pool,
                by_tuple: HashMap::new(),
                single: true,
            };
        }
        let mut by_tuple: HashMap<Vec<u32>, u32> = HashMap::new();
        let mut views: Vec<Vec<u32>> = Vec::new();
        for &id in lit_ids {
            let nodes = self.node_ids(id);
            if positions.iter().any(|&p| p >= nodes.len()) {
                continue;
            }
            let tuple: Vec<u32> = positions.iter().map(|&p| nodes[p]).collect();
            let slot = *by_tuple.entry(tuple).or_insert_with(|| {
                views.push(Vec::new());
                views.len() as u32 - 1
            });
            views[slot as usize].push(id);
        }
        let mut slots = Vec::with_capacity(views.len());
        let mut pool = Vec::new();
        for view in views {
            slots.push([pool.len() as u32, view.len() as u32, 0]);
            pool.extend(view);
        }
        SubIndex {
            slots,
            pool,
            by_tuple,
            single: false,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.unread == 0
    }

    pub fn unread_count(&self) -> usize {
        self.unread
    }

    pub fn lit(&self, id: u32) -> &Literal {
        &self.lits[id as usize]
    }

    fn label_id(&self, label: &Name) -> Option<u8> {
        self.labels.iter().position(|l| l == label).map(|i| i as u8)
    }

    fn node_count(&self) -> usize {
        self.names.len()
    }

    fn node_name(&self, id: u32) -> &Name {
        &self.names[id as usize]
    }

    fn node_ids(&self, id: u32) -> &[u32] {
        let (a, b) = (self.node_span[id as usize], self.node_span[id as usize + 1]);
        &self.node_pool[a as usize..b as usize]
    }

    fn lit_label(&self, id: u32) -> u8 {
        self.lit_labels[id as usize]
    }

    /// The canonically least unread literal with the given label carrying
    /// the given nodes at the given slot positions.
    pub fn lowest_fitting(&self, label: &Name, anchors: &[(usize, Name)]) -> Option<u32> {
        let label = self.label_id(label)?;
        let mut mask = 0u32;
        let mut ids = Vec::new();
        for (pos, n) in anchors {
            if *pos >= 32 {
                return None;
            }
            mask |= 1 << pos;
            ids.push(self.names.binary_search(n).ok()? as u32);
        }
        // Anchors arrive in ascending position order from follow slots.
        self.lowest_fitting_ids(label, mask, &ids)
    }

    fn lowest_fitting_ids(&self, label: u8, mask: u32, ids: &[u32]) -> Option<u32> {
        let mut patterns = self.patterns.borrow_mut();
        // A handful of patterns per grammar: linear scan beats hashing.
        let sub = match patterns.iter().position(|(k, _)| *k == (label, mask)) {
            Some(i) => &mut patterns[i].1,
            None => {
                let sub = self.materialize(label, mask);
                patterns.push(((label, mask), sub));
                &mut patterns.last_mut().unwrap().1
            }
        };
        let slot = if sub.single {
            ids[0]
        } else {
            *sub.by_tuple.get(ids)?
        };
        let s = &mut sub.slots[slot as usize];
        while s[2] < s[1] && self.read[sub.pool[(s[0] + s[2]) as usize] as usize] {
            s[2] += 1;
        }
        if s[2] < s[1] {
            Some(sub.pool[(s[0] + s[2]) as usize])
        } else {
            None
        }
    }

    pub fn remove(&mut self, id: u32) {
        self.read[id as usize] = true;
        self.unread -= 1;
    }
}

/// Runs the trigger selection procedure: triggers in decision order; with
/// unread input left, the first follow pseudo-literal with a fitting unread
/// literal wins; with nothing left, the first trigger whose Follow contains
/// the end marker wins. Returns the trigger index and the chosen literal id
/// (None for the end marker).
pub fn select_trigger(
    tables: &AnalysisTables,
    state: usize,
    tau: &TauBinding,
    index: &EdgeIndex,
) -> Option<(usize, Option<u32>)> {
    for &ti in &tables.order[state] {
        if index.is_empty() {
            if tables.follow[state][ti].contains(&FollowEntry::End) {
                return Some((ti, None));
            }
            continue;
        }
        for entry in &tables.follow[state][ti] {
            let FollowEntry::Pseudo(pl) = entry else {
                continue;
            };
            let mut anchors = Vec::new();
            for (pos, s) in pl.slots.iter().enumerate() {
                if let Slot::Node(p) = s {
                    anchors.push((pos, tau[p].clone()));
                }
            }
            if let Some(id) = index.lowest_fitting(&pl.label, &anchors) {
                return Some((ti, Some(id)));
            }
        }
    }
    None
}

#[derive(Clone, Copy, Debug)]
pub struct ParseOptions {
    pub trace: bool,
    /// Every n-th move, re-check that the automaton approves the stack
    /// graph from scratch. 0 disables the spot check (the default: the
    /// full re-walk is quadratic over long parses).
    pub approval_cadence: usize,
}

impl Default for ParseOptions {
    fn default() -> ParseOptions {
        ParseOptions {
            trace: false,
            approval_cadence: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub enum PsrResult {
    Accept {
        derivation: Vec<DerivationStep>,
        moves: usize,
        trace: Vec<String>,
    },
    Reject {
        reason: String,
        moves: usize,
        trace: Vec<String>,
    },
}

impl PsrResult {
    pub fn is_accept(&self) -> bool {
        matches!(self, PsrResult::Accept { .. })
    }

    pub fn moves(&self) -> usize {
        match self {
            PsrResult::Accept { moves, .. } | PsrResult::Reject { moves, .. } => *moves,
        }
    }
}

/// Why trigger selection failed, one line per trigger in decision order.
fn selection_diagnostic(tables: &AnalysisTables, state: usize, index: &EdgeIndex) -> String {
    let mut parts = vec![format!(
        "state={state} unread={} no trigger fired",
        index.unread_count()
    )];
    for &ti in &tables.order[state] {
        let entries: Vec<String> = tables.follow[state][ti]
            .iter()
            .map(|e| match e {
                FollowEntry::End => "$".to_string(),
                FollowEntry::Pseudo(pl) => format!("{pl}"),
            })
            .collect();
        parts.push(format!(
            "trigger={ti} follow={{{}}} no unread literal fits",
            entries.join(", ")
        ));
    }
    parts.join("; ")
}

/// A concrete state in the interned loop: the binding holds node ids in
/// the order of the state's parameter list.
struct FastState {
    state: usize,
    tau: Vec<u32>,
}

/// A stack literal in the interned loop. Reduced entries keep the node ids
/// of the left-hand-side literal in attachment order, enough to rebuild
/// the literal when a stack spot check asks for it.
enum StackLit {
    Shifted(u32),
    Reduced { rule: usize, nodes: Vec<u32> },
}

/// Node ids of a stack literal, for handle occurrence counts.
fn stack_lit_nodes<'a>(index: &'a EdgeIndex, sl: &'a StackLit) -> &'a [u32] {
    match sl {
        StackLit::Shifted(id) => index.node_ids(*id),
        StackLit::Reduced { nodes, .. } => nodes,
    }
}

/// `find_transition` over interned ids; behaviorally identical.
fn fast_find_transition(
    dcfa: &Dcfa,
    state: usize,
    tau: &[u32],
    label: &Name,
    lit_ids: &[u32],
    blocked: &dyn Fn(u32) -> bool,
) -> Option<(usize, usize, Vec<u32>)> {
    let src = &dcfa.states[state];
    for (ti, t) in dcfa.transitions.iter().enumerate() {
        if t.src != state || t.lit.label != *label {
            continue;
        }
        let mut fresh: Vec<(&Name, u32)> = Vec::new();
        let mut ok = true;
        for (p, &y) in t.lit.nodes.iter().zip(lit_ids.iter()) {
            if let Some(pos) = src.params.iter().position(|q| q == p) {
                if tau[pos] != y {
                    ok = false;
                    break;
                }
            } else {
                if blocked(y) || tau.contains(&y) || fresh.iter().any(|&(_, v)| v == y) {
                    ok = false;
                    break;
                }
                if let Some(slot) = fresh.iter_mut().find(|(q, _)| *q == p) {
                    slot.1 = y;
                } else {
                    fresh.push((p, y));
                }
            }
        }
        if !ok {
            continue;
        }
        let tau2: Vec<u32> = dcfa.states[t.dst]
            .params
            .iter()
            .map(|q| {
                let x = &t.mu[q];
                fresh
                    .iter()
                    .find(|(fq, _)| *fq == x)
                    .map(|&(_, v)| v)
                    .unwrap_or_else(|| {
                        tau[src.params.iter().position(|sp| sp == x).unwrap()]
                    })
            })
            .collect();
        return Some((ti, t.dst, tau2));
    }
    None
}

/// `select_trigger` over interned ids; behaviorally identical.
fn fast_select(
    tables: &AnalysisTables,
    dcfa: &Dcfa,
    state: usize,
    tau: &[u32],
    index: &EdgeIndex,
) -> Option<(usize, Option<u32>)> {
    let params = &dcfa.states[state].params;
    for &ti in &tables.order[state] {
        if index.is_empty() {
            if tables.follow[state][ti].contains(&FollowEntry::End) {
                return Some((ti, None));
            }
            continue;
        }
        for entry in &tables.follow[state][ti] {
            let FollowEntry::Pseudo(pl) = entry else {
                continue;
            };
            let Some(label) = index.label_id(&pl.label) else {
                continue;
            };
            if pl.slots.len() > 16 {
                continue;
            }
            let mut mask = 0u32;
            let mut ids = [0u32; 16];
            let mut n = 0;
            for (pos, s) in pl.slots.iter().enumerate() {
                if let Slot::Node(p) = s {
                    mask |= 1 << pos;
                    ids[n] = tau[params.iter().position(|q| q == p).unwrap()];
                    n += 1;
                }
            }
            if let Some(id) = index.lowest_fitting_ids(label, mask, &ids[..n]) {
                return Some((ti, Some(id)));
            }
        }
    }
    None
}

/// The predictive parse loop. The input literal sequence is first brought
/// into canonical order, which is sound because acceptance is closed under
/// literal permutation.
///
/// The loop runs on interned node ids (flat arrays instead of name-keyed
/// maps) but executes the same moves as `asr_shift` and `asr_reduce`, with
/// identical traces, rejects, and derivation records; the parser-versus-
/// search equivalence tests hold the two implementations together.
pub fn psr_parse(
    g: &HRGrammar,
    dcfa: &Dcfa,
    tables: &AnalysisTables,
    input: &Graph,
    opts: ParseOptions,
) -> PsrResult {
    let mut index = EdgeIndex::build(input.lits.clone());
    let mut states: Vec<FastState> = vec![FastState {
        state: dcfa.initial,
        tau: Vec::new(),
    }];
    let mut slits: Vec<StackLit> = Vec::new();
    let mut counts: Vec<u32> = vec![0; index.node_count()];
    let mut node_read: Vec<bool> = vec![false; index.node_count()];
    let mut read_count = 0usize;
    let mut reduces: Vec<ReduceRecord> = Vec::new();
    let mut trace: Vec<String> = Vec::new();
    let mut moves = 0usize;
    loop {
        let top_state = states.last().unwrap().state;
        if top_state == dcfa.accept && index.is_empty() {
            // Every read node is an input node, so equal counts mean the
            // read set is the whole input node set.
            if read_count == input.nodes.len() {
                if opts.trace {
                    trace.push("accept".to_string());
                }
                let derivation = reduces
                    .into_iter()
                    .rev()
                    .map(|r| DerivationStep {
                        rule_index: r.rule_index,
                        mat: r.mat,
                        position: r.position,
                    })
                    .collect();
                return PsrResult::Accept {
                    derivation,
                    moves,
                    trace,
                };
            }
            return PsrResult::Reject {
                reason: "input has nodes attached to no literal".to_string(),
                moves,
                trace,
            };
        }
        let top_tau = &states.last().unwrap().tau;
        let Some((ti, choice)) = fast_select(tables, dcfa, top_state, top_tau, &index) else {
            return PsrResult::Reject {
                reason: selection_diagnostic(tables, top_state, &index),
                moves,
                trace,
            };
        };
        match &tables.triggers[top_state][ti] {
            Trigger::Shift { .. } => {
                let Some(id) = choice else {
                    return PsrResult::Reject {
                        reason: format!("state={} shift trigger selected at end of input", top_state),
                        moves,
                        trace,
                    };
                };
                let lit_ids = index.node_ids(id);
                if let Some(&y) = lit_ids
                    .iter()
                    .find(|&&y| node_read[y as usize] && counts[y as usize] == 0)
                {
                    let e = MoveError::NodeReuse {
                        node: index.node_name(y).clone(),
                    };
                    return PsrResult::Reject {
                        reason: format!("state={} shift of {} failed: {e}", top_state, index.lit(id)),
                        moves,
                        trace,
                    };
                }
                let found = fast_find_transition(
                    dcfa,
                    top_state,
                    top_tau,
                    &index.lit(id).label,
                    lit_ids,
                    &|y| node_read[y as usize],
                );
                let Some((_, dst, tau2)) = found else {
                    let e = MoveError::NoTransition { state: top_state };
                    return PsrResult::Reject {
                        reason: format!("state={} shift of {} failed: {e}", top_state, index.lit(id)),
                        moves,
                        trace,
                    };
                };
                for &y in lit_ids {
                    if !node_read[y as usize] {
                        node_read[y as usize] = true;
                        read_count += 1;
                    }
                    counts[y as usize] += 1;
                }
                slits.push(StackLit::Shifted(id));
                states.push(FastState { state: dst, tau: tau2 });
                index.remove(id);
                if opts.trace {
                    trace.push(format!(
                        "shift trigger={ti} lit={} state={dst}",
                        index.lit(id)
                    ));
                }
            }
            Trigger::Reduce { item } => {
                if item.rule == g.wrapper_rule {
                    // Only the accept state holds this item; acceptance is
                    // decided above, so ending up here means leftovers.
                    return PsrResult::Reject {
                        reason: format!("state={} input exhausted before the stack", top_state),
                        moves,
                        trace,
                    };
                }
                // Triggers hold only completed items of their own state, so
                // the membership checks of the free-standing reduce move
                // hold by construction here.
                let rule = &g.rules[item.rule];
                let k = rule.rhs.lits.len();
                if slits.len() < k {
                    let e = MoveError::NoReduceItem { state: top_state };
                    return PsrResult::Reject {
                        reason: format!("state={} reduce failed: {e}", top_state),
                        moves,
                        trace,
                    };
                }
                let params = &dcfa.states[top_state].params;
                let mut mu: Vec<(&Name, u32)> = Vec::new();
                for (x, p) in &item.sigma {
                    let pos = params.iter().position(|q| q == p).unwrap();
                    mu.push((x, top_tau[pos]));
                }
                let mut lhs_ids: Vec<u32> = Vec::with_capacity(rule.lhs.nodes.len());
                let mut unbound = None;
                for n in &rule.lhs.nodes {
                    match mu.iter().find(|(x, _)| *x == n) {
                        Some(&(_, v)) => lhs_ids.push(v),
                        None => {
                            unbound = Some(n.clone());
                            break;
                        }
                    }
                }
                if let Some(node) = unbound {
                    let e = MoveError::UnboundReduceNode { node };
                    return PsrResult::Reject {
                        reason: format!("state={} reduce failed: {e}", top_state),
                        moves,
                        trace,
                    };
                }
                // Occurrence counts of the nodes inside the handle, to
                // judge which nodes remain on the stack after popping.
                let popped = |y: u32| -> u32 {
                    slits[slits.len() - k..]
                        .iter()
                        .map(|sl| {
                            stack_lit_nodes(&index, sl)
                                .iter()
                                .filter(|&&z| z == y)
                                .count() as u32
                        })
                        .sum()
                };
                let exposed = &states[states.len() - 1 - k];
                let found = fast_find_transition(
                    dcfa,
                    exposed.state,
                    &exposed.tau,
                    &rule.lhs.label,
                    &lhs_ids,
                    &|y| counts[y as usize] > popped(y),
                );
                let Some((_, dst, tau2)) = found else {
                    let e = MoveError::NoGotoAfterReduce {
                        state: exposed.state,
                    };
                    return PsrResult::Reject {
                        reason: format!("state={} reduce failed: {e}", top_state),
                        moves,
                        trace,
                    };
                };
                let mut mat = Renaming::identity();
                for &(x, v) in &mu {
                    mat.insert(x.clone(), index.node_name(v).clone());
                }
                reduces.push(ReduceRecord {
                    rule_index: item.rule,
                    mat,
                    position: slits.len() - k,
                });
                for i in slits.len() - k..slits.len() {
                    for &y in stack_lit_nodes(&index, &slits[i]) {
                        counts[y as usize] -= 1;
                    }
                }
                slits.truncate(slits.len() - k);
                states.truncate(states.len() - k);
                for &y in &lhs_ids {
                    counts[y as usize] += 1;
                }
                slits.push(StackLit::Reduced {
                    rule: item.rule,
                    nodes: lhs_ids,
                });
                states.push(FastState { state: dst, tau: tau2 });
                if opts.trace {
                    trace.push(format!(
                        "reduce trigger={ti} rule={} state={dst}",
                        item.rule
                    ));
                }
            }
        }
        moves += 1;
        if opts.approval_cadence > 0 && moves % opts.approval_cadence == 0 {
            let stack_lits = slits
                .iter()
                .map(|sl| match sl {
                    StackLit::Shifted(id) => index.lit(*id).clone(),
                    StackLit::Reduced { rule, nodes } => {
                        let lhs = &g.rules[*rule].lhs;
                        let mut r = Renaming::identity();
                        for (n, &v) in lhs.nodes.iter().zip(nodes.iter()) {
                            r.insert(n.clone(), index.node_name(v).clone());
                        }
                        lhs.rename(&r)
                    }
                })
                .collect();
            let stack = Graph::from_lits(stack_lits);
            if !crate::dcfa::dcfa_approves(dcfa, &stack) {
                return PsrResult::Reject {
                    reason: format!("internal: stack graph not approved after move {moves}"),
                    moves,
                    trace,
                };
            }
        }
    }
}

/// A configuration of the exhaustive search: like the live parser but with
/// explicit unread flags, cheap to clone and to key.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SearchNode {
    pub states: Vec<ConcreteState>,
    pub lits: Vec<Literal>,
    pub read: BTreeSet<Name>,
    pub unread: Vec<bool>,
}

impl SearchNode {
    pub fn top(&self) -> &ConcreteState {
        self.states.last().unwrap()
    }

    fn key(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        for cs in &self.states {
            write!(s, "{}[", cs.state).unwrap();
            for (p, n) in &cs.tau {
                write!(s, "{p}/{n},").unwrap();
            }
            s.push(']');
        }
        write!(s, "|{:?}|{:?}", self.lits, self.unread).unwrap();
        s
    }

    fn stack_nodes(&self) -> BTreeSet<Name> {
        self.lits.iter().flat_map(|l| l.nodes.iter().cloned()).collect()
    }
}

/// Exhaustive exploration of the nondeterministic shift-reduce space over
/// one input, with memoized acceptance reachability. Desk-scale only.
pub struct AsrExplorer<'a> {
    pub g: &'a HRGrammar,
    pub dcfa: &'a Dcfa,
    pub input_lits: Vec<Literal>,
    pub input_nodes: BTreeSet<Name>,
    accept_memo: HashMap<String, bool>,
    visiting: HashSet<String>,
    pub budget: usize,
    pub exceeded: bool,
}

impl<'a> AsrExplorer<'a> {
    pub fn new(g: &'a HRGrammar, dcfa: &'a Dcfa, input: &Graph, budget: usize) -> AsrExplorer<'a> {
        let mut lits = input.lits.clone();
        lits.sort();
        AsrExplorer {
            g,
            dcfa,
            input_lits: lits,
            input_nodes: input.nodes.clone(),
            accept_memo: HashMap::new(),
            visiting: HashSet::new(),
            budget,
            exceeded: false,
        }
    }

    pub fn initial(&self) -> SearchNode {
        SearchNode {
            states: vec![ConcreteState {
                state: self.dcfa.initial,
                tau: TauBinding::new(),
            }],
            lits: Vec::new(),
            read: BTreeSet::new(),
            unread: vec![true; self.input_lits.len()],
        }
    }

    pub fn is_accepting(&self, n: &SearchNode) -> bool {
        n.top().state == self.dcfa.accept
            && n.unread.iter().all(|u| !u)
            && n.read == self.input_nodes
    }

    /// Shift of the unread literal at input position `idx`, if legal.
    /// Returns the transition taken.
    pub fn shift_move(&self, n: &SearchNode, idx: usize) -> Option<(usize, SearchNode)> {
        if !n.unread[idx] {
            return None;
        }
        let lit = &self.input_lits[idx];
        let stack_nodes = n.stack_nodes();
        for x in &lit.nodes {
            if n.read.contains(x) && !stack_nodes.contains(x) {
                return None;
            }
        }
        let top = n.top();
        let (ti, dst, tau2) =
            find_transition(self.dcfa, top.state, &top.tau, lit, &|x| n.read.contains(x))?;
        let mut next = n.clone();
        next.unread[idx] = false;
        next.read.extend(lit.nodes.iter().cloned());
        next.lits.push(lit.clone());
        next.states.push(ConcreteState { state: dst, tau: tau2 });
        Some((ti, next))
    }

    /// Reduce by a completed item of the top state, if legal.
    pub fn reduce_move(&self, n: &SearchNode, item: &Item) -> Option<SearchNode> {
        let rule = &self.g.rules[item.rule];
        let k = rule.rhs.lits.len();
        let top = n.top();
        if item.dot != k
            || item.rule == self.g.wrapper_rule
            || !self.dcfa.states[top.state].items.contains(item)
            || n.lits.len() < k
        {
            return None;
        }
        let mut mu = Renaming::identity();
        for (x, p) in &item.sigma {
            mu.insert(x.clone(), top.tau[p].clone());
        }
        if rule.lhs.nodes.iter().any(|x| mu.get(x).is_none()) {
            return None;
        }
        let lhs_lit = rule.lhs.rename(&mu);
        let remaining: BTreeSet<Name> = n.lits[..n.lits.len() - k]
            .iter()
            .flat_map(|l| l.nodes.iter().cloned())
            .collect();
        let exposed = &n.states[n.states.len() - 1 - k];
        let (_, dst, tau2) = find_transition(self.dcfa, exposed.state, &exposed.tau, &lhs_lit, &|x| {
            remaining.contains(x)
        })?;
        let mut next = n.clone();
        next.lits.truncate(next.lits.len() - k);
        next.states.truncate(next.states.len() - k);
        next.lits.push(lhs_lit);
        next.states.push(ConcreteState { state: dst, tau: tau2 });
        Some(next)
    }

    pub fn successors(&self, n: &SearchNode) -> Vec<SearchNode> {
        let mut out = Vec::new();
        let mut tried: BTreeSet<&Literal> = BTreeSet::new();
        for idx in 0..self.input_lits.len() {
            if n.unread[idx] && tried.insert(&self.input_lits[idx]) {
                if let Some((_, next)) = self.shift_move(n, idx) {
                    out.push(next);
                }
            }
        }
        for item in self.dcfa.states[n.top().state].items.clone() {
            if let Some(next) = self.reduce_move(n, &item) {
                out.push(next);
            }
        }
        out
    }

    /// Whether an accepting configuration is reachable from `n`.
    pub fn can_accept(&mut self, n: &SearchNode) -> bool {
        if self.is_accepting(n) {
            return true;
        }
        let key = n.key();
        if let Some(&r) = self.accept_memo.get(&key) {
            return r;
        }
        if !self.visiting.insert(key.clone()) {
            return false;
        }
        if self.budget == 0 {
            self.exceeded = true;
            self.visiting.remove(&key);
            return false;
        }
        self.budget -= 1;
        let mut result = false;
        for next in self.successors(n) {
            if self.can_accept(&next) {
                result = true;
                break;
            }
        }
        self.visiting.remove(&key);
        self.accept_memo.insert(key, result);
        result
    }

    /// Every configuration reachable from the initial one (deduplicated).
    pub fn reachable(&mut self) -> Vec<SearchNode> {
        let mut out = Vec::new();
        let mut seen: HashSet<String> = HashSet::new();
        let mut stack = vec![self.initial()];
        seen.insert(self.initial().key());
        while let Some(n) = stack.pop() {
            if self.budget == 0 {
                self.exceeded = true;
                break;
            }
            self.budget -= 1;
            for next in self.successors(&n) {
                if seen.insert(next.key()) {
                    stack.push(next);
                }
            }
            out.push(n);
        }
        out
    }
}

/// Trigger selection over a search node, scanning the unread literals
/// directly. Mirrors `select_trigger` on the live index.
pub fn select_on_node(
    tables: &AnalysisTables,
    ex: &AsrExplorer<'_>,
    n: &SearchNode,
) -> Option<(usize, Option<usize>)> {
    let top = n.top();
    let any_unread = n.unread.iter().any(|&u| u);
    for &ti in &tables.order[top.state] {
        if !any_unread {
            if tables.follow[top.state][ti].contains(&FollowEntry::End) {
                return Some((ti, None));
            }
            continue;
        }
        for entry in &tables.follow[top.state][ti] {
            let FollowEntry::Pseudo(pl) = entry else {
                continue;
            };
            for idx in 0..ex.input_lits.len() {
                if n.unread[idx] && fits(&ex.input_lits[idx], pl, &top.tau) {
                    return Some((ti, Some(idx)));
                }
            }
        }
    }
    None
}

/// Dynamic free-edge-choice validation over the enumerated language:
/// at every reachable configuration, the selection must return a literal
/// whose abstraction lies in the trigger's Follow set, and whenever any
/// literal permits the trigger's move followed by acceptance, the returned
/// literal must as well. A violation is reported with its configuration.
pub fn fec_dynamic(
    g: &HRGrammar,
    dcfa: &Dcfa,
    tables: &AnalysisTables,
    opts: FecOptions,
) -> FecVerdict {
    let Ok(members) = enumerate_language(g, opts.max_lits, opts.max_nodes, opts.enumeration_cap)
    else {
        return FecVerdict::Unknown;
    };
    let mut saw_exceeded = false;
    for m in &members {
        let mut ex = AsrExplorer::new(g, dcfa, &m.graph, opts.search_budget);
        let configs = ex.reachable();
        if ex.exceeded {
            saw_exceeded = true;
        }
        for n in configs {
            if ex.is_accepting(&n) {
                continue;
            }
            if let Some(witness) = check_node_usefulness(g, tables, &mut ex, &n) {
                return FecVerdict::Refuted(format!("input {}: {witness}", m.graph));
            }
            if ex.exceeded {
                saw_exceeded = true;
            }
        }
    }
    if saw_exceeded {
        FecVerdict::Unknown
    } else {
        FecVerdict::Holds
    }
}

fn check_node_usefulness(
    g: &HRGrammar,
    tables: &AnalysisTables,
    ex: &mut AsrExplorer<'_>,
    n: &SearchNode,
) -> Option<String> {
    let top = n.top().clone();
    let Some((ti, choice)) = select_on_node(tables, ex, n) else {
        if ex.can_accept(n) {
            return Some(format!(
                "state={} selection failed although an accepting continuation exists",
                top.state
            ));
        }
        return None;
    };
    if let Some(idx) = choice {
        let e = ex.input_lits[idx].clone();
        let f = abstract_lit(&e, &top.tau, &n.read);
        if !tables.follow[top.state][ti].contains(&FollowEntry::Pseudo(f.clone())) {
            return Some(format!(
                "state={} trigger={ti} returned {e} abstracting to {f} outside Follow",
                top.state
            ));
        }
    }
    match &tables.triggers[top.state][ti] {
        Trigger::Shift { transition } => {
            let specific = choice
                .and_then(|idx| ex.shift_move(n, idx))
                .filter(|(t, _)| t == transition)
                .map(|(_, next)| ex.can_accept(&next))
                .unwrap_or(false);
            if specific {
                return None;
            }
            for idx in 0..ex.input_lits.len() {
                if let Some((t, next)) = ex.shift_move(n, idx) {
                    if t == *transition && ex.can_accept(&next) {
                        return Some(format!(
                            "state={} trigger={ti} returned {} but only {} continues to acceptance",
                            top.state,
                            choice.map(|i| ex.input_lits[i].to_string()).unwrap_or_else(|| "$".into()),
                            ex.input_lits[idx]
                        ));
                    }
                }
            }
            None
        }
        Trigger::Reduce { item } => {
            if item.rule == g.wrapper_rule {
                return None;
            }
            // The reduce move consumes no literal; the returned literal is
            // lookahead evidence only, so there is no edge choice to test.
            let _ = ex.reduce_move(n, item);
            None
        }
    }
}

/// Conservative uniqueness probe for the static free-edge-choice check:
/// true when over all reachable configurations of all enumerated inputs no
/// follow entry ever fits two distinct unread literals.
pub fn fec_unique_fit(
    g: &HRGrammar,
    dcfa: &Dcfa,
    tables: &AnalysisTables,
    opts: FecOptions,
) -> bool {
    let Ok(members) = enumerate_language(g, opts.max_lits, opts.max_nodes, opts.enumeration_cap)
    else {
        return false;
    };
    for m in &members {
        let mut ex = AsrExplorer::new(g, dcfa, &m.graph, opts.search_budget);
        let configs = ex.reachable();
        if ex.exceeded {
            return false;
        }
        for n in configs {
            let top = n.top();
            for follow in &tables.follow[top.state] {
                for entry in follow {
                    let FollowEntry::Pseudo(pl) = entry else {
                        continue;
                    };
                    let mut fitting: BTreeSet<&Literal> = BTreeSet::new();
                    for idx in 0..ex.input_lits.len() {
                        if n.unread[idx] && fits(&ex.input_lits[idx], pl, &top.tau) {
                            fitting.insert(&ex.input_lits[idx]);
                            if fitting.len() > 1 {
                                return false;
                            }
                        }
                    }
                }
            }
        }
    }
    true
}

/// The rule matches enabled on a configuration according to the automaton:
/// every completed non-wrapper item of the top state whose left-hand side
/// is fully bound and whose goto transition exists. Keys are (rule, full
/// binding as sorted pairs).
pub fn reduce_enabling_asr(
    dcfa: &Dcfa,
    ex: &AsrExplorer<'_>,
    n: &SearchNode,
) -> BTreeSet<(usize, Vec<(Name, Name)>)> {
    let mut out = BTreeSet::new();
    for item in &dcfa.states[n.top().state].items {
        if let Some(_next) = ex.reduce_move(n, item) {
            let top = n.top();
            let mu: Vec<(Name, Name)> = item
                .sigma
                .iter()
                .map(|(x, p)| (x.clone(), top.tau[p].clone()))
                .collect();
            out.insert((item.rule, mu));
        }
    }
    out
}

/// The rule matches enabled on a configuration's stack graph according to
/// the definitional parser, restricted to reductions whose resulting stack
/// the automaton still approves.
pub fn reduce_enabling_naive(
    g: &HRGrammar,
    dcfa: &Dcfa,
    n: &SearchNode,
) -> BTreeSet<(usize, Vec<(Name, Name)>)> {
    let stack = Graph::from_lits(n.lits.clone());
    let read = Graph {
        nodes: n.read.clone(),
        lits: Vec::new(),
    };
    let mut out = BTreeSet::new();
    for (ri, mu) in crate::oracle::reduce_candidates(g, &stack) {
        let cfg = crate::oracle::NaiveConfig {
            stack: stack.clone(),
            read: read.clone(),
        };
        let Ok(next) = crate::oracle::naive_reduce(g, &cfg, ri, &mu) else {
            continue;
        };
        let after = Graph::from_lits(next.stack.lits.clone());
        if !crate::dcfa::dcfa_approves(dcfa, &after) {
            continue;
        }
        let pairs: Vec<(Name, Name)> = mu.iter().map(|(a, b)| (a.clone(), b.clone())).collect();
        out.insert((ri, pairs));
    }
    out
}
