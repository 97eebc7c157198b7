//! Determinization of the characteristic automaton into parameterized
//! item states.
//!
//! A state is a closed set of items; an item is a dotted rule with an
//! injective mapping of already-visited rule nodes to state parameters.
//! States are identified up to parameter renaming. Transitions carry a
//! literal over the source parameters plus fresh parameters for nodes first
//! visited by that literal, and a map telling how the target state's
//! parameters read back into the source.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use thiserror::Error;

use crate::grammar::HRGrammar;
use crate::graph::{Graph, Literal, Name, PseudoLiteral, Slot};

/// A dotted rule plus the parameter binding of its visited nodes.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct Item {
    pub rule: usize,
    pub dot: usize,
    pub sigma: BTreeMap<Name, Name>,
}

#[derive(Clone, Debug)]
pub struct DState {
    pub id: usize,
    pub items: BTreeSet<Item>,
    /// Parameters in creation order (ascending fresh counter).
    pub params: Vec<Name>,
}

#[derive(Clone, Debug)]
pub struct DTransition {
    pub src: usize,
    /// Literal over params(src) plus fresh parameters for its new nodes.
    pub lit: Literal,
    /// Total map params(dst) -> params(src) ∪ new nodes of `lit`.
    pub mu: BTreeMap<Name, Name>,
    pub dst: usize,
}

#[derive(Clone, Debug)]
pub struct Dcfa {
    pub states: Vec<DState>,
    pub transitions: Vec<DTransition>,
    /// The initial state (always id 0).
    pub initial: usize,
    /// The state reached from the initial state over the start literal.
    pub accept: usize,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StepError {
    #[error("no transition of state {state} applies to the literal")]
    NoTransition { state: usize },
}

/// Closes an item set: a dot before a nonterminal spawns dot-initial items
/// for every rule of that nonterminal, with the parameter binding restricted
/// to the callee's left-hand-side nodes.
pub fn close_items(g: &HRGrammar, items: &BTreeSet<Item>) -> BTreeSet<Item> {
    let mut out = items.clone();
    let mut queue: VecDeque<Item> = items.iter().cloned().collect();
    while let Some(it) = queue.pop_front() {
        let rule = &g.rules[it.rule];
        if it.dot >= rule.rhs.lits.len() {
            continue;
        }
        let lit = &rule.rhs.lits[it.dot];
        if !g.is_nonterminal(&lit.label) {
            continue;
        }
        for ri in g.rules_for(&lit.label) {
            let callee = &g.rules[ri];
            let mut tau = BTreeMap::new();
            for (b, c) in lit.nodes.iter().zip(callee.lhs.nodes.iter()) {
                if let Some(p) = it.sigma.get(b) {
                    tau.insert(c.clone(), p.clone());
                }
            }
            let new_item = Item {
                rule: ri,
                dot: 0,
                sigma: tau,
            };
            if out.insert(new_item.clone()) {
                queue.push_back(new_item);
            }
        }
    }
    out
}

fn params_of(items: &BTreeSet<Item>) -> Vec<Name> {
    let set: BTreeSet<Name> = items
        .iter()
        .flat_map(|it| it.sigma.values().cloned())
        .collect();
    let mut v: Vec<Name> = set.into_iter().collect();
    v.sort_by_key(|n| n.fresh_index().unwrap_or(usize::MAX));
    v
}

/// Decides whether two closed item sets are equal up to a parameter
/// renaming, returning the map from `a`'s parameters onto `b`'s. Decided by
/// comparing canonical forms: items sorted by (rule, dot, binding domain),
/// parameters relabeled in first-occurrence order, with every ordering of
/// items that tie on the sort key tried and the least form kept.
pub fn states_equivalent(a: &BTreeSet<Item>, b: &BTreeSet<Item>) -> Option<BTreeMap<Name, Name>> {
    if a.len() != b.len() {
        return None;
    }
    let (ca, ma) = canonical_form(a);
    let (cb, mb) = canonical_form(b);
    if ca != cb {
        return None;
    }
    // a-param -> canonical index -> b-param.
    let inv_b: BTreeMap<usize, Name> = mb.into_iter().map(|(p, i)| (i, p)).collect();
    Some(
        ma.into_iter()
            .map(|(p, i)| (p, inv_b[&i].clone()))
            .collect(),
    )
}

type ItemKey = (usize, usize, Vec<Name>);

fn item_key(it: &Item) -> ItemKey {
    (it.rule, it.dot, it.sigma.keys().cloned().collect())
}

/// Canonical rendering of an item set together with the parameter
/// relabeling (param -> canonical index) that produced it.
fn canonical_form(items: &BTreeSet<Item>) -> (String, BTreeMap<Name, usize>) {
    let mut sorted: Vec<&Item> = items.iter().collect();
    sorted.sort_by_key(|it| item_key(it));
    // Group indices of items sharing a sort key.
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for (i, it) in sorted.iter().enumerate() {
        match blocks.last_mut() {
            Some(b) if item_key(sorted[b[0]]) == item_key(it) => b.push(i),
            _ => blocks.push(vec![i]),
        }
    }
    let mut best: Option<(String, BTreeMap<Name, usize>)> = None;
    let mut orderings: Vec<Vec<usize>> = vec![Vec::new()];
    for b in &blocks {
        let perms = permutations(b);
        let mut next = Vec::new();
        for o in &orderings {
            for p in &perms {
                let mut o2 = o.clone();
                o2.extend(p.iter().copied());
                next.push(o2);
            }
        }
        orderings = next;
    }
    for order in orderings {
        let mut relabel: BTreeMap<Name, usize> = BTreeMap::new();
        let mut s = String::new();
        for &i in &order {
            let it = sorted[i];
            s.push_str(&format!("{}:{}[", it.rule, it.dot));
            for (k, v) in &it.sigma {
                let n = relabel.len();
                let idx = *relabel.entry(v.clone()).or_insert(n);
                s.push_str(&format!("{k}/{idx},"));
            }
            s.push(']');
        }
        if best.as_ref().map_or(true, |(bs, _)| s < *bs) {
            best = Some((s, relabel));
        }
    }
    best.unwrap()
}

fn permutations(xs: &[usize]) -> Vec<Vec<usize>> {
    if xs.len() <= 1 {
        return vec![xs.to_vec()];
    }
    let mut out = Vec::new();
    for (i, &x) in xs.iter().enumerate() {
        let mut rest = xs.to_vec();
        rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, x);
            out.push(p);
        }
    }
    out
}

/// The pseudo-literals right of the dots of an item set: parameters where
/// the binding knows the node, Dash elsewhere.
pub fn leave(g: &HRGrammar, items: &BTreeSet<Item>) -> BTreeSet<PseudoLiteral> {
    let mut out = BTreeSet::new();
    for it in items {
        let rule = &g.rules[it.rule];
        if it.dot >= rule.rhs.lits.len() {
            continue;
        }
        let lit = &rule.rhs.lits[it.dot];
        let slots = lit
            .nodes
            .iter()
            .map(|x| match it.sigma.get(x) {
                Some(p) => Slot::Node(p.clone()),
                None => Slot::Dash,
            })
            .collect();
        out.insert(PseudoLiteral::new(lit.label.clone(), slots));
    }
    out
}

/// Builds the deterministic automaton by the subset-style worklist
/// construction: start from the closed wrapper item, follow every leave
/// pseudo-literal with fresh parameters substituted for Dash slots, close,
/// and reuse any state equal up to parameter renaming.
pub fn build_dcfa(g: &HRGrammar) -> Dcfa {
    let mut fresh = 0usize;
    let mut states: Vec<DState> = Vec::new();
    let mut canon_index: HashMap<String, usize> = HashMap::new();
    let mut transitions: Vec<DTransition> = Vec::new();

    let q0_items = close_items(
        g,
        &BTreeSet::from([Item {
            rule: g.wrapper_rule,
            dot: 0,
            sigma: BTreeMap::new(),
        }]),
    );
    let (c0, _) = canonical_form(&q0_items);
    canon_index.insert(c0, 0);
    states.push(DState {
        id: 0,
        params: params_of(&q0_items),
        items: q0_items,
    });

    let mut worklist: VecDeque<usize> = VecDeque::from([0]);
    while let Some(si) = worklist.pop_front() {
        let leaves = leave(g, &states[si].items);
        for pl in leaves {
            // Replace Dash slots by brand-new parameters.
            let mut lit_nodes = Vec::new();
            for s in &pl.slots {
                match s {
                    Slot::Node(p) => lit_nodes.push(p.clone()),
                    Slot::Dash => {
                        lit_nodes.push(Name::fresh(fresh));
                        fresh += 1;
                    }
                    Slot::Bullet => unreachable!("leave never produces Bullet"),
                }
            }
            let e = Literal::new(pl.label.clone(), lit_nodes).unwrap();
            // Advance every item whose dotted literal abstracts to pl.
            let mut advanced: BTreeSet<Item> = BTreeSet::new();
            for it in &states[si].items {
                let rule = &g.rules[it.rule];
                if it.dot >= rule.rhs.lits.len() {
                    continue;
                }
                let f = &rule.rhs.lits[it.dot];
                if f.label != pl.label {
                    continue;
                }
                let matches = f.nodes.iter().zip(pl.slots.iter()).all(|(x, s)| match s {
                    Slot::Node(p) => it.sigma.get(x) == Some(p),
                    Slot::Dash => !it.sigma.contains_key(x),
                    Slot::Bullet => false,
                });
                if !matches {
                    continue;
                }
                let mut nu = it.sigma.clone();
                for (x, y) in f.nodes.iter().zip(e.nodes.iter()) {
                    nu.insert(x.clone(), y.clone());
                }
                advanced.insert(Item {
                    rule: it.rule,
                    dot: it.dot + 1,
                    sigma: nu,
                });
            }
            let closed = close_items(g, &advanced);
            let (canon, _) = canonical_form(&closed);
            let (dst, mu) = match canon_index.get(&canon) {
                Some(&qi) => {
                    let mu = states_equivalent(&states[qi].items, &closed)
                        .expect("equal canonical forms must be equivalent");
                    (qi, mu)
                }
                None => {
                    let id = states.len();
                    canon_index.insert(canon, id);
                    let params = params_of(&closed);
                    let mu = params.iter().map(|p| (p.clone(), p.clone())).collect();
                    states.push(DState {
                        id,
                        params,
                        items: closed,
                    });
                    worklist.push_back(id);
                    (id, mu)
                }
            };
            transitions.push(DTransition {
                src: si,
                lit: e,
                mu,
                dst,
            });
        }
    }

    let accept = transitions
        .iter()
        .find(|t| t.src == 0 && t.lit.label == g.start)
        .map(|t| t.dst)
        .expect("the start transition always exists");

    Dcfa {
        states,
        transitions,
        initial: 0,
        accept,
    }
}

impl Dcfa {
    pub fn transitions_from(&self, state: usize) -> impl Iterator<Item = &DTransition> {
        self.transitions.iter().filter(move |t| t.src == state)
    }

    /// Raw construction sizes.
    pub fn full_counts(&self) -> (usize, usize, usize) {
        let items = self.states.iter().map(|s| s.items.len()).sum();
        (self.states.len(), items, self.transitions.len())
    }

    /// Sizes with the augmentation bookkeeping removed: wrapper items, the
    /// accept state, and the start transition are not counted, and if the
    /// initial state is left with a single item it is elided together with
    /// its outgoing transitions (the first move is then forced).
    pub fn reported_counts(&self, g: &HRGrammar) -> (usize, usize, usize) {
        let core_items = |s: &DState| {
            s.items
                .iter()
                .filter(|it| it.rule != g.wrapper_rule)
                .count()
        };
        let mut states = 0usize;
        let mut items = 0usize;
        for s in &self.states {
            let n = core_items(s);
            if n > 0 {
                states += 1;
                items += n;
            }
        }
        let mut transitions = self
            .transitions
            .iter()
            .filter(|t| !(t.src == self.initial && t.lit.label == g.start))
            .count();
        if core_items(&self.states[self.initial]) == 1 {
            states -= 1;
            items -= 1;
            transitions -= self
                .transitions
                .iter()
                .filter(|t| t.src == self.initial && t.lit.label != g.start)
                .count();
        }
        (states, items, transitions)
    }
}

/// A concrete automaton configuration: state id plus the injective binding
/// of the state's parameters to input nodes.
pub type TauBinding = BTreeMap<Name, Name>;

/// Performs one deterministic move: finds the transition whose literal
/// matches `lit` under the current binding, where fresh transition
/// parameters may only bind nodes not read so far. Asserts that at most one
/// transition applies.
pub fn dcfa_step(
    dcfa: &Dcfa,
    state: usize,
    tau: &TauBinding,
    read_nodes: &BTreeSet<Name>,
    lit: &Literal,
) -> Result<(usize, TauBinding), StepError> {
    let src = &dcfa.states[state];
    let mut found: Option<(usize, TauBinding)> = None;
    for t in dcfa.transitions_from(state) {
        if t.lit.label != lit.label {
            continue;
        }
        let mut nu: BTreeMap<Name, Name> = tau.clone();
        let taken: BTreeSet<&Name> = tau.values().collect();
        let mut ok = true;
        let mut new_vals: BTreeSet<Name> = BTreeSet::new();
        for (p, y) in t.lit.nodes.iter().zip(lit.nodes.iter()) {
            if src.params.contains(p) {
                if tau.get(p) != Some(y) {
                    ok = false;
                    break;
                }
            } else {
                // A node first visited by this literal must be unread.
                if read_nodes.contains(y) || taken.contains(y) || !new_vals.insert(y.clone()) {
                    ok = false;
                    break;
                }
                nu.insert(p.clone(), y.clone());
            }
        }
        if !ok {
            continue;
        }
        let tau2: TauBinding = dcfa.states[t.dst]
            .params
            .iter()
            .map(|q| (q.clone(), nu[&t.mu[q]].clone()))
            .collect();
        assert!(
            found.is_none(),
            "two transitions of state {state} apply to the same literal"
        );
        found = Some((t.dst, tau2));
    }
    found.ok_or(StepError::NoTransition { state })
}

/// Deterministically consumes the literal sequence of `phi` from the
/// initial state; approval means every literal finds a move.
pub fn dcfa_approves(dcfa: &Dcfa, phi: &Graph) -> bool {
    if phi.nodes != phi.lit_nodes() {
        return false;
    }
    walk(dcfa, phi).is_some()
}

/// Runs the automaton over `phi`, returning the final concrete state.
pub fn walk(dcfa: &Dcfa, phi: &Graph) -> Option<(usize, TauBinding)> {
    let mut state = dcfa.initial;
    let mut tau = TauBinding::new();
    let mut read: BTreeSet<Name> = BTreeSet::new();
    for lit in &phi.lits {
        match dcfa_step(dcfa, state, &tau, &read, lit) {
            Ok((s, t)) => {
                state = s;
                tau = t;
                read.extend(lit.nodes.iter().cloned());
            }
            Err(_) => return None,
        }
    }
    Some((state, tau))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::fixtures::{persuade, series_parallel, trees};
    use crate::graph::{graph, lit};

    #[test]
    fn closure_examples() {
        let g = trees();
        let start = BTreeSet::from([Item {
            rule: g.wrapper_rule,
            dot: 0,
            sigma: BTreeMap::new(),
        }]);
        let closed = close_items(&g, &start);
        assert_eq!(closed.len(), 2);
        assert_eq!(close_items(&g, &closed), closed);
    }

    #[test]
    fn equivalence_up_to_renaming() {
        let a = BTreeSet::from([Item {
            rule: 1,
            dot: 1,
            sigma: BTreeMap::from([(Name::new("y"), Name::new("%3"))]),
        }]);
        let b = BTreeSet::from([Item {
            rule: 1,
            dot: 1,
            sigma: BTreeMap::from([(Name::new("y"), Name::new("%7"))]),
        }]);
        let m = states_equivalent(&a, &b).unwrap();
        assert_eq!(m[&Name::new("%3")], Name::new("%7"));
        let c = BTreeSet::from([Item {
            rule: 2,
            dot: 0,
            sigma: BTreeMap::new(),
        }]);
        assert!(states_equivalent(&a, &c).is_none());
        assert!(states_equivalent(&a, &a).is_some());
    }

    #[test]
    fn tree_dcfa_shape() {
        let g = trees();
        let d = build_dcfa(&g);
        assert_eq!(d.full_counts(), (6, 13, 6));
        assert_eq!(d.reported_counts(&g), (4, 10, 4));
        // Determinism: per state, one transition per leave pseudo-literal.
        for s in &d.states {
            let mut seen = BTreeSet::new();
            for t in d.transitions_from(s.id) {
                let pseudo: Vec<_> = t
                    .lit
                    .nodes
                    .iter()
                    .map(|n| s.params.contains(n))
                    .collect();
                assert!(seen.insert((t.lit.label.clone(), pseudo)));
            }
        }
    }

    #[test]
    fn persuade_dcfa_shape() {
        let g = persuade();
        let d = build_dcfa(&g);
        assert_eq!(d.full_counts(), (10, 38, 21));
        assert_eq!(d.reported_counts(&g), (9, 36, 20));
    }

    #[test]
    fn series_parallel_builds() {
        let g = series_parallel();
        let d = build_dcfa(&g);
        assert!(d.states.len() > 2);
    }

    #[test]
    fn approval_matches_ncfa() {
        let g = trees();
        let d = build_dcfa(&g);
        let n = crate::ncfa::build_ncfa(&g);
        let samples = [
            graph(&[]),
            graph(&[lit("root", &["1"])]),
            graph(&[lit("root", &["1"]), lit("T", &["1"])]),
            graph(&[
                lit("root", &["1"]),
                lit("T", &["1"]),
                lit("e", &["1", "2"]),
                lit("T", &["2"]),
                lit("e", &["2", "4"]),
                lit("T", &["4"]),
            ]),
            graph(&[
                lit("root", &["1"]),
                lit("T", &["1"]),
                lit("e", &["1", "3"]),
                lit("T", &["3"]),
                lit("e", &["1", "2"]),
            ]),
            graph(&[lit("e", &["1", "2"])]),
            graph(&[lit("root", &["1"]), lit("e", &["1", "2"])]),
        ];
        for p in &samples {
            assert_eq!(
                dcfa_approves(&d, p),
                crate::ncfa::ncfa_approves(&g, &n, p),
                "disagreement on {p}"
            );
        }
    }
}
