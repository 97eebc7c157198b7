//! Literals, graphs, renamings, and permutation equivalence.
//!
//! A graph is a finite node set together with an ordered sequence of
//! literals `a(x1,...,xk)` whose attached nodes are pairwise distinct. Two
//! graphs are equivalent (`⋈`) when they have the same node set and their
//! literal sequences are permutations of each other. The node set is stored
//! explicitly because isolated nodes matter (ε-rules produce them).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// An interned-style identifier used for nodes, labels, and parameters.
///
/// Names compare by their string contents, so orderings are stable across
/// processes. Names starting with `%` are reserved for machine-generated
/// nodes and parameters.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Name(Arc<str>);

impl Name {
    pub fn new(s: &str) -> Name {
        Name(Arc::from(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// True for machine-generated names (`%` prefix), which user input may
    /// not use.
    pub fn is_reserved(&self) -> bool {
        self.0.starts_with('%')
    }

    /// The n-th machine-generated name.
    pub fn fresh(n: usize) -> Name {
        Name::new(&format!("%{n}"))
    }

    /// Index of a machine-generated name, used to order parameters by
    /// creation time.
    pub fn fresh_index(&self) -> Option<usize> {
        self.0.strip_prefix('%').and_then(|s| s.parse().ok())
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl From<&str> for Name {
    fn from(s: &str) -> Name {
        Name::new(s)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("literal {label} attaches node {node} more than once")]
    DuplicateNodesInLiteral { label: Name, node: Name },
    #[error("renaming is not injective: {a} and {b} both map to {img}")]
    NonInjectiveRenaming { a: Name, b: Name, img: Name },
}

/// A labeled hyperedge `a(x1,...,xk)` with pairwise distinct attached nodes.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub label: Name,
    pub nodes: Vec<Name>,
}

impl Literal {
    pub fn new(label: Name, nodes: Vec<Name>) -> Result<Literal, GraphError> {
        for (i, n) in nodes.iter().enumerate() {
            if nodes[..i].contains(n) {
                return Err(GraphError::DuplicateNodesInLiteral {
                    label,
                    node: n.clone(),
                });
            }
        }
        Ok(Literal { label, nodes })
    }

    pub fn arity(&self) -> usize {
        self.nodes.len()
    }

    pub fn rename(&self, r: &Renaming) -> Literal {
        Literal {
            label: self.label.clone(),
            nodes: self.nodes.iter().map(|n| r.apply(n)).collect(),
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.label)?;
        for (i, n) in self.nodes.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{n}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Debug for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// A finite node set plus an ordered literal sequence.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Graph {
    pub nodes: BTreeSet<Name>,
    pub lits: Vec<Literal>,
}

impl Graph {
    pub fn empty() -> Graph {
        Graph::default()
    }

    /// Graph whose node set is exactly the nodes occurring in `lits`.
    pub fn from_lits(lits: Vec<Literal>) -> Graph {
        let nodes = lits
            .iter()
            .flat_map(|l| l.nodes.iter().cloned())
            .collect();
        Graph { nodes, lits }
    }

    /// A single literal viewed as a graph.
    pub fn from_lit(lit: Literal) -> Graph {
        Graph::from_lits(vec![lit])
    }

    pub fn with_extra_nodes(mut self, extra: impl IntoIterator<Item = Name>) -> Graph {
        self.nodes.extend(extra);
        self
    }

    /// Nodes that occur in at least one literal.
    pub fn lit_nodes(&self) -> BTreeSet<Name> {
        self.lits
            .iter()
            .flat_map(|l| l.nodes.iter().cloned())
            .collect()
    }

    pub fn concat(&self, other: &Graph) -> Graph {
        let mut nodes = self.nodes.clone();
        nodes.extend(other.nodes.iter().cloned());
        let mut lits = self.lits.clone();
        lits.extend(other.lits.iter().cloned());
        Graph { nodes, lits }
    }

    /// Permutation equivalence: equal node sets and equal literal multisets.
    pub fn equivalent(&self, other: &Graph) -> bool {
        if self.nodes != other.nodes || self.lits.len() != other.lits.len() {
            return false;
        }
        let mut a = self.lits.clone();
        let mut b = other.lits.clone();
        a.sort();
        b.sort();
        a == b
    }

    pub fn rename(&self, r: &Renaming) -> Result<Graph, GraphError> {
        r.check_injective_on(self.nodes.iter())?;
        Ok(Graph {
            nodes: self.nodes.iter().map(|n| r.apply(n)).collect(),
            lits: self.lits.iter().map(|l| l.rename(r)).collect(),
        })
    }

    /// True iff `other = self · δ` for some graph δ: the literal sequence of
    /// `self` is a prefix of `other`'s and every node of `self` belongs to
    /// `other`.
    pub fn is_prefix(&self, other: &Graph) -> bool {
        self.lits.len() <= other.lits.len()
            && self.lits[..] == other.lits[..self.lits.len()]
            && self.nodes.is_subset(&other.nodes)
    }

    /// True iff some node bijection turns `self` into a permutation of
    /// `other` (isomorphism respecting labels and attachment order).
    pub fn iso_matches(&self, other: &Graph) -> bool {
        if self.nodes.len() != other.nodes.len() || self.lits.len() != other.lits.len() {
            return false;
        }
        let mut by_label: HashMap<&Name, Vec<usize>> = HashMap::new();
        for (i, l) in other.lits.iter().enumerate() {
            by_label.entry(&l.label).or_default().push(i);
        }
        for l in &self.lits {
            if by_label.get(&l.label).map_or(0, |v| v.len())
                != self.lits.iter().filter(|m| m.label == l.label).count()
            {
                return false;
            }
        }
        let mut fwd: BTreeMap<Name, Name> = BTreeMap::new();
        let mut bwd: BTreeMap<Name, Name> = BTreeMap::new();
        let mut used = vec![false; other.lits.len()];
        self.iso_search(other, &by_label, 0, &mut used, &mut fwd, &mut bwd)
    }

    fn iso_search(
        &self,
        other: &Graph,
        by_label: &HashMap<&Name, Vec<usize>>,
        i: usize,
        used: &mut Vec<bool>,
        fwd: &mut BTreeMap<Name, Name>,
        bwd: &mut BTreeMap<Name, Name>,
    ) -> bool {
        if i == self.lits.len() {
            // Literal-covered nodes are matched; leftover isolated nodes can
            // always be paired up since the total counts are equal.
            return true;
        }
        let lit = &self.lits[i];
        let Some(cands) = by_label.get(&lit.label) else {
            return false;
        };
        for &j in cands {
            if used[j] {
                continue;
            }
            let target = &other.lits[j];
            let mut added: Vec<Name> = Vec::new();
            let mut ok = true;
            for (a, b) in lit.nodes.iter().zip(target.nodes.iter()) {
                match (fwd.get(a), bwd.get(b)) {
                    (Some(fb), Some(ba)) if fb == b && ba == a => {}
                    (None, None) => {
                        fwd.insert(a.clone(), b.clone());
                        bwd.insert(b.clone(), a.clone());
                        added.push(a.clone());
                    }
                    _ => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                used[j] = true;
                if self.iso_search(other, by_label, i + 1, used, fwd, bwd) {
                    return true;
                }
                used[j] = false;
            }
            for a in added {
                let b = fwd.remove(&a).unwrap();
                bwd.remove(&b);
            }
        }
        false
    }
}

impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.lits.is_empty() && self.nodes.is_empty() {
            return write!(f, "<empty>");
        }
        let lit_nodes = self.lit_nodes();
        let isolated: Vec<&Name> = self.nodes.difference(&lit_nodes).collect();
        let mut first = true;
        for n in isolated {
            if !first {
                write!(f, " ")?;
            }
            write!(f, "node {n}")?;
            first = false;
        }
        for l in &self.lits {
            if !first {
                write!(f, " ")?;
            }
            write!(f, "{l}")?;
            first = false;
        }
        Ok(())
    }
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// An injective finite node map, identity outside its support.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Renaming {
    map: BTreeMap<Name, Name>,
}

impl Renaming {
    pub fn identity() -> Renaming {
        Renaming::default()
    }

    pub fn from_pairs(
        pairs: impl IntoIterator<Item = (Name, Name)>,
    ) -> Result<Renaming, GraphError> {
        let mut map = BTreeMap::new();
        let mut inv: BTreeMap<Name, Name> = BTreeMap::new();
        for (a, b) in pairs {
            if let Some(prev) = inv.get(&b) {
                if *prev != a {
                    return Err(GraphError::NonInjectiveRenaming {
                        a: prev.clone(),
                        b: a,
                        img: b,
                    });
                }
            }
            inv.insert(b.clone(), a.clone());
            map.insert(a, b);
        }
        Ok(Renaming { map })
    }

    pub fn apply(&self, n: &Name) -> Name {
        self.map.get(n).cloned().unwrap_or_else(|| n.clone())
    }

    pub fn get(&self, n: &Name) -> Option<&Name> {
        self.map.get(n)
    }

    pub fn insert(&mut self, from: Name, to: Name) {
        self.map.insert(from, to);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Name, &Name)> {
        self.map.iter()
    }

    pub fn domain(&self) -> impl Iterator<Item = &Name> {
        self.map.keys()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// `other ∘ self` (apply `self` first).
    pub fn then(&self, other: &Renaming) -> Renaming {
        let mut map = BTreeMap::new();
        for (a, b) in &self.map {
            map.insert(a.clone(), other.apply(b));
        }
        for (a, b) in &other.map {
            map.entry(a.clone()).or_insert_with(|| b.clone());
        }
        Renaming { map }
    }

    /// Checks that applying the renaming to the given set of nodes produces
    /// pairwise distinct images (the map is identity outside its support, so
    /// unmapped nodes count as their own images).
    pub fn check_injective_on<'a>(
        &self,
        nodes: impl Iterator<Item = &'a Name>,
    ) -> Result<(), GraphError> {
        let mut seen: BTreeMap<Name, Name> = BTreeMap::new();
        for n in nodes {
            let img = self.apply(n);
            if let Some(prev) = seen.get(&img) {
                if prev != n {
                    return Err(GraphError::NonInjectiveRenaming {
                        a: prev.clone(),
                        b: n.clone(),
                        img,
                    });
                }
            }
            seen.insert(img, n.clone());
        }
        Ok(())
    }
}

/// A slot of a pseudo-literal: a concrete node or parameter, an unread
/// placeholder (Dash), or a read-but-untracked placeholder (Bullet).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Slot {
    Node(Name),
    Dash,
    Bullet,
}

/// A literal abstraction: concrete at some slots, placeholders elsewhere.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PseudoLiteral {
    pub label: Name,
    pub slots: Vec<Slot>,
}

impl PseudoLiteral {
    pub fn new(label: Name, slots: Vec<Slot>) -> PseudoLiteral {
        PseudoLiteral { label, slots }
    }
}

impl fmt::Display for PseudoLiteral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.label)?;
        for (i, s) in self.slots.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            match s {
                Slot::Node(n) => write!(f, "{n}")?,
                Slot::Dash => write!(f, "_")?,
                Slot::Bullet => write!(f, "*")?,
            }
        }
        write!(f, ")")
    }
}

impl fmt::Debug for PseudoLiteral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Convenience constructors used pervasively in tests.
pub fn lit(label: &str, nodes: &[&str]) -> Literal {
    Literal::new(Name::new(label), nodes.iter().map(|n| Name::new(n)).collect())
        .expect("test literal with duplicate nodes")
}

pub fn graph(lits: &[Literal]) -> Graph {
    Graph::from_lits(lits.to_vec())
}
