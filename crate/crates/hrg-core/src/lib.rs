//! Hyperedge-replacement graph grammars and shift-reduce graph parsing.
//!
//! The crate is organized bottom-up:
//!
//! * [`graph`] — literals, graphs, renamings, permutation equivalence.
//! * [`grammar`] — HR grammars, rightmost derivations, bounded language
//!   enumeration (the membership oracle for tests).
//! * [`oracle`] — the naive nondeterministic shift-reduce parser and a
//!   definitional viable-prefix decision procedure; slow but obviously
//!   correct reference implementations.
//! * [`ncfa`] / [`dcfa`] — the nondeterministic characteristic finite
//!   automaton over dotted rules and its determinization into parameterized
//!   item states.
//! * [`analysis`] — Follow/Follow* sets, trigger ordering, conflict
//!   detection, and the free-edge-choice check.
//! * [`runtime`] — the automaton-assisted shift-reduce parser, the
//!   predictive parse loop with its unread-edge index, and derivation
//!   extraction.
//! * [`sampling`] — seeded random graph/derivation generators for tests.

pub mod analysis;
pub mod dcfa;
pub mod graph;
pub mod grammar;
pub mod ncfa;
pub mod oracle;
pub mod runtime;
pub mod sampling;
