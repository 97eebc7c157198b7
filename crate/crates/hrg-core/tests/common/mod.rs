//! Shared grammar constructors for the integration tests.
#![allow(dead_code)]

use hrg_core::grammar::{validate_and_augment, HRGrammar, Rule};
use hrg_core::graph::{lit, Graph, Name};

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
                rhs: Graph::from_lits(vec![lit("try", &["r", "x", "z"]), lit("M", &["z", "x"])]),
            },
            Rule {
                lhs: lit("M", &["r", "x"]),
                rhs: Graph::from_lits(vec![lit("bel", &["r", "x", "y"])]),
            },
            Rule {
                lhs: lit("M", &["r", "x"]),
                rhs: Graph::from_lits(vec![lit("bel", &["r", "x", "y"]), lit("M", &["y", "z"])]),
            },
            Rule {
                lhs: lit("M", &["r", "x"]),
                rhs: Graph::from_lits(vec![lit("bel", &["r", "x", "y"]), lit("M", &["y", "x"])]),
            },
        ],
    )
    .unwrap()
}
