//! Forward chaining against a brute-force derivability oracle.

mod common;

use std::collections::BTreeSet;

use common::*;
use nemus::kb::{parse_kb_with, Atom, Clause, ConstantStyle, GroundAtom, ParsedProgram, Term};
use nemus::validator::{forward_chain, universe_size, validate_hypothesis};
use proptest::prelude::*;

#[test]
fn family_closure_matches_oracle() {
    let p = family_program();
    let rules = ancestor_rules();
    let closure = forward_chain(&p.facts, &rules, None).unwrap();
    assert!(!closure.truncated);
    assert!(closure.atoms.contains(&ground("ancestor", "Jake", "Harry")));
    assert!(!closure.atoms.contains(&ground("ancestor", "Ted", "Jake")));
    assert_eq!(closure.atoms, brute_force_closure(&p.facts, &rules));
    assert!(closure.atoms.len() <= 300);
    assert_eq!(universe_size(&p.facts, &rules), 300);
}

#[test]
fn union_rule_with_hints_is_valid() {
    let p = family_program();
    let v = validate_hypothesis(
        &p,
        &ancestor_rules(),
        &[
            ground("ancestor", "Jake", "John"),
            ground("ancestor", "John", "Harry"),
            ground("ancestor", "Jake", "Harry"),
        ],
        &[ground("ancestor", "Ted", "Jake")],
    )
    .unwrap();
    assert!(v.valid);
    assert_eq!(v.derived_positives.len(), 3);
    assert!(v.derived_negatives.is_empty());
}

#[test]
fn base_case_alone_misses_two_step_ancestor() {
    let p = family_program();
    let rules = &ancestor_rules()[..1];
    let v = validate_hypothesis(&p, rules, &[ground("ancestor", "Jake", "Harry")], &[]).unwrap();
    assert!(!v.valid);
    assert_eq!(
        v.missing_positives,
        BTreeSet::from([ground("ancestor", "Jake", "Harry")])
    );
}

#[test]
fn closure_is_a_fixpoint() {
    let p = family_program();
    let rules = ancestor_rules();
    let c = forward_chain(&p.facts, &rules, None).unwrap();
    let facts: Vec<GroundAtom> = c.atoms.iter().cloned().collect();
    let again = forward_chain(&facts, &rules, None).unwrap();
    assert_eq!(again.atoms, c.atoms);
    assert_eq!(again.rounds, 1);
}

#[test]
fn adding_rules_is_monotone() {
    let p = family_program();
    let rules = ancestor_rules();
    let mut previous = forward_chain(&p.facts, &[], None).unwrap().atoms;
    for n in 1..=rules.len() {
        let now = forward_chain(&p.facts, &rules[..n], None).unwrap().atoms;
        assert!(now.is_superset(&previous));
        previous = now;
    }
}

#[test]
fn rejects_unsafe_rules() {
    let p = parse_kb_with("p(a). q(X, Y) :- p(X).", ConstantStyle::Prolog).unwrap();
    assert!(forward_chain(&p.facts, &p.rules, None).is_err());
    assert!(validate_hypothesis(&ParsedProgram::default(), &p.rules, &[], &[]).is_err());
}

const CONSTANTS: [&str; 3] = ["a", "b", "c"];

fn small_fact() -> impl Strategy<Value = GroundAtom> {
    (prop_oneof![Just("e"), Just("f")], 0..3usize, 0..3usize)
        .prop_map(|(p, x, y)| GroundAtom::new(p, [CONSTANTS[x], CONSTANTS[y]]))
}

fn v(n: &str) -> Term {
    Term::Var(n.into())
}

/// A pool of range-restricted rules over e/2, f/2 and derived t/2, s/1.
fn rule_pool() -> Vec<Clause> {
    let a = |p: &str, args: Vec<Term>| Atom::new(p, args);
    vec![
        Clause::new(a("t", vec![v("X"), v("Y")]), vec![a("e", vec![v("X"), v("Y")])]),
        Clause::new(
            a("t", vec![v("X"), v("Y")]),
            vec![a("e", vec![v("X"), v("Z")]), a("t", vec![v("Z"), v("Y")])],
        ),
        Clause::new(
            a("t", vec![v("X"), v("Y")]),
            vec![a("f", vec![v("Y"), v("X")])],
        ),
        Clause::new(a("s", vec![v("X")]), vec![a("t", vec![v("X"), v("X")])]),
        Clause::new(
            a("e", vec![v("X"), Term::Const("c".into())]),
            vec![a("s", vec![v("X")])],
        ),
        Clause::new(
            a("f", vec![v("X"), v("Y")]),
            vec![a("t", vec![v("Y"), v("X")]), a("e", vec![v("X"), v("X")])],
        ),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn small_kbs_match_oracle(
        facts in prop::collection::vec(small_fact(), 1..=12),
        picks in prop::collection::vec(any::<bool>(), 6),
    ) {
        let rules: Vec<Clause> = rule_pool()
            .into_iter()
            .zip(&picks)
            .filter(|(_, &keep)| keep)
            .map(|(r, _)| r)
            .collect();
        let c = forward_chain(&facts, &rules, None).unwrap();
        prop_assert!(!c.truncated);
        prop_assert_eq!(&c.atoms, &brute_force_closure(&facts, &rules));
        prop_assert!(c.atoms.len() <= universe_size(&facts, &rules).max(facts.len()));

        let more: Vec<Clause> = rule_pool();
        let bigger = forward_chain(&facts, &more, None).unwrap();
        prop_assert!(bigger.atoms.is_superset(&c.atoms));
    }
}
