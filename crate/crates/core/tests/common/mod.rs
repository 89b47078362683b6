//! Shared fixtures and an independent derivability oracle.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use nemus::kb::{build_corpus, parse_examples, parse_kb, Atom, Clause, GroundAtom, LabeledExample, ParsedProgram, Term};
use nemus::space::{compile_nemus, SharedNemus};

pub const FAMILY_KB: &str = include_str!("../../examples/family.kb");
pub const FAMILY_EX: &str = include_str!("../../examples/family.ex");

pub fn family_program() -> ParsedProgram {
    parse_kb(FAMILY_KB).unwrap()
}

pub fn family_nemus() -> SharedNemus {
    compile_nemus(&build_corpus(&family_program())).unwrap()
}

pub fn family_examples() -> Vec<LabeledExample> {
    parse_examples(FAMILY_EX).unwrap()
}

pub fn ground(p: &str, a: &str, b: &str) -> GroundAtom {
    GroundAtom::new(p, [a, b])
}

fn var(v: &str) -> Term {
    Term::Var(v.into())
}

/// The four-clause ancestor program: base cases and recursive cases over
/// father and mother.
pub fn ancestor_rules() -> Vec<Clause> {
    let head = || Atom::new("ancestor", vec![var("X"), var("Y")]);
    let mut rules = Vec::new();
    for p in ["father", "mother"] {
        rules.push(Clause::new(head(), vec![Atom::new(p, vec![var("X"), var("Y")])]));
    }
    for p in ["father", "mother"] {
        rules.push(Clause::new(
            head(),
            vec![
                Atom::new(p, vec![var("X"), var("Z")]),
                Atom::new("ancestor", vec![var("Z"), var("Y")]),
            ],
        ));
    }
    rules
}

fn substitute(atom: &Atom, env: &BTreeMap<&str, &str>) -> GroundAtom {
    GroundAtom {
        predicate: atom.predicate.clone(),
        args: atom
            .args
            .iter()
            .map(|t| match t {
                Term::Const(c) => c.clone(),
                Term::Var(v) => env[v.as_str()].to_string(),
            })
            .collect(),
    }
}

fn assignments<'a>(vars: &[&'a str], constants: &[&'a str]) -> Vec<BTreeMap<&'a str, &'a str>> {
    let mut out = vec![BTreeMap::new()];
    for v in vars {
        out = out
            .into_iter()
            .flat_map(|env| {
                constants.iter().map(move |c| {
                    let mut e = env.clone();
                    e.insert(*v, *c);
                    e
                })
            })
            .collect();
    }
    out
}

/// Every ground atom over the program's constants, for every predicate.
pub fn universe(facts: &[GroundAtom], rules: &[Clause]) -> Vec<GroundAtom> {
    let mut constants = BTreeSet::new();
    let mut arities = BTreeMap::new();
    for f in facts {
        constants.extend(f.args.iter().cloned());
        arities.insert(f.predicate.clone(), f.args.len());
    }
    for r in rules {
        for a in std::iter::once(&r.head).chain(&r.body) {
            arities.insert(a.predicate.clone(), a.args.len());
            for t in &a.args {
                if let Term::Const(c) = t {
                    constants.insert(c.clone());
                }
            }
        }
    }
    let constants: Vec<String> = constants.into_iter().collect();
    let mut out = Vec::new();
    for (p, k) in arities {
        let mut tuples: Vec<Vec<String>> = vec![vec![]];
        for _ in 0..k {
            tuples = tuples
                .into_iter()
                .flat_map(|t| {
                    constants.iter().map(move |c| {
                        let mut t = t.clone();
                        t.push(c.clone());
                        t
                    })
                })
                .collect();
        }
        out.extend(tuples.into_iter().map(|args| GroundAtom { predicate: p.clone(), args }));
    }
    out
}

/// Brute-force least model: repeatedly test every atom of the universe for a
/// rule grounding (over all constants) that derives it from known atoms.
pub fn brute_force_closure(facts: &[GroundAtom], rules: &[Clause]) -> BTreeSet<GroundAtom> {
    let universe = universe(facts, rules);
    let mut constants: BTreeSet<&str> = BTreeSet::new();
    for g in &universe {
        constants.extend(g.args.iter().map(String::as_str));
    }
    let constants: Vec<&str> = constants.into_iter().collect();
    let groundings: Vec<(usize, Vec<BTreeMap<&str, &str>>)> = rules
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let vars: BTreeSet<&str> = std::iter::once(&r.head)
                .chain(&r.body)
                .flat_map(|a| a.args.iter())
                .filter_map(|t| match t {
                    Term::Var(v) => Some(v.as_str()),
                    Term::Const(_) => None,
                })
                .collect();
            let vars: Vec<&str> = vars.into_iter().collect();
            (i, assignments(&vars, &constants))
        })
        .collect();

    let mut known: BTreeSet<GroundAtom> = facts.iter().cloned().collect();
    loop {
        let mut changed = false;
        for g in &universe {
            if known.contains(g) {
                continue;
            }
            let derivable = groundings.iter().any(|(i, envs)| {
                let r = &rules[*i];
                r.head.predicate == g.predicate
                    && envs.iter().any(|env| {
                        substitute(&r.head, env) == *g
                            && r.body.iter().all(|b| known.contains(&substitute(b, env)))
                    })
            });
            if derivable {
                known.insert(g.clone());
                changed = true;
            }
        }
        if !changed {
            return known;
        }
    }
}
