//! Ground forward chaining and hypothesis checking.
//!
//! A hypothesis `H` is accepted when `BK ∪ {H}` derives every positive example
//! and none of the negative ones. Entailment is computed as the least
//! fixpoint of naive bottom-up rule application over the KB's constants.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::kb::{Atom, Clause, GroundAtom, ParsedProgram, Term};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ValidationError {
    #[error("rule {index} is not range-restricted: head variable `{variable}` is absent from the body")]
    NonRangeRestrictedRule { index: usize, variable: String },
    #[error("max_rounds must be at least 1")]
    InvalidMaxRounds,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Closure {
    pub atoms: BTreeSet<GroundAtom>,
    /// Rounds executed, including the final one that found nothing new.
    pub rounds: usize,
    /// True when `max_rounds` was exhausted before reaching the fixpoint.
    pub truncated: bool,
}

fn check_range_restricted(rules: &[Clause]) -> Result<(), ValidationError> {
    for (index, rule) in rules.iter().enumerate() {
        let body_vars: BTreeSet<&str> = rule.body.iter().flat_map(Atom::variables).collect();
        if let Some(v) = rule.head.variables().find(|v| !body_vars.contains(v)) {
            return Err(ValidationError::NonRangeRestrictedRule {
                index,
                variable: v.to_string(),
            });
        }
    }
    Ok(())
}

/// `Σ_p |constants|^arity(p)` over every predicate in facts and rules.
pub fn universe_size(facts: &[GroundAtom], rules: &[Clause]) -> usize {
    let mut constants = BTreeSet::new();
    let mut arities: HashMap<&str, usize> = HashMap::new();
    for f in facts {
        constants.extend(f.args.iter().map(String::as_str));
        arities.insert(&f.predicate, f.arity());
    }
    for r in rules {
        for a in std::iter::once(&r.head).chain(&r.body) {
            constants.extend(a.args.iter().filter(|t| !t.is_var()).map(Term::name));
            arities.insert(&a.predicate, a.args.len());
        }
    }
    arities
        .values()
        .map(|&k| constants.len().saturating_pow(k as u32))
        .fold(0usize, usize::saturating_add)
}

type Index = HashMap<String, Vec<GroundAtom>>;

fn match_body<'a>(
    body: &'a [Atom],
    index: &Index,
    subst: &mut HashMap<&'a str, String>,
    out: &mut Vec<HashMap<&'a str, String>>,
) {
    let Some((first, rest)) = body.split_first() else {
        out.push(subst.clone());
        return;
    };
    let Some(candidates) = index.get(&first.predicate) else {
        return;
    };
    for fact in candidates {
        if fact.args.len() != first.args.len() {
            continue;
        }
        let mut bound = Vec::new();
        let mut ok = true;
        for (term, value) in first.args.iter().zip(&fact.args) {
            match term {
                Term::Const(c) => {
                    if c != value {
                        ok = false;
                        break;
                    }
                }
                Term::Var(v) => match subst.get(v.as_str()) {
                    Some(existing) if existing != value => {
                        ok = false;
                        break;
                    }
                    Some(_) => {}
                    None => {
                        subst.insert(v.as_str(), value.clone());
                        bound.push(v.as_str());
                    }
                },
            }
        }
        if ok {
            match_body(rest, index, subst, out);
        }
        for v in bound {
            subst.remove(v);
        }
    }
}

fn instantiate(head: &Atom, subst: &HashMap<&str, String>) -> GroundAtom {
    GroundAtom {
        predicate: head.predicate.clone(),
        args: head
            .args
            .iter()
            .map(|t| match t {
                Term::Const(c) => c.clone(),
                Term::Var(v) => subst[v.as_str()].clone(),
            })
            .collect(),
    }
}

/// Naive least-fixpoint evaluation. `max_rounds = None` uses the universe
/// size, which always suffices.
pub fn forward_chain(
    facts: &[GroundAtom],
    rules: &[Clause],
    max_rounds: Option<usize>,
) -> Result<Closure, ValidationError> {
    check_range_restricted(rules)?;
    let max_rounds = match max_rounds {
        Some(0) => return Err(ValidationError::InvalidMaxRounds),
        Some(n) => n,
        None => universe_size(facts, rules).max(1),
    };
    let mut atoms: BTreeSet<GroundAtom> = facts.iter().cloned().collect();
    let mut rounds = 0;
    loop {
        if rounds == max_rounds {
            return Ok(Closure {
                atoms,
                rounds,
                truncated: true,
            });
        }
        rounds += 1;
        let mut index: Index = HashMap::new();
        for a in &atoms {
            index.entry(a.predicate.clone()).or_default().push(a.clone());
        }
        let mut fresh = BTreeSet::new();
        for rule in rules {
            let mut substs = Vec::new();
            match_body(&rule.body, &index, &mut HashMap::new(), &mut substs);
            for s in &substs {
                let derived = instantiate(&rule.head, s);
                if !atoms.contains(&derived) {
                    fresh.insert(derived);
                }
            }
        }
        if fresh.is_empty() {
            return Ok(Closure {
                atoms,
                rounds,
                truncated: false,
            });
        }
        atoms.extend(fresh);
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub valid: bool,
    pub derived_positives: BTreeSet<GroundAtom>,
    pub missing_positives: BTreeSet<GroundAtom>,
    pub derived_negatives: BTreeSet<GroundAtom>,
    pub closure_size: usize,
    pub iterations_used: usize,
    pub truncated: bool,
}

/// Checks `BK ∪ H ⊨ positives` and `BK ∪ H ⊭ negatives`.
pub fn validate_hypothesis(
    bk: &ParsedProgram,
    hypothesis: &[Clause],
    positives: &[GroundAtom],
    negatives: &[GroundAtom],
) -> Result<Verdict, ValidationError> {
    let rules: Vec<Clause> = bk.rules.iter().chain(hypothesis).cloned().collect();
    let closure = forward_chain(&bk.facts, &rules, None)?;
    let (derived_positives, missing_positives): (BTreeSet<_>, BTreeSet<_>) = positives
        .iter()
        .cloned()
        .partition(|a| closure.atoms.contains(a));
    let derived_negatives: BTreeSet<_> = negatives
        .iter()
        .filter(|a| closure.atoms.contains(*a))
        .cloned()
        .collect();
    Ok(Verdict {
        valid: missing_positives.is_empty() && derived_negatives.is_empty(),
        derived_positives,
        missing_positives,
        derived_negatives,
        closure_size: closure.atoms.len(),
        iterations_used: closure.rounds,
        truncated: closure.truncated,
    })
}
