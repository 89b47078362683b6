//! Self-organized rule induction over a trained concept map.
//!
//! Each signed example gets a random induction vector. The vector is pulled,
//! step by step, toward the BMU weights of the dataset rows the example
//! selects, and the region it finally lands in names the body predicate of
//! the induced rule. Positive `p(a, b)` selects the facts where `a` is the 1st
//! argument or `b` the 2nd; negative examples select every other fact.
//! Negative results are reported but never shape the rule.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::{Dataset, DatasetMode, RowOrigin};
use crate::kb::{Atom, Clause, ConstantStyle, LabeledExample, Polarity, Term};
use crate::som::{seeded, Codebook, LabeledMap, SomError};
use crate::space::SharedNemus;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InductionConfig {
    pub steps: usize,
    pub eta0: f64,
    pub k_vote: usize,
    pub seed: u64,
}

impl Default for InductionConfig {
    fn default() -> Self {
        InductionConfig {
            steps: 100,
            eta0: 0.3,
            k_vote: 5,
            seed: 0,
        }
    }
}

impl InductionConfig {
    fn eta(&self, step: usize) -> f64 {
        let tau = (self.steps as f64 / 4.0).max(1.0);
        self.eta0 * (-(step as f64) / tau).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InductionError {
    #[error("example selects no training rows")]
    EmptySelection,
    #[error("no positive induction results to extract a rule from")]
    NoPositiveResults,
    #[error("row selection needs an atoms-mode dataset")]
    NotAtomsDataset,
    #[error("unknown predicate code {0}")]
    UnknownPredicate(usize),
    #[error(transparent)]
    Som(#[from] SomError),
}

/// Dataset rows chosen for one example.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub rows: Vec<usize>,
    /// Example constants that do not occur in the KB.
    pub unknown_constants: Vec<String>,
}

/// Rows whose fact shares a constant with the example at the same argument
/// position (positive), or the complement of those rows (negative).
pub fn select_training_rows(
    nemus: &SharedNemus,
    dataset: &Dataset,
    example: &LabeledExample,
) -> Result<Selection, InductionError> {
    if dataset.mode != DatasetMode::Atoms {
        return Err(InductionError::NotAtomsDataset);
    }
    let args = &example.atom.args;
    let unknown_constants: Vec<String> = args
        .iter()
        .filter(|a| nemus.constant_code(a).is_none())
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    // Instances (predicate, occurrence) reached by β₁ ∪ β₂ (generalized to
    // every argument position).
    let mut hit = BTreeSet::new();
    if args.len() == 2 {
        let (b1, b2) = nemus.select_positive_bindings_named(&args[0], &args[1]);
        hit.extend(b1.iter().chain(&b2).map(|b| (b.target.c, b.target.i)));
    } else {
        for (pos, a) in args.iter().enumerate() {
            hit.extend(
                nemus
                    .argument_bindings_named(a, pos + 1)
                    .iter()
                    .map(|b| (b.target.c, b.target.i)),
            );
        }
    }

    let rows = dataset
        .origins
        .iter()
        .enumerate()
        .filter_map(|(r, o)| match o {
            RowOrigin::Fact {
                predicate,
                occurrence,
                ..
            } => {
                let selected = hit.contains(&(*predicate, *occurrence));
                (selected == example.is_positive()).then_some(r)
            }
            RowOrigin::Constant { .. } => None,
        })
        .collect();
    if !unknown_constants.is_empty() {
        log::warn!(
            "example {example} mentions constants absent from the KB: {}",
            unknown_constants.join(", ")
        );
    }
    Ok(Selection {
        rows,
        unknown_constants,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InductionResult {
    pub example: LabeledExample,
    pub vector: Vec<f64>,
    pub bmu: usize,
    pub bmu_label: Option<usize>,
    pub votes: BTreeMap<usize, usize>,
    pub winning_label: Option<usize>,
    pub selected_rows: Vec<usize>,
}

/// Trains one induction vector against the selected rows' BMU weights.
///
/// The vector starts uniform-random from `seed`; at step `s` it moves toward
/// the BMU weight of selected row `s mod n` by `η(s) = η₀·exp(-s/(steps/4))`.
pub fn train_induction_vector<C: Codebook + ?Sized>(
    grid: &C,
    map: &LabeledMap,
    dataset: &Dataset,
    selection: &Selection,
    example: &LabeledExample,
    config: &InductionConfig,
    seed: u64,
) -> Result<InductionResult, InductionError> {
    if selection.rows.is_empty() {
        return Err(InductionError::EmptySelection);
    }
    let attractors = selection
        .rows
        .iter()
        .map(|&r| grid.find_bmu(&dataset.rows[r]))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rng = seeded(seed);
    let mut v: Vec<f64> = (0..grid.dim()).map(|_| rng.gen::<f64>()).collect();
    for step in 0..config.steps {
        let target = grid.neuron(attractors[step % attractors.len()]);
        let eta = config.eta(step);
        for (vk, wk) in v.iter_mut().zip(target) {
            *vk += eta * (wk - *vk);
        }
    }
    let bmu = grid.find_bmu(&v)?;
    let votes = map.votes(bmu, config.k_vote);
    Ok(InductionResult {
        example: example.clone(),
        bmu,
        bmu_label: map.label(bmu),
        winning_label: map.winning_label(bmu, config.k_vote),
        votes,
        vector: v,
        selected_rows: selection.rows.clone(),
    })
}

/// Runs induction for every example; example `i` uses seed `config.seed + i`.
pub fn induce<C: Codebook + ?Sized>(
    grid: &C,
    map: &LabeledMap,
    nemus: &SharedNemus,
    dataset: &Dataset,
    examples: &[LabeledExample],
    config: &InductionConfig,
) -> Result<Vec<InductionResult>, InductionError> {
    examples
        .iter()
        .enumerate()
        .map(|(i, ex)| {
            let selection = select_training_rows(nemus, dataset, ex)?;
            train_induction_vector(
                grid,
                map,
                dataset,
                &selection,
                ex,
                config,
                config.seed.wrapping_add(i as u64),
            )
        })
        .collect()
}

/// An induced definition: `head ← d₁ ∨ … ∨ dₙ` plus optional recursive clauses.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub head: Atom,
    /// Disjunction of conjunctions.
    pub body: Vec<Vec<Atom>>,
    pub recursive_hints: Vec<Clause>,
}

impl Rule {
    /// One definite clause per disjunct followed by the recursive hints.
    pub fn clauses(&self) -> Vec<Clause> {
        self.body
            .iter()
            .map(|conj| Clause::new(self.head.clone(), conj.clone()))
            .chain(self.recursive_hints.iter().cloned())
            .collect()
    }

    pub fn to_source(&self, style: ConstantStyle) -> String {
        self.clauses()
            .iter()
            .map(|c| c.to_source(style) + "\n")
            .collect()
    }
}

fn head_vars(arity: usize) -> Vec<Term> {
    match arity {
        2 => vec![Term::Var("X".into()), Term::Var("Y".into())],
        n => (1..=n).map(|i| Term::Var(format!("X{i}"))).collect(),
    }
}

/// Builds the rule for `target` from the positive results' winning labels.
pub fn extract_rule(
    map: &LabeledMap,
    nemus: &SharedNemus,
    target: &str,
    results: &[InductionResult],
    k_vote: usize,
) -> Result<Rule, InductionError> {
    let positives: Vec<&InductionResult> = results
        .iter()
        .filter(|r| r.example.polarity == Polarity::Positive && r.example.atom.predicate == target)
        .collect();
    if positives.is_empty() {
        return Err(InductionError::NoPositiveResults);
    }
    let arity = positives[0].example.atom.arity();
    let labels: BTreeSet<usize> = positives
        .iter()
        .filter_map(|r| map.winning_label(r.bmu, k_vote))
        .collect();
    let names = labels
        .iter()
        .map(|&p| {
            nemus
                .predicate_name(p)
                .map(str::to_string)
                .ok_or(InductionError::UnknownPredicate(p))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let vars = head_vars(arity);
    let head = Atom::new(target, vars.clone());
    let body = names
        .iter()
        .map(|p| vec![Atom::new(p.as_str(), vars.clone())])
        .collect();

    let chained = arity == 2
        && positives.iter().any(|a| {
            positives
                .iter()
                .any(|b| !std::ptr::eq(*a, *b) && a.example.atom.args[1] == b.example.atom.args[0])
        });
    let recursive_hints = if chained {
        let (x, y, z) = (
            Term::Var("X".into()),
            Term::Var("Y".into()),
            Term::Var("Z".into()),
        );
        names
            .iter()
            .map(|p| {
                Clause::new(
                    head.clone(),
                    vec![
                        Atom::new(p.as_str(), vec![x.clone(), z.clone()]),
                        Atom::new(target, vec![z.clone(), y.clone()]),
                    ],
                )
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(Rule {
        head,
        body,
        recursive_hints,
    })
}
