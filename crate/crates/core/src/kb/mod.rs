//! Knowledge-base front end: AST, parser and the integer-coded corpus.
//!
//! Two lexical conventions are supported for telling constants from
//! variables (see [`ConstantStyle`]). In the default `Capitalized` style
//! every bare identifier is a constant (`father(Jake, Bill).`) and variables
//! carry a leading `?` (`?X`). In the `Prolog` style upper-case or `_`
//! initial identifiers are variables. `?X` is accepted as a variable in both
//! styles and `'quoted'` text is always a constant.

mod corpus;
mod parser;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use corpus::{build_corpus, CodedAtom, CodedClause, CodedCorpus, CodedTerm, SymbolTable};
pub use parser::{parse_examples, parse_examples_with, parse_kb, parse_kb_with};

/// How bare identifiers in argument position are classified.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstantStyle {
    /// Any bare identifier is a constant; variables are written `?X`.
    #[default]
    Capitalized,
    /// Classic Prolog: upper-case / `_` initial identifiers are variables.
    Prolog,
}

impl FromStr for ConstantStyle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "capitalized" => Ok(ConstantStyle::Capitalized),
            "prolog" => Ok(ConstantStyle::Prolog),
            other => Err(format!(
                "unknown constant style `{other}` (expected capitalized|prolog)"
            )),
        }
    }
}

impl fmt::Display for ConstantStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstantStyle::Capitalized => f.write_str("capitalized"),
            ConstantStyle::Prolog => f.write_str("prolog"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Term {
    Const(String),
    Var(String),
}

impl Term {
    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn name(&self) -> &str {
        match self {
            Term::Const(s) | Term::Var(s) => s,
        }
    }
}

/// A (possibly non-ground) atom `p(t1, ..., tn)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Atom {
            predicate: predicate.into(),
            args,
        }
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| !t.is_var())
    }

    /// Converts to a ground atom, or `None` when a variable is present.
    pub fn to_ground(&self) -> Option<GroundAtom> {
        let args = self
            .args
            .iter()
            .map(|t| match t {
                Term::Const(c) => Some(c.clone()),
                Term::Var(_) => None,
            })
            .collect::<Option<Vec<_>>>()?;
        Some(GroundAtom {
            predicate: self.predicate.clone(),
            args,
        })
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v.as_str()),
            Term::Const(_) => None,
        })
    }

    pub fn display(&self, style: ConstantStyle) -> AtomDisplay<'_> {
        AtomDisplay { atom: self, style }
    }
}

/// A ground atom: predicate applied to constants only.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroundAtom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl GroundAtom {
    pub fn new<S: Into<String>>(predicate: impl Into<String>, args: impl IntoIterator<Item = S>) -> Self {
        GroundAtom {
            predicate: predicate.into(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn to_atom(&self) -> Atom {
        Atom {
            predicate: self.predicate.clone(),
            args: self.args.iter().cloned().map(Term::Const).collect(),
        }
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write_constant(f, a, ConstantStyle::Capitalized)?;
        }
        f.write_str(")")
    }
}

/// A definite clause `head :- body1, ..., bodyn.`
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Clause {
    pub head: Atom,
    pub body: Vec<Atom>,
}

impl Clause {
    pub fn new(head: Atom, body: Vec<Atom>) -> Self {
        Clause { head, body }
    }

    /// Renders the clause in the textual grammar accepted by [`parse_kb_with`].
    pub fn to_source(&self, style: ConstantStyle) -> String {
        let mut out = self.head.display(style).to_string();
        if !self.body.is_empty() {
            out.push_str(" :- ");
            let body: Vec<String> = self
                .body
                .iter()
                .map(|a| a.display(style).to_string())
                .collect();
            out.push_str(&body.join(", "));
        }
        out.push('.');
        out
    }
}

/// Facts and rules of a knowledge base, in file order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedProgram {
    pub facts: Vec<GroundAtom>,
    pub rules: Vec<Clause>,
}

impl ParsedProgram {
    pub fn is_empty(&self) -> bool {
        self.facts.is_empty() && self.rules.is_empty()
    }

    /// Indices of facts that repeat an earlier fact.
    pub fn duplicate_facts(&self) -> Vec<usize> {
        let mut seen = std::collections::HashSet::new();
        self.facts
            .iter()
            .enumerate()
            .filter_map(|(i, f)| (!seen.insert(f)).then_some(i))
            .collect()
    }

    /// Pretty-prints the program so that it reparses to the same value.
    pub fn to_source(&self, style: ConstantStyle) -> String {
        let mut out = String::new();
        for f in &self.facts {
            out.push_str(&f.to_atom().display(style).to_string());
            out.push_str(".\n");
        }
        for r in &self.rules {
            out.push_str(&r.to_source(style));
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

/// A signed ground example atom.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledExample {
    pub polarity: Polarity,
    pub atom: GroundAtom,
}

impl LabeledExample {
    pub fn positive(atom: GroundAtom) -> Self {
        LabeledExample {
            polarity: Polarity::Positive,
            atom,
        }
    }

    pub fn negative(atom: GroundAtom) -> Self {
        LabeledExample {
            polarity: Polarity::Negative,
            atom,
        }
    }

    pub fn is_positive(&self) -> bool {
        self.polarity == Polarity::Positive
    }
}

impl fmt::Display for LabeledExample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = match self.polarity {
            Polarity::Positive => '+',
            Polarity::Negative => '-',
        };
        write!(f, "{sign}{}.", self.atom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KbError {
    #[error("syntax error at {line}:{column}: expected {expected}, found {found}")]
    Syntax {
        line: usize,
        column: usize,
        expected: String,
        found: String,
    },
    #[error("fact at {line}:{column} is not ground")]
    NonGroundFact { line: usize, column: usize },
    #[error("example at {line}:{column} is not ground")]
    NonGroundExample { line: usize, column: usize },
}

pub struct AtomDisplay<'a> {
    atom: &'a Atom,
    style: ConstantStyle,
}

impl fmt::Display for AtomDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.atom.predicate)?;
        for (i, t) in self.atom.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            match t {
                Term::Const(c) => write_constant(f, c, self.style)?,
                Term::Var(v) => match self.style {
                    ConstantStyle::Capitalized => write!(f, "?{v}")?,
                    ConstantStyle::Prolog => {
                        if is_prolog_var_name(v) {
                            f.write_str(v)?
                        } else {
                            write!(f, "?{v}")?
                        }
                    }
                },
            }
        }
        f.write_str(")")
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphanumeric() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn is_prolog_var_name(s: &str) -> bool {
    is_identifier(s)
        && s
            .chars()
            .next()
            .is_some_and(|c| c.is_ascii_uppercase() || c == '_')
}

fn write_constant(f: &mut fmt::Formatter<'_>, c: &str, style: ConstantStyle) -> fmt::Result {
    let bare = match style {
        ConstantStyle::Capitalized => is_identifier(c),
        ConstantStyle::Prolog => is_identifier(c) && !is_prolog_var_name(c),
    };
    if bare {
        f.write_str(c)
    } else {
        f.write_str("'")?;
        for ch in c.chars() {
            match ch {
                '\'' => f.write_str("\\'")?,
                '\\' => f.write_str("\\\\")?,
                '\n' => f.write_str("\\n")?,
                other => write!(f, "{other}")?,
            }
        }
        f.write_str("'")
    }
}
