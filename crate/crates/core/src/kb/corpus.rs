use indexmap::IndexSet;
use serde::{Deserialize, Serialize};

use super::{Atom, Clause, GroundAtom, ParsedProgram, Term};

/// Dense, 0-based bijection between symbols and codes, in first-occurrence order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SymbolTable {
    symbols: IndexSet<String>,
}

impl SymbolTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the code of `symbol`, assigning the next free one if unseen.
    pub fn intern(&mut self, symbol: &str) -> usize {
        match self.symbols.get_index_of(symbol) {
            Some(i) => i,
            None => self.symbols.insert_full(symbol.to_string()).0,
        }
    }

    pub fn encode(&self, symbol: &str) -> Option<usize> {
        self.symbols.get_index_of(symbol)
    }

    pub fn decode(&self, code: usize) -> Option<&str> {
        self.symbols.get_index(code).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &str)> {
        self.symbols.iter().enumerate().map(|(i, s)| (i, s.as_str()))
    }
}

impl Serialize for SymbolTable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.symbols.iter())
    }
}

impl<'de> Deserialize<'de> for SymbolTable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let names = Vec::<String>::deserialize(d)?;
        let mut table = SymbolTable::new();
        for n in &names {
            table.intern(n);
        }
        if table.len() != names.len() {
            return Err(serde::de::Error::custom("duplicate symbol in table"));
        }
        Ok(table)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CodedTerm {
    Const(usize),
    Var(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CodedAtom {
    pub predicate: usize,
    pub args: Vec<CodedTerm>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodedClause {
    pub id: usize,
    pub head: CodedAtom,
    pub body: Vec<CodedAtom>,
}

/// A program with every symbol replaced by its per-space integer code.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodedCorpus {
    pub variables: SymbolTable,
    pub constants: SymbolTable,
    pub predicates: SymbolTable,
    /// Largest arity seen per predicate code.
    pub arities: Vec<usize>,
    pub facts: Vec<CodedAtom>,
    pub rules: Vec<CodedClause>,
}

impl CodedCorpus {
    pub fn clause_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.rules.iter().map(|r| r.id)
    }

    pub fn decode_fact(&self, fact: &CodedAtom) -> Option<GroundAtom> {
        let args = fact
            .args
            .iter()
            .map(|t| match *t {
                CodedTerm::Const(c) => self.constants.decode(c).map(str::to_string),
                CodedTerm::Var(_) => None,
            })
            .collect::<Option<Vec<_>>>()?;
        Some(GroundAtom {
            predicate: self.predicates.decode(fact.predicate)?.to_string(),
            args,
        })
    }

    pub fn decode_atom(&self, atom: &CodedAtom) -> Option<Atom> {
        let args = atom
            .args
            .iter()
            .map(|t| match *t {
                CodedTerm::Const(c) => self.constants.decode(c).map(|s| Term::Const(s.into())),
                CodedTerm::Var(v) => self.variables.decode(v).map(|s| Term::Var(s.into())),
            })
            .collect::<Option<Vec<_>>>()?;
        Some(Atom {
            predicate: self.predicates.decode(atom.predicate)?.to_string(),
            args,
        })
    }

    /// Decodes the whole corpus back into a program.
    pub fn decode(&self) -> Option<ParsedProgram> {
        let facts = self
            .facts
            .iter()
            .map(|f| self.decode_fact(f))
            .collect::<Option<Vec<_>>>()?;
        let rules = self
            .rules
            .iter()
            .map(|r| {
                Some(Clause {
                    head: self.decode_atom(&r.head)?,
                    body: r
                        .body
                        .iter()
                        .map(|b| self.decode_atom(b))
                        .collect::<Option<Vec<_>>>()?,
                })
            })
            .collect::<Option<Vec<_>>>()?;
        Some(ParsedProgram { facts, rules })
    }

    fn code_atom(&mut self, atom: &Atom) -> CodedAtom {
        let predicate = self.predicates.intern(&atom.predicate);
        if predicate == self.arities.len() {
            self.arities.push(0);
        }
        self.arities[predicate] = self.arities[predicate].max(atom.args.len());
        let args = atom
            .args
            .iter()
            .map(|t| match t {
                Term::Const(c) => CodedTerm::Const(self.constants.intern(c)),
                Term::Var(v) => CodedTerm::Var(self.variables.intern(v)),
            })
            .collect();
        CodedAtom { predicate, args }
    }
}

/// Assigns codes by first occurrence, scanning facts before rules.
///
/// Duplicate facts are kept (they become distinct occurrences) and logged.
pub fn build_corpus(program: &ParsedProgram) -> CodedCorpus {
    let dups = program.duplicate_facts();
    if !dups.is_empty() {
        log::warn!(
            "{} duplicate fact(s) kept as separate occurrences: {}",
            dups.len(),
            dups.iter()
                .map(|&i| program.facts[i].to_string())
                .collect::<Vec<_>>()
                .join(", ")
        );
    }
    let mut corpus = CodedCorpus::default();
    for fact in &program.facts {
        let coded = corpus.code_atom(&fact.to_atom());
        corpus.facts.push(coded);
    }
    for (id, rule) in program.rules.iter().enumerate() {
        let head = corpus.code_atom(&rule.head);
        let body = rule.body.iter().map(|b| corpus.code_atom(b)).collect();
        corpus.rules.push(CodedClause { id, head, body });
    }
    corpus
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{parse_kb, parse_kb_with, ConstantStyle};

    #[test]
    fn empty_program() {
        let c = build_corpus(&ParsedProgram::default());
        assert!(c.constants.is_empty() && c.predicates.is_empty() && c.variables.is_empty());
        assert!(c.facts.is_empty());
    }

    #[test]
    fn shared_symbol_single_code() {
        let c = build_corpus(&parse_kb("p(a, b). q(b, a).").unwrap());
        assert_eq!(c.constants.len(), 2);
        assert_eq!(c.constants.encode("b"), Some(1));
        assert_eq!(c.facts[1].args, vec![CodedTerm::Const(1), CodedTerm::Const(0)]);
    }

    #[test]
    fn decode_inverts_build() {
        let p = parse_kb_with(
            "p(a, b). q(b, c). r(X, Y) :- p(X, Z), q(Z, Y).",
            ConstantStyle::Prolog,
        )
        .unwrap();
        let c = build_corpus(&p);
        assert_eq!(c.decode().unwrap(), p);
        assert_eq!(c.arities, vec![2, 2, 2]);
        assert_eq!(c.clause_ids().collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn table_serializes_as_list() {
        let mut t = SymbolTable::new();
        t.intern("x");
        t.intern("y");
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(json, r#"["x","y"]"#);
        let back: SymbolTable = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
        assert!(serde_json::from_str::<SymbolTable>(r#"["x","x"]"#).is_err());
    }
}
