//! The Shared NeMuS structure: variable, constant, predicate and clause spaces
//! linked by T-Nodes and weighted bindings.
//!
//! Every occurrence of a constant inside a ground fact becomes a [`Binding`]
//! in the constant space whose target T-Node addresses the fact inside the
//! predicate space: `(h = 3, c = predicate, i = occurrence, a = position)`.
//! Occurrence indices are counted per predicate in source order. The
//! predicate-space instance stores the inverse links, pointing back into the
//! constant space at `(h = 1, c = constant, i = index in β(constant), a)`.
//!
//! Rules populate the clause space: one C-Space per clause with one
//! binding-free I-Space per literal (head first). Variables and constants
//! appearing in rules get bindings targeting `(h = 4, clause, literal, a)`.

use std::fmt;

use serde::ser::SerializeTuple;
use serde::{Deserialize, Serialize};

use crate::kb::{CodedAtom, CodedCorpus, CodedTerm, GroundAtom, Polarity, SymbolTable};

/// Space identifiers. Space 2 (functions) is not used.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SpaceId {
    Variable = 0,
    Constant = 1,
    Predicate = 3,
    Clause = 4,
}

impl SpaceId {
    pub fn from_code(h: u8) -> Option<Self> {
        match h {
            0 => Some(SpaceId::Variable),
            1 => Some(SpaceId::Constant),
            3 => Some(SpaceId::Predicate),
            4 => Some(SpaceId::Clause),
            _ => None,
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }
}

/// `(h, c, i, a)`: element `c` of space `h`, occurrence `i`, attribute position `a`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TNode {
    pub h: SpaceId,
    pub c: usize,
    pub i: usize,
    pub a: usize,
}

impl TNode {
    pub fn new(h: SpaceId, c: usize, i: usize, a: usize) -> Self {
        debug_assert!(a >= 1, "attribute positions start at 1");
        TNode { h, c, i, a }
    }
}

impl fmt::Display for TNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.h.code(), self.c, self.i, self.a)
    }
}

impl Serialize for TNode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut t = s.serialize_tuple(4)?;
        t.serialize_element(&self.h.code())?;
        t.serialize_element(&self.c)?;
        t.serialize_element(&self.i)?;
        t.serialize_element(&self.a)?;
        t.end()
    }
}

impl<'de> Deserialize<'de> for TNode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let (h, c, i, a) = <(u8, usize, usize, usize)>::deserialize(d)?;
        let h = SpaceId::from_code(h)
            .ok_or_else(|| serde::de::Error::custom(format!("invalid space id {h}")))?;
        if a == 0 {
            return Err(serde::de::Error::custom("attribute position must be >= 1"));
        }
        Ok(TNode { h, c, i, a })
    }
}

/// Weighted link from subject `k` to an occurrence `target`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Binding {
    pub target: TNode,
    pub w: f64,
    pub k: usize,
}

impl Binding {
    fn unit(target: TNode, k: usize) -> Self {
        Binding { target, w: 1.0, k }
    }
}

/// One instance of a compound: its attribute T-Nodes and its bindings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ISpace {
    /// Code of the compound (the predicate code for literals).
    pub code: usize,
    pub polarity: Polarity,
    pub attributes: Vec<TNode>,
    pub bindings: Vec<Binding>,
}

pub type CSpace = Vec<ISpace>;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PredicateSpace {
    pub positive: Vec<CSpace>,
    pub negative: Vec<CSpace>,
}

/// Symbol tables carried alongside the spaces so codes can be decoded.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Symbols {
    pub variables: SymbolTable,
    pub constants: SymbolTable,
    pub predicates: SymbolTable,
    pub arities: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SharedNemus {
    pub symbols: Symbols,
    pub variables: Vec<Vec<Binding>>,
    pub constants: Vec<Vec<Binding>>,
    pub predicates: PredicateSpace,
    pub clauses: Vec<CSpace>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NemusError {
    #[error("corpus references unknown {space} code {code}")]
    DanglingCode { space: &'static str, code: usize },
    #[error("unknown constant code {0}")]
    UnknownCode(usize),
    #[error("T-Node {node} stored at {location} does not resolve")]
    Unresolved { node: String, location: String },
}

fn check(code: usize, len: usize, space: &'static str) -> Result<usize, NemusError> {
    if code < len {
        Ok(code)
    } else {
        Err(NemusError::DanglingCode { space, code })
    }
}

/// Compiles a coded corpus into its Shared NeMuS.
pub fn compile_nemus(corpus: &CodedCorpus) -> Result<SharedNemus, NemusError> {
    let n_pred = corpus.predicates.len();
    let mut nemus = SharedNemus {
        symbols: Symbols {
            variables: corpus.variables.clone(),
            constants: corpus.constants.clone(),
            predicates: corpus.predicates.clone(),
            arities: corpus.arities.clone(),
        },
        variables: vec![Vec::new(); corpus.variables.len()],
        constants: vec![Vec::new(); corpus.constants.len()],
        predicates: PredicateSpace {
            positive: vec![Vec::new(); n_pred],
            negative: vec![Vec::new(); n_pred],
        },
        clauses: Vec::with_capacity(corpus.rules.len()),
    };

    for fact in &corpus.facts {
        let p = check(fact.predicate, n_pred, "predicate")?;
        let occurrence = nemus.predicates.positive[p].len();
        let mut attributes = Vec::with_capacity(fact.args.len());
        let mut bindings = Vec::with_capacity(fact.args.len());
        for (pos, term) in fact.args.iter().enumerate() {
            let a = pos + 1;
            let x = match *term {
                CodedTerm::Const(x) => check(x, nemus.constants.len(), "constant")?,
                CodedTerm::Var(v) => {
                    return Err(NemusError::DanglingCode {
                        space: "variable (in ground fact)",
                        code: v,
                    })
                }
            };
            let link = Binding::unit(TNode::new(SpaceId::Predicate, p, occurrence, a), x);
            let idx = nemus.constants[x].len();
            nemus.constants[x].push(link);
            attributes.push(TNode::new(SpaceId::Constant, x, idx, a));
            bindings.push(link);
        }
        nemus.predicates.positive[p].push(ISpace {
            code: p,
            polarity: Polarity::Positive,
            attributes,
            bindings,
        });
    }

    for rule in &corpus.rules {
        let clause = nemus.clauses.len();
        let literals = std::iter::once((&rule.head, Polarity::Positive))
            .chain(rule.body.iter().map(|b| (b, Polarity::Negative)));
        let mut cspace = Vec::with_capacity(rule.body.len() + 1);
        for (lit_idx, (atom, polarity)) in literals.enumerate() {
            cspace.push(clause_literal(&mut nemus, atom, polarity, clause, lit_idx, n_pred)?);
        }
        nemus.clauses.push(cspace);
    }
    Ok(nemus)
}

fn clause_literal(
    nemus: &mut SharedNemus,
    atom: &CodedAtom,
    polarity: Polarity,
    clause: usize,
    literal: usize,
    n_pred: usize,
) -> Result<ISpace, NemusError> {
    let p = check(atom.predicate, n_pred, "predicate")?;
    let mut attributes = Vec::with_capacity(atom.args.len());
    for (pos, term) in atom.args.iter().enumerate() {
        let a = pos + 1;
        let target = TNode::new(SpaceId::Clause, clause, literal, a);
        let node = match *term {
            CodedTerm::Const(x) => {
                let x = check(x, nemus.constants.len(), "constant")?;
                let idx = nemus.constants[x].len();
                nemus.constants[x].push(Binding::unit(target, x));
                TNode::new(SpaceId::Constant, x, idx, a)
            }
            CodedTerm::Var(v) => {
                let v = check(v, nemus.variables.len(), "variable")?;
                let idx = nemus.variables[v].len();
                nemus.variables[v].push(Binding::unit(target, v));
                TNode::new(SpaceId::Variable, v, idx, a)
            }
        };
        attributes.push(node);
    }
    Ok(ISpace {
        code: p,
        polarity,
        attributes,
        bindings: Vec::new(),
    })
}

impl SharedNemus {
    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
            && self.constants.is_empty()
            && self.predicates.positive.iter().all(Vec::is_empty)
            && self.clauses.is_empty()
    }

    pub fn constant_code(&self, name: &str) -> Option<usize> {
        self.symbols.constants.encode(name)
    }

    pub fn constant_name(&self, code: usize) -> Option<&str> {
        self.symbols.constants.decode(code)
    }

    pub fn predicate_code(&self, name: &str) -> Option<usize> {
        self.symbols.predicates.encode(name)
    }

    pub fn predicate_name(&self, code: usize) -> Option<&str> {
        self.symbols.predicates.decode(code)
    }

    pub fn predicate_count(&self) -> usize {
        self.symbols.predicates.len()
    }

    pub fn arity(&self, predicate: usize) -> usize {
        self.symbols.arities.get(predicate).copied().unwrap_or(0)
    }

    /// Number of ground facts (predicate-space instances).
    pub fn fact_count(&self) -> usize {
        self.predicates.positive.iter().map(Vec::len).sum()
    }

    pub fn binding_count(&self) -> usize {
        self.constants.iter().map(Vec::len).sum()
    }

    /// β: the bindings of a constant, in source order.
    pub fn bindings_of(&self, constant: usize) -> Result<&[Binding], NemusError> {
        self.constants
            .get(constant)
            .map(Vec::as_slice)
            .ok_or(NemusError::UnknownCode(constant))
    }

    /// The fact stored at predicate-space instance `(predicate, occurrence)`.
    pub fn fact(&self, predicate: usize, occurrence: usize) -> Option<GroundAtom> {
        let ispace = self.predicates.positive.get(predicate)?.get(occurrence)?;
        let args = ispace
            .attributes
            .iter()
            .map(|t| self.constant_name(t.c).map(str::to_string))
            .collect::<Option<Vec<_>>>()?;
        Some(GroundAtom {
            predicate: self.predicate_name(predicate)?.to_string(),
            args,
        })
    }

    /// All ground facts as `(predicate, occurrence, atom)`, predicate-major.
    pub fn facts(&self) -> impl Iterator<Item = (usize, usize, GroundAtom)> + '_ {
        self.predicates
            .positive
            .iter()
            .enumerate()
            .flat_map(move |(p, cs)| {
                (0..cs.len()).map(move |i| (p, i, self.fact(p, i).expect("consistent nemus")))
            })
    }

    fn predicate_bindings_at(
        &self,
        constant: usize,
        position: usize,
    ) -> Result<Vec<Binding>, NemusError> {
        Ok(self
            .bindings_of(constant)?
            .iter()
            .filter(|b| b.target.h == SpaceId::Predicate && b.target.a == position)
            .copied()
            .collect())
    }

    fn predicate_bindings_excluding(&self, excluded: Option<usize>, position: usize) -> Vec<Binding> {
        self.constants
            .iter()
            .enumerate()
            .filter(|(x, _)| Some(*x) != excluded)
            .flat_map(|(_, bs)| bs.iter())
            .filter(|b| b.target.h == SpaceId::Predicate && b.target.a == position)
            .copied()
            .collect()
    }

    /// Predicate-space bindings of the named constant at argument `position`;
    /// empty when the constant is not in the KB.
    pub fn argument_bindings_named(&self, name: &str, position: usize) -> Vec<Binding> {
        self.constant_code(name)
            .map(|x| self.predicate_bindings_at(x, position).expect("code from table"))
            .unwrap_or_default()
    }

    /// (β₁, β₂): bindings of `a` as 1st argument and of `b` as 2nd argument.
    pub fn select_positive_bindings(
        &self,
        a: usize,
        b: usize,
    ) -> Result<(Vec<Binding>, Vec<Binding>), NemusError> {
        Ok((
            self.predicate_bindings_at(a, 1)?,
            self.predicate_bindings_at(b, 2)?,
        ))
    }

    /// Same as [`select_positive_bindings`](Self::select_positive_bindings) by name;
    /// constants absent from the KB select nothing.
    pub fn select_positive_bindings_named(&self, a: &str, b: &str) -> (Vec<Binding>, Vec<Binding>) {
        (
            self.argument_bindings_named(a, 1),
            self.argument_bindings_named(b, 2),
        )
    }

    /// (β⁻₁, β⁻₂): every 1st-argument binding not of `c`, every 2nd-argument binding not of `d`.
    pub fn select_negative_bindings(
        &self,
        c: usize,
        d: usize,
    ) -> Result<(Vec<Binding>, Vec<Binding>), NemusError> {
        self.bindings_of(c)?;
        self.bindings_of(d)?;
        Ok((
            self.predicate_bindings_excluding(Some(c), 1),
            self.predicate_bindings_excluding(Some(d), 2),
        ))
    }

    pub fn select_negative_bindings_named(&self, c: &str, d: &str) -> (Vec<Binding>, Vec<Binding>) {
        (
            self.predicate_bindings_excluding(self.constant_code(c), 1),
            self.predicate_bindings_excluding(self.constant_code(d), 2),
        )
    }

    /// Checks that every stored T-Node dereferences and that the
    /// constant ↔ predicate links are mutually inverse.
    pub fn audit(&self) -> Result<(), NemusError> {
        let fail = |node: &TNode, location: String| NemusError::Unresolved {
            node: node.to_string(),
            location,
        };
        for (x, bs) in self.constants.iter().enumerate() {
            for (idx, b) in bs.iter().enumerate() {
                let location = format!("constants[{x}][{idx}]");
                if b.k != x || !b.w.is_finite() {
                    return Err(fail(&b.target, location));
                }
                let back = TNode::new(SpaceId::Constant, x, idx, b.target.a);
                if !self.attribute_at(&b.target).is_some_and(|t| *t == back) {
                    return Err(fail(&b.target, location));
                }
            }
        }
        for (v, bs) in self.variables.iter().enumerate() {
            for (idx, b) in bs.iter().enumerate() {
                let back = TNode::new(SpaceId::Variable, v, idx, b.target.a);
                if b.k != v || !self.attribute_at(&b.target).is_some_and(|t| *t == back) {
                    return Err(fail(&b.target, format!("variables[{v}][{idx}]")));
                }
            }
        }
        let all_ispaces = self
            .predicates
            .positive
            .iter()
            .chain(&self.predicates.negative)
            .chain(&self.clauses)
            .flatten();
        for ispace in all_ispaces {
            if ispace.code >= self.predicate_count() {
                return Err(NemusError::UnknownCode(ispace.code));
            }
            for node in &ispace.attributes {
                if self.resolve(node).is_none() {
                    return Err(fail(node, format!("attributes of compound {}", ispace.code)));
                }
            }
        }
        for (ci, cs) in self.clauses.iter().enumerate() {
            if cs.iter().any(|is| !is.bindings.is_empty()) {
                return Err(NemusError::Unresolved {
                    node: format!("clause {ci}"),
                    location: "clause space must have empty bindings".into(),
                });
            }
        }
        Ok(())
    }

    /// The attribute T-Node stored at the compound position a target refers to.
    fn attribute_at(&self, target: &TNode) -> Option<&TNode> {
        let ispace = match target.h {
            SpaceId::Predicate => self.predicates.positive.get(target.c)?.get(target.i)?,
            SpaceId::Clause => self.clauses.get(target.c)?.get(target.i)?,
            _ => return None,
        };
        ispace.attributes.get(target.a.checked_sub(1)?)
    }

    /// Dereferences a T-Node to the binding it names, when it names one.
    pub fn resolve(&self, node: &TNode) -> Option<Binding> {
        match node.h {
            SpaceId::Constant => self.constants.get(node.c)?.get(node.i).copied(),
            SpaceId::Variable => self.variables.get(node.c)?.get(node.i).copied(),
            SpaceId::Predicate | SpaceId::Clause => {
                self.attribute_at(node)?;
                Some(Binding::unit(*node, node.c))
            }
        }
    }

    /// Canonical JSON rendering (stable field order, T-Nodes as `[h,c,i,a]`).
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("nemus serializes")
    }
}
