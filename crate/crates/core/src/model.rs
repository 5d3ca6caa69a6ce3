//! RDF data model: terms, triples, triple patterns and basic graph patterns.
//!
//! Terms carry a canonical text form (`<iri>` for resources, `"lexical"` with
//! backslash escaping for literals) that doubles as the storage key format.
//! The canonical form is injective: two terms are equal exactly when their
//! serializations are equal.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

/// Errors produced when constructing or parsing terms and patterns.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TermError {
    #[error("IRI must be nonempty and contain no whitespace, '<' or '>': {0:?}")]
    InvalidIri(String),
    #[error("variable name must match [A-Za-z_][A-Za-z0-9_]*: {0:?}")]
    InvalidVariable(String),
    #[error("blank nodes are not supported: {0:?}")]
    BlankNode(String),
    #[error("malformed term: {0}")]
    Malformed(String),
}

/// An RDF node: a resource identifier or a (possibly typed) literal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Iri(String),
    Literal {
        lexical: String,
        datatype: Option<String>,
    },
}

fn valid_iri(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(|c| c.is_whitespace() || c == '<' || c == '>')
}

/// True for names usable both as query variables and as SQL column aliases.
pub fn valid_variable_name(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl Term {
    pub fn iri(s: impl Into<String>) -> Result<Term, TermError> {
        let s = s.into();
        if !valid_iri(&s) {
            return Err(TermError::InvalidIri(s));
        }
        Ok(Term::Iri(s))
    }

    pub fn literal(lexical: impl Into<String>) -> Term {
        Term::Literal {
            lexical: lexical.into(),
            datatype: None,
        }
    }

    pub fn typed_literal(
        lexical: impl Into<String>,
        datatype: impl Into<String>,
    ) -> Result<Term, TermError> {
        let datatype = datatype.into();
        if !valid_iri(&datatype) {
            return Err(TermError::InvalidIri(datatype));
        }
        Ok(Term::Literal {
            lexical: lexical.into(),
            datatype: Some(datatype),
        })
    }

    pub fn is_iri(&self) -> bool {
        matches!(self, Term::Iri(_))
    }

    /// Canonical text form; see module docs.
    pub fn serialize(&self) -> String {
        self.to_string()
    }

    /// Parses the canonical text form back into a term.
    pub fn parse(input: &str) -> Result<Term, TermError> {
        let mut scanner = crate::parse::Scanner::new(input);
        scanner.skip_ws();
        let term = scanner
            .scan_term()
            .map_err(|e| TermError::Malformed(e.to_string()))?;
        scanner.skip_ws();
        if !scanner.at_end() {
            return Err(TermError::Malformed(format!(
                "trailing input after term: {input:?}"
            )));
        }
        Ok(term)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Iri(iri) => write!(f, "<{iri}>"),
            Term::Literal { lexical, datatype } => {
                f.write_str("\"")?;
                for c in lexical.chars() {
                    match c {
                        '\\' => f.write_str("\\\\")?,
                        '"' => f.write_str("\\\"")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")?;
                if let Some(dt) = datatype {
                    write!(f, "^^<{dt}>")?;
                }
                Ok(())
            }
        }
    }
}

/// A triple of subject, predicate and object. Subject and predicate are
/// always IRIs; the object may be an IRI or a literal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub s: Term,
    pub p: Term,
    pub o: Term,
}

impl Triple {
    pub fn new(s: Term, p: Term, o: Term) -> Result<Triple, TermError> {
        if !s.is_iri() {
            return Err(TermError::Malformed(format!("subject must be IRI: {s}")));
        }
        if !p.is_iri() {
            return Err(TermError::Malformed(format!("predicate must be IRI: {p}")));
        }
        Ok(Triple { s, p, o })
    }

    pub fn term_at(&self, pos: Position) -> &Term {
        match pos {
            Position::Subject => &self.s,
            Position::Predicate => &self.p,
            Position::Object => &self.o,
        }
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} .", self.s, self.p, self.o)
    }
}

/// The three positions of a triple or triple pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Position {
    Subject,
    Predicate,
    Object,
}

impl Position {
    pub const ALL: [Position; 3] = [Position::Subject, Position::Predicate, Position::Object];

    /// Single-letter column name used by the relational schema.
    pub fn column(self) -> &'static str {
        match self {
            Position::Subject => "s",
            Position::Predicate => "p",
            Position::Object => "o",
        }
    }
}

/// One position of a triple pattern: a constant term or a named variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PatternTerm {
    Constant(Term),
    Variable(String),
}

impl PatternTerm {
    pub fn variable(name: impl Into<String>) -> Result<PatternTerm, TermError> {
        let name = name.into();
        if !valid_variable_name(&name) {
            return Err(TermError::InvalidVariable(name));
        }
        Ok(PatternTerm::Variable(name))
    }

    pub fn is_variable(&self) -> bool {
        matches!(self, PatternTerm::Variable(_))
    }

    pub fn as_constant(&self) -> Option<&Term> {
        match self {
            PatternTerm::Constant(t) => Some(t),
            PatternTerm::Variable(_) => None,
        }
    }

    pub fn as_variable(&self) -> Option<&str> {
        match self {
            PatternTerm::Variable(v) => Some(v),
            PatternTerm::Constant(_) => None,
        }
    }
}

impl fmt::Display for PatternTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternTerm::Constant(t) => write!(f, "{t}"),
            PatternTerm::Variable(v) => write!(f, "?{v}"),
        }
    }
}

/// A triple pattern: any position may be a variable. Constant subjects and
/// predicates must be IRIs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TriplePattern {
    pub s: PatternTerm,
    pub p: PatternTerm,
    pub o: PatternTerm,
}

impl TriplePattern {
    pub fn new(s: PatternTerm, p: PatternTerm, o: PatternTerm) -> Result<TriplePattern, TermError> {
        if let PatternTerm::Constant(t) = &s {
            if !t.is_iri() {
                return Err(TermError::Malformed(format!("subject must be IRI: {t}")));
            }
        }
        if let PatternTerm::Constant(t) = &p {
            if !t.is_iri() {
                return Err(TermError::Malformed(format!("predicate must be IRI: {t}")));
            }
        }
        Ok(TriplePattern { s, p, o })
    }

    pub fn term_at(&self, pos: Position) -> &PatternTerm {
        match pos {
            Position::Subject => &self.s,
            Position::Predicate => &self.p,
            Position::Object => &self.o,
        }
    }

    /// Variable names in position order s, p, o (with repetitions).
    pub fn variable_occurrences(&self) -> impl Iterator<Item = (&str, Position)> {
        Position::ALL.into_iter().filter_map(move |pos| {
            self.term_at(pos).as_variable().map(|v| (v, pos))
        })
    }

    /// Distinct variable names, in s, p, o order.
    pub fn variables(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for (v, _) in self.variable_occurrences() {
            if !out.contains(&v) {
                out.push(v);
            }
        }
        out
    }

    /// Replaces variables that have a binding with the bound constant.
    pub fn substitute(&self, bindings: &BTreeMap<String, Term>) -> TriplePattern {
        let subst = |pt: &PatternTerm| match pt {
            PatternTerm::Variable(v) => match bindings.get(v) {
                Some(t) => PatternTerm::Constant(t.clone()),
                None => pt.clone(),
            },
            PatternTerm::Constant(_) => pt.clone(),
        };
        TriplePattern {
            s: subst(&self.s),
            p: subst(&self.p),
            o: subst(&self.o),
        }
    }
}

impl fmt::Display for TriplePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} .", self.s, self.p, self.o)
    }
}

/// A basic graph pattern: a nonempty, ordered list of triple patterns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bgp {
    patterns: Vec<TriplePattern>,
}

impl Bgp {
    pub fn new(patterns: Vec<TriplePattern>) -> Result<Bgp, TermError> {
        if patterns.is_empty() {
            return Err(TermError::Malformed(
                "basic graph pattern must contain at least one triple pattern".into(),
            ));
        }
        Ok(Bgp { patterns })
    }

    pub fn patterns(&self) -> &[TriplePattern] {
        &self.patterns
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// Distinct variable names in first-mention order (pattern order, then
    /// s, p, o within a pattern). This is the projection order used for
    /// query results and generated SQL select lists.
    pub fn variables(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for tp in &self.patterns {
            for (v, _) in tp.variable_occurrences() {
                if !out.iter().any(|x| x == v) {
                    out.push(v.to_string());
                }
            }
        }
        out
    }
}

/// Matches a triple pattern against a single triple: true iff some variable
/// assignment turns the pattern into exactly this triple. Constants must be
/// equal to the triple's term at the same position, and a variable that
/// occurs more than once must take the same term everywhere.
pub fn match_tp_t(tp: &TriplePattern, t: &Triple) -> bool {
    unify(tp, t).is_some()
}

/// Like [`match_tp_t`], but returns the variable assignment on success.
pub fn unify(tp: &TriplePattern, t: &Triple) -> Option<BTreeMap<String, Term>> {
    let mut bindings: BTreeMap<String, Term> = BTreeMap::new();
    for pos in Position::ALL {
        let actual = t.term_at(pos);
        match tp.term_at(pos) {
            PatternTerm::Constant(c) => {
                if c != actual {
                    return None;
                }
            }
            PatternTerm::Variable(v) => match bindings.get(v.as_str()) {
                Some(bound) if bound != actual => return None,
                Some(_) => {}
                None => {
                    bindings.insert(v.clone(), actual.clone());
                }
            },
        }
    }
    Some(bindings)
}
