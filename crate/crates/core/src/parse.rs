//! Text formats: the line-oriented triple file (a simplified N-Triples) and
//! the basic-graph-pattern query format.
//!
//! Triple file grammar, one statement per line:
//!
//! ```text
//! line := term WS term WS term WS? '.' | '#' comment | blank
//! term := '<' iri '>' | '"' escaped '"' ('^^' '<' iri '>')?
//! ```
//!
//! Query format: one triple pattern per statement, each terminated by `.`;
//! positions are a term or `?name`. An optional `SELECT * WHERE { ... }`
//! wrapper is accepted and ignored. `#` starts a comment in both formats.

use thiserror::Error;

use crate::model::{Bgp, PatternTerm, Term, Triple, TriplePattern};

/// A parse failure, with the 1-based line it occurred on.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, message: impl Into<String>) -> ParseError {
        ParseError {
            line,
            message: message.into(),
        }
    }
}

/// Character scanner shared by the term, triple and query parsers.
pub(crate) struct Scanner<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
}

impl<'a> Scanner<'a> {
    pub(crate) fn new(input: &'a str) -> Scanner<'a> {
        Scanner::new_at_line(input, 1)
    }

    fn new_at_line(input: &'a str, line: usize) -> Scanner<'a> {
        Scanner {
            chars: input.chars().peekable(),
            line,
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next();
        if c == Some('\n') {
            self.line += 1;
        }
        c
    }

    pub(crate) fn at_end(&mut self) -> bool {
        self.peek().is_none()
    }

    pub(crate) fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.bump();
        }
    }

    /// Skips whitespace and `#` comments (to end of line).
    fn skip_trivia(&mut self) {
        loop {
            self.skip_ws();
            if self.peek() == Some('#') {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else {
                return;
            }
        }
    }

    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError::new(self.line, message)
    }

    fn expect(&mut self, c: char, what: &str) -> Result<(), ParseError> {
        match self.bump() {
            Some(got) if got == c => Ok(()),
            Some(got) => Err(self.err(format!("expected {what}, found {got:?}"))),
            None => Err(self.err(format!("expected {what}, found end of input"))),
        }
    }

    fn scan_iri_body(&mut self) -> Result<String, ParseError> {
        // Opening '<' already consumed.
        let mut iri = String::new();
        loop {
            match self.bump() {
                Some('>') => break,
                Some(c) if c.is_whitespace() || c == '<' => {
                    return Err(self.err(format!("invalid character {c:?} in IRI")));
                }
                Some(c) => iri.push(c),
                None => return Err(self.err("unterminated IRI, expected '>'")),
            }
        }
        if iri.is_empty() {
            return Err(self.err("empty IRI"));
        }
        Ok(iri)
    }

    /// Scans one term: `<iri>` or `"literal"` with optional `^^<datatype>`.
    pub(crate) fn scan_term(&mut self) -> Result<Term, ParseError> {
        match self.peek() {
            Some('<') => {
                self.bump();
                let iri = self.scan_iri_body()?;
                Term::iri(iri).map_err(|e| self.err(e.to_string()))
            }
            Some('"') => {
                self.bump();
                let mut lexical = String::new();
                loop {
                    match self.bump() {
                        Some('"') => break,
                        Some('\\') => match self.bump() {
                            Some('\\') => lexical.push('\\'),
                            Some('"') => lexical.push('"'),
                            Some(c) => {
                                return Err(self.err(format!("invalid escape sequence \\{c}")));
                            }
                            None => return Err(self.err("unterminated literal")),
                        },
                        Some(c) => lexical.push(c),
                        None => return Err(self.err("unterminated literal")),
                    }
                }
                if self.peek() == Some('^') {
                    self.bump();
                    self.expect('^', "'^^' before datatype IRI")?;
                    self.expect('<', "'<' opening datatype IRI")?;
                    let dt = self.scan_iri_body()?;
                    Term::typed_literal(lexical, dt).map_err(|e| self.err(e.to_string()))
                } else {
                    Ok(Term::literal(lexical))
                }
            }
            Some('_') => Err(self.err("blank nodes are not supported (found '_:' term)")),
            Some(c) => Err(self.err(format!("expected term, found {c:?}"))),
            None => Err(self.err("expected term, found end of input")),
        }
    }

    fn scan_variable_name(&mut self) -> Result<String, ParseError> {
        // Leading '?' already consumed.
        let mut name = String::new();
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
            name.push(self.bump().unwrap());
        }
        if !crate::model::valid_variable_name(&name) {
            return Err(self.err(format!(
                "variable name must match [A-Za-z_][A-Za-z0-9_]*, found ?{name}"
            )));
        }
        Ok(name)
    }

    /// Scans a pattern position: a term or `?name`.
    fn scan_pattern_term(&mut self) -> Result<PatternTerm, ParseError> {
        if self.peek() == Some('?') {
            self.bump();
            Ok(PatternTerm::Variable(self.scan_variable_name()?))
        } else {
            Ok(PatternTerm::Constant(self.scan_term()?))
        }
    }

    /// Case-insensitively consumes `word` if it is the next token.
    fn eat_keyword(&mut self, word: &str) -> bool {
        let saved = self.chars.clone();
        let saved_line = self.line;
        for expected in word.chars() {
            match self.bump() {
                Some(c) if c.eq_ignore_ascii_case(&expected) => {}
                _ => {
                    self.chars = saved;
                    self.line = saved_line;
                    return false;
                }
            }
        }
        // Must not run into a longer identifier.
        if matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
            self.chars = saved;
            self.line = saved_line;
            return false;
        }
        true
    }
}

/// Parses the line-oriented triple file format. Returns one triple per
/// statement line in order; duplicate lines yield duplicate entries.
pub fn parse_triples(text: &str) -> Result<Vec<Triple>, ParseError> {
    let mut triples = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let mut sc = Scanner::new_at_line(line, line_no);
        sc.skip_ws();
        match sc.peek() {
            None | Some('#') => continue,
            Some(_) => {}
        }
        let s = sc.scan_term()?;
        if !s.is_iri() {
            return Err(ParseError::new(line_no, "subject must be IRI"));
        }
        sc.skip_ws();
        let p = sc.scan_term()?;
        if !p.is_iri() {
            return Err(ParseError::new(line_no, "predicate must be IRI"));
        }
        sc.skip_ws();
        let o = sc.scan_term()?;
        sc.skip_ws();
        sc.expect('.', "'.' terminating the triple")?;
        sc.skip_ws();
        match sc.peek() {
            None | Some('#') => {}
            Some(c) => {
                return Err(ParseError::new(
                    line_no,
                    format!("unexpected content after '.': {c:?}"),
                ));
            }
        }
        triples.push(Triple::new(s, p, o).map_err(|e| ParseError::new(line_no, e.to_string()))?);
    }
    Ok(triples)
}

/// Parses the query format into a basic graph pattern, patterns in textual
/// order. The `SELECT * WHERE { ... }` wrapper, when present, is ignored.
pub fn parse_bgp_query(text: &str) -> Result<Bgp, ParseError> {
    let mut sc = Scanner::new(text);
    sc.skip_trivia();

    let wrapped = sc.eat_keyword("SELECT");
    if wrapped {
        sc.skip_trivia();
        sc.expect('*', "'*' after SELECT")?;
        sc.skip_trivia();
        if !sc.eat_keyword("WHERE") {
            return Err(sc.err("expected WHERE after SELECT *"));
        }
        sc.skip_trivia();
        sc.expect('{', "'{' opening the pattern block")?;
    }

    let mut patterns = Vec::new();
    loop {
        sc.skip_trivia();
        match sc.peek() {
            None => {
                if wrapped {
                    return Err(sc.err("expected '}' closing the pattern block"));
                }
                break;
            }
            Some('}') if wrapped => {
                sc.bump();
                break;
            }
            Some(_) => {}
        }
        let line_no = sc.line;
        let s = sc.scan_pattern_term()?;
        sc.skip_trivia();
        let p = sc.scan_pattern_term()?;
        sc.skip_trivia();
        let o = sc.scan_pattern_term()?;
        sc.skip_trivia();
        sc.expect('.', "'.' terminating the triple pattern")?;
        patterns
            .push(TriplePattern::new(s, p, o).map_err(|e| ParseError::new(line_no, e.to_string()))?);
    }
    if wrapped {
        sc.skip_trivia();
        if !sc.at_end() {
            return Err(sc.err("unexpected content after '}'"));
        }
    }
    Bgp::new(patterns).map_err(|e| ParseError::new(sc.line, e.to_string()))
}

/// The ten sample triples used throughout the tests, as file text.
pub const SAMPLE_TRIPLES: &str = "\
<C> <type> <Student> .
<C> <name> \"Craig\" .
<C> <memberOf> <IEEE> .
<S> <type> <Student> .
<S> <name> \"Sam\" .
<S> <memberOf> <ACM> .
<A> <type> <Faculty> .
<A> <name> \"Artem\" .
<A> <memberOf> <IEEE> .
<A> <memberOf> <ACM> .
";
