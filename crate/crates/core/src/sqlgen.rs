//! The relational engine: a single triple table `T(s, p, o)` of canonical
//! term strings, translation of basic graph patterns into flat (single
//! SELECT-FROM-WHERE block) SQL queries, and an embedded evaluator that
//! executes the translated query so both engines can be cross-checked
//! without an external SQL server.
//!
//! Translation assigns alias `tpN` to the N-th pattern, restricts constants
//! in pattern-then-position order, equates every later occurrence of a
//! variable with its first occurrence, and selects the first occurrence of
//! each distinct variable renamed to the variable's name. Flattening leaves
//! join order to whatever executes the query, so the translation itself is
//! insensitive to pattern order.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::model::{Bgp, Position, Term, Triple};
use crate::store::{escape_field, unescape_field};

/// The fixed relational table name.
pub const TABLE_NAME: &str = "T";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SqlGenError {
    #[error("variable names ?{0} and ?{1} collide case-insensitively and would produce ambiguous aliases")]
    CaseInsensitiveCollision(String, String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SqlEvalError {
    #[error("unknown alias {0:?}")]
    UnknownAlias(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("sql parse error: {0}")]
pub struct SqlParseError(pub String);

#[derive(Debug, Error)]
pub enum TableIoError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt triple table at record {line}: {message}")]
    Corrupt { line: usize, message: String },
}

/// A column of one aliased occurrence of `T`, e.g. `tp2.o`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ColumnRef {
    pub alias: String,
    pub position: Position,
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.alias, self.position.column())
    }
}

/// One WHERE equality: column = quoted constant, or column = column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Conjunct {
    ConstEq { column: ColumnRef, value: String },
    ColEq { left: ColumnRef, right: ColumnRef },
}

/// One SELECT item: a column (or the constant `1` for zero-variable
/// existence queries) under an output alias.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SelectExpr {
    Column(ColumnRef),
    One,
}

/// A flat SQL query: one `T` alias per pattern, conjunctive WHERE, renamed
/// SELECT columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlatSqlQuery {
    pub select: Vec<(SelectExpr, String)>,
    pub from: Vec<String>,
    pub where_conjuncts: Vec<Conjunct>,
}

fn quote_constant(value: &str) -> String {
    format!("'{}'", value.replace('\'', "''"))
}

impl fmt::Display for FlatSqlQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Select ")?;
        for (i, (expr, name)) in self.select.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            match expr {
                SelectExpr::Column(col) => write!(f, "{col} As {name}")?,
                SelectExpr::One => write!(f, "1 As {name}")?,
            }
        }
        f.write_str(" From ")?;
        for (i, alias) in self.from.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{TABLE_NAME} {alias}")?;
        }
        if !self.where_conjuncts.is_empty() {
            f.write_str(" Where ")?;
            for (i, conjunct) in self.where_conjuncts.iter().enumerate() {
                if i > 0 {
                    f.write_str(" And ")?;
                }
                match conjunct {
                    Conjunct::ConstEq { column, value } => {
                        write!(f, "{column} = {}", quote_constant(value))?
                    }
                    Conjunct::ColEq { left, right } => write!(f, "{left} = {right}")?,
                }
            }
        }
        Ok(())
    }
}

/// The inverted index on variables: each distinct variable (first-mention
/// order) mapped to its column occurrences in pattern-then-position order.
pub fn inverted_var_index(bgp: &Bgp) -> Vec<(String, Vec<ColumnRef>)> {
    let mut order: Vec<String> = Vec::new();
    let mut occurrences: HashMap<String, Vec<ColumnRef>> = HashMap::new();
    for (i, tp) in bgp.patterns().iter().enumerate() {
        let alias = format!("tp{}", i + 1);
        for (v, position) in tp.variable_occurrences() {
            if !occurrences.contains_key(v) {
                order.push(v.to_string());
            }
            occurrences.entry(v.to_string()).or_default().push(ColumnRef {
                alias: alias.clone(),
                position,
            });
        }
    }
    order
        .into_iter()
        .map(|v| {
            let occ = occurrences.remove(&v).unwrap();
            (v, occ)
        })
        .collect()
}

/// Translates a basic graph pattern to a flat SQL query over `T(s, p, o)`.
///
/// Zero-variable patterns (all positions constant) select the existence
/// flag `1 As matched`, since the select-construction loop over variables
/// is vacuous for them.
pub fn bgp_to_flat_sql(bgp: &Bgp) -> Result<FlatSqlQuery, SqlGenError> {
    let index = inverted_var_index(bgp);

    let mut seen_lower: HashMap<String, &str> = HashMap::new();
    for (v, _) in &index {
        if let Some(prev) = seen_lower.insert(v.to_ascii_lowercase(), v) {
            return Err(SqlGenError::CaseInsensitiveCollision(
                prev.to_string(),
                v.clone(),
            ));
        }
    }

    let from: Vec<String> = (1..=bgp.len()).map(|i| format!("tp{i}")).collect();

    let mut where_conjuncts = Vec::new();
    for (i, tp) in bgp.patterns().iter().enumerate() {
        for position in Position::ALL {
            if let Some(term) = tp.term_at(position).as_constant() {
                where_conjuncts.push(Conjunct::ConstEq {
                    column: ColumnRef {
                        alias: format!("tp{}", i + 1),
                        position,
                    },
                    value: term.serialize(),
                });
            }
        }
    }
    for (_, occurrences) in &index {
        let first = &occurrences[0];
        for later in &occurrences[1..] {
            where_conjuncts.push(Conjunct::ColEq {
                left: first.clone(),
                right: later.clone(),
            });
        }
    }

    let select: Vec<(SelectExpr, String)> = if index.is_empty() {
        vec![(SelectExpr::One, "matched".to_string())]
    } else {
        index
            .iter()
            .map(|(v, occurrences)| (SelectExpr::Column(occurrences[0].clone()), v.clone()))
            .collect()
    };

    Ok(FlatSqlQuery {
        select,
        from,
        where_conjuncts,
    })
}

/// The single relational table: a set of (s, p, o) rows of canonical term
/// strings, with per-column value indexes for evaluation.
#[derive(Debug, Clone, Default)]
pub struct TripleTable {
    rows: Vec<[String; 3]>,
    index: [HashMap<String, Vec<usize>>; 3],
    dedup: HashSet<[String; 3]>,
}

impl TripleTable {
    pub fn new() -> TripleTable {
        TripleTable::default()
    }

    /// Inserts a row unless it is already present.
    pub fn insert(&mut self, triple: &Triple) -> bool {
        let row = [
            triple.s.serialize(),
            triple.p.serialize(),
            triple.o.serialize(),
        ];
        if !self.dedup.insert(row.clone()) {
            return false;
        }
        let id = self.rows.len();
        for (i, value) in row.iter().enumerate() {
            self.index[i].entry(value.clone()).or_default().push(id);
        }
        self.rows.push(row);
        true
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[String; 3]> {
        self.rows.iter()
    }

    pub fn save(&self, path: &Path) -> Result<(), TableIoError> {
        let io = |source| TableIoError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut sorted: Vec<&[String; 3]> = self.rows.iter().collect();
        sorted.sort();
        let mut out = String::new();
        for row in sorted {
            out.push_str(&escape_field(&row[0]));
            out.push('\t');
            out.push_str(&escape_field(&row[1]));
            out.push('\t');
            out.push_str(&escape_field(&row[2]));
            out.push('\n');
        }
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, out).map_err(io)?;
        fs::rename(&tmp, path).map_err(io)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<TripleTable, TableIoError> {
        let text = fs::read_to_string(path).map_err(|source| TableIoError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut table = TripleTable::new();
        for (idx, record) in text.lines().enumerate() {
            let line = idx + 1;
            let corrupt = |message: String| TableIoError::Corrupt { line, message };
            let fields: Vec<&str> = record.split('\t').collect();
            if fields.len() != 3 {
                return Err(corrupt(format!("expected 3 fields, found {}", fields.len())));
            }
            let mut terms = Vec::with_capacity(3);
            for f in &fields {
                let unescaped = unescape_field(f).map_err(corrupt)?;
                terms.push(Term::parse(&unescaped).map_err(|e| corrupt(e.to_string()))?);
            }
            let triple = Triple::new(terms[0].clone(), terms[1].clone(), terms[2].clone())
                .map_err(|e| corrupt(e.to_string()))?;
            table.insert(&triple);
        }
        Ok(table)
    }
}

/// Builds the table from a triple list, collapsing duplicates.
pub fn load_triple_table(triples: &[Triple]) -> TripleTable {
    let mut table = TripleTable::new();
    for t in triples {
        table.insert(t);
    }
    table
}

/// Evaluation result: named output columns and one string row per match.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SqlResultSet {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Executes a flat query against the table with select-project-join
/// semantics: conceptually the Cartesian product of one row per FROM item,
/// filtered by every WHERE conjunct (string equality), then projected and
/// renamed per SELECT. The actual strategy is an index-backed greedy join
/// whose result multiset equals the naive semantics.
pub fn eval_flat_sql(
    query: &FlatSqlQuery,
    table: &TripleTable,
) -> Result<SqlResultSet, SqlEvalError> {
    let alias_slot: HashMap<&str, usize> = query
        .from
        .iter()
        .enumerate()
        .map(|(i, a)| (a.as_str(), i))
        .collect();
    let resolve = |col: &ColumnRef| -> Result<(usize, usize), SqlEvalError> {
        let Some(&slot) = alias_slot.get(col.alias.as_str()) else {
            return Err(SqlEvalError::UnknownAlias(col.alias.clone()));
        };
        let pos = match col.position {
            Position::Subject => 0,
            Position::Predicate => 1,
            Position::Object => 2,
        };
        Ok((slot, pos))
    };

    let n = query.from.len();
    let mut consts: Vec<Vec<(usize, &str)>> = vec![Vec::new(); n];
    let mut intra: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut inter: Vec<((usize, usize), (usize, usize))> = Vec::new();
    for conjunct in &query.where_conjuncts {
        match conjunct {
            Conjunct::ConstEq { column, value } => {
                let (slot, pos) = resolve(column)?;
                consts[slot].push((pos, value.as_str()));
            }
            Conjunct::ColEq { left, right } => {
                let l = resolve(left)?;
                let r = resolve(right)?;
                if l.0 == r.0 {
                    intra[l.0].push((l.1, r.1));
                } else {
                    inter.push((l, r));
                }
            }
        }
    }
    let projected: Vec<Option<(usize, usize)>> = query
        .select
        .iter()
        .map(|(expr, _)| match expr {
            SelectExpr::Column(col) => resolve(col).map(Some),
            SelectExpr::One => Ok(None),
        })
        .collect::<Result<_, _>>()?;

    // Greedy join order: start from the alias with the most constant-bound
    // positions, then keep picking the most-constrained alias that joins
    // into the placed set; ties fall back to FROM order.
    let mut order: Vec<usize> = Vec::with_capacity(n);
    let mut placed = vec![false; n];
    while order.len() < n {
        let bound_count = |slot: usize| -> usize {
            let mut positions: HashSet<usize> =
                consts[slot].iter().map(|&(pos, _)| pos).collect();
            for &((ls, lp), (rs, rp)) in &inter {
                if ls == slot && placed[rs] {
                    positions.insert(lp);
                }
                if rs == slot && placed[ls] {
                    positions.insert(rp);
                }
            }
            positions.len()
        };
        let connected = |slot: usize| -> bool {
            inter.iter().any(|&((ls, _), (rs, _))| {
                (ls == slot && placed[rs]) || (rs == slot && placed[ls])
            })
        };
        let candidates: Vec<usize> = (0..n).filter(|&s| !placed[s]).collect();
        let pool: Vec<usize> = if order.is_empty() {
            candidates.clone()
        } else {
            let joined: Vec<usize> = candidates.iter().copied().filter(|&s| connected(s)).collect();
            if joined.is_empty() { candidates.clone() } else { joined }
        };
        let pick = pool
            .into_iter()
            .max_by_key(|&s| (bound_count(s), std::cmp::Reverse(s)))
            .expect("candidates remain");
        placed[pick] = true;
        order.push(pick);
    }

    // Partial assignments: one table row id per placed alias slot.
    let mut partials: Vec<Vec<usize>> = vec![Vec::new()];
    for (step, &slot) in order.iter().enumerate() {
        let placed_before: HashSet<usize> = order[..step].iter().copied().collect();
        let slot_of = |s: usize| order.iter().position(|&x| x == s).unwrap();

        let mut next: Vec<Vec<usize>> = Vec::new();
        for partial in &partials {
            // Fixed (position, value) constraints for this alias under the
            // current partial assignment.
            let mut fixed: Vec<(usize, &str)> = consts[slot].clone();
            for &((ls, lp), (rs, rp)) in &inter {
                if ls == slot && placed_before.contains(&rs) {
                    fixed.push((lp, table.rows[partial[slot_of(rs)]][rp].as_str()));
                } else if rs == slot && placed_before.contains(&ls) {
                    fixed.push((rp, table.rows[partial[slot_of(ls)]][lp].as_str()));
                }
            }
            let candidates: Vec<usize> = match fixed
                .iter()
                .map(|&(pos, value)| {
                    table.index[pos].get(value).map(Vec::as_slice).unwrap_or(&[])
                })
                .min_by_key(|postings| postings.len())
            {
                Some(postings) => postings.to_vec(),
                None => (0..table.rows.len()).collect(),
            };
            for id in candidates {
                let row = &table.rows[id];
                if !fixed.iter().all(|&(pos, value)| row[pos] == value) {
                    continue;
                }
                if !intra[slot].iter().all(|&(a, b)| row[a] == row[b]) {
                    continue;
                }
                let mut extended = partial.clone();
                extended.push(id);
                next.push(extended);
            }
        }
        partials = next;
        if partials.is_empty() {
            break;
        }
    }

    let slot_to_step: HashMap<usize, usize> =
        order.iter().enumerate().map(|(step, &slot)| (slot, step)).collect();
    let rows: Vec<Vec<String>> = partials
        .iter()
        .map(|partial| {
            projected
                .iter()
                .map(|p| match p {
                    Some((slot, pos)) => table.rows[partial[slot_to_step[slot]]][*pos].clone(),
                    None => "1".to_string(),
                })
                .collect()
        })
        .collect();

    Ok(SqlResultSet {
        columns: query.select.iter().map(|(_, name)| name.clone()).collect(),
        rows,
    })
}

/// Parses rendered flat SQL text back into its structure. This exists so
/// tests can check that rendering is lossless; it only understands the
/// Select/From/Where shape this module emits.
pub fn parse_flat_sql(text: &str) -> Result<FlatSqlQuery, SqlParseError> {
    let tokens = tokenize_sql(text)?;
    let mut pos = 0;
    let err = |m: &str| SqlParseError(m.to_string());

    let expect_keyword = |tokens: &[SqlToken], pos: &mut usize, word: &str| -> Result<(), SqlParseError> {
        match tokens.get(*pos) {
            Some(SqlToken::Word(w)) if w.eq_ignore_ascii_case(word) => {
                *pos += 1;
                Ok(())
            }
            other => Err(SqlParseError(format!("expected {word}, found {other:?}"))),
        }
    };
    let is_keyword = |tokens: &[SqlToken], pos: usize, word: &str| -> bool {
        matches!(tokens.get(pos), Some(SqlToken::Word(w)) if w.eq_ignore_ascii_case(word))
    };
    fn parse_column(tokens: &[SqlToken], pos: &mut usize) -> Result<ColumnRef, SqlParseError> {
        let Some(SqlToken::Word(alias)) = tokens.get(*pos) else {
            return Err(SqlParseError(format!("expected column ref, found {:?}", tokens.get(*pos))));
        };
        *pos += 1;
        if !matches!(tokens.get(*pos), Some(SqlToken::Dot)) {
            return Err(SqlParseError("expected '.' in column ref".to_string()));
        }
        *pos += 1;
        let Some(SqlToken::Word(col)) = tokens.get(*pos) else {
            return Err(SqlParseError("expected column name after '.'".to_string()));
        };
        *pos += 1;
        let position = match col.as_str() {
            "s" => Position::Subject,
            "p" => Position::Predicate,
            "o" => Position::Object,
            other => return Err(SqlParseError(format!("unknown column {other:?}"))),
        };
        Ok(ColumnRef { alias: alias.clone(), position })
    }

    expect_keyword(&tokens, &mut pos, "Select")?;
    let mut select = Vec::new();
    loop {
        let expr = if matches!(tokens.get(pos), Some(SqlToken::Word(w)) if w == "1") {
            pos += 1;
            SelectExpr::One
        } else {
            SelectExpr::Column(parse_column(&tokens, &mut pos)?)
        };
        expect_keyword(&tokens, &mut pos, "As")?;
        let Some(SqlToken::Word(name)) = tokens.get(pos) else {
            return Err(err("expected output name after As"));
        };
        pos += 1;
        select.push((expr, name.clone()));
        if matches!(tokens.get(pos), Some(SqlToken::Comma)) {
            pos += 1;
        } else {
            break;
        }
    }

    expect_keyword(&tokens, &mut pos, "From")?;
    let mut from = Vec::new();
    loop {
        match tokens.get(pos) {
            Some(SqlToken::Word(t)) if t == TABLE_NAME => pos += 1,
            other => return Err(SqlParseError(format!("expected table {TABLE_NAME}, found {other:?}"))),
        }
        let Some(SqlToken::Word(alias)) = tokens.get(pos) else {
            return Err(err("expected table alias"));
        };
        pos += 1;
        from.push(alias.clone());
        if matches!(tokens.get(pos), Some(SqlToken::Comma)) {
            pos += 1;
        } else {
            break;
        }
    }

    let mut where_conjuncts = Vec::new();
    if pos < tokens.len() {
        expect_keyword(&tokens, &mut pos, "Where")?;
        loop {
            let left = parse_column(&tokens, &mut pos)?;
            if !matches!(tokens.get(pos), Some(SqlToken::Equals)) {
                return Err(err("expected '=' in conjunct"));
            }
            pos += 1;
            match tokens.get(pos) {
                Some(SqlToken::Quoted(value)) => {
                    pos += 1;
                    where_conjuncts.push(Conjunct::ConstEq { column: left, value: value.clone() });
                }
                _ => {
                    let right = parse_column(&tokens, &mut pos)?;
                    where_conjuncts.push(Conjunct::ColEq { left, right });
                }
            }
            if is_keyword(&tokens, pos, "And") {
                pos += 1;
            } else {
                break;
            }
        }
    }
    if pos != tokens.len() {
        return Err(SqlParseError(format!("trailing tokens: {:?}", &tokens[pos..])));
    }
    Ok(FlatSqlQuery { select, from, where_conjuncts })
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum SqlToken {
    Word(String),
    Quoted(String),
    Dot,
    Comma,
    Equals,
}

fn tokenize_sql(text: &str) -> Result<Vec<SqlToken>, SqlParseError> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            c if c.is_whitespace() => {
                chars.next();
            }
            '.' => {
                chars.next();
                tokens.push(SqlToken::Dot);
            }
            ',' => {
                chars.next();
                tokens.push(SqlToken::Comma);
            }
            '=' => {
                chars.next();
                tokens.push(SqlToken::Equals);
            }
            '\'' => {
                chars.next();
                let mut value = String::new();
                loop {
                    match chars.next() {
                        Some('\'') => {
                            if chars.peek() == Some(&'\'') {
                                chars.next();
                                value.push('\'');
                            } else {
                                break;
                            }
                        }
                        Some(c) => value.push(c),
                        None => return Err(SqlParseError("unterminated string".to_string())),
                    }
                }
                tokens.push(SqlToken::Quoted(value));
            }
            c if c.is_ascii_alphanumeric() || c == '_' => {
                let mut word = String::new();
                while matches!(chars.peek(), Some(&c) if c.is_ascii_alphanumeric() || c == '_') {
                    word.push(chars.next().unwrap());
                }
                tokens.push(SqlToken::Word(word));
            }
            other => return Err(SqlParseError(format!("unexpected character {other:?}"))),
        }
    }
    Ok(tokens)
}
