//! A common querying surface over the two engines, plus the deterministic
//! TSV rendering both of them share. Binding rows come back as maps from
//! output column to canonical term string; zero-variable existence queries
//! use the single column `matched` with value `1` on both engines.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::matcher::{match_bgp_db, EvalOptions, MatchError};
use crate::model::Bgp;
use crate::sqlgen::{bgp_to_flat_sql, eval_flat_sql, SqlEvalError, SqlGenError, TripleTable};
use crate::store::WideColumnDb;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    SqlGen(#[from] SqlGenError),
    #[error(transparent)]
    SqlEval(#[from] SqlEvalError),
}

/// One evaluation: result rows plus, where the engine tracks it, the peak
/// intermediate bag size.
#[derive(Debug, Clone)]
pub struct EngineResult {
    pub rows: Vec<BTreeMap<String, String>>,
    pub peak_intermediate: Option<usize>,
}

pub trait QueryEngine {
    fn name(&self) -> &str;
    fn evaluate(&self, bgp: &Bgp) -> Result<EngineResult, EngineError>;
}

/// The wide-column engine: native basic-graph-pattern matching.
pub struct WideColumnEngine<'a> {
    db: &'a WideColumnDb,
    options: EvalOptions,
}

impl<'a> WideColumnEngine<'a> {
    pub fn new(db: &'a WideColumnDb) -> WideColumnEngine<'a> {
        WideColumnEngine { db, options: EvalOptions::default() }
    }

    pub fn with_options(db: &'a WideColumnDb, options: EvalOptions) -> WideColumnEngine<'a> {
        WideColumnEngine { db, options }
    }
}

impl QueryEngine for WideColumnEngine<'_> {
    fn name(&self) -> &str {
        "widecolumn"
    }

    fn evaluate(&self, bgp: &Bgp) -> Result<EngineResult, EngineError> {
        let bag = match_bgp_db(bgp, self.db, &self.options)?;
        let rows = bag
            .tuples()
            .iter()
            .map(|tuple| {
                if tuple.bindings.is_empty() {
                    BTreeMap::from([("matched".to_string(), "1".to_string())])
                } else {
                    tuple
                        .bindings
                        .iter()
                        .map(|(v, t)| (v.clone(), t.serialize()))
                        .collect()
                }
            })
            .collect();
        Ok(EngineResult {
            rows,
            peak_intermediate: Some(bag.peak_intermediate()),
        })
    }
}

/// The relational engine: translate to flat SQL, execute embedded.
pub struct SqlEngine<'a> {
    table: &'a TripleTable,
}

impl<'a> SqlEngine<'a> {
    pub fn new(table: &'a TripleTable) -> SqlEngine<'a> {
        SqlEngine { table }
    }
}

impl QueryEngine for SqlEngine<'_> {
    fn name(&self) -> &str {
        "sql"
    }

    fn evaluate(&self, bgp: &Bgp) -> Result<EngineResult, EngineError> {
        let query = bgp_to_flat_sql(bgp)?;
        let result = eval_flat_sql(&query, self.table)?;
        let rows = result
            .rows
            .into_iter()
            .map(|row| result.columns.iter().cloned().zip(row).collect())
            .collect();
        Ok(EngineResult { rows, peak_intermediate: None })
    }
}

/// Output columns for a query: its variables in first-mention order, or the
/// `matched` existence flag when it has none.
pub fn result_columns(bgp: &Bgp) -> Vec<String> {
    let vars = bgp.variables();
    if vars.is_empty() {
        vec!["matched".to_string()]
    } else {
        vars
    }
}

/// Renders result rows as TSV: a header of column names, rows sorted
/// lexicographically by all columns, and a trailing `# rows: N` line. Both
/// engines produce byte-identical output here for equivalent results.
pub fn render_tsv(columns: &[String], rows: &[BTreeMap<String, String>]) -> String {
    let mut lines: Vec<String> = rows
        .iter()
        .map(|row| {
            columns
                .iter()
                .map(|c| row.get(c).cloned().unwrap_or_default())
                .collect::<Vec<_>>()
                .join("\t")
        })
        .collect();
    lines.sort();

    let mut out = columns.join("\t");
    out.push('\n');
    for line in lines {
        out.push_str(&line);
        out.push('\n');
    }
    out.push_str(&format!("# rows: {}\n", rows.len()));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse_bgp_query, parse_triples, SAMPLE_TRIPLES};
    use crate::sqlgen::load_triple_table;
    use crate::store::DEFAULT_BATCH_SIZE;

    #[test]
    fn both_engines_render_identically_on_sample_data() {
        let triples = parse_triples(SAMPLE_TRIPLES).unwrap();
        let mut db = WideColumnDb::in_memory();
        db.ingest(&triples, DEFAULT_BATCH_SIZE).unwrap();
        let table = load_triple_table(&triples);

        for text in [
            "?x <memberOf> ?g .",
            "?x <type> <Student> .\n?x <memberOf> <IEEE> .",
            "?x <type> <Faculty> .\n?y <type> <Student> .",
            "<C> <type> <Student> .",
            "?x <type> <Nothing> .",
        ] {
            let bgp = parse_bgp_query(text).unwrap();
            let columns = result_columns(&bgp);
            let wide = WideColumnEngine::new(&db).evaluate(&bgp).unwrap();
            let sql = SqlEngine::new(&table).evaluate(&bgp).unwrap();
            assert_eq!(
                render_tsv(&columns, &wide.rows),
                render_tsv(&columns, &sql.rows),
                "engines disagree on {text}"
            );
        }
    }

    #[test]
    fn tsv_is_sorted_with_row_count_trailer() {
        let triples = parse_triples(SAMPLE_TRIPLES).unwrap();
        let mut db = WideColumnDb::in_memory();
        db.ingest(&triples, DEFAULT_BATCH_SIZE).unwrap();
        let bgp = parse_bgp_query("?x <memberOf> ?g .").unwrap();
        let result = WideColumnEngine::new(&db).evaluate(&bgp).unwrap();
        let tsv = render_tsv(&result_columns(&bgp), &result.rows);
        assert_eq!(
            tsv,
            "x\tg\n\
             <A>\t<ACM>\n\
             <A>\t<IEEE>\n\
             <C>\t<IEEE>\n\
             <S>\t<ACM>\n\
             # rows: 4\n"
        );
    }

    #[test]
    fn no_match_renders_header_and_zero_count() {
        let db = WideColumnDb::in_memory();
        let bgp = parse_bgp_query("?x <p> ?y .").unwrap();
        let result = WideColumnEngine::new(&db).evaluate(&bgp).unwrap();
        let tsv = render_tsv(&result_columns(&bgp), &result.rows);
        assert_eq!(tsv, "x\ty\n# rows: 0\n");
    }
}
