//! The wide-column database: two sorted sparse tables holding every triple
//! twice. `T_sp` keys rows by subject, `T_op` by object; both use the
//! predicate as column qualifier under a single column family `p`, and cells
//! hold sets of term serializations.
//!
//! Row keys, qualifiers and values are canonical term serializations, so the
//! BTreeMap ordering is exactly the lexicographic row-key order of the
//! schema. Persistence is one tab-separated file per table plus a `meta`
//! file carrying the format version and record counts.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

use crate::model::{Term, Triple};

const META_VERSION: &str = "tripled-db v1";

/// Default number of triples applied (and persisted) per ingest batch.
pub const DEFAULT_BATCH_SIZE: usize = 1000;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt {table} table at record {line}: {message}")]
    Corrupt {
        table: String,
        line: usize,
        message: String,
    },
    #[error("batch size must be at least 1")]
    InvalidBatchSize,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Which of the two tables a value belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    Tsp,
    Top,
}

impl TableKind {
    pub fn name(self) -> &'static str {
        match self {
            TableKind::Tsp => "tsp",
            TableKind::Top => "top",
        }
    }

    fn file_name(self) -> &'static str {
        match self {
            TableKind::Tsp => "tsp.tbl",
            TableKind::Top => "top.tbl",
        }
    }
}

type Row = BTreeMap<String, BTreeSet<String>>;

/// A sorted sparse map: row key -> column qualifier -> set of values.
#[derive(Debug, Clone)]
pub struct WideColumnTable {
    kind: TableKind,
    rows: BTreeMap<String, Row>,
}

/// Per-table row/column/value counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableStats {
    pub rows: usize,
    pub distinct_columns: usize,
    pub values: usize,
}

impl WideColumnTable {
    fn new(kind: TableKind) -> WideColumnTable {
        WideColumnTable {
            kind,
            rows: BTreeMap::new(),
        }
    }

    pub fn kind(&self) -> TableKind {
        self.kind
    }

    /// Inserts a value; returns true when it was not already present.
    fn insert(&mut self, key: &str, qualifier: &str, value: &str) -> bool {
        self.rows
            .entry(key.to_string())
            .or_default()
            .entry(qualifier.to_string())
            .or_default()
            .insert(value.to_string())
    }

    /// Removes a value, pruning empty cells and rows.
    fn remove(&mut self, key: &str, qualifier: &str, value: &str) {
        if let Some(row) = self.rows.get_mut(key) {
            if let Some(cell) = row.get_mut(qualifier) {
                cell.remove(value);
                if cell.is_empty() {
                    row.remove(qualifier);
                }
            }
            if row.is_empty() {
                self.rows.remove(key);
            }
        }
    }

    /// Row keys in lexicographic order.
    pub fn row_keys(&self) -> impl Iterator<Item = &str> {
        self.rows.keys().map(String::as_str)
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    /// The value set of one cell, if populated.
    pub fn cell(&self, key: &str, qualifier: &str) -> Option<&BTreeSet<String>> {
        self.rows.get(key).and_then(|row| row.get(qualifier))
    }

    /// Every populated (row key, qualifier, value) in table order.
    pub fn iter_values(&self) -> impl Iterator<Item = (&str, &str, &str)> {
        self.rows.iter().flat_map(|(key, row)| {
            row.iter().flat_map(move |(qualifier, cell)| {
                cell.iter()
                    .map(move |value| (key.as_str(), qualifier.as_str(), value.as_str()))
            })
        })
    }

    pub fn stats(&self) -> TableStats {
        let mut columns: BTreeSet<&str> = BTreeSet::new();
        let mut values = 0;
        for row in self.rows.values() {
            for (qualifier, cell) in row {
                columns.insert(qualifier);
                values += cell.len();
            }
        }
        TableStats {
            rows: self.rows.len(),
            distinct_columns: columns.len(),
            values,
        }
    }

    fn record_count(&self) -> usize {
        self.rows.values().map(|r| r.values().map(BTreeSet::len).sum::<usize>()).sum()
    }

    fn save(&self, dir: &Path) -> Result<(), StoreError> {
        let path = dir.join(self.kind.file_name());
        let tmp = dir.join(format!("{}.tmp", self.kind.file_name()));
        let mut out = Vec::new();
        for (key, row) in &self.rows {
            for (qualifier, cell) in row {
                for value in cell {
                    out.extend_from_slice(escape_field(key).as_bytes());
                    out.push(b'\t');
                    out.extend_from_slice(escape_field(qualifier).as_bytes());
                    out.push(b'\t');
                    out.extend_from_slice(escape_field(value).as_bytes());
                    out.push(b'\n');
                }
            }
        }
        fs::write(&tmp, out).map_err(io_err(&tmp))?;
        fs::rename(&tmp, &path).map_err(io_err(&path))?;
        Ok(())
    }

    fn load(kind: TableKind, dir: &Path, expected_records: usize) -> Result<WideColumnTable, StoreError> {
        let path = dir.join(kind.file_name());
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let mut table = WideColumnTable::new(kind);
        let corrupt = |line: usize, message: String| StoreError::Corrupt {
            table: kind.name().to_string(),
            line,
            message,
        };
        let mut records = 0;
        for (idx, record) in text.lines().enumerate() {
            let line = idx + 1;
            let fields: Vec<&str> = record.split('\t').collect();
            if fields.len() != 3 {
                return Err(corrupt(line, format!("expected 3 fields, found {}", fields.len())));
            }
            let mut unescaped = Vec::with_capacity(3);
            for f in &fields {
                unescaped.push(unescape_field(f).map_err(|e| corrupt(line, e))?);
            }
            // Every field must be a valid canonical term; qualifiers and the
            // key/value holding the triple's subject must be IRIs.
            for (i, f) in unescaped.iter().enumerate() {
                let term = Term::parse(f).map_err(|e| corrupt(line, e.to_string()))?;
                let must_be_iri = match (kind, i) {
                    (_, 1) => true,                 // predicate qualifier
                    (TableKind::Tsp, 0) => true,    // subject row key
                    (TableKind::Top, 2) => true,    // subject value
                    _ => false,
                };
                if must_be_iri && !term.is_iri() {
                    return Err(corrupt(line, format!("expected IRI, found {f}")));
                }
            }
            table.insert(&unescaped[0], &unescaped[1], &unescaped[2]);
            records += 1;
        }
        if records != expected_records {
            return Err(corrupt(
                records + 1,
                format!("meta records {expected_records}, file holds {records} (truncated?)"),
            ));
        }
        Ok(table)
    }
}

/// Outcome of one ingest call: how many triples were presented and how many
/// were new to the store.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IngestReport {
    pub seen: usize,
    pub stored: usize,
}

/// The two-table database. Every triple (s, p, o) is stored twice: as value
/// `o` in row `s` of `T_sp` and as value `s` in row `o` of `T_op`, both
/// under qualifier `p`.
#[derive(Debug)]
pub struct WideColumnDb {
    dir: Option<PathBuf>,
    tsp: WideColumnTable,
    top: WideColumnTable,
    read_ops: AtomicU64,
}

impl WideColumnDb {
    /// An unpersisted database.
    pub fn in_memory() -> WideColumnDb {
        WideColumnDb {
            dir: None,
            tsp: WideColumnTable::new(TableKind::Tsp),
            top: WideColumnTable::new(TableKind::Top),
            read_ops: AtomicU64::new(0),
        }
    }

    /// Opens (creating if absent) a database directory and loads its tables.
    pub fn open(dir: impl Into<PathBuf>) -> Result<WideColumnDb, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let meta_path = dir.join("meta");
        if !meta_path.exists() {
            return Ok(WideColumnDb {
                dir: Some(dir),
                tsp: WideColumnTable::new(TableKind::Tsp),
                top: WideColumnTable::new(TableKind::Top),
                read_ops: AtomicU64::new(0),
            });
        }
        let meta = fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?;
        let mut lines = meta.lines();
        let version = lines.next().unwrap_or_default();
        if version != META_VERSION {
            return Err(StoreError::Corrupt {
                table: "meta".to_string(),
                line: 1,
                message: format!("unsupported format version {version:?}"),
            });
        }
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for (idx, line) in lines.enumerate() {
            let mut parts = line.split_whitespace();
            let (Some(name), Some(count)) = (parts.next(), parts.next()) else {
                return Err(StoreError::Corrupt {
                    table: "meta".to_string(),
                    line: idx + 2,
                    message: format!("malformed count line {line:?}"),
                });
            };
            let count = count.parse().map_err(|_| StoreError::Corrupt {
                table: "meta".to_string(),
                line: idx + 2,
                message: format!("malformed count {count:?}"),
            })?;
            counts.insert(name, count);
        }
        let tsp_records = counts.get("tsp").copied().unwrap_or(0);
        let top_records = counts.get("top").copied().unwrap_or(0);
        let tsp = WideColumnTable::load(TableKind::Tsp, &dir, tsp_records)?;
        let top = WideColumnTable::load(TableKind::Top, &dir, top_records)?;
        Ok(WideColumnDb {
            dir: Some(dir),
            tsp,
            top,
            read_ops: AtomicU64::new(0),
        })
    }

    pub fn tsp(&self) -> &WideColumnTable {
        &self.tsp
    }

    pub fn top(&self) -> &WideColumnTable {
        &self.top
    }

    /// Ingests triples in batches. Each triple is written to both tables;
    /// re-ingesting an existing triple leaves the store unchanged. When the
    /// database is directory-backed, each batch is persisted as it is
    /// applied; a persistence failure rolls the current batch back and keeps
    /// every previously committed batch.
    pub fn ingest(
        &mut self,
        triples: &[Triple],
        batch_size: usize,
    ) -> Result<IngestReport, StoreError> {
        if batch_size == 0 {
            return Err(StoreError::InvalidBatchSize);
        }
        let mut report = IngestReport { seen: 0, stored: 0 };
        for batch in triples.chunks(batch_size) {
            // Delta of values actually added, for rollback on persist failure.
            let mut delta: Vec<(String, String, String)> = Vec::new();
            for triple in batch {
                report.seen += 1;
                let s = triple.s.serialize();
                let p = triple.p.serialize();
                let o = triple.o.serialize();
                let new = self.tsp.insert(&s, &p, &o);
                self.top.insert(&o, &p, &s);
                if new {
                    report.stored += 1;
                    delta.push((s, p, o));
                }
            }
            if let Err(e) = self.flush() {
                for (s, p, o) in &delta {
                    self.tsp.remove(s, p, o);
                    self.top.remove(o, p, s);
                }
                return Err(e);
            }
        }
        Ok(report)
    }

    /// Writes both tables and the meta file when directory-backed.
    pub fn flush(&self) -> Result<(), StoreError> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        self.tsp.save(dir)?;
        self.top.save(dir)?;
        let meta = format!(
            "{META_VERSION}\ntsp {}\ntop {}\n",
            self.tsp.record_count(),
            self.top.record_count()
        );
        let meta_path = dir.join("meta");
        let tmp = dir.join("meta.tmp");
        let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(meta.as_bytes()).map_err(io_err(&tmp))?;
        fs::rename(&tmp, &meta_path).map_err(io_err(&meta_path))?;
        Ok(())
    }

    /// Flushes and drops the handle.
    pub fn close(self) -> Result<(), StoreError> {
        self.flush()
    }

    /// Number of retrieval operations (keyed gets and scans) served so far.
    pub fn read_count(&self) -> u64 {
        self.read_ops.load(Ordering::Relaxed)
    }

    fn decode(serialized: &str) -> Term {
        Term::parse(serialized).expect("stored terms are canonical")
    }

    /// All triples in row `s` of `T_sp`, restricted to predicate column `p`
    /// when given. An absent row yields an empty bag.
    pub fn get_by_subject(&self, s: &Term, p: Option<&Term>) -> Vec<Triple> {
        self.read_ops.fetch_add(1, Ordering::Relaxed);
        let mut out = Vec::new();
        let Some(row) = self.tsp.rows.get(&s.serialize()) else {
            return out;
        };
        match p {
            Some(p) => {
                if let Some(cell) = row.get(&p.serialize()) {
                    for value in cell {
                        out.push(Triple {
                            s: s.clone(),
                            p: p.clone(),
                            o: Self::decode(value),
                        });
                    }
                }
            }
            None => {
                for (qualifier, cell) in row {
                    let p = Self::decode(qualifier);
                    for value in cell {
                        out.push(Triple {
                            s: s.clone(),
                            p: p.clone(),
                            o: Self::decode(value),
                        });
                    }
                }
            }
        }
        out
    }

    /// All triples in row `o` of `T_op`; triples are reconstructed as
    /// (value, qualifier, row key).
    pub fn get_by_object(&self, o: &Term, p: Option<&Term>) -> Vec<Triple> {
        self.read_ops.fetch_add(1, Ordering::Relaxed);
        let mut out = Vec::new();
        let Some(row) = self.top.rows.get(&o.serialize()) else {
            return out;
        };
        match p {
            Some(p) => {
                if let Some(cell) = row.get(&p.serialize()) {
                    for value in cell {
                        out.push(Triple {
                            s: Self::decode(value),
                            p: p.clone(),
                            o: o.clone(),
                        });
                    }
                }
            }
            None => {
                for (qualifier, cell) in row {
                    let p = Self::decode(qualifier);
                    for value in cell {
                        out.push(Triple {
                            s: Self::decode(value),
                            p: p.clone(),
                            o: o.clone(),
                        });
                    }
                }
            }
        }
        out
    }

    /// Full scan over `T_sp`, restricted to one predicate column when given.
    pub fn scan_all(&self, p: Option<&Term>) -> Vec<Triple> {
        self.read_ops.fetch_add(1, Ordering::Relaxed);
        let qualifier = p.map(Term::serialize);
        let mut out = Vec::new();
        for (key, row) in &self.tsp.rows {
            let s = Self::decode(key);
            match &qualifier {
                Some(q) => {
                    if let Some(cell) = row.get(q) {
                        let p = p.unwrap().clone();
                        for value in cell {
                            out.push(Triple {
                                s: s.clone(),
                                p: p.clone(),
                                o: Self::decode(value),
                            });
                        }
                    }
                }
                None => {
                    for (qual, cell) in row {
                        let p = Self::decode(qual);
                        for value in cell {
                            out.push(Triple {
                                s: s.clone(),
                                p: p.clone(),
                                o: Self::decode(value),
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

/// Escapes tab, newline, carriage return and backslash so any canonical term
/// fits in one tab-separated record field.
pub(crate) fn escape_field(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

pub(crate) fn unescape_field(s: &str) -> Result<String, String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(c) => return Err(format!("invalid field escape \\{c}")),
            None => return Err("dangling backslash in field".to_string()),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse_triples, SAMPLE_TRIPLES};

    fn iri(s: &str) -> Term {
        Term::iri(s).unwrap()
    }

    fn sample_db() -> WideColumnDb {
        let mut db = WideColumnDb::in_memory();
        db.ingest(&parse_triples(SAMPLE_TRIPLES).unwrap(), DEFAULT_BATCH_SIZE)
            .unwrap();
        db
    }

    #[test]
    fn sample_instance_layout() {
        let db = sample_db();
        let tsp_keys: Vec<&str> = db.tsp().row_keys().collect();
        assert_eq!(tsp_keys, vec!["<A>", "<C>", "<S>"]);
        assert_eq!(db.top().row_count(), 7);

        let cell = db.tsp().cell("<A>", "<memberOf>").unwrap();
        let values: Vec<&str> = cell.iter().map(String::as_str).collect();
        assert_eq!(values, vec!["<ACM>", "<IEEE>"]);
    }

    #[test]
    fn reingest_is_a_noop() {
        let mut db = sample_db();
        let before = db.tsp().stats();
        let report = db
            .ingest(&parse_triples(SAMPLE_TRIPLES).unwrap(), 3)
            .unwrap();
        assert_eq!(report, IngestReport { seen: 10, stored: 0 });
        assert_eq!(db.tsp().stats(), before);
    }

    #[test]
    fn duplicated_input_counted_once() {
        let mut triples = parse_triples(SAMPLE_TRIPLES).unwrap();
        triples.extend(parse_triples(SAMPLE_TRIPLES).unwrap());
        let mut db = WideColumnDb::in_memory();
        let report = db.ingest(&triples, DEFAULT_BATCH_SIZE).unwrap();
        assert_eq!(report, IngestReport { seen: 20, stored: 10 });
    }

    #[test]
    fn get_by_subject_examples() {
        let db = sample_db();
        let got = db.get_by_subject(&iri("A"), Some(&iri("memberOf")));
        let objects: Vec<String> = got.iter().map(|t| t.o.serialize()).collect();
        assert_eq!(objects, vec!["<ACM>", "<IEEE>"]);

        assert_eq!(db.get_by_subject(&iri("C"), None).len(), 3);
        assert!(db.get_by_subject(&iri("Z"), None).is_empty());
    }

    #[test]
    fn get_by_object_examples() {
        let db = sample_db();
        let got = db.get_by_object(&iri("Student"), Some(&iri("type")));
        let subjects: Vec<String> = got.iter().map(|t| t.s.serialize()).collect();
        assert_eq!(subjects, vec!["<C>", "<S>"]);

        let got = db.get_by_object(&Term::literal("Artem"), Some(&iri("name")));
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].s, iri("A"));

        // Row <IEEE> exists, but has no `type` column.
        assert!(db.get_by_object(&iri("IEEE"), Some(&iri("type"))).is_empty());
    }

    #[test]
    fn scan_all_examples() {
        let db = sample_db();
        assert_eq!(db.scan_all(Some(&iri("memberOf"))).len(), 4);
        assert_eq!(db.scan_all(None).len(), 10);
        assert!(db.scan_all(Some(&iri("unknownPred"))).is_empty());
    }

    #[test]
    fn read_counter_counts_retrievals() {
        let db = sample_db();
        assert_eq!(db.read_count(), 0);
        db.get_by_subject(&iri("C"), None);
        db.get_by_object(&iri("IEEE"), None);
        db.scan_all(None);
        assert_eq!(db.read_count(), 3);
    }

    #[test]
    fn stats_report_populated_cells_only() {
        let db = sample_db();
        assert_eq!(
            db.tsp().stats(),
            TableStats { rows: 3, distinct_columns: 3, values: 10 }
        );
        assert_eq!(
            db.top().stats(),
            TableStats { rows: 7, distinct_columns: 3, values: 10 }
        );
    }

    #[test]
    fn persistence_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut db = WideColumnDb::open(dir.path()).unwrap();
        db.ingest(&parse_triples(SAMPLE_TRIPLES).unwrap(), 4).unwrap();
        db.close().unwrap();

        let db = WideColumnDb::open(dir.path()).unwrap();
        assert_eq!(db.tsp().row_count(), 3);
        assert_eq!(db.top().row_count(), 7);
        assert_eq!(db.scan_all(None).len(), 10);
    }

    #[test]
    fn open_on_empty_dir_is_empty() {
        let dir = tempfile::tempdir().unwrap();
        let db = WideColumnDb::open(dir.path()).unwrap();
        assert_eq!(
            db.tsp().stats(),
            TableStats { rows: 0, distinct_columns: 0, values: 0 }
        );
    }

    #[test]
    fn truncated_table_file_is_a_load_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut db = WideColumnDb::open(dir.path()).unwrap();
        db.ingest(&parse_triples(SAMPLE_TRIPLES).unwrap(), DEFAULT_BATCH_SIZE)
            .unwrap();
        db.close().unwrap();

        let path = dir.path().join("tsp.tbl");
        let content = fs::read_to_string(&path).unwrap();
        fs::write(&path, &content[..content.len() / 2]).unwrap();

        let err = WideColumnDb::open(dir.path()).unwrap_err();
        match err {
            StoreError::Corrupt { table, .. } => assert_eq!(table, "tsp"),
            other => panic!("expected corruption error, got {other}"),
        }
    }

    #[test]
    fn garbled_record_is_a_load_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut db = WideColumnDb::open(dir.path()).unwrap();
        db.ingest(&parse_triples(SAMPLE_TRIPLES).unwrap(), DEFAULT_BATCH_SIZE)
            .unwrap();
        db.close().unwrap();

        let path = dir.path().join("top.tbl");
        let mut content = fs::read_to_string(&path).unwrap();
        content.push_str("only-two\tfields\n");
        fs::write(&path, content).unwrap();

        let err = WideColumnDb::open(dir.path()).unwrap_err();
        match err {
            StoreError::Corrupt { table, line, .. } => {
                assert_eq!(table, "top");
                assert_eq!(line, 11);
            }
            other => panic!("expected corruption error, got {other}"),
        }
    }

    #[test]
    fn failed_batch_rolls_back_committed_batches_remain() {
        let dir = tempfile::tempdir().unwrap();
        let mut db = WideColumnDb::open(dir.path()).unwrap();
        let triples = parse_triples(SAMPLE_TRIPLES).unwrap();
        db.ingest(&triples[..4], DEFAULT_BATCH_SIZE).unwrap();

        // Block the temp-file path so the next flush fails.
        fs::create_dir(dir.path().join("tsp.tbl.tmp")).unwrap();
        let err = db.ingest(&triples[4..], DEFAULT_BATCH_SIZE).unwrap_err();
        assert!(matches!(err, StoreError::Io { .. }), "{err}");
        assert_eq!(db.scan_all(None).len(), 4, "aborted batch must roll back");

        fs::remove_dir(dir.path().join("tsp.tbl.tmp")).unwrap();
        db.ingest(&triples[4..], DEFAULT_BATCH_SIZE).unwrap();
        db.close().unwrap();
        let db = WideColumnDb::open(dir.path()).unwrap();
        assert_eq!(db.scan_all(None).len(), 10);
    }

    #[test]
    fn fields_with_tabs_and_newlines_survive_persistence() {
        let dir = tempfile::tempdir().unwrap();
        let mut db = WideColumnDb::open(dir.path()).unwrap();
        let awkward = Triple::new(
            iri("s"),
            iri("p"),
            Term::literal("tab\there\nand \\ newline"),
        )
        .unwrap();
        db.ingest(std::slice::from_ref(&awkward), 1).unwrap();
        db.close().unwrap();

        let db = WideColumnDb::open(dir.path()).unwrap();
        assert_eq!(db.scan_all(None), vec![awkward]);
    }
}
