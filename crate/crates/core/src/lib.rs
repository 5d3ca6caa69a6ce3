//! A dual-engine RDF store for basic graph patterns.
//!
//! Triples are kept twice over: in a wide-column database of two sorted
//! sparse tables keyed by subject and by object (queried natively with
//! selectivity-ordered index-nested-loop joins), and in a single relational
//! triple table `T(s, p, o)` (queried by translating the pattern into one
//! flat SQL query and executing it with an embedded evaluator). Both
//! engines answer the same queries, so each checks the other.
//!
//! Modules:
//! - [`model`] — terms, triples, patterns and the pattern/triple matcher;
//! - [`parse`] — the triple file and query text formats;
//! - [`store`] — the two-table wide-column database with file persistence;
//! - [`matcher`] — native basic-graph-pattern evaluation;
//! - [`sqlgen`] — the flat-SQL translation and its embedded evaluator;
//! - [`engine`] — one querying surface over both engines;
//! - [`harness`] — dataset generation, the query catalog and the bench runner.

pub mod engine;
pub mod harness;
pub mod matcher;
pub mod model;
pub mod parse;
pub mod sqlgen;
pub mod store;

pub use model::{Bgp, PatternTerm, Term, Triple, TriplePattern};
