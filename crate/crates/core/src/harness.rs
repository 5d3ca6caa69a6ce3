//! Synthetic datasets shaped like the benchmark corpora, a query catalog
//! covering the benchmarked pattern counts, and a runner that times both
//! engines on the same queries after checking that they agree.
//!
//! Generation is a pure function of (shape, scale, seed): the pc3 shape
//! emits chained workflow-provenance records at roughly 700 triples per
//! run, the university shape emits students, faculty and courses with
//! enrollment and teaching edges. Structure counts are fixed so triple
//! counts scale exactly linearly; the seed varies which edges are drawn.

use std::fmt;
use std::time::{Duration, Instant};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::engine::{EngineError, QueryEngine};
use crate::model::{Bgp, Term, Triple};
use crate::parse::parse_bgp_query;

/// Dataset shape: workflow-provenance chains or mini university graphs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenShape {
    Pc3,
    University,
}

impl GenShape {
    pub fn name(self) -> &'static str {
        match self {
            GenShape::Pc3 => "pc3",
            GenShape::University => "university",
        }
    }
}

impl std::str::FromStr for GenShape {
    type Err = String;

    fn from_str(s: &str) -> Result<GenShape, String> {
        match s {
            "pc3" => Ok(GenShape::Pc3),
            "university" => Ok(GenShape::University),
            other => Err(format!("unknown shape {other:?} (expected pc3 or university)")),
        }
    }
}

/// Parameters of one generated dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenSpec {
    pub shape: GenShape,
    pub scale: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("scale must be at least 1")]
pub struct InvalidScale;

const PC3_STEPS: usize = 78; // 9 triples per step gives ~700 per run

fn iri(s: String) -> Term {
    Term::iri(s).expect("generated IRIs are valid")
}

fn named(s: &str) -> Term {
    Term::iri(s).expect("static IRIs are valid")
}

fn triple(s: Term, p: Term, o: Term) -> Triple {
    Triple::new(s, p, o).expect("generated triples are valid")
}

/// Generates the dataset for a spec. Identical specs produce identical
/// triple lists (and therefore byte-identical files).
pub fn generate(spec: &GenSpec) -> Result<Vec<Triple>, InvalidScale> {
    if spec.scale == 0 {
        return Err(InvalidScale);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let triples = match spec.shape {
        GenShape::Pc3 => generate_pc3(spec.scale, &mut rng),
        GenShape::University => generate_university(spec.scale, &mut rng),
    };
    Ok(triples)
}

/// Renders triples in the line-oriented file format.
pub fn triples_to_file(triples: &[Triple]) -> String {
    let mut out = String::new();
    for t in triples {
        out.push_str(&t.to_string());
        out.push('\n');
    }
    out
}

fn generate_pc3(runs: u64, rng: &mut ChaCha8Rng) -> Vec<Triple> {
    let p_type = named("type");
    let p_name = named("name");
    let p_part_of = named("partOf");
    let p_status = named("status");
    let p_follows = named("follows");
    let p_generated_by = named("generatedBy");
    let p_used = named("used");
    let c_run = named("WorkflowRun");
    let c_step = named("ProcessStep");
    let c_artifact = named("Artifact");

    let mut out = Vec::with_capacity(runs as usize * 9 * PC3_STEPS);
    for r in 0..runs {
        let run = iri(format!("pc3/run{r}"));
        out.push(triple(run.clone(), p_type.clone(), c_run.clone()));
        out.push(triple(run.clone(), p_name.clone(), Term::literal(format!("workflow run {r}"))));
        for i in 0..PC3_STEPS {
            let step = iri(format!("pc3/run{r}/step{i}"));
            let artifact = iri(format!("pc3/run{r}/art{i}"));
            // The first two steps always succeed, so chained-status queries
            // have answers at every seed.
            let status = if i < 2 || rng.gen_bool(0.8) { "ok" } else { "warn" };
            out.push(triple(step.clone(), p_type.clone(), c_step.clone()));
            out.push(triple(step.clone(), p_part_of.clone(), run.clone()));
            out.push(triple(step.clone(), p_name.clone(), Term::literal(format!("step {i}"))));
            out.push(triple(step.clone(), p_status.clone(), Term::literal(status)));
            out.push(triple(artifact.clone(), p_type.clone(), c_artifact.clone()));
            out.push(triple(artifact.clone(), p_generated_by.clone(), step.clone()));
            out.push(triple(
                artifact.clone(),
                p_name.clone(),
                Term::literal(format!("artifact {r}/{i}")),
            ));
            if i > 0 {
                let prev_step = iri(format!("pc3/run{r}/step{}", i - 1));
                let prev_artifact = iri(format!("pc3/run{r}/art{}", i - 1));
                out.push(triple(step.clone(), p_follows.clone(), prev_step));
                out.push(triple(step.clone(), p_used.clone(), prev_artifact));
            }
        }
    }
    out
}

const UNI_FACULTY: usize = 4;
const UNI_COURSES: usize = 10;
const UNI_STUDENTS: usize = 30;

fn generate_university(universities: u64, rng: &mut ChaCha8Rng) -> Vec<Triple> {
    let p_type = named("type");
    let p_name = named("name");
    let p_member_of = named("memberOf");
    let p_takes = named("takesCourse");
    let p_teaches = named("teacherOf");
    let c_student = named("Student");
    let c_faculty = named("Faculty");
    let c_course = named("Course");
    let orgs = [named("IEEE"), named("ACM")];

    let mut out = Vec::new();
    for u in 0..universities {
        let courses: Vec<Term> = (0..UNI_COURSES)
            .map(|c| iri(format!("uni{u}/course{c}")))
            .collect();
        for (c, course) in courses.iter().enumerate() {
            out.push(triple(course.clone(), p_type.clone(), c_course.clone()));
            out.push(triple(course.clone(), p_name.clone(), Term::literal(format!("course {u}.{c}"))));
        }
        for f in 0..UNI_FACULTY {
            let prof = iri(format!("uni{u}/prof{f}"));
            out.push(triple(prof.clone(), p_type.clone(), c_faculty.clone()));
            out.push(triple(prof.clone(), p_name.clone(), Term::literal(format!("prof {u}.{f}"))));
            // prof0 is pinned to IEEE and course0 so the catalog's joins are
            // answerable regardless of seed.
            let org = if f == 0 { orgs[0].clone() } else { orgs.choose(rng).unwrap().clone() };
            out.push(triple(prof.clone(), p_member_of.clone(), org));
            let taught = pick_two(rng, UNI_COURSES, (f == 0).then_some(0));
            for c in taught {
                out.push(triple(prof.clone(), p_teaches.clone(), courses[c].clone()));
            }
        }
        for s in 0..UNI_STUDENTS {
            let student = iri(format!("uni{u}/student{s}"));
            out.push(triple(student.clone(), p_type.clone(), c_student.clone()));
            out.push(triple(student.clone(), p_name.clone(), Term::literal(format!("student {u}.{s}"))));
            out.push(triple(
                student.clone(),
                p_member_of.clone(),
                orgs.choose(rng).unwrap().clone(),
            ));
            let taken = pick_two(rng, UNI_COURSES, (s == 0).then_some(0));
            for c in taken {
                out.push(triple(student.clone(), p_takes.clone(), courses[c].clone()));
            }
        }
    }
    out
}

/// Two distinct indices in 0..n, optionally forcing one of them.
fn pick_two(rng: &mut ChaCha8Rng, n: usize, forced: Option<usize>) -> Vec<usize> {
    let first = forced.unwrap_or_else(|| rng.gen_range(0..n));
    let mut second = rng.gen_range(0..n - 1);
    if second >= first {
        second += 1;
    }
    vec![first, second]
}

/// A named catalog query. `extension` marks queries added beyond the
/// benchmarked pattern counts (the 3-pattern university query).
#[derive(Debug, Clone)]
pub struct CatalogQuery {
    pub name: String,
    pub text: String,
    pub bgp: Bgp,
    pub extension: bool,
}

impl CatalogQuery {
    fn new(name: &str, text: &str, extension: bool) -> CatalogQuery {
        CatalogQuery::parse(name, text, extension).expect("catalog queries parse")
    }

    /// Builds a catalog entry from query text.
    pub fn parse(
        name: &str,
        text: &str,
        extension: bool,
    ) -> Result<CatalogQuery, crate::parse::ParseError> {
        Ok(CatalogQuery {
            name: name.to_string(),
            text: text.to_string(),
            bgp: parse_bgp_query(text)?,
            extension,
        })
    }

    pub fn pattern_count(&self) -> usize {
        self.bgp.len()
    }
}

/// The query catalog for a shape. University queries cover pattern counts
/// 1, 2, 4, 5 and 6 (with a 3-pattern extension), including analogs of the
/// benchmark's single-pattern large-result query and of Q7; pc3 queries
/// have 1, 3 and 6 patterns.
pub fn query_catalog(shape: GenShape) -> Vec<CatalogQuery> {
    match shape {
        GenShape::Pc3 => vec![
            CatalogQuery::new("pc3-q1", "<pc3/run0/step0> ?p ?o .", false),
            CatalogQuery::new(
                "pc3-q2",
                "?s <partOf> <pc3/run0> .\n\
                 ?a <generatedBy> ?s .\n\
                 ?a <name> ?n .",
                false,
            ),
            CatalogQuery::new(
                "pc3-q3",
                "?s1 <partOf> <pc3/run0> .\n\
                 ?s2 <follows> ?s1 .\n\
                 ?s2 <status> \"ok\" .\n\
                 ?a1 <generatedBy> ?s1 .\n\
                 ?s2 <used> ?a1 .\n\
                 ?a2 <generatedBy> ?s2 .",
                false,
            ),
        ],
        GenShape::University => vec![
            CatalogQuery::new("u1-students", "?X <type> <Student> .", false),
            CatalogQuery::new(
                "u2-ieee-faculty",
                "?X <type> <Faculty> .\n?X <memberOf> <IEEE> .",
                false,
            ),
            CatalogQuery::new(
                "u3-course-names",
                "?X <type> <Student> .\n?X <takesCourse> ?C .\n?C <name> ?N .",
                true,
            ),
            CatalogQuery::new(
                "u4-q7",
                "?X <type> <Student> .\n\
                 ?Y <type> <Course> .\n\
                 <uni0/prof0> <teacherOf> ?Y .\n\
                 ?X <takesCourse> ?Y .",
                false,
            ),
            CatalogQuery::new(
                "u5-taught-courses",
                "?X <type> <Student> .\n\
                 ?X <takesCourse> ?C .\n\
                 ?C <type> <Course> .\n\
                 ?P <teacherOf> ?C .\n\
                 ?P <type> <Faculty> .",
                false,
            ),
            CatalogQuery::new(
                "u6-taught-courses-orgs",
                "?X <type> <Student> .\n\
                 ?X <takesCourse> ?C .\n\
                 ?C <type> <Course> .\n\
                 ?P <teacherOf> ?C .\n\
                 ?P <type> <Faculty> .\n\
                 ?P <memberOf> ?G .",
                false,
            ),
        ],
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("no queries to run")]
    NoQueries,
    #[error("no engines to run")]
    NoEngines,
    #[error("result count mismatch on query {query:?}: {details}")]
    CountMismatch { query: String, details: String },
    #[error("query {query:?} failed on engine {engine:?}: {source}")]
    Engine {
        query: String,
        engine: String,
        #[source]
        source: EngineError,
    },
}

/// One (engine, query) measurement.
#[derive(Debug, Clone)]
pub struct BenchEntry {
    pub engine: String,
    pub query: String,
    pub patterns: usize,
    pub rows: usize,
    pub median: Duration,
    pub peak_intermediate: Option<usize>,
}

/// A full run: one entry per (engine, query), in catalog-then-engine order.
#[derive(Debug, Clone, Default)]
pub struct BenchReport {
    pub entries: Vec<BenchEntry>,
}

impl BenchReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("engine\tquery\tpatterns\trows\tmedian_us\tpeak_bag\n");
        for e in &self.entries {
            let peak = e
                .peak_intermediate
                .map(|p| p.to_string())
                .unwrap_or_default();
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                e.engine,
                e.query,
                e.patterns,
                e.rows,
                e.median.as_micros(),
                peak
            ));
        }
        out
    }
}

impl fmt::Display for BenchReport {
    /// Human-readable aligned table.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let headers = ["engine", "query", "patterns", "rows", "median_us", "peak_bag"];
        let rows: Vec<[String; 6]> = self
            .entries
            .iter()
            .map(|e| {
                [
                    e.engine.clone(),
                    e.query.clone(),
                    e.patterns.to_string(),
                    e.rows.to_string(),
                    e.median.as_micros().to_string(),
                    e.peak_intermediate.map(|p| p.to_string()).unwrap_or_else(|| "-".into()),
                ]
            })
            .collect();
        let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
        for row in &rows {
            for (i, cell) in row.iter().enumerate() {
                widths[i] = widths[i].max(cell.len());
            }
        }
        for (i, h) in headers.iter().enumerate() {
            if i > 0 {
                write!(f, "  ")?;
            }
            write!(f, "{h:<width$}", width = widths[i])?;
        }
        writeln!(f)?;
        for row in &rows {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    write!(f, "  ")?;
                }
                write!(f, "{cell:<width$}", width = widths[i])?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Runs every catalog query on every engine. Each query is first evaluated
/// once per engine to warm caches and check that all engines agree on the
/// result count; on a mismatch the run aborts without reporting any timing.
/// Timings are the median of `repeats` (at least 3) further evaluations.
pub fn run_bench(
    catalog: &[CatalogQuery],
    engines: &[&dyn QueryEngine],
    repeats: usize,
) -> Result<BenchReport, BenchError> {
    if catalog.is_empty() {
        return Err(BenchError::NoQueries);
    }
    if engines.is_empty() {
        return Err(BenchError::NoEngines);
    }
    let repeats = repeats.max(3);
    let mut report = BenchReport::default();

    for query in catalog {
        let mut warm: Vec<(usize, Option<usize>)> = Vec::new();
        for engine in engines {
            let result = engine.evaluate(&query.bgp).map_err(|source| BenchError::Engine {
                query: query.name.to_string(),
                engine: engine.name().to_string(),
                source,
            })?;
            warm.push((result.rows.len(), result.peak_intermediate));
        }
        let first_count = warm[0].0;
        if warm.iter().any(|&(count, _)| count != first_count) {
            let details = engines
                .iter()
                .zip(&warm)
                .map(|(e, &(count, _))| format!("{}={}", e.name(), count))
                .collect::<Vec<_>>()
                .join(", ");
            return Err(BenchError::CountMismatch {
                query: query.name.to_string(),
                details,
            });
        }

        for (engine, &(rows, peak_intermediate)) in engines.iter().zip(&warm) {
            let mut times: Vec<Duration> = (0..repeats)
                .map(|_| {
                    let start = Instant::now();
                    let _ = engine.evaluate(&query.bgp);
                    start.elapsed()
                })
                .collect();
            times.sort();
            report.entries.push(BenchEntry {
                engine: engine.name().to_string(),
                query: query.name.to_string(),
                patterns: query.pattern_count(),
                rows,
                median: times[times.len() / 2],
                peak_intermediate,
            });
        }
    }
    Ok(report)
}
