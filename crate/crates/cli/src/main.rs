//! `tripled` — command-line front end tying the two engines together.
//!
//! A database directory holds both engine images side by side: the
//! wide-column tables (`tsp.tbl`, `top.tbl`, `meta`) and the relational
//! triple table (`t.tbl`), so one `load` serves both `--engine` choices.
//!
//! Exit codes: 1 for parse/usage errors, 2 for I/O and data errors, 3 when
//! a query exceeds the intermediate result cap.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use tripled_core::engine::{render_tsv, result_columns, QueryEngine, SqlEngine, WideColumnEngine};
use tripled_core::harness::{
    generate, query_catalog, run_bench, triples_to_file, BenchError, CatalogQuery, GenShape,
    GenSpec,
};
use tripled_core::matcher::{EvalOptions, MatchError, DEFAULT_BAG_CAP};
use tripled_core::parse::{parse_bgp_query, parse_triples};
use tripled_core::sqlgen::{bgp_to_flat_sql, TripleTable};
use tripled_core::store::{WideColumnDb, DEFAULT_BATCH_SIZE};

#[derive(Parser)]
#[command(name = "tripled", version, about = "Dual-engine RDF store for basic graph patterns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EngineKind {
    Widecolumn,
    Sql,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Tsv,
    Table,
}

#[derive(Subcommand)]
enum Command {
    /// Load a triple file into both engine images under --db
    Load {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Triples applied per persisted batch
        #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
        batch: usize,
    },
    /// Evaluate a query file against one engine, TSV bindings on stdout
    Query {
        #[arg(long)]
        db: PathBuf,
        #[arg(long, value_enum)]
        engine: EngineKind,
        #[arg(long)]
        query: PathBuf,
        /// Intermediate result cap (default 1000000, or $TRIPLED_CAP)
        #[arg(long)]
        cap: Option<usize>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Tsv)]
        format: OutputFormat,
    },
    /// Translate a query file to flat SQL on stdout
    Translate {
        #[arg(long)]
        query: PathBuf,
    },
    /// Generate a synthetic dataset in the triple file format
    Gen {
        #[arg(long)]
        shape: String,
        #[arg(long, default_value_t = 1)]
        scale: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the query catalog on both engines and report timings
    Bench {
        #[arg(long)]
        db: PathBuf,
        /// Catalog to run (pc3 or university)
        #[arg(long)]
        shape: String,
        /// Restrict the run to one engine
        #[arg(long, value_enum)]
        engine: Option<EngineKind>,
        /// Directory of .rq query files overriding the shape catalog
        #[arg(long)]
        queries: Option<PathBuf>,
        /// Write the TSV report here as well
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
        format: OutputFormat,
        #[arg(long)]
        cap: Option<usize>,
    },
    /// Row/column/value counts of the wide-column tables
    Stats {
        #[arg(long)]
        db: PathBuf,
    },
}

/// An error carrying its exit code.
struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn new(code: u8, message: impl fmt::Display) -> CliError {
        CliError { code, message: message.to_string() }
    }

    fn parse(message: impl fmt::Display) -> CliError {
        CliError::new(1, message)
    }

    fn io(message: impl fmt::Display) -> CliError {
        CliError::new(2, message)
    }
}

impl From<tripled_core::parse::ParseError> for CliError {
    fn from(e: tripled_core::parse::ParseError) -> CliError {
        CliError::parse(e)
    }
}

impl From<tripled_core::store::StoreError> for CliError {
    fn from(e: tripled_core::store::StoreError) -> CliError {
        CliError::io(e)
    }
}

impl From<tripled_core::sqlgen::TableIoError> for CliError {
    fn from(e: tripled_core::sqlgen::TableIoError) -> CliError {
        CliError::io(e)
    }
}

impl From<tripled_core::engine::EngineError> for CliError {
    fn from(e: tripled_core::engine::EngineError) -> CliError {
        match e {
            tripled_core::engine::EngineError::Match(MatchError::CapExceeded { .. }) => {
                CliError::new(3, e)
            }
            tripled_core::engine::EngineError::SqlGen(_) => CliError::parse(e),
            tripled_core::engine::EngineError::SqlEval(_) => CliError::io(e),
        }
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn resolve_cap(flag: Option<usize>) -> usize {
    if let Some(cap) = flag {
        return cap;
    }
    if let Ok(env) = std::env::var("TRIPLED_CAP") {
        if let Ok(cap) = env.parse() {
            return cap;
        }
    }
    DEFAULT_BAG_CAP
}

fn triple_table_path(db: &Path) -> PathBuf {
    db.join("t.tbl")
}

fn load_sql_image(db: &Path) -> Result<TripleTable, CliError> {
    let path = triple_table_path(db);
    if path.exists() {
        Ok(TripleTable::load(&path)?)
    } else {
        Ok(TripleTable::new())
    }
}

fn cmd_load(db: &Path, input: &Path, batch: usize) -> Result<(), CliError> {
    let text = read_file(input)?;
    let triples = parse_triples(&text)?;

    let mut store = WideColumnDb::open(db)?;
    let report = store.ingest(&triples, batch)?;
    store.close()?;

    let mut table = load_sql_image(db)?;
    for t in &triples {
        table.insert(t);
    }
    table.save(&triple_table_path(db))?;

    eprintln!("{} seen, {} new", report.seen, report.stored);
    Ok(())
}

fn render_rows(
    format: OutputFormat,
    columns: &[String],
    rows: &[BTreeMap<String, String>],
) -> String {
    match format {
        OutputFormat::Tsv => render_tsv(columns, rows),
        OutputFormat::Table => {
            let tsv = render_tsv(columns, rows);
            let grid: Vec<Vec<&str>> = tsv
                .lines()
                .filter(|l| !l.starts_with("# "))
                .map(|l| l.split('\t').collect())
                .collect();
            let mut widths = vec![0usize; columns.len()];
            for row in &grid {
                for (i, cell) in row.iter().enumerate() {
                    widths[i] = widths[i].max(cell.len());
                }
            }
            let mut out = String::new();
            for row in &grid {
                let mut line = String::new();
                for (i, cell) in row.iter().enumerate() {
                    if i > 0 {
                        line.push_str("  ");
                    }
                    line.push_str(&format!("{cell:<width$}", width = widths[i]));
                }
                out.push_str(line.trim_end());
                out.push('\n');
            }
            out.push_str(&format!("# rows: {}\n", rows.len()));
            out
        }
    }
}

fn cmd_query(
    db: &Path,
    engine: EngineKind,
    query: &Path,
    cap: Option<usize>,
    format: OutputFormat,
) -> Result<(), CliError> {
    let bgp = parse_bgp_query(&read_file(query)?)?;
    let options = EvalOptions { cap: resolve_cap(cap) };

    let rows = match engine {
        EngineKind::Widecolumn => {
            let store = WideColumnDb::open(db)?;
            WideColumnEngine::with_options(&store, options).evaluate(&bgp)?.rows
        }
        EngineKind::Sql => {
            let table = load_sql_image(db)?;
            SqlEngine::new(&table).evaluate(&bgp)?.rows
        }
    };
    print!("{}", render_rows(format, &result_columns(&bgp), &rows));
    Ok(())
}

fn cmd_translate(query: &Path) -> Result<(), CliError> {
    let bgp = parse_bgp_query(&read_file(query)?)?;
    let sql = bgp_to_flat_sql(&bgp).map_err(CliError::parse)?;
    println!("{sql}");
    Ok(())
}

fn cmd_gen(shape: &str, scale: u64, seed: u64, out: Option<&Path>) -> Result<(), CliError> {
    let shape: GenShape = shape.parse().map_err(CliError::parse)?;
    let triples = generate(&GenSpec { shape, scale, seed }).map_err(CliError::parse)?;
    let text = triples_to_file(&triples);
    match out {
        Some(path) => {
            fs::write(path, text).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
            eprintln!("wrote {} triples to {}", triples.len(), path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn load_query_dir(dir: &Path) -> Result<Vec<CatalogQuery>, CliError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "rq"))
        .collect();
    paths.sort();
    let mut catalog = Vec::new();
    for path in paths {
        let name = path.file_stem().unwrap_or_default().to_string_lossy().to_string();
        let text = read_file(&path)?;
        catalog.push(CatalogQuery::parse(&name, &text, false)?);
    }
    Ok(catalog)
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    db: &Path,
    shape: &str,
    engine: Option<EngineKind>,
    queries: Option<&Path>,
    out: Option<&Path>,
    repeats: usize,
    format: OutputFormat,
    cap: Option<usize>,
) -> Result<(), CliError> {
    let catalog = match queries {
        Some(dir) => load_query_dir(dir)?,
        None => {
            let shape: GenShape = shape.parse().map_err(CliError::parse)?;
            query_catalog(shape)
        }
    };

    let store = WideColumnDb::open(db)?;
    let table = load_sql_image(db)?;
    let options = EvalOptions { cap: resolve_cap(cap) };
    let wide = WideColumnEngine::with_options(&store, options);
    let sql = SqlEngine::new(&table);
    let engines: Vec<&dyn QueryEngine> = match engine {
        Some(EngineKind::Widecolumn) => vec![&wide],
        Some(EngineKind::Sql) => vec![&sql],
        None => vec![&wide, &sql],
    };

    let report = run_bench(&catalog, &engines, repeats).map_err(|e| match e {
        BenchError::NoQueries | BenchError::NoEngines => CliError::parse(e),
        BenchError::Engine { ref source, .. } => {
            if matches!(
                source,
                tripled_core::engine::EngineError::Match(MatchError::CapExceeded { .. })
            ) {
                CliError::new(3, e)
            } else {
                CliError::io(e)
            }
        }
        BenchError::CountMismatch { .. } => CliError::io(e),
    })?;

    if let Some(path) = out {
        fs::write(path, report.to_tsv())
            .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    }
    match format {
        OutputFormat::Tsv => print!("{}", report.to_tsv()),
        OutputFormat::Table => print!("{report}"),
    }
    Ok(())
}

fn cmd_stats(db: &Path) -> Result<(), CliError> {
    let store = WideColumnDb::open(db)?;
    println!("table\trows\tcolumns\tvalues");
    for table in [store.tsp(), store.top()] {
        let stats = table.stats();
        println!(
            "{}\t{}\t{}\t{}",
            table.kind().name(),
            stats.rows,
            stats.distinct_columns,
            stats.values
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Load { db, input, batch } => cmd_load(&db, &input, batch),
        Command::Query { db, engine, query, cap, format } => {
            cmd_query(&db, engine, &query, cap, format)
        }
        Command::Translate { query } => cmd_translate(&query),
        Command::Gen { shape, scale, seed, out } => {
            cmd_gen(&shape, scale, seed, out.as_deref())
        }
        Command::Bench { db, shape, engine, queries, out, repeats, format, cap } => {
            cmd_bench(&db, &shape, engine, queries.as_deref(), out.as_deref(), repeats, format, cap)
        }
        Command::Stats { db } => cmd_stats(&db),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
