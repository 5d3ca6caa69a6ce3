//! The acceptance suite: one test per criterion, each printing a PASS line
//! (run with `--nocapture` to see them) and holding its stated runtime
//! budget. Expected values come from the worked sample instance, the
//! published Q7 translation and reordering, and the independent
//! brute-force oracle in `common`.

mod common;

use std::time::{Duration, Instant};

use common::{load_both, permutations_capped, permute_bgp, random_bgp, random_case, random_case_sized};
use tripled_core::engine::{render_tsv, result_columns, QueryEngine, SqlEngine, WideColumnEngine};
use tripled_core::harness::{generate, query_catalog, GenShape, GenSpec};
use tripled_core::matcher::{match_bgp_db, order_bgp, EvalOptions};
use tripled_core::model::Bgp;
use tripled_core::parse::{parse_bgp_query, parse_triples, SAMPLE_TRIPLES};
use tripled_core::sqlgen::{bgp_to_flat_sql, inverted_var_index, Conjunct};
use tripled_core::store::{WideColumnDb, DEFAULT_BATCH_SIZE};

const Q7: &str = "\
?X <type> <Student> .
?Y <type> <Course> .
<http://...Professor0> <teacherOf> ?Y .
?X <takesCourse> ?Y .
";

fn assert_within(start: Instant, budget: Duration, what: &str) {
    let elapsed = start.elapsed();
    assert!(
        elapsed <= budget,
        "{what} took {elapsed:?}, over the {budget:?} budget"
    );
}

#[test]
fn acceptance_1_sample_instance_golden() {
    let start = Instant::now();

    let triples = parse_triples(SAMPLE_TRIPLES).unwrap();
    assert_eq!(triples.len(), 10);
    let mut db = WideColumnDb::in_memory();
    db.ingest(&triples, DEFAULT_BATCH_SIZE).unwrap();

    assert_eq!(db.tsp().row_count(), 3, "T_sp row count");
    assert_eq!(db.top().row_count(), 7, "T_op row count");
    let cell = db.tsp().cell("<A>", "<memberOf>").expect("cell exists");
    let values: Vec<&str> = cell.iter().map(String::as_str).collect();
    assert_eq!(values, vec!["<ACM>", "<IEEE>"]);

    assert_within(start, Duration::from_secs(1), "criterion 1");
    println!("ACCEPTANCE 1 PASS: sample instance loads to T_sp rows=3, T_op rows=7, (<A>, memberOf) = {{<ACM>, <IEEE>}}");
}

#[test]
fn acceptance_2_q7_translation_golden() {
    let start = Instant::now();

    let bgp = parse_bgp_query(Q7).unwrap();
    let query = bgp_to_flat_sql(&bgp).unwrap();

    // The published output, modulo whitespace.
    let published = "\
        Select tp1.s As X, tp2.s As Y \
        From T tp1, T tp2, T tp3, T tp4 \
        Where tp1.p = '<type>' And \
            tp1.o = '<Student>' And \
            tp2.p = '<type>' And \
            tp2.o = '<Course>' And \
            tp3.s = '<http://...Professor0>' And \
            tp3.p = '<teacherOf>' And \
            tp4.p = '<takesCourse>' And \
            tp1.s = tp4.s And tp2.s = tp3.o And \
            tp2.s = tp4.o";
    let normalize = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ");
    assert_eq!(normalize(&query.to_string()), normalize(published));

    // Structure: select list, 7 constant conjuncts, the 3 join conjuncts.
    let rendered: Vec<String> = query
        .select
        .iter()
        .map(|(expr, name)| match expr {
            tripled_core::sqlgen::SelectExpr::Column(c) => format!("{c} As {name}"),
            tripled_core::sqlgen::SelectExpr::One => format!("1 As {name}"),
        })
        .collect();
    assert_eq!(rendered, vec!["tp1.s As X", "tp2.s As Y"]);
    let constants = query
        .where_conjuncts
        .iter()
        .filter(|c| matches!(c, Conjunct::ConstEq { .. }))
        .count();
    assert_eq!(constants, 7);
    let joins: Vec<String> = query
        .where_conjuncts
        .iter()
        .filter_map(|c| match c {
            Conjunct::ColEq { left, right } => Some(format!("{left}={right}")),
            Conjunct::ConstEq { .. } => None,
        })
        .collect();
    assert_eq!(joins, vec!["tp1.s=tp4.s", "tp2.s=tp3.o", "tp2.s=tp4.o"]);

    assert_within(start, Duration::from_secs(1), "criterion 2");
    println!("ACCEPTANCE 2 PASS: Q7 translates to the published flat SQL (7 constants, 3 joins, select tp1.s As X, tp2.s As Y)");
}

#[test]
fn acceptance_3_q7_reordering_golden() {
    let start = Instant::now();

    let bgp = parse_bgp_query(Q7).unwrap();
    let ordered = order_bgp(&bgp);
    let expected: Vec<_> = [2usize, 1, 3, 0]
        .iter()
        .map(|&i| bgp.patterns()[i].clone())
        .collect();
    assert_eq!(ordered.patterns(), expected.as_slice());

    assert_within(start, Duration::from_secs(1), "criterion 3");
    println!("ACCEPTANCE 3 PASS: Q7 reorders to (tp3, tp2, tp4, tp1)");
}

#[test]
fn acceptance_4_oracle_equivalence_200_cases() {
    let start = Instant::now();

    for index in 0..200u64 {
        let (case, expected) = random_case(index);
        let (db, _) = load_both(&case.triples);
        let bag = match_bgp_db(&case.bgp, &db, &EvalOptions::default()).unwrap();
        let mut got = bag.sorted_bindings();
        let mut want = expected;
        got.sort();
        want.sort();
        assert_eq!(got, want, "case {index}: bindings differ from the brute-force oracle");
    }

    assert_within(start, Duration::from_secs(300), "criterion 4");
    println!("ACCEPTANCE 4 PASS: 200 random cases match the brute-force oracle exactly");
}

#[test]
fn acceptance_5_cross_engine_byte_equality() {
    let start = Instant::now();

    for index in 0..200u64 {
        let (case, _) = random_case(index);
        let (db, table) = load_both(&case.triples);
        let columns = result_columns(&case.bgp);
        let wide = WideColumnEngine::new(&db).evaluate(&case.bgp).unwrap();
        let sql = SqlEngine::new(&table).evaluate(&case.bgp).unwrap();
        assert_eq!(
            render_tsv(&columns, &wide.rows),
            render_tsv(&columns, &sql.rows),
            "case {index}: TSV output differs between engines"
        );
    }

    for shape in [GenShape::University, GenShape::Pc3] {
        let triples = generate(&GenSpec { shape, scale: 1, seed: 0 }).unwrap();
        let (db, table) = load_both(&triples);
        for query in query_catalog(shape) {
            let columns = result_columns(&query.bgp);
            let wide = WideColumnEngine::new(&db).evaluate(&query.bgp).unwrap();
            let sql = SqlEngine::new(&table).evaluate(&query.bgp).unwrap();
            assert_eq!(
                render_tsv(&columns, &wide.rows),
                render_tsv(&columns, &sql.rows),
                "catalog query {} on {} differs between engines",
                query.name,
                shape.name()
            );
        }
    }

    assert_within(start, Duration::from_secs(300), "criterion 5");
    println!("ACCEPTANCE 5 PASS: identical TSV bytes on 200 random cases and both shape catalogs");
}

#[test]
fn acceptance_6_permutation_invariance() {
    let start = Instant::now();

    let mut checked = 0u64;
    let mut index = 0u64;
    while checked < 50 {
        let (case, _) = random_case_sized(3000 + index, 200, 6);
        index += 1;
        if case.bgp.len() < 2 {
            continue;
        }
        checked += 1;
        let (db, _) = load_both(&case.triples);
        let baseline = match_bgp_db(&case.bgp, &db, &EvalOptions::default())
            .unwrap()
            .sorted_bindings();
        for perm in permutations_capped(case.bgp.len(), 24) {
            let bag = match_bgp_db(&permute_bgp(&case.bgp, &perm), &db, &EvalOptions::default())
                .unwrap();
            assert_eq!(
                bag.sorted_bindings(),
                baseline,
                "bgp {checked} permutation {perm:?} changed the bindings"
            );
        }
    }

    assert_within(start, Duration::from_secs(120), "criterion 6");
    println!("ACCEPTANCE 6 PASS: 50 BGPs invariant under pattern-order permutations (up to 24 each)");
}

#[test]
fn acceptance_7_structural_sql_counts_500() {
    let start = Instant::now();

    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(777);
    for i in 0..500 {
        let bgp = random_bgp(&mut rng, &[], 6);
        let query = bgp_to_flat_sql(&bgp).unwrap();
        let index = inverted_var_index(&bgp);
        let constants: usize = bgp
            .patterns()
            .iter()
            .map(|tp| {
                [&tp.s, &tp.p, &tp.o]
                    .iter()
                    .filter(|pt| !pt.is_variable())
                    .count()
            })
            .sum();
        let joins: usize = index.iter().map(|(_, occ)| occ.len() - 1).sum();
        assert_eq!(query.from.len(), bgp.len(), "bgp {i}: FROM count");
        assert_eq!(
            query.where_conjuncts.len(),
            constants + joins,
            "bgp {i}: WHERE conjunct count"
        );
        let distinct_vars = index.len();
        if distinct_vars == 0 {
            assert_eq!(query.select.len(), 1, "bgp {i}: existence-flag select");
        } else {
            assert_eq!(query.select.len(), distinct_vars, "bgp {i}: SELECT count");
        }
    }

    assert_within(start, Duration::from_secs(30), "criterion 7");
    println!("ACCEPTANCE 7 PASS: structural counts hold on 500 random BGPs");
}

/// Average evaluation time, with enough iterations that timer noise is
/// negligible for the ratio check.
fn measure_wide(db: &WideColumnDb, bgp: &Bgp) -> Duration {
    let engine = WideColumnEngine::new(db);
    for _ in 0..3 {
        engine.evaluate(bgp).unwrap();
    }
    let mut iterations = 8u32;
    loop {
        let begin = Instant::now();
        for _ in 0..iterations {
            engine.evaluate(bgp).unwrap();
        }
        let elapsed = begin.elapsed();
        if elapsed >= Duration::from_millis(20) || iterations >= 1 << 16 {
            return elapsed / iterations;
        }
        iterations *= 4;
    }
}

#[test]
fn acceptance_8_scalability_smoke() {
    let start = Instant::now();

    let catalog = query_catalog(GenShape::Pc3);
    let keyed = &catalog[0]; // the 1-pattern bound-subject query
    assert_eq!(keyed.pattern_count(), 1);

    let mut keyed_times = Vec::new();
    for scale in [1u64, 10, 100] {
        let triples = generate(&GenSpec { shape: GenShape::Pc3, scale, seed: 0 }).unwrap();
        let (db, table) = load_both(&triples);
        let wide = WideColumnEngine::new(&db);
        let sql = SqlEngine::new(&table);
        for query in &catalog {
            let w = wide.evaluate(&query.bgp).unwrap();
            let s = sql.evaluate(&query.bgp).unwrap();
            assert_eq!(
                w.rows.len(),
                s.rows.len(),
                "{} at scale {scale}: engines disagree",
                query.name
            );
        }
        keyed_times.push(measure_wide(&db, &keyed.bgp));
    }

    for window in keyed_times.windows(2) {
        let (small, big) = (window[0], window[1]);
        let ratio = big.as_secs_f64() / small.as_secs_f64().max(1e-9);
        assert!(
            ratio < 10.0,
            "keyed access grew {ratio:.1}x across a 10x data step ({small:?} -> {big:?})"
        );
    }

    assert_within(start, Duration::from_secs(600), "criterion 8");
    println!(
        "ACCEPTANCE 8 PASS: pc3 catalog completes at scales 1/10/100 on both engines; keyed query times {:?} grow <10x per step",
        keyed_times
    );
}
