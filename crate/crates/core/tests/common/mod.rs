//! Shared test machinery: an independent brute-force evaluator used as the
//! ground truth for both engines, and a deterministic random-case
//! generator. The oracle deliberately reimplements pattern/triple
//! unification instead of calling into the library, so it shares no code
//! with either evaluation path it checks.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashSet};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use tripled_core::model::{Bgp, PatternTerm, Position, Term, Triple, TriplePattern};
use tripled_core::sqlgen::{load_triple_table, TripleTable};
use tripled_core::store::WideColumnDb;

/// Upper bound on oracle solutions; cases past this are regenerated.
pub const ORACLE_SOLUTION_CAP: usize = 20_000;
/// Upper bound on oracle consistency checks, to keep worst cases bounded.
const ORACLE_WORK_CAP: usize = 20_000_000;

/// Enumerates all pattern-to-triple assignments (depth-first over the
/// patterns in textual order, pruning inconsistent prefixes) and returns
/// the binding map of every consistent one.
pub fn oracle_eval(bgp: &Bgp, data: &[Triple]) -> Result<Vec<BTreeMap<String, Term>>, &'static str> {
    fn extend(
        tp: &TriplePattern,
        t: &Triple,
        bindings: &BTreeMap<String, Term>,
    ) -> Option<BTreeMap<String, Term>> {
        let mut extended = bindings.clone();
        for pos in Position::ALL {
            let actual = t.term_at(pos);
            match tp.term_at(pos) {
                PatternTerm::Constant(c) => {
                    if c != actual {
                        return None;
                    }
                }
                PatternTerm::Variable(v) => match extended.get(v) {
                    Some(bound) if bound != actual => return None,
                    Some(_) => {}
                    None => {
                        extended.insert(v.clone(), actual.clone());
                    }
                },
            }
        }
        Some(extended)
    }

    fn recurse(
        patterns: &[TriplePattern],
        data: &[Triple],
        bindings: &BTreeMap<String, Term>,
        out: &mut Vec<BTreeMap<String, Term>>,
        work: &mut usize,
    ) -> Result<(), &'static str> {
        let Some((tp, rest)) = patterns.split_first() else {
            out.push(bindings.clone());
            if out.len() > ORACLE_SOLUTION_CAP {
                return Err("oracle solution cap exceeded");
            }
            return Ok(());
        };
        for t in data {
            *work += 1;
            if *work > ORACLE_WORK_CAP {
                return Err("oracle work cap exceeded");
            }
            if let Some(extended) = extend(tp, t, bindings) {
                recurse(rest, data, &extended, out, work)?;
            }
        }
        Ok(())
    }

    let mut out = Vec::new();
    let mut work = 0;
    recurse(bgp.patterns(), data, &BTreeMap::new(), &mut out, &mut work)?;
    Ok(out)
}

/// A random dataset and query over it.
#[derive(Debug, Clone)]
pub struct Case {
    pub triples: Vec<Triple>,
    pub bgp: Bgp,
}

fn term_pool() -> (Vec<Term>, Vec<Term>) {
    // At most 40 subject/object terms over at most 8 predicates.
    let mut terms: Vec<Term> = (0..28).map(|i| Term::iri(format!("t{i}")).unwrap()).collect();
    terms.extend((0..8).map(|i| Term::literal(format!("v{i}"))));
    terms.push(Term::literal("spa ce and \"quote\""));
    terms.push(Term::typed_literal("5", "int").unwrap());
    terms.push(Term::literal("back\\slash"));
    terms.push(Term::iri("t:extra/one").unwrap());
    let predicates: Vec<Term> = (0..8).map(|i| Term::iri(format!("p{i}")).unwrap()).collect();
    (terms, predicates)
}

fn random_triples(rng: &mut ChaCha8Rng, max_triples: usize) -> Vec<Triple> {
    let (terms, predicates) = term_pool();
    let iris: Vec<&Term> = terms.iter().filter(|t| t.is_iri()).collect();
    let count = rng.gen_range(1..=max_triples);
    let mut seen: HashSet<Triple> = HashSet::new();
    let mut out = Vec::new();
    for _ in 0..count {
        let t = Triple::new(
            (*iris.choose(rng).unwrap()).clone(),
            predicates.choose(rng).unwrap().clone(),
            terms.choose(rng).unwrap().clone(),
        )
        .unwrap();
        if seen.insert(t.clone()) {
            out.push(t);
        }
    }
    out
}

/// A random pattern list over the dataset's vocabulary. Constants mostly
/// come from values actually present so joins have answers; variables are
/// drawn from a small pool with reuse to keep patterns connected.
pub fn random_bgp(rng: &mut ChaCha8Rng, triples: &[Triple], max_patterns: usize) -> Bgp {
    let (terms, predicates) = term_pool();
    let iris: Vec<&Term> = terms.iter().filter(|t| t.is_iri()).collect();
    let var_pool: [&'static str; 6] = ["a", "b", "c", "d", "e", "f"];
    let n = rng.gen_range(1..=max_patterns);
    let mut used_vars: Vec<&'static str> = Vec::new();

    let mut patterns = Vec::with_capacity(n);
    for _ in 0..n {
        let mut position_term = |pos: Position, constant_p: f64| -> PatternTerm {
            if rng.gen_bool(constant_p) {
                // Prefer a value that occurs at this position.
                let from_data = !triples.is_empty() && rng.gen_bool(0.8);
                let term = if from_data {
                    triples.choose(rng).unwrap().term_at(pos).clone()
                } else {
                    match pos {
                        Position::Subject => (*iris.choose(rng).unwrap()).clone(),
                        Position::Predicate => predicates.choose(rng).unwrap().clone(),
                        Position::Object => terms.choose(rng).unwrap().clone(),
                    }
                };
                PatternTerm::Constant(term)
            } else {
                let reuse = !used_vars.is_empty() && rng.gen_bool(0.65);
                let v: &'static str = if reuse {
                    *used_vars.choose(rng).unwrap()
                } else {
                    *var_pool.choose(rng).unwrap()
                };
                if !used_vars.contains(&v) {
                    used_vars.push(v);
                }
                PatternTerm::Variable(v.to_string())
            }
        };
        let s = position_term(Position::Subject, 0.35);
        let p = position_term(Position::Predicate, 0.7);
        let o = position_term(Position::Object, 0.45);
        patterns.push(TriplePattern::new(s, p, o).unwrap());
    }
    Bgp::new(patterns).unwrap()
}

/// Deterministically builds the `index`-th random case together with its
/// oracle answer. Cases whose oracle blows the solution or work cap are
/// skipped (deterministically) and replaced by the next candidate.
pub fn random_case(index: u64) -> (Case, Vec<BTreeMap<String, Term>>) {
    random_case_sized(index, 300, 6)
}

pub fn random_case_sized(
    index: u64,
    max_triples: usize,
    max_patterns: usize,
) -> (Case, Vec<BTreeMap<String, Term>>) {
    for attempt in 0..200u64 {
        let seed = index
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(attempt.wrapping_mul(0x85EB_CA6B));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let triples = random_triples(&mut rng, max_triples);
        let bgp = random_bgp(&mut rng, &triples, max_patterns);
        if let Ok(expected) = oracle_eval(&bgp, &triples) {
            return (Case { triples, bgp }, expected);
        }
    }
    panic!("no tractable case found for index {index}");
}

/// Loads the same triples into both engines' stores.
pub fn load_both(triples: &[Triple]) -> (WideColumnDb, TripleTable) {
    let mut db = WideColumnDb::in_memory();
    db.ingest(triples, tripled_core::store::DEFAULT_BATCH_SIZE)
        .expect("in-memory ingest cannot fail");
    (db, load_triple_table(triples))
}

/// The first `cap` permutations of `0..n` in lexicographic order.
pub fn permutations_capped(n: usize, cap: usize) -> Vec<Vec<usize>> {
    let mut current: Vec<usize> = (0..n).collect();
    let mut out = vec![current.clone()];
    while out.len() < cap {
        // Next lexicographic permutation; stop after the last one.
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| current[i] < current[i + 1]) else {
            break;
        };
        let j = (i + 1..n).rev().find(|&j| current[j] > current[i]).unwrap();
        current.swap(i, j);
        current[i + 1..].reverse();
        out.push(current.clone());
    }
    out
}

/// Applies a pattern-order permutation to a basic graph pattern.
pub fn permute_bgp(bgp: &Bgp, perm: &[usize]) -> Bgp {
    let patterns = bgp.patterns();
    Bgp::new(perm.iter().map(|&i| patterns[i].clone()).collect()).unwrap()
}
