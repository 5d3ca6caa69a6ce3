//! Native basic-graph-pattern evaluation over the wide-column store.
//!
//! A single triple pattern is answered by picking one of three access paths
//! (keyed by subject, keyed by object, or a table scan) and filtering the
//! retrieved candidates through the pattern matcher. A basic graph pattern
//! is evaluated left to right after a selectivity-driven reordering, joining
//! each pattern into the running solution bag index-nested-loop style:
//! shared variables are substituted with their bindings and the resulting
//! patterns are probed against the store. Patterns sharing no variable with
//! their predecessors fall back to a Cartesian product.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use thiserror::Error;

use crate::model::{match_tp_t, unify, Bgp, Term, Triple, TriplePattern};
use crate::store::WideColumnDb;

/// Default limit on the intermediate solution bag.
pub const DEFAULT_BAG_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatchError {
    #[error("intermediate result exceeded the cap of {cap} tuples")]
    CapExceeded { cap: usize },
}

/// Evaluation knobs for [`match_bgp_db`].
#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    /// Evaluation aborts once an intermediate bag grows past this size.
    pub cap: usize,
}

impl Default for EvalOptions {
    fn default() -> EvalOptions {
        EvalOptions { cap: DEFAULT_BAG_CAP }
    }
}

/// One solution: variable bindings plus the matched triple of every
/// evaluated pattern, in evaluation order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolutionTuple {
    pub bindings: BTreeMap<String, Term>,
    pub provenance: Vec<Triple>,
}

/// The bag of solutions for a basic graph pattern. `pattern_order` records
/// the evaluated order as indices into the original pattern list; bindings
/// themselves are insensitive to that order.
#[derive(Debug, Clone)]
pub struct SolutionBag {
    tuples: Vec<SolutionTuple>,
    pattern_order: Vec<usize>,
    variables: BTreeSet<String>,
    peak_intermediate: usize,
}

impl SolutionBag {
    pub fn tuples(&self) -> &[SolutionTuple] {
        &self.tuples
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    /// Original indices of the patterns in the order they were evaluated.
    pub fn pattern_order(&self) -> &[usize] {
        &self.pattern_order
    }

    pub fn variables(&self) -> &BTreeSet<String> {
        &self.variables
    }

    /// Largest intermediate bag size reached during evaluation.
    pub fn peak_intermediate(&self) -> usize {
        self.peak_intermediate
    }

    /// The binding maps as a sorted multiset, for order-insensitive
    /// comparison between evaluations.
    pub fn sorted_bindings(&self) -> Vec<BTreeMap<String, Term>> {
        let mut out: Vec<BTreeMap<String, Term>> =
            self.tuples.iter().map(|t| t.bindings.clone()).collect();
        out.sort();
        out
    }
}

/// Matches one triple pattern against the database: all stored triples the
/// pattern matches, as a bag.
///
/// Access-path selection handles three disjoint cases in order: a bound
/// subject reads one row of `T_sp`; otherwise a bound object reads one row
/// of `T_op`; otherwise a full scan. When the predicate is bound, retrieval
/// is restricted to its column. Every candidate is then filtered through
/// [`match_tp_t`], which enforces bound positions the access path did not
/// (the object in the first case) and repeated-variable consistency.
pub fn match_tp_db(tp: &TriplePattern, db: &WideColumnDb) -> Vec<Triple> {
    let column = tp.p.as_constant();
    let candidates = if let Some(s) = tp.s.as_constant() {
        db.get_by_subject(s, column)
    } else if let Some(o) = tp.o.as_constant() {
        db.get_by_object(o, column)
    } else {
        db.scan_all(column)
    };
    candidates
        .into_iter()
        .filter(|t| match_tp_t(tp, t))
        .collect()
}

/// Structural selectivity rank of a pattern, by bound positions; lower means
/// expected-smaller results. A bound subject or object permits keyed row
/// access, while a predicate-only pattern forces a table scan, so predicates
/// weigh least:
/// (s,p,o)=0, (s,o)=1, (s,p)=2, (p,o)=3, (s)=4, (o)=5, (p)=6, ()=7.
pub fn selectivity_class(tp: &TriplePattern) -> u8 {
    let s = !tp.s.is_variable();
    let p = !tp.p.is_variable();
    let o = !tp.o.is_variable();
    match (s, p, o) {
        (true, true, true) => 0,
        (true, false, true) => 1,
        (true, true, false) => 2,
        (false, true, true) => 3,
        (true, false, false) => 4,
        (false, false, true) => 5,
        (false, true, false) => 6,
        (false, false, false) => 7,
    }
}

/// Greedy evaluation order: positions of the original patterns, most
/// selective first, preferring patterns that share a variable with one
/// already placed so Cartesian products only happen when unavoidable.
/// All ties break toward the original textual order.
pub fn order_indices(bgp: &Bgp) -> Vec<usize> {
    let patterns = bgp.patterns();
    let mut remaining: Vec<usize> = (0..patterns.len()).collect();
    let mut order: Vec<usize> = Vec::with_capacity(patterns.len());
    let mut placed_vars: HashSet<&str> = HashSet::new();

    while !remaining.is_empty() {
        let connected: Vec<usize> = remaining
            .iter()
            .copied()
            .filter(|&i| {
                patterns[i]
                    .variables()
                    .iter()
                    .any(|v| placed_vars.contains(v))
            })
            .collect();
        let pool = if order.is_empty() || connected.is_empty() {
            &remaining
        } else {
            &connected
        };
        let pick = *pool
            .iter()
            .min_by_key(|&&i| (selectivity_class(&patterns[i]), i))
            .expect("pool is nonempty");
        order.push(pick);
        remaining.retain(|&i| i != pick);
        placed_vars.extend(patterns[pick].variables());
    }
    order
}

/// Reorders a basic graph pattern per [`order_indices`]. The output is a
/// permutation of the input and equals it when the input already satisfies
/// the ordering criteria.
pub fn order_bgp(bgp: &Bgp) -> Bgp {
    let patterns = bgp.patterns();
    let reordered: Vec<TriplePattern> = order_indices(bgp)
        .into_iter()
        .map(|i| patterns[i].clone())
        .collect();
    Bgp::new(reordered).expect("permutation of a nonempty pattern list")
}

/// Evaluates a basic graph pattern over the database.
///
/// Patterns are evaluated in [`order_indices`] order. The first pattern
/// seeds the bag; an empty seed returns immediately without further store
/// reads. Each later pattern sharing a variable with its predecessors is
/// joined in: its shared variables are substituted with bindings from the
/// bag (identical substituted patterns are probed once and fanned back to
/// all contributing tuples, in substituted-pattern canonical order), and
/// tuples whose probe comes back empty are removed. A pattern sharing no
/// variable contributes a Cartesian product.
pub fn match_bgp_db(
    bgp: &Bgp,
    db: &WideColumnDb,
    options: &EvalOptions,
) -> Result<SolutionBag, MatchError> {
    let patterns = bgp.patterns();
    let order = order_indices(bgp);
    let mut bag = SolutionBag {
        tuples: Vec::new(),
        pattern_order: order.clone(),
        variables: bgp.variables().into_iter().collect(),
        peak_intermediate: 0,
    };

    let first = &patterns[order[0]];
    let mut tuples: Vec<SolutionTuple> = match_tp_db(first, db)
        .into_iter()
        .map(|t| {
            let bindings = unify(first, &t).expect("match_tp_db returned a non-match");
            SolutionTuple { bindings, provenance: vec![t] }
        })
        .collect();
    if tuples.len() > options.cap {
        return Err(MatchError::CapExceeded { cap: options.cap });
    }
    bag.peak_intermediate = tuples.len();
    if tuples.is_empty() {
        return Ok(bag);
    }

    let mut bound_vars: HashSet<String> =
        first.variables().into_iter().map(str::to_string).collect();

    for &idx in &order[1..] {
        let tp = &patterns[idx];
        let shares = tp.variables().iter().any(|v| bound_vars.contains(*v));

        let mut next: Vec<SolutionTuple> = Vec::new();
        let push = |tuple: SolutionTuple, next: &mut Vec<SolutionTuple>| {
            next.push(tuple);
            if next.len() > options.cap {
                return Err(MatchError::CapExceeded { cap: options.cap });
            }
            Ok(())
        };

        if shares {
            // Group tuples by their substituted pattern so each distinct
            // probe runs once.
            let mut groups: BTreeMap<TriplePattern, Vec<usize>> = BTreeMap::new();
            for (i, tuple) in tuples.iter().enumerate() {
                groups.entry(tp.substitute(&tuple.bindings)).or_default().push(i);
            }
            for (substituted, contributors) in &groups {
                let matches = match_tp_db(substituted, db);
                if matches.is_empty() {
                    continue; // join failed: contributing tuples drop out
                }
                for &ti in contributors {
                    for t in &matches {
                        let extra =
                            unify(substituted, t).expect("match_tp_db returned a non-match");
                        let mut tuple = tuples[ti].clone();
                        tuple.bindings.extend(extra);
                        tuple.provenance.push(t.clone());
                        push(tuple, &mut next)?;
                    }
                }
            }
        } else {
            let matches = match_tp_db(tp, db);
            for tuple in &tuples {
                for t in &matches {
                    let extra = unify(tp, t).expect("match_tp_db returned a non-match");
                    let mut tuple = tuple.clone();
                    tuple.bindings.extend(extra);
                    tuple.provenance.push(t.clone());
                    push(tuple, &mut next)?;
                }
            }
        }

        tuples = next;
        bag.peak_intermediate = bag.peak_intermediate.max(tuples.len());
        if tuples.is_empty() {
            return Ok(bag);
        }
        bound_vars.extend(tp.variables().into_iter().map(str::to_string));
    }

    bag.tuples = tuples;
    Ok(bag)
}
