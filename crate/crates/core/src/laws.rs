//! Checks that the health conditions behave like the algebra they belong
//! to: the closures are idempotent, the order they are composed in does not
//! matter, the inventory-preserving substitution closure subsumes its
//! event-preserving weakening, and trace merging is symmetric. Everything
//! runs over a universe tiny enough to sweep, plus seeded random sets.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::EngineError;
use crate::healthiness::{self, ConditionId};
use crate::obs::{Half, ObservationSet, Row};
use crate::semantics::trace_merge;
use crate::universe::{parse_config, DatEntry, DatId, StoreId, Universe};

/// One law's outcome: what was swept and, on failure, the first offender.
#[derive(Clone, Debug)]
pub struct LawReport {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl LawReport {
    fn pass(name: &str, detail: String) -> LawReport {
        LawReport { name: name.to_string(), passed: true, detail }
    }
    fn fail(name: &str, detail: String) -> LawReport {
        LawReport { name: name.to_string(), passed: false, detail }
    }
}

/// The closure operator under test — injectable so the harness can be shown
/// to catch a broken one.
pub type ClosureOp<'a> =
    &'a dyn Fn(ConditionId, &ObservationSet) -> Result<ObservationSet, EngineError>;

/// The sweep universe: one mobile channel, traces of length two. Small
/// enough that every observation half can be enumerated.
pub fn law_universe() -> Arc<Universe> {
    let cfg =
        parse_config(r#"{"mobile":{"c":[0]},"owned":["c"],"bound":2}"#).expect("fixed text");
    Arc::new(Universe::build(&cfg).expect("fixed text"))
}

/// A wider alphabet for merge sweeps: two plain actions and a mobile
/// channel. Merging never consults the trace table, so the bound is moot.
pub fn merge_universe() -> Arc<Universe> {
    let cfg = parse_config(
        r#"{"actions":["a","b"],"mobile":{"c":[0]},"owned":["c"],"bound":2}"#,
    )
    .expect("fixed text");
    Arc::new(Universe::build(&cfg).expect("fixed text"))
}

/// Every packable observation half over the universe's traces, refusal
/// masks, and stores.
pub fn all_halves(u: &Arc<Universe>) -> Vec<Half> {
    let mut out = Vec::new();
    for dat in 0..u.n_valid_dats() as DatId {
        for refm in crate::obs::subsets(u.all_events_mask()) {
            for store in 0..u.n_stores as StoreId {
                for ok in [false, true] {
                    for wait in [false, true] {
                        out.push(Half { ok, wait, dat, refm, store });
                    }
                }
            }
        }
    }
    out
}

fn set_of(u: &Arc<Universe>, rows: BTreeSet<Row>) -> ObservationSet {
    ObservationSet { universe: u.clone(), rows, aborted: BTreeSet::new() }
}

/// The empty set followed by every single-row set.
pub fn exhaustive_sets(u: &Arc<Universe>) -> Vec<ObservationSet> {
    let halves = all_halves(u);
    let mut out = vec![set_of(u, BTreeSet::new())];
    for &pre in &halves {
        for &post in &halves {
            out.push(set_of(u, BTreeSet::from([Row::new(pre, post)])));
        }
    }
    out
}

/// `n` random sets of up to 40 rows each, reproducible from the seed.
pub fn sampled_sets(u: &Arc<Universe>, n: usize, seed: u64) -> Vec<ObservationSet> {
    let halves = all_halves(u);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let size = rng.gen_range(0..=40);
            let rows = (0..size)
                .map(|_| {
                    Row::new(
                        halves[rng.gen_range(0..halves.len())],
                        halves[rng.gen_range(0..halves.len())],
                    )
                })
                .collect();
            set_of(u, rows)
        })
        .collect()
}

/// Closing twice is the same as closing once, for every closure-backed
/// condition, over every given set. One report per condition.
pub fn idempotence(close: ClosureOp, sets: &[ObservationSet]) -> Vec<LawReport> {
    ConditionId::CLOSURES
        .iter()
        .map(|&cond| {
            let name = format!("idempotence {cond}");
            for (i, s) in sets.iter().enumerate() {
                let once = match close(cond, s) {
                    Ok(x) => x,
                    Err(e) => return LawReport::fail(&name, format!("set {i}: {e}")),
                };
                let twice = match close(cond, &once) {
                    Ok(x) => x,
                    Err(e) => return LawReport::fail(&name, format!("set {i}: {e}")),
                };
                if twice.rows != once.rows {
                    return LawReport::fail(
                        &name,
                        format!(
                            "set {i}: second application changed the set ({} -> {} rows)",
                            once.rows.len(),
                            twice.rows.len()
                        ),
                    );
                }
            }
            LawReport::pass(&name, format!("{} sets", sets.len()))
        })
        .collect()
}

/// A stage in a composition pipeline: one closure, or the whole
/// trace-discipline composite applied in its reference order.
#[derive(Clone, Copy, Debug)]
enum Stage {
    Cond(ConditionId),
    Composite,
}

fn apply_stage(close: ClosureOp, st: Stage, s: &ObservationSet) -> Result<ObservationSet, EngineError> {
    match st {
        Stage::Cond(c) => close(c, s),
        Stage::Composite => {
            let a = close(ConditionId::R1, s)?;
            let b = close(ConditionId::R2M, &a)?;
            close(ConditionId::R3, &b)
        }
    }
}

const PERMS: [[usize; 3]; 6] =
    [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

fn order_family(
    close: ClosureOp,
    name: &str,
    stages: [Stage; 3],
    sets: &[ObservationSet],
) -> LawReport {
    for (i, s) in sets.iter().enumerate() {
        let mut reference: Option<BTreeSet<Row>> = None;
        for perm in PERMS {
            let mut cur = s.clone();
            for k in perm {
                cur = match apply_stage(close, stages[k], &cur) {
                    Ok(x) => x,
                    Err(e) => return LawReport::fail(name, format!("set {i}: {e}")),
                };
            }
            match &reference {
                None => reference = Some(cur.rows),
                Some(r) if *r != cur.rows => {
                    return LawReport::fail(
                        name,
                        format!("set {i}: order {perm:?} disagrees with the first order"),
                    );
                }
                Some(_) => {}
            }
        }
    }
    LawReport::pass(name, format!("6 orders x {} sets", sets.len()))
}

/// All six application orders agree, both for the trace-discipline closures
/// among themselves and for their composite against the start-up and
/// no-forced-divergence closures.
pub fn order_agreement(close: ClosureOp, sets: &[ObservationSet]) -> Vec<LawReport> {
    use ConditionId::*;
    vec![
        order_family(
            close,
            "order trace-discipline",
            [Stage::Cond(R1), Stage::Cond(R2M), Stage::Cond(R3)],
            sets,
        ),
        order_family(
            close,
            "order composite",
            [Stage::Composite, Stage::Cond(CSP1), Stage::Cond(CSP2)],
            sets,
        ),
    ]
}

/// Every subset of the started, refusal-free, prefix-respecting rows over
/// the universe's initial store: the space where inventory-preserving
/// substitution and its event-preserving weakening actually differ.
pub fn conservation_fiber(u: &Arc<Universe>) -> Vec<ObservationSet> {
    let mut pairs: Vec<(DatId, DatId)> = Vec::new();
    for d in crate::obs::sane_dats(u) {
        for dp in crate::obs::sane_dats(u) {
            if u.is_prefix(d, dp) {
                pairs.push((d, dp));
            }
        }
    }
    let rows: Vec<Row> = pairs
        .iter()
        .map(|&(d, dp)| {
            Row::new(
                Half { ok: true, wait: false, dat: d, refm: 0, store: u.init_store },
                Half { ok: true, wait: false, dat: dp, refm: 0, store: u.init_store },
            )
        })
        .collect();
    assert!(rows.len() <= 16, "fiber too wide to sweep");
    (0..1u32 << rows.len())
        .map(|bits| {
            let picked = rows
                .iter()
                .enumerate()
                .filter(|(i, _)| bits >> i & 1 == 1)
                .map(|(_, &r)| r)
                .collect();
            set_of(u, picked)
        })
        .collect()
}

/// Inventory-preserving substitution closure implies the event-preserving
/// one: no given set satisfies the former and fails the latter.
pub fn conservation(sets: &[ObservationSet]) -> LawReport {
    let name = "inventory substitution implies event-preserving substitution";
    let v = healthiness::implies(ConditionId::MC3, ConditionId::R2M, sets);
    if v.healthy {
        LawReport::pass(name, format!("{} sets, no counterexample", sets.len()))
    } else {
        LawReport::fail(name, format!("counterexample with {} violations", v.violation_count))
    }
}

/// Merging is symmetric in its operands, over random trace pairs.
pub fn merge_symmetry(u: &Arc<Universe>, pairs: usize, max_len: usize, seed: u64) -> LawReport {
    let name = "merge symmetry";
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_events = u.n_events() as u8 + 1;
    let random_trace = |rng: &mut ChaCha8Rng| -> Vec<DatEntry> {
        let len = rng.gen_range(0..=max_len);
        (0..len)
            .map(|_| {
                (rng.gen_range(0..=u.mobile_mask()), rng.gen_range(0..n_events))
            })
            .collect()
    };
    for i in 0..pairs {
        let s = random_trace(&mut rng);
        let t = random_trace(&mut rng);
        let shared = rng.gen_range(0..=u.all_events_mask());
        if trace_merge(u, &s, &t, shared) != trace_merge(u, &t, &s, shared) {
            return LawReport::fail(name, format!("pair {i}: s={s:?} t={t:?} shared={shared}"));
        }
    }
    LawReport::pass(name, format!("{pairs} random pairs"))
}

/// The whole suite at its reference scale: idempotence and order agreement
/// over the empty set, every single-row set, and 500 seeded random sets;
/// the substitution implication over the exhaustive fiber plus the same
/// random sets; merge symmetry over 1000 random pairs of length up to 5.
pub fn run_all(seed: u64) -> Vec<LawReport> {
    let u = law_universe();
    let mut sets = exhaustive_sets(&u);
    sets.extend(sampled_sets(&u, 500, seed));
    let close: ClosureOp = &healthiness::closure;
    let mut out = idempotence(close, &sets);
    out.extend(order_agreement(close, &sets));
    let mut fiber = conservation_fiber(&u);
    fiber.extend(sampled_sets(&u, 500, seed ^ 1));
    out.push(conservation(&fiber));
    out.push(merge_symmetry(&merge_universe(), 1000, 5, seed));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_sets(u: &Arc<Universe>) -> Vec<ObservationSet> {
        let mut sets: Vec<ObservationSet> = exhaustive_sets(u).into_iter().take(150).collect();
        sets.extend(sampled_sets(u, 60, 7));
        sets
    }

    #[test]
    fn closures_are_idempotent_on_small_sweeps() {
        let u = law_universe();
        let close: ClosureOp = &healthiness::closure;
        for r in idempotence(close, &small_sets(&u)) {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }

    #[test]
    fn composition_order_is_irrelevant_on_small_sweeps() {
        let u = law_universe();
        let close: ClosureOp = &healthiness::closure;
        for r in order_agreement(close, &small_sets(&u)) {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }

    #[test]
    fn the_fiber_is_exhausted_and_conserved() {
        let u = law_universe();
        let fiber = conservation_fiber(&u);
        // Seven started prefix pairs over the initial store, every subset.
        assert_eq!(fiber.len(), 128);
        let r = conservation(&fiber);
        assert!(r.passed, "{}", r.detail);
    }

    #[test]
    fn merging_is_symmetric_on_a_seeded_sweep() {
        let r = merge_symmetry(&merge_universe(), 300, 5, 11);
        assert!(r.passed, "{}", r.detail);
    }

    #[test]
    fn a_broken_closure_is_caught() {
        let u = law_universe();
        let seed_row = Row::new(
            Half { ok: true, wait: false, dat: u.seed(), refm: 0, store: 0 },
            Half { ok: true, wait: false, dat: u.seed(), refm: 0, store: 0 },
        );
        // Toggle one fixed row after the real prefix-discipline closure:
        // applying the result twice can never equal applying it once.
        let broken = move |cond: ConditionId,
                           s: &ObservationSet|
              -> Result<ObservationSet, EngineError> {
            let mut out = healthiness::closure(cond, s)?;
            if cond == ConditionId::R1 && !out.rows.remove(&seed_row) {
                out.rows.insert(seed_row);
            }
            Ok(out)
        };
        let sets = sampled_sets(&u, 10, 3);
        let reports = idempotence(&broken, &sets);
        for r in &reports {
            if r.name.contains("R1") {
                assert!(!r.passed, "the planted fault went unnoticed");
            } else {
                assert!(r.passed, "{}: {}", r.name, r.detail);
            }
        }
    }
}
