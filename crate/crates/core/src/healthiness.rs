//! Health conditions on observation sets: each is a predicate a denotation
//! must satisfy, and (except for the two topology classifiers) an idempotent
//! closure whose fixed points are exactly the healthy sets.
//!
//! The conditions split into three shapes:
//! - *filters* (R1, MC1, MC2): a healthy set contains no row violating a
//!   per-row predicate; the closure drops offenders.
//! - *region pins* (R3, CSP1): the waiting and not-switched-on regions of a
//!   healthy set are fully determined (see [`crate::obs::plumb`]); the
//!   closure overwrites or extends those regions.
//! - *substitution unions* (R2, R2M, MC3, CSP2): a healthy set is closed
//!   under rewriting rows — replacing the before-trace by a candidate with
//!   the right invariants (carrying the suffix along), or upgrading the
//!   after-side `ok` flag. The closure adds every rewrite.
//!
//! Substitution quantifiers range over the finite trace table, so every
//! verdict is exact *at the configured bound*: a rewrite whose trace would
//! exceed the bound is outside the model and simply not demanded. Likewise a
//! rewrite landing on an abort-keyed before-state is satisfied by the key
//! itself — the key already grants every behaviour there.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::EngineError;
use crate::obs::{abort_key, plumb, ObservationSet, Row};
use crate::trace::derive_views;
use crate::universe::{DatId, IfaceMask, Universe};

/// Identifies one health condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConditionId {
    /// Traces only grow: the before-trace is a prefix of the after-trace.
    R1,
    /// The before-trace may be replaced by any table trace (the history up
    /// to now cannot influence behaviour).
    R2,
    /// As R2, but the replacement must carry the same mobile-view events and
    /// end with the same channel inventory; interface history is free.
    R2M,
    /// While the predecessor waits, the process passes observations through
    /// unchanged.
    R3,
    /// Before being switched on, nothing beyond trace extension is known.
    CSP1,
    /// A process can never be forced to diverge: every row has a twin with
    /// the after-side `ok` set.
    CSP2,
    /// Every recorded mobile communication lies in the interface recorded
    /// with it.
    MC1,
    /// Only events of currently held channels (plus static events) may be
    /// refused.
    MC2,
    /// Replacing the before-trace is allowed exactly when the replacement
    /// hands over the same channel inventory.
    MC3,
    /// Topology classifier: the interface never changes along the mobile
    /// view (meaningful only on traces with at least two mobile entries).
    SN,
    /// Topology classifier: some two mobile-view entries carry different
    /// interfaces.
    DN,
}

impl ConditionId {
    pub const ALL: [ConditionId; 11] = [
        ConditionId::R1,
        ConditionId::R2,
        ConditionId::R2M,
        ConditionId::R3,
        ConditionId::CSP1,
        ConditionId::CSP2,
        ConditionId::MC1,
        ConditionId::MC2,
        ConditionId::MC3,
        ConditionId::SN,
        ConditionId::DN,
    ];
    /// The eight conditions a denotation must satisfy.
    pub const MOBILE: [ConditionId; 8] = [
        ConditionId::R1,
        ConditionId::R2M,
        ConditionId::R3,
        ConditionId::CSP1,
        ConditionId::CSP2,
        ConditionId::MC1,
        ConditionId::MC2,
        ConditionId::MC3,
    ];
    /// Conditions that exist as closure operators.
    pub const CLOSURES: [ConditionId; 9] = [
        ConditionId::R1,
        ConditionId::R2,
        ConditionId::R2M,
        ConditionId::R3,
        ConditionId::CSP1,
        ConditionId::CSP2,
        ConditionId::MC1,
        ConditionId::MC2,
        ConditionId::MC3,
    ];
    pub fn name(self) -> &'static str {
        match self {
            ConditionId::R1 => "R1",
            ConditionId::R2 => "R2",
            ConditionId::R2M => "R2M",
            ConditionId::R3 => "R3",
            ConditionId::CSP1 => "CSP1",
            ConditionId::CSP2 => "CSP2",
            ConditionId::MC1 => "MC1",
            ConditionId::MC2 => "MC2",
            ConditionId::MC3 => "MC3",
            ConditionId::SN => "SN",
            ConditionId::DN => "DN",
        }
    }
}

impl fmt::Display for ConditionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// At most this many violating rows are listed; the count is always full.
pub const WITNESS_CAP: usize = 10;

/// Outcome of one condition check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub healthy: bool,
    /// Total number of violations found (may exceed the witness cap).
    pub violation_count: usize,
    /// Up to [`WITNESS_CAP`] violating rows, ascending. For closure-backed
    /// conditions these are the symmetric difference with the closure:
    /// rows the set must not contain and rows it is missing.
    pub witnesses: Vec<Row>,
}

impl Verdict {
    fn from_violations(all: Vec<Row>) -> Verdict {
        Verdict {
            healthy: all.is_empty(),
            violation_count: all.len(),
            witnesses: all.into_iter().take(WITNESS_CAP).collect(),
        }
    }
}

fn prefix_ok(u: &Universe, r: Row) -> bool {
    u.is_prefix(r.dat(), r.datp())
}

fn mc1_ok(u: &Universe, r: Row) -> bool {
    u.dat_mc1_ok(r.datp())
}

fn mc2_ok(u: &Universe, r: Row) -> bool {
    r.refp() & !u.cap(r.datp()) == 0
}

/// All substitution variants of one row for a given candidate family. The
/// row itself is among them (its trace is in its own family); variants whose
/// rebased after-trace would leave the table are not demanded by the bounded
/// model and are skipped.
fn substitutions(u: &Universe, r: Row, family: &[DatId], out: &mut BTreeSet<Row>) {
    if !prefix_ok(u, r) {
        return;
    }
    for &s in family {
        if let Some(dp) = u.rebase(r.dat(), r.datp(), s) {
            let mut pre = r.pre();
            let mut post = r.post();
            pre.dat = s;
            post.dat = dp;
            out.insert(Row::new(pre, post));
        }
    }
}

/// Apply one condition's closure to the row part of a set. Abort keys pass
/// through untouched: they mark declared-undefined before-states, which no
/// health condition constrains.
pub fn closure(cond: ConditionId, s: &ObservationSet) -> Result<ObservationSet, EngineError> {
    let u = &s.universe;
    let rows: BTreeSet<Row> = match cond {
        ConditionId::R1 => s.rows.iter().copied().filter(|&r| prefix_ok(u, r)).collect(),
        ConditionId::MC1 => s.rows.iter().copied().filter(|&r| mc1_ok(u, r)).collect(),
        ConditionId::MC2 => s.rows.iter().copied().filter(|&r| mc2_ok(u, r)).collect(),
        ConditionId::R3 => {
            let mut out: BTreeSet<Row> = s.rows.iter().copied().filter(|r| !r.wait()).collect();
            out.extend(plumb(u).iter().copied().filter(|r| r.wait()));
            out
        }
        ConditionId::CSP1 => {
            let mut out = s.rows.clone();
            out.extend(plumb(u).iter().copied().filter(|r| !r.ok()));
            out
        }
        ConditionId::CSP2 => {
            let mut out = s.rows.clone();
            out.extend(s.rows.iter().map(|r| r.with_okp()));
            out
        }
        ConditionId::R2 => {
            let mut out = s.rows.clone();
            let all: Vec<DatId> = (0..u.n_valid_dats() as DatId).collect();
            for &r in &s.rows {
                substitutions(u, r, &all, &mut out);
            }
            out
        }
        ConditionId::R2M => {
            let mut out = s.rows.clone();
            for &r in &s.rows {
                let fam =
                    u.family_by_inventory_and_mobile_events(u.m_chans(r.dat()), u.mtr_evts(r.dat()));
                substitutions(u, r, fam, &mut out);
            }
            out
        }
        ConditionId::MC3 => {
            let mut out = s.rows.clone();
            for &r in &s.rows {
                let fam = u.family_by_inventory(u.m_chans(r.dat()));
                substitutions(u, r, fam, &mut out);
            }
            out
        }
        ConditionId::SN | ConditionId::DN => {
            return Err(EngineError::NotAClosure(cond.name()));
        }
    };
    Ok(ObservationSet { universe: u.clone(), rows, aborted: s.aborted.clone() })
}

/// The mobile-view interfaces of a trace.
fn mtr_ifaces(u: &Universe, d: DatId) -> Vec<IfaceMask> {
    derive_views(u, d, 0).iface
}

fn some_pair_differs(ifaces: &[IfaceMask]) -> bool {
    ifaces.windows(2).any(|w| w[0] != w[1])
}

/// Evaluate one condition on a set. For closure-backed conditions the
/// verdict compares the set with its closure; for the SN/DN classifiers it
/// tests each row's after-trace directly (rows whose mobile view has fewer
/// than two entries are outside both classifiers and never violate).
pub fn check(cond: ConditionId, s: &ObservationSet) -> Verdict {
    let u = &s.universe;
    match cond {
        ConditionId::SN | ConditionId::DN => {
            let mut bad = Vec::new();
            for &r in &s.rows {
                let ifaces = mtr_ifaces(u, r.datp());
                if ifaces.len() < 2 {
                    continue;
                }
                let differs = some_pair_differs(&ifaces);
                let violates = match cond {
                    ConditionId::SN => differs,
                    _ => !differs,
                };
                if violates {
                    bad.push(r);
                }
            }
            Verdict::from_violations(bad)
        }
        _ => {
            let closed = closure(cond, s).expect("closure-backed condition");
            let mut diff: Vec<Row> = s.rows.difference(&closed.rows).copied().collect();
            // A row demanded at a keyed before-state is already granted by
            // the key (anything at all may happen from there), so only
            // demands at specified states can go unmet.
            diff.extend(
                closed
                    .rows
                    .difference(&s.rows)
                    .filter(|r| !r.started() || !s.aborted.contains(&abort_key(r.dat(), r.store())))
                    .copied(),
            );
            diff.sort_unstable();
            Verdict::from_violations(diff)
        }
    }
}

/// Network-shape classification of a denotation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Topology {
    Static,
    Dynamic,
    Undetermined,
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Topology::Static => "static",
            Topology::Dynamic => "dynamic",
            Topology::Undetermined => "undetermined",
        })
    }
}

/// Classify the runs of a denotation: dynamic if some run's mobile view
/// changes interface, static if none does, undetermined if no run has two
/// mobile-view entries to compare.
///
/// Only rows describing actual runs are consulted: switched on, past
/// waiting, from the initial trace and store, and not diverged. Every
/// denotation also carries the mandated not-switched-on rows, whose traces
/// are arbitrary — they say nothing about this process's topology.
pub fn classify_topology(s: &ObservationSet) -> Topology {
    let u = &s.universe;
    let mut proviso_met = false;
    for &r in &s.rows {
        if !(r.started() && r.dat() == u.seed() && r.store() == u.init_store && r.okp()) {
            continue;
        }
        let ifaces = mtr_ifaces(u, r.datp());
        if ifaces.len() < 2 {
            continue;
        }
        proviso_met = true;
        if some_pair_differs(&ifaces) {
            return Topology::Dynamic;
        }
    }
    if proviso_met {
        Topology::Static
    } else {
        Topology::Undetermined
    }
}

/// Search the given sets for one passing `c1` but failing `c2`. A healthy
/// verdict means no counterexample was found among the samples; otherwise
/// the witnesses are `c2`'s violations on the first counterexample.
pub fn implies(c1: ConditionId, c2: ConditionId, samples: &[ObservationSet]) -> Verdict {
    for s in samples {
        if check(c1, s).healthy {
            let v2 = check(c2, s);
            if !v2.healthy {
                return v2;
            }
        }
    }
    Verdict { healthy: true, violation_count: 0, witnesses: Vec::new() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::obs::{chaos, ii_set, Half};
    use crate::universe::{parse_config, Universe, NIL};
    use std::sync::Arc;

    fn uni() -> Arc<Universe> {
        let c = parse_config(
            r#"{"actions":["a"],"mobile":{"c":[0,1]},"owned":["c"],"bound":3}"#,
        )
        .unwrap();
        Arc::new(Universe::build(&c).unwrap())
    }

    fn row(pre: (bool, bool, DatId, u8, u8), post: (bool, bool, DatId, u8, u8)) -> Row {
        Row::new(
            Half { ok: pre.0, wait: pre.1, dat: pre.2, refm: pre.3, store: pre.4 },
            Half { ok: post.0, wait: post.1, dat: post.2, refm: post.3, store: post.4 },
        )
    }

    fn singleton(u: &Arc<Universe>, r: Row) -> ObservationSet {
        let mut s = ObservationSet::empty(u.clone());
        s.rows.insert(r);
        s
    }

    #[test]
    fn r1_flags_shrinking_traces() {
        let u = uni();
        let c0 = u.event_id("c.0").unwrap();
        let d = u.lookup_dat(&[(1, NIL), (1, c0)]).unwrap();
        let bad = row((true, false, d, 0, 0), (true, false, u.seed(), 0, 0));
        let v = check(ConditionId::R1, &singleton(&u, bad));
        assert!(!v.healthy);
        assert_eq!(v.witnesses, vec![bad]);
        let good = row((true, false, u.seed(), 0, 0), (true, false, d, 0, 0));
        assert!(check(ConditionId::R1, &singleton(&u, good)).healthy);
    }

    #[test]
    fn mc1_checks_the_recorded_interface() {
        let u = uni();
        let c0 = u.event_id("c.0").unwrap();
        let good_dat = u.lookup_dat(&[(1, NIL), (1, c0)]).unwrap();
        let good = row((true, false, u.seed(), 0, 0), (true, false, good_dat, 0, 0));
        assert!(check(ConditionId::MC1, &singleton(&u, good)).healthy);

        // A communication recorded under an interface that does not hold
        // the channel only enters the table via a raw import.
        let c = u.config.clone();
        let mut u2 = Universe::build(&c).unwrap();
        let bad_dat = u2.intern_batch(&[vec![(1, NIL), (0, c0)]]).unwrap()[0];
        let u2 = Arc::new(u2);
        let bad = row((true, false, u2.seed(), 0, 0), (true, false, bad_dat, 0, 0));
        let v = check(ConditionId::MC1, &singleton(&u2, bad));
        assert!(!v.healthy);
        assert_eq!(v.witnesses, vec![bad]);
    }

    #[test]
    fn mc2_caps_refusals_by_inventory() {
        let u = uni();
        let c0 = u.event_id("c.0").unwrap();
        let held = u.lookup_dat(&[(1, NIL)]).unwrap();
        let released = u.lookup_dat(&[(1, NIL), (0, NIL)]).unwrap();
        let refuse_c0 = u.event_bit(c0);
        let good = row((true, false, held, 0, 0), (true, true, held, refuse_c0, 0));
        assert!(check(ConditionId::MC2, &singleton(&u, good)).healthy);
        let bad = row((true, false, held, 0, 0), (true, true, released, refuse_c0, 0));
        let v = check(ConditionId::MC2, &singleton(&u, bad));
        assert!(!v.healthy);
    }

    #[test]
    fn csp2_adds_termination_twins() {
        let u = uni();
        let r = row((true, false, u.seed(), 0, 0), (false, true, u.seed(), 0, 0));
        let s = singleton(&u, r);
        let closed = closure(ConditionId::CSP2, &s).unwrap();
        assert!(closed.rows.contains(&r.with_okp()));
        assert_eq!(closed.rows.len(), 2);
        assert!(!check(ConditionId::CSP2, &s).healthy);
    }

    #[test]
    fn mc3_rewrites_preserve_inventory() {
        let u = uni();
        let c0 = u.event_id("c.0").unwrap();
        let pre = u.lookup_dat(&[(1, NIL), (1, NIL)]).unwrap();
        let post = u.lookup_dat(&[(1, NIL), (1, NIL), (1, c0)]).unwrap();
        let r = row((true, false, pre, 0, 0), (true, false, post, 0, 0));
        let closed = closure(ConditionId::MC3, &singleton(&u, r)).unwrap();
        // The seed has the same inventory, so the row rebased onto it must
        // appear.
        let rebased_post = u.lookup_dat(&[(1, NIL), (1, c0)]).unwrap();
        let want = row((true, false, u.seed(), 0, 0), (true, false, rebased_post, 0, 0));
        assert!(closed.rows.contains(&want));
        // No variant lands on a released-inventory trace.
        for v in &closed.rows {
            assert_eq!(u.m_chans(v.dat()), 1);
        }
        // Idempotent on this sample.
        let twice = closure(ConditionId::MC3, &closed).unwrap();
        assert_eq!(twice.rows, closed.rows);
    }

    #[test]
    fn r2m_pins_mobile_events() {
        let u = uni();
        let c0 = u.event_id("c.0").unwrap();
        let a = u.event_id("a").unwrap();
        // Before-trace with one static event recorded: its mobile view is
        // just the seed marker.
        let pre = u.lookup_dat(&[(1, NIL), (1, a)]).unwrap();
        let r = row((true, false, pre, 0, 0), (true, false, pre, 0, 0));
        let closed = closure(ConditionId::R2M, &singleton(&u, r)).unwrap();
        for v in &closed.rows {
            // Same inventory and same mobile events: no variant may carry a
            // communication.
            assert_eq!(u.m_chans(v.dat()), 1);
            assert_eq!(u.mtr_evts(v.dat()), u.mtr_evts(pre));
        }
        // The static history is free: the bare seed variant appears.
        let want = row((true, false, u.seed(), 0, 0), (true, false, u.seed(), 0, 0));
        assert!(closed.rows.contains(&want));
        // MC3 admits strictly more rewrites here: c.0 keeps the inventory.
        let mc3 = closure(ConditionId::MC3, &singleton(&u, r)).unwrap();
        let comm_pre = u.lookup_dat(&[(1, NIL), (1, c0)]).unwrap();
        assert!(mc3.rows.iter().any(|v| v.dat() == comm_pre));
        assert!(!closed.rows.iter().any(|v| v.dat() == comm_pre));
    }

    #[test]
    fn region_pins_match_the_mandated_rows() {
        let u = uni();
        let top = chaos(&u);
        let id = ii_set(&u);
        for cond in ConditionId::MOBILE {
            assert!(check(cond, &top).healthy, "{cond} on the full set");
            assert!(check(cond, &id).healthy, "{cond} on the identity");
        }
        // An empty set is missing all mandated rows.
        let empty = ObservationSet::empty(u.clone());
        assert!(!check(ConditionId::R3, &empty).healthy);
        assert!(!check(ConditionId::CSP1, &empty).healthy);
        assert!(check(ConditionId::R1, &empty).healthy);
    }

    #[test]
    fn classifiers_are_not_closures() {
        let u = uni();
        let s = ObservationSet::empty(u);
        assert_eq!(
            closure(ConditionId::SN, &s).unwrap_err(),
            EngineError::NotAClosure("SN"),
        );
        assert_eq!(
            closure(ConditionId::DN, &s).unwrap_err(),
            EngineError::NotAClosure("DN"),
        );
    }

    #[test]
    fn topology_classification() {
        let u = uni();
        let c0 = u.event_id("c.0").unwrap();
        // Undetermined: no run reaches a second mobile-view entry.
        let still = row((true, false, u.seed(), 0, 0), (true, true, u.seed(), 0, 0));
        assert_eq!(classify_topology(&singleton(&u, still)), Topology::Undetermined);
        // Static: a communication without interface change.
        let comm = u.lookup_dat(&[(1, NIL), (1, c0)]).unwrap();
        let stat = row((true, false, u.seed(), 0, 0), (true, false, comm, 0, 0));
        assert_eq!(classify_topology(&singleton(&u, stat)), Topology::Static);
        // Dynamic: the interface shrinks across a marker.
        let rel = u.lookup_dat(&[(1, NIL), (0, NIL)]).unwrap();
        let dyn_ = row((true, false, u.seed(), 0, 0), (true, false, rel, 0, 0));
        assert_eq!(classify_topology(&singleton(&u, dyn_)), Topology::Dynamic);
        // Rows from other before-states do not count.
        let elsewhere = row((true, false, rel, 0, 0), (true, false, rel, 0, 0));
        assert_eq!(classify_topology(&singleton(&u, elsewhere)), Topology::Undetermined);
    }

    #[test]
    fn implication_search() {
        let u = uni();
        let c0 = u.event_id("c.0").unwrap();
        let pre = u.lookup_dat(&[(1, NIL), (1, NIL)]).unwrap();
        let post = u.lookup_dat(&[(1, NIL), (1, NIL), (1, c0)]).unwrap();
        let r = row((true, false, pre, 0, 0), (true, false, post, 0, 0));
        let diverged = row((true, false, pre, 0, 0), (false, true, post, 0, 0));
        let samples = vec![
            ObservationSet::empty(u.clone()),
            singleton(&u, r),
            singleton(&u, diverged),
            closure(ConditionId::MC3, &singleton(&u, r)).unwrap(),
        ];
        // Reflexivity.
        assert!(implies(ConditionId::MC2, ConditionId::MC2, &samples).healthy);
        // The MC3-closed sample is R2M-closed too; the raw singleton fails
        // both, so it is no counterexample.
        assert!(implies(ConditionId::MC3, ConditionId::R2M, &samples).healthy);
        // R1 certainly does not give CSP2.
        let v = implies(ConditionId::R1, ConditionId::CSP2, &samples);
        assert!(!v.healthy);
    }
}
