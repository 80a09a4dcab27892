//! The denotational engine: each operator builds the full observation set
//! of a term over a frozen universe.
//!
//! Conventions every builder follows:
//! - Only rows with a switched-on, past-waiting before-side are the
//!   operator's to decide; the waiting and not-switched-on regions are the
//!   same mandated rows for every process ([`plumb`]).
//! - The before-side refusal records history and never influences what
//!   happens next, so started rows are swept uniformly over all of it.
//!   Every set built here keeps that uniformity, which is what lets
//!   sequencing match the hidden midpoint exactly.
//! - A before-state from which the outcome is not representable — a mobile
//!   communication on a channel the process no longer holds, or any append
//!   past the trace bound — is recorded as an abort key: from that state
//!   anything may happen. Keys absorb rows: a keyed state carries no
//!   started rows of its own. [`ObservationSet::concretize`] expands keys
//!   back into explicit fans for comparisons.
//! - Abort keys flow outward through every operator (an undefined operand
//!   makes the whole composition undefined from that state), and sequencing
//!   pulls a successor's keyed states back to every before-state that can
//!   terminate into them.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use crate::ast::{alphabet, var_use, Proc, Program};
use crate::error::EngineError;
use crate::obs::{
    abort_key, chaos, fan_posts, plumb, sane_dats, subsets, AbortKey, Half, ObservationSet, Row,
};
use crate::universe::{
    DatEntry, DatId, EventId, IfaceMask, RefMask, StoreId, Universe, Value, NIL,
};

// ---- trace merging ----

fn is_shared(u: &Universe, e: EventId, shared: RefMask) -> bool {
    e != NIL && u.event_bit(e) & shared != 0
}

fn prepend(head: DatEntry, tails: BTreeSet<Vec<DatEntry>>) -> BTreeSet<Vec<DatEntry>> {
    tails
        .into_iter()
        .map(|mut t| {
            t.insert(0, head);
            t
        })
        .collect()
}

fn merge_rec(
    u: &Universe,
    s: &[DatEntry],
    t: &[DatEntry],
    shared: RefMask,
) -> BTreeSet<Vec<DatEntry>> {
    match (s.split_first(), t.split_first()) {
        (None, None) => BTreeSet::from([Vec::new()]),
        (None, Some((&h, rest))) => {
            if is_shared(u, h.1, shared) {
                BTreeSet::new()
            } else {
                prepend(h, merge_rec(u, s, rest, shared))
            }
        }
        (Some((&h, rest)), None) => {
            if is_shared(u, h.1, shared) {
                BTreeSet::new()
            } else {
                prepend(h, merge_rec(u, rest, t, shared))
            }
        }
        (Some((&h1, r1)), Some((&h2, r2))) => {
            let sh1 = is_shared(u, h1.1, shared);
            let sh2 = is_shared(u, h2.1, shared);
            if sh1 && sh2 {
                // Both sides are at a synchronization point: they step
                // together on the same event or not at all. The joint
                // record carries both interfaces.
                if h1.1 == h2.1 {
                    prepend((h1.0 | h2.0, h1.1), merge_rec(u, r1, r2, shared))
                } else {
                    BTreeSet::new()
                }
            } else {
                let mut out = BTreeSet::new();
                if !sh1 {
                    out.extend(prepend(h1, merge_rec(u, r1, t, shared)));
                }
                if !sh2 {
                    out.extend(prepend(h2, merge_rec(u, s, r2, shared)));
                }
                out
            }
        }
    }
}

/// All complete interleavings of two trace suffixes, synchronizing on the
/// events in `shared`. Inventory markers never synchronize. A result exists
/// only if every synchronized event finds its partner; each entry keeps the
/// interface it was recorded under, with joint steps keeping both.
pub fn trace_merge(
    u: &Universe,
    s: &[DatEntry],
    t: &[DatEntry],
    shared: RefMask,
) -> Vec<Vec<DatEntry>> {
    merge_rec(u, s, t, shared).into_iter().collect()
}

// ---- primitive builders ----

/// What one started before-state contributes.
enum StateOut {
    Posts(Vec<Half>),
    Undefined,
}

/// Sweep every started before-state, attaching the per-state after-sides to
/// all before-refusals uniformly.
fn started_sweep(
    u: &Arc<Universe>,
    mut per_state: impl FnMut(DatId, StoreId) -> StateOut,
) -> ObservationSet {
    let mut rows = (*plumb(u)).clone();
    let mut aborted = BTreeSet::new();
    for d in sane_dats(u) {
        for store in 0..u.n_stores as StoreId {
            match per_state(d, store) {
                StateOut::Undefined => {
                    aborted.insert(abort_key(d, store));
                }
                StateOut::Posts(posts) => {
                    for m in subsets(u.all_events_mask()) {
                        let pre = Half { ok: true, wait: false, dat: d, refm: m, store };
                        for &p in &posts {
                            rows.insert(Row::new(pre, p));
                        }
                    }
                }
            }
        }
    }
    ObservationSet { universe: u.clone(), rows, aborted }
}

fn op_stop(u: &Arc<Universe>) -> ObservationSet {
    started_sweep(u, |d, store| {
        StateOut::Posts(
            subsets(u.cap(d))
                .map(|m| Half { ok: true, wait: true, dat: d, refm: m, store })
                .collect(),
        )
    })
}

fn op_skip(u: &Arc<Universe>) -> ObservationSet {
    started_sweep(u, |d, store| {
        StateOut::Posts(
            subsets(u.cap(d))
                .map(|m| Half { ok: true, wait: false, dat: d, refm: m, store })
                .collect(),
        )
    })
}

/// One communication: wait for the event (never refusing it), or have done
/// it, recording it under the current inventory, and terminate. The event
/// may depend on the store (outputs evaluate their expression); a mobile
/// event on a channel not currently held is undefined, as is committing
/// past the trace bound.
fn op_comm(u: &Arc<Universe>, event_of: impl Fn(StoreId) -> EventId) -> ObservationSet {
    started_sweep(u, |d, store| {
        let e = event_of(store);
        if let Some(mi) = u.event_mobile(e) {
            if u.m_chans(d) & (1 << mi) == 0 {
                return StateOut::Undefined;
            }
        }
        let Some(dp) = u.extend(d, (u.m_chans(d), e)) else {
            return StateOut::Undefined;
        };
        let mut posts: Vec<Half> = subsets(u.cap(d) & !u.event_bit(e))
            .map(|m| Half { ok: true, wait: true, dat: d, refm: m, store })
            .collect();
        posts.extend(
            subsets(u.cap(dp)).map(|m| Half { ok: true, wait: false, dat: dp, refm: m, store }),
        );
        StateOut::Posts(posts)
    })
}

/// How an update changes one before-state.
enum Update {
    /// Store change only; the trace is untouched.
    Keep(StoreId),
    /// Inventory change: append a marker carrying the new interface.
    Move(IfaceMask, StoreId),
    Undefined,
}

/// A terminating update: no waiting, no communication — the state simply
/// changes, with channel-end transfers recorded as inventory markers.
fn op_update(u: &Arc<Universe>, f: impl Fn(DatId, StoreId) -> Update) -> ObservationSet {
    started_sweep(u, |d, store| {
        let (dp, storep) = match f(d, store) {
            Update::Undefined => return StateOut::Undefined,
            Update::Keep(sp) => (d, sp),
            Update::Move(iface, sp) => match u.extend(d, (iface, NIL)) {
                Some(dp) => (dp, sp),
                None => return StateOut::Undefined,
            },
        };
        StateOut::Posts(
            subsets(u.cap(dp))
                .map(|m| Half { ok: true, wait: false, dat: dp, refm: m, store: storep })
                .collect(),
        )
    })
}

// ---- composition ----

const POST_MASK: u64 = (1 << 30) - 1;

/// Drop started rows at keyed before-states: the key already declares
/// everything there.
fn finish(u: &Arc<Universe>, rows: BTreeSet<Row>, aborted: BTreeSet<AbortKey>) -> ObservationSet {
    let rows = if aborted.is_empty() {
        rows
    } else {
        rows.into_iter()
            .filter(|r| !r.started() || !aborted.contains(&abort_key(r.dat(), r.store())))
            .collect()
    };
    ObservationSet { universe: u.clone(), rows, aborted }
}

/// Sequential composition: run `a` to termination, then `b` from the state
/// `a` left behind. The handover point is hidden — matched exactly and
/// projected away. Waiting rows of `a` pass through (nothing has been
/// handed over yet), diverged rows fan out, and a keyed state of `b`
/// reached by a terminating row of `a` pulls the key back to that row's
/// before-state.
fn op_seq(u: &Arc<Universe>, a: &ObservationSet, b: &ObservationSet) -> ObservationSet {
    let mut aborted = a.aborted.clone();
    for &r in &a.rows {
        if r.started()
            && r.okp()
            && !r.waitp()
            && b.aborted.contains(&abort_key(r.datp(), r.storep()))
        {
            aborted.insert(abort_key(r.dat(), r.store()));
        }
    }
    let mut cont: HashMap<u64, Vec<u64>> = HashMap::new();
    for &r in &b.rows {
        if r.started() {
            cont.entry(r.0 >> 30).or_default().push(r.0 & POST_MASK);
        }
    }
    let mut fans: HashMap<DatId, Vec<Half>> = HashMap::new();
    let mut rows = (*plumb(u)).clone();
    for &r in &a.rows {
        if !r.started() || aborted.contains(&abort_key(r.dat(), r.store())) {
            continue;
        }
        if !r.okp() {
            let posts = fans.entry(r.datp()).or_insert_with(|| fan_posts(u, r.datp()));
            for &p in posts.iter() {
                rows.insert(Row::new(r.pre(), p));
            }
        } else if r.waitp() {
            rows.insert(r);
        } else if let Some(posts) = cont.get(&(r.0 & POST_MASK)) {
            let pre_bits = r.0 & !POST_MASK;
            for &p in posts {
                rows.insert(Row(pre_bits | p));
            }
        }
    }
    finish(u, rows, aborted)
}

/// Is this row one the stopped process could also show from its
/// before-state? Those are exactly the rows an external choice keeps only
/// when both operands agree on them.
fn stop_shaped(u: &Universe, r: Row) -> bool {
    r.okp()
        && r.waitp()
        && r.datp() == r.dat()
        && r.storep() == r.store()
        && r.refp() & !u.cap(r.dat()) == 0
}

/// External choice: while neither side has moved (the still-waiting rows a
/// stopped process would also show) both must agree; any visible progress
/// resolves the choice, so those rows are pooled. Termination twins are
/// re-added afterwards — the agreement step can strip a diverged row's
/// partner.
fn op_ext(u: &Arc<Universe>, a: &ObservationSet, b: &ObservationSet) -> ObservationSet {
    let mut rows = (*plumb(u)).clone();
    let mut twins: Vec<Row> = Vec::new();
    for (own, other) in [(a, b), (b, a)] {
        for &r in &own.rows {
            if !r.started() {
                continue;
            }
            if !stop_shaped(u, r) || other.rows.contains(&r) {
                rows.insert(r);
                twins.push(r.with_okp());
            }
        }
    }
    rows.extend(twins);
    let aborted: BTreeSet<AbortKey> = a.aborted.union(&b.aborted).copied().collect();
    finish(u, rows, aborted)
}

/// Internal choice: either behaviour, the environment has no say.
fn op_int(u: &Arc<Universe>, a: &ObservationSet, b: &ObservationSet) -> ObservationSet {
    let rows: BTreeSet<Row> = a.rows.union(&b.rows).copied().collect();
    let aborted: BTreeSet<AbortKey> = a.aborted.union(&b.aborted).copied().collect();
    finish(u, rows, aborted)
}

/// Parallel composition over a synchronization set. Rows of the two sides
/// at the same before-state are paired; their trace suffixes merge per
/// [`trace_merge`], flags combine (both must be switched on, either may
/// still be engaged), refusals pool, and each side's store writes land on
/// the shared before-store. The composition has terminated only when both
/// sides have, which is the trailing unit run. A merge that cannot be
/// recorded within the trace bound makes that before-state undefined.
fn op_par(
    u: &Arc<Universe>,
    a: &ObservationSet,
    b: &ObservationSet,
    sync: RefMask,
) -> ObservationSet {
    let mut aborted: BTreeSet<AbortKey> = a.aborted.union(&b.aborted).copied().collect();

    // Started after-sides per before-state; the before-refusal is swept
    // uniformly by every builder, so it is projected out here and restored
    // when the merged rows are emitted.
    fn posts_of(s: &ObservationSet) -> HashMap<(DatId, StoreId), BTreeSet<u64>> {
        let mut map: HashMap<(DatId, StoreId), BTreeSet<u64>> = HashMap::new();
        for &r in &s.rows {
            if r.started() {
                map.entry((r.dat(), r.store())).or_default().insert(r.0 & POST_MASK);
            }
        }
        map
    }
    let pa = posts_of(a);
    let pb = posts_of(b);

    let mut rows = (*plumb(u)).clone();
    let mut merged_posts: BTreeSet<Half> = BTreeSet::new();
    for ((d, store), list_a) in &pa {
        let Some(list_b) = pb.get(&(*d, *store)) else { continue };
        merged_posts.clear();
        'pairs: for &bits1 in list_a {
            let p1 = Row(bits1).post();
            let Some(sfx1) = u.suffix(*d, p1.dat) else { continue };
            let sfx1 = sfx1.to_vec();
            for &bits2 in list_b {
                let p2 = Row(bits2).post();
                let Some(sfx2) = u.suffix(*d, p2.dat) else { continue };
                for m in trace_merge(u, &sfx1, sfx2, sync) {
                    let mut dp = *d;
                    let mut fits = true;
                    for &entry in &m {
                        match u.extend(dp, entry) {
                            Some(n) => dp = n,
                            None => {
                                fits = false;
                                break;
                            }
                        }
                    }
                    if !fits {
                        // The joint run outgrew the trace table: nothing
                        // from this before-state can be trusted.
                        aborted.insert(abort_key(*d, *store));
                        break 'pairs;
                    }
                    let refm = (p1.refm | p2.refm) & u.cap(dp);
                    if refm != p1.refm | p2.refm {
                        // Pooled refusals reaching outside the merged
                        // inventory belong to smaller pairs already seen.
                        continue;
                    }
                    let storep = merge_stores(u, *store, p1.store, p2.store);
                    merged_posts.insert(Half {
                        ok: p1.ok && p2.ok,
                        wait: p1.wait || p2.wait,
                        dat: dp,
                        refm,
                        store: storep,
                    });
                }
            }
        }
        for m in subsets(u.all_events_mask()) {
            let pre = Half { ok: true, wait: false, dat: *d, refm: m, store: *store };
            for &p in &merged_posts {
                rows.insert(Row::new(pre, p));
            }
        }
    }
    let joined = finish(u, rows, aborted);
    // Distributed termination: the composition ends when both sides have,
    // with the final refusal freed by the closing unit run.
    op_seq(u, &joined, &op_skip(u))
}

/// Each side's writes land on the shared before-store. Parallel operands
/// are checked write-disjoint, so the diffs never collide.
fn merge_stores(u: &Universe, base: StoreId, s1: StoreId, s2: StoreId) -> StoreId {
    let mut out = base;
    for v in 0..u.n_vars() {
        let b = u.store_get(base, v);
        let v1 = u.store_get(s1, v);
        let v2 = u.store_get(s2, v);
        let val = if v1 != b { v1 } else if v2 != b { v2 } else { b };
        if val != b {
            out = u.store_set(out, v, val).expect("value from a sibling store");
        }
    }
    out
}

// ---- the engine ----

struct Engine<'a> {
    u: &'a Arc<Universe>,
    defs: &'a BTreeMap<String, Proc>,
    /// Innermost-last bindings introduced by `mu`.
    mu_env: Vec<(String, Proc)>,
    /// Remaining unfold budget per name; a name not present is fresh.
    budgets: HashMap<String, usize>,
}

impl<'a> Engine<'a> {
    fn comm_then(
        &mut self,
        event_of: impl Fn(StoreId) -> EventId,
        rest: &Proc,
    ) -> Result<ObservationSet, EngineError> {
        let head = op_comm(self.u, event_of);
        let tail = self.denote(rest)?;
        Ok(op_seq(self.u, &head, &tail))
    }

    fn denote(&mut self, p: &Proc) -> Result<ObservationSet, EngineError> {
        let u = self.u;
        match p {
            Proc::Stop => Ok(op_stop(u)),
            Proc::Skip => Ok(op_skip(u)),
            Proc::Chaos => Ok(chaos(u)),
            Proc::Event(e, k) => {
                let e = *e;
                self.comm_then(move |_| e, k)
            }
            Proc::Output(ch, expr, k) => {
                let (ch, expr) = (*ch, expr.clone());
                let uu = u.clone();
                self.comm_then(
                    move |store| {
                        let v = expr.eval(&uu, store);
                        uu.comm_event(ch, &v).expect("sendable value (parse-checked)")
                    },
                    k,
                )
            }
            Proc::Input(ch, x, k) => {
                let tail = self.denote(k)?;
                let mut acc = op_stop(u);
                for v in u.chan_domain(*ch).to_vec() {
                    let e = u.comm_event(*ch, &v).expect("domain value");
                    let head = op_comm(u, move |_| e);
                    let bind = op_update(u, |_, store| {
                        Update::Keep(u.store_set(store, *x as usize, v).expect("domain-checked"))
                    });
                    let branch = op_seq(u, &head, &op_seq(u, &bind, &tail));
                    acc = op_ext(u, &acc, &branch);
                }
                Ok(acc)
            }
            Proc::ChanInput(ch, x, k) => {
                let tail = self.denote(k)?;
                let mut acc = op_stop(u);
                for v in u.chan_domain(*ch).to_vec() {
                    let e = u.comm_event(*ch, &v).expect("domain value");
                    let Value::Chan(mi) = v else { unreachable!("parse-checked name carrier") };
                    let head = op_comm(u, move |_| e);
                    let gain = op_update(u, |d, store| {
                        if u.m_chans(d) & (1 << mi) != 0 {
                            return Update::Undefined;
                        }
                        let sp = u.store_set(store, *x as usize, v).expect("domain-checked");
                        Update::Move(u.m_chans(d) | (1 << mi), sp)
                    });
                    let branch = op_seq(u, &head, &op_seq(u, &gain, &tail));
                    acc = op_ext(u, &acc, &branch);
                }
                Ok(acc)
            }
            Proc::Assign(x, e) => Ok(op_update(u, |_, store| {
                let v = e.eval(u, store);
                Update::Keep(u.store_set(store, *x as usize, v).expect("domain-checked"))
            })),
            Proc::SendAssign(x, e) => Ok(op_update(u, |d, store| {
                let Value::Chan(mi) = e.eval(u, store) else {
                    unreachable!("parse-checked channel value")
                };
                if u.m_chans(d) & (1 << mi) == 0 {
                    return Update::Undefined;
                }
                let sp = u
                    .store_set(store, *x as usize, Value::Chan(mi))
                    .expect("domain-checked");
                Update::Move(u.m_chans(d) & !(1 << mi), sp)
            })),
            Proc::RecvAssign(x, e) => Ok(op_update(u, |d, store| {
                let Value::Chan(mi) = e.eval(u, store) else {
                    unreachable!("parse-checked channel value")
                };
                if u.m_chans(d) & (1 << mi) != 0 {
                    return Update::Undefined;
                }
                let sp = u
                    .store_set(store, *x as usize, Value::Chan(mi))
                    .expect("domain-checked");
                Update::Move(u.m_chans(d) | (1 << mi), sp)
            })),
            Proc::Seq(a, b) => {
                let da = self.denote(a)?;
                let db = self.denote(b)?;
                Ok(op_seq(u, &da, &db))
            }
            Proc::Int(a, b) => {
                let da = self.denote(a)?;
                let db = self.denote(b)?;
                Ok(op_int(u, &da, &db))
            }
            Proc::Ext(a, b) => {
                let da = self.denote(a)?;
                let db = self.denote(b)?;
                Ok(op_ext(u, &da, &db))
            }
            Proc::Par(a, b, sync) => {
                let ua = var_use(a, self.defs);
                let ub = var_use(b, self.defs);
                if ua.conflicts(ub) {
                    let clash = (ua.written & (ub.read | ub.written))
                        | (ub.written & (ua.read | ua.written));
                    let ix = clash.trailing_zeros() as usize;
                    return Err(EngineError::SharedVariable(u.var_name(ix).to_string()));
                }
                let sync = sync
                    .unwrap_or_else(|| alphabet(u, a, self.defs) & alphabet(u, b, self.defs));
                let da = self.denote(a)?;
                let db = self.denote(b)?;
                Ok(op_par(u, &da, &db, sync))
            }
            Proc::Mu(n, body) => {
                self.mu_env.push((n.clone(), (**body).clone()));
                let r = self.denote(body);
                self.mu_env.pop();
                r
            }
            Proc::Ref(n) => {
                let body = self
                    .mu_env
                    .iter()
                    .rev()
                    .find(|(m, _)| m == n)
                    .map(|(_, b)| b.clone())
                    .or_else(|| self.defs.get(n).cloned())
                    .ok_or_else(|| EngineError::UnknownProcess(n.clone()))?;
                let budget = *self.budgets.get(n).unwrap_or(&u.config.unfold);
                if budget == 0 {
                    return Ok(chaos(u));
                }
                self.budgets.insert(n.clone(), budget - 1);
                let r = self.denote(&body);
                self.budgets.insert(n.clone(), budget);
                r
            }
        }
    }
}

/// Denote a whole program over its universe. Recursion is unfolded to the
/// configured depth; what lies beyond is declared undefined rather than
/// approximated.
pub fn denote(u: &Arc<Universe>, prog: &Program) -> Result<ObservationSet, EngineError> {
    let mut eng =
        Engine { u, defs: &prog.defs, mu_env: Vec::new(), budgets: HashMap::new() };
    eng.denote(&prog.main)
}
