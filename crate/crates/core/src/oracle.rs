//! A from-first-principles cross-check of the engine.
//!
//! Everything here recomputes denotations the slow way: enumerate every
//! observation the bounded universe admits and keep the ones a construct's
//! defining predicate accepts; compose sets by literal relational joins
//! rather than the engine's incremental constructions. The code is
//! deliberately different in shape from [`crate::semantics`] — no shared
//! region cache, no case analysis inside the sequential join, a worklist
//! weave instead of a recursive one — so that agreement between the two
//! paths is evidence, not an echo.
//!
//! Brute force only pays for small universes, so [`brute_force_oracle`]
//! refuses anything past [`ORACLE_MAX_EVENTS`] events (nil included) or a
//! trace bound past [`ORACLE_MAX_BOUND`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use crate::ast::{alphabet, var_use, Proc, Program};
use crate::error::EngineError;
use crate::obs::{abort_key, subsets, AbortKey, Half, ObservationSet, Row};
use crate::universe::{
    DatEntry, DatId, EventId, RefMask, StoreId, Universe, Value, NIL,
};

/// Largest event alphabet (including nil) the oracle will sweep.
pub const ORACLE_MAX_EVENTS: usize = 3;
/// Largest trace bound the oracle will sweep.
pub const ORACLE_MAX_BOUND: usize = 4;

const POST_BITS: u64 = (1 << 30) - 1;

/// Per-universe scaffolding: the always-present region and the three fixed
/// sets the compositions lean on, each derived here from scratch.
struct Ctx {
    base: BTreeSet<Row>,
    stop: ObservationSet,
    skip: ObservationSet,
    /// The switched-on upgrade link: everything copied, `ok` may only rise.
    j: ObservationSet,
}

fn sane(u: &Universe) -> impl Iterator<Item = DatId> + '_ {
    (0..u.n_dats() as DatId).filter(move |&d| u.dat_mc1_ok(d))
}

/// The rows every definition carries regardless of its started behaviour: a
/// waiting start passes through unchanged, and a diverged start admits any
/// recordable continuation whose refusal the final inventory allows.
fn base_rows(u: &Universe) -> BTreeSet<Row> {
    let mut rows = BTreeSet::new();
    for d in sane(u) {
        for store in 0..u.n_stores as StoreId {
            for m in subsets(u.cap(d)) {
                let h = Half { ok: true, wait: true, dat: d, refm: m, store };
                rows.insert(Row::new(h, h));
            }
        }
    }
    for d in sane(u) {
        let mut posts = Vec::new();
        for dp in sane(u) {
            if !u.is_prefix(d, dp) {
                continue;
            }
            for mp in subsets(u.cap(dp)) {
                for storep in 0..u.n_stores as StoreId {
                    for okp in [false, true] {
                        for waitp in [false, true] {
                            posts.push(Half {
                                ok: okp,
                                wait: waitp,
                                dat: dp,
                                refm: mp,
                                store: storep,
                            });
                        }
                    }
                }
            }
        }
        for store in 0..u.n_stores as StoreId {
            for wait in [false, true] {
                for m in subsets(u.all_events_mask()) {
                    let pre = Half { ok: false, wait, dat: d, refm: m, store };
                    for &p in &posts {
                        rows.insert(Row::new(pre, p));
                    }
                }
            }
        }
    }
    rows
}

fn j_rows(u: &Universe) -> BTreeSet<Row> {
    let mut rows = BTreeSet::new();
    for d in sane(u) {
        for store in 0..u.n_stores as StoreId {
            for m in subsets(u.cap(d)) {
                for wait in [false, true] {
                    for (ok, okp) in [(false, false), (false, true), (true, true)] {
                        let pre = Half { ok, wait, dat: d, refm: m, store };
                        let post = Half { ok: okp, wait, dat: d, refm: m, store };
                        rows.insert(Row::new(pre, post));
                    }
                }
            }
        }
    }
    rows
}

/// Feed every candidate observation from started before-states to a
/// predicate. Candidates range over all prefix-extending after-traces, all
/// flags and stores, and refusals within the after-trace's capability; the
/// before-refusal is free.
fn candidates(u: &Universe, d: DatId, store: StoreId, mut take: impl FnMut(Half, Half)) {
    for m in subsets(u.all_events_mask()) {
        let pre = Half { ok: true, wait: false, dat: d, refm: m, store };
        for dp in sane(u) {
            if !u.is_prefix(d, dp) {
                continue;
            }
            for mp in subsets(u.cap(dp)) {
                for storep in 0..u.n_stores as StoreId {
                    for okp in [false, true] {
                        for waitp in [false, true] {
                            take(
                                pre,
                                Half { ok: okp, wait: waitp, dat: dp, refm: mp, store: storep },
                            );
                        }
                    }
                }
            }
        }
    }
}

/// Drop started rows at keyed before-states; the key already grants
/// everything there.
fn drop_keyed(
    u: &Arc<Universe>,
    rows: BTreeSet<Row>,
    aborted: BTreeSet<AbortKey>,
) -> ObservationSet {
    let rows = rows
        .into_iter()
        .filter(|r| !r.started() || !aborted.contains(&abort_key(r.dat(), r.store())))
        .collect();
    ObservationSet { universe: u.clone(), rows, aborted }
}

/// Build a primitive the exhaustive way: ask each started before-state for
/// its defining predicate (`None` means the state has no defined meaning and
/// is keyed), then enumerate every candidate and keep what the predicate
/// accepts.
fn define(
    u: &Arc<Universe>,
    ctx: &Ctx,
    per_state: impl Fn(DatId, StoreId) -> Option<Box<dyn Fn(Half, Half) -> bool>>,
) -> ObservationSet {
    let mut rows = ctx.base.clone();
    let mut aborted = BTreeSet::new();
    for d in sane(u) {
        for store in 0..u.n_stores as StoreId {
            match per_state(d, store) {
                None => {
                    aborted.insert(abort_key(d, store));
                }
                Some(pred) => {
                    candidates(u, d, store, |pre, post| {
                        if pred(pre, post) {
                            rows.insert(Row::new(pre, post));
                        }
                    });
                }
            }
        }
    }
    drop_keyed(u, rows, aborted)
}

fn o_stop(u: &Arc<Universe>, ctx: &Ctx) -> ObservationSet {
    define(u, ctx, |d, store| {
        Some(Box::new(move |_pre, post: Half| {
            post.ok && post.wait && post.dat == d && post.store == store
        }) as Box<dyn Fn(Half, Half) -> bool>)
    })
}

fn o_skip(u: &Arc<Universe>, ctx: &Ctx) -> ObservationSet {
    define(u, ctx, |d, store| {
        Some(Box::new(move |_pre, post: Half| {
            post.ok && !post.wait && post.dat == d && post.store == store
        }) as Box<dyn Fn(Half, Half) -> bool>)
    })
}

fn o_chaos(u: &Arc<Universe>, ctx: &Ctx) -> ObservationSet {
    let mut aborted = BTreeSet::new();
    for d in sane(u) {
        for store in 0..u.n_stores as StoreId {
            aborted.insert(abort_key(d, store));
        }
    }
    drop_keyed(u, ctx.base.clone(), aborted)
}

/// One communication whose event may depend on the store. Offering a mobile
/// event on a channel the inventory lacks, or one the trace table cannot
/// record, leaves the before-state undefined.
fn o_comm(
    u: &Arc<Universe>,
    ctx: &Ctx,
    event_of: impl Fn(StoreId) -> EventId,
) -> ObservationSet {
    define(u, ctx, |d, store| {
        let e = event_of(store);
        if !u.event_mobile(e).is_none_or(|mi| u.m_chans(d) & (1 << mi) != 0) {
            return None;
        }
        let target = u.extend(d, (u.m_chans(d), e))?;
        let bit = u.event_bit(e);
        Some(Box::new(move |_pre, post: Half| {
            let waiting = post.ok
                && post.wait
                && post.dat == d
                && post.store == store
                && post.refm & bit == 0;
            let done =
                post.ok && !post.wait && post.dat == target && post.store == store;
            waiting || done
        }) as Box<dyn Fn(Half, Half) -> bool>)
    })
}

/// How an update transforms one before-state.
enum Shift {
    Keep(StoreId),
    Move(u8, StoreId),
    Undefined,
}

/// A terminating state change; inventory changes append a marker entry.
fn o_update(
    u: &Arc<Universe>,
    ctx: &Ctx,
    f: impl Fn(DatId, StoreId) -> Shift,
) -> ObservationSet {
    define(u, ctx, |d, store| {
        let (dp, sp) = match f(d, store) {
            Shift::Undefined => return None,
            Shift::Keep(sp) => (d, sp),
            Shift::Move(iface, sp) => (u.extend(d, (iface, NIL))?, sp),
        };
        Some(Box::new(move |_pre, post: Half| {
            post.ok && !post.wait && post.dat == dp && post.store == sp
        }) as Box<dyn Fn(Half, Half) -> bool>)
    })
}

/// Literal relational composition: keep `(before, after)` whenever some
/// middle observation links a row of `a` to a row of `b`. No case analysis —
/// waiting middles meet `b`'s pass-through copies, diverged middles meet its
/// fan, terminated middles meet its started rows. Runs of `a` that terminate
/// in a state `b` declares undefined are undefined from their own start.
/// Rows from non-started before-states always land back in the shared base,
/// which is unioned wholesale.
fn o_seq(u: &Arc<Universe>, ctx: &Ctx, a: &ObservationSet, b: &ObservationSet) -> ObservationSet {
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
    let mut mid_index: HashMap<u64, Vec<u64>> = HashMap::new();
    for &r in &b.rows {
        mid_index.entry(r.0 >> 30).or_default().push(r.0 & POST_BITS);
    }
    let mut rows = ctx.base.clone();
    for &r in &a.rows {
        if !r.started() || aborted.contains(&abort_key(r.dat(), r.store())) {
            continue;
        }
        if let Some(posts) = mid_index.get(&(r.0 & POST_BITS)) {
            let pre_bits = r.0 & !POST_BITS;
            for &p in posts {
                rows.insert(Row(pre_bits | p));
            }
        }
    }
    drop_keyed(u, rows, aborted)
}

fn o_int(u: &Arc<Universe>, a: &ObservationSet, b: &ObservationSet) -> ObservationSet {
    let rows = a.rows.union(&b.rows).copied().collect();
    let aborted = a.aborted.union(&b.aborted).copied().collect();
    drop_keyed(u, rows, aborted)
}

/// External choice as the row-level conditional: on rows the stopped
/// process could also show, both sides must agree; on any other row either
/// side decides. The switched-on upgrade is then applied by composing with
/// the link set — the same join as [`o_seq`], no twin special-casing.
fn o_ext(u: &Arc<Universe>, ctx: &Ctx, a: &ObservationSet, b: &ObservationSet) -> ObservationSet {
    let mut core = BTreeSet::new();
    for &r in a.rows.union(&b.rows) {
        let keep = if r.started() && ctx.stop.rows.contains(&r) {
            a.rows.contains(&r) && b.rows.contains(&r)
        } else {
            true
        };
        if keep {
            core.insert(r);
        }
    }
    let aborted: BTreeSet<AbortKey> = a.aborted.union(&b.aborted).copied().collect();
    let picked = ObservationSet { universe: u.clone(), rows: core, aborted };
    o_seq(u, ctx, &picked, &ctx.j)
}

/// All order-preserving weaves of two decorated suffixes: exclusive entries
/// interleave, shared communications must pair up (joining interfaces), and
/// a shared head with no partner blocks the weave. Marker entries never
/// synchronize. Filled as a table over index pairs, back to front.
fn weave(u: &Universe, s: &[DatEntry], t: &[DatEntry], shared: RefMask) -> Vec<Vec<DatEntry>> {
    let sh = |e: &DatEntry| e.1 != NIL && u.event_bit(e.1) & shared != 0;
    let (n, m) = (s.len(), t.len());
    let mut table: Vec<Vec<BTreeSet<Vec<DatEntry>>>> = vec![vec![BTreeSet::new(); m + 1]; n + 1];
    table[n][m].insert(Vec::new());
    let prepended = |head: DatEntry, tails: &BTreeSet<Vec<DatEntry>>| -> Vec<Vec<DatEntry>> {
        tails
            .iter()
            .map(|tail| {
                let mut w = Vec::with_capacity(tail.len() + 1);
                w.push(head);
                w.extend_from_slice(tail);
                w
            })
            .collect()
    };
    for i in (0..=n).rev() {
        for j in (0..=m).rev() {
            if i == n && j == m {
                continue;
            }
            let mut acc = BTreeSet::new();
            if i < n && !sh(&s[i]) {
                acc.extend(prepended(s[i], &table[i + 1][j]));
            }
            if j < m && !sh(&t[j]) {
                acc.extend(prepended(t[j], &table[i][j + 1]));
            }
            if i < n && j < m && sh(&s[i]) && sh(&t[j]) && s[i].1 == t[j].1 {
                acc.extend(prepended((s[i].0 | t[j].0, s[i].1), &table[i + 1][j + 1]));
            }
            table[i][j] = acc;
        }
    }
    std::mem::take(&mut table[0][0]).into_iter().collect()
}

/// Each side's writes land on the shared before-store; operands are checked
/// write-disjoint before composition, so the diffs never collide.
fn weave_stores(u: &Universe, before: StoreId, s1: StoreId, s2: StoreId) -> StoreId {
    let mut out = before;
    for v in 0..u.n_vars() {
        let b = u.store_get(before, v);
        let (v1, v2) = (u.store_get(s1, v), u.store_get(s2, v));
        let val = if v1 != b { v1 } else if v2 != b { v2 } else { b };
        if val != b {
            out = u.store_set(out, v, val).expect("value from a sibling store");
        }
    }
    out
}

/// Parallel composition, literally: both branches observed from one common
/// before-state, their suffixes woven, flags conjoined/disjoined, refusals
/// pooled (rows whose pool exceeds the merged inventory are covered by
/// smaller pairs and dropped), stores merged write-by-write. A weave the
/// trace table cannot record keys the before-state. Termination is
/// distributed: the result still has to run the closing unit.
fn o_par(
    u: &Arc<Universe>,
    ctx: &Ctx,
    a: &ObservationSet,
    b: &ObservationSet,
    sync: RefMask,
) -> ObservationSet {
    let mut aborted: BTreeSet<AbortKey> = a.aborted.union(&b.aborted).copied().collect();
    let mut by_pre: HashMap<u64, (Vec<Half>, Vec<Half>)> = HashMap::new();
    for &r in &a.rows {
        if r.started() {
            by_pre.entry(r.0 >> 30).or_default().0.push(r.post());
        }
    }
    for &r in &b.rows {
        if r.started() {
            by_pre.entry(r.0 >> 30).or_default().1.push(r.post());
        }
    }
    let mut rows = ctx.base.clone();
    for (&pre_bits, (pa, pb)) in &by_pre {
        let pre = Row(pre_bits << 30).pre();
        'pairs: for p1 in pa {
            let Some(sfx1) = u.suffix(pre.dat, p1.dat) else { continue };
            let sfx1 = sfx1.to_vec();
            for p2 in pb {
                let Some(sfx2) = u.suffix(pre.dat, p2.dat) else { continue };
                for w in weave(u, &sfx1, sfx2, sync) {
                    let mut dp = pre.dat;
                    let mut fits = true;
                    for &entry in &w {
                        match u.extend(dp, entry) {
                            Some(n) => dp = n,
                            None => {
                                fits = false;
                                break;
                            }
                        }
                    }
                    if !fits {
                        aborted.insert(abort_key(pre.dat, pre.store));
                        break 'pairs;
                    }
                    let pooled = p1.refm | p2.refm;
                    if pooled & !u.cap(dp) != 0 {
                        continue;
                    }
                    rows.insert(Row::new(
                        pre,
                        Half {
                            ok: p1.ok && p2.ok,
                            wait: p1.wait || p2.wait,
                            dat: dp,
                            refm: pooled,
                            store: weave_stores(u, pre.store, p1.store, p2.store),
                        },
                    ));
                }
            }
        }
    }
    let joined = drop_keyed(u, rows, aborted);
    o_seq(u, ctx, &joined, &ctx.skip)
}

// ---- dispatch ----

struct OracleEng<'a> {
    u: &'a Arc<Universe>,
    ctx: &'a Ctx,
    defs: &'a BTreeMap<String, Proc>,
    mu_env: Vec<(String, Proc)>,
    budgets: HashMap<String, usize>,
}

impl<'a> OracleEng<'a> {
    fn denote(&mut self, p: &Proc) -> Result<ObservationSet, EngineError> {
        let (u, ctx) = (self.u, self.ctx);
        match p {
            Proc::Stop => Ok(ctx.stop.clone()),
            Proc::Skip => Ok(ctx.skip.clone()),
            Proc::Chaos => Ok(o_chaos(u, ctx)),
            Proc::Event(e, k) => {
                let e = *e;
                let head = o_comm(u, ctx, move |_| e);
                let tail = self.denote(k)?;
                Ok(o_seq(u, ctx, &head, &tail))
            }
            Proc::Output(ch, expr, k) => {
                let (ch, expr) = (*ch, expr.clone());
                let uu = u.clone();
                let head = o_comm(u, ctx, move |store| {
                    let v = expr.eval(&uu, store);
                    uu.comm_event(ch, &v).expect("sendable value (parse-checked)")
                });
                let tail = self.denote(k)?;
                Ok(o_seq(u, ctx, &head, &tail))
            }
            Proc::Input(ch, x, k) => {
                let tail = self.denote(k)?;
                let mut acc = ctx.stop.clone();
                for v in u.chan_domain(*ch).to_vec() {
                    let e = u.comm_event(*ch, &v).expect("domain value");
                    let head = o_comm(u, ctx, move |_| e);
                    let bind = o_update(u, ctx, |_, store| {
                        Shift::Keep(u.store_set(store, *x as usize, v).expect("domain-checked"))
                    });
                    let branch = o_seq(u, ctx, &head, &o_seq(u, ctx, &bind, &tail));
                    acc = o_ext(u, ctx, &acc, &branch);
                }
                Ok(acc)
            }
            Proc::ChanInput(ch, x, k) => {
                let tail = self.denote(k)?;
                let mut acc = ctx.stop.clone();
                for v in u.chan_domain(*ch).to_vec() {
                    let e = u.comm_event(*ch, &v).expect("domain value");
                    let Value::Chan(mi) = v else { unreachable!("parse-checked name carrier") };
                    let head = o_comm(u, ctx, move |_| e);
                    let gain = o_update(u, ctx, |d, store| {
                        if u.m_chans(d) & (1 << mi) != 0 {
                            return Shift::Undefined;
                        }
                        let sp = u.store_set(store, *x as usize, v).expect("domain-checked");
                        Shift::Move(u.m_chans(d) | (1 << mi), sp)
                    });
                    let branch = o_seq(u, ctx, &head, &o_seq(u, ctx, &gain, &tail));
                    acc = o_ext(u, ctx, &acc, &branch);
                }
                Ok(acc)
            }
            Proc::Assign(x, e) => Ok(o_update(u, ctx, |_, store| {
                let v = e.eval(u, store);
                Shift::Keep(u.store_set(store, *x as usize, v).expect("domain-checked"))
            })),
            Proc::SendAssign(x, e) => Ok(o_update(u, ctx, |d, store| {
                let Value::Chan(mi) = e.eval(u, store) else {
                    unreachable!("parse-checked channel value")
                };
                if u.m_chans(d) & (1 << mi) == 0 {
                    return Shift::Undefined;
                }
                let sp =
                    u.store_set(store, *x as usize, Value::Chan(mi)).expect("domain-checked");
                Shift::Move(u.m_chans(d) & !(1 << mi), sp)
            })),
            Proc::RecvAssign(x, e) => Ok(o_update(u, ctx, |d, store| {
                let Value::Chan(mi) = e.eval(u, store) else {
                    unreachable!("parse-checked channel value")
                };
                if u.m_chans(d) & (1 << mi) != 0 {
                    return Shift::Undefined;
                }
                let sp =
                    u.store_set(store, *x as usize, Value::Chan(mi)).expect("domain-checked");
                Shift::Move(u.m_chans(d) | (1 << mi), sp)
            })),
            Proc::Seq(a, b) => {
                let da = self.denote(a)?;
                let db = self.denote(b)?;
                Ok(o_seq(u, ctx, &da, &db))
            }
            Proc::Int(a, b) => {
                let da = self.denote(a)?;
                let db = self.denote(b)?;
                Ok(o_int(u, &da, &db))
            }
            Proc::Ext(a, b) => {
                let da = self.denote(a)?;
                let db = self.denote(b)?;
                Ok(o_ext(u, ctx, &da, &db))
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
                Ok(o_par(u, ctx, &da, &db, sync))
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
                    return Ok(o_chaos(u, ctx));
                }
                self.budgets.insert(n.clone(), budget - 1);
                let r = self.denote(&body);
                self.budgets.insert(n.clone(), budget);
                r
            }
        }
    }
}

/// Denote a program by exhaustive enumeration. Same meaning as
/// [`crate::semantics::denote`], computed along a different road; refuses
/// universes too large to sweep.
pub fn brute_force_oracle(
    u: &Arc<Universe>,
    prog: &Program,
) -> Result<ObservationSet, EngineError> {
    let events = u.n_events() + 1; // the silent marker counts toward the sweep
    if events > ORACLE_MAX_EVENTS || u.bound > ORACLE_MAX_BOUND {
        return Err(EngineError::UniverseTooLarge {
            events,
            max_events: ORACLE_MAX_EVENTS,
            bound: u.bound,
            max_bound: ORACLE_MAX_BOUND,
        });
    }
    let base = base_rows(u);
    let mut ctx = Ctx {
        base,
        stop: ObservationSet::empty(u.clone()),
        skip: ObservationSet::empty(u.clone()),
        j: ObservationSet { universe: u.clone(), rows: j_rows(u), aborted: BTreeSet::new() },
    };
    ctx.stop = o_stop(u, &ctx);
    ctx.skip = o_skip(u, &ctx);
    let mut eng =
        OracleEng { u, ctx: &ctx, defs: &prog.defs, mu_env: Vec::new(), budgets: HashMap::new() };
    eng.denote(&prog.main)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::obs::plumb;
    use crate::parser::parse_program;
    use crate::semantics::denote;
    use crate::universe::parse_config;

    fn build(cfg: &str) -> Arc<Universe> {
        Arc::new(Universe::build(&parse_config(cfg).unwrap()).unwrap())
    }

    fn uni_basic() -> Arc<Universe> {
        build(r#"{"actions":["a","b"],"bound":3}"#)
    }

    fn uni_mobile() -> Arc<Universe> {
        build(
            r#"{
                "mobile": {"c": [0]},
                "owned": ["c"],
                "variables": {"k": {"init": "c", "domain": ["c"]}},
                "bound": 3
            }"#,
        )
    }

    fn uni_static() -> Arc<Universe> {
        build(
            r#"{
                "static": {"s": [0, 1]},
                "variables": {"x": {"init": 0, "domain": [0, 1]}},
                "bound": 3
            }"#,
        )
    }

    fn agree(u: &Arc<Universe>, src: &str) {
        let prog = parse_program(u, src).unwrap();
        let fast = denote(u, &prog).unwrap();
        let slow = brute_force_oracle(u, &prog).unwrap();
        assert_eq!(
            fast.concretize().rows,
            slow.concretize().rows,
            "row disagreement on `{src}`"
        );
        assert_eq!(fast.aborted, slow.aborted, "key disagreement on `{src}`");
    }

    #[test]
    fn base_region_matches_the_engines() {
        for u in [uni_basic(), uni_mobile(), uni_static()] {
            assert_eq!(base_rows(&u), *plumb(&u));
        }
    }

    #[test]
    fn too_many_events_is_refused() {
        let u = build(r#"{"actions":["a","b","c"],"bound":3}"#);
        let prog = parse_program(&u, "STOP").unwrap();
        assert!(matches!(
            brute_force_oracle(&u, &prog),
            Err(EngineError::UniverseTooLarge { events: 4, .. })
        ));
    }

    #[test]
    fn too_deep_a_bound_is_refused() {
        let u = build(r#"{"actions":["a"],"bound":5}"#);
        let prog = parse_program(&u, "STOP").unwrap();
        assert!(matches!(
            brute_force_oracle(&u, &prog),
            Err(EngineError::UniverseTooLarge { bound: 5, .. })
        ));
    }

    #[test]
    fn agrees_on_the_primitives() {
        let u = uni_basic();
        for src in ["STOP", "SKIP", "CHAOS", "a -> SKIP", "a -> b -> STOP"] {
            agree(&u, src);
        }
    }

    #[test]
    fn agrees_on_sequencing_and_choice() {
        let u = uni_basic();
        for src in [
            "SKIP ; a -> SKIP",
            "a -> SKIP ; b -> SKIP",
            "STOP ; CHAOS",
            "SKIP ; CHAOS",
            "a -> SKIP [] b -> STOP",
            "a -> SKIP |~| STOP",
            "a -> SKIP [] CHAOS",
        ] {
            agree(&u, src);
        }
    }

    #[test]
    fn agrees_on_parallel_composition() {
        let u = uni_basic();
        for src in [
            "a -> SKIP || b -> SKIP",
            "a -> SKIP [| a |] a -> b -> SKIP",
            "a -> SKIP [| a, b |] b -> SKIP",
            "a -> a -> SKIP [| a |] a -> SKIP",
        ] {
            agree(&u, src);
        }
    }

    #[test]
    fn agrees_on_recursion() {
        let u = uni_basic();
        agree(&u, "mu X . a -> X");
        agree(&u, "P = a -> P\nP");
    }

    #[test]
    fn agrees_on_stores() {
        let u = uni_static();
        for src in ["x := 1", "x := 1 ; s ! x -> SKIP", "s ? x -> SKIP", "s ? x -> s ! x -> SKIP"]
        {
            agree(&u, src);
        }
    }

    #[test]
    fn agrees_on_mobility() {
        let u = uni_mobile();
        for src in [
            "c.0 -> SKIP",
            "k :=s c",
            "k :=s c ; k :=r c",
            "k :=s c ; c.0 -> SKIP",
            "k :=s c ; k :=r c ; c.0 -> SKIP",
        ] {
            agree(&u, src);
        }
    }
}
