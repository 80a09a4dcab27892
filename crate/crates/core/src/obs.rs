//! Packed observations and observation sets.
//!
//! One observation of a process run is a before/after pair: control flags
//! (`ok`, `wait`), a decorated trace, a refusal set, and a variable store on
//! each side. Each side packs into 30 bits — flag, flag, trace id, refusal
//! mask, store id — so a whole row is one `u64` and a denotation is a
//! `BTreeSet<u64>` ordered by the before-side first.
//!
//! Alongside the rows, a set carries *abort keys*: before-states at which
//! the run's outcome is declared undefined (an unauthorised mobile event, or
//! an append that fell off the length bound). A key stands for "anything at
//! all can happen from here, including instability"; [`concretize`] expands
//! keys into their full fan of rows when two sets need comparing.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::error::EngineError;
use crate::universe::{
    DatEntry, DatId, IfaceMask, RefMask, StoreId, Universe, NIL,
};

/// One side of an observation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Half {
    pub ok: bool,
    pub wait: bool,
    pub dat: DatId,
    pub refm: RefMask,
    pub store: StoreId,
}

impl Half {
    fn pack(self) -> u64 {
        debug_assert!((self.dat as usize) < (1 << 14));
        debug_assert!((self.store as usize) < (1 << 6));
        (self.ok as u64) << 29
            | (self.wait as u64) << 28
            | (self.dat as u64) << 14
            | (self.refm as u64) << 6
            | self.store as u64
    }
    fn unpack(bits: u64) -> Half {
        Half {
            ok: bits >> 29 & 1 == 1,
            wait: bits >> 28 & 1 == 1,
            dat: (bits >> 14 & 0x3FFF) as DatId,
            refm: (bits >> 6 & 0xFF) as RefMask,
            store: (bits & 0x3F) as StoreId,
        }
    }
}

/// A packed observation row; orders before-side first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Row(pub u64);

impl Row {
    pub fn new(pre: Half, post: Half) -> Row {
        Row(pre.pack() << 30 | post.pack())
    }
    pub fn pre(self) -> Half {
        Half::unpack(self.0 >> 30)
    }
    pub fn post(self) -> Half {
        Half::unpack(self.0 & 0x3FFF_FFFF)
    }

    pub fn ok(self) -> bool {
        self.0 >> 59 & 1 == 1
    }
    pub fn wait(self) -> bool {
        self.0 >> 58 & 1 == 1
    }
    pub fn dat(self) -> DatId {
        (self.0 >> 44 & 0x3FFF) as DatId
    }
    pub fn refm(self) -> RefMask {
        (self.0 >> 36 & 0xFF) as RefMask
    }
    pub fn store(self) -> StoreId {
        (self.0 >> 30 & 0x3F) as StoreId
    }
    pub fn okp(self) -> bool {
        self.0 >> 29 & 1 == 1
    }
    pub fn waitp(self) -> bool {
        self.0 >> 28 & 1 == 1
    }
    pub fn datp(self) -> DatId {
        (self.0 >> 14 & 0x3FFF) as DatId
    }
    pub fn refp(self) -> RefMask {
        (self.0 >> 6 & 0xFF) as RefMask
    }
    pub fn storep(self) -> StoreId {
        (self.0 & 0x3F) as StoreId
    }

    /// The process was switched on and is past any waiting: the only region
    /// an operator is free to shape.
    pub fn started(self) -> bool {
        self.ok() && !self.wait()
    }
    /// The same row with the after-side `ok` forced true.
    pub fn with_okp(self) -> Row {
        Row(self.0 | 1 << 29)
    }
}

/// A before-state whose outcome is declared undefined: trace id and store.
pub type AbortKey = u32;

pub fn abort_key(dat: DatId, store: StoreId) -> AbortKey {
    (dat as AbortKey) << 6 | store as AbortKey
}
pub fn key_dat(k: AbortKey) -> DatId {
    (k >> 6) as DatId
}
pub fn key_store(k: AbortKey) -> StoreId {
    (k & 0x3F) as StoreId
}

/// A denotation: rows plus abort keys, tied to one universe. Sets from
/// different universes never mix (compared by `Arc` identity).
#[derive(Clone, Debug)]
pub struct ObservationSet {
    pub universe: Arc<Universe>,
    pub rows: BTreeSet<Row>,
    pub aborted: BTreeSet<AbortKey>,
}

impl ObservationSet {
    pub fn empty(universe: Arc<Universe>) -> ObservationSet {
        ObservationSet { universe, rows: BTreeSet::new(), aborted: BTreeSet::new() }
    }
    pub fn same_universe(&self, other: &ObservationSet) -> bool {
        Arc::ptr_eq(&self.universe, &other.universe)
    }
    /// Expand every abort key into its full started fan; the result carries
    /// no keys and is what comparisons run on.
    pub fn concretize(&self) -> ObservationSet {
        let mut rows = self.rows.clone();
        for &k in &self.aborted {
            fan_started(&self.universe, key_dat(k), key_store(k), &mut rows);
        }
        ObservationSet {
            universe: self.universe.clone(),
            rows,
            aborted: BTreeSet::new(),
        }
    }
}

/// Iterate the subsets of a bitmask, ascending from 0 to the mask itself.
pub fn subsets(mask: u8) -> impl Iterator<Item = u8> {
    let mut next = Some(0u8);
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == mask { None } else { Some((cur.wrapping_sub(mask)) & mask) };
        Some(cur)
    })
}

/// Trace ids whose every slot is internally valid — the range the control
/// flags' mandated rows quantify over. Traces with broken slots (possible
/// only via raw imports) are outside the model's trace type entirely.
pub fn sane_dats(u: &Universe) -> impl Iterator<Item = DatId> + '_ {
    (0..u.n_dats() as DatId).filter(move |&d| u.dat_mc1_ok(d))
}

/// All rows any healthy set must contain — the waiting and not-started
/// regions are pinned by the control-flag conditions, leaving only the
/// started region to the operator:
/// - waiting and switched on: the observation passes through unchanged;
/// - not switched on: anything trace-extending can happen, refusals capped
///   by what the end of the extended trace can refuse.
pub fn plumb(u: &Arc<Universe>) -> Arc<BTreeSet<Row>> {
    u.plumb_cache
        .get_or_init(|| {
            let mut rows = BTreeSet::new();
            for d in sane_dats(u) {
                let posts = fan_posts(u, d);
                for store in 0..u.n_stores as StoreId {
                    for m in subsets(u.cap(d)) {
                        let h = Half { ok: true, wait: true, dat: d, refm: m, store };
                        rows.insert(Row::new(h, h));
                    }
                    for m in subsets(u.all_events_mask()) {
                        for wait in [false, true] {
                            let pre = Half { ok: false, wait, dat: d, refm: m, store };
                            for &p in &posts {
                                rows.insert(Row::new(pre, p));
                            }
                        }
                    }
                }
            }
            Arc::new(rows)
        })
        .clone()
}

/// Every after-side a diverged predecessor admits from the given trace:
/// trace-extending, refusal capped by the extended trace's inventory, flags
/// and store free.
pub fn fan_posts(u: &Universe, from: DatId) -> Vec<Half> {
    let mut out = Vec::new();
    for &dp in u.extensions(from) {
        if !u.dat_mc1_ok(dp) {
            continue;
        }
        for mp in subsets(u.cap(dp)) {
            for storep in 0..u.n_stores as StoreId {
                for okp in [false, true] {
                    for waitp in [false, true] {
                        out.push(Half { ok: okp, wait: waitp, dat: dp, refm: mp, store: storep });
                    }
                }
            }
        }
    }
    out
}

/// The full fan out of one started before-state — what an abort key stands
/// for. Before-side refusals are unconstrained.
pub fn fan_started(u: &Universe, dat: DatId, store: StoreId, rows: &mut BTreeSet<Row>) {
    let posts = fan_posts(u, dat);
    for m in subsets(u.all_events_mask()) {
        let pre = Half { ok: true, wait: false, dat, refm: m, store };
        for &p in &posts {
            rows.insert(Row::new(pre, p));
        }
    }
}

/// The everything-can-happen process: all healthy rows, every before-state
/// undefined.
pub fn chaos(u: &Arc<Universe>) -> ObservationSet {
    let mut rows = (*plumb(u)).clone();
    let mut aborted = BTreeSet::new();
    for d in sane_dats(u) {
        for store in 0..u.n_stores as StoreId {
            fan_started(u, d, store, &mut rows);
            aborted.insert(abort_key(d, store));
        }
    }
    ObservationSet { universe: u.clone(), rows, aborted }
}

/// The do-nothing identity: pass every observation through unchanged.
pub fn ii_set(u: &Arc<Universe>) -> ObservationSet {
    let mut rows = (*plumb(u)).clone();
    for d in sane_dats(u) {
        for store in 0..u.n_stores as StoreId {
            for m in subsets(u.cap(d)) {
                let h = Half { ok: true, wait: false, dat: d, refm: m, store };
                rows.insert(Row::new(h, h));
            }
        }
    }
    ObservationSet { universe: u.clone(), rows, aborted: BTreeSet::new() }
}

// ---- canonical JSON ----

fn value_json(u: &Universe, v: crate::universe::Value) -> serde_json::Value {
    match v {
        crate::universe::Value::Int(i) => serde_json::json!(i),
        crate::universe::Value::Chan(ix) => serde_json::json!(u.mobile_name(ix)),
    }
}

fn dat_json(u: &Universe, d: DatId) -> serde_json::Value {
    serde_json::Value::Array(
        u.dat_entries(d)
            .iter()
            .map(|&(i, e)| {
                serde_json::json!({
                    "iface": u.iface_names(i),
                    "event": u.event_name(e),
                })
            })
            .collect(),
    )
}

fn store_json(u: &Universe, s: StoreId) -> serde_json::Value {
    let mut map = serde_json::Map::new();
    for v in 0..u.n_vars() {
        map.insert(u.var_name(v).to_string(), value_json(u, u.store_get(s, v)));
    }
    serde_json::Value::Object(map)
}

fn half_json(u: &Universe, h: Half) -> serde_json::Value {
    serde_json::json!({
        "ok": h.ok,
        "wait": h.wait,
        "tr": dat_json(u, h.dat),
        "ref": u.ref_names(h.refm),
        "store": store_json(u, h.store),
    })
}

/// One row in the documented JSON shape.
pub fn row_json(u: &Universe, r: Row) -> serde_json::Value {
    serde_json::json!({
        "before": half_json(u, r.pre()),
        "after": half_json(u, r.post()),
    })
}

/// A whole set: rows ascending, keys ascending.
pub fn set_json(s: &ObservationSet) -> serde_json::Value {
    let u = &s.universe;
    serde_json::json!({
        "schema": 1,
        "rows": s.rows.iter().map(|&r| row_json(u, r)).collect::<Vec<_>>(),
        "aborted": s
            .aborted
            .iter()
            .map(|&k| {
                serde_json::json!({
                    "tr": dat_json(u, key_dat(k)),
                    "store": store_json(u, key_store(k)),
                })
            })
            .collect::<Vec<_>>(),
    })
}

fn bad(msg: impl Into<String>) -> EngineError {
    EngineError::BadRow(msg.into())
}

fn entries_from_json(u: &Universe, v: &serde_json::Value) -> Result<Vec<DatEntry>, EngineError> {
    let arr = v.as_array().ok_or_else(|| bad("`tr` must be an array"))?;
    let mut out = Vec::with_capacity(arr.len());
    for item in arr {
        let iface = item
            .get("iface")
            .and_then(|x| x.as_array())
            .ok_or_else(|| bad("entry needs an `iface` array"))?;
        let mut mask: IfaceMask = 0;
        for name in iface {
            let name = name.as_str().ok_or_else(|| bad("interface entries are names"))?;
            match u.channel(name) {
                Some(crate::universe::ChanRef::Mobile(ix)) => mask |= 1 << ix,
                _ => return Err(bad(format!("`{name}` is not a mobile channel"))),
            }
        }
        let ev = item
            .get("event")
            .and_then(|x| x.as_str())
            .ok_or_else(|| bad("entry needs an `event` name"))?;
        let ev = u.event_id(ev).ok_or_else(|| bad(format!("unknown event `{ev}`")))?;
        out.push((mask, ev));
    }
    if out.is_empty() {
        return Err(bad("`tr` must contain at least the initial entry"));
    }
    if out.len() > u.bound {
        return Err(bad(format!("trace longer than the bound {}", u.bound)));
    }
    let _ = NIL;
    Ok(out)
}

fn refmask_from_json(u: &Universe, v: &serde_json::Value) -> Result<RefMask, EngineError> {
    let arr = v.as_array().ok_or_else(|| bad("`ref` must be an array"))?;
    let mut mask: RefMask = 0;
    for name in arr {
        let name = name.as_str().ok_or_else(|| bad("refusal entries are names"))?;
        let ev = u.event_id(name).ok_or_else(|| bad(format!("unknown event `{name}`")))?;
        if ev == NIL {
            return Err(bad("`nil` cannot be refused"));
        }
        mask |= u.event_bit(ev);
    }
    Ok(mask)
}

fn store_from_json(u: &Universe, v: &serde_json::Value) -> Result<StoreId, EngineError> {
    let obj = v.as_object().ok_or_else(|| bad("`store` must be an object"))?;
    let mut s = 0 as StoreId;
    if obj.len() != u.n_vars() {
        return Err(bad("store must assign every declared variable"));
    }
    for (name, val) in obj {
        let ix = u
            .var_index(name)
            .ok_or_else(|| bad(format!("unknown variable `{name}`")))?;
        let val = match val {
            serde_json::Value::Number(n) => crate::universe::Value::Int(
                n.as_i64().ok_or_else(|| bad("store values are integers or channel names"))?,
            ),
            serde_json::Value::String(nm) => match u.channel(nm) {
                Some(crate::universe::ChanRef::Mobile(ix)) => crate::universe::Value::Chan(ix),
                _ => return Err(bad(format!("`{nm}` is not a mobile channel"))),
            },
            _ => return Err(bad("store values are integers or channel names")),
        };
        s = u
            .store_set(s, ix, val)
            .ok_or_else(|| bad(format!("value outside the domain of `{name}`")))?;
    }
    Ok(s)
}

/// Decode a raw observation set, interning any traces the table has not
/// seen. Runs against a universe that is still mutable (not yet shared).
pub fn set_from_json(u: &mut Universe, text: &str) -> Result<(BTreeSet<Row>, BTreeSet<AbortKey>), EngineError> {
    let v: serde_json::Value =
        serde_json::from_str(text).map_err(|e| bad(format!("not valid JSON: {e}")))?;
    match v.get("schema").and_then(|s| s.as_u64()) {
        Some(1) => {}
        _ => return Err(bad("missing or unsupported `schema` (expected 1)")),
    }
    let empty = Vec::new();
    let rows_v = v.get("rows").and_then(|r| r.as_array()).unwrap_or(&empty);
    let aborted_v = v.get("aborted").and_then(|r| r.as_array()).unwrap_or(&empty);

    // Intern every mentioned trace first, in one batch.
    let mut traces = Vec::new();
    for row in rows_v {
        for side in ["before", "after"] {
            let h = row.get(side).ok_or_else(|| bad(format!("row needs `{side}`")))?;
            traces.push(entries_from_json(u, h.get("tr").unwrap_or(&serde_json::Value::Null))?);
        }
    }
    for k in aborted_v {
        traces.push(entries_from_json(u, k.get("tr").unwrap_or(&serde_json::Value::Null))?);
    }
    u.intern_batch(&traces)
        .map_err(|e| bad(format!("cannot intern trace: {e}")))?;

    let half = |u: &Universe, h: &serde_json::Value| -> Result<Half, EngineError> {
        let need_bool = |k: &str| {
            h.get(k).and_then(|x| x.as_bool()).ok_or_else(|| bad(format!("`{k}` must be a boolean")))
        };
        let entries = entries_from_json(u, h.get("tr").unwrap_or(&serde_json::Value::Null))?;
        let dat = u.lookup_dat(&entries).expect("interned above");
        Ok(Half {
            ok: need_bool("ok")?,
            wait: need_bool("wait")?,
            dat,
            refm: refmask_from_json(u, h.get("ref").unwrap_or(&serde_json::Value::Null))?,
            store: store_from_json(u, h.get("store").unwrap_or(&serde_json::Value::Null))?,
        })
    };

    let mut rows = BTreeSet::new();
    for row in rows_v {
        let pre = half(u, row.get("before").unwrap())?;
        let post = half(u, row.get("after").unwrap())?;
        rows.insert(Row::new(pre, post));
    }
    let mut aborted = BTreeSet::new();
    for k in aborted_v {
        let entries = entries_from_json(u, k.get("tr").unwrap_or(&serde_json::Value::Null))?;
        let dat = u.lookup_dat(&entries).expect("interned above");
        let store = store_from_json(u, k.get("store").unwrap_or(&serde_json::Value::Null))?;
        aborted.insert(abort_key(dat, store));
    }
    Ok((rows, aborted))
}
