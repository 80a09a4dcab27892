//! The finite universe a run is checked against: events, interfaces,
//! variable stores, and the table of decorated traces up to the length bound.
//!
//! Everything downstream works with small integer ids into the tables built
//! here. A decorated trace is a sequence of entries `(interface, event)`;
//! the interface is the set of mobile channels the process holds at that
//! point, and the event is either a communication or the placeholder `nil`
//! used for pure interface updates. Every trace starts with a seed entry
//! `(initially owned, nil)`, so a trace of "length" k occupies k+1 slots
//! only conceptually — here the seed counts toward the bound, which keeps
//! the arithmetic uniform.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, OnceLock};

use serde::Deserialize;

use crate::error::ConfigError;

/// Index into the event table. 0 is always `nil`.
pub type EventId = u8;
/// Bitset of mobile channels (bit i = i-th mobile channel by name order).
pub type IfaceMask = u8;
/// Bitset of non-nil events (bit e-1 = event id e).
pub type RefMask = u8;
/// Index into the decorated-trace table.
pub type DatId = u16;
/// Index into the variable-store table.
pub type StoreId = u8;

/// One slot of a decorated trace.
pub type DatEntry = (IfaceMask, EventId);

pub const NIL: EventId = 0;

/// Hard ceilings that keep packed observation rows inside a `u64` and the
/// exhaustive sweeps tractable.
pub const MAX_EVENTS: usize = 8; // non-nil events
pub const MAX_MOBILE: usize = 6;
pub const MAX_STORES: usize = 64;
pub const MAX_TRACES: usize = 1 << 14;

/// A value a channel can carry or a variable can hold: an integer or the
/// name of a mobile channel (stored as its index).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Int(i64),
    Chan(u8),
}

/// Whether a name refers to a static or a mobile channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChanRef {
    Static(u8),
    Mobile(u8),
}

#[derive(Clone, Debug)]
struct EventInfo {
    name: String,
    /// `Some(m)` when this is a communication on mobile channel m.
    mobile: Option<u8>,
}

#[derive(Clone, Debug)]
struct VarInfo {
    name: String,
    domain: Vec<Value>,
    init: Value,
}

#[derive(Clone, Debug)]
struct DatInfo {
    entries: Vec<DatEntry>,
    last_iface: IfaceMask,
    /// The interface of the last mobile-view entry: the channels actually
    /// held after this trace. Differs from `last_iface` on traces whose
    /// final entries are static events contributed by the other side of a
    /// parallel merge (their decorations are that side's stale snapshot).
    m_chans: IfaceMask,
    /// Refusable-event cap at the end of this trace: all static events plus
    /// the events of currently held (`m_chans`) mobile channels.
    cap: RefMask,
    /// Per-slot validity: every recorded event lies in its own entry's
    /// interface. Checked independently of the seed.
    mc1_ok: bool,
    /// Table membership for substitution families: correct seed, within the
    /// bound, and `mc1_ok`. False only for traces interned from raw input.
    valid: bool,
    /// Events of the mobile view (nil markers and mobile communications).
    mtr_evts: Vec<EventId>,
}

/// A validated configuration, ready to build a [`Universe`] from. Fields are
/// public so callers can override the bound or the owned set (the `compare`
/// and per-component pipelines need both) before building.
#[derive(Clone, Debug)]
pub struct Config {
    pub actions: Vec<String>,
    pub static_channels: Vec<(String, Vec<Value>)>,
    /// Sorted by name; `Value::Chan(i)` indexes into this very list.
    pub mobile_channels: Vec<(String, Vec<Value>)>,
    pub owned: Vec<String>,
    /// (name, initial value, domain), sorted by name.
    pub variables: Vec<(String, Value, Vec<Value>)>,
    pub bound: usize,
    pub unfold: usize,
    pub components: BTreeMap<String, Vec<String>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawValue {
    Int(i64),
    Name(String),
}

#[derive(Deserialize)]
struct RawVar {
    init: RawValue,
    domain: Vec<RawValue>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    actions: Vec<String>,
    #[serde(default, rename = "static")]
    static_channels: BTreeMap<String, Vec<RawValue>>,
    #[serde(default)]
    mobile: BTreeMap<String, Vec<RawValue>>,
    #[serde(default)]
    owned: Vec<String>,
    #[serde(default)]
    variables: BTreeMap<String, RawVar>,
    #[serde(default)]
    bound: Option<usize>,
    #[serde(default)]
    unfold: Option<usize>,
    #[serde(default)]
    components: BTreeMap<String, Vec<String>>,
}

const RESERVED: &[&str] = &["nil", "STOP", "SKIP", "CHAOS", "mu"];

/// Parse and validate a configuration file.
pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let raw: RawConfig =
        serde_json::from_str(text).map_err(|e| ConfigError::Json(e.to_string()))?;

    // Name hygiene across every namespace that shares the identifier space.
    for ch in raw.static_channels.keys() {
        if raw.mobile.contains_key(ch) {
            return Err(ConfigError::Disjointness(ch.clone()));
        }
    }
    let mut seen: std::collections::HashSet<String> = Default::default();
    let all_names = raw
        .actions
        .iter()
        .chain(raw.static_channels.keys())
        .chain(raw.mobile.keys())
        .chain(raw.variables.keys());
    for name in all_names {
        if RESERVED.contains(&name.as_str()) {
            return Err(ConfigError::ReservedName(name.clone()));
        }
        if !seen.insert(name.clone()) {
            return Err(ConfigError::DuplicateName(name.clone()));
        }
    }

    let bound = raw.bound.unwrap_or(3);
    if bound == 0 {
        return Err(ConfigError::BadBound(0));
    }

    // Mobile channel order is fixed here (BTreeMap iterates sorted) and is
    // what `Value::Chan` indexes refer to everywhere else.
    let mobile_names: Vec<String> = raw.mobile.keys().cloned().collect();
    let mobile_ix = |name: &str| mobile_names.iter().position(|m| m == name).map(|i| i as u8);

    let resolve_domain = |owner: &str,
                          dom: &[RawValue],
                          carrier_is_static: bool|
     -> Result<Vec<Value>, ConfigError> {
        if dom.is_empty() {
            return Err(ConfigError::EmptyDomain(owner.to_string()));
        }
        let mut ints = false;
        let mut chans = false;
        let mut out = Vec::with_capacity(dom.len());
        for v in dom {
            match v {
                RawValue::Int(i) => {
                    ints = true;
                    out.push(Value::Int(*i));
                }
                RawValue::Name(n) => {
                    chans = true;
                    if carrier_is_static {
                        return Err(ConfigError::StaticCarrier(owner.to_string()));
                    }
                    match mobile_ix(n) {
                        Some(ix) => out.push(Value::Chan(ix)),
                        None if raw.static_channels.contains_key(n) => {
                            return Err(ConfigError::NotMobile(n.clone()))
                        }
                        None => return Err(ConfigError::UnknownChannel(n.clone())),
                    }
                }
            }
        }
        if ints && chans {
            return Err(ConfigError::MixedDomain(owner.to_string()));
        }
        out.sort();
        out.dedup();
        Ok(out)
    };

    let mut static_channels = Vec::new();
    for (name, dom) in &raw.static_channels {
        static_channels.push((name.clone(), resolve_domain(name, dom, true)?));
    }
    let mut mobile_channels = Vec::new();
    for (name, dom) in &raw.mobile {
        mobile_channels.push((name.clone(), resolve_domain(name, dom, false)?));
    }

    let mut owned = Vec::new();
    for ch in &raw.owned {
        if mobile_ix(ch).is_none() {
            return Err(ConfigError::UnknownChannel(ch.clone()));
        }
        if !owned.contains(ch) {
            owned.push(ch.clone());
        }
    }

    let mut variables = Vec::new();
    for (name, var) in &raw.variables {
        let dom = resolve_domain(name, &var.domain, false)?;
        let init = match &var.init {
            RawValue::Int(i) => Value::Int(*i),
            RawValue::Name(n) => match mobile_ix(n) {
                Some(ix) => Value::Chan(ix),
                None if raw.static_channels.contains_key(n) => {
                    return Err(ConfigError::NotMobile(n.clone()))
                }
                None => return Err(ConfigError::UnknownChannel(n.clone())),
            },
        };
        if !dom.contains(&init) {
            return Err(ConfigError::InitOutOfDomain(name.clone()));
        }
        variables.push((name.clone(), init, dom));
    }

    let mut components = BTreeMap::new();
    for (comp, chans) in &raw.components {
        let mut list = Vec::new();
        for ch in chans {
            if mobile_ix(ch).is_none() {
                return Err(ConfigError::UnknownChannel(ch.clone()));
            }
            if !list.contains(ch) {
                list.push(ch.clone());
            }
        }
        components.insert(comp.clone(), list);
    }

    Ok(Config {
        actions: raw.actions,
        static_channels,
        mobile_channels,
        owned,
        variables,
        bound,
        unfold: raw.unfold.unwrap_or(2),
        components,
    })
}

/// The frozen tables. Build one per run with [`Universe::build`] and share it
/// behind an `Arc`; observation sets compare universes by pointer identity.
pub struct Universe {
    pub bound: usize,
    pub unfold: usize,
    pub config: Config,

    events: Vec<EventInfo>,
    event_by_name: HashMap<String, EventId>,
    static_ref_mask: RefMask,
    /// Per mobile channel: the mask of its communication events.
    mobile_event_mask: Vec<RefMask>,
    pub owned_mask: IfaceMask,

    vars: Vec<VarInfo>,
    var_strides: Vec<usize>,
    pub n_stores: usize,
    pub init_store: StoreId,

    dats: Vec<DatInfo>,
    dat_index: HashMap<Vec<DatEntry>, DatId>,
    /// Number of table traces that satisfy entry validity; these occupy ids
    /// `0..valid_count` and raw imports come after.
    valid_count: usize,
    /// Per trace: every table trace it is a prefix of (itself included).
    exts: Vec<Vec<DatId>>,
    /// Valid traces grouped by final interface.
    mc3_families: HashMap<IfaceMask, Vec<DatId>>,
    /// Valid traces grouped by (final interface, mobile-view events).
    r2m_families: HashMap<(IfaceMask, Vec<EventId>), Vec<DatId>>,

    pub(crate) plumb_cache: OnceLock<Arc<std::collections::BTreeSet<crate::obs::Row>>>,
}

impl std::fmt::Debug for Universe {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Universe")
            .field("bound", &self.bound)
            .field("events", &self.events.len())
            .field("stores", &self.n_stores)
            .field("traces", &self.dats.len())
            .finish()
    }
}

impl Universe {
    pub fn build(cfg: &Config) -> Result<Universe, ConfigError> {
        if cfg.bound == 0 {
            return Err(ConfigError::BadBound(0));
        }
        if cfg.mobile_channels.len() > MAX_MOBILE {
            return Err(ConfigError::TooLarge {
                what: "mobile channel count",
                actual: cfg.mobile_channels.len(),
                limit: MAX_MOBILE,
            });
        }

        // Event table: nil first, then all communications sorted by display
        // name so ids are stable across runs.
        let mobile_name = |ix: u8| cfg.mobile_channels[ix as usize].0.as_str();
        let value_name = |v: &Value| match v {
            Value::Int(i) => i.to_string(),
            Value::Chan(ix) => mobile_name(*ix).to_string(),
        };
        let mut named: Vec<(String, Option<u8>)> = Vec::new();
        for a in &cfg.actions {
            named.push((a.clone(), None));
        }
        for (ch, dom) in &cfg.static_channels {
            for v in dom {
                named.push((format!("{ch}.{}", value_name(v)), None));
            }
        }
        for (m, (ch, dom)) in cfg.mobile_channels.iter().enumerate() {
            for v in dom {
                named.push((format!("{ch}.{}", value_name(v)), Some(m as u8)));
            }
        }
        named.sort();
        if named.len() > MAX_EVENTS {
            return Err(ConfigError::TooLarge {
                what: "event count",
                actual: named.len(),
                limit: MAX_EVENTS,
            });
        }
        let mut events = vec![EventInfo { name: "nil".into(), mobile: None }];
        let mut event_by_name = HashMap::new();
        let mut static_ref_mask: RefMask = 0;
        let mut mobile_event_mask = vec![0 as RefMask; cfg.mobile_channels.len()];
        for (name, mobile) in named {
            let id = events.len() as EventId;
            event_by_name.insert(name.clone(), id);
            match mobile {
                Some(m) => mobile_event_mask[m as usize] |= 1 << (id - 1),
                None => static_ref_mask |= 1 << (id - 1),
            }
            events.push(EventInfo { name, mobile });
        }

        let mut owned_mask: IfaceMask = 0;
        for ch in &cfg.owned {
            let ix = cfg
                .mobile_channels
                .iter()
                .position(|(m, _)| m == ch)
                .ok_or_else(|| ConfigError::UnknownChannel(ch.clone()))?;
            owned_mask |= 1 << ix;
        }

        // Store table: a store id is a mixed-radix number over the variable
        // domains, so we never materialize the stores themselves.
        let vars: Vec<VarInfo> = cfg
            .variables
            .iter()
            .map(|(name, init, dom)| VarInfo {
                name: name.clone(),
                domain: dom.clone(),
                init: *init,
            })
            .collect();
        let mut var_strides = vec![0usize; vars.len()];
        let mut n_stores = 1usize;
        for (i, v) in vars.iter().enumerate() {
            var_strides[i] = n_stores;
            n_stores = n_stores.saturating_mul(v.domain.len());
            if n_stores > MAX_STORES {
                return Err(ConfigError::TooLarge {
                    what: "store count",
                    actual: n_stores,
                    limit: MAX_STORES,
                });
            }
        }
        let mut init_store = 0usize;
        for (i, v) in vars.iter().enumerate() {
            let pos = v.domain.iter().position(|d| d == &v.init).unwrap();
            init_store += pos * var_strides[i];
        }

        let mut u = Universe {
            bound: cfg.bound,
            unfold: cfg.unfold,
            config: cfg.clone(),
            events,
            event_by_name,
            static_ref_mask,
            mobile_event_mask,
            owned_mask,
            vars,
            var_strides,
            n_stores,
            init_store: init_store as StoreId,
            dats: Vec::new(),
            dat_index: HashMap::new(),
            valid_count: 0,
            exts: Vec::new(),
            mc3_families: HashMap::new(),
            r2m_families: HashMap::new(),
            plumb_cache: OnceLock::new(),
        };

        // Trace table: breadth-first from the seed, extending with every
        // entry whose event is nil or belongs to the entry's own interface.
        // Interfaces are unconstrained between slots — merged parallel
        // traces interleave the two sides' interfaces, so the table must
        // admit those shapes and per-slot validity is all we can demand.
        let seed = vec![(u.owned_mask, NIL)];
        u.insert_dat(seed, true)?;
        let mut frontier = vec![0 as DatId];
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for d in std::mem::take(&mut frontier) {
                if u.dats[d as usize].entries.len() >= u.bound {
                    continue;
                }
                for iface in 0..u.n_ifaces() as IfaceMask {
                    for ev in 0..u.events.len() as EventId {
                        if !u.entry_ok(iface, ev) {
                            continue;
                        }
                        let mut entries = u.dats[d as usize].entries.clone();
                        entries.push((iface, ev));
                        if u.dat_index.contains_key(&entries) {
                            continue;
                        }
                        next.push(u.insert_dat(entries, true)?);
                    }
                }
            }
            frontier = next;
        }
        u.valid_count = u.dats.len();
        u.rebuild_exts();
        for d in 0..u.valid_count as DatId {
            let info = &u.dats[d as usize];
            u.mc3_families.entry(info.m_chans).or_default().push(d);
            u.r2m_families
                .entry((info.m_chans, info.mtr_evts.clone()))
                .or_default()
                .push(d);
        }
        Ok(u)
    }

    fn insert_dat(&mut self, entries: Vec<DatEntry>, valid: bool) -> Result<DatId, ConfigError> {
        if self.dats.len() >= MAX_TRACES {
            return Err(ConfigError::TooLarge {
                what: "trace count",
                actual: self.dats.len() + 1,
                limit: MAX_TRACES,
            });
        }
        let id = self.dats.len() as DatId;
        let last_iface = entries.last().map(|e| e.0).unwrap_or(0);
        let is_mtr =
            |e: EventId| e == NIL || self.events[e as usize].mobile.is_some();
        let m_chans = entries
            .iter()
            .rev()
            .find(|(_, e)| is_mtr(*e))
            .map(|(i, _)| *i)
            .unwrap_or(0);
        let cap = self.cap_of_iface(m_chans);
        let mc1_ok = entries.iter().all(|&(i, e)| self.entry_ok(i, e));
        let mtr_evts = entries.iter().filter(|(_, e)| is_mtr(*e)).map(|(_, e)| *e).collect();
        self.dat_index.insert(entries.clone(), id);
        self.dats.push(DatInfo {
            entries,
            last_iface,
            m_chans,
            cap,
            mc1_ok,
            valid,
            mtr_evts,
        });
        Ok(id)
    }

    fn rebuild_exts(&mut self) {
        let mut exts: Vec<Vec<DatId>> = vec![Vec::new(); self.dats.len()];
        for (i, info) in self.dats.iter().enumerate() {
            // Every prefix of `info.entries` that is itself in the table
            // gains i as an extension.
            for len in 1..=info.entries.len() {
                if let Some(&p) = self.dat_index.get(&info.entries[..len]) {
                    exts[p as usize].push(i as DatId);
                }
            }
        }
        for list in &mut exts {
            list.sort_unstable();
        }
        self.exts = exts;
    }

    /// Intern raw decorated traces (from an externally supplied observation
    /// set) that may violate entry validity, then refresh the prefix index.
    /// Must run before the first observation set is built against this
    /// universe, since the helper-row cache is computed once.
    pub fn intern_batch(&mut self, traces: &[Vec<DatEntry>]) -> Result<Vec<DatId>, ConfigError> {
        assert!(self.plumb_cache.get().is_none(), "interning after freeze");
        let mut ids = Vec::with_capacity(traces.len());
        let mut added = false;
        for t in traces {
            if let Some(&id) = self.dat_index.get(t) {
                ids.push(id);
                continue;
            }
            let valid = !t.is_empty()
                && t[0] == (self.owned_mask, NIL)
                && t.len() <= self.bound
                && t.iter().all(|&(i, e)| self.entry_ok(i, e));
            // The builder enumerates every valid trace, so a fresh insert
            // can only be invalid — otherwise it would have hit the index.
            debug_assert!(!valid);
            let id = self.insert_dat(t.clone(), valid)?;
            ids.push(id);
            added = true;
        }
        if added {
            self.rebuild_exts();
        }
        Ok(ids)
    }

    // ---- events ----

    pub fn n_events(&self) -> usize {
        self.events.len() - 1
    }
    pub fn event_name(&self, e: EventId) -> &str {
        &self.events[e as usize].name
    }
    pub fn event_id(&self, name: &str) -> Option<EventId> {
        if name == "nil" {
            return Some(NIL);
        }
        self.event_by_name.get(name).copied()
    }
    /// The mobile channel a communication belongs to, if any.
    pub fn event_mobile(&self, e: EventId) -> Option<u8> {
        self.events[e as usize].mobile
    }
    pub fn event_bit(&self, e: EventId) -> RefMask {
        debug_assert_ne!(e, NIL);
        1 << (e - 1)
    }
    pub fn all_events_mask(&self) -> RefMask {
        if self.n_events() == 0 {
            0
        } else {
            ((1u16 << self.n_events()) - 1) as RefMask
        }
    }
    pub fn static_mask(&self) -> RefMask {
        self.static_ref_mask
    }
    /// Communication events of every mobile channel.
    pub fn mobile_mask(&self) -> RefMask {
        self.all_events_mask() & !self.static_ref_mask
    }
    pub fn mobile_events(&self, chan: u8) -> RefMask {
        self.mobile_event_mask[chan as usize]
    }

    // ---- channels ----

    pub fn channel(&self, name: &str) -> Option<ChanRef> {
        if let Some(i) = self.config.static_channels.iter().position(|(n, _)| n == name) {
            return Some(ChanRef::Static(i as u8));
        }
        self.config
            .mobile_channels
            .iter()
            .position(|(n, _)| n == name)
            .map(|i| ChanRef::Mobile(i as u8))
    }
    pub fn chan_name(&self, ch: ChanRef) -> &str {
        match ch {
            ChanRef::Static(i) => &self.config.static_channels[i as usize].0,
            ChanRef::Mobile(i) => &self.config.mobile_channels[i as usize].0,
        }
    }
    pub fn chan_domain(&self, ch: ChanRef) -> &[Value] {
        match ch {
            ChanRef::Static(i) => &self.config.static_channels[i as usize].1,
            ChanRef::Mobile(i) => &self.config.mobile_channels[i as usize].1,
        }
    }
    pub fn mobile_count(&self) -> usize {
        self.config.mobile_channels.len()
    }
    pub fn mobile_name(&self, ix: u8) -> &str {
        &self.config.mobile_channels[ix as usize].0
    }
    /// The communication event `ch.v`.
    pub fn comm_event(&self, ch: ChanRef, v: &Value) -> Option<EventId> {
        let vname = match v {
            Value::Int(i) => i.to_string(),
            Value::Chan(ix) => self.mobile_name(*ix).to_string(),
        };
        self.event_id(&format!("{}.{}", self.chan_name(ch), vname))
    }
    pub fn value_name(&self, v: &Value) -> String {
        match v {
            Value::Int(i) => i.to_string(),
            Value::Chan(ix) => self.mobile_name(*ix).to_string(),
        }
    }

    // ---- variables / stores ----

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }
    pub fn var_name(&self, v: usize) -> &str {
        &self.vars[v].name
    }
    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }
    pub fn var_domain(&self, v: usize) -> &[Value] {
        &self.vars[v].domain
    }
    pub fn store_get(&self, s: StoreId, v: usize) -> Value {
        let pos = (s as usize / self.var_strides[v]) % self.vars[v].domain.len();
        self.vars[v].domain[pos]
    }
    /// Replace variable v with `val`; `None` when the value is outside the
    /// variable's domain.
    pub fn store_set(&self, s: StoreId, v: usize, val: Value) -> Option<StoreId> {
        let dom = &self.vars[v].domain;
        let pos = dom.iter().position(|d| d == &val)?;
        let old = (s as usize / self.var_strides[v]) % dom.len();
        let without = s as usize - old * self.var_strides[v];
        Some((without + pos * self.var_strides[v]) as StoreId)
    }

    // ---- interfaces & refusal caps ----

    pub fn n_ifaces(&self) -> usize {
        1 << self.config.mobile_channels.len()
    }
    /// Events refusable under an interface: every static event plus the
    /// events of each held mobile channel.
    pub fn cap_of_iface(&self, iface: IfaceMask) -> RefMask {
        let mut cap = self.static_ref_mask;
        for (m, mask) in self.mobile_event_mask.iter().enumerate() {
            if iface & (1 << m) != 0 {
                cap |= mask;
            }
        }
        cap
    }
    /// Per-slot validity: a communication on a mobile channel may only be
    /// recorded when the slot's own interface holds that channel.
    pub fn entry_ok(&self, iface: IfaceMask, ev: EventId) -> bool {
        match self.events.get(ev as usize).and_then(|e| e.mobile) {
            Some(m) => iface & (1 << m) != 0,
            None => true,
        }
    }

    // ---- decorated traces ----

    pub fn n_dats(&self) -> usize {
        self.dats.len()
    }
    pub fn n_valid_dats(&self) -> usize {
        self.valid_count
    }
    pub fn seed(&self) -> DatId {
        0
    }
    pub fn dat_entries(&self, d: DatId) -> &[DatEntry] {
        &self.dats[d as usize].entries
    }
    pub fn dat_len(&self, d: DatId) -> usize {
        self.dats[d as usize].entries.len()
    }
    pub fn dat_valid(&self, d: DatId) -> bool {
        self.dats[d as usize].valid
    }
    /// Per-slot validity of every entry, ignoring the seed (the health
    /// question, as opposed to `dat_valid`'s table-membership question).
    pub fn dat_mc1_ok(&self, d: DatId) -> bool {
        self.dats[d as usize].mc1_ok
    }
    /// Interface recorded on the final entry, stale decorations and all.
    pub fn last_iface(&self, d: DatId) -> IfaceMask {
        self.dats[d as usize].last_iface
    }
    /// The mobile channels actually held after this trace.
    pub fn m_chans(&self, d: DatId) -> IfaceMask {
        self.dats[d as usize].m_chans
    }
    /// Refusal cap at the end of trace d.
    pub fn cap(&self, d: DatId) -> RefMask {
        self.dats[d as usize].cap
    }
    pub fn mtr_evts(&self, d: DatId) -> &[EventId] {
        &self.dats[d as usize].mtr_evts
    }
    pub fn lookup_dat(&self, entries: &[DatEntry]) -> Option<DatId> {
        self.dat_index.get(entries).copied()
    }
    /// Append one entry if the resulting trace is in the table.
    pub fn extend(&self, d: DatId, entry: DatEntry) -> Option<DatId> {
        let mut entries = self.dats[d as usize].entries.clone();
        entries.push(entry);
        self.lookup_dat(&entries)
    }
    /// All table traces with d as a prefix, d itself included, ascending.
    pub fn extensions(&self, d: DatId) -> &[DatId] {
        &self.exts[d as usize]
    }
    pub fn is_prefix(&self, d: DatId, of: DatId) -> bool {
        let a = &self.dats[d as usize].entries;
        let b = &self.dats[of as usize].entries;
        a.len() <= b.len() && &b[..a.len()] == a.as_slice()
    }
    /// Entries of `post` past the end of `pre`; `None` if not a prefix.
    pub fn suffix(&self, pre: DatId, post: DatId) -> Option<&[DatEntry]> {
        if !self.is_prefix(pre, post) {
            return None;
        }
        Some(&self.dats[post as usize].entries[self.dats[pre as usize].entries.len()..])
    }
    /// The table trace `sub ++ (post - pre)`, when it exists.
    pub fn rebase(&self, pre: DatId, post: DatId, sub: DatId) -> Option<DatId> {
        let suffix = self.suffix(pre, post)?;
        if suffix.is_empty() {
            return Some(sub);
        }
        let mut entries = self.dats[sub as usize].entries.clone();
        entries.extend_from_slice(suffix);
        self.lookup_dat(&entries)
    }
    /// Valid traces whose final mobile inventory is `m_chans` (the widest
    /// substitution family: interface history and events are both free).
    pub fn family_by_inventory(&self, m_chans: IfaceMask) -> &[DatId] {
        static EMPTY: Vec<DatId> = Vec::new();
        self.mc3_families.get(&m_chans).unwrap_or(&EMPTY)
    }
    /// Valid traces with the given final mobile inventory whose mobile view
    /// carries exactly these events (the narrower family: only interface
    /// history and non-mobile events are free).
    pub fn family_by_inventory_and_mobile_events(
        &self,
        m_chans: IfaceMask,
        evts: &[EventId],
    ) -> &[DatId] {
        static EMPTY: Vec<DatId> = Vec::new();
        self.r2m_families
            .get(&(m_chans, evts.to_vec()))
            .unwrap_or(&EMPTY)
    }

    // ---- display helpers ----

    pub fn iface_names(&self, iface: IfaceMask) -> Vec<String> {
        (0..self.mobile_count())
            .filter(|m| iface & (1 << m) != 0)
            .map(|m| self.mobile_name(m as u8).to_string())
            .collect()
    }
    pub fn ref_names(&self, mask: RefMask) -> Vec<String> {
        (1..=self.n_events() as EventId)
            .filter(|e| mask & self.event_bit(*e) != 0)
            .map(|e| self.event_name(e).to_string())
            .collect()
    }
}

/// Convenience: parse, build, freeze.
pub fn universe_from_config_text(text: &str) -> Result<Arc<Universe>, ConfigError> {
    Ok(Arc::new(Universe::build(&parse_config(text)?)?))
}
