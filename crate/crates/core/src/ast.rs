//! Resolved process syntax. The parser turns source text into this form
//! with every name already resolved against a [`Universe`]: events by id,
//! channels as [`ChanRef`], variables by index. Definitions stay symbolic
//! (`Ref`) so recursion can be unfolded lazily with a budget.

use std::collections::{BTreeMap, BTreeSet};

use crate::universe::{ChanRef, EventId, RefMask, StoreId, Universe, Value};

/// A store expression: a literal or a variable lookup.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    Lit(Value),
    Var(u8),
}

impl Expr {
    pub fn eval(&self, u: &Universe, store: StoreId) -> Value {
        match *self {
            Expr::Lit(v) => v,
            Expr::Var(x) => u.store_get(store, x as usize),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Proc {
    Stop,
    Skip,
    Chaos,
    /// `e -> P`: engage in one event, then continue.
    Event(EventId, Box<Proc>),
    /// `ch ? x -> P`: accept any value of the channel, binding it.
    Input(ChanRef, u8, Box<Proc>),
    /// `ch ?? x -> P`: accept a channel name and gain the named channel.
    ChanInput(ChanRef, u8, Box<Proc>),
    /// `ch ! e -> P`: offer exactly the value of `e`.
    Output(ChanRef, Expr, Box<Proc>),
    /// `x := e`: terminating update of one variable.
    Assign(u8, Expr),
    /// `x :=s e`: record the named channel and give it away.
    SendAssign(u8, Expr),
    /// `x :=r e`: record the named channel and take it up.
    RecvAssign(u8, Expr),
    Seq(Box<Proc>, Box<Proc>),
    /// Internal choice `|~|`.
    Int(Box<Proc>, Box<Proc>),
    /// External choice `[]`.
    Ext(Box<Proc>, Box<Proc>),
    /// `P || Q` or `P [| es |] Q`; `None` synchronizes on the alphabet
    /// intersection, `Some(mask)` on exactly those events.
    Par(Box<Proc>, Box<Proc>, Option<RefMask>),
    Mu(String, Box<Proc>),
    Ref(String),
}

/// A parsed source file: named definitions plus the process to run.
#[derive(Clone, Debug)]
pub struct Program {
    pub defs: BTreeMap<String, Proc>,
    pub main: Proc,
}

impl Program {
    pub fn from_proc(p: Proc) -> Program {
        Program { defs: BTreeMap::new(), main: p }
    }
}

/// Variable usage of a term, as bit masks over variable indices.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct VarUse {
    pub read: u64,
    pub written: u64,
}

impl VarUse {
    /// True when running `self` and `other` side by side could race: one
    /// writes what the other touches.
    pub fn conflicts(self, other: VarUse) -> bool {
        (self.written & (other.read | other.written))
            | (other.written & (self.read | self.written))
            != 0
    }
}

fn expr_reads(e: &Expr) -> u64 {
    match *e {
        Expr::Lit(_) => 0,
        Expr::Var(x) => 1 << x,
    }
}

/// Collect variable usage, following references once each.
pub fn var_use(p: &Proc, defs: &BTreeMap<String, Proc>) -> VarUse {
    fn go(p: &Proc, defs: &BTreeMap<String, Proc>, seen: &mut BTreeSet<String>, out: &mut VarUse) {
        match p {
            Proc::Stop | Proc::Skip | Proc::Chaos => {}
            Proc::Event(_, k) => go(k, defs, seen, out),
            Proc::Input(_, x, k) | Proc::ChanInput(_, x, k) => {
                out.written |= 1 << x;
                go(k, defs, seen, out);
            }
            Proc::Output(_, e, k) => {
                out.read |= expr_reads(e);
                go(k, defs, seen, out);
            }
            Proc::Assign(x, e) | Proc::SendAssign(x, e) | Proc::RecvAssign(x, e) => {
                out.written |= 1 << x;
                out.read |= expr_reads(e);
            }
            Proc::Seq(a, b) | Proc::Int(a, b) | Proc::Ext(a, b) | Proc::Par(a, b, _) => {
                go(a, defs, seen, out);
                go(b, defs, seen, out);
            }
            Proc::Mu(_, k) => go(k, defs, seen, out),
            Proc::Ref(n) => {
                if seen.insert(n.clone()) {
                    if let Some(body) = defs.get(n) {
                        go(body, defs, seen, out);
                    }
                }
            }
        }
    }
    let mut out = VarUse::default();
    go(p, defs, &mut BTreeSet::new(), &mut out);
    out
}

fn chan_events(u: &Universe, ch: ChanRef) -> RefMask {
    match ch {
        ChanRef::Mobile(m) => u.mobile_events(m),
        ChanRef::Static(_) => u
            .chan_domain(ch)
            .iter()
            .filter_map(|v| u.comm_event(ch, v))
            .fold(0, |acc, e| acc | u.event_bit(e)),
    }
}

/// The events a term can ever engage in. Channel-end assignments are
/// silent — they move interfaces, not messages — so they contribute
/// nothing; this is what the default synchronization set of `||` is cut
/// from.
pub fn alphabet(u: &Universe, p: &Proc, defs: &BTreeMap<String, Proc>) -> RefMask {
    fn go(
        u: &Universe,
        p: &Proc,
        defs: &BTreeMap<String, Proc>,
        seen: &mut BTreeSet<String>,
        out: &mut RefMask,
    ) {
        match p {
            Proc::Stop | Proc::Skip | Proc::Chaos => {}
            Proc::Event(e, k) => {
                *out |= u.event_bit(*e);
                go(u, k, defs, seen, out);
            }
            Proc::Input(ch, _, k) | Proc::ChanInput(ch, _, k) | Proc::Output(ch, _, k) => {
                *out |= chan_events(u, *ch);
                go(u, k, defs, seen, out);
            }
            Proc::Assign(..) | Proc::SendAssign(..) | Proc::RecvAssign(..) => {}
            Proc::Seq(a, b) | Proc::Int(a, b) | Proc::Ext(a, b) | Proc::Par(a, b, _) => {
                go(u, a, defs, seen, out);
                go(u, b, defs, seen, out);
            }
            Proc::Mu(_, k) => go(u, k, defs, seen, out),
            Proc::Ref(n) => {
                if seen.insert(n.clone()) {
                    if let Some(body) = defs.get(n) {
                        go(u, body, defs, seen, out);
                    }
                }
            }
        }
    }
    let mut out = 0;
    go(u, p, defs, &mut BTreeSet::new(), &mut out);
    out
}
