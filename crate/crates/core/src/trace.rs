//! Projections and derived views of decorated traces.

use crate::error::EngineError;
use crate::universe::{DatEntry, DatId, EventId, IfaceMask, RefMask, Universe, NIL};

/// First projection: the interface of each entry.
pub fn pi1(t: &[DatEntry]) -> Vec<IfaceMask> {
    t.iter().map(|&(i, _)| i).collect()
}

/// Second projection: the event of each entry.
pub fn pi2(t: &[DatEntry]) -> Vec<EventId> {
    t.iter().map(|&(_, e)| e).collect()
}

/// The unique `t` with `shorter ++ t == longer`.
pub fn trace_suffix<'a>(
    longer: &'a [DatEntry],
    shorter: &[DatEntry],
) -> Result<&'a [DatEntry], EngineError> {
    if shorter.len() > longer.len() || &longer[..shorter.len()] != shorter {
        return Err(EngineError::NotAPrefix);
    }
    Ok(&longer[shorter.len()..])
}

/// Everything a mobility condition wants to know about one side of an
/// observation: the mobile view of its trace and the mobile part of its
/// refusals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Views {
    /// The trace restricted to interface markers and mobile communications.
    pub mtr: Vec<DatEntry>,
    /// Interfaces along the mobile view.
    pub iface: Vec<IfaceMask>,
    /// Events along the mobile view.
    pub evt: Vec<EventId>,
    /// Channels held after the trace: the last interface of the mobile view.
    pub m_chans: IfaceMask,
    /// Communication events of the held channels.
    pub m_ev: RefMask,
    /// Mobile part of the refusal set.
    pub mref: RefMask,
}

/// Compute the derived views for a trace/refusal pair (callers pick the
/// before- or after-side of a row).
pub fn derive_views(u: &Universe, dtr: DatId, dref: RefMask) -> Views {
    let mtr: Vec<DatEntry> = u
        .dat_entries(dtr)
        .iter()
        .filter(|&&(_, e)| e == NIL || u.event_mobile(e).is_some())
        .copied()
        .collect();
    let m_chans = mtr.last().map(|&(i, _)| i).unwrap_or(0);
    Views {
        iface: pi1(&mtr),
        evt: pi2(&mtr),
        m_chans,
        m_ev: u.cap_of_iface(m_chans) & u.mobile_mask(),
        mref: dref & u.mobile_mask(),
        mtr,
    }
}
