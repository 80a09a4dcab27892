//! Queries over finished denotations: equivalence and refinement of two
//! sets, snapshot decomposition of decorated traces, deadlock and divergence
//! detection, and DOT renderings of how a network's topology evolves.

use crate::error::EngineError;
use crate::healthiness::{Topology, WITNESS_CAP};
use crate::obs::{abort_key, key_dat, key_store, ObservationSet, Row};
use crate::trace::derive_views;
use crate::universe::{DatEntry, DatId, IfaceMask, StoreId, Universe};

/// Outcome of a set comparison. Witness lists are capped at
/// [`WITNESS_CAP`]; the counts are always complete.
#[derive(Clone, Debug)]
pub struct Diff {
    pub equal: bool,
    pub left_rows: usize,
    pub right_rows: usize,
    pub only_left_count: usize,
    pub only_right_count: usize,
    pub only_left: Vec<Row>,
    pub only_right: Vec<Row>,
}

fn capped(mut rows: Vec<Row>) -> (usize, Vec<Row>) {
    rows.sort_unstable();
    let n = rows.len();
    rows.truncate(WITNESS_CAP);
    (n, rows)
}

/// Exact equality of two denotations, with declared-undefined states spelled
/// out into their full fans first so representation differences cannot hide
/// or invent a distinction.
pub fn equivalent(a: &ObservationSet, b: &ObservationSet) -> Result<Diff, EngineError> {
    if !a.same_universe(b) {
        return Err(EngineError::UniverseMismatch);
    }
    let (ca, cb) = (a.concretize(), b.concretize());
    let (only_left_count, only_left) =
        capped(ca.rows.difference(&cb.rows).copied().collect());
    let (only_right_count, only_right) =
        capped(cb.rows.difference(&ca.rows).copied().collect());
    Ok(Diff {
        equal: only_left_count == 0 && only_right_count == 0,
        left_rows: ca.rows.len(),
        right_rows: cb.rows.len(),
        only_left_count,
        only_right_count,
        only_left,
        only_right,
    })
}

/// Does `imp` refine `spec` — is every observation of `imp` one `spec`
/// admits? Checked as set containment after spelling out undefined states.
#[derive(Clone, Debug)]
pub struct Refinement {
    pub holds: bool,
    pub violation_count: usize,
    /// Up to [`WITNESS_CAP`] observations of `imp` that `spec` forbids.
    pub violations: Vec<Row>,
}

pub fn refines(spec: &ObservationSet, imp: &ObservationSet) -> Result<Refinement, EngineError> {
    if !spec.same_universe(imp) {
        return Err(EngineError::UniverseMismatch);
    }
    let (cs, ci) = (spec.concretize(), imp.concretize());
    let (violation_count, violations) =
        capped(ci.rows.difference(&cs.rows).copied().collect());
    Ok(Refinement { holds: violation_count == 0, violation_count, violations })
}

/// Split a decorated trace into its maximal constant-interface segments.
/// The segments concatenate back to the input and adjacent segments carry
/// different interfaces; the empty trace has no segments.
pub fn snapshots(t: &[DatEntry]) -> Vec<Vec<DatEntry>> {
    let mut out: Vec<Vec<DatEntry>> = Vec::new();
    for &entry in t {
        match out.last_mut() {
            Some(seg) if seg[0].0 == entry.0 => seg.push(entry),
            _ => out.push(vec![entry]),
        }
    }
    out
}

/// Observable failures of a denotation. Witness lists are capped at
/// [`WITNESS_CAP`]; the counts are complete.
#[derive(Clone, Debug)]
pub struct Detection {
    pub deadlock_count: usize,
    pub divergence_count: usize,
    pub undefined_count: usize,
    /// Started rows that settle into waiting while refusing every event the
    /// current inventory offers.
    pub deadlocks: Vec<Row>,
    /// Started rows that lose `ok` — runs that can never be relied on again.
    pub divergences: Vec<Row>,
    /// Before-states whose outcome is declared undefined, as (trace id,
    /// store) pairs. Anything may happen from these — divergence included —
    /// so they are reported as their own category rather than inflating the
    /// other two. States at the trace bound typically land here.
    pub undefined: Vec<(DatId, StoreId)>,
}

/// Scan a denotation for deadlock, divergence, and undefined states. Rows
/// are first spelled out into canonical form; states the set keys as
/// undefined are then set aside, so the row scans report only what happens
/// from states with a defined story.
pub fn detect(s: &ObservationSet) -> Detection {
    let u = &s.universe;
    let c = s.concretize();
    let mut deadlocks = Vec::new();
    let mut divergences = Vec::new();
    for &r in &c.rows {
        if !r.started() || s.aborted.contains(&abort_key(r.dat(), r.store())) {
            continue;
        }
        if r.okp() && r.waitp() && r.refp() == u.cap(r.datp()) {
            deadlocks.push(r);
        }
        if !r.okp() {
            divergences.push(r);
        }
    }
    let (deadlock_count, deadlocks) = capped(deadlocks);
    let (divergence_count, divergences) = capped(divergences);
    let mut undefined: Vec<(DatId, StoreId)> =
        s.aborted.iter().map(|&k| (key_dat(k), key_store(k))).collect();
    let undefined_count = undefined.len();
    undefined.truncate(WITNESS_CAP);
    Detection {
        deadlock_count,
        divergence_count,
        undefined_count,
        deadlocks,
        divergences,
        undefined,
    }
}

/// The interface story of a denotation's most eventful run: start at the
/// initial trace and store, follow the after-trace whose mobile view changes
/// interface most often (ties to the longest view, then the smallest trace
/// id), and collapse equal neighbours. A denotation with no such run tells
/// the one-entry story of its starting inventory.
pub fn timeline(s: &ObservationSet) -> Vec<IfaceMask> {
    let u = &s.universe;
    let collapse = |ifaces: &[IfaceMask]| -> Vec<IfaceMask> {
        let mut out: Vec<IfaceMask> = Vec::new();
        for &i in ifaces {
            if out.last() != Some(&i) {
                out.push(i);
            }
        }
        out
    };
    let mut best: Option<(usize, usize, DatId, Vec<IfaceMask>)> = None;
    for &r in &s.rows {
        if !(r.started() && r.dat() == u.seed() && r.store() == u.init_store && r.okp()) {
            continue;
        }
        let ifaces = derive_views(u, r.datp(), 0).iface;
        let line = collapse(&ifaces);
        let key = (line.len(), ifaces.len(), r.datp());
        let better = match &best {
            None => true,
            Some((segs, len, dat, _)) => {
                key.0 > *segs || (key.0 == *segs && (key.1 > *len || (key.1 == *len && key.2 < *dat)))
            }
        };
        if better {
            best = Some((key.0, key.1, key.2, line));
        }
    }
    match best {
        Some((_, _, _, line)) => line,
        None => vec![u.m_chans(u.seed())],
    }
}

/// Combine per-component classifications into the network's: one component
/// rewiring makes the network dynamic; otherwise any settled component makes
/// it static; with nothing to go on, undetermined.
pub fn aggregate_topology(parts: &[Topology]) -> Topology {
    if parts.contains(&Topology::Dynamic) {
        Topology::Dynamic
    } else if parts.contains(&Topology::Static) {
        Topology::Static
    } else {
        Topology::Undetermined
    }
}

/// Render one DOT graph per joint snapshot of the component timelines.
/// Component i's interface at snapshot k is `timelines[i][k]`, or its last
/// entry once its own story has ended (a finished component keeps its
/// wiring). Nodes are the component names; an edge appears for every mobile
/// channel held by both endpoints at that snapshot. Output is deterministic:
/// components in the given order, channels in declaration order. A system
/// with no components still gets its one (node-less) picture.
pub fn topology_dot(u: &Universe, comps: &[(String, Vec<IfaceMask>)]) -> Vec<String> {
    let steps = comps.iter().map(|(_, t)| t.len()).max().unwrap_or(0).max(1);
    let at = |t: &Vec<IfaceMask>, k: usize| -> IfaceMask {
        if t.is_empty() {
            0
        } else {
            t[k.min(t.len() - 1)]
        }
    };
    let mut out = Vec::with_capacity(steps);
    for k in 0..steps {
        let mut g = String::new();
        g.push_str(&format!("graph snapshot{k} {{\n"));
        g.push_str(&format!("  label=\"snapshot {k} of {steps}\";\n"));
        for (name, _) in comps {
            g.push_str(&format!("  \"{name}\";\n"));
        }
        for ch in 0..u.mobile_count() as u8 {
            let holders: Vec<&str> = comps
                .iter()
                .filter(|(_, t)| at(t, k) & (1 << ch) != 0)
                .map(|(n, _)| n.as_str())
                .collect();
            for i in 0..holders.len() {
                for j in i + 1..holders.len() {
                    g.push_str(&format!(
                        "  \"{}\" -- \"{}\" [label=\"{}\"];\n",
                        holders[i],
                        holders[j],
                        u.mobile_name(ch)
                    ));
                }
            }
        }
        g.push_str("}\n");
        out.push(g);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::healthiness::classify_topology;
    use crate::parser::parse_program;
    use crate::semantics::denote;
    use crate::universe::{parse_config, Universe, NIL};
    use std::sync::Arc;

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

    fn run(u: &Arc<Universe>, src: &str) -> ObservationSet {
        denote(u, &parse_program(u, src).unwrap()).unwrap()
    }

    #[test]
    fn equivalence_is_reflexive_and_spots_differences() {
        let u = uni_basic();
        let (p, q) = (run(&u, "a -> SKIP"), run(&u, "b -> SKIP"));
        let same = equivalent(&p, &p).unwrap();
        assert!(same.equal);
        assert_eq!(same.only_left_count + same.only_right_count, 0);
        let diff = equivalent(&p, &q).unwrap();
        assert!(!diff.equal);
        assert!(diff.only_left_count > 0 && diff.only_right_count > 0);
        assert!(diff.only_left.len() <= WITNESS_CAP);
    }

    #[test]
    fn equivalence_rejects_foreign_universes() {
        let (u1, u2) = (uni_basic(), uni_basic());
        let (p, q) = (run(&u1, "STOP"), run(&u2, "STOP"));
        assert!(matches!(equivalent(&p, &q), Err(EngineError::UniverseMismatch)));
    }

    #[test]
    fn equivalence_sees_through_undefined_states() {
        // One side says CHAOS, the other spells the same thing out by hand.
        let u = uni_mobile();
        let (p, q) = (run(&u, "CHAOS"), run(&u, "k :=s c ; c.0 -> SKIP"));
        assert!(equivalent(&p, &q).unwrap().equal);
    }

    #[test]
    fn refinement_is_branch_containment() {
        let u = uni_basic();
        let spec = run(&u, "a -> SKIP |~| b -> SKIP");
        let imp = run(&u, "a -> SKIP");
        assert!(refines(&spec, &imp).unwrap().holds);
        let back = refines(&imp, &spec).unwrap();
        assert!(!back.holds);
        assert!(back.violation_count > 0);
    }

    #[test]
    fn snapshot_segments_tile_the_trace() {
        let t: Vec<DatEntry> = vec![(1, NIL), (1, 2), (3, NIL), (3, NIL), (1, 4)];
        let segs = snapshots(&t);
        assert_eq!(segs.len(), 3);
        assert_eq!(segs.concat(), t);
        for w in segs.windows(2) {
            assert_ne!(w[0][0].0, w[1][0].0);
        }
        assert!(snapshots(&[]).is_empty());
    }

    #[test]
    fn stop_deadlocks_and_skip_does_not() {
        let u = uni_basic();
        let d = detect(&run(&u, "STOP"));
        assert!(d.deadlock_count > 0);
        assert_eq!(d.divergence_count, 0);
        assert_eq!(d.undefined_count, 0);
        let d = detect(&run(&u, "SKIP"));
        assert_eq!(d.deadlock_count, 0);
        assert_eq!(d.divergence_count, 0);
    }

    #[test]
    fn crossed_synchronization_deadlocks() {
        let u = uni_basic();
        let d = detect(&run(&u, "a -> SKIP [| a, b |] b -> SKIP"));
        assert!(d.deadlock_count > 0);
    }

    #[test]
    fn undefined_states_are_their_own_category() {
        let u = uni_basic();
        // Everything collapses to undefined after termination into CHAOS;
        // nothing is misreported as a plain deadlock or divergence.
        let d = detect(&run(&u, "SKIP ; CHAOS"));
        assert!(d.undefined_count > 0);
        assert_eq!(d.divergence_count, 0);
        assert_eq!(d.deadlock_count, 0);
        // A communication only hits the bound — undefined at the horizon,
        // no divergence invented along the way.
        let d = detect(&run(&u, "a -> SKIP"));
        assert_eq!(d.divergence_count, 0);
        assert!(d.undefined_count > 0);
        assert!(d.undefined.len() <= WITNESS_CAP);
    }

    #[test]
    fn explicit_divergence_rows_are_found() {
        use crate::obs::{Half, Row};
        let u = uni_basic();
        let mut s = run(&u, "a -> SKIP");
        let pre = Half { ok: true, wait: false, dat: u.seed(), refm: 0, store: 0 };
        let post = Half { ok: false, wait: false, dat: u.seed(), refm: 0, store: 0 };
        s.rows.insert(Row::new(pre, post));
        let d = detect(&s);
        assert_eq!(d.divergence_count, 1);
    }

    #[test]
    fn timelines_track_the_inventory() {
        let u = uni_mobile();
        assert_eq!(timeline(&run(&u, "c.0 -> SKIP")), vec![1]);
        assert_eq!(timeline(&run(&u, "k :=s c")), vec![1, 0]);
        assert_eq!(timeline(&run(&u, "k :=s c ; k :=r c")), vec![1, 0, 1]);
    }

    #[test]
    fn topology_aggregation_prefers_motion() {
        use Topology::*;
        assert_eq!(aggregate_topology(&[Static, Dynamic, Undetermined]), Dynamic);
        assert_eq!(aggregate_topology(&[Static, Undetermined]), Static);
        assert_eq!(aggregate_topology(&[Undetermined]), Undetermined);
        assert_eq!(aggregate_topology(&[]), Undetermined);
    }

    #[test]
    fn dot_graphs_follow_the_timelines() {
        let u = build(
            r#"{
                "mobile": {"ch1": [0], "ch2": ["ch1"]},
                "owned": ["ch1", "ch2"],
                "bound": 3
            }"#,
        );
        let comps = vec![
            ("P".to_string(), vec![0b01]),
            ("Q".to_string(), vec![0b11, 0b10]),
            ("R".to_string(), vec![0b10, 0b11]),
        ];
        let graphs = topology_dot(&u, &comps);
        assert_eq!(graphs.len(), 2);
        assert!(graphs[0].contains("\"P\" -- \"Q\" [label=\"ch1\"]"));
        assert!(graphs[0].contains("\"Q\" -- \"R\" [label=\"ch2\"]"));
        assert!(graphs[1].contains("\"P\" -- \"R\" [label=\"ch1\"]"));
        assert!(!graphs[1].contains("\"P\" -- \"Q\""));
        assert!(graphs[1].contains("\"Q\" -- \"R\" [label=\"ch2\"]"));
        let empty = topology_dot(&u, &[]);
        assert_eq!(empty.len(), 1);
        assert!(!empty[0].contains("--"));
    }

    #[test]
    fn classification_matches_the_timeline_story() {
        let u = uni_mobile();
        assert_eq!(classify_topology(&run(&u, "k :=s c")), Topology::Dynamic);
        assert_eq!(classify_topology(&run(&u, "c.0 -> c.0 -> SKIP")), Topology::Static);
    }
}
