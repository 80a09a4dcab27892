//! Hot-path benchmarks: denotation of corpus programs, trace merging, and
//! one closure pass over the weakest process. Run with `cargo bench`.

use std::hint::black_box;
use std::path::PathBuf;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use mcsp_core::ast::Program;
use mcsp_core::healthiness::{closure, ConditionId};
use mcsp_core::laws::{law_universe, merge_universe};
use mcsp_core::obs::chaos;
use mcsp_core::parser::parse_program;
use mcsp_core::semantics::{denote, trace_merge};
use mcsp_core::universe::{parse_config, DatEntry, Universe};

fn corpus(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name);
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn build(name: &str) -> (Arc<Universe>, Program) {
    let cfg = parse_config(&corpus(&format!("{name}.json"))).unwrap();
    let u = Arc::new(Universe::build(&cfg).unwrap());
    let prog = parse_program(&u, &corpus(&format!("{name}.mcsp"))).unwrap();
    (u, prog)
}

fn bench_denote(c: &mut Criterion) {
    let (u, prog) = build("theorem");
    c.bench_function("denote send-then-use", |b| {
        b.iter(|| black_box(denote(&u, &prog).unwrap().rows.len()))
    });

    let (u, prog) = build("fig1");
    let mut g = c.benchmark_group("denote");
    g.sample_size(20);
    g.bench_function("three-party relay", |b| {
        b.iter(|| black_box(denote(&u, &prog).unwrap().rows.len()))
    });
    g.finish();
}

fn bench_merge(c: &mut Criterion) {
    let u = merge_universe();
    let a = u.event_id("a").unwrap();
    let b_ev = u.event_id("b").unwrap();
    let s: Vec<DatEntry> = vec![(1, a), (1, b_ev), (1, a), (1, b_ev), (1, a)];
    let t: Vec<DatEntry> = vec![(1, b_ev), (1, a), (1, b_ev), (1, a), (1, b_ev)];
    let shared = u.event_bit(a);
    c.bench_function("merge two length-5 traces", |b| {
        b.iter(|| black_box(trace_merge(&u, &s, &t, shared).len()))
    });
}

fn bench_closure(c: &mut Criterion) {
    let u = law_universe();
    let full = chaos(&u);
    c.bench_function("close the weakest process under inventory families", |b| {
        b.iter(|| black_box(closure(ConditionId::MC3, &full).unwrap().rows.len()))
    });
}

criterion_group!(benches, bench_denote, bench_merge, bench_closure);
criterion_main!(benches);
