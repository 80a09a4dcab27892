//! Command-line front end. Ties configuration parsing, process denotation,
//! health checking, set comparison, the algebraic law sweep, and topology
//! export into reproducible runs with a stable exit-code contract:
//!
//!   0  healthy / equal / refining / all laws pass
//!   1  unhealthy, unequal, or a law failed
//!   2  process-language parse error (position reported)
//!   3  configuration, universe, engine, or I/O error

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use mcsp_core::analysis;
use mcsp_core::ast::{Proc, Program};
use mcsp_core::healthiness::{check, classify_topology, ConditionId, Topology, Verdict};
use mcsp_core::laws;
use mcsp_core::obs::{row_json, set_from_json, ObservationSet};
use mcsp_core::parser::parse_program;
use mcsp_core::semantics::denote;
use mcsp_core::universe::{parse_config, Config, Universe};

#[derive(Parser)]
#[command(name = "mcsp", version, about = "Bounded semantics engine for mobile-channel CSP")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Denote a process and run every health condition on the result.
    Check(CheckArgs),
    /// Denote two processes in one universe and compare their sets.
    Compare(CompareArgs),
    /// Sweep the algebraic laws of the health conditions on tiny universes.
    Laws(LawsArgs),
    /// Export the network topology of a component system, one DOT file per
    /// snapshot.
    Dot(DotArgs),
}

#[derive(Args)]
struct Shared {
    /// Configuration file (defaults to the process file with `.json`).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the configuration's trace-length bound.
    #[arg(long)]
    bound: Option<usize>,
    /// Override the configuration's recursion unfold depth.
    #[arg(long)]
    unfold: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args)]
struct CheckArgs {
    /// Process file to denote and check.
    process: Option<PathBuf>,
    /// Check a raw observation-set JSON file instead of a process
    /// (requires --config).
    #[arg(long)]
    raw_set: Option<PathBuf>,
    #[command(flatten)]
    shared: Shared,
}

#[derive(Args)]
struct CompareArgs {
    /// Left process (the one the right must stay within under `refines`).
    left: PathBuf,
    /// Right process (the candidate under `refines`).
    right: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Equiv)]
    mode: Mode,
    #[command(flatten)]
    shared: Shared,
}

#[derive(Args)]
struct LawsArgs {
    /// Seed for the random portions of the sweep.
    #[arg(long, default_value_t = 0xC0FFEE)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args)]
struct DotArgs {
    /// Process file defining every component named in the configuration.
    process: PathBuf,
    /// Directory for the emitted `<stem>-snap<k>.dot` files.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[command(flatten)]
    shared: Shared,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Equiv,
    Refines,
}

/// A failed run, already split by exit code.
enum Failure {
    Parse(String),
    Env(String),
}

type R<T> = Result<T, Failure>;

fn env<T: std::fmt::Display>(e: T) -> Failure {
    Failure::Env(e.to_string())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(Failure::Parse(msg)) => {
            eprintln!("parse error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Env(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> R<ExitCode> {
    match cli.cmd {
        Cmd::Check(a) => cmd_check(a),
        Cmd::Compare(a) => cmd_compare(a),
        Cmd::Laws(a) => cmd_laws(a),
        Cmd::Dot(a) => cmd_dot(a),
    }
}

// ---- plumbing ----

fn read(path: &Path) -> R<String> {
    fs::read_to_string(path).map_err(|e| Failure::Env(format!("{}: {e}", path.display())))
}

fn load_config(shared: &Shared, anchor: &Path) -> R<Config> {
    let path = shared.config.clone().unwrap_or_else(|| anchor.with_extension("json"));
    let mut cfg = parse_config(&read(&path)?)
        .map_err(|e| Failure::Env(format!("{}: {e}", path.display())))?;
    if let Some(b) = shared.bound {
        cfg.bound = b;
    }
    if let Some(x) = shared.unfold {
        cfg.unfold = x;
    }
    Ok(cfg)
}

fn parse_source(u: &Universe, path: &Path) -> R<Program> {
    parse_program(u, &read(path)?)
        .map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))
}

fn write_atomic(path: &Path, text: &str) -> R<()> {
    let tmp = path.with_extension("dot.tmp");
    fs::write(&tmp, text).map_err(|e| Failure::Env(format!("{}: {e}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(|e| Failure::Env(format!("{}: {e}", path.display())))
}

fn exit_flag(good: bool) -> ExitCode {
    ExitCode::from(if good { 0 } else { 1 })
}

// ---- check ----

fn verdict_json(u: &Universe, cond: ConditionId, v: &Verdict) -> serde_json::Value {
    json!({
        "name": cond.name(),
        "healthy": v.healthy,
        "violations": v.violation_count,
        "witnesses": v.witnesses.iter().map(|&r| row_json(u, r)).collect::<Vec<_>>(),
    })
}

fn cmd_check(a: CheckArgs) -> R<ExitCode> {
    let anchor = a.process.as_deref().or(a.raw_set.as_deref()).ok_or_else(|| {
        Failure::Env("give a process file or --raw-set".to_string())
    })?;
    if a.process.is_some() && a.raw_set.is_some() {
        return Err(Failure::Env("give a process file or --raw-set, not both".to_string()));
    }
    if a.raw_set.is_some() && a.shared.config.is_none() {
        return Err(Failure::Env("--raw-set needs an explicit --config".to_string()));
    }
    let cfg = load_config(&a.shared, anchor)?;

    let s: ObservationSet = if let Some(raw) = &a.raw_set {
        let mut uni = Universe::build(&cfg).map_err(env)?;
        let (rows, aborted) = set_from_json(&mut uni, &read(raw)?).map_err(env)?;
        let u = Arc::new(uni);
        ObservationSet { universe: u, rows, aborted }
    } else {
        let u = Arc::new(Universe::build(&cfg).map_err(env)?);
        let prog = parse_source(&u, a.process.as_deref().expect("checked above"))?;
        denote(&u, &prog).map_err(env)?
    };

    let u = &s.universe;
    let verdicts: Vec<(ConditionId, Verdict)> =
        ConditionId::MOBILE.iter().map(|&c| (c, check(c, &s))).collect();
    let healthy = verdicts.iter().all(|(_, v)| v.healthy);
    let topology = classify_topology(&s);
    let d = analysis::detect(&s);

    match a.shared.format {
        Format::Json => {
            let report = json!({
                "schema": 1,
                "command": "check",
                "bound": u.bound,
                "unfold": u.unfold,
                "conditions": verdicts
                    .iter()
                    .map(|(c, v)| verdict_json(u, *c, v))
                    .collect::<Vec<_>>(),
                "topology": topology.to_string(),
                "deadlocks": d.deadlock_count,
                "divergences": d.divergence_count,
                "undefined": d.undefined_count,
                "healthy": healthy,
            });
            println!("{report}");
        }
        Format::Text => {
            println!("bound: {}", u.bound);
            println!("unfold: {}", u.unfold);
            for (c, v) in &verdicts {
                if v.healthy {
                    println!("{c}: healthy");
                } else {
                    println!("{c}: {} violations", v.violation_count);
                    for &w in &v.witnesses {
                        println!("  witness: {}", row_json(u, w));
                    }
                }
            }
            println!("topology: {topology}");
            println!("deadlocks: {}", d.deadlock_count);
            println!("divergences: {}", d.divergence_count);
            println!("undefined states: {}", d.undefined_count);
            println!("overall: {}", if healthy { "healthy" } else { "unhealthy" });
        }
    }
    Ok(exit_flag(healthy))
}

// ---- compare ----

fn cmd_compare(a: CompareArgs) -> R<ExitCode> {
    let cfg = load_config(&a.shared, &a.left)?;
    let u = Arc::new(Universe::build(&cfg).map_err(env)?);
    let left = denote(&u, &parse_source(&u, &a.left)?).map_err(env)?;
    let right = denote(&u, &parse_source(&u, &a.right)?).map_err(env)?;

    // Both denotations share one universe, so the comparisons cannot fail.
    let (good, summary, witnesses) = match a.mode {
        Mode::Equiv => {
            let d = analysis::equivalent(&left, &right).map_err(env)?;
            let wits = json!({
                "only_left": d.only_left.iter().map(|&r| row_json(&u, r)).collect::<Vec<_>>(),
                "only_right": d.only_right.iter().map(|&r| row_json(&u, r)).collect::<Vec<_>>(),
            });
            (
                d.equal,
                json!({
                    "equal": d.equal,
                    "left_rows": d.left_rows,
                    "right_rows": d.right_rows,
                    "only_left": d.only_left_count,
                    "only_right": d.only_right_count,
                }),
                wits,
            )
        }
        Mode::Refines => {
            let r = analysis::refines(&left, &right).map_err(env)?;
            let wits = json!({
                "violations": r.violations.iter().map(|&x| row_json(&u, x)).collect::<Vec<_>>(),
            });
            (
                r.holds,
                json!({ "refines": r.holds, "violations": r.violation_count }),
                wits,
            )
        }
    };

    match a.shared.format {
        Format::Json => {
            let report = json!({
                "schema": 1,
                "command": "compare",
                "mode": match a.mode { Mode::Equiv => "equiv", Mode::Refines => "refines" },
                "bound": u.bound,
                "unfold": u.unfold,
                "result": summary,
                "witnesses": witnesses,
            });
            println!("{report}");
        }
        Format::Text => {
            println!("bound: {}", u.bound);
            match a.mode {
                Mode::Equiv => {
                    println!("mode: equiv");
                    println!("equal: {}", if good { "yes" } else { "no" });
                }
                Mode::Refines => {
                    println!("mode: refines");
                    println!("refines: {}", if good { "yes" } else { "no" });
                }
            }
            println!("detail: {summary}");
            if !good {
                println!("witnesses: {witnesses}");
            }
        }
    }
    Ok(exit_flag(good))
}

// ---- laws ----

fn cmd_laws(a: LawsArgs) -> R<ExitCode> {
    let reports = laws::run_all(a.seed);
    let passed = reports.iter().all(|r| r.passed);
    match a.format {
        Format::Json => {
            let report = json!({
                "schema": 1,
                "command": "laws",
                "seed": a.seed,
                "laws": reports
                    .iter()
                    .map(|r| json!({ "name": r.name, "passed": r.passed, "detail": r.detail }))
                    .collect::<Vec<_>>(),
                "passed": passed,
            });
            println!("{report}");
        }
        Format::Text => {
            for r in &reports {
                println!("{} {} ({})", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
            }
            println!("overall: {}", if passed { "all laws hold" } else { "law failure" });
        }
    }
    Ok(exit_flag(passed))
}

// ---- dot ----

fn cmd_dot(a: DotArgs) -> R<ExitCode> {
    let cfg = load_config(&a.shared, &a.process)?;
    let base = Arc::new(Universe::build(&cfg).map_err(env)?);

    // Denote each component in its own universe: same alphabet and tables,
    // only the starting inventory differs.
    let mut comps: Vec<(String, Vec<u8>)> = Vec::new();
    let mut classes: Vec<(String, Topology)> = Vec::new();
    for (name, owned) in &cfg.components {
        let mut sub = cfg.clone();
        sub.owned = owned.clone();
        let u = Arc::new(Universe::build(&sub).map_err(env)?);
        let prog = parse_source(&u, &a.process)?;
        if !prog.defs.contains_key(name) {
            return Err(Failure::Env(format!(
                "component `{name}` has no definition in {}",
                a.process.display()
            )));
        }
        let run = Program { defs: prog.defs.clone(), main: Proc::Ref(name.clone()) };
        let s = denote(&u, &run).map_err(env)?;
        comps.push((name.clone(), analysis::timeline(&s)));
        classes.push((name.clone(), classify_topology(&s)));
    }
    let topology = analysis::aggregate_topology(
        &classes.iter().map(|(_, t)| *t).collect::<Vec<_>>(),
    );

    let graphs = analysis::topology_dot(&base, &comps);
    fs::create_dir_all(&a.out_dir)
        .map_err(|e| Failure::Env(format!("{}: {e}", a.out_dir.display())))?;
    let stem = a
        .process
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".to_string());
    let mut files = Vec::new();
    for (k, g) in graphs.iter().enumerate() {
        let path = a.out_dir.join(format!("{stem}-snap{k}.dot"));
        write_atomic(&path, g)?;
        files.push(path.display().to_string());
    }

    match a.shared.format {
        Format::Json => {
            let report = json!({
                "schema": 1,
                "command": "dot",
                "bound": base.bound,
                "unfold": base.unfold,
                "snapshots": graphs.len(),
                "files": files,
                "components": classes
                    .iter()
                    .map(|(n, t)| (n.clone(), json!(t.to_string())))
                    .collect::<serde_json::Map<_, _>>(),
                "topology": topology.to_string(),
            });
            println!("{report}");
        }
        Format::Text => {
            println!("bound: {}", base.bound);
            for f in &files {
                println!("wrote: {f}");
            }
            for (n, t) in &classes {
                println!("component {n}: {t}");
            }
            println!("topology: {topology}");
        }
    }
    Ok(ExitCode::from(0))
}
