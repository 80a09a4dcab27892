//! Bounded denotational semantics for CSP processes that can hand channels
//! to each other, plus the health checks and analyses the CLI exposes.
//!
//! A process denotes an [`obs::ObservationSet`]: every before/after
//! observation the process admits within a finite universe of events,
//! traces (up to a length bound), refusals, and variable stores. The
//! interesting structure lives in the decorated traces: each step records
//! the set of mobile channels held alongside the event, so channel
//! hand-over is visible in the trace itself and a family of health
//! conditions can police it.

pub mod analysis;
pub mod ast;
pub mod error;
pub mod healthiness;
pub mod laws;
pub mod obs;
pub mod oracle;
pub mod parser;
pub mod printer;
pub mod semantics;
pub mod trace;
pub mod universe;

pub use error::{ConfigError, EngineError, ParseError};
pub use obs::{ObservationSet, Row};
pub use universe::{Config, Universe};
