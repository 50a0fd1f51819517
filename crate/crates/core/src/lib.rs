//! Online detection of transactional atomicity violations and non-serializable
//! traces over multithreaded execution traces.
//!
//! The crate is `no_std` (it needs `alloc`). It contains:
//!
//! * [`trace`]: events, traces, the line-oriented text format and structural
//!   validation, plus a seeded random trace generator ([`gen`]).
//! * [`clock`]: growable vector clocks.
//! * [`checker`]: the region-tracking engine, with its three analysis modes.
//! * [`oracle`]: brute-force ground truth built from explicit happens-before
//!   closures and an exhaustive swap search.
//! * [`compare`]: reference engines (one-edge graph checker, end-of-transaction
//!   vector clock checker, cycle-completing blame checker).
//! * [`refine`]: iterative refinement of the atomicity specification.

#![no_std]

#[cfg(test)]
extern crate std;

extern crate alloc;

pub mod checker;
pub mod clock;
pub mod compare;
pub mod gen;
pub mod oracle;
pub mod refine;
pub mod report;
pub mod samples;
pub mod trace;

mod threadset;

pub use checker::{analyze, Analyzer, Mode};
pub use clock::VectorClock;
pub use report::{EngineKind, Report, Stats, Violation};
pub use trace::{Event, Op, OpKind, ParseError, Trace, TraceBuilder};
