//! A miniature Constraint Handling Rules engine with an indexed constraint
//! store, and the two union-find programs it was built to run: a naive one
//! and one with union-by-rank and path compression.
//!
//! - [`parser`]: the ASCII CHR subset, rule IR, pretty-printer, validation
//! - [`store`]: the constraint store with per-argument hash indexes
//! - [`engine`]: refined-semantics execution with transition counters
//! - [`programs`]: the bundled union-find programs and a typed session API
//! - [`oracle`]: imperative union-find and a brute-force partition
//! - [`bench`]: workloads, scaling reports, and the equivalence checker

pub mod bench;
pub mod engine;
pub mod oracle;
pub mod parser;
pub mod programs;
pub mod store;
pub mod term;

pub use engine::{run, Engine, EngineOptions, Outcome, RunResult};
pub use parser::{parse_program, parse_query, validate_program};
pub use programs::{UfSession, Variant};
pub use store::{Snapshot, StoreConfig, StoreMode};
pub use term::{Constant, Value};
