//! enrichkit: a desk-scale engine for finite presheaves, familial monads,
//! generalized multicategories, and enriched algebras.
//!
//! Everything here is finite and bounded: operation sets are enumerated up
//! to an explicit size bound, laws are checked by exhaustion, and searches
//! carry a node budget. The built-in monad instances are `id`, `list`, `fc`
//! (free category), `fmc` (free monoidal category), and `fdc` (free double
//! category).
//!
//! Start from the crate examples (`cargo run --example monad_laws`) or the
//! `enrichkit` binary (`enrichkit check monad-laws --monad fmc --bound 6`).

pub mod algebra;
pub mod enrich;
pub mod error;
pub mod fincat;
pub mod fixtures;
pub mod instances;
pub mod monad;
pub mod multicat;
pub mod plus;
pub mod report;
pub mod shapes;

pub use error::EngineError;
pub use report::Report;
