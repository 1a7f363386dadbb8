//! Annotated listings and proof traces.

pub mod check;
pub mod listing;
pub mod trace;

pub use check::{check_trace, CheckReport, Finding, FindingKind};
pub use listing::{emit_annotated_listing, AnnotatedListing, ContractLocation, Flavor, Keyword};
pub use trace::{trace_bytes, write_trace, SCHEMA};
