//! Library half of the `puiseux` binary.
//!
//! The heavy lifting (tower arithmetic, Puiseux expansion, multiplicity
//! oracles) lives in `puiseux-core`. This crate adds the parts that only
//! matter at the boundary: a text grammar for polynomials, closed-form
//! bound formulas, seeded random verification campaigns, and JSON report
//! assembly. Everything here is deterministic given its inputs; in
//! particular a campaign is a pure function of its seed and configuration,
//! so reports can be diffed byte for byte.

pub mod bounds;
pub mod campaign;
pub mod parse;
pub mod report;
