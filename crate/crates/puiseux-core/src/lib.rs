//! Exact computation of local intersection multiplicities of plane algebraic
//! curves over the rationals and their algebraic extensions.
//!
//! The crate is layered bottom-up:
//!
//! * [`tower`]: arithmetic in towers of algebraic extensions of Q with lazy
//!   splitting of reducible moduli (dynamic evaluation),
//! * [`poly`]: sparse uni- and bivariate polynomials over a tower, gcds and
//!   resultants,
//! * [`series`]: fractional-exponent Laurent series with certified truncation,
//! * [`newton`]: Newton polygons and branch expansion,
//! * [`imult`]: intersection multiplicities by branch valuations and by a
//!   linear-algebra jet oracle,
//! * [`identities`]: combinatorial identities for derivatives of algebraic
//!   functions and sparse root-counting lemmas.

pub mod error;
pub mod identities;
pub mod imult;
pub mod newton;
pub mod poly;
pub mod series;
pub mod tower;
