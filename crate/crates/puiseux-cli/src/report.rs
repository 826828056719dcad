//! JSON report assembly.
//!
//! Reports follow the versioned schema `imult-report/1`: UTF-8 JSON with
//! keys sorted lexicographically, rationals carried as exact `"num/den"`
//! strings (the denominator is always present, so `"3/1"` not `"3"`), and
//! algebraic numbers carried as an object listing the modulus text of each
//! extension level together with the representative polynomial in the level
//! generators. Sorting comes from building every document out of
//! `serde_json::Value`, whose object map is ordered; no timing or other
//! machine-dependent data is ever placed in a report, so byte-identical
//! inputs give byte-identical files.

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use puiseux_core::error::Error;
use puiseux_core::imult::{Method, Multiplicity, MultiplicityResult, Point};
use puiseux_core::tower::{Elem, Rat};

/// Schema identifier stamped on every report.
pub const SCHEMA: &str = "imult-report/1";

/// Exact rational as `num/den` text, denominator always explicit.
pub fn rat_text(r: &Rat) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// A tower element as a JSON value: a rational string when it lives in the
/// base field, otherwise an object with the modulus text of every level and
/// the representative written in the level generators.
pub fn elem_value(e: &Elem) -> Value {
    if let Some(r) = e.try_rat() {
        return Value::String(rat_text(&r));
    }
    let levels = e.tower().levels();
    let tag_of = |ix: usize| {
        levels
            .get(ix)
            .map(|l| l.tag.clone())
            .unwrap_or_else(|| format!("t{ix}"))
    };
    let moduli: Vec<Value> = levels
        .iter()
        .map(|level| Value::String(format!("{} = 0", level.modulus.format_with(&tag_of))))
        .collect();
    json!({ "tower": moduli, "rep": e.to_string() })
}

/// A point as a two-element coordinate array.
pub fn point_value(p: &Point) -> Value {
    Value::Array(vec![elem_value(&p.a), elem_value(&p.b)])
}

pub fn method_name(m: Method) -> &'static str {
    match m {
        Method::HalphenForm1 => "parametrization-form-1",
        Method::HalphenForm2 => "parametrization-form-2",
        Method::HalphenForm3 => "parametrization-form-3",
        Method::JetOracle => "jets",
    }
}

pub fn multiplicity_value(m: &Multiplicity) -> Value {
    match m {
        Multiplicity::Finite(v) => json!(v),
        Multiplicity::Infinite => Value::String("INFINITE".to_string()),
    }
}

/// A full multiplicity result with its valuation trace, when present.
pub fn result_value(r: &MultiplicityResult) -> Value {
    let mut doc = json!({
        "method": method_name(r.method),
        "value": multiplicity_value(&r.value),
    });
    if let Some(trace) = &r.trace {
        let summands: Vec<Value> = trace
            .summands
            .iter()
            .map(|(v, conj)| json!([rat_text(v), conj]))
            .collect();
        doc["trace"] = json!({
            "m": trace.m,
            "n": trace.n,
            "r": trace.r,
            "s": trace.s,
            "summands": summands,
        });
    }
    doc
}

/// Serialize any document with sorted keys and a trailing newline.
pub fn to_sorted_json<T: Serialize>(value: &T) -> Result<String, Error> {
    let v = serde_json::to_value(value)
        .map_err(|e| Error::Domain(format!("report serialization failed: {e}")))?;
    let text = serde_json::to_string_pretty(&v)
        .map_err(|e| Error::Domain(format!("report serialization failed: {e}")))?;
    Ok(text + "\n")
}

/// Write a document to a file as sorted pretty JSON.
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), Error> {
    let text = to_sorted_json(value)?;
    fs::write(path, text)
        .map_err(|e| Error::Domain(format!("cannot write {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use puiseux_core::tower::{rat, Tower};

    #[test]
    fn rationals_always_carry_denominators() {
        assert_eq!(rat_text(&rat(3, 1)), "3/1");
        assert_eq!(rat_text(&rat(-5, 2)), "-5/2");
        assert_eq!(elem_value(&Tower::rationals().rat_elem(rat(7, 3))), json!("7/3"));
    }

    #[test]
    fn algebraic_numbers_describe_their_tower() {
        // Adjoin w with w^2 = 2 and report w itself.
        let q = Tower::rationals();
        let modulus = [q.rat_elem(rat(-2, 1)), q.zero(), q.one()];
        let ext = q.adjoin(&modulus, Some("w".into()));
        let w = ext.gen(0);
        let v = elem_value(&w);
        assert_eq!(v["rep"], json!("w"));
        let tower_text = v["tower"][0].as_str().unwrap();
        assert!(tower_text.contains('w'), "{tower_text}");
        assert!(tower_text.contains("= 0"), "{tower_text}");
    }

    #[test]
    fn sorted_json_is_deterministic_and_ordered() {
        #[derive(Serialize)]
        struct Sample {
            zebra: u32,
            apple: u32,
        }
        let text = to_sorted_json(&Sample { zebra: 1, apple: 2 }).unwrap();
        let apple = text.find("apple").unwrap();
        let zebra = text.find("zebra").unwrap();
        assert!(apple < zebra, "{text}");
        assert!(text.ends_with('\n'));
        assert_eq!(text, to_sorted_json(&Sample { zebra: 1, apple: 2 }).unwrap());
    }
}
