//! Seeded random verification campaigns.
//!
//! A campaign is a pure function of `(seed, config)`: instance generation
//! draws from a single counter-based stream in one sequential pass, so the
//! instance list is reproducible; the per-instance verification then runs
//! on a parallel worker pool and is collected back in generation order.
//! Reports carry deterministic work counters (attempts, rejections) rather
//! than timings, so identical runs serialize to identical bytes.
//!
//! The headline campaign plants a common zero of two random curves at a
//! random nonzero rational point by construction: draw F₀ and G₀, then use
//! F = F₀ − F₀(p) and G = G₀ − G₀(p). Subtracting a constant keeps G
//! within its monomial budget (the budget reserves one slot for the
//! constant), while uniform random pairs would almost never meet at a
//! rational point at all. Degenerate draws (shared component through the
//! point, zero polynomials) are rejected and counted.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use puiseux_core::error::Error;
use puiseux_core::imult::{
    halphen_multiplicity, is_infinite, jet_oracle_multiplicity, HalphenForm, Multiplicity, Point,
};
use puiseux_core::poly::{BiPoly, UniPoly};
use puiseux_core::tower::{Elem, Rat, Tower};

use crate::bounds::{assembly_bound, fgplus1_cap, fgplus1_instance, theorem_bound};
use crate::parse::{render, render_unipoly};
use crate::report::{rat_text, SCHEMA};

/// Knobs for a random campaign. Runs are reproducible from (seed, config).
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub instances: u32,
    /// Cap on the total degree of the dense curve F.
    pub max_degree: u64,
    /// Cap on the monomial count of the sparse curve G (or of f and g in
    /// the univariate search).
    pub max_monomials: u64,
    /// Cap on each exponent of a sparse monomial.
    pub exponent_cap: u64,
    /// Coefficients are drawn from [-coeff_range, coeff_range] without 0.
    pub coeff_range: i64,
    /// Instances whose worst-case expansion order deg F * deg G + 1 would
    /// exceed this cap are rejected at generation time.
    pub order_cap: i64,
}

impl ExperimentConfig {
    /// Defaults for the planted-intersection campaign: small dense degree,
    /// few but possibly high monomials.
    pub fn planted(seed: u64, instances: u32) -> ExperimentConfig {
        ExperimentConfig {
            seed,
            instances,
            max_degree: 3,
            max_monomials: 4,
            exponent_cap: 6,
            coeff_range: 4,
            order_cap: 200,
        }
    }

    /// Defaults for the univariate f·g + 1 search.
    pub fn fg_search(seed: u64, instances: u32) -> ExperimentConfig {
        ExperimentConfig {
            seed,
            instances,
            max_degree: 1,
            max_monomials: 3,
            exponent_cap: 8,
            coeff_range: 4,
            order_cap: 200,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        let caps = [
            ("instances", self.instances as u64),
            ("max_degree", self.max_degree),
            ("max_monomials", self.max_monomials),
            ("exponent_cap", self.exponent_cap),
            ("coeff_range", self.coeff_range.max(0) as u64),
            ("order_cap", self.order_cap.max(0) as u64),
        ];
        for (name, v) in caps {
            if v == 0 {
                return Err(Error::Domain(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// One checked inequality or equality, with both sides spelled out.
#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub formula: String,
    pub lhs: String,
    pub rhs: String,
    pub ok: bool,
}

impl Verdict {
    fn le(formula: &str, lhs: &Rat, rhs: &Rat) -> Verdict {
        Verdict {
            formula: formula.to_string(),
            lhs: rat_text(lhs),
            rhs: rat_text(rhs),
            ok: lhs <= rhs,
        }
    }

    fn eq_values(formula: &str, lhs: u64, rhs: u64) -> Verdict {
        Verdict {
            formula: formula.to_string(),
            lhs: lhs.to_string(),
            rhs: rhs.to_string(),
            ok: lhs == rhs,
        }
    }
}

/// Verification record for a single planted instance.
#[derive(Clone, Debug, Serialize)]
pub struct InstanceReport {
    pub f: String,
    pub g: String,
    pub point: [String; 2],
    /// Total degree of F.
    pub degree: u64,
    /// Monomial count of G.
    pub monomials: u64,
    pub multiplicity: u64,
    pub jet_multiplicity: u64,
    pub verdicts: Vec<Verdict>,
    pub ok: bool,
}

fn coord_text(e: &Elem) -> String {
    match e.try_rat() {
        Some(r) => rat_text(&r),
        None => e.to_string(),
    }
}

fn finite(m: &Multiplicity) -> Result<u64, Error> {
    match m {
        Multiplicity::Finite(v) => Ok(*v),
        Multiplicity::Infinite => Err(Error::Domain(
            "the intersection multiplicity at this point is infinite".into(),
        )),
    }
}

/// Check one instance against the sparse multiplicity bounds.
///
/// Computes the multiplicity twice, by branch valuations and by the jet
/// oracle, and records three verdicts: oracle agreement, the headline
/// bound (5/2)d²t², and the sharper assembly bound d(t−1) + d(4d+1)t(t−1)/2.
/// Points with a zero coordinate are refused: a vanishing coordinate lets
/// the multiplicity grow with the exponents while d and t stay fixed (the
/// line x − y meets x^{2n} − y^n at the origin with multiplicity n), so no
/// bound in d and t alone exists there.
pub fn verify_theorem_instance(
    f: &BiPoly,
    g: &BiPoly,
    p: &Point,
) -> Result<InstanceReport, Error> {
    for (coord, name) in [(&p.a, "first"), (&p.b, "second")] {
        if coord.is_zero() {
            return Err(Error::Domain(format!(
                "the {name} coordinate of the point is zero; the sparse bound only \
                 applies at points with nonzero coordinates (at a zero coordinate the \
                 multiplicity can reach any n with d and t fixed, as for x - y against \
                 x^2n - y^n at the origin)"
            )));
        }
    }
    if is_infinite(f, g, p)? {
        return Err(Error::Domain(
            "the curves share a component through the point, so the multiplicity \
             is infinite"
                .into(),
        ));
    }
    let by_branches = halphen_multiplicity(f, g, p, HalphenForm::First)?;
    let by_jets = jet_oracle_multiplicity(f, g, p)?;
    let value = finite(&by_branches.value)?;
    let jet_value = finite(&by_jets.value)?;

    let degree = f.total_degree().unwrap_or(0);
    let monomials = g.monomial_count() as u64;
    let headline = theorem_bound(degree, monomials)?;
    let assembly = assembly_bound(degree, monomials)?;
    let value_rat = Rat::from_integer(value.into());

    let verdicts = vec![
        Verdict::eq_values("branch and jet oracles agree", value, jet_value),
        Verdict::le("multiplicity <= (5/2) d^2 t^2", &value_rat, &headline),
        Verdict::le(
            "multiplicity <= d(t-1) + d(4d+1)t(t-1)/2",
            &value_rat,
            &assembly,
        ),
    ];
    let ok = verdicts.iter().all(|v| v.ok);
    Ok(InstanceReport {
        f: render(f),
        g: render(g),
        point: [coord_text(&p.a), coord_text(&p.b)],
        degree,
        monomials,
        multiplicity: value,
        jet_multiplicity: jet_value,
        verdicts,
        ok,
    })
}

/// Deterministic counts of generator work.
#[derive(Clone, Debug, Default, Serialize)]
pub struct WorkCounters {
    pub attempts: u64,
    pub accepted: u64,
    /// Draws rejected because the curves share a component through the point.
    pub rejected_infinite: u64,
    /// Draws rejected for shape reasons (zero polynomial, degree 0, order cap).
    pub rejected_shape: u64,
}

/// Full campaign output.
#[derive(Clone, Debug, Serialize)]
pub struct CampaignReport {
    pub schema: String,
    pub kind: String,
    pub config: ExperimentConfig,
    pub work: WorkCounters,
    pub instances: Vec<InstanceReport>,
    pub ok: bool,
}

fn nonzero_int(rng: &mut ChaCha8Rng, range: i64) -> i64 {
    loop {
        let c = rng.gen_range(-range..=range);
        if c != 0 {
            return c;
        }
    }
}

fn rational_coeff(rng: &mut ChaCha8Rng, range: i64) -> Elem {
    Tower::rationals().rat_elem(Rat::new(
        nonzero_int(rng, range).into(),
        1.into(),
    ))
}

/// A nonzero rational with a small denominator, for point coordinates.
fn nonzero_coordinate(rng: &mut ChaCha8Rng, range: i64) -> Rat {
    let numer = nonzero_int(rng, range);
    let denom = rng.gen_range(1..=2i64);
    Rat::new(numer.into(), denom.into())
}

/// Random dense curve of pinned total degree in 1..=max_degree.
fn random_dense(rng: &mut ChaCha8Rng, cfg: &ExperimentConfig) -> BiPoly {
    let degree = rng.gen_range(1..=cfg.max_degree);
    let mut out = BiPoly::zero();
    for ex in 0..=degree {
        for ey in 0..=(degree - ex) {
            if ex + ey > 0 && rng.gen_bool(0.5) {
                out = &out + &BiPoly::monomial(ex, ey, rational_coeff(rng, cfg.coeff_range));
            }
        }
    }
    // Pin the degree with one guaranteed top term.
    let ex = rng.gen_range(0..=degree);
    let top = BiPoly::monomial(ex, degree - ex, rational_coeff(rng, cfg.coeff_range));
    let rest = out;
    let mut pinned = BiPoly::zero();
    for ((ax, ay), c) in rest.terms() {
        if ax + ay < degree {
            pinned = &pinned + &BiPoly::monomial(*ax, *ay, c.clone());
        }
    }
    &pinned + &top
}

/// Random sparse curve with at most max_monomials - 1 nonconstant monomials,
/// leaving room for the planted constant.
fn random_sparse(rng: &mut ChaCha8Rng, cfg: &ExperimentConfig) -> BiPoly {
    let budget = (cfg.max_monomials - 1).max(1);
    let count = rng.gen_range(1..=budget);
    let mut supports = BTreeSet::new();
    while (supports.len() as u64) < count {
        let ex = rng.gen_range(0..=cfg.exponent_cap);
        let ey = rng.gen_range(0..=cfg.exponent_cap);
        if ex + ey > 0 {
            supports.insert((ex, ey));
        }
    }
    let mut out = BiPoly::zero();
    for (ex, ey) in supports {
        out = &out + &BiPoly::monomial(ex, ey, rational_coeff(rng, cfg.coeff_range));
    }
    out
}

struct Planted {
    f: BiPoly,
    g: BiPoly,
    point: Point,
}

/// One generation attempt; None when the draw must be rejected for shape.
fn plant_instance(rng: &mut ChaCha8Rng, cfg: &ExperimentConfig) -> Option<Planted> {
    let a = nonzero_coordinate(rng, cfg.coeff_range);
    let b = nonzero_coordinate(rng, cfg.coeff_range);
    let point = Point::rational(a, b);

    let f0 = random_dense(rng, cfg);
    let g0 = random_sparse(rng, cfg);
    let f = &f0 - &BiPoly::constant(f0.eval(&point.a, &point.b));
    let g = &g0 - &BiPoly::constant(g0.eval(&point.a, &point.b));
    if f.is_zero() || g.is_zero() {
        return None;
    }
    let df = f.total_degree().unwrap_or(0);
    let dg = g.total_degree().unwrap_or(0);
    if df == 0 || dg == 0 {
        return None;
    }
    match i64::try_from(df * dg + 1) {
        Ok(order) if order <= cfg.order_cap => Some(Planted { f, g, point }),
        _ => None,
    }
}

/// Run the planted-intersection campaign: every instance must satisfy the
/// headline and assembly bounds, and both oracles must agree.
pub fn theorem_campaign(cfg: &ExperimentConfig) -> Result<CampaignReport, Error> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut work = WorkCounters::default();
    let mut planted: Vec<Planted> = Vec::with_capacity(cfg.instances as usize);
    let attempt_cap = cfg.instances as u64 * 200 + 1000;
    while (planted.len() as u32) < cfg.instances {
        if work.attempts >= attempt_cap {
            return Err(Error::Domain(format!(
                "instance generation stalled after {} attempts",
                work.attempts
            )));
        }
        work.attempts += 1;
        let candidate = match plant_instance(&mut rng, cfg) {
            Some(c) => c,
            None => {
                work.rejected_shape += 1;
                continue;
            }
        };
        if is_infinite(&candidate.f, &candidate.g, &candidate.point)? {
            work.rejected_infinite += 1;
            continue;
        }
        work.accepted += 1;
        planted.push(candidate);
    }

    let instances: Result<Vec<InstanceReport>, Error> = planted
        .par_iter()
        .map(|inst| verify_theorem_instance(&inst.f, &inst.g, &inst.point))
        .collect();
    let instances = instances?;
    let ok = instances.iter().all(|r| r.ok);
    Ok(CampaignReport {
        schema: SCHEMA.to_string(),
        kind: "planted-intersection-campaign".to_string(),
        config: cfg.clone(),
        work,
        instances,
        ok,
    })
}

/// One recorded pairing from the f·g + 1 search.
#[derive(Clone, Debug, Serialize)]
pub struct FgExample {
    pub f: String,
    pub g: String,
    pub h: String,
    pub multiplicity: u64,
}

/// Output of the f·g + 1 search.
#[derive(Clone, Debug, Serialize)]
pub struct FgReport {
    pub schema: String,
    pub kind: String,
    pub config: ExperimentConfig,
    pub work: WorkCounters,
    /// The sparsity cap t² on nonzero-root multiplicities of h.
    pub cap: u64,
    pub observed_max: u64,
    /// How many pairings attained the observed maximum.
    pub extremal_count: u64,
    /// The first few extremal pairings, verbatim.
    pub extremal: Vec<FgExample>,
    pub ok: bool,
}

/// Random sparse univariate polynomial with at most max_monomials terms.
fn random_sparse_uni(rng: &mut ChaCha8Rng, cfg: &ExperimentConfig) -> UniPoly {
    let count = rng.gen_range(1..=cfg.max_monomials);
    let mut supports = BTreeSet::new();
    while (supports.len() as u64) < count {
        supports.insert(rng.gen_range(0..=cfg.exponent_cap));
    }
    let mut out = UniPoly::zero();
    for e in supports {
        out = &out + &UniPoly::monomial(e, rational_coeff(rng, cfg.coeff_range));
    }
    out
}

/// Search for high-multiplicity nonzero roots of h = f·g + 1 over random
/// sparse pairs. The observed maximum is checked against the cap t².
pub fn fgplus1_search(cfg: &ExperimentConfig) -> Result<FgReport, Error> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut work = WorkCounters::default();
    let mut pairs: Vec<(UniPoly, UniPoly)> = Vec::with_capacity(cfg.instances as usize);
    let attempt_cap = cfg.instances as u64 * 50 + 1000;
    while (pairs.len() as u32) < cfg.instances {
        if work.attempts >= attempt_cap {
            return Err(Error::Domain(format!(
                "pair generation stalled after {} attempts",
                work.attempts
            )));
        }
        work.attempts += 1;
        let f = random_sparse_uni(&mut rng, cfg);
        let g = random_sparse_uni(&mut rng, cfg);
        // f*g = -1 would make h the zero polynomial.
        if (&(&f * &g) + &UniPoly::one()).is_zero() {
            work.rejected_shape += 1;
            continue;
        }
        work.accepted += 1;
        pairs.push((f, g));
    }

    let measured: Result<Vec<FgExample>, Error> = pairs
        .par_iter()
        .map(|(f, g)| {
            let inst = fgplus1_instance(f, g)?;
            Ok(FgExample {
                f: render_unipoly(f),
                g: render_unipoly(g),
                h: render_unipoly(&inst.h),
                multiplicity: inst.multiplicity,
            })
        })
        .collect();
    let measured = measured?;
    let observed_max = measured.iter().map(|e| e.multiplicity).max().unwrap_or(0);
    let extremal_all: Vec<&FgExample> = measured
        .iter()
        .filter(|e| e.multiplicity == observed_max)
        .collect();
    let extremal_count = extremal_all.len() as u64;
    let extremal: Vec<FgExample> = extremal_all.into_iter().take(8).cloned().collect();
    let cap = fgplus1_cap(cfg.max_monomials);
    Ok(FgReport {
        schema: SCHEMA.to_string(),
        kind: "fgplus1-search".to_string(),
        config: cfg.clone(),
        work,
        cap,
        observed_max,
        extremal_count,
        extremal,
        ok: observed_max <= cap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_poly;
    use crate::report::to_sorted_json;
    use puiseux_core::tower::rat;

    fn poly(text: &str) -> BiPoly {
        parse_poly(text).expect("fixture parses").poly
    }

    #[test]
    fn single_instances_verify_with_both_oracles() {
        // Transverse crossing of a parabola and a line at (1,1).
        let report = verify_theorem_instance(
            &poly("y - x^2"),
            &poly("y - x"),
            &Point::rational(rat(1, 1), rat(1, 1)),
        )
        .unwrap();
        assert_eq!(report.multiplicity, 1);
        assert_eq!(report.jet_multiplicity, 1);
        assert!(report.ok, "{:?}", report.verdicts);

        // A line against a two-monomial sextic at (1,1): within bound 10.
        let report = verify_theorem_instance(
            &poly("x - y"),
            &poly("x^6 - y^3"),
            &Point::rational(rat(1, 1), rat(1, 1)),
        )
        .unwrap();
        assert!(report.multiplicity >= 1);
        assert_eq!(report.degree, 1);
        assert_eq!(report.monomials, 2);
        assert!(report.ok, "{:?}", report.verdicts);
    }

    #[test]
    fn zero_coordinates_are_refused() {
        let err = verify_theorem_instance(
            &poly("x - y"),
            &poly("x^6 - y^3"),
            &Point::origin(),
        )
        .unwrap_err();
        let text = err.to_string();
        assert!(text.contains("nonzero coordinates"), "{text}");
    }

    #[test]
    fn shared_components_are_refused() {
        // Both curves contain the line y = x through (1,1).
        let f = poly("(x - y)*(x + y)");
        let g = poly("(x - y)*(x + 1)");
        let err = verify_theorem_instance(&f, &g, &Point::rational(rat(1, 1), rat(1, 1)))
            .unwrap_err();
        assert!(err.to_string().contains("infinite"), "{err}");
    }

    #[test]
    fn small_campaign_passes_and_is_deterministic() {
        let cfg = ExperimentConfig {
            instances: 6,
            ..ExperimentConfig::planted(20240811, 6)
        };
        let first = theorem_campaign(&cfg).unwrap();
        assert!(first.ok);
        assert_eq!(first.instances.len(), 6);
        assert_eq!(first.work.accepted, 6);
        for inst in &first.instances {
            assert_eq!(inst.verdicts.len(), 3);
            for v in &inst.verdicts {
                assert!(!v.formula.is_empty() && !v.lhs.is_empty() && !v.rhs.is_empty());
            }
        }
        let second = theorem_campaign(&cfg).unwrap();
        assert_eq!(
            to_sorted_json(&first).unwrap(),
            to_sorted_json(&second).unwrap()
        );
    }

    #[test]
    fn fg_search_respects_the_cap() {
        let cfg = ExperimentConfig::fg_search(7, 40);
        let report = fgplus1_search(&cfg).unwrap();
        assert!(report.ok);
        assert!(report.observed_max <= report.cap);
        assert!(report.extremal_count >= 1);
        assert!(!report.extremal.is_empty());
        // Extremal pairings replay to the recorded multiplicity.
        let first = &report.extremal[0];
        let f = parse_poly(&first.f).unwrap().to_unipoly().unwrap();
        let g = parse_poly(&first.g).unwrap().to_unipoly().unwrap();
        let replay = fgplus1_instance(&f, &g).unwrap();
        assert_eq!(replay.multiplicity, first.multiplicity);

        let again = fgplus1_search(&cfg).unwrap();
        assert_eq!(
            to_sorted_json(&report).unwrap(),
            to_sorted_json(&again).unwrap()
        );
    }

    #[test]
    fn configs_validate_their_caps() {
        let mut cfg = ExperimentConfig::planted(1, 10);
        assert!(cfg.validate().is_ok());
        cfg.max_monomials = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::planted(1, 10);
        cfg.order_cap = 0;
        assert!(cfg.validate().is_err());
    }
}
