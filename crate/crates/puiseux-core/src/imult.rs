//! Intersection multiplicity of two plane curves at a point.
//!
//! The parametrization formula computes I_p(F, G) after shifting p to the
//! origin: with m, n the largest powers of x dividing the shifted F, G and
//! r, s their counts of positive-valuation Puiseux roots, the multiplicity
//! is infinite when m > 0 and n > 0 (and exactly when a common factor
//! vanishes at p), and otherwise equals any of the three sums
//!
//! ```text
//!   m s + sum_i val G(x, S_i(x))
//!   n r + sum_j val F(x, T_j(x))
//!   m s + n r + sum_i sum_j val(S_i - T_j)
//! ```
//!
//! over the positive-valuation roots S_i of F and T_j of G. Branches carry
//! conjugate counts instead of being enumerated one by one; a summand whose
//! leading coefficient is a zero divisor in its tower is resolved by
//! splitting the tower and summing the components. An independent oracle
//! computes dim O_p/(F, G) directly by exact linear algebra on truncated
//! polynomial multiples (the dimension stabilizes at the multiplicity).

use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{CResult, CalcError, Error};
use crate::newton::{expand_branches, positive_valuation_count, BranchFamily};
use crate::poly::{gcd_bivariate, BiPoly};
use crate::series::{eval_poly, PuiseuxSeries};
use crate::tower::{Class, Elem, Rat, Tower};

/// A point of the affine plane with coordinates in a shared tower.
#[derive(Clone, Debug)]
pub struct Point {
    pub a: Elem,
    pub b: Elem,
}

impl Point {
    pub fn new(a: Elem, b: Elem) -> Point {
        assert!(
            a.tower().is_prefix_of(b.tower()) || b.tower().is_prefix_of(a.tower()),
            "point coordinates from unrelated towers"
        );
        Point { a, b }
    }

    pub fn origin() -> Point {
        let q = Tower::rationals();
        Point::new(q.zero(), q.zero())
    }

    pub fn rational(a: Rat, b: Rat) -> Point {
        let q = Tower::rationals();
        Point::new(q.rat_elem(a), q.rat_elem(b))
    }

    /// The deeper of the two coordinate towers.
    pub fn tower(&self) -> &Tower {
        if self.a.tower().is_prefix_of(self.b.tower()) {
            self.b.tower()
        } else {
            self.a.tower()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Multiplicity {
    Finite(u64),
    Infinite,
}

impl std::fmt::Display for Multiplicity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Multiplicity::Finite(v) => write!(f, "{v}"),
            Multiplicity::Infinite => write!(f, "INFINITE"),
        }
    }
}

/// Which computation produced a result.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    HalphenForm1,
    HalphenForm2,
    HalphenForm3,
    JetOracle,
}

/// Which of the three equal sums of the parametrization formula to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HalphenForm {
    First,
    Second,
    Third,
}

impl HalphenForm {
    pub fn from_index(ix: u8) -> Option<HalphenForm> {
        match ix {
            1 => Some(HalphenForm::First),
            2 => Some(HalphenForm::Second),
            3 => Some(HalphenForm::Third),
            _ => None,
        }
    }

    fn method(self) -> Method {
        match self {
            HalphenForm::First => Method::HalphenForm1,
            HalphenForm::Second => Method::HalphenForm2,
            HalphenForm::Third => Method::HalphenForm3,
        }
    }
}

/// The shape quantities and certified summands behind a parametrized result.
#[derive(Clone, Debug)]
pub struct ParamTrace {
    /// Largest power of x dividing the shifted F.
    pub m: u64,
    /// Largest power of x dividing the shifted G.
    pub n: u64,
    /// Positive-valuation root count of the shifted F.
    pub r: u64,
    /// Positive-valuation root count of the shifted G.
    pub s: u64,
    /// (valuation, conjugate count) per resolved summand.
    pub summands: Vec<(Rat, u64)>,
}

#[derive(Clone, Debug)]
pub struct MultiplicityResult {
    pub value: Multiplicity,
    pub method: Method,
    pub trace: Option<ParamTrace>,
}

/// Outcome of summing certified valuations over tower components.
pub(crate) enum SumOutcome {
    Value(Rat),
    /// A residual was exactly zero: the series is a genuine common root.
    Infinite,
    /// A valuation could not be certified at the current expansion order.
    NeedDeeper,
}

/// Intersection multiplicity at p by the parametrization formula.
pub fn halphen_multiplicity(
    f: &BiPoly,
    g: &BiPoly,
    p: &Point,
    form: HalphenForm,
) -> Result<MultiplicityResult, Error> {
    if f.is_zero() || g.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    let base_depth = p.tower().depth();
    let fb = f.translate(&p.a, &p.b);
    let gb = g.translate(&p.a, &p.b);
    let m = fb.x_divisibility().unwrap();
    let n = gb.x_divisibility().unwrap();
    let r = positive_valuation_count(&fb)?;
    let s = positive_valuation_count(&gb)?;
    let trace = |summands: Vec<(Rat, u64)>| ParamTrace { m, n, r, s, summands };
    if m > 0 && n > 0 {
        // x divides both shifted curves
        return Ok(MultiplicityResult {
            value: Multiplicity::Infinite,
            method: form.method(),
            trace: Some(trace(Vec::new())),
        });
    }
    if common_factor_vanishes_at_origin(&fb, &gb)? {
        return Ok(MultiplicityResult {
            value: Multiplicity::Infinite,
            method: form.method(),
            trace: Some(trace(Vec::new())),
        });
    }
    // Every finite summand is at most deg F * deg G, so this order certifies
    // them all; the doublings are defensive.
    let base_order = (f.total_degree().unwrap() * g.total_degree().unwrap() + 1)
        .try_into()
        .map_err(|_| Error::ExponentOverflow)?;
    let mut order: i64 = base_order;
    for _ in 0..3 {
        let mut summands = Vec::new();
        let outcome = match form {
            HalphenForm::First => {
                one_sided_sum(&fb, &gb, m, s, order, base_depth, &mut summands)?
            }
            HalphenForm::Second => {
                one_sided_sum(&gb, &fb, n, r, order, base_depth, &mut summands)?
            }
            HalphenForm::Third => {
                pairwise_sum(&fb, &gb, m, n, r, s, order, base_depth, &mut summands)?
            }
        };
        match outcome {
            SumOutcome::Value(total) => {
                let value = rat_to_count(&total)?;
                return Ok(MultiplicityResult {
                    value: Multiplicity::Finite(value),
                    method: form.method(),
                    trace: Some(trace(summands)),
                });
            }
            SumOutcome::Infinite => {
                return Ok(MultiplicityResult {
                    value: Multiplicity::Infinite,
                    method: form.method(),
                    trace: Some(trace(summands)),
                });
            }
            SumOutcome::NeedDeeper => {
                order = order.checked_mul(2).ok_or(Error::ExponentOverflow)?;
            }
        }
    }
    Err(Error::TruncationExhausted)
}

/// True when gcd(F, G) is nonconstant and vanishes at the origin. Both
/// arguments are already shifted.
fn common_factor_vanishes_at_origin(fb: &BiPoly, gb: &BiPoly) -> Result<bool, Error> {
    let h = gcd_bivariate(fb, gb).map_err(Error::from_calc)?;
    if h.total_degree().unwrap_or(0) == 0 {
        return Ok(false);
    }
    match h.coeff(0, 0) {
        None => Ok(true),
        Some(c) => match c.classify().map_err(Error::from_calc)? {
            Class::Zero => Ok(true),
            Class::Unit(_) => Ok(false),
            Class::ZeroDivisor(sp) => Err(Error::from_calc(CalcError::Split(sp))),
        },
    }
}

/// m s + sum over positive-valuation branches S of `expanded` of
/// val(other(x, S)), weighted by multiplicity and conjugate count.
pub(crate) fn one_sided_sum(
    expanded: &BiPoly,
    other: &BiPoly,
    m: u64,
    s: u64,
    order: i64,
    base_depth: usize,
    summands: &mut Vec<(Rat, u64)>,
) -> Result<SumOutcome, Error> {
    let branches = expand_branches(expanded, order, BranchFamily::PositiveValuation)?;
    let mut total = Rat::from_integer((m * s).into());
    for branch in &branches {
        let residual = eval_poly(other, &branch.series);
        let weight = branch.multiplicity as u64 * branch.conjugates as u64;
        match weighted_val_sum(residual, weight, base_depth, summands)? {
            SumOutcome::Value(v) => total += v,
            other => return Ok(other),
        }
    }
    Ok(SumOutcome::Value(total))
}

/// m s + n r + the double sum of val(S_i - T_j) over positive-valuation
/// branches of both curves. Differences are taken in an amalgamated tower
/// over the shared point prefix.
#[allow(clippy::too_many_arguments)]
fn pairwise_sum(
    fb: &BiPoly,
    gb: &BiPoly,
    m: u64,
    n: u64,
    r: u64,
    s: u64,
    order: i64,
    base_depth: usize,
    summands: &mut Vec<(Rat, u64)>,
) -> Result<SumOutcome, Error> {
    let bf = expand_branches(fb, order, BranchFamily::PositiveValuation)?;
    let bg = expand_branches(gb, order, BranchFamily::PositiveValuation)?;
    let mut total = Rat::from_integer((m * s + n * r).into());
    for sb in &bf {
        for tb in &bg {
            let ts = series_tower(&sb.series, fb);
            let tt = series_tower(&tb.series, gb);
            let joint = ts.amalgamate(&tt, base_depth);
            let shift_by = ts.depth() - base_depth;
            let s_in = sb.series.migrate(&joint);
            let t_in = transfer_series(&tb.series, &joint, base_depth, shift_by);
            let diff = s_in.sub(&t_in);
            let weight = sb.multiplicity as u64
                * sb.conjugates as u64
                * tb.multiplicity as u64
                * tb.conjugates as u64;
            match weighted_val_sum(diff, weight, base_depth, summands)? {
                SumOutcome::Value(v) => total += v,
                other => return Ok(other),
            }
        }
    }
    Ok(SumOutcome::Value(total))
}

/// Deepest coefficient tower of a series, with the polynomial's own tower as
/// the fallback for series without stored terms.
fn series_tower(series: &PuiseuxSeries, fallback: &BiPoly) -> Tower {
    series
        .scaled_terms()
        .map(|(_, c)| c.tower())
        .max_by_key(|t| t.depth())
        .cloned()
        .unwrap_or_else(|| fallback.tower())
}

/// Rebuild a series in an amalgamated tower by reindexing the generators of
/// its coefficients.
fn transfer_series(
    series: &PuiseuxSeries,
    joint: &Tower,
    common: usize,
    by: usize,
) -> PuiseuxSeries {
    let terms = series
        .scaled_terms()
        .map(|(k, c)| (*k, joint.elem(c.rep().shift_vars(common, by))))
        .collect();
    PuiseuxSeries::from_parts(series.ram(), terms, series.cutoff())
}

/// Accumulate weight * val(series) across the components of the coefficient
/// tower, splitting it wherever the leading coefficient is a zero divisor.
/// Splits below `base_depth` belong to the caller's input and are reported
/// as ambiguity errors.
fn weighted_val_sum(
    series: PuiseuxSeries,
    weight: u64,
    base_depth: usize,
    summands: &mut Vec<(Rat, u64)>,
) -> Result<SumOutcome, Error> {
    let mut total = Rat::zero();
    let mut work = vec![(series, weight)];
    while let Some((s, w)) = work.pop() {
        if s.is_exact_zero() {
            return Ok(SumOutcome::Infinite);
        }
        let v = s.val();
        if !v.exact {
            return Ok(SumOutcome::NeedDeeper);
        }
        let (exp, lead) = {
            let (exp, lead) = s
                .leading()
                .expect("a certified finite valuation has a leading term");
            (exp, lead.clone())
        };
        let split = match lead.classify() {
            Ok(Class::Unit(_)) => {
                total += &exp * Rat::from_integer(w.into());
                summands.push((exp, w));
                continue;
            }
            Ok(Class::Zero) => unreachable!("series terms store nonzero elements"),
            Ok(Class::ZeroDivisor(sp)) | Err(CalcError::Split(sp)) => sp,
            Err(CalcError::Fatal(e)) => return Err(e),
        };
        if split.level < base_depth {
            return Err(Error::from_calc(CalcError::Split(split)));
        }
        let tower = lead.tower().clone();
        let whole = tower.levels()[split.level].degree as u64;
        let (ta, tb) = tower.split(split.level, &split.factor);
        let da = ta.levels()[split.level].degree as u64;
        let db = tb.levels()[split.level].degree as u64;
        debug_assert_eq!(da + db, whole);
        debug_assert_eq!(w % whole, 0, "weight tracks the component count");
        work.push((s.migrate(&ta), w / whole * da));
        work.push((s.migrate(&tb), w / whole * db));
    }
    Ok(SumOutcome::Value(total))
}

fn rat_to_count(total: &Rat) -> Result<u64, Error> {
    if !total.is_integer() || total.is_negative() {
        return Err(Error::Domain(format!(
            "valuation sum {total} is not a natural number"
        )));
    }
    total
        .to_integer()
        .to_u64()
        .ok_or_else(|| Error::Domain("multiplicity exceeds u64".into()))
}

/// True when F and G share a factor that vanishes at p.
pub fn is_infinite(f: &BiPoly, g: &BiPoly, p: &Point) -> Result<bool, Error> {
    if f.is_zero() || g.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    let h = gcd_bivariate(f, g).map_err(Error::from_calc)?;
    if h.total_degree().unwrap_or(0) == 0 {
        return Ok(false);
    }
    let at_p = h.eval(&p.a, &p.b);
    if at_p.is_zero() {
        return Ok(true);
    }
    match at_p.classify().map_err(Error::from_calc)? {
        Class::Zero => Ok(true),
        Class::Unit(_) => Ok(false),
        Class::ZeroDivisor(sp) => Err(Error::from_calc(CalcError::Split(sp))),
    }
}

/// Intersection multiplicity as the stabilized codimension of truncated
/// polynomial multiples of the shifted curves: an oracle independent of
/// Puiseux expansion. Stabilization of two consecutive truncation orders is
/// permanent, so the first agreement is conclusive; if none occurs by
/// deg F * deg G + 2 the multiplicity is infinite.
pub fn jet_oracle_multiplicity(
    f: &BiPoly,
    g: &BiPoly,
    p: &Point,
) -> Result<MultiplicityResult, Error> {
    if f.is_zero() || g.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    let fb = f.translate(&p.a, &p.b);
    let gb = g.translate(&p.a, &p.b);
    let tower = p.tower().clone();
    let cap = f.total_degree().unwrap() * g.total_degree().unwrap() + 2;
    let mut prev: Option<u64> = None;
    for order in 1..=cap {
        let q = jet_quotient_dim(&fb, &gb, order, &tower).map_err(Error::from_calc)?;
        if prev == Some(q) {
            return Ok(MultiplicityResult {
                value: Multiplicity::Finite(q),
                method: Method::JetOracle,
                trace: None,
            });
        }
        prev = Some(q);
    }
    Ok(MultiplicityResult {
        value: Multiplicity::Infinite,
        method: Method::JetOracle,
        trace: None,
    })
}

/// Dimension of polynomials of total degree < order modulo the span of all
/// monomial multiples of F and G truncated below that degree, by Gaussian
/// elimination with certified unit pivots.
fn jet_quotient_dim(f: &BiPoly, g: &BiPoly, order: u64, tower: &Tower) -> CResult<u64> {
    let mut cols: Vec<(u64, u64)> = Vec::new();
    for i in 0..order {
        for j in 0..order - i {
            cols.push((i, j));
        }
    }
    let index = |i: u64, j: u64| -> usize {
        // position of (i, j) among pairs with i' < order, j' < order - i'
        let before: u64 = (0..i).map(|k| order - k).sum();
        (before + j) as usize
    };
    let mut rows: Vec<Vec<Elem>> = Vec::new();
    for h in [f, g] {
        for &(a, b) in &cols {
            let mut row = vec![tower.zero(); cols.len()];
            let mut any = false;
            for ((ex, ey), c) in h.terms() {
                let (i, j) = (ex + a, ey + b);
                if i + j < order {
                    let slot = index(i, j);
                    row[slot] = &row[slot] + c;
                    any = true;
                }
            }
            if any {
                rows.push(row);
            }
        }
    }
    let mut rank: u64 = 0;
    let mut used = vec![false; rows.len()];
    for col in 0..cols.len() {
        let mut pivot: Option<usize> = None;
        let mut ambiguous: Option<CalcError> = None;
        for (ri, row) in rows.iter().enumerate() {
            if used[ri] || row[col].is_zero() {
                continue;
            }
            if row[col].try_rat().is_some() {
                pivot = Some(ri);
                break;
            }
            match row[col].classify() {
                Ok(Class::Unit(_)) => {
                    pivot = Some(ri);
                    break;
                }
                Ok(Class::Zero) => {}
                Ok(Class::ZeroDivisor(sp)) => ambiguous = Some(CalcError::Split(sp)),
                Err(e) => return Err(e),
            }
        }
        let pi = match pivot {
            Some(pi) => pi,
            None => {
                if let Some(e) = ambiguous {
                    // only uncertifiable entries remain in this column
                    return Err(e);
                }
                continue;
            }
        };
        used[pi] = true;
        rank += 1;
        let inv = rows[pi][col].inv()?;
        let prow: Vec<Elem> = rows[pi].iter().map(|e| e * &inv).collect();
        for ri in 0..rows.len() {
            if ri == pi || used[ri] || rows[ri][col].is_zero() {
                continue;
            }
            let factor = rows[ri][col].clone();
            for c2 in col..cols.len() {
                let delta = &factor * &prow[c2];
                rows[ri][c2] = &rows[ri][c2] - &delta;
            }
        }
        rows[pi] = prow;
    }
    Ok(cols.len() as u64 - rank)
}

/// Sum of multiplicities over the listed common zeros next to the product
/// of total degrees.
#[derive(Clone, Debug)]
pub struct BezoutCheck {
    pub sum: u64,
    pub bound: u64,
    pub within_bound: bool,
}

/// Sum I_p(F, G) over the given points and compare against deg F * deg G.
/// Every point must have finite multiplicity.
pub fn bezout_sum_check(
    f: &BiPoly,
    g: &BiPoly,
    points: &[Point],
) -> Result<BezoutCheck, Error> {
    let mut sum: u64 = 0;
    for p in points {
        match halphen_multiplicity(f, g, p, HalphenForm::First)?.value {
            Multiplicity::Finite(v) => sum += v,
            Multiplicity::Infinite => {
                return Err(Error::Domain(
                    "a listed point has infinite intersection multiplicity".into(),
                ))
            }
        }
    }
    let bound = f.total_degree().unwrap_or(0) * g.total_degree().unwrap_or(0);
    Ok(BezoutCheck {
        sum,
        bound,
        within_bound: sum <= bound,
    })
}
