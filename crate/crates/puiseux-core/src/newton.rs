//! Newton polygons and Newton-Puiseux branch expansion.
//!
//! The polygon of F = sum F_k(x) y^k is the lower convex hull of the points
//! (k, val F_k). Each edge of slope -p/q yields branches of valuation p/q:
//! the roots of the edge polynomial give leading coefficients, and the
//! substitution x -> x^q, y -> x^p (c + y') reduces to a smaller instance.
//!
//! Leading coefficients live in algebraic extensions that are adjoined on the
//! fly without factoring. When later arithmetic discovers that an adjoined
//! modulus was reducible (a zero-divisor signal), the expansion splits the
//! tower at the adjunction that owns that level and replays both cases; each
//! resulting branch carries the number of conjugates it stands for. Splits at
//! caller-supplied levels are reported as [`Error::AmbiguousTower`].

use num_bigint::BigInt;
use num_traits::Signed;

use crate::error::{CResult, CalcError, Error};
use crate::poly::{squarefree_decomposition_y, BiPoly};
use crate::series::PuiseuxSeries;
use crate::tower::{all_roots, Class, Elem, Rat, Tower};

/// An edge of the lower hull; `slope` increases strictly along the polygon.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolygonEdge {
    pub slope: Rat,
    pub from: (u64, u64),
    pub to: (u64, u64),
    pub horizontal_length: u64,
}

#[derive(Clone, Debug)]
pub struct NewtonPolygon {
    /// (k, val F_k) for every nonzero coefficient of y^k, ascending in k.
    pub points: Vec<(u64, u64)>,
    /// Lower hull edges in slope order.
    pub edges: Vec<PolygonEdge>,
    /// Largest power of x dividing F.
    pub x_divisibility: u64,
    /// Multiplicity of the zero series as a y-root of F.
    pub zero_series_multiplicity: u64,
}

/// Certified (k, val F_k) points: each trailing coefficient is checked to be
/// a unit so the valuation is unambiguous over a possibly-reducible tower.
fn coeff_valuations(f: &BiPoly) -> CResult<Vec<(u64, u64)>> {
    let mut out = Vec::new();
    for (k, c) in f.coeffs_y() {
        certify_nonzero(c.trailing_coeff().expect("nonzero coefficient"))?;
        out.push((k, c.valuation().unwrap()));
    }
    Ok(out)
}

fn certify_nonzero(c: &Elem) -> CResult<()> {
    if c.try_rat().is_some() {
        return Ok(()); // nonzero rationals are units
    }
    match c.classify()? {
        Class::Unit(_) => Ok(()),
        Class::ZeroDivisor(sp) => Err(CalcError::Split(sp)),
        Class::Zero => unreachable!("stored coefficients are nonzero"),
    }
}

fn cross(a: (u64, u64), b: (u64, u64), c: (u64, u64)) -> BigInt {
    let (ax, ay) = (BigInt::from(a.0), BigInt::from(a.1));
    let bx = BigInt::from(b.0) - &ax;
    let by = BigInt::from(b.1) - &ay;
    let cx = BigInt::from(c.0) - &ax;
    let cy = BigInt::from(c.1) - &ay;
    bx * cy - by * cx
}

/// Lower hull of points with strictly increasing first coordinate; collinear
/// interior points are merged into their edge.
fn lower_hull(points: &[(u64, u64)]) -> Vec<(u64, u64)> {
    let mut hull: Vec<(u64, u64)> = Vec::new();
    for &p in points {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            if !cross(a, b, p).is_positive() {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

pub fn newton_polygon(f: &BiPoly) -> Result<NewtonPolygon, Error> {
    if f.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    let points = coeff_valuations(f).map_err(Error::from_calc)?;
    let hull = lower_hull(&points);
    let edges = hull
        .windows(2)
        .map(|w| {
            let (k0, v0) = w[0];
            let (k1, v1) = w[1];
            PolygonEdge {
                slope: Rat::new(
                    BigInt::from(v1) - BigInt::from(v0),
                    BigInt::from(k1) - BigInt::from(k0),
                ),
                from: w[0],
                to: w[1],
                horizontal_length: k1 - k0,
            }
        })
        .collect();
    Ok(NewtonPolygon {
        x_divisibility: f.x_divisibility().unwrap(),
        zero_series_multiplicity: f.y_divisibility().unwrap(),
        points,
        edges,
    })
}

/// Largest power of x dividing F.
pub fn x_divisibility(f: &BiPoly) -> Result<u64, Error> {
    f.x_divisibility().ok_or(Error::ZeroPolynomial)
}

/// Number of Puiseux roots of F with strictly positive valuation (the zero
/// series included), counted with multiplicity: with m the x-divisibility,
/// this is the least k such that val F_k = m.
pub fn positive_valuation_count(f: &BiPoly) -> Result<u64, Error> {
    if f.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    let points = coeff_valuations(f).map_err(Error::from_calc)?;
    Ok(positive_count_from_points(&points))
}

fn positive_count_from_points(points: &[(u64, u64)]) -> u64 {
    let m = points.iter().map(|(_, v)| *v).min().unwrap();
    points.iter().filter(|(_, v)| *v == m).map(|(k, _)| *k).min().unwrap()
}

fn positive_count_certified(f: &BiPoly) -> CResult<u64> {
    Ok(positive_count_from_points(&coeff_valuations(f)?))
}

/// One branch of the curve at the origin: a Puiseux series y-root, its
/// multiplicity as a root, and the number of conjugate roots it stands for.
#[derive(Clone, Debug)]
pub struct Branch {
    pub series: PuiseuxSeries,
    pub multiplicity: u32,
    pub conjugates: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BranchFamily {
    /// Branches with strictly positive valuation, the zero series included.
    PositiveValuation,
    /// Every Puiseux y-root: positive, zero and negative valuations.
    All,
}

/// Expand the Puiseux roots of F far enough that every branch carries all
/// terms with exponent below `order` (or is exact).
pub fn expand_branches(
    f: &BiPoly,
    order: i64,
    family: BranchFamily,
) -> Result<Vec<Branch>, Error> {
    if f.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    if order < 1 {
        return Err(Error::Domain("expansion order must be at least 1".into()));
    }
    let dy = f.degree_y().unwrap();
    if dy == 0 {
        return Ok(Vec::new());
    }
    // deterministic budget: exceeding it means the expansion would run past
    // any sound interpretation of the requested order
    let mut fuel: u64 = 10u64
        .saturating_mul(dy.max(4))
        .saturating_mul(order.unsigned_abs().saturating_add(2));
    let (_, parts) = squarefree_decomposition_y(f).map_err(Error::from_calc)?;
    let mut out = Vec::new();
    for (part, mult) in parts {
        let ctx = part.tower();
        let subs = expand_rec(
            &ctx,
            &part,
            order,
            family == BranchFamily::All,
            &mut fuel,
        )
        .map_err(Error::from_calc)?;
        for (series, conj) in subs {
            out.push(Branch {
                series,
                multiplicity: mult,
                conjugates: conj,
            });
        }
    }
    Ok(out)
}

/// Recursive expansion of a squarefree-in-y polynomial over `ctx`. Returns
/// assembled series with their conjugate counts. `all_slopes` is set only at
/// the top level; recursive continuations always need positive valuation.
fn expand_rec(
    ctx: &Tower,
    p: &BiPoly,
    order: i64,
    all_slopes: bool,
    fuel: &mut u64,
) -> CResult<Vec<(PuiseuxSeries, u32)>> {
    *fuel = fuel.checked_sub(1).ok_or(Error::TruncationExhausted)?;
    let mut out: Vec<(PuiseuxSeries, u32)> = Vec::new();
    let mut p = p.clone();
    if let Some(k0) = p.y_divisibility() {
        if k0 > 0 {
            out.push((PuiseuxSeries::zero(), 1));
            p = p.div_ypow(k0);
        }
    }
    let dy = p.degree_y().unwrap_or(0);
    if dy == 0 {
        return Ok(out);
    }
    if order <= 0 {
        // No term below the requested order can exist for the remaining
        // branches (they have positive valuation); report them as zero up to
        // the cutoff, with their total conjugate count.
        let r = positive_count_certified(&p)?;
        if r > 0 {
            out.push((
                PuiseuxSeries::zero_truncated(order),
                u32::try_from(r).expect("branch count fits u32"),
            ));
        }
        return Ok(out);
    }
    let points = coeff_valuations(&p)?;
    let hull = lower_hull(&points);
    for w in hull.windows(2) {
        let (k0, v0) = w[0];
        let (k1, v1) = w[1];
        // branch valuation lambda = -slope = pp/qq in lowest terms, qq > 0
        let lam = Rat::new(
            BigInt::from(v0) - BigInt::from(v1),
            BigInt::from(k1) - BigInt::from(k0),
        );
        if !all_slopes && !lam.is_positive() {
            continue;
        }
        let pp: i64 = lam
            .numer()
            .try_into()
            .map_err(|_| Error::ExponentOverflow)?;
        let qq: i64 = lam
            .denom()
            .try_into()
            .map_err(|_| Error::ExponentOverflow)?;
        // Edge polynomial phi(c) = sum_j a_j c^(jq), where a_j is the
        // coefficient on the support line at k = k0 + jq. Its degree is the
        // horizontal length, so each edge accounts for that many roots, the
        // ramified conjugates appearing as distinct roots of phi.
        let q_u = qq as u64;
        let hlen = k1 - k0;
        let mut phi: Vec<Elem> = vec![ctx.zero(); hlen as usize + 1];
        for j in 0..=hlen / q_u {
            let k = k0 + j * q_u;
            let e = v0 as i64 - pp * j as i64;
            debug_assert!(e >= 0, "support line exponent must be nonnegative");
            if let Some(c) = p.coeff(e as u64, k) {
                phi[(j * q_u) as usize] = c.clone();
            }
        }
        for root in all_roots(ctx, &phi)? {
            // The boundary that adjoined a level owns splits at exactly that
            // level; deeper levels are owned by deeper recursion.
            let owned_level = (root.conjugates > 1).then(|| ctx.depth());
            let mut work: Vec<(Tower, Elem, u32)> =
                vec![(root.tower.clone(), root.root.clone(), root.conjugates)];
            while let Some((rt, c, weight)) = work.pop() {
                match expand_after_root(&rt, &p, k0, v0, pp, qq, &c, order, fuel) {
                    Ok(subs) => {
                        for (series, conj) in subs {
                            out.push((series, conj * weight));
                        }
                    }
                    Err(CalcError::Split(sp)) if Some(sp.level) == owned_level => {
                        let (ta, tb) = rt.split(sp.level, &sp.factor);
                        let da = ta.levels()[sp.level].degree;
                        let db = tb.levels()[sp.level].degree;
                        work.push((ta.clone(), c.migrate(&ta), da));
                        work.push((tb.clone(), c.migrate(&tb), db));
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Ok(out)
}

/// Substitute x -> x^q, y -> x^p (c + y), divide by the edge weight x^D, and
/// expand the smaller instance; then assemble this level's contribution
/// S(x) = x^(p/q) (c + S'(x^(1/q))).
#[allow(clippy::too_many_arguments)]
fn expand_after_root(
    rt: &Tower,
    p: &BiPoly,
    k0: u64,
    v0: u64,
    pp: i64,
    qq: i64,
    c: &Elem,
    order: i64,
    fuel: &mut u64,
) -> CResult<Vec<(PuiseuxSeries, u32)>> {
    let d_shift = qq * v0 as i64 + pp * k0 as i64;
    let dy = p.degree_y().unwrap_or(0);
    // powers of c up to the y-degree
    let mut cpow: Vec<Elem> = Vec::with_capacity(dy as usize + 1);
    cpow.push(rt.one());
    for i in 1..=dy as usize {
        let next = &cpow[i - 1] * c;
        cpow.push(next);
    }
    let mut p1 = BiPoly::zero();
    for ((ex, ey), coeff) in p.terms() {
        let xe = qq * *ex as i64 + pp * *ey as i64 - d_shift;
        debug_assert!(xe >= 0, "terms lie on or above the edge support line");
        let xe = xe as u64;
        // (c + y)^ey = sum_l C(ey, l) c^(ey-l) y^l
        let mut binom = Rat::from_integer(1.into());
        for l in 0..=*ey {
            let term = coeff.scale(&binom);
            let term = &term * &cpow[(*ey - l) as usize];
            p1 = &p1 + &BiPoly::monomial(xe, l, term);
            if l < *ey {
                binom = binom * Rat::new(BigInt::from(*ey - l), BigInt::from(l + 1));
            }
        }
    }
    let sub_order = order
        .checked_mul(qq)
        .and_then(|v| v.checked_sub(pp))
        .ok_or(Error::ExponentOverflow)?;
    let subs = expand_rec(rt, &p1, sub_order, false, fuel)?;
    let mut branches = Vec::with_capacity(subs.len());
    for (s1, conj) in subs {
        let in_x = s1.stretch(qq as u64);
        let with_c = in_x.add(&PuiseuxSeries::monomial(c.clone(), 0, 1));
        let series = with_c.mul(&PuiseuxSeries::monomial(rt.one(), pp, qq as u64));
        branches.push((series, conj));
    }
    Ok(branches)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::UniPoly;
    use crate::series::{eval_poly, Cutoff, ExtRat};
    use crate::tower::rat;

    fn q() -> Tower {
        Tower::rationals()
    }

    fn c(n: i64) -> Elem {
        q().rat_elem(rat(n, 1))
    }

    fn bp(terms: &[(i64, u64, u64)]) -> BiPoly {
        let mut p = BiPoly::zero();
        for (co, ex, ey) in terms {
            p = &p + &BiPoly::monomial(*ex, *ey, c(*co));
        }
        p
    }

    /// x y (y - x + x^2)^2 (y - 1 + x) (x y^3 - 1): a curve with branches of
    /// positive, zero and negative valuation and a double branch.
    fn mixed_slope_curve() -> BiPoly {
        let xy = bp(&[(1, 1, 1)]);
        let sq = bp(&[(1, 0, 1), (-1, 1, 0), (1, 2, 0)]);
        let lin = bp(&[(1, 0, 1), (-1, 0, 0), (1, 1, 0)]);
        let trailing = bp(&[(1, 1, 3), (-1, 0, 0)]);
        &(&(&xy * &(&sq * &sq)) * &lin) * &trailing
    }

    #[test]
    fn coefficient_table_of_mixed_slope_curve() {
        let f = mixed_slope_curve();
        let cy = f.coeffs_y();
        let expect: [(u64, &[(i64, u64)]); 7] = [
            (1, &[(1, 3), (-3, 4), (3, 5), (-1, 6)]),
            (2, &[(-2, 2), (3, 3), (-1, 5)]),
            (3, &[(1, 1), (1, 2), (-2, 3)]),
            (4, &[(-1, 1), (-1, 4), (3, 5), (-3, 6), (1, 7)]),
            (5, &[(2, 3), (-3, 4), (1, 6)]),
            (6, &[(-1, 2), (-1, 3), (2, 4)]),
            (7, &[(1, 2)]),
        ];
        assert_eq!(cy.len(), expect.len());
        for (k, terms) in expect {
            let mut want = UniPoly::zero();
            for (co, e) in terms {
                want = &want + &UniPoly::monomial(*e, c(*co));
            }
            assert!(cy[&k].equals(&want), "coefficient of y^{k}");
        }
    }

    #[test]
    fn polygon_of_mixed_slope_curve() {
        let f = mixed_slope_curve();
        let polygon = newton_polygon(&f).unwrap();
        assert_eq!(
            polygon.points,
            vec![(1, 3), (2, 2), (3, 1), (4, 1), (5, 3), (6, 2), (7, 2)]
        );
        let summary: Vec<(Rat, u64)> = polygon
            .edges
            .iter()
            .map(|e| (e.slope.clone(), e.horizontal_length))
            .collect();
        assert_eq!(
            summary,
            vec![
                (rat(-1, 1), 2),
                (rat(0, 1), 1),
                (rat(1, 3), 3),
            ]
        );
        assert_eq!(polygon.x_divisibility, 1);
        assert_eq!(polygon.zero_series_multiplicity, 1);
        assert_eq!(positive_valuation_count(&f).unwrap(), 3);
    }

    #[test]
    fn positive_branches_of_mixed_slope_curve() {
        let f = mixed_slope_curve();
        let branches = expand_branches(&f, 8, BranchFamily::PositiveValuation).unwrap();
        // zero series (mult 1) and the double branch x - x^2
        assert_eq!(branches.len(), 2);
        let zero = branches
            .iter()
            .find(|b| b.series.is_exact_zero())
            .expect("zero series branch");
        assert_eq!((zero.multiplicity, zero.conjugates), (1, 1));
        let double = branches
            .iter()
            .find(|b| !b.series.is_exact_zero())
            .unwrap();
        assert_eq!((double.multiplicity, double.conjugates), (2, 1));
        let expected = PuiseuxSeries::from_unipoly(
            &(&UniPoly::monomial(1, c(1)) - &UniPoly::monomial(2, c(1))),
        );
        assert!(double.series.equals(&expected));
        assert_eq!(double.series.cutoff(), Cutoff::Exact);
        // counted with multiplicity, they match the closed-form count
        let total: u32 = branches
            .iter()
            .map(|b| b.multiplicity * b.conjugates)
            .sum();
        assert_eq!(total as u64, positive_valuation_count(&f).unwrap());
    }

    #[test]
    fn all_branches_of_mixed_slope_curve() {
        let f = mixed_slope_curve();
        let branches = expand_branches(&f, 6, BranchFamily::All).unwrap();
        let total: u64 = branches
            .iter()
            .map(|b| (b.multiplicity * b.conjugates) as u64)
            .sum();
        assert_eq!(total, f.degree_y().unwrap());
        // the valuation-zero branch is exactly 1 - x
        let val0 = branches
            .iter()
            .find(|b| {
                b.series
                    .leading()
                    .map(|(e, _)| e == rat(0, 1))
                    .unwrap_or(false)
            })
            .expect("valuation-zero branch");
        let expected = PuiseuxSeries::from_unipoly(
            &(&UniPoly::constant(c(1)) - &UniPoly::monomial(1, c(1))),
        );
        assert!(val0.series.equals(&expected));
        // three branches of valuation -1/3: a rational one and a conjugate pair
        let neg: Vec<&Branch> = branches
            .iter()
            .filter(|b| {
                b.series
                    .leading()
                    .map(|(e, _)| e == rat(-1, 3))
                    .unwrap_or(false)
            })
            .collect();
        let neg_total: u32 = neg.iter().map(|b| b.conjugates).sum();
        assert_eq!(neg_total, 3);
        assert!(neg.iter().any(|b| b.conjugates == 2));
    }

    #[test]
    fn ramified_branches_terminate_exactly() {
        // y^2 - x^3: two exact branches +-x^(3/2)
        let f = bp(&[(1, 0, 2), (-1, 3, 0)]);
        let branches = expand_branches(&f, 5, BranchFamily::PositiveValuation).unwrap();
        assert_eq!(branches.len(), 2);
        let mut leads = Vec::new();
        for b in &branches {
            assert_eq!(b.series.cutoff(), Cutoff::Exact);
            let (e, lead) = b.series.leading().unwrap();
            assert_eq!(e, rat(3, 2));
            leads.push(lead.try_rat().unwrap());
            assert!(eval_poly(&f, &b.series).is_exact_zero());
        }
        leads.sort();
        assert_eq!(leads, vec![rat(-1, 1), rat(1, 1)]);
    }

    #[test]
    fn reducible_edge_polynomial_splits_lazily() {
        // (y^2 - 2x^2)(y^2 - 3x^2 - x^3): the edge polynomial is
        // (c^2-2)(c^2-3), adjoined unfactored; the very next coefficient
        // valuation is ambiguous, which forces a split into the two quadratic
        // towers. One family terminates exactly, the other continues.
        let f = &bp(&[(1, 0, 2), (-2, 2, 0)]) * &bp(&[(1, 0, 2), (-3, 2, 0), (-1, 3, 0)]);
        let branches = expand_branches(&f, 6, BranchFamily::PositiveValuation).unwrap();
        assert_eq!(branches.len(), 2);
        let total: u32 = branches.iter().map(|b| b.multiplicity * b.conjugates).sum();
        assert_eq!(total, 4);
        let exact = branches
            .iter()
            .find(|b| b.series.cutoff() == Cutoff::Exact)
            .expect("exact family");
        let truncated = branches
            .iter()
            .find(|b| b.series.cutoff() != Cutoff::Exact)
            .expect("continued family");
        assert_eq!(exact.conjugates, 2);
        assert_eq!(truncated.conjugates, 2);
        // exact family: y = a x with a^2 = 2
        let (e, lead) = exact.series.leading().unwrap();
        assert_eq!(e, rat(1, 1));
        assert_eq!((lead * lead).try_rat(), Some(rat(2, 1)));
        assert!(eval_poly(&f, &exact.series).is_exact_zero());
        // continued family: y = b x sqrt(1 + x/3) = b x + (b/6) x^2 + ...
        let (e, lead) = truncated.series.leading().unwrap();
        assert_eq!(e, rat(1, 1));
        assert_eq!((lead * lead).try_rat(), Some(rat(3, 1)));
        let terms: Vec<(Rat, Elem)> = truncated
            .series
            .terms()
            .map(|(e, c)| (e, c.clone()))
            .collect();
        assert_eq!(terms[1].0, rat(2, 1));
        assert!(terms[1].1.equals(&lead.scale(&rat(1, 6))));
        // requested order is certified
        match truncated.series.cutoff() {
            Cutoff::At(cut) => {
                assert!(truncated.series.cutoff_exponent().unwrap() >= rat(6, 1), "cutoff {cut}")
            }
            Cutoff::Exact => {}
        }
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        assert!(matches!(
            expand_branches(&BiPoly::zero(), 5, BranchFamily::All),
            Err(Error::ZeroPolynomial)
        ));
        let f = bp(&[(1, 0, 2), (-1, 3, 0)]);
        assert!(expand_branches(&f, 0, BranchFamily::All).is_err());
        // no y: no branches
        let g = bp(&[(1, 2, 0)]);
        assert_eq!(
            expand_branches(&g, 5, BranchFamily::All).unwrap().len(),
            0
        );
    }

    #[test]
    fn zero_valuation_count_examples() {
        // y - x: one positive branch
        assert_eq!(positive_valuation_count(&bp(&[(1, 0, 1), (-1, 1, 0)])).unwrap(), 1);
        // y^2 - x^3: two
        assert_eq!(positive_valuation_count(&bp(&[(1, 0, 2), (-1, 3, 0)])).unwrap(), 2);
        // x alone: none
        assert_eq!(positive_valuation_count(&bp(&[(1, 1, 0)])).unwrap(), 0);
        // pure content x shifts nothing: x*(y - x) still has one
        assert_eq!(
            positive_valuation_count(&bp(&[(1, 1, 1), (-1, 2, 0)])).unwrap(),
            1
        );
    }

    #[test]
    fn branch_values_satisfy_curve_to_cutoff() {
        // y^3 - 3xy - x^2 has branches whose residuals vanish to the cutoff
        let f = bp(&[(1, 0, 3), (-3, 1, 1), (-1, 2, 0)]);
        let branches = expand_branches(&f, 7, BranchFamily::PositiveValuation).unwrap();
        assert!(!branches.is_empty());
        for b in &branches {
            let residual = eval_poly(&f, &b.series);
            let v = residual.val();
            if !v.exact {
                continue; // vanishes up to truncation
            }
            match v.value {
                ExtRat::Infinite => {}
                ExtRat::Finite(e) => {
                    panic!("branch residual has certified nonzero term at {e}")
                }
            }
        }
    }
}
