//! Puiseux series: finite fractional-exponent expansions with a truncation
//! cutoff.
//!
//! A series with ramification index `e` stores terms keyed by `exponent * e`
//! (integers, possibly negative) and a [`Cutoff`]: either `Exact`, meaning
//! every nonzero term is present, or `At(c)`, meaning terms with scaled
//! exponent below `c` are all present and nothing is known from `c` on.
//! Operations propagate the tightest sound cutoff. A series with no stored
//! terms is canonically zero when exact, and "zero up to the cutoff"
//! otherwise; [`PuiseuxSeries::val`] reports which.
//!
//! The ramification index is kept minimal for the stored support; truncated
//! series without terms keep their context's index, since any index describes
//! the empty support.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::poly::{BiPoly, UniPoly};
use crate::tower::{rat, Elem, Rat, Tower};

/// Valuation value: a rational or +infinity (for the zero series).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExtRat {
    Finite(Rat),
    Infinite,
}

impl PartialOrd for ExtRat {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtRat {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ExtRat::Infinite, ExtRat::Infinite) => Ordering::Equal,
            (ExtRat::Infinite, _) => Ordering::Greater,
            (_, ExtRat::Infinite) => Ordering::Less,
            (ExtRat::Finite(a), ExtRat::Finite(b)) => a.cmp(b),
        }
    }
}

impl fmt::Display for ExtRat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtRat::Infinite => write!(f, "inf"),
            ExtRat::Finite(r) => write!(f, "{}", crate::tower::format_rat(r)),
        }
    }
}

impl ExtRat {
    pub fn finite(&self) -> Option<&Rat> {
        match self {
            ExtRat::Finite(r) => Some(r),
            ExtRat::Infinite => None,
        }
    }

    pub fn is_positive(&self) -> bool {
        match self {
            ExtRat::Infinite => true,
            ExtRat::Finite(r) => r.is_positive(),
        }
    }
}

/// Truncation state of a series.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cutoff {
    /// All nonzero terms are stored.
    Exact,
    /// Terms with scaled exponent below this bound are stored; higher ones
    /// are unknown.
    At(i64),
}

/// A valuation together with its certification status: `exact` is false when
/// the reported value is only the truncation bound (the series might vanish
/// to higher order than stored).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruncatedValue {
    pub value: ExtRat,
    pub exact: bool,
}

/// Fractional-power series over a tower.
#[derive(Clone, Debug)]
pub struct PuiseuxSeries {
    ram: u64,
    terms: BTreeMap<i64, Elem>,
    cutoff: Cutoff,
}

impl PuiseuxSeries {
    /// The canonical zero series.
    pub fn zero() -> PuiseuxSeries {
        PuiseuxSeries {
            ram: 1,
            terms: BTreeMap::new(),
            cutoff: Cutoff::Exact,
        }
    }

    /// Zero up to the given integer-exponent bound.
    pub fn zero_truncated(order: i64) -> PuiseuxSeries {
        PuiseuxSeries {
            ram: 1,
            terms: BTreeMap::new(),
            cutoff: Cutoff::At(order),
        }
    }

    /// Exact monomial c * x^(num/den).
    pub fn monomial(c: Elem, num: i64, den: u64) -> PuiseuxSeries {
        assert!(den > 0, "ramification index must be positive");
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(num, c);
        }
        PuiseuxSeries {
            ram: den,
            terms,
            cutoff: Cutoff::Exact,
        }
        .canonical()
    }

    pub fn x() -> PuiseuxSeries {
        PuiseuxSeries::monomial(Tower::rationals().one(), 1, 1)
    }

    /// Exact series from a polynomial in x.
    pub fn from_unipoly(p: &UniPoly) -> PuiseuxSeries {
        let mut terms = BTreeMap::new();
        for (e, c) in p.terms() {
            terms.insert(*e as i64, c.clone());
        }
        PuiseuxSeries {
            ram: 1,
            terms,
            cutoff: Cutoff::Exact,
        }
    }

    /// Build from scaled parts; used by expansion code.
    pub fn from_parts(ram: u64, terms: BTreeMap<i64, Elem>, cutoff: Cutoff) -> PuiseuxSeries {
        assert!(ram > 0);
        let mut s = PuiseuxSeries { ram, terms, cutoff };
        s.terms.retain(|_, c| !c.is_zero());
        if let Cutoff::At(c) = s.cutoff {
            s.terms.retain(|k, _| *k < c);
        }
        s.canonical()
    }

    pub fn ram(&self) -> u64 {
        self.ram
    }

    pub fn cutoff(&self) -> Cutoff {
        self.cutoff
    }

    /// Cutoff as an exponent, if truncated.
    pub fn cutoff_exponent(&self) -> Option<Rat> {
        match self.cutoff {
            Cutoff::Exact => None,
            Cutoff::At(c) => Some(rat(c, self.ram as i64)),
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (Rat, &Elem)> {
        let ram = self.ram as i64;
        self.terms.iter().map(move |(k, c)| (rat(*k, ram), c))
    }

    pub fn scaled_terms(&self) -> impl Iterator<Item = (&i64, &Elem)> {
        self.terms.iter()
    }

    pub fn is_exact_zero(&self) -> bool {
        self.terms.is_empty() && self.cutoff == Cutoff::Exact
    }

    pub fn leading(&self) -> Option<(Rat, &Elem)> {
        self.terms
            .iter()
            .next()
            .map(|(k, c)| (rat(*k, self.ram as i64), c))
    }

    /// Valuation with certification status. For a truncated series with no
    /// stored terms the reported value is the cutoff, flagged inexact.
    pub fn val(&self) -> TruncatedValue {
        match self.terms.keys().next() {
            Some(k) => TruncatedValue {
                value: ExtRat::Finite(rat(*k, self.ram as i64)),
                exact: true,
            },
            None => match self.cutoff {
                Cutoff::Exact => TruncatedValue {
                    value: ExtRat::Infinite,
                    exact: true,
                },
                Cutoff::At(c) => TruncatedValue {
                    value: ExtRat::Finite(rat(c, self.ram as i64)),
                    exact: false,
                },
            },
        }
    }

    /// Minimal ramification for the stored support. Series without terms keep
    /// their index (any index describes the empty support).
    fn canonical(mut self) -> PuiseuxSeries {
        if self.terms.is_empty() {
            return self;
        }
        let mut g = self.ram;
        for k in self.terms.keys() {
            g = g.gcd(&(k.unsigned_abs()));
            if g == 1 {
                return self;
            }
        }
        if g <= 1 {
            return self;
        }
        let gi = g as i64;
        self.terms = self
            .terms
            .into_iter()
            .map(|(k, c)| (k / gi, c))
            .collect();
        self.ram /= g;
        if let Cutoff::At(c) = self.cutoff {
            self.cutoff = Cutoff::At(c.div_euclid(gi));
        }
        self
    }

    /// Rescale to a compatible ramification index (a multiple of the current).
    fn with_ram(&self, target: u64) -> PuiseuxSeries {
        assert!(target % self.ram == 0);
        let f = (target / self.ram) as i64;
        PuiseuxSeries {
            ram: target,
            terms: self.terms.iter().map(|(k, c)| (k * f, c.clone())).collect(),
            cutoff: match self.cutoff {
                Cutoff::Exact => Cutoff::Exact,
                Cutoff::At(c) => Cutoff::At(c * f),
            },
        }
    }

    pub fn add(&self, other: &PuiseuxSeries) -> PuiseuxSeries {
        let ram = self.ram.lcm(&other.ram);
        let a = self.with_ram(ram);
        let b = other.with_ram(ram);
        let cutoff = match (a.cutoff, b.cutoff) {
            (Cutoff::Exact, Cutoff::Exact) => Cutoff::Exact,
            (Cutoff::At(c), Cutoff::Exact) | (Cutoff::Exact, Cutoff::At(c)) => Cutoff::At(c),
            (Cutoff::At(c), Cutoff::At(d)) => Cutoff::At(c.min(d)),
        };
        let mut terms = a.terms;
        for (k, c) in b.terms {
            match terms.entry(k) {
                std::collections::btree_map::Entry::Vacant(e) => {
                    e.insert(c);
                }
                std::collections::btree_map::Entry::Occupied(mut e) => {
                    let sum = e.get() + &c;
                    if sum.is_zero() {
                        e.remove();
                    } else {
                        *e.get_mut() = sum;
                    }
                }
            }
        }
        PuiseuxSeries::from_parts(ram, terms, cutoff)
    }

    pub fn neg(&self) -> PuiseuxSeries {
        PuiseuxSeries {
            ram: self.ram,
            terms: self.terms.iter().map(|(k, c)| (*k, -c)).collect(),
            cutoff: self.cutoff,
        }
    }

    pub fn sub(&self, other: &PuiseuxSeries) -> PuiseuxSeries {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &Elem) -> PuiseuxSeries {
        if c.is_zero() {
            // scaling by zero erases the terms but cannot improve knowledge
            // beyond the cutoff
            return PuiseuxSeries {
                ram: self.ram,
                terms: BTreeMap::new(),
                cutoff: self.cutoff,
            };
        }
        PuiseuxSeries::from_parts(
            self.ram,
            self.terms.iter().map(|(k, v)| (*k, v * c)).collect(),
            self.cutoff,
        )
    }

    /// Multiply; the product cutoff is `min(val(a) + cut(b), val(b) + cut(a))`
    /// where an exact factor contributes no truncation.
    pub fn mul(&self, other: &PuiseuxSeries) -> PuiseuxSeries {
        let ram = self.ram.lcm(&other.ram);
        let a = self.with_ram(ram);
        let b = other.with_ram(ram);
        let bound = |s: &PuiseuxSeries, o: &PuiseuxSeries| -> Option<i64> {
            match o.cutoff {
                Cutoff::Exact => None,
                Cutoff::At(c) => {
                    // o unknown from c on; products with s start at val(s)
                    let v = s.terms.keys().next().copied().or(match s.cutoff {
                        Cutoff::Exact => None, // s is exactly zero
                        Cutoff::At(cs) => Some(cs),
                    })?;
                    Some(v + c)
                }
            }
        };
        let cutoff = match (bound(&a, &b), bound(&b, &a)) {
            (None, None) => Cutoff::Exact,
            (Some(c), None) | (None, Some(c)) => Cutoff::At(c),
            (Some(c), Some(d)) => Cutoff::At(c.min(d)),
        };
        // exact zero factor annihilates
        if (a.terms.is_empty() && a.cutoff == Cutoff::Exact)
            || (b.terms.is_empty() && b.cutoff == Cutoff::Exact)
        {
            return PuiseuxSeries::zero();
        }
        let mut terms: BTreeMap<i64, Elem> = BTreeMap::new();
        for (ka, ca) in &a.terms {
            for (kb, cb) in &b.terms {
                let k = ka.checked_add(*kb).expect("series exponent overflow");
                let prod = ca * cb;
                match terms.entry(k) {
                    std::collections::btree_map::Entry::Vacant(e) => {
                        e.insert(prod);
                    }
                    std::collections::btree_map::Entry::Occupied(mut e) => {
                        let sum = e.get() + &prod;
                        if sum.is_zero() {
                            e.remove();
                        } else {
                            *e.get_mut() = sum;
                        }
                    }
                }
            }
        }
        PuiseuxSeries::from_parts(ram, terms, cutoff)
    }

    pub fn pow(&self, e: u64) -> PuiseuxSeries {
        let mut acc = PuiseuxSeries::monomial(Tower::rationals().one(), 0, 1);
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    /// Formal derivative d/dx.
    pub fn derivative(&self) -> PuiseuxSeries {
        let ram = self.ram as i64;
        let terms: BTreeMap<i64, Elem> = self
            .terms
            .iter()
            .filter(|(k, _)| **k != 0)
            .map(|(k, c)| (k - ram, c.scale(&rat(*k, ram))))
            .collect();
        let cutoff = match self.cutoff {
            Cutoff::Exact => Cutoff::Exact,
            Cutoff::At(c) => Cutoff::At(c - ram),
        };
        PuiseuxSeries::from_parts(self.ram, terms, cutoff)
    }

    pub fn derivative_n(&self, n: u32) -> PuiseuxSeries {
        let mut cur = self.clone();
        for _ in 0..n {
            cur = cur.derivative();
        }
        cur
    }

    /// Substitute x -> x^(1/q): every exponent is divided by q.
    pub fn stretch(&self, q: u64) -> PuiseuxSeries {
        assert!(q > 0);
        PuiseuxSeries {
            ram: self.ram.checked_mul(q).expect("ramification overflow"),
            terms: self.terms.clone(),
            cutoff: self.cutoff,
        }
        .canonical()
    }

    /// Tighten the cutoff to the given integer exponent bound.
    pub fn truncate_to(&self, order: i64) -> PuiseuxSeries {
        let scaled = order.checked_mul(self.ram as i64).expect("order overflow");
        let cutoff = match self.cutoff {
            Cutoff::Exact => Cutoff::At(scaled),
            Cutoff::At(c) => Cutoff::At(c.min(scaled)),
        };
        PuiseuxSeries::from_parts(self.ram, self.terms.clone(), cutoff)
    }

    /// Re-reduce all coefficients in a refined tower.
    pub fn migrate(&self, tower: &Tower) -> PuiseuxSeries {
        PuiseuxSeries::from_parts(
            self.ram,
            self.terms
                .iter()
                .map(|(k, c)| (*k, c.migrate(tower)))
                .collect(),
            self.cutoff,
        )
    }

    pub fn equals(&self, other: &PuiseuxSeries) -> bool {
        let a = self;
        let b = other;
        if a.cutoff != b.cutoff && {
            let ram = a.ram.lcm(&b.ram);
            a.with_ram(ram).cutoff != b.with_ram(ram).cutoff
        } {
            return false;
        }
        self.sub(other).terms.is_empty()
    }
}

impl fmt::Display for PuiseuxSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, c) in &self.terms {
            let e = rat(*k, self.ram as i64);
            let (neg, body) = coeff_body(c);
            if first {
                if neg {
                    write!(f, "-")?;
                }
                first = false;
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let mut parts: Vec<String> = Vec::new();
            if !body.is_empty() || e.is_zero() {
                parts.push(if body.is_empty() { "1".into() } else { body });
            }
            if !e.is_zero() {
                if e.is_one() {
                    parts.push("x".into());
                } else if e.denom().is_one() {
                    parts.push(format!("x^{}", e.numer()));
                } else {
                    parts.push(format!("x^({}/{})", e.numer(), e.denom()));
                }
            }
            write!(f, "{}", parts.join("*"))?;
        }
        match self.cutoff {
            Cutoff::Exact => {
                if first {
                    write!(f, "0")?;
                }
            }
            Cutoff::At(c) => {
                let e = rat(c, self.ram as i64);
                if !first {
                    write!(f, " + ")?;
                }
                if e.denom().is_one() {
                    write!(f, "O(x^{})", e.numer())?;
                } else {
                    write!(f, "O(x^({}/{}))", e.numer(), e.denom())?;
                }
            }
        }
        Ok(())
    }
}

fn coeff_body(c: &Elem) -> (bool, String) {
    if let Some(r) = c.try_rat() {
        let neg = r.is_negative();
        let abs = r.abs();
        if abs.is_one() {
            (neg, String::new())
        } else {
            (neg, crate::tower::format_rat(&abs))
        }
    } else {
        (false, format!("({c})"))
    }
}

/// Evaluate a bivariate polynomial on a series: F(x, S(x)), by Horner in y.
pub fn eval_poly(f: &BiPoly, s: &PuiseuxSeries) -> PuiseuxSeries {
    let coeffs = f.coeffs_y();
    let mut acc = PuiseuxSeries::zero();
    let mut prev: Option<u64> = None;
    for (ey, cx) in coeffs.iter().rev() {
        if let Some(p) = prev {
            acc = acc.mul(&s.pow(p - ey));
        }
        acc = acc.add(&PuiseuxSeries::from_unipoly(cx));
        prev = Some(*ey);
    }
    if let Some(p) = prev {
        acc = acc.mul(&s.pow(p));
    }
    acc
}

/// Wronskian determinant of n series: rows are the 0th..(n-1)th derivatives.
/// Computed by cofactor expansion; fine for the small n used here.
pub fn wronskian(series: &[PuiseuxSeries]) -> PuiseuxSeries {
    let n = series.len();
    if n == 0 {
        return PuiseuxSeries::monomial(Tower::rationals().one(), 0, 1);
    }
    // rows[i][j] = j-th derivative of series i
    let mut rows: Vec<Vec<PuiseuxSeries>> = Vec::with_capacity(n);
    for s in series {
        let mut row = Vec::with_capacity(n);
        let mut cur = s.clone();
        for j in 0..n {
            if j > 0 {
                cur = cur.derivative();
            }
            row.push(cur.clone());
        }
        rows.push(row);
    }
    det_series(&rows)
}

fn det_series(m: &[Vec<PuiseuxSeries>]) -> PuiseuxSeries {
    let n = m.len();
    if n == 1 {
        return m[0][0].clone();
    }
    let mut acc = PuiseuxSeries::zero();
    for i in 0..n {
        // expand along the first column
        let minor: Vec<Vec<PuiseuxSeries>> = m
            .iter()
            .enumerate()
            .filter(|(r, _)| *r != i)
            .map(|(_, row)| row[1..].to_vec())
            .collect();
        let term = m[i][0].mul(&det_series(&minor));
        acc = if i % 2 == 0 {
            acc.add(&term)
        } else {
            acc.sub(&term)
        };
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tower::rat as r;

    fn c(n: i64) -> Elem {
        Tower::rationals().rat_elem(r(n, 1))
    }

    fn poly(terms: &[(i64, u64, u64)]) -> BiPoly {
        let mut p = BiPoly::zero();
        for (co, ex, ey) in terms {
            p = &p + &BiPoly::monomial(*ex, *ey, c(*co));
        }
        p
    }

    #[test]
    fn eval_polynomial_on_polynomial_series() {
        // F = x^6 - y^3 on S = x^2 + x^5 gives -3x^9 - 3x^12 - x^15, exactly.
        let f = poly(&[(1, 6, 0), (-1, 0, 3)]);
        let s = PuiseuxSeries::from_unipoly(
            &(&UniPoly::monomial(2, c(1)) + &UniPoly::monomial(5, c(1))),
        );
        let out = eval_poly(&f, &s);
        assert_eq!(out.cutoff(), Cutoff::Exact);
        let expected = PuiseuxSeries::from_unipoly(
            &(&(&UniPoly::monomial(9, c(-3)) + &UniPoly::monomial(12, c(-3)))
                + &UniPoly::monomial(15, c(-1))),
        );
        assert!(out.equals(&expected));
    }

    #[test]
    fn eval_on_fractional_series_can_vanish_exactly() {
        // y^2 - x^3 vanishes on S = x^(3/2)
        let f = poly(&[(1, 0, 2), (-1, 3, 0)]);
        let s = PuiseuxSeries::monomial(c(1), 3, 2);
        let out = eval_poly(&f, &s);
        assert!(out.is_exact_zero());
        let v = out.val();
        assert_eq!(v.value, ExtRat::Infinite);
        assert!(v.exact);
    }

    #[test]
    fn truncation_propagates_through_products() {
        // S = x + O(x^3); S^2 = x^2 + O(x^4)
        let mut terms = BTreeMap::new();
        terms.insert(1i64, c(1));
        let s = PuiseuxSeries::from_parts(1, terms, Cutoff::At(3));
        let sq = s.mul(&s);
        assert_eq!(sq.cutoff(), Cutoff::At(4));
        let v = sq.val();
        assert_eq!(v.value, ExtRat::Finite(r(2, 1)));
        assert!(v.exact);
    }

    #[test]
    fn zero_up_to_truncation_is_flagged_inexact() {
        let s = PuiseuxSeries::zero_truncated(5);
        let v = s.val();
        assert_eq!(v.value, ExtRat::Finite(r(5, 1)));
        assert!(!v.exact);
        assert!(!s.is_exact_zero());
    }

    #[test]
    fn derivative_of_fractional_power() {
        // d/dx x^(3/2) = 3/2 x^(1/2)
        let s = PuiseuxSeries::monomial(c(1), 3, 2);
        let d = s.derivative();
        let (e, lead) = d.leading().unwrap();
        assert_eq!(e, r(1, 2));
        assert_eq!(lead.try_rat(), Some(r(3, 2)));
    }

    #[test]
    fn ramification_index_is_minimized() {
        let mut terms = BTreeMap::new();
        terms.insert(2i64, c(1));
        terms.insert(4i64, c(5));
        let s = PuiseuxSeries::from_parts(2, terms, Cutoff::Exact);
        assert_eq!(s.ram(), 1);
        let exps: Vec<Rat> = s.terms().map(|(e, _)| e).collect();
        assert_eq!(exps, vec![r(1, 1), r(2, 1)]);
    }

    #[test]
    fn wronskian_of_two_monomials() {
        // W(x^a, x^b) = (b - a) x^(a+b-1)
        for (a, b) in [(1i64, 3i64), (2, 7), (0, 5)] {
            let sa = PuiseuxSeries::monomial(c(1), a, 1);
            let sb = PuiseuxSeries::monomial(c(1), b, 1);
            let w = wronskian(&[sa, sb]);
            let (e, lead) = w.leading().unwrap();
            assert_eq!(e, r(a + b - 1, 1));
            assert_eq!(lead.try_rat(), Some(r(b - a, 1)));
            assert_eq!(w.scaled_terms().count(), 1);
        }
    }

    #[test]
    fn wronskian_derivative_shifts_cutoff() {
        // a truncated series loses one order per derivative
        let mut terms = BTreeMap::new();
        terms.insert(2i64, c(3));
        let s = PuiseuxSeries::from_parts(1, terms, Cutoff::At(6));
        let d2 = s.derivative_n(2);
        assert_eq!(d2.cutoff(), Cutoff::At(4));
        let (e, lead) = d2.leading().unwrap();
        assert_eq!(e, r(0, 1));
        assert_eq!(lead.try_rat(), Some(r(6, 1)));
    }

    #[test]
    fn display_shows_truncation() {
        let mut terms = BTreeMap::new();
        terms.insert(3i64, c(3));
        let s = PuiseuxSeries::from_parts(2, terms, Cutoff::At(7));
        assert_eq!(format!("{s}"), "3*x^(3/2) + O(x^(7/2))");
        assert_eq!(format!("{}", PuiseuxSeries::zero()), "0");
    }
}
