//! Derivative identities of algebraic functions and root-counting lemmas
//! for sparse polynomials.
//!
//! The centerpiece is a family of integer-coefficient polynomials that
//! express the k-th derivative of an algebraic function S, implicitly
//! defined by F(x, S(x)) = 0, through the mixed partials of F along the
//! graph: S^(k) (F_y(x,S))^(2k-1) is a universal polynomial in the values
//! (d^{p+q}F / dx^p dy^q)(x, S). These polynomials are produced by running
//! their defining recurrences symbolically, never from a closed form, and
//! the same goes for the integer constants in the expansion of d^k(S^n).
//!
//! Representation notes: a monomial in the derivative symbols is a sorted
//! map from the index pair (p, q) to its exponent, and a polynomial maps
//! monomials to integer coefficients. The recurrences run over rational
//! coefficients internally and are cleared to an integer numerator with an
//! explicit common denominator on output. Partition shapes s with
//! sum i * s_i = k are stored as trimmed multiplicity vectors indexed
//! from 1.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::{Mutex, OnceLock};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{CalcError, Error};
use crate::imult::{one_sided_sum, Point, SumOutcome};
use crate::newton::Branch;
use crate::poly::{gcd_bivariate, BiPoly, UniPoly};
use crate::series::{eval_poly, PuiseuxSeries};
use crate::tower::{Class, Elem, Rat, Tower};

/// A finitely supported sequence (s_1, s_2, ...) of naturals, the shape of
/// one term in the expansion of d^k(S^n): the factor (S^(l))^{s_l} appears
/// for every l, and the weight sum l * s_l equals k.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct SeqPartition {
    parts: Vec<u32>,
}

impl SeqPartition {
    /// Builds a shape from multiplicities `parts[i] = s_{i+1}`, dropping
    /// trailing zeros.
    pub fn new(mut parts: Vec<u32>) -> SeqPartition {
        while parts.last() == Some(&0) {
            parts.pop();
        }
        SeqPartition { parts }
    }

    /// The empty shape (weight 0, the single element of S_0).
    pub fn empty() -> SeqPartition {
        SeqPartition { parts: Vec::new() }
    }

    /// Multiplicities, indexed from 1: `parts()[i]` is s_{i+1}.
    pub fn parts(&self) -> &[u32] {
        &self.parts
    }

    /// The weight k = sum of i * s_i.
    pub fn weight(&self) -> u64 {
        self.parts
            .iter()
            .enumerate()
            .map(|(ix, &m)| (ix as u64 + 1) * m as u64)
            .sum()
    }

    /// The size |s| = sum of s_i, the total number of derivative factors.
    pub fn size(&self) -> u64 {
        self.parts.iter().map(|&m| m as u64).sum()
    }

    /// All shapes of a given weight, in sorted order.
    pub fn of_weight(k: u32) -> Vec<SeqPartition> {
        fn rec(remaining: u32, max_part: u32, chosen: &mut Vec<u32>, out: &mut Vec<SeqPartition>) {
            if remaining == 0 {
                let top = chosen.iter().copied().max().unwrap_or(0) as usize;
                let mut counts = vec![0u32; top];
                for &part in chosen.iter() {
                    counts[part as usize - 1] += 1;
                }
                out.push(SeqPartition::new(counts));
                return;
            }
            for part in 1..=max_part.min(remaining) {
                chosen.push(part);
                rec(remaining - part, part, chosen, out);
                chosen.pop();
            }
        }
        let mut out = Vec::new();
        rec(k, k.max(1), &mut Vec::new(), &mut out);
        out.sort();
        out
    }
}

impl fmt::Display for SeqPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (ix, m) in self.parts.iter().enumerate() {
            if ix > 0 {
                write!(f, ",")?;
            }
            write!(f, "{m}")?;
        }
        write!(f, ")")
    }
}

/// Coefficient table of d^k(S^n) = sum over shapes s of weight k of
/// xi * S^{n-|s|} * prod (S^(l))^{s_l}, built by applying the product rule
/// k times. Differentiating a term either pulls down the outer exponent
/// (factor n - |s|, raising s_1) or promotes one factor S^(l) to S^(l+1)
/// (factor s_l). Shapes with |s| > n never acquire a nonzero coefficient
/// because the outer factor dies at |s| = n.
fn xi_table(n: u64, k: u32) -> BTreeMap<SeqPartition, BigInt> {
    let mut table: BTreeMap<SeqPartition, BigInt> = BTreeMap::new();
    table.insert(SeqPartition::empty(), BigInt::one());
    for _ in 0..k {
        let mut next: BTreeMap<SeqPartition, BigInt> = BTreeMap::new();
        for (shape, coeff) in &table {
            let remaining = BigInt::from(n) - BigInt::from(shape.size());
            if !remaining.is_zero() {
                let mut parts = shape.parts().to_vec();
                if parts.is_empty() {
                    parts.push(0);
                }
                parts[0] += 1;
                *next.entry(SeqPartition::new(parts)).or_default() += coeff * remaining;
            }
            for (ix, &mult) in shape.parts().iter().enumerate() {
                if mult == 0 {
                    continue;
                }
                let mut parts = shape.parts().to_vec();
                parts[ix] -= 1;
                if parts.len() < ix + 2 {
                    parts.resize(ix + 2, 0);
                }
                parts[ix + 1] += 1;
                *next.entry(SeqPartition::new(parts)).or_default() +=
                    coeff * BigInt::from(mult);
            }
        }
        next.retain(|_, v| !v.is_zero());
        table = next;
    }
    table
}

/// The integer constant attached to one shape in the expansion of
/// d^k(S^n), where k is the shape's weight.
pub fn xi_constant(n: u64, shape: &SeqPartition) -> BigInt {
    let k = u32::try_from(shape.weight()).expect("shape weight fits in u32");
    xi_table(n, k).remove(shape).unwrap_or_else(BigInt::zero)
}

/// The k-th derivative of S^n computed along two routes.
#[derive(Clone, Debug)]
pub struct PowerDerivative {
    /// Repeated differentiation of the expanded power.
    pub direct: PuiseuxSeries,
    /// The structured sum over shapes of weight k.
    pub structured: PuiseuxSeries,
    /// The shapes with nonzero coefficient and their constants.
    pub contributions: Vec<(SeqPartition, BigInt)>,
}

/// Computes d^k(S^n) directly and as the structured sum over shapes.
/// The input must not be the zero series, and its truncation must leave at
/// least one certified coefficient after k derivatives.
pub fn derivative_of_power(
    s: &PuiseuxSeries,
    n: u64,
    k: u32,
) -> Result<PowerDerivative, Error> {
    if s.is_exact_zero() {
        return Err(Error::ZeroPolynomial);
    }
    let direct = s.pow(n).derivative_n(k);
    let mut ders = Vec::with_capacity(k as usize + 1);
    ders.push(s.clone());
    for _ in 0..k {
        ders.push(ders.last().unwrap().derivative());
    }
    let mut structured = PuiseuxSeries::zero();
    let mut contributions = Vec::new();
    for (shape, xi) in xi_table(n, k) {
        debug_assert!(shape.size() <= n);
        let mut term = s.pow(n - shape.size());
        for (ix, &mult) in shape.parts().iter().enumerate() {
            if mult > 0 {
                term = term.mul(&ders[ix + 1].pow(mult as u64));
            }
        }
        let scale = Tower::rationals().rat_elem(Rat::from_integer(xi.clone()));
        structured = structured.add(&term.scale(&scale));
        contributions.push((shape, xi));
    }
    if !direct.val().exact || !structured.val().exact {
        return Err(Error::TruncationExhausted);
    }
    Ok(PowerDerivative {
        direct,
        structured,
        contributions,
    })
}

/// Variable index of a derivative symbol: the pair (p, q) stands for the
/// mixed partial d^{p+q}F / dx^p dy^q evaluated along the graph of a root.
pub type DerivPair = (u32, u32);

type Mono = BTreeMap<DerivPair, u32>;

/// Polynomial with integer coefficients in symbols indexed by derivative
/// pairs, kept in canonical form (no zero coefficients or exponents).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexedIntPoly {
    terms: BTreeMap<Mono, BigInt>,
}

impl IndexedIntPoly {
    pub fn zero() -> IndexedIntPoly {
        IndexedIntPoly {
            terms: BTreeMap::new(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Coefficient of the monomial with the given exponents (unlisted
    /// variables have exponent zero).
    pub fn coeff(&self, mono: &[(DerivPair, u32)]) -> BigInt {
        let key: Mono = mono.iter().filter(|(_, e)| *e > 0).copied().collect();
        self.terms.get(&key).cloned().unwrap_or_else(BigInt::zero)
    }

    pub fn total_degree(&self) -> u64 {
        self.terms
            .keys()
            .map(|m| m.values().map(|&e| e as u64).sum())
            .max()
            .unwrap_or(0)
    }

    /// The derivative pairs that actually occur.
    pub fn variables(&self) -> BTreeSet<DerivPair> {
        self.terms
            .keys()
            .flat_map(|m| m.keys().copied())
            .collect()
    }

    /// Evaluates the polynomial with a series substituted for every
    /// occurring variable.
    pub fn eval_series(
        &self,
        assign: &BTreeMap<DerivPair, PuiseuxSeries>,
    ) -> Result<PuiseuxSeries, Error> {
        let tower = assign
            .values()
            .flat_map(|s| s.scaled_terms().map(|(_, c)| c.tower()))
            .max_by_key(|t| t.depth())
            .cloned()
            .unwrap_or_else(Tower::rationals);
        let mut acc = PuiseuxSeries::zero();
        for (mono, coeff) in &self.terms {
            let c = tower.rat_elem(Rat::from_integer(coeff.clone()));
            let mut term = PuiseuxSeries::monomial(c, 0, 1);
            for (&(p, q), &e) in mono {
                let s = assign.get(&(p, q)).ok_or_else(|| {
                    Error::Domain(format!("no series assigned to derivative index ({p},{q})"))
                })?;
                term = term.mul(&s.pow(e as u64));
            }
            acc = acc.add(&term);
        }
        Ok(acc)
    }
}

impl fmt::Display for IndexedIntPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (ix, (mono, coeff)) in self.terms.iter().enumerate() {
            if ix == 0 {
                if coeff.is_negative() {
                    write!(f, "-")?;
                }
            } else if coeff.is_negative() {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let mag = coeff.abs();
            let mut lead = String::new();
            if !mag.is_one() || mono.is_empty() {
                lead = mag.to_string();
            }
            let factors: Vec<String> = mono
                .iter()
                .map(|(&(p, q), &e)| {
                    if e == 1 {
                        format!("x[{p},{q}]")
                    } else {
                        format!("x[{p},{q}]^{e}")
                    }
                })
                .collect();
            let mut parts = Vec::new();
            if !lead.is_empty() {
                parts.push(lead);
            }
            parts.extend(factors);
            write!(f, "{}", parts.join("*"))?;
        }
        Ok(())
    }
}

/// Working form of the recurrences: same monomials, rational coefficients.
#[derive(Clone, Debug, Default)]
struct RatPoly {
    terms: BTreeMap<Mono, Rat>,
}

impl RatPoly {
    fn zero() -> RatPoly {
        RatPoly::default()
    }

    fn var(ix: DerivPair) -> RatPoly {
        let mut mono = Mono::new();
        mono.insert(ix, 1);
        let mut terms = BTreeMap::new();
        terms.insert(mono, Rat::one());
        RatPoly { terms }
    }

    fn accumulate(&mut self, mono: Mono, coeff: Rat) {
        let slot = self.terms.entry(mono).or_insert_with(Rat::zero);
        *slot += coeff;
        if slot.is_zero() {
            let key = self
                .terms
                .iter()
                .find(|(_, v)| v.is_zero())
                .map(|(k, _)| k.clone());
            if let Some(k) = key {
                self.terms.remove(&k);
            }
        }
    }

    fn add(&self, other: &RatPoly) -> RatPoly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.accumulate(m.clone(), c.clone());
        }
        out
    }

    fn neg(&self) -> RatPoly {
        RatPoly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }

    fn scale(&self, c: &Rat) -> RatPoly {
        if c.is_zero() {
            return RatPoly::zero();
        }
        RatPoly {
            terms: self.terms.iter().map(|(m, v)| (m.clone(), v * c)).collect(),
        }
    }

    fn mul(&self, other: &RatPoly) -> RatPoly {
        let mut out = RatPoly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let mut mono = ma.clone();
                for (ix, e) in mb {
                    *mono.entry(*ix).or_insert(0) += e;
                }
                out.accumulate(mono, ca * cb);
            }
        }
        out
    }

    /// Integer numerator and the least common denominator of the
    /// coefficients.
    fn cleared(&self) -> (IndexedIntPoly, BigInt) {
        let den = self
            .terms
            .values()
            .fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
        let terms = self
            .terms
            .iter()
            .map(|(m, c)| (m.clone(), c.numer() * (&den / c.denom())))
            .collect();
        (IndexedIntPoly { terms }, den)
    }
}

/// Memoized outputs of the two recurrences, in the C-symbols (the variable
/// (p, q) stands for C_{p,q} before substitution).
#[derive(Default)]
struct RecurrenceCache {
    a: BTreeMap<u32, RatPoly>,
    b: BTreeMap<(u32, u32), RatPoly>,
}

static CACHE: OnceLock<Mutex<RecurrenceCache>> = OnceLock::new();

fn with_cache<T>(f: impl FnOnce(&mut RecurrenceCache) -> T) -> T {
    let m = CACHE.get_or_init(|| Mutex::new(RecurrenceCache::default()));
    let mut guard = m.lock().expect("recurrence cache lock");
    f(&mut guard)
}

fn binom_big(n: u64, k: u64) -> BigInt {
    num_integer::binomial(BigInt::from(n), BigInt::from(k))
}

// Derivation of the recurrences. Over the Puiseux field write
// F = (y - S(x)) G(x, y), possible exactly when S is a root of F.
// Differentiating the factorization p times in x and q times in y, and
// evaluating at y = S(x) (where the factor y - S vanishes), gives
//
//   (d^{p,q}F)(x,S) = q (d^{p,q-1}G)(x,S)
//                     - sum_{l=1}^{p} binom(p,l) S^(l) (d^{p-l,q}G)(x,S).
//
// With g = G(x, S) and the normalized quantities
//
//   A_p     = S^(p) g^{2p-1},
//   B_{p,q} = (d^{p,q}G)(x,S) g^{2p+q-1},
//   C_{p,q} = (d^{p,q}F)(x,S) g^{2p+q-2},
//
// the q = 0 case isolates A_p (the l = p term of the sum is A_p itself):
//
//   A_p = -C_{p,0} - sum_{l=1}^{p-1} binom(p,l) A_l B_{p-l,0},
//
// and taking q+1 derivatives in y isolates B_{p,q}:
//
//   B_{p,q} = (C_{p,q+1} + sum_{l=1}^{p} binom(p,l) A_l B_{p-l,q+1}) / (q+1).
//
// For a simple root g = F_y(x, S), so substituting
// C_{p,q} -> x[p,q] * x[0,1]^{2p+q-2} turns A_k into a polynomial identity
// for S^(k) (F_y(x,S))^{2k-1} in the partials of F alone.

fn a_poly(cache: &mut RecurrenceCache, p: u32) -> RatPoly {
    assert!(p >= 1);
    if let Some(r) = cache.a.get(&p) {
        return r.clone();
    }
    let mut acc = RatPoly::var((p, 0)).neg();
    for l in 1..p {
        let coeff = -Rat::from_integer(binom_big(p as u64, l as u64));
        let al = a_poly(cache, l);
        let bl = b_poly(cache, p - l, 0);
        acc = acc.add(&al.mul(&bl).scale(&coeff));
    }
    cache.a.insert(p, acc.clone());
    acc
}

fn b_poly(cache: &mut RecurrenceCache, p: u32, q: u32) -> RatPoly {
    assert!(p + q >= 1);
    if let Some(r) = cache.b.get(&(p, q)) {
        return r.clone();
    }
    let mut acc = RatPoly::var((p, q + 1));
    for l in 1..=p {
        let coeff = Rat::from_integer(binom_big(p as u64, l as u64));
        let al = a_poly(cache, l);
        let bl = b_poly(cache, p - l, q + 1);
        acc = acc.add(&al.mul(&bl).scale(&coeff));
    }
    let out = acc.scale(&Rat::new(BigInt::one(), BigInt::from(q + 1)));
    cache.b.insert((p, q), out.clone());
    out
}

/// Replaces each C-symbol by its expression in the partials of F:
/// the variable (p, q) becomes x[p,q] * x[0,1]^{2p+q-2}.
fn substitute_partials(c_poly: &RatPoly) -> RatPoly {
    let mut out = RatPoly::zero();
    for (mono, coeff) in &c_poly.terms {
        let mut image = Mono::new();
        let mut extra = 0u32;
        for (&(p, q), &e) in mono {
            debug_assert!(2 * p + q >= 2, "C-symbols need 2p + q >= 2");
            *image.entry((p, q)).or_insert(0) += e;
            extra += e * (2 * p + q - 2);
        }
        if extra > 0 {
            *image.entry((0, 1)).or_insert(0) += extra;
        }
        out.accumulate(image, coeff.clone());
    }
    out
}

/// The index pairs (p, q) with 1 <= p + q <= bound: the ambient variable
/// set of the root-derivative polynomial of order `bound`. It has
/// bound * (bound + 3) / 2 elements.
pub fn derivative_index_set(bound: u32) -> Vec<DerivPair> {
    let mut out = Vec::new();
    for total in 1..=bound {
        for p in (0..=total).rev() {
            out.push((p, total - p));
        }
    }
    out
}

/// The polynomial R_k with S^(k) (F_y(x,S))^{2k-1} = R_k(partials of F
/// along the graph of S), valid for every simple root S of F. Integer
/// coefficients and total degree at most 2k - 1.
pub fn build_r(k: u32) -> IndexedIntPoly {
    assert!(k >= 1, "derivative order must be at least 1");
    let substituted = with_cache(|cache| substitute_partials(&a_poly(cache, k)));
    let (numerator, denominator) = substituted.cleared();
    assert!(
        denominator.is_one(),
        "the A-recurrence clears its internal denominators"
    );
    assert!(
        numerator.total_degree() <= (2 * k - 1) as u64,
        "degree bound 2k - 1"
    );
    numerator
}

/// Integer-coefficient numerator with its cleared common denominator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClearedIndexedPoly {
    pub numerator: IndexedIntPoly,
    pub denominator: BigInt,
}

/// The polynomial pair for the cofactor derivatives: with F = (y - S) G and
/// g = G(x, S), the quantity (d^{k,l}G)(x,S) g^{2k+l-1} equals
/// numerator / denominator evaluated at the partials of F along the graph.
/// Total degree at most 2k + l.
pub fn build_rbar(k: u32, l: u32) -> ClearedIndexedPoly {
    assert!(k + l >= 1, "at least one derivative must be taken");
    let substituted = with_cache(|cache| substitute_partials(&b_poly(cache, k, l)));
    let (numerator, denominator) = substituted.cleared();
    assert!(
        numerator.total_degree() <= (2 * k + l) as u64,
        "degree bound 2k + l"
    );
    ClearedIndexedPoly {
        numerator,
        denominator,
    }
}

/// Equality of two series up to their common certified truncation. A
/// disagreement is reported only when a differing coefficient is certified
/// nonzero; a zero-divisor difference means the answer depends on a choice
/// of factor in the caller's tower.
pub fn series_agree(a: &PuiseuxSeries, b: &PuiseuxSeries) -> Result<bool, Error> {
    let d = a.sub(b);
    match d.leading() {
        None => Ok(true),
        Some((_, c)) => match c.classify().map_err(Error::from_calc)? {
            Class::Zero => Ok(true),
            Class::Unit(_) => Ok(false),
            Class::ZeroDivisor(sp) => Err(Error::from_calc(CalcError::Split(sp))),
        },
    }
}

/// Checks S^(k) (F_y(x,S))^{2k-1} = R_k(partials of F along the branch) up
/// to the branch's certified truncation. The branch must be a simple root:
/// on a repeated root F_y vanishes along the branch and the identity is
/// undefined.
pub fn verify_root_derivative_identity(
    f: &BiPoly,
    branch: &Branch,
    k: u32,
) -> Result<bool, Error> {
    if f.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    if k == 0 {
        return Err(Error::Domain("derivative order must be at least 1".into()));
    }
    let s = &branch.series;
    let fy = eval_poly(&f.partial_derivative(0, 1), s);
    if fy.is_exact_zero() {
        return Err(Error::Domain(
            "the y-derivative vanishes along the branch (repeated root)".into(),
        ));
    }
    if !fy.val().exact {
        return Err(Error::TruncationExhausted);
    }
    let lhs = s.derivative_n(k).mul(&fy.pow(2 * k as u64 - 1));
    let mut assign = BTreeMap::new();
    for (p, q) in derivative_index_set(k) {
        assign.insert((p, q), eval_poly(&f.partial_derivative(p, q), s));
    }
    let rhs = build_r(k).eval_series(&assign)?;
    series_agree(&lhs, &rhs)
}

/// Maximum multiplicity among the nonzero roots of a univariate polynomial,
/// computed by iterating gcd with the derivative after stripping the power
/// of the variable. Never exceeds the polynomial's monomial count minus 1.
pub fn hajos_max_multiplicity(f: &UniPoly) -> Result<u64, Error> {
    if f.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    let monomials = f.monomial_count() as u64;
    let mut cur = f.div_xpow(f.valuation().expect("nonzero polynomial"));
    let mut depth = 0u64;
    while cur.degree().expect("nonzero polynomial") > 0 {
        cur = cur.gcd(&cur.derivative()).map_err(Error::from_calc)?;
        depth += 1;
    }
    debug_assert!(depth <= monomials - 1);
    Ok(depth)
}

fn power_table(base: &Elem, up_to: u64) -> Vec<Elem> {
    let mut out = Vec::with_capacity(up_to as usize + 1);
    out.push(base.tower().one());
    for _ in 0..up_to {
        out.push(out.last().unwrap() * base);
    }
    out
}

/// Certifies that a coordinate is a nonzero unit of its tower.
fn certify_nonzero(c: &Elem, what: &str) -> Result<(), Error> {
    match c.classify().map_err(Error::from_calc)? {
        Class::Zero => Err(Error::Domain(format!("{what} must be nonzero"))),
        Class::Unit(_) => Ok(()),
        Class::ZeroDivisor(sp) => Err(Error::from_calc(CalcError::Split(sp))),
    }
}

/// Number of positive-valuation roots, counted with multiplicity, of
/// G(a + x, b + y) as a polynomial in y over the Puiseux field, for a
/// point with both coordinates nonzero. The count never exceeds the
/// monomial count of G minus 1.
///
/// The shifted coefficient table is never materialized: the coefficient of
/// x^nu y^l in G(a + x, b + y) is the binomial sum
/// sum over monomials x^i y^j of binom(i,nu) binom(j,l) c_{ij} a^{i-nu}
/// b^{j-l}, and the count s is the smallest l whose column attains the
/// minimal x-valuation n min over all columns.
pub fn shift_positive_count(g: &BiPoly, point: &Point) -> Result<u64, Error> {
    if g.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    let gt = g.tower();
    let tower = if gt.depth() > point.tower().depth() {
        gt
    } else {
        point.tower().clone()
    };
    let a = point.a.migrate(&tower);
    let b = point.b.migrate(&tower);
    certify_nonzero(&a, "the shift point's first coordinate")?;
    certify_nonzero(&b, "the shift point's second coordinate")?;
    let m1 = g.degree_x().expect("nonzero polynomial");
    let m2 = g.degree_y().expect("nonzero polynomial");
    let apow = power_table(&a, m1);
    let bpow = power_table(&b, m2);
    let terms: Vec<((u64, u64), Elem)> = g
        .terms()
        .map(|(e, c)| (*e, c.migrate(&tower)))
        .collect();
    let entry = |nu: u64, l: u64| -> Elem {
        let mut acc = tower.zero();
        for ((i, j), c) in &terms {
            if *i >= nu && *j >= l {
                let w = binom_big(*i, nu) * binom_big(*j, l);
                let t = c.scale(&Rat::from_integer(w));
                let t = &t * &apow[(*i - nu) as usize];
                let t = &t * &bpow[(*j - l) as usize];
                acc = &acc + &t;
            }
        }
        acc
    };
    let mut column_vals: Vec<Option<u64>> = Vec::with_capacity(m2 as usize + 1);
    let mut min_val: Option<u64> = None;
    for l in 0..=m2 {
        let mut v = None;
        for nu in 0..=m1 {
            match entry(nu, l).classify().map_err(Error::from_calc)? {
                Class::Zero => continue,
                Class::Unit(_) => {
                    v = Some(nu);
                    break;
                }
                Class::ZeroDivisor(sp) => {
                    return Err(Error::from_calc(CalcError::Split(sp)))
                }
            }
        }
        if let Some(nv) = v {
            min_val = Some(min_val.map_or(nv, |m| m.min(nv)));
        }
        column_vals.push(v);
    }
    let n = min_val.ok_or(Error::ZeroPolynomial)?;
    let s = column_vals
        .iter()
        .position(|v| *v == Some(n))
        .expect("the minimum is attained") as u64;
    debug_assert!(s <= g.monomial_count() as u64 - 1);
    Ok(s)
}

/// Outcome of the valuation-sum inequality for an irreducible curve and a
/// sparse polynomial at a point with nonzero coordinates.
#[derive(Clone, Debug)]
pub struct ValuationSumCheck {
    /// Sum of val(G(a+x, b+S(x))) over the positive-valuation branches S of
    /// F(a+x, b+y), counted with conjugates.
    pub sum: Rat,
    /// d(4d+1)t(t-1)/2 for d = deg F and t = monomial count of G.
    pub bound: Rat,
    pub ok: bool,
}

/// Checks sum <= d(4d+1)t(t-1)/2. The first input must be irreducible of
/// positive degree (a caller-supplied hypothesis: the crate does not
/// factor) and must not divide the second.
pub fn sum_val_bound_check(
    f_irreducible: &BiPoly,
    g: &BiPoly,
    point: &Point,
) -> Result<ValuationSumCheck, Error> {
    if f_irreducible.is_zero() || g.is_zero() {
        return Err(Error::ZeroPolynomial);
    }
    let d = f_irreducible.total_degree().expect("nonzero polynomial");
    if d == 0 {
        return Err(Error::Domain(
            "the irreducible factor must have positive degree".into(),
        ));
    }
    certify_nonzero(&point.a, "the point's first coordinate")?;
    certify_nonzero(&point.b, "the point's second coordinate")?;
    // For irreducible F, divisibility of G is the same as a nonconstant gcd.
    let common = gcd_bivariate(f_irreducible, g).map_err(Error::from_calc)?;
    if common.total_degree().unwrap_or(0) >= 1 {
        return Err(Error::Domain(
            "the sparse polynomial is divisible by the irreducible curve".into(),
        ));
    }
    let t = g.monomial_count() as u64;
    let fb = f_irreducible.translate(&point.a, &point.b);
    let gb = g.translate(&point.a, &point.b);
    let base_depth = point
        .tower()
        .depth()
        .max(fb.tower().depth())
        .max(gb.tower().depth());
    let dg = g.total_degree().expect("nonzero polynomial");
    let mut order = (d * dg + 1) as i64;
    for _ in 0..3 {
        let mut summands = Vec::new();
        match one_sided_sum(&fb, &gb, 0, 0, order, base_depth, &mut summands)? {
            SumOutcome::Value(sum) => {
                let bound = Rat::new(
                    BigInt::from(d * (4 * d + 1) * t * (t - 1)),
                    BigInt::from(2),
                );
                let ok = sum <= bound;
                return Ok(ValuationSumCheck { sum, bound, ok });
            }
            SumOutcome::Infinite => {
                return Err(Error::Domain(
                    "a branch of the irreducible curve annihilates the second polynomial"
                        .into(),
                ))
            }
            SumOutcome::NeedDeeper => order = order.saturating_mul(2),
        }
    }
    Err(Error::TruncationExhausted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imult::{halphen_multiplicity, HalphenForm, Multiplicity};
    use crate::newton::{expand_branches, positive_valuation_count, BranchFamily};
    use crate::series::Cutoff;
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

    fn up(coeffs: &[i64]) -> UniPoly {
        let mut p = UniPoly::zero();
        for (e, co) in coeffs.iter().enumerate() {
            if *co != 0 {
                p = &p + &UniPoly::monomial(e as u64, c(*co));
            }
        }
        p
    }

    fn shape(parts: &[u32]) -> SeqPartition {
        SeqPartition::new(parts.to_vec())
    }

    #[test]
    fn partitions_enumerate_derivative_shapes() {
        let s4 = SeqPartition::of_weight(4);
        let expected = vec![
            shape(&[0, 0, 0, 1]),
            shape(&[0, 2]),
            shape(&[1, 0, 1]),
            shape(&[2, 1]),
            shape(&[4]),
        ];
        assert_eq!(s4, expected);
        for s in &s4 {
            assert_eq!(s.weight(), 4);
            assert!(s.size() <= 4);
        }
        assert_eq!(SeqPartition::of_weight(0), vec![SeqPartition::empty()]);
        assert_eq!(SeqPartition::of_weight(6).len(), 11);
    }

    #[test]
    fn xi_matches_the_first_product_rules() {
        for n in 0..6u64 {
            let nn = BigInt::from(n);
            assert_eq!(xi_constant(n, &shape(&[1])), nn.clone());
            assert_eq!(xi_constant(n, &shape(&[2])), &nn * (&nn - 1));
            assert_eq!(xi_constant(n, &shape(&[0, 1])), nn.clone());
        }
        // third derivative: n(n-1)(n-2) S^{n-3} S'^3 + 3n(n-1) S^{n-2} S' S''
        // + n S^{n-1} S'''
        assert_eq!(xi_constant(5, &shape(&[3])), BigInt::from(60));
        assert_eq!(xi_constant(5, &shape(&[1, 1])), BigInt::from(60));
        assert_eq!(xi_constant(5, &shape(&[0, 0, 1])), BigInt::from(5));
        // shapes larger than the exponent die out
        assert_eq!(xi_constant(1, &shape(&[2])), BigInt::zero());
    }

    #[test]
    fn xi_sums_scale_like_a_fixed_point_of_differentiation() {
        // with every derivative of S equal to S itself, d^k(S^n) = n^k S^n,
        // so the shape constants of weight k sum to n^k
        for n in 0..6u64 {
            for k in 0..5u32 {
                let total: BigInt = xi_table(n, k).values().sum();
                assert_eq!(total, BigInt::from(n).pow(k));
            }
        }
    }

    #[test]
    fn power_derivative_routes_agree() {
        // exact polynomial series
        let s = PuiseuxSeries::from_unipoly(&up(&[0, 1, -2, 1]));
        let out = derivative_of_power(&s, 5, 4).unwrap();
        assert!(out.direct.equals(&out.structured));
        assert!(series_agree(&out.direct, &out.structured).unwrap());
        assert!(!out.direct.is_exact_zero());
        // ramified exponents
        let r = PuiseuxSeries::monomial(c(1), 3, 2);
        let out = derivative_of_power(&r, 3, 2).unwrap();
        assert!(out.direct.equals(&out.structured));
        // k = 1 is the plain product rule: the single shape (1) with
        // constant n
        let out = derivative_of_power(&s, 7, 1).unwrap();
        assert_eq!(out.contributions.len(), 1);
        assert_eq!(out.contributions[0].0, shape(&[1]));
        assert_eq!(out.contributions[0].1, BigInt::from(7));
    }

    #[test]
    fn power_derivative_respects_truncation() {
        let mut terms = BTreeMap::new();
        terms.insert(1i64, c(1));
        let s = PuiseuxSeries::from_parts(1, terms, Cutoff::At(4));
        let out = derivative_of_power(&s, 2, 1).unwrap();
        assert!(series_agree(&out.direct, &out.structured).unwrap());
        assert!(matches!(out.direct.cutoff(), Cutoff::At(_)));
        // five derivatives leave nothing certified
        assert_eq!(
            derivative_of_power(&s, 2, 5).unwrap_err(),
            Error::TruncationExhausted
        );
        assert_eq!(
            derivative_of_power(&PuiseuxSeries::zero(), 2, 1).unwrap_err(),
            Error::ZeroPolynomial
        );
    }

    #[test]
    fn root_polynomials_match_hand_expansion() {
        let r1 = build_r(1);
        assert_eq!(r1.term_count(), 1);
        assert_eq!(r1.coeff(&[((1, 0), 1)]), BigInt::from(-1));
        assert_eq!(r1.to_string(), "-x[1,0]");

        let r2 = build_r(2);
        assert_eq!(r2.term_count(), 3);
        assert_eq!(r2.coeff(&[((2, 0), 1), ((0, 1), 2)]), BigInt::from(-1));
        assert_eq!(
            r2.coeff(&[((1, 0), 1), ((1, 1), 1), ((0, 1), 1)]),
            BigInt::from(2)
        );
        assert_eq!(r2.coeff(&[((1, 0), 2), ((0, 2), 1)]), BigInt::from(-1));
        assert_eq!(r2.total_degree(), 3);
    }

    #[test]
    fn root_polynomial_degrees_and_variables() {
        for k in 1..=5u32 {
            let ambient: BTreeSet<DerivPair> =
                derivative_index_set(k).into_iter().collect();
            assert_eq!(ambient.len() as u32, k * (k + 3) / 2);
            let r = build_r(k);
            assert!(r.total_degree() <= (2 * k - 1) as u64);
            assert!(r.variables().is_subset(&ambient));
        }
    }

    #[test]
    fn cleared_cofactor_polynomials() {
        let b01 = build_rbar(0, 1);
        assert_eq!(b01.numerator.term_count(), 1);
        assert_eq!(b01.numerator.coeff(&[((0, 2), 1)]), BigInt::one());
        assert_eq!(b01.denominator, BigInt::from(2));

        let b11 = build_rbar(1, 1);
        assert_eq!(b11.denominator, BigInt::from(6));
        assert_eq!(b11.numerator.term_count(), 2);
        assert_eq!(
            b11.numerator.coeff(&[((1, 2), 1), ((0, 1), 2)]),
            BigInt::from(3)
        );
        assert_eq!(
            b11.numerator.coeff(&[((1, 0), 1), ((0, 3), 1), ((0, 1), 1)]),
            BigInt::from(-1)
        );

        for k in 0..=5u32 {
            for l in 0..=(5 - k) {
                if k + l == 0 {
                    continue;
                }
                let b = build_rbar(k, l);
                assert!(b.numerator.total_degree() <= (2 * k + l) as u64);
                assert!(b.denominator.is_positive());
            }
        }
    }

    /// With F = (y - S) G for a known polynomial cofactor G, the cleared
    /// polynomials must reproduce (d^{k,l}G)(x,S) * G(x,S)^{2k+l-1} from
    /// the partials of F alone.
    #[test]
    fn cleared_polynomials_match_cofactor_derivatives() {
        // F = (y - x^2)(x y^2 + y + 1)
        let g = bp(&[(1, 1, 2), (1, 0, 1), (1, 0, 0)]);
        let f = &bp(&[(1, 0, 1), (-1, 2, 0)]) * &g;
        let s = PuiseuxSeries::monomial(c(1), 2, 1);
        let gs = eval_poly(&g, &s);
        for (k, l) in [(0, 1), (1, 0), (1, 1), (0, 2), (2, 0)] {
            let expected = eval_poly(&g.partial_derivative(k, l), &s)
                .mul(&gs.pow((2 * k + l) as u64 - 1));
            let cleared = build_rbar(k, l);
            let mut assign = BTreeMap::new();
            for ix in derivative_index_set(k + l + 1) {
                assign.insert(ix, eval_poly(&f.partial_derivative(ix.0, ix.1), &s));
            }
            let num = cleared.numerator.eval_series(&assign).unwrap();
            let inv_den = q().rat_elem(Rat::new(BigInt::one(), cleared.denominator));
            let got = num.scale(&inv_den);
            assert!(
                series_agree(&expected, &got).unwrap(),
                "cofactor derivative mismatch at ({k},{l})"
            );
        }
    }

    #[test]
    fn root_derivative_identity_on_fixtures() {
        // parabola, exact branch y = x^2
        let f = bp(&[(1, 0, 1), (-1, 2, 0)]);
        let branches = expand_branches(&f, 8, BranchFamily::PositiveValuation).unwrap();
        assert_eq!(branches.len(), 1);
        for k in 1..=4 {
            assert!(verify_root_derivative_identity(&f, &branches[0], k).unwrap());
        }

        // cusp, ramified branches y = +-x^{3/2}
        let f = bp(&[(1, 0, 2), (-1, 3, 0)]);
        let branches = expand_branches(&f, 9, BranchFamily::PositiveValuation).unwrap();
        for b in &branches {
            for k in 1..=3 {
                assert!(verify_root_derivative_identity(&f, b, k).unwrap());
            }
        }

        // a series that is not a root fails the k = 1 identity
        let f = bp(&[(1, 0, 1), (-1, 2, 0)]);
        let fake = Branch {
            series: PuiseuxSeries::monomial(c(1), 3, 1),
            multiplicity: 1,
            conjugates: 1,
        };
        assert!(!verify_root_derivative_identity(&f, &fake, 1).unwrap());

        // a repeated root has vanishing y-derivative along the branch
        let f = bp(&[(1, 0, 2), (-2, 1, 1), (1, 2, 0)]);
        let branches = expand_branches(&f, 8, BranchFamily::PositiveValuation).unwrap();
        assert_eq!(branches[0].multiplicity, 2);
        assert!(matches!(
            verify_root_derivative_identity(&f, &branches[0], 1),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn nonzero_root_multiplicity_is_bounded_by_sparsity() {
        // x^5: one monomial, no nonzero roots
        assert_eq!(hajos_max_multiplicity(&up(&[0, 0, 0, 0, 0, 1])).unwrap(), 0);
        // (y - 1)^2: three monomials
        assert_eq!(hajos_max_multiplicity(&up(&[1, -2, 1])).unwrap(), 2);
        // (y - 1)^3: four monomials
        assert_eq!(hajos_max_multiplicity(&up(&[-1, 3, -3, 1])).unwrap(), 3);
        // (y - 1)^2 (y - 2): four monomials, max multiplicity 2
        assert_eq!(hajos_max_multiplicity(&up(&[-2, 5, -4, 1])).unwrap(), 2);
        // squarefree with nonzero roots
        assert_eq!(hajos_max_multiplicity(&up(&[-1, 0, 1])).unwrap(), 1);
        assert_eq!(
            hajos_max_multiplicity(&UniPoly::zero()).unwrap_err(),
            Error::ZeroPolynomial
        );
        // the bound t - 1 holds on the examples above by inspection
        for coeffs in [vec![1i64, -2, 1], vec![-1, 3, -3, 1], vec![-2, 5, -4, 1]] {
            let f = up(&coeffs);
            let t = f.monomial_count() as u64;
            assert!(hajos_max_multiplicity(&f).unwrap() <= t - 1);
        }
    }

    #[test]
    fn shift_count_examples() {
        // G = x^2 - y^2 at (1,1): the shifted curve keeps one branch
        // through the origin
        let g = bp(&[(1, 2, 0), (-1, 0, 2)]);
        let p = Point::rational(rat(1, 1), rat(1, 1));
        assert_eq!(shift_positive_count(&g, &p).unwrap(), 1);

        // no vanishing at the point: count 0
        let g = bp(&[(1, 1, 0), (1, 0, 1)]);
        assert_eq!(shift_positive_count(&g, &p).unwrap(), 0);

        // zero coordinate is rejected
        let p0 = Point::rational(rat(0, 1), rat(1, 1));
        assert!(matches!(
            shift_positive_count(&g, &p0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn shift_count_agrees_with_branch_expansion() {
        let points = [
            Point::rational(rat(1, 1), rat(1, 1)),
            Point::rational(rat(2, 1), rat(-1, 1)),
            Point::rational(rat(-1, 2), rat(3, 1)),
        ];
        let polys = [
            bp(&[(1, 2, 0), (-1, 0, 2)]),
            bp(&[(1, 3, 0), (-1, 0, 3)]),
            bp(&[(1, 0, 1), (-1, 2, 0)]),
            bp(&[(1, 2, 2), (-3, 1, 0), (2, 0, 0)]),
            bp(&[(1, 0, 3), (1, 1, 1), (1, 0, 0)]),
        ];
        for p in &points {
            for g in &polys {
                let s = shift_positive_count(g, p).unwrap();
                let shifted = g.translate(&p.a, &p.b);
                assert_eq!(s, positive_valuation_count(&shifted).unwrap());
                assert!(s <= g.monomial_count() as u64 - 1);
            }
        }
    }

    #[test]
    fn shift_count_over_a_tower_point() {
        // the point (w, w) with w^2 = 2
        let tw = q().adjoin(&[c(-2), c(0), c(1)], Some("w".into()));
        let w = tw.gen(0);
        let p = Point::new(w.clone(), w.clone());
        let g = bp(&[(1, 2, 0), (-1, 0, 2)]);
        assert_eq!(shift_positive_count(&g, &p).unwrap(), 1);

        // a reducible modulus makes the answer depend on the factor choice
        let tz = q().adjoin(&[c(2), c(-3), c(1)], Some("z".into()));
        let z = tz.gen(0);
        let zero_divisor = &z - &tz.one();
        let gz = BiPoly::monomial(1, 1, zero_divisor);
        let pz = Point::new(tz.one(), tz.one());
        assert!(matches!(
            shift_positive_count(&gz, &pz),
            Err(Error::AmbiguousTower { .. })
        ));
    }

    #[test]
    fn valuation_sum_fixtures() {
        // F = y - x^2, G = y (one monomial): the sum is 0 and so is the
        // bound
        let f = bp(&[(1, 0, 1), (-1, 2, 0)]);
        let g = bp(&[(1, 0, 1)]);
        let p = Point::rational(rat(1, 1), rat(1, 1));
        let out = sum_val_bound_check(&f, &g, &p).unwrap();
        assert_eq!(out.sum, rat(0, 1));
        assert_eq!(out.bound, rat(0, 1));
        assert!(out.ok);

        // F = y - x^2, G = y - x at (1,1): the branch is y = 2x + x^2 and
        // G picks up valuation 1
        let g = bp(&[(1, 0, 1), (-1, 1, 0)]);
        let out = sum_val_bound_check(&f, &g, &p).unwrap();
        assert_eq!(out.sum, rat(1, 1));
        assert_eq!(out.bound, rat(18, 1));
        assert!(out.ok);

        // divisibility violates the hypothesis
        let multiple = &f * &bp(&[(1, 1, 0), (1, 0, 1)]);
        assert!(matches!(
            sum_val_bound_check(&f, &multiple, &p),
            Err(Error::Domain(_))
        ));

        // zero coordinates are rejected
        let p0 = Point::rational(rat(1, 1), rat(0, 1));
        assert!(matches!(
            sum_val_bound_check(&f, &g, &p0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn assembly_inequality_holds_on_a_fixture() {
        // the multiplicity at a nonzero-coordinate point is at most
        // d(t-1) + d(4d+1)t(t-1)/2
        let f = bp(&[(1, 0, 1), (-1, 2, 0)]);
        let g = bp(&[(1, 0, 1), (-1, 1, 0)]);
        let p = Point::rational(rat(1, 1), rat(1, 1));
        let value = match halphen_multiplicity(&f, &g, &p, HalphenForm::First)
            .unwrap()
            .value
        {
            Multiplicity::Finite(v) => v,
            Multiplicity::Infinite => panic!("finite expected"),
        };
        let d = f.total_degree().unwrap();
        let t = g.monomial_count() as u64;
        let check = sum_val_bound_check(&f, &g, &p).unwrap();
        let assembled = Rat::from_integer(BigInt::from(d * (t - 1))) + check.bound;
        assert!(Rat::from_integer(BigInt::from(value)) <= assembled);
    }
}
