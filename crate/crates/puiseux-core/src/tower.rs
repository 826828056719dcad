//! Arithmetic in towers of algebraic extensions of Q.
//!
//! A tower is a stack of levels, each adding one generator with a monic
//! squarefree modulus over the levels below. Moduli need not be irreducible:
//! the quotient is then a product of fields, and inversion either certifies a
//! unit or returns the monic factor of a modulus that obstructs it (a
//! [`SplitPoint`]). Callers split the tower at that point and replay, so no
//! factorization over number fields is ever needed.
//!
//! Elements are stored as multivariate polynomials over Q in the level
//! generators, reduced below each modulus degree. Reduced representatives are
//! canonical, so equality is representative equality.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{CResult, CalcError, Error, SplitPoint};

pub type Rat = num_rational::BigRational;
pub type Int = BigInt;

/// Convenience constructor for small rationals.
pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(Int::from(n), Int::from(d))
}

/// Sparse polynomial over Q in the tower generators.
///
/// Keys are exponent vectors indexed by level, stored without trailing zeros;
/// values are nonzero. The empty key is the constant term.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct MPoly {
    terms: BTreeMap<Vec<u32>, Rat>,
}

fn trim_key(mut key: Vec<u32>) -> Vec<u32> {
    while key.last() == Some(&0) {
        key.pop();
    }
    key
}

impl MPoly {
    pub fn zero() -> MPoly {
        MPoly::default()
    }

    pub fn constant(c: Rat) -> MPoly {
        let mut p = MPoly::zero();
        if !c.is_zero() {
            p.terms.insert(Vec::new(), c);
        }
        p
    }

    pub fn one() -> MPoly {
        MPoly::constant(Rat::one())
    }

    /// The generator of the given level.
    pub fn var(level: usize) -> MPoly {
        let mut key = vec![0u32; level + 1];
        key[level] = 1;
        let mut p = MPoly::zero();
        p.terms.insert(key, Rat::one());
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &Rat)> {
        self.terms.iter()
    }

    fn insert(&mut self, key: Vec<u32>, c: Rat) {
        if c.is_zero() {
            return;
        }
        let key = trim_key(key);
        match self.terms.entry(key) {
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

    pub fn add(&self, other: &MPoly) -> MPoly {
        let mut out = self.clone();
        for (k, c) in &other.terms {
            out.insert(k.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> MPoly {
        MPoly {
            terms: self.terms.iter().map(|(k, c)| (k.clone(), -c)).collect(),
        }
    }

    pub fn sub(&self, other: &MPoly) -> MPoly {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &Rat) -> MPoly {
        if c.is_zero() {
            return MPoly::zero();
        }
        MPoly {
            terms: self.terms.iter().map(|(k, v)| (k.clone(), v * c)).collect(),
        }
    }

    pub fn mul(&self, other: &MPoly) -> MPoly {
        let mut out = MPoly::zero();
        for (ka, ca) in &self.terms {
            for (kb, cb) in &other.terms {
                let mut key = vec![0u32; ka.len().max(kb.len())];
                for (i, slot) in key.iter_mut().enumerate() {
                    let a = ka.get(i).copied().unwrap_or(0);
                    let b = kb.get(i).copied().unwrap_or(0);
                    *slot = a.checked_add(b).expect("tower exponent overflow");
                }
                out.insert(key, ca * cb);
            }
        }
        out
    }

    /// Highest level whose generator occurs, if any.
    pub fn max_level(&self) -> Option<usize> {
        self.terms.keys().filter_map(|k| k.len().checked_sub(1)).max()
    }

    /// Reindex generators: every level at or above `at` moves up by `by`.
    pub fn shift_vars(&self, at: usize, by: usize) -> MPoly {
        if by == 0 {
            return self.clone();
        }
        let mut out = MPoly::zero();
        for (k, c) in &self.terms {
            let key = if k.len() > at {
                let mut shifted = k[..at].to_vec();
                shifted.extend(std::iter::repeat(0).take(by));
                shifted.extend_from_slice(&k[at..]);
                shifted
            } else {
                k.clone()
            };
            out.terms.insert(key, c.clone());
        }
        out
    }

    pub fn deg_in(&self, level: usize) -> u32 {
        self.terms
            .keys()
            .map(|k| k.get(level).copied().unwrap_or(0))
            .max()
            .unwrap_or(0)
    }

    /// Decompose as a univariate polynomial in the given level's generator.
    pub fn coeffs_in(&self, level: usize) -> BTreeMap<u32, MPoly> {
        let mut out: BTreeMap<u32, MPoly> = BTreeMap::new();
        for (k, c) in &self.terms {
            let e = k.get(level).copied().unwrap_or(0);
            let mut rest = k.clone();
            if level < rest.len() {
                rest[level] = 0;
            }
            out.entry(e).or_default().insert(trim_key(rest), c.clone());
        }
        out.retain(|_, p| !p.is_zero());
        out
    }

    pub fn from_coeffs_in(level: usize, coeffs: &BTreeMap<u32, MPoly>) -> MPoly {
        let mut out = MPoly::zero();
        for (e, p) in coeffs {
            let pow = if *e == 0 {
                MPoly::one()
            } else {
                let mut key = vec![0u32; level + 1];
                key[level] = *e;
                let mut m = MPoly::zero();
                m.terms.insert(key, Rat::one());
                m
            };
            out = out.add(&pow.mul(p));
        }
        out
    }

    /// The value as a rational constant, if the polynomial is one.
    pub fn try_rat(&self) -> Option<Rat> {
        if self.terms.is_empty() {
            return Some(Rat::zero());
        }
        if self.terms.len() == 1 {
            if let Some(c) = self.terms.get(&Vec::new()) {
                return Some(c.clone());
            }
        }
        None
    }

    /// Render with the given generator names.
    pub fn format_with<F: Fn(usize) -> String>(&self, tag: F) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (i, (key, coeff)) in self.terms.iter().rev().enumerate() {
            let mut parts: Vec<String> = Vec::new();
            let abs = coeff.abs();
            if !abs.is_one() || key.is_empty() {
                parts.push(format_rat(&abs));
            }
            for (lvl, e) in key.iter().enumerate() {
                match e {
                    0 => {}
                    1 => parts.push(tag(lvl)),
                    _ => parts.push(format!("{}^{}", tag(lvl), e)),
                }
            }
            let term = parts.join("*");
            if i == 0 {
                if coeff.is_negative() {
                    out.push('-');
                }
            } else if coeff.is_negative() {
                out.push_str(" - ");
            } else {
                out.push_str(" + ");
            }
            out.push_str(&term);
        }
        out
    }

    /// Render with placeholder generator names `t0, t1, ...`.
    pub fn to_string_generic(&self) -> String {
        self.format_with(|lvl| format!("t{lvl}"))
    }
}

pub fn format_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        format!("{}", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// One extension step: a generator with its monic modulus over lower levels.
#[derive(Clone, Debug)]
pub struct Level {
    pub tag: String,
    pub modulus: MPoly,
    pub degree: u32,
}

/// A stack of extension levels over Q. Cheap to clone and compare.
#[derive(Clone, Debug)]
pub struct Tower {
    levels: Arc<Vec<Level>>,
}

impl PartialEq for Tower {
    fn eq(&self, other: &Self) -> bool {
        if Arc::ptr_eq(&self.levels, &other.levels) {
            return true;
        }
        self.levels.len() == other.levels.len()
            && self
                .levels
                .iter()
                .zip(other.levels.iter())
                .all(|(a, b)| a.modulus == b.modulus && a.tag == b.tag)
    }
}

impl Eq for Tower {}

impl Tower {
    /// The trivial tower: plain rational arithmetic.
    pub fn rationals() -> Tower {
        Tower {
            levels: Arc::new(Vec::new()),
        }
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn is_prefix_of(&self, other: &Tower) -> bool {
        self.levels.len() <= other.levels.len()
            && self
                .levels
                .iter()
                .zip(other.levels.iter())
                .all(|(a, b)| a.modulus == b.modulus && a.tag == b.tag)
    }

    /// Reduce a representative below every modulus degree, top level first.
    pub fn reduce(&self, rep: MPoly) -> MPoly {
        reduce_with(&self.levels, rep)
    }

    pub fn elem(&self, rep: MPoly) -> Elem {
        Elem {
            rep: self.reduce(rep),
            tower: self.clone(),
        }
    }

    pub fn rat_elem(&self, c: Rat) -> Elem {
        Elem {
            rep: MPoly::constant(c),
            tower: self.clone(),
        }
    }

    pub fn zero(&self) -> Elem {
        self.rat_elem(Rat::zero())
    }

    pub fn one(&self) -> Elem {
        self.rat_elem(Rat::one())
    }

    /// The generator of an existing level as an element.
    pub fn gen(&self, level: usize) -> Elem {
        assert!(level < self.depth(), "no such level");
        Elem {
            rep: MPoly::var(level),
            tower: self.clone(),
        }
    }

    /// Extend by one level. `modulus` is dense little-endian over this tower,
    /// monic, squarefree, of degree >= 2 (degree 1 needs no extension).
    pub fn adjoin(&self, modulus: &[Elem], tag: Option<String>) -> Tower {
        let deg = modulus.len().checked_sub(1).expect("empty modulus");
        assert!(deg >= 1, "modulus must have positive degree");
        assert!(
            modulus[deg].is_one(),
            "modulus must be monic over the tower"
        );
        let new_level = self.depth();
        let mut rep = MPoly::zero();
        for (i, c) in modulus.iter().enumerate() {
            assert!(c.tower.is_prefix_of(self), "modulus coefficient from an unrelated tower");
            let mut key_pow = vec![0u32; new_level + 1];
            key_pow[new_level] = i as u32;
            let mut zpow = MPoly::zero();
            zpow.terms.insert(trim_key(key_pow), Rat::one());
            rep = rep.add(&zpow.mul(&c.rep));
        }
        let mut levels = (*self.levels).clone();
        levels.push(Level {
            tag: tag.unwrap_or_else(|| format!("a{new_level}")),
            modulus: rep,
            degree: deg as u32,
        });
        Tower {
            levels: Arc::new(levels),
        }
    }

    /// Combine two towers that agree on their first `common` levels: the
    /// levels of `other` above the shared prefix are stacked on top of
    /// `self`, with their generators reindexed past this tower's depth.
    /// Elements of `other` move across by shifting their representatives
    /// with [`MPoly::shift_vars`] at `common` by `self.depth() - common`.
    pub fn amalgamate(&self, other: &Tower, common: usize) -> Tower {
        assert!(
            common <= self.depth() && common <= other.depth(),
            "shared prefix deeper than a tower"
        );
        assert!(
            self.levels[..common]
                .iter()
                .zip(other.levels[..common].iter())
                .all(|(a, b)| a.modulus == b.modulus),
            "towers disagree on the shared prefix"
        );
        let by = self.depth() - common;
        let mut levels = (*self.levels).clone();
        for level in &other.levels[common..] {
            levels.push(Level {
                tag: format!("{}'", level.tag),
                modulus: level.modulus.shift_vars(common, by),
                degree: level.degree,
            });
        }
        Tower {
            levels: Arc::new(levels),
        }
    }

    /// Split at a level along a monic proper factor of its modulus. Returns
    /// the tower with the factor and the tower with the cofactor; moduli of
    /// higher levels are re-reduced in each.
    pub fn split(&self, at: usize, factor: &MPoly) -> (Tower, Tower) {
        let level = &self.levels[at];
        let prefix = &self.levels[..at];
        let f = factor.coeffs_in(at);
        let m = level.modulus.coeffs_in(at);
        let (q, r) = divmod_units(prefix, &m, &f, at);
        assert!(r.values().all(|p| p.is_zero()), "split factor must divide the modulus");
        let rebuild = |part: &BTreeMap<u32, MPoly>| -> Tower {
            let part_poly = MPoly::from_coeffs_in(at, part);
            let deg = part_poly.deg_in(at);
            let mut levels: Vec<Level> = self.levels[..at].to_vec();
            levels.push(Level {
                tag: level.tag.clone(),
                modulus: part_poly,
                degree: deg,
            });
            for j in at + 1..self.levels.len() {
                let old = &self.levels[j];
                let new_mod = reduce_with(&levels, old.modulus.clone());
                levels.push(Level {
                    tag: old.tag.clone(),
                    modulus: new_mod,
                    degree: old.degree,
                });
            }
            Tower {
                levels: Arc::new(levels),
            }
        };
        (rebuild(&f), rebuild(&q))
    }
}

/// Polynomial remainder reduction by every modulus in `levels`, top first.
fn reduce_with(levels: &[Level], mut rep: MPoly) -> MPoly {
    for at in (0..levels.len()).rev() {
        let level = &levels[at];
        if rep.deg_in(at) < level.degree {
            continue;
        }
        let m = level.modulus.coeffs_in(at);
        let mut a = rep.coeffs_in(at);
        rem_units_in_place(&levels[..at], &mut a, &m, at);
        rep = MPoly::from_coeffs_in(at, &a);
    }
    rep
}

/// Remainder of `a` by monic `m`, both univariate in level `at` with MPoly
/// coefficients; coefficient products are reduced by `prefix`.
fn rem_units_in_place(
    prefix: &[Level],
    a: &mut BTreeMap<u32, MPoly>,
    m: &BTreeMap<u32, MPoly>,
    _at: usize,
) {
    let dm = *m.keys().next_back().expect("zero modulus");
    debug_assert!(m[&dm].try_rat().map(|c| c.is_one()).unwrap_or(false));
    loop {
        a.retain(|_, p| !p.is_zero());
        let da = match a.keys().next_back() {
            Some(d) => *d,
            None => return,
        };
        if da < dm {
            return;
        }
        let lead = a.get(&da).cloned().unwrap_or_default();
        // a -= lead * z^(da-dm) * m
        for (e, c) in m {
            let prod = reduce_with(prefix, lead.mul(c));
            let target = da - dm + e;
            let entry = a.entry(target).or_default();
            *entry = entry.sub(&prod);
        }
        a.retain(|_, p| !p.is_zero());
        debug_assert!(a.keys().next_back().map(|d| *d < da).unwrap_or(true));
    }
}

/// Division with remainder in the level-`at` generator: `a = q*b + r` with
/// `deg r < deg b`. `b` must have an invertible (here: monic or unit rational)
/// leading coefficient; used internally where that is guaranteed.
fn divmod_units(
    prefix: &[Level],
    a: &BTreeMap<u32, MPoly>,
    b: &BTreeMap<u32, MPoly>,
    _at: usize,
) -> (BTreeMap<u32, MPoly>, BTreeMap<u32, MPoly>) {
    let db = *b.keys().next_back().expect("division by zero polynomial");
    let lc_b = &b[&db];
    let lc_inv = lc_b
        .try_rat()
        .map(|c| MPoly::constant(c.recip()))
        .expect("divmod_units requires a rational unit leading coefficient");
    let mut r = a.clone();
    let mut q: BTreeMap<u32, MPoly> = BTreeMap::new();
    loop {
        r.retain(|_, p| !p.is_zero());
        let dr = match r.keys().next_back() {
            Some(d) => *d,
            None => break,
        };
        if dr < db {
            break;
        }
        let coeff = reduce_with(prefix, r[&dr].mul(&lc_inv));
        q.insert(dr - db, coeff.clone());
        for (e, c) in b {
            let prod = reduce_with(prefix, coeff.mul(c));
            let entry = r.entry(dr - db + e).or_default();
            *entry = entry.sub(&prod);
        }
    }
    q.retain(|_, p| !p.is_zero());
    r.retain(|_, p| !p.is_zero());
    (q, r)
}

/// An element of a tower: a context plus a reduced representative.
#[derive(Clone, Debug)]
pub struct Elem {
    tower: Tower,
    rep: MPoly,
}

/// What inversion learned about an element.
#[derive(Clone, Debug)]
pub enum Class {
    Zero,
    Unit(Box<Elem>),
    /// The element is a zero divisor; the split point exhibits the factor of
    /// the modulus it generates.
    ZeroDivisor(SplitPoint),
}

impl Elem {
    pub fn tower(&self) -> &Tower {
        &self.tower
    }

    pub fn rep(&self) -> &MPoly {
        &self.rep
    }

    pub fn is_zero(&self) -> bool {
        self.rep.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.rep.try_rat().map(|c| c.is_one()).unwrap_or(false)
    }

    pub fn try_rat(&self) -> Option<Rat> {
        self.rep.try_rat()
    }

    /// Reinterpret in another tower, re-reducing the representative. The new
    /// tower must refine this one (same levels with equal or factored moduli).
    pub fn migrate(&self, tower: &Tower) -> Elem {
        tower.elem(self.rep.clone())
    }

    pub fn equals(&self, other: &Elem) -> bool {
        (self - other).is_zero()
    }

    pub fn scale(&self, c: &Rat) -> Elem {
        Elem {
            tower: self.tower.clone(),
            rep: self.rep.scale(c),
        }
    }

    pub fn pow(&self, mut e: u64) -> Elem {
        let mut base = self.clone();
        let mut acc = self.tower.one();
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// Multiplicative inverse. `Err(Split)` carries the modulus factor that
    /// witnesses a zero divisor; `Err(Fatal(DivisionByZero))` means the
    /// element is exactly zero.
    pub fn inv(&self) -> CResult<Elem> {
        if self.rep.is_zero() {
            return Err(Error::DivisionByZero.into());
        }
        match self.rep.max_level() {
            None => {
                let c = self.rep.try_rat().expect("constant");
                Ok(self.tower.rat_elem(c.recip()))
            }
            Some(k) => {
                let m = self.tower.levels()[k].modulus.coeffs_in(k);
                let a = self.rep.coeffs_in(k);
                let (g, s) = ext_gcd_at(&self.tower, k, &m, &a)?;
                let dg = *g.keys().next_back().expect("gcd of nonzero inputs");
                if dg == 0 {
                    // g is monic of degree zero, i.e. 1 = s*a + t*m.
                    let rep = self.tower.reduce(MPoly::from_coeffs_in(k, &s));
                    Ok(Elem {
                        tower: self.tower.clone(),
                        rep,
                    })
                } else {
                    Err(CalcError::Split(SplitPoint {
                        level: k,
                        factor: MPoly::from_coeffs_in(k, &g),
                    }))
                }
            }
        }
    }

    pub fn div(&self, other: &Elem) -> CResult<Elem> {
        Ok(self * &other.inv()?)
    }

    /// Zero / unit / zero-divisor trichotomy. Splits triggered below the
    /// element's own top level still propagate as errors.
    pub fn classify(&self) -> CResult<Class> {
        if self.is_zero() {
            return Ok(Class::Zero);
        }
        match self.inv() {
            Ok(inv) => Ok(Class::Unit(Box::new(inv))),
            Err(CalcError::Split(sp)) => {
                if Some(sp.level) == self.rep.max_level() {
                    Ok(Class::ZeroDivisor(sp))
                } else {
                    Err(CalcError::Split(sp))
                }
            }
            Err(e) => Err(e),
        }
    }
}

/// Monic extended gcd of `a` against the monic modulus `m`, univariate in the
/// level-`k` generator. Returns `(g, s)` with `g = s*a + t*m`, `g` monic.
/// Leading-coefficient inversions recurse into lower levels and may split.
fn ext_gcd_at(
    tower: &Tower,
    k: usize,
    m: &BTreeMap<u32, MPoly>,
    a: &BTreeMap<u32, MPoly>,
) -> CResult<(BTreeMap<u32, MPoly>, BTreeMap<u32, MPoly>)> {
    let prefix = &tower.levels()[..k];
    let mut r0 = m.clone();
    let mut r1 = a.clone();
    let mut s0: BTreeMap<u32, MPoly> = BTreeMap::new();
    let mut s1: BTreeMap<u32, MPoly> = BTreeMap::new();
    s1.insert(0, MPoly::one());
    loop {
        r1.retain(|_, p| !p.is_zero());
        if r1.is_empty() {
            break;
        }
        let d1 = *r1.keys().next_back().unwrap();
        let lc = r1[&d1].clone();
        let lc_inv = Elem {
            tower: tower.clone(),
            rep: lc,
        }
        .inv()?;
        let scale = |p: &BTreeMap<u32, MPoly>| -> BTreeMap<u32, MPoly> {
            p.iter()
                .map(|(e, c)| (*e, reduce_with(prefix, c.mul(&lc_inv.rep))))
                .filter(|(_, c)| !c.is_zero())
                .collect()
        };
        r1 = scale(&r1);
        s1 = scale(&s1);
        let (q, r2) = divmod_units_monic(prefix, &r0, &r1);
        // s2 = s0 - q*s1
        let mut s2 = s0.clone();
        for (eq, cq) in &q {
            for (es, cs) in &s1 {
                let prod = reduce_with(prefix, cq.mul(cs));
                let entry = s2.entry(eq + es).or_default();
                *entry = entry.sub(&prod);
            }
        }
        s2.retain(|_, p| !p.is_zero());
        r0 = r1;
        s0 = s1;
        r1 = r2;
        s1 = s2;
    }
    Ok((r0, s0))
}

/// Division with remainder by a monic divisor in the level-`k` view.
fn divmod_units_monic(
    prefix: &[Level],
    a: &BTreeMap<u32, MPoly>,
    b: &BTreeMap<u32, MPoly>,
) -> (BTreeMap<u32, MPoly>, BTreeMap<u32, MPoly>) {
    let db = *b.keys().next_back().expect("division by zero polynomial");
    let mut r = a.clone();
    let mut q: BTreeMap<u32, MPoly> = BTreeMap::new();
    loop {
        r.retain(|_, p| !p.is_zero());
        let dr = match r.keys().next_back() {
            Some(d) => *d,
            None => break,
        };
        if dr < db {
            break;
        }
        let coeff = r[&dr].clone();
        q.insert(dr - db, coeff.clone());
        for (e, c) in b {
            let prod = reduce_with(prefix, coeff.mul(c));
            let entry = r.entry(dr - db + e).or_default();
            *entry = entry.sub(&prod);
        }
    }
    q.retain(|_, p| !p.is_zero());
    r.retain(|_, p| !p.is_zero());
    (q, r)
}

fn unify(a: &Elem, b: &Elem) -> (Tower, MPoly, MPoly) {
    if a.tower == b.tower {
        (a.tower.clone(), a.rep.clone(), b.rep.clone())
    } else if a.tower.is_prefix_of(&b.tower) {
        (b.tower.clone(), a.rep.clone(), b.rep.clone())
    } else if b.tower.is_prefix_of(&a.tower) {
        (a.tower.clone(), a.rep.clone(), b.rep.clone())
    } else {
        panic!("elements belong to incompatible towers");
    }
}

impl Add for &Elem {
    type Output = Elem;
    fn add(self, other: &Elem) -> Elem {
        let (tower, a, b) = unify(self, other);
        Elem {
            rep: a.add(&b),
            tower,
        }
    }
}

impl Sub for &Elem {
    type Output = Elem;
    fn sub(self, other: &Elem) -> Elem {
        let (tower, a, b) = unify(self, other);
        Elem {
            rep: a.sub(&b),
            tower,
        }
    }
}

impl Mul for &Elem {
    type Output = Elem;
    fn mul(self, other: &Elem) -> Elem {
        let (tower, a, b) = unify(self, other);
        let rep = tower.reduce(a.mul(&b));
        Elem { rep, tower }
    }
}

impl Neg for &Elem {
    type Output = Elem;
    fn neg(self) -> Elem {
        Elem {
            tower: self.tower.clone(),
            rep: self.rep.neg(),
        }
    }
}

impl fmt::Display for Elem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let levels = self.tower.levels();
        let s = self.rep.format_with(|lvl| {
            levels
                .get(lvl)
                .map(|l| l.tag.clone())
                .unwrap_or_else(|| format!("t{lvl}"))
        });
        write!(f, "{s}")
    }
}

impl PartialEq for Elem {
    fn eq(&self, other: &Self) -> bool {
        self.equals(other)
    }
}

/// Dense univariate polynomials over a tower, little-endian coefficients.
/// Small helper algebra used for moduli, edge polynomials and gcd chains.
pub mod dense {
    use super::*;

    pub fn trim(v: &mut Vec<Elem>) {
        while v.last().map(|c| c.is_zero()).unwrap_or(false) {
            v.pop();
        }
    }

    pub fn deg(v: &[Elem]) -> Option<usize> {
        v.iter().rposition(|c| !c.is_zero())
    }

    pub fn is_zero(v: &[Elem]) -> bool {
        deg(v).is_none()
    }

    pub fn mul(a: &[Elem], b: &[Elem], tower: &Tower) -> Vec<Elem> {
        let (da, db) = match (deg(a), deg(b)) {
            (Some(da), Some(db)) => (da, db),
            _ => return Vec::new(),
        };
        let mut out = vec![tower.zero(); da + db + 1];
        for (i, ca) in a.iter().enumerate().take(da + 1) {
            if ca.is_zero() {
                continue;
            }
            for (j, cb) in b.iter().enumerate().take(db + 1) {
                if cb.is_zero() {
                    continue;
                }
                out[i + j] = &out[i + j] + &(ca * cb);
            }
        }
        let mut out = out;
        trim(&mut out);
        out
    }

    pub fn sub(a: &[Elem], b: &[Elem], tower: &Tower) -> Vec<Elem> {
        let n = a.len().max(b.len());
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let x = a.get(i).cloned().unwrap_or_else(|| tower.zero());
            let y = b.get(i).cloned().unwrap_or_else(|| tower.zero());
            out.push(&x - &y);
        }
        trim(&mut out);
        out
    }

    pub fn deriv(p: &[Elem]) -> Vec<Elem> {
        let mut out: Vec<Elem> = p
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| c.scale(&rat(i as i64, 1)))
            .collect();
        trim(&mut out);
        out
    }

    pub fn eval(p: &[Elem], x: &Elem) -> Elem {
        let mut acc = x.tower().zero();
        for c in p.iter().rev() {
            acc = &(&acc * x) + c;
        }
        acc
    }

    /// Divide by the leading coefficient. May split.
    pub fn monic(p: &[Elem]) -> CResult<Vec<Elem>> {
        let d = deg(p).ok_or(Error::DivisionByZero)?;
        let lc_inv = p[d].inv()?;
        let mut out: Vec<Elem> = p[..=d].iter().map(|c| c * &lc_inv).collect();
        trim(&mut out);
        Ok(out)
    }

    /// Division with remainder; the divisor is monicized first, so this may
    /// split on a non-invertible leading coefficient.
    pub fn divmod(a: &[Elem], b: &[Elem], tower: &Tower) -> CResult<(Vec<Elem>, Vec<Elem>)> {
        let db = deg(b).ok_or(Error::DivisionByZero)?;
        let lc_inv = b[db].inv()?;
        let mut r: Vec<Elem> = a.to_vec();
        trim(&mut r);
        let mut q = vec![tower.zero(); r.len().saturating_sub(db) + 1];
        loop {
            let dr = match deg(&r) {
                Some(d) => d,
                None => break,
            };
            if dr < db {
                break;
            }
            let c = &r[dr] * &lc_inv;
            for j in 0..=db {
                let t = &c * &b[j];
                r[dr - db + j] = &r[dr - db + j] - &t;
            }
            r[dr] = tower.zero(); // exact cancellation by construction
            q[dr - db] = &q[dr - db] + &c;
            trim(&mut r);
        }
        trim(&mut q);
        Ok((q, r))
    }

    /// Exact division; remainder must vanish.
    pub fn div_exact(a: &[Elem], b: &[Elem], tower: &Tower) -> CResult<Vec<Elem>> {
        let (q, r) = divmod(a, b, tower)?;
        if !is_zero(&r) {
            return Err(Error::NonExactDivision.into());
        }
        Ok(q)
    }

    /// Monic gcd by the Euclidean algorithm. `gcd(p, 0)` is monic `p`.
    pub fn gcd(a: &[Elem], b: &[Elem], tower: &Tower) -> CResult<Vec<Elem>> {
        let mut r0: Vec<Elem> = a.to_vec();
        let mut r1: Vec<Elem> = b.to_vec();
        trim(&mut r0);
        trim(&mut r1);
        while !is_zero(&r1) {
            let (_, r2) = divmod(&r0, &r1, tower)?;
            r0 = r1;
            r1 = r2;
        }
        if is_zero(&r0) {
            return Ok(Vec::new());
        }
        monic(&r0)
    }

    /// Squarefree decomposition (char 0): returns monic squarefree factors
    /// with their multiplicities, multiplicity ascending.
    pub fn squarefree_decomposition(
        p: &[Elem],
        tower: &Tower,
    ) -> CResult<Vec<(Vec<Elem>, u32)>> {
        let p = monic(p)?;
        let d = deg(&p).ok_or(Error::DivisionByZero)?;
        if d == 0 {
            return Ok(Vec::new());
        }
        let dp = deriv(&p);
        let g = gcd(&p, &dp, tower)?;
        let mut out = Vec::new();
        if deg(&g) == Some(0) || g.is_empty() {
            out.push((p, 1));
            return Ok(out);
        }
        let mut w = div_exact(&p, &g, tower)?;
        let mut y = div_exact(&dp, &g, tower)?;
        let mut i = 1u32;
        while deg(&w).unwrap_or(0) > 0 {
            let z = sub(&y, &deriv(&w), tower);
            let a = if is_zero(&z) {
                monic(&w)?
            } else {
                gcd(&w, &z, tower)?
            };
            if deg(&a).unwrap_or(0) > 0 {
                out.push((a.clone(), i));
            }
            w = div_exact(&w, &a, tower)?;
            y = if is_zero(&z) {
                Vec::new()
            } else {
                div_exact(&z, &a, tower)?
            };
            if is_zero(&y) {
                if deg(&w).unwrap_or(0) > 0 {
                    out.push((monic(&w)?, i + 1));
                }
                break;
            }
            i += 1;
        }
        Ok(out)
    }
}

/// A root produced by [`all_roots`]: the (possibly extended) tower that hosts
/// it, the root itself, its multiplicity in the input, and how many conjugate
/// roots it stands for (the degree of the adjoined modulus, or 1).
#[derive(Clone, Debug)]
pub struct RootInstance {
    pub tower: Tower,
    pub root: Elem,
    pub multiplicity: u32,
    pub conjugates: u32,
}

/// All roots of a univariate polynomial over the tower, without factoring
/// beyond squarefree decomposition and rational-root stripping. Roots that
/// need an extension are returned as the generator of a freshly adjoined
/// level whose modulus may still be reducible; downstream zero-divisor
/// signals refine it lazily.
pub fn all_roots(tower: &Tower, p: &[Elem]) -> CResult<Vec<RootInstance>> {
    let d = dense::deg(p).ok_or(Error::DivisionByZero)?;
    if d == 0 {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for (factor, mult) in dense::squarefree_decomposition(p, tower)? {
        let mut residual = factor;
        let rational: Option<Vec<Rat>> = residual.iter().map(|c| c.try_rat()).collect();
        if let Some(coeffs) = rational {
            let (roots, rest) = strip_rational_roots(&coeffs);
            for r in roots {
                out.push(RootInstance {
                    tower: tower.clone(),
                    root: tower.rat_elem(r),
                    multiplicity: mult,
                    conjugates: 1,
                });
            }
            residual = rest.into_iter().map(|c| tower.rat_elem(c)).collect();
        }
        match dense::deg(&residual) {
            None | Some(0) => {}
            Some(1) => {
                let root = residual[0].div(&residual[1])?;
                out.push(RootInstance {
                    tower: tower.clone(),
                    root: -&root,
                    multiplicity: mult,
                    conjugates: 1,
                });
            }
            Some(deg) => {
                let ext = tower.adjoin(&dense::monic(&residual)?, None);
                let root = ext.gen(ext.depth() - 1);
                out.push(RootInstance {
                    tower: ext,
                    root,
                    multiplicity: mult,
                    conjugates: deg as u32,
                });
            }
        }
    }
    Ok(out)
}

/// Adjoin one root of `p`. Prefers a root that genuinely extends the tower;
/// falls back to a rational root when the polynomial splits completely.
pub fn adjoin_root(tower: &Tower, p: &[Elem]) -> CResult<Elem> {
    let roots = all_roots(tower, p)?;
    if roots.is_empty() {
        return Err(Error::Domain("polynomial has no roots to adjoin".into()).into());
    }
    let best = roots
        .iter()
        .find(|r| r.conjugates > 1)
        .unwrap_or(&roots[0]);
    Ok(best.root.clone())
}

/// All rational roots of a squarefree rational polynomial, each stripped out;
/// returns the roots and the root-free cofactor. Divisor enumeration uses
/// bounded trial division, so very large leading/trailing coefficients may
/// leave rational roots in the cofactor; that is sound, later splits find
/// them if they matter.
fn strip_rational_roots(p: &[Rat]) -> (Vec<Rat>, Vec<Rat>) {
    let mut work: Vec<Rat> = p.to_vec();
    while work.last().map(|c| c.is_zero()).unwrap_or(false) {
        work.pop();
    }
    let mut roots = Vec::new();
    if work.len() <= 1 {
        return (roots, work);
    }
    // common denominator -> integer coefficients
    let mut den = Int::one();
    for c in &work {
        den = num_integer::lcm(den, c.denom().clone());
    }
    let mut ints: Vec<Int> = work
        .iter()
        .map(|c| (c * Rat::from_integer(den.clone())).to_integer())
        .collect();
    // strip z^v
    while ints.first().map(|c| c.is_zero()).unwrap_or(false) {
        ints.remove(0);
        roots.push(Rat::zero());
    }
    loop {
        if ints.len() <= 1 {
            break;
        }
        if ints.len() == 2 {
            roots.push(Rat::new(-ints[0].clone(), ints[1].clone()));
            ints = vec![ints[1].clone()];
            break;
        }
        let c0 = ints[0].abs();
        let lc = ints.last().unwrap().abs();
        let (d0, ok0) = bounded_divisors(&c0);
        let (dl, ok1) = bounded_divisors(&lc);
        if !(ok0 && ok1) {
            break;
        }
        let mut found = None;
        'search: for p in &d0 {
            for q in &dl {
                for sign in [1i64, -1] {
                    let cand = Rat::new(p * Int::from(sign), q.clone());
                    if eval_rat_poly(&ints, &cand).is_zero() {
                        found = Some(cand);
                        break 'search;
                    }
                }
            }
        }
        match found {
            None => break,
            Some(r) => {
                // synthetic division by (z - r) over Q, then re-integerize
                let rats: Vec<Rat> = ints.iter().map(|c| Rat::from_integer(c.clone())).collect();
                let mut quot = vec![Rat::zero(); rats.len() - 1];
                let mut carry = Rat::zero();
                for i in (0..rats.len() - 1).rev() {
                    carry = &rats[i + 1] + &(&carry * &r);
                    quot[i] = carry.clone();
                }
                debug_assert!((&rats[0] + &(&carry * &r)).is_zero());
                roots.push(r);
                let mut den = Int::one();
                for c in &quot {
                    den = num_integer::lcm(den, c.denom().clone());
                }
                ints = quot
                    .iter()
                    .map(|c| (c * Rat::from_integer(den.clone())).to_integer())
                    .collect();
            }
        }
    }
    let rest: Vec<Rat> = ints.iter().map(|c| Rat::from_integer(c.clone())).collect();
    (roots, rest)
}

fn eval_rat_poly(p: &[Int], x: &Rat) -> Rat {
    let mut acc = Rat::zero();
    for c in p.iter().rev() {
        acc = &(&acc * x) + &Rat::from_integer(c.clone());
    }
    acc
}

/// Divisors of |n| if n factors within the trial-division budget.
fn bounded_divisors(n: &Int) -> (Vec<Int>, bool) {
    const BUDGET: u64 = 100_000;
    if n.is_zero() {
        return (Vec::new(), false);
    }
    let mut rest = n.abs();
    let mut primes: Vec<(Int, u32)> = Vec::new();
    let mut d = Int::from(2);
    let mut steps = 0u64;
    while &d * &d <= rest {
        steps += 1;
        if steps > BUDGET {
            return (Vec::new(), false);
        }
        if (&rest % &d).is_zero() {
            let mut e = 0u32;
            while (&rest % &d).is_zero() {
                rest /= &d;
                e += 1;
            }
            primes.push((d.clone(), e));
        }
        d += 1;
    }
    if !rest.is_one() {
        primes.push((rest, 1));
    }
    let mut divisors = vec![Int::one()];
    for (p, e) in primes {
        let mut next = Vec::new();
        for d in &divisors {
            let mut pw = Int::one();
            for _ in 0..=e {
                next.push(d * &pw);
                pw *= &p;
            }
        }
        divisors = next;
    }
    divisors.sort();
    divisors.dedup();
    (divisors, true)
}

/// Total order on rationals for use as map keys (BigRational is Ord already;
/// re-exported for readability at call sites).
pub fn rat_cmp(a: &Rat, b: &Rat) -> Ordering {
    a.cmp(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sqrt2_tower() -> Tower {
        let q = Tower::rationals();
        // z^2 - 2
        let modulus = vec![q.rat_elem(rat(-2, 1)), q.zero(), q.one()];
        q.adjoin(&modulus, Some("z".into()))
    }

    #[test]
    fn rational_inverse() {
        let q = Tower::rationals();
        let x = q.rat_elem(rat(3, 4));
        let inv = x.inv().unwrap();
        assert!((&x * &inv).is_one());
    }

    #[test]
    fn invert_one_plus_sqrt2() {
        let t = sqrt2_tower();
        let z = t.gen(0);
        let x = &z + &t.one();
        let inv = x.inv().unwrap();
        assert!((&x * &inv).is_one());
        // 1/(1+sqrt2) = sqrt2 - 1
        let expected = &z - &t.one();
        assert!(inv.equals(&expected));
    }

    #[test]
    fn reduction_is_canonical() {
        let t = sqrt2_tower();
        let z = t.gen(0);
        let z2 = &z * &z;
        assert_eq!(z2.try_rat(), Some(rat(2, 1)));
        let z3 = &z2 * &z;
        assert!(z3.equals(&z.scale(&rat(2, 1))));
    }

    #[test]
    fn zero_divisor_detected_and_split() {
        // z^2 - 1 is reducible: z - 1 is a zero divisor.
        let q = Tower::rationals();
        let modulus = vec![q.rat_elem(rat(-1, 1)), q.zero(), q.one()];
        let t = q.adjoin(&modulus, Some("z".into()));
        let z = t.gen(0);
        let x = &z - &t.one();
        match x.classify().unwrap() {
            Class::ZeroDivisor(sp) => {
                assert_eq!(sp.level, 0);
                let (t1, t2) = t.split(sp.level, &sp.factor);
                // in one branch z = 1, in the other z = -1
                let v1 = z.migrate(&t1).try_rat();
                let v2 = z.migrate(&t2).try_rat();
                let mut vals = vec![v1, v2];
                vals.sort();
                assert_eq!(vals, vec![Some(rat(-1, 1)), Some(rat(1, 1))]);
            }
            c => panic!("expected zero divisor, got {c:?}"),
        }
    }

    #[test]
    fn nested_tower_inverse() {
        // Q(sqrt2) then w^2 - z: w^4 = 2.
        let t = sqrt2_tower();
        let z = t.gen(0);
        let modulus = vec![-&z, t.zero(), t.one()];
        let t2 = t.adjoin(&modulus, Some("w".into()));
        let w = t2.gen(1);
        let inv = w.inv().unwrap();
        assert!((&w * &inv).is_one());
        // w^{-1} = w^3/2 since w^4 = 2
        let expected = w.pow(3).scale(&rat(1, 2));
        assert!(inv.equals(&expected));
    }

    #[test]
    fn adjoin_root_prefers_extension_and_strips_rational_part() {
        // z^3 - 1 = (z - 1)(z^2 + z + 1): the adjoined root is a primitive
        // cube root of unity.
        let q = Tower::rationals();
        let p = vec![q.rat_elem(rat(-1, 1)), q.zero(), q.zero(), q.one()];
        let root = adjoin_root(&q, &p).unwrap();
        let t = root.tower().clone();
        assert_eq!(t.depth(), 1);
        assert_eq!(t.levels()[0].degree, 2);
        // omega^2 + omega + 1 = 0
        let check = &(&root.pow(2) + &root) + &t.one();
        assert!(check.is_zero());
    }

    #[test]
    fn adjoin_root_of_linear_and_repeated_factors() {
        let q = Tower::rationals();
        // z - 5
        let p = vec![q.rat_elem(rat(-5, 1)), q.one()];
        assert_eq!(adjoin_root(&q, &p).unwrap().try_rat(), Some(rat(5, 1)));
        // (z - 2)^2
        let p = vec![q.rat_elem(rat(4, 1)), q.rat_elem(rat(-4, 1)), q.one()];
        let roots = all_roots(&q, &p).unwrap();
        assert_eq!(roots.len(), 1);
        assert_eq!(roots[0].multiplicity, 2);
        assert_eq!(roots[0].root.try_rat(), Some(rat(2, 1)));
    }

    #[test]
    fn squarefree_decomposition_splits_multiplicities() {
        let q = Tower::rationals();
        // (z - 1)^2 (z - 3)
        let zm1 = vec![q.rat_elem(rat(-1, 1)), q.one()];
        let zm3 = vec![q.rat_elem(rat(-3, 1)), q.one()];
        let p = dense::mul(&dense::mul(&zm1, &zm1, &q), &zm3, &q);
        let parts = dense::squarefree_decomposition(&p, &q).unwrap();
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].1, 1);
        assert_eq!(dense::deg(&parts[0].0), Some(1));
        assert_eq!(parts[1].1, 2);
        let roots = all_roots(&q, &p).unwrap();
        let mut summary: Vec<(Option<Rat>, u32)> = roots
            .iter()
            .map(|r| (r.root.try_rat(), r.multiplicity))
            .collect();
        summary.sort();
        assert_eq!(
            summary,
            vec![(Some(rat(1, 1)), 2), (Some(rat(3, 1)), 1)]
        );
    }

    #[test]
    fn gcd_over_reducible_tower_requests_split() {
        // Over Q[z]/(z^2-1), gcd(y - z, y - 1) forces inversion of z - 1.
        let q = Tower::rationals();
        let modulus = vec![q.rat_elem(rat(-1, 1)), q.zero(), q.one()];
        let t = q.adjoin(&modulus, Some("z".into()));
        let z = t.gen(0);
        let a = vec![-&z, t.one()];
        let b = vec![-&t.one(), t.one()];
        match dense::gcd(&a, &b, &t) {
            Err(CalcError::Split(sp)) => assert_eq!(sp.level, 0),
            other => panic!("expected split, got {other:?}"),
        }
    }

    #[test]
    fn split_preserves_higher_levels() {
        // Base z^2 - 1 (reducible), then w^2 - z on top. Splitting the base
        // must re-reduce the top modulus in each branch.
        let q = Tower::rationals();
        let t = q.adjoin(
            &[q.rat_elem(rat(-1, 1)), q.zero(), q.one()],
            Some("z".into()),
        );
        let z = t.gen(0);
        let t2 = t.adjoin(&[-&z, t.zero(), t.one()], Some("w".into()));
        let w = t2.gen(1);
        let x = &z - &t2.one();
        match x.classify().unwrap() {
            Class::ZeroDivisor(sp) => {
                let (ta, tb) = t2.split(sp.level, &sp.factor);
                assert_eq!(ta.depth(), 2);
                assert_eq!(tb.depth(), 2);
                // in the branch where z = 1, w^2 = 1; in the other, w^2 = -1
                let wa = w.migrate(&ta);
                let wb = w.migrate(&tb);
                let sq_a = (&wa * &wa).try_rat().unwrap();
                let sq_b = (&wb * &wb).try_rat().unwrap();
                let mut vals = vec![sq_a, sq_b];
                vals.sort();
                assert_eq!(vals, vec![rat(-1, 1), rat(1, 1)]);
            }
            c => panic!("expected zero divisor, got {c:?}"),
        }
    }

    #[test]
    fn display_uses_tags() {
        let t = sqrt2_tower();
        let z = t.gen(0);
        let x = &(&z * &z.scale(&rat(1, 2))) + &z; // = 1 + z
        assert_eq!(format!("{x}"), "z + 1");
    }
}
