//! Sparse polynomials over a tower.
//!
//! Exponents are machine-width (`u64`) with checked arithmetic; supports can
//! be sparse with huge exponents, so nothing here materializes dense
//! coefficient ranges. Bivariate polynomials are keyed by `(x, y)` exponent
//! pairs. Coefficient maps never store zeros, so the zero polynomial is the
//! empty map and its degree is `None`.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Signed};

use crate::error::{CResult, Error};
use crate::tower::{rat, Elem, Rat, Tower};

fn add_exp(a: u64, b: u64) -> u64 {
    a.checked_add(b).expect("monomial exponent overflow")
}

/// Univariate sparse polynomial in x.
#[derive(Clone, Debug, Default)]
pub struct UniPoly {
    terms: BTreeMap<u64, Elem>,
}

impl UniPoly {
    pub fn zero() -> UniPoly {
        UniPoly::default()
    }

    pub fn constant(c: Elem) -> UniPoly {
        UniPoly::monomial(0, c)
    }

    pub fn one() -> UniPoly {
        UniPoly::constant(Tower::rationals().one())
    }

    pub fn x() -> UniPoly {
        UniPoly::monomial(1, Tower::rationals().one())
    }

    pub fn monomial(e: u64, c: Elem) -> UniPoly {
        let mut p = UniPoly::zero();
        p.insert(e, c);
        p
    }

    fn insert(&mut self, e: u64, c: Elem) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(e) {
            std::collections::btree_map::Entry::Vacant(slot) => {
                slot.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut slot) => {
                let sum = slot.get() + &c;
                if sum.is_zero() {
                    slot.remove();
                } else {
                    *slot.get_mut() = sum;
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u64> {
        self.terms.keys().next_back().copied()
    }

    /// Order of vanishing at x = 0; `None` for the zero polynomial.
    pub fn valuation(&self) -> Option<u64> {
        self.terms.keys().next().copied()
    }

    pub fn leading_coeff(&self) -> Option<&Elem> {
        self.terms.values().next_back()
    }

    pub fn trailing_coeff(&self) -> Option<&Elem> {
        self.terms.values().next()
    }

    pub fn coeff(&self, e: u64) -> Option<&Elem> {
        self.terms.get(&e)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&u64, &Elem)> {
        self.terms.iter()
    }

    pub fn monomial_count(&self) -> usize {
        self.terms.len()
    }

    pub fn scale(&self, c: &Elem) -> UniPoly {
        if c.is_zero() {
            return UniPoly::zero();
        }
        let mut out = UniPoly::zero();
        for (e, v) in &self.terms {
            out.insert(*e, v * c);
        }
        out
    }

    pub fn mul_xpow(&self, e: u64) -> UniPoly {
        let mut out = UniPoly::zero();
        for (k, v) in &self.terms {
            out.insert(add_exp(*k, e), v.clone());
        }
        out
    }

    /// Divide by x^e; every exponent must be at least e.
    pub fn div_xpow(&self, e: u64) -> UniPoly {
        let mut out = UniPoly::zero();
        for (k, v) in &self.terms {
            out.insert(k.checked_sub(e).expect("valuation too small"), v.clone());
        }
        out
    }

    pub fn derivative(&self) -> UniPoly {
        let mut out = UniPoly::zero();
        for (e, c) in &self.terms {
            if *e == 0 {
                continue;
            }
            out.insert(e - 1, c.scale(&exp_rat(*e)));
        }
        out
    }

    pub fn eval(&self, x: &Elem) -> Elem {
        let mut acc = x.tower().zero();
        for (e, c) in &self.terms {
            acc = &acc + &(c * &x.pow(*e));
        }
        acc
    }

    /// p(x + a); expands binomials, so intended for small degrees.
    pub fn translate(&self, a: &Elem) -> UniPoly {
        let mut out = UniPoly::zero();
        for (e, c) in &self.terms {
            let d = *e as usize;
            // (x + a)^e by the binomial theorem
            let mut coeff = Rat::one();
            let mut apow = a.tower().one();
            // k = e down to 0: C(e, k) a^(e-k) x^k, iterate from k = e
            let mut binoms = Vec::with_capacity(d + 1);
            for k in (0..=d).rev() {
                binoms.push((k as u64, coeff.clone(), apow.clone()));
                if k > 0 {
                    coeff = coeff * rat(k as i64, (d - k + 1) as i64);
                    apow = &apow * a;
                }
            }
            for (k, b, ap) in binoms {
                out.insert(k, &c.scale(&b) * &ap);
            }
        }
        out
    }

    /// Division with remainder; may split while inverting the leading
    /// coefficient of `b`.
    pub fn divmod(&self, b: &UniPoly) -> CResult<(UniPoly, UniPoly)> {
        let db = b.degree().ok_or(Error::DivisionByZero)?;
        let lc_inv = b.leading_coeff().unwrap().inv()?;
        let mut r = self.clone();
        let mut q = UniPoly::zero();
        while let Some(dr) = r.degree() {
            if dr < db {
                break;
            }
            let c = r.leading_coeff().unwrap() * &lc_inv;
            let shift = dr - db;
            q.insert(shift, c.clone());
            for (e, v) in &b.terms {
                r.insert(add_exp(*e, shift), -&(&c * v));
            }
        }
        Ok((q, r))
    }

    pub fn div_exact(&self, b: &UniPoly) -> CResult<UniPoly> {
        let (q, r) = self.divmod(b)?;
        if !r.is_zero() {
            return Err(Error::NonExactDivision.into());
        }
        Ok(q)
    }

    /// Monic gcd by the Euclidean algorithm; `gcd(p, 0)` is monic `p`.
    pub fn gcd(&self, other: &UniPoly) -> CResult<UniPoly> {
        let mut r0 = self.clone();
        let mut r1 = other.clone();
        while !r1.is_zero() {
            let (_, r2) = r0.divmod(&r1)?;
            r0 = r1;
            r1 = r2;
        }
        r0.monic()
    }

    /// Divide by the leading coefficient; zero stays zero.
    pub fn monic(&self) -> CResult<UniPoly> {
        match self.leading_coeff() {
            None => Ok(UniPoly::zero()),
            Some(lc) => {
                let inv = lc.inv()?;
                Ok(self.scale(&inv))
            }
        }
    }

    pub fn equals(&self, other: &UniPoly) -> bool {
        (self - other).is_zero()
    }
}

fn exp_rat(e: u64) -> Rat {
    Rat::from_integer(e.into())
}

impl Add for &UniPoly {
    type Output = UniPoly;
    fn add(self, other: &UniPoly) -> UniPoly {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.insert(*e, c.clone());
        }
        out
    }
}

impl Sub for &UniPoly {
    type Output = UniPoly;
    fn sub(self, other: &UniPoly) -> UniPoly {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.insert(*e, -c);
        }
        out
    }
}

impl Mul for &UniPoly {
    type Output = UniPoly;
    fn mul(self, other: &UniPoly) -> UniPoly {
        let mut out = UniPoly::zero();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                out.insert(add_exp(*ea, *eb), ca * cb);
            }
        }
        out
    }
}

impl Neg for &UniPoly {
    type Output = UniPoly;
    fn neg(self) -> UniPoly {
        let mut out = UniPoly::zero();
        for (e, c) in &self.terms {
            out.insert(*e, -c);
        }
        out
    }
}

impl fmt::Display for UniPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", format_terms(self.terms.iter().rev().map(|(e, c)| ((*e, 0), c))))
    }
}

/// Bivariate sparse polynomial in x and y.
#[derive(Clone, Debug, Default)]
pub struct BiPoly {
    terms: BTreeMap<(u64, u64), Elem>,
}

impl BiPoly {
    pub fn zero() -> BiPoly {
        BiPoly::default()
    }

    pub fn constant(c: Elem) -> BiPoly {
        BiPoly::monomial(0, 0, c)
    }

    pub fn one() -> BiPoly {
        BiPoly::constant(Tower::rationals().one())
    }

    pub fn x() -> BiPoly {
        BiPoly::monomial(1, 0, Tower::rationals().one())
    }

    pub fn y() -> BiPoly {
        BiPoly::monomial(0, 1, Tower::rationals().one())
    }

    pub fn monomial(ex: u64, ey: u64, c: Elem) -> BiPoly {
        let mut p = BiPoly::zero();
        p.insert(ex, ey, c);
        p
    }

    fn insert(&mut self, ex: u64, ey: u64, c: Elem) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry((ex, ey)) {
            std::collections::btree_map::Entry::Vacant(slot) => {
                slot.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut slot) => {
                let sum = slot.get() + &c;
                if sum.is_zero() {
                    slot.remove();
                } else {
                    *slot.get_mut() = sum;
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(u64, u64), &Elem)> {
        self.terms.iter()
    }

    pub fn coeff(&self, ex: u64, ey: u64) -> Option<&Elem> {
        self.terms.get(&(ex, ey))
    }

    pub fn monomial_count(&self) -> usize {
        self.terms.len()
    }

    pub fn degree_x(&self) -> Option<u64> {
        self.terms.keys().map(|(ex, _)| *ex).max()
    }

    pub fn degree_y(&self) -> Option<u64> {
        self.terms.keys().map(|(_, ey)| *ey).max()
    }

    pub fn total_degree(&self) -> Option<u64> {
        self.terms.keys().map(|(ex, ey)| add_exp(*ex, *ey)).max()
    }

    /// Largest power of x dividing the polynomial; `None` if zero.
    pub fn x_divisibility(&self) -> Option<u64> {
        self.terms.keys().map(|(ex, _)| *ex).min()
    }

    pub fn y_divisibility(&self) -> Option<u64> {
        self.terms.keys().map(|(_, ey)| *ey).min()
    }

    pub fn scale(&self, c: &Elem) -> BiPoly {
        if c.is_zero() {
            return BiPoly::zero();
        }
        let mut out = BiPoly::zero();
        for ((ex, ey), v) in &self.terms {
            out.insert(*ex, *ey, v * c);
        }
        out
    }

    /// Divide by y^e; every y-exponent must be at least e.
    pub fn div_ypow(&self, e: u64) -> BiPoly {
        let mut out = BiPoly::zero();
        for ((ex, ey), v) in &self.terms {
            out.insert(*ex, ey.checked_sub(e).expect("y-valuation too small"), v.clone());
        }
        out
    }

    /// The deepest tower among the coefficients (they are mutually
    /// prefix-compatible); the rationals for the zero polynomial.
    pub fn tower(&self) -> Tower {
        let mut best = Tower::rationals();
        for c in self.terms.values() {
            if best.depth() < c.tower().depth() {
                best = c.tower().clone();
            }
        }
        best
    }

    pub fn swap_xy(&self) -> BiPoly {
        let mut out = BiPoly::zero();
        for ((ex, ey), v) in &self.terms {
            out.insert(*ey, *ex, v.clone());
        }
        out
    }

    /// d^(px+py) F / dx^px dy^py, with the usual integer factors.
    pub fn partial_derivative(&self, px: u32, py: u32) -> BiPoly {
        let mut cur = self.clone();
        for _ in 0..px {
            cur = cur.d_dx();
        }
        for _ in 0..py {
            cur = cur.d_dy();
        }
        cur
    }

    fn d_dx(&self) -> BiPoly {
        let mut out = BiPoly::zero();
        for ((ex, ey), c) in &self.terms {
            if *ex == 0 {
                continue;
            }
            out.insert(ex - 1, *ey, c.scale(&exp_rat(*ex)));
        }
        out
    }

    fn d_dy(&self) -> BiPoly {
        let mut out = BiPoly::zero();
        for ((ex, ey), c) in &self.terms {
            if *ey == 0 {
                continue;
            }
            out.insert(*ex, ey - 1, c.scale(&exp_rat(*ey)));
        }
        out
    }

    pub fn eval(&self, a: &Elem, b: &Elem) -> Elem {
        let mut acc = a.tower().zero();
        for ((ex, ey), c) in &self.terms {
            acc = &acc + &(&(c * &a.pow(*ex)) * &b.pow(*ey));
        }
        acc
    }

    /// Decompose as a polynomial in y with coefficients in x.
    pub fn coeffs_y(&self) -> BTreeMap<u64, UniPoly> {
        let mut out: BTreeMap<u64, UniPoly> = BTreeMap::new();
        for ((ex, ey), c) in &self.terms {
            out.entry(*ey).or_default().insert(*ex, c.clone());
        }
        out.retain(|_, p| !p.is_zero());
        out
    }

    pub fn from_coeffs_y(coeffs: &BTreeMap<u64, UniPoly>) -> BiPoly {
        let mut out = BiPoly::zero();
        for (ey, p) in coeffs {
            for (ex, c) in p.terms() {
                out.insert(*ex, *ey, c.clone());
            }
        }
        out
    }

    pub fn from_unipoly_x(p: &UniPoly) -> BiPoly {
        let mut out = BiPoly::zero();
        for (e, c) in p.terms() {
            out.insert(*e, 0, c.clone());
        }
        out
    }

    /// Substitute an affine change of coordinates; expands powers, so
    /// intended for small degrees.
    pub fn compose_affine(&self, map: &AffineMap) -> BiPoly {
        let xi = &(&BiPoly::x().scale(&map.xx) + &BiPoly::y().scale(&map.xy))
            + &BiPoly::constant(map.tx.clone());
        let yi = &(&BiPoly::x().scale(&map.yx) + &BiPoly::y().scale(&map.yy))
            + &BiPoly::constant(map.ty.clone());
        let dx = self.degree_x().unwrap_or(0) as usize;
        let dy = self.degree_y().unwrap_or(0) as usize;
        let xpows = power_table(&xi, dx);
        let ypows = power_table(&yi, dy);
        let mut out = BiPoly::zero();
        for ((ex, ey), c) in &self.terms {
            let t = &xpows[*ex as usize] * &ypows[*ey as usize];
            out = &out + &t.scale(c);
        }
        out
    }

    /// F(x + a, y + b).
    pub fn translate(&self, a: &Elem, b: &Elem) -> BiPoly {
        let one = a.tower().one();
        let zero = a.tower().zero();
        self.compose_affine(&AffineMap {
            xx: one.clone(),
            xy: zero.clone(),
            yx: zero.clone(),
            yy: one,
            tx: a.clone(),
            ty: b.clone(),
        })
    }

    pub fn equals(&self, other: &BiPoly) -> bool {
        (self - other).is_zero()
    }
}

fn power_table(base: &BiPoly, up_to: usize) -> Vec<BiPoly> {
    let mut pows = Vec::with_capacity(up_to + 1);
    pows.push(BiPoly::one());
    for i in 1..=up_to {
        let next = &pows[i - 1] * base;
        pows.push(next);
    }
    pows
}

impl Add for &BiPoly {
    type Output = BiPoly;
    fn add(self, other: &BiPoly) -> BiPoly {
        let mut out = self.clone();
        for ((ex, ey), c) in &other.terms {
            out.insert(*ex, *ey, c.clone());
        }
        out
    }
}

impl Sub for &BiPoly {
    type Output = BiPoly;
    fn sub(self, other: &BiPoly) -> BiPoly {
        let mut out = self.clone();
        for ((ex, ey), c) in &other.terms {
            out.insert(*ex, *ey, -c);
        }
        out
    }
}

impl Mul for &BiPoly {
    type Output = BiPoly;
    fn mul(self, other: &BiPoly) -> BiPoly {
        let mut out = BiPoly::zero();
        for ((xa, ya), ca) in &self.terms {
            for ((xb, yb), cb) in &other.terms {
                out.insert(add_exp(*xa, *xb), add_exp(*ya, *yb), ca * cb);
            }
        }
        out
    }
}

impl Neg for &BiPoly {
    type Output = BiPoly;
    fn neg(self) -> BiPoly {
        let mut out = BiPoly::zero();
        for ((ex, ey), c) in &self.terms {
            out.insert(*ex, *ey, -c);
        }
        out
    }
}

impl fmt::Display for BiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // y-major descending ordering for readability
        let mut terms: Vec<((u64, u64), &Elem)> =
            self.terms.iter().map(|(k, c)| (*k, c)).collect();
        terms.sort_by(|a, b| b.0 .1.cmp(&a.0 .1).then(a.0 .0.cmp(&b.0 .0)));
        write!(f, "{}", format_terms(terms.into_iter().map(|((ex, ey), c)| ((ex, ey), c))))
    }
}

fn format_terms<'a, I: Iterator<Item = ((u64, u64), &'a Elem)>>(terms: I) -> String {
    let mut out = String::new();
    let mut first = true;
    for ((ex, ey), c) in terms {
        let (sign_neg, body) = format_coeff(c, ex == 0 && ey == 0);
        if first {
            if sign_neg {
                out.push('-');
            }
            first = false;
        } else if sign_neg {
            out.push_str(" - ");
        } else {
            out.push_str(" + ");
        }
        let mut parts: Vec<String> = Vec::new();
        if !body.is_empty() {
            parts.push(body);
        }
        match ex {
            0 => {}
            1 => parts.push("x".into()),
            _ => parts.push(format!("x^{ex}")),
        }
        match ey {
            0 => {}
            1 => parts.push("y".into()),
            _ => parts.push(format!("y^{ey}")),
        }
        out.push_str(&parts.join("*"));
    }
    if out.is_empty() {
        out.push('0');
    }
    out
}

/// Format a coefficient, factoring out a leading minus sign when the
/// coefficient is rational; algebraic coefficients are parenthesized.
fn format_coeff(c: &Elem, force_value: bool) -> (bool, String) {
    if let Some(r) = c.try_rat() {
        let neg = r.is_negative();
        let abs = r.abs();
        if abs.is_one() && !force_value {
            (neg, String::new())
        } else {
            (neg, crate::tower::format_rat(&abs))
        }
    } else {
        (false, format!("({c})"))
    }
}

/// Affine change of coordinates `(x, y) -> (xx*x + xy*y + tx, yx*x + yy*y + ty)`.
#[derive(Clone, Debug)]
pub struct AffineMap {
    pub xx: Elem,
    pub xy: Elem,
    pub yx: Elem,
    pub yy: Elem,
    pub tx: Elem,
    pub ty: Elem,
}

impl AffineMap {
    pub fn translation(a: &Elem, b: &Elem) -> AffineMap {
        let one = a.tower().one();
        let zero = a.tower().zero();
        AffineMap {
            xx: one.clone(),
            xy: zero.clone(),
            yx: zero.clone(),
            yy: one,
            tx: a.clone(),
            ty: b.clone(),
        }
    }

    /// Where the map sends a point.
    pub fn apply(&self, a: &Elem, b: &Elem) -> (Elem, Elem) {
        (
            &(&(&self.xx * a) + &(&self.xy * b)) + &self.tx,
            &(&(&self.yx * a) + &(&self.yy * b)) + &self.ty,
        )
    }

    /// Inverse map; fails if the linear part is singular (or its determinant
    /// is a zero divisor).
    pub fn inverse(&self) -> CResult<AffineMap> {
        let det = &(&self.xx * &self.yy) - &(&self.xy * &self.yx);
        let d = det.inv()?;
        let xx = &self.yy * &d;
        let xy = -&(&self.xy * &d);
        let yx = -&(&self.yx * &d);
        let yy = &self.xx * &d;
        // translation part: -A^{-1} t
        let tx = -&(&(&xx * &self.tx) + &(&xy * &self.ty));
        let ty = -&(&(&yx * &self.tx) + &(&yy * &self.ty));
        Ok(AffineMap {
            xx,
            xy,
            yx,
            yy,
            tx,
            ty,
        })
    }
}

// ---------------------------------------------------------------------------
// Bivariate gcd, exact division and resultants (viewing F, G in K[x][y]).
// ---------------------------------------------------------------------------

type YView = BTreeMap<u64, UniPoly>;

fn yview_deg(a: &YView) -> Option<u64> {
    a.keys().next_back().copied()
}

fn yview_scale(a: &YView, c: &UniPoly) -> YView {
    if c.is_zero() {
        return YView::new();
    }
    a.iter().map(|(e, p)| (*e, p * c)).collect()
}

fn yview_sub(a: &YView, b: &YView) -> YView {
    let mut out = a.clone();
    for (e, p) in b {
        let q = match out.remove(e) {
            None => -p,
            Some(q) => &q - p,
        };
        if !q.is_zero() {
            out.insert(*e, q);
        }
    }
    out
}

fn yview_mul_ypow(a: &YView, e: u64) -> YView {
    a.iter().map(|(k, p)| (add_exp(*k, e), p.clone())).collect()
}

fn yview_div_coeffs(a: &YView, c: &UniPoly) -> CResult<YView> {
    let mut out = YView::new();
    for (e, p) in a {
        out.insert(*e, p.div_exact(c)?);
    }
    Ok(out)
}

/// Pseudo-remainder in y: returns r with `lc(b)^(da-db+1) a = q b + r`.
fn yview_prem(a: &YView, b: &YView) -> YView {
    let db = yview_deg(b).expect("pseudo-division by zero");
    let d = b[&db].clone();
    let mut r = a.clone();
    let da = match yview_deg(&r) {
        Some(da) => da,
        None => return r,
    };
    let mut e = da as i64 - db as i64 + 1;
    while let Some(dr) = yview_deg(&r) {
        if dr < db {
            break;
        }
        let lc_r = r[&dr].clone();
        // r = d*r - lc_r * y^(dr-db) * b
        let scaled = yview_scale(&r, &d);
        let shifted = yview_scale(&yview_mul_ypow(b, dr - db), &lc_r);
        r = yview_sub(&scaled, &shifted);
        e -= 1;
    }
    if e > 0 {
        let mut dpow = UniPoly::one();
        for _ in 0..e {
            dpow = &dpow * &d;
        }
        r = yview_scale(&r, &dpow);
    }
    r
}

/// Content of F with respect to y: monic gcd of the y-coefficients.
pub fn content_y(f: &BiPoly) -> CResult<UniPoly> {
    let mut acc = UniPoly::zero();
    for (_, c) in f.coeffs_y() {
        acc = acc.gcd(&c)?;
        if acc.degree() == Some(0) {
            break;
        }
    }
    Ok(acc)
}

/// F divided by its y-content.
pub fn primitive_part_y(f: &BiPoly) -> CResult<BiPoly> {
    if f.is_zero() {
        return Ok(BiPoly::zero());
    }
    let cont = content_y(f)?;
    let mut out: YView = YView::new();
    for (e, c) in f.coeffs_y() {
        out.insert(e, c.div_exact(&cont)?);
    }
    Ok(BiPoly::from_coeffs_y(&out))
}

/// Gcd of two bivariate polynomials by a primitive subresultant remainder
/// sequence in y. The result is normalized: primitive in y up to the shared
/// content, with the leading coefficient of its leading y-coefficient equal
/// to one. It is constant exactly when F and G are coprime.
pub fn gcd_bivariate(f: &BiPoly, g: &BiPoly) -> CResult<BiPoly> {
    if f.is_zero() {
        return normalize_gcd(g.clone());
    }
    if g.is_zero() {
        return normalize_gcd(f.clone());
    }
    let cont_f = content_y(f)?;
    let cont_g = content_y(g)?;
    let cont = cont_f.gcd(&cont_g)?;
    let mut a = primitive_part_y(f)?.coeffs_y();
    let mut b = primitive_part_y(g)?.coeffs_y();
    if yview_deg(&a) < yview_deg(&b) {
        std::mem::swap(&mut a, &mut b);
    }
    let mut gg = UniPoly::one();
    let mut hh = UniPoly::one();
    let pp_gcd: YView = loop {
        let da = yview_deg(&a).unwrap();
        let db = yview_deg(&b).unwrap();
        if db == 0 {
            // primitive parts are coprime in y
            let mut unit = YView::new();
            unit.insert(0, UniPoly::one());
            break unit;
        }
        let delta = da - db;
        let r = yview_prem(&a, &b);
        if r.is_empty() {
            break b;
        }
        a = b;
        let mut div = gg.clone();
        for _ in 0..delta {
            div = &div * &hh;
        }
        b = yview_div_coeffs(&r, &div)?;
        gg = a[&yview_deg(&a).unwrap()].clone();
        hh = power_quotient(&gg, delta, &hh)?;
    };
    // pp of the last nonzero remainder, times the shared content
    let pp = BiPoly::from_coeffs_y(&pp_gcd);
    let pp = primitive_part_y(&pp)?;
    let mut result = YView::new();
    for (e, c) in pp.coeffs_y() {
        result.insert(e, &c * &cont);
    }
    normalize_gcd(BiPoly::from_coeffs_y(&result))
}

/// g^delta / h^(delta-1), exact; handles delta = 0 as h itself.
fn power_quotient(g: &UniPoly, delta: u64, h: &UniPoly) -> CResult<UniPoly> {
    if delta == 0 {
        return Ok(h.clone());
    }
    let mut num = UniPoly::one();
    for _ in 0..delta {
        num = &num * g;
    }
    let mut den = UniPoly::one();
    for _ in 0..delta - 1 {
        den = &den * h;
    }
    num.div_exact(&den)
}

/// Scale so the leading coefficient of the y-leading coefficient is 1.
fn normalize_gcd(h: BiPoly) -> CResult<BiPoly> {
    if h.is_zero() {
        return Ok(h);
    }
    let dy = h.degree_y().unwrap();
    let lead = h.coeffs_y().remove(&dy).unwrap();
    let lc = lead.leading_coeff().unwrap().clone();
    let inv = lc.inv()?;
    Ok(h.scale(&inv))
}

/// Exact division in y: F / G with zero remainder, error otherwise.
pub fn div_exact_y(f: &BiPoly, g: &BiPoly) -> CResult<BiPoly> {
    if g.is_zero() {
        return Err(Error::DivisionByZero.into());
    }
    if f.is_zero() {
        return Ok(BiPoly::zero());
    }
    let gv = g.coeffs_y();
    let dg = yview_deg(&gv).unwrap();
    let lc_g = gv[&dg].clone();
    let mut r = f.coeffs_y();
    let mut q = YView::new();
    while let Some(dr) = yview_deg(&r) {
        if dr < dg {
            return Err(Error::NonExactDivision.into());
        }
        let lc_r = r[&dr].clone();
        let c = lc_r.div_exact(&lc_g)?;
        q.insert(dr - dg, c.clone());
        // r -= (c y^(dr-dg)) * g
        for (eg, pg) in &gv {
            let prod = &c * pg;
            let key = dr - dg + eg;
            let cur = r.remove(&key).unwrap_or_else(UniPoly::zero);
            let next = &cur - &prod;
            if !next.is_zero() {
                r.insert(key, next);
            }
        }
    }
    Ok(BiPoly::from_coeffs_y(&q))
}

/// Resultant of F and G with respect to y, by the subresultant algorithm.
/// Both inputs must have positive degree in y.
pub fn resultant_y(f: &BiPoly, g: &BiPoly) -> CResult<UniPoly> {
    let df = f.degree_y().ok_or(Error::ZeroPolynomial)?;
    let dg = g.degree_y().ok_or(Error::ZeroPolynomial)?;
    if df == 0 || dg == 0 {
        return Err(Error::DegreeInY.into());
    }
    let cont_f = content_y(f)?;
    let cont_g = content_g_checked(g)?;
    let mut a = primitive_part_y(f)?.coeffs_y();
    let mut b = primitive_part_y(g)?.coeffs_y();
    let mut sign_neg = false;
    if yview_deg(&a) < yview_deg(&b) {
        if df % 2 == 1 && dg % 2 == 1 {
            sign_neg = true;
        }
        std::mem::swap(&mut a, &mut b);
    }
    // scale = cont(F)^dg * cont(G)^df (with F, G in their final roles the
    // formula is symmetric, so role order does not matter)
    let mut scale = UniPoly::one();
    for _ in 0..dg {
        scale = &scale * &cont_f;
    }
    for _ in 0..df {
        scale = &scale * &cont_g;
    }
    let mut gg = UniPoly::one();
    let mut hh = UniPoly::one();
    let res_pp = loop {
        let da = yview_deg(&a).unwrap();
        let db = yview_deg(&b).unwrap();
        if da % 2 == 1 && db % 2 == 1 {
            sign_neg = !sign_neg;
        }
        let delta = da - db;
        let r = yview_prem(&a, &b);
        if r.is_empty() {
            // positive-degree common factor: resultant is zero
            break UniPoly::zero();
        }
        a = b;
        let mut div = gg.clone();
        for _ in 0..delta {
            div = &div * &hh;
        }
        b = yview_div_coeffs(&r, &div)?;
        let new_da = yview_deg(&a).unwrap();
        gg = a[&new_da].clone();
        hh = power_quotient(&gg, delta, &hh)?;
        if yview_deg(&b) == Some(0) {
            // h' = lc(b)^(deg a) / h^(deg a - 1)
            let lc_b = b[&0].clone();
            let mut num = UniPoly::one();
            for _ in 0..new_da {
                num = &num * &lc_b;
            }
            let mut den = UniPoly::one();
            for _ in 0..new_da.saturating_sub(1) {
                den = &den * &hh;
            }
            break num.div_exact(&den)?;
        }
    };
    let mut out = &res_pp * &scale;
    if sign_neg {
        out = -&out;
    }
    Ok(out)
}

fn content_g_checked(g: &BiPoly) -> CResult<UniPoly> {
    content_y(g)
}

/// The Sylvester matrix of F and G with respect to y: a
/// `(deg_y F + deg_y G)` square matrix over K[x].
pub fn sylvester_matrix_y(f: &BiPoly, g: &BiPoly) -> CResult<Vec<Vec<UniPoly>>> {
    let df = f.degree_y().ok_or(Error::ZeroPolynomial)? as usize;
    let dg = g.degree_y().ok_or(Error::ZeroPolynomial)? as usize;
    if df == 0 || dg == 0 {
        return Err(Error::DegreeInY.into());
    }
    let n = df + dg;
    let fv = f.coeffs_y();
    let gv = g.coeffs_y();
    let coeff = |view: &YView, e: i64| -> UniPoly {
        if e < 0 {
            UniPoly::zero()
        } else {
            view.get(&(e as u64)).cloned().unwrap_or_else(UniPoly::zero)
        }
    };
    let mut rows = Vec::with_capacity(n);
    for i in 0..dg {
        let mut row = Vec::with_capacity(n);
        for j in 0..n {
            row.push(coeff(&fv, df as i64 - (j as i64 - i as i64)));
        }
        rows.push(row);
    }
    for i in 0..df {
        let mut row = Vec::with_capacity(n);
        for j in 0..n {
            row.push(coeff(&gv, dg as i64 - (j as i64 - i as i64)));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Fraction-free determinant of a square matrix over K[x] (Bareiss). The
/// intermediate divisions are exact by construction.
pub fn bareiss_determinant(matrix: &[Vec<UniPoly>]) -> CResult<UniPoly> {
    let n = matrix.len();
    if n == 0 {
        return Ok(UniPoly::one());
    }
    let mut m: Vec<Vec<UniPoly>> = matrix.to_vec();
    let mut sign_neg = false;
    let mut prev = UniPoly::one();
    for k in 0..n - 1 {
        if m[k][k].is_zero() {
            // pivot search
            let swap = (k + 1..n).find(|&i| !m[i][k].is_zero());
            match swap {
                None => return Ok(UniPoly::zero()),
                Some(i) => {
                    m.swap(k, i);
                    sign_neg = !sign_neg;
                }
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let num = &(&m[k][k] * &m[i][j]) - &(&m[i][k] * &m[k][j]);
                m[i][j] = num.div_exact(&prev)?;
            }
            m[i][k] = UniPoly::zero();
        }
        prev = m[k][k].clone();
    }
    let mut det = m[n - 1][n - 1].clone();
    if sign_neg {
        det = -&det;
    }
    Ok(det)
}

/// Squarefree decomposition of F with respect to y (char 0, Yun): returns the
/// y-content and monic-normalized squarefree factors with multiplicities.
pub fn squarefree_decomposition_y(f: &BiPoly) -> CResult<(UniPoly, Vec<(BiPoly, u32)>)> {
    if f.is_zero() {
        return Err(Error::ZeroPolynomial.into());
    }
    let cont = content_y(f)?;
    let p = primitive_part_y(f)?;
    if p.degree_y() == Some(0) {
        return Ok((cont, Vec::new()));
    }
    let dp = p.partial_derivative(0, 1);
    let g = gcd_bivariate(&p, &dp)?;
    let mut out = Vec::new();
    if g.degree_y() == Some(0) || g.total_degree() == Some(0) {
        out.push((normalize_gcd(p)?, 1));
        return Ok((cont, out));
    }
    let mut w = div_exact_y(&p, &g)?;
    let mut y_part = div_exact_y(&dp, &g)?;
    let mut i = 1u32;
    loop {
        let z = &y_part - &w.partial_derivative(0, 1);
        let a = if z.is_zero() {
            w.clone()
        } else {
            gcd_bivariate(&w, &z)?
        };
        if a.degree_y().unwrap_or(0) > 0 {
            out.push((normalize_gcd(a.clone())?, i));
        }
        if z.is_zero() {
            break;
        }
        w = div_exact_y(&w, &a)?;
        y_part = div_exact_y(&z, &a)?;
        if w.degree_y().unwrap_or(0) == 0 {
            break;
        }
        i += 1;
    }
    Ok((cont, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tower::rat;

    fn q() -> Tower {
        Tower::rationals()
    }

    fn c(n: i64) -> Elem {
        q().rat_elem(rat(n, 1))
    }

    /// Build sum of coeff * x^ex * y^ey from integer triples.
    fn bp(terms: &[(i64, u64, u64)]) -> BiPoly {
        let mut p = BiPoly::zero();
        for (co, ex, ey) in terms {
            p = &p + &BiPoly::monomial(*ex, *ey, c(*co));
        }
        p
    }

    #[test]
    fn zero_polynomial_has_no_degree() {
        assert_eq!(BiPoly::zero().degree_x(), None);
        assert_eq!(BiPoly::zero().total_degree(), None);
        assert_eq!(UniPoly::zero().degree(), None);
        assert_eq!(UniPoly::zero().valuation(), None);
    }

    #[test]
    fn huge_sparse_exponents_work() {
        let p = bp(&[(1, 1_000_000, 0), (-1, 0, 0)]);
        let d = p.partial_derivative(1, 0);
        assert_eq!(d.degree_x(), Some(999_999));
        assert_eq!(d.monomial_count(), 1);
        let prod = &p * &p;
        assert_eq!(prod.degree_x(), Some(2_000_000));
        assert_eq!(prod.monomial_count(), 3);
    }

    #[test]
    fn mixed_partials_commute() {
        let f = bp(&[(3, 2, 3), (-1, 4, 1), (7, 0, 5)]);
        let a = f.partial_derivative(2, 1);
        let b = f.partial_derivative(0, 1).partial_derivative(2, 0);
        assert!(a.equals(&b));
    }

    #[test]
    fn translate_matches_direct_substitution() {
        // (y + 1) - (x + 1)^2 = y - x^2 - 2x
        let f = bp(&[(1, 0, 1), (-1, 2, 0)]);
        let shifted = f.translate(&c(1), &c(1));
        let expected = bp(&[(1, 0, 1), (-1, 2, 0), (-2, 1, 0)]);
        assert!(shifted.equals(&expected));
    }

    #[test]
    fn affine_inverse_composes_to_identity() {
        let map = AffineMap {
            xx: c(2),
            xy: c(1),
            yx: c(1),
            yy: c(1),
            tx: c(3),
            ty: c(-1),
        };
        let inv = map.inverse().unwrap();
        let f = bp(&[(1, 2, 1), (-3, 0, 2), (5, 1, 0)]);
        let round = f.compose_affine(&map).compose_affine(&inv);
        assert!(round.equals(&f));
        let (px, py) = map.apply(&c(4), &c(7));
        let (bx, by) = inv.apply(&px, &py);
        assert!(bx.equals(&c(4)) && by.equals(&c(7)));
    }

    #[test]
    fn gcd_bivariate_extracts_common_branch() {
        // gcd((y-x)^2 (y+1), (y-x)(y-1)) is an associate of y - x
        let ymx = bp(&[(1, 0, 1), (-1, 1, 0)]);
        let f = &(&ymx * &ymx) * &bp(&[(1, 0, 1), (1, 0, 0)]);
        let g = &ymx * &bp(&[(1, 0, 1), (-1, 0, 0)]);
        let h = gcd_bivariate(&f, &g).unwrap();
        assert!(h.equals(&ymx));
    }

    #[test]
    fn gcd_includes_shared_content() {
        // gcd(x*(y-1), x*(y+1)) is an associate of x
        let f = bp(&[(1, 1, 1), (-1, 1, 0)]);
        let g = bp(&[(1, 1, 1), (1, 1, 0)]);
        let h = gcd_bivariate(&f, &g).unwrap();
        assert!(h.equals(&bp(&[(1, 1, 0)])));
    }

    #[test]
    fn div_exact_detects_nonexact() {
        let f = bp(&[(1, 0, 2), (-1, 2, 0)]); // y^2 - x^2
        let g = bp(&[(1, 0, 1), (-1, 1, 0)]); // y - x
        let quot = div_exact_y(&f, &g).unwrap();
        assert!(quot.equals(&bp(&[(1, 0, 1), (1, 1, 0)])));
        let bad = bp(&[(1, 0, 1), (-2, 1, 0)]);
        assert!(div_exact_y(&f, &bad).is_err());
    }

    #[test]
    fn resultant_simple_cases() {
        // Res_y(y - x^2, y) = x^2
        let f = bp(&[(1, 0, 1), (-1, 2, 0)]);
        let g = bp(&[(1, 0, 1)]);
        let r = resultant_y(&f, &g).unwrap();
        let x2 = UniPoly::monomial(2, c(1));
        assert!(r.equals(&x2));
        // coprime lines: Res_y(y - x, y + x) = 2x (up to the convention sign)
        let a = bp(&[(1, 0, 1), (-1, 1, 0)]);
        let b = bp(&[(1, 0, 1), (1, 1, 0)]);
        let r = resultant_y(&a, &b).unwrap();
        assert_eq!(r.degree(), Some(1));
        // common factor forces zero
        let r = resultant_y(&a, &(&a * &b)).unwrap();
        assert!(r.is_zero());
    }

    #[test]
    fn resultant_agrees_with_sylvester_determinant() {
        let f = bp(&[(1, 0, 2), (-1, 3, 0), (2, 1, 1)]);
        let g = bp(&[(1, 0, 3), (-1, 1, 0), (1, 2, 1)]);
        let sub = resultant_y(&f, &g).unwrap();
        let matrix = sylvester_matrix_y(&f, &g).unwrap();
        let det = bareiss_determinant(&matrix).unwrap();
        assert!(sub.equals(&det));
    }

    #[test]
    fn resultant_rejects_y_constant_inputs() {
        let f = bp(&[(1, 1, 0)]);
        let g = bp(&[(1, 0, 1)]);
        assert!(resultant_y(&f, &g).is_err());
    }

    #[test]
    fn squarefree_decomposition_in_y() {
        // x^2 * (y - x)^2 * (y + 1)
        let ymx = bp(&[(1, 0, 1), (-1, 1, 0)]);
        let yp1 = bp(&[(1, 0, 1), (1, 0, 0)]);
        let f = &(&(&ymx * &ymx) * &yp1) * &bp(&[(1, 2, 0)]);
        let (cont, parts) = squarefree_decomposition_y(&f).unwrap();
        assert_eq!(cont.valuation(), Some(2));
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].1, 1);
        assert!(parts[0].0.equals(&yp1));
        assert_eq!(parts[1].1, 2);
        assert!(parts[1].0.equals(&ymx));
    }

    #[test]
    fn unipoly_gcd_and_translate() {
        // gcd((x-1)^2, (x-1)(x+2)) = x - 1
        let xm1 = &UniPoly::x() - &UniPoly::constant(c(1));
        let xp2 = &UniPoly::x() + &UniPoly::constant(c(2));
        let a = &xm1 * &xm1;
        let b = &xm1 * &xp2;
        let g = a.gcd(&b).unwrap();
        assert!(g.equals(&xm1));
        // (x+1)^2 = x^2 + 2x + 1
        let sq = &UniPoly::x() * &UniPoly::x();
        let t = sq.translate(&c(1));
        let expected = &(&sq + &UniPoly::monomial(1, c(2))) + &UniPoly::constant(c(1));
        assert!(t.equals(&expected));
    }

    #[test]
    fn display_is_readable() {
        let f = bp(&[(1, 0, 2), (-2, 1, 1), (1, 2, 0), (-1, 3, 0)]);
        assert_eq!(format!("{f}"), "y^2 - 2*x*y + x^2 - x^3");
    }
}
