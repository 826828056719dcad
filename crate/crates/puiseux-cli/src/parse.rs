//! Text grammar for polynomials over the rationals, and its inverse.
//!
//! The grammar is a small LL(1) language:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor ('*' factor)*
//! factor := base ('^' nat)?
//! base   := rational | 'x' | 'y' | '(' expr ')'
//! ```
//!
//! with `rational := digits ('/' digits)?` and optional whitespace between
//! tokens. A single leading `-` before the first term is also accepted.
//! Multiplication is always explicit: `3*x` parses, `3x` does not. Parse
//! results are canonical [`BiPoly`] values, so two texts denote the same
//! polynomial exactly when their parses are equal; [`render`] inverts the
//! parse up to that canonical form. Errors carry the byte offset at which
//! the input stopped making sense.

use std::fmt;

use num_bigint::BigInt;
use num_traits::Zero;

use puiseux_core::error::Error;
use puiseux_core::imult::Point;
use puiseux_core::poly::{BiPoly, UniPoly};
use puiseux_core::tower::{Rat, Tower};

/// Largest exponent the parser accepts. Sparse supports with exponents in
/// the millions are legitimate inputs, so the cap is generous; it exists
/// only to turn typos into errors instead of memory exhaustion.
pub const EXPONENT_CAP: u64 = 1 << 22;

/// A parse failure, with the byte offset where it happened.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parse error at byte {}: {}", self.position, self.message)
    }
}

impl std::error::Error for ParseError {}

/// A parsed polynomial together with the text it came from and which
/// variables actually occurred in that text.
#[derive(Clone, Debug)]
pub struct PolySpec {
    pub source: String,
    pub poly: BiPoly,
    pub uses_x: bool,
    pub uses_y: bool,
}

impl PolySpec {
    /// Total degree, with the zero polynomial reported as degree 0.
    pub fn degree(&self) -> u64 {
        self.poly.total_degree().unwrap_or(0)
    }

    /// Number of monomials with nonzero coefficient.
    pub fn monomials(&self) -> u64 {
        self.poly.monomial_count() as u64
    }

    /// View the polynomial as univariate in x. Fails if y occurs in the
    /// parsed result (a y that cancelled during expansion is fine).
    pub fn to_unipoly(&self) -> Result<UniPoly, Error> {
        to_unipoly_x(&self.poly)
    }
}

/// Convert a bivariate polynomial that does not mention y into a univariate
/// one in x.
pub fn to_unipoly_x(poly: &BiPoly) -> Result<UniPoly, Error> {
    let mut out = UniPoly::zero();
    for ((ex, ey), c) in poly.terms() {
        if *ey > 0 {
            return Err(Error::Domain(
                "the polynomial must be univariate in x".into(),
            ));
        }
        out = &out + &UniPoly::monomial(*ex, c.clone());
    }
    Ok(out)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    uses_x: bool,
    uses_y: bool,
}

impl<'a> Parser<'a> {
    fn fail<T>(&self, message: &str) -> Result<T, ParseError> {
        Err(ParseError {
            position: self.pos,
            message: message.to_string(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    /// Consume a run of ASCII digits and parse it as a big integer.
    fn digits(&mut self) -> Result<BigInt, ParseError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            return self.fail("expected digits");
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        Ok(text.parse::<BigInt>().expect("digit runs parse as integers"))
    }

    fn rational(&mut self) -> Result<Rat, ParseError> {
        let numer = self.digits()?;
        if self.peek() == Some(b'/') {
            self.pos += 1;
            let denom_at = self.pos;
            let denom = self.digits()?;
            if denom.is_zero() {
                return Err(ParseError {
                    position: denom_at,
                    message: "zero denominator".to_string(),
                });
            }
            Ok(Rat::new(numer, denom))
        } else {
            Ok(Rat::from_integer(numer))
        }
    }

    fn exponent(&mut self) -> Result<u64, ParseError> {
        self.skip_ws();
        if self.peek() == Some(b'-') {
            return self.fail("negative exponents are not allowed");
        }
        let at = self.pos;
        let n = self.digits().map_err(|_| ParseError {
            position: at,
            message: "expected a natural-number exponent after '^'".to_string(),
        })?;
        match u64::try_from(&n) {
            Ok(e) if e <= EXPONENT_CAP => Ok(e),
            _ => Err(ParseError {
                position: at,
                message: format!("exponent exceeds the supported cap {EXPONENT_CAP}"),
            }),
        }
    }

    fn base(&mut self) -> Result<BiPoly, ParseError> {
        self.skip_ws();
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                self.skip_ws();
                if self.peek() == Some(b')') {
                    self.pos += 1;
                    Ok(inner)
                } else {
                    self.fail("expected ')'")
                }
            }
            Some(b'x') => {
                self.pos += 1;
                self.uses_x = true;
                Ok(BiPoly::x())
            }
            Some(b'y') => {
                self.pos += 1;
                self.uses_y = true;
                Ok(BiPoly::y())
            }
            Some(c) if c.is_ascii_digit() => {
                let c = self.rational()?;
                Ok(BiPoly::constant(Tower::rationals().rat_elem(c)))
            }
            Some(c) if c.is_ascii_alphabetic() => {
                self.fail(&format!("unknown variable '{}'", c as char))
            }
            _ => self.fail("expected a coefficient, a variable, or '('"),
        }
    }

    fn factor(&mut self) -> Result<BiPoly, ParseError> {
        let b = self.base()?;
        self.skip_ws();
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let e = self.exponent()?;
            Ok(poly_pow(&b, e))
        } else {
            Ok(b)
        }
    }

    fn term(&mut self) -> Result<BiPoly, ParseError> {
        let mut acc = self.factor()?;
        loop {
            self.skip_ws();
            if self.peek() == Some(b'*') {
                self.pos += 1;
                acc = &acc * &self.factor()?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn expr(&mut self) -> Result<BiPoly, ParseError> {
        self.skip_ws();
        let negate = self.peek() == Some(b'-');
        if negate {
            self.pos += 1;
        }
        let mut acc = self.term()?;
        if negate {
            acc = -&acc;
        }
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'+') => {
                    self.bump();
                    acc = &acc + &self.term()?;
                }
                Some(b'-') => {
                    self.bump();
                    acc = &acc - &self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }
}

/// Power by repeated squaring; exponent 0 gives the constant 1.
fn poly_pow(base: &BiPoly, e: u64) -> BiPoly {
    let mut acc = BiPoly::one();
    let mut sq = base.clone();
    let mut e = e;
    while e > 0 {
        if e & 1 == 1 {
            acc = &acc * &sq;
        }
        e >>= 1;
        if e > 0 {
            sq = &sq * &sq;
        }
    }
    acc
}

/// Parse a polynomial in x and y over the rationals.
pub fn parse_poly(text: &str) -> Result<PolySpec, ParseError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        uses_x: false,
        uses_y: false,
    };
    let poly = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return p.fail("unexpected trailing input");
    }
    Ok(PolySpec {
        source: text.to_string(),
        poly,
        uses_x: p.uses_x,
        uses_y: p.uses_y,
    })
}

/// Parse a signed rational such as `3`, `-2`, or `5/4`.
pub fn parse_rational(text: &str) -> Result<Rat, ParseError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        uses_x: false,
        uses_y: false,
    };
    p.skip_ws();
    let negate = p.peek() == Some(b'-');
    if negate {
        p.pos += 1;
        p.skip_ws();
    }
    let r = p.rational()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return p.fail("unexpected trailing input");
    }
    Ok(if negate { -r } else { r })
}

/// Parse a point given as two comma-separated rationals, e.g. `0,0` or
/// `1/2,-3`.
pub fn parse_point(text: &str) -> Result<Point, ParseError> {
    let comma = match text.find(',') {
        Some(ix) => ix,
        None => {
            return Err(ParseError {
                position: text.len(),
                message: "expected two comma-separated coordinates".to_string(),
            })
        }
    };
    let a = parse_rational(&text[..comma])?;
    let b = parse_rational(&text[comma + 1..]).map_err(|e| ParseError {
        position: comma + 1 + e.position,
        message: e.message,
    })?;
    Ok(Point::rational(a, b))
}

/// Render a polynomial with rational coefficients back into the grammar.
///
/// The output is canonical: terms in increasing (x, y) exponent order, no
/// redundant coefficients of magnitude one, `num/den` only for non-integer
/// coefficients. Parsing the result yields a polynomial equal to the input.
/// Coefficients must lie in the base field.
pub fn render(poly: &BiPoly) -> String {
    if poly.is_zero() {
        return "0".to_string();
    }
    let mut out = String::new();
    for ((ex, ey), c) in poly.terms() {
        let c = c
            .try_rat()
            .expect("render requires rational coefficients");
        let negative = c < Rat::zero();
        if out.is_empty() {
            if negative {
                out.push('-');
            }
        } else {
            out.push_str(if negative { " - " } else { " + " });
        }
        let mag = if negative { -c } else { c };
        let mut parts: Vec<String> = Vec::new();
        let one = Rat::from_integer(BigInt::from(1));
        if mag != one || (*ex == 0 && *ey == 0) {
            if mag.denom() == &BigInt::from(1) {
                parts.push(mag.numer().to_string());
            } else {
                parts.push(format!("{}/{}", mag.numer(), mag.denom()));
            }
        }
        for (var, e) in [("x", *ex), ("y", *ey)] {
            if e == 1 {
                parts.push(var.to_string());
            } else if e > 1 {
                parts.push(format!("{var}^{e}"));
            }
        }
        out.push_str(&parts.join("*"));
    }
    out
}

/// Render a univariate polynomial in the variable x.
pub fn render_unipoly(poly: &UniPoly) -> String {
    render(&BiPoly::from_unipoly_x(poly))
}
