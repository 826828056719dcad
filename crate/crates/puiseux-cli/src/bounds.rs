//! Closed-form multiplicity bounds and the f·g + 1 root question.
//!
//! Three formulas are exposed exactly as rational or integer values: the
//! headline sparse bound (5/2)d²t² on the local intersection multiplicity
//! of a degree-d curve and a t-monomial curve at a point with nonzero
//! coordinates, the sharper two-part assembly d(t−1) + d(4d+1)t(t−1)/2 it
//! rounds up, and the classical fewnomial bound 2^{t(t−1)/2}(min(n,t)+1)^t
//! for square systems. The f·g + 1 construction pairs two sparse
//! univariate polynomials and asks how multiple a nonzero root of
//! h = f·g + 1 can be; since h has at most t² + 1 monomials, its nonzero
//! roots have multiplicity at most t².

use num_bigint::BigInt;
use num_traits::One;

use puiseux_core::error::Error;
use puiseux_core::identities::hajos_max_multiplicity;
use puiseux_core::poly::UniPoly;
use puiseux_core::tower::Rat;

fn require_positive(name: &str, value: u64) -> Result<(), Error> {
    if value == 0 {
        Err(Error::Domain(format!("{name} must be at least 1")))
    } else {
        Ok(())
    }
}

/// (5/2)·d²·t²: multiplicity cap for a degree-d curve against a t-monomial
/// curve at a common zero with nonzero coordinates.
pub fn theorem_bound(d: u64, t: u64) -> Result<Rat, Error> {
    require_positive("degree", d)?;
    require_positive("monomial count", t)?;
    let d = BigInt::from(d);
    let t = BigInt::from(t);
    Ok(Rat::new(BigInt::from(5) * &d * &d * &t * &t, BigInt::from(2)))
}

/// d(t−1) + d(4d+1)t(t−1)/2: the sum of the two contributions behind the
/// headline bound, one from the power-of-x part and one from the branch
/// valuations. Always at most [`theorem_bound`].
pub fn assembly_bound(d: u64, t: u64) -> Result<Rat, Error> {
    require_positive("degree", d)?;
    require_positive("monomial count", t)?;
    let d = BigInt::from(d);
    let t = BigInt::from(t);
    let line = &d * (&t - 1);
    let branches = &d * (BigInt::from(4) * &d + 1) * &t * (&t - 1);
    Ok(Rat::from_integer(line) + Rat::new(branches, BigInt::from(2)))
}

/// 2^{t(t−1)/2}·(min(n,t)+1)^t: multiplicity cap for a square system of n
/// polynomials in n variables with t monomials in total, at a solution with
/// nonzero coordinates.
pub fn gabrielov_bound(n: u64, t: u64) -> Result<BigInt, Error> {
    require_positive("variable count", n)?;
    require_positive("monomial count", t)?;
    if t > 1 << 16 {
        return Err(Error::Domain(
            "monomial count too large for an exact power".into(),
        ));
    }
    let half_pairs = (t * (t - 1) / 2) as u32;
    let base = BigInt::from(n.min(t) + 1);
    Ok((BigInt::one() << half_pairs) * base.pow(t as u32))
}

/// The sparsity cap on root multiplicities of f·g + 1 when f and g each
/// have at most t monomials.
pub fn fgplus1_cap(t: u64) -> u64 {
    t * t
}

/// One pairing of the f·g + 1 construction.
#[derive(Clone, Debug)]
pub struct FgInstance {
    pub f: UniPoly,
    pub g: UniPoly,
    pub h: UniPoly,
    /// Largest multiplicity among the nonzero roots of h.
    pub multiplicity: u64,
}

/// Form h = f·g + 1 and measure its worst nonzero-root multiplicity.
/// Fails only when h is identically zero (f·g = −1 with constant f, g).
pub fn fgplus1_instance(f: &UniPoly, g: &UniPoly) -> Result<FgInstance, Error> {
    let h = &(f * g) + &UniPoly::one();
    let multiplicity = hajos_max_multiplicity(&h)?;
    Ok(FgInstance {
        f: f.clone(),
        g: g.clone(),
        h,
        multiplicity,
    })
}
