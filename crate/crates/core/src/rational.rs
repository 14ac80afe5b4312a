//! Exact scalars.
//!
//! All structural computations run over arbitrary-precision rationals in
//! canonical form (`gcd(|p|, q) = 1`, `q >= 1`), which `BigRational`
//! maintains after every operation.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn ratio(p: i64, q: i64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

/// Parses `"p/q"`, `"p"`, or a decimal such as `"-1.25"` / `"1e-12"`.
/// Decimals convert exactly (denominator a power of ten).
pub fn parse(s: &str) -> Result<Rational> {
    let s = s.trim();
    let err = || Error::ParseRational(s.to_string());
    if s.is_empty() {
        return Err(err());
    }
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| err())?;
        let q: BigInt = q.trim().parse().map_err(|_| err())?;
        if q.is_zero() {
            return Err(err());
        }
        return Ok(Rational::new(p, q));
    }
    parse_decimal(s).ok_or_else(err)
}

fn parse_decimal(s: &str) -> Option<Rational> {
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.as_bytes().first()? {
        b'-' => (true, &mantissa[1..]),
        b'+' => (false, &mantissa[1..]),
        _ => (false, mantissa),
    };
    let (whole, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if whole.is_empty() && frac.is_empty() {
        return None;
    }
    if !whole
        .bytes()
        .chain(frac.bytes())
        .all(|b| b.is_ascii_digit())
    {
        return None;
    }
    let joined = format!("{whole}{frac}");
    let mut numer: BigInt = joined.parse().ok()?;
    if negative {
        numer = -numer;
    }
    let scale = exponent - i32::try_from(frac.len()).ok()?;
    let ten = BigInt::from(10);
    let value = if scale >= 0 {
        Rational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(numer, num_traits::pow(ten, (-scale) as usize))
    };
    Some(value)
}

/// Canonical string form: `"p"` for integers, `"p/q"` otherwise.
pub fn format(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        if r.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

pub fn max_abs<'a>(values: impl IntoIterator<Item = &'a Rational>) -> Rational {
    values
        .into_iter()
        .map(|v| v.abs())
        .fold(Rational::zero(), |acc, v| if v > acc { v } else { acc })
}

/// Smallest multiple of `2^-bits` that is `>= r`.
pub fn round_up_dyadic(r: &Rational, bits: u32) -> Rational {
    let scale = BigInt::one() << bits;
    let scaled = r.numer() * &scale;
    let (q, rem) = scaled.div_mod_floor(r.denom());
    let q = if rem.is_zero() { q } else { q + 1 };
    Rational::new(q, scale)
}

/// Rational upper bound on `e^a` for `a >= 0`.
///
/// Taylor partial sum to order `N` with `N + 2 >= 2a`, so the remainder is at
/// most twice the first omitted term; the result is then rounded up to a
/// dyadic with 64 fractional bits to keep later arithmetic small.
pub fn exp_upper_bound(a: &Rational) -> Rational {
    assert!(!a.is_negative(), "exp_upper_bound needs a >= 0");
    if a.is_zero() {
        return Rational::one();
    }
    let mut sum = Rational::one();
    let mut term = Rational::one();
    let mut k: u64 = 0;
    let two_a = a * int(2);
    let tiny = ratio(1, 1 << 62);
    loop {
        k += 1;
        term = term * a / Rational::from_integer(BigInt::from(k));
        sum += &term;
        // next omitted term is term * a / (k+1); remainder <= 2 * that once k+2 >= 2a
        let next = &term * a / Rational::from_integer(BigInt::from(k + 1));
        if Rational::from_integer(BigInt::from(k + 2)) >= two_a && next < &tiny * &sum {
            sum += next * int(2);
            break;
        }
    }
    round_up_dyadic(&sum, 64)
}

pub fn factorial(k: u64) -> BigInt {
    (1..=k).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}
