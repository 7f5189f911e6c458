//! Exact rational scalars and the text encodings shared by the JSON, CSV and
//! CLI layers. Numbers are arbitrary-precision `BigRational`s; the canonical
//! text form is `"p/q"` in lowest terms (`"p"` when the denominator is 1).

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serializer};
use thiserror::Error;

pub type Rational = num_rational::BigRational;

/// Shorthand constructor for small rationals. Panics on a zero denominator.
pub fn rat(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseRationalError {
    #[error("invalid rational {0:?}: expected \"p\" or \"p/q\"")]
    Invalid(String),
    #[error("invalid rational {0:?}: zero denominator")]
    ZeroDenominator(String),
}

/// Parses `"p"` or `"p/q"` with optional sign on either part.
pub fn parse_rational(text: &str) -> Result<Rational, ParseRationalError> {
    let bad = || ParseRationalError::Invalid(text.to_string());
    let parse_int = |s: &str| s.trim().parse::<BigInt>().map_err(|_| bad());
    match text.split_once('/') {
        None => Ok(Rational::from(parse_int(text)?)),
        Some((num, den)) => {
            let num = parse_int(num)?;
            let den = parse_int(den)?;
            if den.is_zero() {
                return Err(ParseRationalError::ZeroDenominator(text.to_string()));
            }
            Ok(Rational::new(num, den))
        }
    }
}

/// Canonical text form: lowest terms, `"p/q"`, or `"p"` when integral.
pub fn format_rational(x: &Rational) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Decimal approximation with at most `sig` significant digits, round half to
/// even, trailing zeros trimmed. Exact for short decimals ("3/2" → "1.5").
/// Falls back to scientific notation beyond 10^±18.
pub fn to_decimal(x: &Rational, sig: u32) -> String {
    assert!(sig >= 1);
    if x.is_zero() {
        return "0".to_string();
    }
    let neg = x.is_negative();
    let a = x.abs();
    // Order of magnitude: e with 10^e <= a < 10^(e+1).
    let mut e: i64 = a.numer().to_string().len() as i64 - a.denom().to_string().len() as i64;
    while a < pow10(e) {
        e -= 1;
    }
    while a >= pow10(e + 1) {
        e += 1;
    }
    // Round a / 10^(e - sig + 1) to an integer of exactly `sig` digits.
    let shift = e - i64::from(sig) + 1;
    let scaled = &a / pow10(shift);
    let mut mantissa = round_half_even(&scaled);
    if mantissa == pow10_int(i64::from(sig)) {
        // Rounded up to the next power of ten: 9.99… → 10.0…
        e += 1;
        mantissa = pow10_int(i64::from(sig) - 1);
    }
    let digits = mantissa.to_string();
    let sign = if neg { "-" } else { "" };
    let body = if e.abs() > 18 {
        let trimmed = digits.trim_end_matches('0');
        let head = &trimmed[..1];
        let tail = &trimmed[1..];
        if tail.is_empty() {
            format!("{head}e{e}")
        } else {
            format!("{head}.{tail}e{e}")
        }
    } else if e < 0 {
        let zeros = "0".repeat((-e - 1) as usize);
        trim_fraction(&format!("0.{zeros}{digits}"))
    } else if (e as usize) + 1 >= digits.len() {
        let zeros = "0".repeat(e as usize + 1 - digits.len());
        format!("{digits}{zeros}")
    } else {
        let (int_part, frac_part) = digits.split_at(e as usize + 1);
        trim_fraction(&format!("{int_part}.{frac_part}"))
    };
    format!("{sign}{body}")
}

fn trim_fraction(s: &str) -> String {
    let t = s.trim_end_matches('0');
    t.trim_end_matches('.').to_string()
}

fn pow10_int(k: i64) -> BigInt {
    BigInt::from(10u32).pow(u32::try_from(k).expect("non-negative exponent"))
}

/// 10^k as a rational, any sign of k.
fn pow10(k: i64) -> Rational {
    if k >= 0 {
        Rational::from(pow10_int(k))
    } else {
        Rational::new(BigInt::one(), pow10_int(-k))
    }
}

fn round_half_even(x: &Rational) -> BigInt {
    let floor = x.floor().to_integer();
    let rem = x - Rational::from(floor.clone());
    let twice = &rem * Rational::from(BigInt::from(2));
    if twice < Rational::one() {
        floor
    } else if twice > Rational::one() {
        floor + 1
    } else if (&floor % 2i32).is_zero() {
        floor
    } else {
        floor + 1
    }
}

/// Accepts a JSON string (`"p/q"`) or integer wherever a rational is expected.
#[derive(Deserialize)]
#[serde(untagged)]
enum RationalInput {
    Text(String),
    Int(i64),
}

impl RationalInput {
    fn into_rational<E: serde::de::Error>(self) -> Result<Rational, E> {
        match self {
            RationalInput::Text(s) => parse_rational(&s).map_err(E::custom),
            RationalInput::Int(i) => Ok(Rational::from(BigInt::from(i))),
        }
    }
}

/// Serde adapter for a rational field: canonical string out, string or integer in.
pub mod serde_rational {
    use super::*;

    pub fn serialize<S: Serializer>(x: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        RationalInput::deserialize(d)?.into_rational()
    }
}

/// Serde adapter for `Vec<Rational>` fields.
pub mod serde_rational_vec {
    use super::*;

    pub fn serialize<S: Serializer>(xs: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(xs.iter().map(format_rational))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        Vec::<RationalInput>::deserialize(d)?
            .into_iter()
            .map(RationalInput::into_rational)
            .collect()
    }
}

/// Serde adapter for `Option<Vec<Rational>>` fields (absent means "unchanged").
pub mod serde_rational_vec_opt {
    use super::*;

    pub fn serialize<S: Serializer>(xs: &Option<Vec<Rational>>, s: S) -> Result<S::Ok, S::Error> {
        match xs {
            Some(v) => serde_rational_vec::serialize(v, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<Option<Vec<Rational>>, D::Error> {
        Ok(Some(serde_rational_vec::deserialize(d)?))
    }
}

/// Parses a rational with an approximate decimal fallback for CLI convenience
/// ("0.25" → 1/4). Decimals are converted exactly (digits over a power of ten).
pub fn parse_rational_or_decimal(text: &str) -> Result<Rational, ParseRationalError> {
    if let Ok(x) = parse_rational(text) {
        return Ok(x);
    }
    let bad = || ParseRationalError::Invalid(text.to_string());
    let (int_part, frac_part) = text.split_once('.').ok_or_else(bad)?;
    if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let numer = digits.trim().parse::<BigInt>().map_err(|_| bad())?;
    let denom = pow10_int(frac_part.len() as i64);
    Ok(Rational::new(numer, denom))
}
