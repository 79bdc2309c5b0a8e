//! Exact rational scalars and their text representation.
//!
//! Every quantity in this crate (values, prices, slopes, discrepancies) is an
//! arbitrary-precision rational. Text form is either an integer string, a
//! `"p/q"` fraction, or a finite decimal such as `"0.9"`; floats are never
//! accepted or emitted.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::Error;

pub type Rat = BigRational;

/// Shorthand constructor from machine integers.
pub fn rat(num: i64, den: i64) -> Rat {
    assert!(den != 0, "zero denominator");
    Rat::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_int(num: i64) -> Rat {
    Rat::from_integer(BigInt::from(num))
}

/// Parses `"p/q"`, `"p"`, or a finite decimal like `"-3.25"`.
pub fn parse_rat(s: &str) -> Result<Rat, Error> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::Malformed("empty rational".into()));
    }
    if let Some((num, den)) = s.split_once('/') {
        let num: BigInt = num
            .trim()
            .parse()
            .map_err(|_| Error::Malformed(format!("bad numerator in {s:?}")))?;
        let den: BigInt = den
            .trim()
            .parse()
            .map_err(|_| Error::Malformed(format!("bad denominator in {s:?}")))?;
        if den.is_zero() {
            return Err(Error::Malformed(format!("zero denominator in {s:?}")));
        }
        return Ok(Rat::new(num, den));
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        let frac_part = frac_part.trim();
        if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::Malformed(format!("bad decimal {s:?}")));
        }
        let negative = int_part.trim_start().starts_with('-');
        let int_part: BigInt = if int_part == "-" || int_part.is_empty() {
            BigInt::zero()
        } else {
            int_part
                .parse()
                .map_err(|_| Error::Malformed(format!("bad decimal {s:?}")))?
        };
        let scale = BigInt::from(10u8).pow(frac_part.len() as u32);
        let frac: BigInt = frac_part
            .parse()
            .map_err(|_| Error::Malformed(format!("bad decimal {s:?}")))?;
        let magnitude = int_part.abs() * &scale + frac;
        let signed = if negative { -magnitude } else { magnitude };
        return Ok(Rat::new(signed, scale));
    }
    let n: BigInt = s
        .parse()
        .map_err(|_| Error::Malformed(format!("bad rational {s:?}")))?;
    Ok(Rat::from_integer(n))
}

/// Canonical text form: integer string when the denominator is 1, else `"p/q"`.
pub fn format_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Decimal approximation for plotting output (`--approx`).
pub fn approx_f64(r: &Rat) -> f64 {
    let num = r.numer();
    let den = r.denom();
    // Good enough for plot axes; exactness is never required of this value.
    match (i128::try_from(num), i128::try_from(den)) {
        (Ok(n), Ok(d)) => n as f64 / d as f64,
        _ => {
            let digits = 18u32;
            let scaled = num * BigInt::from(10u8).pow(digits) / den;
            match i128::try_from(&scaled) {
                Ok(s) => s as f64 / 10f64.powi(digits as i32),
                Err(_) => f64::INFINITY * if r.is_negative() { -1.0 } else { 1.0 },
            }
        }
    }
}

/// Integer view of a value vector when every entry is a machine-sized
/// integer; lets hot scans skip big-rational arithmetic.
pub(crate) fn as_i64_vec(values: &[Rat]) -> Option<Vec<i64>> {
    values
        .iter()
        .map(|r| {
            if r.denom().is_one() {
                i64::try_from(r.numer()).ok()
            } else {
                None
            }
        })
        .collect()
}
