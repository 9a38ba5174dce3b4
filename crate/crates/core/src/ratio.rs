//! Exact rational values and their presentation forms.
//!
//! All load arithmetic runs on `BigRational`; floats appear only when a
//! value is rendered. JSON output carries both a 12-significant-digit
//! decimal string and the exact numerator/denominator.

use num_bigint::{BigInt, BigUint};
use num_rational::{BigRational, Ratio};
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

/// Exact rational used throughout the scheme arithmetic.
pub type Rat = BigRational;

/// Builds a rational from machine integers.
pub fn rat(num: i64, den: i64) -> Rat {
    Ratio::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_int(v: u64) -> Rat {
    Ratio::from_integer(BigInt::from(v))
}

pub fn big_ratio(num: BigUint, den: BigUint) -> Rat {
    Ratio::new(BigInt::from(num), BigInt::from(den))
}

/// A small exact fraction with the "p/q" string form, used for the storage
/// fraction mu in parameters and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Frac {
    pub num: u64,
    pub den: u64,
}

impl Frac {
    /// Reduces on construction; a zero denominator is rejected.
    pub fn new(num: u64, den: u64) -> Option<Frac> {
        if den == 0 {
            return None;
        }
        let g = num_integer::gcd(num, den);
        if g == 0 {
            return Some(Frac { num: 0, den: 1 });
        }
        Some(Frac {
            num: num / g,
            den: den / g,
        })
    }

    pub fn to_rat(self) -> Rat {
        rat(self.num as i64, self.den as i64)
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl std::fmt::Display for Frac {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl std::str::FromStr for Frac {
    type Err = String;

    fn from_str(s: &str) -> Result<Frac, String> {
        let err = || format!("expected a fraction like \"1/2\" or an integer, got {s:?}");
        let (num, den) = match s.split_once('/') {
            Some((n, d)) => (
                n.trim().parse::<u64>().map_err(|_| err())?,
                d.trim().parse::<u64>().map_err(|_| err())?,
            ),
            None => (s.trim().parse::<u64>().map_err(|_| err())?, 1),
        };
        Frac::new(num, den).ok_or_else(|| "denominator must be nonzero".to_string())
    }
}

impl Serialize for Frac {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Frac {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Frac, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Serialized form of an exact rational: decimal plus num/den strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatRepr {
    pub decimal: String,
    pub num: String,
    pub den: String,
}

impl RatRepr {
    pub fn of(r: &Rat) -> RatRepr {
        RatRepr {
            decimal: decimal_string(r),
            num: r.numer().to_string(),
            den: r.denom().to_string(),
        }
    }
}

/// Renders an exact rational as a decimal rounded to 12 significant digits,
/// trailing zeros trimmed. Rounding is half-away-from-zero on exact
/// big-integer arithmetic, so the output is platform-independent.
pub fn decimal_string(r: &Rat) -> String {
    const SIG: i64 = 12;
    if r.is_zero() {
        return "0".to_string();
    }
    let neg = r.is_negative();
    let num = r.numer().abs().to_biguint().expect("abs is nonnegative");
    let den = r.denom().abs().to_biguint().expect("denominator nonzero");

    // Number of digits before the decimal point (may be <= 0 for values < 1).
    let mut int_digits = num.to_string().len() as i64 - den.to_string().len() as i64;
    let ten = BigUint::from(10u32);
    // The string-length estimate can be off by one; fix by comparison.
    if scale_cmp(&num, &den, int_digits) {
        int_digits += 1;
    }

    // Round num/den to SIG significant digits: mantissa = round(num * 10^s / den).
    let s = SIG - int_digits;
    let (scaled_num, scaled_den) = if s >= 0 {
        (num * ten.pow(s as u32), den)
    } else {
        (num, den * ten.pow((-s) as u32))
    };
    let (q, rem) = num_integer::Integer::div_rem(&scaled_num, &scaled_den);
    let mut mantissa = q;
    if &rem * 2u32 >= scaled_den {
        mantissa += 1u32;
    }
    let mut digits = mantissa.to_string();
    // Rounding may carry into an extra digit (e.g. 999.. -> 1000..).
    let point = if digits.len() as i64 > SIG {
        int_digits + 1
    } else {
        int_digits
    };

    let text = if point <= 0 {
        let zeros = "0".repeat((-point) as usize);
        format!("0.{zeros}{digits}")
    } else if (point as usize) < digits.len() {
        let (a, b) = digits.split_at(point as usize);
        format!("{a}.{b}")
    } else {
        digits.extend(std::iter::repeat_n('0', point as usize - digits.len()));
        digits
    };
    let text = if text.contains('.') {
        text.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        text
    };
    if neg {
        format!("-{text}")
    } else {
        text
    }
}

/// True when num/den >= 10^e, i.e. the integer part has more digits than
/// the initial estimate assumed.
fn scale_cmp(num: &BigUint, den: &BigUint, e: i64) -> bool {
    let ten = BigUint::from(10u32);
    if e >= 0 {
        num >= &(den * ten.pow(e as u32))
    } else {
        &(num * ten.pow((-e) as u32)) >= den
    }
}

/// Lossy float view for display-side sorting and plotting.
pub fn to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frac_parse_and_display() {
        let f: Frac = "1/2".parse().unwrap();
        assert_eq!(f, Frac::new(1, 2).unwrap());
        assert_eq!(f.to_string(), "1/2");
        let g: Frac = "3".parse().unwrap();
        assert_eq!(g.to_string(), "3");
        assert_eq!("2/4".parse::<Frac>().unwrap().to_string(), "1/2");
        assert!("1/0".parse::<Frac>().is_err());
        assert!("x".parse::<Frac>().is_err());
    }

    #[test]
    fn decimal_rendering() {
        assert_eq!(decimal_string(&rat(19, 5)), "3.8");
        assert_eq!(decimal_string(&rat(21, 5)), "4.2");
        assert_eq!(decimal_string(&rat(0, 1)), "0");
        assert_eq!(decimal_string(&rat(1, 3)), "0.333333333333");
        assert_eq!(decimal_string(&rat(2, 3)), "0.666666666667");
        assert_eq!(decimal_string(&rat(-7, 2)), "-3.5");
        assert_eq!(decimal_string(&rat(1, 1)), "1");
        assert_eq!(decimal_string(&rat(10, 1)), "10");
        assert_eq!(decimal_string(&rat(1, 10)), "0.1");
        assert_eq!(decimal_string(&rat(999999999999999, 1000000000000)), "1000");
        assert_eq!(decimal_string(&rat(1, 1000000)), "0.000001");
        assert_eq!(decimal_string(&rat(123456789, 1)), "123456789");
    }

    #[test]
    fn decimal_rounding_against_float_oracle() {
        let mut rng = crate::rng::DetRng::new(3);
        for _ in 0..2000 {
            let n = (rng.next_u64() % 1_000_000) as i64;
            let d = (rng.next_u64() % 999 + 1) as i64;
            let s = decimal_string(&rat(n, d));
            let parsed: f64 = s.parse().unwrap();
            let exact = n as f64 / d as f64;
            assert!(
                (parsed - exact).abs() <= 1e-9 * exact.abs().max(1.0),
                "{n}/{d} -> {s}"
            );
        }
    }

    #[test]
    fn rat_repr_round_trips_through_json() {
        let r = rat(19, 5);
        let repr = RatRepr::of(&r);
        let json = serde_json::to_string(&repr).unwrap();
        let back: RatRepr = serde_json::from_str(&json).unwrap();
        assert_eq!(back.num, "19");
        assert_eq!(back.den, "5");
        assert_eq!(back.decimal, "3.8");
    }
}
