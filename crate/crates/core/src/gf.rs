//! Arithmetic over the binary fields GF(2^8) and GF(2^16).
//!
//! Elements are stored as the low `w` bits of a `u16`. Addition is bitwise
//! XOR. Multiplication and inversion go through log/antilog tables generated
//! once per field from the fixed reduction polynomials:
//!
//! * GF(2^8):  x^8 + x^4 + x^3 + x^2 + 1        (bit pattern 0x11D)
//! * GF(2^16): x^16 + x^12 + x^3 + x + 1        (bit pattern 0x1100B)
//!
//! The element 2 (the polynomial x) generates the full multiplicative group
//! under both polynomials, which the table builder asserts.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// An element of GF(2^w), valid when its value is below 2^w.
pub type FieldElement = u16;

/// The two supported field widths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldWidth {
    W8,
    W16,
}

impl serde::Serialize for FieldWidth {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u32(self.bits())
    }
}

impl<'de> serde::Deserialize<'de> for FieldWidth {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let bits = u32::deserialize(d)?;
        FieldWidth::from_bits(bits).map_err(serde::de::Error::custom)
    }
}

impl FieldWidth {
    /// Maps a bit count to a width, rejecting anything but 8 and 16.
    pub fn from_bits(bits: u32) -> Result<Self> {
        match bits {
            8 => Ok(FieldWidth::W8),
            16 => Ok(FieldWidth::W16),
            other => Err(Error::UnsupportedFieldWidth(other)),
        }
    }

    pub fn bits(self) -> u32 {
        match self {
            FieldWidth::W8 => 8,
            FieldWidth::W16 => 16,
        }
    }

    /// Number of field elements, 2^w.
    pub fn order(self) -> u32 {
        1 << self.bits()
    }

    /// All-ones mask over the low w bits.
    pub fn mask(self) -> u16 {
        (self.order() - 1) as u16
    }

    /// Reduction polynomial including the leading x^w term.
    pub fn polynomial(self) -> u32 {
        match self {
            FieldWidth::W8 => 0x11D,
            FieldWidth::W16 => 0x1100B,
        }
    }

    fn tables(self) -> &'static Tables {
        static TABLES_8: OnceLock<Tables> = OnceLock::new();
        static TABLES_16: OnceLock<Tables> = OnceLock::new();
        match self {
            FieldWidth::W8 => TABLES_8.get_or_init(|| Tables::build(self)),
            FieldWidth::W16 => TABLES_16.get_or_init(|| Tables::build(self)),
        }
    }
}

/// Log/antilog tables for one field.
struct Tables {
    /// log[a] = discrete log of a base 2; log[0] unused.
    log: Vec<u32>,
    /// exp[i] = 2^i, doubled in length so sums of two logs index directly.
    exp: Vec<u16>,
}

impl Tables {
    fn build(width: FieldWidth) -> Tables {
        let order = width.order() as usize;
        let group = order - 1;
        let poly = width.polynomial();
        let mut log = vec![0u32; order];
        let mut exp = vec![0u16; 2 * group];
        let mut x: u32 = 1;
        for i in 0..group {
            exp[i] = x as u16;
            exp[i + group] = x as u16;
            log[x as usize] = i as u32;
            x <<= 1;
            if x >> width.bits() != 0 {
                x ^= poly;
            }
        }
        // The generator must cycle back to 1 exactly here, otherwise the
        // polynomial/generator pair would not cover the whole group.
        assert_eq!(x, 1, "generator 2 is not primitive for {poly:#x}");
        Tables { log, exp }
    }
}

/// Field addition (and subtraction): bitwise XOR.
#[inline]
pub fn add(a: FieldElement, b: FieldElement) -> FieldElement {
    a ^ b
}

/// Field multiplication via log/antilog lookup.
#[inline]
pub fn mul(width: FieldWidth, a: FieldElement, b: FieldElement) -> FieldElement {
    if a == 0 || b == 0 {
        return 0;
    }
    let t = width.tables();
    t.exp[(t.log[a as usize] + t.log[b as usize]) as usize]
}

/// Multiplicative inverse; zero has none.
pub fn inv(width: FieldWidth, a: FieldElement) -> Result<FieldElement> {
    if a == 0 {
        return Err(Error::DivisionByZero);
    }
    let t = width.tables();
    let group = width.order() - 1;
    Ok(t.exp[(group - t.log[a as usize]) as usize % group as usize])
}

/// a / b, erroring when b = 0.
pub fn div(width: FieldWidth, a: FieldElement, b: FieldElement) -> Result<FieldElement> {
    Ok(mul(width, a, inv(width, b)?))
}

/// Exponentiation by squaring.
pub fn pow(width: FieldWidth, a: FieldElement, mut e: u64) -> FieldElement {
    let mut base = a;
    let mut acc: FieldElement = 1;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul(width, acc, base);
        }
        base = mul(width, base, base);
        e >>= 1;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: carry-less shift-and-add multiplication with
    /// explicit polynomial reduction, no tables.
    fn bitwise_mul(width: FieldWidth, a: FieldElement, b: FieldElement) -> FieldElement {
        let w = width.bits();
        let mut r: u32 = 0;
        let a = a as u32;
        for i in 0..w {
            if (b >> i) & 1 == 1 {
                r ^= a << i;
            }
        }
        for i in (w..2 * w).rev() {
            if (r >> i) & 1 == 1 {
                r ^= width.polynomial() << (i - w);
            }
        }
        r as u16
    }

    #[test]
    fn rejects_unsupported_width() {
        assert!(matches!(
            FieldWidth::from_bits(12),
            Err(Error::UnsupportedFieldWidth(12))
        ));
        assert_eq!(FieldWidth::from_bits(8).unwrap(), FieldWidth::W8);
        assert_eq!(FieldWidth::from_bits(16).unwrap(), FieldWidth::W16);
    }

    #[test]
    fn mul_annihilator_and_identity() {
        for w in [FieldWidth::W8, FieldWidth::W16] {
            for b in [0u16, 1, 2, 7, w.mask()] {
                assert_eq!(mul(w, 0, b), 0);
                assert_eq!(mul(w, 1, b), b);
            }
        }
    }

    #[test]
    fn gf256_mul_matches_bitwise_oracle_exhaustively() {
        let w = FieldWidth::W8;
        for a in 0..=255u16 {
            for b in 0..=255u16 {
                assert_eq!(mul(w, a, b), bitwise_mul(w, a, b), "a={a} b={b}");
            }
        }
    }

    #[test]
    fn gf65536_mul_matches_bitwise_oracle_sampled() {
        let w = FieldWidth::W16;
        let mut rng = crate::rng::DetRng::new(0xF1E1D);
        for _ in 0..20_000 {
            let a = rng.next_field(w);
            let b = rng.next_field(w);
            assert_eq!(mul(w, a, b), bitwise_mul(w, a, b), "a={a} b={b}");
        }
        // Boundary structure: powers of two against the mask.
        for i in 0..16 {
            let a = 1u16 << i;
            assert_eq!(mul(w, a, w.mask()), bitwise_mul(w, a, w.mask()));
        }
    }

    #[test]
    fn gf256_inverse_exhaustive() {
        let w = FieldWidth::W8;
        for a in 1..=255u16 {
            let b = inv(w, a).unwrap();
            assert_eq!(mul(w, a, b), 1, "a={a}");
        }
        assert!(matches!(inv(w, 0), Err(Error::DivisionByZero)));
        assert_eq!(inv(w, 1).unwrap(), 1);
    }

    #[test]
    fn gf256_inverse_of_two_matches_brute_force() {
        let w = FieldWidth::W8;
        let mut found = None;
        for b in 1..=255u16 {
            if mul(w, 2, b) == 1 {
                found = Some(b);
                break;
            }
        }
        assert_eq!(found, Some(0x8E));
        assert_eq!(inv(w, 2).unwrap(), 0x8E);
    }

    #[test]
    fn gf65536_inverse_spot_checks() {
        let w = FieldWidth::W16;
        let mut rng = crate::rng::DetRng::new(7);
        for _ in 0..5_000 {
            let a = rng.next_field(w);
            if a == 0 {
                continue;
            }
            assert_eq!(mul(w, a, inv(w, a).unwrap()), 1);
        }
    }

    #[test]
    fn gf256_field_axioms_exhaustive_pairs() {
        let w = FieldWidth::W8;
        for a in 0..=255u16 {
            assert_eq!(add(a, a), 0);
            for b in 0..=255u16 {
                assert_eq!(mul(w, a, b), mul(w, b, a));
                assert_eq!(add(a, b), add(b, a));
            }
        }
        // Associativity and distributivity over a structured sample.
        let sample: Vec<u16> = (0..=255).step_by(7).chain([1, 2, 254, 255]).collect();
        for &a in &sample {
            for &b in &sample {
                for &c in &sample {
                    assert_eq!(mul(w, mul(w, a, b), c), mul(w, a, mul(w, b, c)));
                    assert_eq!(
                        mul(w, a, add(b, c)),
                        add(mul(w, a, b), mul(w, a, c))
                    );
                }
            }
        }
    }

    #[test]
    fn pow_matches_repeated_mul() {
        let w = FieldWidth::W16;
        let a = 0x1234;
        let mut acc = 1u16;
        for e in 0..40u64 {
            assert_eq!(pow(w, a, e), acc);
            acc = mul(w, a, acc);
        }
    }

    #[test]
    fn div_roundtrip() {
        let w = FieldWidth::W8;
        for a in 0..=255u16 {
            for b in 1..=255u16 {
                let q = div(w, a, b).unwrap();
                assert_eq!(mul(w, q, b), a);
            }
        }
        assert!(div(w, 1, 0).is_err());
    }
}
