//! Arithmetic in GF(2^m) for 2 <= m <= 24.
//!
//! Elements are stored as `m`-bit integers whose bits are the polynomial
//! coefficients over GF(2). The integer <-> element bijection used by the
//! load-balancing code is the identity on bit patterns, so `h(0) = 0`.

use thiserror::Error;

pub const MIN_DEGREE: u32 = 2;
pub const MAX_DEGREE: u32 = 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("extension degree {0} is outside {MIN_DEGREE}..={MAX_DEGREE}")]
    DegreeOutOfRange(u32),
    #[error("polynomial {poly:#x} does not have degree {m}")]
    WrongDegree { m: u32, poly: u32 },
    #[error("polynomial {0:#x} is reducible over GF(2)")]
    Reducible(u32),
    #[error("value {value} is not an element of GF(2^{m})")]
    NotAnElement { m: u32, value: u64 },
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
}

/// Low-weight irreducible polynomials, indexed by degree.
const DEFAULT_POLYS: [u32; 25] = [
    0, 0, 0x7,       // x^2 + x + 1
    0xb,       // x^3 + x + 1
    0x13,      // x^4 + x + 1
    0x25,      // x^5 + x^2 + 1
    0x43,      // x^6 + x + 1
    0x83,      // x^7 + x + 1
    0x11d,     // x^8 + x^4 + x^3 + x^2 + 1
    0x211,     // x^9 + x^4 + 1
    0x409,     // x^10 + x^3 + 1
    0x805,     // x^11 + x^2 + 1
    0x1053,    // x^12 + x^6 + x^4 + x + 1
    0x201b,    // x^13 + x^4 + x^3 + x + 1
    0x4443,    // x^14 + x^10 + x^6 + x + 1
    0x8003,    // x^15 + x + 1
    0x1100b,   // x^16 + x^12 + x^3 + x + 1
    0x20009,   // x^17 + x^3 + 1
    0x40081,   // x^18 + x^7 + 1
    0x80027,   // x^19 + x^5 + x^2 + x + 1
    0x100009,  // x^20 + x^3 + 1
    0x200005,  // x^21 + x^2 + 1
    0x400003,  // x^22 + x + 1
    0x800021,  // x^23 + x^5 + 1
    0x1000087, // x^24 + x^7 + x^2 + x + 1
];

/// An element of GF(2^m); the bits of `value` are polynomial coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldElem(u32);

impl FieldElem {
    pub const ZERO: FieldElem = FieldElem(0);
    pub const ONE: FieldElem = FieldElem(1);

    pub fn value(self) -> u32 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

/// GF(2^m) defined by a monic irreducible polynomial of degree `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FieldSpec {
    m: u32,
    poly: u32,
}

impl FieldSpec {
    /// Validates `poly` (degree exactly `m`, irreducible) and builds the field.
    pub fn new(m: u32, poly: u32) -> Result<Self, FieldError> {
        if !(MIN_DEGREE..=MAX_DEGREE).contains(&m) {
            return Err(FieldError::DegreeOutOfRange(m));
        }
        if degree(poly as u64) != Some(m) {
            return Err(FieldError::WrongDegree { m, poly });
        }
        if !is_irreducible(poly) {
            return Err(FieldError::Reducible(poly));
        }
        Ok(Self { m, poly })
    }

    /// The field with this crate's fixed default polynomial for degree `m`.
    pub fn with_default_poly(m: u32) -> Result<Self, FieldError> {
        if !(MIN_DEGREE..=MAX_DEGREE).contains(&m) {
            return Err(FieldError::DegreeOutOfRange(m));
        }
        Self::new(m, DEFAULT_POLYS[m as usize])
    }

    pub fn default_poly(m: u32) -> Option<u32> {
        (MIN_DEGREE..=MAX_DEGREE)
            .contains(&m)
            .then(|| DEFAULT_POLYS[m as usize])
    }

    pub fn degree(&self) -> u32 {
        self.m
    }

    pub fn poly(&self) -> u32 {
        self.poly
    }

    /// Number of field elements, `2^m`.
    pub fn order(&self) -> u64 {
        1u64 << self.m
    }

    pub fn elem(&self, value: u64) -> Result<FieldElem, FieldError> {
        if value >= self.order() {
            return Err(FieldError::NotAnElement { m: self.m, value });
        }
        Ok(FieldElem(value as u32))
    }

    /// Integer to field element. Panics if `x >= 2^m`.
    pub fn h(&self, x: u64) -> FieldElem {
        assert!(x < self.order(), "{x} is not below 2^{}", self.m);
        FieldElem(x as u32)
    }

    /// Field element back to its integer.
    pub fn h_inv(&self, a: FieldElem) -> u64 {
        a.0 as u64
    }

    pub fn add(&self, a: FieldElem, b: FieldElem) -> FieldElem {
        FieldElem(a.0 ^ b.0)
    }

    /// Same as [`FieldSpec::add`] in characteristic 2.
    pub fn sub(&self, a: FieldElem, b: FieldElem) -> FieldElem {
        self.add(a, b)
    }

    pub fn mul(&self, a: FieldElem, b: FieldElem) -> FieldElem {
        FieldElem(reduce(clmul(a.0, b.0), self.poly as u64, self.m) as u32)
    }

    pub fn pow(&self, a: FieldElem, mut e: u64) -> FieldElem {
        let mut base = a;
        let mut acc = FieldElem::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// Multiplicative inverse, computed as `a^(2^m - 2)`.
    pub fn inv(&self, a: FieldElem) -> Result<FieldElem, FieldError> {
        if a.is_zero() {
            return Err(FieldError::ZeroInverse);
        }
        Ok(self.pow(a, self.order() - 2))
    }
}

fn degree(p: u64) -> Option<u32> {
    (p != 0).then(|| 63 - p.leading_zeros())
}

/// Carryless product of two polynomials of degree < 32.
fn clmul(a: u32, b: u32) -> u64 {
    let (a, mut b) = (a as u64, b);
    let mut acc = 0u64;
    let mut shift = 0;
    while b != 0 {
        if b & 1 == 1 {
            acc ^= a << shift;
        }
        b >>= 1;
        shift += 1;
    }
    acc
}

/// `p mod poly`, where `poly` has degree `m`.
fn reduce(mut p: u64, poly: u64, m: u32) -> u64 {
    while let Some(d) = degree(p) {
        if d < m {
            break;
        }
        p ^= poly << (d - m);
    }
    p
}

/// Trial division by every polynomial of degree `1..=deg/2`.
fn is_irreducible(poly: u32) -> bool {
    let Some(m) = degree(poly as u64) else {
        return false;
    };
    if m == 0 {
        return false;
    }
    for d in 1..=m / 2 {
        for low in 0..(1u64 << d) {
            let divisor = (1u64 << d) | low;
            if reduce(poly as u64, divisor, d) == 0 {
                return false;
            }
        }
    }
    true
}
