//! Prime-field arithmetic over F_L.
//!
//! The protocol only ever needs tiny primes (the smallest prime not below the
//! number of parties), so elements are plain machine words reduced after every
//! operation. Mixing elements of different fields is reported as
//! [`Error::FieldMismatch`], never coerced.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The prime field F_L.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct PrimeField {
    modulus: u64,
}

/// An element of a [`PrimeField`], always kept in `[0, L-1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldElement {
    value: u64,
    modulus: u64,
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d.saturating_mul(d) <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

impl PrimeField {
    /// Builds F_L, checking primality by trial division.
    pub fn new(modulus: u64) -> Result<Self> {
        // Products of two reduced elements must fit in a u64.
        if !is_prime(modulus) || modulus > u32::MAX as u64 {
            return Err(Error::NotPrime(modulus));
        }
        Ok(Self { modulus })
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    /// Reduces an arbitrary integer into the field.
    pub fn element(&self, value: u64) -> FieldElement {
        FieldElement {
            value: value % self.modulus,
            modulus: self.modulus,
        }
    }

    /// Maps a signed integer into the field (`-1` becomes `L-1`).
    pub fn element_signed(&self, value: i64) -> FieldElement {
        self.element(value.rem_euclid(self.modulus as i64) as u64)
    }

    pub fn zero(&self) -> FieldElement {
        self.element(0)
    }

    pub fn one(&self) -> FieldElement {
        self.element(1)
    }

    /// All elements `0, 1, ..., L-1` in order.
    pub fn elements(&self) -> impl Iterator<Item = FieldElement> + '_ {
        (0..self.modulus).map(move |v| self.element(v))
    }

    /// Uniform draw from F_L.
    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> FieldElement {
        self.element(rng.random_range(0..self.modulus))
    }

    /// Uniform draw from F_L \ {0}.
    pub fn random_nonzero<R: Rng + ?Sized>(&self, rng: &mut R) -> FieldElement {
        self.element(rng.random_range(1..self.modulus))
    }

    fn check(&self, e: &FieldElement) -> Result<()> {
        if e.modulus != self.modulus {
            return Err(Error::FieldMismatch {
                left: self.modulus,
                right: e.modulus,
            });
        }
        Ok(())
    }

    /// Checks that every element of `values` belongs to this field.
    pub fn check_all(&self, values: &[FieldElement]) -> Result<()> {
        values.iter().try_for_each(|v| self.check(v))
    }

    /// `Σ_k x_k q_k mod L`.
    pub fn inner_product(&self, x: &[FieldElement], q: &[FieldElement]) -> Result<FieldElement> {
        if x.len() != q.len() {
            return Err(Error::LengthMismatch {
                left: x.len(),
                right: q.len(),
            });
        }
        let mut acc = 0u64;
        for (a, b) in x.iter().zip(q) {
            self.check(a)?;
            self.check(b)?;
            acc = self.add_raw(acc, self.mul_raw(a.value, b.value));
        }
        Ok(self.element(acc))
    }

    // Raw helpers on reduced representatives, used by the hot enumeration loops.

    #[inline]
    pub(crate) fn add_raw(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.modulus {
            s - self.modulus
        } else {
            s
        }
    }

    #[inline]
    pub(crate) fn sub_raw(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.modulus - b
        }
    }

    #[inline]
    pub(crate) fn mul_raw(&self, a: u64, b: u64) -> u64 {
        (a * b) % self.modulus
    }
}

impl TryFrom<u64> for PrimeField {
    type Error = Error;

    fn try_from(modulus: u64) -> Result<Self> {
        PrimeField::new(modulus)
    }
}

impl From<PrimeField> for u64 {
    fn from(f: PrimeField) -> u64 {
        f.modulus
    }
}

impl fmt::Display for PrimeField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F_{}", self.modulus)
    }
}

/// Picks the protocol field: the smallest prime `L >= num_parties`.
pub fn select_field_size(num_parties: usize) -> Result<PrimeField> {
    if num_parties < 2 {
        return Err(Error::InvalidPartyCount(num_parties));
    }
    let mut candidate = num_parties as u64;
    while !is_prime(candidate) {
        candidate += 1;
    }
    PrimeField::new(candidate)
}

impl FieldElement {
    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn field(&self) -> PrimeField {
        PrimeField {
            modulus: self.modulus,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0
    }

    fn same_field(&self, other: &FieldElement) -> Result<()> {
        if self.modulus != other.modulus {
            return Err(Error::FieldMismatch {
                left: self.modulus,
                right: other.modulus,
            });
        }
        Ok(())
    }

    pub fn checked_add(self, rhs: FieldElement) -> Result<FieldElement> {
        self.same_field(&rhs)?;
        Ok(self.field().element(self.field().add_raw(self.value, rhs.value)))
    }

    pub fn checked_sub(self, rhs: FieldElement) -> Result<FieldElement> {
        self.same_field(&rhs)?;
        Ok(self.field().element(self.field().sub_raw(self.value, rhs.value)))
    }

    pub fn checked_mul(self, rhs: FieldElement) -> Result<FieldElement> {
        self.same_field(&rhs)?;
        Ok(self.field().element(self.field().mul_raw(self.value, rhs.value)))
    }

    /// Additive inverse.
    pub fn negate(self) -> FieldElement {
        self.field().element(self.field().sub_raw(0, self.value))
    }

    /// Multiplicative inverse by Fermat's little theorem; `None` for zero.
    pub fn inverse(self) -> Option<FieldElement> {
        if self.value == 0 {
            return None;
        }
        let f = self.field();
        let (mut base, mut exp, mut acc) = (self.value, self.modulus - 2, 1u64);
        while exp > 0 {
            if exp & 1 == 1 {
                acc = f.mul_raw(acc, base);
            }
            base = f.mul_raw(base, base);
            exp >>= 1;
        }
        Some(f.element(acc))
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}
