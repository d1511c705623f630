//! Prime field arithmetic.
//!
//! Residues are carried as plain `u64` values in `[0, q)` by the matrix and
//! coding layers, with a [`FieldSpec`] supplying the modulus. [`FieldElement`]
//! is the self-describing variant used at API boundaries where operands from
//! different fields could meet.

use std::fmt;

use crate::error::{Error, Result};

/// A prime field `F_q` with `q` fitting a machine word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldSpec {
    q: u64,
}

impl FieldSpec {
    /// Builds `F_q`, rejecting composite moduli.
    pub fn new(q: u64) -> Result<Self> {
        if q < 2 || !is_prime(q) {
            return Err(Error::NonPrimeModulus(q));
        }
        Ok(Self { q })
    }

    #[inline]
    pub fn q(&self) -> u64 {
        self.q
    }

    /// Bits needed to transmit one symbol, `ceil(log2 q)`.
    pub fn symbol_bits(&self) -> u64 {
        ceil_log2(self.q)
    }

    #[inline]
    pub fn reduce(&self, v: u64) -> u64 {
        v % self.q
    }

    #[inline]
    pub fn reduce_signed(&self, v: i64) -> u64 {
        v.rem_euclid(self.q as i64) as u64
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let (s, overflow) = a.overflowing_add(b);
        if overflow || s >= self.q {
            s.wrapping_sub(self.q)
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            self.q - (b - a)
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.q - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        ((a as u128 * b as u128) % self.q as u128) as u64
    }

    pub fn pow(&self, base: u64, mut exp: u64) -> u64 {
        let mut acc = 1 % self.q;
        let mut b = base % self.q;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, b);
            }
            b = self.mul(b, b);
            exp >>= 1;
        }
        acc
    }

    pub fn inv(&self, a: u64) -> Result<u64> {
        let a = a % self.q;
        if a == 0 {
            return Err(Error::ZeroInverse);
        }
        // extended Euclid on (a, q)
        let (mut r0, mut r1) = (self.q as i128, a as i128);
        let (mut t0, mut t1) = (0i128, 1i128);
        while r1 != 0 {
            let quot = r0 / r1;
            (r0, r1) = (r1, r0 - quot * r1);
            (t0, t1) = (t1, t0 - quot * t1);
        }
        Ok(t0.rem_euclid(self.q as i128) as u64)
    }

    pub fn elem(&self, value: u64) -> FieldElement {
        FieldElement {
            value: value % self.q,
            q: self.q,
        }
    }

    /// Reduces a slice of integers into the field.
    pub fn elems(&self, values: &[u64]) -> Vec<u64> {
        values.iter().map(|&v| v % self.q).collect()
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F_{}", self.q)
    }
}

/// A residue tagged with its modulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldElement {
    value: u64,
    q: u64,
}

impl FieldElement {
    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn field(&self) -> FieldSpec {
        FieldSpec { q: self.q }
    }

    fn same_field(&self, other: &Self) -> Result<FieldSpec> {
        if self.q != other.q {
            return Err(Error::MixedFields {
                left: self.q,
                right: other.q,
            });
        }
        Ok(self.field())
    }

    pub fn checked_add(self, rhs: Self) -> Result<Self> {
        let f = self.same_field(&rhs)?;
        Ok(f.elem(f.add(self.value, rhs.value)))
    }

    pub fn checked_sub(self, rhs: Self) -> Result<Self> {
        let f = self.same_field(&rhs)?;
        Ok(f.elem(f.sub(self.value, rhs.value)))
    }

    pub fn checked_mul(self, rhs: Self) -> Result<Self> {
        let f = self.same_field(&rhs)?;
        Ok(f.elem(f.mul(self.value, rhs.value)))
    }

    pub fn inv(self) -> Result<Self> {
        let f = self.field();
        Ok(f.elem(f.inv(self.value)?))
    }

    pub fn pow(self, exp: u64) -> Self {
        let f = self.field();
        f.elem(f.pow(self.value, exp))
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

/// `ceil(log2 n)` for `n >= 1`; zero for `n <= 1`.
pub fn ceil_log2(n: u64) -> u64 {
    if n <= 1 {
        0
    } else {
        64 - (n - 1).leading_zeros() as u64
    }
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1u64;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, b, m);
        }
        b = mul_mod(b, b, m);
        e >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin; the witness set is exact for all 64-bit inputs.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for &p in &WITNESSES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut r = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        r += 1;
    }
    'witness: for &a in &WITNESSES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..r {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}
