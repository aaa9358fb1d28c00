//! Arithmetic over GF(2^m) for m in 1..=10.
//!
//! Elements are stored as integers in the power basis. Multiplication and
//! inversion go through exp/log tables built once per [`FieldSpec`]; addition
//! is XOR. The Walsh-Hadamard transform at the bottom of this module turns
//! convolution under field addition into a pointwise product, which is what
//! the check-node update of the outer code needs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported extension degree.
pub const MAX_BITS: u32 = 10;

/// Primitive polynomials for GF(2^m), indexed by m.
const DEFAULT_POLYS: [u32; 11] = [
    0, 0x3, 0x7, 0xB, 0x13, 0x25, 0x43, 0x89, 0x11D, 0x211, 0x409,
];

/// A field element, an integer in `[0, 2^m)`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct FieldElement(pub u16);

impl FieldElement {
    pub const ZERO: FieldElement = FieldElement(0);
    pub const ONE: FieldElement = FieldElement(1);

    #[inline]
    pub fn value(self) -> u16 {
        self.0
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl From<u16> for FieldElement {
    fn from(v: u16) -> Self {
        FieldElement(v)
    }
}

/// GF(2^m) with a fixed reduction polynomial and its exp/log tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldSpec {
    bits: u32,
    size: usize,
    poly: u32,
    // exp has 2(B-1) entries so that exp[log a + log b] needs no reduction.
    exp: Vec<u16>,
    log: Vec<u16>,
}

impl FieldSpec {
    /// Field of size `2^bits` with the default primitive polynomial
    /// (0x11D for GF(256)).
    pub fn new(bits: u32) -> Result<Self> {
        if bits == 0 || bits > MAX_BITS {
            return Err(Error::Field(format!(
                "extension degree {bits} outside 1..={MAX_BITS}"
            )));
        }
        Self::with_poly(bits, DEFAULT_POLYS[bits as usize])
    }

    /// Field of the given size, which must be a power of two.
    pub fn with_size(size: usize) -> Result<Self> {
        if !size.is_power_of_two() || size < 2 {
            return Err(Error::Field(format!(
                "field size {size} is not a power of two >= 2"
            )));
        }
        Self::new(size.trailing_zeros())
    }

    /// Field with an explicit reduction polynomial, given as a bitmask with
    /// bit `m` set. The polynomial must be primitive.
    pub fn with_poly(bits: u32, poly: u32) -> Result<Self> {
        if bits == 0 || bits > MAX_BITS {
            return Err(Error::Field(format!(
                "extension degree {bits} outside 1..={MAX_BITS}"
            )));
        }
        if poly >> bits != 1 {
            return Err(Error::Field(format!(
                "polynomial {poly:#x} does not have degree {bits}"
            )));
        }
        let size = 1usize << bits;
        let order = size - 1;
        let mut exp = vec![0u16; 2 * order];
        let mut log = vec![0u16; size];
        // In GF(2) the generator is 1 itself.
        let generator: u32 = if bits == 1 { 1 } else { 2 };
        let mut acc: u32 = 1;
        for (k, slot) in exp.iter_mut().take(order).enumerate() {
            if acc == 1 && k > 0 {
                return Err(Error::Field(format!(
                    "polynomial {poly:#x} is not primitive (generator order {k})"
                )));
            }
            *slot = acc as u16;
            log[acc as usize] = k as u16;
            acc = clmul_reduce(acc, generator, poly, bits);
        }
        if acc != 1 {
            return Err(Error::Field(format!(
                "polynomial {poly:#x} is not primitive"
            )));
        }
        for k in order..2 * order {
            exp[k] = exp[k - order];
        }
        Ok(FieldSpec {
            bits,
            size,
            poly,
            exp,
            log,
        })
    }

    #[inline]
    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Number of elements B.
    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn poly(&self) -> u32 {
        self.poly
    }

    /// Checked element constructor.
    pub fn element(&self, value: u16) -> Result<FieldElement> {
        if (value as usize) < self.size {
            Ok(FieldElement(value))
        } else {
            Err(Error::Field(format!(
                "value {value} outside GF({})",
                self.size
            )))
        }
    }

    #[inline]
    pub fn add(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        FieldElement(a.0 ^ b.0)
    }

    /// Additive inverse; the identity in characteristic 2.
    #[inline]
    pub fn neg(&self, a: FieldElement) -> FieldElement {
        a
    }

    #[inline]
    pub fn mul(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        if a.0 == 0 || b.0 == 0 {
            return FieldElement::ZERO;
        }
        let k = self.log[a.index()] as usize + self.log[b.index()] as usize;
        FieldElement(self.exp[k])
    }

    pub fn inv(&self, a: FieldElement) -> Result<FieldElement> {
        if a.0 == 0 {
            return Err(Error::ZeroInverse(self.size));
        }
        let order = self.size - 1;
        let k = (order - self.log[a.index()] as usize) % order;
        Ok(FieldElement(self.exp[k]))
    }

    pub fn div(&self, a: FieldElement, b: FieldElement) -> Result<FieldElement> {
        Ok(self.mul(a, self.inv(b)?))
    }

    /// Discrete logarithm base the generator; `None` for zero.
    pub fn log(&self, a: FieldElement) -> Option<usize> {
        (a.0 != 0).then(|| self.log[a.index()] as usize)
    }

    /// Generator raised to `k`.
    pub fn exp(&self, k: usize) -> FieldElement {
        FieldElement(self.exp[k % (self.size - 1)])
    }

    /// Iterator over the nonzero elements.
    pub fn nonzero(&self) -> impl Iterator<Item = FieldElement> + '_ {
        (1..self.size as u16).map(FieldElement)
    }
}

/// Carry-less multiply of `a` and `b` followed by reduction modulo `poly`.
fn clmul_reduce(a: u32, b: u32, poly: u32, bits: u32) -> u32 {
    let mut prod: u32 = 0;
    for i in 0..=bits {
        if (b >> i) & 1 == 1 {
            prod ^= a << i;
        }
    }
    for i in (bits..=2 * bits).rev() {
        if (prod >> i) & 1 == 1 {
            prod ^= poly << (i - bits);
        }
    }
    prod
}

/// Unnormalized fast Walsh-Hadamard transform in place.
///
/// `out[k] = sum_q (-1)^popcount(k & q) v[q]`; applying it twice scales by
/// the length.
pub fn wht_in_place(v: &mut [f64]) -> Result<()> {
    let n = v.len();
    if !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    let mut h = 1;
    while h < n {
        for block in v.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
    Ok(())
}

/// Walsh-Hadamard transform returning a new vector.
pub fn wht(v: &[f64]) -> Result<Vec<f64>> {
    let mut out = v.to_vec();
    wht_in_place(&mut out)?;
    Ok(out)
}
