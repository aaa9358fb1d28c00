//! Binary payload formats.
//!
//! Bits files hold raw bytes, bits packed MSB first, zero-padded to a whole
//! byte. Complex matrix files are `SRLC`, a little-endian u32 version, u64
//! rows, u64 cols, then `rows * cols` row-major (re, im) f64 pairs.

use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SRLC";
const VERSION: u32 = 1;
const HEADER: usize = 4 + 4 + 8 + 8;

pub fn pack_bits(bits: &[u8]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        if b != 0 {
            out[i / 8] |= 0x80 >> (i % 8);
        }
    }
    out
}

/// Unpack exactly `count` bits; the byte length must match and padding
/// bits must be zero.
pub fn unpack_bits(bytes: &[u8], count: usize) -> Result<Vec<u8>> {
    if count == 0 {
        return Err(Error::parse("bits", "empty bit payload"));
    }
    let need = count.div_ceil(8);
    if bytes.len() != need {
        return Err(Error::parse(
            format!("byte offset {}", bytes.len().min(need)),
            format!(
                "expected {need} bytes for {count} bits, found {}",
                bytes.len()
            ),
        ));
    }
    let bits: Vec<u8> = (0..need * 8)
        .map(|i| (bytes[i / 8] >> (7 - i % 8)) & 1)
        .collect();
    if let Some(i) = bits[count..].iter().position(|&b| b != 0) {
        return Err(Error::parse(
            format!("byte offset {}", (count + i) / 8),
            "nonzero padding bit",
        ));
    }
    Ok(bits[..count].to_vec())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    pub rows: usize,
    pub cols: usize,
    /// Row-major entries.
    pub data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim("matrix entries", rows * cols, data.len()));
        }
        Ok(ComplexMatrix { rows, cols, data })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER + 16 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.rows as u64).to_le_bytes());
        out.extend_from_slice(&(self.cols as u64).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.re.to_le_bytes());
            out.extend_from_slice(&v.im.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let field = |offset: usize, len: usize| -> Result<&[u8]> {
            bytes.get(offset..offset + len).ok_or_else(|| {
                Error::parse(
                    format!("byte offset {}", bytes.len()),
                    format!("truncated, need {len} bytes at offset {offset}"),
                )
            })
        };
        if field(0, 4)? != MAGIC {
            return Err(Error::parse("byte offset 0", "missing SRLC magic"));
        }
        let version = u32::from_le_bytes(field(4, 4)?.try_into().unwrap());
        if version != VERSION {
            return Err(Error::parse(
                "byte offset 4",
                format!("unsupported version {version}"),
            ));
        }
        let rows = u64::from_le_bytes(field(8, 8)?.try_into().unwrap()) as usize;
        let cols = u64::from_le_bytes(field(16, 8)?.try_into().unwrap()) as usize;
        let count = rows
            .checked_mul(cols)
            .filter(|c| c.checked_mul(16).is_some())
            .ok_or_else(|| Error::parse("byte offset 8", "matrix dimensions overflow"))?;
        let expected = HEADER + 16 * count;
        if bytes.len() < expected {
            return Err(Error::parse(
                format!("byte offset {}", bytes.len()),
                format!("truncated, {rows}x{cols} matrix needs {expected} bytes"),
            ));
        }
        if bytes.len() > expected {
            return Err(Error::parse(
                format!("byte offset {expected}"),
                "trailing bytes after matrix",
            ));
        }
        let f = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let data = (0..count)
            .map(|k| {
                let o = HEADER + 16 * k;
                Complex64::new(f(o), f(o + 8))
            })
            .collect();
        Ok(ComplexMatrix { rows, cols, data })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
