//! Text format for parity-check matrices.
//!
//! ```text
//! L L_inf B poly
//! col:coeff col:coeff ...
//! ```
//!
//! One line per row after the header. Columns are decimal, coefficients and
//! the polynomial are hex (with or without `0x`).

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gf::{FieldElement, FieldSpec};

use super::{Entry, ParityCheckMatrix};

fn parse_hex(s: &str) -> Option<u32> {
    let digits = s
        .strip_prefix("0x")
        .or_else(|| s.strip_prefix("0X"))
        .unwrap_or(s);
    u32::from_str_radix(digits, 16).ok()
}

impl ParityCheckMatrix {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{} {} {} {:#x}\n",
            self.num_cols(),
            self.num_info(),
            self.field().size(),
            self.field().poly()
        );
        for row in self.rows() {
            let mut first = true;
            for e in row {
                if !first {
                    out.push(' ');
                }
                first = false;
                write!(out, "{}:{:x}", e.col, e.coeff.value()).unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Short digest of the text form, used to tag derived tables.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines
            .next()
            .ok_or_else(|| Error::parse("line 1", "missing header `L L_inf B poly`"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                format!("line {hline}"),
                format!("header needs 4 fields, found {}", fields.len()),
            ));
        }
        let num = |k: usize, what: &str| -> Result<usize> {
            fields[k].parse().map_err(|_| {
                Error::parse(
                    format!("line {hline}"),
                    format!("bad {what} `{}`", fields[k]),
                )
            })
        };
        let l = num(0, "L")?;
        let l_inf = num(1, "L_inf")?;
        let b = num(2, "B")?;
        let poly = parse_hex(fields[3]).ok_or_else(|| {
            Error::parse(
                format!("line {hline}"),
                format!("bad polynomial `{}`", fields[3]),
            )
        })?;
        if !b.is_power_of_two() || b < 2 {
            return Err(Error::parse(
                format!("line {hline}"),
                format!("B={b} is not a power of two"),
            ));
        }
        let field = Arc::new(FieldSpec::with_poly(b.trailing_zeros(), poly)?);
        if l_inf >= l {
            return Err(Error::parse(
                format!("line {hline}"),
                "L_inf must be smaller than L",
            ));
        }

        let mut rows = Vec::with_capacity(l - l_inf);
        for (lineno, line) in lines {
            let mut row = Vec::new();
            for tok in line.split_whitespace() {
                let bad = || Error::parse(format!("line {lineno}"), format!("bad entry `{tok}`"));
                let (c, v) = tok.split_once(':').ok_or_else(bad)?;
                let col: usize = c.parse().map_err(|_| bad())?;
                let coeff = parse_hex(v).ok_or_else(bad)?;
                if coeff as usize >= b {
                    return Err(bad());
                }
                row.push(Entry {
                    col,
                    coeff: FieldElement(coeff as u16),
                });
            }
            rows.push(row);
        }
        if rows.len() != l - l_inf {
            return Err(Error::parse(
                "end of input",
                format!("expected {} rows, found {}", l - l_inf, rows.len()),
            ));
        }
        ParityCheckMatrix::from_rows(field, l, rows)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}
