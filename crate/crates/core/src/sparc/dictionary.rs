use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::complex_normal;

use super::CodeSpec;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ensemble {
    /// Sign-randomized, row-subsampled unitary DFT scaled by sqrt(N/n).
    SignedDft,
    /// Dense matrix with i.i.d. CN(0, 1/n) entries.
    GaussianIid,
}

enum Operator {
    SignedDft {
        rows: Vec<usize>,
        signs: Vec<f64>,
        forward: Arc<dyn Fft<f64>>,
        inverse: Arc<dyn Fft<f64>>,
    },
    Dense(Vec<Complex64>),
}

/// The sensing matrix A (n x N).
pub struct Dictionary {
    n: usize,
    big_n: usize,
    ensemble: Ensemble,
    seed: u64,
    op: Operator,
}

impl fmt::Debug for Dictionary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dictionary")
            .field("n", &self.n)
            .field("N", &self.big_n)
            .field("ensemble", &self.ensemble)
            .field("seed", &self.seed)
            .finish()
    }
}

/// Reusable buffers for [`Dictionary::forward_into`] and
/// [`Dictionary::adjoint_into`].
#[derive(Debug, Default, Clone)]
pub struct OpScratch {
    buf: Vec<Complex64>,
    fft: Vec<Complex64>,
}

impl OpScratch {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Dictionary {
    pub fn new(spec: &CodeSpec, ensemble: Ensemble, seed: u64) -> Result<Self> {
        Self::with_dims(spec.channel_uses, spec.total_columns(), ensemble, seed)
    }

    pub fn with_dims(n: usize, big_n: usize, ensemble: Ensemble, seed: u64) -> Result<Self> {
        if n == 0 || n > big_n {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= n <= N, got n={n}, N={big_n}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let op = match ensemble {
            Ensemble::SignedDft => {
                let mut rows = sample(&mut rng, big_n, n).into_vec();
                rows.sort_unstable();
                let signs = (0..big_n)
                    .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                    .collect();
                let mut planner = FftPlanner::new();
                Operator::SignedDft {
                    rows,
                    signs,
                    forward: planner.plan_fft_forward(big_n),
                    inverse: planner.plan_fft_inverse(big_n),
                }
            }
            Ensemble::GaussianIid => {
                let var = 1.0 / n as f64;
                Operator::Dense(
                    (0..n * big_n)
                        .map(|_| complex_normal(&mut rng, var))
                        .collect(),
                )
            }
        };
        Ok(Dictionary {
            n,
            big_n,
            ensemble,
            seed,
            op,
        })
    }

    /// Rows n.
    pub fn rows(&self) -> usize {
        self.n
    }

    /// Columns N.
    pub fn cols(&self) -> usize {
        self.big_n
    }

    pub fn delta(&self) -> f64 {
        self.big_n as f64 / self.n as f64
    }

    pub fn ensemble(&self) -> Ensemble {
        self.ensemble
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Selected DFT frequencies, for the DFT ensemble.
    pub fn selected_rows(&self) -> Option<&[usize]> {
        match &self.op {
            Operator::SignedDft { rows, .. } => Some(rows),
            Operator::Dense(_) => None,
        }
    }

    pub fn signs(&self) -> Option<&[f64]> {
        match &self.op {
            Operator::SignedDft { signs, .. } => Some(signs),
            Operator::Dense(_) => None,
        }
    }

    /// Entry A[r, j].
    pub fn entry(&self, r: usize, j: usize) -> Complex64 {
        match &self.op {
            Operator::SignedDft { rows, signs, .. } => {
                let k = (rows[r] as u128 * j as u128 % self.big_n as u128) as f64;
                let angle = -2.0 * std::f64::consts::PI * k / self.big_n as f64;
                Complex64::from_polar(signs[j] / (self.n as f64).sqrt(), angle)
            }
            Operator::Dense(a) => a[r * self.big_n + j],
        }
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.n).map(|r| self.entry(r, j)).collect()
    }

    /// Row-major n x N copy of A; only sensible for small dimensions.
    pub fn to_dense(&self) -> Vec<Complex64> {
        (0..self.n)
            .flat_map(|r| (0..self.big_n).map(move |j| (r, j)))
            .map(|(r, j)| self.entry(r, j))
            .collect()
    }

    pub fn forward(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut out = vec![ZERO; self.n];
        self.forward_into(x, &mut out, &mut OpScratch::new())?;
        Ok(out)
    }

    pub fn adjoint(&self, u: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut out = vec![ZERO; self.big_n];
        self.adjoint_into(u, &mut out, &mut OpScratch::new())?;
        Ok(out)
    }

    /// `out = A x`.
    pub fn forward_into(
        &self,
        x: &[Complex64],
        out: &mut [Complex64],
        scratch: &mut OpScratch,
    ) -> Result<()> {
        if x.len() != self.big_n {
            return Err(Error::dim("forward input", self.big_n, x.len()));
        }
        if out.len() != self.n {
            return Err(Error::dim("forward output", self.n, out.len()));
        }
        match &self.op {
            Operator::SignedDft {
                rows,
                signs,
                forward,
                ..
            } => {
                let buf = &mut scratch.buf;
                buf.clear();
                buf.extend(x.iter().zip(signs).map(|(v, &s)| v * s));
                scratch.fft.resize(forward.get_inplace_scratch_len(), ZERO);
                forward.process_with_scratch(buf, &mut scratch.fft);
                let scale = 1.0 / (self.n as f64).sqrt();
                for (o, &r) in out.iter_mut().zip(rows) {
                    *o = buf[r] * scale;
                }
            }
            Operator::Dense(a) => {
                for (o, row) in out.iter_mut().zip(a.chunks(self.big_n)) {
                    *o = row.iter().zip(x).map(|(a, x)| a * x).sum();
                }
            }
        }
        Ok(())
    }

    /// `out = A^H u`.
    pub fn adjoint_into(
        &self,
        u: &[Complex64],
        out: &mut [Complex64],
        scratch: &mut OpScratch,
    ) -> Result<()> {
        if u.len() != self.n {
            return Err(Error::dim("adjoint input", self.n, u.len()));
        }
        if out.len() != self.big_n {
            return Err(Error::dim("adjoint output", self.big_n, out.len()));
        }
        match &self.op {
            Operator::SignedDft {
                rows,
                signs,
                inverse,
                ..
            } => {
                out.fill(ZERO);
                for (&r, &v) in rows.iter().zip(u) {
                    out[r] = v;
                }
                scratch.fft.resize(inverse.get_inplace_scratch_len(), ZERO);
                inverse.process_with_scratch(out, &mut scratch.fft);
                let scale = 1.0 / (self.n as f64).sqrt();
                for (o, &s) in out.iter_mut().zip(signs) {
                    *o *= s * scale;
                }
            }
            Operator::Dense(a) => {
                out.fill(ZERO);
                for (row, &v) in a.chunks(self.big_n).zip(u) {
                    for (o, a) in out.iter_mut().zip(row) {
                        *o += a.conj() * v;
                    }
                }
            }
        }
        Ok(())
    }
}
