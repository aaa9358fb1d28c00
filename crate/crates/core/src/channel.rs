//! Quasi-static Rayleigh SIMO channel `Y = z h^H + W` and its outage
//! probability.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_lr;

use crate::error::{Error, Result};
use crate::stats::complex_normal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Receive antennas M.
    pub antennas: usize,
    /// Per-entry complex noise variance σ².
    pub sigma2: f64,
    /// Scale h by 1/sqrt(M) so that E||h||² = 1.
    #[serde(default)]
    pub normalize_by_m: bool,
}

impl ChannelParams {
    pub fn new(antennas: usize, sigma2: f64) -> Result<Self> {
        let p = ChannelParams {
            antennas,
            sigma2,
            normalize_by_m: false,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.antennas == 0 {
            return Err(Error::InvalidParameter("need at least one antenna".into()));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise variance {} must be positive",
                self.sigma2
            )));
        }
        Ok(())
    }
}

/// One channel vector h, constant over the block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub h: Vec<Complex64>,
}

impl ChannelRealization {
    pub fn antennas(&self) -> usize {
        self.h.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.h)
    }
}

pub(crate) fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum()
}

/// `h_j ~ CN(0, 1)` i.i.d., optionally scaled by 1/sqrt(M).
pub fn sample_rayleigh<R: Rng + ?Sized>(
    antennas: usize,
    normalize_by_m: bool,
    rng: &mut R,
) -> ChannelRealization {
    let var = if normalize_by_m {
        1.0 / antennas as f64
    } else {
        1.0
    };
    ChannelRealization {
        h: (0..antennas).map(|_| complex_normal(rng, var)).collect(),
    }
}

/// Received n x M matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedSignal {
    rows: usize,
    antennas: usize,
    data: Vec<Complex64>,
}

impl ReceivedSignal {
    pub fn from_rows(rows: usize, antennas: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || antennas == 0 {
            return Err(Error::InvalidParameter(
                "received matrix must be non-empty".into(),
            ));
        }
        if data.len() != rows * antennas {
            return Err(Error::dim(
                "received matrix entries",
                rows * antennas,
                data.len(),
            ));
        }
        Ok(ReceivedSignal {
            rows,
            antennas,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.antennas + j]
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Squared Frobenius norm.
    pub fn frobenius_sqr(&self) -> f64 {
        norm_sqr(&self.data)
    }

    /// `Y v` for v of length M.
    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.data
            .chunks(self.antennas)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `Y^H p` for p of length n.
    pub fn adjoint_mul(&self, p: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.antennas];
        for (row, &pi) in self.data.chunks(self.antennas).zip(p) {
            for (o, y) in out.iter_mut().zip(row) {
                *o += y.conj() * pi;
            }
        }
        out
    }
}

/// `Y = z h^H + W` with `W_ij ~ CN(0, σ²)`. σ² = 0 is allowed.
pub fn transmit<R: Rng + ?Sized>(
    z: &[Complex64],
    h: &ChannelRealization,
    sigma2: f64,
    rng: &mut R,
) -> Result<ReceivedSignal> {
    if z.is_empty() || h.h.is_empty() {
        return Err(Error::InvalidParameter("empty signal or channel".into()));
    }
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise variance {sigma2}")));
    }
    let m = h.h.len();
    let mut data = Vec::with_capacity(z.len() * m);
    for &zi in z {
        for hj in &h.h {
            let mut y = zi * hj.conj();
            if sigma2 > 0.0 {
                y += complex_normal(rng, sigma2);
            }
            data.push(y);
        }
    }
    ReceivedSignal::from_rows(z.len(), m, data)
}

/// `P(||h||² < (2^R - 1) / snr)` for `||h||² ~ Gamma(M, 1)`. With
/// `normalize_by_m` the channel is scaled so that `||h||² ~ Gamma(M, 1/M)`.
pub fn outage_probability(
    rate: f64,
    snr: f64,
    antennas: usize,
    normalize_by_m: bool,
) -> Result<f64> {
    if !(rate > 0.0) || !(snr > 0.0) || antennas == 0 {
        return Err(Error::InvalidParameter(format!(
            "outage needs R > 0, snr > 0, M >= 1 (got R={rate}, snr={snr}, M={antennas})"
        )));
    }
    let threshold = (rate.exp2() - 1.0) / snr;
    let x = if normalize_by_m {
        threshold * antennas as f64
    } else {
        threshold
    };
    Ok(gamma_lr(antennas as f64, x))
}
