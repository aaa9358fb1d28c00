//! Initial channel estimates.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{norm_sqr, ReceivedSignal};
use crate::error::{Error, Result};
use crate::sparc::{CodeSpec, Dictionary, OpScratch};
use crate::stats::complex_normal;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMethod {
    /// `h ~ CN(0, I)`, ignoring the observation.
    Random,
    /// `Y^H A 1 / ||x||_1`: correlate with the sum of all columns.
    Avg,
    /// Row-wise posterior-mean denoising of `A^H Y`, summed over sections.
    Mmv,
    /// Dominant right singular vector of Y, with an unresolved phase.
    Svd,
    /// SVD estimate with its phase aligned to [`InitMethod::Avg`].
    SvdAvg,
    /// SVD estimate with its phase aligned to [`InitMethod::Mmv`].
    SvdMmv,
    /// The true channel.
    Oracle,
    /// The true channel times a complex factor; kept fixed unless updates are on.
    FixedMismatch(Complex64),
}

impl InitMethod {
    /// Methods that start from a function of the true channel.
    pub fn uses_truth(&self) -> bool {
        matches!(self, InitMethod::Oracle | InitMethod::FixedMismatch(_))
    }

    /// `magnitude * exp(i * phase)` mismatch.
    pub fn mismatch_polar(magnitude: f64, phase: f64) -> Self {
        InitMethod::FixedMismatch(Complex64::from_polar(magnitude, phase))
    }

    pub fn label(&self) -> String {
        match self {
            InitMethod::Random => "random".into(),
            InitMethod::Avg => "avg".into(),
            InitMethod::Mmv => "mmv".into(),
            InitMethod::Svd => "svd".into(),
            InitMethod::SvdAvg => "svd_avg".into(),
            InitMethod::SvdMmv => "svd_mmv".into(),
            InitMethod::Oracle => "oracle".into(),
            InitMethod::FixedMismatch(d) => format!("mismatch({:.4}{:+.4}i)", d.re, d.im),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitOutcome {
    pub h: Vec<Complex64>,
    /// The SVD failed and the averaging estimate was used instead.
    pub fell_back: bool,
}

pub fn init_channel<R: Rng + ?Sized>(
    y: &ReceivedSignal,
    dict: &Dictionary,
    spec: &CodeSpec,
    method: InitMethod,
    truth: Option<&[Complex64]>,
    rng: &mut R,
) -> Result<InitOutcome> {
    let plain = |h| {
        Ok(InitOutcome {
            h,
            fell_back: false,
        })
    };
    match method {
        InitMethod::Random => plain(
            (0..y.antennas())
                .map(|_| complex_normal(rng, 1.0))
                .collect(),
        ),
        InitMethod::Avg => plain(avg_estimate(y, dict, spec)?),
        InitMethod::Mmv => plain(mmv_estimate(y, dict, spec)?),
        InitMethod::Svd => match svd_estimate(y, spec) {
            Some(h) => plain(h),
            None => fallback(y, dict, spec),
        },
        InitMethod::SvdAvg | InitMethod::SvdMmv => {
            let Some(h_svd) = svd_estimate(y, spec) else {
                return fallback(y, dict, spec);
            };
            let reference = if method == InitMethod::SvdAvg {
                avg_estimate(y, dict, spec)?
            } else {
                mmv_estimate(y, dict, spec)?
            };
            plain(align_phase(&h_svd, &reference))
        }
        InitMethod::Oracle | InitMethod::FixedMismatch(_) => {
            let h = truth.ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "{} initialization needs the true channel",
                    method.label()
                ))
            })?;
            if h.len() != y.antennas() {
                return Err(Error::dim("true channel", y.antennas(), h.len()));
            }
            let factor = match method {
                InitMethod::FixedMismatch(d) => d,
                _ => Complex64::new(1.0, 0.0),
            };
            plain(h.iter().map(|&v| factor * v).collect())
        }
    }
}

fn fallback(y: &ReceivedSignal, dict: &Dictionary, spec: &CodeSpec) -> Result<InitOutcome> {
    log::warn!("SVD initialization failed; using the averaging estimate");
    Ok(InitOutcome {
        h: avg_estimate(y, dict, spec)?,
        fell_back: true,
    })
}

fn check_dims(y: &ReceivedSignal, dict: &Dictionary) -> Result<()> {
    if y.rows() != dict.rows() {
        return Err(Error::dim("received rows", dict.rows(), y.rows()));
    }
    Ok(())
}

/// `Y^H (A 1) / (L sqrt(nP))`.
pub fn avg_estimate(
    y: &ReceivedSignal,
    dict: &Dictionary,
    spec: &CodeSpec,
) -> Result<Vec<Complex64>> {
    check_dims(y, dict)?;
    let ones = vec![Complex64::new(1.0, 0.0); dict.cols()];
    let column_sum = dict.forward(&ones)?;
    let scale = 1.0 / (spec.sections as f64 * spec.amplitude());
    Ok(y.adjoint_mul(&column_sum)
        .into_iter()
        .map(|v| v * scale)
        .collect())
}

/// Denoises each row of `R = A^H Y` as an independent activity-times-Gaussian
/// vector and sums the results. The rows of R estimate `x_j h^H`, so the sum
/// is conjugated to return an estimate of h.
pub fn mmv_estimate(
    y: &ReceivedSignal,
    dict: &Dictionary,
    spec: &CodeSpec,
) -> Result<Vec<Complex64>> {
    check_dims(y, dict)?;
    let (n, m, b) = (y.rows(), y.antennas(), spec.section_size);
    let big_n = dict.cols();
    let mut scratch = OpScratch::new();
    // column-major R, one length-N column per antenna
    let mut r = vec![ZERO; big_n * m];
    for j in 0..m {
        dict.adjoint_into(
            &y.column(j),
            &mut r[j * big_n..(j + 1) * big_n],
            &mut scratch,
        )?;
    }
    let tau2 = y.frobenius_sqr() / (n * m) as f64;
    let np = spec.amplitude() * spec.amplitude();
    let weight = np / (tau2 * (np + tau2));
    let shrink = np / (np + tau2);

    let mut total = vec![ZERO; m];
    let mut logits = vec![0.0; b];
    for l in 0..spec.sections {
        for (i, lg) in logits.iter_mut().enumerate() {
            let row = l * b + i;
            *lg = weight * (0..m).map(|j| r[j * big_n + row].norm_sqr()).sum::<f64>();
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for lg in logits.iter_mut() {
            *lg = (*lg - max).exp();
            sum += *lg;
        }
        for (i, &p) in logits.iter().enumerate() {
            let w = shrink * p / sum;
            let row = l * b + i;
            for (j, t) in total.iter_mut().enumerate() {
                *t += w * r[j * big_n + row];
            }
        }
    }
    let scale = 1.0 / (spec.sections as f64 * spec.amplitude());
    Ok(total.into_iter().map(|v| v.conj() * scale).collect())
}

/// `s_1 v_1 / sqrt(nLP)` from the dominant singular pair of Y; `None` if the
/// decomposition fails.
pub fn svd_estimate(y: &ReceivedSignal, spec: &CodeSpec) -> Option<Vec<Complex64>> {
    let (n, m) = (y.rows(), y.antennas());
    let mat = DMatrix::from_fn(n, m, |i, j| y.get(i, j));
    let svd = mat.try_svd(false, true, f64::EPSILON, 1000)?;
    let v_t = svd.v_t.as_ref()?;
    let (k, &s1) = svd
        .singular_values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    // Y = U S V^H, so the right singular vector is the conjugated row of V^H.
    let scale = s1 / (n as f64 * spec.total_power()).sqrt();
    let h: Vec<Complex64> = (0..m).map(|j| v_t[(k, j)].conj() * scale).collect();
    h.iter().all(|v| v.is_finite()).then_some(h)
}

/// Rotates `h_svd` by the unit-modulus phase that best aligns it with
/// `reference`.
pub fn align_phase(h_svd: &[Complex64], reference: &[Complex64]) -> Vec<Complex64> {
    let phi: Complex64 = reference.iter().zip(h_svd).map(|(r, s)| r.conj() * s).sum();
    if phi.norm() == 0.0 || !phi.is_finite() {
        return h_svd.to_vec();
    }
    let rot = phi.conj() / phi.norm();
    h_svd.iter().map(|&v| rot * v).collect()
}

/// `||h - h_hat||² / M`.
pub fn channel_mse(h: &[Complex64], estimate: &[Complex64]) -> f64 {
    let diff: Vec<Complex64> = h.iter().zip(estimate).map(|(a, b)| a - b).collect();
    norm_sqr(&diff) / h.len() as f64
}
