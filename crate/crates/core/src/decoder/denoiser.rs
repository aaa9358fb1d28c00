//! Section-wise posterior denoiser and its mean derivative.
//!
//! For a section `r_ℓ = x_ℓ + noise` with `x_ℓ = sqrt(nP) e_q`, q uniform,
//! and complex noise of variance τ², only the real part carries signal, so
//! the posterior of q is a softmax of `2 sqrt(nP) Re r / τ²`.

use num_complex::Complex64;

use crate::error::Result;
use crate::nbldpc::{siso_decode_into, BpWorkspace, ParityCheckMatrix};

/// Posterior probabilities of one section, written into `out`.
pub fn eta1_section(r: &[Complex64], tau2: f64, amplitude: f64, out: &mut [f64]) {
    let scale = 2.0 * amplitude / tau2;
    let max = r.iter().map(|v| v.re).fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, v) in out.iter_mut().zip(r) {
        *o = (scale * (v.re - max)).exp();
        sum += *o;
    }
    let inv = 1.0 / sum;
    for o in out.iter_mut() {
        *o *= inv;
    }
}

/// [`eta1_section`] applied to every section of `r`.
pub fn eta1(r: &[Complex64], tau2: f64, amplitude: f64, section_size: usize) -> Vec<f64> {
    let mut out = vec![0.0; r.len()];
    eta1_into(r, tau2, amplitude, section_size, &mut out);
    out
}

pub fn eta1_into(r: &[Complex64], tau2: f64, amplitude: f64, section_size: usize, out: &mut [f64]) {
    for (rs, os) in r.chunks(section_size).zip(out.chunks_mut(section_size)) {
        eta1_section(rs, tau2, amplitude, os);
    }
}

/// Mean complex derivative of `sqrt(nP) η1` given its section posteriors:
/// `<nP π (1 - π) / τ²>`.
pub fn onsager_from_posteriors(posteriors: &[f64], tau2: f64, amplitude: f64) -> f64 {
    let sum: f64 = posteriors.iter().map(|&p| p * (1.0 - p)).sum();
    amplitude * amplitude * sum / (tau2 * posteriors.len() as f64)
}

/// Onsager coefficient for input `r`.
pub fn eta1_prime_mean(r: &[Complex64], tau2: f64, amplitude: f64, section_size: usize) -> f64 {
    onsager_from_posteriors(&eta1(r, tau2, amplitude, section_size), tau2, amplitude)
}

/// Output of the full denoiser.
#[derive(Debug, Clone, Default)]
pub struct DenoiserOutput {
    /// Section posteriors before belief propagation.
    pub posteriors: Vec<f64>,
    /// `sqrt(nP)` times the final beliefs.
    pub estimate: Vec<f64>,
    /// Mean derivative of the posterior-mean part.
    pub onsager: f64,
}

/// Reusable buffers for [`denoise`].
#[derive(Debug, Default, Clone)]
pub struct DenoiserWorkspace {
    beliefs: Vec<f64>,
    bp: BpWorkspace,
}

/// `sqrt(nP) η2(η1(r))` with `siso_iters` rounds of belief propagation.
/// With zero rounds the outer code is ignored.
pub fn denoise(
    r: &[Complex64],
    tau2: f64,
    amplitude: f64,
    code: &ParityCheckMatrix,
    siso_iters: usize,
    out: &mut DenoiserOutput,
    ws: &mut DenoiserWorkspace,
) -> Result<()> {
    let b = code.field().size();
    out.posteriors.resize(r.len(), 0.0);
    out.estimate.resize(r.len(), 0.0);
    eta1_into(r, tau2, amplitude, b, &mut out.posteriors);
    out.onsager = onsager_from_posteriors(&out.posteriors, tau2, amplitude);
    if siso_iters == 0 {
        for (e, &p) in out.estimate.iter_mut().zip(&out.posteriors) {
            *e = amplitude * p;
        }
    } else {
        ws.beliefs.resize(r.len(), 0.0);
        siso_decode_into(
            code,
            &out.posteriors,
            siso_iters,
            &mut ws.beliefs,
            &mut ws.bp,
        )?;
        for (e, &p) in out.estimate.iter_mut().zip(&ws.beliefs) {
            *e = amplitude * p;
        }
    }
    Ok(())
}

/// Convenience wrapper around [`denoise`] returning only the estimate.
pub fn eta(
    r: &[Complex64],
    tau2: f64,
    amplitude: f64,
    code: &ParityCheckMatrix,
    siso_iters: usize,
) -> Result<Vec<f64>> {
    let mut out = DenoiserOutput::default();
    denoise(
        r,
        tau2,
        amplitude,
        code,
        siso_iters,
        &mut out,
        &mut DenoiserWorkspace::default(),
    )?;
    Ok(out.estimate)
}
