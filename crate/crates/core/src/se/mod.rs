//! State evolution: scalar recursions that predict the per-iteration
//! behaviour of the AMP and OAMP decoders, driven by empirical denoiser
//! statistics.
//!
//! The effective observation at iteration t is `R = α_t X + τ_t Z` with
//! `Z ~ CN(0, I)`, and the channel estimate behaves like `h / α_t` plus a
//! small Gaussian term.

mod predict;
mod table;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channel::norm_sqr;
use crate::decoder::{eta1_section, DecoderConfig, InitMethod, Variant};
use crate::error::{Error, Result};
use crate::sparc::{CodeSpec, Ensemble};

pub use predict::{avg_init_error_variance, predict_bler, AlphaModel, BlerPrediction};
pub use table::{
    build_bler_table, build_mse_table, BlerTable, CodewordSource, MseTable, TableOptions,
};

/// Per-entry moments of the denoiser output η at one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SectionStats {
    /// `E[X²] / N`.
    pub x_sq: f64,
    /// `E[||η||²] / N`.
    pub eta_sq: f64,
    /// `E[X^T η] / N`.
    pub cross: f64,
    /// Mean derivative of the posterior-mean part.
    pub q: f64,
}

impl SectionStats {
    /// `E|a X - η|² / N`.
    pub fn mse_at(&self, a: Complex64) -> f64 {
        (a.norm_sqr() * self.x_sq - 2.0 * a.re * self.cross + self.eta_sq).max(0.0)
    }

    /// Moments of the divergence-free output `(η - q R) / (1 - q)` when
    /// `R = α X + τ Z`. Returns `(E|η̃|²/N, E[X η̃]/N)`.
    pub fn modified(&self, alpha: Complex64, tau2: f64) -> Result<(f64, Complex64)> {
        let q = self.q;
        if (1.0 - q).abs() < 1e-12 {
            return Err(Error::Divergence(format!("Onsager coefficient {q}")));
        }
        let s = 1.0 / (1.0 - q);
        // E[η Re R] / N = Re α · cross + τ² q by Stein's lemma
        let eta_r = alpha.re * self.cross + tau2 * q;
        let r_sq = alpha.norm_sqr() * self.x_sq + tau2;
        let sq = (self.eta_sq - 2.0 * q * eta_r + q * q * r_sq) * s * s;
        let cross = (self.cross - q * alpha * self.x_sq) * s;
        Ok((sq.max(0.0), cross))
    }
}

/// Source of denoiser statistics at `(Re α, τ²)` for a given number of BP
/// rounds inside the denoiser.
pub trait StatsProvider {
    fn stats(&self, re_alpha: f64, tau2: f64, siso_iters: usize) -> Result<SectionStats>;
}

/// Section-level Monte Carlo for the denoiser without BP. Sections are
/// independent in that case, so a fixed pool of Gaussian draws is reused for
/// every query, which keeps the recursion smooth in its arguments.
#[derive(Debug, Clone)]
pub struct SectionMonteCarlo {
    section_size: usize,
    amplitude: f64,
    sections: usize,
    noise: Vec<f32>,
}

impl SectionMonteCarlo {
    pub fn new(section_size: usize, amplitude: f64, sections: usize, seed: u64) -> Result<Self> {
        if section_size < 2 || sections == 0 || !(amplitude > 0.0) {
            return Err(Error::InvalidParameter(
                "section Monte Carlo needs B >= 2, sections >= 1, amplitude > 0".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // real parts of CN(0, 1) entries, N(0, 1/2)
        let noise = (0..sections * section_size)
            .map(|_| {
                (rng.sample::<f64, _>(StandardNormal) * std::f64::consts::FRAC_1_SQRT_2) as f32
            })
            .collect();
        Ok(SectionMonteCarlo {
            section_size,
            amplitude,
            sections,
            noise,
        })
    }

    pub fn for_spec(spec: &CodeSpec, sections: usize, seed: u64) -> Result<Self> {
        Self::new(spec.section_size, spec.amplitude(), sections, seed)
    }
}

impl StatsProvider for SectionMonteCarlo {
    fn stats(&self, re_alpha: f64, tau2: f64, siso_iters: usize) -> Result<SectionStats> {
        if siso_iters > 0 {
            return Err(Error::Table(
                "section Monte Carlo cannot model BP rounds; use an MSE table".into(),
            ));
        }
        if !(tau2 > 0.0 && tau2.is_finite()) {
            return Err(Error::Divergence(format!(
                "effective noise variance {tau2}"
            )));
        }
        let b = self.section_size;
        let amp = self.amplitude;
        let tau = tau2.sqrt();
        let mut r = vec![Complex64::new(0.0, 0.0); b];
        let mut post = vec![0.0; b];
        let (mut eta_sq, mut cross, mut deriv) = (0.0, 0.0, 0.0);
        for sec in self.noise.chunks(b) {
            for (v, &w) in r.iter_mut().zip(sec) {
                *v = Complex64::new(tau * w as f64, 0.0);
            }
            r[0].re += re_alpha * amp;
            eta1_section(&r, tau2, amp, &mut post);
            for &p in &post {
                eta_sq += p * p;
                deriv += p * (1.0 - p);
            }
            cross += post[0];
        }
        let total = (self.sections * b) as f64;
        Ok(SectionStats {
            x_sq: amp * amp / b as f64,
            eta_sq: amp * amp * eta_sq / total,
            cross: amp * amp * cross / total,
            q: amp * amp * deriv / (tau2 * total),
        })
    }
}

/// Inputs of one state-evolution run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeParams {
    pub variant: Variant,
    pub delta: f64,
    /// Nonzero amplitude `sqrt(nP)`.
    pub amplitude: f64,
    /// `L P`.
    pub total_power: f64,
    pub section_size: usize,
    /// N = L B, used to turn per-entry moments into totals.
    pub total_columns: usize,
    pub sigma2: f64,
    pub h_norm_sqr: f64,
    pub antennas: usize,
    /// `h^H h_init / ||h_init||²`.
    pub alpha0: Complex64,
    pub h_init_norm_sqr: f64,
    /// The channel estimate is re-computed every iteration.
    pub update_channel: bool,
    pub max_iterations: usize,
    pub siso_per_iter: usize,
    pub siso_snr_threshold_db: f64,
    /// Growth of the residual per unit of estimation error,
    /// `tr((I - A^H A)(I - A^H A)^H) / N`: δ for i.i.d. Gaussian
    /// dictionaries and δ - 1 for row-orthogonal ones.
    pub residual_factor: f64,
}

/// `tr((I - A^H A)(I - A^H A)^H) / N` for a dictionary ensemble with unit-norm columns.
pub fn residual_factor(ensemble: Ensemble, delta: f64) -> f64 {
    match ensemble {
        Ensemble::GaussianIid => delta,
        Ensemble::SignedDft => delta - 1.0,
    }
}

impl SeParams {
    /// Parameters for a decoder run on channel `h` started from `h_init`.
    pub fn new(
        spec: &CodeSpec,
        config: &DecoderConfig,
        sigma2: f64,
        h: &[Complex64],
        h_init: &[Complex64],
    ) -> Result<Self> {
        if h.len() != h_init.len() || h.is_empty() {
            return Err(Error::dim("initial channel length", h.len(), h_init.len()));
        }
        let h_init_norm_sqr = norm_sqr(h_init);
        if !(h_init_norm_sqr > 0.0) {
            return Err(Error::InvalidParameter(
                "initial channel estimate is zero".into(),
            ));
        }
        let inner: Complex64 = h.iter().zip(h_init).map(|(a, b)| a.conj() * b).sum();
        Ok(Self::with_alpha0(
            spec,
            config,
            sigma2,
            norm_sqr(h),
            h.len(),
            inner / h_init_norm_sqr,
            h_init_norm_sqr,
        ))
    }

    /// Parameters from the mismatch factor directly.
    pub fn with_alpha0(
        spec: &CodeSpec,
        config: &DecoderConfig,
        sigma2: f64,
        h_norm_sqr: f64,
        antennas: usize,
        alpha0: Complex64,
        h_init_norm_sqr: f64,
    ) -> Self {
        SeParams {
            variant: config.variant,
            delta: spec.delta(),
            amplitude: spec.amplitude(),
            total_power: spec.total_power(),
            section_size: spec.section_size,
            total_columns: spec.total_columns(),
            sigma2,
            h_norm_sqr,
            antennas,
            alpha0,
            h_init_norm_sqr,
            update_channel: config.updates_channel(),
            max_iterations: config.max_iterations,
            siso_per_iter: config.siso_per_iter,
            siso_snr_threshold_db: config.siso_snr_threshold_db,
            residual_factor: residual_factor(Ensemble::SignedDft, spec.delta()),
        }
    }

    pub fn with_ensemble(mut self, ensemble: Ensemble) -> Self {
        self.residual_factor = residual_factor(ensemble, self.delta);
        self
    }

    /// Full channel knowledge: `α ≡ 1`.
    pub fn oracle(
        spec: &CodeSpec,
        config: &DecoderConfig,
        sigma2: f64,
        h_norm_sqr: f64,
        antennas: usize,
    ) -> Self {
        let mut cfg = *config;
        cfg.init = InitMethod::Oracle;
        Self::with_alpha0(
            spec,
            &cfg,
            sigma2,
            h_norm_sqr,
            antennas,
            Complex64::new(1.0, 0.0),
            h_norm_sqr,
        )
    }

    fn siso_rounds(&self, tau2: f64) -> usize {
        let snr_db = 10.0 * (self.amplitude * self.amplitude / tau2).log10();
        if self.siso_per_iter > 0 && snr_db >= self.siso_snr_threshold_db {
            self.siso_per_iter
        } else {
            0
        }
    }

    /// τ² that the decoder computes in its first iteration.
    pub fn initial_tau2(&self) -> f64 {
        let signal = self.alpha0.norm_sqr() * self.total_power;
        let noise = self.sigma2 / self.h_init_norm_sqr;
        match self.variant {
            Variant::Amp => signal + noise,
            Variant::Oamp => noise + (self.delta - 1.0) / self.delta * signal,
        }
    }
}

/// Recursion state before an iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeState {
    pub t: usize,
    pub alpha: Complex64,
    pub tau2: f64,
}

/// Predictions for one iteration, aligned with the decoder's trace: `tau2`
/// is the variance fed to the denoiser, `mse` and `channel_mse` describe the
/// outputs `x_{t+1}` and `h_{t+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeStep {
    pub iteration: usize,
    pub alpha: Complex64,
    pub tau2: f64,
    pub q: f64,
    pub siso_active: bool,
    /// Predicted `||x - x_{t+1}||² / N`.
    pub mse: f64,
    pub alpha_next: Complex64,
    pub b2_next: f64,
    /// Predicted `||h - h_{t+1}||² / M`.
    pub channel_mse: f64,
    /// Overlap of the remodulated estimate with the codeword.
    pub m_next: f64,
    /// Variance of the remodulated estimate around `m z`.
    pub tau_phi2_next: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeTrajectory {
    pub params: SeParams,
    pub steps: Vec<SeStep>,
}

impl SeTrajectory {
    /// The denoiser variance of the last iteration, which determines the
    /// final error probability.
    pub fn final_tau2(&self) -> f64 {
        self.steps.last().map(|s| s.tau2).unwrap_or(f64::NAN)
    }

    /// `||h - h_{t+1}||² / M` after iteration `t` (0-based).
    pub fn channel_mse_prediction(&self, t: usize) -> Result<f64> {
        self.steps.get(t).map(|s| s.channel_mse).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "iteration {t} beyond trajectory of {}",
                self.steps.len()
            ))
        })
    }
}

/// `|1/α - 1|² ||h||² / M + σ² b²`.
pub fn channel_mse_formula(
    alpha: Complex64,
    b2: f64,
    h_norm_sqr: f64,
    antennas: usize,
    sigma2: f64,
) -> f64 {
    (1.0 / alpha - 1.0).norm_sqr() * h_norm_sqr / antennas as f64 + sigma2 * b2
}

pub fn initial_state(params: &SeParams) -> SeState {
    SeState {
        t: 0,
        alpha: params.alpha0,
        tau2: params.initial_tau2(),
    }
}

/// One iteration of the AMP recursion.
pub fn se_step_amp(
    params: &SeParams,
    state: &SeState,
    provider: &dyn StatsProvider,
) -> Result<(SeStep, SeState)> {
    let rounds = params.siso_rounds(state.tau2);
    let s = provider.stats(state.alpha.re, state.tau2, rounds)?;
    let total = params.total_columns as f64 * s.eta_sq;
    let alpha_next = if params.update_channel {
        if !(s.cross > 0.0) {
            return Err(Error::Divergence(format!(
                "estimate uncorrelated with the signal at iteration {}",
                state.t
            )));
        }
        Complex64::new(s.eta_sq / s.cross, 0.0)
    } else {
        state.alpha
    };
    let tau2_next = params.sigma2 * alpha_next.norm_sqr() / params.h_norm_sqr
        + params.residual_factor * s.mse_at(alpha_next);
    Ok(finish(
        params, state, s, rounds, total, s.cross, alpha_next, tau2_next,
    ))
}

/// One iteration of the OAMP recursion.
pub fn se_step_oamp(
    params: &SeParams,
    state: &SeState,
    provider: &dyn StatsProvider,
) -> Result<(SeStep, SeState)> {
    let rounds = params.siso_rounds(state.tau2);
    let s = provider.stats(state.alpha.re, state.tau2, rounds)?;
    let (mod_sq, mod_cross) = s.modified(state.alpha, state.tau2)?;
    let total = params.total_columns as f64 * mod_sq;
    let alpha_next = if params.update_channel {
        if mod_cross.norm() == 0.0 {
            return Err(Error::Divergence(format!(
                "estimate uncorrelated with the signal at iteration {}",
                state.t
            )));
        }
        mod_sq / mod_cross.conj()
    } else {
        state.alpha
    };
    // E|η̃ - α' X|² / N
    let nu2 = (mod_sq - 2.0 * (alpha_next.conj() * mod_cross).re + alpha_next.norm_sqr() * s.x_sq)
        .max(0.0);
    let tau2_next =
        params.sigma2 * alpha_next.norm_sqr() / params.h_norm_sqr + params.residual_factor * nu2;
    Ok(finish(
        params,
        state,
        s,
        rounds,
        total,
        mod_cross.re,
        alpha_next,
        tau2_next,
    ))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    params: &SeParams,
    state: &SeState,
    s: SectionStats,
    rounds: usize,
    remod_energy: f64,
    remod_cross: f64,
    alpha_next: Complex64,
    tau2_next: f64,
) -> (SeStep, SeState) {
    let (b2_next, channel_mse) = if params.update_channel {
        let b2 = remod_energy / (params.sigma2 + remod_energy).powi(2);
        let cm = channel_mse_formula(
            alpha_next,
            b2,
            params.h_norm_sqr,
            params.antennas,
            params.sigma2,
        );
        (b2, cm)
    } else {
        (
            0.0,
            channel_mse_formula(
                alpha_next,
                0.0,
                params.h_norm_sqr,
                params.antennas,
                params.sigma2,
            ),
        )
    };
    let m_next = remod_cross / s.x_sq.sqrt();
    let step = SeStep {
        iteration: state.t + 1,
        alpha: state.alpha,
        tau2: state.tau2,
        q: s.q,
        siso_active: rounds > 0,
        mse: s.mse_at(Complex64::new(1.0, 0.0)),
        alpha_next,
        b2_next,
        channel_mse,
        m_next,
        tau_phi2_next: params.delta
            * (remod_energy / params.total_columns as f64 - m_next * m_next),
    };
    let next = SeState {
        t: state.t + 1,
        alpha: alpha_next,
        tau2: tau2_next,
    };
    (step, next)
}

/// Run the recursion for `params.max_iterations` iterations.
pub fn run_se(params: &SeParams, provider: &dyn StatsProvider) -> Result<SeTrajectory> {
    if !(params.sigma2 >= 0.0) || !(params.h_norm_sqr > 0.0) || !(params.h_init_norm_sqr > 0.0) {
        return Err(Error::InvalidParameter(
            "state evolution needs σ² >= 0 and nonzero channels".into(),
        ));
    }
    let mut state = initial_state(params);
    let mut steps = Vec::with_capacity(params.max_iterations);
    for _ in 0..params.max_iterations {
        let (step, next) = match params.variant {
            Variant::Amp => se_step_amp(params, &state, provider)?,
            Variant::Oamp => se_step_oamp(params, &state, provider)?,
        };
        if !(next.tau2 > 0.0 && next.tau2.is_finite()) {
            return Err(Error::Divergence(format!(
                "state evolution τ² = {} at iteration {}",
                next.tau2, next.t
            )));
        }
        let settled = (next.tau2 - state.tau2).abs() <= 1e-13 * state.tau2
            && (next.alpha - state.alpha).norm() <= 1e-13 * state.alpha.norm();
        steps.push(step);
        state = next;
        if settled {
            // a fixed point repeats itself; skip the remaining provider calls
            while steps.len() < params.max_iterations {
                let mut repeat = step;
                repeat.iteration = steps.len() + 1;
                steps.push(repeat);
            }
            break;
        }
    }
    Ok(SeTrajectory {
        params: *params,
        steps,
    })
}

/// Online mismatch tracking from a decoder trace.
///
/// `h_seq` holds `h_0, h_1, ..., h_T` and `x_norms` holds `||x_{t+1}||²` for
/// `t = 0..T`. Returns `(α_t, b_t²)` for `t = 0..=T`, with `b_0² = 0`.
pub fn estimate_alpha_b_online(
    h_seq: &[Vec<Complex64>],
    x_norms: &[f64],
    sigma2: f64,
    alpha0: Complex64,
) -> Result<Vec<(Complex64, f64)>> {
    if h_seq.is_empty() || x_norms.len() + 1 != h_seq.len() {
        return Err(Error::dim(
            "estimate norms",
            h_seq.len().saturating_sub(1),
            x_norms.len(),
        ));
    }
    let mut out = Vec::with_capacity(h_seq.len());
    out.push((alpha0, 0.0));
    let mut alpha = alpha0;
    for (pair, &xn) in h_seq.windows(2).zip(x_norms) {
        let (cur, next) = (&pair[0], &pair[1]);
        let inner: Complex64 = next.iter().zip(cur).map(|(a, b)| a.conj() * b).sum();
        if inner.norm() == 0.0 {
            return Err(Error::Divergence(
                "consecutive channel estimates are orthogonal".into(),
            ));
        }
        alpha = alpha * norm_sqr(cur) / inner;
        out.push((alpha, xn / (sigma2 + xn).powi(2)));
    }
    Ok(out)
}
