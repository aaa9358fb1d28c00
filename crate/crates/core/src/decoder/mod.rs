//! Non-coherent AMP and OAMP decoding with joint channel estimation.

pub mod denoiser;
pub mod init;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{norm_sqr, ReceivedSignal};
use crate::error::{Error, Result};
use crate::nbldpc::{siso_decode, ParityCheckMatrix};
use crate::sparc::{quantize, CodeSpec, Dictionary, OpScratch, SparseMessage};

pub use denoiser::{
    denoise, eta, eta1, eta1_prime_mean, eta1_section, DenoiserOutput, DenoiserWorkspace,
};
pub use init::{
    align_phase, avg_estimate, channel_mse, init_channel, mmv_estimate, svd_estimate, InitMethod,
    InitOutcome,
};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Amp,
    Oamp,
}

/// Default effective section SNR, `10 log10(nP / τ²)`, above which belief
/// propagation runs inside the denoiser.
pub const DEFAULT_SISO_THRESHOLD_DB: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecoderConfig {
    pub variant: Variant,
    /// Maximum number of iterations T.
    pub max_iterations: usize,
    /// BP rounds applied to the final posteriors when no codeword was found.
    pub final_bp_iterations: usize,
    /// BP rounds inside the denoiser once the gate opens.
    pub siso_per_iter: usize,
    pub siso_snr_threshold_db: f64,
    pub init: InitMethod,
    /// Re-estimate the channel every iteration. Ignored for the oracle
    /// initialization, which keeps the true channel.
    pub update_channel: bool,
    /// Stop as soon as the quantized estimate is a codeword.
    pub early_stop: bool,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig {
            variant: Variant::Amp,
            max_iterations: 20,
            final_bp_iterations: 10,
            siso_per_iter: 1,
            siso_snr_threshold_db: DEFAULT_SISO_THRESHOLD_DB,
            init: InitMethod::Avg,
            update_channel: true,
            early_stop: true,
        }
    }
}

impl DecoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if !self.siso_snr_threshold_db.is_finite() && self.siso_snr_threshold_db != f64::INFINITY {
            return Err(Error::Config(
                "siso_snr_threshold_db must be a number or +inf".into(),
            ));
        }
        Ok(())
    }

    /// Whether the decoder re-estimates the channel between iterations.
    pub fn updates_channel(&self) -> bool {
        self.update_channel && self.init != InitMethod::Oracle
    }
}

/// Ground truth for trace metrics and for truth-based initializations.
#[derive(Debug, Clone)]
pub struct Truth {
    pub message: SparseMessage,
    pub h: Vec<Complex64>,
}

/// Quantities carried between iterations.
#[derive(Debug, Clone)]
pub struct DecoderState {
    /// Iterations completed.
    pub t: usize,
    /// Estimate fed back into the next residual; complex for OAMP.
    pub x: Vec<Complex64>,
    pub p: Vec<Complex64>,
    pub u: Vec<Complex64>,
    pub r: Vec<Complex64>,
    pub h: Vec<Complex64>,
    pub tau2: f64,
    pub q: f64,
    /// Last denoiser output: posteriors, posterior-mean estimate, Onsager term.
    pub denoised: DenoiserOutput,
    /// Whether BP ran inside the last denoiser call.
    pub siso_active: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based iteration index t + 1.
    pub iteration: usize,
    pub tau2: f64,
    pub q: f64,
    pub siso_active: bool,
    /// Squared norm of the denoiser output.
    pub estimate_energy: f64,
    /// Channel estimate after this iteration.
    pub h: Vec<Complex64>,
    pub signal_mse: Option<f64>,
    pub channel_mse: Option<f64>,
    /// `||x_{t+1}||² / <x, x_{t+1}>`, whose limit is the mismatch α_{t+1}.
    pub alpha_proxy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeResult {
    pub message: SparseMessage,
    /// Iteration at which the early-stop check found a codeword.
    pub converged_at: Option<usize>,
    pub iterations: usize,
    /// The returned message satisfies all parity checks.
    pub valid_codeword: bool,
    pub used_final_bp: bool,
    pub init_fell_back: bool,
    pub initial_h: Vec<Complex64>,
    pub final_h: Vec<Complex64>,
    pub initial_channel_mse: Option<f64>,
    pub final_tau2: f64,
    pub trace: Vec<IterationRecord>,
}

impl DecodeResult {
    pub fn final_channel_mse(&self) -> Option<f64> {
        self.trace
            .last()
            .and_then(|r| r.channel_mse)
            .or(self.initial_channel_mse)
    }
}

#[derive(Debug, Default)]
pub struct StepWorkspace {
    op: OpScratch,
    buf: Vec<Complex64>,
    denoiser: DenoiserWorkspace,
}

/// A decoder bound to one code and dictionary.
#[derive(Debug)]
pub struct Decoder<'a> {
    spec: &'a CodeSpec,
    dict: &'a Dictionary,
    code: &'a ParityCheckMatrix,
    config: DecoderConfig,
}

impl<'a> Decoder<'a> {
    pub fn new(
        spec: &'a CodeSpec,
        dict: &'a Dictionary,
        code: &'a ParityCheckMatrix,
        config: DecoderConfig,
    ) -> Result<Self> {
        config.validate()?;
        if dict.rows() != spec.channel_uses || dict.cols() != spec.total_columns() {
            return Err(Error::dim(
                "dictionary columns",
                spec.total_columns(),
                dict.cols(),
            ));
        }
        if code.num_cols() != spec.sections {
            return Err(Error::dim("code length", spec.sections, code.num_cols()));
        }
        if code.num_info() != spec.info_sections {
            return Err(Error::dim(
                "information sections",
                spec.info_sections,
                code.num_info(),
            ));
        }
        if code.field().size() != spec.section_size {
            return Err(Error::dim(
                "field size",
                spec.section_size,
                code.field().size(),
            ));
        }
        if config.siso_per_iter > 0 {
            if let Some(g) = code.girth() {
                if 2 * config.siso_per_iter >= g {
                    return Err(Error::Config(format!(
                        "{} BP rounds per iteration reach around cycles of length {g}",
                        config.siso_per_iter
                    )));
                }
            }
        }
        Ok(Decoder {
            spec,
            dict,
            code,
            config,
        })
    }

    pub fn config(&self) -> &DecoderConfig {
        &self.config
    }

    /// State at t = 0: `x_0 = 0`, `p_0 = 0`, `h_0 = h_init`.
    pub fn initial_state(&self, h_init: Vec<Complex64>) -> DecoderState {
        let (n, big_n) = (self.spec.channel_uses, self.spec.total_columns());
        DecoderState {
            t: 0,
            x: vec![ZERO; big_n],
            p: vec![ZERO; n],
            u: vec![ZERO; n],
            r: vec![ZERO; big_n],
            h: h_init,
            tau2: f64::NAN,
            q: 0.0,
            denoised: DenoiserOutput::default(),
            siso_active: false,
        }
    }

    fn siso_rounds(&self, tau2: f64) -> usize {
        let amp = self.spec.amplitude();
        let snr_db = 10.0 * (amp * amp / tau2).log10();
        if self.config.siso_per_iter > 0 && snr_db >= self.config.siso_snr_threshold_db {
            self.config.siso_per_iter
        } else {
            0
        }
    }

    /// One AMP or OAMP iteration.
    pub fn step(
        &self,
        state: &mut DecoderState,
        y: &ReceivedSignal,
        sigma2: f64,
        ws: &mut StepWorkspace,
    ) -> Result<()> {
        let h_norm = norm_sqr(&state.h);
        if !(h_norm > 0.0 && h_norm.is_finite()) {
            return Err(Error::Divergence(format!(
                "channel estimate has squared norm {h_norm}"
            )));
        }
        let n = self.spec.channel_uses as f64;
        let delta = self.spec.delta();
        let amp = self.spec.amplitude();

        let yh = y.mul_vec(&state.h);
        for ((u, v), p) in state.u.iter_mut().zip(&yh).zip(&state.p) {
            *u = v / h_norm - p;
        }
        self.dict.adjoint_into(&state.u, &mut state.r, &mut ws.op)?;
        for (r, x) in state.r.iter_mut().zip(&state.x) {
            *r += x;
        }
        let residual = norm_sqr(&state.u) / n;
        let tau2 = match self.config.variant {
            Variant::Amp => residual,
            Variant::Oamp => (sigma2 / h_norm + (delta - 1.0) * residual) / delta,
        };
        if !(tau2 > 0.0 && tau2.is_finite()) {
            return Err(Error::Divergence(format!(
                "effective noise variance {tau2} at iteration {}",
                state.t
            )));
        }
        let rounds = self.siso_rounds(tau2);
        denoise(
            &state.r,
            tau2,
            amp,
            self.code,
            rounds,
            &mut state.denoised,
            &mut ws.denoiser,
        )?;
        let q = state.denoised.onsager;

        ws.buf.resize(self.spec.channel_uses, ZERO);
        match self.config.variant {
            Variant::Amp => {
                for (x, &e) in state.x.iter_mut().zip(&state.denoised.estimate) {
                    *x = Complex64::new(e, 0.0);
                }
                self.dict.forward_into(&state.x, &mut ws.buf, &mut ws.op)?;
                for ((p, a), u) in state.p.iter_mut().zip(&ws.buf).zip(&state.u) {
                    *p = a - delta * q * u;
                }
            }
            Variant::Oamp => {
                if (1.0 - q).abs() < 1e-12 {
                    return Err(Error::Divergence(format!(
                        "Onsager coefficient {q} at iteration {}",
                        state.t
                    )));
                }
                let inv = 1.0 / (1.0 - q);
                for ((x, &e), r) in state
                    .x
                    .iter_mut()
                    .zip(&state.denoised.estimate)
                    .zip(&state.r)
                {
                    *x = (e - q * r) * inv;
                }
                self.dict.forward_into(&state.x, &mut state.p, &mut ws.op)?;
            }
        }
        if self.config.updates_channel() {
            let denom = sigma2 + norm_sqr(&state.p);
            state.h = y
                .adjoint_mul(&state.p)
                .into_iter()
                .map(|v| v / denom)
                .collect();
        }
        state.tau2 = tau2;
        state.q = q;
        state.siso_active = rounds > 0;
        state.t += 1;
        Ok(())
    }

    pub fn decode<R: Rng + ?Sized>(
        &self,
        y: &ReceivedSignal,
        sigma2: f64,
        truth: Option<&Truth>,
        rng: &mut R,
    ) -> Result<DecodeResult> {
        if y.rows() != self.spec.channel_uses {
            return Err(Error::dim(
                "received rows",
                self.spec.channel_uses,
                y.rows(),
            ));
        }
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise variance {sigma2}")));
        }
        let b = self.spec.section_size;
        let init = init_channel(
            y,
            self.dict,
            self.spec,
            self.config.init,
            truth.map(|t| t.h.as_slice()),
            rng,
        )?;
        let initial_channel_mse = truth.map(|t| channel_mse(&t.h, &init.h));
        let mut state = self.initial_state(init.h.clone());
        let mut ws = StepWorkspace::default();
        let mut trace = Vec::with_capacity(self.config.max_iterations);
        let mut converged_at = None;
        let mut message = None;

        for _ in 0..self.config.max_iterations {
            self.step(&mut state, y, sigma2, &mut ws)?;
            let est = &state.denoised.estimate;
            let mut record = IterationRecord {
                iteration: state.t,
                tau2: state.tau2,
                q: state.q,
                siso_active: state.siso_active,
                estimate_energy: est.iter().map(|v| v * v).sum(),
                h: state.h.clone(),
                signal_mse: None,
                channel_mse: None,
                alpha_proxy: None,
            };
            if let Some(t) = truth {
                let amp = self.spec.amplitude();
                let mut overlap = 0.0;
                let mut err = 0.0;
                for (sec, &i) in est.chunks(b).zip(t.message.indices()) {
                    for (k, &v) in sec.iter().enumerate() {
                        let d = if k == i { amp - v } else { v };
                        err += d * d;
                    }
                    overlap += amp * sec[i];
                }
                record.signal_mse = Some(err / est.len() as f64);
                record.channel_mse = Some(channel_mse(&t.h, &state.h));
                record.alpha_proxy = Some(record.estimate_energy / overlap);
            }
            trace.push(record);

            if self.config.early_stop {
                let candidate = quantize(est, b);
                if self.code.is_codeword(&candidate.symbols())? {
                    converged_at = Some(state.t);
                    message = Some(candidate);
                    break;
                }
            }
        }

        let mut used_final_bp = false;
        let message = match message {
            Some(m) => m,
            None => {
                let candidate = quantize(&state.denoised.estimate, b);
                if self.code.is_codeword(&candidate.symbols())?
                    || self.config.final_bp_iterations == 0
                {
                    candidate
                } else {
                    used_final_bp = true;
                    let beliefs = siso_decode(
                        self.code,
                        &state.denoised.posteriors,
                        self.config.final_bp_iterations,
                    )?;
                    quantize(&beliefs, b)
                }
            }
        };
        let valid_codeword = self.code.is_codeword(&message.symbols())?;
        Ok(DecodeResult {
            message,
            converged_at,
            iterations: state.t,
            valid_codeword,
            used_final_bp,
            init_fell_back: init.fell_back,
            initial_h: init.h,
            final_h: state.h,
            initial_channel_mse,
            final_tau2: state.tau2,
            trace,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_rayleigh, transmit};
    use crate::gf::FieldElement;
    use crate::nbldpc::generate_code;
    use crate::sparc::{encode_message, Ensemble};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Setup {
        spec: CodeSpec,
        code: ParityCheckMatrix,
        dict: Dictionary,
    }

    fn small() -> Setup {
        // n chosen for a rate well below what 4 antennas support at high SNR
        let spec = CodeSpec::with_unit_power(64, 16, 56, 160).unwrap();
        Setup {
            code: generate_code(64, 56, 16, 2, 1).unwrap(),
            dict: Dictionary::new(&spec, Ensemble::SignedDft, 2).unwrap(),
            spec,
        }
    }

    fn transmission(s: &Setup, sigma2: f64, seed: u64) -> (Truth, ReceivedSignal) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let info: Vec<FieldElement> = (0..s.spec.info_sections)
            .map(|_| FieldElement(rng.random_range(0..s.spec.section_size as u16)))
            .collect();
        let cw = s.code.encode(&info).unwrap();
        let (message, z) = encode_message(&s.spec, &s.dict, &cw).unwrap();
        let h = sample_rayleigh(4, false, &mut rng);
        let y = transmit(&z, &h, sigma2, &mut rng).unwrap();
        (Truth { message, h: h.h }, y)
    }

    #[test]
    fn noiseless_recovery_for_every_init() {
        let s = small();
        let methods = [
            InitMethod::Avg,
            InitMethod::Mmv,
            InitMethod::SvdAvg,
            InitMethod::SvdMmv,
            InitMethod::Oracle,
            InitMethod::Random,
        ];
        for (k, method) in methods.into_iter().enumerate() {
            for variant in [Variant::Amp, Variant::Oamp] {
                let (truth, y) = transmission(&s, 1e-12, 10 + k as u64);
                let cfg = DecoderConfig {
                    init: method,
                    variant,
                    ..DecoderConfig::default()
                };
                let dec = Decoder::new(&s.spec, &s.dict, &s.code, cfg).unwrap();
                let res = dec
                    .decode(&y, 1e-12, Some(&truth), &mut ChaCha8Rng::seed_from_u64(1))
                    .unwrap();
                assert_eq!(res.message, truth.message, "{method:?} {variant:?}");
                assert!(res.valid_codeword);
                if method != InitMethod::Random {
                    let at = res.converged_at.unwrap();
                    assert!(at <= 3, "{method:?} {variant:?} converged at {at}");
                }
            }
        }
    }

    #[test]
    fn oracle_fixed_point_is_stable() {
        let s = small();
        let (truth, y) = transmission(&s, 1e-12, 3);
        let cfg = DecoderConfig {
            init: InitMethod::Oracle,
            early_stop: false,
            max_iterations: 6,
            ..DecoderConfig::default()
        };
        let dec = Decoder::new(&s.spec, &s.dict, &s.code, cfg).unwrap();
        let res = dec
            .decode(&y, 1e-12, Some(&truth), &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        let last = res.trace.last().unwrap();
        assert!(last.signal_mse.unwrap() < 1e-20);
        assert_eq!(last.h, truth.h);
        assert!(last.tau2 < 1e-9);
    }

    #[test]
    fn trace_metrics_are_consistent() {
        let s = small();
        let sigma2 = s.spec.sigma2_for_ebn0_db(4.0);
        let (truth, y) = transmission(&s, sigma2, 5);
        let cfg = DecoderConfig {
            early_stop: false,
            max_iterations: 5,
            ..DecoderConfig::default()
        };
        let dec = Decoder::new(&s.spec, &s.dict, &s.code, cfg).unwrap();
        let res = dec
            .decode(&y, sigma2, Some(&truth), &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        assert_eq!(res.trace.len(), 5);
        assert_eq!(res.iterations, 5);
        assert!(res.initial_channel_mse.is_some());
        for (k, rec) in res.trace.iter().enumerate() {
            assert_eq!(rec.iteration, k + 1);
            assert!(rec.tau2 > 0.0);
            assert!(rec.signal_mse.unwrap() >= 0.0);
        }
        assert_eq!(res.final_h, res.trace.last().unwrap().h);
    }

    #[test]
    fn truth_inits_keep_the_channel_fixed_unless_updating() {
        let s = small();
        let sigma2 = s.spec.sigma2_for_ebn0_db(2.0);
        let (truth, y) = transmission(&s, sigma2, 6);
        let d = Complex64::from_polar(1.1, std::f64::consts::PI / 16.0);
        let run = |init, update_channel| {
            let cfg = DecoderConfig {
                init,
                update_channel,
                early_stop: false,
                max_iterations: 4,
                ..DecoderConfig::default()
            };
            let dec = Decoder::new(&s.spec, &s.dict, &s.code, cfg).unwrap();
            dec.decode(&y, sigma2, Some(&truth), &mut ChaCha8Rng::seed_from_u64(0))
                .unwrap()
        };
        let fixed = run(InitMethod::FixedMismatch(d), false);
        for rec in &fixed.trace {
            for (a, b) in rec.h.iter().zip(&truth.h) {
                assert!((a - d * b).norm() < 1e-15);
            }
        }
        let oracle = run(InitMethod::Oracle, true);
        assert!(oracle.trace.iter().all(|rec| rec.h == truth.h));
        let updated = run(InitMethod::FixedMismatch(d), true);
        assert!(updated.final_channel_mse().unwrap() < 0.5 * updated.initial_channel_mse.unwrap());
        let cfg = DecoderConfig {
            init: InitMethod::FixedMismatch(d),
            ..DecoderConfig::default()
        };
        assert!(Decoder::new(&s.spec, &s.dict, &s.code, cfg)
            .unwrap()
            .decode(&y, sigma2, None, &mut ChaCha8Rng::seed_from_u64(0))
            .is_err());
    }

    #[test]
    fn rejects_inconsistent_parts() {
        let s = small();
        let other = generate_code(64, 60, 16, 2, 1).unwrap();
        assert!(Decoder::new(&s.spec, &s.dict, &other, DecoderConfig::default()).is_err());
        let cfg = DecoderConfig {
            max_iterations: 0,
            ..DecoderConfig::default()
        };
        assert!(Decoder::new(&s.spec, &s.dict, &s.code, cfg).is_err());
        // two-row code with many columns has 4-cycles, so two rounds are too many
        let cfg = DecoderConfig {
            siso_per_iter: 2,
            ..DecoderConfig::default()
        };
        assert!(Decoder::new(&s.spec, &s.dict, &s.code, cfg).is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = DecoderConfig {
            init: InitMethod::mismatch_polar(2.1, 3.5 * std::f64::consts::PI / 16.0),
            variant: Variant::Oamp,
            ..DecoderConfig::default()
        };
        let text = serde_json::to_string(&cfg).unwrap();
        let back: DecoderConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let partial: DecoderConfig = serde_json::from_str(r#"{"init": "svd_avg"}"#).unwrap();
        assert_eq!(partial.init, InitMethod::SvdAvg);
        assert_eq!(partial.max_iterations, 20);
        assert!(serde_json::from_str::<DecoderConfig>(r#"{"bogus": 1}"#).is_err());
    }
}
