//! Seeded Monte-Carlo trials and their aggregation.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{sample_rayleigh, transmit, ChannelParams, ChannelRealization};
use crate::decoder::{DecodeResult, Decoder, DecoderConfig, Truth};
use crate::error::{Error, Result};
use crate::gf::FieldElement;
use crate::nbldpc::{generate_code, ParityCheckMatrix};
use crate::se::{
    build_bler_table, build_mse_table, predict_bler, run_se, BlerPrediction, BlerTable, MseTable,
    SeParams, SeTrajectory, SectionMonteCarlo, StatsProvider, TableOptions,
};
use crate::sparc::{encode_message, CodeSpec, Dictionary};
use crate::stats::{wilson_interval, Z95};

use super::config::{ExperimentConfig, SweepPoint};

/// Code, dictionary and configuration shared by all trials.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub spec: CodeSpec,
    pub dict: Dictionary,
    pub code: ParityCheckMatrix,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let spec = config.code.spec()?;
        let code = match &config.code.parity_check_file {
            Some(path) => ParityCheckMatrix::load(path)?,
            None => generate_code(
                spec.sections,
                spec.info_sections,
                spec.section_size,
                config.code.variable_degree,
                config.code.code_seed,
            )?,
        };
        let dict = Dictionary::new(&spec, config.code.ensemble, config.code.dictionary_seed)?;
        Ok(Experiment {
            config,
            spec,
            dict,
            code,
        })
    }

    pub fn decoder(&self, config: DecoderConfig) -> Result<Decoder<'_>> {
        Decoder::new(&self.spec, &self.dict, &self.code, config)
    }

    pub fn sigma2(&self, point: &SweepPoint) -> f64 {
        self.spec.sigma2_for_ebn0_db(point.ebn0_db)
    }

    /// Independent stream for one trial of one sweep point.
    pub fn trial_rng(&self, point: &SweepPoint, trial: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.trial_seed_base);
        rng.set_stream(((point.index as u64) << 32) | trial as u64);
        rng
    }

    /// Random message, channel draw, transmission and decode with the
    /// truth attached for the error metrics.
    pub fn run_trial(
        &self,
        decoder: &Decoder<'_>,
        point: &SweepPoint,
        trial: usize,
    ) -> Result<(Truth, DecodeResult)> {
        let mut rng = self.trial_rng(point, trial);
        let info: Vec<FieldElement> = (0..self.spec.info_sections)
            .map(|_| FieldElement(rng.random_range(0..self.spec.section_size) as _))
            .collect();
        let cw = self.code.encode(&info)?;
        let (message, z) = encode_message(&self.spec, &self.dict, &cw)?;
        let h = self.draw_channel(point.antennas, &mut rng);
        let sigma2 = self.sigma2(point);
        let y = transmit(&z, &h, sigma2, &mut rng)?;
        let truth = Truth { message, h: h.h };
        let result = decoder.decode(&y, sigma2, Some(&truth), &mut rng)?;
        Ok((truth, result))
    }

    fn draw_channel(&self, antennas: usize, rng: &mut ChaCha8Rng) -> ChannelRealization {
        let mut h = sample_rayleigh(antennas, self.config.channel.normalize_by_m, rng);
        if let Some(target) = self.config.channel.fixed_norm_sqr {
            let g = (target / h.norm_sqr()).sqrt();
            h.h.iter_mut().for_each(|v| *v *= g);
        }
        h
    }
}

/// One trial's outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub trial: usize,
    /// RNG stream id, `point << 32 | trial`, under `trial_seed_base`.
    pub stream: u64,
    pub seed_base: u64,
    pub ebn0_db: f64,
    pub antennas: usize,
    pub block_error: bool,
    /// Wrong message that nevertheless satisfies every parity check.
    pub undetected_error: bool,
    pub converged_at: Option<usize>,
    pub iterations: usize,
    pub initial_cmse: f64,
    pub final_cmse: f64,
    pub final_tau2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub ebn0_db: f64,
    pub antennas: usize,
    pub trials: usize,
    pub errors: usize,
    pub undetected: usize,
    pub bler: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    pub mean_initial_cmse: f64,
    pub mean_final_cmse: f64,
    pub mean_iters: f64,
}

pub fn summarize(point: &SweepPoint, records: &[RunRecord]) -> PointSummary {
    let n = records.len();
    let errors = records.iter().filter(|r| r.block_error).count();
    let (lo, hi) = wilson_interval(errors as u64, n as u64, Z95);
    let mean = |f: &dyn Fn(&RunRecord) -> f64| records.iter().map(f).sum::<f64>() / n.max(1) as f64;
    PointSummary {
        ebn0_db: point.ebn0_db,
        antennas: point.antennas,
        trials: n,
        errors,
        undetected: records.iter().filter(|r| r.undetected_error).count(),
        bler: errors as f64 / n.max(1) as f64,
        ci95_low: lo,
        ci95_high: hi,
        mean_initial_cmse: mean(&|r| r.initial_cmse),
        mean_final_cmse: mean(&|r| r.final_cmse),
        mean_iters: mean(&|r| r.iterations as f64),
    }
}

/// All trials of one sweep point, in trial order regardless of scheduling.
pub fn run_point(exp: &Experiment, point: &SweepPoint) -> Result<Vec<RunRecord>> {
    run_trials(exp, point, exp.config.trials)
}

/// Trials `0..trials` of `point`.
pub fn run_trials(exp: &Experiment, point: &SweepPoint, trials: usize) -> Result<Vec<RunRecord>> {
    let decoder = exp.decoder(exp.config.decoder)?;
    (0..trials)
        .into_par_iter()
        .map(|trial| {
            let (truth, res) = exp.run_trial(&decoder, point, trial)?;
            let block_error = res.message != truth.message;
            Ok(RunRecord {
                trial,
                stream: ((point.index as u64) << 32) | trial as u64,
                seed_base: exp.config.trial_seed_base,
                ebn0_db: point.ebn0_db,
                antennas: point.antennas,
                block_error,
                undetected_error: block_error && res.valid_codeword,
                converged_at: res.converged_at,
                iterations: res.iterations,
                initial_cmse: res.initial_channel_mse.unwrap_or(f64::NAN),
                final_cmse: res.final_channel_mse().unwrap_or(f64::NAN),
                final_tau2: res.final_tau2,
            })
        })
        .collect()
}

pub struct SimulationOutput {
    pub summaries: Vec<PointSummary>,
    pub records: Vec<RunRecord>,
}

pub fn simulate(exp: &Experiment) -> Result<SimulationOutput> {
    let mut summaries = Vec::new();
    let mut records = Vec::new();
    for point in exp.config.points() {
        let recs = run_point(exp, &point)?;
        let s = summarize(&point, &recs);
        log::info!(
            "Eb/N0 {:.2} dB, M={}: {} / {} block errors",
            s.ebn0_db,
            s.antennas,
            s.errors,
            s.trials
        );
        summaries.push(s);
        records.extend(recs);
    }
    Ok(SimulationOutput { summaries, records })
}

/// Trial-averaged empirical trace next to the averaged SE prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeComparisonRow {
    pub ebn0_db: f64,
    pub antennas: usize,
    pub iteration: usize,
    pub tau2_empirical: f64,
    pub tau2_se: f64,
    pub mse_empirical: f64,
    pub mse_se: f64,
    pub cmse_empirical: f64,
    pub cmse_se: f64,
}

impl SeComparisonRow {
    pub fn mse_relative_gap(&self) -> f64 {
        self.mse_se / self.mse_empirical - 1.0
    }
}

/// Trials whose SE inputs agree to ten significant digits share one run.
fn se_key(p: &SeParams) -> String {
    format!(
        "{:.9e} {:.9e} {:.9e} {:.9e} {:.9e}",
        p.alpha0.re, p.alpha0.im, p.h_norm_sqr, p.h_init_norm_sqr, p.sigma2
    )
}

/// Decode every trial of `point` without early stopping and compare the
/// per-iteration signal MSE, channel MSE and τ² with the state evolution
/// run from each trial's channel and initial estimate.
pub fn compare_se(
    exp: &Experiment,
    point: &SweepPoint,
    provider: &(dyn StatsProvider + Sync),
) -> Result<Vec<SeComparisonRow>> {
    let cfg = DecoderConfig {
        early_stop: false,
        ..exp.config.decoder
    };
    let decoder = exp.decoder(cfg)?;
    let sigma2 = exp.sigma2(point);
    let t = cfg.max_iterations;
    let trials: Vec<(Vec<[f64; 3]>, SeParams)> = (0..exp.config.trials)
        .into_par_iter()
        .map(|trial| {
            let (truth, res) = exp.run_trial(&decoder, point, trial)?;
            let trace = res
                .trace
                .iter()
                .map(|r| {
                    [
                        r.tau2,
                        r.signal_mse.unwrap_or(f64::NAN),
                        r.channel_mse.unwrap_or(f64::NAN),
                    ]
                })
                .collect::<Vec<_>>();
            if trace.len() != t {
                return Err(Error::Divergence(format!(
                    "trace has {} of {t} iterations",
                    trace.len()
                )));
            }
            let params = SeParams::new(&exp.spec, &cfg, sigma2, &truth.h, &res.initial_h)?
                .with_ensemble(exp.config.code.ensemble);
            Ok((trace, params))
        })
        .collect::<Result<_>>()?;

    let mut unique: Vec<SeParams> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for (_, p) in &trials {
        index.entry(se_key(p)).or_insert_with(|| {
            unique.push(*p);
            unique.len() - 1
        });
    }
    let trajectories: Vec<SeTrajectory> = unique
        .par_iter()
        .map(|p| run_se(p, provider))
        .collect::<Result<_>>()?;

    let n = trials.len() as f64;
    let mut rows = Vec::with_capacity(t);
    for k in 0..t {
        let mut acc = [0.0; 6];
        for (trace, p) in &trials {
            let step = &trajectories[index[&se_key(p)]].steps[k];
            let se = [step.tau2, step.mse, step.channel_mse];
            for j in 0..3 {
                acc[j] += trace[k][j];
                acc[3 + j] += se[j];
            }
        }
        rows.push(SeComparisonRow {
            ebn0_db: point.ebn0_db,
            antennas: point.antennas,
            iteration: k + 1,
            tau2_empirical: acc[0] / n,
            tau2_se: acc[3] / n,
            mse_empirical: acc[1] / n,
            mse_se: acc[4] / n,
            cmse_empirical: acc[2] / n,
            cmse_se: acc[5] / n,
        });
    }
    Ok(rows)
}

/// Direct section Monte Carlo for runs without BP inside the denoiser.
pub fn section_provider(exp: &Experiment) -> Result<SectionMonteCarlo> {
    SectionMonteCarlo::for_spec(&exp.spec, exp.config.se.mc_sections, exp.config.se.mc_seed)
}

fn table_options(exp: &Experiment) -> TableOptions {
    TableOptions {
        samples: exp.config.se.table_samples,
        seed: exp.config.se.table_seed,
        codewords: exp.config.se.table_codewords,
    }
}

fn siso_settings(cfg: &DecoderConfig) -> Vec<usize> {
    let mut v = vec![0, cfg.siso_per_iter];
    v.dedup();
    v
}

pub fn build_tables(exp: &Experiment) -> Result<(MseTable, BlerTable)> {
    let se = &exp.config.se;
    log::info!(
        "building tables with seed {} and {} samples per point",
        se.table_seed,
        se.table_samples
    );
    let mse = build_mse_table(
        &exp.spec,
        &exp.code,
        &se.snr_grid_db,
        &se.alphas,
        &siso_settings(&exp.config.decoder),
        table_options(exp),
    )?;
    let bler = build_bler_table(
        &exp.spec,
        &exp.code,
        &se.snr_grid_db,
        &exp.config.decoder,
        table_options(exp),
    )?;
    Ok((mse, bler))
}

/// Tables from the configured paths, building (and saving) any that are missing.
pub fn load_or_build_tables(exp: &Experiment) -> Result<(MseTable, BlerTable)> {
    let se = &exp.config.se;
    let existing = |p: &Option<std::path::PathBuf>| p.as_ref().filter(|p| p.exists()).cloned();
    if let (Some(m), Some(b)) = (existing(&se.mse_table), existing(&se.bler_table)) {
        return Ok((
            MseTable::load(m, &exp.spec, &exp.code)?,
            BlerTable::load(b, &exp.spec, &exp.code)?,
        ));
    }
    let (mse, bler) = build_tables(exp)?;
    if let Some(p) = &se.mse_table {
        mse.save(p)?;
    }
    if let Some(p) = &se.bler_table {
        bler.save(p)?;
    }
    Ok((mse, bler))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub ebn0_db: f64,
    pub antennas: usize,
    pub bler_se: f64,
    pub mean_final_tau2: f64,
    pub h_samples: usize,
}

pub fn predict_point(
    exp: &Experiment,
    point: &SweepPoint,
    mse: &MseTable,
    bler: &BlerTable,
) -> Result<PredictionRow> {
    let channel = ChannelParams {
        antennas: point.antennas,
        sigma2: exp.sigma2(point),
        normalize_by_m: exp.config.channel.normalize_by_m,
    };
    let se = &exp.config.se;
    let BlerPrediction {
        bler: p,
        h_samples,
        mean_final_tau2,
    } = predict_bler(
        &exp.spec,
        &channel,
        &exp.config.decoder,
        mse,
        bler,
        se.h_samples,
        se.alpha_model,
        se.prediction_seed,
    )?;
    Ok(PredictionRow {
        ebn0_db: point.ebn0_db,
        antennas: point.antennas,
        bler_se: p,
        mean_final_tau2,
        h_samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageRow {
    pub ebn0_db: f64,
    pub antennas: usize,
    pub p_out: f64,
}

/// Outage probability at rate `rate` bits per channel use, with Eb/N0 = SNR / rate.
pub fn outage_rows(
    rate: f64,
    antennas: &[usize],
    ebn0_db: &[f64],
    normalize_by_m: bool,
) -> Result<Vec<OutageRow>> {
    let mut out = Vec::new();
    for &m in antennas {
        for &db in ebn0_db {
            let snr = 10f64.powf(db / 10.0) * rate;
            out.push(OutageRow {
                ebn0_db: db,
                antennas: m,
                p_out: crate::channel::outage_probability(rate, snr, m, normalize_by_m)?,
            });
        }
    }
    Ok(out)
}
