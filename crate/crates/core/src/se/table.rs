//! Empirical denoiser tables on the scalar channel `r = α x + τ z`.

use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decoder::{denoise, DecoderConfig, DenoiserOutput, DenoiserWorkspace};
use crate::error::{Error, Result};
use crate::gf::FieldElement;
use crate::nbldpc::{siso_decode, ParityCheckMatrix};
use crate::sparc::{quantize, CodeSpec, SparseMessage};
use crate::stats::{complex_normal, isotonic_decreasing};

use super::{SectionStats, StatsProvider};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodewordSource {
    Random,
    AllZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableOptions {
    /// Codewords per grid point.
    pub samples: usize,
    pub seed: u64,
    pub codewords: CodewordSource,
}

/// `10 log10(nP / τ²)`.
fn section_snr_db(amplitude: f64, tau2: f64) -> f64 {
    10.0 * (amplitude * amplitude / tau2).log10()
}

fn tau2_at(amplitude: f64, snr_db: f64) -> f64 {
    amplitude * amplitude / 10f64.powf(snr_db / 10.0)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Table("empty grid".into()));
    }
    if grid.iter().any(|v| !v.is_finite()) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Table(
            "grid must be finite and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Bracketing index and weight for linear interpolation, clamped to the grid.
fn locate(grid: &[f64], x: f64) -> (usize, f64) {
    if grid.len() == 1 || x <= grid[0] {
        if x < grid[0] {
            log::debug!("table lookup {x} below grid start {}", grid[0]);
        }
        return (0, 0.0);
    }
    let last = grid.len() - 1;
    if x >= grid[last] {
        if x > grid[last] {
            log::debug!("table lookup {x} above grid end {}", grid[last]);
        }
        return (last - 1, 1.0);
    }
    let k = grid.partition_point(|&g| g <= x) - 1;
    (k, (x - grid[k]) / (grid[k + 1] - grid[k]))
}

fn sample_codeword<R: Rng + ?Sized>(
    code: &ParityCheckMatrix,
    source: CodewordSource,
    rng: &mut R,
) -> Result<SparseMessage> {
    let b = code.field().size();
    match source {
        CodewordSource::AllZero => Ok(SparseMessage::new(vec![0; code.num_cols()], b)?),
        CodewordSource::Random => {
            let info: Vec<FieldElement> = (0..code.num_info())
                .map(|_| FieldElement(rng.random_range(0..b as u16)))
                .collect();
            Ok(SparseMessage::from_codeword(&code.encode(&info)?))
        }
    }
}

fn observe<R: Rng + ?Sized>(
    msg: &SparseMessage,
    b: usize,
    alpha: f64,
    amplitude: f64,
    tau2: f64,
    rng: &mut R,
) -> Vec<Complex64> {
    let mut r: Vec<Complex64> = (0..msg.sections() * b)
        .map(|_| complex_normal(rng, tau2))
        .collect();
    for (l, &i) in msg.indices().iter().enumerate() {
        r[l * b + i] += alpha * amplitude;
    }
    r
}

fn point_rng(seed: u64, point: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(point as u64);
    rng
}

/// Denoiser statistics on a grid of section SNRs (and optionally mismatch
/// factors α) for several numbers of BP rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseTable {
    pub spec_fingerprint: String,
    pub code_fingerprint: String,
    pub amplitude: f64,
    pub section_size: usize,
    /// Section SNR `nP / τ²` in dB, increasing.
    pub grid: Vec<f64>,
    /// Mismatch factors, increasing. A single entry gives a 1-D table.
    pub alphas: Vec<f64>,
    pub siso_iters: Vec<usize>,
    /// `values[siso][alpha][snr]`, after isotonic smoothing of the MSE.
    pub values: Vec<Vec<Vec<SectionStats>>>,
    pub samples: usize,
    pub seed: u64,
    pub codewords: CodewordSource,
}

/// Estimate denoiser statistics over `grid` (section SNR in dB) × `alphas`
/// for each entry of `siso_iters`.
pub fn build_mse_table(
    spec: &CodeSpec,
    code: &ParityCheckMatrix,
    grid: &[f64],
    alphas: &[f64],
    siso_iters: &[usize],
    options: TableOptions,
) -> Result<MseTable> {
    check_grid(grid)?;
    check_grid(alphas)?;
    if siso_iters.is_empty() || options.samples == 0 {
        return Err(Error::Table(
            "need at least one BP setting and one sample".into(),
        ));
    }
    check_code(spec, code)?;
    let amp = spec.amplitude();
    let b = spec.section_size;
    let n_total = spec.total_columns() as f64;
    let points: Vec<(usize, usize)> = (0..alphas.len())
        .flat_map(|a| (0..grid.len()).map(move |g| (a, g)))
        .collect();

    let raw: Vec<Vec<SectionStats>> = points
        .par_iter()
        .enumerate()
        .map(|(k, &(ai, gi))| -> Result<Vec<SectionStats>> {
            let mut rng = point_rng(options.seed, k);
            let tau2 = tau2_at(amp, grid[gi]);
            let alpha = alphas[ai];
            let mut acc = vec![SectionStats::default(); siso_iters.len()];
            let mut out = DenoiserOutput::default();
            let mut ws = DenoiserWorkspace::default();
            for _ in 0..options.samples {
                let msg = sample_codeword(code, options.codewords, &mut rng)?;
                let r = observe(&msg, b, alpha, amp, tau2, &mut rng);
                for (a, &iters) in acc.iter_mut().zip(siso_iters) {
                    denoise(&r, tau2, amp, code, iters, &mut out, &mut ws)?;
                    a.eta_sq += out.estimate.iter().map(|v| v * v).sum::<f64>();
                    a.cross += msg
                        .indices()
                        .iter()
                        .enumerate()
                        .map(|(l, &i)| amp * out.estimate[l * b + i])
                        .sum::<f64>();
                    a.q += out.onsager;
                }
            }
            let s = options.samples as f64;
            Ok(acc
                .into_iter()
                .map(|a| SectionStats {
                    x_sq: amp * amp / b as f64,
                    eta_sq: a.eta_sq / (s * n_total),
                    cross: a.cross / (s * n_total),
                    q: a.q / s,
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut values = vec![vec![Vec::with_capacity(grid.len()); alphas.len()]; siso_iters.len()];
    for (&(ai, _), stats) in points.iter().zip(raw) {
        for (si, st) in stats.into_iter().enumerate() {
            values[si][ai].push(st);
        }
    }
    for per_alpha in values.iter_mut() {
        for (row, &alpha) in per_alpha.iter_mut().zip(alphas) {
            smooth_row(row, alpha);
        }
    }
    Ok(MseTable {
        spec_fingerprint: spec.fingerprint(),
        code_fingerprint: code.fingerprint(),
        amplitude: amp,
        section_size: b,
        grid: grid.to_vec(),
        alphas: alphas.to_vec(),
        siso_iters: siso_iters.to_vec(),
        values,
        samples: options.samples,
        seed: options.seed,
        codewords: options.codewords,
    })
}

/// Project the MSE at the row's own α onto non-increasing sequences in SNR
/// and fold the correction into `eta_sq`.
fn smooth_row(row: &mut [SectionStats], alpha: f64) {
    let a = Complex64::new(alpha, 0.0);
    let mse: Vec<f64> = row.iter().map(|s| s.mse_at(a)).collect();
    let smooth = isotonic_decreasing(&mse, &vec![1.0; mse.len()]);
    for (s, (&m, &m_smooth)) in row.iter_mut().zip(mse.iter().zip(&smooth)) {
        s.eta_sq += m_smooth - m;
    }
}

fn check_code(spec: &CodeSpec, code: &ParityCheckMatrix) -> Result<()> {
    if code.num_cols() != spec.sections || code.field().size() != spec.section_size {
        return Err(Error::dim("code length", spec.sections, code.num_cols()));
    }
    Ok(())
}

fn check_fingerprints(
    what: &str,
    spec_fp: &str,
    code_fp: &str,
    spec: &CodeSpec,
    code: &ParityCheckMatrix,
) -> Result<()> {
    if spec_fp != spec.fingerprint() {
        return Err(Error::Table(format!(
            "{what} was built for code parameters {spec_fp}, active parameters are {}",
            spec.fingerprint()
        )));
    }
    if code_fp != code.fingerprint() {
        return Err(Error::Table(format!(
            "{what} was built for parity-check matrix {code_fp}, active matrix is {}",
            code.fingerprint()
        )));
    }
    Ok(())
}

fn lerp(a: f64, b: f64, w: f64) -> f64 {
    a + (b - a) * w
}

fn lerp_stats(a: &SectionStats, b: &SectionStats, w: f64) -> SectionStats {
    SectionStats {
        x_sq: lerp(a.x_sq, b.x_sq, w),
        eta_sq: lerp(a.eta_sq, b.eta_sq, w),
        cross: lerp(a.cross, b.cross, w),
        q: lerp(a.q, b.q, w),
    }
}

impl MseTable {
    fn row_at(&self, siso: usize, ai: usize, snr_db: f64) -> SectionStats {
        let row = &self.values[siso][ai];
        if row.len() == 1 {
            return row[0];
        }
        let (k, w) = locate(&self.grid, snr_db);
        lerp_stats(&row[k], &row[k + 1], w)
    }

    /// Interpolated statistics, linear in SNR (dB) and in α, clamped to the grid.
    pub fn lookup(&self, re_alpha: f64, tau2: f64, siso_iters: usize) -> Result<SectionStats> {
        let si = self
            .siso_iters
            .iter()
            .position(|&s| s == siso_iters)
            .ok_or_else(|| {
                Error::Table(format!(
                    "no entries for {siso_iters} BP rounds (have {:?})",
                    self.siso_iters
                ))
            })?;
        if !(tau2 > 0.0 && tau2.is_finite()) {
            return Err(Error::Divergence(format!(
                "effective noise variance {tau2}"
            )));
        }
        let snr = section_snr_db(self.amplitude, tau2);
        if self.alphas.len() == 1 {
            return Ok(self.row_at(si, 0, snr));
        }
        let (k, w) = locate(&self.alphas, re_alpha);
        Ok(lerp_stats(
            &self.row_at(si, k, snr),
            &self.row_at(si, k + 1, snr),
            w,
        ))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// Load and check that the table matches the active code.
    pub fn load(path: impl AsRef<Path>, spec: &CodeSpec, code: &ParityCheckMatrix) -> Result<Self> {
        let table: MseTable = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        check_fingerprints(
            "MSE table",
            &table.spec_fingerprint,
            &table.code_fingerprint,
            spec,
            code,
        )?;
        table.check_shape()?;
        Ok(table)
    }

    fn check_shape(&self) -> Result<()> {
        check_grid(&self.grid)?;
        check_grid(&self.alphas)?;
        let ok = self.values.len() == self.siso_iters.len()
            && self.values.iter().all(|v| {
                v.len() == self.alphas.len() && v.iter().all(|r| r.len() == self.grid.len())
            });
        if !ok {
            return Err(Error::Table("table values do not match the grid".into()));
        }
        Ok(())
    }
}

impl StatsProvider for MseTable {
    fn stats(&self, re_alpha: f64, tau2: f64, siso_iters: usize) -> Result<SectionStats> {
        self.lookup(re_alpha, tau2, siso_iters)
    }
}

/// Block error rate after the decoder's final stage as a function of the
/// last denoiser variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlerTable {
    pub spec_fingerprint: String,
    pub code_fingerprint: String,
    pub amplitude: f64,
    /// Section SNR `nP / τ²` in dB, increasing.
    pub grid: Vec<f64>,
    /// Smoothed block error rate, non-increasing along the grid.
    pub bler: Vec<f64>,
    pub errors: Vec<usize>,
    pub samples: usize,
    pub seed: u64,
    pub siso_per_iter: usize,
    pub siso_snr_threshold_db: f64,
    pub final_bp_iterations: usize,
}

/// For each grid point, decode `samples` noisy codewords with the last
/// denoiser pass of the decoder followed by quantization and, when that is
/// not a codeword, the final BP stage.
pub fn build_bler_table(
    spec: &CodeSpec,
    code: &ParityCheckMatrix,
    grid: &[f64],
    config: &DecoderConfig,
    options: TableOptions,
) -> Result<BlerTable> {
    check_grid(grid)?;
    check_code(spec, code)?;
    if options.samples == 0 {
        return Err(Error::Table("need at least one sample".into()));
    }
    let amp = spec.amplitude();
    let b = spec.section_size;
    let errors: Vec<usize> = grid
        .par_iter()
        .enumerate()
        .map(|(k, &snr)| -> Result<usize> {
            let mut rng = point_rng(options.seed, k);
            let tau2 = tau2_at(amp, snr);
            let rounds = if config.siso_per_iter > 0 && snr >= config.siso_snr_threshold_db {
                config.siso_per_iter
            } else {
                0
            };
            let mut out = DenoiserOutput::default();
            let mut ws = DenoiserWorkspace::default();
            let mut errors = 0;
            for _ in 0..options.samples {
                let msg = sample_codeword(code, options.codewords, &mut rng)?;
                let r = observe(&msg, b, 1.0, amp, tau2, &mut rng);
                denoise(&r, tau2, amp, code, rounds, &mut out, &mut ws)?;
                let mut hat = quantize(&out.estimate, b);
                if !code.is_codeword(&hat.symbols())? && config.final_bp_iterations > 0 {
                    hat = quantize(
                        &siso_decode(code, &out.posteriors, config.final_bp_iterations)?,
                        b,
                    );
                }
                if hat != msg {
                    errors += 1;
                }
            }
            Ok(errors)
        })
        .collect::<Result<_>>()?;
    let raw: Vec<f64> = errors
        .iter()
        .map(|&e| e as f64 / options.samples as f64)
        .collect();
    let bler = isotonic_decreasing(&raw, &vec![1.0; raw.len()]);
    Ok(BlerTable {
        spec_fingerprint: spec.fingerprint(),
        code_fingerprint: code.fingerprint(),
        amplitude: amp,
        grid: grid.to_vec(),
        bler,
        errors,
        samples: options.samples,
        seed: options.seed,
        siso_per_iter: config.siso_per_iter,
        siso_snr_threshold_db: config.siso_snr_threshold_db,
        final_bp_iterations: config.final_bp_iterations,
    })
}

impl BlerTable {
    /// Interpolated block error rate at denoiser variance `tau2`.
    pub fn lookup(&self, tau2: f64) -> f64 {
        if !(tau2 > 0.0) {
            return *self.bler.last().unwrap_or(&0.0);
        }
        if self.bler.len() == 1 {
            return self.bler[0];
        }
        let (k, w) = locate(&self.grid, section_snr_db(self.amplitude, tau2));
        lerp(self.bler[k], self.bler[k + 1], w).clamp(0.0, 1.0)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, spec: &CodeSpec, code: &ParityCheckMatrix) -> Result<Self> {
        let table: BlerTable = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        check_fingerprints(
            "BLER table",
            &table.spec_fingerprint,
            &table.code_fingerprint,
            spec,
            code,
        )?;
        check_grid(&table.grid)?;
        if table.bler.len() != table.grid.len()
            || table.bler.iter().any(|p| !(0.0..=1.0).contains(p))
        {
            return Err(Error::Table("BLER values do not match the grid".into()));
        }
        Ok(table)
    }
}
