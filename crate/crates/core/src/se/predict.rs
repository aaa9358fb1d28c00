//! Block error rate averaged over channel realizations.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{sample_rayleigh, ChannelParams};
use crate::decoder::DecoderConfig;
use crate::error::{Error, Result};
use crate::sparc::CodeSpec;
use crate::stats::complex_normal;

use super::table::{BlerTable, MseTable};
use super::{run_se, SeParams};

/// How the initial mismatch α₀ is modelled for each channel sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaModel {
    /// Full channel knowledge, α ≡ 1.
    Oracle,
    /// Averaging initialization followed by channel updates.
    AvgInit,
}

/// Error model of the averaging estimate: `h_init ≈ (1 + ε) h + w` with
/// `ε ~ CN(0, B/n)` and `w ~ CN(0, σ² B / (n L P) I)`. Returns the two
/// variances.
pub fn avg_init_error_variance(spec: &CodeSpec, sigma2: f64) -> (f64, f64) {
    let ratio = spec.section_size as f64 / spec.channel_uses as f64;
    (ratio, sigma2 * ratio / spec.total_power())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlerPrediction {
    pub bler: f64,
    pub h_samples: usize,
    /// Mean final denoiser variance over the samples.
    pub mean_final_tau2: f64,
}

/// `E_h[BLER(τ_T²(h))]` by sampling channels, running the state evolution
/// for each, and mapping the final variance through the BLER table.
#[allow(clippy::too_many_arguments)]
pub fn predict_bler(
    spec: &CodeSpec,
    channel: &ChannelParams,
    config: &DecoderConfig,
    mse_table: &MseTable,
    bler_table: &BlerTable,
    h_samples: usize,
    model: AlphaModel,
    seed: u64,
) -> Result<BlerPrediction> {
    channel.validate()?;
    if h_samples == 0 {
        return Err(Error::InvalidParameter(
            "need at least one channel sample".into(),
        ));
    }
    if mse_table.spec_fingerprint != spec.fingerprint()
        || bler_table.spec_fingerprint != spec.fingerprint()
    {
        return Err(Error::Table(
            "tables were built for different code parameters".into(),
        ));
    }
    let sigma2 = channel.sigma2;
    let (eps_var, w_var) = avg_init_error_variance(spec, sigma2);
    let results: Vec<(f64, f64)> = (0..h_samples)
        .into_par_iter()
        .map(|k| -> Result<(f64, f64)> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let h = sample_rayleigh(channel.antennas, channel.normalize_by_m, &mut rng).h;
            let params = match model {
                AlphaModel::Oracle => {
                    let norm = h.iter().map(|v| v.norm_sqr()).sum();
                    SeParams::oracle(spec, config, sigma2, norm, h.len())
                }
                AlphaModel::AvgInit => {
                    let eps = complex_normal(&mut rng, eps_var);
                    let h_init: Vec<Complex64> = h
                        .iter()
                        .map(|&v| v * (1.0 + eps) + complex_normal(&mut rng, w_var))
                        .collect();
                    SeParams::new(spec, config, sigma2, &h, &h_init)?
                }
            };
            let traj = run_se(&params, mse_table)?;
            let tau2 = traj.final_tau2();
            Ok((bler_table.lookup(tau2), tau2))
        })
        .collect::<Result<_>>()?;
    let n = h_samples as f64;
    Ok(BlerPrediction {
        bler: results.iter().map(|r| r.0).sum::<f64>() / n,
        h_samples,
        mean_final_tau2: results.iter().map(|r| r.1).sum::<f64>() / n,
    })
}
