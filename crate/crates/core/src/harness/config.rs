//! Experiment configuration: one JSON document, with dotted-path overrides.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::decoder::DecoderConfig;
use crate::error::{Error, Result};
use crate::se::{AlphaModel, CodewordSource};
use crate::sparc::{CodeSpec, Ensemble};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodeConfig {
    pub sections: usize,
    pub section_size: usize,
    pub info_sections: usize,
    pub channel_uses: usize,
    /// Power per section; `None` means 1/L.
    pub power: Option<f64>,
    pub ensemble: Ensemble,
    pub dictionary_seed: u64,
    /// Seed of the generated parity-check matrix; ignored with `parity_check_file`.
    pub code_seed: u64,
    pub variable_degree: usize,
    pub parity_check_file: Option<PathBuf>,
}

impl Default for CodeConfig {
    fn default() -> Self {
        CodeConfig {
            sections: 766,
            section_size: 256,
            info_sections: 736,
            channel_uses: 3675,
            power: None,
            ensemble: Ensemble::SignedDft,
            dictionary_seed: 1,
            code_seed: 0,
            variable_degree: 2,
            parity_check_file: None,
        }
    }
}

impl CodeConfig {
    pub fn spec(&self) -> Result<CodeSpec> {
        let power = self.power.unwrap_or(1.0 / self.sections.max(1) as f64);
        CodeSpec::new(
            self.sections,
            self.section_size,
            self.info_sections,
            self.channel_uses,
            power,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub antennas: usize,
    pub normalize_by_m: bool,
    /// Rescale every channel draw to this squared norm.
    pub fixed_norm_sqr: Option<f64>,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            antennas: 4,
            normalize_by_m: false,
            fixed_norm_sqr: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub ebn0_db: Vec<f64>,
    /// Antenna counts to sweep; `None` uses `channel.antennas`.
    pub antennas: Option<Vec<usize>>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            ebn0_db: vec![1.0],
            antennas: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub csv: Option<PathBuf>,
    /// Emit one row per trial after the aggregate rows.
    pub trace: bool,
}

/// State-evolution settings used by `se` and `build-tables`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeConfig {
    /// Sections simulated by the direct Monte-Carlo denoiser model.
    pub mc_sections: usize,
    pub mc_seed: u64,
    pub mse_table: Option<PathBuf>,
    pub bler_table: Option<PathBuf>,
    /// Section SNR grid (dB) for table building.
    pub snr_grid_db: Vec<f64>,
    /// Real parts of α covered by the MSE table.
    pub alphas: Vec<f64>,
    pub table_samples: usize,
    pub table_seed: u64,
    pub table_codewords: CodewordSource,
    /// Compare against decoder traces instead of predicting the BLER.
    pub compare_empirical: bool,
    pub h_samples: usize,
    pub alpha_model: AlphaModel,
    pub prediction_seed: u64,
}

impl Default for SeConfig {
    fn default() -> Self {
        SeConfig {
            mc_sections: 100_000,
            mc_seed: 11,
            mse_table: None,
            bler_table: None,
            snr_grid_db: (0..=60).map(|k| -5.0 + 0.5 * k as f64).collect(),
            alphas: vec![1.0],
            table_samples: 200,
            table_seed: 5,
            table_codewords: CodewordSource::Random,
            compare_empirical: true,
            h_samples: 10_000,
            alpha_model: AlphaModel::AvgInit,
            prediction_seed: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub code: CodeConfig,
    pub channel: ChannelConfig,
    pub sweep: SweepConfig,
    pub decoder: DecoderConfig,
    pub trials: usize,
    pub trial_seed_base: u64,
    pub outputs: OutputConfig,
    pub se: SeConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            code: CodeConfig::default(),
            channel: ChannelConfig::default(),
            sweep: SweepConfig::default(),
            decoder: DecoderConfig::default(),
            trials: 100,
            trial_seed_base: 0,
            outputs: OutputConfig::default(),
            se: SeConfig::default(),
        }
    }
}

fn json_error(e: serde_json::Error) -> Error {
    Error::Config(format!("line {} column {}: {e}", e.line(), e.column()))
}

impl ExperimentConfig {
    /// Parse a JSON document, apply `path=value` overrides and validate.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: Value = serde_json::from_str(text).map_err(json_error)?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: ExperimentConfig =
            serde_json::from_value(doc).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<std::path::Path>, overrides: &[String]) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.sweep.ebn0_db.is_empty() || self.sweep.ebn0_db.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(
                "sweep.ebn0_db must hold finite values".into(),
            ));
        }
        if self.antenna_list().iter().any(|&m| m == 0) {
            return Err(Error::Config("antenna counts must be positive".into()));
        }
        if let Some(g) = self.channel.fixed_norm_sqr {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::Config(format!(
                    "channel.fixed_norm_sqr = {g} must be positive"
                )));
            }
        }
        self.code.spec().map_err(|e| Error::Config(e.to_string()))?;
        self.decoder.validate()?;
        for path in [&self.code.parity_check_file].into_iter().flatten() {
            if !path.exists() {
                return Err(Error::Config(format!(
                    "file {} does not exist",
                    path.display()
                )));
            }
        }
        Ok(())
    }

    pub fn antenna_list(&self) -> Vec<usize> {
        self.sweep
            .antennas
            .clone()
            .unwrap_or_else(|| vec![self.channel.antennas])
    }

    /// Sweep points in emission order: antennas outer, Eb/N0 inner.
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut out = Vec::new();
        for m in self.antenna_list() {
            for &db in &self.sweep.ebn0_db {
                out.push(SweepPoint {
                    index: out.len(),
                    ebn0_db: db,
                    antennas: m,
                });
            }
        }
        out
    }

    /// Hash of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub ebn0_db: f64,
    pub antennas: usize,
}

/// Set `a.b.c` in `doc` to `value`, parsed as JSON when possible and as a
/// string otherwise. Missing intermediate objects are created.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not path=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("bad override path `{path}`")));
    }
    let value =
        serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    let mut node = doc;
    for key in &keys[..keys.len() - 1] {
        let obj = node.as_object_mut().ok_or_else(|| {
            Error::Config(format!("override `{path}` descends into a non-object"))
        })?;
        node = obj
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
        if node.is_null() {
            *node = Value::Object(Default::default());
        }
    }
    node.as_object_mut()
        .ok_or_else(|| Error::Config(format!("override `{path}` descends into a non-object")))?
        .insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}
