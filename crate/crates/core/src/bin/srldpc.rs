use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use srldpc::channel::{sample_rayleigh, transmit, ReceivedSignal};
use srldpc::harness::report;
use srldpc::harness::runner::section_provider;
use srldpc::harness::{
    compare_se, load_or_build_tables, outage_rows, pack_bits, predict_point, simulate, unpack_bits,
    ComplexMatrix, Experiment, ExperimentConfig,
};
use srldpc::sparc::{bits_to_symbols, encode_message, symbols_to_bits};
use srldpc::{Error, Result};

/// Environment variable holding the worker thread count.
const THREADS_VAR: &str = "SRLDPC_THREADS";

#[derive(Parser)]
#[command(
    name = "srldpc",
    version,
    about = "SR-LDPC codes over quasi-static Rayleigh SIMO channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment JSON; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config field, e.g. `--set decoder.variant=oamp`.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        match &self.config {
            Some(p) => ExperimentConfig::load(p, &self.overrides),
            None => ExperimentConfig::parse("{}", &self.overrides),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo BLER and channel-MSE sweep.
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// State-evolution traces against the decoder, or SE-predicted BLER.
    Se {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Closed-form outage probability.
    Outage {
        /// Rate in bits per channel use; defaults to the configured code's rate.
        #[arg(long)]
        rate: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        antennas: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        ebn0: Option<Vec<f64>>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Bits file to section indices and baseband samples.
    Encode {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        bits: PathBuf,
        /// Text file, one section index per line.
        #[arg(long)]
        indices: PathBuf,
        /// n x 1 complex matrix of transmitted samples.
        #[arg(long)]
        samples: PathBuf,
        /// Also pass the samples through a random channel and store Y here.
        #[arg(long)]
        received: Option<PathBuf>,
        #[arg(long, allow_hyphen_values = true, default_value_t = 10.0)]
        ebn0: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Received matrix to decoded bits plus a diagnostics JSON.
    Decode {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        received: PathBuf,
        #[arg(long, allow_hyphen_values = true, conflicts_with = "sigma2")]
        ebn0: Option<f64>,
        #[arg(long)]
        sigma2: Option<f64>,
        #[arg(long)]
        bits: PathBuf,
        #[arg(long)]
        diagnostics: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Build and save the MSE and BLER tables used for prediction.
    BuildTables {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        mse: PathBuf,
        #[arg(long)]
        bler: PathBuf,
    },
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn trials_path(csv: &Path) -> PathBuf {
    let stem = csv.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    csv.with_file_name(format!("{stem}.trials.csv"))
}

#[derive(Serialize)]
struct Diagnostics {
    sigma2: f64,
    iterations: usize,
    converged_at: Option<usize>,
    valid_codeword: bool,
    used_final_bp: bool,
    init_fell_back: bool,
    final_tau2: f64,
    initial_h: Vec<[f64; 2]>,
    final_h: Vec<[f64; 2]>,
    tau2_trace: Vec<f64>,
}

fn pairs(v: &[Complex64]) -> Vec<[f64; 2]> {
    v.iter().map(|c| [c.re, c.im]).collect()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config } => {
            let exp = Experiment::new(config.load()?)?;
            let hash = exp.config.hash();
            let out = simulate(&exp)?;
            let csv = exp.config.outputs.csv.clone();
            emit(csv.as_deref(), &report::summary_csv(&hash, &out.summaries))?;
            if exp.config.outputs.trace {
                let text = report::trials_csv(&hash, &out.records);
                match &csv {
                    Some(p) => std::fs::write(trials_path(p), text)?,
                    None => print!("{text}"),
                }
            }
        }
        Command::Se { config } => {
            let exp = Experiment::new(config.load()?)?;
            let hash = exp.config.hash();
            let csv = exp.config.outputs.csv.clone();
            let points = exp.config.points();
            if exp.config.se.compare_empirical {
                let mut rows = Vec::new();
                if exp.config.decoder.siso_per_iter == 0 {
                    let mc = section_provider(&exp)?;
                    for p in &points {
                        rows.extend(compare_se(&exp, p, &mc)?);
                    }
                } else {
                    let (mse, _) = load_or_build_tables(&exp)?;
                    for p in &points {
                        rows.extend(compare_se(&exp, p, &mse)?);
                    }
                }
                emit(csv.as_deref(), &report::se_comparison_csv(&hash, &rows))?;
            } else {
                let (mse, bler) = load_or_build_tables(&exp)?;
                let rows = points
                    .iter()
                    .map(|p| predict_point(&exp, p, &mse, &bler))
                    .collect::<Result<Vec<_>>>()?;
                emit(csv.as_deref(), &report::prediction_csv(&hash, &rows))?;
            }
        }
        Command::Outage {
            rate,
            antennas,
            ebn0,
            config,
        } => {
            let cfg = config.load()?;
            let rate = match rate {
                Some(r) => r,
                None => cfg.code.spec()?.rate(),
            };
            let antennas = antennas.unwrap_or_else(|| cfg.antenna_list());
            let ebn0 = ebn0.unwrap_or_else(|| cfg.sweep.ebn0_db.clone());
            let rows = outage_rows(rate, &antennas, &ebn0, cfg.channel.normalize_by_m)?;
            emit(cfg.outputs.csv.as_deref(), &report::outage_csv(rate, &rows))?;
        }
        Command::Encode {
            config,
            bits,
            indices,
            samples,
            received,
            ebn0,
            seed,
        } => {
            let exp = Experiment::new(config.load()?)?;
            let spec = &exp.spec;
            let payload = unpack_bits(&std::fs::read(&bits)?, spec.info_bits())?;
            let info = bits_to_symbols(&payload, spec.bits_per_section())?;
            let cw = exp.code.encode(&info)?;
            let (msg, z) = encode_message(spec, &exp.dict, &cw)?;
            let text: String = msg.indices().iter().map(|i| format!("{i}\n")).collect();
            std::fs::write(&indices, text)?;
            ComplexMatrix::new(z.len(), 1, z.clone())?.save(&samples)?;
            if let Some(path) = received {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let h = sample_rayleigh(
                    exp.config.channel.antennas,
                    exp.config.channel.normalize_by_m,
                    &mut rng,
                );
                let y = transmit(&z, &h, spec.sigma2_for_ebn0_db(ebn0), &mut rng)?;
                ComplexMatrix::new(y.rows(), y.antennas(), y.data().to_vec())?.save(&path)?;
            }
        }
        Command::Decode {
            config,
            received,
            ebn0,
            sigma2,
            bits,
            diagnostics,
            seed,
        } => {
            let exp = Experiment::new(config.load()?)?;
            let spec = &exp.spec;
            let sigma2 = match (sigma2, ebn0) {
                (Some(s), _) => s,
                (None, Some(db)) => spec.sigma2_for_ebn0_db(db),
                (None, None) => {
                    return Err(Error::Config("decode needs --sigma2 or --ebn0".into()))
                }
            };
            let m = ComplexMatrix::load(&received)?;
            if m.rows != spec.channel_uses {
                return Err(Error::Dimension {
                    what: "received rows",
                    expected: spec.channel_uses,
                    actual: m.rows,
                });
            }
            let y = ReceivedSignal::from_rows(m.rows, m.cols, m.data)?;
            let res = exp.decoder(exp.config.decoder)?.decode(
                &y,
                sigma2,
                None,
                &mut ChaCha8Rng::seed_from_u64(seed),
            )?;
            let info = exp.code.extract_info(&res.message.symbols());
            std::fs::write(
                &bits,
                pack_bits(&symbols_to_bits(&info, spec.bits_per_section())),
            )?;
            if let Some(path) = diagnostics {
                let d = Diagnostics {
                    sigma2,
                    iterations: res.iterations,
                    converged_at: res.converged_at,
                    valid_codeword: res.valid_codeword,
                    used_final_bp: res.used_final_bp,
                    init_fell_back: res.init_fell_back,
                    final_tau2: res.final_tau2,
                    initial_h: pairs(&res.initial_h),
                    final_h: pairs(&res.final_h),
                    tau2_trace: res.trace.iter().map(|r| r.tau2).collect(),
                };
                std::fs::write(path, serde_json::to_string_pretty(&d)?)?;
            }
        }
        Command::BuildTables { config, mse, bler } => {
            let mut cfg = config.load()?;
            cfg.se.mse_table = Some(mse);
            cfg.se.bler_table = Some(bler);
            let exp = Experiment::new(cfg)?;
            let (m, b) = srldpc::harness::runner::build_tables(&exp)?;
            m.save(exp.config.se.mse_table.as_ref().unwrap())?;
            b.save(exp.config.se.bler_table.as_ref().unwrap())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Some(n) = std::env::var(THREADS_VAR)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            log::warn!("cannot set {THREADS_VAR}: {e}");
        }
    }
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
