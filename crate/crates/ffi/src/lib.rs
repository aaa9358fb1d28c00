//! C ABI over the srldpc library.
//!
//! Every function returns an [`SrldpcStatus`]; on failure the message is
//! available from [`srldpc_last_error`] on the same thread. Panics are
//! caught at the boundary and reported as `SRLDPC_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use srldpc::channel::{outage_probability, ReceivedSignal};
use srldpc::harness::{
    pack_bits, run_trials, summarize, unpack_bits, Experiment, ExperimentConfig, SweepPoint,
};
use srldpc::sparc::{bits_to_symbols, encode_message, symbols_to_bits};
use srldpc::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrldpcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Dimension = 4,
    Parse = 5,
    Divergence = 6,
    Io = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// Code, dictionary and decoder settings built from one JSON config.
pub struct SrldpcContext {
    exp: Experiment,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SrldpcDims {
    pub sections: usize,
    pub section_size: usize,
    pub info_sections: usize,
    pub channel_uses: usize,
    pub info_bits: usize,
    /// Bytes of a packed information payload.
    pub info_bytes: usize,
    pub antennas: usize,
    pub rate: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SrldpcDecodeReport {
    pub iterations: usize,
    /// Iteration of early stopping, 0 when the decoder ran to the limit.
    pub converged_at: usize,
    pub valid_codeword: bool,
    pub used_final_bp: bool,
    pub init_fell_back: bool,
    pub final_tau2: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SrldpcPointSummary {
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

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> SrldpcStatus {
    match e {
        Error::Dimension { .. } => SrldpcStatus::Dimension,
        Error::Parse { .. } => SrldpcStatus::Parse,
        Error::Config(_) | Error::Json(_) => SrldpcStatus::Config,
        Error::Divergence(_) => SrldpcStatus::Divergence,
        Error::Io(_) => SrldpcStatus::Io,
        _ => SrldpcStatus::InvalidArgument,
    }
}

struct Failure(SrldpcStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn fail<T>(status: SrldpcStatus, msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, msg.into()))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SrldpcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SrldpcStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("panic: {msg}"));
            SrldpcStatus::Panic
        }
    }
}

unsafe fn context<'a>(ctx: *const SrldpcContext) -> Result<&'a SrldpcContext, Failure> {
    ctx.as_ref()
        .map_or_else(|| fail(SrldpcStatus::NullPointer, "null context"), Ok)
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return fail(SrldpcStatus::NullPointer, format!("null {what}"));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return fail(SrldpcStatus::NullPointer, format!("null {what}"));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn write_out<T>(p: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        return fail(SrldpcStatus::NullPointer, format!("null {what}"));
    }
    p.write(value);
    Ok(())
}

/// Message of the last failed call on this thread, empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn srldpc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn srldpc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Build a context from a JSON experiment config; NULL selects the defaults.
///
/// # Safety
/// `config_json` must be NULL or a NUL-terminated string; `out` must be a
/// valid pointer. Free the result with [`srldpc_context_free`].
#[no_mangle]
pub unsafe extern "C" fn srldpc_context_new(
    config_json: *const c_char,
    out: *mut *mut SrldpcContext,
) -> SrldpcStatus {
    guard(|| {
        if out.is_null() {
            return fail(SrldpcStatus::NullPointer, "null output handle");
        }
        out.write(ptr::null_mut());
        let text = if config_json.is_null() {
            "{}"
        } else {
            match CStr::from_ptr(config_json).to_str() {
                Ok(s) => s,
                Err(_) => return fail(SrldpcStatus::Config, "config is not UTF-8"),
            }
        };
        let exp = Experiment::new(ExperimentConfig::parse(text, &[])?)?;
        out.write(Box::into_raw(Box::new(SrldpcContext { exp })));
        Ok(())
    })
}

/// # Safety
/// `ctx` must be NULL or a handle from [`srldpc_context_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn srldpc_context_free(ctx: *mut SrldpcContext) {
    if !ctx.is_null() {
        drop(Box::from_raw(ctx));
    }
}

/// # Safety
/// `ctx` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn srldpc_context_dims(
    ctx: *const SrldpcContext,
    out: *mut SrldpcDims,
) -> SrldpcStatus {
    guard(|| {
        let exp = &context(ctx)?.exp;
        let s = &exp.spec;
        let dims = SrldpcDims {
            sections: s.sections,
            section_size: s.section_size,
            info_sections: s.info_sections,
            channel_uses: s.channel_uses,
            info_bits: s.info_bits(),
            info_bytes: s.info_bits().div_ceil(8),
            antennas: exp.config.channel.antennas,
            rate: s.rate(),
        };
        write_out(out, dims, "dims output")
    })
}

/// Noise variance for an Eb/N0 in dB under the context's code.
///
/// # Safety
/// `ctx` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn srldpc_sigma2_for_ebn0(
    ctx: *const SrldpcContext,
    ebn0_db: f64,
    out: *mut f64,
) -> SrldpcStatus {
    guard(|| {
        let exp = &context(ctx)?.exp;
        if !ebn0_db.is_finite() {
            return fail(SrldpcStatus::InvalidArgument, "Eb/N0 must be finite");
        }
        write_out(out, exp.spec.sigma2_for_ebn0_db(ebn0_db), "sigma2 output")
    })
}

/// Encode packed information bits (MSB first) into `channel_uses` complex
/// samples written as interleaved (re, im) pairs.
///
/// # Safety
/// `bits` must hold `bits_len` bytes and `samples` room for `samples_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn srldpc_encode(
    ctx: *const SrldpcContext,
    bits: *const u8,
    bits_len: usize,
    samples: *mut f64,
    samples_len: usize,
) -> SrldpcStatus {
    guard(|| {
        let exp = &context(ctx)?.exp;
        let spec = &exp.spec;
        let payload = unpack_bits(slice(bits, bits_len, "bit buffer")?, spec.info_bits())?;
        let need = 2 * spec.channel_uses;
        if samples_len < need {
            return fail(
                SrldpcStatus::BufferTooSmall,
                format!("sample buffer holds {samples_len} doubles, need {need}"),
            );
        }
        let out = slice_mut(samples, samples_len, "sample buffer")?;
        let cw = exp
            .code
            .encode(&bits_to_symbols(&payload, spec.bits_per_section())?)?;
        let (_, z) = encode_message(spec, &exp.dict, &cw)?;
        for (pair, v) in out.chunks_exact_mut(2).zip(&z) {
            pair[0] = v.re;
            pair[1] = v.im;
        }
        Ok(())
    })
}

/// Decode a received `channel_uses x antennas` matrix given row-major as
/// interleaved (re, im) pairs. Writes packed information bits and, when
/// `report` is not NULL, decoder diagnostics.
///
/// # Safety
/// Buffers must hold the stated lengths; `report` may be NULL.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn srldpc_decode(
    ctx: *const SrldpcContext,
    received: *const f64,
    received_len: usize,
    antennas: usize,
    sigma2: f64,
    seed: u64,
    bits: *mut u8,
    bits_len: usize,
    report: *mut SrldpcDecodeReport,
) -> SrldpcStatus {
    guard(|| {
        let exp = &context(ctx)?.exp;
        let spec = &exp.spec;
        if antennas == 0 {
            return fail(SrldpcStatus::InvalidArgument, "need at least one antenna");
        }
        let need = 2 * spec.channel_uses * antennas;
        if received_len != need {
            return Err(Error::Dimension {
                what: "received doubles",
                expected: need,
                actual: received_len,
            }
            .into());
        }
        let need_bytes = spec.info_bits().div_ceil(8);
        if bits_len < need_bytes {
            return fail(
                SrldpcStatus::BufferTooSmall,
                format!("bit buffer holds {bits_len} bytes, need {need_bytes}"),
            );
        }
        let data = slice(received, received_len, "received buffer")?
            .chunks_exact(2)
            .map(|p| Complex64::new(p[0], p[1]))
            .collect();
        let y = ReceivedSignal::from_rows(spec.channel_uses, antennas, data)?;
        let res = exp.decoder(exp.config.decoder)?.decode(
            &y,
            sigma2,
            None,
            &mut ChaCha8Rng::seed_from_u64(seed),
        )?;
        let info = exp.code.extract_info(&res.message.symbols());
        let packed = pack_bits(&symbols_to_bits(&info, spec.bits_per_section()));
        slice_mut(bits, bits_len, "bit buffer")?[..packed.len()].copy_from_slice(&packed);
        if !report.is_null() {
            report.write(SrldpcDecodeReport {
                iterations: res.iterations,
                converged_at: res.converged_at.unwrap_or(0),
                valid_codeword: res.valid_codeword,
                used_final_bp: res.used_final_bp,
                init_fell_back: res.init_fell_back,
                final_tau2: res.final_tau2,
            });
        }
        Ok(())
    })
}

/// Monte-Carlo BLER at one Eb/N0 with the context's decoder settings and
/// trial seeding.
///
/// # Safety
/// `ctx` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn srldpc_simulate_point(
    ctx: *const SrldpcContext,
    ebn0_db: f64,
    antennas: usize,
    trials: usize,
    out: *mut SrldpcPointSummary,
) -> SrldpcStatus {
    guard(|| {
        let exp = &context(ctx)?.exp;
        if trials == 0 || antennas == 0 || !ebn0_db.is_finite() {
            return fail(
                SrldpcStatus::InvalidArgument,
                "need trials >= 1, antennas >= 1 and a finite Eb/N0",
            );
        }
        let point = SweepPoint {
            index: 0,
            ebn0_db,
            antennas,
        };
        let s = summarize(&point, &run_trials(exp, &point, trials)?);
        write_out(
            out,
            SrldpcPointSummary {
                trials: s.trials,
                errors: s.errors,
                undetected: s.undetected,
                bler: s.bler,
                ci95_low: s.ci95_low,
                ci95_high: s.ci95_high,
                mean_initial_cmse: s.mean_initial_cmse,
                mean_final_cmse: s.mean_final_cmse,
                mean_iters: s.mean_iters,
            },
            "summary output",
        )
    })
}

/// `P(log2(1 + snr ||h||²) < rate)` for a Rayleigh channel with `antennas`
/// receive antennas.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn srldpc_outage_probability(
    rate: f64,
    snr: f64,
    antennas: usize,
    normalize_by_m: bool,
    out: *mut f64,
) -> SrldpcStatus {
    guard(|| {
        write_out(
            out,
            outage_probability(rate, snr, antennas, normalize_by_m)?,
            "probability output",
        )
    })
}
