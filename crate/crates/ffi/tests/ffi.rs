use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use srldpc_ffi::*;

const SMALL: &str =
    r#"{"code": {"sections": 64, "section_size": 16, "info_sections": 56, "channel_uses": 170}}"#;

fn last_error() -> String {
    unsafe { CStr::from_ptr(srldpc_last_error()) }
        .to_string_lossy()
        .into_owned()
}

struct Ctx(*mut SrldpcContext);

impl Drop for Ctx {
    fn drop(&mut self) {
        unsafe { srldpc_context_free(self.0) };
    }
}

fn small() -> Ctx {
    let cfg = CString::new(SMALL).unwrap();
    let mut ctx = ptr::null_mut();
    assert_eq!(
        unsafe { srldpc_context_new(cfg.as_ptr(), &mut ctx) },
        SrldpcStatus::Ok
    );
    assert!(!ctx.is_null());
    Ctx(ctx)
}

fn dims(ctx: &Ctx) -> SrldpcDims {
    let mut d = SrldpcDims::default();
    assert_eq!(
        unsafe { srldpc_context_dims(ctx.0, &mut d) },
        SrldpcStatus::Ok
    );
    d
}

#[test]
fn encode_decode_through_c_abi() {
    let ctx = small();
    let d = dims(&ctx);
    assert_eq!((d.info_bits, d.info_bytes, d.channel_uses), (224, 28, 170));
    let bits: Vec<u8> = (0..d.info_bytes).map(|i| (i * 37 + 11) as u8).collect();
    let mut z = vec![0.0; 2 * d.channel_uses];
    let st = unsafe { srldpc_encode(ctx.0, bits.as_ptr(), bits.len(), z.as_mut_ptr(), z.len()) };
    assert_eq!(st, SrldpcStatus::Ok, "{}", last_error());
    assert_eq!(last_error(), "");

    // y = z h^H with h = (1, i), no noise
    let h = [(1.0, 0.0), (0.0, 1.0)];
    let mut y = Vec::with_capacity(4 * d.channel_uses);
    for pair in z.chunks_exact(2) {
        for &(hr, hi) in &h {
            let (zr, zi) = (pair[0], pair[1]);
            y.push(zr * hr + zi * hi);
            y.push(zi * hr - zr * hi);
        }
    }
    let mut out = vec![0u8; d.info_bytes];
    let mut report = SrldpcDecodeReport::default();
    let st = unsafe {
        srldpc_decode(
            ctx.0,
            y.as_ptr(),
            y.len(),
            2,
            1e-12,
            0,
            out.as_mut_ptr(),
            out.len(),
            &mut report,
        )
    };
    assert_eq!(st, SrldpcStatus::Ok, "{}", last_error());
    assert_eq!(out, bits);
    assert!(report.valid_codeword && report.iterations >= 1);
}

#[test]
fn errors_map_to_status_codes() {
    let ctx = small();
    let d = dims(&ctx);
    let mut z = vec![0.0; 2 * d.channel_uses];
    let bits = vec![0u8; d.info_bytes - 1];
    let st = unsafe { srldpc_encode(ctx.0, bits.as_ptr(), bits.len(), z.as_mut_ptr(), z.len()) };
    assert_eq!(st, SrldpcStatus::Parse);
    assert!(last_error().contains("expected 28 bytes"));

    let bits = vec![0u8; d.info_bytes];
    let st = unsafe { srldpc_encode(ctx.0, bits.as_ptr(), bits.len(), z.as_mut_ptr(), 10) };
    assert_eq!(st, SrldpcStatus::BufferTooSmall);

    let mut out = vec![0u8; d.info_bytes];
    let st = unsafe {
        srldpc_decode(
            ctx.0,
            z.as_ptr(),
            z.len(),
            2,
            0.1,
            0,
            out.as_mut_ptr(),
            out.len(),
            ptr::null_mut(),
        )
    };
    assert_eq!(st, SrldpcStatus::Dimension);
    assert!(last_error().contains("expected 680, got 340"));

    let st = unsafe {
        srldpc_encode(
            ptr::null(),
            bits.as_ptr(),
            bits.len(),
            z.as_mut_ptr(),
            z.len(),
        )
    };
    assert_eq!(st, SrldpcStatus::NullPointer);

    let bad = CString::new(r#"{"trials": 0}"#).unwrap();
    let mut handle = ptr::null_mut();
    assert_eq!(
        unsafe { srldpc_context_new(bad.as_ptr(), &mut handle) },
        SrldpcStatus::Config
    );
    assert!(handle.is_null());
    assert_eq!(
        unsafe { srldpc_context_new(ptr::null(), ptr::null_mut()) },
        SrldpcStatus::NullPointer
    );
    unsafe { srldpc_context_free(ptr::null_mut()) };
}

#[test]
fn simulation_and_outage() {
    let ctx = small();
    let mut s = SrldpcPointSummary::default();
    assert_eq!(
        unsafe { srldpc_simulate_point(ctx.0, 60.0, 4, 3, &mut s) },
        SrldpcStatus::Ok
    );
    assert_eq!((s.trials, s.errors), (3, 0));
    assert!(s.ci95_low == 0.0 && s.ci95_high > 0.0);
    assert_eq!(
        unsafe { srldpc_simulate_point(ctx.0, 60.0, 4, 0, &mut s) },
        SrldpcStatus::InvalidArgument
    );

    let mut p = 0.0;
    assert_eq!(
        unsafe { srldpc_outage_probability(1.0, 2.0, 1, false, &mut p) },
        SrldpcStatus::Ok
    );
    assert!((p - (1.0 - (-0.5f64).exp())).abs() < 1e-12);
    assert_eq!(
        unsafe { srldpc_outage_probability(-1.0, 2.0, 1, false, &mut p) },
        SrldpcStatus::InvalidArgument
    );

    let mut sigma2 = 0.0;
    assert_eq!(
        unsafe { srldpc_sigma2_for_ebn0(ctx.0, 0.0, &mut sigma2) },
        SrldpcStatus::Ok
    );
    let d = dims(&ctx);
    assert!((sigma2 - 1.0 / d.rate).abs() < 1e-12);
    assert!(!unsafe { CStr::from_ptr(srldpc_version()) }
        .to_bytes()
        .is_empty());
}

#[test]
fn header_declares_the_api_and_compiles() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/srldpc.h");
    let text = std::fs::read_to_string(header).unwrap();
    for name in [
        "srldpc_context_new",
        "srldpc_context_free",
        "srldpc_encode",
        "srldpc_decode",
        "srldpc_simulate_point",
        "srldpc_last_error",
        "SRLDPC_STATUS_OK",
        "typedef struct SrldpcContext SrldpcContext",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
    if let Ok(out) = Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header])
        .output()
    {
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}
