use std::path::Path;
use std::process::Command;

use srldpc::harness::{pack_bits, ComplexMatrix};

const SMALL: &[&str] = &[
    "--set",
    "code.sections=64",
    "--set",
    "code.section_size=16",
    "--set",
    "code.info_sections=56",
    "--set",
    "code.channel_uses=170",
];

fn srldpc(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_srldpc"))
        .args(args)
        .env("SRLDPC_THREADS", "2")
        .output()
        .unwrap()
}

fn with_small<'a>(mut args: Vec<&'a str>) -> Vec<&'a str> {
    args.extend_from_slice(SMALL);
    args
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn payload(bits: usize) -> Vec<u8> {
    (0..bits).map(|i| ((i * 7 + i / 3) % 2) as u8).collect()
}

#[test]
fn encode_decode_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let bits_in = dir.path().join("in.bits");
    let bits = payload(56 * 4);
    std::fs::write(&bits_in, pack_bits(&bits)).unwrap();
    let (idx, samples, rx, out, diag) = (
        dir.path().join("idx.txt"),
        dir.path().join("z.srlc"),
        dir.path().join("y.srlc"),
        dir.path().join("out.bits"),
        dir.path().join("diag.json"),
    );
    let o = srldpc(&with_small(vec![
        "encode",
        "--bits",
        s(&bits_in),
        "--indices",
        s(&idx),
        "--samples",
        s(&samples),
        "--received",
        s(&rx),
        "--ebn0",
        "120",
    ]));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_to_string(&idx).unwrap().lines().count(), 64);
    let z = ComplexMatrix::load(&samples).unwrap();
    assert_eq!((z.rows, z.cols), (170, 1));
    let y = ComplexMatrix::load(&rx).unwrap();
    assert_eq!((y.rows, y.cols), (170, 4));

    let sigma2 = format!("{:e}", 1e-12);
    let o = srldpc(&with_small(vec![
        "decode",
        "--received",
        s(&rx),
        "--sigma2",
        &sigma2,
        "--bits",
        s(&out),
        "--diagnostics",
        s(&diag),
    ]));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        std::fs::read(&out).unwrap(),
        std::fs::read(&bits_in).unwrap()
    );
    let d: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&diag).unwrap()).unwrap();
    assert_eq!(d["valid_codeword"], true);
}

#[test]
fn malformed_inputs_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.bits");
    std::fs::write(&empty, b"").unwrap();
    let z = dir.path().join("z.srlc");
    let idx = dir.path().join("idx.txt");
    let o = srldpc(&with_small(vec![
        "encode",
        "--bits",
        s(&empty),
        "--indices",
        s(&idx),
        "--samples",
        s(&z),
    ]));
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("expected 28 bytes"));

    let m = ComplexMatrix::new(170, 4, vec![Default::default(); 680]).unwrap();
    let bytes = m.to_bytes();
    let cut = dir.path().join("cut.srlc");
    std::fs::write(&cut, &bytes[..1000]).unwrap();
    let out = dir.path().join("o.bits");
    let o = srldpc(&with_small(vec![
        "decode",
        "--received",
        s(&cut),
        "--ebn0",
        "3",
        "--bits",
        s(&out),
    ]));
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("byte offset 1000"));

    let wrong = dir.path().join("wrong.srlc");
    ComplexMatrix::new(10, 4, vec![Default::default(); 40])
        .unwrap()
        .save(&wrong)
        .unwrap();
    let o = srldpc(&with_small(vec![
        "decode",
        "--received",
        s(&wrong),
        "--ebn0",
        "3",
        "--bits",
        s(&out),
    ]));
    assert!(String::from_utf8_lossy(&o.stderr).contains("expected 170, got 10"));

    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{\n\"trials\": 2,\n}").unwrap();
    let o = srldpc(&["simulate", "--config", s(&cfg)]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn simulate_writes_summary_and_trials() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("run.csv");
    let set_csv = format!("outputs.csv={}", s(&csv));
    let args = with_small(vec![
        "simulate",
        "--set",
        "trials=6",
        "--set",
        "sweep.ebn0_db=[4, 8]",
        "--set",
        "outputs.trace=true",
        "--set",
        &set_csv,
    ]);
    let o = srldpc(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let first = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(first.lines().count(), 4);
    let trials = std::fs::read_to_string(dir.path().join("run.trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 2 + 12);
    assert!(srldpc(&args).status.success());
    assert_eq!(std::fs::read_to_string(&csv).unwrap(), first);
}

#[test]
fn outage_and_se_subcommands() {
    let o = srldpc(&["outage", "--antennas", "1,4", "--ebn0", "-1,0,1"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 2 + 6);
    assert!(text.starts_with("# srldpc outage rate=1.602"));

    let o = srldpc(&with_small(vec![
        "se",
        "--set",
        "trials=4",
        "--set",
        "sweep.ebn0_db=[6]",
        "--set",
        "decoder.siso_per_iter=0",
        "--set",
        "decoder.final_bp_iterations=0",
        "--set",
        "decoder.max_iterations=6",
        "--set",
        "se.mc_sections=2000",
    ]));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 2 + 6);
    assert!(text
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("ebn0_db,antennas,iter,tau2_empirical"));
}

#[test]
fn tables_then_prediction() {
    let dir = tempfile::tempdir().unwrap();
    let (mse, bler) = (dir.path().join("mse.json"), dir.path().join("bler.json"));
    let common = [
        "--set",
        "se.snr_grid_db=[0, 4, 8, 12, 16]",
        "--set",
        "se.table_samples=8",
        "--set",
        "sweep.ebn0_db=[2, 40]",
        "--set",
        "se.h_samples=50",
    ];
    let mut args = with_small(vec!["build-tables", "--mse", s(&mse), "--bler", s(&bler)]);
    args.extend_from_slice(&common);
    let o = srldpc(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let set_mse = format!("se.mse_table={}", s(&mse));
    let set_bler = format!("se.bler_table={}", s(&bler));
    let mut args = with_small(vec![
        "se",
        "--set",
        "se.compare_empirical=false",
        "--set",
        &set_mse,
        "--set",
        &set_bler,
    ]);
    args.extend_from_slice(&common);
    let o = srldpc(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<Vec<&str>> = text
        .lines()
        .skip(2)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(rows.len(), 2);
    let high: f64 = rows[1][2].parse().unwrap();
    assert_eq!(high, 0.0);
}
