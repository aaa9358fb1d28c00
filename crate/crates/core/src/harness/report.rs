//! CSV emission. Every file starts with a `#` comment naming the table
//! kind, the column-set version and the config hash, then a fixed header.

use std::fmt::Write as _;

use super::runner::{OutageRow, PointSummary, PredictionRow, RunRecord, SeComparisonRow};

pub const CSV_VERSION: u32 = 1;

fn table(
    kind: &str,
    config_hash: Option<&str>,
    header: &[&str],
    rows: impl Iterator<Item = Vec<String>>,
) -> String {
    let mut out = format!("# srldpc {kind} v{CSV_VERSION}");
    if let Some(h) = config_hash {
        let _ = write!(out, " config={h}");
    }
    out.push('\n');
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn num(v: f64) -> String {
    format!("{v:.6e}")
}

fn db(v: f64) -> String {
    format!("{v:.4}")
}

pub fn summary_csv(config_hash: &str, rows: &[PointSummary]) -> String {
    table(
        "simulate",
        Some(config_hash),
        &[
            "ebn0_db",
            "antennas",
            "trials",
            "errors",
            "undetected",
            "bler",
            "bler_ci95_low",
            "bler_ci95_high",
            "mean_initial_cmse",
            "mean_final_cmse",
            "mean_iters",
        ],
        rows.iter().map(|r| {
            vec![
                db(r.ebn0_db),
                r.antennas.to_string(),
                r.trials.to_string(),
                r.errors.to_string(),
                r.undetected.to_string(),
                num(r.bler),
                num(r.ci95_low),
                num(r.ci95_high),
                num(r.mean_initial_cmse),
                num(r.mean_final_cmse),
                num(r.mean_iters),
            ]
        }),
    )
}

pub fn trials_csv(config_hash: &str, rows: &[RunRecord]) -> String {
    table(
        "trials",
        Some(config_hash),
        &[
            "ebn0_db",
            "antennas",
            "trial",
            "seed_base",
            "stream",
            "block_error",
            "undetected_error",
            "converged_at",
            "iterations",
            "initial_cmse",
            "final_cmse",
            "final_tau2",
        ],
        rows.iter().map(|r| {
            vec![
                db(r.ebn0_db),
                r.antennas.to_string(),
                r.trial.to_string(),
                r.seed_base.to_string(),
                r.stream.to_string(),
                (r.block_error as u8).to_string(),
                (r.undetected_error as u8).to_string(),
                r.converged_at.map(|v| v.to_string()).unwrap_or_default(),
                r.iterations.to_string(),
                num(r.initial_cmse),
                num(r.final_cmse),
                num(r.final_tau2),
            ]
        }),
    )
}

pub fn se_comparison_csv(config_hash: &str, rows: &[SeComparisonRow]) -> String {
    table(
        "se-trace",
        Some(config_hash),
        &[
            "ebn0_db",
            "antennas",
            "iter",
            "tau2_empirical",
            "tau2_se",
            "mse_empirical",
            "mse_se",
            "mse_rel_gap",
            "cmse_empirical",
            "cmse_se",
        ],
        rows.iter().map(|r| {
            vec![
                db(r.ebn0_db),
                r.antennas.to_string(),
                r.iteration.to_string(),
                num(r.tau2_empirical),
                num(r.tau2_se),
                num(r.mse_empirical),
                num(r.mse_se),
                num(r.mse_relative_gap()),
                num(r.cmse_empirical),
                num(r.cmse_se),
            ]
        }),
    )
}

pub fn prediction_csv(config_hash: &str, rows: &[PredictionRow]) -> String {
    table(
        "se-bler",
        Some(config_hash),
        &[
            "ebn0_db",
            "antennas",
            "bler_se",
            "mean_final_tau2",
            "h_samples",
        ],
        rows.iter().map(|r| {
            vec![
                db(r.ebn0_db),
                r.antennas.to_string(),
                num(r.bler_se),
                num(r.mean_final_tau2),
                r.h_samples.to_string(),
            ]
        }),
    )
}

pub fn outage_csv(rate: f64, rows: &[OutageRow]) -> String {
    table(
        &format!("outage rate={rate:.6}"),
        None,
        &["ebn0_db", "antennas", "p_out"],
        rows.iter()
            .map(|r| vec![db(r.ebn0_db), r.antennas.to_string(), num(r.p_out)]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outage_layout() {
        let rows = [OutageRow {
            ebn0_db: 1.0,
            antennas: 4,
            p_out: 0.25,
        }];
        let text = outage_csv(1.6, &rows);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# srldpc outage rate=1.600000 v1");
        assert_eq!(lines[1], "ebn0_db,antennas,p_out");
        assert_eq!(lines[2], "1.0000,4,2.500000e-1");
        assert!(text.ends_with('\n') && !text.contains('\r'));
    }
}
