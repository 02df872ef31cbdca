//! Machine-readable campaign reports.
//!
//! `trials.csv` starts with one `#` comment line holding the configuration as
//! JSON, followed by an RFC-4180 table with a header row. Floats use the
//! shortest round-trip representation, so identical campaigns produce
//! identical bytes. Wall-clock timings are left out unless asked for.

use std::io::{self, Write};

use serde::Serialize;

use super::campaign::{CampaignConfig, CampaignResult, ConditionSummary, TrialRecord};

pub const CONFIG_COMMENT_PREFIX: &str = "# config: ";

const COLUMNS: [&str; 12] = [
    "condition",
    "trial",
    "seed",
    "algorithm",
    "sources",
    "n",
    "p",
    "m",
    "amari",
    "jd_iterations",
    "converged",
    "notes",
];

pub fn write_trials_csv<W: Write>(
    out: W,
    cfg: &CampaignConfig,
    records: &[TrialRecord],
    include_timing: bool,
) -> io::Result<()> {
    let mut out = out;
    let echo = serde_json::to_string(cfg).map_err(io::Error::other)?;
    writeln!(out, "{CONFIG_COMMENT_PREFIX}{echo}")?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let mut header: Vec<&str> = COLUMNS.to_vec();
    if include_timing {
        header.push("runtime_ms");
    }
    w.write_record(&header)?;
    for r in records {
        let sources = r.source_families.iter().map(|f| f.name()).collect::<Vec<_>>().join(";");
        let mut row = vec![
            r.condition.clone(),
            r.trial.to_string(),
            r.seed.to_string(),
            r.algorithm.name().to_string(),
            sources,
            r.n.to_string(),
            r.p.to_string(),
            r.m.to_string(),
            r.amari.map(|a| a.to_string()).unwrap_or_default(),
            r.jd_iterations.to_string(),
            r.converged.to_string(),
            r.notes.clone(),
        ];
        if include_timing {
            row.push(format!("{:.3}", r.runtime_ms));
        }
        w.write_record(&row)?;
    }
    w.flush()
}

pub fn trials_csv_string(cfg: &CampaignConfig, records: &[TrialRecord], include_timing: bool) -> String {
    let mut buf = Vec::new();
    write_trials_csv(&mut buf, cfg, records, include_timing).expect("writing to memory");
    String::from_utf8(buf).expect("csv output is utf-8")
}

/// Reads the configuration echo from the first line of a `trials.csv`.
pub fn config_from_trials_csv(text: &str) -> Option<CampaignConfig> {
    let line = text.lines().next()?;
    serde_json::from_str(line.strip_prefix(CONFIG_COMMENT_PREFIX)?).ok()
}

#[derive(Serialize)]
struct SummaryReport<'a> {
    experiment: &'a str,
    master_seed: u64,
    config: &'a CampaignConfig,
    records: usize,
    failures: usize,
    summary: &'a [ConditionSummary],
}

/// `summary.json`: config echo, master seed and per-cell statistics.
pub fn summary_json(cfg: &CampaignConfig, result: &CampaignResult) -> String {
    let report = SummaryReport {
        experiment: cfg.experiment.name(),
        master_seed: cfg.seed,
        config: cfg,
        records: result.records.len(),
        failures: result.records.iter().filter(|r| r.amari.is_none()).count(),
        summary: &result.summary,
    };
    let mut s = serde_json::to_string_pretty(&report).expect("summary serializes");
    s.push('\n');
    s
}
