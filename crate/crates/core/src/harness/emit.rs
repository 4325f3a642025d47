use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{ExperimentOutput, Mode, SummaryRow, TrialRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    /// Whitespace-separated series, one file per scheme
    Plotdata,
}

const RECORD_COLUMNS: [&str; 14] = [
    "mode",
    "sweep_index",
    "sweep_label",
    "sweep_value",
    "trial_index",
    "scheme",
    "feasible",
    "ap_static",
    "ap_transmit",
    "mu_transmit",
    "total",
    "active_count",
    "wall_time_s",
    "diagnostic",
];

const SUMMARY_COLUMNS: [&str; 16] = [
    "mode",
    "sweep_index",
    "sweep_label",
    "sweep_value",
    "scheme",
    "trials",
    "infeasible",
    "common_feasible",
    "mean_total",
    "se_total",
    "mean_ap_side",
    "se_ap_side",
    "mean_mu_side",
    "se_mu_side",
    "mean_active",
    "se_active",
];

fn write_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Write {
        path: path.to_path_buf(),
        source,
    }
}

/// CSV with an explicit header so an empty table still names its columns.
fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let file = fs::File::create(path).map_err(write_err(path))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(write_err(path))?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(write_err(path))
}

fn plot_series(rows: &[&SummaryRow]) -> String {
    let mode = rows.first().map(|r| r.mode);
    let mut out = String::new();
    match mode {
        Some(Mode::Feasibility) | None => out.push_str("# sweep_label sweep_value infeasible trials\n"),
        Some(Mode::SumPower) => out.push_str("# sweep_value mean_total se_total mean_active se_active\n"),
        Some(Mode::Tradeoff) => out.push_str("# lambda mean_ap_side se_ap_side mean_mu_side se_mu_side\n"),
    }
    for r in rows {
        let line = match r.mode {
            Mode::Feasibility => format!("{} {} {} {}", r.sweep_label, r.sweep_value, r.infeasible, r.trials),
            Mode::SumPower => format!(
                "{} {} {} {} {}",
                r.sweep_value, r.mean_total, r.se_total, r.mean_active, r.se_active
            ),
            Mode::Tradeoff => format!(
                "{} {} {} {} {}",
                r.sweep_value, r.mean_ap_side, r.se_ap_side, r.mean_mu_side, r.se_mu_side
            ),
        };
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Writes the requested formats into `dir` and returns the files written.
pub fn emit(dir: &Path, output: &ExperimentOutput, summary: &[SummaryRow], formats: &[Format]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(write_err(dir))?;
    let mut written = Vec::new();
    for format in formats {
        match format {
            Format::Csv => {
                let p = dir.join("records.csv");
                write_csv(&p, &RECORD_COLUMNS, &output.records)?;
                written.push(p);
                let p = dir.join("summary.csv");
                write_csv(&p, &SUMMARY_COLUMNS, summary)?;
                written.push(p);
            }
            Format::Json => {
                let p = dir.join("records.json");
                write_text(&p, &serde_json::to_string_pretty(output)?)?;
                written.push(p);
                let p = dir.join("summary.json");
                write_text(&p, &serde_json::to_string_pretty(summary)?)?;
                written.push(p);
            }
            Format::Plotdata => {
                let sub = dir.join("plotdata");
                fs::create_dir_all(&sub).map_err(write_err(&sub))?;
                let mut schemes: Vec<_> = summary.iter().map(|r| r.scheme).collect();
                schemes.sort();
                schemes.dedup();
                for scheme in schemes {
                    let rows: Vec<&SummaryRow> = summary.iter().filter(|r| r.scheme == scheme).collect();
                    let p = sub.join(format!("{}_{}.dat", rows[0].mode.name(), scheme));
                    let mut f = fs::File::create(&p).map_err(write_err(&p))?;
                    f.write_all(plot_series(&rows).as_bytes()).map_err(write_err(&p))?;
                    written.push(p);
                }
            }
        }
    }
    Ok(written)
}

/// Loads the output of a previous run from `dir`: `records.json` when
/// present, otherwise `records.csv` (which carries no skip markers).
pub fn read_records(dir: &Path) -> Result<ExperimentOutput> {
    let json = dir.join("records.json");
    if json.exists() {
        return Ok(serde_json::from_str(&fs::read_to_string(json)?)?);
    }
    let mut r = csv::Reader::from_path(dir.join("records.csv"))?;
    let records = r.deserialize::<TrialRecord>().collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(ExperimentOutput {
        records,
        skipped: Vec::new(),
    })
}
