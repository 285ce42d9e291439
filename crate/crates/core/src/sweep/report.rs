use std::io::Write;
use std::path::Path;

use super::{SweepError, SweepReport};

pub const REPORT_VERSION: u32 = 1;

pub const CSV_HEADER: &str = "voltage_mv,region,fault_count_median,fault_rate_per_mbit,accuracy_median,\
loss_pp_median,loss_pp_p90,power_saving,ecc_corrected,ecc_uncorrectable";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

/// One row per swept voltage, descending.
pub fn write_csv<W: Write>(report: &SweepReport, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for p in &report.points {
        let region = report.regions.region_of(p.voltage_mv).map_or("", |r| r.as_str());
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            p.voltage_mv,
            region,
            p.fault_count_median,
            p.fault_rate_per_mbit,
            p.accuracy_median,
            p.loss_pp_median,
            p.loss_pp_p90,
            p.power_saving,
            p.ecc_corrected,
            p.ecc_uncorrectable
        )?;
    }
    Ok(())
}

pub fn export_report(report: &SweepReport, format: ReportFormat, path: &Path) -> Result<(), SweepError> {
    let bytes = match format {
        ReportFormat::Json => {
            let mut b = serde_json::to_vec_pretty(report).expect("report serializes");
            b.push(b'\n');
            b
        }
        ReportFormat::Csv => {
            let mut b = Vec::new();
            write_csv(report, &mut b).expect("writing to memory");
            b
        }
    };
    std::fs::write(path, bytes).map_err(|e| SweepError::io(path, e))
}

pub fn read_report(path: &Path) -> Result<SweepReport, SweepError> {
    let bytes = std::fs::read(path).map_err(|e| SweepError::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| SweepError::Parse {
        what: "report",
        message: e.to_string(),
    })
}
