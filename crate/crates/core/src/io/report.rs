use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IoError;
use crate::sim::SimReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    /// Per-second rows.
    Csv,
    /// Aggregates, per-second rows and the control log.
    Json,
}

/// Per-second CSV: `second,rps,violations,drops,p99_ms,cost_cores`.
///
/// `p99_ms` is empty for seconds with no served request. Floats use three
/// decimals.
pub fn report_csv(report: &SimReport) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["second", "rps", "violations", "drops", "p99_ms", "cost_cores"])
        .expect("writing to memory");
    for s in &report.seconds {
        writer
            .write_record([
                s.second.to_string(),
                s.rps.to_string(),
                s.violations.to_string(),
                s.drops.to_string(),
                s.p99_ms.map(|v| format!("{v:.3}")).unwrap_or_default(),
                format!("{:.3}", s.cost_cores),
            ])
            .expect("writing to memory");
    }
    String::from_utf8(writer.into_inner().expect("writing to memory")).expect("ascii output")
}

pub fn write_report(report: &SimReport, path: &Path, format: ReportFormat) -> Result<(), IoError> {
    let body = match format {
        ReportFormat::Csv => report_csv(report),
        ReportFormat::Json => {
            let mut text = serde_json::to_string_pretty(report)
                .map_err(|e| IoError::parse(path, None, e.to_string()))?;
            text.push('\n');
            text
        }
    };
    std::fs::write(path, body).map_err(|e| IoError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{Aggregates, SecondStats};

    fn report() -> SimReport {
        let seconds = (0..3)
            .map(|k| SecondStats {
                second: k,
                rps: 20 + k,
                violations: k,
                drops: 0,
                p99_ms: (k != 1).then_some(100.0 + k as f64 / 3.0),
                cost_cores: 1.5,
            })
            .collect();
        SimReport {
            policy: "joint".into(),
            seed: 1,
            slo_ms: 1000,
            seconds,
            aggregates: Aggregates {
                arrivals: 63,
                served: 63,
                dropped: 0,
                in_flight: 0,
                late: 3,
                violations: 3,
                violation_rate: 3.0 / 63.0,
                p99_ms: Some(120.0),
                total_core_seconds: 4.5,
                instance_core_seconds: 4.5,
                mean_cost_cores: 1.5,
            },
            control_log: vec![],
        }
    }

    #[test]
    fn csv_rows() {
        let text = report_csv(&report());
        assert_eq!(
            text,
            "second,rps,violations,drops,p99_ms,cost_cores\n\
             0,20,0,0,100.000,1.500\n\
             1,21,1,0,,1.500\n\
             2,22,2,0,100.667,1.500\n"
        );
    }

    #[test]
    fn json_has_aggregates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        write_report(&report(), &path, ReportFormat::Json).unwrap();
        let value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let aggregates = &value["aggregates"];
        assert!(aggregates["violation_rate"].is_number());
        assert_eq!(aggregates["total_core_seconds"], 4.5);
    }

    #[test]
    fn unwritable_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("missing").join("r.csv");
        assert!(matches!(
            write_report(&report(), &path, ReportFormat::Csv),
            Err(IoError::Io { .. })
        ));
    }
}
