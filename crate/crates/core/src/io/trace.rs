use std::path::Path;

use super::{read_to_string, IoError};
use crate::workload::WorkloadTrace;

/// Reads a `second,rps` CSV and scales every rate by `scale`.
///
/// The header row is optional. Seconds must start at 0 and be contiguous.
pub fn load_trace(path: &Path, scale: f64) -> Result<WorkloadTrace, IoError> {
    parse_trace(&read_to_string(path)?, scale, path)
}

/// Like [`load_trace`] on text already in memory; `origin` is only used in
/// error messages.
pub fn parse_trace(text: &str, scale: f64, origin: &Path) -> Result<WorkloadTrace, IoError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rps = Vec::new();
    for (index, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line());
            IoError::parse(origin, line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line());
        if index == 0 && record.get(0) == Some("second") {
            if record.get(1) != Some("rps") || record.len() != 2 {
                return Err(IoError::parse(origin, line, "expected header `second,rps`"));
            }
            continue;
        }
        if record.len() != 2 {
            return Err(IoError::parse(
                origin,
                line,
                format!("expected 2 fields, found {}", record.len()),
            ));
        }
        let second: u64 = record[0]
            .parse()
            .map_err(|_| IoError::parse(origin, line, format!("bad second `{}`", &record[0])))?;
        let rate: u32 = record[1]
            .parse()
            .map_err(|_| IoError::parse(origin, line, format!("bad rps `{}`", &record[1])))?;
        let expected = rps.len() as u64;
        if second != expected {
            if second > expected {
                return Err(IoError::Gap {
                    path: origin.to_path_buf(),
                    missing: expected,
                    found: second,
                });
            }
            return Err(IoError::parse(
                origin,
                line,
                format!("second {second} out of order, expected {expected}"),
            ));
        }
        rps.push(rate);
    }
    let trace = WorkloadTrace::new(rps).map_err(|e| IoError::parse(origin, None, e.to_string()))?;
    trace
        .scaled(scale)
        .map_err(|e| IoError::parse(origin, None, e.to_string()))
}

pub fn trace_csv(trace: &WorkloadTrace) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["second", "rps"])
        .expect("writing to memory");
    for (second, rps) in trace.rps().iter().enumerate() {
        writer
            .write_record([second.to_string(), rps.to_string()])
            .expect("writing to memory");
    }
    String::from_utf8(writer.into_inner().expect("writing to memory")).expect("ascii output")
}

pub fn write_trace(trace: &WorkloadTrace, path: &Path) -> Result<(), IoError> {
    std::fs::write(path, trace_csv(trace)).map_err(|e| IoError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, scale: f64) -> Result<WorkloadTrace, IoError> {
        parse_trace(text, scale, Path::new("t.csv"))
    }

    #[test]
    fn examples() {
        assert_eq!(parse("0,20\n1,120\n2,20", 1.0).unwrap().rps(), &[20, 120, 20]);
        assert_eq!(parse("0,20\n1,120\n2,20", 0.5).unwrap().rps(), &[10, 60, 10]);
        assert_eq!(parse("second,rps\n0,20\n1,120\n", 1.0).unwrap().rps(), &[20, 120]);
    }

    #[test]
    fn gap_reports_missing_second() {
        match parse("0,20\n2,20", 1.0) {
            Err(IoError::Gap { missing, found, .. }) => assert_eq!((missing, found), (1, 2)),
            other => panic!("expected gap, got {other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        match parse("second,rps\n0,20\n1,abc\n", 1.0) {
            Err(IoError::Parse { line, .. }) => assert_eq!(line, Some(3)),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(matches!(parse("0,-1", 1.0), Err(IoError::Parse { .. })));
        assert!(matches!(parse("1,5", 1.0), Err(IoError::Gap { .. })));
        assert!(matches!(parse("0,5\n0,6", 1.0), Err(IoError::Parse { .. })));
        assert!(matches!(parse("", 1.0), Err(IoError::Parse { .. })));
        assert!(matches!(parse("0,5,6", 1.0), Err(IoError::Parse { .. })));
    }

    #[test]
    fn round_trip() {
        let trace = WorkloadTrace::new(vec![0, 7, 120, 3]).unwrap();
        assert_eq!(parse(&trace_csv(&trace), 1.0).unwrap(), trace);
    }
}
