//! The CSV shapes this laboratory reads and writes. Headers are frozen
//! strings: downstream plotting scripts key on them, and the tests pin them
//! so a drive-by rename shows up as a failure here rather than as a broken
//! notebook somewhere else.

use crate::domain::{GemmWorkload, SimReport};
use crate::partition::ReadMode;
use crate::recnet::EpochMetrics;
use thiserror::Error;

pub const REPORT_HEADER: &str =
    "workload_id,config_id,mode,cycles,reads_a,reads_b,reads_out,writes_out,energy,utilization";
pub const METRICS_HEADER: &str = "epoch,train_loss,train_acc,val_loss,val_acc";
pub const WORKLOAD_HEADER: &str = "name,m,n,k";
pub const EVENT_LOG_HEADER: &str = "cycle,unit_row,unit_col,event";

/// One simulation outcome as a report row. Floats print in Rust's shortest
/// round-trip form, so rows are byte-stable for identical inputs.
pub fn report_row(workload_id: &str, config_id: usize, mode: ReadMode, r: &SimReport) -> String {
    format!(
        "{workload_id},{config_id},{mode},{},{},{},{},{},{},{}",
        r.cycles, r.reads_a, r.reads_b, r.reads_out, r.writes_out, r.energy, r.utilization
    )
}

pub fn metrics_row(m: &EpochMetrics) -> String {
    format!(
        "{},{},{},{},{}",
        m.epoch, m.train_loss, m.train_acc, m.val_loss, m.val_acc
    )
}

#[derive(Debug, Error)]
pub enum WorkloadCsvError {
    #[error("workload header mismatch: expected {WORKLOAD_HEADER:?}, got {0:?}")]
    Header(String),
    #[error("workload line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Parses a `name,m,n,k` workload list. Names must be nonempty and
/// comma-free; blank lines are skipped.
pub fn parse_workloads(text: &str) -> Result<Vec<(String, GemmWorkload)>, WorkloadCsvError> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != WORKLOAD_HEADER {
        return Err(WorkloadCsvError::Header(header.to_string()));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let lineno = i + 2;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(WorkloadCsvError::Parse {
                line: lineno,
                msg: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let name = fields[0].trim();
        if name.is_empty() {
            return Err(WorkloadCsvError::Parse {
                line: lineno,
                msg: "empty workload name".into(),
            });
        }
        let mut dims = [0u64; 3];
        for (slot, (field, label)) in dims
            .iter_mut()
            .zip(fields[1..].iter().zip(["m", "n", "k"]))
        {
            *slot = field.trim().parse().map_err(|e| WorkloadCsvError::Parse {
                line: lineno,
                msg: format!("field {label}: {e}"),
            })?;
        }
        let w = GemmWorkload::new(dims[0], dims[1], dims[2]).map_err(|e| {
            WorkloadCsvError::Parse {
                line: lineno,
                msg: e.to_string(),
            }
        })?;
        out.push((name.to_string(), w));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn headers_are_frozen() {
        assert_eq!(
            REPORT_HEADER,
            "workload_id,config_id,mode,cycles,reads_a,reads_b,reads_out,writes_out,energy,utilization"
        );
        assert_eq!(METRICS_HEADER, "epoch,train_loss,train_acc,val_loss,val_acc");
        assert_eq!(WORKLOAD_HEADER, "name,m,n,k");
        assert_eq!(EVENT_LOG_HEADER, "cycle,unit_row,unit_col,event");
    }

    #[test]
    fn report_row_layout() {
        let r = SimReport {
            cycles: 2,
            reads_a: 1,
            reads_b: 1,
            reads_out: 0,
            writes_out: 1,
            mac_ops: 1,
            energy: 13.1,
            utilization: 0.5,
        };
        assert_eq!(
            report_row("conv1", 3, ReadMode::Collated, &r),
            "conv1,3,collated,2,1,1,0,1,13.1,0.5"
        );
        assert_eq!(REPORT_HEADER.split(',').count(), report_row("x", 0, ReadMode::Replicated, &r).split(',').count());
    }

    #[test]
    fn metrics_row_layout() {
        let m = EpochMetrics {
            epoch: 4,
            train_loss: 0.25,
            train_acc: 0.875,
            val_loss: f64::NAN,
            val_acc: f64::NAN,
        };
        assert_eq!(metrics_row(&m), "4,0.25,0.875,NaN,NaN");
    }

    #[test]
    fn workload_csv_round_trip() {
        let text = "name,m,n,k\nfc1,1,1000,800\nconv_3x3, 64, 32, 576\n\nsquare,7,7,7\n";
        let ws = parse_workloads(text).unwrap();
        assert_eq!(ws.len(), 3);
        assert_eq!(ws[0].0, "fc1");
        assert_eq!(ws[1].1, GemmWorkload::new(64, 32, 576).unwrap());
        assert_eq!(ws[2].0, "square");
    }

    #[test]
    fn workload_csv_rejects_malformed_input() {
        assert!(matches!(
            parse_workloads("m,n,k\n1,2,3\n"),
            Err(WorkloadCsvError::Header(_))
        ));
        assert!(parse_workloads("name,m,n,k\nx,1,2\n").is_err());
        assert!(parse_workloads("name,m,n,k\nx,0,2,3\n").is_err());
        assert!(parse_workloads("name,m,n,k\nx,one,2,3\n").is_err());
        assert!(parse_workloads("name,m,n,k\n,1,2,3\n").is_err());
        assert!(parse_workloads("name,m,n,k\na,b,1,2,3\n").is_err());
    }
}
