//! CSV report writers. Floats are written with their shortest round-trip
//! representation so re-parsed reports match the in-memory values exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::classify::{ConfusionMatrix, ExpressionLabel};
use crate::dsf::DsfSequence;
use crate::error::Result;

/// 7x7 confusion CSV: header row and column of class codes around the
/// row-percentage matrix.
pub fn confusion_csv(matrix: &ConfusionMatrix) -> String {
    let mut out = String::new();
    for label in ExpressionLabel::ALL {
        let _ = write!(out, ",{label}");
    }
    out.push('\n');
    let pct = matrix.percentages();
    for (label, row) in ExpressionLabel::ALL.iter().zip(&pct) {
        let _ = write!(out, "{label}");
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn write_confusion_csv(path: impl AsRef<Path>, matrix: &ConfusionMatrix) -> Result<()> {
    fs::write(path, confusion_csv(matrix))?;
    Ok(())
}

/// Summary rows `<label>,<mean>,<std>`, one per condition.
pub fn summary_csv(rows: &[(String, f64, f64)]) -> String {
    let mut out = String::new();
    for (label, mean, std) in rows {
        let _ = writeln!(out, "{label},{mean},{std}");
    }
    out
}

pub fn write_summary_csv(path: impl AsRef<Path>, rows: &[(String, f64, f64)]) -> Result<()> {
    fs::write(path, summary_csv(rows))?;
    Ok(())
}

/// Per-frame field statistics (`frame,min,mean,max`), the raw material for
/// deformation-trajectory plots.
pub fn trajectory_csv(seq: &DsfSequence) -> String {
    let mut out = String::from("frame,min,mean,max\n");
    for frame in &seq.frames {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            frame.frame_index,
            frame.grid.min(),
            frame.grid.mean(),
            frame.grid.max()
        );
    }
    out
}

pub fn write_trajectory_csv(path: impl AsRef<Path>, seq: &DsfSequence) -> Result<()> {
    fs::write(path, trajectory_csv(seq))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsf::DsfField;
    use crate::grid::Grid;

    #[test]
    fn confusion_csv_shape_and_row_sums() {
        let mut m = ConfusionMatrix::new();
        for (i, t) in ExpressionLabel::ALL.iter().enumerate() {
            for (j, p) in ExpressionLabel::ALL.iter().enumerate() {
                for _ in 0..(1 + (i + j) % 3) {
                    m.record(*t, *p);
                }
            }
        }
        let csv = confusion_csv(&m);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 7);
        assert_eq!(lines[0], ",AN,DI,FE,HA,SA,SU");
        for line in &lines[1..] {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 7);
            let sum: f64 = fields[1..].iter().map(|v| v.parse::<f64>().unwrap()).sum();
            assert!((sum - 100.0).abs() < 1e-9, "row sums to {sum}");
        }
    }

    #[test]
    fn summary_has_one_row_per_condition() {
        let rows = vec![
            ("accuracy_wv".to_string(), 0.72, 0.05),
            ("accuracy_mwv".to_string(), 0.88, 0.04),
        ];
        let csv = summary_csv(&rows);
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.starts_with("accuracy_wv,0.72,0.05\n"));
    }

    #[test]
    fn trajectory_reports_min_mean_max() {
        let seq = DsfSequence {
            frames: vec![DsfField {
                grid: Grid::from_vec(1, 3, vec![1.0, 2.0, 6.0]),
                frame_index: 0,
            }],
            sample_rate: 25,
        };
        assert_eq!(trajectory_csv(&seq), "frame,min,mean,max\n0,1,3,6\n");
    }
}
