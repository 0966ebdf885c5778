//! CSV report writers. Plots are the consumer's concern; every figure of
//! the evaluation is a display of one of these tables.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::metrics::MetricsReport;
use crate::mmd::TprBatteryReport;
use crate::training::EpochLoss;

pub fn write_loss_curve(path: &Path, curve: &[EpochLoss]) -> Result<()> {
    let mut text = String::from("epoch,train_loss,val_loss\n");
    for row in curve {
        let _ = writeln!(text, "{},{},{}", row.epoch, row.train_loss, row.val_loss);
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Per-sample metric rows followed by box-statistic summary rows.
pub fn write_metrics(path: &Path, reports: &[MetricsReport]) -> Result<()> {
    let mut text = String::from("sample_id,nmse,cossim,method,gap_label\n");
    for report in reports {
        for (i, (nm, cs)) in report.nmse.iter().zip(&report.cosine).enumerate() {
            let _ = writeln!(text, "{},{},{},{},{}", i, nm, cs, report.method, report.gap_label);
        }
    }
    for report in reports {
        let stats = [
            ("q1", report.nmse_box.q1, report.cosine_box.q1),
            ("median", report.nmse_box.median, report.cosine_box.median),
            ("q3", report.nmse_box.q3, report.cosine_box.q3),
            (
                "whisker_lo",
                report.nmse_box.whisker_lo,
                report.cosine_box.whisker_lo,
            ),
            (
                "whisker_hi",
                report.nmse_box.whisker_hi,
                report.cosine_box.whisker_hi,
            ),
        ];
        for (name, nm, cs) in stats {
            let _ = writeln!(
                text,
                "box_{},{},{},{},{}",
                name, nm, cs, report.method, report.gap_label
            );
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct RateRow {
    pub snr_db: f64,
    pub users: usize,
    pub csi_source: String,
    pub per_user_rate: f64,
}

pub fn write_rate_rows(path: &Path, rows: &[RateRow]) -> Result<()> {
    let mut text = String::from("snr_db,users,csi_source,per_user_rate\n");
    for row in rows {
        let _ = writeln!(
            text,
            "{},{},{},{}",
            row.snr_db, row.users, row.csi_source, row.per_user_rate
        );
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Per-iteration statistic/threshold/decision rows plus a TPR summary row.
pub fn write_mmd_report(path: &Path, label: &str, battery: &TprBatteryReport) -> Result<()> {
    let mut text = String::from("iteration,comparison,observed,threshold,reject\n");
    for (i, test) in battery.tests.iter().enumerate() {
        let _ = writeln!(
            text,
            "{},{},{},{},{}",
            i,
            label,
            test.observed,
            test.threshold,
            if test.reject { 1 } else { 0 }
        );
    }
    let _ = writeln!(text, "tpr,{},{},,", label, battery.tpr);
    std::fs::write(path, text)?;
    Ok(())
}

pub fn write_cae_curve(path: &Path, curve: &[(usize, f64)]) -> Result<()> {
    let mut text = String::from("epoch,reconstruction_loss\n");
    for (epoch, loss) in curve {
        let _ = writeln!(text, "{},{}", epoch, loss);
    }
    std::fs::write(path, text)?;
    Ok(())
}
