//! CSV emission for experiment results. Floats are printed with nine
//! significant digits so identical runs produce byte-identical files.

use std::io::{self, Write};

use crate::experiment::{RunRecord, TruthRecord};

/// Nine significant digits, locale independent.
pub fn fmt_g9(x: f64) -> String {
    format!("{x:.8e}")
}

/// Writes the per-step metric records; list-valued fields are
/// semicolon-joined within their column.
pub fn emit_csv(records: &[RunRecord], w: &mut impl Write) -> io::Result<()> {
    writeln!(w, "run,step,filter_id,gospa,iou_per_target,rate_estimates,estimates")?;
    for r in records {
        let ious = r.iou_per_target.iter().map(|v| fmt_g9(*v)).collect::<Vec<_>>().join(";");
        let rates = r.rate_estimates.iter().map(|v| fmt_g9(*v)).collect::<Vec<_>>().join(";");
        let estimates = r
            .estimates
            .iter()
            .map(|e| {
                format!(
                    "{}:{}:{}:{}:{}:{}:{}:{}",
                    e.track_id,
                    fmt_g9(e.r),
                    fmt_g9(e.x),
                    fmt_g9(e.y),
                    fmt_g9(e.heading),
                    fmt_g9(e.vx),
                    fmt_g9(e.vy),
                    fmt_g9(e.rate_mean)
                )
            })
            .collect::<Vec<_>>()
            .join(";");
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.run,
            r.step,
            r.filter_id,
            fmt_g9(r.gospa),
            ious,
            rates,
            estimates
        )?;
    }
    Ok(())
}

/// Writes ground-truth snapshots with the per-sensor true detection counts.
pub fn emit_truth_csv(truth: &[TruthRecord], w: &mut impl Write) -> io::Result<()> {
    writeln!(w, "run,step,target,x,y,heading,vx,vy,counts")?;
    for t in truth {
        let counts = t.counts.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";");
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            t.run,
            t.step,
            t.target,
            fmt_g9(t.x),
            fmt_g9(t.y),
            fmt_g9(t.heading),
            fmt_g9(t.vx),
            fmt_g9(t.vy),
            counts
        )?;
    }
    Ok(())
}
