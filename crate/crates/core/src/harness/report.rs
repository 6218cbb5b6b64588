use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::harness::eval::EvalReport;

pub const CSV_HEADER: [&str; 6] = ["ref", "dist", "codec", "score", "psnr_db", "mos"];

pub fn report_json(report: &EvalReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes")
}

pub fn write_json(report: &EvalReport, path: &Path) -> Result<()> {
    let mut text = report_json(report);
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Per-record rows; failed rows leave `score` and `psnr_db` empty.
pub fn write_csv(report: &EvalReport, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(csv_io)?;
    for row in &report.records {
        let rec = &row.record;
        w.write_record([
            rec.ref_path.display().to_string(),
            rec.dist_path.display().to_string(),
            rec.codec.to_string(),
            row.score.map(|s| s.to_string()).unwrap_or_default(),
            row.psnr_db.map(|p| p.to_string()).unwrap_or_default(),
            rec.mos.to_string(),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}

/// Plot data: one block per fitted codec, rows `score\tmos\tq_fit(score)`
/// sorted by score. Blocks start with a `#` comment line naming the codec and
/// are separated by a blank line.
pub fn write_scatter(report: &EvalReport, mut out: impl Write) -> Result<()> {
    let mut first = true;
    for summary in &report.codecs {
        let Some(fit) = &summary.fit else { continue };
        let mut points: Vec<(f64, f64)> = report
            .records
            .iter()
            .filter(|r| r.record.codec == summary.codec)
            .filter_map(|r| r.score.map(|s| (s, r.record.mos)))
            .collect();
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if !first {
            writeln!(out)?;
        }
        first = false;
        writeln!(out, "# codec={} score\tmos\tq_fit", summary.codec)?;
        for (score, mos) in points {
            writeln!(out, "{score}\t{mos}\t{}", fit.predict(score))?;
        }
    }
    Ok(())
}

/// Writes whichever outputs were requested.
pub fn emit_report(
    report: &EvalReport,
    json_path: Option<&Path>,
    csv_path: Option<&Path>,
    scatter_path: Option<&Path>,
) -> Result<()> {
    if let Some(p) = json_path {
        write_json(report, p)?;
    }
    if let Some(p) = csv_path {
        write_csv(report, fs::File::create(p)?)?;
    }
    if let Some(p) = scatter_path {
        let mut buf = Vec::new();
        write_scatter(report, &mut buf)?;
        fs::write(p, buf)?;
    }
    Ok(())
}
