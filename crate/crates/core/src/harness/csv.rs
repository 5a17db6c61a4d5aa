//! CSV emission for experiment results.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::ResultRow;

pub const CSV_HEADER: &str = "scheme,detection,snr_db,d_rd_m,n_retx,throughput,trials,seed";

/// Formats a value with the given number of significant digits, always with
/// a decimal point.
pub fn format_significant(x: f64, digits: u32) -> String {
    if x.is_nan() {
        return "NaN".to_string();
    }
    if !x.is_finite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x == 0.0 {
        return format!("{:.*}", digits as usize, 0.0);
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (digits as i32 - 1 - magnitude).clamp(0, 17) as usize;
    format!("{x:.decimals$}")
}

fn render_row(row: &ResultRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        row.scheme.as_str(),
        row.detection.as_str(),
        row.snr_db,
        row.d_rd_m,
        row.n_retx,
        format_significant(row.throughput, 6),
        row.trials,
        row.seed
    )
}

/// Renders the header plus one line per row, newline-terminated.
pub fn render_csv(rows: &[ResultRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::InvalidInput("no result rows to emit".into()));
    }
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&render_row(row));
        out.push('\n');
    }
    Ok(out)
}

/// Writes the rendered CSV to a file.
pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    let text = render_csv(rows)?;
    let mut file = std::fs::File::create(path)?;
    file.write_all(text.as_bytes())?;
    Ok(())
}

/// Parses a CSV produced by [`render_csv`] back into rows (used by tests
/// and downstream tooling).
pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(Error::InvalidInput(format!(
                "unexpected CSV header: {other:?}"
            )));
        }
    }
    let mut rows = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(Error::InvalidInput(format!(
                "expected 8 CSV fields, got {}",
                fields.len()
            )));
        }
        rows.push(ResultRow {
            scheme: fields[0].parse()?,
            detection: fields[1].parse()?,
            snr_db: fields[2]
                .parse()
                .map_err(|_| Error::InvalidInput("bad snr_db field".into()))?,
            d_rd_m: fields[3]
                .parse()
                .map_err(|_| Error::InvalidInput("bad d_rd_m field".into()))?,
            n_retx: fields[4]
                .parse()
                .map_err(|_| Error::InvalidInput("bad n_retx field".into()))?,
            throughput: fields[5]
                .parse()
                .map_err(|_| Error::InvalidInput("bad throughput field".into()))?,
            trials: fields[6]
                .parse()
                .map_err(|_| Error::InvalidInput("bad trials field".into()))?,
            seed: fields[7]
                .parse()
                .map_err(|_| Error::InvalidInput("bad seed field".into()))?,
        });
    }
    Ok(rows)
}
