//! CSV dialect shared by every output: comma separator, one header row,
//! decimal point, scientific notation for `|v| < 1e-3` or `|v| > 1e6`.

use std::io::Write;

use crate::{Result, Scalar};

/// Formats a number in the CSV dialect. Values print with the shortest
/// representation that round-trips.
pub fn format_value<T: Scalar>(v: T) -> String {
    let x = v.to_f64_lossy();
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let a = x.abs();
    if x != 0.0 && !(1e-3..=1e6).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

/// Writes a header and rows of already formatted cells.
pub fn write_table<W: Write>(out: W, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a named grid: one row per `row_labels` entry, one column per
/// `col_labels` entry, first column holding the row label.
pub fn write_grid<W: Write, T: Scalar>(
    out: W,
    corner: &str,
    row_labels: &[String],
    col_labels: &[String],
    values: &[Vec<T>],
) -> Result<()> {
    let mut header = vec![corner];
    header.extend(col_labels.iter().map(String::as_str));
    let rows: Vec<Vec<String>> = row_labels
        .iter()
        .zip(values)
        .map(|(label, row)| {
            std::iter::once(label.clone())
                .chain(row.iter().map(|&v| format_value(v)))
                .collect()
        })
        .collect();
    write_table(out, &header, &rows)
}
