use std::io::{self, Write};

use super::sweep::ResultRow;

pub const CSV_HEADER: &str = "K,c,gamma,mode,batch_size,gap,stderr,elapsed_ms,seed";

/// Decimal notation with at least `digits` significant digits.
pub fn format_significant(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return format!("{:.*}", digits.saturating_sub(1), 0.0);
    }
    let magnitude = x.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Writes the header and one line per row (UTF-8, LF line endings).
pub fn write_csv<W: Write>(rows: &[ResultRow], mut w: W) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        let batch = r.batch_size.map(|b| b.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{:.3},{}",
            r.k,
            r.c,
            r.gamma,
            r.mode.as_str(),
            batch,
            format_significant(r.gap, 12),
            format_significant(r.stderr, 12),
            r.elapsed_ms,
            r.seed
        )?;
    }
    w.flush()
}
