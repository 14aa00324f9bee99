//! Report rendering: `key=value` lines followed by aligned tables.

use std::fmt::Write as _;

/// Renders an aligned table: first column left-justified, the rest
/// right-justified, two spaces between columns.
pub fn table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let cols = headers.len();
    let mut width: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in rows {
        for (c, cell) in row.iter().enumerate() {
            width[c] = width[c].max(cell.len());
        }
    }
    let mut out = String::new();
    let emit = |out: &mut String, cells: &[&str]| {
        for (c, cell) in cells.iter().enumerate() {
            if c > 0 {
                out.push_str("  ");
            }
            if c == 0 {
                let _ = write!(out, "{cell:<w$}", w = width[c]);
            } else {
                let _ = write!(out, "{cell:>w$}", w = width[c]);
            }
        }
        while out.ends_with(' ') {
            out.pop();
        }
        out.push('\n');
    };
    emit(&mut out, headers);
    let dashes: Vec<String> = (0..cols).map(|c| "-".repeat(width[c])).collect();
    let dash_refs: Vec<&str> = dashes.iter().map(|s| s.as_str()).collect();
    emit(&mut out, &dash_refs);
    for row in rows {
        let refs: Vec<&str> = row.iter().map(|s| s.as_str()).collect();
        emit(&mut out, &refs);
    }
    out
}

/// Percentile of a sorted sample set (nearest-rank).
pub fn percentile(sorted: &[u64], p: f64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let rank = (p / 100.0 * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}
