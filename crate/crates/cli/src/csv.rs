//! Plot-ready CSV output: comma separated, one header row, no quoting, and
//! every number written with 17 significant digits.

use std::fs;
use std::path::Path;

use crate::CliError;

pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write `header` and `rows` to `path`. Cells must not contain commas.
pub fn write(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut text = header.join(",");
    text.push('\n');
    for row in rows {
        debug_assert!(row.iter().all(|c| !c.contains(',')));
        text.push_str(&row.join(","));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            let s = num(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            let digits = s.split('e').next().unwrap().replace(['-', '.'], "");
            assert_eq!(digits.len(), 17);
        }
    }
}
