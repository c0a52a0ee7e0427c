//! Reading two-brand monthly sales from CSV.

use std::path::Path;

use diffusia::SalesSeries;

use crate::CliError;

pub const MIN_ROWS: usize = 24;

/// `YYYY-MM` as a month count since year 0.
fn parse_month(s: &str) -> Option<i64> {
    let (y, m) = s.split_once('-')?;
    if y.len() != 4 || m.len() != 2 {
        return None;
    }
    let y: i64 = y.parse().ok()?;
    let m: i64 = m.parse().ok()?;
    (1..=12).contains(&m).then_some(y * 12 + m - 1)
}

/// Parses CSV text with header `t,<brand1>,<brand2>` or `month,<brand1>,<brand2>`.
/// Line numbers in diagnostics count the header as line 1.
pub fn parse_sales(text: &str) -> Result<SalesSeries, CliError> {
    let invalid = |msg: String| CliError::Validation(msg);
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| invalid(format!("line 1: {e}")))?.clone();
    if header.len() != 3 {
        return Err(invalid(format!(
            "line 1: expected 3 columns (t or month, then two brands), found {}",
            header.len()
        )));
    }
    let by_month = match &header[0] {
        "t" => false,
        "month" => true,
        other => return Err(invalid(format!("line 1: first column must be 't' or 'month', found '{other}'"))),
    };
    let names = [header[1].to_string(), header[2].to_string()];

    let mut first_month = None;
    let (mut s1, mut s2) = (Vec::new(), Vec::new());
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| invalid(format!("line {line}: {e}")))?;
        if rec.len() != 3 {
            return Err(invalid(format!("line {line}: expected 3 cells, found {}", rec.len())));
        }
        let expected = i as i64 + 1;
        if by_month {
            let m = parse_month(&rec[0])
                .ok_or_else(|| invalid(format!("line {line}, column month: '{}' is not YYYY-MM", &rec[0])))?;
            let first = *first_month.get_or_insert(m);
            if m - first + 1 != expected {
                return Err(invalid(format!(
                    "line {line}, column month: {} does not follow the previous month (missing or repeated month)",
                    &rec[0]
                )));
            }
        } else {
            let t: f64 = rec[0]
                .parse()
                .map_err(|_| invalid(format!("line {line}, column t: '{}' is not a number", &rec[0])))?;
            if t != expected as f64 {
                return Err(invalid(format!(
                    "line {line}, column t: expected {expected}, found {} (months must run 1, 2, ... without gaps)",
                    &rec[0]
                )));
            }
        }
        for (col, out) in [(1, &mut s1), (2, &mut s2)] {
            let v: f64 = rec[col].parse().map_err(|_| {
                invalid(format!("line {line}, column {}: '{}' is not a number", names[col - 1], &rec[col]))
            })?;
            if !v.is_finite() {
                return Err(invalid(format!("line {line}, column {}: value must be finite", names[col - 1])));
            }
            if v < 0.0 {
                return Err(invalid(format!("line {line}, column {}: negative sales {v}", names[col - 1])));
            }
            out.push(v);
        }
    }
    if s1.len() < MIN_ROWS {
        return Err(invalid(format!("need at least {MIN_ROWS} data rows, found {}", s1.len())));
    }
    let t = (1..=s1.len()).map(|i| i as f64).collect();
    SalesSeries::new(names, t, s1, s2).map_err(|e| invalid(e.to_string()))
}

pub fn ingest(path: &Path) -> Result<SalesSeries, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    parse_sales(&text)
}
