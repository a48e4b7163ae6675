use std::fmt;

/// A malformed line in an input file, numbered from 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// Reads a single numeric column. `#` starts a comment, blank lines are
/// skipped, and a non-numeric first record is taken as a header.
pub fn parse_column(text: &str) -> Result<Vec<f64>, ParseError> {
    let mut values = Vec::new();
    let mut seen_record = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let first_record = !seen_record;
        seen_record = true;
        let err = |message: String| ParseError { line: i + 1, message };
        if line.contains(',') {
            return Err(err(format!("expected a single column, got `{line}`")));
        }
        match line.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(v) => return Err(err(format!("value {v} is not finite"))),
            Err(_) if first_record => {}
            Err(_) => return Err(err(format!("`{line}` is not a number"))),
        }
    }
    Ok(values)
}
