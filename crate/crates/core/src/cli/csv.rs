//! Deterministic CSV output: 9 significant digits, `.` decimal point, comma
//! delimiter, `\n` line endings, `#` header comments.

use std::fmt::Write;

/// `%.9g`-style formatting.
pub fn fmt_g(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (8 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// CSV document assembled in memory.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    comments: Vec<String>,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { comments: vec![], columns: columns.iter().map(|c| c.to_string()).collect(), rows: vec![] }
    }

    pub fn comment(&mut self, line: impl Into<String>) {
        self.comments.push(line.into());
    }

    pub fn row(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.columns.len(), "row width");
        self.rows.push(values.iter().map(|&v| fmt_g(v)).collect());
    }

    /// Row whose first cell is a label.
    pub fn labelled_row(&mut self, label: &str, values: &[f64]) {
        assert_eq!(values.len() + 1, self.columns.len(), "row width");
        let mut cells = vec![label.to_string()];
        cells.extend(values.iter().map(|&v| fmt_g(v)));
        self.rows.push(cells);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            writeln!(out, "# {c}").expect("write to string");
        }
        writeln!(out, "{}", self.columns.join(",")).expect("write to string");
        for r in &self.rows {
            writeln!(out, "{}", r.join(",")).expect("write to string");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (-2.5, "-2.5"),
            (1.0 / 6.0, "0.166666667"),
            (2.0 / 3.0, "0.666666667"),
            (123456789.0, "123456789"),
            (1234567890.0, "1.23456789e+09"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (999999999.6, "1e+09"),
            (0.99999999996, "1"),
            (std::f64::consts::PI, "3.14159265"),
            (f64::NAN, "nan"),
        ];
        for (x, want) in cases {
            assert_eq!(fmt_g(x), want, "{x}");
        }
    }

    #[test]
    fn renders_header_and_rows() {
        let mut t = Table::new(&["a", "b"]);
        t.comment("hash = 00");
        t.row(&[1.0, 0.5]);
        assert_eq!(t.render(), "# hash = 00\na,b\n1,0.5\n");
    }
}
