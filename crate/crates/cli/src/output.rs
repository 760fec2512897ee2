//! Number formatting and tabular output.

use std::fmt::Write as _;

/// `x` with 6 significant digits, in the style of C's `%g`.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim(&format!("{x:.decimals$}")).to_string()
    } else {
        format!("{}e{}{:02}", trim(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    /// Space-aligned columns.
    Table,
    /// Tab-separated with a header line.
    Tsv,
}

/// Rows of string cells under a fixed header.
#[derive(Debug, Clone)]
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> String {
        let mut out = String::new();
        match format {
            Format::Tsv => {
                out.push_str(&self.header.join("\t"));
                out.push('\n');
                for row in &self.rows {
                    out.push_str(&row.join("\t"));
                    out.push('\n');
                }
            }
            Format::Table => {
                let mut widths: Vec<usize> = self.header.iter().map(|h| h.chars().count()).collect();
                for row in &self.rows {
                    for (w, cell) in widths.iter_mut().zip(row) {
                        *w = (*w).max(cell.chars().count());
                    }
                }
                let line = |cells: Vec<&str>, out: &mut String| {
                    let mut s = String::new();
                    for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
                        if i > 0 {
                            s.push_str("  ");
                        }
                        let _ = write!(s, "{cell:<w$}");
                    }
                    out.push_str(s.trim_end());
                    out.push('\n');
                };
                line(self.header.clone(), &mut out);
                for row in &self.rows {
                    line(row.iter().map(String::as_str).collect(), &mut out);
                }
            }
        }
        out
    }
}
