//! Output assembly: locale-independent CSV, JSON mirroring the CSV fields,
//! and plain-text tables. Numbers print with six decimal places; `-inf`
//! appears literally in CSV/text and as `null` in JSON.

use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Result<Self, String> {
        match s {
            "text" => Ok(Format::Text),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown output format '{other}' (expected text, csv or json)")),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Format::Text => "text",
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Fixed-point formatting with at least six significant digits (six decimal
/// places, extended for magnitudes below 0.1); infinities print as
/// `inf` / `-inf`.
pub fn num(x: f64) -> String {
    if x == f64::NEG_INFINITY {
        return "-inf".into();
    }
    if x == f64::INFINITY {
        return "inf".into();
    }
    if x == 0.0 {
        return "0.000000".into();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = if magnitude >= 0 { 6 } else { (5 - magnitude).min(18) as usize };
    format!("{x:.decimals$}")
}

/// JSON value for a possibly infinite bound (`null` for infinities).
pub fn json_num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

/// A simple column-ordered table that renders to CSV, JSON or aligned text.
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    /// JSON mirrors of the rows (same field order as `columns`).
    pub json_rows: Vec<Value>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Self { columns, rows: Vec::new(), json_rows: Vec::new() }
    }

    pub fn push(&mut self, cells: Vec<String>, json_cells: Vec<Value>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        debug_assert_eq!(json_cells.len(), self.columns.len());
        let obj: serde_json::Map<String, Value> = self
            .columns
            .iter()
            .zip(json_cells)
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        self.rows.push(cells);
        self.json_rows.push(Value::Object(obj));
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&Value::Array(self.json_rows.clone()))
            .expect("serializable");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut widths: Vec<usize> = self.columns.iter().map(|c| c.len()).collect();
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                widths[i] = widths[i].max(cell.len());
            }
        }
        let mut out = String::new();
        let render = |cells: Vec<&str>, widths: &[usize], out: &mut String| {
            let line: Vec<String> = cells
                .iter()
                .zip(widths)
                .map(|(c, w)| format!("{c:<w$}", w = w))
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        };
        render(self.columns.to_vec(), &widths, &mut out);
        for row in &self.rows {
            render(row.iter().map(String::as_str).collect(), &widths, &mut out);
        }
        out
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Text => self.to_text(),
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

/// Writes to `--out` when given, otherwise to stdout.
pub fn emit(out: Option<&std::path::Path>, content: &str) -> Result<(), String> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn at_least_six_significant_digits() {
        assert_eq!(num(0.5), "0.500000");
        assert_eq!(num(0.025), "0.0250000");
        assert_eq!(num(0.00123456789), "0.00123457");
        assert_eq!(num(849.0), "849.000000");
        assert_eq!(num(-0.0343881), "-0.0343881");
    }

    #[test]
    fn csv_and_json_mirror_fields() {
        let mut t = Table::new(vec!["a", "b"]);
        t.push(vec![num(1.0), "x".into()], vec![json_num(1.0), json!("x")]);
        t.push(vec![num(f64::NEG_INFINITY), "y".into()], vec![json_num(f64::NEG_INFINITY), json!("y")]);
        let csv = t.to_csv();
        assert!(csv.starts_with("a,b\n1.000000,x\n-inf,y\n"));
        let parsed: Value = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(parsed[0]["a"], json!(1.0));
        assert_eq!(parsed[1]["a"], Value::Null);
        assert_eq!(parsed[1]["b"], json!("y"));
    }
}
