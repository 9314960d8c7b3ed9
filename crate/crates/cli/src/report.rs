//! Per-contrast tables rendered as aligned text, CSV or JSON.

use robust_mct::contrast::MaxTResult;
use robust_mct::mlt::OddsRatio;
use robust_mct::nparm::RelInterval;
use serde_json::{json, Map, Value};
use std::fmt::Write as _;

pub const BASE_COLUMNS: [&str; 9] = [
    "estimate",
    "std_error",
    "statistic",
    "p_raw",
    "p_adjusted",
    "lower",
    "upper",
    "df",
    "critical_value",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Human,
    Csv,
    Json,
}

pub struct Report {
    pub method: String,
    /// `(key, value)` pairs printed above the table.
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub labels: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub notes: Vec<String>,
}

/// `x` rounded to 15 significant digits, printed in its shortest exact form.
pub fn num(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.14e}").parse().unwrap_or(x);
    rounded.to_string()
}

impl Report {
    pub fn from_test(test: &MaxTResult) -> Self {
        Report {
            method: test.method.clone(),
            meta: vec![
                ("tail".into(), test.tail.name().into()),
                ("alpha".into(), num(test.alpha)),
                ("df".into(), num(test.df)),
                ("critical_value".into(), num(test.critical_value)),
            ],
            columns: BASE_COLUMNS.iter().map(|s| s.to_string()).collect(),
            labels: test.contrasts.iter().map(|c| c.label.clone()).collect(),
            rows: test
                .contrasts
                .iter()
                .map(|c| {
                    vec![c.estimate, c.std_error, c.statistic, c.p_raw, c.p_adjusted, c.lower, c.upper, c.df, test.critical_value]
                })
                .collect(),
            notes: Vec::new(),
        }
    }

    pub fn with_odds_ratios(mut self, ors: &[OddsRatio]) -> Self {
        self.columns.extend(["odds_ratio", "or_lower", "or_upper"].map(String::from));
        for (row, o) in self.rows.iter_mut().zip(ors) {
            row.extend([o.odds_ratio, o.lower, o.upper]);
        }
        self
    }

    pub fn with_relative_effects(mut self, effects: &[RelInterval]) -> Self {
        self.columns.extend(["p_hat", "p_hat_lower", "p_hat_upper"].map(String::from));
        for (row, e) in self.rows.iter_mut().zip(effects) {
            row.extend([e.p_hat, e.lower, e.upper]);
        }
        for e in effects.iter().filter(|e| e.boundary) {
            self.notes.push(format!("{}: estimate at the boundary, clamped", e.label));
        }
        self
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Human => self.human(),
            Format::Csv => self.csv(),
            Format::Json => self.json(),
        }
    }

    fn cells(&self) -> Vec<Vec<String>> {
        self.rows.iter().map(|r| r.iter().map(|&x| num(x)).collect()).collect()
    }

    fn human(&self) -> String {
        let mut out = format!("method: {}\n", self.method);
        for (k, v) in &self.meta {
            let _ = writeln!(out, "{k}: {v}");
        }
        let cells = self.cells();
        let mut header = vec!["comparison".to_string()];
        header.extend(self.columns.iter().cloned());
        let mut widths: Vec<usize> = header.iter().map(String::len).collect();
        for (label, row) in self.labels.iter().zip(&cells) {
            widths[0] = widths[0].max(label.len());
            for (w, c) in widths[1..].iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let line = |fields: Vec<&str>| {
            let mut s = format!("{:<w$}", fields[0], w = widths[0]);
            for (f, w) in fields[1..].iter().zip(&widths[1..]) {
                let _ = write!(s, "  {f:>w$}");
            }
            s.push('\n');
            s
        };
        out.push('\n');
        out += &line(header.iter().map(String::as_str).collect());
        for (label, row) in self.labels.iter().zip(&cells) {
            let mut fields = vec![label.as_str()];
            fields.extend(row.iter().map(String::as_str));
            out += &line(fields);
        }
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        out
    }

    fn csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["method".to_string(), "comparison".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for (label, row) in self.labels.iter().zip(self.cells()) {
            let mut rec = vec![self.method.clone(), label.clone()];
            rec.extend(row);
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    fn json(&self) -> String {
        // non-finite numbers become strings so the document stays valid JSON
        let value = |x: f64| {
            let s = num(x);
            if x.is_finite() {
                s.parse::<f64>().map(Value::from).unwrap_or(Value::String(s))
            } else {
                Value::String(s)
            }
        };
        let rows: Vec<Value> = self
            .labels
            .iter()
            .zip(&self.rows)
            .map(|(label, row)| {
                let mut m = Map::new();
                m.insert("comparison".into(), Value::String(label.clone()));
                for (c, &x) in self.columns.iter().zip(row) {
                    m.insert(c.clone(), value(x));
                }
                Value::Object(m)
            })
            .collect();
        let meta: Map<String, Value> = self.meta.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect();
        let doc = json!({ "method": self.method, "meta": meta, "rows": rows, "notes": self.notes });
        serde_json::to_string_pretty(&doc).expect("serializable") + "\n"
    }
}
