//! CSV ingestion into one grouped sample per response column.

use robust_mct::{Group, GroupedSample};
use std::collections::HashMap;
use std::fmt;
use std::path::Path;

/// Ingestion failure, with the 1-based file line when it concerns a single row.
#[derive(Debug)]
pub struct IngestError {
    pub line: Option<u64>,
    pub message: String,
}

impl fmt::Display for IngestError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for IngestError {}

fn fail(line: Option<u64>, message: impl Into<String>) -> IngestError {
    IngestError {
        line,
        message: message.into(),
    }
}

pub struct IngestOptions<'a> {
    pub group: &'a str,
    pub responses: &'a [String],
    pub control: Option<&'a str>,
    pub drop_missing: bool,
}

/// Parsed data: one sample per response, all with the same rows in the same order.
#[derive(Debug)]
pub struct Dataset {
    pub responses: Vec<String>,
    pub samples: Vec<GroupedSample>,
    pub dropped_rows: Vec<u64>,
}

fn is_missing(field: &str) -> bool {
    matches!(field.trim(), "" | "NA" | "na" | "NaN" | "nan" | ".")
}

pub fn read_csv(path: &Path, opts: &IngestOptions) -> Result<Dataset, IngestError> {
    let file = std::fs::File::open(path).map_err(|e| fail(None, format!("cannot read {}: {e}", path.display())))?;
    read_from(file, opts)
}

pub fn read_from<R: std::io::Read>(reader: R, opts: &IngestOptions) -> Result<Dataset, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| fail(Some(1), e.to_string()))?.clone();
    let column = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            fail(
                Some(1),
                format!("no column `{name}` (columns: {})", headers.iter().collect::<Vec<_>>().join(", ")),
            )
        })
    };
    let group_col = column(opts.group)?;
    let response_cols = opts.responses.iter().map(|r| column(r)).collect::<Result<Vec<_>, _>>()?;

    // rows in file order: (group label, responses)
    let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
    let mut dropped = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| fail(e.position().map(|p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let label = record.get(group_col).unwrap_or("").to_string();
        if is_missing(&label) {
            if opts.drop_missing {
                dropped.push(line);
                continue;
            }
            return Err(fail(Some(line), format!("missing group in column `{}`", opts.group)));
        }
        let mut values = Vec::with_capacity(response_cols.len());
        let mut missing = false;
        for (&c, name) in response_cols.iter().zip(opts.responses) {
            let field = record.get(c).unwrap_or("");
            if is_missing(field) {
                if !opts.drop_missing {
                    return Err(fail(
                        Some(line),
                        format!("missing value in column `{name}` (use --drop-missing to skip such rows)"),
                    ));
                }
                missing = true;
                continue;
            }
            let v: f64 = field
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| fail(Some(line), format!("cannot parse `{field}` in column `{name}` as a number")))?;
            values.push(v);
        }
        if missing {
            dropped.push(line);
        } else {
            rows.push((label, values));
        }
    }
    if rows.is_empty() {
        return Err(fail(None, "no data rows"));
    }

    let order = group_order(rows.iter().map(|(g, _)| g.as_str()), opts.control)?;
    let index: HashMap<&str, usize> = order.iter().enumerate().map(|(i, g)| (g.as_str(), i)).collect();
    let mut samples = Vec::with_capacity(response_cols.len());
    for r in 0..response_cols.len() {
        let mut groups: Vec<Group> = order
            .iter()
            .map(|g| {
                let group = Group::new(g.clone(), Vec::new());
                match g.parse::<f64>() {
                    Ok(d) => group.with_dose(d),
                    Err(_) => group,
                }
            })
            .collect();
        for (g, values) in &rows {
            groups[index[g.as_str()]].responses.push(values[r]);
        }
        samples.push(GroupedSample::new(groups).map_err(|e| fail(None, format!("{}: {e}", opts.responses[r])))?);
    }
    Ok(Dataset {
        responses: opts.responses.to_vec(),
        samples,
        dropped_rows: dropped,
    })
}

/// Control first, then ascending dose when every label is numeric, otherwise order of
/// first appearance.
fn group_order<'a>(labels: impl Iterator<Item = &'a str>, control: Option<&str>) -> Result<Vec<String>, IngestError> {
    let mut seen: Vec<String> = Vec::new();
    for l in labels {
        if !seen.iter().any(|s| s == l) {
            seen.push(l.to_string());
        }
    }
    let doses: Option<Vec<f64>> = seen.iter().map(|s| s.parse::<f64>().ok()).collect();
    if let Some(d) = doses {
        let mut idx: Vec<usize> = (0..seen.len()).collect();
        idx.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
        seen = idx.into_iter().map(|i| seen[i].clone()).collect();
    }
    if let Some(c) = control {
        let pos = seen.iter().position(|s| s == c).ok_or_else(|| {
            fail(None, format!("control group `{c}` not found (groups: {})", seen.join(", ")))
        })?;
        let c = seen.remove(pos);
        seen.insert(0, c);
    }
    Ok(seen)
}
