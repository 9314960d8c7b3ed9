//! The `sim` subcommand: size/power grid from a TOML file plus flag overrides.

use crate::report::Format;
use robust_mct::sim::{self, GridConfig, Procedure, RowBlock, SimResult};
use serde::Deserialize;
use std::path::Path;

/// Contents of a `--config` file. Every key is optional.
///
/// ```toml
/// runs = 10000
/// seed = 20190417
/// alpha = 0.05
/// effect = 1.2359619140625   # H1 shift in SDs
/// procedures = ["dun", "sat"]
/// rows = ["h0-normal"]
/// threads = 4
/// ```
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimFile {
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub alpha: Option<f64>,
    pub effect: Option<f64>,
    pub procedures: Option<Vec<String>>,
    pub rows: Option<Vec<String>>,
    pub threads: Option<usize>,
}

pub struct Overrides {
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub alpha: Option<f64>,
    pub procedures: Option<Vec<Procedure>>,
    pub rows: Option<Vec<RowBlock>>,
}

pub fn load(path: Option<&Path>) -> Result<SimFile, String> {
    let Some(path) = path else {
        return Ok(SimFile::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Flags override the file, the file overrides the defaults. `ROBUST_MCT_THREADS` caps the
/// worker count when neither sets it.
pub fn grid_config(file: SimFile, flags: Overrides) -> Result<GridConfig, String> {
    let mut cfg = GridConfig::default();
    if let Some(p) = flags.procedures {
        cfg.procedures = p;
    } else if let Some(p) = file.procedures {
        cfg.procedures = p.iter().map(|s| s.parse().map_err(|e| format!("{e}"))).collect::<Result<_, _>>()?;
    }
    if let Some(r) = flags.rows {
        cfg.rows = r;
    } else if let Some(r) = file.rows {
        cfg.rows = r.iter().map(|s| s.parse().map_err(|e| format!("{e}"))).collect::<Result<_, _>>()?;
    }
    cfg.runs = flags.runs.or(file.runs).unwrap_or(cfg.runs);
    cfg.seed = flags.seed.or(file.seed).unwrap_or(cfg.seed);
    cfg.alpha = flags.alpha.or(file.alpha).unwrap_or(cfg.alpha);
    cfg.effect = file.effect.unwrap_or(cfg.effect);
    cfg.threads = file.threads.or_else(sim::threads_from_env);
    if cfg.procedures.is_empty() {
        return Err("no procedures selected".into());
    }
    Ok(cfg)
}

pub fn render(results: &[SimResult], format: Format) -> String {
    match format {
        Format::Human => sim::format_table(results),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(sim::CSV_HEADER).expect("in-memory write");
            for r in results {
                for rec in sim::csv_records(r) {
                    w.write_record(&rec).expect("in-memory write");
                }
            }
            String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
        }
        Format::Json => serde_json::to_string_pretty(results).expect("serializable") + "\n",
    }
}
