//! Result rows and the results CSV.

use std::path::Path;

use crate::error::{config, data, Result};
use crate::io;

pub const CSV_HEADER: &str = "experiment,seed,method,metric,value,config_hash";

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub seed: u64,
    pub method: String,
    pub metric: String,
    pub value: f64,
    pub config_hash: String,
}

impl ResultRow {
    pub fn new(experiment: &str, seed: u64, method: &str, metric: &str, value: f64, config_hash: &str) -> Result<Self> {
        for field in [experiment, method, metric, config_hash] {
            if field.is_empty() || field.contains([',', '"', '\n', '\r']) {
                return data(format!("result field `{field}` is empty or not CSV-safe"));
            }
        }
        if !value.is_finite() {
            return Err(crate::Error::Numeric(format!("{method}/{metric} is {value}")));
        }
        Ok(Self {
            experiment: experiment.into(),
            seed,
            method: method.into(),
            metric: metric.into(),
            value,
            config_hash: config_hash.into(),
        })
    }
}

/// Rows as CSV text, header first. Values use the shortest exact decimal.
pub fn to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{},{},{},{},{},{}\n", r.experiment, r.seed, r.method, r.metric, r.value, r.config_hash));
    }
    out
}

pub fn from_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = io::Lines::new(text);
    let (hno, header) = lines.next_line("the CSV header")?;
    if header.trim_end() != CSV_HEADER {
        return io::parse_err(hno, format!("expected header `{CSV_HEADER}`"));
    }
    let mut rows = Vec::new();
    while let Some((no, line)) = lines.next_content() {
        let f = io::split_row(no, line, 6)?;
        let seed = f[1].parse().or_else(|_| io::parse_err(no, format!("invalid seed `{}`", f[1])))?;
        let value: f64 = f[4].parse().or_else(|_| io::parse_err(no, format!("invalid value `{}`", f[4])))?;
        rows.push(ResultRow::new(f[0], seed, f[2], f[3], value, f[5]).or_else(|e| io::parse_err(no, e.to_string()))?);
    }
    Ok(rows)
}

/// Merge `rows` into the CSV at `path` and write it atomically.
///
/// Existing rows must carry `config_hash`, otherwise the merge is refused.
/// Rows for (experiment, seed) pairs present in `rows` are replaced; the
/// result is ordered by experiment and seed, keeping row order within a seed.
pub fn merge_into(path: &Path, rows: &[ResultRow], config_hash: &str) -> Result<Vec<ResultRow>> {
    if let Some(r) = rows.iter().find(|r| r.config_hash != config_hash) {
        return config(format!("row hash {} differs from config hash {config_hash}", r.config_hash));
    }
    let mut merged = match std::fs::read_to_string(path) {
        Ok(text) => from_csv(&text)?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    if let Some(r) = merged.iter().find(|r| r.config_hash != config_hash) {
        return config(format!(
            "{} holds results for config {}, refusing to append results for config {config_hash}",
            path.display(),
            r.config_hash
        ));
    }
    merged.retain(|old| !rows.iter().any(|r| r.experiment == old.experiment && r.seed == old.seed));
    merged.extend_from_slice(rows);
    merged.sort_by(|a, b| a.experiment.cmp(&b.experiment).then(a.seed.cmp(&b.seed)));
    io::write_atomic(path, to_csv(&merged).as_bytes())?;
    Ok(merged)
}
