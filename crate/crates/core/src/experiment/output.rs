use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ScanResult, Series};
use crate::error::{Error, Result};

const COLUMNS: [&str; 7] = [
    "delay_s",
    "expected_local",
    "expected_global",
    "counts_local",
    "counts_global",
    "err_local",
    "err_global",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub visibility: f64,
    pub visibility_error: f64,
    pub normalized: f64,
    pub normalized_error: f64,
    pub expected_normalized: f64,
    pub model_normalized: f64,
    pub ideal: Option<f64>,
    pub baseline: f64,
    pub center_s: f64,
    pub width_s: f64,
    pub flat: bool,
}

impl SeriesSummary {
    fn new(s: &Series) -> Self {
        Self {
            visibility: s.fit.visibility,
            visibility_error: s.visibility_error,
            normalized: s.normalized.sampled,
            normalized_error: s.normalized.sampled_error,
            expected_normalized: s.normalized.expected,
            model_normalized: s.normalized.model,
            ideal: s.ideal,
            baseline: s.fit.baseline,
            center_s: s.fit.center,
            width_s: s.fit.width,
            flat: s.fit.flat,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetSummary {
    pub name: String,
    pub bins: Vec<usize>,
    pub local: SeriesSummary,
    pub global: SeriesSummary,
}

/// Fitted and normalized visibilities of a scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub seed: u64,
    pub source_visibility: f64,
    pub klyshko_budget: f64,
    pub reference: SeriesSummary,
    pub subsets: Vec<SubsetSummary>,
    pub warnings: Vec<String>,
}

impl Summary {
    pub fn from_result(r: &ScanResult) -> Self {
        Self {
            scenario: r.scenario.clone(),
            seed: r.seed,
            source_visibility: r.source_visibility,
            klyshko_budget: r.klyshko_budget,
            reference: SeriesSummary::new(&r.reference),
            subsets: r
                .subsets
                .iter()
                .map(|s| SubsetSummary {
                    name: s.name.clone(),
                    bins: s.bins.clone(),
                    local: SeriesSummary::new(&s.local),
                    global: SeriesSummary::new(&s.global),
                })
                .collect(),
            warnings: r.warnings.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

fn record(delay: f64, local: &Series, global: &Series, k: usize) -> [String; 7] {
    [
        delay.to_string(),
        local.expected_counts[k].to_string(),
        global.expected_counts[k].to_string(),
        local.counts[k].to_string(),
        global.counts[k].to_string(),
        local.errors[k].to_string(),
        global.errors[k].to_string(),
    ]
}

/// One CSV table for a pair of local and global traces.
pub fn write_series_csv<W: Write>(
    delays: &[f64],
    local: &Series,
    global: &Series,
    out: W,
) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(COLUMNS)?;
    for (k, d) in delays.iter().enumerate() {
        wr.write_record(record(*d, local, global, k))?;
    }
    wr.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// All traces in one table with a leading `subset` column; the reference appears
/// as `reference`.
pub fn write_combined_csv<W: Write>(r: &ScanResult, out: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    let mut header = vec!["subset"];
    header.extend(COLUMNS);
    wr.write_record(&header)?;
    let traces = std::iter::once(("reference", &r.reference, &r.reference)).chain(
        r.subsets
            .iter()
            .map(|s| (s.name.as_str(), &s.local, &s.global)),
    );
    for (name, local, global) in traces {
        for (k, d) in r.delays.iter().enumerate() {
            let rec = record(*d, local, global, k);
            wr.write_record(std::iter::once(name).chain(rec.iter().map(String::as_str)))?;
        }
    }
    wr.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Writes `reference.csv`, one `<subset>.csv` per subset and `summary.json` into
/// `dir`, creating it if needed. Returns the written paths.
pub fn write_outputs(r: &ScanResult, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let create = |name: &str| -> Result<(PathBuf, std::fs::File)> {
        let path = dir.join(name);
        let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok((path, file))
    };
    let (path, file) = create("reference.csv")?;
    write_series_csv(&r.delays, &r.reference, &r.reference, file)?;
    written.push(path);
    for s in &r.subsets {
        let (path, file) = create(&format!("{}.csv", s.name))?;
        write_series_csv(&r.delays, &s.local, &s.global, file)?;
        written.push(path);
    }
    let (path, mut file) = create("summary.json")?;
    file.write_all(r.summary().to_json()?.as_bytes())
        .map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}
