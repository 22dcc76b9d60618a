//! On-disk formats: the canonical experiment document, CSV exports and
//! map weight documents. The layout is described in `docs/report-format.md`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SomError};
use crate::experiment::ExperimentResult;
use crate::network::MapId;
use crate::som::{DimGroup, FeatureMap, StabilityVerdict};

pub const SCHEMA_VERSION: &str = "cortexsom.experiment/v1";
pub const MAP_SCHEMA_VERSION: &str = "cortexsom.map/v1";

pub const REPORT_FILE: &str = "experiment.json";
pub const RUNS_FILE: &str = "runs.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const CASES_FILE: &str = "cases.csv";

pub fn to_json(result: &ExperimentResult) -> Result<String> {
    let mut s = serde_json::to_string_pretty(result)?;
    s.push('\n');
    Ok(s)
}

pub fn from_json(text: &str) -> Result<ExperimentResult> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    match value.get("schema").and_then(|v| v.as_str()) {
        Some(SCHEMA_VERSION) => Ok(serde_json::from_value(value)?),
        Some(other) => Err(SomError::Config(format!(
            "unsupported report schema {other:?} (expected {SCHEMA_VERSION:?})"
        ))),
        None => Err(SomError::Config("report has no schema field".into())),
    }
}

pub fn read_report(path: &Path) -> Result<ExperimentResult> {
    let text = fs::read_to_string(path).map_err(|e| SomError::io(path, e))?;
    from_json(&text)
}

fn stability_label(s: Option<StabilityVerdict>) -> &'static str {
    match s {
        Some(StabilityVerdict::Stable) => "stable",
        Some(StabilityVerdict::Unstable) => "unstable",
        None => "",
    }
}

/// One row per (group, seed); per-map columns are empty for maps the run
/// did not develop.
pub fn runs_csv(result: &ExperimentResult) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["group".to_string(), "seed".to_string()];
    for id in MapId::ALL {
        let m = id.name().to_ascii_lowercase();
        for col in ["category", "encoders", "clusters", "isolated", "overlapped", "dominant_fraction", "stability"] {
            header.push(format!("{m}_{col}"));
        }
    }
    header.extend(["front_symptom", "front_symptom_extrapolated", "aborted_at"].map(String::from));
    w.write_record(&header)?;
    for run in &result.runs {
        let mut row = vec![run.group.clone(), run.seed.to_string()];
        for id in MapId::ALL {
            match run.get(id) {
                Some(m) => {
                    let r = &m.report;
                    row.extend([
                        r.category.tag.to_string(),
                        r.encoder_count().to_string(),
                        r.clusters.len().to_string(),
                        r.isolated_count().to_string(),
                        r.overlap.overlapped_neurons.to_string(),
                        r.dominant_fraction.to_string(),
                        stability_label(r.stability).to_string(),
                    ]);
                }
                None => row.extend(std::iter::repeat_n(String::new(), 7)),
            }
        }
        let symptom = run.get(MapId::Front).and_then(|m| m.report.symptom);
        row.push(symptom.map(|s| s.symptom.to_string()).unwrap_or_default());
        row.push(symptom.map(|s| s.extrapolated.to_string()).unwrap_or_default());
        row.push(run.aborted.as_ref().map(|a| a.stage.name().to_string()).unwrap_or_default());
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| SomError::Config(e.to_string()))
}

/// Category histogram rows per group and map.
pub fn summary_csv(result: &ExperimentResult) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "group",
        "map",
        "category",
        "count",
        "proportion",
        "modal",
        "mean_encoders",
        "stable_fraction",
    ])?;
    for g in &result.groups {
        for m in &g.maps {
            for (label, count) in &m.histogram {
                w.write_record([
                    g.label.clone(),
                    m.map.name().to_string(),
                    label.clone(),
                    count.to_string(),
                    m.proportions[label].to_string(),
                    (*label == m.modal).to_string(),
                    m.mean_encoders.to_string(),
                    m.stable_fraction.to_string(),
                ])?;
            }
        }
    }
    w.into_inner().map_err(|e| SomError::Config(e.to_string()))
}

/// Modal categories per case and combination.
pub fn cases_csv(result: &ExperimentResult) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["case", "combo", "label", "prim1", "prim2", "assoc", "front", "front_symptom"])?;
    for t in &result.case_tables {
        for r in &t.rows {
            w.write_record([
                t.case.to_string(),
                r.combo.to_string(),
                r.label.clone(),
                r.prim1.clone(),
                r.prim2.clone(),
                r.assoc.clone(),
                r.front.clone(),
                r.front_symptom.map(|s| s.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    w.into_inner().map_err(|e| SomError::Config(e.to_string()))
}

fn write(path: PathBuf, bytes: &[u8], written: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, bytes).map_err(|e| SomError::io(&path, e))?;
    written.push(path);
    Ok(())
}

/// Write the canonical document and the CSV exports into `dir`.
pub fn emit_report(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| SomError::io(dir, e))?;
    let mut written = Vec::new();
    write(dir.join(REPORT_FILE), to_json(result)?.as_bytes(), &mut written)?;
    write(dir.join(RUNS_FILE), &runs_csv(result)?, &mut written)?;
    write(dir.join(SUMMARY_FILE), &summary_csv(result)?, &mut written)?;
    if !result.case_tables.is_empty() {
        write(dir.join(CASES_FILE), &cases_csv(result)?, &mut written)?;
    }
    Ok(written)
}

/// Self-describing weight dump of one trained map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapDocument {
    pub schema: String,
    pub width: usize,
    pub height: usize,
    pub input_dim: usize,
    pub dim_groups: Vec<DimGroup>,
    /// Neuron-major, row-major neuron order.
    pub weights: Vec<f64>,
    pub seed: u64,
    pub config_hash: String,
}

impl MapDocument {
    pub fn new(map: &FeatureMap, seed: u64, config_hash: &str) -> Self {
        MapDocument {
            schema: MAP_SCHEMA_VERSION.to_string(),
            width: map.width(),
            height: map.height(),
            input_dim: map.input_dim(),
            dim_groups: map.dim_groups().to_vec(),
            weights: map.weights().to_vec(),
            seed,
            config_hash: config_hash.to_string(),
        }
    }

    pub fn to_map(&self) -> Result<FeatureMap> {
        if self.schema != MAP_SCHEMA_VERSION {
            return Err(SomError::Config(format!("unsupported map schema {:?}", self.schema)));
        }
        FeatureMap::from_weights(
            self.width,
            self.height,
            self.input_dim,
            self.weights.clone(),
            self.dim_groups.clone(),
        )
    }
}

pub fn write_map_document(path: &Path, map: &FeatureMap, seed: u64, config_hash: &str) -> Result<()> {
    let bytes = serde_json::to_vec_pretty(&MapDocument::new(map, seed, config_hash))?;
    fs::write(path, bytes).map_err(|e| SomError::io(path, e))
}

pub fn read_map_document(path: &Path) -> Result<MapDocument> {
    let text = fs::read_to_string(path).map_err(|e| SomError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
