use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::attribution::Attribution;
use crate::error::{Error, Result};

/// Label used for the ground-truth interventional attributions.
pub const GROUND_TRUTH: &str = "is-gt";

/// Why a point has no attribution for a method.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Skip {
    /// The explained point lies outside the manifold.
    OutsideManifold,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    /// Sweep setting, e.g. `delta=5`.
    pub setting: String,
    pub point: usize,
    pub method: String,
    pub outcome: std::result::Result<Attribution, Skip>,
}

impl PointRecord {
    pub fn attribution(&self) -> Option<&Attribution> {
        self.outcome.as_ref().ok()
    }

    /// Top feature index, or `None` for skipped or all-zero attributions.
    pub fn top(&self) -> Option<usize> {
        let a = self.attribution()?;
        if a.phi.iter().all(|v| *v == 0.0) {
            None
        } else {
            Some(a.top_feature())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub setting: String,
    pub method: String,
    /// Feature name, or `none` for points without a top feature.
    pub feature: String,
    pub top_pct: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub setting: String,
    pub point: usize,
    pub method: String,
    pub feature: String,
    /// `φ̂ᵢ − φᵢ` after L1 normalisation of both.
    pub error: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub n: usize,
}

impl Quartiles {
    pub fn of(values: &[f64]) -> Option<Quartiles> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let h = p * (v.len() - 1) as f64;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        };
        Some(Quartiles {
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            n: v.len(),
        })
    }

    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub feature_names: Vec<String>,
    /// Settings in run order.
    pub settings: Vec<String>,
    pub records: Vec<PointRecord>,
    pub summary: Vec<SummaryRow>,
    pub errors: Vec<ErrorRow>,
    /// Wall-clock seconds; not written to disk.
    pub runtime_secs: f64,
}

impl ExperimentResult {
    pub(crate) fn assemble(
        config: ExperimentConfig,
        feature_names: Vec<String>,
        settings: Vec<String>,
        records: Vec<PointRecord>,
        runtime_secs: f64,
    ) -> Self {
        let mut r = ExperimentResult {
            config,
            feature_names,
            settings,
            records,
            summary: Vec::new(),
            errors: Vec::new(),
            runtime_secs,
        };
        r.summary = r.build_summary();
        r.errors = r.build_errors();
        r
    }

    pub fn methods(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for rec in &self.records {
            if !out.contains(&rec.method) {
                out.push(rec.method.clone());
            }
        }
        out
    }

    pub fn records_for<'a>(&'a self, setting: &'a str, method: &'a str) -> impl Iterator<Item = &'a PointRecord> + 'a {
        self.records.iter().filter(move |r| r.setting == setting && r.method == method)
    }

    /// Percentage of points whose top feature is `feature`.
    pub fn top_pct(&self, setting: &str, method: &str, feature: usize) -> f64 {
        let name = &self.feature_names[feature];
        self.summary
            .iter()
            .find(|r| r.setting == setting && r.method == method && &r.feature == name)
            .map_or(0.0, |r| r.top_pct)
    }

    /// Raw `φᵢ` over the points where the method produced an attribution.
    pub fn phi_values(&self, setting: &str, method: &str, feature: usize) -> Vec<f64> {
        self.records_for(setting, method)
            .filter_map(|r| r.attribution().map(|a| a.phi[feature]))
            .collect()
    }

    pub fn phi_quartiles(&self, setting: &str, method: &str, feature: usize) -> Option<Quartiles> {
        Quartiles::of(&self.phi_values(setting, method, feature))
    }

    pub fn n_skipped(&self, setting: &str, method: &str) -> usize {
        self.records_for(setting, method).filter(|r| r.outcome.is_err()).count()
    }

    fn build_summary(&self) -> Vec<SummaryRow> {
        let mut rows = Vec::new();
        let methods = self.methods();
        for setting in &self.settings {
            for method in &methods {
                let recs: Vec<&PointRecord> = self.records_for(setting, method).collect();
                if recs.is_empty() {
                    continue;
                }
                let n = recs.len() as f64;
                let mut counts = vec![0usize; self.feature_names.len() + 1];
                for r in &recs {
                    match r.top() {
                        Some(i) => counts[i] += 1,
                        None => counts[self.feature_names.len()] += 1,
                    }
                }
                for (i, c) in counts.iter().enumerate() {
                    let feature = self.feature_names.get(i).cloned().unwrap_or_else(|| "none".into());
                    rows.push(SummaryRow {
                        setting: setting.clone(),
                        method: method.clone(),
                        feature,
                        top_pct: 100.0 * *c as f64 / n,
                    });
                }
            }
        }
        rows
    }

    fn build_errors(&self) -> Vec<ErrorRow> {
        let mut rows = Vec::new();
        for setting in &self.settings {
            let truth: Vec<&PointRecord> = self.records_for(setting, GROUND_TRUTH).collect();
            for rec in self.records.iter().filter(|r| &r.setting == setting && r.method != GROUND_TRUTH) {
                let Some(gt) = truth.iter().find(|t| t.point == rec.point).and_then(|t| t.attribution()) else {
                    continue;
                };
                let Some(a) = rec.attribution() else { continue };
                let (a, gt) = (a.normalize_l1(), gt.normalize_l1());
                if a.degenerate || gt.degenerate {
                    continue;
                }
                for (i, name) in self.feature_names.iter().enumerate().take(a.phi.len()) {
                    rows.push(ErrorRow {
                        setting: setting.clone(),
                        point: rec.point,
                        method: rec.method.clone(),
                        feature: name.clone(),
                        error: a.phi[i] - gt.phi[i],
                    });
                }
            }
        }
        rows
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))
}

/// Write `summary.csv`, `attributions.csv`, `errors.csv` and `config.json`
/// into `dir`, creating it if needed.
///
/// | file               | columns                                                   |
/// |--------------------|-----------------------------------------------------------|
/// | `summary.csv`      | setting, method, feature, top_pct                         |
/// | `attributions.csv` | setting, point, method, feature, phi, phi_normalized      |
/// | `errors.csv`       | setting, point, method, feature, error                    |
pub fn write_results(result: &ExperimentResult, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let path = dir.join("summary.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["setting", "method", "feature", "top_pct"]).map_err(|e| Error::csv(&path, e))?;
    for r in &result.summary {
        w.write_record([&r.setting, &r.method, &r.feature, &format!("{:.4}", r.top_pct)])
            .map_err(|e| Error::csv(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("attributions.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["setting", "point", "method", "feature", "phi", "phi_normalized"])
        .map_err(|e| Error::csv(&path, e))?;
    for rec in &result.records {
        let Some(a) = rec.attribution() else { continue };
        let norm = a.normalize_l1();
        for (i, name) in result.feature_names.iter().enumerate().take(a.phi.len()) {
            w.write_record([
                rec.setting.as_str(),
                &rec.point.to_string(),
                &rec.method,
                name,
                &a.phi[i].to_string(),
                &norm.phi[i].to_string(),
            ])
            .map_err(|e| Error::csv(&path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("errors.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["setting", "point", "method", "feature", "error"]).map_err(|e| Error::csv(&path, e))?;
    for r in &result.errors {
        w.write_record([r.setting.as_str(), &r.point.to_string(), &r.method, &r.feature, &r.error.to_string()])
            .map_err(|e| Error::csv(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("config.json");
    let mut text = serde_json::to_string_pretty(&result.config)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(())
}
