//! Flat text format for fitted manifolds.
//!
//! ```text
//! # mshap-manifold v1
//! # kind=mass
//! # epsilon=0.00153
//! # alpha=0.99
//! # bandwidth=0.21;0.19
//! x1,x2
//! 0.12,-0.4
//! ...
//! ```
//!
//! `kind` is `density`, `mass` or `ood`. Density kinds store KDE reference
//! points with `bandwidth`; `ood` stores z-scored training points plus a
//! trailing `label` column (1 = in) and `k`, `center`, `scale` parameters.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use super::{DensityManifold, KdeEstimator, Manifold, MassManifold, OodClassifier};
use crate::error::{Error, Result};

const MAGIC: &str = "mshap-manifold v1";

pub enum ManifoldFile {
    Density { kde: KdeEstimator, epsilon: f64 },
    Mass { kde: KdeEstimator, epsilon: f64, alpha: f64 },
    Ood(OodClassifier),
}

impl ManifoldFile {
    pub fn kind(&self) -> &'static str {
        match self {
            ManifoldFile::Density { .. } => "density",
            ManifoldFile::Mass { .. } => "mass",
            ManifoldFile::Ood(_) => "ood",
        }
    }

    pub fn into_manifold(self) -> Result<Arc<dyn Manifold>> {
        Ok(match self {
            ManifoldFile::Density { kde, epsilon } => Arc::new(DensityManifold::new(Arc::new(kde), epsilon)?),
            ManifoldFile::Mass { kde, epsilon, alpha } => {
                Arc::new(MassManifold::from_parts(Arc::new(kde), epsilon, alpha)?)
            }
            ManifoldFile::Ood(c) => Arc::new(c),
        })
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

pub fn write_manifold_file(path: impl AsRef<Path>, file: &ManifoldFile, feature_names: &[String]) -> Result<()> {
    let path = path.as_ref();
    let mut out = format!("# {MAGIC}\n# kind={}\n", file.kind());
    let mut header = feature_names.to_vec();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    match file {
        ManifoldFile::Density { kde, epsilon } | ManifoldFile::Mass { kde, epsilon, .. } => {
            out += &format!("# epsilon={epsilon}\n");
            if let ManifoldFile::Mass { alpha, .. } = file {
                out += &format!("# alpha={alpha}\n");
            }
            out += &format!("# bandwidth={}\n", join(kde.bandwidth()));
            rows.extend(kde.reference_points().chunks_exact(kde.dim()).map(<[f64]>::to_vec));
        }
        ManifoldFile::Ood(c) => {
            out += &format!("# k={}\n# center={}\n# scale={}\n", c.k(), join(c.center()), join(c.scale()));
            header.push("label".into());
            for (p, label) in c.training() {
                let mut r = p.to_vec();
                r.push(if label { 1.0 } else { 0.0 });
                rows.push(r);
            }
        }
    }
    out += &header.join(",");
    out.push('\n');
    for r in rows {
        out += &r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(';')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad number {t:?} in manifold file"))))
        .collect()
}

pub fn read_manifold_file(path: impl AsRef<Path>) -> Result<(ManifoldFile, Vec<String>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut params = BTreeMap::new();
    let mut lines = text.lines().peekable();
    let first = lines.next().unwrap_or_default();
    if first.trim_start_matches('#').trim() != MAGIC {
        return Err(Error::Config(format!("{} is not a manifold file", path.display())));
    }
    while let Some(line) = lines.peek() {
        let Some(rest) = line.strip_prefix('#') else { break };
        if let Some((k, v)) = rest.trim().split_once('=') {
            params.insert(k.trim().to_string(), v.trim().to_string());
        }
        lines.next();
    }
    let get = |k: &str| params.get(k).ok_or_else(|| Error::Config(format!("manifold file lacks {k:?}")));
    let num = |k: &str| -> Result<f64> {
        get(k)?.parse().map_err(|_| Error::Config(format!("bad value for {k:?}")))
    };
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Config("manifold file has no header row".into()))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut values = Vec::new();
    for (r, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != header.len() {
            return Err(Error::Parse {
                row: r + 1,
                column: String::new(),
                message: format!("expected {} fields, found {}", header.len(), cells.len()),
            });
        }
        for (c, cell) in cells.iter().enumerate() {
            values.push(cell.trim().parse::<f64>().map_err(|_| Error::Parse {
                row: r + 1,
                column: header[c].clone(),
                message: format!("cannot parse {cell:?}"),
            })?);
        }
    }
    let kind = get("kind")?.clone();
    match kind.as_str() {
        "density" | "mass" => {
            let d = header.len();
            let bandwidth = parse_list(get("bandwidth")?)?;
            if bandwidth.len() != d || values.is_empty() {
                return Err(Error::Config("manifold file bandwidth does not match columns".into()));
            }
            let kde = KdeEstimator::from_parts(values, d, bandwidth);
            let epsilon = num("epsilon")?;
            let file = if kind == "mass" {
                ManifoldFile::Mass { kde, epsilon, alpha: num("alpha")? }
            } else {
                ManifoldFile::Density { kde, epsilon }
            };
            Ok((file, header))
        }
        "ood" => {
            let width = header.len();
            let d = width - 1;
            let mut points = Vec::with_capacity(values.len());
            let mut labels = Vec::new();
            for row in values.chunks_exact(width) {
                points.extend_from_slice(&row[..d]);
                labels.push(row[d] > 0.5);
            }
            let k = num("k")? as usize;
            let clf = OodClassifier::from_parts(points, labels, parse_list(get("center")?)?, parse_list(get("scale")?)?, k)?;
            Ok((ManifoldFile::Ood(clf), header[..d].to_vec()))
        }
        other => Err(Error::Config(format!("unknown manifold kind {other:?}"))),
    }
}
