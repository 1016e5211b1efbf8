use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major `n × d` feature matrix with column names and an optional target.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    values: Vec<f64>,
    n: usize,
    d: usize,
    feature_names: Vec<String>,
    target: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<f64>>, feature_names: Vec<String>) -> Result<Self> {
        let d = feature_names.len();
        if d == 0 {
            return Err(Error::Domain("dataset needs at least one feature".into()));
        }
        if rows.is_empty() {
            return Err(Error::Domain("dataset needs at least one row".into()));
        }
        let mut values = Vec::with_capacity(rows.len() * d);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Parse {
                    row: r + 1,
                    column: String::new(),
                    message: format!("expected {d} values, found {}", row.len()),
                });
            }
            values.extend_from_slice(row);
        }
        Self::from_flat(values, d, feature_names)
    }

    pub fn from_flat(values: Vec<f64>, d: usize, feature_names: Vec<String>) -> Result<Self> {
        if d == 0 || feature_names.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: feature_names.len(),
            });
        }
        if values.is_empty() || values.len() % d != 0 {
            return Err(Error::Domain(format!(
                "flat buffer of length {} is not a positive multiple of d = {d}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parse {
                row: pos / d + 1,
                column: feature_names[pos % d].clone(),
                message: "non-finite value".into(),
            });
        }
        let mut seen = HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Domain(format!("duplicate feature name {name:?}")));
            }
        }
        Ok(Dataset {
            n: values.len() / d,
            d,
            values,
            feature_names,
            target: None,
        })
    }

    /// Columns named `x1..xd`.
    pub fn unnamed(values: Vec<f64>, d: usize) -> Result<Self> {
        Self::from_flat(values, d, default_names(d))
    }

    pub fn with_target(mut self, target: Vec<f64>) -> Result<Self> {
        if target.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: target.len(),
            });
        }
        self.target = Some(target);
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.values.chunks_exact(self.d)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn target(&self) -> Option<&[f64]> {
        self.target.as_deref()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.d];
        for r in self.rows() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= self.n as f64);
        mean
    }

    /// Sample standard deviations (n − 1 denominator; 0 for a single row).
    pub fn column_stds(&self) -> Vec<f64> {
        let mean = self.column_means();
        let mut var = vec![0.0; self.d];
        for r in self.rows() {
            for j in 0..self.d {
                let e = r[j] - mean[j];
                var[j] += e * e;
            }
        }
        let denom = (self.n.max(2) - 1) as f64;
        var.iter().map(|v| (v / denom).sqrt()).collect()
    }

    pub fn column_medians(&self) -> Vec<f64> {
        (0..self.d)
            .map(|j| {
                let mut col = self.column(j);
                col.sort_by(f64::total_cmp);
                let n = col.len();
                if n % 2 == 1 {
                    col[n / 2]
                } else {
                    0.5 * (col[n / 2 - 1] + col[n / 2])
                }
            })
            .collect()
    }

    /// Sample covariance matrix, row-major `d × d`.
    pub fn covariance(&self) -> Vec<f64> {
        let mean = self.column_means();
        let d = self.d;
        let mut cov = vec![0.0; d * d];
        for r in self.rows() {
            for a in 0..d {
                let ea = r[a] - mean[a];
                for b in a..d {
                    cov[a * d + b] += ea * (r[b] - mean[b]);
                }
            }
        }
        let denom = (self.n.max(2) - 1) as f64;
        for a in 0..d {
            for b in a..d {
                cov[a * d + b] /= denom;
                cov[b * d + a] = cov[a * d + b];
            }
        }
        cov
    }

    /// Rows at the given indices, keeping names and target.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut values = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Dataset {
            n: indices.len(),
            d: self.d,
            values,
            feature_names: self.feature_names.clone(),
            target: self
                .target
                .as_ref()
                .map(|t| indices.iter().map(|&i| t[i]).collect()),
        }
    }
}

pub fn default_names(d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("x{i}")).collect()
}

/// Read a header-first, comma-separated numeric CSV. With `has_target`, the
/// last column becomes the target.
pub fn load_dataset_csv(path: impl AsRef<Path>, has_target: bool) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::csv(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let width = header.len();
    if width == 0 || (has_target && width < 2) {
        return Err(Error::Parse {
            row: 0,
            column: String::new(),
            message: "header has too few columns".into(),
        });
    }
    let mut values = Vec::new();
    let mut target = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row_no = r + 1;
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { len, .. } => Error::Parse {
                row: row_no,
                column: String::new(),
                message: format!("expected {width} fields, found {len}"),
            },
            _ => Error::csv(path, e),
        })?;
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: row_no,
                column: header[c].clone(),
                message: format!("cannot parse {cell:?} as a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: row_no,
                    column: header[c].clone(),
                    message: format!("non-finite value {cell:?}"),
                });
            }
            if has_target && c == width - 1 {
                target.push(v);
            } else {
                values.push(v);
            }
        }
    }
    let d = if has_target { width - 1 } else { width };
    let names = header[..d].to_vec();
    let data = Dataset::from_flat(values, d, names)?;
    if has_target {
        data.with_target(target)
    } else {
        Ok(data)
    }
}

/// Write a dataset in the format [`load_dataset_csv`] reads.
pub fn write_dataset_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut header = data.feature_names().to_vec();
    if data.target().is_some() {
        header.push("target".into());
    }
    w.write_record(&header).map_err(|e| Error::csv(path, e))?;
    for (i, row) in data.rows().enumerate() {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        if let Some(t) = data.target() {
            rec.push(t[i].to_string());
        }
        w.write_record(&rec).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_small_file() {
        let f = write_tmp("a,b\n1,2\n3,4\n");
        let d = load_dataset_csv(f.path(), false).unwrap();
        assert_eq!((d.n_rows(), d.dim()), (2, 2));
        assert_eq!(d.row(1), &[3.0, 4.0]);
        assert_eq!(d.feature_names(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn nan_cell_is_rejected() {
        let f = write_tmp("a,b\n1,NaN\n");
        let err = load_dataset_csv(f.path(), false).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 1, ref column, .. } if column == "b"), "{err}");
    }

    #[test]
    fn garbage_cell_names_row_and_column() {
        let f = write_tmp("a,b\n1,2\n3,x\n");
        let err = load_dataset_csv(f.path(), false).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 2, ref column, .. } if column == "b"));
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let f = write_tmp("a,b\n1,2\n3\n");
        let err = load_dataset_csv(f.path(), false).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 2, .. }), "{err}");
    }

    #[test]
    fn target_column() {
        let f = write_tmp("a,b,y\n1,2,0\n3,4,1\n");
        let d = load_dataset_csv(f.path(), true).unwrap();
        assert_eq!(d.dim(), 2);
        assert_eq!(d.target().unwrap(), &[0.0, 1.0]);
    }

    #[test]
    fn duplicate_names_rejected() {
        assert!(Dataset::new(vec![vec![1.0, 2.0]], vec!["a".into(), "a".into()]).is_err());
    }

    #[test]
    fn roundtrip_write_read() {
        let d = Dataset::new(vec![vec![0.1, -2.5], vec![1e-9, 3.0]], default_names(2))
            .unwrap()
            .with_target(vec![1.0, 0.0])
            .unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_dataset_csv(&d, f.path()).unwrap();
        assert_eq!(load_dataset_csv(f.path(), true).unwrap(), d);
    }

    #[test]
    fn summary_statistics() {
        let d = Dataset::unnamed(vec![1.0, 10.0, 2.0, 20.0, 3.0, 30.0], 2).unwrap();
        assert_eq!(d.column_means(), vec![2.0, 20.0]);
        assert_eq!(d.column_medians(), vec![2.0, 20.0]);
        let cov = d.covariance();
        assert!((cov[1] - 10.0).abs() < 1e-12 && (cov[0] - 1.0).abs() < 1e-12);
    }
}
