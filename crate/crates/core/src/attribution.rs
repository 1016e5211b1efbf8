use serde::{Deserialize, Serialize};

/// Per-feature Shapley values for one explained point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub phi: Vec<f64>,
    /// `v(∅)`
    pub value_empty: f64,
    /// `v([d])`
    pub value_full: f64,
    pub n_samples: usize,
    pub std_errors: Option<Vec<f64>>,
    /// Set by [`normalize_l1`] when every `φᵢ` is zero.
    #[serde(default)]
    pub degenerate: bool,
}

impl Attribution {
    pub fn new(phi: Vec<f64>, value_empty: f64, value_full: f64) -> Self {
        Attribution {
            phi,
            value_empty,
            value_full,
            n_samples: 0,
            std_errors: None,
            degenerate: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.phi.len()
    }

    pub fn sum(&self) -> f64 {
        self.phi.iter().sum()
    }

    pub fn top_feature(&self) -> usize {
        top_feature(self)
    }

    pub fn normalize_l1(&self) -> Attribution {
        normalize_l1(self)
    }
}

/// Index of the largest `|φᵢ|`; ties go to the lowest index.
pub fn top_feature(attr: &Attribution) -> usize {
    let mut best = 0;
    for (i, v) in attr.phi.iter().enumerate() {
        if v.abs() > attr.phi[best].abs() {
            best = i;
        }
    }
    best
}

/// Scale `φ` so that `Σ|φᵢ| = 1`. An all-zero vector is returned unchanged
/// with `degenerate` set.
pub fn normalize_l1(attr: &Attribution) -> Attribution {
    let total: f64 = attr.phi.iter().map(|v| v.abs()).sum();
    let mut out = attr.clone();
    if total == 0.0 {
        out.degenerate = true;
        return out;
    }
    out.degenerate = false;
    for v in &mut out.phi {
        *v /= total;
    }
    if let Some(se) = &mut out.std_errors {
        for s in se {
            *s /= total;
        }
    }
    out
}
