use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::EngineKind;
use crate::error::{Error, Result};
use crate::values::{Method, SurrogateParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentName {
    SyntheticDag,
    ClassificationPerturbation,
    CorrelationSweep,
    ManifoldSizeSweep,
    RjbCounterexample,
    DimensionScaling,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 6] = [
        ExperimentName::SyntheticDag,
        ExperimentName::ClassificationPerturbation,
        ExperimentName::CorrelationSweep,
        ExperimentName::ManifoldSizeSweep,
        ExperimentName::RjbCounterexample,
        ExperimentName::DimensionScaling,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentName::SyntheticDag => "synthetic_dag",
            ExperimentName::ClassificationPerturbation => "classification_perturbation",
            ExperimentName::CorrelationSweep => "correlation_sweep",
            ExperimentName::ManifoldSizeSweep => "manifold_size_sweep",
            ExperimentName::RjbCounterexample => "rjb_counterexample",
            ExperimentName::DimensionScaling => "dimension_scaling",
        }
    }
}

impl std::fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ExperimentName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentName::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| {
            let names: Vec<&str> = ExperimentName::ALL.iter().map(|e| e.name()).collect();
            Error::Config(format!("unknown experiment {s:?}; registered experiments: {}", names.join(", ")))
        })
    }
}

/// Where densities (for the manifold and for RJBShap) come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityBackend {
    /// The SCM's own density.
    #[default]
    Oracle,
    /// Gaussian KDE fitted on an observational sample.
    Kde,
}

/// Experiment settings. Every optional field is filled with the experiment's
/// default by [`ExperimentConfig::resolved`], and the resolved form is what
/// gets echoed to `config.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: ExperimentName,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub n_points: Option<usize>,
    /// Monte-Carlo samples per value.
    #[serde(default)]
    pub samples: Option<usize>,
    /// Permutations for the permutation engines.
    #[serde(default)]
    pub permutations: Option<usize>,
    #[serde(default)]
    pub methods: Option<Vec<Method>>,
    /// Perturbation sizes (synthetic_dag, classification_perturbation).
    #[serde(default)]
    pub deltas: Option<Vec<f64>>,
    /// Correlations (correlation_sweep).
    #[serde(default)]
    pub rhos: Option<Vec<f64>>,
    /// Mass levels defining manifold thresholds (manifold_size_sweep).
    #[serde(default)]
    pub alphas: Option<Vec<f64>>,
    /// Feature dimensions (dimension_scaling).
    #[serde(default)]
    pub dims: Option<Vec<usize>>,
    /// Mass of the manifold for experiments with a single manifold.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub n_calibration: Option<usize>,
    #[serde(default)]
    pub density: Option<DensityBackend>,
    /// Engine for the manifold method; other methods use the exact engine up
    /// to `exact_max_d` features and permutation sampling above it.
    #[serde(default)]
    pub manifold_engine: Option<EngineKind>,
    #[serde(default)]
    pub exact_max_d: Option<usize>,
    #[serde(default)]
    pub surrogate: Option<SurrogateParams>,
    #[serde(default)]
    pub out: Option<String>,
}

impl ExperimentConfig {
    pub fn new(name: ExperimentName) -> Self {
        ExperimentConfig {
            name,
            seed: 0,
            n_points: None,
            samples: None,
            permutations: None,
            methods: None,
            deltas: None,
            rhos: None,
            alphas: None,
            dims: None,
            alpha: None,
            n_calibration: None,
            density: None,
            manifold_engine: None,
            exact_max_d: None,
            surrogate: None,
            out: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Fill defaults and validate.
    pub fn resolved(&self) -> Result<ExperimentConfig> {
        use ExperimentName::*;
        let mut c = self.clone();
        let name = c.name;
        c.n_points.get_or_insert(500);
        c.samples.get_or_insert(match name {
            DimensionScaling => 100,
            _ => 500,
        });
        c.permutations.get_or_insert(match name {
            DimensionScaling => 100,
            _ => 2000,
        });
        c.methods.get_or_insert_with(|| match name {
            SyntheticDag | ClassificationPerturbation => {
                vec![Method::Is, Method::Manifold, Method::CesAnalytic, Method::Rjb]
            }
            CorrelationSweep => vec![Method::Is, Method::Manifold, Method::CesAnalytic, Method::Rjb],
            ManifoldSizeSweep => vec![Method::Is, Method::Manifold, Method::CesSurrogate],
            RjbCounterexample => vec![Method::Manifold, Method::Rjb],
            DimensionScaling => vec![Method::Is, Method::Manifold, Method::CesAnalytic, Method::Rjb],
        });
        match name {
            SyntheticDag => {
                c.deltas.get_or_insert(vec![0.0, 5.0]);
            }
            ClassificationPerturbation => {
                c.deltas.get_or_insert(vec![0.0, 10.0]);
            }
            CorrelationSweep => {
                c.rhos.get_or_insert(vec![0.0, 0.33, 0.66, 0.99]);
                c.alpha.get_or_insert(0.99);
            }
            ManifoldSizeSweep => {
                c.alphas.get_or_insert(vec![1.0, 0.9, 0.85, 0.8]);
            }
            DimensionScaling => {
                c.dims.get_or_insert(vec![10, 20]);
            }
            RjbCounterexample => {}
        }
        c.alpha.get_or_insert(0.999);
        c.n_calibration.get_or_insert(10_000);
        c.density.get_or_insert(DensityBackend::Oracle);
        c.manifold_engine.get_or_insert(match name {
            DimensionScaling => EngineKind::ManifoldPermutation,
            _ => EngineKind::Exact,
        });
        c.exact_max_d.get_or_insert(12);
        c.surrogate.get_or_insert_with(SurrogateParams::default);
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let positive = |v: Option<usize>, name: &str| match v {
            Some(0) => Err(Error::Config(format!("{name} must be at least 1"))),
            _ => Ok(()),
        };
        positive(self.n_points, "n_points")?;
        positive(self.samples, "samples")?;
        positive(self.permutations, "permutations")?;
        positive(self.n_calibration, "n_calibration")?;
        if self.methods.as_ref().is_some_and(|m| m.is_empty()) {
            return bad("method list is empty".into());
        }
        let nonempty = |v: &Option<Vec<f64>>, name: &str| {
            if v.as_ref().is_some_and(|v| v.is_empty()) {
                Err(Error::Config(format!("{name} list is empty")))
            } else {
                Ok(())
            }
        };
        nonempty(&self.deltas, "delta")?;
        nonempty(&self.rhos, "rho")?;
        nonempty(&self.alphas, "alpha")?;
        if let Some(d) = &self.deltas {
            if d.iter().any(|v| !v.is_finite()) {
                return bad("delta values must be finite".into());
            }
        }
        if let Some(r) = &self.rhos {
            if r.iter().any(|v| !(v.is_finite() && v.abs() < 1.0)) {
                return bad("rho values must lie in (-1, 1)".into());
            }
        }
        for a in self.alphas.iter().flatten().chain(self.alpha.iter()) {
            if !(*a > 0.0 && *a <= 1.0) {
                return bad(format!("alpha must lie in (0, 1], got {a}"));
            }
        }
        if let Some(dims) = &self.dims {
            if dims.is_empty() {
                return bad("dims list is empty".into());
            }
            if dims.iter().any(|&d| !(2..=63).contains(&d)) {
                return bad("dims must lie in 2..=63".into());
            }
        }
        if self.manifold_engine == Some(EngineKind::Permutation) {
            return bad("manifold_engine must be exact or manifold-permutation".into());
        }
        if let Some(m) = &self.methods {
            if self.name == ExperimentName::ManifoldSizeSweep && m.contains(&Method::CesAnalytic) {
                return bad("ces-analytic needs a Gaussian SCM; use ces-surrogate for manifold_size_sweep".into());
            }
        }
        Ok(())
    }

    /// Accessors for a resolved config.
    pub fn n_points(&self) -> usize {
        self.n_points.unwrap_or(500)
    }

    pub fn samples(&self) -> usize {
        self.samples.unwrap_or(500)
    }

    pub fn permutations(&self) -> usize {
        self.permutations.unwrap_or(2000)
    }

    pub fn methods(&self) -> &[Method] {
        self.methods.as_deref().unwrap_or(&[])
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(0.999)
    }

    pub fn n_calibration(&self) -> usize {
        self.n_calibration.unwrap_or(10_000)
    }

    pub fn density(&self) -> DensityBackend {
        self.density.unwrap_or_default()
    }

    pub fn manifold_engine(&self) -> EngineKind {
        self.manifold_engine.unwrap_or(EngineKind::Exact)
    }

    pub fn exact_max_d(&self) -> usize {
        self.exact_max_d.unwrap_or(12)
    }

    pub fn surrogate(&self) -> SurrogateParams {
        self.surrogate.clone().unwrap_or_default()
    }
}
