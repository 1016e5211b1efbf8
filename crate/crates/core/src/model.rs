use std::sync::Arc;

/// Black-box model `f: ℝᵈ → ℝ`. Classifiers return `0.0`/`1.0`.
///
/// Must be deterministic and defined everywhere, including off the data
/// manifold.
pub trait Model: Send + Sync {
    fn eval(&self, x: &[f64]) -> f64;
}

impl<F> Model for F
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn eval(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

pub type SharedModel = Arc<dyn Model>;

/// Wrap a closure as a shared model.
pub fn model<F>(f: F) -> SharedModel
where
    F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
{
    Arc::new(f)
}

/// `Σ wₖ fₖ`.
pub struct LinearCombination {
    pub terms: Vec<(f64, SharedModel)>,
}

impl Model for LinearCombination {
    fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(w, f)| w * f.eval(x)).sum()
    }
}

/// Nearest-neighbour lookup over a tabulated grid of `(point, output)` pairs.
pub struct TabulatedModel {
    points: Vec<f64>,
    outputs: Vec<f64>,
    d: usize,
}

impl TabulatedModel {
    pub fn new(data: &crate::Dataset) -> crate::Result<Self> {
        let outputs = data
            .target()
            .ok_or_else(|| crate::Error::Config("tabulated model needs an output column".into()))?
            .to_vec();
        Ok(TabulatedModel {
            points: data.as_flat().to_vec(),
            outputs,
            d: data.dim(),
        })
    }
}

impl Model for TabulatedModel {
    fn eval(&self, x: &[f64]) -> f64 {
        let mut best = f64::INFINITY;
        let mut out = 0.0;
        for (p, y) in self.points.chunks_exact(self.d).zip(&self.outputs) {
            let dist: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            if dist < best {
                best = dist;
                out = *y;
            }
        }
        out
    }
}
