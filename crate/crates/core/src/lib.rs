//! Interventional Shapley values restricted to a data manifold, plus the
//! marginal, interventional, conditional and joint-baseline value functions
//! they are compared against.
//!
//! The pipeline is: a [`ValueFunction`] gives `v(S)` for an explained point,
//! an engine turns it into an [`Attribution`], and [`robustness`] and
//! [`experiments`] drive both against perturbed models.

pub mod attribution;
pub mod coalition;
pub mod dataset;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod gaussian;
pub mod manifold;
pub mod model;
pub mod rng;
pub mod robustness;
pub mod sampler;
pub mod scm;
pub mod values;

pub use attribution::{normalize_l1, top_feature, Attribution};
pub use coalition::{shapley_weight, shapley_weights, Coalition};
pub use dataset::{load_dataset_csv, write_dataset_csv, Dataset};
pub use engine::{
    exact_shapley, manifold_permutation_shapley, permutation_shapley, EngineKind, EvalCache, PermutationPlan,
};
pub use error::{Error, Result};
pub use gaussian::MultivariateNormal;
pub use manifold::{Density, DensityManifold, Manifold, MassManifold};
pub use model::{model, Model, SharedModel};
pub use rng::RngStream;
pub use sampler::{CoalitionSampler, InterventionalSampler, RowSampler};
pub use scm::{InterventionSpec, Scm};
pub use values::{Method, ValueEstimate, ValueFunction};
