//! Tractable two-layer discrete generative models and the latent-observed
//! dissimilarity (LOD) measure.

pub mod dist;
pub mod error;
pub mod experiment;
pub mod ingestion;
pub mod measures;
pub mod model_io;
pub mod models;
pub mod stacking;
pub mod stats;
pub mod training;

pub use dist::{entropy, kl_divergence, Cpt, Pmf, StateSpace, SupportPolicy};
pub use error::{Error, Result};
pub use measures::{lod, loglik, mi_data, model_mi, EvalScores};
pub use models::{GenerativeModel, ModelKind, ModelShape};
pub use stacking::{Bijection, StackedModel};
pub use training::{fit, TrainConfig, TrainReport};
