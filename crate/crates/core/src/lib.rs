//! Long-tail promotion by personalized xQuAD re-ranking.
//!
//! The pipeline mirrors a standard offline top-N study:
//!
//! 1. [`ingest`] parses rating dumps, removes sparse users and distant-tail
//!    items, and builds per-user stratified folds.
//! 2. [`popularity`] counts item popularity on the training fold, splits the
//!    catalog into short head and long tail, and measures each user's
//!    long-tail propensity.
//! 3. [`baseline`] trains a pairwise-ranking factor model and produces
//!    normalized top-N candidate lists.
//! 4. [`rerank`] greedily rebuilds a top-k list from the candidates with the
//!    Binary or Smooth coverage rule.
//! 5. [`metrics`] scores the lists (NDCG, ARP, APLT, ACLT, long-tail
//!    coverage) and [`experiment`] drives λ sweeps across folds.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`.

pub mod baseline;
pub mod error;
pub mod experiment;
pub mod ids;
pub mod ingest;
mod linalg;
pub mod metrics;
pub mod popularity;
pub mod rerank;
pub mod scalar;
pub mod synthetic;

pub use error::{Error, Result};
pub use ids::{ItemId, UserId};
pub use scalar::Scalar;

pub type FactorModel = baseline::FactorModel<f64>;
pub type FactorModel32 = baseline::FactorModel<f32>;
pub type CandidateList = baseline::CandidateList<f64>;
pub type CandidateList32 = baseline::CandidateList<f32>;
pub type RerankConfig = rerank::RerankConfig<f64>;
pub type RerankConfig32 = rerank::RerankConfig<f32>;
pub type Reranked = rerank::Reranked<f64>;
pub type UserPropensity = popularity::UserPropensity<f64>;
pub type MetricsReport = metrics::MetricsReport<f64>;
