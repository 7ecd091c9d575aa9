//! Rating and ranking metrics, the matrix-factorization baseline, the
//! component ablation harness and the synthetic data generator.

mod ablation;
mod metrics;
mod mf;
mod ranking;
mod synthetic;

pub use ablation::{ablation_run, AblationResult};
pub use metrics::{mae, ndcg_at_k, precision_at_k, recall_at_k, rmse};
pub use mf::{mf_predict, mf_train, MfConfig, MfModel};
pub use ranking::{
    evaluate, rank_candidates, MeanScorer, MetricsReport, NeuralScorer, RankedList, Scorer, DEFAULT_K,
    RELEVANCE_THRESHOLD,
};
pub use synthetic::{device_id, generate, make_synthetic, service_id, SyntheticConfig, SyntheticData};
