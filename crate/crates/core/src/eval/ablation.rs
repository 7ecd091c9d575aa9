use serde::{Deserialize, Serialize};

use super::ranking::{evaluate, MetricsReport, NeuralScorer};
use crate::ingest::DatasetSplit;
use crate::model::ModelMode;
use crate::train::{train, Prepared, TrainConfig, TrainHistory};
use crate::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub mode: ModelMode,
    pub report: MetricsReport,
    pub history: TrainHistory,
}

/// Trains and evaluates one model per mode with otherwise identical
/// configuration and seed.
pub fn ablation_run(
    modes: &[ModelMode],
    cfg: &TrainConfig,
    data: &Prepared,
    split: &DatasetSplit,
    k: usize,
) -> Result<Vec<AblationResult>> {
    modes
        .iter()
        .map(|&mode| {
            let cfg = TrainConfig { mode, ..cfg.clone() };
            let (model, history) = train(&cfg, data)?;
            let report = evaluate(&NeuralScorer::new(&model, &data.corpus), split, k);
            log::info!("ablation mode={mode} mae={:.6} rmse={:.6}", report.mae, report.rmse);
            Ok(AblationResult { mode, report, history })
        })
        .collect()
}
