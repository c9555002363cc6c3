use std::path::Path;

use serde::{Deserialize, Serialize};

use super::report::{num, opt, pct, table, Report};
use super::{paired_p_value, prepare, test_utilities, ExperimentConfig, RunProvenance, SummaryRecord};
use crate::augmenter::{apply_augmentation, import_augmented, AugmentationManifest};
use crate::data::{label_advantage, TrainValid};
use crate::error::{Error, Result};
use crate::metrics::RelevanceJudgements;
use crate::models::{evaluate, train, ModelKind, RelaxedGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transferability {
    /// The target is a graph model that ignores post-training edges.
    Weak,
    /// The target is not a graph model.
    Strong,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub provenance: RunProvenance,
    pub dataset: String,
    pub target: ModelKind,
    pub transferability: Transferability,
    pub source: AugmentationManifest,
    pub seed: u64,
    pub base: SummaryRecord,
    pub aug: SummaryRecord,
    pub ndcg_change: f64,
    pub delta_change: f64,
    pub p_value: Option<f64>,
}

/// Re-trains a non-augmentable `target` on the base graph and on the graph
/// exported in `manifest_dir`, with identical settings and seed.
pub fn run_transfer(config: &ExperimentConfig, manifest_dir: &Path, target: ModelKind) -> Result<TransferReport> {
    if target.augmentable() {
        return Err(Error::Contract(format!(
            "transfer targets must be non-augmentable; {target} reads the graph at inference"
        )));
    }
    config.validate()?;
    let data = prepare(config)?;
    let (source, added) = import_augmented(manifest_dir, &data.split.train)?;
    let augmented = apply_augmentation(&data.split.train, &added)?;
    let model_config = crate::models::ModelConfig {
        seed: source.seed,
        ..config.transfer_model(target)
    };
    let k = config.augmentation.k;
    let valid = &data.split.valid;
    let base_model = train(data.split.train_valid(), &model_config)?;
    let aug_model = train(
        TrainValid {
            train: &augmented,
            valid,
        },
        &model_config,
    )?;

    // labels come from the model trained on the original graph
    let base_scores = base_model.scores(&RelaxedGraph::plain(&data.split.train))?;
    let valid_utilities = evaluate(
        base_scores.view(),
        &data.split.train,
        &RelevanceJudgements::from_graph(valid),
        k,
    );
    let partition = label_advantage(&data.partition, &valid_utilities)?;

    // both models rank the same pool: items outside the original training history
    let mask = &data.split.train;
    let base_utilities = test_utilities(&base_model, &RelaxedGraph::plain(mask), mask, &data.split.test, k)?;
    let aug_utilities = test_utilities(&aug_model, &RelaxedGraph::plain(&augmented), mask, &data.split.test, k)?;
    let base = SummaryRecord::new(&base_utilities, &partition)?;
    let aug = SummaryRecord::new(&aug_utilities, &partition)?;
    Ok(TransferReport {
        provenance: RunProvenance::new(config),
        dataset: data.name,
        target,
        transferability: if target.is_gnn() {
            Transferability::Weak
        } else {
            Transferability::Strong
        },
        source,
        seed: model_config.seed,
        ndcg_change: aug.ndcg - base.ndcg,
        delta_change: aug.delta - base.delta,
        p_value: paired_p_value(&base_utilities, &aug_utilities)?,
        base,
        aug,
    })
}

impl Report for TransferReport {
    fn stem(&self) -> &'static str {
        "transfer"
    }

    fn csv_rows(&self) -> (Vec<&'static str>, Vec<Vec<String>>) {
        let header = vec![
            "dataset",
            "source_model",
            "source_policy",
            "target",
            "transferability",
            "seed",
            "row",
            "ndcg",
            "delta",
            "ndcg_advantaged",
            "ndcg_disadvantaged",
            "p_value",
            "config_hash",
        ];
        let row = |label: &str, s: &SummaryRecord, p: Option<f64>| {
            vec![
                self.dataset.clone(),
                self.source.model.clone(),
                self.source.policy.clone(),
                self.target.to_string(),
                format!("{:?}", self.transferability).to_lowercase(),
                self.seed.to_string(),
                label.to_string(),
                num(s.ndcg),
                num(s.delta),
                num(s.ndcg_advantaged),
                num(s.ndcg_disadvantaged),
                opt(p),
                self.provenance.config_hash.clone(),
            ]
        };
        (header, vec![row("base", &self.base, None), row("aug", &self.aug, self.p_value)])
    }

    fn text(&self) -> String {
        let header = ["row", "NDCG@10 %", "Delta %"];
        let rows = vec![
            vec!["Base".into(), pct(Some(self.base.ndcg)), pct(Some(self.base.delta))],
            vec!["Aug".into(), pct(Some(self.aug.ndcg)), pct(Some(self.aug.delta))],
        ];
        format!(
            "{:?} transferability: {} re-trained on {} + {} ({} added edges) | config {}\n\n{}change: NDCG {:+.4} Delta {:+.4} p {}\n",
            self.transferability,
            self.target,
            self.source.model,
            self.source.policy,
            self.source.n_added,
            &self.provenance.config_hash[..12],
            table(&header, &rows),
            self.ndcg_change,
            self.delta_change,
            opt(self.p_value),
        )
    }
}
