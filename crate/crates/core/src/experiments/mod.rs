//! Experiment orchestration: benchmark, policy grid, Ψ sweep and transfer runs
//! over one dataset, with JSON, CSV and text reports.
//!
//! Validation drives every selection. The test split is read here and nowhere
//! upstream, only to score finished models.

mod benchmark;
pub mod config;
mod grid;
mod report;
mod transfer;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use benchmark::{run_benchmark, AugmentedArtifact, BenchmarkOutput, BenchmarkReport, BenchmarkRow};
pub use config::{DatasetConfig, ExperimentConfig, GridConfig, SweepConfig};
pub use grid::{
    policy_grid, psi_sweep, run_policy_grid, run_psi_sweep, sweep_cells, PolicyGrid, PolicyGridReport, PsiSweep,
    PsiSweepReport, SweepAxis, SweepPoint,
};
pub use report::{emit_report, Report, ReportFormat};
pub use transfer::{run_transfer, TransferReport, Transferability};

use crate::augmenter::{augment, AugmentationConfig, StopReason};
use crate::data::synthetic::generate;
use crate::data::{
    ingest, ingest_attributes, k_core_filter, label_advantage, partition_users, temporal_split, DatasetSplit,
    GroupId, GroupPartition, InteractionGraph,
};
use crate::error::{Error, Result};
use crate::metrics::{group_summary, wilcoxon_signed_rank, RelevanceJudgements, UtilityVector};
use crate::models::{evaluate, train, ModelConfig, RelaxedGraph, TrainedModel};
use crate::policies::{build_candidates, sample, ItemPolicy, PolicyConfig, Scenario, UserPolicy};

/// Significance level of the paired test on per-user NDCG.
pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

/// Identifies the run behind every reported number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunProvenance {
    pub name: String,
    pub dataset: String,
    pub attribute: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub version: String,
}

impl RunProvenance {
    pub fn new(config: &ExperimentConfig) -> Self {
        Self {
            name: config.name.clone(),
            dataset: config.dataset.name(),
            attribute: config.attribute.clone(),
            config_hash: config.hash(),
            seeds: config.seeds.clone(),
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

/// A split dataset with its unlabeled demographic partition.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub name: String,
    pub split: DatasetSplit,
    pub partition: GroupPartition,
}

pub fn prepare(config: &ExperimentConfig) -> Result<PreparedData> {
    let (interactions, has_timestamps, attributes) = match &config.dataset {
        DatasetConfig::Synthetic(s) => {
            let corpus = generate(s);
            (corpus.interactions, true, corpus.attributes)
        }
        DatasetConfig::File {
            interactions,
            attributes,
            schema,
            attribute_delimiter,
            k_core,
        } => {
            let ingested = ingest(interactions, schema)?;
            let kept = if *k_core > 0 {
                k_core_filter(ingested.interactions, *k_core)?
            } else {
                ingested.interactions
            };
            (kept, ingested.has_timestamps, ingest_attributes(attributes, attribute_delimiter)?)
        }
    };
    let split = temporal_split(&interactions, has_timestamps, config.split)?;
    let partition = partition_users(&attributes, split.train.user_ids(), &config.attribute, config.age_threshold)?;
    log::info!(
        "prepared {}: {} users, {} items, {} train edges",
        config.dataset.name(),
        split.n_users(),
        split.n_items(),
        split.train.n_edges()
    );
    Ok(PreparedData {
        name: config.dataset.name(),
        split,
        partition,
    })
}

/// A trained model with its own advantage labels.
#[derive(Debug, Clone)]
pub struct ModelRun {
    pub model: TrainedModel,
    /// Labeled on this model's validation NDCG.
    pub partition: GroupPartition,
    pub valid_utilities: UtilityVector,
    pub seed: u64,
}

impl ModelRun {
    pub fn valid_delta(&self) -> Result<f64> {
        Ok(group_summary(&self.valid_utilities, &self.partition)?.delta)
    }
}

pub fn train_model(data: &PreparedData, model: &ModelConfig, seed: u64, k: usize) -> Result<ModelRun> {
    let config = ModelConfig {
        seed,
        ..model.clone()
    };
    let started = std::time::Instant::now();
    let model = train(data.split.train_valid(), &config)?;
    log::info!("trained {} (seed {seed}) in {:.1?}", config.kind, started.elapsed());
    model_run(data, model, k)
}

/// Labels advantage for an already trained model.
pub fn model_run(data: &PreparedData, model: TrainedModel, k: usize) -> Result<ModelRun> {
    let train_graph = &data.split.train;
    let scores = model.scores(&RelaxedGraph::plain(train_graph))?;
    let valid_utilities = evaluate(
        scores.view(),
        train_graph,
        &RelevanceJudgements::from_graph(&data.split.valid),
        k,
    );
    let partition = label_advantage(&data.partition, &valid_utilities)?;
    Ok(ModelRun {
        seed: model.config.seed,
        model,
        partition,
        valid_utilities,
    })
}

/// Test NDCG of `model` scoring over `graph`, masking the items of `mask`.
fn test_utilities(
    model: &TrainedModel,
    graph: &RelaxedGraph<'_>,
    mask: &InteractionGraph,
    test: &InteractionGraph,
    k: usize,
) -> Result<UtilityVector> {
    let scores = model.scores(graph)?;
    Ok(evaluate(scores.view(), mask, &RelevanceJudgements::from_graph(test), k))
}

/// Mean, gap and per-group NDCG with groups named by advantage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub ndcg: f64,
    pub delta: f64,
    pub ndcg_advantaged: f64,
    pub ndcg_disadvantaged: f64,
    pub n_users: usize,
}

impl SummaryRecord {
    pub fn new(utilities: &UtilityVector, partition: &GroupPartition) -> Result<Self> {
        let s = group_summary(utilities, partition)?;
        let adv = partition
            .advantaged()
            .ok_or_else(|| Error::Contract("partition has no advantaged group".into()))?;
        Ok(Self {
            ndcg: s.overall,
            delta: s.delta,
            ndcg_advantaged: s.group(adv),
            ndcg_disadvantaged: s.group(adv.other()),
            n_users: utilities.n_evaluated(),
        })
    }
}

/// Two-sided p-value of the paired test between per-user utilities; `None` when all pairs tie.
fn paired_p_value(base: &UtilityVector, aug: &UtilityVector) -> Result<Option<f64>> {
    let n = base.values.len().min(aug.values.len());
    let (a, b): (Vec<f64>, Vec<f64>) = (0..n)
        .filter_map(|u| Some((aug.get(u)?, base.get(u)?)))
        .unzip();
    match wilcoxon_signed_rank(&a, &b) {
        Ok(r) => Ok(Some(r.p_value)),
        Err(Error::Degenerate(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn group_names(partition: &GroupPartition) -> (String, String) {
    let adv = partition.advantaged().unwrap_or(GroupId::First);
    (partition.name(adv).to_string(), partition.name(adv.other()).to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    /// Nothing to optimise: empty sample or candidate set, or a policy the data cannot support.
    Skipped,
    Failed,
}

/// One augmentation run under a single policy configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub policy: String,
    pub user_policy: Option<UserPolicy>,
    pub item_policy: Option<ItemPolicy>,
    pub scenario: Option<Scenario>,
    pub psi_u: f64,
    pub psi_i: f64,
    pub status: CellStatus,
    pub message: Option<String>,
    pub n_candidates: usize,
    pub n_added: usize,
    pub best_epoch: usize,
    pub stop_reason: Option<StopReason>,
    /// Validation gap of the selected epoch.
    pub valid_delta: Option<f64>,
    pub test: Option<SummaryRecord>,
    pub regression: bool,
}

#[derive(Debug, Clone)]
pub struct CellRun {
    pub result: CellResult,
    pub added: Vec<(usize, usize)>,
    pub test_utilities: Option<UtilityVector>,
}

fn empty_cell(policy: &PolicyConfig, status: CellStatus, message: Option<String>) -> CellResult {
    CellResult {
        policy: policy.label(),
        user_policy: policy.user_policy,
        item_policy: policy.item_policy,
        scenario: policy.scenario(),
        psi_u: policy.psi_u,
        psi_i: policy.psi_i,
        status,
        message,
        n_candidates: 0,
        n_added: 0,
        best_epoch: 0,
        stop_reason: None,
        valid_delta: None,
        test: None,
        regression: false,
    }
}

/// Samples, augments and scores one policy cell. Failures are recorded, not raised.
pub fn run_cell(data: &PreparedData, run: &ModelRun, policy: &PolicyConfig, aug: &AugmentationConfig) -> CellRun {
    match try_cell(data, run, policy, aug) {
        Ok(cell) => cell,
        Err(e) => {
            let status = match e {
                Error::EmptyCandidates | Error::PolicyUnavailable(..) => CellStatus::Skipped,
                _ => CellStatus::Failed,
            };
            log::warn!("cell {} {status:?}: {e}", policy.label());
            CellRun {
                result: empty_cell(policy, status, Some(e.to_string())),
                added: Vec::new(),
                test_utilities: None,
            }
        }
    }
}

fn try_cell(data: &PreparedData, run: &ModelRun, policy: &PolicyConfig, aug: &AugmentationConfig) -> Result<CellRun> {
    let train_graph = &data.split.train;
    let scenario = policy
        .scenario()
        .ok_or_else(|| Error::Config("a cell needs at least one policy".into()))?;
    let sampled = sample(policy, train_graph, &run.partition, Some(&run.valid_utilities), run.seed)?;
    let candidates = build_candidates(train_graph, &run.partition, &sampled, scenario)?;
    let result = augment(&run.model, data.split.train_valid(), &run.partition, &candidates.edges, aug)?;
    let weights = vec![1.0; result.added_edges.len()];
    let graph = RelaxedGraph::new(train_graph, &result.added_edges, weights)?;
    let utilities = test_utilities(&run.model, &graph, train_graph, &data.split.test, aug.k)?;
    let mut cell = empty_cell(policy, CellStatus::Ok, None);
    cell.n_candidates = candidates.len();
    cell.n_added = result.added_edges.len();
    cell.best_epoch = result.best_epoch;
    cell.stop_reason = Some(result.stop_reason);
    cell.valid_delta = Some(result.best_delta);
    cell.test = Some(SummaryRecord::new(&utilities, &run.partition)?);
    cell.regression = result.regression;
    if !result.warnings.is_empty() {
        cell.message = Some(result.warnings.join("; "));
    }
    log::info!(
        "cell {}: {} candidates, {} added, valid delta {:.5} -> {:.5}",
        cell.policy,
        cell.n_candidates,
        cell.n_added,
        result.base_delta,
        result.best_delta
    );
    Ok(CellRun {
        result: cell,
        added: result.added_edges,
        test_utilities: Some(utilities),
    })
}

/// Runs cells on the worker pool; results keep the order of `cells`.
pub fn run_cells(
    data: &PreparedData,
    run: &ModelRun,
    cells: &[PolicyConfig],
    aug: &AugmentationConfig,
) -> Vec<CellRun> {
    cells.par_iter().map(|c| run_cell(data, run, c, aug)).collect()
}

/// Base test utilities of a model over the unaugmented training graph.
fn base_test(data: &PreparedData, run: &ModelRun, k: usize) -> Result<UtilityVector> {
    test_utilities(
        &run.model,
        &RelaxedGraph::plain(&data.split.train),
        &data.split.train,
        &data.split.test,
        k,
    )
}
