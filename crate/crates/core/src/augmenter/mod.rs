//! Learns which candidate edges to add so a frozen recommender treats both
//! demographic groups more evenly, and materialises the fairest graph found.

mod export;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use export::{
    edge_keys, export_augmented, export_augmented_keys, import_augmented, AugmentationManifest, EDGES_FILE, MANIFEST_FILE,
};

use crate::data::{Edge, GroupPartition, InteractionGraph, TrainValid};
use crate::error::{Error, Result};
use crate::grad::{FairnessObjective, LossBreakdown, ObjectiveConfig, SvdGradient};
use crate::metrics::{approx::sigmoid, group_summary, GroupSummary, RelevanceJudgements, DEFAULT_K, DEFAULT_TAU};
use crate::models::{evaluate, optim::Adam, RelaxedGraph, TrainedModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentationConfig {
    pub max_epochs: usize,
    pub early_stop_min_delta: f64,
    pub early_stop_patience: usize,
    pub beta: f64,
    pub tau: f64,
    pub learning_rate: f64,
    pub discretization_threshold: f64,
    pub p_init: f64,
    /// Ranking cutoff for both the smooth loss and the exact validation metric.
    pub k: usize,
    pub svd_gradient: SvdGradient,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        Self {
            max_epochs: 800,
            early_stop_min_delta: 1e-4,
            early_stop_patience: 7,
            beta: 0.5,
            tau: DEFAULT_TAU,
            learning_rate: 0.25,
            discretization_threshold: 0.5,
            p_init: -1.0,
            k: DEFAULT_K,
            svd_gradient: SvdGradient::FiniteDifference { step: 1e-5 },
        }
    }
}

impl AugmentationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.discretization_threshold > 0.0 && self.discretization_threshold < 1.0) {
            return Err(Error::Config("discretization_threshold must lie in (0, 1)".into()));
        }
        if !(self.early_stop_min_delta >= 0.0) || self.early_stop_patience == 0 {
            return Err(Error::Config("early stopping needs min_delta >= 0 and patience >= 1".into()));
        }
        if !(self.learning_rate >= 0.0) || !(self.tau > 0.0) || !(self.beta >= 0.0) || self.k == 0 {
            return Err(Error::Config("augmentation needs lr >= 0, tau > 0, beta >= 0, k >= 1".into()));
        }
        if !self.p_init.is_finite() {
            return Err(Error::Config("p_init must be finite".into()));
        }
        Ok(())
    }

    fn objective(&self) -> ObjectiveConfig {
        ObjectiveConfig {
            beta: self.beta,
            tau: self.tau,
            k: self.k,
            svd_gradient: self.svd_gradient,
        }
    }
}

/// Candidates whose relaxed weight reaches `threshold` (inclusive).
pub fn discretize(p: &[f64], candidates: &[(usize, usize)], threshold: f64) -> Vec<(usize, usize)> {
    p.iter()
        .zip(candidates)
        .filter(|(&x, _)| sigmoid(x) >= threshold)
        .map(|(_, &e)| e)
        .collect()
}

/// Stops after `patience` consecutive observations that fail to improve the
/// best value so far by at least `min_delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub min_delta: f64,
    pub patience: usize,
    best: Option<f64>,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(min_delta: f64, patience: usize) -> Self {
        Self {
            min_delta,
            patience,
            best: None,
            stale: 0,
        }
    }

    /// Records one value; returns true when training should stop.
    pub fn observe(&mut self, value: f64) -> bool {
        match self.best {
            Some(best) if best - value < self.min_delta => self.stale += 1,
            _ => {
                self.best = Some(value);
                self.stale = 0;
            }
        }
        self.stale >= self.patience
    }

    pub fn stale(&self) -> usize {
        self.stale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub l_fair: f64,
    pub l_dist: f64,
    pub loss: f64,
    pub n_edges: usize,
    pub delta_ndcg_valid: f64,
    pub ndcg_valid: f64,
    pub ndcg_group1: f64,
    pub ndcg_group2: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AugmentationTrace {
    pub records: Vec<EpochRecord>,
}

impl AugmentationTrace {
    pub const CSV_HEADER: &'static str =
        "epoch,l_fair,l_dist,loss,n_edges,delta_ndcg_valid,ndcg_valid,ndcg_group1,ndcg_group2";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.epoch,
                r.l_fair,
                r.l_dist,
                r.loss,
                r.n_edges,
                r.delta_ndcg_valid,
                r.ndcg_valid,
                r.ndcg_group1,
                r.ndcg_group2
            ));
        }
        out
    }

    /// Earliest epoch with the smallest validation gap.
    pub fn best_epoch(&self) -> Option<usize> {
        self.records
            .iter()
            .min_by(|a, b| a.delta_ndcg_valid.total_cmp(&b.delta_ndcg_valid).then(a.epoch.cmp(&b.epoch)))
            .map(|r| r.epoch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EarlyStop,
    MaxEpochs,
    EmptyCandidates,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationResult {
    /// 0 means the unperturbed graph was the fairest.
    pub best_epoch: usize,
    pub added_edges: Vec<(usize, usize)>,
    pub augmented: InteractionGraph,
    pub trace: AugmentationTrace,
    pub stop_reason: StopReason,
    pub base_delta: f64,
    pub best_delta: f64,
    /// The selected gap exceeds the starting gap.
    pub regression: bool,
    pub warnings: Vec<String>,
}

/// Adds `added` to `graph`, stamping the new edges with the graph's latest timestamp.
pub fn apply_augmentation(graph: &InteractionGraph, added: &[(usize, usize)]) -> Result<InteractionGraph> {
    if added.is_empty() {
        return Ok(graph.clone());
    }
    let stamp = graph.max_timestamp().unwrap_or(0);
    let mut edges = graph.edges().to_vec();
    let mut seen = std::collections::BTreeSet::new();
    for &(user, item) in added {
        if user >= graph.n_users() || item >= graph.n_items() {
            return Err(Error::Contract(format!("edge ({user}, {item}) outside the graph")));
        }
        if graph.has_edge(user, item) || !seen.insert((user, item)) {
            return Err(Error::Contract(format!("edge ({user}, {item}) added twice")));
        }
        edges.push(Edge {
            user,
            item,
            timestamp: stamp,
        });
    }
    graph.with_edges(edges)
}

/// Exact validation metrics of `model` with `added` edges inserted into the training graph.
/// Items of the original training graph stay masked.
pub fn evaluate_augmented(
    model: &TrainedModel,
    train: &InteractionGraph,
    added: &[(usize, usize)],
    judgements: &RelevanceJudgements,
    partition: &GroupPartition,
    k: usize,
) -> Result<GroupSummary> {
    let relaxed = RelaxedGraph::new(train, added, vec![1.0; added.len()])?;
    let scores = model.scores(&relaxed)?;
    let utilities = evaluate(scores.view(), train, judgements, k);
    group_summary(&utilities, partition)
}

fn record(epoch: usize, loss: &LossBreakdown, n_edges: usize, summary: &GroupSummary) -> EpochRecord {
    EpochRecord {
        epoch,
        l_fair: loss.l_fair,
        l_dist: loss.l_dist,
        loss: loss.total,
        n_edges,
        delta_ndcg_valid: summary.delta,
        ndcg_valid: summary.overall,
        ndcg_group1: summary.group_1,
        ndcg_group2: summary.group_2,
    }
}

/// Optimises the perturbation vector over `candidates` against the frozen `model`.
///
/// Epoch 0 records the unperturbed graph. Each later epoch takes one
/// optimiser step on the relaxed loss, thresholds the weights, and records
/// the exact validation gap of the resulting graph.
pub fn augment(
    model: &TrainedModel,
    data: TrainValid<'_>,
    partition: &GroupPartition,
    candidates: &[(usize, usize)],
    config: &AugmentationConfig,
) -> Result<AugmentationResult> {
    config.validate()?;
    if !model.augmentable() {
        return Err(Error::Contract(format!(
            "{} is not augmentable: its recommendations ignore the graph",
            model.kind()
        )));
    }
    if !partition.is_labeled() {
        return Err(Error::Contract("partition has no advantaged group".into()));
    }
    if let Some(&(u, i)) = candidates.iter().find(|&&(u, _)| !partition.is_disadvantaged(u)) {
        return Err(Error::Contract(format!("candidate ({u}, {i}) touches a non-disadvantaged user")));
    }
    let train = data.train;
    let judgements = Arc::new(RelevanceJudgements::from_graph(data.valid));
    let base = evaluate_augmented(model, train, &[], &judgements, partition, config.k)?;
    let mut warnings = Vec::new();

    if candidates.is_empty() {
        let zero = LossBreakdown {
            l_fair: 0.0,
            l_dist: 0.25,
            total: 0.25 * config.beta,
            ndcg_group1: base.group_1,
            ndcg_group2: base.group_2,
        };
        return Ok(AugmentationResult {
            best_epoch: 0,
            added_edges: Vec::new(),
            augmented: train.clone(),
            trace: AugmentationTrace {
                records: vec![record(0, &zero, 0, &base)],
            },
            stop_reason: StopReason::EmptyCandidates,
            base_delta: base.delta,
            best_delta: base.delta,
            regression: false,
            warnings,
        });
    }

    let mut objective = FairnessObjective::new(
        model,
        Arc::new(train.clone()),
        candidates,
        partition,
        judgements.clone(),
        config.objective(),
    )?;
    let mut p = vec![config.p_init; candidates.len()];
    let mut adam = Adam::new(p.len(), config.learning_rate);
    let mut stopper = EarlyStopping::new(config.early_stop_min_delta, config.early_stop_patience);
    let mut trace = AugmentationTrace::default();

    let mut current = discretize(&p, candidates, config.discretization_threshold);
    let initial = objective.loss(&p)?;
    let start = if current.is_empty() {
        base
    } else {
        evaluate_augmented(model, train, &current, &judgements, partition, config.k)?
    };
    trace.records.push(record(0, &initial, current.len(), &start));
    let mut best = (0usize, start.delta, current.clone());
    let mut stop_reason = StopReason::MaxEpochs;

    for epoch in 1..=config.max_epochs {
        let step = objective.loss_and_gradient(&p)?;
        for w in step.warnings {
            if !warnings.contains(&w) {
                warnings.push(w);
            }
        }
        adam.step(&mut p, &step.gradient);
        let next = discretize(&p, candidates, config.discretization_threshold);
        // the metric only moves when the discrete edge set does
        let summary = if next == current {
            let last = trace.records.last().unwrap();
            GroupSummary {
                overall: last.ndcg_valid,
                group_1: last.ndcg_group1,
                group_2: last.ndcg_group2,
                delta: last.delta_ndcg_valid,
            }
        } else {
            evaluate_augmented(model, train, &next, &judgements, partition, config.k)?
        };
        current = next;
        trace.records.push(record(epoch, &step.loss, current.len(), &summary));
        log::debug!(
            "augment epoch {epoch}: loss {:.6} edges {} valid delta {:.5}",
            step.loss.total,
            current.len(),
            summary.delta
        );
        if summary.delta < best.1 {
            best = (epoch, summary.delta, current.clone());
        }
        if stopper.observe(summary.delta) {
            stop_reason = StopReason::EarlyStop;
            break;
        }
    }

    let (best_epoch, best_delta, added_edges) = best;
    let augmented = apply_augmentation(train, &added_edges)?;
    let regression = best_delta > base.delta;
    if regression {
        warnings.push(format!(
            "selected validation gap {best_delta:.5} exceeds the starting gap {:.5}",
            base.delta
        ));
    }
    Ok(AugmentationResult {
        best_epoch,
        added_edges,
        augmented,
        trace,
        stop_reason,
        base_delta: base.delta,
        best_delta,
        regression,
        warnings,
    })
}
