use std::path::Path;

use serde::{Deserialize, Serialize};

use super::report::{opt, pct, table, Report};
use super::{
    base_test, group_names, paired_p_value, prepare, run_cells, train_model, CellResult, CellStatus, ExperimentConfig,
    RunProvenance, SummaryRecord, SIGNIFICANCE_LEVEL,
};
use crate::augmenter::{edge_keys, export_augmented_keys, AugmentationManifest, EDGES_FILE};
use crate::error::Result;
use crate::models::ModelKind;

/// Base and best-cell results of one model under one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub dataset: String,
    pub attribute: String,
    pub model: ModelKind,
    pub seed: u64,
    pub config_hash: String,
    pub advantaged: String,
    pub disadvantaged: String,
    pub base: SummaryRecord,
    pub valid_delta_base: f64,
    /// Cell with the lowest validation gap; `None` when no cell ran.
    pub best_policy: Option<String>,
    pub aug: Option<SummaryRecord>,
    pub valid_delta_aug: Option<f64>,
    /// Paired test of per-user test NDCG, Aug against Base.
    pub p_value: Option<f64>,
    pub significant: bool,
    pub delta_decreased: bool,
    pub ndcg_increased: bool,
    pub regression: bool,
    /// Directory of the exported augmentation, relative to the output directory.
    pub manifest: Option<String>,
    pub cells: Vec<CellResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub provenance: RunProvenance,
    pub rows: Vec<BenchmarkRow>,
}

/// The augmentation behind one benchmark row, ready to export.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedArtifact {
    pub dir: String,
    pub manifest: AugmentationManifest,
    pub edges: Vec<(String, String)>,
}

impl AugmentedArtifact {
    pub fn write(&self, out_dir: &Path) -> Result<()> {
        export_augmented_keys(&out_dir.join(&self.dir), &self.edges, &self.manifest)
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkOutput {
    pub report: BenchmarkReport,
    pub augmentations: Vec<AugmentedArtifact>,
}

/// Trains every model per seed, runs every grid cell and reports the cell
/// with the lowest validation gap on test.
pub fn run_benchmark(config: &ExperimentConfig) -> Result<BenchmarkOutput> {
    config.validate()?;
    let provenance = RunProvenance::new(config);
    let data = prepare(config)?;
    let cells = config.grid.cells();
    let k = config.augmentation.k;
    let mut rows = Vec::new();
    let mut augmentations = Vec::new();
    for model_config in &config.models {
        for &seed in &config.seeds {
            let run = train_model(&data, model_config, seed, k)?;
            let base_utilities = base_test(&data, &run, k)?;
            let base = SummaryRecord::new(&base_utilities, &run.partition)?;
            let results = run_cells(&data, &run, &cells, &config.augmentation);
            let best = results
                .iter()
                .filter(|c| c.result.status == CellStatus::Ok)
                .min_by(|a, b| a.result.valid_delta.unwrap().total_cmp(&b.result.valid_delta.unwrap()));
            let (advantaged, disadvantaged) = group_names(&run.partition);
            let mut row = BenchmarkRow {
                dataset: data.name.clone(),
                attribute: config.attribute.clone(),
                model: model_config.kind,
                seed,
                config_hash: provenance.config_hash.clone(),
                advantaged,
                disadvantaged,
                base,
                valid_delta_base: run.valid_delta()?,
                best_policy: None,
                aug: None,
                valid_delta_aug: None,
                p_value: None,
                significant: false,
                delta_decreased: false,
                ndcg_increased: false,
                regression: false,
                manifest: None,
                cells: results.iter().map(|c| c.result.clone()).collect(),
            };
            if let Some(best) = best {
                let aug = best.result.test.unwrap();
                let p = paired_p_value(&base_utilities, best.test_utilities.as_ref().unwrap())?;
                let dir = format!("augmented/{}_seed{seed}", model_config.kind);
                augmentations.push(AugmentedArtifact {
                    dir: dir.clone(),
                    manifest: AugmentationManifest {
                        model: model_config.kind.to_string(),
                        policy: best.result.policy.clone(),
                        psi_u: best.result.psi_u,
                        psi_i: best.result.psi_i,
                        scenario: best.result.scenario.map(|s| s.as_str().to_string()).unwrap_or_default(),
                        seed,
                        best_epoch: best.result.best_epoch,
                        n_added: best.added.len(),
                        edges_file: EDGES_FILE.into(),
                    },
                    edges: edge_keys(&data.split.train, &best.added)?,
                });
                row.best_policy = Some(best.result.policy.clone());
                row.valid_delta_aug = best.result.valid_delta;
                row.p_value = p;
                row.significant = p.is_some_and(|p| p < SIGNIFICANCE_LEVEL);
                row.delta_decreased = aug.delta < base.delta;
                row.ndcg_increased = aug.ndcg > base.ndcg;
                row.regression = best.result.regression;
                row.aug = Some(aug);
                row.manifest = Some(dir);
            }
            rows.push(row);
        }
    }
    Ok(BenchmarkOutput {
        report: BenchmarkReport { provenance, rows },
        augmentations,
    })
}

impl Report for BenchmarkReport {
    fn stem(&self) -> &'static str {
        "benchmark"
    }

    fn csv_rows(&self) -> (Vec<&'static str>, Vec<Vec<String>>) {
        let header = vec![
            "dataset",
            "attribute",
            "model",
            "seed",
            "row",
            "policy",
            "ndcg",
            "delta",
            "ndcg_advantaged",
            "ndcg_disadvantaged",
            "valid_delta",
            "p_value",
            "config_hash",
        ];
        let mut rows = Vec::new();
        for r in &self.rows {
            let mut push = |label: &str, policy: String, s: &SummaryRecord, valid: Option<f64>, p: Option<f64>| {
                rows.push(vec![
                    r.dataset.clone(),
                    r.attribute.clone(),
                    r.model.to_string(),
                    r.seed.to_string(),
                    label.to_string(),
                    policy,
                    s.ndcg.to_string(),
                    s.delta.to_string(),
                    s.ndcg_advantaged.to_string(),
                    s.ndcg_disadvantaged.to_string(),
                    opt(valid),
                    opt(p),
                    r.config_hash.clone(),
                ]);
            };
            push("base", String::new(), &r.base, Some(r.valid_delta_base), None);
            if let Some(aug) = &r.aug {
                push("aug", r.best_policy.clone().unwrap_or_default(), aug, r.valid_delta_aug, r.p_value);
            }
        }
        (header, rows)
    }

    fn text(&self) -> String {
        let header = ["model", "seed", "row", "policy", "NDCG@10 %", "Delta %", "markers"];
        let mut rows = Vec::new();
        for r in &self.rows {
            rows.push(vec![
                r.model.to_string(),
                r.seed.to_string(),
                "Base".into(),
                String::new(),
                pct(Some(r.base.ndcg)),
                pct(Some(r.base.delta)),
                String::new(),
            ]);
            let mut markers = Vec::new();
            if r.significant {
                markers.push("*");
            }
            if r.delta_decreased {
                markers.push("delta-down");
            }
            if r.ndcg_increased {
                markers.push("ndcg-up");
            }
            if r.regression {
                markers.push("regression");
            }
            rows.push(vec![
                String::new(),
                String::new(),
                "Aug".into(),
                r.best_policy.clone().unwrap_or_else(|| "-".into()),
                pct(r.aug.map(|a| a.ndcg)),
                pct(r.aug.map(|a| a.delta)),
                markers.join(" "),
            ]);
        }
        let p = &self.provenance;
        format!(
            "benchmark {} | dataset {} | attribute {} | config {}\n\n{}\n* paired signed-rank test on per-user test NDCG, p < {SIGNIFICANCE_LEVEL}\n",
            p.name,
            p.dataset,
            p.attribute,
            &p.config_hash[..12],
            table(&header, &rows)
        )
    }
}
