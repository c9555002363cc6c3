use serde::{Deserialize, Serialize};

use super::report::{num, opt, pct, table, Report};
use super::{
    base_test, prepare, run_cells, train_model, CellResult, CellStatus, ExperimentConfig, ModelRun, PreparedData,
    RunProvenance, SummaryRecord,
};
use crate::error::{Error, Result};
use crate::models::ModelKind;
use crate::policies::PolicyConfig;

/// Test gap per (user policy, item policy) cell for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyGrid {
    pub dataset: String,
    pub model: ModelKind,
    pub seed: u64,
    pub config_hash: String,
    /// `none` followed by the user policies.
    pub row_labels: Vec<String>,
    /// `none` followed by the item policies.
    pub col_labels: Vec<String>,
    pub base: SummaryRecord,
    /// Test gap after augmentation; `[0][0]` is the base gap, `None` marks skipped or failed cells.
    pub matrix: Vec<Vec<Option<f64>>>,
    pub cells: Vec<CellResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyGridReport {
    pub provenance: RunProvenance,
    pub grids: Vec<PolicyGrid>,
}

fn label<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_else(|| "none".into())
}

/// Runs every grid cell for one trained model.
pub fn policy_grid(config: &ExperimentConfig, data: &PreparedData, run: &ModelRun) -> Result<PolicyGrid> {
    let k = config.augmentation.k;
    let base = SummaryRecord::new(&base_test(data, run, k)?, &run.partition)?;
    let (rows, cols) = (config.grid.rows(), config.grid.cols());
    let cells: Vec<CellResult> = run_cells(data, run, &config.grid.cells(), &config.augmentation)
        .into_iter()
        .map(|c| c.result)
        .collect();
    let mut matrix = vec![vec![None; cols.len()]; rows.len()];
    matrix[0][0] = Some(base.delta);
    for cell in &cells {
        let r = rows.iter().position(|u| *u == cell.user_policy).expect("row of cell");
        let c = cols.iter().position(|i| *i == cell.item_policy).expect("column of cell");
        matrix[r][c] = cell.test.map(|t| t.delta);
    }
    Ok(PolicyGrid {
        dataset: data.name.clone(),
        model: run.model.kind(),
        seed: run.seed,
        config_hash: config.hash(),
        row_labels: rows.into_iter().map(label).collect(),
        col_labels: cols.into_iter().map(label).collect(),
        base,
        matrix,
        cells,
    })
}

/// One policy grid per model and seed.
pub fn run_policy_grid(config: &ExperimentConfig) -> Result<PolicyGridReport> {
    config.validate()?;
    let data = prepare(config)?;
    let mut grids = Vec::new();
    for model in &config.models {
        for &seed in &config.seeds {
            let run = train_model(&data, model, seed, config.augmentation.k)?;
            grids.push(policy_grid(config, &data, &run)?);
        }
    }
    Ok(PolicyGridReport {
        provenance: RunProvenance::new(config),
        grids,
    })
}

fn cell_csv_header() -> Vec<&'static str> {
    vec![
        "dataset",
        "model",
        "seed",
        "user_policy",
        "item_policy",
        "psi_u",
        "psi_i",
        "status",
        "n_candidates",
        "n_added",
        "best_epoch",
        "valid_delta",
        "ndcg",
        "delta",
        "config_hash",
    ]
}

fn cell_csv(dataset: &str, model: ModelKind, seed: u64, hash: &str, c: &CellResult) -> Vec<String> {
    vec![
        dataset.to_string(),
        model.to_string(),
        seed.to_string(),
        label(c.user_policy),
        label(c.item_policy),
        num(c.psi_u),
        num(c.psi_i),
        format!("{:?}", c.status).to_lowercase(),
        c.n_candidates.to_string(),
        c.n_added.to_string(),
        c.best_epoch.to_string(),
        opt(c.valid_delta),
        opt(c.test.map(|t| t.ndcg)),
        opt(c.test.map(|t| t.delta)),
        hash.to_string(),
    ]
}

impl Report for PolicyGridReport {
    fn stem(&self) -> &'static str {
        "policy_grid"
    }

    fn csv_rows(&self) -> (Vec<&'static str>, Vec<Vec<String>>) {
        let rows = self
            .grids
            .iter()
            .flat_map(|g| {
                g.cells
                    .iter()
                    .map(move |c| cell_csv(&g.dataset, g.model, g.seed, &g.config_hash, c))
            })
            .collect();
        (cell_csv_header(), rows)
    }

    fn text(&self) -> String {
        let mut out = format!(
            "policy grid {} | dataset {} | config {}\ntest Delta % after augmentation; none/none is the base\n",
            self.provenance.name,
            self.provenance.dataset,
            &self.provenance.config_hash[..12]
        );
        for g in &self.grids {
            let mut header = vec!["user \\ item"];
            header.extend(g.col_labels.iter().map(String::as_str));
            let rows: Vec<Vec<String>> = g
                .row_labels
                .iter()
                .zip(&g.matrix)
                .map(|(l, r)| std::iter::once(l.clone()).chain(r.iter().map(|v| pct(*v))).collect())
                .collect();
            out += &format!("\n{} seed {}\n{}", g.model, g.seed, table(&header, &rows));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    PsiU,
    PsiI,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub axis: SweepAxis,
    pub psi_u: f64,
    pub psi_i: f64,
    pub status: CellStatus,
    pub n_candidates: usize,
    pub n_added: usize,
    pub valid_delta: Option<f64>,
    pub test: Option<SummaryRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiSweep {
    pub dataset: String,
    pub model: ModelKind,
    pub seed: u64,
    pub config_hash: String,
    pub policy: String,
    pub base: SummaryRecord,
    pub points: Vec<SweepPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiSweepReport {
    pub provenance: RunProvenance,
    pub sweeps: Vec<PsiSweep>,
}

/// Ψ_U values at fixed Ψ_I, then Ψ_I values at fixed Ψ_U.
pub fn sweep_cells(config: &ExperimentConfig) -> Vec<(SweepAxis, PolicyConfig)> {
    let s = &config.sweep;
    let at = |psi_u: f64, psi_i: f64| PolicyConfig {
        psi_u,
        psi_i,
        ..config.grid.policy(Some(s.user_policy), Some(s.item_policy))
    };
    let by_u = s.psi_u_values.iter().map(|&u| (SweepAxis::PsiU, at(u, s.fixed_psi_i)));
    let by_i = s.psi_i_values.iter().map(|&i| (SweepAxis::PsiI, at(s.fixed_psi_u, i)));
    by_u.chain(by_i).collect()
}

pub fn psi_sweep(config: &ExperimentConfig, data: &PreparedData, run: &ModelRun) -> Result<PsiSweep> {
    let k = config.augmentation.k;
    let base = SummaryRecord::new(&base_test(data, run, k)?, &run.partition)?;
    let cells = sweep_cells(config);
    let policies: Vec<PolicyConfig> = cells.iter().map(|(_, p)| p.clone()).collect();
    let results = run_cells(data, run, &policies, &config.augmentation);
    let points = cells
        .iter()
        .zip(results)
        .map(|((axis, p), r)| SweepPoint {
            axis: *axis,
            psi_u: p.psi_u,
            psi_i: p.psi_i,
            status: r.result.status,
            n_candidates: r.result.n_candidates,
            n_added: r.result.n_added,
            valid_delta: r.result.valid_delta,
            test: r.result.test,
        })
        .collect();
    Ok(PsiSweep {
        dataset: data.name.clone(),
        model: run.model.kind(),
        seed: run.seed,
        config_hash: config.hash(),
        policy: policies.first().map(|p| p.label()).unwrap_or_default(),
        base,
        points,
    })
}

/// Sweeps Ψ_U and Ψ_I for the configured user+item cell, per model and seed.
pub fn run_psi_sweep(config: &ExperimentConfig) -> Result<PsiSweepReport> {
    config.validate()?;
    if config.sweep.psi_u_values.is_empty() || config.sweep.psi_i_values.is_empty() {
        return Err(Error::Config("both sweep value lists must be non-empty".into()));
    }
    let data = prepare(config)?;
    let mut sweeps = Vec::new();
    for model in &config.models {
        for &seed in &config.seeds {
            let run = train_model(&data, model, seed, config.augmentation.k)?;
            sweeps.push(psi_sweep(config, &data, &run)?);
        }
    }
    Ok(PsiSweepReport {
        provenance: RunProvenance::new(config),
        sweeps,
    })
}

impl Report for PsiSweepReport {
    fn stem(&self) -> &'static str {
        "psi_sweep"
    }

    fn csv_rows(&self) -> (Vec<&'static str>, Vec<Vec<String>>) {
        let header = vec![
            "dataset",
            "model",
            "seed",
            "policy",
            "axis",
            "psi_u",
            "psi_i",
            "status",
            "n_candidates",
            "n_added",
            "valid_delta",
            "ndcg",
            "delta",
            "base_ndcg",
            "base_delta",
            "config_hash",
        ];
        let mut rows = Vec::new();
        for s in &self.sweeps {
            for p in &s.points {
                rows.push(vec![
                    s.dataset.clone(),
                    s.model.to_string(),
                    s.seed.to_string(),
                    s.policy.clone(),
                    match p.axis {
                        SweepAxis::PsiU => "psi_u".into(),
                        SweepAxis::PsiI => "psi_i".into(),
                    },
                    num(p.psi_u),
                    num(p.psi_i),
                    format!("{:?}", p.status).to_lowercase(),
                    p.n_candidates.to_string(),
                    p.n_added.to_string(),
                    opt(p.valid_delta),
                    opt(p.test.map(|t| t.ndcg)),
                    opt(p.test.map(|t| t.delta)),
                    num(s.base.ndcg),
                    num(s.base.delta),
                    s.config_hash.clone(),
                ]);
            }
        }
        (header, rows)
    }

    fn text(&self) -> String {
        let mut out = format!(
            "psi sweep {} | dataset {} | config {}\n",
            self.provenance.name,
            self.provenance.dataset,
            &self.provenance.config_hash[..12]
        );
        let header = ["vary", "psi_u %", "psi_i %", "|E~|", "added", "NDCG@10 %", "Delta %"];
        for s in &self.sweeps {
            let rows: Vec<Vec<String>> = s
                .points
                .iter()
                .map(|p| {
                    vec![
                        match p.axis {
                            SweepAxis::PsiU => "psi_u".into(),
                            SweepAxis::PsiI => "psi_i".into(),
                        },
                        pct(Some(p.psi_u)),
                        pct(Some(p.psi_i)),
                        p.n_candidates.to_string(),
                        p.n_added.to_string(),
                        pct(p.test.map(|t| t.ndcg)),
                        pct(p.test.map(|t| t.delta)),
                    ]
                })
                .collect();
            out += &format!(
                "\n{} {} seed {} | base NDCG {} Delta {}\n{}",
                s.policy,
                s.model,
                s.seed,
                pct(Some(s.base.ndcg)),
                pct(Some(s.base.delta)),
                table(&header, &rows)
            );
        }
        out
    }
}
