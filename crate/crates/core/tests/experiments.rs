mod common;

use fairgcf::augmenter::{export_augmented, AugmentationManifest};
use fairgcf::experiments::{
    emit_report, prepare, run_benchmark, run_policy_grid, run_transfer, ExperimentConfig, Report, ReportFormat,
};
use fairgcf::models::{ModelConfig, ModelKind};
use fairgcf::Error;

use common::checks;

#[test]
fn reruns_are_byte_identical() {
    println!("{}", checks::runs_are_deterministic().unwrap());
}

#[test]
fn psi_sweep_has_ten_monotone_points() {
    println!("{}", checks::psi_sweep_is_complete().unwrap());
}

#[test]
fn config_round_trips_and_hashes() {
    let config = checks::small_config();
    let text = config.to_toml().unwrap();
    let back = ExperimentConfig::from_toml_str(&text).unwrap();
    assert_eq!(back, config);
    assert_eq!(back.hash(), config.hash());
    assert_eq!(config.hash().len(), 64);

    let mut other = config.clone();
    other.seeds = vec![1];
    assert_ne!(other.hash(), config.hash());

    assert!(ExperimentConfig::from_toml_str("no_such_field = 1\n").is_err());
    let mut bad = config.clone();
    bad.models = vec![ModelConfig {
        kind: ModelKind::MfBpr,
        ..ModelConfig::default()
    }];
    assert!(bad.validate().is_err());
}

#[test]
fn policy_grid_covers_every_cell() {
    let mut config = checks::small_config();
    config.models.truncate(1);
    config.grid = Default::default();
    let report = run_policy_grid(&config).unwrap();
    let grid = &report.grids[0];
    assert_eq!(grid.row_labels, ["none", "ZN", "LD", "FR", "SP", "IR"]);
    assert_eq!(grid.col_labels, ["none", "IP", "IT", "PR"]);
    assert_eq!(grid.matrix.len(), 6);
    assert!(grid.matrix.iter().all(|r| r.len() == 4));
    assert_eq!(grid.matrix[0][0], Some(grid.base.delta));
    assert_eq!(grid.cells.len(), 23);
}

#[test]
fn reports_are_rectangular_and_written() {
    let config = checks::small_config();
    let out = run_benchmark(&config).unwrap();
    assert_eq!(out.report.rows.len(), 2);
    let (header, rows) = out.report.csv_rows();
    assert!(rows.iter().all(|r| r.len() == header.len()));
    let dir = tempfile::tempdir().unwrap();
    let written = emit_report(&out.report, dir.path(), &ReportFormat::ALL).unwrap();
    assert_eq!(written.len(), 3);
    let csv = std::fs::read_to_string(dir.path().join("benchmark.csv")).unwrap();
    assert_eq!(csv.lines().count(), rows.len() + 1);
    for a in &out.augmentations {
        a.write(dir.path()).unwrap();
    }
}

#[test]
fn transfer_refuses_graph_models() {
    let config = checks::small_config();
    let dir = tempfile::tempdir().unwrap();
    let err = run_transfer(&config, dir.path(), ModelKind::LightGcn).unwrap_err();
    assert!(matches!(err, Error::Contract(_)), "{err}");
}

#[test]
fn empty_augmentation_transfers_to_no_change() {
    let mut config = checks::small_config();
    config.transfer_models = vec![ModelConfig {
        kind: ModelKind::MfBpr,
        embedding_size: 8,
        train_epochs: 5,
        learning_rate: 0.01,
        ..ModelConfig::default()
    }];
    let data = prepare(&config).unwrap();
    let manifest = AugmentationManifest {
        model: "lightgcn".into(),
        policy: "ZN".into(),
        psi_u: 0.35,
        psi_i: 0.2,
        scenario: "U".into(),
        seed: 2,
        best_epoch: 0,
        n_added: 0,
        edges_file: String::new(),
    };
    let dir = tempfile::tempdir().unwrap();
    export_augmented(dir.path(), &data.split.train, &[], &manifest).unwrap();
    let report = run_transfer(&config, dir.path(), ModelKind::MfBpr).unwrap();
    assert_eq!(report.seed, 2);
    assert_eq!(report.base, report.aug);
    assert_eq!(report.ndcg_change, 0.0);
    assert_eq!(report.p_value, None);
}
