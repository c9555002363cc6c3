use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fairgcf::augmenter::{augment, export_augmented, AugmentationManifest, EDGES_FILE};
use fairgcf::data::export_split;
use fairgcf::experiments::{
    emit_report, model_run, prepare, run_benchmark, run_policy_grid, run_psi_sweep, run_transfer, train_model,
    BenchmarkReport, ExperimentConfig, ModelRun, PolicyGridReport, PreparedData, PsiSweepReport, Report,
    ReportFormat, TransferReport,
};
use fairgcf::models::{load_checkpoint, save_checkpoint, ModelKind};
use fairgcf::policies::{
    build_candidates, policy_overlap, sample, ItemPolicy, NamedSample, PolicyConfig, UserPolicy,
};
use fairgcf::{Error, Result};

/// Fairness-aware edge augmentation for graph recommenders.
#[derive(Parser)]
#[command(name = "fairgcf", version)]
struct Cli {
    /// TOML experiment configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Replaces the configured seed list with this single seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; all cores when omitted.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, default_value = "info")]
    log_level: log::LevelFilter,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load, filter and split the dataset; write the split to `<out>/split`.
    Ingest,
    /// Train the configured models and save checkpoints under `<out>/models`.
    Train,
    /// Run one policy cell on one model and export the augmented graph.
    Augment(AugmentArgs),
    /// Best policy cell per model, Base vs Aug on test.
    Benchmark,
    /// Test gap for every user x item policy combination.
    PolicyGrid,
    /// Vary Ψ_U and Ψ_I for the configured sweep cell.
    PsiSweep,
    /// Re-train a non-augmentable model on an exported augmented graph.
    Transfer(TransferArgs),
    /// Jaccard overlap between the samples of every policy.
    Overlap,
    /// Re-render a JSON report as text and CSV.
    Report(ReportArgs),
}

#[derive(Args)]
struct AugmentArgs {
    /// Policy cell such as `ZN`, `PR` or `FR+PR`.
    #[arg(long, default_value = "ZN")]
    policy: String,
    /// Model kind; the first configured model when omitted.
    #[arg(long)]
    model: Option<ModelKind>,
    /// Use a saved checkpoint instead of training.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    psi_u: Option<f64>,
    #[arg(long)]
    psi_i: Option<f64>,
}

#[derive(Args)]
struct TransferArgs {
    /// Directory holding `manifest.json` and the added edges.
    #[arg(long)]
    manifest: PathBuf,
    /// `svdgcn_s` (weak) or `mf_bpr` (strong).
    #[arg(long)]
    target: ModelKind,
}

#[derive(Args)]
struct ReportArgs {
    /// A JSON report written by benchmark, policy-grid, psi-sweep or transfer.
    input: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::new()
        .filter_level(cli.log_level)
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seeds = vec![seed];
    }
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    if let Command::Report(args) = &cli.command {
        return rerender(&args.input);
    }
    let config = load_config(&cli)?;
    let out = config.output_dir.clone();
    match &cli.command {
        Command::Ingest => {
            let data = prepare(&config)?;
            let dir = out.join("split");
            export_split(&data.split, &dir)?;
            println!(
                "{} users, {} items; train {} / valid {} / test {} edges -> {}",
                data.split.n_users(),
                data.split.n_items(),
                data.split.train.n_edges(),
                data.split.valid.n_edges(),
                data.split.test.n_edges(),
                dir.display()
            );
        }
        Command::Train => {
            let data = prepare(&config)?;
            fs::create_dir_all(out.join("models"))?;
            for m in &config.models {
                for &seed in &config.seeds {
                    let run = train_model(&data, m, seed, config.augmentation.k)?;
                    let path = out.join("models").join(format!("{}_seed{seed}.ckpt", m.kind));
                    save_checkpoint(&run.model, &path)?;
                    println!(
                        "{} seed {seed}: best epoch {}, valid delta {:.5} -> {}",
                        m.kind,
                        run.model.best_epoch,
                        run.valid_delta()?,
                        path.display()
                    );
                }
            }
        }
        Command::Augment(args) => augment_cell(&config, args)?,
        Command::Benchmark => {
            let output = run_benchmark(&config)?;
            for a in &output.augmentations {
                a.write(&out)?;
            }
            finish(&output.report, &out)?;
        }
        Command::PolicyGrid => finish(&run_policy_grid(&config)?, &out)?,
        Command::PsiSweep => finish(&run_psi_sweep(&config)?, &out)?,
        Command::Transfer(args) => finish(&run_transfer(&config, &args.manifest, args.target)?, &out)?,
        Command::Overlap => overlap(&config)?,
        Command::Report(_) => unreachable!(),
    }
    Ok(())
}

fn finish<R: Report>(report: &R, out: &Path) -> Result<()> {
    for path in emit_report(report, out, &ReportFormat::ALL)? {
        log::info!("wrote {}", path.display());
    }
    print!("{}", report.text());
    Ok(())
}

fn rerender(input: &Path) -> Result<()> {
    let text = fs::read_to_string(input)?;
    let dir = input.parent().unwrap_or(Path::new("."));
    let formats = [ReportFormat::Text, ReportFormat::Csv];
    macro_rules! try_as {
        ($($t:ty),*) => {$(
            if let Ok(r) = serde_json::from_str::<$t>(&text) {
                emit_report(&r, dir, &formats)?;
                print!("{}", r.text());
                return Ok(());
            }
        )*};
    }
    try_as!(BenchmarkReport, PolicyGridReport, PsiSweepReport, TransferReport);
    Err(Error::Config(format!("{} is not a known report", input.display())))
}

fn parse_cell(label: &str) -> Result<(Option<UserPolicy>, Option<ItemPolicy>)> {
    let (mut user, mut item) = (None, None);
    for part in label.split('+').map(str::trim) {
        if let Ok(u) = part.parse::<UserPolicy>() {
            user = Some(u);
        } else {
            item = Some(part.parse::<ItemPolicy>()?);
        }
    }
    Ok((user, item))
}

fn pick_run(config: &ExperimentConfig, data: &PreparedData, kind: Option<ModelKind>, ckpt: Option<&Path>) -> Result<ModelRun> {
    let k = config.augmentation.k;
    if let Some(path) = ckpt {
        return model_run(data, load_checkpoint(path)?, k);
    }
    let model = match kind {
        Some(kind) => config
            .models
            .iter()
            .find(|m| m.kind == kind)
            .cloned()
            .ok_or_else(|| Error::Config(format!("{kind} is not among the configured models")))?,
        None => config.models[0].clone(),
    };
    train_model(data, &model, config.seeds[0], k)
}

fn augment_cell(config: &ExperimentConfig, args: &AugmentArgs) -> Result<()> {
    let data = prepare(config)?;
    let run = pick_run(config, &data, args.model, args.checkpoint.as_deref())?;
    let (user, item) = parse_cell(&args.policy)?;
    let policy = PolicyConfig {
        psi_u: args.psi_u.unwrap_or(config.grid.psi_u),
        psi_i: args.psi_i.unwrap_or(config.grid.psi_i),
        ..config.grid.policy(user, item)
    };
    policy.validate()?;
    let train = &data.split.train;
    let sampled = sample(&policy, train, &run.partition, Some(&run.valid_utilities), run.seed)?;
    let scenario = policy.scenario().expect("validated policy has a scenario");
    let candidates = build_candidates(train, &run.partition, &sampled, scenario)?;
    let result = augment(&run.model, data.split.train_valid(), &run.partition, &candidates.edges, &config.augmentation)?;
    for w in &result.warnings {
        log::warn!("{w}");
    }
    let dir = config
        .output_dir
        .join("augmented")
        .join(format!("{}_{}_seed{}", run.model.kind(), policy.label().replace('+', "-"), run.seed));
    let manifest = AugmentationManifest {
        model: run.model.kind().to_string(),
        policy: policy.label(),
        psi_u: policy.psi_u,
        psi_i: policy.psi_i,
        scenario: scenario.as_str().into(),
        seed: run.seed,
        best_epoch: result.best_epoch,
        n_added: result.added_edges.len(),
        edges_file: EDGES_FILE.into(),
    };
    export_augmented(&dir, train, &result.added_edges, &manifest)?;
    fs::write(dir.join("trace.csv"), result.trace.to_csv())?;
    println!(
        "{} {}: {} candidates, {} added at epoch {} ({:?}); valid delta {:.5} -> {:.5}; -> {}",
        manifest.model,
        manifest.policy,
        candidates.len(),
        manifest.n_added,
        result.best_epoch,
        result.stop_reason,
        result.base_delta,
        result.best_delta,
        dir.display()
    );
    Ok(())
}

fn overlap(config: &ExperimentConfig) -> Result<()> {
    let data = prepare(config)?;
    let run = pick_run(config, &data, None, None)?;
    let train = &data.split.train;
    let mut users = Vec::new();
    for p in &config.grid.user_policies {
        let policy = config.grid.policy(Some(*p), None);
        match sample(&policy, train, &run.partition, Some(&run.valid_utilities), run.seed) {
            Ok(s) => users.push(NamedSample::Users(p.to_string(), s.users.unwrap_or_default().into_iter().collect())),
            Err(e) => log::warn!("{p} skipped: {e}"),
        }
    }
    let mut items = Vec::new();
    for p in &config.grid.item_policies {
        let policy = config.grid.policy(None, Some(*p));
        match sample(&policy, train, &run.partition, Some(&run.valid_utilities), run.seed) {
            Ok(s) => items.push(NamedSample::Items(p.to_string(), s.items.unwrap_or_default().into_iter().collect())),
            Err(e) => log::warn!("{p} skipped: {e}"),
        }
    }
    fs::create_dir_all(&config.output_dir)?;
    for (name, samples) in [("overlap_users.csv", users), ("overlap_items.csv", items)] {
        let matrix = policy_overlap(&samples)?;
        let csv = matrix.to_csv();
        fs::write(config.output_dir.join(name), &csv)?;
        print!("{name}\n{csv}\n");
    }
    Ok(())
}
