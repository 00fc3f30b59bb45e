use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use debias_core::dataset::{
    generate_synthetic, load_embeddings_for, load_table, split, write_embeddings, write_manifest,
    write_table, FeatureTable, SensitiveAttribute, SynthConfig,
};
use debias_core::downstream::{
    evaluate, CellKey, ClassifierKind, EvalReport, FeatureView, Hyperparameters, LabelledRows, Task,
};
use debias_core::experiment::{
    emit_reports, load_results, oversample_rows, render_table, run_pipeline, write_json,
    AttributeChoice, ExperimentConfig, InputSource, ReportFormat,
};
use debias_core::fairness::audit;
use debias_core::numerics::RandomStream;
use debias_core::preprocess::{
    select_sensitive_features, smote, SensitiveProfile, SMOTE_DEFAULT_K,
};
use debias_core::trainer::{
    embed, load_checkpoint, save_checkpoint, train, CheckpointMeta, EmbeddingVariant, TrainConfig,
};
use debias_core::Error;

#[derive(Debug, Parser)]
#[command(
    name = "debias-clr",
    version,
    about = "Counterfactual contrastive debiasing of embedding tables"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic biased table.
    Synth(SynthArgs),
    /// Rank features by mutual information with an attribute and write the profile.
    Select(SelectArgs),
    /// Fit the contrastive encoder and write a checkpoint.
    Train(TrainArgs),
    /// Map a table through a checkpoint's representation layer.
    Embed(EmbedArgs),
    /// SC-WEAT effect sizes of a table or its embeddings.
    Audit(AuditArgs),
    /// Downstream classifiers on a split of a table or its embeddings.
    Eval(EvalArgs),
    /// The full protocol: every attribute, fraction and variant.
    Run(RunArgs),
    /// Re-render text reports from a results file.
    Report(ReportArgs),
}

fn parse_variant(s: &str) -> std::result::Result<EmbeddingVariant, String> {
    EmbeddingVariant::ALL
        .into_iter()
        .find(|v| v.name() == s)
        .ok_or_else(|| format!("unknown variant `{s}` (raw, debias_clr, debias_clr_r)"))
}

fn parse_classifier(s: &str) -> std::result::Result<ClassifierKind, String> {
    ClassifierKind::ALL
        .into_iter()
        .find(|k| k.name() == s || k.label().eq_ignore_ascii_case(s))
        .ok_or_else(|| format!("unknown classifier `{s}` (knn, logistic_regression, linear_svm, mlp, random_forest)"))
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// TOML file with generator settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    n_records: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    bias_shift: Option<f64>,
    /// Table file to write; a `.manifest.json` companion is written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    attribute: SensitiveAttribute,
    /// SMOTE-balance the attribute classes before ranking.
    #[arg(long)]
    balance: bool,
    #[arg(long, default_value_t = SMOTE_DEFAULT_K)]
    smote_k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    profile: PathBuf,
    /// TOML file with training settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    temperature: Option<f64>,
    /// Train the cutout-regularized variant.
    #[arg(long)]
    cutout: bool,
    /// SMOTE-balance the profile's attribute before training.
    #[arg(long)]
    balance: bool,
    #[arg(long, default_value_t = SMOTE_DEFAULT_K)]
    smote_k: usize,
    #[arg(long)]
    out: PathBuf,
    /// Optional JSON training report.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[arg(long)]
    input: PathBuf,
    /// Embedding file from `embed`; the raw features are audited without it.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    attribute: SensitiveAttribute,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TaskArg {
    Los,
    Probe,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Attribute the split is stratified on (and the probe target).
    #[arg(long)]
    attribute: SensitiveAttribute,
    #[arg(long, value_enum, default_value_t = TaskArg::Los)]
    task: TaskArg,
    #[arg(long, default_value_t = 0.8)]
    fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', value_parser = parse_classifier)]
    classifiers: Option<Vec<ClassifierKind>>,
    #[arg(long, default_value_t = SMOTE_DEFAULT_K)]
    smote_k: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML experiment file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Table file to use instead of the synthetic generator.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    attribute: Option<AttributeChoice>,
    #[arg(long, value_delimiter = ',')]
    fractions: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', value_parser = parse_variant)]
    variants: Option<Vec<EmbeddingVariant>>,
    #[arg(long, value_delimiter = ',', value_parser = parse_classifier)]
    classifiers: Option<Vec<ClassifierKind>>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    smote_k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// `results_seed<S>.json` from a previous run.
    #[arg(long)]
    results: PathBuf,
    /// Defaults to the results file's directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Also rewrite the structured files.
    #[arg(long)]
    structured: bool,
}

pub fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Select(a) => select(a),
        Command::Train(a) => train_cmd(a),
        Command::Embed(a) => embed_cmd(a),
        Command::Audit(a) => audit_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Run(a) => run(a),
        Command::Report(a) => report(a),
    }
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(Error::from)
        .with_context(|| format!("reading {}", path.display()))?;
    Ok(toml::from_str(&text).map_err(Error::from)?)
}

fn load(path: &Path) -> Result<FeatureTable> {
    load_table(path).with_context(|| format!("loading table {}", path.display()))
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut p = out.as_os_str().to_owned();
    p.push(".manifest.json");
    PathBuf::from(p)
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut cfg: SynthConfig = match &a.config {
        Some(p) => read_toml(p)?,
        None => SynthConfig::default(),
    };
    cfg.seed = a.seed;
    if let Some(n) = a.n_records {
        cfg.n_records = n;
    }
    if let Some(d) = a.dim {
        cfg.dim = d;
    }
    if let Some(b) = a.bias_shift {
        cfg.bias_shift = b;
    }
    let table = generate_synthetic(&cfg)?;
    write_table(&table, &a.out)?;
    write_manifest(&table, manifest_path(&a.out))?;
    println!(
        "wrote {} records of dimension {} to {}",
        table.len(),
        table.dim(),
        a.out.display()
    );
    Ok(())
}

fn balanced(
    table: FeatureTable,
    attribute: SensitiveAttribute,
    on: bool,
    k: usize,
    seed: u64,
) -> Result<FeatureTable> {
    if !on {
        return Ok(table);
    }
    Ok(smote(&table, attribute, k, &mut RandomStream::new(seed))?)
}

fn select(a: SelectArgs) -> Result<()> {
    let table = balanced(load(&a.input)?, a.attribute, a.balance, a.smote_k, a.seed)?;
    let profile = select_sensitive_features(&table, a.attribute)?;
    profile.save(&a.out)?;
    println!(
        "selected {} of {} features for {} -> {}",
        profile.len(),
        profile.dim,
        a.attribute,
        a.out.display()
    );
    Ok(())
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let profile = SensitiveProfile::load(&a.profile)?;
    let table = balanced(
        load(&a.input)?,
        profile.attribute,
        a.balance,
        a.smote_k,
        a.seed.unwrap_or(0),
    )?;
    let mut cfg: TrainConfig = match &a.config {
        Some(p) => read_toml(p)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    if let Some(b) = a.batch_size {
        cfg.batch_size = b;
    }
    if let Some(t) = a.temperature {
        cfg.temperature = t;
    }
    cfg.cutout_enabled |= a.cutout;
    let (params, report) = train(&table, &profile, &cfg)?;
    save_checkpoint(
        &a.out,
        &params,
        &CheckpointMeta {
            seed: cfg.seed,
            attribute: Some(profile.attribute),
            config: Some(cfg),
        },
    )?;
    if let Some(path) = &a.report {
        write_json(path, &report)?;
    }
    println!(
        "trained {} epochs, final loss {:.6}, {:.1}s -> {}",
        report.epoch_losses.len(),
        report.final_loss,
        report.wall_time_secs,
        a.out.display()
    );
    Ok(())
}

fn embed_cmd(a: EmbedArgs) -> Result<()> {
    let table = load(&a.input)?;
    let (params, _) = load_checkpoint(&a.checkpoint)?;
    let h = embed(&params, &table)?;
    write_embeddings(&table.record_ids(), h.view(), &a.out)?;
    println!(
        "wrote {} embeddings of width {} to {}",
        h.nrows(),
        h.ncols(),
        a.out.display()
    );
    Ok(())
}

fn audit_cmd(a: AuditArgs) -> Result<()> {
    let table = load(&a.input)?;
    let (variant, matrix) = match &a.embeddings {
        Some(p) => (EmbeddingVariant::DebiasClr, load_embeddings_for(&table, p)?),
        None => (EmbeddingVariant::Raw, table.feature_matrix()),
    };
    let report = audit(&table, &[(variant, matrix.view())], a.attribute, 1.0);
    let rows: Vec<Vec<String>> = report
        .cells
        .iter()
        .map(|c| {
            vec![
                c.block.label().to_string(),
                c.effect_size.map_or_else(
                    || c.error.clone().unwrap_or_default(),
                    |d| format!("{d:.4}"),
                ),
            ]
        })
        .collect();
    let title = format!("SC-WEAT effect sizes for {}", a.attribute);
    print!(
        "{}",
        render_table(&title, &["Targets".into(), "d".into()], &rows)
    );
    if let Some(path) = &a.out {
        write_json(path, &report)?;
    }
    Ok(())
}

fn eval_cmd(a: EvalArgs) -> Result<()> {
    let table = load(&a.input)?;
    let root = RandomStream::new(a.seed);
    let (train_t, test_t) = split(&table, a.fraction, a.attribute, &mut root.fork(1))?;
    let (variant, x_train, x_test) = match &a.embeddings {
        Some(p) => (
            EmbeddingVariant::DebiasClr,
            load_embeddings_for(&train_t, p)?,
            load_embeddings_for(&test_t, p)?,
        ),
        None => (
            EmbeddingVariant::Raw,
            train_t.feature_matrix(),
            test_t.feature_matrix(),
        ),
    };
    let task = match a.task {
        TaskArg::Los => Task::LengthOfStay,
        TaskArg::Probe => Task::SensitiveProbe(a.attribute),
    };
    let labels = |t: &FeatureTable, attr: SensitiveAttribute| -> Vec<bool> {
        match task {
            Task::SensitiveProbe(_) => t.classes(attr).iter().map(|c| c.is_first()).collect(),
            _ => t.records().iter().map(|r| r.is_long_stay()).collect(),
        }
    };
    let ids = |t: &FeatureTable| {
        t.record_ids()
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
    };
    let (train_ids, test_ids) = (ids(&train_t), ids(&test_t));
    let y_test = labels(&test_t, a.attribute);
    let (ids_b, x_b, y_b) = oversample_rows(
        &train_ids,
        x_train.view(),
        &labels(&train_t, a.attribute),
        a.smote_k,
        &mut root.fork(2),
    )?;
    let kinds = a
        .classifiers
        .unwrap_or_else(|| ClassifierKind::ALL.to_vec());
    let key = CellKey {
        pipeline: a.attribute,
        fraction: a.fraction,
        task,
        variant,
        view: FeatureView::All,
    };
    let report: EvalReport = evaluate(
        key,
        &kinds,
        LabelledRows {
            ids: &ids_b,
            features: x_b.view(),
            labels: &y_b,
        },
        LabelledRows {
            ids: &test_ids,
            features: x_test.view(),
            labels: &y_test,
        },
        &Hyperparameters::default(),
        &root.fork(3),
    )?;
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
    let rows: Vec<Vec<String>> = report
        .cells
        .iter()
        .map(|c| match &c.error {
            Some(e) => vec![
                c.classifier.label().to_string(),
                "err".into(),
                "err".into(),
                e.clone(),
            ],
            None => vec![
                c.classifier.label().to_string(),
                fmt(c.accuracy),
                fmt(c.mcc),
                fmt(c.kappa),
            ],
        })
        .collect();
    let header = ["Classifier", "A", "MCC", "K"].map(String::from);
    print!(
        "{}",
        render_table(&format!("{task}, {variant}"), &header, &rows)
    );
    if let Some(path) = &a.out {
        write_json(path, &report)?;
    }
    Ok(())
}

fn run(a: RunArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => {
            // `--seed` is mandatory, so a config file may leave it out.
            let mut table: toml::Table = read_toml(p)?;
            table.insert("seed".into(), toml::Value::Integer(0));
            table.try_into::<ExperimentConfig>().map_err(Error::from)?
        }
        None => ExperimentConfig::new(a.seed, "out"),
    };
    cfg.seed = a.seed;
    if let Some(d) = a.output_dir {
        cfg.output_dir = d;
    }
    if let Some(p) = a.input {
        cfg.input = InputSource::File { path: p };
    }
    if let Some(x) = a.attribute {
        cfg.attribute = x;
    }
    if let Some(f) = a.fractions {
        cfg.fractions = f;
    }
    if let Some(v) = a.variants {
        cfg.variants = v;
    }
    if let Some(c) = a.classifiers {
        cfg.classifiers = c;
    }
    if let Some(e) = a.epochs {
        cfg.train.epochs = e;
    }
    if let Some(k) = a.smote_k {
        cfg.smote_k = k;
    }
    let results = run_pipeline(&cfg)?;
    for f in &results.failures {
        eprintln!(
            "warning: {} {} fraction {} {}: {}",
            f.attribute,
            f.variant.map_or("-", |v| v.name()),
            f.fraction,
            f.stage,
            f.message
        );
    }
    println!(
        "{} effect sizes, {} evaluation cells, {} encoders, {} failures; reports in {}",
        results.effect_sizes.cells.len(),
        results.evaluation.cells.len(),
        results.training.len(),
        results.failures.len(),
        cfg.output_dir.join("reports").display()
    );
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let results =
        load_results(&a.results).with_context(|| format!("reading {}", a.results.display()))?;
    let dir = match a.out_dir {
        Some(d) => d,
        None => a
            .results
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default(),
    };
    let mut formats = vec![ReportFormat::Text];
    if a.structured {
        formats.push(ReportFormat::Structured);
    }
    for path in emit_reports(&results, &dir, &formats)? {
        println!("{}", path.display());
    }
    Ok(())
}
