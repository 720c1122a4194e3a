//! Command-line front end: `generate`, `train`, `eval`, `analyze`, `sweep`.
//!
//! Every command resolves its settings from an optional `--config` file,
//! then `--set key=value` pairs, then dedicated flags (later wins), and
//! writes a `<command>.manifest.txt` with the resolved settings next to its
//! outputs. All files are written atomically.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{
    parse_list, synth_config, synth_config_entries, train_config, train_config_entries, ConfigError,
    KeyValues, RUN_KEYS, SYNTH_KEYS, TRAIN_KEYS,
};
use crate::embeddings::{EmbeddingFile, EmbeddingFileError};
use crate::eval::{
    link_prediction_report, node_classification_report, write_report, EvalError, MetricRow,
};
use crate::fsio::write_atomic;
use crate::graph::{
    dataset_view_files, jaccard_consistency, load_dataset, save_dataset, GraphError, MultiViewNetwork, LABELS_FILE,
    NODES_FILE,
};
use crate::manifest::RunManifest;
use crate::synth::{generate, SynthError};
use crate::tensor::Tensor;
use crate::trainer::{lambda_dispersion, train_with_observer, EpochRecord, TrainConfig, TrainError, TrainOutput};

pub const EMBEDDINGS_FILE: &str = "embeddings.txt";
pub const HISTORY_FILE: &str = "loss_history.tsv";
pub const METRICS_FILE: &str = "metrics.tsv";
pub const JACCARD_FILE: &str = "jaccard.tsv";
pub const SWEEP_FILE: &str = "sweep.tsv";

pub const DEFAULT_TRAIN_RATIOS: [f64; 3] = [0.1, 0.3, 0.5];
pub const DEFAULT_REPEATS: u64 = 10;

/// Hyper-parameters `sweep` can vary.
pub const GRID_PARAMS: [&str; 4] = ["alpha", "beta", "gamma", "dim"];
const GRID_KEYS: [&str; 4] = ["grid.alpha", "grid.beta", "grid.gamma", "grid.dim"];

pub fn manifest_file(command: &str) -> String {
    format!("{command}.manifest.txt")
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Embeddings(#[from] EmbeddingFileError),
}

impl CliError {
    /// Machine-readable category printed as `error[<category>]`.
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) | CliError::Synth(SynthError::Config(_)) => "config",
            CliError::Io { .. } | CliError::Graph(GraphError::FileError { .. }) => "io",
            CliError::Graph(GraphError::ParseError { .. }) => "parse",
            CliError::Graph(_) | CliError::Synth(_) => "graph",
            CliError::Train(TrainError::NumericalOverflow { .. }) => "numerical",
            CliError::Train(_) => "train",
            CliError::Eval(_) => "eval",
            CliError::Embeddings(_) => "embeddings",
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_owned(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(name = "rgae", version, about = "Multi-view network embedding with regularized graph auto-encoders")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic planted-community dataset
    Generate(GenerateArgs),
    /// Train on a dataset and write embeddings, loss history and manifest
    Train(TrainArgs),
    /// Node classification or link prediction on an embeddings file
    Eval(EvalArgs),
    /// Pairwise Jaccard consistency of a dataset's views
    Analyze(AnalyzeArgs),
    /// One-at-a-time hyper-parameter sweep
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// key = value settings file (a manifest works too)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Extra `key=value` overrides
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct TrainFlags {
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Total embedding width D
    #[arg(long)]
    pub dim: Option<usize>,
    /// Hidden layer widths, comma separated
    #[arg(long)]
    pub layers: Option<String>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Loss term to remove: none, sim, dif or both
    #[arg(long)]
    pub ablate: Option<String>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dataset directory to create
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dataset directory
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub train: TrainFlags,
    /// View to leave out of training (the link prediction target)
    #[arg(long)]
    pub target_view: Option<usize>,
    /// Print every epoch's losses to stderr
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Dataset directory the embeddings were trained on
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Training ratios, comma separated
    #[arg(long)]
    pub train_ratio: Option<String>,
    /// Evaluate link prediction on this view instead of node classification
    #[arg(long)]
    pub target_view: Option<usize>,
    /// Repetitions, seeded 0..N
    #[arg(long)]
    pub repeats: Option<u64>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Directory for the Jaccard table; printed to stdout only if omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub train: TrainFlags,
    /// Grid for one parameter, e.g. `gamma=0.05,5,500`; repeatable
    #[arg(long = "grid", value_name = "PARAM=V1,V2,..")]
    pub grid: Vec<String>,
    /// Training ratio of the node classification score
    #[arg(long)]
    pub train_ratio: Option<f64>,
    #[arg(long)]
    pub target_view: Option<usize>,
    #[arg(long)]
    pub repeats: Option<u64>,
}

/// Config file, then `--set` pairs.
fn base_settings(common: &Common) -> Result<KeyValues> {
    let mut kv = match &common.config {
        Some(path) => KeyValues::load(path)?,
        None => KeyValues::new(),
    };
    for pair in &common.set {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {pair:?}")))?;
        kv.set(k.trim(), v.trim());
    }
    Ok(kv)
}

fn apply_train_flags(kv: &mut KeyValues, f: &TrainFlags) {
    let mut put = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            kv.set(k, v);
        }
    };
    put("alpha", f.alpha.map(|x| x.to_string()));
    put("beta", f.beta.map(|x| x.to_string()));
    put("gamma", f.gamma.map(|x| x.to_string()));
    put("dim", f.dim.map(|x| x.to_string()));
    put("layers", f.layers.clone());
    put("lr", f.lr.map(|x| x.to_string()));
    put("epochs", f.epochs.map(|x| x.to_string()));
    put("seed", f.seed.map(|x| x.to_string()));
    put("ablate", f.ablate.clone());
}

fn data_dir(kv: &mut KeyValues, flag: &Option<PathBuf>) -> Result<PathBuf> {
    if let Some(p) = flag {
        kv.set("data", p.display());
    }
    kv.get("data")
        .map(PathBuf::from)
        .ok_or_else(|| CliError::Usage("no dataset given; pass --data or set `data` in the config".into()))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Dataset files by role, for manifest digests.
fn dataset_inputs(dir: &Path) -> Vec<(String, PathBuf)> {
    let mut out = Vec::new();
    let nodes = dir.join(NODES_FILE);
    if nodes.is_file() {
        out.push(("nodes".to_owned(), nodes));
    }
    for (i, path) in dataset_view_files(dir).into_iter().enumerate() {
        out.push((format!("view_{i}"), path));
    }
    let labels = dir.join(LABELS_FILE);
    if labels.is_file() {
        out.push(("labels".to_owned(), labels));
    }
    out
}

fn record_inputs(manifest: &mut RunManifest, inputs: &[(String, PathBuf)]) -> Result<()> {
    for (role, path) in inputs {
        manifest.add_input(role, path).map_err(io_err(path))?;
    }
    Ok(())
}

/// Warns when a manifest passed as config recorded different input digests.
fn warn_on_changed_inputs(kv: &KeyValues, inputs: &[(String, PathBuf)]) {
    for (role, path) in inputs {
        if let Some(recorded) = kv.get(&format!("input.{role}.sha256")) {
            match crate::fsio::sha256_file(path) {
                Ok(d) if d == recorded => {}
                _ => log::warn!("input {role} ({}) differs from the manifest", path.display()),
            }
        }
    }
}

fn load_network(dir: &Path) -> Result<MultiViewNetwork> {
    Ok(load_dataset(dir)?)
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let mut kv = base_settings(&args.common)?;
    if let Some(seed) = args.seed {
        kv.set("seed", seed);
    }
    kv.check_keys(&[&SYNTH_KEYS])?;
    let cfg = synth_config(&kv)?;
    let net = generate(&cfg)?;
    save_dataset(&net, &args.out)?;

    let mut manifest = RunManifest::new("generate", synth_config_entries(&cfg));
    for (role, path) in dataset_inputs(&args.out) {
        manifest.add_output(&role, &path);
    }
    manifest
        .save(&args.out.join(manifest_file("generate")))
        .map_err(io_err(&args.out))?;
    Ok(())
}

/// Settings `train` resolves from config, overrides and flags.
pub fn resolve_train(args: &TrainArgs) -> Result<(KeyValues, TrainConfig, PathBuf)> {
    let mut kv = base_settings(&args.common)?;
    apply_train_flags(&mut kv, &args.train);
    if let Some(v) = args.target_view {
        kv.set("target_view", v);
    }
    let data = data_dir(&mut kv, &args.data)?;
    kv.check_keys(&[&TRAIN_KEYS, &RUN_KEYS])?;
    let cfg = train_config(&kv)?;
    Ok((kv, cfg, data))
}

fn training_network(net: &MultiViewNetwork, target_view: Option<usize>) -> Result<MultiViewNetwork> {
    Ok(match target_view {
        Some(v) => net.without_view(v)?,
        None => net.clone(),
    })
}

pub fn cmd_train(args: &TrainArgs) -> Result<TrainOutput> {
    let (kv, cfg, data) = resolve_train(args)?;
    let target_view: Option<usize> = kv.parsed("target_view")?;
    let inputs = dataset_inputs(&data);
    warn_on_changed_inputs(&kv, &inputs);
    let net = load_network(&data)?;
    let train_net = training_network(&net, target_view)?;

    let verbose = args.verbose;
    if verbose {
        eprintln!("{}", EpochRecord::TSV_HEADER);
    }
    let out = train_with_observer(&train_net, &cfg, |r| {
        if verbose {
            eprintln!("{r}");
        }
    })?;

    create_dir(&args.out)?;
    let emb_path = args.out.join(EMBEDDINGS_FILE);
    let file = EmbeddingFile::new(
        net.node_names(),
        out.final_embedding().clone(),
        out.embeddings.num_views(),
        out.embeddings.block_dim(),
    )?;
    file.save(&emb_path)?;

    let hist_path = args.out.join(HISTORY_FILE);
    write_atomic(&hist_path, |w| {
        writeln!(w, "{}", EpochRecord::TSV_HEADER)?;
        for r in &out.history {
            writeln!(w, "{r}")?;
        }
        Ok(())
    })
    .map_err(io_err(&hist_path))?;

    let mut resolved = train_config_entries(&cfg);
    resolved.set("data", data.display());
    if let Some(v) = target_view {
        resolved.set("target_view", v);
    }
    let mut manifest = RunManifest::new("train", resolved);
    record_inputs(&mut manifest, &inputs)?;
    manifest.add_output("embeddings", &emb_path);
    manifest.add_output("loss_history", &hist_path);
    manifest
        .save(&args.out.join(manifest_file("train")))
        .map_err(io_err(&args.out))?;
    Ok(out)
}

/// Loads an embeddings file and checks its node order against the dataset.
fn aligned_embeddings(path: &Path, net: &MultiViewNetwork) -> Result<Tensor> {
    let file = EmbeddingFile::load(path)?;
    if file.names != net.node_names() {
        return Err(CliError::Usage(format!(
            "{} does not list the dataset's nodes in dataset order",
            path.display()
        )));
    }
    Ok(file.matrix)
}

pub fn cmd_eval(args: &EvalArgs) -> Result<Vec<MetricRow>> {
    let mut kv = base_settings(&args.common)?;
    if let Some(r) = &args.train_ratio {
        kv.set("train_ratio", r);
    }
    if let Some(v) = args.target_view {
        kv.set("target_view", v);
    }
    if let Some(n) = args.repeats {
        kv.set("repeats", n);
    }
    let data = data_dir(&mut kv, &args.data)?;
    kv.check_keys(&[&RUN_KEYS, &["repeats"], &TRAIN_KEYS])?;
    let ratios = kv.list::<f64>("train_ratio")?.unwrap_or_else(|| DEFAULT_TRAIN_RATIOS.to_vec());
    let repeats = kv.parsed::<u64>("repeats")?.unwrap_or(DEFAULT_REPEATS);
    let target_view: Option<usize> = kv.parsed("target_view")?;
    let seeds: Vec<u64> = (0..repeats).collect();

    let inputs = dataset_inputs(&data);
    let net = load_network(&data)?;
    let y = aligned_embeddings(&args.embeddings, &net)?;
    let rows = match target_view {
        Some(v) => link_prediction_report(&y, &net, v, &ratios, &seeds)?,
        None => {
            let labels = net.labels().ok_or(EvalError::NoLabels)?;
            node_classification_report(&y, labels, &ratios, &seeds)?
        }
    };

    create_dir(&args.out)?;
    let metrics_path = args.out.join(METRICS_FILE);
    write_atomic(&metrics_path, |w| write_report(w, &rows)).map_err(io_err(&metrics_path))?;

    let mut resolved = KeyValues::new();
    resolved.set("data", data.display());
    resolved.set("train_ratio", ratios.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
    resolved.set("repeats", repeats);
    if let Some(v) = target_view {
        resolved.set("target_view", v);
    }
    let mut manifest = RunManifest::new("eval", resolved);
    record_inputs(&mut manifest, &inputs)?;
    manifest.add_input("embeddings", &args.embeddings).map_err(io_err(&args.embeddings))?;
    manifest.add_output("metrics", &metrics_path);
    manifest
        .save(&args.out.join(manifest_file("eval")))
        .map_err(io_err(&args.out))?;
    Ok(rows)
}

/// Mean of the strictly upper-triangular entries.
pub fn mean_pairwise(jaccard: &Tensor) -> f64 {
    let k = jaccard.rows();
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..k {
        for j in i + 1..k {
            sum += jaccard.get(i, j);
            count += 1;
        }
    }
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

pub fn format_jaccard_table(jaccard: &Tensor) -> String {
    let k = jaccard.rows();
    let mut s = String::from("view");
    for j in 0..k {
        s += &format!("\tview_{j}");
    }
    s.push('\n');
    for i in 0..k {
        s += &format!("view_{i}");
        for j in 0..k {
            s += &format!("\t{}", jaccard.get(i, j));
        }
        s.push('\n');
    }
    s
}

/// Parses a table written by [`format_jaccard_table`].
pub fn parse_jaccard_table(text: &str) -> std::result::Result<Tensor, String> {
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split('\t')
                .skip(1)
                .map(|x| x.parse::<f64>().map_err(|e| e.to_string()))
                .collect()
        })
        .collect::<std::result::Result<_, _>>()?;
    let k = rows.len();
    if rows.iter().any(|r| r.len() != k) {
        return Err("table is not square".into());
    }
    Tensor::from_vec(k, k, rows.concat()).map_err(|e| e.to_string())
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<Tensor> {
    let mut kv = base_settings(&args.common)?;
    let data = data_dir(&mut kv, &args.data)?;
    kv.check_keys(&[&RUN_KEYS])?;
    let inputs = dataset_inputs(&data);
    let net = load_network(&data)?;
    let jaccard = jaccard_consistency(&net)?;
    let table = format_jaccard_table(&jaccard);
    print!("{table}");
    println!("mean_pairwise\t{}", mean_pairwise(&jaccard));
    if let Some(out) = &args.out {
        create_dir(out)?;
        let path = out.join(JACCARD_FILE);
        write_atomic(&path, |w| w.write_all(table.as_bytes())).map_err(io_err(&path))?;
        let mut resolved = KeyValues::new();
        resolved.set("data", data.display());
        let mut manifest = RunManifest::new("analyze", resolved);
        record_inputs(&mut manifest, &inputs)?;
        manifest.add_output("jaccard", &path);
        manifest.save(&out.join(manifest_file("analyze"))).map_err(io_err(out))?;
    }
    Ok(jaccard)
}

/// One line of the sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub metric: String,
    pub score: f64,
}

impl SweepRow {
    pub const HEADER: &'static str = "param\tvalue\tmetric\tscore";
}

pub fn parse_sweep_table(text: &str) -> std::result::Result<Vec<SweepRow>, String> {
    let mut lines = text.lines();
    if lines.next() != Some(SweepRow::HEADER) {
        return Err("missing sweep header".into());
    }
    lines
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            if f.len() != 4 {
                return Err(format!("expected 4 fields in {l:?}"));
            }
            Ok(SweepRow {
                param: f[0].to_owned(),
                value: f[1].parse().map_err(|e| format!("{e}"))?,
                metric: f[2].to_owned(),
                score: f[3].parse().map_err(|e| format!("{e}"))?,
            })
        })
        .collect()
}

fn with_param(base: &TrainConfig, param: &str, value: f64) -> Result<TrainConfig> {
    let mut cfg = base.clone();
    match param {
        "alpha" => cfg.alpha = value,
        "beta" => cfg.beta = value,
        "gamma" => cfg.gamma = value,
        "dim" => {
            if value < 1.0 || value.fract() != 0.0 {
                return Err(CliError::Usage(format!("dim grid value {value} is not a positive integer")));
            }
            cfg.total_dim = value as usize;
        }
        other => {
            return Err(CliError::Usage(format!(
                "cannot sweep {other:?}; choose from {}",
                GRID_PARAMS.join(", ")
            )))
        }
    }
    Ok(cfg)
}

/// Trains one grid point and scores it: mean metrics over the repeat seeds
/// plus the spread of the final view weights.
fn sweep_point(
    net: &MultiViewNetwork,
    train_net: &MultiViewNetwork,
    cfg: &TrainConfig,
    ratio: f64,
    target_view: Option<usize>,
    seeds: &[u64],
) -> Result<Vec<(String, f64)>> {
    let out = train_with_observer(train_net, cfg, |_| {})?;
    let y = out.final_embedding();
    let rows = match target_view {
        Some(v) => link_prediction_report(y, net, v, &[ratio], seeds)?,
        None => {
            let labels = net.labels().ok_or(EvalError::NoLabels)?;
            node_classification_report(y, labels, &[ratio], seeds)?
        }
    };
    let mut scores: Vec<(String, f64)> = rows
        .into_iter()
        .filter(|r| r.seed == "mean")
        .map(|r| (r.metric, r.value))
        .collect();
    scores.push(("lambda_dispersion".into(), lambda_dispersion(&out.params.lambda)));
    scores.push(("epochs".into(), out.history.len() as f64));
    Ok(scores)
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<Vec<SweepRow>> {
    let mut kv = base_settings(&args.common)?;
    apply_train_flags(&mut kv, &args.train);
    for g in &args.grid {
        let (k, v) = g
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--grid expects PARAM=V1,V2,.., got {g:?}")))?;
        kv.set(&format!("grid.{}", k.trim()), v.trim());
    }
    if let Some(r) = args.train_ratio {
        kv.set("train_ratio", r);
    }
    if let Some(v) = args.target_view {
        kv.set("target_view", v);
    }
    if let Some(n) = args.repeats {
        kv.set("repeats", n);
    }
    let data = data_dir(&mut kv, &args.data)?;
    kv.check_keys(&[&TRAIN_KEYS, &RUN_KEYS, &GRID_KEYS, &["repeats"]])?;
    let base = train_config(&kv)?;
    let ratio = kv.parsed::<f64>("train_ratio")?.unwrap_or(0.5);
    let repeats = kv.parsed::<u64>("repeats")?.unwrap_or(DEFAULT_REPEATS);
    let target_view: Option<usize> = kv.parsed("target_view")?;

    let mut points = Vec::new();
    for param in GRID_PARAMS {
        if let Some(raw) = kv.get(&format!("grid.{param}")) {
            for value in parse_list::<f64>(param, raw)? {
                points.push((param, value, with_param(&base, param, value)?));
            }
        }
    }
    if points.is_empty() {
        return Err(CliError::Usage("empty sweep; give at least one --grid".into()));
    }

    let inputs = dataset_inputs(&data);
    let net = load_network(&data)?;
    let train_net = training_network(&net, target_view)?;
    let seeds: Vec<u64> = (0..repeats).collect();
    let results: Vec<Vec<(String, f64)>> = points
        .par_iter()
        .map(|(_, _, cfg)| sweep_point(&net, &train_net, cfg, ratio, target_view, &seeds))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for ((param, value, _), scores) in points.iter().zip(results) {
        for (metric, score) in scores {
            rows.push(SweepRow {
                param: param.to_string(),
                value: *value,
                metric,
                score,
            });
        }
    }

    create_dir(&args.out)?;
    let path = args.out.join(SWEEP_FILE);
    write_atomic(&path, |w| {
        writeln!(w, "{}", SweepRow::HEADER)?;
        for r in &rows {
            writeln!(w, "{}\t{}\t{}\t{:.17e}", r.param, r.value, r.metric, r.score)?;
        }
        Ok(())
    })
    .map_err(io_err(&path))?;

    let mut resolved = train_config_entries(&base);
    resolved.set("data", data.display());
    resolved.set("train_ratio", ratio);
    resolved.set("repeats", repeats);
    if let Some(v) = target_view {
        resolved.set("target_view", v);
    }
    for key in GRID_KEYS {
        if let Some(v) = kv.get(key) {
            resolved.set(key, v);
        }
    }
    let mut manifest = RunManifest::new("sweep", resolved);
    record_inputs(&mut manifest, &inputs)?;
    manifest.add_output("sweep", &path);
    manifest
        .save(&args.out.join(manifest_file("sweep")))
        .map_err(io_err(&args.out))?;
    Ok(rows)
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Train(a) => cmd_train(a).map(|_| ()),
        Command::Eval(a) => cmd_eval(a).map(|_| ()),
        Command::Analyze(a) => cmd_analyze(a).map(|_| ()),
        Command::Sweep(a) => cmd_sweep(a).map(|_| ()),
    }
}
