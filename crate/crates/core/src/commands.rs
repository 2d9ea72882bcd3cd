//! Command implementations behind the `polycl` binary.
//!
//! Each command is a pure function of its configuration, input files, and
//! seed; outputs are written as files and also returned for inspection.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::augment::{make_pair_batch, AugmentError, AugmentationSpec};
use crate::config::{ConfigError, RunConfig};
use crate::encoder::{fingerprint, load, CheckpointError, EncoderError, EncoderParams};
use crate::io::{csv_string, fmt_f64, read_corpus, read_dataset, write_text, IoError};
use crate::metrics::{evaluate_representation, MetricError};
use crate::pretrain::{pretrain, PretrainError, PretrainOutput};
use crate::seed::{mix64, TAG_BATCH};
use crate::smiles::{detokenize, VocabError, Vocabulary};
use crate::transfer::{cross_validate, extract_features, CvReport, HeadConfig, PropertyDataset, TransferError};

/// Failure class, mapped to the process exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad arguments or configuration.
    Usage,
    /// Unreadable or invalid input data or checkpoint.
    Data,
    /// Non-finite values during training or evaluation.
    Numeric,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Usage => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numeric => 4,
        }
    }
}

#[derive(Debug, Error)]
#[error("{message}")]
pub struct CommandError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CommandError {
    pub fn usage(message: impl Into<String>) -> Self {
        CommandError { kind: ErrorKind::Usage, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CommandError { kind: ErrorKind::Data, message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }

    fn new(kind: ErrorKind, e: &dyn std::fmt::Display) -> Self {
        CommandError { kind, message: e.to_string() }
    }
}

impl From<ConfigError> for CommandError {
    fn from(e: ConfigError) -> Self {
        Self::new(ErrorKind::Usage, &e)
    }
}

impl From<IoError> for CommandError {
    fn from(e: IoError) -> Self {
        let kind = if matches!(e, IoError::Header { .. }) { ErrorKind::Usage } else { ErrorKind::Data };
        Self::new(kind, &e)
    }
}

impl From<VocabError> for CommandError {
    fn from(e: VocabError) -> Self {
        Self::new(ErrorKind::Data, &e)
    }
}

impl From<CheckpointError> for CommandError {
    fn from(e: CheckpointError) -> Self {
        Self::new(ErrorKind::Data, &e)
    }
}

fn encoder_kind(e: &EncoderError) -> ErrorKind {
    match e {
        EncoderError::Config(_) => ErrorKind::Usage,
        _ => ErrorKind::Data,
    }
}

fn metric_kind(e: &MetricError) -> ErrorKind {
    match e {
        MetricError::ZeroVector => ErrorKind::Numeric,
        MetricError::Encoder(e) => encoder_kind(e),
        _ => ErrorKind::Data,
    }
}

impl From<MetricError> for CommandError {
    fn from(e: MetricError) -> Self {
        Self::new(metric_kind(&e), &e)
    }
}

impl From<AugmentError> for CommandError {
    fn from(e: AugmentError) -> Self {
        let kind = if matches!(e, AugmentError::InvalidRatio(_)) { ErrorKind::Usage } else { ErrorKind::Data };
        Self::new(kind, &e)
    }
}

impl From<PretrainError> for CommandError {
    fn from(e: PretrainError) -> Self {
        let kind = match &e {
            PretrainError::Config(_) | PretrainError::BatchTooLarge { .. } => ErrorKind::Usage,
            PretrainError::NonFiniteLoss { .. } | PretrainError::Loss(_) => ErrorKind::Numeric,
            PretrainError::Encoder(e) => encoder_kind(e),
            PretrainError::Metric(e) => metric_kind(e),
            _ => ErrorKind::Data,
        };
        Self::new(kind, &e)
    }
}

fn transfer_kind(e: &TransferError) -> ErrorKind {
    match e {
        TransferError::Config(_) => ErrorKind::Usage,
        TransferError::NonFiniteLoss { .. } => ErrorKind::Numeric,
        TransferError::Fold { source, .. } => transfer_kind(source),
        _ => ErrorKind::Data,
    }
}

impl From<TransferError> for CommandError {
    fn from(e: TransferError) -> Self {
        Self::new(transfer_kind(&e), &e)
    }
}

pub type Result<T> = std::result::Result<T, CommandError>;

/// The table at `path`, or the built-in one.
pub fn load_vocab(path: Option<&Path>) -> Result<Vocabulary> {
    Ok(match path {
        Some(p) => Vocabulary::from_file(p)?,
        None => Vocabulary::builtin(),
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CommandError::data(format!("{}: {e}", dir.display())))
}

fn require<'a>(value: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    value.as_deref().ok_or_else(|| CommandError::usage(format!("{key} is required")))
}

/// Writes the resolved configuration and its fingerprint into `out_dir`.
pub fn write_config_record(cfg: &RunConfig, out_dir: &Path) -> Result<String> {
    let fp = cfg.fingerprint();
    write_text(&out_dir.join("config.json"), &cfg.resolved_json())?;
    write_text(&out_dir.join("config.sha256"), &format!("{fp}\n"))?;
    Ok(fp)
}

fn pretrain_into(
    cfg: &RunConfig,
    spec: &AugmentationSpec,
    corpus: &[String],
    eval: Option<&[String]>,
    vocab: &Vocabulary,
    out_dir: &Path,
) -> Result<PretrainOutput> {
    create_dir(out_dir)?;
    let enc = cfg.encoder.to_config(vocab.len());
    let out = pretrain(corpus, eval, spec, &enc, &cfg.contrastive_config(), vocab, Some(out_dir))?;
    write_text(&out_dir.join("train_log.csv"), &out.log.to_csv())?;
    Ok(out)
}

/// Pretrains with the configured augmentation. Writes checkpoints,
/// `train_log.csv`, `config.json`, and `config.sha256` into `out_dir`.
pub fn cmd_pretrain(cfg: &RunConfig, out_dir: &Path) -> Result<PretrainOutput> {
    let corpus = read_corpus(require(&cfg.paths.corpus, "paths.corpus")?)?;
    let eval = cfg.paths.eval_corpus.as_deref().map(read_corpus).transpose()?;
    let vocab = load_vocab(cfg.paths.vocab.as_deref())?;
    create_dir(out_dir)?;
    write_config_record(cfg, out_dir)?;
    let out = pretrain_into(cfg, &cfg.augmentation, &corpus, eval.as_deref(), &vocab, out_dir)?;
    log::info!("pretrain finished: {} checkpoints in {}", out.checkpoints.len(), out_dir.display());
    Ok(out)
}

/// One (spec, dataset) cell of a sweep table.
#[derive(Clone, Debug, PartialEq)]
pub struct GridRow {
    pub spec_tag: String,
    pub dataset: String,
    pub mean_r2: Option<f64>,
    /// `mean_r2` minus the baseline's on the same dataset.
    pub delta: Option<f64>,
    /// `baseline`, `improved`, `degraded`, `unchanged`, or `failed`.
    pub verdict: &'static str,
}

pub fn grid_csv(rows: &[GridRow]) -> String {
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    csv_string(
        &["spec_tag", "dataset", "mean_r2", "delta", "verdict"],
        rows.iter().map(|r| vec![r.spec_tag.clone(), r.dataset.clone(), opt(r.mean_r2), opt(r.delta), r.verdict.to_string()]),
    )
}

fn verdict(delta: f64) -> &'static str {
    if delta > 0.0 {
        "improved"
    } else if delta < 0.0 {
        "degraded"
    } else {
        "unchanged"
    }
}

fn run_cell(
    cfg: &RunConfig,
    spec: &AugmentationSpec,
    corpus: &[String],
    eval: Option<&[String]>,
    datasets: &[PropertyDataset],
    vocab: &Vocabulary,
    dir: &Path,
) -> Result<Vec<std::result::Result<CvReport, String>>> {
    let out = pretrain_into(cfg, spec, corpus, eval, vocab, dir)?;
    let reports: Vec<_> = datasets
        .iter()
        .map(|ds| cross_validate(ds, &out.params, vocab, &cfg.transfer, cfg.seed).map_err(|e| e.to_string()))
        .collect();
    let ok: Vec<(&str, &CvReport)> =
        datasets.iter().zip(&reports).filter_map(|(d, r)| r.as_ref().ok().map(|r| (d.name.as_str(), r))).collect();
    write_text(&dir.join("transfer.csv"), &transfer_csv(&ok))?;
    Ok(reports)
}

/// Pretrains one encoder per grid spec (baseline included), evaluates each on
/// every configured dataset, and writes `grid.csv`. Cells run on a pool of
/// `sweep.workers` threads; a failed cell is recorded and the sweep goes on.
pub fn cmd_sweep(cfg: &RunConfig, out_dir: &Path) -> Result<Vec<GridRow>> {
    let specs = cfg.sweep.grid.resolve()?;
    if cfg.paths.datasets.is_empty() {
        return Err(CommandError::usage("paths.datasets must list at least one dataset"));
    }
    let corpus = read_corpus(require(&cfg.paths.corpus, "paths.corpus")?)?;
    let eval = cfg.paths.eval_corpus.as_deref().map(read_corpus).transpose()?;
    let datasets = cfg.paths.datasets.iter().map(|p| read_dataset(p)).collect::<std::result::Result<Vec<_>, _>>()?;
    let vocab = load_vocab(cfg.paths.vocab.as_deref())?;
    create_dir(out_dir)?;
    write_config_record(cfg, out_dir)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.sweep.workers)
        .build()
        .map_err(|e| CommandError::usage(format!("sweep.workers: {e}")))?;
    let cells: Vec<_> = pool.install(|| {
        specs
            .par_iter()
            .map(|spec| {
                let dir = out_dir.join("cells").join(spec.tag());
                log::info!("sweep cell {}", spec.tag());
                run_cell(cfg, spec, &corpus, eval.as_deref(), &datasets, &vocab, &dir).map_err(|e| {
                    log::warn!("sweep cell {} failed: {e}", spec.tag());
                    e.message
                })
            })
            .collect()
    });

    let r2 = |c: usize, d: usize| -> Option<f64> { cells[c].as_ref().ok()?[d].as_ref().ok().map(|r| r.mean_r2) };
    let mut rows = Vec::new();
    for (c, spec) in specs.iter().enumerate() {
        for (d, ds) in datasets.iter().enumerate() {
            let mean_r2 = r2(c, d);
            let base = r2(0, d);
            let delta = mean_r2.zip(base).map(|(a, b)| a - b);
            let verdict = match (spec.is_baseline(), mean_r2, delta) {
                (_, None, _) => "failed",
                (true, Some(_), _) => "baseline",
                (false, Some(_), Some(dl)) => verdict(dl),
                (false, Some(_), None) => "unchanged",
            };
            rows.push(GridRow { spec_tag: spec.tag(), dataset: ds.name.clone(), mean_r2, delta, verdict });
        }
    }
    write_text(&out_dir.join("grid.csv"), &grid_csv(&rows))?;
    let failed = rows.iter().filter(|r| r.verdict == "failed").count();
    if failed > 0 {
        return Err(CommandError::data(format!("{failed} sweep cells failed; see grid.csv")));
    }
    Ok(rows)
}

fn load_checkpoint(path: &Path) -> Result<EncoderParams> {
    load(path).map_err(|e| CommandError::data(format!("{}: {e}", path.display())))
}

/// `smiles,h0,...` rows of pooled representations with dropout off.
pub fn cmd_embed(checkpoint: &Path, corpus: &Path, vocab: &Vocabulary, out: &Path) -> Result<String> {
    let params = load_checkpoint(checkpoint)?;
    let smiles = read_corpus(corpus)?;
    let x = extract_features(&smiles, &params, vocab)?;
    let mut header = vec!["smiles".to_string()];
    header.extend((0..x.ncols()).map(|k| format!("h{k}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let text = csv_string(
        &header,
        smiles.iter().zip(x.rows()).map(|(s, row)| std::iter::once(s.clone()).chain(row.iter().map(|&v| fmt_f64(v))).collect::<Vec<_>>()),
    );
    write_text(out, &text)?;
    Ok(text)
}

/// One `model_tag,fingerprint,alignment,uniformity` row per checkpoint.
pub fn cmd_eval_repr(checkpoints: &[PathBuf], corpus: &Path, seed: u64, vocab: &Vocabulary, out: &Path) -> Result<String> {
    if checkpoints.is_empty() {
        return Err(CommandError::usage("at least one checkpoint is required"));
    }
    let smiles = read_corpus(corpus)?;
    let mut rows = Vec::new();
    for path in checkpoints {
        let params = load_checkpoint(path)?;
        let (align, unif) = evaluate_representation(&smiles, &params, vocab, seed)?;
        let tag = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        rows.push(vec![tag, fingerprint(&params), fmt_f64(align), fmt_f64(unif)]);
    }
    let text = csv_string(&["model_tag", "fingerprint", "alignment", "uniformity"], rows);
    write_text(out, &text)?;
    Ok(text)
}

/// Per-fold rows followed by one `mean` row per dataset.
pub fn transfer_csv(reports: &[(&str, &CvReport)]) -> String {
    let mut rows = Vec::new();
    for (name, r) in reports {
        for f in &r.folds {
            rows.push(vec![
                name.to_string(),
                f.fold_index.to_string(),
                fmt_f64(f.rmse),
                fmt_f64(f.r2),
                f.best_epoch.to_string(),
            ]);
        }
        rows.push(vec![name.to_string(), "mean".into(), fmt_f64(r.mean_rmse), fmt_f64(r.mean_r2), String::new()]);
    }
    csv_string(&["dataset", "fold", "rmse", "r2", "best_epoch"], rows)
}

/// Cross-validates a regression head on frozen features of `checkpoint`.
pub fn cmd_transfer(
    checkpoint: &Path,
    dataset: &Path,
    head: &HeadConfig,
    seed: u64,
    vocab: &Vocabulary,
    out: &Path,
) -> Result<CvReport> {
    let ds = read_dataset(dataset)?;
    let params = load_checkpoint(checkpoint)?;
    let report = cross_validate(&ds, &params, vocab, head, seed)?;
    write_text(out, &transfer_csv(&[(ds.name.as_str(), &report)]))?;
    Ok(report)
}

/// `views` positive pairs per polymer as `index,view,anchor,branch_i,branch_j`;
/// view `v` uses batch seed `mix64(seed, v, BATCH)`.
pub fn cmd_augment(corpus: &Path, spec: &AugmentationSpec, views: usize, seed: u64, out: &Path) -> Result<String> {
    let smiles = read_corpus(corpus)?;
    let per_view = (0..views)
        .map(|v| make_pair_batch(&smiles, spec, mix64(seed, v as u64, TAG_BATCH)))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    for (i, anchor) in smiles.iter().enumerate() {
        for (v, batch) in per_view.iter().enumerate() {
            let p = &batch[i];
            rows.push(vec![i.to_string(), v.to_string(), anchor.clone(), detokenize(&p.view_i), detokenize(&p.view_j)]);
        }
    }
    let text = csv_string(&["index", "view", "anchor", "branch_i", "branch_j"], rows);
    write_text(out, &text)?;
    Ok(text)
}
