use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loss::nt_xent_loss;
use super::PretrainError;
use crate::augment::{pair_seeds, AugmentationSpec, PositivePair};
use crate::encoder::{
    backward_ids, branch_dropout, forward_ids, prepare_ids, project_backward, project_rows, save, Dropout,
    EncoderConfig, EncoderParams,
};
use crate::metrics::evaluate_representation;
use crate::optim::{clip_grad_norm, AdamW, ParamSet};
use crate::seed::{mix64, rng_from, TAG_BATCH, TAG_EVAL, TAG_SHUFFLE};
use crate::smiles::Vocabulary;

/// Fractions of the total step count at which metrics are recorded: every
/// 2% up to 20%, then every 20%.
pub const SNAPSHOT_FRACTIONS: [f64; 15] =
    [0.0, 0.02, 0.04, 0.06, 0.08, 0.10, 0.12, 0.14, 0.16, 0.18, 0.20, 0.40, 0.60, 0.80, 1.0];

/// Missing fields deserialize to [`ContrastiveConfig::desk`] values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContrastiveConfig {
    pub temperature: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub max_grad_norm: f64,
    pub weight_decay: f64,
    /// Total optimizer steps. When set, epochs continue (with fresh shuffles)
    /// until this many steps have run and `epochs` is ignored.
    pub max_steps: Option<usize>,
    /// Polymers used for metric snapshots when no evaluation corpus is given.
    pub eval_size: usize,
    /// Taken from the run configuration's top-level seed.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for ContrastiveConfig {
    fn default() -> Self {
        Self::desk(0)
    }
}

impl ContrastiveConfig {
    /// Temperature 0.05, batch 32, learning rate 1e-3, clipping at norm 1.
    pub fn desk(seed: u64) -> Self {
        ContrastiveConfig {
            temperature: 0.05,
            batch_size: 32,
            epochs: 10,
            learning_rate: 1e-3,
            max_grad_norm: 1.0,
            weight_decay: 0.0,
            max_steps: None,
            eval_size: 256,
            seed,
        }
    }

    /// Learning rate 1e-5 for the 600-wide configuration.
    pub fn paper_shape(seed: u64) -> Self {
        ContrastiveConfig { learning_rate: 1e-5, ..Self::desk(seed) }
    }

    pub fn validate(&self) -> Result<(), PretrainError> {
        let bad = |m: String| Err(PretrainError::Config(m));
        if !(self.temperature > 0.0) {
            return bad(format!("temperature must be positive, got {}", self.temperature));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.max_grad_norm > 0.0) {
            return bad(format!("max_grad_norm must be positive, got {}", self.max_grad_norm));
        }
        if !(self.learning_rate >= 0.0) || !(self.weight_decay >= 0.0) {
            return bad("learning_rate and weight_decay must be non-negative".into());
        }
        if self.eval_size < 2 {
            return bad("eval_size must be at least 2".into());
        }
        Ok(())
    }
}

/// Scalar loss and full parameter gradient for `2N` id sequences laid out
/// `[i-views; j-views]`.
pub fn contrastive_loss_and_grad(
    params: &EncoderParams,
    ids: &[Vec<u32>],
    dropouts: &[Option<Dropout>],
    tau: f64,
) -> Result<(f64, EncoderParams), PretrainError> {
    let fwd: Vec<_> = ids
        .par_iter()
        .zip(dropouts)
        .map(|(s, &d)| forward_ids(params, s, d))
        .collect::<Result<_, _>>()?;
    let d = params.config.d_model;
    let mut h = Array2::zeros((ids.len(), d));
    for (k, (out, _)) in fwd.iter().enumerate() {
        h.row_mut(k).assign(&out.row(0));
    }
    let (z, proj_cache) = project_rows(params, &h);
    let (loss, dz) = nt_xent_loss(&z, tau)?;
    let mut grads = params.zeros_like();
    let dh = project_backward(params, &proj_cache, &dz, &mut grads);
    let per_seq: Vec<EncoderParams> = fwd
        .par_iter()
        .enumerate()
        .map(|(k, (out, cache))| {
            let mut g = params.zeros_like();
            let mut dout = Array2::zeros(out.raw_dim());
            dout.row_mut(0).assign(&dh.row(k));
            backward_ids(params, cache, &dout, &mut g);
            g
        })
        .collect();
    for g in &per_seq {
        grads.add_assign(g);
    }
    Ok((loss, grads))
}

/// Result of one optimizer step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutput {
    pub loss: f64,
    /// Global gradient norm before clipping.
    pub grad_norm: f64,
}

/// Ids and dropout settings for a batch of pairs, `[i-views; j-views]`.
pub fn batch_inputs(
    batch: &[PositivePair],
    params: &EncoderParams,
    vocab: &Vocabulary,
    spec: &AugmentationSpec,
) -> Result<(Vec<Vec<u32>>, Vec<Option<Dropout>>), PretrainError> {
    let max_len = params.config.max_len;
    let mut ids = Vec::with_capacity(2 * batch.len());
    let mut drops = Vec::with_capacity(2 * batch.len());
    for p in batch {
        ids.push(prepare_ids(&p.view_i, vocab, max_len)?);
        drops.push(branch_dropout(params, spec, p.seeds.0));
    }
    for p in batch {
        ids.push(prepare_ids(&p.view_j, vocab, max_len)?);
        drops.push(branch_dropout(params, spec, p.seeds.1));
    }
    Ok((ids, drops))
}

/// Forward both branches, NT-Xent, backprop, clip, AdamW update.
pub fn train_step(
    batch: &[PositivePair],
    params: &mut EncoderParams,
    opt: &mut AdamW<EncoderParams>,
    cfg: &ContrastiveConfig,
    spec: &AugmentationSpec,
    vocab: &Vocabulary,
) -> Result<StepOutput, PretrainError> {
    if batch.is_empty() {
        return Err(PretrainError::EmptyBatch);
    }
    let (ids, drops) = batch_inputs(batch, params, vocab, spec)?;
    let (loss, mut grads) = contrastive_loss_and_grad(params, &ids, &drops, cfg.temperature)?;
    if !loss.is_finite() || !grads.all_finite() {
        return Err(PretrainError::NonFiniteLoss { step: opt.steps() as usize + 1, loss });
    }
    let grad_norm = clip_grad_norm(&mut grads, cfg.max_grad_norm);
    opt.step(params, &grads);
    Ok(StepOutput { loss, grad_norm })
}

/// One CSV row of the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    pub step: usize,
    pub epoch: usize,
    pub loss: Option<f64>,
    pub alignment: Option<f64>,
    pub uniformity: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub fraction: f64,
    pub alignment: f64,
    pub uniformity: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    /// Step 0 (before training) and every optimizer step.
    pub rows: Vec<LogRow>,
    pub epoch_means: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

impl TrainLog {
    pub fn step_losses(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.loss).collect()
    }

    /// Mean of the first and of the last `window` step losses.
    pub fn initial_final_loss(&self, window: usize) -> Option<(f64, f64)> {
        let l = self.step_losses();
        if l.is_empty() {
            return None;
        }
        let w = window.clamp(1, l.len());
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        Some((mean(&l[..w]), mean(&l[l.len() - w..])))
    }

    /// `step,epoch,loss,alignment,uniformity`, LF line endings.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,epoch,loss,alignment,uniformity\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{},{}", r.step, r.epoch, cell(r.loss), cell(r.alignment), cell(r.uniformity));
        }
        s
    }
}

/// Snapshot steps for a run of `total` steps.
pub fn snapshot_steps(total: usize) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = Vec::new();
    for f in SNAPSHOT_FRACTIONS {
        let step = (f * total as f64).round() as usize;
        if out.last().map_or(true, |&(s, _)| s != step) {
            out.push((step, f));
        }
    }
    out
}

pub struct PretrainOutput {
    pub params: EncoderParams,
    pub log: TrainLog,
    /// Checkpoint files written, in order.
    pub checkpoints: Vec<PathBuf>,
}

fn write_ckpt(params: &EncoderParams, dir: Option<&Path>, name: &str, written: &mut Vec<PathBuf>) -> Result<(), PretrainError> {
    if let Some(dir) = dir {
        let path = dir.join(name);
        save(params, &path)?;
        written.push(path);
    }
    Ok(())
}

/// Contrastive pretraining from a seeded random initialization.
///
/// Every epoch reshuffles the corpus with `mix64(seed, epoch, SHUFFLE)` and
/// step `s` builds its pairs with batch seed `mix64(seed, s, BATCH)`, so views
/// differ across epochs. The incomplete final batch of an epoch is dropped.
/// Metric snapshots use enumeration pairs of `eval_corpus` (or the first
/// `eval_size` corpus entries) with a fixed seed. With `out_dir`, writes
/// `ckpt_{step}.bin` at each snapshot, `ckpt_best.bin` at the end of the
/// epoch with the lowest mean loss, and `ckpt_final.bin`.
pub fn pretrain<S: AsRef<str> + Sync>(
    corpus: &[S],
    eval_corpus: Option<&[S]>,
    spec: &AugmentationSpec,
    enc_cfg: &EncoderConfig,
    cfg: &ContrastiveConfig,
    vocab: &Vocabulary,
    out_dir: Option<&Path>,
) -> Result<PretrainOutput, PretrainError> {
    cfg.validate()?;
    spec.validate()?;
    enc_cfg.validate()?;
    if corpus.is_empty() {
        return Err(PretrainError::EmptyCorpus);
    }
    if cfg.batch_size > corpus.len() {
        return Err(PretrainError::BatchTooLarge { batch: cfg.batch_size, corpus: corpus.len() });
    }
    if enc_cfg.vocab_size != vocab.len() {
        return Err(PretrainError::Config(format!(
            "encoder vocab_size {} differs from vocabulary size {}",
            enc_cfg.vocab_size,
            vocab.len()
        )));
    }
    let eval: Vec<&str> = match eval_corpus {
        Some(e) => e.iter().map(AsRef::as_ref).collect(),
        None => corpus.iter().take(cfg.eval_size).map(AsRef::as_ref).collect(),
    };
    let eval_seed = mix64(cfg.seed, 0, TAG_EVAL);

    let steps_per_epoch = corpus.len() / cfg.batch_size;
    let total = cfg.max_steps.unwrap_or(cfg.epochs * steps_per_epoch);
    let schedule = snapshot_steps(total);

    let mut params = EncoderParams::init(enc_cfg, cfg.seed);
    let mut opt = AdamW::new(&params, cfg.learning_rate, cfg.weight_decay);
    let mut log = TrainLog::default();
    let mut written = Vec::new();
    let mut best_mean = f64::INFINITY;
    let mut next_snap = 0;

    let mut snapshot = |params: &EncoderParams, step: usize, log: &mut TrainLog, written: &mut Vec<PathBuf>| {
        if next_snap < schedule.len() && schedule[next_snap].0 == step {
            let (alignment, uniformity) = evaluate_representation(&eval, params, vocab, eval_seed)?;
            log.snapshots.push(Snapshot { step, fraction: schedule[next_snap].1, alignment, uniformity });
            let row = log.rows.last_mut().expect("row for this step");
            row.alignment = Some(alignment);
            row.uniformity = Some(uniformity);
            write_ckpt(params, out_dir, &format!("ckpt_{step}.bin"), written)?;
            next_snap += 1;
        }
        Ok::<(), PretrainError>(())
    };

    log.rows.push(LogRow { step: 0, epoch: 0, loss: None, alignment: None, uniformity: None });
    snapshot(&params, 0, &mut log, &mut written)?;

    let mut step = 0;
    let mut epoch = 0;
    while step < total {
        epoch += 1;
        let mut order: Vec<usize> = (0..corpus.len()).collect();
        order.shuffle(&mut rng_from(mix64(cfg.seed, epoch as u64, TAG_SHUFFLE)));
        let mut epoch_losses = Vec::with_capacity(steps_per_epoch);
        for chunk in order.chunks_exact(cfg.batch_size) {
            if step == total {
                break;
            }
            step += 1;
            let batch_seed = mix64(cfg.seed, step as u64, TAG_BATCH);
            let batch: Vec<PositivePair> = chunk
                .par_iter()
                .enumerate()
                .map(|(k, &idx)| PositivePair::rebuild(idx, corpus[idx].as_ref(), spec, pair_seeds(batch_seed, k)))
                .collect::<Result<_, _>>()?;
            let out = train_step(&batch, &mut params, &mut opt, cfg, spec, vocab)?;
            log::debug!("step {step} epoch {epoch} loss {:.6} grad_norm {:.4}", out.loss, out.grad_norm);
            epoch_losses.push(out.loss);
            log.rows.push(LogRow { step, epoch, loss: Some(out.loss), alignment: None, uniformity: None });
            snapshot(&params, step, &mut log, &mut written)?;
        }
        let mean = epoch_losses.iter().sum::<f64>() / epoch_losses.len() as f64;
        log::info!("epoch {epoch}: mean loss {mean:.6} after {step} steps");
        log.epoch_means.push(mean);
        if mean < best_mean {
            best_mean = mean;
            write_ckpt(&params, out_dir, "ckpt_best.bin", &mut written)?;
        }
    }
    write_ckpt(&params, out_dir, "ckpt_final.bin", &mut written)?;
    Ok(PretrainOutput { params, log, checkpoints: written })
}
