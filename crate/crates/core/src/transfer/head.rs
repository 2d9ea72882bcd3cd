use ndarray::{Array1, Array2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{rmse, r_squared, TransferError};
use crate::optim::{AdamW, ParamSet};
use crate::seed::{mix64, rng_from, TAG_DROPOUT, TAG_INIT, TAG_SHUFFLE};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeadConfig {
    /// Hidden width; `None` uses the feature dimension.
    pub hidden: Option<usize>,
    pub dropout: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    /// First epoch at which the early-stopping monitor runs.
    pub early_stop_start: usize,
    pub patience: usize,
    /// Training sets up to this many rows use one full batch per epoch.
    pub full_batch_max: usize,
    pub minibatch: usize,
    pub folds: usize,
}

impl Default for HeadConfig {
    fn default() -> Self {
        HeadConfig {
            hidden: None,
            dropout: 0.1,
            learning_rate: 1e-3,
            weight_decay: 0.0,
            max_epochs: 500,
            early_stop_start: 50,
            patience: 50,
            full_batch_max: 4096,
            minibatch: 256,
            folds: 5,
        }
    }
}

impl HeadConfig {
    pub fn validate(&self) -> Result<(), TransferError> {
        let bad = |m: &str| Err(TransferError::Config(m.to_string()));
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("head dropout must be in [0, 1)");
        }
        if !(self.learning_rate >= 0.0) || !(self.weight_decay >= 0.0) {
            return bad("head learning_rate and weight_decay must be non-negative");
        }
        if self.max_epochs == 0 || self.minibatch == 0 || self.hidden == Some(0) {
            return bad("max_epochs, minibatch and hidden must be positive");
        }
        if self.folds < 2 {
            return bad("folds must be at least 2");
        }
        Ok(())
    }
}

/// `y = relu(x W1 + b1) W2 + b2`.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadParams {
    pub w1: Array2<f64>,
    pub b1: Array2<f64>,
    pub w2: Array2<f64>,
    pub b2: Array2<f64>,
}

impl ParamSet for HeadParams {
    fn tensors(&self) -> Vec<&Array2<f64>> {
        vec![&self.w1, &self.b1, &self.w2, &self.b2]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        vec![&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }
}

impl HeadParams {
    /// Glorot-uniform weights, zero biases.
    pub fn init(input: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = rng_from(mix64(seed, 0, TAG_INIT));
        let mut glorot = |i: usize, o: usize| {
            let a = (6.0 / (i + o) as f64).sqrt();
            Array2::from_shape_simple_fn((i, o), || rng.gen_range(-a..a))
        };
        let w1 = glorot(input, hidden);
        let w2 = glorot(hidden, 1);
        HeadParams { w1, b1: Array2::zeros((1, hidden)), w2, b2: Array2::zeros((1, 1)) }
    }

    /// Predictions with dropout off.
    pub fn predict(&self, x: &Array2<f64>) -> Array1<f64> {
        forward(self, x, None).0
    }
}

struct Cache {
    pre: Array2<f64>,
    act: Array2<f64>,
}

fn forward(p: &HeadParams, x: &Array2<f64>, mask: Option<&Array2<f64>>) -> (Array1<f64>, Cache) {
    let pre = x.dot(&p.w1) + &p.b1;
    let mut act = pre.mapv(|v| v.max(0.0));
    if let Some(m) = mask {
        act *= m;
    }
    let y = (act.dot(&p.w2) + &p.b2).column(0).to_owned();
    (y, Cache { pre, act })
}

fn dropout_mask(rows: usize, cols: usize, ratio: f64, seed: u64) -> Option<Array2<f64>> {
    if ratio == 0.0 {
        return None;
    }
    let mut rng = rng_from(seed);
    let keep = 1.0 / (1.0 - ratio);
    Some(Array2::from_shape_simple_fn((rows, cols), || if rng.gen::<f64>() < ratio { 0.0 } else { keep }))
}

/// Mean squared error and its gradient for one batch.
pub fn head_loss_and_grad(
    p: &HeadParams,
    x: &Array2<f64>,
    y: &Array1<f64>,
    mask: Option<&Array2<f64>>,
) -> (f64, HeadParams) {
    let n = x.nrows() as f64;
    let (pred, c) = forward(p, x, mask);
    let err = &pred - y;
    let loss = err.dot(&err) / n;
    let dy = (err * (2.0 / n)).insert_axis(Axis(1));
    let w2 = c.act.t().dot(&dy);
    let b2 = dy.sum_axis(Axis(0)).insert_axis(Axis(0));
    let mut dact = dy.dot(&p.w2.t());
    if let Some(m) = mask {
        dact *= m;
    }
    Zip::from(&mut dact).and(&c.pre).for_each(|g, &v| {
        if v <= 0.0 {
            *g = 0.0
        }
    });
    let w1 = x.t().dot(&dact);
    let b1 = dact.sum_axis(Axis(0)).insert_axis(Axis(0));
    (loss, HeadParams { w1, b1, w2, b2 })
}

/// Early-stopping monitor: from `start_epoch` on, stops once `patience`
/// consecutive epochs fail to improve on the best value seen since
/// `start_epoch`.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    pub start_epoch: usize,
    pub patience: usize,
    best: Option<f64>,
    bad_epochs: usize,
}

impl EarlyStopping {
    pub fn new(start_epoch: usize, patience: usize) -> Self {
        EarlyStopping { start_epoch, patience, best: None, bad_epochs: 0 }
    }

    /// Records the metric of 1-based `epoch`; returns true when training stops.
    pub fn update(&mut self, epoch: usize, metric: f64) -> bool {
        if epoch < self.start_epoch {
            return false;
        }
        match self.best {
            Some(b) if metric >= b => self.bad_epochs += 1,
            _ => {
                self.best = Some(metric);
                self.bad_epochs = 0;
            }
        }
        self.bad_epochs >= self.patience
    }
}

/// Outcome of [`fit_loop`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoopSummary {
    /// 1-based epoch with the lowest validation metric (first on ties).
    pub best_epoch: usize,
    pub best_metric: f64,
    pub epochs_run: usize,
}

/// Runs `epoch_fn(epoch)` for epochs `1..=max_epochs`, each returning the
/// validation metric, until the monitor stops the run.
pub fn fit_loop<F>(cfg: &HeadConfig, mut epoch_fn: F) -> Result<LoopSummary, TransferError>
where
    F: FnMut(usize) -> Result<f64, TransferError>,
{
    let mut monitor = EarlyStopping::new(cfg.early_stop_start, cfg.patience);
    let mut best = LoopSummary { best_epoch: 0, best_metric: f64::INFINITY, epochs_run: 0 };
    for epoch in 1..=cfg.max_epochs {
        let metric = epoch_fn(epoch)?;
        best.epochs_run = epoch;
        if best.best_epoch == 0 || metric < best.best_metric {
            best.best_epoch = epoch;
            best.best_metric = metric;
        }
        if monitor.update(epoch, metric) {
            break;
        }
    }
    Ok(best)
}

/// Per-fold result.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldReport {
    pub fold_index: usize,
    pub rmse: f64,
    pub r2: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

/// A fitted head with the target scaling it was trained under.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedHead {
    pub params: HeadParams,
    pub y_mean: f64,
    pub y_std: f64,
}

impl TrainedHead {
    pub fn predict(&self, x: &Array2<f64>) -> Array1<f64> {
        self.params.predict(x) * self.y_std + self.y_mean
    }
}

/// Trains a regression head on `(train_x, train_y)` with targets z-scored on
/// the training rows, monitoring validation RMSE in original units. Returns
/// the head of the best validation epoch.
pub fn train_head(
    train_x: &Array2<f64>,
    train_y: &Array1<f64>,
    val_x: &Array2<f64>,
    val_y: &Array1<f64>,
    cfg: &HeadConfig,
    seed: u64,
) -> Result<(TrainedHead, FoldReport), TransferError> {
    cfg.validate()?;
    if train_x.nrows() != train_y.len() || val_x.nrows() != val_y.len() || train_x.ncols() != val_x.ncols() {
        return Err(TransferError::LengthMismatch);
    }
    let n = train_y.len();
    let y_mean = train_y.sum() / n as f64;
    let sd = (train_y.mapv(|v| (v - y_mean).powi(2)).sum() / n as f64).sqrt();
    let y_std = if sd > 1e-12 { sd } else { 1.0 };
    let ys = train_y.mapv(|v| (v - y_mean) / y_std);

    let hidden = cfg.hidden.unwrap_or(train_x.ncols());
    let mut params = HeadParams::init(train_x.ncols(), hidden, seed);
    let mut opt = AdamW::new(&params, cfg.learning_rate, cfg.weight_decay);
    let mut best: Option<(f64, HeadParams)> = None;
    let mut step = 0u64;

    let summary = fit_loop(cfg, |epoch| {
        let batches: Vec<Vec<usize>> = if n <= cfg.full_batch_max {
            vec![(0..n).collect()]
        } else {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng_from(mix64(seed, epoch as u64, TAG_SHUFFLE)));
            order.chunks(cfg.minibatch).map(<[usize]>::to_vec).collect()
        };
        for idx in batches {
            step += 1;
            let x = train_x.select(Axis(0), &idx);
            let y = ys.select(Axis(0), &idx);
            let mask = dropout_mask(idx.len(), hidden, cfg.dropout, mix64(seed, step, TAG_DROPOUT));
            let (loss, grads) = head_loss_and_grad(&params, &x, &y, mask.as_ref());
            if !loss.is_finite() {
                return Err(TransferError::NonFiniteLoss { epoch });
            }
            opt.step(&mut params, &grads);
        }
        let pred = params.predict(val_x) * y_std + y_mean;
        let metric = rmse(val_y, &pred)?;
        if !metric.is_finite() {
            return Err(TransferError::NonFiniteLoss { epoch });
        }
        if best.as_ref().map_or(true, |(b, _)| metric < *b) {
            best = Some((metric, params.clone()));
        }
        Ok(metric)
    })?;

    let (_, best_params) = best.expect("at least one epoch");
    let head = TrainedHead { params: best_params, y_mean, y_std };
    let pred = head.predict(val_x);
    let report = FoldReport {
        fold_index: 0,
        rmse: rmse(val_y, &pred)?,
        r2: r_squared(val_y, &pred)?,
        best_epoch: summary.best_epoch,
        epochs_run: summary.epochs_run,
    };
    Ok((head, report))
}
