use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::config::EncoderConfig;
use crate::seed::{mix64, rng_from, TAG_INIT};

/// Weights of one pre-norm transformer block. Linear maps are stored
/// `(in, out)` and applied as `x W + b`; biases are `(1, out)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    pub ln1_g: Array2<f64>,
    pub ln1_b: Array2<f64>,
    pub wq: Array2<f64>,
    pub bq: Array2<f64>,
    pub wk: Array2<f64>,
    pub bk: Array2<f64>,
    pub wv: Array2<f64>,
    pub bv: Array2<f64>,
    pub wo: Array2<f64>,
    pub bo: Array2<f64>,
    pub ln2_g: Array2<f64>,
    pub ln2_b: Array2<f64>,
    pub w1: Array2<f64>,
    pub b1: Array2<f64>,
    pub w2: Array2<f64>,
    pub b2: Array2<f64>,
}

/// All trainable tensors of encoder and projector. The same type holds
/// gradients and optimizer moments.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams {
    pub config: EncoderConfig,
    pub tok_emb: Array2<f64>,
    pub pos_emb: Array2<f64>,
    pub layers: Vec<LayerParams>,
    pub lnf_g: Array2<f64>,
    pub lnf_b: Array2<f64>,
    pub proj_w1: Array2<f64>,
    pub proj_b1: Array2<f64>,
    pub proj_w2: Array2<f64>,
    pub proj_b2: Array2<f64>,
}

fn glorot(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Array2<f64> {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array2::from_shape_simple_fn((fan_in, fan_out), || rng.gen_range(-a..a))
}

fn unit_uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    let a = 3f64.sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-a..a))
}

impl EncoderParams {
    /// Seeded initialization: Glorot-uniform linear maps (gain 1), zero
    /// biases, unit LayerNorm gains, unit-variance uniform embeddings.
    pub fn init(config: &EncoderConfig, seed: u64) -> Self {
        let mut rng = rng_from(mix64(seed, 0, TAG_INIT));
        let d = config.d_model;
        let ff = config.d_feedforward;
        let zeros = |n: usize| Array2::zeros((1, n));
        let ones = |n: usize| Array2::ones((1, n));
        let tok_emb = unit_uniform(&mut rng, config.vocab_size, d);
        let pos_emb = unit_uniform(&mut rng, config.max_len, d);
        let layers = (0..config.n_layers)
            .map(|_| LayerParams {
                ln1_g: ones(d),
                ln1_b: zeros(d),
                wq: glorot(&mut rng, d, d),
                bq: zeros(d),
                wk: glorot(&mut rng, d, d),
                bk: zeros(d),
                wv: glorot(&mut rng, d, d),
                bv: zeros(d),
                wo: glorot(&mut rng, d, d),
                bo: zeros(d),
                ln2_g: ones(d),
                ln2_b: zeros(d),
                w1: glorot(&mut rng, d, ff),
                b1: zeros(ff),
                w2: glorot(&mut rng, ff, d),
                b2: zeros(d),
            })
            .collect();
        EncoderParams {
            config: config.clone(),
            tok_emb,
            pos_emb,
            layers,
            lnf_g: ones(d),
            lnf_b: zeros(d),
            proj_w1: glorot(&mut rng, d, d),
            proj_b1: zeros(d),
            proj_w2: glorot(&mut rng, d, config.projector_out),
            proj_b2: zeros(config.projector_out),
        }
    }

    /// Tensors in declaration order, with dotted names.
    pub fn named_tensors(&self) -> Vec<(String, &Array2<f64>)> {
        let mut out = vec![("tok_emb".to_string(), &self.tok_emb), ("pos_emb".to_string(), &self.pos_emb)];
        for (i, l) in self.layers.iter().enumerate() {
            let fields: [(&str, &Array2<f64>); 16] = [
                ("ln1_g", &l.ln1_g),
                ("ln1_b", &l.ln1_b),
                ("wq", &l.wq),
                ("bq", &l.bq),
                ("wk", &l.wk),
                ("bk", &l.bk),
                ("wv", &l.wv),
                ("bv", &l.bv),
                ("wo", &l.wo),
                ("bo", &l.bo),
                ("ln2_g", &l.ln2_g),
                ("ln2_b", &l.ln2_b),
                ("w1", &l.w1),
                ("b1", &l.b1),
                ("w2", &l.w2),
                ("b2", &l.b2),
            ];
            out.extend(fields.into_iter().map(|(n, t)| (format!("layers.{i}.{n}"), t)));
        }
        out.extend([
            ("lnf_g".to_string(), &self.lnf_g),
            ("lnf_b".to_string(), &self.lnf_b),
            ("proj_w1".to_string(), &self.proj_w1),
            ("proj_b1".to_string(), &self.proj_b1),
            ("proj_w2".to_string(), &self.proj_w2),
            ("proj_b2".to_string(), &self.proj_b2),
        ]);
        out
    }

    pub fn tensors(&self) -> Vec<&Array2<f64>> {
        self.named_tensors().into_iter().map(|(_, t)| t).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut out = vec![&mut self.tok_emb, &mut self.pos_emb];
        for l in &mut self.layers {
            out.extend([
                &mut l.ln1_g,
                &mut l.ln1_b,
                &mut l.wq,
                &mut l.bq,
                &mut l.wk,
                &mut l.bk,
                &mut l.wv,
                &mut l.bv,
                &mut l.wo,
                &mut l.bo,
                &mut l.ln2_g,
                &mut l.ln2_b,
                &mut l.w1,
                &mut l.b1,
                &mut l.w2,
                &mut l.b2,
            ]);
        }
        out.extend([
            &mut self.lnf_g,
            &mut self.lnf_b,
            &mut self.proj_w1,
            &mut self.proj_b1,
            &mut self.proj_w2,
            &mut self.proj_b2,
        ]);
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// `self += other`, tensor by tensor.
    pub fn add_assign(&mut self, other: &EncoderParams) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            *a += b;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }
}
