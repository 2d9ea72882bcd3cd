//! Adam with decoupled weight decay and global-norm clipping over any set
//! of `f64` matrices.

use ndarray::{Array2, Zip};

use crate::encoder::EncoderParams;

/// A fixed, ordered list of trainable tensors.
pub trait ParamSet: Clone {
    fn tensors(&self) -> Vec<&Array2<f64>>;
    fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>>;

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    fn global_norm(&self) -> f64 {
        self.tensors().iter().flat_map(|t| t.iter()).map(|x| x * x).sum::<f64>().sqrt()
    }

    fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.mapv_inplace(|x| x * factor);
        }
    }
}

impl ParamSet for EncoderParams {
    fn tensors(&self) -> Vec<&Array2<f64>> {
        EncoderParams::tensors(self)
    }

    fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        EncoderParams::tensors_mut(self)
    }
}

/// Adam with decoupled weight decay.
///
/// ```text
/// p <- p - lr * wd * p
/// m <- b1 m + (1 - b1) g
/// v <- b2 v + (1 - b2) g^2
/// p <- p - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
/// ```
#[derive(Clone, Debug)]
pub struct AdamW<P> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    t: u64,
    m: P,
    v: P,
}

impl<P: ParamSet> AdamW<P> {
    pub fn new(params: &P, lr: f64, weight_decay: f64) -> Self {
        AdamW {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            t: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut P, grads: &P) {
        self.t += 1;
        let t = self.t as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (lr, b1, b2, eps, wd) = (self.lr, self.beta1, self.beta2, self.eps, self.weight_decay);
        let tensors = params.tensors_mut().into_iter().zip(grads.tensors()).zip(self.m.tensors_mut()).zip(self.v.tensors_mut());
        for (((p, g), m), v) in tensors {
            Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *p -= lr * wd * *p;
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
            });
        }
    }
}

/// Scales `grads` so the global norm is at most `max_norm`; returns the norm
/// before clipping.
pub fn clip_grad_norm<P: ParamSet>(grads: &mut P, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::EncoderConfig;

    fn params() -> EncoderParams {
        let mut cfg = EncoderConfig::desk(8);
        cfg.d_model = 4;
        cfg.n_heads = 1;
        cfg.n_layers = 1;
        cfg.d_feedforward = 4;
        cfg.max_len = 4;
        cfg.projector_out = 2;
        EncoderParams::init(&cfg, 1)
    }

    #[test]
    fn clip_to_unit_norm() {
        let p = params();
        let mut g = p.clone();
        let norm = g.global_norm();
        g.scale(5.0 / norm);
        assert!((clip_grad_norm(&mut g, 1.0) - 5.0).abs() < 1e-12);
        assert!((g.global_norm() - 1.0).abs() < 1e-9);
        let before = g.clone();
        clip_grad_norm(&mut g, 2.0);
        assert_eq!(g, before);
    }

    #[test]
    fn zero_lr_leaves_params() {
        let mut p = params();
        let before = p.clone();
        let g = p.clone();
        let mut opt = AdamW::new(&p, 0.0, 0.01);
        opt.step(&mut p, &g);
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // After one step m_hat = g and v_hat = g^2, so each entry moves by
        // lr * g / (|g| + eps).
        let mut p = params();
        let before = p.clone();
        let g = p.clone();
        let mut opt = AdamW::new(&p, 1e-2, 0.0);
        opt.step(&mut p, &g);
        for ((a, b), gr) in p.tensors().iter().zip(before.tensors()).zip(g.tensors()) {
            for ((x, y), gv) in a.iter().zip(b.iter()).zip(gr.iter()) {
                let expect = y - 1e-2 * gv / (gv.abs() + 1e-8);
                assert!((x - expect).abs() < 1e-15);
            }
        }
    }
}
