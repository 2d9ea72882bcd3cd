//! NT-Xent over cosine similarities.
//!
//! Rows of `z` are `[z_i(0..N); z_j(0..N)]`, so the positive of row `a` is
//! row `(a + N) mod 2N`. With `u = z / |z|` and `S = U U^T / tau`:
//!
//! ```text
//! l(a) = -S[a, pos(a)] + log sum_{k != a} exp(S[a, k])
//! L    = mean_a l(a)
//! ```

use ndarray::{Array2, Axis};
use thiserror::Error;

const MIN_NORM: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("row {0} has norm below {MIN_NORM}")]
    ZeroVector(usize),
    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),
    #[error("expected an even, non-zero number of rows, got {0}")]
    BadShape(usize),
}

/// Loss and `dL/dz`.
pub fn nt_xent_loss(z: &Array2<f64>, tau: f64) -> Result<(f64, Array2<f64>), LossError> {
    if !(tau > 0.0) {
        return Err(LossError::NonPositiveTemperature(tau));
    }
    let m = z.nrows();
    if m == 0 || m % 2 != 0 {
        return Err(LossError::BadShape(m));
    }
    let n = m / 2;
    let norms = z.map_axis(Axis(1), |r| r.dot(&r).sqrt());
    if let Some(bad) = norms.iter().position(|&v| !(v >= MIN_NORM)) {
        return Err(LossError::ZeroVector(bad));
    }
    let u = z / &norms.view().insert_axis(Axis(1));
    let s = u.dot(&u.t()) / tau;

    let mut total = 0.0;
    let mut g = Array2::zeros((m, m));
    for a in 0..m {
        let pos = (a + n) % m;
        let row = s.row(a);
        let mx = (0..m).filter(|&k| k != a).map(|k| row[k]).fold(f64::NEG_INFINITY, f64::max);
        let denom: f64 = (0..m).filter(|&k| k != a).map(|k| (row[k] - mx).exp()).sum();
        total += mx + denom.ln() - row[pos];
        for k in (0..m).filter(|&k| k != a) {
            g[[a, k]] = (row[k] - mx).exp() / denom;
        }
        g[[a, pos]] -= 1.0;
    }
    let scale = 1.0 / m as f64;
    g *= scale;
    let du = (&g + &g.t()).dot(&u) / tau;
    let radial = (&du * &u).sum_axis(Axis(1)).insert_axis(Axis(1));
    let dz = (du - &u * &radial) / &norms.insert_axis(Axis(1));
    Ok((total * scale, dz))
}
