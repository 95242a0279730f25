use rand::Rng;

use super::{Batching, NodeState, SwarmState};
use crate::error::{Error, Result};
use crate::linalg;
use crate::problems::{sample_batch, GradientOracle};
use crate::scalar::Scalar;
use crate::topology::MixingMatrix;

/// Batch indices for one gradient evaluation.
pub fn draw_batch<T: Scalar, R: Rng + ?Sized>(
    oracle: &GradientOracle<T>,
    batching: Batching,
    rng: &mut R,
) -> Vec<usize> {
    match batching {
        Batching::Full => (0..oracle.n_samples()).collect(),
        Batching::Sampled(b) => sample_batch(rng, oracle.n_samples(), b),
    }
}

pub(crate) fn ensure_finite<T: Scalar>(v: &[T], iteration: usize, what: &str) -> Result<()> {
    if linalg::all_finite(v) {
        Ok(())
    } else {
        Err(Error::Divergence {
            iteration,
            what: what.to_string(),
        })
    }
}

/// One local MVR iteration on a node that does not communicate at `t`.
///
/// `x <- x - gamma v`, then a single batch `B` is drawn and
/// `v <- g(x_new; B) + (1 - alpha) (v - g(x_old; B))`.
pub fn local_step_mvr<T: Scalar, R: Rng + ?Sized>(
    node: &mut NodeState<T>,
    oracle: &GradientOracle<T>,
    gamma: T,
    alpha_next: T,
    batching: Batching,
    rng: &mut R,
    t: usize,
) -> Result<()> {
    let x_old = node.x.clone();
    linalg::axpy(-gamma, &node.v, &mut node.x);
    ensure_finite(&node.x, t, "x")?;
    let batch = draw_batch(oracle, batching, rng);
    let g_new = oracle.stochastic_gradient(&node.x, &batch)?;
    let g_old = oracle.stochastic_gradient(&x_old, &batch)?;
    let keep = T::one() - alpha_next;
    for ((v, gn), go) in node.v.iter_mut().zip(g_new).zip(g_old) {
        *v = gn + keep * (*v - go);
    }
    ensure_finite(&node.v, t, "v")
}

/// Slow gradient tracking and slow partial averaging at the end of
/// iteration `t`, applied synchronously to every node.
///
/// From a frozen snapshot of all nodes:
/// 1. `h_i = x_ckpt_i - (x_i - gamma v_i)`
/// 2. `y_i = sum_j w_ij (y_prev_j + h_j - h_prev_j)`
/// 3. `x_i = sum_j w_ij (x_ckpt_j - y_j)`
/// 4. checkpoints `x_ckpt, h_prev, y_prev` take the new `x, h, y`.
///
/// Directions are left untouched; the caller refreshes them at the new `x`.
pub fn communicate<T: Scalar>(
    swarm: &mut SwarmState<T>,
    mixing: &MixingMatrix<T>,
    gamma: T,
) -> Result<()> {
    let n = swarm.nodes.len();
    if n != mixing.n() {
        return Err(Error::ContractViolation(format!(
            "{n} nodes but a {0}x{0} mixing matrix",
            mixing.n()
        )));
    }
    let h: Vec<Vec<T>> = swarm
        .nodes
        .iter()
        .map(|nd| {
            let mut half = nd.x.clone();
            linalg::axpy(-gamma, &nd.v, &mut half);
            linalg::sub(&nd.x_ckpt, &half)
        })
        .collect();
    let slow: Vec<Vec<T>> = swarm
        .nodes
        .iter()
        .zip(&h)
        .map(|(nd, hi)| {
            nd.y_prev
                .iter()
                .zip(hi)
                .zip(&nd.h_prev)
                .map(|((&yp, &hn), &hp)| yp + hn - hp)
                .collect()
        })
        .collect();
    let y = mixing.mix(&slow)?;
    let anchored: Vec<Vec<T>> = swarm
        .nodes
        .iter()
        .zip(&y)
        .map(|(nd, yi)| linalg::sub(&nd.x_ckpt, yi))
        .collect();
    let x = mixing.mix(&anchored)?;

    for (((nd, hi), yi), xi) in swarm.nodes.iter_mut().zip(h).zip(y).zip(x) {
        ensure_finite(&xi, swarm.t, "x")?;
        nd.x_ckpt.clone_from(&xi);
        nd.h_prev.clone_from(&hi);
        nd.y_prev.clone_from(&yi);
        nd.x = xi;
        nd.h = hi;
        nd.y = yi;
    }
    Ok(())
}
