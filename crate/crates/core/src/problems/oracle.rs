use rand::Rng;

use super::{LocalShard, Loss, ProblemKind};
use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;

/// Below this many samples a pairwise reduction sums sequentially.
const PAIRWISE_BLOCK: usize = 8;

/// Stochastic and exact gradients of one node's objective
/// `f_i(x) = (1/n_i) sum_r loss(x; sample_r) + mu/2 ||x||^2`.
#[derive(Debug, Clone)]
pub struct GradientOracle<T> {
    shard: LocalShard<T>,
    kind: ProblemKind<T>,
    feature_dim: usize,
}

impl<T: Scalar> GradientOracle<T> {
    pub fn new(shard: LocalShard<T>, kind: ProblemKind<T>, feature_dim: usize) -> Result<Self> {
        if shard.is_empty() {
            return Err(Error::ContractViolation(format!(
                "shard of node {} is empty",
                shard.node_id
            )));
        }
        for (r, s) in shard.samples.iter().enumerate() {
            if s.features.len() != feature_dim {
                return Err(Error::ContractViolation(format!(
                    "sample {r} has {} features, expected {feature_dim}",
                    s.features.len()
                )));
            }
            if !linalg::all_finite(&s.features) || !s.label.is_finite() {
                return Err(Error::ContractViolation(format!(
                    "sample {r} is not finite"
                )));
            }
            if let Loss::SoftmaxClassification { classes } = kind.loss {
                let c = s.label.to_usize();
                if c.is_none_or(|c| c >= classes || T::from_usize(c).unwrap() != s.label) {
                    return Err(Error::ContractViolation(format!(
                        "sample {r} label {} is not a class index below {classes}",
                        s.label
                    )));
                }
            }
        }
        Ok(Self {
            shard,
            kind,
            feature_dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.kind.param_dim(self.feature_dim)
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn n_samples(&self) -> usize {
        self.shard.len()
    }

    pub fn shard(&self) -> &LocalShard<T> {
        &self.shard
    }

    pub fn kind(&self) -> &ProblemKind<T> {
        &self.kind
    }

    fn sample_loss(&self, x: &[T], r: usize) -> T {
        let s = &self.shard.samples[r];
        let a = &s.features;
        match self.kind.loss {
            Loss::LeastSquares => {
                let res = linalg::dot(a, x) - s.label;
                T::lit(0.5) * res * res
            }
            Loss::SigmoidRegression => {
                let e = sigmoid(linalg::dot(a, x)) - s.label;
                e * e
            }
            Loss::SoftmaxClassification { classes } => {
                let logits = self.logits(x, a, classes);
                let y = s.label.to_usize().unwrap();
                log_sum_exp(&logits) - logits[y]
            }
        }
    }

    /// Adds the gradient of sample `r`'s loss at `x` into `out`.
    fn add_sample_grad(&self, x: &[T], r: usize, out: &mut [T]) {
        let s = &self.shard.samples[r];
        let a = &s.features;
        match self.kind.loss {
            Loss::LeastSquares => {
                let res = linalg::dot(a, x) - s.label;
                linalg::axpy(res, a, out);
            }
            Loss::SigmoidRegression => {
                let p = sigmoid(linalg::dot(a, x));
                let coef = T::lit(2.0) * (p - s.label) * p * (T::one() - p);
                linalg::axpy(coef, a, out);
            }
            Loss::SoftmaxClassification { classes } => {
                let logits = self.logits(x, a, classes);
                let lse = log_sum_exp(&logits);
                let y = s.label.to_usize().unwrap();
                let d = self.feature_dim;
                for (k, z) in logits.into_iter().enumerate() {
                    let mut coef = (z - lse).exp();
                    if k == y {
                        coef -= T::one();
                    }
                    linalg::axpy(coef, a, &mut out[k * d..(k + 1) * d]);
                }
            }
        }
    }

    fn logits(&self, x: &[T], a: &[T], classes: usize) -> Vec<T> {
        let d = self.feature_dim;
        (0..classes)
            .map(|k| linalg::dot(a, &x[k * d..(k + 1) * d]))
            .collect()
    }

    /// Pairwise sum of per-sample gradients over `idx` into `out`.
    fn grad_sum(&self, x: &[T], idx: &[usize], out: &mut [T]) {
        if idx.len() <= PAIRWISE_BLOCK {
            for &r in idx {
                self.add_sample_grad(x, r, out);
            }
            return;
        }
        let (left, right) = idx.split_at(idx.len() / 2);
        self.grad_sum(x, left, out);
        let mut tmp = vec![T::zero(); out.len()];
        self.grad_sum(x, right, &mut tmp);
        for (o, t) in out.iter_mut().zip(tmp) {
            *o += t;
        }
    }

    fn loss_sum(&self, x: &[T], idx: &[usize]) -> T {
        if idx.len() <= PAIRWISE_BLOCK {
            return idx
                .iter()
                .fold(T::zero(), |acc, &r| acc + self.sample_loss(x, r));
        }
        let (left, right) = idx.split_at(idx.len() / 2);
        self.loss_sum(x, left) + self.loss_sum(x, right)
    }

    /// `(1/b) sum_{r in batch} grad loss(x; sample_r) + mu x`. Indices may
    /// repeat (sampling with replacement).
    pub fn stochastic_gradient(&self, x: &[T], batch: &[usize]) -> Result<Vec<T>> {
        if batch.is_empty() {
            return Err(Error::ContractViolation("empty mini-batch".into()));
        }
        if let Some(&r) = batch.iter().find(|&&r| r >= self.n_samples()) {
            return Err(Error::ContractViolation(format!(
                "batch index {r} out of range for shard of {}",
                self.n_samples()
            )));
        }
        if x.len() != self.dim() {
            return Err(Error::ContractViolation(format!(
                "parameter has dimension {}, expected {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(self.batch_gradient(x, batch))
    }

    fn batch_gradient(&self, x: &[T], batch: &[usize]) -> Vec<T> {
        let mut g = vec![T::zero(); x.len()];
        self.grad_sum(x, batch, &mut g);
        let inv_b = T::one() / T::from_usize(batch.len()).unwrap();
        linalg::scale_in_place(inv_b, &mut g);
        if self.kind.mu != T::zero() {
            linalg::axpy(self.kind.mu, x, &mut g);
        }
        g
    }

    /// Exact local gradient over the whole shard, reduced in a fixed
    /// pairwise order so the result is reproducible bit for bit.
    pub fn full_gradient(&self, x: &[T]) -> Vec<T> {
        let all: Vec<usize> = (0..self.n_samples()).collect();
        self.batch_gradient(x, &all)
    }

    /// Gradient of a single sample's regularized loss.
    pub fn sample_gradient(&self, x: &[T], r: usize) -> Vec<T> {
        self.batch_gradient(x, &[r])
    }

    /// Full-shard objective `f_i(x)`.
    pub fn loss(&self, x: &[T]) -> T {
        let all: Vec<usize> = (0..self.n_samples()).collect();
        let data = self.loss_sum(x, &all) / T::from_usize(self.n_samples()).unwrap();
        data + T::lit(0.5) * self.kind.mu * linalg::norm_sq(x)
    }

    /// Central differences of [`Self::loss`] along each coordinate.
    pub fn finite_difference_gradient(&self, x: &[T], h: T) -> Result<Vec<T>> {
        if !(h > T::zero()) {
            return Err(Error::ContractViolation(format!(
                "step h = {h} must be > 0"
            )));
        }
        let mut probe = x.to_vec();
        Ok((0..x.len())
            .map(|k| {
                let orig = probe[k];
                probe[k] = orig + h;
                let up = self.loss(&probe);
                probe[k] = orig - h;
                let down = self.loss(&probe);
                probe[k] = orig;
                (up - down) / (h + h)
            })
            .collect())
    }

    /// Smoothness constant of `f_i`: exact `lambda_max((1/n) A^T A) + mu`
    /// for least squares, and `sup|loss''| max ||a||^2 + mu` otherwise.
    pub fn estimate_l(&self) -> T {
        let samples = &self.shard.samples;
        let max_norm_sq = samples
            .iter()
            .map(|s| linalg::norm_sq(&s.features))
            .fold(T::zero(), T::max);
        let curvature = match self.kind.loss {
            Loss::LeastSquares => {
                let d = self.feature_dim;
                let mut gram = vec![T::zero(); d * d];
                for s in samples {
                    for i in 0..d {
                        for j in 0..d {
                            gram[i * d + j] += s.features[i] * s.features[j];
                        }
                    }
                }
                let inv_n = T::one() / T::from_usize(samples.len()).unwrap();
                linalg::scale_in_place(inv_n, &mut gram);
                let top = T::symmetric_eigenvalues(&gram, d)
                    .into_iter()
                    .fold(T::zero(), T::max);
                return top + self.kind.mu;
            }
            // l(z) = (s(z) - y)^2: |l''| = 2|s'^2 + (s - y) s''| <= 2 (1/16 + 1/(6 sqrt 3))
            Loss::SigmoidRegression => T::lit(2.0 * (1.0 / 16.0 + 1.0 / (6.0 * 3f64.sqrt()))),
            // Hessian of cross-entropy in the logits is diag(p) - p p^T, norm <= 1/2
            Loss::SoftmaxClassification { .. } => T::lit(0.5),
        };
        curvature * max_norm_sq + self.kind.mu
    }
}

/// `b` indices drawn uniformly with replacement from `[0, shard_size)`.
pub fn sample_batch<R: Rng + ?Sized>(rng: &mut R, shard_size: usize, b: usize) -> Vec<usize> {
    (0..b).map(|_| rng.random_range(0..shard_size)).collect()
}

pub(crate) fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

fn log_sum_exp<T: Scalar>(z: &[T]) -> T {
    let m = z.iter().copied().fold(T::neg_infinity(), T::max);
    m + z.iter().map(|&v| (v - m).exp()).sum::<T>().ln()
}
