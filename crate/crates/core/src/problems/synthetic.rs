use super::oracle::sigmoid;
use super::{Loss, ProblemKind, Sample};
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::{StreamKey, StreamTag};
use crate::scalar::Scalar;

/// Everything needed to build a partitioned synthetic [`super::Problem`].
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec<T> {
    pub seed: u64,
    pub kind: ProblemKind<T>,
    pub feature_dim: usize,
    pub n_nodes: usize,
    pub samples_per_node: usize,
    /// Dirichlet concentration; small is non-iid, large is near-iid.
    pub omega: f64,
    pub label_noise: T,
    /// Proxy classes for regression losses (quantile buckets of `a.theta*`).
    /// Ignored for classification, which partitions on the true class.
    pub groups: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub samples: Vec<Sample<T>>,
    /// Hidden parameter the labels were generated from.
    pub truth: Vec<T>,
    /// Partition key per sample: class index or regression bucket.
    pub groups: Vec<usize>,
}

/// Features are i.i.d. standard normal; labels come from a hidden
/// `theta* ~ N(0, 4/d)` plus `label_noise`-scaled Gaussian noise.
///
/// - least squares: `y = a.theta* + noise`
/// - sigmoid regression: `y = clamp(sigmoid(a.theta*) + noise, 0, 1)`
/// - softmax: `y = argmax_k (a.theta*_k + noise_k)`
pub fn generate_synthetic<T: Scalar>(
    seed: u64,
    n_samples: usize,
    feature_dim: usize,
    kind: ProblemKind<T>,
    label_noise: T,
    groups: usize,
) -> Result<Dataset<T>> {
    if n_samples == 0 || feature_dim == 0 {
        return Err(Error::ContractViolation(
            "synthetic data needs n_samples >= 1 and d >= 1".into(),
        ));
    }
    if !(label_noise >= T::zero()) {
        return Err(Error::ContractViolation("label noise must be >= 0".into()));
    }
    let mut feat_rng = StreamKey::global(seed, StreamTag::Features, 0).rng();
    let mut truth_rng = StreamKey::global(seed, StreamTag::Truth, 0).rng();
    let mut noise_rng = StreamKey::global(seed, StreamTag::LabelNoise, 0).rng();

    let scale = T::lit(2.0 / (feature_dim as f64).sqrt());
    let truth: Vec<T> = (0..kind.param_dim(feature_dim))
        .map(|_| T::standard_normal(&mut truth_rng) * scale)
        .collect();

    let mut samples = Vec::with_capacity(n_samples);
    let mut signal = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let features: Vec<T> = (0..feature_dim)
            .map(|_| T::standard_normal(&mut feat_rng))
            .collect();
        let (label, score) = match kind.loss {
            Loss::LeastSquares => {
                let z = linalg::dot(&features, &truth);
                let label = if label_noise == T::zero() {
                    z
                } else {
                    z + label_noise * T::standard_normal(&mut noise_rng)
                };
                (label, z)
            }
            Loss::SigmoidRegression => {
                let z = linalg::dot(&features, &truth);
                let p = sigmoid(z) + label_noise * T::standard_normal(&mut noise_rng);
                (p.max(T::zero()).min(T::one()), z)
            }
            Loss::SoftmaxClassification { classes } => {
                let d = feature_dim;
                let mut best = 0;
                let mut best_score = T::neg_infinity();
                for k in 0..classes {
                    let s = linalg::dot(&features, &truth[k * d..(k + 1) * d])
                        + label_noise * T::standard_normal(&mut noise_rng);
                    if s > best_score {
                        best_score = s;
                        best = k;
                    }
                }
                (T::from_usize(best).unwrap(), T::from_usize(best).unwrap())
            }
        };
        samples.push(Sample { features, label });
        signal.push(score);
    }

    let groups = match kind.loss {
        Loss::SoftmaxClassification { .. } => {
            signal.iter().map(|s| s.to_usize().unwrap()).collect()
        }
        _ => quantile_buckets(&signal, groups.max(1)),
    };
    Ok(Dataset {
        samples,
        truth,
        groups,
    })
}

/// Bucket `rank * k / n` of each value in ascending order (ties by index).
fn quantile_buckets<T: Scalar>(values: &[T], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap().then(a.cmp(&b)));
    let mut out = vec![0; values.len()];
    for (rank, &i) in order.iter().enumerate() {
        out[i] = rank * k / values.len();
    }
    out
}
