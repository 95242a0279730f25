//! Per-node objectives with mini-batch gradient oracles, synthetic data and
//! heterogeneous partitioning.

mod dataset_csv;
mod oracle;
mod partition;
mod synthetic;

pub use dataset_csv::{read_samples, write_samples};
pub use oracle::{sample_batch, GradientOracle};
pub use partition::{dirichlet_partition, MAX_PARTITION_RETRIES};
pub use synthetic::{generate_synthetic, Dataset, SyntheticSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;

/// One training example. For classification the label holds the class index.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    pub features: Vec<T>,
    pub label: T,
}

/// Samples owned by one node, in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalShard<T> {
    pub node_id: usize,
    pub samples: Vec<Sample<T>>,
}

impl<T> LocalShard<T> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Loss {
    /// `0.5 (a.x - y)^2`
    LeastSquares,
    /// `(sigmoid(a.x) - y)^2` with `y` in `[0, 1]`; smooth and non-convex.
    SigmoidRegression,
    /// Multinomial cross-entropy; the parameter is a `classes x d` matrix
    /// flattened row by row.
    SoftmaxClassification { classes: usize },
}

/// Per-sample loss plus an L2 regularizer `mu / 2 ||x||^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemKind<T> {
    pub loss: Loss,
    pub mu: T,
}

impl<T: Scalar> ProblemKind<T> {
    pub fn new(loss: Loss, mu: T) -> Result<Self> {
        if !(mu >= T::zero()) {
            return Err(Error::ContractViolation(format!(
                "regularizer mu = {mu} < 0"
            )));
        }
        if let Loss::SoftmaxClassification { classes } = loss {
            if classes < 2 {
                return Err(Error::ContractViolation(
                    "softmax needs >= 2 classes".into(),
                ));
            }
        }
        Ok(Self { loss, mu })
    }

    pub fn least_squares() -> Self {
        Self {
            loss: Loss::LeastSquares,
            mu: T::zero(),
        }
    }

    pub fn sigmoid() -> Self {
        Self {
            loss: Loss::SigmoidRegression,
            mu: T::zero(),
        }
    }

    pub fn softmax(classes: usize) -> Self {
        Self {
            loss: Loss::SoftmaxClassification { classes },
            mu: T::zero(),
        }
    }

    /// Parameter dimension for `feature_dim`-dimensional samples.
    pub fn param_dim(&self, feature_dim: usize) -> usize {
        match self.loss {
            Loss::SoftmaxClassification { classes } => classes * feature_dim,
            _ => feature_dim,
        }
    }
}

/// `F(x) = (1/N) sum_i f_i(x)` over the nodes' oracles.
#[derive(Debug, Clone)]
pub struct Problem<T> {
    oracles: Vec<GradientOracle<T>>,
    truth: Option<Vec<T>>,
}

impl<T: Scalar> Problem<T> {
    pub fn new(oracles: Vec<GradientOracle<T>>) -> Result<Self> {
        let dim = oracles
            .first()
            .ok_or_else(|| Error::ContractViolation("problem needs at least one node".into()))?
            .dim();
        if oracles.iter().any(|o| o.dim() != dim) {
            return Err(Error::ContractViolation(
                "node oracles disagree on dimension".into(),
            ));
        }
        Ok(Self {
            oracles,
            truth: None,
        })
    }

    /// Generates, partitions and wraps a synthetic dataset.
    pub fn synthetic(spec: &SyntheticSpec<T>) -> Result<Self> {
        let data = generate_synthetic(
            spec.seed,
            spec.n_nodes * spec.samples_per_node,
            spec.feature_dim,
            spec.kind,
            spec.label_noise,
            spec.groups,
        )?;
        let shards = dirichlet_partition(
            data.samples,
            &data.groups,
            spec.omega,
            spec.n_nodes,
            spec.seed,
        )?;
        let oracles = shards
            .into_iter()
            .map(|s| GradientOracle::new(s, spec.kind, spec.feature_dim))
            .collect::<Result<Vec<_>>>()?;
        let mut p = Self::new(oracles)?;
        p.truth = Some(data.truth);
        Ok(p)
    }

    pub fn with_truth(mut self, truth: Vec<T>) -> Self {
        self.truth = Some(truth);
        self
    }

    /// Hidden parameter used to generate labels, when known.
    pub fn truth(&self) -> Option<&[T]> {
        self.truth.as_deref()
    }

    pub fn n_nodes(&self) -> usize {
        self.oracles.len()
    }

    pub fn dim(&self) -> usize {
        self.oracles[0].dim()
    }

    pub fn oracle(&self, i: usize) -> &GradientOracle<T> {
        &self.oracles[i]
    }

    pub fn oracles(&self) -> &[GradientOracle<T>] {
        &self.oracles
    }

    pub fn global_loss(&self, x: &[T]) -> T {
        let n = T::from_usize(self.n_nodes()).unwrap();
        self.oracles.iter().map(|o| o.loss(x)).sum::<T>() / n
    }

    /// `(1/N) sum_i grad f_i(x)`, reduced in node order.
    pub fn global_gradient(&self, x: &[T]) -> Vec<T> {
        let grads: Vec<Vec<T>> = self.oracles.iter().map(|o| o.full_gradient(x)).collect();
        linalg::mean_of(&grads)
    }

    /// Smoothness constant valid for every local objective.
    pub fn estimate_l(&self) -> T {
        self.oracles
            .iter()
            .map(GradientOracle::estimate_l)
            .fold(T::zero(), T::max)
    }

    pub fn min_shard_len(&self) -> usize {
        self.oracles
            .iter()
            .map(GradientOracle::n_samples)
            .min()
            .unwrap_or(0)
    }
}
