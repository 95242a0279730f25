//! Diagnostics logged per iteration and the empirical quantities behind the
//! smoothness, noise, heterogeneity and consensus assumptions.

use crate::linalg;
use crate::optimizers::Batching;
use crate::problems::{sample_batch, GradientOracle, Problem};
use crate::rng::{StreamKey, StreamTag};
use crate::scalar::Scalar;

/// Column order of the metrics CSV.
pub const CSV_HEADER: &str =
    "t,comm_rounds,loss,grad_norm_sq,consensus_sq,gamma_t,alpha_t,wall_nanos";

/// Scientific notation with 17 significant digits; round-trips any `f64`.
pub fn format_sig17(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow<T> {
    pub t: usize,
    pub comm_rounds: usize,
    /// `F(x_bar_t)`
    pub loss: T,
    /// `||grad F(x_bar_t)||^2`
    pub grad_norm_sq: T,
    /// `||X_t - X_bar_t||_F^2`
    pub consensus_sq: T,
    pub gamma_t: T,
    pub alpha_t: T,
    pub wall_nanos: u64,
}

impl<T: Scalar> MetricsRow<T> {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.t,
            self.comm_rounds,
            format_sig17(self.loss.as_f64()),
            format_sig17(self.grad_norm_sq.as_f64()),
            format_sig17(self.consensus_sq.as_f64()),
            format_sig17(self.gamma_t.as_f64()),
            format_sig17(self.alpha_t.as_f64()),
            self.wall_nanos
        )
    }
}

/// `sum_i ||x_i - x_bar||^2` over the node vectors.
pub fn consensus_distance_sq<T: Scalar>(xs: &[Vec<T>]) -> T {
    let mean = linalg::mean_of(xs);
    xs.iter().map(|x| linalg::dist_sq(x, &mean)).sum()
}

/// `||(1/N) sum_i grad f_i(x_bar)||^2`
pub fn global_grad_norm_sq<T: Scalar>(problem: &Problem<T>, x_bar: &[T]) -> T {
    linalg::norm_sq(&problem.global_gradient(x_bar))
}

/// `(1/N) sum_i ||grad f_i(x) - grad F(x)||^2`
pub fn heterogeneity_sq<T: Scalar>(problem: &Problem<T>, x: &[T]) -> T {
    let grads: Vec<Vec<T>> = problem
        .oracles()
        .iter()
        .map(|o| o.full_gradient(x))
        .collect();
    let mean = linalg::mean_of(&grads);
    let n = T::from_usize(grads.len()).unwrap();
    grads.iter().map(|g| linalg::dist_sq(g, &mean)).sum::<T>() / n
}

/// Monte-Carlo mean of `||g_b(x) - grad f_i(x)||^2` over `m` batch draws.
/// Full batches are deterministic, so their estimate is exactly zero.
pub fn noise_sq_estimate<T: Scalar>(
    oracle: &GradientOracle<T>,
    x: &[T],
    batching: Batching,
    m: usize,
    seed: u64,
) -> T {
    let b = match batching {
        Batching::Full => return T::zero(),
        Batching::Sampled(b) => b,
    };
    let full = oracle.full_gradient(x);
    let node = oracle.shard().node_id as u64;
    let total: T = (0..m as u64)
        .map(|draw| {
            let mut rng = StreamKey::new(seed, node, StreamTag::Diagnostics, draw).rng();
            let batch = sample_batch(&mut rng, oracle.n_samples(), b);
            let g = oracle
                .stochastic_gradient(x, &batch)
                .expect("batch indices drawn in range");
            linalg::dist_sq(&g, &full)
        })
        .sum();
    total / T::from_usize(m.max(1)).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{LocalShard, ProblemKind, Sample};
    use approx::assert_abs_diff_eq;

    fn oracle(samples: Vec<(Vec<f64>, f64)>, node_id: usize) -> GradientOracle<f64> {
        GradientOracle::new(
            LocalShard {
                node_id,
                samples: samples
                    .into_iter()
                    .map(|(features, label)| Sample { features, label })
                    .collect(),
            },
            ProblemKind::least_squares(),
            2,
        )
        .unwrap()
    }

    #[test]
    fn consensus_distance_examples() {
        assert_eq!(
            consensus_distance_sq(&[vec![1.0, 2.0], vec![1.0, 2.0]]),
            0.0
        );
        assert_eq!(consensus_distance_sq(&[vec![0.0], vec![2.0]]), 2.0);
        let xs = vec![vec![0.3, -1.0], vec![2.0, 0.5], vec![-0.7, 0.1]];
        let shifted: Vec<Vec<f64>> = xs.iter().map(|x| vec![x[0] + 5.0, x[1] - 3.0]).collect();
        assert_abs_diff_eq!(
            consensus_distance_sq(&xs),
            consensus_distance_sq(&shifted),
            epsilon = 1e-12
        );
    }

    #[test]
    fn identical_shards_have_no_heterogeneity() {
        let s = vec![(vec![1.0, 0.5], 1.0), (vec![-0.2, 0.3], 0.0)];
        let p = Problem::new(vec![
            oracle(s.clone(), 0),
            oracle(s.clone(), 1),
            oracle(s, 2),
        ])
        .unwrap();
        assert!(heterogeneity_sq(&p, &[0.4, -0.9]) <= 1e-20);
        let single = Problem::new(vec![oracle(vec![(vec![1.0, 0.5], 1.0)], 0)]).unwrap();
        assert_eq!(heterogeneity_sq(&single, &[0.4, -0.9]), 0.0);
        let x = [0.4, -0.9];
        assert_eq!(
            global_grad_norm_sq(&single, &x),
            linalg::norm_sq(&single.oracle(0).full_gradient(&x))
        );
    }

    #[test]
    fn noise_of_degenerate_shards_is_zero() {
        let one = oracle(vec![(vec![1.0, 0.5], 1.0)], 0);
        assert_eq!(
            noise_sq_estimate(&one, &[0.2, 0.2], Batching::Sampled(1), 50, 1),
            0.0
        );
        let two = oracle(vec![(vec![1.0, 0.5], 1.0), (vec![0.0, 2.0], -1.0)], 0);
        assert_eq!(
            noise_sq_estimate(&two, &[0.2, 0.2], Batching::Full, 50, 1),
            0.0
        );
    }

    #[test]
    fn noise_of_two_sample_shard_is_quarter_gap() {
        let o = oracle(vec![(vec![1.0, 0.5], 1.0), (vec![0.0, 2.0], -1.0)], 0);
        let x = [0.2, -0.4];
        let g1 = o.sample_gradient(&x, 0);
        let g2 = o.sample_gradient(&x, 1);
        // both draws sit at distance |g1 - g2| / 2 from the mean
        let est = noise_sq_estimate(&o, &x, Batching::Sampled(1), 1000, 3);
        assert_abs_diff_eq!(est, 0.25 * linalg::dist_sq(&g1, &g2), epsilon = 1e-12);
    }

    #[test]
    fn noise_estimate_converges_to_enumerated_population_value() {
        let o = oracle(
            vec![
                (vec![1.0, 0.5], 1.0),
                (vec![0.0, 2.0], -1.0),
                (vec![-1.5, 0.3], 0.2),
            ],
            0,
        );
        let x = [0.2, -0.4];
        let full = o.full_gradient(&x);
        let per_draw: Vec<f64> = (0..3)
            .map(|r| linalg::dist_sq(&o.sample_gradient(&x, r), &full))
            .collect();
        let exact = per_draw.iter().sum::<f64>() / 3.0;
        let sd = (per_draw.iter().map(|v| (v - exact).powi(2)).sum::<f64>() / 3.0).sqrt();
        let m = 10_000;
        let est = noise_sq_estimate(&o, &x, Batching::Sampled(1), m, 3);
        assert!(
            (est - exact).abs() <= 5.0 * sd / (m as f64).sqrt(),
            "{est} vs {exact}"
        );
    }

    #[test]
    fn csv_line_layout() {
        let row = MetricsRow {
            t: 3,
            comm_rounds: 1,
            loss: 0.5,
            grad_norm_sq: 0.0,
            consensus_sq: 2.0,
            gamma_t: 0.1,
            alpha_t: 1.0,
            wall_nanos: 0,
        };
        assert_eq!(
            row.to_csv_line(),
            "3,1,5.0000000000000000e-1,0.0000000000000000e0,2.0000000000000000e0,1.0000000000000001e-1,1.0000000000000000e0,0"
        );
        assert_eq!(CSV_HEADER.split(',').count(), 8);
    }
}
