#![allow(dead_code)]

use dse_core::problems::{Loss, SyntheticSpec};
use dse_core::{Problem, ProblemKind};

pub fn spec(loss: Loss, n_nodes: usize, d: usize, omega: f64, seed: u64) -> SyntheticSpec<f64> {
    SyntheticSpec {
        seed,
        kind: ProblemKind { loss, mu: 0.0 },
        feature_dim: d,
        n_nodes,
        samples_per_node: 40,
        omega,
        label_noise: 0.1,
        groups: 4,
    }
}

pub fn problem(loss: Loss, n_nodes: usize, d: usize, omega: f64, seed: u64) -> Problem<f64> {
    Problem::synthetic(&spec(loss, n_nodes, d, omega, seed)).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Gradient descent on `F = (1/N) sum_i f_i` for least squares, written out
/// from the loss definition without touching the library's oracles.
pub fn centralized_gd_least_squares(p: &Problem<f64>, gamma: f64, steps: usize) -> Vec<Vec<f64>> {
    let d = p.dim();
    let mut x = vec![0.0; d];
    let mut traj = vec![x.clone()];
    for _ in 0..steps {
        let mut grad = vec![0.0; d];
        for o in p.oracles() {
            let shard = &o.shard().samples;
            let mut local = vec![0.0; d];
            for s in shard {
                let res: f64 = s.features.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() - s.label;
                for (l, a) in local.iter_mut().zip(&s.features) {
                    *l += res * a;
                }
            }
            for k in 0..d {
                grad[k] += local[k] / shard.len() as f64 / p.n_nodes() as f64;
            }
        }
        for k in 0..d {
            x[k] -= gamma * grad[k];
        }
        traj.push(x.clone());
    }
    traj
}
