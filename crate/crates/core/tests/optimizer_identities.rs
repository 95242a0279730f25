mod common;

use common::{centralized_gd_least_squares, max_abs_diff, problem};
use dse_core::optimizers::{communicate, local_step_mvr};
use dse_core::problems::{GradientOracle, LocalShard, Loss};
use dse_core::topology::{Graph, MixingMatrix};
use dse_core::{
    AlgoParams, Algorithm, AlphaSchedule, Batching, DirectionReset, Engine, NodeState, Problem,
    ProblemKind, Sample, StreamKey, StreamTag,
};

fn ring(n: usize) -> MixingMatrix<f64> {
    MixingMatrix::metropolis_hastings(&Graph::ring(n).unwrap()).unwrap()
}

#[test]
fn average_iterate_follows_mean_direction_every_step() {
    let p = problem(Loss::SigmoidRegression, 4, 6, 0.1, 3);
    let w = ring(4);
    for algo in [Algorithm::DseMvr, Algorithm::DseSgd] {
        let params = AlgoParams::new(0.05, 3, Batching::Sampled(2), 300)
            .with_alpha(AlphaSchedule::Constant(0.3));
        let mut e = Engine::new(algo, &p, &w, params, 9).unwrap();
        let mut worst = 0.0f64;
        while !e.is_done() {
            let gamma = e.gamma();
            let x_bar = e.swarm().mean_x();
            let v_bar = e.swarm().mean_v();
            e.step().unwrap();
            let want: Vec<f64> = x_bar
                .iter()
                .zip(&v_bar)
                .map(|(x, v)| x - gamma * v)
                .collect();
            worst = worst.max(max_abs_diff(&e.swarm().mean_x(), &want));
        }
        assert!(worst <= 1e-10, "{algo:?}: {worst}");
    }
}

#[test]
fn tracking_identity_after_each_round() {
    let p = problem(Loss::SigmoidRegression, 4, 6, 0.1, 4);
    let w = ring(4);
    let params =
        AlgoParams::new(0.05, 3, Batching::Sampled(2), 60).with_alpha(AlphaSchedule::Constant(0.3));
    let mut e = Engine::new(Algorithm::DseMvr, &p, &w, params, 1).unwrap();
    let mut rounds = 0;
    while !e.is_done() {
        let before = e.swarm().comm_rounds;
        e.step().unwrap();
        if e.swarm().comm_rounds > before {
            rounds += 1;
            let s = e.swarm();
            assert!(max_abs_diff(&s.mean_y(), &s.mean_h()) <= 1e-12);
        }
    }
    assert_eq!(rounds, 20);
}

#[test]
fn first_round_tracks_accumulated_mean_descent() {
    let p = problem(Loss::LeastSquares, 4, 5, 0.3, 5);
    let w = ring(4);
    let tau = 4;
    let params = AlgoParams::new(0.02, tau, Batching::Sampled(3), 8)
        .with_alpha(AlphaSchedule::Constant(0.5));
    let mut e = Engine::new(Algorithm::DseMvr, &p, &w, params, 2).unwrap();
    let mut accumulated = vec![0.0; p.dim()];
    for _ in 0..tau {
        let gamma = e.gamma();
        for (a, v) in accumulated.iter_mut().zip(e.swarm().mean_v()) {
            *a += gamma * v;
        }
        e.step().unwrap();
    }
    let s = e.swarm();
    assert!(max_abs_diff(&s.mean_y(), &accumulated) <= 1e-12);
    assert!(max_abs_diff(&s.mean_h(), &accumulated) <= 1e-12);
}

#[test]
fn reset_recomputes_exact_gradient_after_rounds() {
    let p = problem(Loss::SoftmaxClassification { classes: 3 }, 4, 4, 0.5, 6);
    let w = ring(4);
    let params =
        AlgoParams::new(0.1, 5, Batching::Sampled(2), 50).with_alpha(AlphaSchedule::Constant(0.2));
    let mut e = Engine::new(Algorithm::DseMvr, &p, &w, params, 3).unwrap();
    while !e.is_done() {
        e.step().unwrap();
        if e.t().is_multiple_of(5) {
            for (i, node) in e.swarm().nodes.iter().enumerate() {
                assert_eq!(node.v, p.oracle(i).full_gradient(&node.x));
            }
        }
    }
}

#[test]
fn checkpoints_constant_between_rounds() {
    let p = problem(Loss::SigmoidRegression, 4, 3, 1.0, 7);
    let w = ring(4);
    let tau = 4;
    let params = AlgoParams::new(0.1, tau, Batching::Sampled(1), 40);
    let mut e = Engine::new(Algorithm::DseSgd, &p, &w, params, 4).unwrap();
    let mut ckpt = e.swarm().nodes.clone();
    while !e.is_done() {
        e.step().unwrap();
        let s = e.swarm();
        assert_eq!(s.comm_rounds, s.t / tau);
        if s.t % tau != 0 {
            for (a, b) in s.nodes.iter().zip(&ckpt) {
                assert_eq!(a.x_ckpt, b.x_ckpt);
                assert_eq!(a.h_prev, b.h_prev);
                assert_eq!(a.y_prev, b.y_prev);
            }
        } else {
            ckpt = s.nodes.clone();
        }
    }
}

#[test]
fn centralized_reduction_for_both_dse_algorithms() {
    let p = problem(Loss::LeastSquares, 4, 10, 0.3, 8);
    let q = MixingMatrix::uniform(4).unwrap();
    let gamma = 0.05;
    let oracle_traj = centralized_gd_least_squares(&p, gamma, 100);
    for algo in [Algorithm::DseMvr, Algorithm::DseSgd, Algorithm::Dsgd] {
        let params = AlgoParams::new(gamma, 1, Batching::Full, 100);
        let mut e = Engine::new(algo, &p, &q, params, 1).unwrap();
        for want in &oracle_traj[1..] {
            e.step().unwrap();
            let got = e.swarm().mean_x();
            assert!(max_abs_diff(&got, want) <= 1e-10, "{algo:?} at t={}", e.t());
        }
    }
}

#[test]
fn dlsgd_with_identical_shards_is_centralized_gd() {
    let base = problem(Loss::LeastSquares, 1, 4, 1.0, 10);
    let shard = base.oracle(0).shard().samples.clone();
    let oracles = (0..4)
        .map(|i| {
            GradientOracle::new(
                LocalShard {
                    node_id: i,
                    samples: shard.clone(),
                },
                ProblemKind::least_squares(),
                4,
            )
            .unwrap()
        })
        .collect();
    let p = Problem::new(oracles).unwrap();
    let q = MixingMatrix::uniform(4).unwrap();
    let oracle_traj = centralized_gd_least_squares(&p, 0.05, 60);
    let params = AlgoParams::new(0.05, 3, Batching::Full, 60);
    let mut e = Engine::new(Algorithm::Dlsgd, &p, &q, params, 1).unwrap();
    for want in &oracle_traj[1..] {
        e.step().unwrap();
        assert!(max_abs_diff(&e.swarm().mean_x(), want) <= 1e-10);
    }
}

#[test]
fn mvr_with_unit_alpha_and_minibatch_reset_is_dse_sgd() {
    let p = problem(Loss::SigmoidRegression, 4, 5, 0.1, 11);
    let w = ring(4);
    let base = AlgoParams::new(0.1, 4, Batching::Sampled(3), 200);
    let mvr = base
        .with_alpha(AlphaSchedule::Constant(1.0))
        .with_reset(DirectionReset::MiniBatch);
    let mut a = Engine::new(Algorithm::DseMvr, &p, &w, mvr, 5).unwrap();
    let mut b = Engine::new(Algorithm::DseSgd, &p, &w, base, 5).unwrap();
    while !a.is_done() {
        a.step().unwrap();
        b.step().unwrap();
        for (na, nb) in a.swarm().nodes.iter().zip(&b.swarm().nodes) {
            assert!(max_abs_diff(&na.x, &nb.x) <= 1e-12);
        }
    }
}

#[test]
fn single_node_dse_sgd_is_plain_minibatch_sgd() {
    let p = problem(Loss::SigmoidRegression, 1, 4, 1.0, 12);
    let w = MixingMatrix::uniform(1).unwrap();
    let (gamma, b, steps, seed) = (0.2, 3, 80, 6);
    let params = AlgoParams::new(gamma, 1, Batching::Sampled(b), steps);
    let mut e = Engine::new(Algorithm::DseSgd, &p, &w, params, seed).unwrap();

    let o = p.oracle(0);
    let mut x = vec![0.0; 4];
    for t in 0..steps {
        let mut rng = StreamKey::new(seed, 0, StreamTag::Batch, t as u64).rng();
        let batch = dse_core::problems::sample_batch(&mut rng, o.n_samples(), b);
        let g = o.stochastic_gradient(&x, &batch).unwrap();
        for k in 0..4 {
            x[k] -= gamma * g[k];
        }
        e.step().unwrap();
        assert!(max_abs_diff(&e.swarm().nodes[0].x, &x) <= 1e-12);
    }
}

#[test]
fn dlsgd_with_unit_interval_is_dsgd() {
    let p = problem(Loss::SigmoidRegression, 5, 4, 0.2, 13);
    let w = ring(5);
    let params = AlgoParams::new(0.1, 1, Batching::Sampled(2), 100);
    let mut a = Engine::new(Algorithm::Dlsgd, &p, &w, params, 8).unwrap();
    let mut b = Engine::new(Algorithm::Dsgd, &p, &w, params, 8).unwrap();
    while !a.is_done() {
        a.step().unwrap();
        b.step().unwrap();
        assert_eq!(a.swarm(), b.swarm());
    }
}

#[test]
fn zero_step_size_is_stationary() {
    let p = problem(Loss::SigmoidRegression, 4, 4, 0.2, 14);
    let w = ring(4);
    for algo in Algorithm::ALL {
        let params = AlgoParams::new(0.0, 2, Batching::Sampled(2), 20)
            .with_alpha(AlphaSchedule::Constant(0.5));
        let mut e = Engine::new(algo, &p, &w, params, 1).unwrap();
        let x0 = e.swarm().mean_x();
        e.run(1).unwrap();
        assert_eq!(e.swarm().mean_x(), x0, "{algo:?}");
        for n in &e.swarm().nodes {
            assert_eq!(n.x, x0);
        }
    }
}

#[test]
fn comm_round_counts() {
    let p = problem(Loss::LeastSquares, 4, 3, 1.0, 15);
    let w = ring(4);
    let params = AlgoParams::new(0.01, 5, Batching::Sampled(1), 50);
    for (algo, rounds) in [
        (Algorithm::DseSgd, 10),
        (Algorithm::Dlsgd, 10),
        (Algorithm::Dsgd, 50),
    ] {
        let mut e = Engine::new(algo, &p, &w, params, 1).unwrap();
        let rows = e.run(1).unwrap();
        assert_eq!(rows.len(), 51);
        assert_eq!(rows.last().unwrap().comm_rounds, rounds);
        assert!(rows.windows(2).all(|r| r[1].t == r[0].t + 1));
    }
}

#[test]
fn uniform_mixing_reaches_consensus_in_one_round() {
    let p = problem(Loss::SigmoidRegression, 4, 4, 0.1, 16);
    let q = MixingMatrix::uniform(4).unwrap();
    let params = AlgoParams::new(0.2, 3, Batching::Sampled(2), 3);
    let mut e = Engine::new(Algorithm::DseSgd, &p, &q, params, 2).unwrap();
    e.step().unwrap();
    e.step().unwrap();
    assert_ne!(e.swarm().nodes[0].x, e.swarm().nodes[1].x);
    e.step().unwrap();
    let x0 = &e.swarm().nodes[0].x;
    assert!(e.swarm().nodes.iter().all(|n| &n.x == x0));
}

#[test]
fn single_node_communication_is_a_local_step() {
    let p = problem(Loss::SigmoidRegression, 1, 3, 1.0, 17);
    let w = MixingMatrix::uniform(1).unwrap();
    let o = p.oracle(0);
    let x0 = vec![0.3, -0.2, 0.1];
    let mut swarm = dse_core::SwarmState {
        nodes: vec![NodeState::new(x0.clone(), o.full_gradient(&x0))],
        t: 0,
        comm_rounds: 0,
    };
    // a few local steps first so the checkpoint differs from x
    let mut rng = StreamKey::new(1, 0, StreamTag::Batch, 1).rng();
    local_step_mvr(
        &mut swarm.nodes[0],
        o,
        0.1,
        0.4,
        Batching::Sampled(2),
        &mut rng,
        0,
    )
    .unwrap();
    let node = &swarm.nodes[0];
    let want: Vec<f64> = node
        .x
        .iter()
        .zip(&node.v)
        .map(|(x, v)| x - 0.1 * v)
        .collect();
    communicate(&mut swarm, &w, 0.1).unwrap();
    assert!(max_abs_diff(&swarm.nodes[0].x, &want) <= 1e-14);
}

#[test]
fn communicate_rejects_mismatched_matrix() {
    let mut swarm = dse_core::SwarmState {
        nodes: vec![NodeState::new(vec![0.0], vec![0.0]); 3],
        t: 0,
        comm_rounds: 0,
    };
    let w = MixingMatrix::uniform(4).unwrap();
    assert!(matches!(
        communicate(&mut swarm, &w, 0.1),
        Err(dse_core::Error::ContractViolation(_))
    ));
}

fn two_sample_oracle() -> GradientOracle<f64> {
    GradientOracle::new(
        LocalShard {
            node_id: 0,
            samples: vec![
                Sample {
                    features: vec![1.0, 0.5],
                    label: 0.8,
                },
                Sample {
                    features: vec![-0.4, 1.5],
                    label: 0.1,
                },
            ],
        },
        ProblemKind::sigmoid(),
        2,
    )
    .unwrap()
}

#[test]
fn mvr_unit_alpha_is_minibatch_direction() {
    let o = two_sample_oracle();
    let mut node = NodeState::new(vec![0.2, -0.1], vec![5.0, -3.0]);
    let mut rng = StreamKey::new(3, 0, StreamTag::Batch, 1).rng();
    local_step_mvr(&mut node, &o, 0.1, 1.0, Batching::Sampled(1), &mut rng, 0).unwrap();
    let mut rng = StreamKey::new(3, 0, StreamTag::Batch, 1).rng();
    let batch = dse_core::problems::sample_batch(&mut rng, 2, 1);
    assert_eq!(node.v, o.stochastic_gradient(&node.x, &batch).unwrap());
}

#[test]
fn mvr_full_batch_identity() {
    let o = two_sample_oracle();
    let x0 = vec![0.2, -0.1];
    let alpha = 0.3;
    let v0 = vec![0.7, 0.05];
    let mut node = NodeState::new(x0.clone(), v0.clone());
    let mut rng = StreamKey::new(3, 0, StreamTag::Batch, 1).rng();
    local_step_mvr(&mut node, &o, 0.1, alpha, Batching::Full, &mut rng, 0).unwrap();
    let g_new = o.full_gradient(&node.x);
    let g_old = o.full_gradient(&x0);
    let want: Vec<f64> = (0..2)
        .map(|k| g_new[k] + (1.0 - alpha) * (v0[k] - g_old[k]))
        .collect();
    assert!(max_abs_diff(&node.v, &want) <= 1e-14);

    // starting from the exact gradient the direction stays exact
    let mut node = NodeState::new(x0.clone(), o.full_gradient(&x0));
    local_step_mvr(&mut node, &o, 0.1, alpha, Batching::Full, &mut rng, 0).unwrap();
    assert!(max_abs_diff(&node.v, &o.full_gradient(&node.x)) <= 1e-14);
}

#[test]
fn mvr_zero_step_uses_the_same_batch_twice() {
    let o = two_sample_oracle();
    let x0 = vec![0.2, -0.1];
    let v0 = vec![0.7, 0.05];
    let alpha = 0.25;
    let mut node = NodeState::new(x0.clone(), v0.clone());
    let mut rng = StreamKey::new(4, 0, StreamTag::Batch, 1).rng();
    local_step_mvr(&mut node, &o, 0.0, alpha, Batching::Sampled(1), &mut rng, 0).unwrap();
    assert_eq!(node.x, x0);
    let mut rng = StreamKey::new(4, 0, StreamTag::Batch, 1).rng();
    let batch = dse_core::problems::sample_batch(&mut rng, 2, 1);
    let g = o.stochastic_gradient(&x0, &batch).unwrap();
    let want: Vec<f64> = (0..2)
        .map(|k| g[k] + (1.0 - alpha) * (v0[k] - g[k]))
        .collect();
    assert!(max_abs_diff(&node.v, &want) <= 1e-15);
}

#[test]
fn divergence_reports_iteration() {
    let p = problem(Loss::LeastSquares, 4, 5, 1.0, 18);
    let w = ring(4);
    let params = AlgoParams::new(1e6, 2, Batching::Sampled(4), 400);
    let mut e = Engine::new(Algorithm::DseSgd, &p, &w, params, 1).unwrap();
    match e.run(1) {
        Err(dse_core::Error::Divergence { iteration, .. }) => assert!(iteration < 400),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn invalid_horizon_rejected() {
    let p = problem(Loss::LeastSquares, 4, 3, 1.0, 19);
    let w = ring(4);
    let params = AlgoParams::new(0.01, 2, Batching::Sampled(1), 101);
    assert!(Engine::new(Algorithm::DseMvr, &p, &w, params, 1).is_err());
}

#[test]
fn consensus_stays_bounded_inside_theory_step() {
    for seed in 0..5 {
        let p = problem(Loss::LeastSquares, 8, 5, 0.1, 100 + seed);
        let w = ring(8);
        let l = p.estimate_l();
        let gamma = dse_core::theory::max_gamma_dse_mvr(l, w.lambda(), 4).unwrap();
        let alpha = dse_core::theory::alpha_theory(l, gamma, 8, 2).unwrap();
        let params = AlgoParams::new(gamma, 4, Batching::Sampled(2), 2000)
            .with_alpha(AlphaSchedule::Constant(alpha));
        let mut e = Engine::new(Algorithm::DseMvr, &p, &w, params, seed).unwrap();
        let rows = e.run(1).unwrap();
        let worst = rows.iter().map(|r| r.consensus_sq).fold(0.0, f64::max);
        let last_quarter = rows[1500..]
            .iter()
            .map(|r| r.consensus_sq)
            .fold(0.0, f64::max);
        assert!(worst.is_finite() && worst < 1.0, "seed {seed}: {worst}");
        assert!(last_quarter <= worst);
    }
}

#[test]
fn f32_engine_runs() {
    let spec = dse_core::problems::SyntheticSpec {
        seed: 1,
        kind: ProblemKind::<f32>::sigmoid(),
        feature_dim: 4,
        n_nodes: 4,
        samples_per_node: 20,
        omega: 0.5,
        label_noise: 0.1,
        groups: 2,
    };
    let p = dse_core::Problem32::synthetic(&spec).unwrap();
    let w = dse_core::MixingMatrix32::metropolis_hastings(&Graph::ring(4).unwrap()).unwrap();
    let params = AlgoParams::new(0.1f32, 2, Batching::Sampled(2), 40)
        .with_alpha(AlphaSchedule::Constant(0.5));
    let mut e = dse_core::Engine32::new(Algorithm::DseMvr, &p, &w, params, 1).unwrap();
    let rows = e.run(1).unwrap();
    assert!(rows.last().unwrap().loss < rows[0].loss);
}
