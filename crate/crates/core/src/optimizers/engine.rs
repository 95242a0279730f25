use std::time::Instant;

use super::steps::{communicate, draw_batch, ensure_finite, local_step_mvr};
use super::{AlgoParams, Algorithm, DirectionReset, NodeState, SwarmState};
use crate::error::{Error, Result};
use crate::linalg;
use crate::metrics::{consensus_distance_sq, MetricsRow};
use crate::problems::Problem;
use crate::rng::{StreamKey, StreamTag};
use crate::scalar::Scalar;
use crate::topology::MixingMatrix;

/// Runs one algorithm over a problem and a mixing matrix, one synchronous
/// iteration at a time.
///
/// Node `i`'s mini-batch for the gradient evaluated at `x_t` comes from the
/// stream `(seed, i, Batch, t)`, for every algorithm. MVR evaluates both of
/// its gradients on that same batch.
#[derive(Debug, Clone)]
pub struct Engine<'a, T> {
    algorithm: Algorithm,
    problem: &'a Problem<T>,
    mixing: &'a MixingMatrix<T>,
    params: AlgoParams<T>,
    seed: u64,
    swarm: SwarmState<T>,
}

impl<'a, T: Scalar> Engine<'a, T> {
    /// Starts every node at the origin.
    pub fn new(
        algorithm: Algorithm,
        problem: &'a Problem<T>,
        mixing: &'a MixingMatrix<T>,
        params: AlgoParams<T>,
        seed: u64,
    ) -> Result<Self> {
        let x0 = vec![T::zero(); problem.dim()];
        Self::with_initial_point(algorithm, problem, mixing, params, seed, x0)
    }

    pub fn with_initial_point(
        algorithm: Algorithm,
        problem: &'a Problem<T>,
        mixing: &'a MixingMatrix<T>,
        params: AlgoParams<T>,
        seed: u64,
        x0: Vec<T>,
    ) -> Result<Self> {
        params.validate(algorithm)?;
        if problem.n_nodes() != mixing.n() {
            return Err(Error::ContractViolation(format!(
                "problem has {} nodes, mixing matrix is {}x{}",
                problem.n_nodes(),
                mixing.n(),
                mixing.n()
            )));
        }
        if x0.len() != problem.dim() {
            return Err(Error::ContractViolation(format!(
                "x0 has dimension {}, problem has {}",
                x0.len(),
                problem.dim()
            )));
        }
        let mut engine = Self {
            algorithm,
            problem,
            mixing,
            params,
            seed,
            swarm: SwarmState {
                nodes: Vec::with_capacity(problem.n_nodes()),
                t: 0,
                comm_rounds: 0,
            },
        };
        let full_reset =
            algorithm == Algorithm::DseMvr && params.reset == DirectionReset::FullGradient;
        for i in 0..problem.n_nodes() {
            let v0 = if full_reset {
                problem.oracle(i).full_gradient(&x0)
            } else {
                engine.minibatch_gradient(i, &x0, 0)?
            };
            engine.swarm.nodes.push(NodeState::new(x0.clone(), v0));
        }
        Ok(engine)
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn params(&self) -> &AlgoParams<T> {
        &self.params
    }

    pub fn problem(&self) -> &'a Problem<T> {
        self.problem
    }

    pub fn mixing(&self) -> &'a MixingMatrix<T> {
        self.mixing
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn swarm(&self) -> &SwarmState<T> {
        &self.swarm
    }

    /// Replaces the swarm, e.g. to resume from a frozen state.
    pub fn set_swarm(&mut self, swarm: SwarmState<T>) -> Result<()> {
        if swarm.nodes.len() != self.problem.n_nodes()
            || swarm.nodes.iter().any(|n| n.dim() != self.problem.dim())
        {
            return Err(Error::ContractViolation(
                "swarm does not fit the problem".into(),
            ));
        }
        self.swarm = swarm;
        Ok(())
    }

    pub fn t(&self) -> usize {
        self.swarm.t
    }

    pub fn is_done(&self) -> bool {
        self.swarm.t >= self.params.horizon
    }

    pub fn batch_key(&self, node: usize, t: usize) -> StreamKey {
        StreamKey::new(self.seed, node as u64, StreamTag::Batch, t as u64)
    }

    /// `gamma_t` for the next iteration.
    pub fn gamma(&self) -> T {
        self.params.gamma.value(self.swarm.t)
    }

    /// `alpha_t` as logged: the schedule at the current iteration, or 1 for
    /// the SGD-type algorithms.
    pub fn alpha(&self) -> T {
        if self.algorithm.uses_momentum() {
            self.params.alpha.value(self.swarm.t, self.params.tau)
        } else {
            T::one()
        }
    }

    fn minibatch_gradient(&self, node: usize, x: &[T], t: usize) -> Result<Vec<T>> {
        let oracle = self.problem.oracle(node);
        let mut rng = self.batch_key(node, t).rng();
        let batch = draw_batch(oracle, self.params.batching, &mut rng);
        oracle.stochastic_gradient(x, &batch)
    }

    /// Advances the swarm from iteration `t` to `t + 1`.
    pub fn step(&mut self) -> Result<()> {
        let t = self.swarm.t;
        if t >= self.params.horizon {
            return Err(Error::ContractViolation(format!(
                "horizon T = {} already reached",
                self.params.horizon
            )));
        }
        let gamma = self.params.gamma.value(t);
        let comm = self.params.communicates_after(self.algorithm, t);

        match self.algorithm {
            Algorithm::DseMvr | Algorithm::DseSgd if comm => {
                communicate(&mut self.swarm, self.mixing, gamma)?;
                self.swarm.comm_rounds += 1;
                let full = self.algorithm == Algorithm::DseMvr
                    && self.params.reset == DirectionReset::FullGradient;
                self.refresh_directions(t + 1, full)?;
            }
            Algorithm::DseSgd => {
                for node in &mut self.swarm.nodes {
                    linalg::axpy(-gamma, &node.v, &mut node.x);
                    ensure_finite(&node.x, t, "x")?;
                }
                self.refresh_directions(t + 1, false)?;
            }
            Algorithm::DseMvr => {
                let alpha = self.params.alpha.value(t + 1, self.params.tau);
                for (i, node) in self.swarm.nodes.iter_mut().enumerate() {
                    let mut rng =
                        StreamKey::new(self.seed, i as u64, StreamTag::Batch, (t + 1) as u64).rng();
                    local_step_mvr(
                        node,
                        self.problem.oracle(i),
                        gamma,
                        alpha,
                        self.params.batching,
                        &mut rng,
                        t,
                    )?;
                }
            }
            Algorithm::Dsgd | Algorithm::Dlsgd => {
                let half: Vec<Vec<T>> = self
                    .swarm
                    .nodes
                    .iter()
                    .map(|node| {
                        let mut x = node.x.clone();
                        linalg::axpy(-gamma, &node.v, &mut x);
                        x
                    })
                    .collect();
                let next = if comm {
                    self.swarm.comm_rounds += 1;
                    self.mixing.mix(&half)?
                } else {
                    half
                };
                for (node, x) in self.swarm.nodes.iter_mut().zip(next) {
                    ensure_finite(&x, t, "x")?;
                    node.x = x;
                }
                self.refresh_directions(t + 1, false)?;
            }
        }
        self.swarm.t = t + 1;
        Ok(())
    }

    /// Sets every node's direction at its current `x`: the exact local
    /// gradient, or a mini-batch gradient from the stream for iteration `t`.
    fn refresh_directions(&mut self, t: usize, full: bool) -> Result<()> {
        for i in 0..self.swarm.nodes.len() {
            let x = &self.swarm.nodes[i].x;
            let v = if full {
                self.problem.oracle(i).full_gradient(x)
            } else {
                self.minibatch_gradient(i, x, t)?
            };
            ensure_finite(&v, t - 1, "v")?;
            self.swarm.nodes[i].v = v;
        }
        Ok(())
    }

    /// Diagnostics at the current iterate.
    pub fn metrics_row(&self, wall_nanos: u64) -> MetricsRow<T> {
        let xs = self.swarm.xs();
        let x_bar = linalg::mean_of(&xs);
        MetricsRow {
            t: self.swarm.t,
            comm_rounds: self.swarm.comm_rounds,
            loss: self.problem.global_loss(&x_bar),
            grad_norm_sq: linalg::norm_sq(&self.problem.global_gradient(&x_bar)),
            consensus_sq: consensus_distance_sq(&xs),
            gamma_t: self.gamma(),
            alpha_t: self.alpha(),
            wall_nanos,
        }
    }

    /// Default metrics cadence: every iteration up to `T = 10^4`, otherwise
    /// every `tau`-th iteration.
    pub fn default_cadence(&self) -> usize {
        if self.params.horizon <= 10_000 {
            1
        } else {
            self.params.tau
        }
    }

    /// Runs to the horizon, calling `on_row` at `t = 0`, every `cadence`
    /// iterations, and at `t = T`. Wall time is reported only when
    /// `wall_clock` is set (zero otherwise) so that logs stay reproducible.
    pub fn run_with(
        &mut self,
        cadence: usize,
        wall_clock: bool,
        mut on_row: impl FnMut(&MetricsRow<T>),
    ) -> Result<()> {
        let cadence = cadence.max(1);
        let start = Instant::now();
        let elapsed = |start: &Instant| {
            if wall_clock {
                start.elapsed().as_nanos() as u64
            } else {
                0
            }
        };
        if self.swarm.t == 0 || self.swarm.t.is_multiple_of(cadence) {
            on_row(&self.metrics_row(elapsed(&start)));
        }
        while !self.is_done() {
            self.step()?;
            let t = self.swarm.t;
            if t.is_multiple_of(cadence) || t == self.params.horizon {
                on_row(&self.metrics_row(elapsed(&start)));
            }
        }
        Ok(())
    }

    /// [`Self::run_with`] collecting the rows.
    pub fn run(&mut self, cadence: usize) -> Result<Vec<MetricsRow<T>>> {
        let mut rows = Vec::new();
        self.run_with(cadence, false, |r| rows.push(*r))?;
        Ok(rows)
    }
}
