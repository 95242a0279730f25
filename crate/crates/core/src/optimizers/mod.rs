//! Step and communication state machines for the dual-slow estimators and
//! the gossip baselines.

mod engine;
mod steps;

pub use engine::Engine;
pub use steps::{communicate, draw_batch, local_step_mvr};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Slow gradient tracking + slow partial averaging, MVR directions.
    DseMvr,
    /// Same communication, plain mini-batch SGD directions.
    DseSgd,
    /// Gossip SGD: `X <- (X - gamma G) W` every iteration.
    Dsgd,
    /// Local SGD with plain gossip averaging every `tau` iterations.
    Dlsgd,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Self::DseMvr, Self::DseSgd, Self::Dsgd, Self::Dlsgd];

    pub fn name(self) -> &'static str {
        match self {
            Self::DseMvr => "dse_mvr",
            Self::DseSgd => "dse_sgd",
            Self::Dsgd => "dsgd",
            Self::Dlsgd => "dlsgd",
        }
    }

    pub fn uses_momentum(self) -> bool {
        self == Self::DseMvr
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown algorithm {s:?}"))
    }
}

/// How stochastic gradients are formed on each node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Batching {
    /// `b` indices drawn uniformly with replacement.
    Sampled(usize),
    /// Every sample of the shard once, in shard order (exact gradient).
    Full,
}

/// What DSE-MVR does to its direction after a communication round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionReset {
    /// Recompute the exact local gradient (the algorithm as designed). Also
    /// used for the initial direction.
    FullGradient,
    /// Restart from a fresh mini-batch gradient, including at `t = 0`.
    MiniBatch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaSchedule<T> {
    Constant(T),
    /// Halves the rate at iterations `floor(T/2)` and `floor(3T/4)`.
    Halving {
        initial: T,
        horizon: usize,
    },
}

impl<T: Scalar> GammaSchedule<T> {
    pub fn value(&self, t: usize) -> T {
        match *self {
            Self::Constant(g) => g,
            Self::Halving { initial, horizon } => {
                let cuts = [horizon / 2, horizon * 3 / 4];
                let k = cuts.iter().filter(|&&c| t >= c).count() as i32;
                initial * T::lit(0.5).powi(k)
            }
        }
    }

    fn initial(&self) -> T {
        match *self {
            Self::Constant(g) => g,
            Self::Halving { initial, .. } => initial,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaSchedule<T> {
    Constant(T),
    /// `initial * factor^r` where `r` is the number of communication rounds
    /// completed by the iteration the value is used for.
    Decay {
        initial: T,
        factor: T,
    },
}

impl<T: Scalar> AlphaSchedule<T> {
    /// `alpha_t` for iteration index `t`. The schedule is consulted once per
    /// local step, with `t` the index of the direction being produced.
    pub fn value(&self, t: usize, tau: usize) -> T {
        match *self {
            Self::Constant(a) => a,
            Self::Decay { initial, factor } => initial * factor.powi((t / tau.max(1)) as i32),
        }
    }

    fn initial(&self) -> T {
        match *self {
            Self::Constant(a) => a,
            Self::Decay { initial, .. } => initial,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgoParams<T> {
    pub gamma: GammaSchedule<T>,
    /// Ignored by the SGD-type algorithms.
    pub alpha: AlphaSchedule<T>,
    pub tau: usize,
    pub batching: Batching,
    /// Number of iterations `T`.
    pub horizon: usize,
    pub reset: DirectionReset,
}

impl<T: Scalar> AlgoParams<T> {
    pub fn new(gamma: T, tau: usize, batching: Batching, horizon: usize) -> Self {
        Self {
            gamma: GammaSchedule::Constant(gamma),
            alpha: AlphaSchedule::Constant(T::one()),
            tau,
            batching,
            horizon,
            reset: DirectionReset::FullGradient,
        }
    }

    pub fn with_alpha(mut self, alpha: AlphaSchedule<T>) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_gamma(mut self, gamma: GammaSchedule<T>) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_reset(mut self, reset: DirectionReset) -> Self {
        self.reset = reset;
        self
    }

    /// Lists every violated invariant.
    pub fn violations(&self, algorithm: Algorithm) -> Vec<String> {
        let mut out = Vec::new();
        if self.tau == 0 {
            out.push("tau must be >= 1".to_string());
        }
        if self.batching == Batching::Sampled(0) {
            out.push("batch size must be >= 1".to_string());
        }
        if self.horizon == 0 {
            out.push("T must be >= 1".to_string());
        }
        if algorithm != Algorithm::Dsgd && self.tau > 0 && !self.horizon.is_multiple_of(self.tau) {
            out.push("T mod tau != 0".to_string());
        }
        if !(self.gamma.initial() >= T::zero()) || !self.gamma.initial().is_finite() {
            out.push("gamma must be finite and >= 0".to_string());
        }
        if algorithm.uses_momentum() {
            let a = self.alpha.initial();
            if !(a >= T::zero() && a <= T::one()) {
                out.push(format!("alpha = {a} must lie in [0, 1]"));
            }
            if let AlphaSchedule::Decay { factor, .. } = self.alpha {
                if !(factor > T::zero() && factor <= T::one()) {
                    out.push(format!("alpha decay factor {factor} must lie in (0, 1]"));
                }
            }
        }
        out
    }

    pub fn validate(&self, algorithm: Algorithm) -> Result<()> {
        let v = self.violations(algorithm);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::ContractViolation(v.join("; ")))
        }
    }

    /// Whether iteration `t` ends with a communication round.
    pub fn communicates_after(&self, algorithm: Algorithm, t: usize) -> bool {
        match algorithm {
            Algorithm::Dsgd => true,
            _ => (t + 1).is_multiple_of(self.tau),
        }
    }
}

/// Largest multiple of `tau` that is `<= t`: the most recent communication
/// round.
pub fn tau_prev(t: usize, tau: usize) -> usize {
    assert!(tau >= 1, "tau must be >= 1");
    t - t % tau
}

/// One node's buffers. `x_ckpt`, `h_prev` and `y_prev` hold the values from
/// the most recent communication round.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeState<T> {
    pub x: Vec<T>,
    /// Update direction (`v` for MVR, the mini-batch gradient otherwise).
    pub v: Vec<T>,
    /// Tracked estimate of the global accumulated descent.
    pub y: Vec<T>,
    /// Locally accumulated descent over the last `tau` steps.
    pub h: Vec<T>,
    pub x_ckpt: Vec<T>,
    pub h_prev: Vec<T>,
    pub y_prev: Vec<T>,
}

impl<T: Scalar> NodeState<T> {
    /// Fresh node at `x0` with all tracking buffers zeroed.
    pub fn new(x0: Vec<T>, v0: Vec<T>) -> Self {
        let zeros = vec![T::zero(); x0.len()];
        Self {
            x_ckpt: x0.clone(),
            x: x0,
            v: v0,
            y: zeros.clone(),
            h: zeros.clone(),
            h_prev: zeros.clone(),
            y_prev: zeros,
        }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwarmState<T> {
    pub nodes: Vec<NodeState<T>>,
    pub t: usize,
    pub comm_rounds: usize,
}

impl<T: Scalar> SwarmState<T> {
    pub fn xs(&self) -> Vec<Vec<T>> {
        self.nodes.iter().map(|n| n.x.clone()).collect()
    }

    fn mean_by(&self, f: impl Fn(&NodeState<T>) -> &Vec<T>) -> Vec<T> {
        let cols: Vec<Vec<T>> = self.nodes.iter().map(|n| f(n).clone()).collect();
        crate::linalg::mean_of(&cols)
    }

    pub fn mean_x(&self) -> Vec<T> {
        self.mean_by(|n| &n.x)
    }

    pub fn mean_v(&self) -> Vec<T> {
        self.mean_by(|n| &n.v)
    }

    pub fn mean_y(&self) -> Vec<T> {
        self.mean_by(|n| &n.y)
    }

    pub fn mean_h(&self) -> Vec<T> {
        self.mean_by(|n| &n.h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_prev_examples() {
        assert_eq!(tau_prev(5, 3), 3);
        assert_eq!(tau_prev(6, 3), 6);
        assert_eq!(tau_prev(0, 7), 0);
    }

    #[test]
    fn halving_schedule() {
        let g = GammaSchedule::Halving {
            initial: 0.4,
            horizon: 100,
        };
        assert_eq!(g.value(0), 0.4);
        assert_eq!(g.value(49), 0.4);
        assert_eq!(g.value(50), 0.2);
        assert_eq!(g.value(75), 0.1);
        assert_eq!(g.value(99), 0.1);
    }

    #[test]
    fn decay_schedule_steps_per_round() {
        let a = AlphaSchedule::Decay {
            initial: 0.5,
            factor: 0.99,
        };
        assert_eq!(a.value(1, 4), 0.5);
        assert_eq!(a.value(3, 4), 0.5);
        assert_eq!(a.value(4, 4), 0.5 * 0.99);
        assert_eq!(a.value(9, 4), 0.5 * 0.99 * 0.99);
    }

    #[test]
    fn params_violations_are_listed() {
        let p = AlgoParams::new(0.1, 2, Batching::Sampled(1), 101)
            .with_alpha(AlphaSchedule::Constant(1.5));
        let v = p.violations(Algorithm::DseMvr);
        assert!(v.iter().any(|s| s == "T mod tau != 0"));
        assert!(v.iter().any(|s| s.contains("alpha")));
        assert!(p.violations(Algorithm::Dsgd).is_empty());
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("sgd".parse::<Algorithm>().is_err());
    }
}
