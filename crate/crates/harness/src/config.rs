//! Run configuration: a TOML document with top-level run keys and
//! `[topology]`, `[problem]`, `[gamma]`, `[alpha]`, `[metrics]`, `[output]`
//! sections.
//!
//! ```toml
//! algorithm = "dse_sgd"
//! seed = 7
//! iterations = 100
//! tau = 2
//! batch_size = 1
//!
//! [topology]
//! kind = "ring"
//! nodes = 4
//!
//! [problem]
//! kind = "sigmoid"
//! dim = 10
//! samples_per_node = 50
//! omega = 0.1
//!
//! [gamma]
//! schedule = "constant"
//! value = 0.01
//! ```

use std::path::{Path, PathBuf};

use dse_core::optimizers::{AlphaSchedule, GammaSchedule};
use dse_core::problems::{Loss, SyntheticSpec};
use dse_core::theory::{self, CorollaryId, TheoryInputs};
use dse_core::{
    AlgoParams, Algorithm, Batching, DirectionReset, Graph, MixingMatrix64, Problem64, ProblemKind,
};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub seed: u64,
    /// Horizon `T`.
    pub iterations: usize,
    pub tau: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    /// Use exact local gradients instead of sampled batches.
    #[serde(default)]
    pub full_batch: bool,
    /// Momentum runs only: replace the full-gradient reset with a mini-batch one.
    #[serde(default)]
    pub minibatch_reset: bool,
    pub topology: TopologyConfig,
    pub problem: ProblemConfig,
    pub gamma: GammaConfig,
    #[serde(default)]
    pub alpha: AlphaConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_batch() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    Ring,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    pub kind: TopologyKind,
    pub nodes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemName {
    LeastSquares,
    Sigmoid,
    Softmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: ProblemName,
    pub dim: usize,
    pub samples_per_node: usize,
    #[serde(default = "default_omega")]
    pub omega: f64,
    #[serde(default = "default_noise")]
    pub label_noise: f64,
    #[serde(default)]
    pub regularizer: f64,
    /// Softmax only.
    #[serde(default = "default_classes")]
    pub classes: usize,
    /// Partition buckets for the regression losses.
    #[serde(default = "default_groups")]
    pub groups: usize,
    /// Overrides the estimated smoothness constant in theory computations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
}

fn default_omega() -> f64 {
    1.0
}
fn default_noise() -> f64 {
    0.1
}
fn default_classes() -> usize {
    3
}
fn default_groups() -> usize {
    10
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaKind {
    Constant,
    Halving,
    Corollary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaConfig {
    pub schedule: GammaKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corollary: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaKind {
    Constant,
    Decay,
    Theory,
    Corollary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaConfig {
    pub schedule: AlphaKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default = "default_decay")]
    pub decay: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corollary: Option<u32>,
}

fn default_decay() -> f64 {
    0.99
}

impl Default for AlphaConfig {
    fn default() -> Self {
        Self {
            schedule: AlphaKind::Constant,
            value: Some(1.0),
            decay: default_decay(),
            corollary: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cadence: Option<usize>,
    /// Record elapsed wall time; off by default so CSVs stay byte-stable.
    #[serde(default)]
    pub wall_clock: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("runs"),
        }
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_config_str(&text)
}

/// Parses and validates. Every violated invariant is reported at once.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
    cfg.check()?;
    Ok(cfg)
}

impl RunConfig {
    /// Invariant violations, each prefixed with the offending key.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut bad = |key: &str, msg: &str| out.push(format!("{key}: {msg}"));
        if self.tau == 0 {
            bad("tau", "must be >= 1");
        }
        if self.iterations == 0 {
            bad("iterations", "must be >= 1");
        }
        if self.tau > 0
            && self.algorithm != Algorithm::Dsgd
            && !self.iterations.is_multiple_of(self.tau)
        {
            bad("iterations", "T mod tau != 0");
        }
        if self.batch_size == 0 {
            bad("batch_size", "must be >= 1");
        }
        if self.full_batch && self.batch_size > self.problem.samples_per_node {
            bad("batch_size", "exceeds samples_per_node with full_batch set");
        }
        let min_nodes = match self.topology.kind {
            TopologyKind::Ring => 3,
            TopologyKind::Complete => 1,
        };
        if self.topology.nodes < min_nodes {
            bad("topology.nodes", &format!("must be >= {min_nodes}"));
        }
        let p = &self.problem;
        if p.dim == 0 {
            bad("problem.dim", "must be >= 1");
        }
        if p.samples_per_node == 0 {
            bad("problem.samples_per_node", "must be >= 1");
        }
        if !(p.omega > 0.0 && p.omega.is_finite()) {
            bad("problem.omega", "must be positive and finite");
        }
        if !(p.label_noise >= 0.0) {
            bad("problem.label_noise", "must be >= 0");
        }
        if !(p.regularizer >= 0.0) {
            bad("problem.regularizer", "must be >= 0");
        }
        if p.kind == ProblemName::Softmax && p.classes < 2 {
            bad("problem.classes", "must be >= 2");
        }
        if p.groups == 0 {
            bad("problem.groups", "must be >= 1");
        }
        if let Some(l) = p.lipschitz {
            if !(l > 0.0 && l.is_finite()) {
                bad("problem.lipschitz", "must be positive and finite");
            }
        }

        match self.gamma.schedule {
            GammaKind::Constant | GammaKind::Halving => match self.gamma.value {
                Some(g) if g >= 0.0 && g.is_finite() => {}
                Some(_) => bad("gamma.value", "must be finite and >= 0"),
                None => bad("gamma.value", "required for this schedule"),
            },
            GammaKind::Corollary => {
                check_corollary(&mut bad, "gamma.corollary", self.gamma.corollary)
            }
        }
        if self.algorithm.uses_momentum() {
            match self.alpha.schedule {
                AlphaKind::Constant | AlphaKind::Decay => match self.alpha.value {
                    Some(a) if (0.0..=1.0).contains(&a) => {}
                    Some(_) => bad("alpha.value", "must lie in [0, 1]"),
                    None => bad("alpha.value", "required for this schedule"),
                },
                AlphaKind::Theory => {}
                AlphaKind::Corollary => {
                    check_corollary(&mut bad, "alpha.corollary", self.alpha.corollary);
                    if self.alpha.corollary == Some(3) {
                        bad("alpha.corollary", "corollary 3 has no alpha preset");
                    }
                }
            }
            if self.alpha.schedule == AlphaKind::Decay
                && !(self.alpha.decay > 0.0 && self.alpha.decay <= 1.0)
            {
                bad("alpha.decay", "must lie in (0, 1]");
            }
        }
        if self.metrics.cadence == Some(0) {
            bad("metrics.cadence", "must be >= 1");
        }
        out
    }

    pub fn check(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::Config(v.join("; ")))
        }
    }

    pub fn problem_kind(&self) -> ProblemKind<f64> {
        let loss = match self.problem.kind {
            ProblemName::LeastSquares => Loss::LeastSquares,
            ProblemName::Sigmoid => Loss::SigmoidRegression,
            ProblemName::Softmax => Loss::SoftmaxClassification {
                classes: self.problem.classes,
            },
        };
        ProblemKind {
            loss,
            mu: self.problem.regularizer,
        }
    }

    pub fn synthetic_spec(&self) -> SyntheticSpec<f64> {
        SyntheticSpec {
            seed: self.seed,
            kind: self.problem_kind(),
            feature_dim: self.problem.dim,
            n_nodes: self.topology.nodes,
            samples_per_node: self.problem.samples_per_node,
            omega: self.problem.omega,
            label_noise: self.problem.label_noise,
            groups: self.problem.groups,
        }
    }

    pub fn graph(&self) -> Result<Graph> {
        let n = self.topology.nodes;
        Ok(match self.topology.kind {
            TopologyKind::Ring => Graph::ring(n)?,
            TopologyKind::Complete if n == 1 => Graph::new(1, [])?,
            TopologyKind::Complete => Graph::complete(n)?,
        })
    }

    pub fn batching(&self) -> Batching {
        if self.full_batch {
            Batching::Full
        } else {
            Batching::Sampled(self.batch_size)
        }
    }

    /// Metrics cadence, falling back to every iteration up to `T = 10^4`
    /// and every `tau`-th iteration beyond.
    pub fn cadence(&self) -> usize {
        self.metrics
            .cadence
            .unwrap_or(if self.iterations <= 10_000 {
                1
            } else {
                self.tau
            })
    }
}

fn check_corollary(bad: &mut impl FnMut(&str, &str), key: &str, id: Option<u32>) {
    match id {
        Some(id) if CorollaryId::from_number(id).is_ok() => {}
        Some(_) => bad(key, "unknown corollary (expected 1, 2 or 3)"),
        None => bad(key, "required for the corollary schedule"),
    }
}

/// A config turned into concrete objects.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub graph: Graph,
    pub mixing: MixingMatrix64,
    pub problem: Problem64,
    pub params: AlgoParams<f64>,
    /// Smoothness constant used for theory: the override or the estimate.
    pub l_hat: f64,
    /// Batch size fed to the theory formulas (shard size under full batch).
    pub theory_batch: usize,
    pub warnings: Vec<String>,
}

impl Prepared {
    pub fn theory_inputs(&self, cfg: &RunConfig) -> TheoryInputs<f64> {
        TheoryInputs {
            l: self.l_hat,
            lambda: self.mixing.lambda(),
            tau: cfg.tau,
            n_nodes: cfg.topology.nodes,
            batch: self.theory_batch,
            horizon: cfg.iterations as u64,
        }
    }

    /// Theory step bound for the configured algorithm. The baselines are
    /// compared against the mini-batch bound.
    pub fn max_gamma(&self, cfg: &RunConfig) -> Result<f64> {
        let lambda = self.mixing.lambda();
        Ok(if cfg.algorithm.uses_momentum() {
            theory::max_gamma_dse_mvr(self.l_hat, lambda, cfg.tau)?
        } else {
            theory::max_gamma_dse_sgd(self.l_hat, lambda, cfg.tau)?
        })
    }
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    cfg.check()?;
    let graph = cfg.graph()?;
    let mixing = MixingMatrix64::metropolis_hastings(&graph)?;
    let problem = Problem64::synthetic(&cfg.synthetic_spec())?;
    let l_hat = cfg
        .problem
        .lipschitz
        .unwrap_or_else(|| problem.estimate_l());
    let theory_batch = if cfg.full_batch {
        problem.min_shard_len()
    } else {
        cfg.batch_size
    };
    let mut prep = Prepared {
        graph,
        mixing,
        problem,
        params: AlgoParams::new(0.0, cfg.tau, cfg.batching(), cfg.iterations),
        l_hat,
        theory_batch,
        warnings: Vec::new(),
    };
    let inputs = prep.theory_inputs(cfg);
    let preset = |id: Option<u32>| -> Result<_> {
        let id = CorollaryId::from_number(id.unwrap_or(0))?;
        Ok(theory::corollary_preset(id, &inputs)?)
    };

    let gamma = match cfg.gamma.schedule {
        GammaKind::Constant => GammaSchedule::Constant(cfg.gamma.value.unwrap_or_default()),
        GammaKind::Halving => GammaSchedule::Halving {
            initial: cfg.gamma.value.unwrap_or_default(),
            horizon: cfg.iterations,
        },
        GammaKind::Corollary => GammaSchedule::Constant(preset(cfg.gamma.corollary)?.gamma),
    };
    let gamma0 = gamma.value(0);
    let alpha = if cfg.algorithm.uses_momentum() {
        match cfg.alpha.schedule {
            AlphaKind::Constant => AlphaSchedule::Constant(cfg.alpha.value.unwrap_or(1.0)),
            AlphaKind::Decay => AlphaSchedule::Decay {
                initial: cfg.alpha.value.unwrap_or(1.0),
                factor: cfg.alpha.decay,
            },
            AlphaKind::Theory => AlphaSchedule::Constant(theory::alpha_theory(
                l_hat,
                gamma0,
                cfg.topology.nodes,
                theory_batch,
            )?),
            AlphaKind::Corollary => {
                let a = preset(cfg.alpha.corollary)?.alpha.ok_or_else(|| {
                    HarnessError::Config("alpha.corollary: no alpha preset".into())
                })?;
                AlphaSchedule::Constant(a)
            }
        }
    } else {
        AlphaSchedule::Constant(1.0)
    };
    let reset = if cfg.minibatch_reset {
        DirectionReset::MiniBatch
    } else {
        DirectionReset::FullGradient
    };
    prep.params = prep
        .params
        .with_gamma(gamma)
        .with_alpha(alpha)
        .with_reset(reset);

    if matches!(cfg.algorithm, Algorithm::DseMvr | Algorithm::DseSgd) {
        let bound = prep.max_gamma(cfg)?;
        if gamma0 > bound {
            prep.warnings.push(format!(
                "warning: gamma = {gamma0:e} exceeds the theory bound {bound:e} for {}; running anyway",
                cfg.algorithm.name()
            ));
        }
    }
    Ok(prep)
}
