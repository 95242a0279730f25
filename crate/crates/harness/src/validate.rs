use std::fmt::Write;

use dse_core::theory::{self, CorollaryId};

use crate::config::{prepare, Prepared, RunConfig};
use crate::error::Result;

/// Diagnostics for a config: smoothness, mixing quality and theory bounds.
/// Read-only; nothing is written.
#[derive(Debug, Clone)]
pub struct Report {
    pub l_hat: f64,
    pub lambda: f64,
    pub max_gamma: f64,
    pub gamma: f64,
    /// `Err` carries the reason when `32 L^2 gamma^2 / (N b)` exceeds 1.
    pub alpha_theory: std::result::Result<f64, String>,
    pub min_horizons: Vec<(CorollaryId, u64)>,
    pub doubly_stochastic: bool,
    pub connected: bool,
    pub suggested_tau: usize,
    pub suggested_batch: usize,
}

pub fn validate(cfg: &RunConfig) -> Result<(Report, Prepared)> {
    let prep = prepare(cfg)?;
    let inputs = prep.theory_inputs(cfg);
    let gamma = prep.params.gamma.value(0);
    let min_horizons = CorollaryId::ALL
        .into_iter()
        .map(|id| Ok((id, theory::min_horizon(id, &inputs)?)))
        .collect::<Result<Vec<_>>>()?;
    let n = cfg.topology.nodes;
    let report = Report {
        l_hat: prep.l_hat,
        lambda: prep.mixing.lambda(),
        max_gamma: prep.max_gamma(cfg)?,
        gamma,
        alpha_theory: theory::alpha_theory(prep.l_hat, gamma, n, prep.theory_batch)
            .map_err(|e| e.to_string()),
        min_horizons,
        doubly_stochastic: prep.mixing.is_doubly_stochastic(),
        connected: prep.graph.is_connected(),
        suggested_tau: theory::suggested_growing_tau(cfg.iterations as u64, n),
        suggested_batch: theory::suggested_growing_batch(cfg.iterations as u64, n),
    };
    Ok((report, prep))
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

impl Report {
    pub fn render(&self, cfg: &RunConfig) -> String {
        let mut s = String::new();
        let algo = cfg.algorithm.name();
        let _ = writeln!(s, "nodes                 {}", cfg.topology.nodes);
        let _ = writeln!(s, "doubly_stochastic     {}", pass(self.doubly_stochastic));
        let _ = writeln!(s, "connected             {}", pass(self.connected));
        let _ = writeln!(s, "lambda                {:.12e}", self.lambda);
        let _ = writeln!(s, "L_hat                 {:.12e}", self.l_hat);
        let _ = writeln!(s, "max_gamma({algo:<8})   {:.12e}", self.max_gamma);
        let _ = writeln!(s, "gamma                 {:.12e}", self.gamma);
        match &self.alpha_theory {
            Ok(a) => {
                let _ = writeln!(s, "alpha_theory          {a:.12e}");
            }
            Err(e) => {
                let _ = writeln!(s, "alpha_theory          n/a ({e})");
            }
        }
        for (id, t) in &self.min_horizons {
            let _ = writeln!(s, "min_horizon(cor. {})   {t}", id.number());
        }
        let _ = writeln!(s, "suggested tau         {}", self.suggested_tau);
        let _ = writeln!(s, "suggested batch       {}", self.suggested_batch);
        if self.gamma > self.max_gamma {
            let _ = writeln!(s, "note: gamma is above the theory bound (advisory)");
        }
        s
    }
}
