//! Step-size and momentum bounds under which the convergence guarantees hold,
//! plus the corollary hyperparameter presets.
//!
//! Bounds are sufficient, not necessary; callers treat them as advice.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryInputs<T> {
    /// Smoothness constant.
    pub l: T,
    /// `||W - Q||`
    pub lambda: T,
    pub tau: usize,
    pub n_nodes: usize,
    pub batch: usize,
    pub horizon: u64,
}

/// Which corollary preset to use.
///
/// - `One`: DSE-MVR, iid data, `b = 1`:
///   `gamma = N^(2/3) / (L T^(1/3))`, `alpha = N^(1/3) T^(-2/3)`.
/// - `Two`: DSE-MVR, non-iid: `gamma = sqrt(b N) / (L sqrt(T))`, `alpha = 1/T`.
/// - `Three`: DSE-SGD: `gamma = sqrt(b N / T)`, no momentum parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CorollaryId {
    One,
    Two,
    Three,
}

impl CorollaryId {
    pub const ALL: [CorollaryId; 3] = [CorollaryId::One, CorollaryId::Two, CorollaryId::Three];

    pub fn from_number(id: u32) -> Result<Self> {
        match id {
            1 => Ok(Self::One),
            2 => Ok(Self::Two),
            3 => Ok(Self::Three),
            other => Err(Error::UnknownCorollary(other)),
        }
    }

    pub fn number(self) -> u32 {
        match self {
            Self::One => 1,
            Self::Two => 2,
            Self::Three => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preset<T> {
    pub gamma: T,
    /// `None` for presets of the SGD variant, which has no momentum parameter.
    pub alpha: Option<T>,
}

fn check_common<T: Scalar>(l: T, lambda: T, tau: usize) -> Result<()> {
    if !(l > T::zero()) {
        return Err(Error::ContractViolation(format!("L = {l} must be > 0")));
    }
    if tau == 0 {
        return Err(Error::ContractViolation("tau must be >= 1".into()));
    }
    if !(lambda >= T::zero() && lambda < T::one()) {
        return Err(Error::ContractViolation(format!(
            "lambda = {lambda} must lie in [0, 1)"
        )));
    }
    Ok(())
}

/// `c (1 - lambda^2)^2 / (lambda^2 L tau)`, infinite at `lambda = 0` where the
/// consensus constraint disappears.
fn consensus_bound<T: Scalar>(c: f64, l: T, lambda: T, tau: usize) -> T {
    if lambda == T::zero() {
        return T::infinity();
    }
    let lam2 = lambda * lambda;
    let one_minus = T::one() - lam2;
    one_minus * one_minus / (T::lit(c) * lam2 * l * T::from_usize(tau).unwrap())
}

/// `min{ 1/(8 L tau), (1 - lambda^2)^2 / (64 sqrt(6) lambda^2 L tau) }`
pub fn max_gamma_dse_mvr<T: Scalar>(l: T, lambda: T, tau: usize) -> Result<T> {
    check_common(l, lambda, tau)?;
    let local = T::one() / (T::lit(8.0) * l * T::from_usize(tau).unwrap());
    Ok(local.min(consensus_bound(64.0 * 6f64.sqrt(), l, lambda, tau)))
}

/// `min{ 1/(4 sqrt(2) L tau), (1 - lambda^2)^2 / (32 sqrt(6) lambda^2 L tau) }`
pub fn max_gamma_dse_sgd<T: Scalar>(l: T, lambda: T, tau: usize) -> Result<T> {
    check_common(l, lambda, tau)?;
    let local = T::one() / (T::lit(4.0 * 2f64.sqrt()) * l * T::from_usize(tau).unwrap());
    Ok(local.min(consensus_bound(32.0 * 6f64.sqrt(), l, lambda, tau)))
}

/// `32 L^2 gamma^2 / (N b)`; errors when the result leaves `[0, 1]`.
pub fn alpha_theory<T: Scalar>(l: T, gamma: T, n_nodes: usize, batch: usize) -> Result<T> {
    if !(l > T::zero()) || !(gamma >= T::zero()) || n_nodes == 0 || batch == 0 {
        return Err(Error::ContractViolation(
            "alpha_theory needs L > 0, gamma >= 0, N >= 1, b >= 1".into(),
        ));
    }
    let alpha = T::lit(32.0) * l * l * gamma * gamma / T::from_usize(n_nodes * batch).unwrap();
    if alpha > T::one() {
        return Err(Error::TheoryViolation(format!(
            "alpha = 32 L^2 gamma^2 / (N b) = {alpha} exceeds 1"
        )));
    }
    Ok(alpha)
}

/// Smallest horizon `T` for which the corollary applies.
///
/// - `One`: `max{512 N^2 tau^3, 192^3 N^2 lambda^6 tau^3 / (1 - lambda^2)^6}`
/// - `Two`: `max{64 N b tau^2, 192^2 N lambda^4 b tau^2 / (1 - lambda^2)^4}`
/// - `Three`: `max{32 N L^2 b tau^2, 6144 N lambda^4 L^2 b tau^2 / (1 - lambda^2)^4}`
pub fn min_horizon<T: Scalar>(id: CorollaryId, inp: &TheoryInputs<T>) -> Result<u64> {
    check_common(inp.l, inp.lambda, inp.tau)?;
    let n = inp.n_nodes as f64;
    let b = inp.batch as f64;
    let tau = inp.tau as f64;
    let lam = inp.lambda.as_f64();
    let l = inp.l.as_f64();
    let gap = 1.0 - lam * lam;
    let bound = match id {
        CorollaryId::One => (512.0 * n * n * tau.powi(3))
            .max(192f64.powi(3) * n * n * lam.powi(6) * tau.powi(3) / gap.powi(6)),
        CorollaryId::Two => (64.0 * n * b * tau * tau)
            .max(192f64.powi(2) * n * lam.powi(4) * b * tau * tau / gap.powi(4)),
        CorollaryId::Three => (32.0 * n * l * l * b * tau * tau)
            .max(6144.0 * n * lam.powi(4) * l * l * b * tau * tau / gap.powi(4)),
    };
    // float-to-int casts saturate
    Ok(bound.ceil() as u64)
}

/// Step size and momentum prescribed by a corollary for horizon `T`.
pub fn corollary_preset<T: Scalar>(id: CorollaryId, inp: &TheoryInputs<T>) -> Result<Preset<T>> {
    let required = min_horizon(id, inp)?;
    if inp.horizon < required {
        return Err(Error::HorizonTooShort {
            given: inp.horizon,
            required,
        });
    }
    let n = T::from_usize(inp.n_nodes).unwrap();
    let b = T::from_usize(inp.batch).unwrap();
    let t = T::from_u64(inp.horizon).unwrap();
    let third = T::one() / T::lit(3.0);
    Ok(match id {
        CorollaryId::One => Preset {
            gamma: n.powf(third + third) / (inp.l * t.powf(third)),
            alpha: Some(n.powf(third) / t.powf(third + third)),
        },
        CorollaryId::Two => Preset {
            gamma: (b * n).sqrt() / (inp.l * t.sqrt()),
            alpha: Some(T::one() / t),
        },
        CorollaryId::Three => Preset {
            gamma: (b * n / t).sqrt(),
            alpha: None,
        },
    })
}

/// Suggested growing interval `ceil(T^(1/4) N^(-3/4))`, at least 1. The
/// simulator itself always runs with a fixed `tau`.
pub fn suggested_growing_tau(horizon: u64, n_nodes: usize) -> usize {
    let v = (horizon as f64).powf(0.25) * (n_nodes as f64).powf(-0.75);
    (v.ceil() as usize).max(1)
}

/// Suggested growing batch `ceil(T^(1/3) / N)`, at least 1.
pub fn suggested_growing_batch(horizon: u64, n_nodes: usize) -> usize {
    let v = (horizon as f64).cbrt() / n_nodes as f64;
    (v.ceil() as usize).max(1)
}
