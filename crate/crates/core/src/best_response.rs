//! Best-response thresholds.
//!
//! Agent `i` activates on observation `k` iff `π_i(k) ≥ φ(k)`. With every
//! opponent on a threshold policy, `π_i` is nonincreasing and `φ` strictly
//! increasing, so the activation set is a prefix `[0, k*]` and the best
//! response is the threshold `k*` (or `Never` when the prefix is empty).

use serde::Serialize;

use crate::beliefs::{phi, OpponentBeliefs};
use crate::error::{Error, Result};
use crate::model::{GameParams, PriorSpec, Threshold, ThresholdProfile};

/// Margin by which `φ(cap)` must exceed the limit of `π_i` in the binary case.
pub const CAP_MARGIN: f64 = 1e-12;

// Hard bound on the scan past the cap; reaching it yields `Always`.
const MAX_SCAN: u32 = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BestResponseResult {
    pub threshold: Threshold,
    /// Last `k` with `π_i(k) ≥ φ(k)`.
    pub crossing_k: Option<u32>,
    /// Last observation examined by the scan.
    pub k_cap_used: u32,
}

/// Search bound for agent `i`'s best response.
///
/// Uniform prior: `ceil(λ(N-1))`, past which `φ(k) > N-1 ≥ π_i(k)`. Binary prior:
/// the smallest `k` with `φ(k)` above `lim π_i = Σ_j F_{τ_j}(λθ₁)`, which requires
/// that limit to be below `θ₁`.
pub fn k_cap(params: &GameParams, profile: &ThresholdProfile, i: usize) -> Result<u32> {
    let beliefs = OpponentBeliefs::new(params, i, profile)?;
    cap_for(params, &beliefs)
}

fn cap_for(params: &GameParams, beliefs: &OpponentBeliefs) -> Result<u32> {
    match params.prior {
        PriorSpec::UniformImproper => {
            let bound = (params.rate * (params.n_agents - 1) as f64).ceil();
            Ok(bound.min(MAX_SCAN as f64) as u32)
        }
        PriorSpec::Binary { theta1, .. } => {
            let limit = beliefs.limit();
            let target = limit + CAP_MARGIN;
            if target >= theta1 {
                return Err(Error::NoFiniteCap { limit, theta1 });
            }
            let above = |k: u32| phi(params, k) > target;
            if above(0) {
                return Ok(0);
            }
            let mut hi = 1u32;
            while !above(hi) {
                if hi >= MAX_SCAN {
                    return Err(Error::NoFiniteCap { limit, theta1 });
                }
                hi *= 2;
            }
            // invariant: !above(lo) && above(hi)
            let mut lo = hi / 2;
            while hi - lo > 1 {
                let mid = lo + (hi - lo) / 2;
                if above(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Ok(hi)
        }
    }
}

/// Best response of agent `i` to the other entries of `profile`.
pub fn best_response(
    params: &GameParams,
    i: usize,
    profile: &ThresholdProfile,
) -> Result<BestResponseResult> {
    let beliefs = OpponentBeliefs::new(params, i, profile)?;
    best_response_to(params, &beliefs)
}

/// Best response against a precomputed opponent summary.
///
/// Every `k ≤ cap` is examined so that a non-prefix activation set is caught.
/// If the agent is still active at the cap the scan continues until the first
/// inactive observation.
pub fn best_response_to(
    params: &GameParams,
    beliefs: &OpponentBeliefs,
) -> Result<BestResponseResult> {
    let cap = cap_for(params, beliefs)?;
    let mut last_active: Option<u32> = None;
    let mut first_inactive: Option<u32> = None;
    let mut k = 0u32;
    loop {
        // ties activate
        let active = beliefs.pi(k) >= phi(params, k);
        if active {
            if let Some(inactive_at) = first_inactive {
                return Err(Error::SingleCrossingViolated {
                    inactive_at,
                    active_at: k,
                });
            }
            last_active = Some(k);
        } else if first_inactive.is_none() {
            first_inactive = Some(k);
        }
        if k >= cap && !active {
            break;
        }
        if k >= MAX_SCAN {
            return Ok(BestResponseResult {
                threshold: Threshold::Always,
                crossing_k: last_active,
                k_cap_used: k,
            });
        }
        k += 1;
    }
    let threshold = last_active.map_or(Threshold::Never, Threshold::Finite);
    Ok(BestResponseResult {
        threshold,
        crossing_k: last_active,
        k_cap_used: k,
    })
}
