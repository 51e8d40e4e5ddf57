//! Posterior and predictive quantities of the Poisson observation model.
//!
//! For an agent that observed `Y_i = k` we need the conditional mean of the
//! fundamental `φ(k) = E[Θ | Y_i = k]` and the expected number of active
//! opponents `π_i(k) = Σ_{j≠i} P(Y_j ≤ τ_j | Y_i = k)`.
//!
//! Binary prior: the posterior over `{θ₀, θ₁}` is computed in the log domain
//! and `P(Y_j ≤ τ | Y_i = k) = w₀(k)·F_τ(λθ₀) + w₁(k)·F_τ(λθ₁)`, where `F_τ` is
//! the Poisson CDF.
//!
//! Improper uniform prior: the posterior of `Θ` is Gamma(k+1, 1/λ), so
//! `φ(k) = (k+1)/λ` and the predictive of `Y_j` is negative binomial with
//! success probability 1/2, independent of `λ`:
//! `P(Y_j ≤ τ | Y_i = k) = Σ_{m=0}^{τ} 2^{-(m+k+1)} C(k+m, k)`.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{GameParams, PriorSpec, Threshold, ThresholdProfile};

/// Absolute tolerance on `w0 + w1 = 1`.
pub const NORMALIZATION_TOL: f64 = 1e-12;
/// Rounding slack allowed when asserting strict monotonicity numerically.
pub const MONOTONE_SLACK: f64 = 1e-14;

// Sums stop once the remaining tail is below this fraction of the partial sum.
const TAIL_EPS: f64 = 1e-18;
// Above these sizes the leading term underflows and the recurrences run in
// the log domain.
const LINEAR_MEAN_LIMIT: f64 = 700.0;
const LINEAR_K_LIMIT: u32 = 1000;

/// Poisson CDF `Σ_{m=0}^{τ} mean^m e^{-mean} / m!`.
pub fn poisson_cdf(tau: u32, mean: f64) -> Result<f64> {
    if mean.is_nan() || mean < 0.0 {
        return Err(Error::NegativeMean { mean });
    }
    Ok(poisson_cdf_unchecked(tau, mean))
}

pub(crate) fn poisson_cdf_unchecked(tau: u32, mean: f64) -> f64 {
    if mean == 0.0 {
        return 1.0;
    }
    if mean.is_infinite() {
        return 0.0;
    }
    let log_domain = mean > LINEAR_MEAN_LIMIT;
    let log_mean = mean.ln();
    let mut log_term = -mean;
    let mut term = (-mean).exp();
    let mut sum = 0.0;
    for m in 0..=tau {
        if log_domain {
            term = log_term.exp();
        }
        sum += term;
        let next = m as f64 + 1.0;
        let ratio = mean / next;
        if ratio < 1.0 && term * ratio / (1.0 - ratio) < TAIL_EPS * sum {
            break;
        }
        if log_domain {
            log_term += log_mean - next.ln();
        } else {
            term *= ratio;
        }
    }
    sum.min(1.0)
}

/// `d/dθ F_τ(λθ) = -λ (λθ)^τ e^{-λθ} / τ!`, evaluated in the log domain.
pub fn poisson_cdf_theta_derivative(tau: u32, rate: f64, theta: f64) -> f64 {
    let mean = rate * theta;
    if mean == 0.0 {
        return if tau == 0 { -rate } else { 0.0 };
    }
    let log_factorial: f64 = (1..=tau).map(|m| (m as f64).ln()).sum();
    -rate * (tau as f64 * mean.ln() - mean - log_factorial).exp()
}

/// Posterior probabilities of the two states of a binary prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PosteriorWeights {
    pub w0: f64,
    pub w1: f64,
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `P(Θ = θ_m | Y_i = k)` for a binary prior.
pub fn posterior_binary(params: &GameParams, k: u32) -> Result<PosteriorWeights> {
    match params.prior {
        PriorSpec::Binary { theta0, theta1, p0 } => {
            Ok(binary_weights(params.rate, theta0, theta1, p0, k))
        }
        PriorSpec::UniformImproper => Err(Error::WrongPrior { expected: "binary" }),
    }
}

fn binary_weights(rate: f64, theta0: f64, theta1: f64, p0: f64, k: u32) -> PosteriorWeights {
    // log-odds of θ₁ against θ₀; the common max exponent cancels in the logistic
    let log_odds =
        ((1.0 - p0) / p0).ln() + k as f64 * (theta1 / theta0).ln() - rate * (theta1 - theta0);
    PosteriorWeights {
        w0: logistic(-log_odds),
        w1: logistic(log_odds),
    }
}

/// Conditional mean of the fundamental given `Y_i = k`.
pub fn phi(params: &GameParams, k: u32) -> f64 {
    match params.prior {
        PriorSpec::Binary { theta0, theta1, p0 } => {
            let w = binary_weights(params.rate, theta0, theta1, p0, k);
            theta0 + w.w1 * (theta1 - theta0)
        }
        PriorSpec::UniformImproper => (k as f64 + 1.0) / params.rate,
    }
}

/// Belief that opponent `j` with threshold `tau_j` activates, given `Y_i = k`.
pub fn pi_ij(params: &GameParams, k: u32, tau_j: Threshold) -> f64 {
    let tau = match tau_j {
        Threshold::Never => return 0.0,
        Threshold::Always => return 1.0,
        Threshold::Finite(tau) => tau,
    };
    match params.prior {
        PriorSpec::Binary { theta0, theta1, p0 } => {
            let w = binary_weights(params.rate, theta0, theta1, p0, k);
            let f0 = poisson_cdf_unchecked(tau, params.rate * theta0);
            let f1 = poisson_cdf_unchecked(tau, params.rate * theta1);
            (w.w0 * f0 + w.w1 * f1).min(1.0)
        }
        PriorSpec::UniformImproper => {
            let mut out = 0.0;
            uniform_prefix_sums(k, tau, |m, sum| {
                if m == tau {
                    out = sum;
                }
            });
            out
        }
    }
}

/// Walks the partial sums `S(m) = Σ_{l≤m} 2^{-(l+k+1)} C(k+l, k)` for
/// `m = 0..=max_tau`, calling `visit(m, S(m))`. Once the tail is negligible the
/// walk stops early and visits `max_tau` with the converged sum.
fn uniform_prefix_sums(k: u32, max_tau: u32, mut visit: impl FnMut(u32, f64)) {
    let kf = k as f64;
    let log_domain = k > LINEAR_K_LIMIT;
    let mut log_term = -(kf + 1.0) * std::f64::consts::LN_2;
    let mut term = log_term.exp();
    let mut sum = 0.0;
    for m in 0..=max_tau {
        if log_domain {
            term = log_term.exp();
        }
        sum += term;
        let mf = m as f64;
        let ratio = (kf + mf + 1.0) / (2.0 * (mf + 1.0));
        if ratio < 1.0 && term * ratio / (1.0 - ratio) < TAIL_EPS * sum {
            // the ratio keeps falling, so the geometric bound holds for the whole tail
            sum = sum.min(1.0);
            visit(m, sum);
            if m != max_tau {
                visit(max_tau, sum);
            }
            return;
        }
        visit(m, sum.min(1.0));
        if log_domain {
            log_term += ratio.ln();
        } else {
            term *= ratio;
        }
    }
}

/// Expected number of active opponents of agent `i` given `Y_i = k`.
pub fn pi_i(params: &GameParams, i: usize, profile: &ThresholdProfile, k: u32) -> Result<f64> {
    Ok(OpponentBeliefs::new(params, i, profile)?.pi(k))
}

/// Opponent profile of one agent, grouped by threshold, with the per-threshold
/// Poisson CDFs precomputed. Evaluates `π_i(k)` in `O(max τ)` per `k`.
#[derive(Debug, Clone)]
pub struct OpponentBeliefs {
    params: GameParams,
    always: usize,
    // distinct finite thresholds with multiplicities, ascending
    finite: Vec<(u32, usize)>,
    // binary prior only: (F_τ(λθ₀), F_τ(λθ₁)) aligned with `finite`
    cdfs: Vec<(f64, f64)>,
}

impl OpponentBeliefs {
    pub fn new(params: &GameParams, i: usize, profile: &ThresholdProfile) -> Result<Self> {
        params.check_profile(profile)?;
        params.check_agent(i)?;
        Ok(Self::from_opponents(params, profile.opponents(i)))
    }

    pub fn from_opponents(params: &GameParams, opponents: impl Iterator<Item = Threshold>) -> Self {
        let mut always = 0;
        let mut groups: BTreeMap<u32, usize> = BTreeMap::new();
        for t in opponents {
            match t {
                Threshold::Never => {}
                Threshold::Always => always += 1,
                Threshold::Finite(tau) => *groups.entry(tau).or_default() += 1,
            }
        }
        let finite: Vec<(u32, usize)> = groups.into_iter().collect();
        let cdfs = match params.prior {
            PriorSpec::Binary { theta0, theta1, .. } => finite
                .iter()
                .map(|&(tau, _)| {
                    (
                        poisson_cdf_unchecked(tau, params.rate * theta0),
                        poisson_cdf_unchecked(tau, params.rate * theta1),
                    )
                })
                .collect(),
            PriorSpec::UniformImproper => Vec::new(),
        };
        OpponentBeliefs {
            params: *params,
            always,
            finite,
            cdfs,
        }
    }

    pub fn has_finite(&self) -> bool {
        !self.finite.is_empty()
    }

    /// `lim_{k→∞} π_i(k)`; for the binary prior this is `Σ_j F_{τ_j}(λθ₁)`.
    pub fn limit(&self) -> f64 {
        match self.params.prior {
            PriorSpec::Binary { .. } => {
                self.always as f64
                    + self
                        .finite
                        .iter()
                        .zip(&self.cdfs)
                        .map(|(&(_, count), &(_, f1))| count as f64 * f1)
                        .sum::<f64>()
            }
            PriorSpec::UniformImproper => self.always as f64,
        }
    }

    pub fn pi(&self, k: u32) -> f64 {
        let mut total = self.always as f64;
        match self.params.prior {
            PriorSpec::Binary { theta0, theta1, p0 } => {
                let w = binary_weights(self.params.rate, theta0, theta1, p0, k);
                for (&(_, count), &(f0, f1)) in self.finite.iter().zip(&self.cdfs) {
                    total += count as f64 * (w.w0 * f0 + w.w1 * f1).min(1.0);
                }
            }
            PriorSpec::UniformImproper => {
                let Some(&(max_tau, _)) = self.finite.last() else {
                    return total;
                };
                let mut groups = self.finite.iter().peekable();
                uniform_prefix_sums(k, max_tau, |m, sum| {
                    while let Some(&&(tau, count)) = groups.peek() {
                        if tau > m {
                            break;
                        }
                        total += count as f64 * sum;
                        groups.next();
                    }
                });
            }
        }
        total
    }
}

/// Tabulated `φ(k)` and `π_i(k)` for `k = 0..=k_max`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeliefCurve {
    pub agent: usize,
    pub k_max: u32,
    pub phi: Vec<f64>,
    pub pi: Vec<f64>,
}

impl BeliefCurve {
    /// Writes the curve as CSV with header `k,phi,pi`.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["k", "phi", "pi"])?;
        for (k, (phi, pi)) in self.phi.iter().zip(&self.pi).enumerate() {
            out.write_record([k.to_string(), phi.to_string(), pi.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn belief_curve(
    params: &GameParams,
    i: usize,
    profile: &ThresholdProfile,
    k_max: u32,
) -> Result<BeliefCurve> {
    let beliefs = OpponentBeliefs::new(params, i, profile)?;
    let phi = (0..=k_max).map(|k| self::phi(params, k)).collect();
    let pi = (0..=k_max).map(|k| beliefs.pi(k)).collect();
    Ok(BeliefCurve {
        agent: i,
        k_max,
        phi,
        pi,
    })
}
