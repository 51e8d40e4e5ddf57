//! Expected payoffs, Monte-Carlo estimators and payoff-based equilibrium checks.
//!
//! The payoff of agent `i` is `a_i (Σ_{j≠i} a_j - θ)`. Conditional on `Θ = θ`
//! the actions are independent, so for threshold policies the ex-ante payoff is
//! `J_i = Σ_m p_m F_{τ_i}(λθ_m) (Σ_{j≠i} F_{τ_j}(λθ_m) - θ_m)`.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::Serialize;

use crate::beliefs::{phi, pi_i, poisson_cdf_unchecked};
use crate::equilibrium::run_rng;
use crate::error::{Error, Result};
use crate::model::{Action, GameParams, PriorSpec, Threshold, ThresholdProfile};

/// Slack allowed when comparing exact payoffs of deviations.
pub const PAYOFF_TOL: f64 = 1e-12;
const Z_95: f64 = 1.96;

/// Sample mean with a normal-approximation 95% half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PayoffEstimate {
    pub mean: f64,
    pub half_width_95: f64,
    pub samples: u64,
}

impl PayoffEstimate {
    pub fn contains(&self, value: f64) -> bool {
        (value - self.mean).abs() <= self.half_width_95
    }
}

// Welford accumulator
#[derive(Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn estimate(&self) -> PayoffEstimate {
        let var = if self.n > 1 {
            self.m2 / (self.n - 1) as f64
        } else {
            0.0
        };
        PayoffEstimate {
            mean: self.mean,
            half_width_95: Z_95 * var.sqrt() / (self.n as f64).sqrt(),
            samples: self.n,
        }
    }
}

fn check_samples(samples: u64) -> Result<()> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be at least 1".into()));
    }
    Ok(())
}

/// Expected payoff of `action` conditional on `Y_i = k`: `a·(π_i(k) - φ(k))`.
pub fn interim_payoff(
    params: &GameParams,
    i: usize,
    profile: &ThresholdProfile,
    k: u32,
    action: Action,
) -> Result<f64> {
    let pi = pi_i(params, i, profile, k)?;
    Ok(match action {
        Action::Idle => 0.0,
        Action::Activate => pi - phi(params, k),
    })
}

fn activation_probability(t: Threshold, mean: f64) -> f64 {
    match t {
        Threshold::Never => 0.0,
        Threshold::Finite(tau) => poisson_cdf_unchecked(tau, mean),
        Threshold::Always => 1.0,
    }
}

/// Exact ex-ante payoff of agent `i` under a binary prior.
pub fn exact_payoff_binary(
    params: &GameParams,
    i: usize,
    profile: &ThresholdProfile,
) -> Result<f64> {
    params.check_profile(profile)?;
    params.check_agent(i)?;
    let PriorSpec::Binary { theta0, theta1, p0 } = params.prior else {
        return Err(Error::WrongPrior { expected: "binary" });
    };
    let own = profile.get(i);
    if own == Threshold::Always {
        return Err(Error::UnsupportedThreshold(own.to_string()));
    }
    let conditional = |theta: f64| {
        let mean = params.rate * theta;
        let own_active = activation_probability(own, mean);
        if own_active == 0.0 {
            return 0.0;
        }
        let others: f64 = profile
            .opponents(i)
            .map(|t| activation_probability(t, mean))
            .sum();
        own_active * (others - theta)
    };
    Ok(p0 * conditional(theta0) + (1.0 - p0) * conditional(theta1))
}

/// Monte-Carlo estimate of agent `i`'s ex-ante payoff under a binary prior.
///
/// Each sample draws `Θ` from the prior and `Y_1..Y_N ~ Poisson(λΘ)`
/// independently, then evaluates the realized payoff.
pub fn mc_payoff(
    params: &GameParams,
    i: usize,
    profile: &ThresholdProfile,
    samples: u64,
    seed: u64,
) -> Result<PayoffEstimate> {
    params.check_profile(profile)?;
    params.check_agent(i)?;
    check_samples(samples)?;
    let PriorSpec::Binary { theta0, theta1, p0 } = params.prior else {
        return Err(Error::WrongPrior { expected: "binary" });
    };
    let mut moments = Moments::default();
    if profile.get(i) == Threshold::Never {
        moments.n = samples;
        return Ok(moments.estimate());
    }
    let poisson = |theta: f64| {
        Poisson::new(params.rate * theta).map_err(|e| {
            Error::InvalidArgument(format!("poisson mean {}: {e}", params.rate * theta))
        })
    };
    let low = poisson(theta0)?;
    let high = poisson(theta1)?;
    let mut rng = run_rng(seed, 0);
    let thresholds = profile.as_slice();
    for _ in 0..samples {
        let (theta, dist) = if rng.random::<f64>() < p0 {
            (theta0, &low)
        } else {
            (theta1, &high)
        };
        let mut own = Action::Idle;
        let mut others = 0u32;
        for (j, &t) in thresholds.iter().enumerate() {
            let y: f64 = dist.sample(&mut rng);
            let action = t.policy_eval(y as u32);
            if j == i {
                own = action;
            } else if action == Action::Activate {
                others += 1;
            }
        }
        moments.push(own.as_f64() * (others as f64 - theta));
    }
    Ok(moments.estimate())
}

/// Per-agent outcome of the unilateral-deviation check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgentVerification {
    pub agent: usize,
    pub tau_star: Threshold,
    /// `J_i(τ*) - max_{τ'} J_i(τ')`; negative when some deviation improves.
    pub worst_deviation_gap: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PayoffVerification {
    pub pass: bool,
    /// Smallest gap over all agents.
    pub worst_gap: f64,
    pub agents: Vec<AgentVerification>,
}

/// Checks `J_i(τ_i*) ≥ J_i(τ') - tol` for every agent and every
/// `τ' ∈ {Never, 0, …, k_cap}` using exact payoffs.
pub fn verify_equilibrium_payoff(
    params: &GameParams,
    profile: &ThresholdProfile,
    k_cap: u32,
) -> Result<PayoffVerification> {
    params.check_profile(profile)?;
    let alternatives: Vec<Threshold> = std::iter::once(Threshold::Never)
        .chain((0..=k_cap).map(Threshold::Finite))
        .collect();
    let mut agents = Vec::with_capacity(params.n_agents);
    let mut trial = profile.clone();
    for i in 0..params.n_agents {
        let current = exact_payoff_binary(params, i, profile)?;
        let mut best = f64::NEG_INFINITY;
        for &alt in &alternatives {
            trial.set(i, alt);
            best = best.max(exact_payoff_binary(params, i, &trial)?);
        }
        trial.set(i, profile.get(i));
        let gap = current - best;
        agents.push(AgentVerification {
            agent: i,
            tau_star: profile.get(i),
            worst_deviation_gap: gap,
            pass: gap >= -PAYOFF_TOL,
        });
    }
    let worst_gap = agents
        .iter()
        .map(|a| a.worst_deviation_gap)
        .fold(f64::INFINITY, f64::min);
    Ok(PayoffVerification {
        pass: agents.iter().all(|a| a.pass),
        worst_gap,
        agents,
    })
}

/// Monte-Carlo estimate of `P(Y_j ≤ τ | Y_i = k)` under the improper uniform
/// prior, sampling `Θ ~ Gamma(shape k+1, scale 1/λ)` then `Y_j ~ Poisson(λΘ)`.
pub fn mc_conditional_belief_uniform(
    k: u32,
    tau: u32,
    rate: f64,
    samples: u64,
    seed: u64,
) -> Result<PayoffEstimate> {
    check_samples(samples)?;
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::InvalidRate { rate });
    }
    let gamma = Gamma::new(k as f64 + 1.0, 1.0 / rate)
        .map_err(|e| Error::InvalidArgument(format!("gamma posterior: {e}")))?;
    let mut rng = run_rng(seed, 0);
    let mut hits = 0u64;
    for _ in 0..samples {
        let theta: f64 = gamma.sample(&mut rng);
        let mean = rate * theta;
        let y = if mean > 0.0 {
            Poisson::new(mean)
                .map_err(|e| Error::InvalidArgument(format!("poisson mean {mean}: {e}")))?
                .sample(&mut rng)
        } else {
            0.0
        };
        if y <= tau as f64 {
            hits += 1;
        }
    }
    let p = hits as f64 / samples as f64;
    // indicator variance with the n-1 denominator
    let var = if samples > 1 {
        p * (1.0 - p) * samples as f64 / (samples - 1) as f64
    } else {
        0.0
    };
    Ok(PayoffEstimate {
        mean: p,
        half_width_95: Z_95 * var.sqrt() / (samples as f64).sqrt(),
        samples,
    })
}
