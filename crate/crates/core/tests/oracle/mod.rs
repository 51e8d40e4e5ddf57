//! Direct, unoptimized evaluations of the model formulas, used as references.
#![allow(dead_code)]

use statrs::function::factorial::ln_binomial;
use statrs::function::gamma::ln_gamma;

/// `P(Y ≤ τ)` for `Y ~ Poisson(μ)`, summing `e^{-μ} μ^m / m!` term by term in log space.
pub fn poisson_cdf(tau: u32, mean: f64) -> f64 {
    if mean == 0.0 {
        return 1.0;
    }
    (0..=tau)
        .map(|m| (m as f64 * mean.ln() - mean - ln_gamma(m as f64 + 1.0)).exp())
        .sum::<f64>()
        .min(1.0)
}

/// `d/dθ P(Y ≤ τ)` for `Y ~ Poisson(λθ)`: `-λ` times the Poisson pmf at `τ`.
pub fn cdf_theta_derivative(tau: u32, rate: f64, theta: f64) -> f64 {
    let mean = rate * theta;
    -rate * (tau as f64 * mean.ln() - mean - ln_gamma(tau as f64 + 1.0)).exp()
}

/// Posterior weight on `θ₁` as the plain ratio of prior times likelihood.
pub fn posterior_high(theta0: f64, theta1: f64, p0: f64, rate: f64, k: u32) -> f64 {
    let like = |theta: f64| theta.powi(k as i32) * (-rate * theta).exp();
    let num = (1.0 - p0) * like(theta1);
    num / (p0 * like(theta0) + num)
}

/// Posterior weight on `θ₀`, as its own ratio so that it keeps full relative precision.
pub fn posterior_low(theta0: f64, theta1: f64, p0: f64, rate: f64, k: u32) -> f64 {
    let like = |theta: f64| theta.powi(k as i32) * (-rate * theta).exp();
    let num = p0 * like(theta0);
    num / (num + (1.0 - p0) * like(theta1))
}

pub fn phi_binary(theta0: f64, theta1: f64, p0: f64, rate: f64, k: u32) -> f64 {
    let w0 = posterior_low(theta0, theta1, p0, rate, k);
    let w1 = posterior_high(theta0, theta1, p0, rate, k);
    w0 * theta0 + w1 * theta1
}

pub fn pi_ij_binary(theta0: f64, theta1: f64, p0: f64, rate: f64, k: u32, tau: u32) -> f64 {
    let w0 = posterior_low(theta0, theta1, p0, rate, k);
    let w1 = posterior_high(theta0, theta1, p0, rate, k);
    w0 * poisson_cdf(tau, rate * theta0) + w1 * poisson_cdf(tau, rate * theta1)
}

/// `Σ_{m≤τ} C(k+m, k) 2^{-(k+m+1)}`, the predictive CDF under the improper uniform prior.
pub fn pi_ij_uniform(k: u32, tau: u32) -> f64 {
    (0..=tau)
        .map(|m| {
            let n = (k + m) as u64;
            (ln_binomial(n, k as u64) - (n + 1) as f64 * std::f64::consts::LN_2).exp()
        })
        .sum()
}

/// `g(λ) = Σ_m p_m [(N-1) e^{-2λθ_m} - θ_m e^{-λθ_m}]`.
pub fn existence_g(n_agents: usize, theta0: f64, theta1: f64, p0: f64, rate: f64) -> f64 {
    let others = (n_agents - 1) as f64;
    p0 * (others * (-2.0 * rate * theta0).exp() - theta0 * (-rate * theta0).exp())
        + (1.0 - p0) * (others * (-2.0 * rate * theta1).exp() - theta1 * (-rate * theta1).exp())
}

/// Ex-ante payoff of an agent with threshold `own` against opponent thresholds
/// `others` under a binary prior, conditioning on each state in turn.
pub fn payoff_binary(
    theta0: f64,
    theta1: f64,
    p0: f64,
    rate: f64,
    own: u32,
    others: &[u32],
) -> f64 {
    let given = |theta: f64| {
        let expected_active: f64 = others.iter().map(|&t| poisson_cdf(t, rate * theta)).sum();
        poisson_cdf(own, rate * theta) * (expected_active - theta)
    };
    p0 * given(theta0) + (1.0 - p0) * given(theta1)
}
