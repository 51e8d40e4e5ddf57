//! Randomized and grid checks of the numerical invariants, run by `pgg verify`.

use rand::Rng;
use serde::Serialize;

use crate::beliefs::{
    phi, pi_i, pi_ij, poisson_cdf, poisson_cdf_theta_derivative, posterior_binary, MONOTONE_SLACK,
    NORMALIZATION_TOL,
};
use crate::best_response::best_response;
use crate::equilibrium::run_rng;
use crate::error::Result;
use crate::model::{Action, GameParams, Threshold, ThresholdProfile};

pub const DEFAULT_DRAWS: usize = 1000;
pub const DEFAULT_IDENTITY_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_DERIVATIVE_TOLERANCE: f64 = 1e-4;

const K_MAX: u32 = 200;
const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
pub struct SuiteSettings {
    pub seed: u64,
    pub draws: usize,
    pub identity_tolerance: f64,
    pub derivative_tolerance: f64,
}

impl SuiteSettings {
    pub fn new(seed: u64) -> Self {
        SuiteSettings {
            seed,
            draws: DEFAULT_DRAWS,
            identity_tolerance: DEFAULT_IDENTITY_TOLERANCE,
            derivative_tolerance: DEFAULT_DERIVATIVE_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyReport {
    pub name: &'static str,
    pub checks: usize,
    pub failures: usize,
    pub pass: bool,
    /// First failing case, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub pass: bool,
    pub seed: u64,
    pub families: Vec<FamilyReport>,
}

impl SuiteReport {
    pub fn family(&self, name: &str) -> Option<&FamilyReport> {
        self.families.iter().find(|f| f.name == name)
    }
}

struct Tally {
    name: &'static str,
    checks: usize,
    failures: usize,
    first_failure: Option<String>,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Tally {
            name,
            checks: 0,
            failures: 0,
            first_failure: None,
        }
    }

    fn check(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(describe());
            }
        }
    }

    fn finish(self) -> FamilyReport {
        FamilyReport {
            name: self.name,
            checks: self.checks,
            failures: self.failures,
            pass: self.failures == 0,
            first_failure: self.first_failure,
        }
    }
}

/// Random binary game with `θ₁ ≥ N` so that best responses are finite.
pub fn random_binary<R: Rng + ?Sized>(rng: &mut R, max_agents: usize) -> GameParams {
    let n = rng.random_range(2..=max_agents);
    let rate = 10f64.powf(rng.random_range(-4.0..0.0));
    let theta0: f64 = rng.random_range(0.1..100.0);
    let theta1 = (theta0 * rng.random_range(1.01f64..4.0)).max(n as f64);
    let p0 = rng.random_range(0.01..0.99);
    GameParams::binary(n, rate, theta0, theta1, p0).expect("drawn parameters are valid")
}

pub fn random_uniform<R: Rng + ?Sized>(rng: &mut R, max_agents: usize) -> GameParams {
    let n = rng.random_range(2..=max_agents);
    let rate = 10f64.powf(rng.random_range(-2.0..1.0));
    GameParams::uniform(n, rate).expect("drawn parameters are valid")
}

fn identity(settings: &SuiteSettings) -> FamilyReport {
    let mut tally = Tally::new("identity_partial_sums");
    let params = GameParams::uniform(2, 1.0).expect("valid");
    for k in 0..=30u32 {
        let m = 40 * k + 200;
        let s = pi_ij(&params, k, Threshold::Finite(m));
        tally.check(s <= 1.0 && 1.0 - s < settings.identity_tolerance, || {
            format!("k={k} sum={s}")
        });
    }
    tally.finish()
}

fn rate_invariance(settings: &SuiteSettings) -> FamilyReport {
    let mut tally = Tally::new("uniform_rate_invariance");
    let mut rng = run_rng(settings.seed, 1);
    let reference = GameParams::uniform(2, 1.0).expect("valid");
    for _ in 0..settings.draws {
        let k = rng.random_range(0..=K_MAX);
        let tau = rng.random_range(0..=K_MAX);
        let other = random_uniform(&mut rng, 2);
        let a = pi_ij(&reference, k, Threshold::Finite(tau));
        let b = pi_ij(&other, k, Threshold::Finite(tau));
        tally.check(a == b, || {
            format!("k={k} tau={tau} rate={}: {a} vs {b}", other.rate)
        });
    }
    tally.finish()
}

/// `(λ, θ)` pairs with `λθ ∈ [2, 15]`, where the CDF is far enough from 0 and 1
/// for a central difference to resolve the derivative.
pub fn derivative_grid() -> Vec<(u32, f64, f64)> {
    const PAIRS: [(f64, f64); 10] = [
        (0.5, 4.0),
        (1.0, 3.0),
        (2.0, 2.5),
        (0.1, 40.0),
        (0.01, 500.0),
        (1e-3, 8000.0),
        (3.0, 2.0),
        (0.25, 30.0),
        (5.0, 3.0),
        (0.05, 100.0),
    ];
    (0..10u32)
        .flat_map(|tau| PAIRS.iter().map(move |&(rate, theta)| (tau, rate, theta)))
        .collect()
}

fn derivative(settings: &SuiteSettings) -> FamilyReport {
    let mut tally = Tally::new("cdf_theta_derivative");
    for (tau, rate, theta) in derivative_grid() {
        let up = poisson_cdf(tau, rate * (theta + FD_STEP)).expect("positive mean");
        let down = poisson_cdf(tau, rate * (theta - FD_STEP)).expect("positive mean");
        let fd = (up - down) / (2.0 * FD_STEP);
        let exact = poisson_cdf_theta_derivative(tau, rate, theta);
        let rel = ((fd - exact) / exact).abs();
        tally.check(rel < settings.derivative_tolerance, || {
            format!("tau={tau} rate={rate} theta={theta}: relative error {rel:e}")
        });
    }
    tally.finish()
}

fn normalization(settings: &SuiteSettings) -> FamilyReport {
    let mut tally = Tally::new("posterior_normalization");
    let mut rng = run_rng(settings.seed, 2);
    for _ in 0..settings.draws {
        let params = random_binary(&mut rng, 50);
        let k = rng.random_range(0..=K_MAX);
        let w = posterior_binary(&params, k).expect("binary");
        let err = (w.w0 + w.w1 - 1.0).abs();
        tally.check(err <= NORMALIZATION_TOL, || {
            format!("{params:?} k={k}: {err:e}")
        });
    }
    tally.finish()
}

fn monotonicity(settings: &SuiteSettings) -> (FamilyReport, FamilyReport) {
    let mut phi_tally = Tally::new("phi_increasing");
    let mut pi_tally = Tally::new("pi_decreasing");
    let mut rng = run_rng(settings.seed, 3);
    for draw in 0..settings.draws {
        let params = if draw % 2 == 0 {
            random_binary(&mut rng, 50)
        } else {
            random_uniform(&mut rng, 50)
        };
        let tau = Threshold::Finite(rng.random_range(0..=80));
        for k in 0..K_MAX {
            let (a, b) = (phi(&params, k), phi(&params, k + 1));
            phi_tally.check(b >= a - MONOTONE_SLACK, || {
                format!("{params:?} k={k}: {a} -> {b}")
            });
            let (a, b) = (pi_ij(&params, k, tau), pi_ij(&params, k + 1, tau));
            pi_tally.check(b <= a + MONOTONE_SLACK, || {
                format!("{params:?} {tau} k={k}: {a} -> {b}")
            });
        }
    }
    (phi_tally.finish(), pi_tally.finish())
}

fn threshold_responses(settings: &SuiteSettings) -> Result<FamilyReport> {
    let mut tally = Tally::new("best_response_is_threshold");
    let mut rng = run_rng(settings.seed, 4);
    let games = (settings.draws / 10).max(1);
    for draw in 0..games {
        let params = if draw % 2 == 0 {
            random_binary(&mut rng, 20)
        } else {
            random_uniform(&mut rng, 20)
        };
        let profile = ThresholdProfile::new(
            (0..params.n_agents)
                .map(|_| Threshold::Finite(rng.random_range(0..40)))
                .collect(),
        );
        let br = best_response(&params, 0, &profile)?;
        let mut consistent = true;
        for k in 0..=br.k_cap_used + 5 {
            let active = pi_i(&params, 0, &profile, k)? >= phi(&params, k);
            consistent &= active == (br.threshold.policy_eval(k) == Action::Activate);
        }
        tally.check(consistent, || {
            format!("{params:?} {profile:?} -> {}", br.threshold)
        });
    }
    Ok(tally.finish())
}

pub fn run_suite(settings: &SuiteSettings) -> Result<SuiteReport> {
    let (phi_report, pi_report) = monotonicity(settings);
    let families = vec![
        identity(settings),
        rate_invariance(settings),
        derivative(settings),
        normalization(settings),
        phi_report,
        pi_report,
        threshold_responses(settings)?,
    ];
    Ok(SuiteReport {
        pass: families.iter().all(|f| f.pass),
        seed: settings.seed,
        families,
    })
}
