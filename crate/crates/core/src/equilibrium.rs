//! Existence conditions, best-response dynamics and equilibrium checks.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beliefs::OpponentBeliefs;
use crate::best_response::{best_response, best_response_to};
use crate::error::{Error, Result};
use crate::model::{GameParams, PriorSpec, Threshold, ThresholdProfile};

pub const DEFAULT_MAX_SWEEPS: usize = 500;
pub const DEFAULT_LAMBDA_HI: f64 = 10.0;
/// Relative bracket width at which the λ̄ bisection stops.
pub const LAMBDA_BAR_RTOL: f64 = 1e-9;

/// A checked inequality together with the quantity it compares against zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Condition {
    pub holds: bool,
    pub value: f64,
}

impl Condition {
    fn positive(value: f64) -> Self {
        Condition {
            holds: value > 0.0,
            value,
        }
    }
}

/// Sufficient conditions for a pure threshold equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExistenceReport {
    /// Binary prior: `θ₁ - (N-1)`.
    pub condition_theta1: Option<Condition>,
    /// Binary prior: `g(λ) = E[(N-1)e^{-2λΘ} - Θe^{-λΘ}]`.
    pub condition_lambda: Option<Condition>,
    /// Uniform prior: `λ - 2/(N-1)`.
    pub condition_rate: Option<Condition>,
    pub overall: bool,
}

/// `g(λ) = Σ_m p_m [(N-1)e^{-2λθ_m} - θ_m e^{-λθ_m}]`; `None` for the uniform prior.
pub fn existence_margin(n_agents: usize, prior: &PriorSpec, rate: f64) -> Option<f64> {
    let PriorSpec::Binary { theta0, theta1, p0 } = *prior else {
        return None;
    };
    let others = (n_agents - 1) as f64;
    let term = |theta: f64| others * (-2.0 * rate * theta).exp() - theta * (-rate * theta).exp();
    Some(p0 * term(theta0) + (1.0 - p0) * term(theta1))
}

pub fn check_existence(params: &GameParams) -> ExistenceReport {
    let others = (params.n_agents - 1) as f64;
    match params.prior {
        PriorSpec::Binary { theta1, .. } => {
            let theta = Condition::positive(theta1 - others);
            let g = existence_margin(params.n_agents, &params.prior, params.rate)
                .expect("binary prior");
            let lambda = Condition::positive(g);
            ExistenceReport {
                condition_theta1: Some(theta),
                condition_lambda: Some(lambda),
                condition_rate: None,
                overall: theta.holds && lambda.holds,
            }
        }
        PriorSpec::UniformImproper => {
            let rate = Condition::positive(params.rate - 2.0 / others);
            ExistenceReport {
                condition_theta1: None,
                condition_lambda: None,
                condition_rate: Some(rate),
                overall: rate.holds,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaBar {
    pub value: f64,
    /// `g` stayed positive on the whole bracket `(0, λ_hi]`.
    pub saturated: bool,
}

/// Rate below which `g(λ) > 0`, bracketed from the first sign change of `g`
/// above zero. Requires `E[Θ] < N-1`, which makes `g(0) > 0`.
pub fn find_lambda_bar(params: &GameParams, lambda_hi: f64) -> Result<LambdaBar> {
    let PriorSpec::Binary { .. } = params.prior else {
        return Err(Error::WrongPrior { expected: "binary" });
    };
    if !(lambda_hi.is_finite() && lambda_hi > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda_hi must be positive, got {lambda_hi}"
        )));
    }
    let mean = params.prior.mean().expect("binary prior");
    let bound = (params.n_agents - 1) as f64;
    if mean >= bound {
        return Err(Error::PremiseViolated { mean, bound });
    }
    let g = |rate: f64| existence_margin(params.n_agents, &params.prior, rate).expect("binary");

    // geometric grid from λ_hi·1e-12 up to λ_hi
    const GRID_RATIO: f64 = 1.01;
    let mut lo = 0.0;
    let mut hi = lambda_hi * 1e-12;
    loop {
        if g(hi) <= 0.0 {
            break;
        }
        if hi >= lambda_hi {
            return Ok(LambdaBar {
                value: lambda_hi,
                saturated: true,
            });
        }
        lo = hi;
        hi = (hi * GRID_RATIO).min(lambda_hi);
    }
    // g(lo) > 0 (g(0) > 0 by the premise), g(hi) <= 0
    while hi - lo > LAMBDA_BAR_RTOL * hi {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(LambdaBar {
        value: lo,
        saturated: false,
    })
}

/// Update order of the best-response dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    /// Agents update in index order, each against the freshest profile.
    #[default]
    Sequential,
    /// All agents update against the previous snapshot.
    Simultaneous,
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Schedule::Sequential => "sequential",
            Schedule::Simultaneous => "simultaneous",
        })
    }
}

impl FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sequential" => Ok(Schedule::Sequential),
            "simultaneous" => Ok(Schedule::Simultaneous),
            other => Err(Error::InvalidArgument(format!(
                "unknown schedule {other:?}"
            ))),
        }
    }
}

/// Trajectory of a best-response dynamics run: the initial profile followed by
/// one snapshot per completed sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DynamicsTrace {
    pub iterations: Vec<ThresholdProfile>,
    pub converged: bool,
    pub sweeps_used: usize,
    pub schedule: Schedule,
    /// Simultaneous updates returned to the profile of two sweeps earlier.
    pub cycle_detected: bool,
}

impl DynamicsTrace {
    pub fn last(&self) -> &ThresholdProfile {
        self.iterations
            .last()
            .expect("trace holds the initial profile")
    }

    /// The trace as a JSON array of profiles.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.iterations).expect("profiles serialize")
    }
}

pub fn br_dynamics(
    params: &GameParams,
    init: &ThresholdProfile,
    schedule: Schedule,
    max_sweeps: usize,
) -> Result<DynamicsTrace> {
    params.check_profile(init)?;
    if max_sweeps == 0 {
        return Err(Error::InvalidArgument(
            "max_sweeps must be at least 1".into(),
        ));
    }
    let n = params.n_agents;
    let mut iterations = vec![init.clone()];
    let mut converged = false;
    let mut cycle_detected = false;
    let mut sweeps_used = 0;
    while sweeps_used < max_sweeps {
        let prev = iterations.last().expect("nonempty");
        let next = match schedule {
            Schedule::Sequential => {
                let mut current = prev.clone();
                for i in 0..n {
                    let response = best_response(params, i, &current)?.threshold;
                    current.set(i, response);
                }
                current
            }
            Schedule::Simultaneous => {
                let responses = (0..n)
                    .into_par_iter()
                    .map(|i| best_response(params, i, prev).map(|r| r.threshold))
                    .collect::<Result<Vec<_>>>()?;
                ThresholdProfile::new(responses)
            }
        };
        sweeps_used += 1;
        let unchanged = &next == prev;
        let two_cycle = schedule == Schedule::Simultaneous
            && iterations.len() >= 2
            && next == iterations[iterations.len() - 2];
        iterations.push(next);
        if unchanged {
            converged = true;
            break;
        }
        if two_cycle {
            cycle_detected = true;
            break;
        }
    }
    Ok(DynamicsTrace {
        iterations,
        converged,
        sweeps_used,
        schedule,
        cycle_detected,
    })
}

/// Fixed point of the best-response map: every agent already plays its best response.
pub fn is_equilibrium(params: &GameParams, profile: &ThresholdProfile) -> Result<bool> {
    params.check_profile(profile)?;
    for i in 0..params.n_agents {
        let beliefs = OpponentBeliefs::new(params, i, profile)?;
        if best_response_to(params, &beliefs)?.threshold != profile.get(i) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// One distinct equilibrium profile and how often it was reached.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramEntry {
    pub profile: ThresholdProfile,
    pub frequency: usize,
}

impl HistogramEntry {
    /// Common threshold of a symmetric profile, otherwise the thresholds joined by `;`.
    pub fn tau_star_label(&self) -> String {
        match self.profile.symmetric_threshold() {
            Some(t) => t.to_string(),
            None => self
                .profile
                .as_slice()
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(";"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiplicityHistogram {
    pub n_agents: usize,
    pub runs: usize,
    /// Distinct converged profiles, ordered by profile.
    pub entries: Vec<HistogramEntry>,
    /// Runs that hit the sweep limit without converging.
    pub unconverged: usize,
}

impl MultiplicityHistogram {
    pub fn distinct(&self) -> usize {
        self.entries.len()
    }
}

/// Generator for run `run` of an experiment seeded with `seed`.
///
/// ChaCha8 keyed by the seed, one stream per run, so runs are independent of
/// the order in which they execute.
pub fn run_rng(seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

/// Profile with i.i.d. `Geometric(p)` thresholds on `{0, 1, 2, ...}`.
pub fn geometric_profile<R: Rng + ?Sized>(
    n_agents: usize,
    p: f64,
    rng: &mut R,
) -> Result<ThresholdProfile> {
    let dist = Geometric::new(p)
        .map_err(|e| Error::InvalidArgument(format!("geometric parameter {p}: {e}")))?;
    Ok(ThresholdProfile::new(
        (0..n_agents)
            .map(|_| Threshold::Finite(dist.sample(rng).min(u32::MAX as u64) as u32))
            .collect(),
    ))
}

/// Runs sequential best-response dynamics from `runs` random geometric
/// initializations and tallies the equilibria reached.
pub fn multiplicity_experiment(
    params: &GameParams,
    runs: usize,
    init_geometric_p: f64,
    seed: u64,
    max_sweeps: usize,
) -> Result<MultiplicityHistogram> {
    if !(init_geometric_p > 0.0 && init_geometric_p < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "geometric parameter must lie in (0, 1), got {init_geometric_p}"
        )));
    }
    let outcomes = (0..runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = run_rng(seed, run as u64);
            let init = geometric_profile(params.n_agents, init_geometric_p, &mut rng)?;
            let trace = br_dynamics(params, &init, Schedule::Sequential, max_sweeps)?;
            Ok(trace.converged.then(|| trace.last().clone()))
        })
        .collect::<Result<Vec<Option<ThresholdProfile>>>>()?;

    let mut counts: BTreeMap<ThresholdProfile, usize> = BTreeMap::new();
    let mut unconverged = 0;
    for outcome in outcomes {
        match outcome {
            Some(profile) => *counts.entry(profile).or_default() += 1,
            None => unconverged += 1,
        }
    }
    let entries = counts
        .into_iter()
        .map(|(profile, frequency)| HistogramEntry { profile, frequency })
        .collect();
    Ok(MultiplicityHistogram {
        n_agents: params.n_agents,
        runs,
        entries,
        unconverged,
    })
}
