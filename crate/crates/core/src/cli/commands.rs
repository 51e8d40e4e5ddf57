use serde::Serialize;
use serde_json::json;

use super::config::ExperimentConfig;
use super::suite::{run_suite, SuiteSettings};
use crate::beliefs::{phi, pi_i};
use crate::best_response::best_response;
use crate::equilibrium::{
    br_dynamics, check_existence, existence_margin, is_equilibrium, multiplicity_experiment,
    Schedule, DEFAULT_MAX_SWEEPS,
};
use crate::error::{Error, Result};
use crate::model::{GameParams, PriorSpec, Threshold, ThresholdProfile};
use crate::payoff::{exact_payoff_binary, mc_payoff, verify_equilibrium_payoff};

pub const TABLE1_P0: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];
pub const DEFAULT_RUNS: usize = 100;
pub const DEFAULT_GEOMETRIC_P: f64 = 0.05;
pub const DEFAULT_MC_SAMPLES: u64 = 100_000;

/// Rendered command output. `failed` marks a completed run whose checks did not hold.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub body: String,
    pub failed: bool,
}

impl Output {
    fn ok(body: String) -> Self {
        Output {
            body,
            failed: false,
        }
    }
}

fn csv_error(e: impl std::fmt::Display) -> Error {
    Error::InvalidArgument(format!("csv: {e}"))
}

fn write_csv<R: Serialize>(header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(header).map_err(csv_error)?;
    for row in rows {
        writer.serialize(row).map_err(csv_error)?;
    }
    let bytes = writer.into_inner().map_err(csv_error)?;
    String::from_utf8(bytes).map_err(csv_error)
}

fn to_json(value: &impl Serialize) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("output serializes");
    text.push('\n');
    text
}

fn label(profile: &ThresholdProfile) -> String {
    match profile.symmetric_threshold() {
        Some(t) => t.to_string(),
        None => profile
            .as_slice()
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(";"),
    }
}

fn schedule_of(config: &ExperimentConfig, flag: Option<Schedule>) -> Schedule {
    flag.or(config.schedule).unwrap_or_default()
}

pub fn solve(config: &ExperimentConfig, schedule: Option<Schedule>) -> Result<Output> {
    let params = config.game()?;
    let init = config
        .init
        .clone()
        .unwrap_or_else(|| ThresholdProfile::uniform(params.n_agents, Threshold::Finite(0)));
    let schedule = schedule_of(config, schedule);
    let trace = br_dynamics(
        &params,
        &init,
        schedule,
        config.max_sweeps.unwrap_or(DEFAULT_MAX_SWEEPS),
    )?;
    let profile = trace.last();
    let equilibrium = if trace.converged {
        Some(is_equilibrium(&params, profile)?)
    } else {
        None
    };
    Ok(Output::ok(to_json(&json!({
        "profile": profile,
        "tau_star": label(profile),
        "converged": trace.converged,
        "sweeps_used": trace.sweeps_used,
        "schedule": schedule,
        "cycle_detected": trace.cycle_detected,
        "is_equilibrium": equilibrium,
        "trace": trace.to_json(),
    }))))
}

/// Symmetric thresholds reached by sequential dynamics for each `p₀` in the
/// table, with `N = 100`, `θ₀ = 50`, `θ₁ = 100`, `λ = 10⁻³`.
///
/// Dynamics start from everyone always activating. Best responses are
/// monotone in opponents' thresholds, so this lands on the greatest equilibrium.
pub fn table1_rows() -> Result<Vec<(f64, String)>> {
    TABLE1_P0
        .iter()
        .map(|&p0| {
            let params = GameParams::binary(100, 1e-3, 50.0, 100.0, p0)?;
            let init = ThresholdProfile::uniform(100, Threshold::Always);
            let trace = br_dynamics(&params, &init, Schedule::Sequential, DEFAULT_MAX_SWEEPS)?;
            Ok((p0, label(trace.last())))
        })
        .collect()
}

pub fn table1() -> Result<Output> {
    Ok(Output::ok(write_csv(&["p0", "tau_star"], table1_rows()?)?))
}

pub fn multiplicity(config: &ExperimentConfig, seed: Option<u64>) -> Result<Output> {
    let seed = config.seed(seed)?;
    let sizes = match &config.n_agents_list {
        Some(list) => list.clone(),
        None => vec![ExperimentConfig::require_key(config.n_agents, "n_agents")?],
    };
    let runs = config.runs.unwrap_or(DEFAULT_RUNS);
    let p = config.init_geometric_p.unwrap_or(DEFAULT_GEOMETRIC_P);
    let max_sweeps = config.max_sweeps.unwrap_or(DEFAULT_MAX_SWEEPS);
    let mut rows = Vec::new();
    for n in sizes {
        let params = config.game_with_agents(n)?;
        let histogram = multiplicity_experiment(&params, runs, p, seed, max_sweeps)?;
        for entry in &histogram.entries {
            rows.push((n, entry.tau_star_label(), entry.frequency));
        }
        if histogram.unconverged > 0 {
            rows.push((n, "unconverged".to_string(), histogram.unconverged));
        }
    }
    Ok(Output::ok(write_csv(
        &["n_agents", "tau_star", "frequency"],
        rows,
    )?))
}

/// `points` values spaced evenly in `log10` between `lo` and `hi`.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && points >= 1) {
        return Err(Error::InvalidArgument(format!(
            "rate grid needs 0 < rate_min <= rate_max and rate_points >= 1, got {lo}, {hi}, {points}"
        )));
    }
    if points == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.log10(), hi.log10());
    let step = (b - a) / (points - 1) as f64;
    Ok((0..points)
        .map(|i| 10f64.powf(a + step * i as f64))
        .collect())
}

/// Whether an agent facing opponents on threshold 0 activates at `k = 0`
/// while `θ₁ > N-1` keeps the crossing finite.
fn crossing_exists(params: &GameParams) -> Result<bool> {
    let PriorSpec::Binary { theta1, .. } = params.prior else {
        return Err(Error::WrongPrior { expected: "binary" });
    };
    let zeros = ThresholdProfile::uniform(params.n_agents, Threshold::Finite(0));
    let at_zero = pi_i(params, 0, &zeros, 0)? >= phi(params, 0);
    Ok(at_zero && theta1 > (params.n_agents - 1) as f64)
}

pub fn conditions(config: &ExperimentConfig) -> Result<Output> {
    let base = config
        .game()
        .or_else(|err| match (config.p0, config.p0_list.as_ref()) {
            // a binary sweep may leave `prior.p0` to the list
            (None, Some(list)) if !list.is_empty() => ExperimentConfig {
                p0: Some(list[0]),
                ..config.clone()
            }
            .game(),
            _ => Err(err),
        })?;
    let rates = log_grid(
        config.rate_min.unwrap_or(1e-4),
        config.rate_max.unwrap_or(1.0),
        config.rate_points.unwrap_or(41),
    )?;
    let n = base.n_agents;
    match base.prior {
        PriorSpec::Binary { theta0, theta1, p0 } => {
            let p0s = config.p0_list.clone().unwrap_or_else(|| vec![p0]);
            let mut rows = Vec::new();
            for &p in &p0s {
                for &rate in &rates {
                    let params = GameParams::binary(n, rate, theta0, theta1, p)?;
                    let report = check_existence(&params);
                    let g = existence_margin(n, &params.prior, rate).expect("binary prior");
                    let margin = theta1 - (n - 1) as f64;
                    rows.push((
                        rate,
                        p,
                        g,
                        margin,
                        report.overall,
                        crossing_exists(&params)?,
                    ));
                }
            }
            Ok(Output::ok(write_csv(
                &[
                    "rate",
                    "p0",
                    "g",
                    "theta1_margin",
                    "existence",
                    "crossing_exists",
                ],
                rows,
            )?))
        }
        PriorSpec::UniformImproper => {
            let bound = 2.0 / (n - 1) as f64;
            let mut rows = Vec::new();
            for &rate in &rates {
                let report = check_existence(&GameParams::uniform(n, rate)?);
                rows.push((rate, rate - bound, report.overall));
            }
            Ok(Output::ok(write_csv(
                &["rate", "rate_margin", "crossing_exists"],
                rows,
            )?))
        }
    }
}

pub fn verify(config: &ExperimentConfig, seed: Option<u64>) -> Result<Output> {
    let mut settings = SuiteSettings::new(config.seed(seed)?);
    if let Some(draws) = config.draws {
        settings.draws = draws;
    }
    if let Some(tol) = config.identity_tolerance {
        settings.identity_tolerance = tol;
    }
    if let Some(tol) = config.derivative_tolerance {
        settings.derivative_tolerance = tol;
    }
    let report = run_suite(&settings)?;
    Ok(Output {
        body: to_json(&report),
        failed: !report.pass,
    })
}

pub fn payoff(
    config: &ExperimentConfig,
    seed: Option<u64>,
    schedule: Option<Schedule>,
) -> Result<Output> {
    let seed = config.seed(seed)?;
    let params = config.game()?;
    if !params.prior.is_binary() {
        return Err(Error::WrongPrior { expected: "binary" });
    }
    let profile = match &config.profile {
        Some(profile) => profile.clone(),
        None => {
            let init = ThresholdProfile::uniform(params.n_agents, Threshold::Finite(0));
            let sweeps = config.max_sweeps.unwrap_or(DEFAULT_MAX_SWEEPS);
            br_dynamics(&params, &init, schedule_of(config, schedule), sweeps)?
                .last()
                .clone()
        }
    };
    let agent = config.agent.unwrap_or(0);
    let exact = exact_payoff_binary(&params, agent, &profile)?;
    let mc = mc_payoff(
        &params,
        agent,
        &profile,
        config.samples.unwrap_or(DEFAULT_MC_SAMPLES),
        seed,
    )?;
    let k_cap = match config.k_cap {
        Some(cap) => cap,
        None => {
            let mut cap = 0;
            for i in 0..params.n_agents {
                cap = cap.max(best_response(&params, i, &profile)?.k_cap_used);
            }
            cap
        }
    };
    let verification = verify_equilibrium_payoff(&params, &profile, k_cap)?;
    Ok(Output::ok(to_json(&json!({
        "profile": profile,
        "agent": agent,
        "exact": exact,
        "mc": mc,
        "mc_contains_exact": mc.contains(exact),
        "k_cap": k_cap,
        "verification": verification,
    }))))
}
