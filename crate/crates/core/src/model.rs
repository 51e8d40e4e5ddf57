//! Game instances, threshold policies and strategy profiles.
//!
//! A game is fixed by the number of agents `N`, the Poisson rate multiplier
//! `λ` and the prior on the fundamental `Θ`. Every agent observes
//! `Y_i ~ Poisson(λΘ)`, conditionally independent given `Θ`, and activates
//! iff its observation is at most its threshold.

use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

/// Prior distribution of the fundamental.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorSpec {
    /// `Θ ∈ {θ₀, θ₁}` with `P(Θ = θ₀) = p0`.
    Binary { theta0: f64, theta1: f64, p0: f64 },
    /// Improper density 1 on `θ > 0`.
    UniformImproper,
}

impl PriorSpec {
    /// Probability of the high state. Always derived from `p0`.
    pub fn p1(&self) -> Option<f64> {
        match *self {
            PriorSpec::Binary { p0, .. } => Some(1.0 - p0),
            PriorSpec::UniformImproper => None,
        }
    }

    /// Prior mean of the fundamental; `None` for the improper prior.
    pub fn mean(&self) -> Option<f64> {
        match *self {
            PriorSpec::Binary { theta0, theta1, p0 } => Some(p0 * theta0 + (1.0 - p0) * theta1),
            PriorSpec::UniformImproper => None,
        }
    }

    pub fn is_binary(&self) -> bool {
        matches!(self, PriorSpec::Binary { .. })
    }
}

/// A complete game instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GameDoc", into = "GameDoc")]
pub struct GameParams {
    pub n_agents: usize,
    pub rate: f64,
    pub prior: PriorSpec,
}

impl GameParams {
    /// Builds and validates a game.
    pub fn new(n_agents: usize, rate: f64, prior: PriorSpec) -> Result<Self> {
        let params = GameParams {
            n_agents,
            rate,
            prior,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn binary(n_agents: usize, rate: f64, theta0: f64, theta1: f64, p0: f64) -> Result<Self> {
        Self::new(n_agents, rate, PriorSpec::Binary { theta0, theta1, p0 })
    }

    pub fn uniform(n_agents: usize, rate: f64) -> Result<Self> {
        Self::new(n_agents, rate, PriorSpec::UniformImproper)
    }

    /// Checks every invariant and reports the first violation.
    pub fn validate(&self) -> Result<()> {
        if self.n_agents < 2 {
            return Err(Error::TooFewAgents {
                n_agents: self.n_agents,
            });
        }
        if !(self.rate.is_finite() && self.rate > 0.0) {
            return Err(Error::InvalidRate { rate: self.rate });
        }
        if let PriorSpec::Binary { theta0, theta1, p0 } = self.prior {
            for value in [theta0, theta1] {
                if !(value.is_finite() && value > 0.0) {
                    return Err(Error::NonPositiveFundamental { value });
                }
            }
            if theta0 >= theta1 {
                return Err(Error::InvalidOrder { theta0, theta1 });
            }
            if !(p0 > 0.0 && p0 < 1.0) {
                return Err(Error::InvalidProbability { p0 });
            }
        }
        Ok(())
    }

    pub(crate) fn check_agent(&self, i: usize) -> Result<()> {
        if i >= self.n_agents {
            return Err(Error::AgentIndex {
                index: i,
                n_agents: self.n_agents,
            });
        }
        Ok(())
    }

    pub(crate) fn check_profile(&self, profile: &ThresholdProfile) -> Result<()> {
        if profile.len() != self.n_agents {
            return Err(Error::ProfileLength {
                expected: self.n_agents,
                got: profile.len(),
            });
        }
        Ok(())
    }
}

/// Binary action of an agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Idle = 0,
    Activate = 1,
}

impl Action {
    pub fn as_f64(self) -> f64 {
        self as u8 as f64
    }
}

/// Threshold policy `γ(k) = 1(k ≤ τ)`, extended with the two degenerate policies.
///
/// The derived ordering is `Never < Finite(0) < Finite(1) < ... < Always`, which is
/// the ordering of the activation sets by inclusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Threshold {
    Never,
    Finite(u32),
    Always,
}

impl Threshold {
    /// Action taken on observation `k`.
    pub fn policy_eval(self, k: u32) -> Action {
        let active = match self {
            Threshold::Never => false,
            Threshold::Finite(tau) => k <= tau,
            Threshold::Always => true,
        };
        if active {
            Action::Activate
        } else {
            Action::Idle
        }
    }

    pub fn finite(self) -> Option<u32> {
        match self {
            Threshold::Finite(tau) => Some(tau),
            _ => None,
        }
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threshold::Never => f.write_str("never"),
            Threshold::Finite(tau) => write!(f, "{tau}"),
            Threshold::Always => f.write_str("always"),
        }
    }
}

impl Serialize for Threshold {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Threshold::Never => serializer.serialize_str("never"),
            Threshold::Finite(tau) => serializer.serialize_u32(*tau),
            Threshold::Always => serializer.serialize_str("always"),
        }
    }
}

impl<'de> Deserialize<'de> for Threshold {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct ThresholdVisitor;

        impl Visitor<'_> for ThresholdVisitor {
            type Value = Threshold;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a nonnegative integer threshold or \"never\"/\"always\"")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Threshold, E> {
                u32::try_from(v)
                    .map(Threshold::Finite)
                    .map_err(|_| E::custom(format!("threshold {v} out of range")))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Threshold, E> {
                if v < 0 {
                    return Err(E::custom(format!("threshold {v} is negative")));
                }
                self.visit_u64(v as u64)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Threshold, E> {
                match v {
                    "never" => Ok(Threshold::Never),
                    "always" => Ok(Threshold::Always),
                    other => other
                        .parse::<u32>()
                        .map(Threshold::Finite)
                        .map_err(|_| E::custom(format!("unknown threshold {other:?}"))),
                }
            }
        }

        deserializer.deserialize_any(ThresholdVisitor)
    }
}

/// One threshold per agent.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ThresholdProfile(Vec<Threshold>);

impl ThresholdProfile {
    pub fn new(thresholds: Vec<Threshold>) -> Self {
        ThresholdProfile(thresholds)
    }

    pub fn uniform(n_agents: usize, threshold: Threshold) -> Self {
        ThresholdProfile(vec![threshold; n_agents])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> Threshold {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, threshold: Threshold) {
        self.0[i] = threshold;
    }

    pub fn as_slice(&self) -> &[Threshold] {
        &self.0
    }

    /// Thresholds of every agent except `i`.
    pub fn opponents(&self, i: usize) -> impl Iterator<Item = Threshold> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(move |&(j, _)| j != i)
            .map(|(_, &t)| t)
    }

    /// The common threshold if all agents agree.
    pub fn symmetric_threshold(&self) -> Option<Threshold> {
        let first = *self.0.first()?;
        self.0.iter().all(|&t| t == first).then_some(first)
    }
}

impl From<Vec<Threshold>> for ThresholdProfile {
    fn from(thresholds: Vec<Threshold>) -> Self {
        ThresholdProfile(thresholds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorKind {
    Binary,
    Uniform,
}

/// Flat key-value form of [`GameParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameDoc {
    pub n_agents: usize,
    pub rate: f64,
    #[serde(rename = "prior.kind")]
    pub prior_kind: PriorKind,
    #[serde(
        rename = "prior.theta0",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub theta0: Option<f64>,
    #[serde(
        rename = "prior.theta1",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub theta1: Option<f64>,
    #[serde(rename = "prior.p0", default, skip_serializing_if = "Option::is_none")]
    pub p0: Option<f64>,
}

impl TryFrom<GameDoc> for GameParams {
    type Error = Error;

    fn try_from(doc: GameDoc) -> Result<Self> {
        let prior = match doc.prior_kind {
            PriorKind::Binary => {
                let field = |value: Option<f64>, name: &str| {
                    value.ok_or_else(|| {
                        Error::InvalidArgument(format!("binary prior requires prior.{name}"))
                    })
                };
                PriorSpec::Binary {
                    theta0: field(doc.theta0, "theta0")?,
                    theta1: field(doc.theta1, "theta1")?,
                    p0: field(doc.p0, "p0")?,
                }
            }
            PriorKind::Uniform => {
                if doc.theta0.is_some() || doc.theta1.is_some() || doc.p0.is_some() {
                    return Err(Error::InvalidArgument(
                        "uniform prior takes no theta0/theta1/p0".into(),
                    ));
                }
                PriorSpec::UniformImproper
            }
        };
        GameParams::new(doc.n_agents, doc.rate, prior)
    }
}

impl From<GameParams> for GameDoc {
    fn from(params: GameParams) -> Self {
        match params.prior {
            PriorSpec::Binary { theta0, theta1, p0 } => GameDoc {
                n_agents: params.n_agents,
                rate: params.rate,
                prior_kind: PriorKind::Binary,
                theta0: Some(theta0),
                theta1: Some(theta1),
                p0: Some(p0),
            },
            PriorSpec::UniformImproper => GameDoc {
                n_agents: params.n_agents,
                rate: params.rate,
                prior_kind: PriorKind::Uniform,
                theta0: None,
                theta1: None,
                p0: None,
            },
        }
    }
}
