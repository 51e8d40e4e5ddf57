use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::equilibrium::Schedule;
use crate::error::{Error, Result};
use crate::model::{GameDoc, GameParams, PriorKind, ThresholdProfile};

/// Flat experiment document. The game keys mirror [`GameDoc`]; the rest are
/// per-command knobs, each with a default where one makes sense.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_agents: Option<usize>,
    pub rate: Option<f64>,
    #[serde(rename = "prior.kind")]
    pub prior_kind: Option<PriorKind>,
    #[serde(rename = "prior.theta0")]
    pub theta0: Option<f64>,
    #[serde(rename = "prior.theta1")]
    pub theta1: Option<f64>,
    #[serde(rename = "prior.p0")]
    pub p0: Option<f64>,

    pub seed: Option<u64>,
    pub schedule: Option<Schedule>,
    pub max_sweeps: Option<usize>,
    /// Initial profile for `solve`; all `Finite{0}` when absent.
    pub init: Option<ThresholdProfile>,

    pub n_agents_list: Option<Vec<usize>>,
    pub runs: Option<usize>,
    pub init_geometric_p: Option<f64>,

    pub rate_min: Option<f64>,
    pub rate_max: Option<f64>,
    pub rate_points: Option<usize>,
    pub p0_list: Option<Vec<f64>>,

    pub draws: Option<usize>,
    pub identity_tolerance: Option<f64>,
    pub derivative_tolerance: Option<f64>,

    pub agent: Option<usize>,
    pub profile: Option<ThresholdProfile>,
    pub samples: Option<u64>,
    pub k_cap: Option<u32>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub(crate) fn require_key<T: Copy>(value: Option<T>, key: &str) -> Result<T> {
        value.ok_or_else(|| Error::InvalidArgument(format!("config is missing `{key}`")))
    }

    /// The validated game described by the config.
    pub fn game(&self) -> Result<GameParams> {
        let doc = GameDoc {
            n_agents: Self::require_key(self.n_agents, "n_agents")?,
            rate: Self::require_key(self.rate, "rate")?,
            prior_kind: Self::require_key(self.prior_kind, "prior.kind")?,
            theta0: self.theta0,
            theta1: self.theta1,
            p0: self.p0,
        };
        GameParams::try_from(doc)
    }

    /// Same game with a different population size.
    pub fn game_with_agents(&self, n_agents: usize) -> Result<GameParams> {
        let mut copy = self.clone();
        copy.n_agents = Some(n_agents);
        copy.game()
    }

    /// Seed from the command line, else from the config; stochastic commands fail without one.
    pub fn seed(&self, flag: Option<u64>) -> Result<u64> {
        flag.or(self.seed).ok_or_else(|| {
            Error::InvalidArgument("this command needs a seed (--seed or `seed`)".into())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_table_config() {
        let cfg = ExperimentConfig::from_json(
            r#"{"n_agents": 100, "rate": 0.001, "prior.kind": "binary",
                "prior.theta0": 50, "prior.theta1": 100, "prior.p0": 0.2,
                "schedule": "simultaneous", "init": [0, "never", 3]}"#,
        )
        .unwrap();
        assert_eq!(
            cfg.game().unwrap(),
            GameParams::binary(100, 1e-3, 50.0, 100.0, 0.2).unwrap()
        );
        assert_eq!(cfg.schedule, Some(Schedule::Simultaneous));
        assert_eq!(cfg.init.unwrap().len(), 3);
    }

    #[test]
    fn rejects_unknown_keys() {
        let err = ExperimentConfig::from_json(r#"{"n_agents": 3, "lambda": 1}"#).unwrap_err();
        assert_eq!(err.name(), "InvalidArgument");
    }

    #[test]
    fn seed_flag_wins() {
        let cfg = ExperimentConfig {
            seed: Some(1),
            ..Default::default()
        };
        assert_eq!(cfg.seed(Some(9)).unwrap(), 9);
        assert_eq!(cfg.seed(None).unwrap(), 1);
        assert!(ExperimentConfig::default().seed(None).is_err());
    }

    #[test]
    fn invalid_game_surfaces_model_error() {
        let cfg = ExperimentConfig::from_json(
            r#"{"n_agents": 10, "rate": 1, "prior.kind": "binary",
                "prior.theta0": 5, "prior.theta1": 5, "prior.p0": 0.5}"#,
        )
        .unwrap();
        assert_eq!(cfg.game().unwrap_err().name(), "InvalidOrder");
    }
}
