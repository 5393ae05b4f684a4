//! Experiment configuration in TOML.
//!
//! ```toml
//! seed = 7            # optional; overrides the per-section seeds
//! [scenario]          # simulator::ScenarioConfig
//! [preprocess]        # signals::PreprocessConfig
//! [train]             # training::TrainConfig
//! [match]             # matching::MatchConfig
//! ```
//!
//! Every section and key is optional and unknown keys are rejected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::MatchConfig;
use crate::signals::PreprocessConfig;
use crate::simulator::ScenarioConfig;
use crate::training::TrainConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub scenario: ScenarioConfig,
    pub preprocess: PreprocessConfig,
    pub train: TrainConfig,
    #[serde(rename = "match")]
    pub matching: MatchConfig,
}

impl ExperimentConfig {
    /// Parses TOML; errors name the offending key.
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| {
            let key = e
                .span()
                .and_then(|span| {
                    let line_start = text[..span.start].rfind('\n').map_or(0, |i| i + 1);
                    let line = text[line_start..].lines().next()?;
                    let key = line.split('=').next()?.trim().trim_matches(['[', ']']);
                    (!key.is_empty()).then(|| key.to_owned())
                })
                .unwrap_or_else(|| "<document>".to_owned());
            Error::Config {
                key,
                message: e.message().to_owned(),
            }
        })?;
        if let Some(seed) = cfg.seed {
            cfg.set_seed(seed);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            key: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text)
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        self.scenario.seed = seed;
        self.train.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.train.validate()?;
        self.matching.validate()?;
        let p = &self.preprocess;
        for (key, v) in [
            ("rate", p.rate),
            ("sigma_trajectory", p.sigma_trajectory),
            ("sigma_sensor", p.sigma_sensor),
            ("displacement_floor", p.displacement_floor),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config {
                    key: key.into(),
                    message: format!("must be positive, got {v}"),
                });
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        assert_eq!(ExperimentConfig::from_toml("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn annotated_example_lists_the_defaults() {
        let text = include_str!("../../../configs/example.toml");
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(
            cfg,
            ExperimentConfig {
                seed: Some(0),
                ..ExperimentConfig::default()
            }
        );
    }

    #[test]
    fn sections_and_seed_apply() {
        let cfg =
            ExperimentConfig::from_toml("seed = 5\n[scenario]\nparticipants = 3\n[train]\nrho_neg = 4.0\n[match]\nr_csdr = 0.3\n").unwrap();
        assert_eq!(cfg.scenario.participants, 3);
        assert_eq!(cfg.scenario.seed, 5);
        assert_eq!(cfg.train.seed, 5);
        assert_eq!(cfg.train.rho_neg, 4.0);
        assert_eq!(cfg.matching.r_csdr, 0.3);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = ExperimentConfig::from_toml("[train]\nepochs = 3\nlearning_rat = 0.1\n").unwrap_err();
        match err {
            Error::Config { key, .. } => assert_eq!(key, "learning_rat"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_type_and_bad_value_are_named() {
        match ExperimentConfig::from_toml("[scenario]\nduration = \"long\"\n").unwrap_err() {
            Error::Config { key, .. } => assert_eq!(key, "duration"),
            other => panic!("{other:?}"),
        }
        match ExperimentConfig::from_toml("[match]\np_acpt = 0.2\n").unwrap_err() {
            Error::Config { key, .. } => assert_eq!(key, "p_acpt"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = ExperimentConfig::default();
        cfg.set_seed(3);
        cfg.scenario.coordinated_pair = true;
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }
}
