//! Flat key-value experiment configuration.
//!
//! One `key = value` pair per line, `#` starts a comment, unknown keys are
//! rejected. An empty file yields the default (headline) setup. Keys
//! mirror the [`ExperimentConfig`](crate::harness::ExperimentConfig)
//! field names exactly; command-line overrides reuse the same parser.

use std::path::Path;

use crate::harness::{ExperimentConfig, Strategy};
use crate::inductive::AlphaMode;
use crate::strategies::Norm;
use crate::{Error, Result};

/// All recognized configuration keys, in field order.
pub const CONFIG_KEYS: [&str; 14] = [
    "k",
    "n_obs",
    "rounds",
    "budget",
    "lambda",
    "alpha_mode",
    "k_hypo",
    "n_sim",
    "seed",
    "strategy",
    "dirichlet_concentration",
    "hypothesis_support",
    "norm",
    "multiplicity",
];

fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value for `{key}`: `{value}`")))
}

fn parse_u64(key: &str, value: &str) -> Result<u64> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value for `{key}`: `{value}`")))
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value for `{key}`: `{value}`")))
}

/// Applies one typed `key = value` assignment. Unknown keys error.
pub fn apply_override(config: &mut ExperimentConfig, key: &str, value: &str) -> Result<()> {
    let value = value.trim();
    match key {
        "k" => config.k = parse_usize(key, value)?,
        "n_obs" => config.n_obs = parse_u64(key, value)?,
        "rounds" => config.rounds = parse_usize(key, value)?,
        "budget" => config.budget = parse_u64(key, value)?,
        "lambda" => config.lambda = parse_f64(key, value)?,
        "alpha_mode" => {
            config.alpha_mode = if value == "evidence" {
                AlphaMode::FromEvidence
            } else {
                AlphaMode::Fixed(parse_f64(key, value)?)
            };
        }
        "k_hypo" => config.k_hypo = parse_usize(key, value)?,
        "n_sim" => config.n_sim = parse_usize(key, value)?,
        "seed" => config.seed = parse_u64(key, value)?,
        "strategy" => {
            config.strategies = if value == "all" {
                Strategy::ALL.to_vec()
            } else {
                value
                    .split(',')
                    .map(|s| s.trim().parse())
                    .collect::<Result<Vec<Strategy>>>()?
            };
        }
        "dirichlet_concentration" => config.dirichlet_concentration = parse_f64(key, value)?,
        "hypothesis_support" => {
            config.hypothesis_support = if value == "none" {
                None
            } else {
                Some(parse_usize(key, value)?)
            };
        }
        "norm" => {
            config.norm = match value {
                "l1" => Norm::L1,
                "l2" => Norm::L2,
                "linf" => Norm::Linf,
                other => {
                    return Err(Error::Config(format!(
                        "invalid value for `norm`: `{other}`"
                    )))
                }
            };
        }
        "multiplicity" => {
            config.multiplicity = match value {
                "on" | "true" => true,
                "off" | "false" => false,
                other => {
                    return Err(Error::Config(format!(
                        "invalid value for `multiplicity`: `{other}`"
                    )))
                }
            };
        }
        other => return Err(Error::Config(format!("unknown key `{other}`"))),
    }
    Ok(())
}

/// Parses a whole config document on top of the defaults.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", idx + 1)))?;
        apply_override(&mut config, key.trim(), value)
            .map_err(|e| Error::Config(format!("line {}: {e}", idx + 1)))?;
    }
    config.validate()?;
    Ok(config)
}

/// Reads and parses a config file.
pub fn parse_config_file(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_default_setup() {
        let config = parse_config_str("").unwrap();
        assert_eq!(config, ExperimentConfig::default());
        assert_eq!(config.k, 1000);
        assert_eq!(config.n_obs, 750);
        assert_eq!(config.rounds, 20);
        assert_eq!(config.budget, 5);
        assert_eq!(config.lambda, 1.0);
        assert_eq!(config.k_hypo, 10);
        assert_eq!(config.n_sim, 50);
        assert_eq!(config.strategies.len(), 5);
    }

    #[test]
    fn parses_typical_document() {
        let text = "\
# experiment shape
k = 100
n_obs = 200     # transmitter samples
rounds = 10
budget = 4
lambda = 0.5
alpha_mode = evidence
k_hypo = 6
n_sim = 8
seed = 42
strategy = wf-greedy, scld
dirichlet_concentration = 0.3
hypothesis_support = 25
norm = linf
multiplicity = off
";
        let config = parse_config_str(text).unwrap();
        assert_eq!(config.k, 100);
        assert_eq!(config.n_obs, 200);
        assert_eq!(config.rounds, 10);
        assert_eq!(config.budget, 4);
        assert_eq!(config.lambda, 0.5);
        assert_eq!(config.alpha_mode, AlphaMode::FromEvidence);
        assert_eq!(config.k_hypo, 6);
        assert_eq!(config.n_sim, 8);
        assert_eq!(config.seed, 42);
        assert_eq!(config.strategies, vec![Strategy::WfGreedy, Strategy::Scld]);
        assert_eq!(config.dirichlet_concentration, 0.3);
        assert_eq!(config.hypothesis_support, Some(25));
        assert_eq!(config.norm, Norm::Linf);
        assert!(!config.multiplicity);
    }

    #[test]
    fn fixed_alpha_parses_as_number() {
        let config = parse_config_str("alpha_mode = 12.5\n").unwrap();
        assert_eq!(config.alpha_mode, AlphaMode::Fixed(12.5));
    }

    #[test]
    fn unknown_key_is_rejected_with_line_number() {
        let err = parse_config_str("k = 10\nbogus = 1\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "{msg}");
        assert!(msg.contains("bogus"), "{msg}");
    }

    #[test]
    fn bad_value_is_rejected() {
        assert!(parse_config_str("k = not-a-number\n").is_err());
        assert!(parse_config_str("strategy = warp-drive\n").is_err());
        assert!(parse_config_str("norm = l3\n").is_err());
        assert!(parse_config_str("k\n").is_err());
    }

    #[test]
    fn override_type_checks() {
        let mut config = ExperimentConfig::default();
        apply_override(&mut config, "budget", "9").unwrap();
        assert_eq!(config.budget, 9);
        assert!(apply_override(&mut config, "budget", "x").is_err());
        assert!(apply_override(&mut config, "nope", "1").is_err());
    }

    #[test]
    fn validation_rejects_zero_counts() {
        assert!(parse_config_str("k = 0\n").is_err());
        assert!(parse_config_str("n_sim = 0\n").is_err());
        assert!(parse_config_str("hypothesis_support = 0\n").is_err());
    }
}
