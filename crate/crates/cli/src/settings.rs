//! Run settings shared by all subcommands: command-line flags, optionally
//! overridden key-by-key by a TOML config file.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Dcpn,
    Gist,
    Dca,
    Proxgrad,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Dcpn => "dcpn",
            Self::Gist => "gist",
            Self::Dca => "dca",
            Self::Proxgrad => "proxgrad",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Logistic,
    Transductive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyKind {
    L1,
    #[value(name = "capped_l1")]
    CappedL1,
}

/// Every knob as an optional value so that flags and config files can be merged.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Training set (libsvm format)
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Test set (libsvm format); without it, benchmark makes a seeded 80/20 split
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Unlabeled examples (libsvm format, labels ignored)
    #[arg(long)]
    pub unlabeled: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub solver: Option<SolverKind>,
    /// Comma-separated solver list for benchmark
    #[arg(long, value_enum, value_delimiter = ',')]
    pub solvers: Option<Vec<SolverKind>>,
    #[arg(long, value_enum)]
    pub loss: Option<LossKind>,
    #[arg(long, value_enum)]
    pub penalty: Option<PenaltyKind>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    /// Weight of the unlabeled term
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Shift of the transductive loss
    #[arg(long)]
    pub tau: Option<f64>,

    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of consecutive seeds (benchmark)
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Worker threads for benchmark (default: all cores)
    #[arg(long)]
    pub jobs: Option<usize>,

    /// Append an unpenalized constant feature
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub intercept: Option<bool>,
    /// Center as well as scale file datasets (densifies rows)
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub full_standardize: Option<bool>,

    /// Outer iteration cap of the selected solver(s)
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Relative objective change stopping threshold
    #[arg(long)]
    pub rel_tol: Option<f64>,

    /// Toy problem dimension (uses generated data instead of files)
    #[arg(long)]
    pub toy_d: Option<usize>,
    /// Number of relevant toy features
    #[arg(long)]
    pub toy_t: Option<usize>,
    #[arg(long)]
    pub toy_train: Option<usize>,
    #[arg(long)]
    pub toy_test: Option<usize>,
    #[arg(long)]
    pub toy_unlabeled: Option<usize>,
}

impl Settings {
    /// Keys present in `file` replace the flag values.
    pub fn overridden_by(self, file: Settings) -> Settings {
        let mut base = serde_json::to_value(self).expect("settings serialize");
        let over = serde_json::to_value(file).expect("settings serialize");
        if let (Some(b), Some(o)) = (base.as_object_mut(), over.as_object()) {
            for (k, v) in o {
                if !v.is_null() {
                    b.insert(k.clone(), v.clone());
                }
            }
        }
        serde_json::from_value(base).expect("merged settings deserialize")
    }

    pub fn from_toml_file(path: &Path) -> Result<Settings, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn require_out(&self) -> Result<&Path, CliError> {
        self.out.as_deref().ok_or_else(|| CliError::Usage("--out is required".into()))
    }

    pub fn require_lambda(&self) -> Result<f64, CliError> {
        positive("lambda", self.lambda)
    }

    pub fn penalty_kind(&self) -> Result<PenaltyKind, CliError> {
        self.penalty.ok_or_else(|| CliError::Usage("--penalty is required (l1 or capped_l1)".into()))
    }

    pub fn theta_for(&self, penalty: PenaltyKind) -> Result<Option<f64>, CliError> {
        match penalty {
            PenaltyKind::L1 => Ok(None),
            PenaltyKind::CappedL1 => positive("theta", self.theta).map(Some),
        }
    }

    pub fn uses_toy(&self) -> bool {
        self.toy_d.is_some()
    }
}

fn positive(name: &str, v: Option<f64>) -> Result<f64, CliError> {
    match v {
        Some(x) if x > 0.0 && x.is_finite() => Ok(x),
        Some(x) => Err(CliError::Usage(format!("--{name} must be > 0, got {x}"))),
        None => Err(CliError::Usage(format!("--{name} is required"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_keys_override_flags() {
        let flags = Settings {
            lambda: Some(1.0),
            theta: Some(0.5),
            seed: Some(3),
            ..Default::default()
        };
        let file: Settings = toml::from_str("lambda = 2.0\npenalty = \"capped_l1\"\nsolvers = [\"dcpn\", \"gist\"]\n").unwrap();
        let merged = flags.overridden_by(file);
        assert_eq!(merged.lambda, Some(2.0));
        assert_eq!(merged.theta, Some(0.5));
        assert_eq!(merged.seed, Some(3));
        assert_eq!(merged.penalty, Some(PenaltyKind::CappedL1));
        assert_eq!(merged.solvers, Some(vec![SolverKind::Dcpn, SolverKind::Gist]));
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        assert!(toml::from_str::<Settings>("lamda = 2.0\n").is_err());
    }

    #[test]
    fn hyperparameters_are_required() {
        let s = Settings::default();
        assert!(s.require_lambda().is_err());
        assert!(s.theta_for(PenaltyKind::CappedL1).is_err());
        assert_eq!(s.theta_for(PenaltyKind::L1).unwrap(), None);
        let s = Settings { lambda: Some(-1.0), ..Default::default() };
        assert!(s.require_lambda().is_err());
    }
}
