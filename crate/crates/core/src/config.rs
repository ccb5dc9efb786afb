//! TOML model configuration shared by every subcommand.
//!
//! ```toml
//! rates = [0.001, 5.0, 10.0, 15.0, 20.0, 25.0, 65.0]
//! n_normal = 5
//! pbar = "uniform"          # or an N x (N+2) array of rows
//! a_low = 1.0
//! a_high = 1.0
//! alpha = 0.5
//! threshold = 0.5
//! report_sum = true
//! prior = "uniform"         # or an explicit (A, 0, 1..N, N+1) vector
//!
//! [binning]
//! width = 6
//! unit = "seconds"
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detector::DetectorConfig;
use crate::error::{Error, Result};
use crate::hmm::{Belief, RateLadder, TransitionModel};
use crate::ingest::Binning;
use crate::learner::{car_count_ladder, default_transition, person_count_ladder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Named {
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Named(Named),
    Rows(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PriorSpec {
    Named(Named),
    Vector(Vec<f64>),
}

/// Where a learned ladder came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub data_sha256: String,
    pub samples: usize,
    pub n_requested: usize,
    pub n_effective: usize,
    pub boundary_multiplier: f64,
    pub rate_floor: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfigFile {
    pub rates: Vec<f64>,
    pub n_normal: usize,
    pub pbar: MatrixSpec,
    pub a_low: f64,
    pub a_high: f64,
    pub alpha: f64,
    pub threshold: f64,
    #[serde(default)]
    pub report_sum: bool,
    pub prior: PriorSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binning: Option<Binning>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl ModelConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    /// Uniform transitions, `a_low = a_high = 1`, uniform prior.
    pub fn from_ladder(ladder: &RateLadder, alpha: f64, threshold: f64) -> Self {
        Self {
            rates: ladder.rates().to_vec(),
            n_normal: ladder.normal_count(),
            pbar: MatrixSpec::Named(Named::Uniform),
            a_low: 1.0,
            a_high: 1.0,
            alpha,
            threshold,
            report_sum: false,
            prior: PriorSpec::Named(Named::Uniform),
            binning: None,
            provenance: None,
        }
    }

    /// Person-count reference setup: `N = 5`, sum statistic, threshold 0.5,
    /// six-second bins.
    pub fn person_counts() -> Self {
        Self::reference(&person_count_ladder())
    }

    /// Car-count reference setup: `N = 1`, sum statistic, threshold 0.5,
    /// six-second bins.
    pub fn car_counts() -> Self {
        Self::reference(&car_count_ladder())
    }

    fn reference(ladder: &RateLadder) -> Self {
        Self {
            report_sum: true,
            binning: Some(Binning::seconds(6)),
            ..Self::from_ladder(ladder, 0.5, 0.5)
        }
    }

    pub fn ladder(&self) -> Result<RateLadder> {
        let ladder = RateLadder::new(self.rates.clone())?;
        if ladder.normal_count() != self.n_normal {
            return Err(Error::Config(format!(
                "n_normal = {} but {} rates imply N = {}",
                self.n_normal,
                self.rates.len(),
                ladder.normal_count()
            )));
        }
        Ok(ladder)
    }

    pub fn transition(&self) -> Result<TransitionModel> {
        match &self.pbar {
            MatrixSpec::Named(Named::Uniform) => {
                default_transition(self.n_normal, self.a_low, self.a_high)
            }
            MatrixSpec::Rows(rows) => TransitionModel::new(rows.clone(), self.a_low, self.a_high),
        }
    }

    pub fn prior(&self) -> Result<Belief> {
        match &self.prior {
            PriorSpec::Named(Named::Uniform) => Ok(Belief::uniform_normal(self.n_normal)),
            PriorSpec::Vector(v) => Belief::new(v.clone()),
        }
    }

    pub fn detector(&self) -> Result<DetectorConfig> {
        DetectorConfig::new(self.ladder()?, self.transition()?, self.alpha, self.threshold)?
            .with_prior(self.prior()?)
            .map(|c| c.with_report_sum(self.report_sum))
    }

    /// Inverse of [`ModelConfigFile::detector`]: matrices and the prior are
    /// written out explicitly.
    pub fn from_detector(cfg: &DetectorConfig) -> Self {
        Self {
            rates: cfg.ladder.rates().to_vec(),
            n_normal: cfg.ladder.normal_count(),
            pbar: MatrixSpec::Rows(cfg.model.pbar().to_vec()),
            a_low: cfg.model.a_low(),
            a_high: cfg.model.a_high(),
            alpha: cfg.alpha,
            threshold: cfg.threshold,
            report_sum: cfg.report_sum,
            prior: PriorSpec::Vector(cfg.prior.probs().to_vec()),
            binning: None,
            provenance: None,
        }
    }
}
