//! Monte Carlo efficiency studies: simulate, fit every estimator, compute
//! standard errors, and summarize bias, sample variance and SV ratios.

mod ledger;
mod presets;
mod run;
mod summary;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::ModelKind;
use crate::moments::Level;
use crate::series::INTERCEPT;
use crate::simulation::SimConfig;

pub use ledger::{append_ledger, read_ledger, write_ledger, ReplicateRow};
pub use presets::{preset, preset_names};
pub use run::{run_replicates, run_study};
pub use summary::{summarize, CoefficientSummary, EstimatorSummary, RatioRow, StudySummary};

/// Standard errors computed for every replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeOptions {
    #[serde(default)]
    pub white: bool,
    #[serde(default = "default_ell")]
    pub ell: usize,
    /// Moment-based SEs (GLM only).
    #[serde(default)]
    pub ddw: bool,
    #[serde(default)]
    pub ddw_max_lag: Option<usize>,
}

fn default_ell() -> usize {
    crate::inference::DEFAULT_ELL
}

impl Default for SeOptions {
    fn default() -> Self {
        Self { white: false, ell: default_ell(), ddw: false, ddw_max_lag: None }
    }
}

fn default_starts() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyDesign {
    pub name: String,
    /// Template; its seed is the base seed and replicate `r` uses stream `r`.
    pub sim: SimConfig,
    pub replicates: usize,
    pub estimators: Vec<ModelKind>,
    #[serde(default)]
    pub se: SeOptions,
    /// Numerator of the SV ratios.
    pub reference: ModelKind,
    #[serde(default = "default_starts")]
    pub starts: usize,
    /// Factor level the design represents, for plot-ready output.
    #[serde(default)]
    pub level: Option<Level>,
    #[serde(default)]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl StudyDesign {
    pub fn validate(&self) -> Result<()> {
        if self.replicates < 2 {
            return Err(Error::InvalidSpec(format!("{} replicates; at least 2 are required", self.replicates)));
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidSpec("no estimator requested".into()));
        }
        if !self.estimators.contains(&self.reference) {
            return Err(Error::InvalidSpec(format!("reference estimator {} is not fitted", self.reference)));
        }
        let mut seen = self.estimators.clone();
        seen.sort_by_key(|k| *k as u8);
        seen.dedup();
        if seen.len() != self.estimators.len() {
            return Err(Error::InvalidSpec("estimators are listed twice".into()));
        }
        if self.starts == 0 {
            return Err(Error::InvalidSpec("at least one start is required".into()));
        }
        self.sim.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let design: StudyDesign = serde_json::from_str(text)?;
        design.validate()?;
        Ok(design)
    }

    /// Coefficient labels in the order of `beta`.
    pub fn labels(&self) -> Vec<String> {
        std::iter::once(INTERCEPT.to_string()).chain(self.sim.covariates.iter().map(|c| c.label())).collect()
    }

    /// The same design with a different replicate count.
    pub fn with_replicates(mut self, replicates: usize) -> Self {
        self.replicates = replicates;
        self
    }
}
