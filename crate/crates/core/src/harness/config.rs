use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{LabelColumn, MissingPolicy};
use crate::descriptors::DescriptorKind;
use crate::error::{Error, Result};
use crate::optim::{Budget, OptimiserKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data_dir: PathBuf,
    pub descriptors: Vec<DescriptorKind>,
    pub optimisers: Vec<OptimiserKind>,
    pub max_evaluations: usize,
    pub max_proposals: usize,
    pub outer_folds: usize,
    pub seed: u64,
    /// Dataset-equal problem weights in the analysis; uniform otherwise.
    pub weighting: bool,
    pub out_dir: PathBuf,
    pub label_column: LabelColumn,
    pub missing: MissingPolicy,
    /// Classes with fewer instances do not become problems.
    pub min_class_size: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let budget = Budget::default();
        Self {
            data_dir: PathBuf::from("datasets"),
            descriptors: DescriptorKind::ALL.to_vec(),
            optimisers: OptimiserKind::ALL.to_vec(),
            max_evaluations: budget.max_evaluations,
            max_proposals: budget.max_proposals,
            outer_folds: 5,
            seed: 0,
            weighting: true,
            out_dir: PathBuf::from("results"),
            label_column: LabelColumn::default(),
            missing: MissingPolicy::default(),
            min_class_size: 10,
        }
    }
}

impl ExperimentConfig {
    /// Reads a TOML file, or JSON when the extension is `.json`.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Ok(serde_json::from_str(&text)?)
        } else {
            toml::from_str(&text).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
        }
    }

    pub fn budget(&self, seed: u64) -> Budget {
        Budget::new(self.max_evaluations, self.max_proposals, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.data_dir.is_dir() {
            return Err(Error::InvalidInput(format!(
                "data directory {} does not exist",
                self.data_dir.display()
            )));
        }
        if self.descriptors.is_empty() || self.optimisers.is_empty() {
            return Err(Error::InvalidInput("no descriptors or optimisers selected".into()));
        }
        if self.max_evaluations == 0 || self.max_proposals < self.max_evaluations {
            return Err(Error::InvalidInput(format!(
                "budget of {} evaluations within {} proposals is unusable",
                self.max_evaluations, self.max_proposals
            )));
        }
        if self.outer_folds < 2 {
            return Err(Error::InvalidInput("need at least 2 outer folds".into()));
        }
        Ok(())
    }
}
