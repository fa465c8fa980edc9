//! JSON description of a synthetic loop for the simulator.

use std::fs;
use std::path::Path;

use loopsched_core::simulator::{Locality, SimError, SyntheticWorkload, WorkloadKind};
use serde::{Deserialize, Serialize};

use crate::dataset::DatasetError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum Distribution {
    Homogeneous { mean: f64 },
    Gaussian { mean: f64, std_dev: f64 },
    Lognormal { mean: f64, std_dev: f64 },
    PowerLaw { exponent: f64, scale: f64 },
}

impl From<Distribution> for WorkloadKind {
    fn from(d: Distribution) -> Self {
        match d {
            Distribution::Homogeneous { mean } => WorkloadKind::Homogeneous { mean },
            Distribution::Gaussian { mean, std_dev } => WorkloadKind::Gaussian { mean, std_dev },
            Distribution::Lognormal { mean, std_dev } => WorkloadKind::Lognormal { mean, std_dev },
            Distribution::PowerLaw { exponent, scale } => WorkloadKind::PowerLaw { exponent, scale },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalitySpec {
    pub c: f64,
    pub lambda: f64,
}

/// `{kind, params, N, P, h, L, locality: {c, lambda}, seed}`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    #[serde(flatten)]
    pub distribution: Distribution,
    #[serde(rename = "N")]
    pub tasks: usize,
    #[serde(rename = "P")]
    pub workers: usize,
    /// Per-dequeue overhead in seconds.
    pub h: f64,
    #[serde(rename = "L", default = "one")]
    pub executions: usize,
    #[serde(default)]
    pub locality: Option<LocalitySpec>,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}

impl WorkloadSpec {
    pub fn build(&self) -> Result<SyntheticWorkload, SimError> {
        let durations = WorkloadKind::from(self.distribution).generate(self.tasks, self.seed)?;
        let locality = match self.locality {
            Some(l) => Locality::new(l.c, l.lambda)?,
            None => Locality::NONE,
        };
        SyntheticWorkload::new(durations, self.workers, self.h, locality, self.executions)
    }
}

pub fn load_workload_spec(path: &Path) -> Result<WorkloadSpec, DatasetError> {
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut de = serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| DatasetError::Schema {
        path: path.to_path_buf(),
        field: e.path().to_string(),
        reason: e.into_inner().to_string(),
    })
}
