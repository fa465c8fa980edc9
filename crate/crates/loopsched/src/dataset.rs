//! Per-loop measurement datasets and parameter hand-off files.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use loopsched_core::bo::{reparam, BoConfig, Observation, SurrogateMode};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::canonical::to_canonical_string;

pub const FORMAT_VERSION: u64 = 1;

/// Tolerance for the `theta`/`x` and `total_s`/`tau_s` consistency checks,
/// relative to the larger magnitude (absolute below 1).
pub const CONSISTENCY_TOL: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: invalid field `{field}`: {reason}")]
    Schema { path: PathBuf, field: String, reason: String },
    #[error("{path}: unsupported dataset version {found} (expected {FORMAT_VERSION})")]
    UnsupportedVersion { path: PathBuf, found: String },
    #[error("{path} is locked by another tuner (remove {} if stale)", lock.display())]
    Locked { path: PathBuf, lock: PathBuf },
}

impl DatasetError {
    fn io(path: &Path, source: io::Error) -> Self {
        DatasetError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn schema(path: &Path, field: impl Into<String>, reason: impl Into<String>) -> Self {
        DatasetError::Schema {
            path: path.to_path_buf(),
            field: field.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateName {
    Plain,
    LocalityAware,
}

impl From<SurrogateMode> for SurrogateName {
    fn from(m: SurrogateMode) -> Self {
        match m {
            SurrogateMode::Plain => SurrogateName::Plain,
            SurrogateMode::LocalityAware => SurrogateName::LocalityAware,
        }
    }
}

impl From<SurrogateName> for SurrogateMode {
    fn from(m: SurrogateName) -> Self {
        match m {
            SurrogateName::Plain => SurrogateMode::Plain,
            SurrogateName::LocalityAware => SurrogateMode::LocalityAware,
        }
    }
}

/// The tuner settings stored alongside the measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigSnapshot {
    pub n_init: usize,
    pub n_iters: usize,
    pub surrogate: SurrogateName,
    pub subsample_k: Option<usize>,
    pub mes_samples: usize,
    pub hp_samples: usize,
    pub seed: u64,
}

impl Default for ConfigSnapshot {
    fn default() -> Self {
        Self::from(&BoConfig::default())
    }
}

impl From<&BoConfig> for ConfigSnapshot {
    fn from(c: &BoConfig) -> Self {
        Self {
            n_init: c.n_init,
            n_iters: c.n_iters,
            surrogate: c.surrogate.into(),
            subsample_k: c.subsample_k,
            mes_samples: c.mes_samples,
            hp_samples: c.hp_samples,
            seed: c.seed,
        }
    }
}

impl ConfigSnapshot {
    pub fn to_config(&self) -> BoConfig {
        BoConfig {
            n_init: self.n_init,
            n_iters: self.n_iters,
            surrogate: self.surrogate.into(),
            subsample_k: self.subsample_k,
            mes_samples: self.mes_samples,
            hp_samples: self.hp_samples,
            seed: self.seed,
            ..BoConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Measurement {
    pub ell: u64,
    pub tau_s: f64,
}

/// One program run at a fixed parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Iteration {
    pub run_uuid: String,
    pub x: f64,
    pub theta: f64,
    pub measurements: Vec<Measurement>,
    pub total_s: f64,
}

impl Iteration {
    /// Builds an iteration whose `theta` and `total_s` are derived from `x`
    /// and the measurements.
    pub fn new(run_uuid: String, x: f64, taus: &[f64]) -> Result<Self, loopsched_core::bo::BoError> {
        let theta = reparam(x)?;
        Ok(Self {
            run_uuid,
            x,
            theta,
            measurements: taus
                .iter()
                .enumerate()
                .map(|(i, &tau_s)| Measurement {
                    ell: i as u64 + 1,
                    tau_s,
                })
                .collect(),
            total_s: taus.iter().sum(),
        })
    }

    pub fn observation(&self) -> Result<Observation, loopsched_core::bo::BoError> {
        Observation::new(self.x, self.measurements.iter().map(|m| m.tau_s).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopDatasetFile {
    pub version: u64,
    pub loop_id: String,
    #[serde(rename = "N")]
    pub n: Option<u64>,
    pub config: ConfigSnapshot,
    pub iterations: Vec<Iteration>,
}

impl LoopDatasetFile {
    pub fn new(loop_id: impl Into<String>, n: Option<u64>, config: ConfigSnapshot) -> Self {
        Self {
            version: FORMAT_VERSION,
            loop_id: loop_id.into(),
            n,
            config,
            iterations: Vec::new(),
        }
    }

    pub fn observations(&self) -> Result<Vec<Observation>, loopsched_core::bo::BoError> {
        self.iterations.iter().map(Iteration::observation).collect()
    }

    /// Index of the iteration with the lowest total.
    pub fn incumbent(&self) -> Option<usize> {
        (0..self.iterations.len()).min_by(|&a, &b| self.iterations[a].total_s.total_cmp(&self.iterations[b].total_s))
    }

    /// Checks the invariants serde cannot express.
    pub fn validate(&self, path: &Path) -> Result<(), DatasetError> {
        if self.version != FORMAT_VERSION {
            return Err(DatasetError::UnsupportedVersion {
                path: path.to_path_buf(),
                found: self.version.to_string(),
            });
        }
        if self.loop_id.is_empty() {
            return Err(DatasetError::schema(path, "loop_id", "must be non-empty"));
        }
        if self.config.to_config().validate().is_err() {
            return Err(DatasetError::schema(path, "config", "invalid tuner configuration"));
        }
        for (i, it) in self.iterations.iter().enumerate() {
            validate_iteration(it).map_err(|(field, reason)| DatasetError::schema(path, format!("iterations[{i}].{field}"), reason))?;
        }
        Ok(())
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= CONSISTENCY_TOL * a.abs().max(b.abs()).max(1.0)
}

fn validate_iteration(it: &Iteration) -> Result<(), (String, String)> {
    let bad = |f: &str, r: &str| Err((f.to_string(), r.to_string()));
    if it.run_uuid.is_empty() {
        return bad("run_uuid", "must be non-empty");
    }
    if !(it.x > 0.0 && it.x < 1.0) {
        return bad("x", "must lie in (0, 1)");
    }
    match reparam(it.x) {
        Ok(t) if close(t, it.theta) => {}
        _ => return bad("theta", "does not equal 2^(19x - 10)"),
    }
    if it.measurements.is_empty() {
        return bad("measurements", "must be non-empty");
    }
    for (j, m) in it.measurements.iter().enumerate() {
        if m.ell != j as u64 + 1 {
            return Err((format!("measurements[{j}].ell"), format!("expected {}", j + 1)));
        }
        if !(m.tau_s.is_finite() && m.tau_s > 0.0) {
            return Err((format!("measurements[{j}].tau_s"), "must be positive and finite".into()));
        }
    }
    let sum: f64 = it.measurements.iter().map(|m| m.tau_s).sum();
    if !close(sum, it.total_s) {
        return bad("total_s", "does not equal the sum of tau_s");
    }
    Ok(())
}

fn parse_json(path: &Path, text: &str) -> Result<Value, DatasetError> {
    serde_json::from_str(text).map_err(|e| DatasetError::schema(path, "$", e.to_string()))
}

fn from_value<T: serde::de::DeserializeOwned>(path: &Path, v: Value) -> Result<T, DatasetError> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let field = e.path().to_string();
        DatasetError::schema(path, field, e.into_inner().to_string())
    })
}

pub fn parse_dataset(path: &Path, text: &str) -> Result<LoopDatasetFile, DatasetError> {
    let v = parse_json(path, text)?;
    match v.get("version") {
        None => return Err(DatasetError::schema(path, "version", "missing")),
        Some(Value::Number(n)) if n.as_u64() == Some(FORMAT_VERSION) => {}
        Some(Value::Number(n)) => {
            return Err(DatasetError::UnsupportedVersion {
                path: path.to_path_buf(),
                found: n.to_string(),
            })
        }
        Some(_) => return Err(DatasetError::schema(path, "version", "must be an integer")),
    }
    let file: LoopDatasetFile = from_value(path, v)?;
    file.validate(path)?;
    Ok(file)
}

pub fn load_dataset(path: &Path) -> Result<LoopDatasetFile, DatasetError> {
    let text = fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    parse_dataset(path, &text)
}

pub fn dataset_to_string(file: &LoopDatasetFile) -> String {
    to_canonical_string(file).expect("dataset serializes to JSON")
}

/// Validates, then atomically replaces `path`.
pub fn save_dataset(path: &Path, file: &LoopDatasetFile) -> Result<(), DatasetError> {
    file.validate(path)?;
    atomic_write(path, dataset_to_string(file).as_bytes())
}

/// The tuner's proposal for the next run of one loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NextParamFile {
    pub loop_id: String,
    pub x_next: f64,
    pub theta_next: f64,
    pub produced_by: String,
    pub source_iteration_count: usize,
}

pub fn load_next_param(path: &Path) -> Result<NextParamFile, DatasetError> {
    let text = fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    let next: NextParamFile = from_value(path, parse_json(path, &text)?)?;
    match reparam(next.x_next) {
        Ok(t) if close(t, next.theta_next) => Ok(next),
        Ok(_) => Err(DatasetError::schema(path, "theta_next", "does not equal 2^(19x - 10)")),
        Err(_) => Err(DatasetError::schema(path, "x_next", "must lie in (0, 1)")),
    }
}

pub fn save_next_param(path: &Path, next: &NextParamFile) -> Result<(), DatasetError> {
    let text = to_canonical_string(next).expect("parameter file serializes to JSON");
    atomic_write(path, text.as_bytes())
}

/// File-name form of a loop id: characters outside `[A-Za-z0-9._-]` become `_`.
pub fn file_stem(loop_id: &str) -> String {
    loop_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') { c } else { '_' })
        .collect()
}

pub fn dataset_path(dir: &Path, loop_id: &str) -> PathBuf {
    dir.join(format!("{}.json", file_stem(loop_id)))
}

pub fn next_param_path(dir: &Path, loop_id: &str) -> PathBuf {
    dir.join(format!("{}.next.json", file_stem(loop_id)))
}

pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    atomic_write_with(path, bytes, |f, b| f.write_all(b))
}

/// Writes through `write` into a sibling temporary file, syncs it and renames
/// it over `path`. On any failure the temporary file is removed and `path`
/// is left as it was.
pub fn atomic_write_with<W>(path: &Path, bytes: &[u8], write: W) -> Result<(), DatasetError>
where
    W: FnOnce(&mut File, &[u8]) -> io::Result<()>,
{
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", uuid::Uuid::new_v4().simple()));
    let result = (|| {
        let mut f = OpenOptions::new().write(true).create_new(true).open(&tmp)?;
        write(&mut f, bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(DatasetError::io(path, e));
    }
    Ok(())
}

/// Advisory lock on a dataset, released on drop.
#[derive(Debug)]
pub struct DatasetLock {
    lock: PathBuf,
}

impl DatasetLock {
    pub fn acquire(path: &Path) -> Result<Self, DatasetError> {
        let mut name = path.as_os_str().to_owned();
        name.push(".lock");
        let lock = PathBuf::from(name);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(Self { lock })
            }
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => Err(DatasetError::Locked {
                path: path.to_path_buf(),
                lock,
            }),
            Err(e) => Err(DatasetError::io(&lock, e)),
        }
    }
}

impl Drop for DatasetLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
    }
}
