use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::par::Schedule;
use crate::partition::PartitionPlan;
use crate::seed;

/// Environment variable naming the directory that relative dataset paths are
/// resolved against.
pub const DATA_DIR_ENV: &str = "FEDSPECTRAL_DATA_DIR";

/// Root of every dataset's reference seed; see [`ExperimentConfig::reference_seed`].
pub const REFERENCE_SEED_ROOT: u64 = 0x5EED_2022;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Spectral clustering of the whole graph.
    Global,
    /// Label sharing with a server-side similarity graph.
    Fedspectral,
    /// Distributed orthogonal iteration.
    FedspectralPlus,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Global => "global",
            Algorithm::Fedspectral => "fedspectral",
            Algorithm::FedspectralPlus => "fedspectral_plus",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "global" => Ok(Algorithm::Global),
            "fedspectral" | "baseline" => Ok(Algorithm::Fedspectral),
            "fedspectral_plus" | "fedspectral+" | "plus" => Ok(Algorithm::FedspectralPlus),
            other => Err(Error::config(format!(
                "unknown algo {other:?} (expected global, fedspectral or fedspectral_plus)"
            ))),
        }
    }
}

/// Everything needed to reproduce a batch of trials.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset_path: PathBuf,
    /// Read the edge list as arcs and symmetrize.
    pub directed: bool,
    pub algo: Algorithm,
    pub num_clients: usize,
    pub num_clusters: usize,
    /// Power iterations per client per round.
    pub iters: usize,
    pub global_rounds: usize,
    pub overlap: f64,
    /// Overrides the replication count derived from `overlap`.
    pub replication: Option<usize>,
    pub master_seed: u64,
    pub num_trials: usize,
    pub output_path: Option<PathBuf>,
    /// Emit JSON lines instead of CSV.
    pub json: bool,
    /// Overrides the dataset-keyed reference seed.
    pub reference_seed: Option<u64>,
    pub damping: bool,
    pub normalize_rows: bool,
    pub schedule: Schedule,
    /// Directory for `(node_id, label)` CSVs of the reference and each trial.
    pub labels_dir: Option<PathBuf>,
    /// Directory for each FedSpectral client's local labeling.
    pub client_labels_dir: Option<PathBuf>,
    explicit: BTreeSet<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset_path: PathBuf::new(),
            directed: false,
            algo: Algorithm::FedspectralPlus,
            num_clients: 5,
            num_clusters: 10,
            iters: 1,
            global_rounds: 1,
            overlap: 0.4,
            replication: None,
            master_seed: 0,
            num_trials: 5,
            output_path: None,
            json: false,
            reference_seed: None,
            damping: false,
            normalize_rows: false,
            schedule: Schedule::default(),
            labels_dir: None,
            client_labels_dir: None,
            explicit: BTreeSet::new(),
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| Error::config(format!("{key} = {value:?}: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::config(format!(
            "{key} = {value:?}: expected a boolean"
        ))),
    }
}

fn optional_path(value: &str) -> Option<PathBuf> {
    let v = value.trim();
    (!v.is_empty()).then(|| PathBuf::from(v))
}

impl ExperimentConfig {
    pub const KEYS: &'static [&'static str] = &[
        "dataset",
        "directed",
        "algo",
        "num_clients",
        "num_clusters",
        "iters",
        "global_rounds",
        "overlap",
        "replication",
        "master_seed",
        "num_trials",
        "output",
        "json",
        "reference_seed",
        "damping",
        "normalize_rows",
        "schedule",
        "labels_dir",
        "client_labels_dir",
    ];

    /// Assigns one field from its textual form. Keys match the config file.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        match key {
            "dataset" | "dataset_path" => self.dataset_path = PathBuf::from(value.trim()),
            "directed" => self.directed = parse_bool(key, value)?,
            "algo" => self.algo = value.parse()?,
            "num_clients" => self.num_clients = parse_value(key, value)?,
            "num_clusters" => self.num_clusters = parse_value(key, value)?,
            "iters" => self.iters = parse_value(key, value)?,
            "global_rounds" => self.global_rounds = parse_value(key, value)?,
            "overlap" => self.overlap = parse_value(key, value)?,
            "replication" => self.replication = Some(parse_value(key, value)?),
            "master_seed" | "seed" => self.master_seed = parse_value(key, value)?,
            "num_trials" | "trials" => self.num_trials = parse_value(key, value)?,
            "output" | "output_path" => self.output_path = optional_path(value),
            "json" => self.json = parse_bool(key, value)?,
            "reference_seed" => self.reference_seed = Some(parse_value(key, value)?),
            "damping" => self.damping = parse_bool(key, value)?,
            "normalize_rows" => self.normalize_rows = parse_bool(key, value)?,
            "schedule" => {
                self.schedule = match value.trim() {
                    "serial" => Schedule::Serial,
                    "concurrent" => Schedule::Concurrent,
                    other => {
                        return Err(Error::config(format!(
                            "schedule = {other:?}: expected serial or concurrent"
                        )))
                    }
                }
            }
            "labels_dir" => self.labels_dir = optional_path(value),
            "client_labels_dir" => self.client_labels_dir = optional_path(value),
            _ => return Err(Error::config(format!("unknown key {key:?}"))),
        }
        self.explicit.insert(canonical_key(key).to_string());
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("config line {}: expected key = value", i + 1))
            })?;
            self.set(key, value)
                .map_err(|e| Error::config(format!("config line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    /// Checks counts and ranges.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("num_clients", self.num_clients),
            ("num_clusters", self.num_clusters),
            ("iters", self.iters),
            ("global_rounds", self.global_rounds),
            ("num_trials", self.num_trials),
        ] {
            if v == 0 {
                return Err(Error::config(format!("{name} must be at least 1")));
            }
        }
        if !(self.overlap > 0.0 && self.overlap <= 1.0) {
            return Err(Error::config(format!(
                "overlap must lie in (0, 1], got {}",
                self.overlap
            )));
        }
        if let Some(r) = self.replication {
            if r == 0 || r > self.num_clients {
                return Err(Error::config(format!(
                    "replication must lie in 1..={}, got {r}",
                    self.num_clients
                )));
            }
        }
        if self.dataset_path.as_os_str().is_empty() {
            return Err(Error::config("dataset path is not set"));
        }
        Ok(())
    }

    /// Explicitly set fields that the chosen algorithm does not read.
    pub fn ignored_fields(&self) -> Vec<&str> {
        let unused: &[&str] = match self.algo {
            Algorithm::Global => &[
                "num_clients",
                "iters",
                "global_rounds",
                "overlap",
                "replication",
                "num_trials",
                "damping",
                "client_labels_dir",
            ],
            Algorithm::Fedspectral => &["iters", "global_rounds", "damping"],
            Algorithm::FedspectralPlus => &["client_labels_dir"],
        };
        unused
            .iter()
            .copied()
            .filter(|k| self.explicit.contains(*k))
            .collect()
    }

    /// Validates and logs a warning for every ignored field.
    pub fn check(&self) -> Result<()> {
        self.validate()?;
        for field in self.ignored_fields() {
            log::warn!("{field} is ignored by algo {}", self.algo);
        }
        Ok(())
    }

    /// The dataset path, resolved against [`DATA_DIR_ENV`] when it is relative
    /// and not found from the working directory.
    pub fn resolved_dataset(&self) -> PathBuf {
        resolve_dataset(&self.dataset_path)
    }

    /// File stem of the dataset; keys the reference seed.
    pub fn dataset_name(&self) -> String {
        self.dataset_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    }

    /// `derive_seed(REFERENCE_SEED_ROOT, tag::REFERENCE, fnv1a(dataset file stem))`
    /// unless overridden.
    pub fn reference_seed(&self) -> u64 {
        self.reference_seed
            .unwrap_or_else(|| dataset_reference_seed(&self.dataset_name()))
    }

    pub fn partition_plan(&self, seed: u64) -> Result<PartitionPlan> {
        match self.replication {
            Some(r) => PartitionPlan::with_replication(self.num_clients, r, seed),
            None => PartitionPlan::from_overlap(self.num_clients, self.overlap, seed),
        }
    }
}

fn canonical_key(key: &str) -> &str {
    match key {
        "dataset_path" => "dataset",
        "seed" => "master_seed",
        "trials" => "num_trials",
        "output_path" => "output",
        k => k,
    }
}

/// Reference seed for a dataset identified by its file stem.
pub fn dataset_reference_seed(name: &str) -> u64 {
    seed::derive_seed(
        REFERENCE_SEED_ROOT,
        seed::tag::REFERENCE,
        seed::fnv1a(name.as_bytes()),
    )
}

/// Resolves a relative path that does not exist against [`DATA_DIR_ENV`].
pub fn resolve_dataset(path: &Path) -> PathBuf {
    if path.is_relative() && !path.exists() {
        if let Some(dir) = std::env::var_os(DATA_DIR_ENV) {
            return Path::new(&dir).join(path);
        }
    }
    path.to_path_buf()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_key_value_text() {
        let cfg = ExperimentConfig::from_text(
            "# comment\n dataset = data/email-Eu-core.txt\ndirected=true\nalgo = fedspectral\n\
             num_clients=3\noverlap = 0.6\nmaster_seed = 42\nschedule = serial\n",
        )
        .unwrap();
        assert_eq!(cfg.dataset_path, PathBuf::from("data/email-Eu-core.txt"));
        assert!(cfg.directed);
        assert_eq!(cfg.algo, Algorithm::Fedspectral);
        assert_eq!(cfg.num_clients, 3);
        assert_eq!(cfg.overlap, 0.6);
        assert_eq!(cfg.master_seed, 42);
        assert_eq!(cfg.schedule, Schedule::Serial);
        assert_eq!(cfg.num_clusters, 10);
        assert_eq!(cfg.dataset_name(), "email-Eu-core");
    }

    #[test]
    fn later_assignments_win() {
        let mut cfg = ExperimentConfig::from_text("iters = 3\n").unwrap();
        cfg.set("iters", "7").unwrap();
        assert_eq!(cfg.iters, 7);
    }

    #[test]
    fn bad_lines_report_line_number() {
        let err = ExperimentConfig::from_text("iters = 1\nbogus\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(ExperimentConfig::from_text("colour = red").is_err());
        assert!(ExperimentConfig::from_text("iters = many").is_err());
    }

    #[test]
    fn validation() {
        let mut cfg = ExperimentConfig::from_text("dataset = x.txt").unwrap();
        cfg.validate().unwrap();
        cfg.overlap = 0.0;
        assert!(cfg.validate().is_err());
        cfg.overlap = 1.0;
        cfg.num_trials = 0;
        assert!(cfg.validate().is_err());
        cfg.num_trials = 1;
        cfg.replication = Some(6);
        assert!(cfg.validate().is_err());
        assert!(ExperimentConfig::default().validate().is_err());
    }

    #[test]
    fn ignored_fields_follow_algo() {
        let cfg =
            ExperimentConfig::from_text("algo = global\niters = 4\nnum_clusters = 3").unwrap();
        assert_eq!(cfg.ignored_fields(), vec!["iters"]);
        let cfg = ExperimentConfig::from_text("algo = fedspectral_plus\niters = 4").unwrap();
        assert!(cfg.ignored_fields().is_empty());
    }

    #[test]
    fn reference_seed_is_keyed_by_stem() {
        let a = ExperimentConfig::from_text("dataset = a/facebook_combined.txt").unwrap();
        let b = ExperimentConfig::from_text("dataset = /b/facebook_combined.txt").unwrap();
        let c = ExperimentConfig::from_text("dataset = email-Eu-core.txt").unwrap();
        assert_eq!(a.reference_seed(), b.reference_seed());
        assert_ne!(a.reference_seed(), c.reference_seed());
        let d =
            ExperimentConfig::from_text("dataset = email-Eu-core.txt\nreference_seed = 9").unwrap();
        assert_eq!(d.reference_seed(), 9);
    }

    #[test]
    fn algo_names_round_trip() {
        for a in [
            Algorithm::Global,
            Algorithm::Fedspectral,
            Algorithm::FedspectralPlus,
        ] {
            assert_eq!(a.as_str().parse::<Algorithm>().unwrap(), a);
        }
    }
}
