use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::config::ExperimentConfig;
use super::run::{median, run_experiment_on, Dataset, ResultRecord};
use crate::error::{Error, Result};

/// Parameters a sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Iters,
    GlobalRounds,
    NumClusters,
    Overlap,
    NumClients,
    Algo,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::Iters => "iters",
            SweepAxis::GlobalRounds => "global_rounds",
            SweepAxis::NumClusters => "num_clusters",
            SweepAxis::Overlap => "overlap",
            SweepAxis::NumClients => "num_clients",
            SweepAxis::Algo => "algo",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "iters" => SweepAxis::Iters,
            "global_rounds" => SweepAxis::GlobalRounds,
            "num_clusters" => SweepAxis::NumClusters,
            "overlap" => SweepAxis::Overlap,
            "num_clients" => SweepAxis::NumClients,
            "algo" => SweepAxis::Algo,
            other => {
                return Err(Error::config(format!(
                    "unknown sweep axis {other:?} (expected iters, global_rounds, num_clusters, \
                     overlap, num_clients or algo)"
                )))
            }
        })
    }
}

/// Median and spread of one swept value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub axis: String,
    pub axis_value: String,
    pub algo: String,
    pub trials: usize,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    /// Long format: one row per (value, trial).
    pub records: Vec<ResultRecord>,
    /// One row per value, in the order given.
    pub summary: Vec<SummaryRow>,
}

impl SweepOutcome {
    pub fn medians(&self) -> Vec<f64> {
        self.summary.iter().map(|s| s.median).collect()
    }
}

/// Runs `base` once per value of `axis` on an already loaded dataset. The
/// reference labeling is recomputed whenever the cluster count changes.
pub fn sweep_on(
    dataset: &Dataset,
    base: &ExperimentConfig,
    axis: SweepAxis,
    values: &[String],
) -> Result<SweepOutcome> {
    if values.is_empty() {
        return Err(Error::config("sweep needs at least one value"));
    }
    let mut references = BTreeMap::new();
    let mut records = Vec::new();
    let mut summary = Vec::new();
    for value in values {
        let mut cfg = base.clone();
        cfg.set(axis.as_str(), value)?;
        cfg.check()?;
        let reference = match references.entry(cfg.num_clusters) {
            std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(super::run::Reference::for_config(dataset, &cfg)?)
            }
        };
        let exp = run_experiment_on(dataset, reference, &cfg)?;
        let sims = exp.similarities();
        summary.push(SummaryRow {
            axis: axis.to_string(),
            axis_value: value.trim().to_string(),
            algo: cfg.algo.to_string(),
            trials: sims.len(),
            median: median(&sims),
            min: sims.iter().copied().fold(f64::INFINITY, f64::min),
            max: sims.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean: sims.iter().sum::<f64>() / sims.len() as f64,
        });
        log::info!(
            "{axis}={}: median similarity {:.4}",
            value.trim(),
            median(&sims)
        );
        for mut r in exp.records() {
            r.axis = axis.to_string();
            r.axis_value = value.trim().to_string();
            records.push(r);
        }
    }
    Ok(SweepOutcome { records, summary })
}

/// Loads `base`'s dataset and sweeps `axis` over `values`.
pub fn sweep(base: &ExperimentConfig, axis: SweepAxis, values: &[String]) -> Result<SweepOutcome> {
    base.validate()?;
    let dataset = Dataset::load(&base.resolved_dataset(), base.directed)?;
    sweep_on(&dataset, base, axis, values)
}
