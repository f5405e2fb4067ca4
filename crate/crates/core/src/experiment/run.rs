use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use super::config::{dataset_reference_seed, Algorithm, ExperimentConfig};
use super::io::{write_labels_file, write_rows_to};
use crate::baseline::{run_fedspectral, BaselineConfig};
use crate::error::{Error, Result};
use crate::graph::{parse_edge_list, Graph, ParseReport};
use crate::linalg::{global_spectral_clustering_with, Labeling, SpectralOptions};
use crate::metrics::cluster_similarity;
use crate::par;
use crate::partition::distribute_with_plan;
use crate::plus::{run_fedspectral_plus, FedPlusConfig};
use crate::seed;

/// A parsed graph plus the name that keys its reference seed.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub graph: Graph,
    pub report: ParseReport,
}

impl Dataset {
    pub fn load(path: &Path, directed: bool) -> Result<Self> {
        let file = File::open(path).map_err(|e| {
            Error::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", path.display()),
            ))
        })?;
        let (graph, report) = parse_edge_list(BufReader::new(file), directed)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(Dataset {
            name,
            graph,
            report,
        })
    }

    /// Wraps an in-memory graph.
    pub fn from_graph(name: impl Into<String>, graph: Graph) -> Self {
        let report = ParseReport {
            num_nodes: graph.num_nodes(),
            num_edges: graph.num_edges(),
            raw_pairs: graph.num_edges(),
            ..ParseReport::default()
        };
        Dataset {
            name: name.into(),
            graph,
            report,
        }
    }
}

/// The fixed global clustering that trials are scored against.
#[derive(Debug, Clone)]
pub struct Reference {
    pub seed: u64,
    pub num_clusters: usize,
    pub labels: Labeling,
}

impl Reference {
    pub fn compute(
        graph: &Graph,
        num_clusters: usize,
        seed: u64,
        normalize_rows: bool,
    ) -> Result<Self> {
        let opts = SpectralOptions {
            normalize_rows,
            ..SpectralOptions::default()
        };
        let labels = global_spectral_clustering_with(graph, num_clusters, seed, &opts)?.labels;
        Ok(Reference {
            seed,
            num_clusters,
            labels,
        })
    }

    /// Reference for `dataset` under `cfg`, honouring an explicit seed override.
    pub fn for_config(dataset: &Dataset, cfg: &ExperimentConfig) -> Result<Self> {
        let seed = cfg
            .reference_seed
            .unwrap_or_else(|| dataset_reference_seed(&dataset.name));
        Self::compute(&dataset.graph, cfg.num_clusters, seed, cfg.normalize_rows)
    }
}

/// One output row. `wallclock_ms` is the only field that varies between
/// identical runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRecord {
    pub dataset: String,
    pub algo: Algorithm,
    pub directed: bool,
    pub num_clients: usize,
    pub num_clusters: usize,
    pub iters: usize,
    pub global_rounds: usize,
    pub overlap: f64,
    pub replication: usize,
    pub damping: bool,
    pub master_seed: u64,
    pub num_trials: usize,
    pub trial: usize,
    pub trial_seed: u64,
    pub reference_seed: u64,
    /// Swept parameter; empty outside sweeps.
    pub axis: String,
    pub axis_value: String,
    pub similarity: f64,
    /// Shards with no edges or no spectral gap at the cluster boundary.
    pub degenerate_shards: usize,
    /// Subspace drift after the last round (FedSpectral+ only).
    pub final_drift: Option<f64>,
    /// Per-round drift joined with `;`.
    pub round_drift: String,
    pub wallclock_ms: f64,
}

/// A trial's record plus the labelings behind it.
#[derive(Debug, Clone)]
pub struct TrialOutput {
    pub record: ResultRecord,
    pub labels: Labeling,
    /// Local labelings of FedSpectral clients.
    pub client_labels: Vec<Labeling>,
}

/// Runs one trial. Every random choice descends from `trial_seed`: the
/// partition stream uses it directly and the algorithm uses a derived seed.
pub fn run_trial(
    dataset: &Dataset,
    reference: &Reference,
    cfg: &ExperimentConfig,
    trial: usize,
    trial_seed: u64,
) -> Result<TrialOutput> {
    if reference.num_clusters != cfg.num_clusters {
        return Err(Error::contract(format!(
            "reference has {} clusters, config asks for {}",
            reference.num_clusters, cfg.num_clusters
        )));
    }
    let graph = &dataset.graph;
    let plan = cfg.partition_plan(trial_seed)?;
    let algo_seed = seed::derive_seed(trial_seed, seed::tag::ALGORITHM, 0);
    let start = Instant::now();

    let mut degenerate_shards = 0;
    let mut drift = Vec::new();
    let mut client_labels = Vec::new();
    let labels = match cfg.algo {
        Algorithm::Global => reference.labels.clone(),
        Algorithm::Fedspectral => {
            let shards = distribute_with_plan(graph, &plan)?;
            let bc = BaselineConfig {
                num_clusters: cfg.num_clusters,
                seed: algo_seed,
                spectral: SpectralOptions {
                    normalize_rows: cfg.normalize_rows,
                    ..SpectralOptions::default()
                },
                schedule: cfg.schedule,
            };
            let out = run_fedspectral(&shards, &bc)?;
            degenerate_shards = out.clients.iter().filter(|c| c.is_degenerate()).count();
            client_labels = out.clients.into_iter().map(|c| c.labels).collect();
            out.labels
        }
        Algorithm::FedspectralPlus => {
            let shards = distribute_with_plan(graph, &plan)?;
            degenerate_shards = shards.iter().filter(|s| s.edges().is_empty()).count();
            let pc = FedPlusConfig {
                damping: cfg.damping,
                normalize_rows: cfg.normalize_rows,
                schedule: cfg.schedule,
                ..FedPlusConfig::new(cfg.num_clusters, cfg.iters, cfg.global_rounds, algo_seed)
            };
            let out = run_fedspectral_plus(&shards, &pc)?;
            drift = out.rounds.iter().map(|r| r.drift).collect();
            out.labels
        }
    };
    let wallclock_ms = start.elapsed().as_secs_f64() * 1e3;
    let similarity = cluster_similarity(&reference.labels, &labels)?.value();
    if degenerate_shards > 0 {
        log::warn!("trial {trial}: {degenerate_shards} degenerate shard(s)");
    }

    let record = ResultRecord {
        dataset: dataset.name.clone(),
        algo: cfg.algo,
        directed: cfg.directed,
        num_clients: cfg.num_clients,
        num_clusters: cfg.num_clusters,
        iters: cfg.iters,
        global_rounds: cfg.global_rounds,
        overlap: cfg.overlap,
        replication: plan.replication,
        damping: cfg.damping,
        master_seed: cfg.master_seed,
        num_trials: cfg.num_trials,
        trial,
        trial_seed,
        reference_seed: reference.seed,
        axis: String::new(),
        axis_value: String::new(),
        similarity,
        degenerate_shards,
        final_drift: drift.last().copied(),
        round_drift: drift
            .iter()
            .map(|d| format!("{d:e}"))
            .collect::<Vec<_>>()
            .join(";"),
        wallclock_ms: (wallclock_ms * 1e3).round() / 1e3,
    };
    Ok(TrialOutput {
        record,
        labels,
        client_labels,
    })
}

/// All trials of one configuration, in trial order.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub reference: Reference,
    pub trials: Vec<TrialOutput>,
}

impl Experiment {
    pub fn records(&self) -> Vec<ResultRecord> {
        self.trials.iter().map(|t| t.record.clone()).collect()
    }

    pub fn similarities(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.record.similarity).collect()
    }

    pub fn median_similarity(&self) -> f64 {
        median(&self.similarities())
    }

    /// Writes label CSVs into the directories named by `cfg`, if any.
    pub fn write_labels(&self, dataset: &Dataset, cfg: &ExperimentConfig) -> Result<()> {
        if let Some(dir) = &cfg.labels_dir {
            std::fs::create_dir_all(dir)?;
            write_labels_file(
                &dir.join("reference.csv"),
                &dataset.graph,
                &self.reference.labels,
            )?;
            for t in &self.trials {
                let name = format!("{}_trial_{}.csv", t.record.algo, t.record.trial);
                write_labels_file(&dir.join(name), &dataset.graph, &t.labels)?;
            }
        }
        if let Some(dir) = &cfg.client_labels_dir {
            std::fs::create_dir_all(dir)?;
            for t in &self.trials {
                for (c, labels) in t.client_labels.iter().enumerate() {
                    let name = format!("trial_{}_client_{c}.csv", t.record.trial);
                    write_labels_file(&dir.join(name), &dataset.graph, labels)?;
                }
            }
        }
        Ok(())
    }
}

/// Runs every trial of `cfg` on an already loaded dataset.
pub fn run_experiment_on(
    dataset: &Dataset,
    reference: &Reference,
    cfg: &ExperimentConfig,
) -> Result<Experiment> {
    cfg.validate()?;
    let trials = if cfg.algo == Algorithm::Global {
        1
    } else {
        cfg.num_trials
    };
    let outputs = par::map_range(cfg.schedule, trials, |t| {
        run_trial(
            dataset,
            reference,
            cfg,
            t,
            seed::trial_seed(cfg.master_seed, t),
        )
    });
    Ok(Experiment {
        reference: reference.clone(),
        trials: outputs.into_iter().collect::<Result<_>>()?,
    })
}

/// Loads the dataset, computes the reference and runs every trial. Label
/// CSVs are written if `cfg` names directories for them.
pub fn run_experiment_detailed(cfg: &ExperimentConfig) -> Result<(Dataset, Experiment)> {
    cfg.check()?;
    let dataset = Dataset::load(&cfg.resolved_dataset(), cfg.directed)?;
    let reference = Reference::for_config(&dataset, cfg)?;
    let exp = run_experiment_on(&dataset, &reference, cfg)?;
    exp.write_labels(&dataset, cfg)?;
    Ok((dataset, exp))
}

/// Runs `cfg` and writes its records to `cfg.output_path` (stdout if unset).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    let (_, exp) = run_experiment_detailed(cfg)?;
    let records = exp.records();
    write_rows_to(cfg.output_path.as_deref(), &records, cfg.json)?;
    Ok(records)
}

/// Median of `values`; the mean of the middle pair for even lengths.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}
