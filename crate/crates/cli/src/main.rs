use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use fedspectral::experiment::{
    self, partition_dump, resolve_dataset, similarity_from_files, sweep, verify_dataset,
    write_rows_to, ExperimentConfig, SweepAxis,
};
use fedspectral::{parse_edge_list, PartitionPlan};

#[derive(Parser)]
#[command(
    name = "fedspectral",
    version,
    about = "Federated spectral graph clustering experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the trials of one configuration and print one record per trial.
    Run(ConfigArgs),
    /// Run a configuration once per value of one parameter.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// iters, global_rounds, num_clusters, overlap, num_clients or algo.
        #[arg(long)]
        axis: String,
        /// Comma-separated values for the axis.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        /// Where to write the per-value summary (default: next to --output, or stderr).
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Score an aggregated labeling CSV against a global one.
    Metric {
        global: PathBuf,
        aggregated: PathBuf,
    },
    /// Check a dataset's node and edge counts.
    Verify {
        path: PathBuf,
        #[arg(long)]
        nodes: usize,
        /// Expected edges; arcs when --directed is given.
        #[arg(long)]
        edges: usize,
        #[arg(long)]
        directed: bool,
    },
    /// Write each client's shard as an edge list.
    PartitionDump {
        dataset: PathBuf,
        #[arg(long, default_value_t = 5)]
        clients: usize,
        #[arg(long, default_value_t = 0.4)]
        overlap: f64,
        #[arg(long)]
        replication: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        directed: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Flags mirror the config-file keys and take precedence over them.
#[derive(Args)]
struct ConfigArgs {
    /// Key = value config file applied before the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    directed: Option<bool>,
    /// global, fedspectral or fedspectral_plus.
    #[arg(long)]
    algo: Option<String>,
    #[arg(long)]
    num_clients: Option<usize>,
    #[arg(long)]
    num_clusters: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    global_rounds: Option<usize>,
    #[arg(long)]
    overlap: Option<f64>,
    #[arg(long)]
    replication: Option<usize>,
    #[arg(long)]
    master_seed: Option<u64>,
    #[arg(long)]
    num_trials: Option<usize>,
    #[arg(long)]
    reference_seed: Option<u64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    damping: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    normalize_rows: Option<bool>,
    /// serial or concurrent.
    #[arg(long)]
    schedule: Option<String>,
    /// Records file (default: stdout).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Emit JSON lines instead of CSV.
    #[arg(long)]
    json: bool,
    /// Write reference and per-trial labels as node_id,label CSVs here.
    #[arg(long)]
    labels_dir: Option<PathBuf>,
    /// Write each FedSpectral client's local labels here.
    #[arg(long)]
    client_labels_dir: Option<PathBuf>,
}

impl ConfigArgs {
    fn build(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)
                .with_context(|| format!("reading config {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let overrides = [
            ("dataset", path(&self.dataset)),
            ("directed", self.directed.map(|v| v.to_string())),
            ("algo", self.algo.clone()),
            ("num_clients", self.num_clients.map(|v| v.to_string())),
            ("num_clusters", self.num_clusters.map(|v| v.to_string())),
            ("iters", self.iters.map(|v| v.to_string())),
            ("global_rounds", self.global_rounds.map(|v| v.to_string())),
            ("overlap", self.overlap.map(|v| v.to_string())),
            ("replication", self.replication.map(|v| v.to_string())),
            ("master_seed", self.master_seed.map(|v| v.to_string())),
            ("num_trials", self.num_trials.map(|v| v.to_string())),
            ("reference_seed", self.reference_seed.map(|v| v.to_string())),
            ("damping", self.damping.map(|v| v.to_string())),
            ("normalize_rows", self.normalize_rows.map(|v| v.to_string())),
            ("schedule", self.schedule.clone()),
            ("output", path(&self.output)),
            ("json", self.json.then(|| "true".to_string())),
            ("labels_dir", path(&self.labels_dir)),
            ("client_labels_dir", path(&self.client_labels_dir)),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.build()?;
            experiment::run_experiment(&cfg)?;
        }
        Command::Sweep {
            config,
            axis,
            values,
            summary,
        } => {
            let cfg = config.build()?;
            let axis: SweepAxis = axis.parse()?;
            let out = sweep(&cfg, axis, &values)?;
            write_rows_to(cfg.output_path.as_deref(), &out.records, cfg.json)?;
            let summary = summary.or_else(|| {
                cfg.output_path
                    .as_ref()
                    .map(|p| p.with_extension("summary.csv"))
            });
            match summary {
                Some(p) => write_rows_to(Some(&p), &out.summary, false)?,
                None => experiment::write_rows(std::io::stderr().lock(), &out.summary, false)?,
            }
        }
        Command::Metric { global, aggregated } => {
            println!("{}", similarity_from_files(&global, &aggregated)?.value());
        }
        Command::Verify {
            path,
            nodes,
            edges,
            directed,
        } => {
            let report = verify_dataset(&resolve_dataset(&path), directed, nodes, edges)?;
            println!("{report}");
            if !report.passed() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::PartitionDump {
            dataset,
            clients,
            overlap,
            replication,
            seed,
            directed,
            out,
        } => {
            let path = resolve_dataset(&dataset);
            let file = std::fs::File::open(&path)
                .with_context(|| format!("opening {}", path.display()))?;
            let (graph, _) = parse_edge_list(std::io::BufReader::new(file), directed)?;
            let plan = match replication {
                Some(r) => PartitionPlan::with_replication(clients, r, seed)?,
                None => PartitionPlan::from_overlap(clients, overlap, seed)?,
            };
            for p in partition_dump(&graph, &plan, &out)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
