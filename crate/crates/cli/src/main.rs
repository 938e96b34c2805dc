use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ncsm::datasets::{convert_dataset, load_dataset, SourceFormat};
use ncsm::experiment::{run_ablation_grid, run_alpha_sweep, run_experiment, ExperimentConfig, Thresholds};
use ncsm::graph::{load_split_bundle, split_edges, write_split_bundle};
use ncsm::sage::LayerKind;
use ncsm::topo::{topo_score, CentralityKind, SimilarityKind};
use ncsm::train::HeadKind;
use ncsm::Error;

const EXIT_ERROR: u8 = 1;
const EXIT_ABORTED: u8 = 2;
const EXIT_CHECK_FAILED: u8 = 3;

#[derive(Parser)]
#[command(name = "ncsm", version, about = "Topology-parameterised GraphSAGE link prediction")]
struct Cli {
    /// Worker threads for repeats and grid cells (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate over seeded repeats.
    Run {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Exit with status 3 when mean metrics miss their thresholds.
        #[arg(long)]
        check: bool,
        #[arg(long)]
        min_auc: Option<f64>,
        #[arg(long)]
        min_ap: Option<f64>,
        #[arg(long)]
        min_hits: Option<f64>,
    },
    /// Evaluate all nine similarity x centrality combinations.
    Ablation {
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Evaluate a list of alpha values.
    AlphaSweep {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Comma-separated alphas in [0, 1].
        #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1")]
        alphas: Vec<f64>,
    },
    /// Convert a public dataset layout to the canonical directory form.
    Convert {
        /// Source layout: linqs, edgelist or ogb-csv.
        #[arg(long)]
        format: SourceFormat,
        /// Source directory (linqs, ogb-csv) or edge-list file.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also draw and write a split bundle.
        #[arg(long)]
        split: bool,
        #[arg(long, default_value_t = 0.05)]
        val_frac: f64,
        #[arg(long, default_value_t = 0.1)]
        test_frac: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write node and edge topological scores as CSV.
    Score {
        #[arg(long)]
        dataset: PathBuf,
        /// Score the training graph of this split bundle instead of the full graph.
        #[arg(long)]
        splits: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value = "eigenvector")]
        centrality: CentralityKind,
        #[arg(long, default_value = "resource_allocation")]
        similarity: SimilarityKind,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Experiment settings. Unset flags keep the value from `--config`, or the
/// built-in default.
#[derive(Args)]
struct ExperimentArgs {
    /// JSON experiment config, or a report whose `config` field is reused.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset directory (canonical, linqs, ogb-csv) or edge-list file.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Pre-made split bundle directory.
    #[arg(long)]
    splits: Option<PathBuf>,
    #[arg(long)]
    val_frac: Option<f64>,
    #[arg(long)]
    test_frac: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// degree, eigenvector or betweenness.
    #[arg(long)]
    centrality: Option<CentralityKind>,
    /// jaccard, adamic_adar or resource_allocation.
    #[arg(long)]
    similarity: Option<SimilarityKind>,
    /// dot or hadamard_mlp.
    #[arg(long)]
    head: Option<HeadKind>,
    /// ncsm_sage or baseline_sage.
    #[arg(long)]
    layer: Option<LayerKind>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Encoder hidden width.
    #[arg(long)]
    dim: Option<usize>,
    /// Learned input width for graphs without features.
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    mlp_hidden: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Use the base seed for every repeat.
    #[arg(long)]
    same_seed: bool,
    /// Keep one set of training negatives for all epochs.
    #[arg(long)]
    fixed_negatives: bool,
    /// Cut-off of Hits@k.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl ExperimentArgs {
    fn build(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => read_config(p)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($field:expr, $value:expr) => {
                if let Some(v) = $value.clone() {
                    $field = v;
                }
            };
        }
        set!(cfg.dataset, self.dataset);
        if self.splits.is_some() {
            cfg.splits = self.splits.clone();
        }
        set!(cfg.val_frac, self.val_frac);
        set!(cfg.test_frac, self.test_frac);
        set!(cfg.repeats, self.repeats);
        set!(cfg.seed, self.seed);
        set!(cfg.k, self.k);
        let t = &mut cfg.train;
        set!(t.alpha, self.alpha);
        set!(t.centrality_kind, self.centrality);
        set!(t.similarity_kind, self.similarity);
        set!(t.head_kind, self.head);
        set!(t.encoder.layer_kind, self.layer);
        set!(t.epochs, self.epochs);
        set!(t.lr, self.lr);
        set!(t.encoder.hidden_dim, self.dim);
        set!(t.embed_dim, self.embed_dim);
        set!(t.mlp_hidden, self.mlp_hidden);
        set!(t.encoder.num_layers, self.layers);
        if self.same_seed {
            cfg.reseed_repeats = false;
        }
        if self.fixed_negatives {
            t.resample_train_negatives_each_epoch = false;
        }
        if cfg.dataset.as_os_str().is_empty() {
            return Err(Error::Config("--dataset is required".into()));
        }
        Ok(cfg)
    }
}

fn read_config(path: &Path) -> Result<ExperimentConfig, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let inner = value.get("config").cloned().unwrap_or(value);
    Ok(serde_json::from_value(inner)?)
}

fn exit_for(e: &Error) -> u8 {
    match e {
        Error::TrainingAborted { .. } => EXIT_ABORTED,
        _ => EXIT_ERROR,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_ERROR);
        }
    }
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}

fn execute(command: Command) -> Result<u8, Error> {
    match command {
        Command::Run {
            exp,
            check,
            min_auc,
            min_ap,
            min_hits,
        } => {
            let cfg = exp.build()?;
            let report = run_experiment(&cfg)?;
            report.write(&exp.out)?;
            print!("{}", report.to_text());
            if report.aborted() {
                return Ok(EXIT_ABORTED);
            }
            if check {
                let mut t = Thresholds::for_dataset(&cfg.dataset);
                t.auc = min_auc.or(t.auc);
                t.ap = min_ap.or(t.ap);
                t.hits_at_k = min_hits.or(t.hits_at_k);
                if t.is_empty() {
                    return Err(Error::Config(
                        "--check needs --min-auc, --min-ap or --min-hits for this dataset".into(),
                    ));
                }
                let failures = t.failures(&report.aggregate);
                if !failures.is_empty() {
                    for f in &failures {
                        eprintln!("check failed: {f}");
                    }
                    return Ok(EXIT_CHECK_FAILED);
                }
                println!("check passed");
            }
            Ok(0)
        }
        Command::Ablation { exp } => {
            let cfg = exp.build()?;
            let report = run_ablation_grid(&cfg)?;
            report.write(&exp.out)?;
            print!("{}", report.to_text());
            Ok(if report.rows.iter().any(|r| r.partial) { EXIT_ABORTED } else { 0 })
        }
        Command::AlphaSweep { exp, alphas } => {
            let cfg = exp.build()?;
            let report = run_alpha_sweep(&cfg, &alphas)?;
            report.write(&exp.out)?;
            print!("{}", report.to_text());
            Ok(if report.rows.iter().any(|r| r.partial) { EXIT_ABORTED } else { 0 })
        }
        Command::Convert {
            format,
            input,
            out,
            split,
            val_frac,
            test_frac,
            seed,
        } => {
            let ds = convert_dataset(format, &input, &out)?;
            println!(
                "{} nodes, {} edges, {} feature columns",
                ds.graph.num_nodes(),
                ds.graph.num_edges(),
                ds.features.as_ref().map_or(0, |f| f.cols())
            );
            let s = ds.stats;
            if s.self_loops_dropped + s.duplicates_dropped + s.dangling_dropped > 0 {
                println!(
                    "dropped: {} self-loops, {} duplicates, {} dangling",
                    s.self_loops_dropped, s.duplicates_dropped, s.dangling_dropped
                );
            }
            if split && ds.split.is_none() {
                let bundle = split_edges(&ds.graph, val_frac, test_frac, seed)?;
                write_split_bundle(&bundle, out.join(ncsm::datasets::CANONICAL_SPLIT_DIR))?;
                println!(
                    "split: {} train, {} valid, {} test",
                    bundle.train_pos.len(),
                    bundle.val_pos.len(),
                    bundle.test_pos.len()
                );
            }
            Ok(0)
        }
        Command::Score {
            dataset,
            splits,
            alpha,
            centrality,
            similarity,
            out,
        } => {
            let ds = load_dataset(&dataset)?;
            let graph = match splits {
                Some(dir) => load_split_bundle(&dir, Some(ds.graph.num_nodes()))?.train_graph,
                None => ds.graph,
            };
            let s = topo_score(&graph, centrality, similarity, alpha)?;
            fs::create_dir_all(&out)?;
            fs::write(out.join("node_scores.csv"), s.node_csv())?;
            fs::write(out.join("edge_scores.csv"), s.edge_csv(&graph))?;
            println!("wrote {} node and {} edge scores to {}", s.node_score.len(), s.edge_score.len(), out.display());
            Ok(0)
        }
    }
}
