//! Seeded multi-repeat experiments, the measure ablation grid, the alpha
//! sweep, and their reports.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::{load_dataset, Dataset};
use crate::error::{Error, Result};
use crate::graph::{load_split_bundle, split_edges, DataSplit};
use crate::metrics::MetricsReport;
use crate::topo::{CentralityKind, SimilarityKind, TopoComponents};
use crate::train::{evaluate, train, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    /// Pre-made split bundle; when absent each repeat draws its own split.
    pub splits: Option<PathBuf>,
    pub val_frac: f64,
    pub test_frac: f64,
    pub repeats: usize,
    /// Base seed; repeat `r` uses `seed + r` for its split and training.
    pub seed: u64,
    /// When false every repeat uses the base seed.
    pub reseed_repeats: bool,
    pub k: usize,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::new(),
            splits: None,
            val_frac: 0.05,
            test_frac: 0.1,
            repeats: 10,
            seed: 0,
            reseed_repeats: true,
            k: 20,
            train: TrainConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        let frac_ok = |f: f64| (0.0..1.0).contains(&f);
        if !frac_ok(self.val_frac) || !frac_ok(self.test_frac) || self.val_frac + self.test_frac >= 1.0 {
            return Err(Error::Config(format!(
                "split fractions val={} test={} must be in [0, 1) and sum below 1",
                self.val_frac, self.test_frac
            )));
        }
        for p in std::iter::once(&self.dataset).chain(&self.splits) {
            if !p.exists() {
                return Err(Error::Config(format!("{} does not exist", p.display())));
            }
        }
        self.train.validate()
    }

    fn repeat_seed(&self, r: usize) -> u64 {
        if self.reseed_repeats {
            self.seed.wrapping_add(r as u64)
        } else {
            self.seed
        }
    }
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(Self { mean, std: var.sqrt() })
    }

    /// `mean (std)` with four decimals.
    pub fn cell(&self) -> String {
        format!("{:.4} ({:.4})", self.mean, self.std)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub auc: Option<Stat>,
    pub ap: Option<Stat>,
    pub hits_at_k: Option<Stat>,
    pub completed: usize,
}

impl Aggregate {
    pub fn of(repeats: &[RepeatResult]) -> Self {
        let ok: Vec<&MetricsReport> = repeats.iter().filter_map(|r| r.metrics.as_ref()).collect();
        let col = |f: &dyn Fn(&MetricsReport) -> Option<f64>| -> Option<Stat> {
            let vals: Option<Vec<f64>> = ok.iter().map(|m| f(m)).collect();
            vals.and_then(|v| Stat::of(&v))
        };
        Self {
            auc: col(&|m| Some(m.auc)),
            ap: col(&|m| Some(m.ap)),
            hits_at_k: col(&|m| m.hits_at_k),
            completed: ok.len(),
        }
    }

    fn cells(&self) -> [String; 3] {
        let c = |s: &Option<Stat>| s.map_or_else(|| "n/a".to_string(), |s| s.cell());
        [c(&self.auc), c(&self.ap), c(&self.hits_at_k)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatResult {
    pub repeat: usize,
    /// Seed of the edge split, absent for fixed splits.
    pub split_seed: Option<u64>,
    pub train_seed: u64,
    pub metrics: Option<MetricsReport>,
    pub final_loss: Option<f64>,
    pub final_val_auc: Option<f64>,
    /// Set when the repeat failed.
    pub error: Option<String>,
    /// Epoch at which training aborted, if it did.
    pub aborted_at: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub nodes: usize,
    pub edges: usize,
    pub feature_dim: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub dataset: DatasetSummary,
    pub repeats: Vec<RepeatResult>,
    pub aggregate: Aggregate,
    /// True when some repeat did not finish.
    pub partial: bool,
    pub threads: usize,
    /// Kept out of the serialized report so that reruns compare equal.
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

impl RunReport {
    pub fn aborted(&self) -> bool {
        self.repeats.iter().any(|r| r.aborted_at.is_some())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "dataset {} ({} nodes, {} edges), {}+{} {}, alpha {}",
            self.config.dataset.display(),
            self.dataset.nodes,
            self.dataset.edges,
            self.config.train.similarity_kind.abbrev(),
            self.config.train.centrality_kind.abbrev(),
            self.config.train.encoder.layer_kind,
            self.config.train.alpha,
        );
        let k = self.config.k;
        let mut rows = vec![[
            "repeat".to_string(),
            "AUC".to_string(),
            "AP".to_string(),
            format!("Hits@{k}"),
        ]];
        for r in &self.repeats {
            let row = match &r.metrics {
                Some(m) => [
                    r.repeat.to_string(),
                    format!("{:.4}", m.auc),
                    format!("{:.4}", m.ap),
                    m.hits_at_k.map_or_else(|| "n/a".into(), |h| format!("{h:.4}")),
                ],
                None => [
                    r.repeat.to_string(),
                    "failed".into(),
                    r.error.clone().unwrap_or_default(),
                    String::new(),
                ],
            };
            rows.push(row);
        }
        let [a, b, c] = self.aggregate.cells();
        rows.push(["mean (std)".into(), a, b, c]);
        out.push_str(&format_table(&rows));
        if self.partial {
            out.push_str("partial: some repeats did not finish\n");
        }
        out
    }

    /// Writes `report.json`, `report.txt` and `timing.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        write_reports(dir, "report", &serde_json::to_string_pretty(self)?, &self.to_text())?;
        write_timing(dir, self.wall_clock_secs, self.threads)
    }
}

fn write_reports(dir: &Path, stem: &str, json: &str, text: &str) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(e).in_file(dir))?;
    for (name, body) in [(format!("{stem}.json"), json), (format!("{stem}.txt"), text)] {
        let p = dir.join(name);
        fs::write(&p, body).map_err(|e| Error::Io(e).in_file(&p))?;
    }
    Ok(())
}

fn write_timing(dir: &Path, secs: f64, threads: usize) -> Result<()> {
    let p = dir.join("timing.json");
    let body = serde_json::json!({ "wall_clock_secs": secs, "threads": threads });
    fs::write(&p, serde_json::to_string_pretty(&body)?).map_err(|e| Error::Io(e).in_file(&p))
}

/// Left-aligned first column, right-aligned others.
fn format_table<const N: usize>(rows: &[[String; N]]) -> String {
    let mut widths = [0usize; N];
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    for (i, r) in rows.iter().enumerate() {
        for (j, (c, w)) in r.iter().zip(widths).enumerate() {
            if j == 0 {
                let _ = write!(out, "{c:<w$}");
            } else {
                let _ = write!(out, "  {c:>w$}");
            }
        }
        out.push('\n');
        if i == 0 {
            let total = widths.iter().sum::<usize>() + 2 * (N - 1);
            out.push_str(&"-".repeat(total));
            out.push('\n');
        }
    }
    out
}

/// Dataset and split source shared by all repeats of an experiment.
pub struct Prepared {
    pub dataset: Dataset,
    pub fixed_split: Option<DataSplit>,
}

impl Prepared {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        let mut dataset = load_dataset(&cfg.dataset)?;
        let fixed_split = match &cfg.splits {
            Some(dir) => Some(load_split_bundle(dir, Some(dataset.graph.num_nodes()))?),
            None => dataset.split.take(),
        };
        Ok(Self { dataset, fixed_split })
    }

    fn summary(&self) -> DatasetSummary {
        DatasetSummary {
            nodes: self.dataset.graph.num_nodes(),
            edges: self.dataset.graph.num_edges(),
            feature_dim: self.dataset.features.as_ref().map(|f| f.cols()),
        }
    }

    /// Split used by repeat `r`.
    pub fn split(&self, cfg: &ExperimentConfig, r: usize) -> Result<(DataSplit, Option<u64>)> {
        match &self.fixed_split {
            Some(s) => Ok((s.clone(), None)),
            None => {
                let seed = cfg.repeat_seed(r);
                Ok((split_edges(&self.dataset.graph, cfg.val_frac, cfg.test_frac, seed)?, Some(seed)))
            }
        }
    }
}

fn run_repeat(prep: &Prepared, cfg: &ExperimentConfig, r: usize) -> RepeatResult {
    let train_seed = cfg.repeat_seed(r);
    let mut result = RepeatResult {
        repeat: r,
        split_seed: None,
        train_seed,
        metrics: None,
        final_loss: None,
        final_val_auc: None,
        error: None,
        aborted_at: None,
    };
    let outcome = (|| {
        let (split, split_seed) = prep.split(cfg, r)?;
        result.split_seed = split_seed;
        let tc = TrainConfig {
            seed: train_seed,
            ..cfg.train.clone()
        };
        let (model, history) = train(&split, prep.dataset.features.as_ref(), &tc)?;
        let last = history.epochs.last();
        result.final_loss = last.map(|e| e.loss);
        result.final_val_auc = last.and_then(|e| e.val_auc);
        evaluate(&model, &split.test_pos, &split.test_neg, cfg.k)
    })();
    match outcome {
        Ok(m) => result.metrics = Some(m),
        Err(e) => {
            log::warn!("repeat {r} failed: {e}");
            if let Error::TrainingAborted { epoch, .. } = &e {
                result.aborted_at = Some(*epoch);
            }
            result.error = Some(e.to_string());
        }
    }
    result
}

/// Runs every repeat on an already loaded dataset. Repeats execute in
/// parallel and are reported in repeat order.
pub fn run_prepared(prep: &Prepared, cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.train.validate()?;
    if cfg.repeats == 0 {
        return Err(Error::Config("repeats must be at least 1".into()));
    }
    let start = Instant::now();
    let repeats: Vec<RepeatResult> = (0..cfg.repeats)
        .into_par_iter()
        .map(|r| run_repeat(prep, cfg, r))
        .collect();
    let aggregate = Aggregate::of(&repeats);
    Ok(RunReport {
        config: cfg.clone(),
        dataset: prep.summary(),
        partial: aggregate.completed < repeats.len(),
        repeats,
        aggregate,
        threads: rayon::current_num_threads(),
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let prep = Prepared::load(cfg)?;
    run_prepared(&prep, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub similarity: SimilarityKind,
    pub centrality: CentralityKind,
    /// `RA+EC` style label.
    pub label: String,
    /// Marks the default combination.
    pub is_default: bool,
    pub aggregate: Aggregate,
    pub partial: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub config: ExperimentConfig,
    pub dataset: DatasetSummary,
    pub rows: Vec<AblationRow>,
    pub threads: usize,
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

impl AblationReport {
    pub fn to_text(&self) -> String {
        let mut rows = vec![[
            "method".to_string(),
            "AUC".into(),
            "AP".into(),
            format!("Hits@{}", self.config.k),
        ]];
        for r in &self.rows {
            let [a, b, c] = r.aggregate.cells();
            let label = if r.is_default {
                format!("{} *", r.label)
            } else {
                r.label.clone()
            };
            rows.push([label, a, b, c]);
        }
        let mut out = format_table(&rows);
        out.push_str("* default combination\n");
        out
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        write_reports(dir, "ablation", &serde_json::to_string_pretty(self)?, &self.to_text())?;
        write_timing(dir, self.wall_clock_secs, self.threads)
    }
}

/// Every similarity/centrality combination with the remaining settings of
/// `cfg`, each cell using the same seeds.
pub fn run_ablation_grid(cfg: &ExperimentConfig) -> Result<AblationReport> {
    cfg.validate()?;
    let prep = Prepared::load(cfg)?;
    let start = Instant::now();
    let defaults = TrainConfig::default();
    let cells: Vec<(SimilarityKind, CentralityKind)> = SimilarityKind::ALL
        .into_iter()
        .flat_map(|s| CentralityKind::ALL.into_iter().map(move |c| (s, c)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(s, c)| {
            let mut cell = cfg.clone();
            cell.train.similarity_kind = s;
            cell.train.centrality_kind = c;
            let report = run_prepared(&prep, &cell)?;
            Ok(AblationRow {
                similarity: s,
                centrality: c,
                label: format!("{}+{}", s.abbrev(), c.abbrev()),
                is_default: s == defaults.similarity_kind && c == defaults.centrality_kind,
                partial: report.partial,
                aggregate: report.aggregate,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AblationReport {
        config: cfg.clone(),
        dataset: prep.summary(),
        rows,
        threads: rayon::current_num_threads(),
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub aggregate: Aggregate,
    pub partial: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: ExperimentConfig,
    pub dataset: DatasetSummary,
    pub rows: Vec<SweepRow>,
    /// Whether, on the first repeat's training graph, the score at alpha 0
    /// equals the normalized similarity and at alpha 1 the normalized
    /// centrality, exactly.
    pub endpoints_exact: bool,
    pub threads: usize,
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

impl SweepReport {
    pub fn to_text(&self) -> String {
        let mut rows = vec![[
            "alpha".to_string(),
            "AUC".into(),
            "AP".into(),
            format!("Hits@{}", self.config.k),
        ]];
        for r in &self.rows {
            let [a, b, c] = r.aggregate.cells();
            rows.push([format!("{}", r.alpha), a, b, c]);
        }
        let mut out = format_table(&rows);
        let _ = writeln!(out, "endpoint check: {}", if self.endpoints_exact { "exact" } else { "MISMATCH" });
        out
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        write_reports(dir, "alpha_sweep", &serde_json::to_string_pretty(self)?, &self.to_text())?;
        write_timing(dir, self.wall_clock_secs, self.threads)
    }
}

/// True when `combine(0)` reproduces the normalized similarity and
/// `combine(1)` the normalized centrality on every entry.
pub fn check_alpha_endpoints(components: &TopoComponents, g: &crate::graph::Graph) -> Result<bool> {
    let s0 = components.combine(g, 0.0)?;
    let s1 = components.combine(g, 1.0)?;
    let edges0 = s0.edge_score == components.similarity;
    let nodes1 = s1.node_score == components.centrality;
    let edges1 = (0..g.num_nodes()).all(|u| g.slot_range(u).all(|k| s1.edge_score[k] == components.centrality[u]));
    Ok(edges0 && nodes1 && edges1)
}

pub fn run_alpha_sweep(cfg: &ExperimentConfig, alphas: &[f64]) -> Result<SweepReport> {
    cfg.validate()?;
    if alphas.is_empty() {
        return Err(Error::Config("alpha sweep needs at least one alpha".into()));
    }
    if let Some(a) = alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(Error::Config(format!("alpha {a} outside [0, 1]")));
    }
    let prep = Prepared::load(cfg)?;
    let start = Instant::now();
    let (split, _) = prep.split(cfg, 0)?;
    let components = TopoComponents::compute(&split.train_graph, cfg.train.centrality_kind, cfg.train.similarity_kind)?;
    let endpoints_exact = check_alpha_endpoints(&components, &split.train_graph)?;
    log::info!("alpha endpoint check: {}", if endpoints_exact { "exact" } else { "mismatch" });
    let rows = alphas
        .par_iter()
        .map(|&alpha| {
            let mut cell = cfg.clone();
            cell.train.alpha = alpha;
            let report = run_prepared(&prep, &cell)?;
            Ok(SweepRow {
                alpha,
                partial: report.partial,
                aggregate: report.aggregate,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport {
        config: cfg.clone(),
        dataset: prep.summary(),
        rows,
        endpoints_exact,
        threads: rayon::current_num_threads(),
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}

/// Minimum aggregate means for `--check` mode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub auc: Option<f64>,
    pub ap: Option<f64>,
    pub hits_at_k: Option<f64>,
}

impl Thresholds {
    /// Targets for the benchmark citation graphs, keyed by a dataset path
    /// component.
    pub fn for_dataset(path: &Path) -> Self {
        let name = path.to_string_lossy().to_lowercase();
        if name.contains("citeseer") {
            Self {
                auc: Some(0.88),
                ap: Some(0.85),
                hits_at_k: None,
            }
        } else if name.contains("cora") {
            Self {
                auc: Some(0.90),
                ap: Some(0.87),
                hits_at_k: Some(0.45),
            }
        } else {
            Self::default()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.auc.is_none() && self.ap.is_none() && self.hits_at_k.is_none()
    }

    /// One message per unmet threshold.
    pub fn failures(&self, agg: &Aggregate) -> Vec<String> {
        let mut out = Vec::new();
        let checks = [("AUC", self.auc, agg.auc), ("AP", self.ap, agg.ap), ("Hits@k", self.hits_at_k, agg.hits_at_k)];
        for (name, min, got) in checks {
            match (min, got) {
                (Some(min), Some(s)) if s.mean < min => out.push(format!("mean {name} {:.4} < {min}", s.mean)),
                (Some(_), None) => out.push(format!("{name} unavailable")),
                _ => {}
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stat_is_population() {
        let s = Stat::of(&[1.0, 3.0]).unwrap();
        assert_eq!((s.mean, s.std), (2.0, 1.0));
        assert_eq!(Stat::of(&[0.7]).unwrap().std, 0.0);
        assert!(Stat::of(&[]).is_none());
    }

    #[test]
    fn table_alignment() {
        let t = format_table(&[["a".to_string(), "bb".into()], ["ccc".into(), "d".into()]]);
        assert_eq!(t, "a    bb\n-------\nccc   d\n");
    }

    #[test]
    fn thresholds() {
        let t = Thresholds::for_dataset(Path::new("data/cora"));
        assert_eq!(t.auc, Some(0.90));
        let agg = Aggregate {
            auc: Stat::of(&[0.95]),
            ap: Stat::of(&[0.8]),
            hits_at_k: None,
            completed: 1,
        };
        assert_eq!(t.failures(&agg).len(), 2);
        assert!(Thresholds::for_dataset(Path::new("x")).is_empty());
    }
}
